//! Operator service and command-line front end for semantic building navigation.

pub mod cli;
pub mod docs;
pub mod error;
pub mod server;
pub mod session;
