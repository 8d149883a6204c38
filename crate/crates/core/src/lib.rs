//! Building-information-driven navigation.
//!
//! A building exchange document ([`model`]) becomes a weighted directed
//! hypergraph ([`hypergraph`]) on which [`planner`] finds the lightest room
//! sequence. The sequence's room and door centers are then joined by A* on a
//! wall-derived occupancy grid ([`grid`], [`astar`]) and driven by a simulated
//! robot ([`sim`]).

pub mod astar;
pub mod geometry;
pub mod grid;
pub mod hypergraph;
pub mod model;
pub mod planner;
pub mod sim;
pub mod weights;

pub use astar::{astar, stitch, GridPath, NavError, StitchedPath};
pub use geometry::{Point2, Rect, Segment};
pub use grid::{inflate, rasterize, OccupancyGrid};
pub use hypergraph::{build_hypergraph, path_weight, Hypergraph};
pub use model::{parse_model, validate_model, BuildingModel};
pub use planner::{optimal_path, shortest_sum_b_tree, SemanticPath};
pub use sim::{MissionState, SimParams};
pub use weights::WeightConfig;
