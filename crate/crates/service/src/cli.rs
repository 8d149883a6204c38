//! `birs plan | sim | grid | serve`.
//!
//! Exit codes: 0 success, 1 runtime failure (including a mission that ends
//! without reaching its goal), 2 no path, 3 invalid input.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use birs_core::model::ModelError;
use birs_core::planner::PlanError;
use birs_core::sim::script::{events_to_ndjson, reached_goal, run_script, MissionScript};
use birs_core::sim::{NavMaps, SimError, SimParams};
use birs_core::weights::ConfigError;
use birs_core::{parse_model, BuildingModel, WeightConfig};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::docs::{plan_document, system_today, GridLayer};
use crate::session::{Session, SessionConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NO_PATH: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "birs", version, about = "Semantic building navigation")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Plan the lightest room sequence and write the path document.
    Plan(PlanArgs),
    /// Run a scripted mission headless and write its event log.
    Sim(SimArgs),
    /// Rasterize the walls and write a P5 graymap plus metadata.
    Grid(GridArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Building exchange document.
    #[arg(long)]
    pub model: PathBuf,
    /// Weight table; missing keys take their defaults.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Date for scan ages, YYYY-MM-DD. Defaults to today (UTC).
    #[arg(long)]
    pub today: Option<NaiveDate>,
    /// Grid resolution, m/cell.
    #[arg(long, default_value_t = birs_core::grid::DEFAULT_RESOLUTION)]
    pub resolution: f64,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub from: String,
    #[arg(long)]
    pub to: String,
    /// Where to write the path document.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub common: Common,
    /// Mission script.
    #[arg(long)]
    pub script: PathBuf,
    /// Where to write the event log; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: Common,
    /// walls, plan (inflated for planning) or collision (inflated by the robot radius).
    #[arg(long, default_value = "walls")]
    pub layer: String,
    /// Graymap path; metadata goes next to it with a `.json` extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Room the robot starts in.
    #[arg(long)]
    pub from: Option<String>,
    /// Wall-clock milliseconds per simulation step.
    #[arg(long, default_value_t = 50)]
    pub tick_ms: u64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: ModelError },
    #[error("{path}: {source}")]
    Weights { path: PathBuf, source: ConfigError },
    #[error("{path}: {source}")]
    Script {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("mission ended without reaching {goal}: {status}")]
    MissionFailed { goal: String, status: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model { .. } | CliError::Weights { .. } | CliError::Script { .. } | CliError::Usage(_) => {
                EXIT_INVALID
            }
            CliError::Sim(SimError::Plan(PlanError::NoPath { .. })) => EXIT_NO_PATH,
            CliError::Sim(
                SimError::UnknownRoom(_)
                | SimError::Plan(PlanError::UnknownRoom(_) | PlanError::SameEndpoints(_)),
            ) => EXIT_INVALID,
            CliError::Io { .. } | CliError::Sim(_) | CliError::MissionFailed { .. } => EXIT_FAILURE,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<BuildingModel, CliError> {
    parse_model(&read(path)?).map_err(|source| CliError::Model {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_weights(path: Option<&Path>) -> Result<WeightConfig, CliError> {
    match path {
        None => Ok(WeightConfig::default()),
        Some(p) => WeightConfig::from_json(&read(p)?).map_err(|source| CliError::Weights {
            path: p.to_path_buf(),
            source,
        }),
    }
}

impl Common {
    fn load(&self) -> Result<(BuildingModel, WeightConfig, NaiveDate, SimParams), CliError> {
        let model = load_model(&self.model)?;
        let weights = load_weights(self.weights.as_deref())?;
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(CliError::Usage(format!("--resolution {} must be > 0", self.resolution)));
        }
        let params = SimParams {
            resolution: self.resolution,
            ..SimParams::default()
        };
        Ok((model, weights, self.today.unwrap_or_else(system_today), params))
    }
}

/// Parses `args` (program name first) and runs the verb.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match dispatch(cli.verb, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(verb: Verb, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match verb {
        Verb::Plan(a) => plan(a, out, err),
        Verb::Sim(a) => sim(a, out, err),
        Verb::Grid(a) => grid(a, out),
        Verb::Serve(a) => serve(a, out),
    }
}

fn plan(a: PlanArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let (model, weights, today, params) = a.common.load()?;
    let maps = NavMaps::build(&model, &params).map_err(SimError::from)?;
    let doc = plan_document(&model, &weights, today, &maps.plan, &a.from, &a.to)?;
    let names: Vec<&str> = doc.path.room_names().collect();
    let _ = writeln!(out, "{}", names.join(" -> "));
    for w in &doc.path.warnings {
        let kind = serde_json::to_value(w.kind).expect("warning kind serializes");
        let _ = writeln!(err, "warning: {} {}", kind.as_str().unwrap_or_default(), w.room_ids.join(", "));
    }
    if let Some(path) = &a.out {
        let mut text = serde_json::to_string_pretty(&doc).expect("plan document serializes");
        text.push('\n');
        write(path, text.as_bytes())?;
    }
    Ok(EXIT_OK)
}

fn sim(a: SimArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let (model, weights, today, params) = a.common.load()?;
    let script = MissionScript::from_json(&read(&a.script)?).map_err(|source| CliError::Script {
        path: a.script.clone(),
        source,
    })?;
    if let Some(dt) = script.dt {
        if !(dt > 0.0 && dt <= 0.1) {
            return Err(CliError::Usage(format!("script dt {dt} outside (0, 0.1]")));
        }
    }
    let mission = run_script(&model, &weights, &script, today, params, |_| {})?;
    let log = events_to_ndjson(mission.events());
    match &a.out {
        Some(path) => write(path, log.as_bytes())?,
        None => {
            let _ = out.write_all(log.as_bytes());
        }
    }
    if reached_goal(&mission) {
        let p = mission.robot().pose;
        let _ = writeln!(err, "goal {} reached at t={:.2}s ({:.3}, {:.3})", script.destination, mission.clock(), p.x, p.y);
        Ok(EXIT_OK)
    } else {
        Err(CliError::MissionFailed {
            goal: script.destination,
            status: serde_json::to_value(mission.status())
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
        })
    }
}

fn parse_layer(s: &str) -> Result<GridLayer, CliError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| CliError::Usage(format!("--layer {s}: expected walls, plan or collision")))
}

fn grid(a: GridArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let layer = parse_layer(&a.layer)?;
    let (model, _, _, params) = a.common.load()?;
    let maps = NavMaps::build(&model, &params).map_err(SimError::from)?;
    let g = layer.pick(&maps);
    write(&a.out, &g.to_pgm())?;
    let meta_path = a.out.with_extension("json");
    let mut meta = serde_json::to_string_pretty(&g.metadata()).expect("metadata serializes");
    meta.push('\n');
    write(&meta_path, meta.as_bytes())?;
    let _ = writeln!(
        out,
        "{}x{} cells at {} m, {} occupied -> {}",
        g.width(),
        g.height(),
        g.resolution(),
        g.occupied_count(),
        a.out.display()
    );
    Ok(EXIT_OK)
}

fn serve(a: ServeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (model, weights, today, params) = a.common.load()?;
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad address {}:{}: {e}", a.host, a.port)))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io {
        path: PathBuf::from("<runtime>"),
        source,
    })?;
    runtime.block_on(async {
        let session = Session::start(SessionConfig {
            model,
            weights,
            today,
            params,
            initial_room: a.from,
            tick: Duration::from_millis(a.tick_ms),
        })?;
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| CliError::Io {
            path: PathBuf::from(addr.to_string()),
            source,
        })?;
        let local = listener.local_addr().map_err(|source| CliError::Io {
            path: PathBuf::from(addr.to_string()),
            source,
        })?;
        let _ = writeln!(out, "listening on http://{local}");
        let _ = out.flush();
        axum::serve(listener, crate::server::router(session))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|source| CliError::Io {
                path: PathBuf::from(local.to_string()),
                source,
            })?;
        Ok(EXIT_OK)
    })
}
