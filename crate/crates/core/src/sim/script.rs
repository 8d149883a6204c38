//! Headless mission scripts and event-log export.

use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Event, MissionState, NavMaps, SimError, SimParams, Status};
use crate::model::BuildingModel;
use crate::weights::WeightConfig;

/// Default wall-clock budget for a scripted mission, simulated seconds.
pub const DEFAULT_MAX_TIME: f64 = 600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedHazard {
    /// Simulated seconds after mission start.
    pub t: f64,
    pub room_id: String,
    #[serde(default = "yes")]
    pub active: bool,
}

fn yes() -> bool {
    true
}

/// A headless run: where the robot starts, where it goes, and timed hazard edits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionScript {
    pub start: String,
    pub destination: String,
    /// Date used for scan-age weighting; defaults to the caller's choice.
    #[serde(default)]
    pub today: Option<NaiveDate>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub max_time: Option<f64>,
    #[serde(default)]
    pub hazards: Vec<ScriptedHazard>,
}

impl MissionScript {
    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

/// Runs a script to completion, estop, abort or timeout. `observe` sees the
/// mission after every step.
pub fn run_script(
    model: &BuildingModel,
    config: &WeightConfig,
    script: &MissionScript,
    today: NaiveDate,
    mut params: SimParams,
    mut observe: impl FnMut(&MissionState),
) -> Result<MissionState, SimError> {
    if let Some(dt) = script.dt {
        params.dt = dt;
    }
    let dt = params.dt;
    let today = script.today.unwrap_or(today);
    let maps = Arc::new(NavMaps::build(model, &params)?);
    let mut mission = MissionState::start(
        model.clone(),
        config.clone(),
        today,
        params,
        maps,
        &script.start,
        &script.destination,
    )?;

    let mut hazards = script.hazards.clone();
    hazards.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut pending = hazards.into_iter().peekable();
    let max_time = script.max_time.unwrap_or(DEFAULT_MAX_TIME);

    observe(&mission);
    while mission.is_active() {
        while let Some(h) = pending.next_if(|h| h.t <= mission.clock() + 1e-9) {
            mission.inject_hazard(&h.room_id, h.active)?;
        }
        if !mission.is_active() {
            break;
        }
        if mission.clock() >= max_time {
            mission.abort("timeout");
            break;
        }
        mission.step(dt);
        observe(&mission);
    }
    Ok(mission)
}

/// Newline-delimited JSON, one event per line.
pub fn events_to_ndjson(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

/// Whether the run ended at the goal.
pub fn reached_goal(mission: &MissionState) -> bool {
    mission.status() == Status::Finished
}
