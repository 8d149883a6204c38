//! Documents shared by the HTTP API and the command line.

use base64::Engine;
use birs_core::grid::GridMetadata;
use birs_core::hypergraph::{build_hypergraph, scan_age_days, WeightTerms};
use birs_core::model::MaterialClass;
use birs_core::planner::{optimal_path, waypoints};
use birs_core::sim::{Event, NavMaps, Pose, RobotState, SimError, Status};
use birs_core::{stitch, BuildingModel, OccupancyGrid, Point2, SemanticPath, WeightConfig};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Path export: the semantic path plus the metric path it expands to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub from: String,
    pub to: String,
    #[serde(flatten)]
    pub path: SemanticPath,
    /// Room and door centers, `[x, y]` meters.
    pub waypoints: Vec<Point2>,
    /// Cell centers of the stitched A* path.
    pub grid_path: Vec<Point2>,
    /// Meters.
    pub grid_length: f64,
}

/// Plans `from -> to` and stitches the grid path on `grid`.
pub fn plan_document(
    model: &BuildingModel,
    config: &WeightConfig,
    today: NaiveDate,
    grid: &OccupancyGrid,
    from: &str,
    to: &str,
) -> Result<PlanDocument, SimError> {
    for id in [from, to] {
        if model.room(id).is_none() {
            return Err(SimError::UnknownRoom(id.to_string()));
        }
    }
    let graph = build_hypergraph(model, config, today);
    let path = optimal_path(&graph, from, to, config)?;
    let points = waypoints(&path);
    let stitched = stitch(grid, &points)?;
    Ok(PlanDocument {
        from: from.to_string(),
        to: to.to_string(),
        path,
        waypoints: points,
        grid_path: stitched.path.points,
        grid_length: stitched.path.length,
    })
}

/// One room as the operator sees it, with its current weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoomInfo {
    pub id: String,
    pub name: String,
    pub center: Point2,
    pub area: f64,
    pub wall_ids: Vec<String>,
    pub last_scan: Option<NaiveDate>,
    /// Whole days since the last scan, `None` if never scanned.
    pub scan_age_days: Option<i64>,
    pub hazard: bool,
    pub curtain: bool,
    pub terms: WeightTerms,
    pub weight: f64,
}

pub fn room_infos(model: &BuildingModel, config: &WeightConfig, today: NaiveDate) -> Vec<RoomInfo> {
    let graph = build_hypergraph(model, config, today);
    graph
        .nodes
        .iter()
        .map(|n| {
            let room = model.room(&n.room_id).expect("graph nodes are model rooms");
            RoomInfo {
                id: room.id.clone(),
                name: room.name.clone(),
                center: room.center,
                area: room.area,
                wall_ids: room.wall_ids.clone(),
                last_scan: room.last_scan,
                scan_age_days: room.last_scan.map(|d| scan_age_days(d, today)),
                hazard: room.hazard,
                curtain: model
                    .walls_of(room)
                    .iter()
                    .any(|w| w.material_class == MaterialClass::Curtain),
                terms: n.terms,
                weight: n.weight,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridLayer {
    /// Wall strokes only.
    #[default]
    Walls,
    /// Inflated by the planning radius.
    Plan,
    /// Inflated by the robot radius.
    Collision,
}

impl GridLayer {
    pub fn pick(self, maps: &NavMaps) -> &OccupancyGrid {
        match self {
            GridLayer::Walls => &maps.walls,
            GridLayer::Plan => &maps.plan,
            GridLayer::Collision => &maps.collision,
        }
    }
}

/// Graymap plus its sidecar metadata in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDocument {
    pub layer: GridLayer,
    #[serde(flatten)]
    pub metadata: GridMetadata,
    pub occupied: usize,
    /// Binary P5 graymap, base64.
    pub pgm: String,
}

impl GridDocument {
    pub fn new(layer: GridLayer, grid: &OccupancyGrid) -> Self {
        Self {
            layer,
            metadata: grid.metadata(),
            occupied: grid.occupied_count(),
            pgm: base64::engine::general_purpose::STANDARD.encode(grid.to_pgm()),
        }
    }
}

/// Robot state sample on the telemetry stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub t: f64,
    pub pose: Pose,
    pub v: f64,
    pub omega: f64,
    pub status: Status,
    pub room_id: String,
}

impl StateRecord {
    pub fn new(t: f64, robot: &RobotState, room_id: &str) -> Self {
        Self {
            t: (t * 1e6).round() / 1e6,
            pose: robot.pose,
            v: robot.v,
            omega: robot.omega,
            status: robot.status,
            room_id: room_id.to_string(),
        }
    }
}

/// One line of the telemetry stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TelemetryRecord {
    State(StateRecord),
    Event(Event),
}

/// Dates are taken from the system clock in UTC unless given.
pub fn system_today() -> NaiveDate {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    NaiveDate::from_ymd_opt(1970, 1, 1)
        .and_then(|epoch| epoch.checked_add_days(chrono::Days::new(secs / 86_400)))
        .expect("date in range")
}
