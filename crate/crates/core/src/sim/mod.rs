//! Mission execution on a simulated differential-drive robot.
//!
//! A [`MissionState`] owns the model snapshot, the active semantic and grid
//! paths, the robot and an append-only event log. It is advanced by
//! [`MissionState::step`] with a fixed time step; hazard edits and replans are
//! applied between steps.

mod follower;
pub mod script;

use std::sync::Arc;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::astar::{stitch, NavError, StitchedPath};
use crate::geometry::{Point2, Rect};
use crate::grid::{inflate, rasterize, GridError, OccupancyGrid, DEFAULT_INFLATION_RADIUS, DEFAULT_RESOLUTION};
use crate::hypergraph::build_hypergraph;
use crate::model::BuildingModel;
use crate::planner::{optimal_path, single_room_path, waypoints, PlanError, SemanticPath};
use crate::weights::WeightConfig;

pub use follower::{Command, PathFollower};

/// Optional Gaussian noise on the pose seen by the tracker. Ground truth is
/// never perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseNoise {
    pub std_xy: f64,
    pub std_theta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// m/s
    pub v_max: f64,
    /// rad/s
    pub omega_max: f64,
    /// m
    pub lookahead: f64,
    /// m
    pub goal_radius: f64,
    /// s
    pub dt: f64,
    /// Grid resolution, m/cell.
    pub resolution: f64,
    /// Wall inflation for planning, m.
    pub inflation_radius: f64,
    /// Wall inflation for the emergency stop, m: the robot's half-width.
    pub collision_radius: f64,
    pub pose_noise: Option<PoseNoise>,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            omega_max: 1.5,
            lookahead: 0.5,
            goal_radius: 0.3,
            dt: 0.05,
            resolution: DEFAULT_RESOLUTION,
            inflation_radius: DEFAULT_INFLATION_RADIUS,
            collision_radius: 0.3,
            pose_noise: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Heading, rad, counter-clockwise from +x.
    pub theta: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// One explicit Euler step of unicycle kinematics.
    pub fn integrate(&self, v: f64, omega: f64, dt: f64) -> Pose {
        Pose {
            x: self.x + v * self.theta.cos() * dt,
            y: self.y + v * self.theta.sin() * dt,
            theta: self.theta + omega * dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Idle,
    Executing,
    Estopped,
    Finished,
    Replanning,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub v: f64,
    pub omega: f64,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    MissionStarted,
    WaypointReached,
    RoomEntered,
    HazardInjected,
    Replanned,
    Warning,
    Estop,
    GoalReached,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Seconds since mission start, rounded to microseconds.
    pub t: f64,
    pub kind: EventKind,
    pub payload: serde_json::Value,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("unknown room {0}")]
    UnknownRoom(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// The raw wall raster plus its two inflations.
#[derive(Debug, Clone, PartialEq)]
pub struct NavMaps {
    pub walls: OccupancyGrid,
    /// Inflated by the planning radius; A* runs here.
    pub plan: OccupancyGrid,
    /// Inflated by the robot radius; the emergency stop checks here.
    pub collision: OccupancyGrid,
}

impl NavMaps {
    pub fn build(model: &BuildingModel, params: &SimParams) -> Result<Self, GridError> {
        let walls = rasterize(model, params.resolution)?;
        let plan = inflate(&walls, params.inflation_radius)?;
        let collision = inflate(&walls, params.collision_radius)?;
        Ok(Self { walls, plan, collision })
    }
}

struct RoomAnchor {
    id: String,
    name: String,
    center: Point2,
    extent: Option<Rect>,
}

fn anchors(model: &BuildingModel) -> Vec<RoomAnchor> {
    let mut out: Vec<RoomAnchor> = model
        .rooms
        .iter()
        .map(|r| RoomAnchor {
            id: r.id.clone(),
            name: r.name.clone(),
            center: r.center,
            extent: model.room_extent(r),
        })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

fn round_t(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

pub struct MissionState {
    model: BuildingModel,
    config: WeightConfig,
    today: NaiveDate,
    params: SimParams,
    maps: Arc<NavMaps>,
    rooms: Vec<RoomAnchor>,
    goal: String,
    semantic: SemanticPath,
    grid_path: StitchedPath,
    follower: PathFollower,
    next_waypoint: usize,
    robot: RobotState,
    current_room: String,
    events: Vec<Event>,
    clock: f64,
    noise: Option<(ChaCha8Rng, Normal<f64>, Normal<f64>)>,
}

impl MissionState {
    /// Plans from `start` to `goal` and places the robot at the start room center.
    pub fn start(
        model: BuildingModel,
        config: WeightConfig,
        today: NaiveDate,
        params: SimParams,
        maps: Arc<NavMaps>,
        start: &str,
        goal: &str,
    ) -> Result<Self, SimError> {
        let origin = model.room(start).ok_or_else(|| SimError::UnknownRoom(start.to_string()))?.center;
        if model.room(goal).is_none() {
            return Err(SimError::UnknownRoom(goal.to_string()));
        }
        let graph = build_hypergraph(&model, &config, today);
        let semantic = optimal_path(&graph, start, goal, &config)?;
        let grid_path = stitch(&maps.plan, &waypoints(&semantic))?;

        let ahead = grid_path
            .path
            .points
            .iter()
            .find(|p| p.distance(&origin) >= params.lookahead)
            .copied()
            .unwrap_or(semantic.x_y_path[semantic.x_y_path.len() - 1]);
        let theta = (ahead.y - origin.y).atan2(ahead.x - origin.x);
        let noise = params.pose_noise.map(|n| {
            (
                ChaCha8Rng::seed_from_u64(n.seed),
                Normal::new(0.0, n.std_xy).expect("std_xy must be finite and >= 0"),
                Normal::new(0.0, n.std_theta).expect("std_theta must be finite and >= 0"),
            )
        });

        let mut mission = Self {
            rooms: anchors(&model),
            model,
            config,
            today,
            params,
            maps,
            goal: goal.to_string(),
            semantic,
            grid_path,
            follower: PathFollower::new(),
            next_waypoint: 1,
            robot: RobotState {
                pose: Pose::new(origin.x, origin.y, theta),
                v: 0.0,
                omega: 0.0,
                status: Status::Executing,
            },
            current_room: start.to_string(),
            events: Vec::new(),
            clock: 0.0,
            noise,
        };
        let payload = json!({
            "from": start,
            "to": goal,
            "rooms": mission.semantic.room_ids().collect::<Vec<_>>(),
            "total_weight": mission.semantic.total_weight,
            "grid_length": mission.grid_path.path.length,
        });
        mission.log(EventKind::MissionStarted, payload);
        mission.log_warnings();
        Ok(mission)
    }

    pub fn model(&self) -> &BuildingModel {
        &self.model
    }

    pub fn config(&self) -> &WeightConfig {
        &self.config
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn maps(&self) -> &NavMaps {
        &self.maps
    }

    pub fn goal(&self) -> &str {
        &self.goal
    }

    pub fn semantic_path(&self) -> &SemanticPath {
        &self.semantic
    }

    pub fn grid_path(&self) -> &StitchedPath {
        &self.grid_path
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn status(&self) -> Status {
        self.robot.status
    }

    pub fn current_room(&self) -> &str {
        &self.current_room
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn is_active(&self) -> bool {
        matches!(self.robot.status, Status::Executing | Status::Replanning)
    }

    /// Weights used by the next replan. The active path is left alone.
    pub fn set_config(&mut self, config: WeightConfig) {
        self.config = config;
    }

    fn log(&mut self, kind: EventKind, payload: serde_json::Value) {
        self.events.push(Event {
            t: round_t(self.clock),
            kind,
            payload,
        });
    }

    fn log_warnings(&mut self) {
        let warnings = self.semantic.warnings.clone();
        let total = self.semantic.total_weight;
        for w in warnings {
            self.log(
                EventKind::Warning,
                json!({ "kind": w.kind, "room_ids": w.room_ids, "total_weight": total }),
            );
        }
    }

    /// Ends the mission without reaching the goal.
    pub fn abort(&mut self, reason: &str) {
        if self.is_active() {
            self.robot.v = 0.0;
            self.robot.omega = 0.0;
            self.robot.status = Status::Aborted;
            self.log(EventKind::Aborted, json!({ "reason": reason }));
        }
    }

    fn observed_pose(&mut self) -> Pose {
        let mut pose = self.robot.pose;
        if let Some((rng, xy, th)) = self.noise.as_mut() {
            pose.x += xy.sample(rng);
            pose.y += xy.sample(rng);
            pose.theta += th.sample(rng);
        }
        pose
    }

    /// Advances the mission by `dt` seconds (0 < dt <= 0.1).
    pub fn step(&mut self, dt: f64) {
        assert!(dt > 0.0 && dt <= 0.1, "time step {dt} outside (0, 0.1]");
        if !self.is_active() {
            return;
        }
        let goal_point = self.semantic.x_y_path[self.semantic.x_y_path.len() - 1];
        let seen = self.observed_pose();
        let cmd = self.follower.command(&self.grid_path.path, goal_point, &seen, &self.params);
        if cmd.finished {
            self.robot.v = 0.0;
            self.robot.omega = 0.0;
            self.flush_waypoints(self.grid_path.path.cells.len() - 1);
            self.robot.status = Status::Finished;
            let p = self.robot.pose;
            let goal = self.goal.clone();
            self.log(EventKind::GoalReached, json!({ "room_id": goal, "x": p.x, "y": p.y }));
            return;
        }
        self.advance(cmd.v, cmd.omega, dt);
    }

    /// Like [`step`](Self::step) but with an explicit command in place of the
    /// path follower. Velocities are clamped to the robot's limits.
    pub fn drive(&mut self, v: f64, omega: f64, dt: f64) {
        assert!(dt > 0.0 && dt <= 0.1, "time step {dt} outside (0, 0.1]");
        if !self.is_active() {
            return;
        }
        self.set_command(v, omega);
        self.advance(self.robot.v, self.robot.omega, dt);
    }

    fn advance(&mut self, v: f64, omega: f64, dt: f64) {
        self.robot.v = v;
        self.robot.omega = omega;
        if self.estop_check(dt) {
            return;
        }
        self.robot.pose = self.robot.pose.integrate(v, omega, dt);
        self.clock += dt;
        self.flush_waypoints(self.follower.progress());
        self.update_room();
    }

    /// Stops the robot if the current command would move it into an occupied
    /// collision cell within `dt`. Returns true when stopped.
    pub fn estop_check(&mut self, dt: f64) -> bool {
        if !self.is_active() {
            return false;
        }
        let next = self.robot.pose.integrate(self.robot.v, self.robot.omega, dt);
        if !self.maps.collision.blocked_at(next.position()) {
            return false;
        }
        self.robot.v = 0.0;
        self.robot.omega = 0.0;
        self.robot.status = Status::Estopped;
        let p = self.robot.pose;
        self.log(EventKind::Estop, json!({ "x": p.x, "y": p.y, "theta": p.theta }));
        true
    }

    /// Overrides the robot's commanded velocities until the next step.
    pub fn set_command(&mut self, v: f64, omega: f64) {
        self.robot.v = v.clamp(-self.params.v_max, self.params.v_max);
        self.robot.omega = omega.clamp(-self.params.omega_max, self.params.omega_max);
    }

    fn flush_waypoints(&mut self, reached_index: usize) {
        while self.next_waypoint < self.grid_path.waypoint_indices.len()
            && self.next_waypoint < self.semantic.semantic_path.len()
            && self.grid_path.waypoint_indices[self.next_waypoint] <= reached_index
        {
            let k = self.next_waypoint;
            let id = self.semantic.semantic_path[k].clone();
            let p = self.semantic.x_y_path[k];
            let kind = if k.is_multiple_of(2) { "room" } else { "door" };
            self.log(
                EventKind::WaypointReached,
                json!({ "index": k, "kind": kind, "id": id, "x": p.x, "y": p.y }),
            );
            self.next_waypoint += 1;
        }
    }

    /// Room whose center is nearest among rooms whose extent contains `p`.
    pub fn room_at(&self, p: Point2) -> Option<&str> {
        self.rooms
            .iter()
            .filter(|r| r.extent.is_some_and(|e| e.contains(&p)))
            .min_by(|a, b| a.center.distance(&p).total_cmp(&b.center.distance(&p)))
            .map(|r| r.id.as_str())
    }

    fn update_room(&mut self) {
        let Some(room) = self.room_at(self.robot.pose.position()) else { return };
        if room != self.current_room {
            let room = room.to_string();
            let name = self.rooms.iter().find(|r| r.id == room).map(|r| r.name.clone());
            self.current_room = room.clone();
            self.log(EventKind::RoomEntered, json!({ "room_id": room, "name": name }));
        }
    }

    /// Sets or clears a room's hazard flag. An active hazard on a room of the
    /// active path triggers a replan from the current room.
    pub fn inject_hazard(&mut self, room_id: &str, active: bool) -> Result<(), SimError> {
        let room = self
            .model
            .room_mut(room_id)
            .ok_or_else(|| SimError::UnknownRoom(room_id.to_string()))?;
        room.hazard = active;
        self.log(EventKind::HazardInjected, json!({ "room_id": room_id, "active": active }));
        if active && self.is_active() && self.semantic.contains_room(room_id) {
            self.robot.status = Status::Replanning;
            self.replan();
        }
        Ok(())
    }

    /// Rebuilds the hypergraph from the current model and re-plans from the
    /// current room to the original goal. The new grid path starts at the
    /// robot's pose. Returns false when the mission had to be aborted.
    pub fn replan(&mut self) -> bool {
        if !self.is_active() {
            return false;
        }
        let graph = build_hypergraph(&self.model, &self.config, self.today);
        let from = self.current_room.clone();
        let planned = if from == self.goal {
            single_room_path(&graph, &from, &self.config)
        } else {
            optimal_path(&graph, &from, &self.goal, &self.config)
        };
        let semantic = match planned {
            Ok(p) => p,
            Err(e) => {
                self.abort(&e.to_string());
                return false;
            }
        };
        let mut points = vec![self.robot.pose.position()];
        points.extend_from_slice(&semantic.x_y_path[1..]);
        if points.len() == 1 {
            points.push(semantic.x_y_path[0]);
        }
        let grid_path = match stitch(&self.maps.plan, &points) {
            Ok(p) => p,
            Err(e) => {
                self.abort(&e.to_string());
                return false;
            }
        };
        self.semantic = semantic;
        self.grid_path = grid_path;
        self.follower = PathFollower::new();
        self.next_waypoint = 1;
        self.robot.status = Status::Executing;
        let payload = json!({
            "from": from,
            "rooms": self.semantic.room_ids().collect::<Vec<_>>(),
            "total_weight": self.semantic.total_weight,
            "grid_length": self.grid_path.path.length,
        });
        self.log(EventKind::Replanned, payload);
        self.log_warnings();
        true
    }
}
