//! Service state and the single-writer mission loop.
//!
//! Handlers never touch the [`MissionState`]. They send a [`Command`] to the
//! runner task, which applies it between simulation steps and publishes the
//! resulting events and robot samples to telemetry subscribers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use birs_core::sim::{Event, EventKind, MissionState, NavMaps, RobotState, SimError, SimParams, Status};
use birs_core::{BuildingModel, Point2, SemanticPath, WeightConfig};
use chrono::NaiveDate;
use serde::Serialize;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::Instant;

use crate::docs::{StateRecord, TelemetryRecord};
use crate::error::ApiError;

/// Records buffered per telemetry subscriber before it starts losing them.
pub const TELEMETRY_BUFFER: usize = 1 << 14;

#[derive(Debug, Clone, Default, Serialize)]
pub struct MissionSnapshot {
    pub active: bool,
    pub status: Option<Status>,
    pub from: Option<String>,
    pub goal: Option<String>,
    pub robot: Option<RobotState>,
    /// Room the robot is in, or was left in by the last mission.
    pub room_id: Option<String>,
    pub clock: f64,
    pub path: Option<SemanticPath>,
    pub grid_path: Vec<Point2>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardOutcome {
    pub room_id: String,
    pub active: bool,
    /// Whether the active mission had to replan.
    pub replanned: bool,
    pub path: Option<SemanticPath>,
}

pub enum Command {
    Start {
        from: String,
        to: String,
        reply: oneshot::Sender<Result<MissionSnapshot, ApiError>>,
    },
    Abort {
        reply: oneshot::Sender<Result<MissionSnapshot, ApiError>>,
    },
    Hazard {
        room_id: String,
        active: bool,
        reply: oneshot::Sender<Result<HazardOutcome, ApiError>>,
    },
    Weights {
        config: WeightConfig,
        reply: oneshot::Sender<()>,
    },
}

/// Everything one service instance holds.
pub struct Session {
    pub model: RwLock<BuildingModel>,
    pub config: RwLock<WeightConfig>,
    pub maps: Arc<NavMaps>,
    pub params: SimParams,
    pub today: NaiveDate,
    pub snapshot: RwLock<MissionSnapshot>,
    pub subscribers: AtomicUsize,
    telemetry: broadcast::Sender<Arc<str>>,
    commands: mpsc::Sender<Command>,
}

pub struct SessionConfig {
    pub model: BuildingModel,
    pub weights: WeightConfig,
    pub today: NaiveDate,
    pub params: SimParams,
    /// Where the robot is before its first mission.
    pub initial_room: Option<String>,
    /// Wall-clock time per simulation step. Zero runs as fast as possible.
    pub tick: Duration,
}

impl Session {
    /// Builds the grids and spawns the mission loop on the current runtime.
    pub fn start(cfg: SessionConfig) -> Result<Arc<Self>, SimError> {
        if let Some(r) = &cfg.initial_room {
            if cfg.model.room(r).is_none() {
                return Err(SimError::UnknownRoom(r.clone()));
            }
        }
        let maps = Arc::new(NavMaps::build(&cfg.model, &cfg.params)?);
        let (telemetry, _) = broadcast::channel(TELEMETRY_BUFFER);
        let (commands, rx) = mpsc::channel(64);
        let session = Arc::new(Self {
            model: RwLock::new(cfg.model),
            config: RwLock::new(cfg.weights),
            maps,
            params: cfg.params,
            today: cfg.today,
            snapshot: RwLock::new(MissionSnapshot {
                room_id: cfg.initial_room,
                ..MissionSnapshot::default()
            }),
            subscribers: AtomicUsize::new(0),
            telemetry,
            commands,
        });
        tokio::spawn(Runner::new(Arc::clone(&session), cfg.tick).run(rx));
        Ok(session)
    }

    pub fn subscribe(self: &Arc<Self>) -> Subscription {
        self.subscribers.fetch_add(1, Ordering::SeqCst);
        Subscription {
            session: Arc::clone(self),
            rx: self.telemetry.subscribe(),
        }
    }

    pub fn model_snapshot(&self) -> BuildingModel {
        self.model.read().expect("model lock").clone()
    }

    pub fn config_snapshot(&self) -> WeightConfig {
        self.config.read().expect("config lock").clone()
    }

    pub fn mission_snapshot(&self) -> MissionSnapshot {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub async fn send(&self, cmd: Command) -> Result<(), ApiError> {
        self.commands
            .send(cmd)
            .await
            .map_err(|_| ApiError::internal("mission loop stopped"))
    }
}

/// A telemetry receiver that keeps the subscriber count honest.
pub struct Subscription {
    session: Arc<Session>,
    rx: broadcast::Receiver<Arc<str>>,
}

impl Subscription {
    /// Next serialized record. A subscriber that falls more than
    /// [`TELEMETRY_BUFFER`] records behind skips ahead.
    pub async fn recv(&mut self) -> Option<Arc<str>> {
        loop {
            match self.rx.recv().await {
                Ok(line) => return Some(line),
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        self.session.subscribers.fetch_sub(1, Ordering::SeqCst);
    }
}

struct Runner {
    session: Arc<Session>,
    tick: Duration,
    mission: Option<MissionState>,
    published: usize,
}

impl Runner {
    fn new(session: Arc<Session>, tick: Duration) -> Self {
        Self {
            session,
            tick,
            mission: None,
            published: 0,
        }
    }

    fn active(&self) -> bool {
        self.mission.as_ref().is_some_and(MissionState::is_active)
    }

    async fn run(mut self, mut rx: mpsc::Receiver<Command>) {
        let mut next = Instant::now();
        loop {
            if self.active() {
                tokio::select! {
                    biased;
                    cmd = rx.recv() => match cmd {
                        Some(cmd) => self.handle(cmd),
                        None => break,
                    },
                    _ = tokio::time::sleep_until(next) => {
                        self.step();
                        next += self.tick;
                        let now = Instant::now();
                        if next < now {
                            next = now;
                        }
                        if self.tick.is_zero() {
                            tokio::task::yield_now().await;
                        }
                    }
                }
            } else {
                match rx.recv().await {
                    Some(cmd) => self.handle(cmd),
                    None => break,
                }
                next = Instant::now() + self.tick;
            }
        }
    }

    fn step(&mut self) {
        let Some(m) = self.mission.as_mut() else { return };
        let dt = m.params().dt;
        m.step(dt);
        self.publish();
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Start { from, to, reply } => {
                let _ = reply.send(self.start(&from, &to));
            }
            Command::Abort { reply } => {
                let result = match self.mission.as_mut() {
                    Some(m) if m.is_active() => {
                        m.abort("operator");
                        self.publish();
                        Ok(self.session.mission_snapshot())
                    }
                    _ => Err(ApiError::conflict("no active mission")),
                };
                let _ = reply.send(result);
            }
            Command::Hazard { room_id, active, reply } => {
                let _ = reply.send(self.hazard(&room_id, active));
            }
            Command::Weights { config, reply } => {
                if let Some(m) = self.mission.as_mut() {
                    m.set_config(config);
                }
                let _ = reply.send(());
            }
        }
    }

    fn start(&mut self, from: &str, to: &str) -> Result<MissionSnapshot, ApiError> {
        if self.active() {
            return Err(ApiError::conflict("a mission is already active"));
        }
        let s = &self.session;
        let mission = MissionState::start(
            s.model_snapshot(),
            s.config_snapshot(),
            s.today,
            s.params.clone(),
            Arc::clone(&s.maps),
            from,
            to,
        )?;
        {
            let mut snap = s.snapshot.write().expect("snapshot lock");
            *snap = MissionSnapshot {
                from: Some(from.to_string()),
                goal: Some(to.to_string()),
                ..MissionSnapshot::default()
            };
        }
        self.mission = Some(mission);
        self.published = 0;
        self.publish();
        Ok(self.session.mission_snapshot())
    }

    fn hazard(&mut self, room_id: &str, active: bool) -> Result<HazardOutcome, ApiError> {
        {
            let mut model = self.session.model.write().expect("model lock");
            let room = model.room_mut(room_id).ok_or_else(|| ApiError::unknown_room(room_id))?;
            room.hazard = active;
        }
        let mut outcome = HazardOutcome {
            room_id: room_id.to_string(),
            active,
            replanned: false,
            path: None,
        };
        if let Some(m) = self.mission.as_mut().filter(|m| m.is_active()) {
            let before = m.events().len();
            m.inject_hazard(room_id, active)?;
            outcome.replanned = m.events()[before..].iter().any(|e| e.kind == EventKind::Replanned);
            outcome.path = Some(m.semantic_path().clone());
            self.publish();
        }
        Ok(outcome)
    }

    /// Sends events not yet published, then one robot sample, and mirrors the
    /// mission into the shared snapshot.
    fn publish(&mut self) {
        let Some(m) = self.mission.as_ref() else { return };
        let events = &m.events()[self.published..];
        let room = m.current_room().to_string();
        let mut lines: Vec<Arc<str>> = events
            .iter()
            .map(|e| line(&TelemetryRecord::Event(e.clone())))
            .collect();
        lines.push(line(&TelemetryRecord::State(StateRecord::new(m.clock(), m.robot(), &room))));

        {
            let mut snap = self.session.snapshot.write().expect("snapshot lock");
            snap.active = m.is_active();
            snap.status = Some(m.status());
            snap.robot = Some(*m.robot());
            snap.room_id = Some(room);
            snap.clock = m.clock();
            if snap.path.as_ref() != Some(m.semantic_path()) {
                snap.path = Some(m.semantic_path().clone());
                snap.grid_path = m.grid_path().path.points.clone();
            }
            snap.events.extend_from_slice(events);
        }
        self.published = m.events().len();
        for l in lines {
            // No subscribers is fine.
            let _ = self.session.telemetry.send(l);
        }
    }
}

fn line(record: &TelemetryRecord) -> Arc<str> {
    serde_json::to_string(record).expect("telemetry serializes").into()
}
