//! Building exchange format: rooms, walls and doors with the semantics the
//! planner consumes, plus parsing and invariant checking.
//!
//! The exchange file is JSON:
//!
//! ```json
//! {
//!   "birs_schema": 1,
//!   "bounds": { "min": [0, 0], "max": [30, 20] },
//!   "rooms": [{ "id": "R1", "name": "LOBBY", "center": [3, 6], "area": 72,
//!               "wall_ids": ["WL-01"], "last_scan": "2021-05-01", "hazard": false }],
//!   "walls": [{ "id": "WL-01", "material_class": "standard",
//!               "segments": [[[0, 0], [6, 0]]], "thickness": 0.2 }],
//!   "doors": [{ "id": "D1", "center": [6, 6], "from_room": "R1", "to_room": "R2",
//!               "opening": "push" }]
//! }
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Rect, Segment};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_WALL_THICKNESS: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub id: String,
    pub name: String,
    pub center: Point2,
    /// Square meters.
    pub area: f64,
    #[serde(default)]
    pub wall_ids: Vec<String>,
    /// `None` means the room was never scanned.
    #[serde(default)]
    pub last_scan: Option<NaiveDate>,
    /// Ongoing construction activity.
    #[serde(default)]
    pub hazard: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialClass {
    Standard,
    /// Glass facade; present in the model but invisible to range sensors.
    Curtain,
}

fn default_thickness() -> f64 {
    DEFAULT_WALL_THICKNESS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wall {
    pub id: String,
    pub material_class: MaterialClass,
    pub segments: Vec<Segment>,
    #[serde(default = "default_thickness")]
    pub thickness: f64,
}

/// How a door opens when traversed from `from_room` to `to_room`.
/// The reverse traversal takes the complementary kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Opening {
    Push,
    Pull,
}

impl Opening {
    pub fn reversed(self) -> Opening {
        match self {
            Opening::Push => Opening::Pull,
            Opening::Pull => Opening::Push,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Door {
    pub id: String,
    pub center: Point2,
    pub from_room: String,
    pub to_room: String,
    pub opening: Opening,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingModel {
    pub bounds: Rect,
    pub rooms: Vec<Room>,
    pub walls: Vec<Wall>,
    pub doors: Vec<Door>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExchangeDoc {
    birs_schema: u32,
    bounds: Rect,
    rooms: Vec<Room>,
    walls: Vec<Wall>,
    doors: Vec<Door>,
}

/// Names of the model invariants, as reported by [`validate_model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    UniqueId,
    DanglingRef,
    NoSelfLoop,
    PositiveArea,
    NonEmptySegments,
    NonzeroSegment,
    PositiveThickness,
    ValidBounds,
    WithinBounds,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::UniqueId => "unique-id",
            Rule::DanglingRef => "dangling-ref",
            Rule::NoSelfLoop => "no-self-loop",
            Rule::PositiveArea => "positive-area",
            Rule::NonEmptySegments => "non-empty-segments",
            Rule::NonzeroSegment => "nonzero-segment",
            Rule::PositiveThickness => "positive-thickness",
            Rule::ValidBounds => "valid-bounds",
            Rule::WithinBounds => "within-bounds",
        }
    }

    fn is_geometric(self) -> bool {
        !matches!(self, Rule::UniqueId | Rule::DanglingRef | Rule::NoSelfLoop)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    /// The offending id. For dangling references this is the missing id.
    pub id: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.id, self.detail)
    }
}

fn join(vs: &[Violation]) -> String {
    vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("integrity error: {}", join(.0))]
    Integrity(Vec<Violation>),
    #[error("geometry error: {}", join(.0))]
    Geometry(Vec<Violation>),
}

impl ModelError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ModelError::Schema { .. } => &[],
            ModelError::Integrity(v) | ModelError::Geometry(v) => v,
        }
    }
}

/// Parses and validates an exchange document.
pub fn parse_model(bytes: &[u8]) -> Result<BuildingModel, ModelError> {
    let doc: ExchangeDoc = serde_json::from_slice(bytes).map_err(|e| ModelError::Schema {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.birs_schema != SCHEMA_VERSION {
        return Err(ModelError::Schema {
            line: 0,
            column: 0,
            message: format!(
                "field `birs_schema`: unsupported version {}, expected {SCHEMA_VERSION}",
                doc.birs_schema
            ),
        });
    }
    let model = BuildingModel {
        bounds: doc.bounds,
        rooms: doc.rooms,
        walls: doc.walls,
        doors: doc.doors,
    };
    let violations = validate_model(&model);
    if violations.is_empty() {
        return Ok(model);
    }
    let (geometry, integrity): (Vec<_>, Vec<_>) =
        violations.into_iter().partition(|v| v.rule.is_geometric());
    if integrity.is_empty() {
        Err(ModelError::Geometry(geometry))
    } else {
        Err(ModelError::Integrity(integrity))
    }
}

/// Checks every model invariant. Returns an empty list iff the model is valid.
pub fn validate_model(model: &BuildingModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |rule: Rule, id: &str, detail: String| {
        out.push(Violation {
            rule,
            id: id.to_string(),
            detail,
        })
    };

    let b = model.bounds;
    let bounds_ok = b.min.is_finite() && b.max.is_finite() && b.max.x > b.min.x && b.max.y > b.min.y;
    if !bounds_ok {
        push(Rule::ValidBounds, "bounds", "bounds must be a non-degenerate rectangle".into());
    }
    let within = |p: &Point2| p.is_finite() && (!bounds_ok || b.contains(p));

    for (kind, ids) in [
        ("room", model.rooms.iter().map(|r| r.id.as_str()).collect::<Vec<_>>()),
        ("wall", model.walls.iter().map(|w| w.id.as_str()).collect()),
        ("door", model.doors.iter().map(|d| d.id.as_str()).collect()),
    ] {
        let mut seen = HashSet::new();
        let mut reported = HashSet::new();
        for id in ids {
            if !seen.insert(id) && reported.insert(id) {
                push(Rule::UniqueId, id, format!("duplicate {kind} id"));
            }
        }
    }

    let wall_ids: HashSet<&str> = model.walls.iter().map(|w| w.id.as_str()).collect();
    let room_ids: HashSet<&str> = model.rooms.iter().map(|r| r.id.as_str()).collect();

    for room in &model.rooms {
        if !(room.area > 0.0 && room.area.is_finite()) {
            push(Rule::PositiveArea, &room.id, format!("area {} must be > 0", room.area));
        }
        if !within(&room.center) {
            push(Rule::WithinBounds, &room.id, "room center outside bounds".into());
        }
        for w in &room.wall_ids {
            if !wall_ids.contains(w.as_str()) {
                push(Rule::DanglingRef, w, format!("room {} references missing wall", room.id));
            }
        }
    }

    for wall in &model.walls {
        if wall.segments.is_empty() {
            push(Rule::NonEmptySegments, &wall.id, "wall has no segments".into());
        }
        if !(wall.thickness > 0.0 && wall.thickness.is_finite()) {
            push(
                Rule::PositiveThickness,
                &wall.id,
                format!("thickness {} must be > 0", wall.thickness),
            );
        }
        for (i, s) in wall.segments.iter().enumerate() {
            if s.length().is_nan() || s.length() <= 0.0 {
                push(Rule::NonzeroSegment, &wall.id, format!("segment {i} has zero length"));
            }
            if !within(&s.a) || !within(&s.b) {
                push(Rule::WithinBounds, &wall.id, format!("segment {i} outside bounds"));
            }
        }
    }

    for door in &model.doors {
        for r in [&door.from_room, &door.to_room] {
            if !room_ids.contains(r.as_str()) {
                push(Rule::DanglingRef, r, format!("door {} references missing room", door.id));
            }
        }
        if door.from_room == door.to_room {
            push(
                Rule::NoSelfLoop,
                &door.id,
                format!("door connects room {} to itself", door.from_room),
            );
        }
        if !within(&door.center) {
            push(Rule::WithinBounds, &door.id, "door center outside bounds".into());
        }
    }
    out
}

/// Canonical exchange document for a model.
pub fn to_exchange_string(model: &BuildingModel) -> String {
    let doc = ExchangeDoc {
        birs_schema: SCHEMA_VERSION,
        bounds: model.bounds,
        rooms: model.rooms.clone(),
        walls: model.walls.clone(),
        doors: model.doors.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("model serialization is infallible")
}

/// A door incident to a room, seen from that room.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbor {
    pub door_id: String,
    pub room_id: String,
}

/// Room id -> incident doors and the room on the other side, sorted by door id.
/// Every room is present, isolated rooms with an empty list.
pub fn room_adjacency(model: &BuildingModel) -> BTreeMap<String, Vec<Neighbor>> {
    let mut adj: BTreeMap<String, Vec<Neighbor>> =
        model.rooms.iter().map(|r| (r.id.clone(), Vec::new())).collect();
    for door in &model.doors {
        for (here, there) in [(&door.from_room, &door.to_room), (&door.to_room, &door.from_room)] {
            if let Some(list) = adj.get_mut(here) {
                list.push(Neighbor {
                    door_id: door.id.clone(),
                    room_id: there.clone(),
                });
            }
        }
    }
    for list in adj.values_mut() {
        list.sort_by(|a, b| a.door_id.cmp(&b.door_id).then_with(|| a.room_id.cmp(&b.room_id)));
    }
    adj
}

impl BuildingModel {
    pub fn room(&self, id: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.id == id)
    }

    pub fn room_mut(&mut self, id: &str) -> Option<&mut Room> {
        self.rooms.iter_mut().find(|r| r.id == id)
    }

    pub fn wall(&self, id: &str) -> Option<&Wall> {
        self.walls.iter().find(|w| w.id == id)
    }

    pub fn door(&self, id: &str) -> Option<&Door> {
        self.doors.iter().find(|d| d.id == id)
    }

    /// Resolved bounding walls of a room; unresolvable ids are skipped.
    pub fn walls_of<'a>(&'a self, room: &'a Room) -> Vec<&'a Wall> {
        let by_id: HashMap<&str, &Wall> = self.walls.iter().map(|w| (w.id.as_str(), w)).collect();
        room.wall_ids.iter().filter_map(|id| by_id.get(id.as_str()).copied()).collect()
    }

    /// Extent of a room, taken as the box covering its bounding walls' segments.
    pub fn room_extent(&self, room: &Room) -> Option<Rect> {
        Rect::covering(
            self.walls_of(room)
                .into_iter()
                .flat_map(|w| w.segments.iter().flat_map(|s| [s.a, s.b])),
        )
    }

    pub fn min_wall_thickness(&self) -> Option<f64> {
        self.walls.iter().map(|w| w.thickness).reduce(f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{
          "birs_schema": 1,
          "bounds": {"min": [0, 0], "max": [10, 10]},
          "rooms": [{"id": "R1", "name": "ONLY", "center": [5, 5], "area": 64,
                     "wall_ids": ["W1", "W2", "W3", "W4"]}],
          "walls": [
            {"id": "W1", "material_class": "standard", "segments": [[[1, 1], [9, 1]]]},
            {"id": "W2", "material_class": "standard", "segments": [[[9, 1], [9, 9]]]},
            {"id": "W3", "material_class": "curtain", "segments": [[[9, 9], [1, 9]]]},
            {"id": "W4", "material_class": "standard", "segments": [[[1, 9], [1, 1]]], "thickness": 0.3}
          ],
          "doors": []
        }"#
        .to_string()
    }

    fn two_rooms() -> BuildingModel {
        let doc = r#"{
          "birs_schema": 1,
          "bounds": {"min": [0, 0], "max": [10, 10]},
          "rooms": [
            {"id": "A", "name": "ALPHA", "center": [2, 5], "area": 30, "wall_ids": []},
            {"id": "B", "name": "BETA", "center": [8, 5], "area": 30, "wall_ids": []}
          ],
          "walls": [],
          "doors": [{"id": "D1", "center": [5, 5], "from_room": "A", "to_room": "B", "opening": "push"}]
        }"#;
        parse_model(doc.as_bytes()).unwrap()
    }

    #[test]
    fn minimal_model() {
        let m = parse_model(minimal().as_bytes()).unwrap();
        assert_eq!(m.rooms.len(), 1);
        assert_eq!(m.walls.len(), 4);
        assert!(m.doors.is_empty());
        assert_eq!(m.walls[0].thickness, DEFAULT_WALL_THICKNESS);
        assert_eq!(m.walls[3].thickness, 0.3);
        assert_eq!(m.rooms[0].last_scan, None);
        assert!(!m.rooms[0].hazard);
        assert_eq!(m.room_extent(&m.rooms[0]), Some(Rect::new(Point2::new(1., 1.), Point2::new(9., 9.))));
    }

    #[test]
    fn dangling_door_names_missing_room() {
        let mut m = two_rooms();
        m.doors[0].to_room = "R9".into();
        let doc = to_exchange_string(&m);
        let err = parse_model(doc.as_bytes()).unwrap_err();
        assert!(matches!(err, ModelError::Integrity(_)));
        assert!(err.to_string().contains("R9"));
        assert_eq!(err.violations()[0].id, "R9");
    }

    #[test]
    fn schema_errors_carry_locus() {
        let bad = minimal().replace("\"area\": 64", "\"area\": \"big\"");
        match parse_model(bad.as_bytes()).unwrap_err() {
            ModelError::Schema { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("invalid type"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let unknown = minimal().replace("\"hazard\"", "\"hazzard\"").replace(
            "\"wall_ids\": [\"W1\"",
            "\"colour\": 1, \"wall_ids\": [\"W1\"",
        );
        let err = parse_model(unknown.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        let wrong_version = minimal().replace("\"birs_schema\": 1", "\"birs_schema\": 2");
        assert!(parse_model(wrong_version.as_bytes()).unwrap_err().to_string().contains("birs_schema"));
        let no_version = minimal().replace("\"birs_schema\": 1,", "");
        assert!(parse_model(no_version.as_bytes()).unwrap_err().to_string().contains("birs_schema"));
        let material = minimal().replace("\"curtain\"", "\"brick\"");
        assert!(matches!(parse_model(material.as_bytes()), Err(ModelError::Schema { .. })));
    }

    #[test]
    fn geometry_errors() {
        let zero = minimal().replace("[[1, 1], [9, 1]]", "[[1, 1], [1, 1]]");
        let err = parse_model(zero.as_bytes()).unwrap_err();
        assert!(matches!(&err, ModelError::Geometry(v) if v[0].rule == Rule::NonzeroSegment && v[0].id == "W1"));
        let area = minimal().replace("\"area\": 64", "\"area\": 0");
        let err = parse_model(area.as_bytes()).unwrap_err();
        assert!(matches!(&err, ModelError::Geometry(v) if v[0].rule == Rule::PositiveArea));
    }

    #[test]
    fn validate_reports_single_rule() {
        let m = two_rooms();
        assert!(validate_model(&m).is_empty());

        let mut dup = m.clone();
        dup.rooms[1].id = "A".into();
        dup.doors.clear();
        let v = validate_model(&dup);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule.as_str(), "unique-id");
        assert_eq!(v[0].id, "A");

        let mut looped = m.clone();
        looped.doors[0].to_room = "A".into();
        let v = validate_model(&looped);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule.as_str(), "no-self-loop");
        assert_eq!(v[0].id, "D1");

        let mut outside = m;
        outside.doors[0].center = Point2::new(11.0, 5.0);
        assert_eq!(validate_model(&outside)[0].rule, Rule::WithinBounds);
    }

    #[test]
    fn adjacency_symmetric() {
        let m = two_rooms();
        let adj = room_adjacency(&m);
        assert_eq!(adj["A"], vec![Neighbor { door_id: "D1".into(), room_id: "B".into() }]);
        assert_eq!(adj["B"], vec![Neighbor { door_id: "D1".into(), room_id: "A".into() }]);

        let lonely = parse_model(minimal().as_bytes()).unwrap();
        assert!(room_adjacency(&lonely)["R1"].is_empty());
    }

    #[test]
    fn canonical_roundtrip() {
        let m = parse_model(minimal().as_bytes()).unwrap();
        let again = parse_model(to_exchange_string(&m).as_bytes()).unwrap();
        assert_eq!(m, again);
    }
}
