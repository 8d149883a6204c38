//! Directed BF-hypergraph of a building: one node per room, two directed
//! hyperedges per door, with additive node and edge weights.

use std::collections::HashMap;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::Point2;
use crate::model::{BuildingModel, Door, MaterialClass, Opening, Room, Wall};
use crate::weights::WeightConfig;

/// The four additive terms of a node weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightTerms {
    pub material: f64,
    pub area: f64,
    pub scan_age: f64,
    pub hazard: f64,
}

impl WeightTerms {
    pub fn total(&self) -> f64 {
        self.material + self.area + self.scan_age + self.hazard
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperNode {
    pub room_id: String,
    pub name: String,
    pub center: Point2,
    pub terms: WeightTerms,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperEdge {
    pub door_id: String,
    /// Tail room ids, sorted and distinct.
    pub tail: Vec<String>,
    pub head: String,
    pub weight: f64,
    pub direction_kind: Opening,
    pub center: Point2,
}

#[derive(Debug, Error, PartialEq)]
pub enum HypergraphError {
    #[error("duplicate node {0}")]
    DuplicateNode(String),
    #[error("hyperedge {edge} references unknown node {node}")]
    UnknownNode { edge: String, node: String },
    #[error("hyperedge {0} has an empty tail")]
    EmptyTail(String),
    #[error("hyperedge {0} has its head inside its tail")]
    HeadInTail(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("path is empty or does not end on a room")]
    Malformed,
    #[error("unknown room {0}")]
    UnknownRoom(String),
    #[error("path is disconnected at position {position}")]
    Disconnected { position: usize },
}

/// Scan age in whole days; a future scan date counts as age zero.
pub fn scan_age_days(last_scan: NaiveDate, today: NaiveDate) -> i64 {
    (today - last_scan).num_days().max(0)
}

/// Weight of one room: material + area + scan age + hazard.
pub fn node_weight(room: &Room, walls: &[&Wall], config: &WeightConfig, today: NaiveDate) -> HyperNode {
    let material = if walls.iter().any(|w| w.material_class == MaterialClass::Curtain) {
        config.wm_curtain
    } else {
        config.wm_standard
    };
    let area = if room.area < config.area_medium_min {
        config.wa_small
    } else if room.area <= config.area_medium_max {
        config.wa_medium
    } else {
        config.wa_large
    };
    let scan_age = match room.last_scan {
        None => config.ws_stale,
        Some(date) => {
            let age = scan_age_days(date, today);
            if age < i64::from(config.scan_recent_min_days) {
                config.ws_fresh
            } else if age <= i64::from(config.scan_recent_max_days) {
                config.ws_recent
            } else {
                config.ws_stale
            }
        }
    };
    let hazard = if room.hazard { config.wh_hazard } else { 0.0 };
    let terms = WeightTerms {
        material,
        area,
        scan_age,
        hazard,
    };
    HyperNode {
        room_id: room.id.clone(),
        name: room.name.clone(),
        center: room.center,
        terms,
        weight: terms.total(),
    }
}

fn door_cost(kind: Opening, config: &WeightConfig) -> f64 {
    match kind {
        Opening::Push => config.wd_push,
        Opening::Pull => config.wd_pull,
    }
}

/// The two directed hyperedges of a door: forward (`from_room -> to_room`,
/// with the door's own opening) and reverse (complementary opening).
pub fn edge_weights(door: &Door, config: &WeightConfig) -> (HyperEdge, HyperEdge) {
    let make = |from: &str, to: &str, kind: Opening| HyperEdge {
        door_id: door.id.clone(),
        tail: vec![from.to_string()],
        head: to.to_string(),
        weight: door_cost(kind, config),
        direction_kind: kind,
        center: door.center,
    };
    (
        make(&door.from_room, &door.to_room, door.opening),
        make(&door.to_room, &door.from_room, door.opening.reversed()),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypergraph {
    pub nodes: Vec<HyperNode>,
    pub edges: Vec<HyperEdge>,
    pub built_at: NaiveDate,
    #[serde(skip)]
    index: HashMap<String, usize>,
    #[serde(skip)]
    tails: Vec<Vec<usize>>,
    #[serde(skip)]
    heads: Vec<usize>,
    #[serde(skip)]
    forward_star: Vec<Vec<usize>>,
}

impl Hypergraph {
    /// Assembles a hypergraph from arbitrary nodes and (possibly multi-tail) edges.
    pub fn new(
        nodes: Vec<HyperNode>,
        mut edges: Vec<HyperEdge>,
        built_at: NaiveDate,
    ) -> Result<Self, HypergraphError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.room_id.clone(), i).is_some() {
                return Err(HypergraphError::DuplicateNode(n.room_id.clone()));
            }
        }
        let lookup = |edge: &HyperEdge, id: &str| {
            index.get(id).copied().ok_or_else(|| HypergraphError::UnknownNode {
                edge: edge.door_id.clone(),
                node: id.to_string(),
            })
        };
        let mut tails = Vec::with_capacity(edges.len());
        let mut heads = Vec::with_capacity(edges.len());
        let mut forward_star = vec![Vec::new(); nodes.len()];
        for (e, edge) in edges.iter_mut().enumerate() {
            edge.tail.sort();
            edge.tail.dedup();
            if edge.tail.is_empty() {
                return Err(HypergraphError::EmptyTail(edge.door_id.clone()));
            }
            if edge.tail.contains(&edge.head) {
                return Err(HypergraphError::HeadInTail(edge.door_id.clone()));
            }
            let head = lookup(edge, &edge.head)?;
            let tail = edge
                .tail
                .iter()
                .map(|t| lookup(edge, t))
                .collect::<Result<Vec<_>, _>>()?;
            for &t in &tail {
                forward_star[t].push(e);
            }
            tails.push(tail);
            heads.push(head);
        }
        Ok(Self {
            nodes,
            edges,
            built_at,
            index,
            tails,
            heads,
            forward_star,
        })
    }

    pub fn node_index(&self, room_id: &str) -> Option<usize> {
        self.index.get(room_id).copied()
    }

    pub fn node(&self, room_id: &str) -> Option<&HyperNode> {
        self.node_index(room_id).map(|i| &self.nodes[i])
    }

    pub fn tail_of(&self, edge: usize) -> &[usize] {
        &self.tails[edge]
    }

    pub fn head_of(&self, edge: usize) -> usize {
        self.heads[edge]
    }

    /// Edges having `node` in their tail, in edge order.
    pub fn forward_star(&self, node: usize) -> &[usize] {
        &self.forward_star[node]
    }
}

/// Builds the weighted hypergraph of a valid model. Nodes are sorted by room
/// id; edges by door id, forward before reverse.
pub fn build_hypergraph(model: &BuildingModel, config: &WeightConfig, today: NaiveDate) -> Hypergraph {
    let mut rooms: Vec<&Room> = model.rooms.iter().collect();
    rooms.sort_by(|a, b| a.id.cmp(&b.id));
    let nodes = rooms
        .into_iter()
        .map(|r| node_weight(r, &model.walls_of(r), config, today))
        .collect();

    let mut doors: Vec<&Door> = model.doors.iter().collect();
    doors.sort_by(|a, b| a.id.cmp(&b.id));
    let edges = doors
        .into_iter()
        .flat_map(|d| {
            let (f, r) = edge_weights(d, config);
            [f, r]
        })
        .collect();

    Hypergraph::new(nodes, edges, today).expect("a validated model yields a well-formed hypergraph")
}

/// Total weight of an alternating room/door id sequence: every node weight on
/// the path, endpoints included, plus every traversed edge weight.
pub fn path_weight<S: AsRef<str>>(graph: &Hypergraph, path: &[S]) -> Result<f64, PathError> {
    if path.len().is_multiple_of(2) {
        return Err(PathError::Malformed);
    }
    let node = |id: &str| graph.node_index(id).ok_or_else(|| PathError::UnknownRoom(id.to_string()));
    let mut prev = node(path[0].as_ref())?;
    let mut total = graph.nodes[prev].weight;
    for (k, pair) in path[1..].chunks(2).enumerate() {
        let position = 2 * k + 1;
        let (door, next) = (pair[0].as_ref(), pair[1].as_ref());
        let next_ix = node(next)?;
        let edge = graph
            .forward_star(prev)
            .iter()
            .copied()
            .find(|&e| {
                graph.edges[e].door_id == door && graph.tails[e] == [prev] && graph.heads[e] == next_ix
            })
            .ok_or(PathError::Disconnected { position })?;
        total = total + graph.edges[edge].weight + graph.nodes[next_ix].weight;
        prev = next_ix;
    }
    Ok(total)
}
