//! Optimal semantic paths over the building hypergraph.
//!
//! [`shortest_sum_b_tree`] is a label-setting sweep over B-hyperedges: an edge
//! becomes usable once every node of its tail is settled, and its head is then
//! offered the label `sum(tail labels) + W_E + W_V(head)`. For door edges
//! (single-node tails) this is exactly the additive path weight with both
//! endpoint node weights included.
//!
//! Ties between equal-weight labels are broken by the room-index sequence of
//! the candidate route. Nodes are sorted by room id, so this is the
//! lexicographically smallest room-id sequence.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;
use crate::hypergraph::Hypergraph;
use crate::weights::WeightConfig;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("unknown room {0}")]
    UnknownRoom(String),
    #[error("start and destination are the same room {0}")]
    SameEndpoints(String),
    #[error("no path from {from} to {to}")]
    NoPath { from: String, to: String },
    #[error("optimal hyperpath to {0} uses a multi-tail hyperedge and has no linear room sequence")]
    NonLinear(String),
}

/// Labels produced by one sweep from a start node.
#[derive(Debug, Clone, PartialEq)]
pub struct BTreeLabels {
    pub start: usize,
    /// Best cumulative weight per node, `None` when unreachable.
    pub cost: Vec<Option<f64>>,
    /// Edge that produced the label, `None` for the start and unreachable nodes.
    pub pred: Vec<Option<usize>>,
    /// Nodes in the order they were settled.
    pub settled: Vec<usize>,
    route: Vec<Vec<usize>>,
}

impl BTreeLabels {
    pub fn is_reachable(&self, node: usize) -> bool {
        self.cost[node].is_some()
    }
}

#[derive(Debug)]
struct Entry {
    cost: f64,
    route: Vec<usize>,
    node: usize,
}

impl Ord for Entry {
    // Reversed so BinaryHeap pops the smallest (cost, route).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.route.cmp(&self.route))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

fn better(cost: f64, route: &[usize], than_cost: f64, than_route: &[usize]) -> bool {
    match cost.total_cmp(&than_cost) {
        Ordering::Less => true,
        Ordering::Equal => route < than_route,
        Ordering::Greater => false,
    }
}

/// Minimum additive-weight hyperpaths from `start` to every node.
pub fn shortest_sum_b_tree(graph: &Hypergraph, start: &str) -> Result<BTreeLabels, PlanError> {
    let s = graph
        .node_index(start)
        .ok_or_else(|| PlanError::UnknownRoom(start.to_string()))?;
    let n = graph.nodes.len();
    let mut cost: Vec<Option<f64>> = vec![None; n];
    let mut pred = vec![None; n];
    let mut route: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut done = vec![false; n];
    let mut settled = Vec::with_capacity(n);
    // Unsettled tail nodes remaining per edge.
    let mut pending: Vec<usize> = (0..graph.edges.len()).map(|e| graph.tail_of(e).len()).collect();

    cost[s] = Some(graph.nodes[s].weight);
    route[s] = vec![s];
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        cost: graph.nodes[s].weight,
        route: vec![s],
        node: s,
    });

    while let Some(Entry { cost: c, route: r, node: u }) = heap.pop() {
        if done[u] || cost[u] != Some(c) || route[u] != r {
            continue;
        }
        done[u] = true;
        settled.push(u);
        for &e in graph.forward_star(u) {
            pending[e] -= 1;
            if pending[e] > 0 {
                continue;
            }
            let head = graph.head_of(e);
            if done[head] {
                continue;
            }
            let tail = graph.tail_of(e);
            let mut cand = 0.0;
            let mut cand_route = Vec::new();
            for &t in tail {
                cand += cost[t].expect("tail nodes are settled");
                cand_route.extend_from_slice(&route[t]);
            }
            cand = cand + graph.edges[e].weight + graph.nodes[head].weight;
            cand_route.push(head);
            let improves = match cost[head] {
                None => true,
                Some(old) => better(cand, &cand_route, old, &route[head]),
            };
            if improves {
                cost[head] = Some(cand);
                pred[head] = Some(e);
                route[head] = cand_route.clone();
                heap.push(Entry {
                    cost: cand,
                    route: cand_route,
                    node: head,
                });
            }
        }
    }

    Ok(BTreeLabels {
        start: s,
        cost,
        pred,
        settled,
        route,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarningKind {
    HazardOnPath,
    NoSafeAlternative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathWarning {
    pub kind: WarningKind,
    pub room_ids: Vec<String>,
}

/// An optimal room/door sequence with its coordinates and total weight.
///
/// Serializes as the path export document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticPath {
    /// Alternating room and door ids, starting and ending with a room.
    pub semantic_path: Vec<String>,
    /// Room names and door ids, aligned with `semantic_path`.
    pub names: Vec<String>,
    /// Room centers and door centers in traversal order.
    pub x_y_path: Vec<Point2>,
    pub total_weight: f64,
    pub warnings: Vec<PathWarning>,
}

impl SemanticPath {
    pub fn room_ids(&self) -> impl Iterator<Item = &str> {
        self.semantic_path.iter().step_by(2).map(String::as_str)
    }

    pub fn room_names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().step_by(2).map(String::as_str)
    }

    pub fn door_ids(&self) -> impl Iterator<Item = &str> {
        self.semantic_path.iter().skip(1).step_by(2).map(String::as_str)
    }

    pub fn contains_room(&self, id: &str) -> bool {
        self.room_ids().any(|r| r == id)
    }

    pub fn destination(&self) -> &str {
        self.semantic_path.last().map(String::as_str).unwrap_or_default()
    }

    pub fn has_warning(&self, kind: WarningKind) -> bool {
        self.warnings.iter().any(|w| w.kind == kind)
    }
}

fn warnings_for(graph: &Hypergraph, rooms: &[usize], total: f64, config: &WeightConfig) -> Vec<PathWarning> {
    let hazards: Vec<String> = rooms
        .iter()
        .filter(|&&r| graph.nodes[r].terms.hazard > 0.0)
        .map(|&r| graph.nodes[r].room_id.clone())
        .collect();
    let mut out = Vec::new();
    if !hazards.is_empty() {
        out.push(PathWarning {
            kind: WarningKind::HazardOnPath,
            room_ids: hazards.clone(),
        });
    }
    if total >= config.warn_threshold {
        out.push(PathWarning {
            kind: WarningKind::NoSafeAlternative,
            room_ids: hazards,
        });
    }
    out
}

/// A path that stays in one room: used when a replan starts in the goal room.
pub fn single_room_path(graph: &Hypergraph, room: &str, config: &WeightConfig) -> Result<SemanticPath, PlanError> {
    let r = graph
        .node_index(room)
        .ok_or_else(|| PlanError::UnknownRoom(room.to_string()))?;
    let node = &graph.nodes[r];
    Ok(SemanticPath {
        semantic_path: vec![node.room_id.clone()],
        names: vec![node.name.clone()],
        x_y_path: vec![node.center],
        total_weight: node.weight,
        warnings: warnings_for(graph, &[r], node.weight, config),
    })
}

/// Lightest path from `start` to `end`, with hazard warnings.
pub fn optimal_path(
    graph: &Hypergraph,
    start: &str,
    end: &str,
    config: &WeightConfig,
) -> Result<SemanticPath, PlanError> {
    let e = graph
        .node_index(end)
        .ok_or_else(|| PlanError::UnknownRoom(end.to_string()))?;
    if start == end {
        return Err(PlanError::SameEndpoints(start.to_string()));
    }
    let labels = shortest_sum_b_tree(graph, start)?;
    let total = labels.cost[e].ok_or_else(|| PlanError::NoPath {
        from: start.to_string(),
        to: end.to_string(),
    })?;

    let mut rooms = vec![e];
    let mut doors = Vec::new();
    let mut at = e;
    while let Some(edge) = labels.pred[at] {
        let tail = graph.tail_of(edge);
        if tail.len() != 1 {
            return Err(PlanError::NonLinear(end.to_string()));
        }
        doors.push(edge);
        at = tail[0];
        rooms.push(at);
    }
    rooms.reverse();
    doors.reverse();

    let mut semantic_path = Vec::with_capacity(rooms.len() * 2 - 1);
    let mut names = Vec::with_capacity(semantic_path.capacity());
    let mut x_y_path = Vec::with_capacity(semantic_path.capacity());
    for (i, &r) in rooms.iter().enumerate() {
        if i > 0 {
            let d = &graph.edges[doors[i - 1]];
            semantic_path.push(d.door_id.clone());
            names.push(d.door_id.clone());
            x_y_path.push(d.center);
        }
        let node = &graph.nodes[r];
        semantic_path.push(node.room_id.clone());
        names.push(node.name.clone());
        x_y_path.push(node.center);
    }

    Ok(SemanticPath {
        semantic_path,
        names,
        x_y_path,
        total_weight: total,
        warnings: warnings_for(graph, &rooms, total, config),
    })
}

/// Metric waypoints of a path: room and door centers in traversal order.
pub fn waypoints(path: &SemanticPath) -> Vec<Point2> {
    path.x_y_path.clone()
}
