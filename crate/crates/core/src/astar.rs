//! 8-connected A* on an occupancy grid, and stitching of waypoint legs.
//!
//! Straight steps cost one resolution, diagonal steps `sqrt(2)` resolutions.
//! A diagonal step is allowed only when both orthogonal cells it passes
//! between are free. Path cost is carried as exact step counts so that
//! lengths compare equal across search strategies.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::Point2;
use crate::grid::{Cell, OccupancyGrid};

/// Waypoints on blocked cells snap to the nearest free cell within this distance.
pub const SNAP_RADIUS: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum NavError {
    #[error("point ({}, {}) is outside the grid", .0.x, .0.y)]
    OutOfGrid(Point2),
    #[error("start cell is occupied")]
    StartOccupied,
    #[error("goal cell is occupied")]
    GoalOccupied,
    #[error("no free-space path between start and goal")]
    NoGridPath,
    #[error("no free cell within {radius} m of waypoint ({}, {})", .point.x, .point.y)]
    SnapFailed { point: Point2, radius: f64 },
    #[error("need at least two waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoint {index}: {source}")]
    Waypoint {
        index: usize,
        #[source]
        source: Box<NavError>,
    },
    #[error("leg {index}: {source}")]
    Leg {
        index: usize,
        #[source]
        source: Box<NavError>,
    },
}

/// Octile distance in resolution units between two cells.
pub fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.col.abs_diff(b.col) as f64;
    let dy = a.row.abs_diff(b.row) as f64;
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    (hi - lo) + lo * SQRT_2
}

/// Length in resolution units of a path with the given step counts.
pub fn steps_length(straight: u32, diagonal: u32) -> f64 {
    straight as f64 + diagonal as f64 * SQRT_2
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    /// Cell centers, meters.
    pub points: Vec<Point2>,
    /// Meters.
    pub length: f64,
    pub straight_steps: u32,
    pub diagonal_steps: u32,
}

impl GridPath {
    fn from_cells(grid: &OccupancyGrid, cells: Vec<Cell>) -> Self {
        let (mut straight, mut diagonal) = (0, 0);
        for w in cells.windows(2) {
            if w[0].col != w[1].col && w[0].row != w[1].row {
                diagonal += 1;
            } else {
                straight += 1;
            }
        }
        let points = cells.iter().map(|&c| grid.center(c)).collect();
        Self {
            cells,
            points,
            length: steps_length(straight, diagonal) * grid.resolution(),
            straight_steps: straight,
            diagonal_steps: diagonal,
        }
    }
}

/// Free 8-neighbors of `cell` with their step kind (true = diagonal), in
/// row-major index order.
pub fn neighbors(grid: &OccupancyGrid, cell: Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let (c, r) = (cell.col as i64, cell.row as i64);
    let free = move |c: i64, r: i64| c >= 0 && c < w && r >= 0 && r < h && !grid.is_occupied(Cell::new(c as usize, r as usize));
    [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
        .into_iter()
        .filter_map(move |(dc, dr): (i64, i64)| {
            let (nc, nr) = (c + dc, r + dr);
            if !free(nc, nr) {
                return None;
            }
            let diagonal = dc != 0 && dr != 0;
            if diagonal && !(free(c + dc, r) && free(c, r + dr)) {
                return None;
            }
            Some((Cell::new(nc as usize, nr as usize), diagonal))
        })
}

#[derive(Debug, PartialEq)]
struct Open {
    f: f64,
    index: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest 8-connected path between two free cells.
pub fn astar_cells(grid: &OccupancyGrid, from: Cell, to: Cell) -> Result<GridPath, NavError> {
    if grid.is_occupied(from) {
        return Err(NavError::StartOccupied);
    }
    if grid.is_occupied(to) {
        return Err(NavError::GoalOccupied);
    }
    let n = grid.width() * grid.height();
    let mut steps: Vec<Option<(u32, u32)>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let (start, goal) = (grid.index(from), grid.index(to));
    steps[start] = Some((0, 0));
    let mut open = BinaryHeap::new();
    open.push(Open {
        f: octile(from, to),
        index: start,
    });

    while let Some(Open { index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        if index == goal {
            let mut cells = vec![to];
            let mut at = goal;
            while at != start {
                at = parent[at];
                cells.push(grid.cell_at(at));
            }
            cells.reverse();
            return Ok(GridPath::from_cells(grid, cells));
        }
        closed[index] = true;
        let (s, d) = steps[index].expect("opened cells carry a cost");
        let cell = grid.cell_at(index);
        for (next, diagonal) in neighbors(grid, cell) {
            let ni = grid.index(next);
            if closed[ni] {
                continue;
            }
            let cand = if diagonal { (s, d + 1) } else { (s + 1, d) };
            let g = steps_length(cand.0, cand.1);
            if steps[ni].is_none_or(|old| g < steps_length(old.0, old.1)) {
                steps[ni] = Some(cand);
                parent[ni] = index;
                open.push(Open {
                    f: g + octile(next, to),
                    index: ni,
                });
            }
        }
    }
    Err(NavError::NoGridPath)
}

/// Shortest path between the cells containing two metric points.
pub fn astar(grid: &OccupancyGrid, from: Point2, to: Point2) -> Result<GridPath, NavError> {
    let a = grid.cell_of(from).ok_or(NavError::OutOfGrid(from))?;
    let b = grid.cell_of(to).ok_or(NavError::OutOfGrid(to))?;
    astar_cells(grid, a, b)
}

/// Cell for a waypoint: its own cell if free, else the free cell whose center
/// is nearest to the point within `radius` (ties to the smaller row-major index).
pub fn snap(grid: &OccupancyGrid, point: Point2, radius: f64) -> Result<Cell, NavError> {
    let home = grid.cell_of(point).ok_or(NavError::OutOfGrid(point))?;
    if !grid.is_occupied(home) {
        return Ok(home);
    }
    let reach = (radius / grid.resolution()).ceil() as i64 + 1;
    let mut best: Option<(f64, usize, Cell)> = None;
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            let (c, r) = (home.col as i64 + dc, home.row as i64 + dr);
            if c < 0 || r < 0 {
                continue;
            }
            let cell = Cell::new(c as usize, r as usize);
            if !grid.contains(cell) || grid.is_occupied(cell) {
                continue;
            }
            let d = grid.center(cell).distance(&point);
            if d > radius {
                continue;
            }
            let key = (d, grid.index(cell));
            if best.is_none_or(|(bd, bi, _)| key.0 < bd || (key.0 == bd && key.1 < bi)) {
                best = Some((key.0, key.1, cell));
            }
        }
    }
    best.map(|(_, _, c)| c).ok_or(NavError::SnapFailed { point, radius })
}

/// A stitched path and where each waypoint's snapped cell sits in it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StitchedPath {
    pub path: GridPath,
    pub waypoint_cells: Vec<Cell>,
    /// Index into `path.cells` of each waypoint's snapped cell.
    pub waypoint_indices: Vec<usize>,
}

/// Concatenates A* legs between consecutive snapped waypoints.
pub fn stitch(grid: &OccupancyGrid, waypoints: &[Point2]) -> Result<StitchedPath, NavError> {
    if waypoints.len() < 2 {
        return Err(NavError::TooFewWaypoints(waypoints.len()));
    }
    let snapped = waypoints
        .iter()
        .enumerate()
        .map(|(index, &p)| {
            snap(grid, p, SNAP_RADIUS).map_err(|e| NavError::Waypoint {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut cells = vec![snapped[0]];
    let mut indices = vec![0];
    for (leg, pair) in snapped.windows(2).enumerate() {
        if pair[0] != pair[1] {
            let part = astar_cells(grid, pair[0], pair[1]).map_err(|e| NavError::Leg {
                index: leg,
                source: Box::new(e),
            })?;
            cells.extend_from_slice(&part.cells[1..]);
        }
        indices.push(cells.len() - 1);
    }
    Ok(StitchedPath {
        path: GridPath::from_cells(grid, cells),
        waypoint_cells: snapped,
        waypoint_indices: indices,
    })
}
