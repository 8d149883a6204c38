//! Independent oracles and random inputs for testing `birs-core`.
//!
//! Nothing here calls the planner, the hypergraph builder or A*. Weights are
//! recomputed from room attributes, paths are enumerated exhaustively and grid
//! distances come from a plain Dijkstra.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::path::PathBuf;

use birs_core::geometry::{Point2, Rect, Segment};
use birs_core::grid::{Cell, OccupancyGrid};
use birs_core::model::{BuildingModel, Door, MaterialClass, Opening, Room, Wall};
use birs_core::weights::WeightConfig;
use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Reference date for fixtures and generated scan ages.
pub fn today() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 6, 15).expect("valid date")
}

/// Absolute path of a file in the workspace `fixtures/` directory.
pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture_bytes(name: &str) -> Vec<u8> {
    let path = fixture_path(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

pub fn twocorridor() -> BuildingModel {
    birs_core::parse_model(&fixture_bytes("twocorridor.json")).expect("twocorridor fixture is valid")
}

/// Room weight straight from the cost table.
pub fn oracle_node_weight(model: &BuildingModel, room: &Room, c: &WeightConfig, today: NaiveDate) -> f64 {
    let curtain = room
        .wall_ids
        .iter()
        .filter_map(|id| model.walls.iter().find(|w| &w.id == id))
        .any(|w| w.material_class == MaterialClass::Curtain);
    let wm = if curtain { c.wm_curtain } else { c.wm_standard };

    let wa = if room.area < c.area_medium_min {
        c.wa_small
    } else if room.area > c.area_medium_max {
        c.wa_large
    } else {
        c.wa_medium
    };

    let ws = match room.last_scan {
        None => c.ws_stale,
        Some(d) => {
            let days = (today - d).num_days().max(0);
            if days < c.scan_recent_min_days as i64 {
                c.ws_fresh
            } else if days > c.scan_recent_max_days as i64 {
                c.ws_stale
            } else {
                c.ws_recent
            }
        }
    };

    let wh = if room.hazard { c.wh_hazard } else { 0.0 };
    wm + wa + ws + wh
}

pub fn oracle_door_weight(opening: Opening, forward: bool, c: &WeightConfig) -> f64 {
    let push = match (opening, forward) {
        (Opening::Push, true) | (Opening::Pull, false) => true,
        (Opening::Pull, true) | (Opening::Push, false) => false,
    };
    if push {
        c.wd_push
    } else {
        c.wd_pull
    }
}

/// Best simple path found by exhaustive enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub weight: f64,
    /// Room ids, start to end.
    pub rooms: Vec<String>,
    /// Number of simple paths examined.
    pub explored: usize,
}

/// Enumerates every simple room path from `start` to `end` and returns the
/// lightest, breaking weight ties by the lexicographically smallest room id
/// sequence. Weights accumulate in traversal order: room, door, room, ...
pub fn brute_force(
    model: &BuildingModel,
    c: &WeightConfig,
    today: NaiveDate,
    start: &str,
    end: &str,
) -> Option<BruteForce> {
    let weights: BTreeMap<&str, f64> = model
        .rooms
        .iter()
        .map(|r| (r.id.as_str(), oracle_node_weight(model, r, c, today)))
        .collect();
    let mut out: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for d in &model.doors {
        out.entry(d.from_room.as_str())
            .or_default()
            .push((d.to_room.as_str(), oracle_door_weight(d.opening, true, c)));
        out.entry(d.to_room.as_str())
            .or_default()
            .push((d.from_room.as_str(), oracle_door_weight(d.opening, false, c)));
    }

    struct Search<'a> {
        weights: &'a BTreeMap<&'a str, f64>,
        out: &'a BTreeMap<&'a str, Vec<(&'a str, f64)>>,
        end: &'a str,
        best: Option<(f64, Vec<&'a str>)>,
        explored: usize,
    }

    impl<'a> Search<'a> {
        fn go(&mut self, path: &mut Vec<&'a str>, acc: f64) {
            let here = *path.last().unwrap();
            if here == self.end {
                self.explored += 1;
                let better = match &self.best {
                    None => true,
                    Some((w, rooms)) => match acc.total_cmp(w) {
                        Ordering::Less => true,
                        Ordering::Equal => path.as_slice() < rooms.as_slice(),
                        Ordering::Greater => false,
                    },
                };
                if better {
                    self.best = Some((acc, path.clone()));
                }
                return;
            }
            let Some(next) = self.out.get(here) else { return };
            for &(to, door) in next {
                if path.contains(&to) {
                    continue;
                }
                path.push(to);
                self.go(path, acc + door + self.weights[to]);
                path.pop();
            }
        }
    }

    let mut s = Search {
        weights: &weights,
        out: &out,
        end,
        best: None,
        explored: 0,
    };
    let first = *weights.get_key_value(start)?.0;
    s.go(&mut vec![first], weights[start]);
    let explored = s.explored;
    s.best.map(|(weight, rooms)| BruteForce {
        weight,
        rooms: rooms.into_iter().map(str::to_string).collect(),
        explored,
    })
}

const SPACING: f64 = 10.0;
const COLUMNS: usize = 4;

/// Dates at and around the scan-age bucket edges.
const AGES: [u64; 10] = [0, 3, 6, 7, 8, 13, 14, 15, 30, 400];
/// Areas at and around the area bucket edges.
const AREAS: [f64; 9] = [5.0, 49.0, 49.99, 50.0, 75.0, 100.0, 100.01, 150.0, 400.0];

/// A random connected building: 2 to `max_rooms` square rooms on a 4-wide
/// lattice, a random spanning tree of doors plus extra random doors, up to
/// `max_doors` in total. Every attribute that feeds a weight is randomized.
pub fn random_model(rng: &mut impl Rng, max_rooms: usize, max_doors: usize) -> BuildingModel {
    assert!((2..=12).contains(&max_rooms) && max_doors >= max_rooms - 1);
    let n = rng.random_range(2..=max_rooms);
    let today = today();
    let mut rooms = Vec::with_capacity(n);
    let mut walls = Vec::with_capacity(n);
    for i in 0..n {
        let (col, row) = ((i % COLUMNS) as f64, (i / COLUMNS) as f64);
        let (x0, y0) = (col * SPACING, row * SPACING);
        let corners = [
            Point2::new(x0 + 1.0, y0 + 1.0),
            Point2::new(x0 + SPACING - 1.0, y0 + 1.0),
            Point2::new(x0 + SPACING - 1.0, y0 + SPACING - 1.0),
            Point2::new(x0 + 1.0, y0 + SPACING - 1.0),
        ];
        let segments = (0..4).map(|k| Segment::new(corners[k], corners[(k + 1) % 4])).collect();
        let wall_id = format!("WL-{i:02}");
        walls.push(Wall {
            id: wall_id.clone(),
            material_class: if rng.random_bool(0.3) {
                MaterialClass::Curtain
            } else {
                MaterialClass::Standard
            },
            segments,
            thickness: 0.2,
        });
        let last_scan = if rng.random_bool(0.2) {
            None
        } else {
            today.checked_sub_days(Days::new(*AGES.choose(rng).unwrap()))
        };
        rooms.push(Room {
            id: format!("R{i:02}"),
            name: format!("ROOM {i}"),
            center: Point2::new(x0 + SPACING / 2.0, y0 + SPACING / 2.0),
            area: *AREAS.choose(rng).unwrap(),
            wall_ids: vec![wall_id],
            last_scan,
            hazard: rng.random_bool(0.2),
        });
    }
    // Rooms may also list a neighbor's wall, so one curtain can weigh on two rooms.
    for (i, room) in rooms.iter_mut().enumerate() {
        if rng.random_bool(0.2) {
            let j = rng.random_range(0..n);
            if j != i {
                room.wall_ids.push(walls[j].id.clone());
            }
        }
    }

    let mut pairs = Vec::new();
    for i in 1..n {
        pairs.push((rng.random_range(0..i), i));
    }
    let extra = rng.random_range(0..=max_doors - (n - 1));
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            pairs.push((a, b));
        }
    }
    let doors = pairs
        .into_iter()
        .enumerate()
        .map(|(k, (a, b))| {
            let (a, b) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            let (pa, pb) = (rooms[a].center, rooms[b].center);
            Door {
                id: format!("D{k:02}"),
                center: Point2::new((pa.x + pb.x) / 2.0, (pa.y + pb.y) / 2.0),
                from_room: rooms[a].id.clone(),
                to_room: rooms[b].id.clone(),
                opening: if rng.random_bool(0.5) { Opening::Push } else { Opening::Pull },
            }
        })
        .collect();

    let rows = n.div_ceil(COLUMNS) as f64;
    BuildingModel {
        bounds: Rect::new(Point2::new(0.0, 0.0), Point2::new(COLUMNS as f64 * SPACING, rows * SPACING)),
        rooms,
        walls,
        doors,
    }
}

/// Integer-valued weights in `lo..=hi`, so equal-weight ties are common.
pub fn random_config(rng: &mut impl Rng, lo: u32, hi: u32) -> WeightConfig {
    let mut v = || f64::from(rng.random_range(lo..=hi));
    WeightConfig {
        wm_curtain: v(),
        wm_standard: v(),
        wa_small: v(),
        wa_medium: v(),
        wa_large: v(),
        ws_fresh: v(),
        ws_recent: v(),
        ws_stale: v(),
        wh_hazard: v() * 25.0,
        wd_push: v(),
        wd_pull: v(),
        ..WeightConfig::default()
    }
}

/// A `width` x `height` grid at 1 m/cell with each cell occupied with
/// probability `density`.
pub fn random_grid(rng: &mut impl Rng, width: usize, height: usize, density: f64) -> OccupancyGrid {
    let cells = (0..width * height).map(|_| rng.random_bool(density)).collect();
    OccupancyGrid::from_cells(width, height, 1.0, Point2::new(0.0, 0.0), cells).expect("shape matches")
}

/// Shortest 8-connected route between two cells, no corner cutting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDistance {
    pub straight: u32,
    pub diagonal: u32,
}

impl GridDistance {
    /// Length in cells.
    pub fn cells(&self) -> f64 {
        f64::from(self.straight) + f64::from(self.diagonal) * std::f64::consts::SQRT_2
    }
}

#[derive(PartialEq, Eq)]
struct Item {
    straight: u32,
    diagonal: u32,
    at: usize,
}

impl Item {
    fn len(&self) -> f64 {
        f64::from(self.straight) + f64::from(self.diagonal) * std::f64::consts::SQRT_2
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.len().total_cmp(&self.len()).then_with(|| other.at.cmp(&self.at))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Plain Dijkstra with no heuristic. `None` if either end is blocked or the
/// goal is unreachable.
pub fn grid_dijkstra(grid: &OccupancyGrid, from: Cell, to: Cell) -> Option<GridDistance> {
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let free = |c: i64, r: i64| c >= 0 && r >= 0 && c < w && r < h && !grid.cells()[(r * w + c) as usize];
    if !free(from.col as i64, from.row as i64) || !free(to.col as i64, to.row as i64) {
        return None;
    }
    let start = from.row * grid.width() + from.col;
    let goal = to.row * grid.width() + to.col;
    let mut best: Vec<Option<(u32, u32)>> = vec![None; grid.cells().len()];
    let mut done = vec![false; grid.cells().len()];
    best[start] = Some((0, 0));
    let mut heap = BinaryHeap::from([Item {
        straight: 0,
        diagonal: 0,
        at: start,
    }]);
    while let Some(item) = heap.pop() {
        if done[item.at] {
            continue;
        }
        done[item.at] = true;
        if item.at == goal {
            return Some(GridDistance {
                straight: item.straight,
                diagonal: item.diagonal,
            });
        }
        let (c, r) = ((item.at as i64) % w, (item.at as i64) / w);
        for dr in -1..=1 {
            for dc in -1..=1 {
                if (dc, dr) == (0, 0) || !free(c + dc, r + dr) {
                    continue;
                }
                let diag = dc != 0 && dr != 0;
                if diag && (!free(c + dc, r) || !free(c, r + dr)) {
                    continue;
                }
                let next = Item {
                    straight: item.straight + u32::from(!diag),
                    diagonal: item.diagonal + u32::from(diag),
                    at: ((r + dr) * w + c + dc) as usize,
                };
                let improves = match best[next.at] {
                    None => true,
                    Some((s, d)) => next.len() < f64::from(s) + f64::from(d) * std::f64::consts::SQRT_2,
                };
                if improves && !done[next.at] {
                    best[next.at] = Some((next.straight, next.diagonal));
                    heap.push(next);
                }
            }
        }
    }
    None
}
