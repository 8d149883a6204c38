//! Binary occupancy grid rasterized from wall geometry.
//!
//! Cells are indexed row-major from the origin corner: `index = row * width + col`,
//! with row 0 at the lowest y. Graymap export flips rows so row 0 is the top.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Rect};
use crate::model::BuildingModel;

pub const DEFAULT_RESOLUTION: f64 = 0.05;
pub const DEFAULT_INFLATION_RADIUS: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("resolution must be > 0, got {0}")]
    InvalidResolution(f64),
    #[error("resolution {resolution} m is coarser than the thinnest wall ({thickness} m)")]
    ResolutionTooCoarse { resolution: f64, thickness: f64 },
    #[error("inflation radius must be >= 0, got {0}")]
    InvalidRadius(f64),
    #[error("cell data length {len} does not match {width}x{height}")]
    ShapeMismatch { width: usize, height: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

/// Sidecar document for graymap export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub resolution: f64,
    pub origin: Point2,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    origin: Point2,
    width: usize,
    height: usize,
    occupied: Vec<bool>,
}

fn cell_count(span: f64, resolution: f64) -> usize {
    ((span / resolution) - 1e-9).ceil().max(1.0) as usize
}

impl OccupancyGrid {
    /// An all-free grid covering `bounds`.
    pub fn empty(bounds: Rect, resolution: f64) -> Result<Self, GridError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GridError::InvalidResolution(resolution));
        }
        let width = cell_count(bounds.width(), resolution);
        let height = cell_count(bounds.height(), resolution);
        Ok(Self {
            resolution,
            origin: bounds.min,
            width,
            height,
            occupied: vec![false; width * height],
        })
    }

    /// Builds a grid from explicit row-major occupancy.
    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Point2,
        occupied: Vec<bool>,
    ) -> Result<Self, GridError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GridError::InvalidResolution(resolution));
        }
        if occupied.len() != width * height {
            return Err(GridError::ShapeMismatch {
                width,
                height,
                len: occupied.len(),
            });
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
            occupied,
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[bool] {
        &self.occupied
    }

    pub fn metadata(&self) -> GridMetadata {
        GridMetadata {
            resolution: self.resolution,
            origin: self.origin,
            width: self.width,
            height: self.height,
        }
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.col < self.width && cell.row < self.height
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.occupied[self.index(cell)]
    }

    pub fn set(&mut self, cell: Cell, occupied: bool) {
        let i = self.index(cell);
        self.occupied[i] = occupied;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Cell containing `p`, or `None` outside the grid.
    pub fn cell_of(&self, p: Point2) -> Option<Cell> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let cell = Cell::new(fx as usize, fy as usize);
        self.contains(cell).then_some(cell)
    }

    /// True when `p` lies outside the grid or in an occupied cell.
    pub fn blocked_at(&self, p: Point2) -> bool {
        self.cell_of(p).is_none_or(|c| self.is_occupied(c))
    }

    pub fn center(&self, cell: Cell) -> Point2 {
        Point2::new(
            self.origin.x + (cell.col as f64 + 0.5) * self.resolution,
            self.origin.y + (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    fn cell_box(&self, cell: Cell) -> (Point2, Point2) {
        let min = Point2::new(
            self.origin.x + cell.col as f64 * self.resolution,
            self.origin.y + cell.row as f64 * self.resolution,
        );
        (min, Point2::new(min.x + self.resolution, min.y + self.resolution))
    }

    /// Inclusive cell range covering a metric box, clamped to the grid.
    fn cell_range(&self, min: Point2, max: Point2) -> Option<(Cell, Cell)> {
        let to_i = |v: f64, o: f64| ((v - o) / self.resolution).floor();
        let (c0, r0) = (to_i(min.x, self.origin.x).max(0.0), to_i(min.y, self.origin.y).max(0.0));
        let (c1, r1) = (
            to_i(max.x, self.origin.x).min(self.width as f64 - 1.0),
            to_i(max.y, self.origin.y).min(self.height as f64 - 1.0),
        );
        (c0 <= c1 && r0 <= r1).then(|| (Cell::new(c0 as usize, r0 as usize), Cell::new(c1 as usize, r1 as usize)))
    }

    /// Portable graymap (binary P5): 0 = occupied, 255 = free, row 0 at the top.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.width * self.height);
        for row in (0..self.height).rev() {
            let start = row * self.width;
            out.extend(self.occupied[start..start + self.width].iter().map(|&o| if o { 0u8 } else { 255 }));
        }
        out
    }
}

/// Draws every wall segment as a stroke as wide as the wall is thick.
///
/// A cell is occupied when its center is within half a thickness of the
/// segment, or when the segment's centerline passes through the cell. Wall
/// material plays no role.
pub fn rasterize(model: &BuildingModel, resolution: f64) -> Result<OccupancyGrid, GridError> {
    let mut grid = OccupancyGrid::empty(model.bounds, resolution)?;
    if let Some(thickness) = model.min_wall_thickness() {
        if resolution > thickness {
            return Err(GridError::ResolutionTooCoarse { resolution, thickness });
        }
    }
    for wall in &model.walls {
        let half = wall.thickness / 2.0;
        for seg in &wall.segments {
            let pad = half + resolution;
            let lo = Point2::new(seg.a.x.min(seg.b.x) - pad, seg.a.y.min(seg.b.y) - pad);
            let hi = Point2::new(seg.a.x.max(seg.b.x) + pad, seg.a.y.max(seg.b.y) + pad);
            let Some((c0, c1)) = grid.cell_range(lo, hi) else { continue };
            for row in c0.row..=c1.row {
                for col in c0.col..=c1.col {
                    let cell = Cell::new(col, row);
                    let (bmin, bmax) = grid.cell_box(cell);
                    if seg.distance_to(&grid.center(cell)) <= half || seg.intersects_box(bmin, bmax) {
                        grid.set(cell, true);
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// Marks every cell whose center lies within `radius` of an occupied cell's center.
pub fn inflate(grid: &OccupancyGrid, radius: f64) -> Result<OccupancyGrid, GridError> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(GridError::InvalidRadius(radius));
    }
    let r = radius / grid.resolution;
    let reach = r.floor() as i64;
    let limit = r * r + 1e-9;
    let stencil: Vec<(i64, i64)> = (-reach..=reach)
        .flat_map(|dr| (-reach..=reach).map(move |dc| (dc, dr)))
        .filter(|&(dc, dr)| ((dc * dc + dr * dr) as f64) <= limit)
        .collect();

    let mut out = grid.clone();
    let (w, h) = (grid.width as i64, grid.height as i64);
    for (i, _) in grid.occupied.iter().enumerate().filter(|(_, &o)| o) {
        let (col, row) = ((i % grid.width) as i64, (i / grid.width) as i64);
        for &(dc, dr) in &stencil {
            let (c, r) = (col + dc, row + dr);
            if c >= 0 && c < w && r >= 0 && r < h {
                out.occupied[(r * w + c) as usize] = true;
            }
        }
    }
    Ok(out)
}
