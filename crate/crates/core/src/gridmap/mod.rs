//! Occupancy grid, distance transform and clearance cost field.
//!
//! Cells are addressed as `(col, row)` with `col` along world x and `row`
//! along world y. Cell `(0, 0)` covers `[origin.x, origin.x + res) ×
//! [origin.y, origin.y + res)`. Storage is row-major.

mod clearance;
mod distance;
mod io;
mod ray;

use std::f64::consts::SQRT_2;

use thiserror::Error;

use crate::control::RobotState;
use crate::Point;

pub use clearance::{clearance_cost, is_traversable, ClearanceDesign, ClearanceField, DEFAULT_C_UNKNOWN};
pub use distance::{distance_transform, DistanceField, DEFAULT_SENTINEL};
pub use ray::{GridRay, RayCell};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("grid resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("invalid clearance design: {0}")]
    InvalidDesign(String),
    #[error("grid text line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

impl Cell {
    pub fn code(self) -> u8 {
        match self {
            Cell::Free => 0,
            Cell::Occupied => 1,
            Cell::Unknown => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Cell> {
        match code {
            0 => Some(Cell::Free),
            1 => Some(Cell::Occupied),
            2 => Some(Cell::Unknown),
            _ => None,
        }
    }
}

/// Shape and placement of a grid, shared by the grid and every field derived
/// from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Point,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Point) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::InvalidDimensions { width, height });
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GridError::InvalidResolution(resolution));
        }
        Ok(Self { width, height, resolution, origin })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    /// Cell containing `p`, or `None` outside the grid.
    pub fn world_to_cell(&self, p: Point) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || !fx.is_finite() || !fy.is_finite() {
            return None;
        }
        let (col, row) = (fx as usize, fy as usize);
        (col < self.width && row < self.height).then_some((col, row))
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Point {
        Point::new(
            self.origin.x + (col as f64 + 0.5) * self.resolution,
            self.origin.y + (row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn contains(&self, p: Point) -> bool {
        self.world_to_cell(p).is_some()
    }

    /// Half of a cell diagonal: the farthest a point in a cell can be from its
    /// center.
    pub fn half_diagonal(&self) -> f64 {
        self.resolution * SQRT_2 / 2.0
    }

    pub fn extent(&self) -> Point {
        Point::new(self.width as f64 * self.resolution, self.height as f64 * self.resolution)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    geometry: GridGeometry,
    cells: Vec<Cell>,
}

impl OccupancyGrid {
    /// All cells start Unknown.
    pub fn new(width: usize, height: usize, resolution: f64, origin: Point) -> Result<Self, GridError> {
        let geometry = GridGeometry::new(width, height, resolution, origin)?;
        Ok(Self::filled(geometry, Cell::Unknown))
    }

    pub fn filled(geometry: GridGeometry, cell: Cell) -> Self {
        Self { geometry, cells: vec![cell; geometry.len()] }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn resolution(&self) -> f64 {
        self.geometry.resolution
    }

    pub fn origin(&self) -> Point {
        self.geometry.origin
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn get(&self, col: usize, row: usize) -> Cell {
        self.cells[self.geometry.index(col, row)]
    }

    pub fn set(&mut self, col: usize, row: usize, cell: Cell) {
        let i = self.geometry.index(col, row);
        self.cells[i] = cell;
    }

    pub fn cell_at(&self, p: Point) -> Option<Cell> {
        self.geometry.world_to_cell(p).map(|(c, r)| self.get(c, r))
    }

    pub fn world_to_cell(&self, p: Point) -> Option<(usize, usize)> {
        self.geometry.world_to_cell(p)
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Point {
        self.geometry.cell_center(col, row)
    }

    pub fn count(&self, cell: Cell) -> usize {
        self.cells.iter().filter(|&&c| c == cell).count()
    }

    /// Centers of all Occupied cells in row-major order.
    pub fn occupied_centers(&self) -> Vec<Point> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == Cell::Occupied)
            .map(|(i, _)| {
                let (c, r) = self.geometry.coords(i);
                self.geometry.cell_center(c, r)
            })
            .collect()
    }

    /// Marks cells along each beam. Cells crossed before the return become
    /// Free, the cell entered at the return distance becomes Occupied when the
    /// return is shorter than the maximum range. Occupied cells are never
    /// cleared. Returns whether any cell changed.
    pub fn integrate_scan(&mut self, pose: &RobotState, scan: &RangeScan) -> bool {
        const EPS: f64 = 1e-9;
        let mut changed = false;
        let mut beam_cells = Vec::new();
        for (k, &range) in scan.ranges.iter().enumerate() {
            let angle = pose.theta + scan.angle_min + k as f64 * scan.angle_increment;
            let dir = Point::new(angle.cos(), angle.sin());
            // a return whose endpoint lies outside the grid cannot be placed
            let hit = range < scan.max_range && self.geometry.contains(pose.p + dir * (range - EPS).max(0.0));
            beam_cells.clear();
            if hit {
                beam_cells.extend(GridRay::new(&self.geometry, pose.p, dir, range + EPS));
            } else {
                let reach = range.min(scan.max_range);
                beam_cells.extend(GridRay::new(&self.geometry, pose.p, dir, reach).filter(|c| c.t_enter < reach));
            }
            // the return lies in the last cell entered (several on an exact corner)
            let t_last = if hit {
                beam_cells.iter().map(|c| c.t_enter).fold(f64::NEG_INFINITY, f64::max)
            } else {
                f64::INFINITY
            };
            for cell in &beam_cells {
                let current = self.get(cell.col, cell.row);
                let next = if cell.t_enter >= t_last - EPS { Cell::Occupied } else { Cell::Free };
                if current == Cell::Occupied || next == current {
                    continue;
                }
                self.set(cell.col, cell.row, next);
                changed = true;
            }
        }
        changed
    }
}

/// One planar range scan. Beam `k` points at `angle_min + k * angle_increment`
/// relative to the robot heading; a range equal to `max_range` means no return.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeScan {
    pub angle_min: f64,
    pub angle_increment: f64,
    pub max_range: f64,
    pub ranges: Vec<f64>,
}

/// An occupancy grid together with its up-to-date distance transform.
#[derive(Debug, Clone)]
pub struct GridMap {
    grid: OccupancyGrid,
    distance: DistanceField,
}

impl GridMap {
    pub fn new(grid: OccupancyGrid) -> Self {
        let distance = distance_transform(&grid);
        Self { grid, distance }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn distance(&self) -> &DistanceField {
        &self.distance
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.grid.geometry()
    }

    pub fn integrate_scan(&mut self, pose: &RobotState, scan: &RangeScan) -> bool {
        let changed = self.grid.integrate_scan(pose, scan);
        if changed {
            self.distance = distance_transform(&self.grid);
        }
        changed
    }

    pub fn into_grid(self) -> OccupancyGrid {
        self.grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> Point {
        Point::new(0.0, 0.0)
    }

    #[test]
    fn new_grid_is_unknown() {
        let g = OccupancyGrid::new(10, 10, 0.1, origin()).unwrap();
        assert_eq!(g.count(Cell::Unknown), 100);
        assert!((g.geometry().extent() - Point::new(1.0, 1.0)).norm() < 1e-12);
        let single = OccupancyGrid::new(1, 1, 0.1, origin()).unwrap();
        assert_eq!(single.cells().len(), 1);
    }

    #[test]
    fn invalid_dimensions_rejected() {
        assert!(matches!(OccupancyGrid::new(0, 5, 0.1, origin()), Err(GridError::InvalidDimensions { .. })));
        assert!(matches!(OccupancyGrid::new(5, 5, 0.0, origin()), Err(GridError::InvalidResolution(_))));
    }

    #[test]
    fn world_cell_roundtrip() {
        let g = OccupancyGrid::new(7, 5, 0.25, Point::new(-1.0, 2.0)).unwrap();
        for row in 0..5 {
            for col in 0..7 {
                let c = g.cell_center(col, row);
                assert_eq!(g.world_to_cell(c), Some((col, row)));
            }
        }
        assert_eq!(g.world_to_cell(Point::new(-1.01, 2.5)), None);
        assert_eq!(g.world_to_cell(Point::new(0.75, 3.25)), None);
    }

    fn free_pose(x: f64, y: f64, theta: f64) -> RobotState {
        RobotState::new(Point::new(x, y), theta)
    }

    #[test]
    fn single_beam_marks_free_then_occupied() {
        // Robot on the boundary x = 0.1 (inside cell 1), wall face at x = 2.0:
        // cells 1..=19 are crossed, cell 20 is entered at the return.
        let mut g = OccupancyGrid::new(40, 3, 0.1, origin()).unwrap();
        let scan = RangeScan { angle_min: 0.0, angle_increment: 0.0, max_range: 10.0, ranges: vec![1.9] };
        g.integrate_scan(&free_pose(0.1, 0.15, 0.0), &scan);
        let free: Vec<usize> = (0..40).filter(|&c| g.get(c, 1) == Cell::Free).collect();
        assert_eq!(free, (1..=19).collect::<Vec<_>>());
        assert_eq!(g.get(20, 1), Cell::Occupied);
        assert_eq!(g.count(Cell::Occupied), 1);
        assert_eq!(g.get(0, 1), Cell::Unknown);
    }

    #[test]
    fn max_range_beam_writes_no_obstacle() {
        let mut g = OccupancyGrid::new(40, 3, 0.1, origin()).unwrap();
        let scan = RangeScan { angle_min: 0.0, angle_increment: 0.0, max_range: 1.0, ranges: vec![1.0] };
        g.integrate_scan(&free_pose(0.05, 0.15, 0.0), &scan);
        assert_eq!(g.count(Cell::Occupied), 0);
        // entered before 1.0 m: cells 0..=10 (cell 10 entered at 0.95)
        assert_eq!(g.count(Cell::Free), 11);
    }

    #[test]
    fn opposing_beams_give_disjoint_corridors() {
        let mut g = OccupancyGrid::new(40, 3, 0.1, origin()).unwrap();
        let scan = RangeScan {
            angle_min: 0.0,
            angle_increment: std::f64::consts::PI,
            max_range: 10.0,
            ranges: vec![0.45, 0.65],
        };
        // robot at x = 2.05, cell 20
        g.integrate_scan(&free_pose(2.05, 0.15, 0.0), &scan);
        let free: Vec<usize> = (0..40).filter(|&c| g.get(c, 1) == Cell::Free).collect();
        // forward beam enters cell 25 at 0.45 m, backward beam enters cell 13 at 0.65 m
        assert!(free.contains(&20));
        let right: Vec<usize> = free.iter().copied().filter(|&c| c > 20).collect();
        let left: Vec<usize> = free.iter().copied().filter(|&c| c < 20).collect();
        assert_eq!(right, vec![21, 22, 23, 24]);
        assert_eq!(left, vec![14, 15, 16, 17, 18, 19]);
        assert_eq!(g.get(25, 1), Cell::Occupied);
        assert_eq!(g.get(13, 1), Cell::Occupied);
    }

    #[test]
    fn integrate_scan_is_idempotent() {
        let mut g = OccupancyGrid::new(30, 30, 0.1, origin()).unwrap();
        let ranges: Vec<f64> = (0..72).map(|k| 0.4 + 0.02 * (k % 7) as f64).collect();
        let scan = RangeScan { angle_min: 0.0, angle_increment: std::f64::consts::TAU / 72.0, max_range: 1.0, ranges };
        let pose = free_pose(1.52, 1.47, 0.3);
        assert!(g.integrate_scan(&pose, &scan));
        let snapshot = g.clone();
        assert!(!g.integrate_scan(&pose, &scan));
        assert_eq!(g, snapshot);
    }

    #[test]
    fn grid_map_refreshes_distance() {
        let mut map = GridMap::new(OccupancyGrid::new(20, 3, 0.1, origin()).unwrap());
        assert!(map.distance().is_unbounded(0, 0));
        let scan = RangeScan { angle_min: 0.0, angle_increment: 0.0, max_range: 5.0, ranges: vec![1.0] };
        map.integrate_scan(&free_pose(0.05, 0.15, 0.0), &scan);
        assert_eq!(map.grid().get(10, 1), Cell::Occupied);
        assert!((map.distance().get(0, 1) - 1.0).abs() < 1e-12);
    }
}
