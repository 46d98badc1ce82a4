use std::collections::VecDeque;

use super::GridGeometry;
use crate::Point;

/// A cell visited by a ray, with the ray parameter at which it is entered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayCell {
    pub col: usize,
    pub row: usize,
    pub t_enter: f64,
}

/// Supercover DDA walk of a ray through a grid.
///
/// Cells are yielded in order of entry distance. When the ray passes exactly
/// through a cell corner both side cells are yielded before the diagonal one,
/// so every cell the closed ray touches is visited. Boundary crossings are
/// computed directly from the boundary index (no accumulated increments), so
/// entry distances are reproducible by an independent slab test.
#[derive(Debug, Clone)]
pub struct GridRay {
    geometry: GridGeometry,
    start: Point,
    dir: Point,
    max_t: f64,
    col: i64,
    row: i64,
    step_x: i64,
    step_y: i64,
    next_bx: i64,
    next_by: i64,
    pending: VecDeque<RayCell>,
    started: bool,
    done: bool,
}

impl GridRay {
    /// `dir` must be a unit vector; cells entered beyond `max_t` are not
    /// visited.
    pub fn new(geometry: &GridGeometry, start: Point, dir: Point, max_t: f64) -> Self {
        let fx = ((start.x - geometry.origin.x) / geometry.resolution).floor() as i64;
        let fy = ((start.y - geometry.origin.y) / geometry.resolution).floor() as i64;
        let step_x = if dir.x > 0.0 {
            1
        } else if dir.x < 0.0 {
            -1
        } else {
            0
        };
        let step_y = if dir.y > 0.0 {
            1
        } else if dir.y < 0.0 {
            -1
        } else {
            0
        };
        Self {
            geometry: *geometry,
            start,
            dir,
            max_t,
            col: fx,
            row: fy,
            step_x,
            step_y,
            next_bx: if step_x > 0 { fx + 1 } else { fx },
            next_by: if step_y > 0 { fy + 1 } else { fy },
            pending: VecDeque::with_capacity(3),
            started: false,
            done: false,
        }
    }

    fn in_bounds(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.geometry.width && (row as usize) < self.geometry.height
    }

    fn cell(&self, col: i64, row: i64, t_enter: f64) -> RayCell {
        RayCell { col: col as usize, row: row as usize, t_enter }
    }

    fn t_x(&self) -> f64 {
        if self.step_x == 0 {
            return f64::INFINITY;
        }
        let bx = self.geometry.origin.x + self.next_bx as f64 * self.geometry.resolution;
        (bx - self.start.x) / self.dir.x
    }

    fn t_y(&self) -> f64 {
        if self.step_y == 0 {
            return f64::INFINITY;
        }
        let by = self.geometry.origin.y + self.next_by as f64 * self.geometry.resolution;
        (by - self.start.y) / self.dir.y
    }
}

impl Iterator for GridRay {
    type Item = RayCell;

    fn next(&mut self) -> Option<RayCell> {
        if let Some(c) = self.pending.pop_front() {
            return Some(c);
        }
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            if !self.in_bounds(self.col, self.row) {
                self.done = true;
                return None;
            }
            return Some(self.cell(self.col, self.row, 0.0));
        }
        let (tx, ty) = (self.t_x(), self.t_y());
        let t = tx.min(ty).max(0.0);
        if !t.is_finite() || t > self.max_t {
            self.done = true;
            return None;
        }
        if tx < ty {
            self.col += self.step_x;
            self.next_bx += self.step_x;
        } else if ty < tx {
            self.row += self.step_y;
            self.next_by += self.step_y;
        } else {
            // exact corner crossing
            let side_x = (self.col + self.step_x, self.row);
            let side_y = (self.col, self.row + self.step_y);
            for (c, r) in [side_x, side_y] {
                if self.in_bounds(c, r) {
                    let cell = self.cell(c, r, t);
                    self.pending.push_back(cell);
                }
            }
            self.col += self.step_x;
            self.row += self.step_y;
            self.next_bx += self.step_x;
            self.next_by += self.step_y;
        }
        if self.in_bounds(self.col, self.row) {
            let cell = self.cell(self.col, self.row, t);
            self.pending.push_back(cell);
        } else {
            self.done = true;
        }
        self.pending.pop_front()
    }
}
