use super::{Cell, GridGeometry, OccupancyGrid};
use crate::Point;

/// Value reported where no Occupied cell exists. Large enough that the
/// clearance cost underflows to zero instead of producing NaN.
pub const DEFAULT_SENTINEL: f64 = 1e6;

// Squared cell distances at or above this mark "no obstacle in this line".
const FAR: f64 = 1e20;
const FAR_THRESHOLD: f64 = 1e19;

/// Per-cell Euclidean distance (meters) from the cell center to the nearest
/// Occupied cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    geometry: GridGeometry,
    squared_cells: Vec<f64>,
    values: Vec<f64>,
    sentinel: f64,
}

impl DistanceField {
    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[self.geometry.index(col, row)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Squared distance in cell units; an exact integer for reachable cells.
    pub fn squared_cells(&self, col: usize, row: usize) -> Option<u64> {
        let v = self.squared_cells[self.geometry.index(col, row)];
        (v < FAR_THRESHOLD).then_some(v as u64)
    }

    pub fn sentinel(&self) -> f64 {
        self.sentinel
    }

    pub fn is_unbounded(&self, col: usize, row: usize) -> bool {
        self.squared_cells[self.geometry.index(col, row)] >= FAR_THRESHOLD
    }

    pub fn has_obstacles(&self) -> bool {
        self.squared_cells.iter().any(|&v| v < FAR_THRESHOLD)
    }

    /// Distance field value of the cell containing `p`.
    pub fn at_point(&self, p: Point) -> Option<f64> {
        self.geometry.world_to_cell(p).map(|(c, r)| self.get(c, r))
    }
}

/// Exact Euclidean distance transform, sentinel [`DEFAULT_SENTINEL`].
pub fn distance_transform(grid: &OccupancyGrid) -> DistanceField {
    distance_transform_with_sentinel(grid, DEFAULT_SENTINEL)
}

/// Two-pass lower-envelope-of-parabolas transform (columns, then rows). All
/// intermediate values are integers, so the result is exact.
pub fn distance_transform_with_sentinel(grid: &OccupancyGrid, sentinel: f64) -> DistanceField {
    let geom = *grid.geometry();
    let (w, h) = (geom.width, geom.height);
    let mut sq: Vec<f64> = grid.cells().iter().map(|&c| if c == Cell::Occupied { 0.0 } else { FAR }).collect();

    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for col in 0..w {
        for row in 0..h {
            f[row] = sq[row * w + col];
        }
        lower_envelope(&f[..h], &mut d[..h], &mut v, &mut z);
        for row in 0..h {
            sq[row * w + col] = d[row];
        }
    }
    for row in 0..h {
        f[..w].copy_from_slice(&sq[row * w..(row + 1) * w]);
        lower_envelope(&f[..w], &mut d[..w], &mut v, &mut z);
        sq[row * w..(row + 1) * w].copy_from_slice(&d[..w]);
    }

    let res = geom.resolution;
    let values = sq.iter().map(|&s| if s >= FAR_THRESHOLD { sentinel } else { s.sqrt() * res }).collect();
    DistanceField { geometry: geom, squared_cells: sq, values, sentinel }
}

fn lower_envelope(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let intersect = |q: usize, p: usize| -> f64 {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = intersect(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *out = dq * dq + f[v[k]];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize, cell: Cell) -> OccupancyGrid {
        let g = GridGeometry::new(w, h, 0.1, Point::zeros()).unwrap();
        OccupancyGrid::filled(g, cell)
    }

    #[test]
    fn center_obstacle_three_by_three() {
        let mut g = grid(3, 3, Cell::Free);
        g.set(1, 1, Cell::Occupied);
        let df = distance_transform(&g);
        assert_eq!(df.get(1, 1), 0.0);
        assert!((df.get(0, 0) - 0.1 * 2f64.sqrt()).abs() < 1e-15);
        assert!((df.get(1, 0) - 0.1).abs() < 1e-15);
        assert_eq!(df.squared_cells(2, 2), Some(2));
    }

    #[test]
    fn empty_grid_is_sentinel() {
        let df = distance_transform(&grid(5, 4, Cell::Free));
        assert!(df.values().iter().all(|&v| v == DEFAULT_SENTINEL));
        assert!(!df.has_obstacles());
        let custom = distance_transform_with_sentinel(&grid(2, 2, Cell::Unknown), 42.0);
        assert!(custom.values().iter().all(|&v| v == 42.0));
    }

    #[test]
    fn full_grid_is_zero() {
        let df = distance_transform(&grid(4, 6, Cell::Occupied));
        assert!(df.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_row_and_column() {
        let mut g = grid(7, 1, Cell::Free);
        g.set(2, 0, Cell::Occupied);
        let df = distance_transform(&g);
        let cells: Vec<u64> = (0..7).map(|c| df.squared_cells(c, 0).unwrap()).collect();
        assert_eq!(cells, vec![4, 1, 0, 1, 4, 9, 16]);
    }
}
