//! Clearance-aware A* over the grid and the piecewise-linear path model.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::ClearanceField;
use crate::Point;

const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("point ({}, {}) is outside the grid", .0.x, .0.y)]
    OutOfBounds(Point),
    #[error("endpoint ({}, {}) lies in a non-traversable cell", .0.x, .0.y)]
    UntraversableEndpoint(Point),
    #[error("no traversable path to the goal")]
    NoPath,
}

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("a path needs at least one vertex")]
    Empty,
    #[error("path vertex {0} is not finite")]
    NonFinite(usize),
    #[error("sigma {0} outside [0, 1]")]
    SigmaOutOfRange(f64),
}

/// Arclength-parameterised polyline `ρ(σ)`, `σ ∈ [0, 1]`.
///
/// Consecutive duplicate vertices are dropped on construction. A single-vertex
/// path is a valid, constant path.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePath {
    vertices: Vec<Point>,
    sigmas: Vec<f64>,
    length: f64,
}

impl PiecewisePath {
    pub fn new(vertices: Vec<Point>) -> Result<Self, PathError> {
        if vertices.is_empty() {
            return Err(PathError::Empty);
        }
        if let Some(i) = vertices.iter().position(|v| !(v.x.is_finite() && v.y.is_finite())) {
            return Err(PathError::NonFinite(i));
        }
        let mut deduped: Vec<Point> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if deduped.last() != Some(&v) {
                deduped.push(v);
            }
        }
        let mut cumulative = Vec::with_capacity(deduped.len());
        let mut total = 0.0;
        cumulative.push(0.0);
        for w in deduped.windows(2) {
            total += (w[1] - w[0]).norm();
            cumulative.push(total);
        }
        let n = cumulative.len();
        let sigmas = cumulative
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                if i + 1 == n && n > 1 {
                    1.0
                } else if total > 0.0 {
                    l / total
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self { vertices: deduped, sigmas, length: total })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn start(&self) -> Point {
        self.vertices[0]
    }

    pub fn end(&self) -> Point {
        *self.vertices.last().unwrap()
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    /// `ρ(σ)`. Returns vertex `i` exactly at `σ = σ_i`.
    pub fn eval(&self, sigma: f64) -> Result<Point, PathError> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(PathError::SigmaOutOfRange(sigma));
        }
        if self.vertices.len() == 1 {
            return Ok(self.vertices[0]);
        }
        // first vertex with σ_i > sigma; the segment ends there
        let hi = self.sigmas.partition_point(|&s| s <= sigma);
        if hi == 0 {
            return Ok(self.vertices[0]);
        }
        let lo = hi - 1;
        if self.sigmas[lo] == sigma || hi == self.vertices.len() {
            return Ok(self.vertices[lo]);
        }
        let t = (sigma - self.sigmas[lo]) / (self.sigmas[hi] - self.sigmas[lo]);
        Ok(self.vertices[lo] + (self.vertices[hi] - self.vertices[lo]) * t)
    }

    /// Point on segment `i` at local parameter `t ∈ [0, 1]`, with its `σ`.
    pub fn segment_point(&self, i: usize, t: f64) -> (Point, f64) {
        let (a, b) = (self.vertices[i], self.vertices[i + 1]);
        let (sa, sb) = (self.sigmas[i], self.sigmas[i + 1]);
        if t >= 1.0 {
            return (b, sb);
        }
        if t <= 0.0 {
            return (a, sa);
        }
        (a + (b - a) * t, sa + (sb - sa) * t)
    }

    /// JSON form `{"sigmas": [...], "vertices": [[x, y], ...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "sigmas": self.sigmas,
            "vertices": self.vertices.iter().map(|v| [v.x, v.y]).collect::<Vec<_>>(),
        })
    }
}

/// `Σ ‖ρ_{i+1} − ρ_i‖ + c(ρ_{i+1})` over the vertices; `c(ρ_0)` for a
/// single-vertex path. Vertices outside the grid cost `c_u`.
pub fn path_cost(path: &PiecewisePath, clearance: &ClearanceField) -> f64 {
    vertex_cost(path.vertices(), clearance)
}

fn vertex_cost(vertices: &[Point], clearance: &ClearanceField) -> f64 {
    let c = |p: Point| clearance.cost_at(p).unwrap_or(clearance.design().c_u);
    if vertices.len() == 1 {
        return c(vertices[0]);
    }
    vertices.windows(2).map(|w| (w[1] - w[0]).norm() + c(w[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PlanQuery<'a> {
    pub start: Point,
    pub goal: Point,
    pub clearance: &'a ClearanceField,
    pub connectivity: Connectivity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    /// Cell centers after collinear merging.
    pub path: PiecewisePath,
    /// Cost of the unmerged grid path.
    pub cost: f64,
    pub cells: Vec<(usize, usize)>,
}

impl Plan {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = self.path.to_json();
        v["cost"] = serde_json::json!(self.cost);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OpenEntry {
    f: f64,
    g: f64,
    index: usize,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // BinaryHeap pops the maximum: smallest f, then largest g, then smallest index
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then(self.g.total_cmp(&other.g)).then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const ORTHOGONAL: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
const DIAGONAL: [(i64, i64); 4] = [(1, 1), (-1, 1), (-1, -1), (1, -1)];

/// Successors of a cell with their step length. Diagonal moves require both
/// orthogonally adjacent cells to be traversable, so paths never cut a corner
/// of a blocked cell.
pub fn neighbors(
    clearance: &ClearanceField,
    connectivity: Connectivity,
    col: usize,
    row: usize,
) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    let geom = *clearance.geometry();
    let res = geom.resolution;
    let diag = res * std::f64::consts::SQRT_2;
    let inside = move |c: i64, r: i64| c >= 0 && r >= 0 && (c as usize) < geom.width && (r as usize) < geom.height;
    let free = move |c: i64, r: i64| inside(c, r) && clearance.is_traversable(c as usize, r as usize);
    let (c0, r0) = (col as i64, row as i64);
    let straight = ORTHOGONAL
        .iter()
        .filter(move |&&(dc, dr)| free(c0 + dc, r0 + dr))
        .map(move |&(dc, dr)| ((c0 + dc) as usize, (r0 + dr) as usize, res));
    let diagonal = DIAGONAL.iter().filter_map(move |&(dc, dr)| {
        let ok =
            connectivity == Connectivity::Eight && free(c0 + dc, r0 + dr) && free(c0 + dc, r0) && free(c0, r0 + dr);
        ok.then(|| ((c0 + dc) as usize, (r0 + dr) as usize, diag))
    });
    straight.chain(diagonal)
}

/// A* from the start cell to the goal cell with edge cost
/// `step length + c(successor)` and heuristic `‖center − goal center‖`.
pub fn plan(query: &PlanQuery) -> Result<Plan, PlanError> {
    let cf = query.clearance;
    let geom = *cf.geometry();
    let endpoint = |p: Point| -> Result<(usize, usize), PlanError> {
        let (c, r) = geom.world_to_cell(p).ok_or(PlanError::OutOfBounds(p))?;
        if !cf.is_traversable(c, r) {
            return Err(PlanError::UntraversableEndpoint(p));
        }
        Ok((c, r))
    };
    let start = endpoint(query.start)?;
    let goal = endpoint(query.goal)?;
    let start_i = geom.index(start.0, start.1);
    let goal_i = geom.index(goal.0, goal.1);
    let goal_center = geom.cell_center(goal.0, goal.1);

    let n = geom.len();
    let mut g_cost = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let h = |i: usize| {
        let (c, r) = geom.coords(i);
        (geom.cell_center(c, r) - goal_center).norm()
    };
    g_cost[start_i] = 0.0;
    open.push(OpenEntry { f: h(start_i), g: 0.0, index: start_i });

    while let Some(OpenEntry { g, index, .. }) = open.pop() {
        if closed[index] || g > g_cost[index] {
            continue;
        }
        closed[index] = true;
        if index == goal_i {
            break;
        }
        let (c, r) = geom.coords(index);
        for (nc, nr, len) in neighbors(cf, query.connectivity, c, r) {
            let j = geom.index(nc, nr);
            if closed[j] {
                continue;
            }
            let tentative = g + len + cf.cost(nc, nr);
            if tentative < g_cost[j] {
                g_cost[j] = tentative;
                parent[j] = index;
                open.push(OpenEntry { f: tentative + h(j), g: tentative, index: j });
            }
        }
    }
    if !closed[goal_i] {
        return Err(PlanError::NoPath);
    }

    let mut cells = vec![goal];
    let mut cur = goal_i;
    while cur != start_i {
        cur = parent[cur];
        cells.push(geom.coords(cur));
    }
    cells.reverse();
    let centers: Vec<Point> = cells.iter().map(|&(c, r)| geom.cell_center(c, r)).collect();
    let cost = if cells.len() == 1 { cf.cost(start.0, start.1) } else { g_cost[goal_i] };
    let path = PiecewisePath::new(merge_collinear(&centers)).expect("grid path has finite vertices");
    Ok(Plan { path, cost, cells })
}

/// Drops interior vertices whose neighbours are collinear with them.
pub fn merge_collinear(points: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(points.len());
    for &p in points {
        while out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            let (u, w) = (b - a, p - b);
            let cross = u.x * w.y - u.y * w.x;
            if cross.abs() <= COLLINEAR_TOL && u.dot(&w) > 0.0 {
                out.pop();
            } else {
                break;
            }
        }
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::{distance_transform, Cell, ClearanceDesign, GridGeometry, OccupancyGrid, DEFAULT_C_UNKNOWN};
    use proptest::prelude::*;

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn field(grid: &OccupancyGrid, design: ClearanceDesign, r: f64) -> ClearanceField {
        ClearanceField::build(grid, &distance_transform(grid), design, r, DEFAULT_C_UNKNOWN).unwrap()
    }

    #[test]
    fn path_eval_examples() {
        let path = PiecewisePath::new(vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(1.0, 1.0)]).unwrap();
        assert_eq!(path.sigmas(), &[0.0, 0.5, 1.0]);
        assert_eq!(path.eval(0.0).unwrap(), pt(0.0, 0.0));
        assert_eq!(path.eval(1.0).unwrap(), pt(1.0, 1.0));
        assert_eq!(path.eval(0.75).unwrap(), pt(1.0, 0.5));
        assert!(matches!(path.eval(1.5), Err(PathError::SigmaOutOfRange(_))));
        assert!(matches!(path.eval(-0.1), Err(PathError::SigmaOutOfRange(_))));
    }

    #[test]
    fn path_construction_edge_cases() {
        assert_eq!(PiecewisePath::new(vec![]), Err(PathError::Empty));
        let single = PiecewisePath::new(vec![pt(2.0, 3.0), pt(2.0, 3.0)]).unwrap();
        assert_eq!(single.vertices().len(), 1);
        assert_eq!(single.eval(0.4).unwrap(), pt(2.0, 3.0));
        assert_eq!(single.length(), 0.0);
    }

    #[test]
    fn path_cost_examples() {
        let geom = GridGeometry::new(40, 10, 0.1, pt(0.0, 0.0)).unwrap();
        let mut g = OccupancyGrid::filled(geom, Cell::Free);
        g.set(39, 9, Cell::Occupied);
        let cf = field(&g, ClearanceDesign::MEDIUM, 0.0);
        let (a, b) = (pt(0.05, 0.05), pt(2.05, 0.05));
        let c_end = cf.cost_at(b).unwrap();
        let path = PiecewisePath::new(vec![a, b]).unwrap();
        assert!((path_cost(&path, &cf) - (2.0 + c_end)).abs() < 1e-12);
        let single = PiecewisePath::new(vec![a]).unwrap();
        assert_eq!(path_cost(&single, &cf), cf.cost_at(a).unwrap());
    }

    #[test]
    fn open_space_diagonal_cost() {
        let geom = GridGeometry::new(5, 5, 0.1, pt(0.0, 0.0)).unwrap();
        let g = OccupancyGrid::filled(geom, Cell::Free);
        let cf = field(&g, ClearanceDesign::MEDIUM, 0.0);
        let q = PlanQuery {
            start: pt(0.05, 0.05),
            goal: pt(0.45, 0.45),
            clearance: &cf,
            connectivity: Connectivity::Eight,
        };
        let plan = plan(&q).unwrap();
        // the empty-grid sentinel drives every cost to zero
        assert!((plan.cost - 4.0 * 0.1 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(plan.path.vertices().len(), 2);
    }

    #[test]
    fn enclosed_goal_has_no_path() {
        let geom = GridGeometry::new(15, 15, 0.1, pt(0.0, 0.0)).unwrap();
        let mut g = OccupancyGrid::filled(geom, Cell::Free);
        for k in 6..=12 {
            for (c, r) in [(k, 6), (k, 12), (6, k), (12, k)] {
                g.set(c, r, Cell::Occupied);
            }
        }
        let cf = field(&g, ClearanceDesign::MINIMUM, 0.0);
        let q = PlanQuery {
            start: pt(0.05, 0.05),
            goal: pt(0.95, 0.95),
            clearance: &cf,
            connectivity: Connectivity::Eight,
        };
        assert_eq!(plan(&q), Err(PlanError::NoPath));
    }

    #[test]
    fn endpoint_errors() {
        let geom = GridGeometry::new(5, 5, 0.1, pt(0.0, 0.0)).unwrap();
        let mut g = OccupancyGrid::filled(geom, Cell::Free);
        g.set(2, 2, Cell::Occupied);
        let cf = field(&g, ClearanceDesign::MINIMUM, 0.0);
        let mut q =
            PlanQuery { start: pt(-1.0, 0.0), goal: pt(0.45, 0.45), clearance: &cf, connectivity: Connectivity::Eight };
        assert!(matches!(plan(&q), Err(PlanError::OutOfBounds(_))));
        q.start = pt(0.25, 0.25);
        assert!(matches!(plan(&q), Err(PlanError::UntraversableEndpoint(_))));
    }

    /// Two routes from left to right around a central block: a wide one
    /// below and a one-cell gap above.
    #[test]
    fn prefers_wide_corridor_under_medium_design() {
        let geom = GridGeometry::new(40, 27, 0.1, pt(0.0, 0.0)).unwrap();
        let mut g = OccupancyGrid::filled(geom, Cell::Free);
        for c in 0..40 {
            g.set(c, 0, Cell::Occupied);
            g.set(c, 26, Cell::Occupied);
        }
        for r in 0..27 {
            g.set(0, r, Cell::Occupied);
            g.set(39, r, Cell::Occupied);
        }
        // central block leaves 3 free rows above (narrow side is 1 cell after inflation) and 8 below
        for c in 12..28 {
            for r in 9..=22 {
                g.set(c, r, Cell::Occupied);
            }
        }
        let cf = field(&g, ClearanceDesign::MEDIUM, 0.0);
        let q = PlanQuery {
            start: pt(0.55, 2.35),
            goal: pt(3.45, 2.35),
            clearance: &cf,
            connectivity: Connectivity::Eight,
        };
        let plan = plan(&q).unwrap();
        let beside_block: Vec<_> = plan.cells.iter().filter(|&&(c, _)| (12..28).contains(&c)).collect();
        assert!(!beside_block.is_empty());
        assert!(beside_block.iter().all(|&&(_, r)| r < 9), "took the narrow gap: {:?}", plan.cells);
        assert!(plan.path.length() > 2.9 + 2.0);
    }

    #[test]
    fn no_corner_cutting() {
        let geom = GridGeometry::new(3, 3, 0.1, pt(0.0, 0.0)).unwrap();
        let mut g = OccupancyGrid::filled(geom, Cell::Free);
        g.set(1, 0, Cell::Occupied);
        g.set(0, 1, Cell::Occupied);
        let cf = field(&g, ClearanceDesign { kappa: 1.0, c_u: 1.0, c_f: 0.99 }, 0.0);
        let q = PlanQuery {
            start: pt(0.05, 0.05),
            goal: pt(0.15, 0.15),
            clearance: &cf,
            connectivity: Connectivity::Eight,
        };
        // the only way out of the start cell is across the blocked corner
        assert_eq!(plan(&q), Err(PlanError::NoPath));
    }

    #[test]
    fn collinear_merge() {
        let pts = [pt(0.0, 0.0), pt(1.0, 0.0), pt(2.0, 0.0), pt(2.0, 1.0), pt(2.0, 2.0), pt(3.0, 3.0)];
        assert_eq!(merge_collinear(&pts), vec![pt(0.0, 0.0), pt(2.0, 0.0), pt(2.0, 2.0), pt(3.0, 3.0)]);
    }

    #[test]
    fn plan_json_shape() {
        let path = PiecewisePath::new(vec![pt(0.0, 0.0), pt(3.0, 4.0)]).unwrap();
        let plan = Plan { path, cost: 5.5, cells: vec![] };
        let v = plan.to_json();
        assert_eq!(v["vertices"][1][0], 3.0);
        assert_eq!(v["sigmas"][1], 1.0);
        assert_eq!(v["cost"], 5.5);
    }

    proptest! {
        #[test]
        fn eval_reproduces_vertices_and_is_arclength(
            raw in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..8),
            a in 0.0f64..1.0, b in 0.0f64..1.0,
        ) {
            let path = PiecewisePath::new(raw.iter().map(|&(x, y)| pt(x, y)).collect()).unwrap();
            for (v, &s) in path.vertices().iter().zip(path.sigmas()) {
                prop_assert_eq!(path.eval(s).unwrap(), *v);
            }
            prop_assume!(path.segment_count() >= 1);
            let (lo, hi) = (a.min(b), a.max(b));
            let same_segment = path.sigmas().partition_point(|&s| s <= lo) == path.sigmas().partition_point(|&s| s < hi);
            if same_segment {
                let d = (path.eval(hi).unwrap() - path.eval(lo).unwrap()).norm();
                prop_assert!((d - (hi - lo) * path.length()).abs() <= 1e-9 * (1.0 + path.length()));
            }
        }

        #[test]
        fn planned_vertices_are_traversable(
            blocks in proptest::collection::vec((0usize..24, 0usize..24), 0..60),
        ) {
            let geom = GridGeometry::new(24, 24, 0.1, pt(0.0, 0.0)).unwrap();
            let mut g = OccupancyGrid::filled(geom, Cell::Free);
            for (c, r) in blocks {
                if (c, r) != (1, 1) && (c, r) != (22, 22) {
                    g.set(c, r, Cell::Occupied);
                }
            }
            let cf = field(&g, ClearanceDesign::MAXIMUM, 0.0);
            let q = PlanQuery { start: pt(0.15, 0.15), goal: pt(2.25, 2.25), clearance: &cf, connectivity: Connectivity::Eight };
            if let Ok(p) = plan(&q) {
                for &(c, r) in &p.cells {
                    prop_assert!(cf.is_traversable(c, r));
                }
                for v in p.path.vertices() {
                    let (c, r) = geom.world_to_cell(*v).unwrap();
                    prop_assert!(cf.is_traversable(c, r));
                }
            }
        }
    }
}
