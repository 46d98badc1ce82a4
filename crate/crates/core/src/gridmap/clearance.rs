use serde::{Deserialize, Serialize};

use super::{Cell, DistanceField, GridError, GridGeometry, OccupancyGrid};
use crate::Point;

/// Cost assigned to Unknown cells.
pub const DEFAULT_C_UNKNOWN: f64 = 3.0;

/// `c_u · exp(-κ d)`.
pub fn clearance_cost(d: f64, c_u: f64, kappa: f64) -> f64 {
    c_u * (-kappa * d).exp()
}

/// A cell is traversable when its clearance cost does not exceed the cutoff.
pub fn is_traversable(c: f64, c_f: f64) -> bool {
    c <= c_f
}

/// Parameters of the obstacle clearance term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearanceDesign {
    pub kappa: f64,
    pub c_u: f64,
    pub c_f: f64,
}

impl ClearanceDesign {
    pub const MINIMUM: ClearanceDesign = ClearanceDesign { kappa: 15.0, c_u: 3.2, c_f: 1.0 };
    pub const MEDIUM: ClearanceDesign = ClearanceDesign { kappa: 7.0, c_u: 8.3, c_f: 5.0 };
    pub const MAXIMUM: ClearanceDesign = ClearanceDesign { kappa: 1.0, c_u: 16.9, c_f: 15.0 };

    pub fn preset(name: &str) -> Option<ClearanceDesign> {
        match name {
            "minimum" | "min" => Some(Self::MINIMUM),
            "medium" | "med" => Some(Self::MEDIUM),
            "maximum" | "max" => Some(Self::MAXIMUM),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.kappa > 0.0 && self.c_u > 0.0) {
            return Err(GridError::InvalidDesign(format!(
                "kappa and c_u must be positive (kappa={}, c_u={})",
                self.kappa, self.c_u
            )));
        }
        if !(self.c_f < self.c_u) {
            return Err(GridError::InvalidDesign(format!("cutoff c_f={} must be below c_u={}", self.c_f, self.c_u)));
        }
        Ok(())
    }

    pub fn cost(&self, d: f64) -> f64 {
        clearance_cost(d, self.c_u, self.kappa)
    }

    /// Smallest inflated distance at which a cell becomes traversable.
    pub fn cutoff_distance(&self) -> f64 {
        (self.c_u / self.c_f).ln() / self.kappa
    }
}

/// Per-cell clearance cost and traversability for planning.
///
/// The cost uses the distance to the inflated obstacle set, i.e. the distance
/// field minus the robot radius and half a cell diagonal, clamped at zero.
/// Unknown cells are planned through as free space: their traversability
/// follows their distance, their cost is `c_unknown`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearanceField {
    geometry: GridGeometry,
    design: ClearanceDesign,
    c_unknown: f64,
    costs: Vec<f64>,
    traversable: Vec<bool>,
}

impl ClearanceField {
    pub fn build(
        grid: &OccupancyGrid,
        distance: &DistanceField,
        design: ClearanceDesign,
        robot_radius: f64,
        c_unknown: f64,
    ) -> Result<Self, GridError> {
        design.validate()?;
        let geometry = *grid.geometry();
        let inflation = robot_radius + geometry.half_diagonal();
        let n = geometry.len();
        let mut costs = Vec::with_capacity(n);
        let mut traversable = Vec::with_capacity(n);
        for (cell, &d) in grid.cells().iter().zip(distance.values()) {
            let d_inflated = (d - inflation).max(0.0);
            let c = design.cost(d_inflated);
            let ok = *cell != Cell::Occupied && is_traversable(c, design.c_f);
            costs.push(if *cell == Cell::Unknown { c_unknown } else { c });
            traversable.push(ok);
        }
        Ok(Self { geometry, design, c_unknown, costs, traversable })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn design(&self) -> ClearanceDesign {
        self.design
    }

    pub fn c_unknown(&self) -> f64 {
        self.c_unknown
    }

    pub fn cost(&self, col: usize, row: usize) -> f64 {
        self.costs[self.geometry.index(col, row)]
    }

    pub fn is_traversable(&self, col: usize, row: usize) -> bool {
        self.traversable[self.geometry.index(col, row)]
    }

    pub fn cost_at(&self, p: Point) -> Option<f64> {
        self.geometry.world_to_cell(p).map(|(c, r)| self.cost(c, r))
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }
}
