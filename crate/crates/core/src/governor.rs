//! Reference governor: local safe zone, nominal along-path input and the
//! first-order governor update.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::RobotState;
use crate::geometry::{cone_from_state, cone_to_obstacles_distance};
use crate::gridmap::GridMap;
use crate::planner::PiecewisePath;
use crate::Point;

const DISCRIMINANT_FLOOR: f64 = -1e-12;
const INIT_ANCHOR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorState {
    pub g: Point,
}

impl GovernorState {
    pub fn new(g: Point) -> Self {
        Self { g }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GovernorError {
    #[error("governor gain must satisfy 0 < k_g·dt < 1 (k_g={k_g}, dt={dt})")]
    UnstableRate { k_g: f64, dt: f64 },
}

/// How the cone-to-obstacle distance `d` becomes a zone radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LszSemantics {
    /// Radius `d`.
    #[default]
    Radius,
    /// Radius `√d`, from reading the zone as `‖q − g‖² ≤ d`.
    PaperLiteral,
}

/// Ball of admissible governor inputs around `g`; radius 0 freezes the
/// governor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSafeZone {
    pub center: Point,
    pub radius: f64,
}

impl LocalSafeZone {
    pub fn from_distance(center: Point, d: f64, semantics: LszSemantics) -> Self {
        let d = d.max(0.0);
        let radius = match semantics {
            LszSemantics::Radius => d,
            LszSemantics::PaperLiteral => d.sqrt(),
        };
        Self { center, radius }
    }

    pub fn contains(&self, q: Point) -> bool {
        (q - self.center).norm() <= self.radius
    }
}

pub fn local_safe_zone(
    x: &RobotState,
    g: &GovernorState,
    map: &GridMap,
    r_robot: f64,
    semantics: LszSemantics,
) -> LocalSafeZone {
    let d = cone_to_obstacles_distance(&cone_from_state(x, g), map, r_robot);
    LocalSafeZone::from_distance(g.g, d, semantics)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalInput {
    pub u_g: Point,
    /// Furthest path parameter inside the zone; `None` when the path misses
    /// the zone and the governor holds.
    pub sigma: Option<f64>,
}

/// Furthest point of the path inside the zone.
///
/// Segments are scanned from the path end; on each, the largest parameter
/// with `‖ρ − g‖ ≤ R` solves a quadratic.
pub fn nominal_input(path: &PiecewisePath, zone: &LocalSafeZone) -> NominalInput {
    let g = zone.center;
    let r = zone.radius;
    let hold = NominalInput { u_g: g, sigma: None };
    let verts = path.vertices();
    if verts.len() == 1 {
        return if (verts[0] - g).norm() <= r { NominalInput { u_g: verts[0], sigma: Some(1.0) } } else { hold };
    }
    for i in (0..path.segment_count()).rev() {
        let (a, b) = (verts[i], verts[i + 1]);
        if (b - g).norm() <= r {
            let (p, s) = path.segment_point(i, 1.0);
            return NominalInput { u_g: p, sigma: Some(s) };
        }
        let e = b - a;
        let w = a - g;
        let qa = e.norm_squared();
        let qb = 2.0 * e.dot(&w);
        let qc = w.norm_squared() - r * r;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < DISCRIMINANT_FLOOR {
            continue;
        }
        let t = (-qb + disc.max(0.0).sqrt()) / (2.0 * qa);
        if !(0.0..=1.0).contains(&t) {
            continue;
        }
        let (mut p, s) = path.segment_point(i, t);
        // rounding (or a floored discriminant) can leave p a hair outside
        let dist = (p - g).norm();
        if dist > r {
            p = if dist > 0.0 { g + (p - g) * (r / dist) } else { g };
        }
        return NominalInput { u_g: p, sigma: Some(s) };
    }
    hold
}

pub fn check_governor_rate(k_g: f64, dt: f64) -> Result<(), GovernorError> {
    let prod = k_g * dt;
    if k_g > 0.0 && dt > 0.0 && prod < 1.0 {
        Ok(())
    } else {
        Err(GovernorError::UnstableRate { k_g, dt })
    }
}

/// Forward-Euler step of `ġ = −k_g (g − ū)`; requires `k_g·dt < 1`.
pub fn governor_step(g: &GovernorState, u: Point, k_g: f64, dt: f64) -> GovernorState {
    debug_assert!(check_governor_rate(k_g, dt).is_ok());
    GovernorState::new(g.g + (u - g.g) * (k_g * dt))
}

/// Start condition: the predicted cone is clear of the inflated obstacles and
/// the governor sits at the path start.
pub fn check_init(x0: &RobotState, g0: &GovernorState, path: &PiecewisePath, map: &GridMap, r_robot: f64) -> bool {
    let d = cone_to_obstacles_distance(&cone_from_state(x0, g0), map, r_robot);
    d > 0.0 && (g0.g - path.start()).norm() <= INIT_ANCHOR_TOL
}
