//! Moving-obstacle barrier constraints on the governor input and the
//! projection of the desired input onto their intersection with the local
//! safe zone.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::control::{ControlInput, RobotState};
use crate::governor::{GovernorState, LocalSafeZone};
use crate::Point;

const GRADIENT_SURROGATE_TOL: f64 = 1e-6;
const FEASIBILITY_TOL: f64 = 1e-9;
const FALLBACK_ITERATIONS: usize = 100;

/// A ball obstacle moving with constant velocity over the control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingObstacle {
    pub p: Point,
    pub v: Point,
    pub radius: f64,
}

/// `a·ū + b ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbfConstraint {
    pub a: Point,
    pub b: f64,
    pub id: usize,
}

impl CbfConstraint {
    pub fn eval(&self, u: Point) -> f64 {
        self.a.dot(&u) + self.b
    }
}

/// `h = ‖g − p_i‖² − (r_i + r + ‖g − p‖)²`.
pub fn cbf_value(x: &RobotState, g: &GovernorState, obs: &MovingObstacle, r_robot: f64) -> f64 {
    let s = obs.radius + r_robot + (g.g - x.p).norm();
    (g.g - obs.p).norm_squared() - s * s
}

/// `α(h) = γ h²` extended oddly to `h < 0`.
pub fn class_k(h: f64, gamma: f64) -> f64 {
    gamma * h * h.abs()
}

/// Linear form of `ḣ + α(h) ≥ 0` in the governor input under
/// `ġ = k_g (ū − g)`, `ṗ = v [cos θ, sin θ]`, `ṗ_i = v_i`.
#[allow(clippy::too_many_arguments)]
pub fn cbf_constraint(
    x: &RobotState,
    g: &GovernorState,
    obs: &MovingObstacle,
    id: usize,
    r_robot: f64,
    k_g: f64,
    gamma: f64,
    u_robot: ControlInput,
) -> CbfConstraint {
    let rel = g.g - x.p;
    let dist = rel.norm();
    let n = if dist > GRADIENT_SURROGATE_TOL { rel / dist } else { Point::zeros() };
    let s = obs.radius + r_robot + dist;
    let dh_dg = (g.g - obs.p) * 2.0 - n * (2.0 * s);
    let dh_dp = n * (2.0 * s);
    let dh_dpi = (g.g - obs.p) * -2.0;
    let p_dot = x.heading() * u_robot.v;
    let h = cbf_value(x, g, obs, r_robot);
    CbfConstraint {
        a: dh_dg * k_g,
        b: -k_g * dh_dg.dot(&g.g) + dh_dp.dot(&p_dot) + dh_dpi.dot(&obs.v) + class_k(h, gamma),
        id,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SafeInputStatus {
    Unmodified,
    Modified,
    Fallback,
}

impl SafeInputStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SafeInputStatus::Unmodified => "unmodified",
            SafeInputStatus::Modified => "modified",
            SafeInputStatus::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeInputResult {
    pub u: Point,
    pub status: SafeInputStatus,
    /// Ids of constraints active at `u`.
    pub active: Vec<usize>,
    pub solve_time: Duration,
}

/// Half-plane `n·u + c ≥ 0` with unit `n`.
#[derive(Debug, Clone, Copy)]
struct HalfPlane {
    n: Point,
    c: f64,
    id: usize,
}

impl HalfPlane {
    fn eval(&self, u: Point) -> f64 {
        self.n.dot(&u) + self.c
    }

    fn project(&self, u: Point) -> Point {
        u - self.n * self.eval(u)
    }
}

/// Normalises every constraint; `None` if one with a vanishing gradient is
/// violated outright.
fn normalize(constraints: &[CbfConstraint]) -> Option<Vec<HalfPlane>> {
    let mut out = Vec::with_capacity(constraints.len());
    for c in constraints {
        let norm = c.a.norm();
        if norm <= 1e-12 {
            if c.b < -FEASIBILITY_TOL {
                return None;
            }
            continue;
        }
        out.push(HalfPlane { n: c.a / norm, c: c.b / norm, id: c.id });
    }
    Some(out)
}

fn project_disk(u: Point, g: Point, r: f64) -> Point {
    let d = (u - g).norm();
    if d <= r {
        u
    } else {
        g + (u - g) * (r / d)
    }
}

/// Minimiser of `‖ū − u_g‖²` subject to the half-planes and `‖ū − g‖ ≤ R`.
///
/// The optimum of a projection in the plane has at most two active linear
/// constraints, plus possibly the disk. Every such active set yields a
/// closed-form candidate; the closest feasible one is the solution. When no
/// candidate is feasible the squared constraint violation is minimised over
/// the disk by projected gradient and the result is flagged.
pub fn solve_safe_input(u_g: Point, zone: &LocalSafeZone, constraints: &[CbfConstraint]) -> SafeInputResult {
    let started = Instant::now();
    let (g, r) = (zone.center, zone.radius.max(0.0));
    let finish = |u: Point, status: SafeInputStatus, planes: &[HalfPlane]| SafeInputResult {
        u,
        status,
        active: planes.iter().filter(|h| h.eval(u).abs() <= 1e-7).map(|h| h.id).collect(),
        solve_time: started.elapsed(),
    };
    let Some(planes) = normalize(constraints) else {
        let u = fallback(u_g, g, r, &[]);
        return finish(u, SafeInputStatus::Fallback, &[]);
    };
    let disk_tol = FEASIBILITY_TOL * (1.0 + r);
    let feasible = |u: Point| {
        (u - g).norm() <= r + disk_tol && planes.iter().all(|h| h.eval(u) >= -FEASIBILITY_TOL * (1.0 + u.norm()))
    };

    if feasible(u_g) {
        return finish(u_g, SafeInputStatus::Unmodified, &planes);
    }

    let mut best: Option<(f64, Point)> = None;
    let mut consider = |u: Point| {
        if !(u.x.is_finite() && u.y.is_finite()) || !feasible(u) {
            return;
        }
        let d = (u - u_g).norm_squared();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, u));
        }
    };

    if r == 0.0 {
        consider(g);
    } else {
        consider(project_disk(u_g, g, r));
        for (i, hi) in planes.iter().enumerate() {
            consider(hi.project(u_g));
            // line ∩ circle
            let foot = hi.project(g);
            let off = (foot - g).norm_squared();
            if off <= r * r {
                let half = (r * r - off).sqrt();
                let t = Point::new(-hi.n.y, hi.n.x);
                consider(foot + t * half);
                consider(foot - t * half);
            }
            for hj in &planes[i + 1..] {
                let det = hi.n.x * hj.n.y - hi.n.y * hj.n.x;
                if det.abs() <= 1e-12 {
                    continue;
                }
                let x = (-hi.c * hj.n.y + hj.c * hi.n.y) / det;
                let y = (-hi.n.x * hj.c + hj.n.x * hi.c) / det;
                consider(Point::new(x, y));
            }
        }
    }

    match best {
        Some((_, u)) => finish(u, SafeInputStatus::Modified, &planes),
        None => {
            let u = fallback(u_g, g, r, &planes);
            finish(u, SafeInputStatus::Fallback, &planes)
        }
    }
}

/// Projected gradient on `Σ max(0, −(n·u + c))²` over the disk.
fn fallback(u_g: Point, g: Point, r: f64, planes: &[HalfPlane]) -> Point {
    let mut u = project_disk(u_g, g, r);
    if planes.is_empty() {
        return u;
    }
    // the objective's gradient is 2·Σ n nᵀ-Lipschitz, bounded by 2k
    let step = 1.0 / (2.0 * planes.len() as f64);
    for _ in 0..FALLBACK_ITERATIONS {
        let mut grad = Point::zeros();
        for h in planes {
            let s = h.eval(u);
            if s < 0.0 {
                grad += h.n * (2.0 * s);
            }
        }
        u = project_disk(u - grad * step, g, r);
    }
    u
}

/// Feasible point of the disk grid `g + step·(i, j)` closest to `u_g`, or
/// `None` if the grid has no feasible point.
///
/// Rows are scanned one at a time; within a row the feasible columns form an
/// interval computed from each constraint, and the column nearest `u_g` is
/// taken from it.
pub fn brute_force_oracle(u_g: Point, zone: &LocalSafeZone, constraints: &[CbfConstraint], step: f64) -> Option<Point> {
    assert!(step > 0.0 && zone.radius.is_finite());
    grid_search(u_g, zone, constraints, step, None).map(|(_, u)| u)
}

/// [`brute_force_oracle`] followed by exhaustive searches on finer grids
/// around the incumbent.
///
/// A single grid minimiser can sit `O(√(D·step))` away from the true one when
/// the optimum lies on a constraint boundary at distance `D` from `u_g`: grid
/// points hugging the boundary further along it are almost as close. Each
/// round shrinks the grid by 4 and searches the ball that must contain the
/// optimum if a feasible grid point lies within two grid steps of it, until
/// that ball is narrower than `step`.
pub fn refined_oracle(u_g: Point, zone: &LocalSafeZone, constraints: &[CbfConstraint], step: f64) -> Option<Point> {
    assert!(step > 0.0 && zone.radius.is_finite());
    let mut best = grid_search(u_g, zone, constraints, step, None)?;
    let mut h = step;
    for _ in 0..12 {
        let d = best.0.sqrt();
        let inner = (d - 2.0 * h).max(0.0);
        let reach = (d * d - inner * inner).sqrt() + 2.0 * h;
        if reach <= step {
            break;
        }
        h /= 4.0;
        if let Some(found) = grid_search(u_g, zone, constraints, h, Some((best.1, reach))) {
            if found.0 < best.0 {
                best = found;
            }
        }
    }
    Some(best.1)
}

/// Closest feasible point of the grid `g + step·(i, j)` inside the disk and,
/// if given, the square window `(center, half width)`, with its squared
/// distance to `u_g`.
fn grid_search(
    u_g: Point,
    zone: &LocalSafeZone,
    constraints: &[CbfConstraint],
    step: f64,
    window: Option<(Point, f64)>,
) -> Option<(f64, Point)> {
    let (g, r) = (zone.center, zone.radius.max(0.0));
    let (mut j_lo, mut j_hi) = (-((r / step).floor() as i64), (r / step).floor() as i64);
    if let Some((c, half)) = window {
        j_lo = j_lo.max(((c.y - half - g.y) / step).ceil() as i64);
        j_hi = j_hi.min(((c.y + half - g.y) / step).floor() as i64);
    }
    let target_col = (u_g.x - g.x) / step;
    let mut best: Option<(f64, Point)> = None;
    for j in j_lo..=j_hi {
        let dy = j as f64 * step;
        let y = g.y + dy;
        let half = (r * r - dy * dy).max(0.0).sqrt();
        let mut lo = (-half / step).ceil() as i64;
        let mut hi = (half / step).floor() as i64;
        if let Some((c, w)) = window {
            lo = lo.max(((c.x - w - g.x) / step).ceil() as i64);
            hi = hi.min(((c.x + w - g.x) / step).floor() as i64);
        }
        for c in constraints {
            if lo > hi {
                break;
            }
            // a.x·(g.x + i·step) + a.y·y + b ≥ 0
            let rest = c.a.y * y + c.b + c.a.x * g.x;
            let ax = c.a.x * step;
            if ax > 0.0 {
                lo = lo.max((-rest / ax).ceil() as i64);
            } else if ax < 0.0 {
                hi = hi.min((-rest / ax).floor() as i64);
            } else if rest < 0.0 {
                hi = lo - 1;
            }
        }
        // nudge the ends inward where rounding admitted an infeasible column
        let ok = |i: i64| {
            let u = Point::new(g.x + i as f64 * step, y);
            (u - g).norm() <= r + 1e-12 && constraints.iter().all(|c| c.eval(u) >= 0.0)
        };
        while lo <= hi && !ok(lo) {
            lo += 1;
        }
        while lo <= hi && !ok(hi) {
            hi -= 1;
        }
        if lo > hi {
            continue;
        }
        let i = (target_col.round() as i64).clamp(lo, hi);
        let u = Point::new(g.x + i as f64 * step, y);
        let d = (u - u_g).norm_squared();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, u));
        }
    }
    best
}
