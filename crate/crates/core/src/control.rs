//! Unicycle kinematics, the cone-preserving stabilising law and the adaptive
//! speed gain.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::Point;

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let wrapped = theta - TAU * ((theta + PI) / TAU).floor();
    // floor rounding can land exactly on +π
    if wrapped >= PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub p: Point,
    pub theta: f64,
}

impl RobotState {
    pub fn new(p: Point, theta: f64) -> Self {
        Self { p, theta: normalize_angle(theta) }
    }

    pub fn heading(&self) -> Point {
        Point::new(self.theta.cos(), self.theta.sin())
    }

    /// Longitudinal and lateral components of `target - p` in the body frame.
    pub fn errors_to(&self, target: Point) -> (f64, f64) {
        let d = target - self.p;
        let (s, c) = self.theta.sin_cos();
        (c * d.x + s * d.y, -s * d.x + c * d.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputLimits {
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for InputLimits {
    fn default() -> Self {
        Self { v_max: 2.0, omega_max: 4.0 }
    }
}

impl InputLimits {
    pub fn saturate(&self, u: ControlInput) -> ControlInput {
        ControlInput { v: u.v.clamp(-self.v_max, self.v_max), omega: u.omega.clamp(-self.omega_max, self.omega_max) }
    }
}

/// `v = k_v e_v`, `ω = k_ω atan(e_v⊥ / e_v)`, saturated.
///
/// Uses `atan`, not `atan2`: a goal behind the robot is approached in reverse.
/// `e_v = 0` takes the limit `sign(e_v⊥) π/2`; at `p = g` both inputs are 0.
pub fn control_law(x: &RobotState, g: Point, k_v: f64, k_omega: f64, limits: &InputLimits) -> ControlInput {
    let (e_v, e_perp) = x.errors_to(g);
    let angle = if e_v != 0.0 {
        (e_perp / e_v).atan()
    } else if e_perp != 0.0 {
        e_perp.signum() * FRAC_PI_2
    } else {
        0.0
    };
    limits.saturate(ControlInput { v: k_v * e_v, omega: k_omega * angle })
}

/// Ratio of directional to Euclidean obstacle distance, `1` when the
/// Euclidean distance is zero, clamped to `[√q1, √q2]`.
pub fn adaptive_gain(d_q: f64, d: f64, q1: f64, q2: f64) -> f64 {
    let raw = if d > 0.0 { d_q / d } else { 1.0 };
    raw.clamp(q1.sqrt(), q2.sqrt())
}

fn unicycle_rate(x: &RobotState, u: ControlInput) -> (f64, f64, f64) {
    (u.v * x.theta.cos(), u.v * x.theta.sin(), u.omega)
}

/// One RK4 step of the unicycle with `u` held constant.
pub fn integrate(x: &RobotState, u: ControlInput, dt: f64) -> RobotState {
    // heading is integrated unwrapped; wrapping happens once at the end
    let at = |base: &RobotState, k: (f64, f64, f64), h: f64| RobotState {
        p: base.p + Point::new(k.0, k.1) * h,
        theta: base.theta + k.2 * h,
    };
    let k1 = unicycle_rate(x, u);
    let k2 = unicycle_rate(&at(x, k1, dt / 2.0), u);
    let k3 = unicycle_rate(&at(x, k2, dt / 2.0), u);
    let k4 = unicycle_rate(&at(x, k3, dt), u);
    // averaging before scaling by dt keeps constant-rate steps exact
    let dx = (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0) / 6.0 * dt;
    let dy = (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1) / 6.0 * dt;
    let dth = (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2) / 6.0 * dt;
    RobotState::new(x.p + Point::new(dx, dy), x.theta + dth)
}
