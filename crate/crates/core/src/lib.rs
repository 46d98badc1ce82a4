//! Environment-aware safe tracking for a differential-drive robot.
//!
//! The crate is organised bottom-up:
//!
//! * [`gridmap`]: occupancy grid, exact Euclidean distance transform and the
//!   exponential clearance cost used by the planner.
//! * [`planner`]: A* over the clearance cost, producing arclength-parameterised
//!   piecewise-linear paths.
//! * [`geometry`]: ice-cream-cone reachable sets and their Euclidean and
//!   directional distances to the mapped obstacles.
//! * [`control`]: unicycle kinematics, the stabilising control law and the
//!   adaptive speed gain.
//! * [`governor`]: local safe zone, along-path governor input and the governor
//!   update.
//! * [`safe_input`]: control barrier function constraints for moving obstacles
//!   and the small QCQP that filters the governor input.
//! * [`sim`]: the deterministic multi-rate simulator, scenario files, logs and
//!   metrics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod geometry;
pub mod governor;
pub mod gridmap;
pub mod planner;
pub mod safe_input;
pub mod sim;

/// World-frame point or vector in meters.
pub type Point = nalgebra::Vector2<f64>;

pub use control::{ControlInput, InputLimits, RobotState};
pub use geometry::{ConeSet, DirectionalMetric};
pub use governor::{GovernorState, LocalSafeZone};
pub use gridmap::{Cell, ClearanceDesign, ClearanceField, DistanceField, GridMap, OccupancyGrid};
pub use planner::{PiecewisePath, PlanQuery};
pub use safe_input::{CbfConstraint, MovingObstacle, SafeInputResult};
