//! Scenario files.
//!
//! A scenario is a JSON object with `name`, `world`, `robot`, `goals`,
//! optional `reference_path` and `movers`, and a `params` block. `world` is
//! either an inline object or a path (relative to the scenario file) to a
//! world JSON file. Every `params` key has a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::control::InputLimits;
use crate::governor::{check_governor_rate, LszSemantics};
use crate::gridmap::{Cell, ClearanceDesign, GridError, GridGeometry, OccupancyGrid, DEFAULT_C_UNKNOWN};
use crate::planner::Connectivity;
use crate::Point;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scenario schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("unknown override key '{0}'")]
    UnknownKey(String),
    #[error("malformed override '{0}', expected key=value")]
    MalformedOverride(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Rect { min: [f64; 2], max: [f64; 2] },
    Circle { center: [f64; 2], radius: f64 },
}

impl Shape {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Rect { min, max } => p.x >= min[0] && p.x <= max[0] && p.y >= min[1] && p.y <= max[1],
            Shape::Circle { center, radius } => (p - to_point(*center)).norm() <= *radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    #[serde(default)]
    pub origin: [f64; 2],
    /// Occupy the outermost ring of cells.
    #[serde(default = "yes")]
    pub border: bool,
    #[serde(default)]
    pub shapes: Vec<Shape>,
    /// Start with the true map instead of an all-Unknown one.
    #[serde(default)]
    pub prior_map: bool,
    /// Text grid (relative to the world or scenario file) overriding the
    /// shape list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_file: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

impl WorldSpec {
    /// Reads a world file; a relative `grid_file` is taken relative to it.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let mut raw = read_json(path)?;
        anchor_grid_file(&mut raw, path.parent().unwrap_or(Path::new(".")));
        Ok(serde_json::from_value(raw)?)
    }

    /// Ground-truth occupancy: every cell whose center lies in a shape, plus
    /// the border, is Occupied; the rest is Free.
    pub fn rasterize(&self) -> Result<OccupancyGrid, GridError> {
        if let Some(file) = &self.grid_file {
            let f = std::fs::File::open(file)?;
            let mut g = OccupancyGrid::read_text(std::io::BufReader::new(f))?;
            for row in 0..g.height() {
                for col in 0..g.width() {
                    if g.get(col, row) == Cell::Unknown {
                        g.set(col, row, Cell::Free);
                    }
                }
            }
            return Ok(g);
        }
        let geom = GridGeometry::new(self.width, self.height, self.resolution, to_point(self.origin))?;
        let mut g = OccupancyGrid::filled(geom, Cell::Free);
        for row in 0..self.height {
            for col in 0..self.width {
                let edge = col == 0 || row == 0 || col + 1 == self.width || row + 1 == self.height;
                let c = geom.cell_center(col, row);
                if (self.border && edge) || self.shapes.iter().any(|s| s.contains(c)) {
                    g.set(col, row, Cell::Occupied);
                }
            }
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    /// `[x, y, θ]`.
    pub start: [f64; 3],
    #[serde(default = "default_robot_radius")]
    pub radius: f64,
}

fn default_robot_radius() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoverSpec {
    pub radius: f64,
    pub speed: f64,
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default, rename = "loop")]
    pub looping: bool,
    /// Arclength already travelled at t = 0.
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    #[default]
    Adaptive,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignSpec {
    Preset(String),
    Custom(ClearanceDesign),
}

impl DesignSpec {
    pub fn resolve(&self) -> Result<ClearanceDesign, ScenarioError> {
        let d = match self {
            DesignSpec::Preset(name) => ClearanceDesign::preset(name)
                .ok_or_else(|| ScenarioError::Invalid(format!("unknown clearance design '{name}'")))?,
            DesignSpec::Custom(d) => *d,
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rates {
    pub physics_hz: f64,
    pub control_hz: f64,
    pub map_hz: f64,
    pub replan_hz: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self { physics_hz: 100.0, control_hz: 50.0, map_hz: 20.0, replan_hz: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub k_g: f64,
    pub k_v_mode: GainMode,
    /// Speed gain in fixed mode.
    pub k_v: f64,
    pub k_omega: f64,
    pub gamma: f64,
    pub q1: f64,
    pub q2: f64,
    pub design: DesignSpec,
    pub c_unknown: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub sensing_radius: f64,
    pub lidar_beams: usize,
    pub lidar_range: f64,
    pub rates: Rates,
    /// Seconds allowed per goal.
    pub horizon: f64,
    pub goal_tolerance: f64,
    /// Recorded with the results; the simulation itself draws no random
    /// numbers.
    pub seed: u64,
    pub lsz_semantics: LszSemantics,
    pub connectivity: Connectivity,
    pub n_boundary: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            k_g: 2.0,
            k_v_mode: GainMode::Adaptive,
            k_v: 1.0,
            k_omega: 1.5,
            gamma: 0.2,
            q1: 1.0,
            q2: 9.0,
            design: DesignSpec::Preset("medium".into()),
            c_unknown: DEFAULT_C_UNKNOWN,
            v_max: 2.0,
            omega_max: 4.0,
            sensing_radius: 8.0,
            lidar_beams: 360,
            lidar_range: 10.0,
            rates: Rates::default(),
            horizon: 300.0,
            goal_tolerance: 0.2,
            seed: 0,
            lsz_semantics: LszSemantics::Radius,
            connectivity: Connectivity::Eight,
            n_boundary: crate::geometry::DEFAULT_BOUNDARY_SAMPLES,
        }
    }
}

impl Params {
    pub fn limits(&self) -> InputLimits {
        InputLimits { v_max: self.v_max, omega_max: self.omega_max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub world: WorldSpec,
    pub robot: RobotSpec,
    pub goals: Vec<[f64; 2]>,
    /// Fixed path to track; disables replanning. Requires a single goal at
    /// its end.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_path: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub movers: Vec<MoverSpec>,
    #[serde(default)]
    pub params: Params,
}

pub fn to_point(a: [f64; 2]) -> Point {
    Point::new(a[0], a[1])
}

fn read_json(path: &Path) -> Result<Value, ScenarioError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    Ok(serde_json::from_str(&text)?)
}

/// Makes a relative `grid_file` absolute with respect to `base`.
fn anchor_grid_file(world: &mut Value, base: &Path) {
    if let Some(Value::String(f)) = world.get("grid_file") {
        let p = Path::new(f);
        if p.is_relative() {
            world["grid_file"] = Value::String(base.join(p).to_string_lossy().into_owned());
        }
    }
}

impl Scenario {
    /// Reads a scenario file, inlines a referenced world file and applies
    /// `key=value` overrides (dotted keys, JSON or bare-string values).
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ScenarioError> {
        let mut raw = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        if let Some(Value::String(w)) = raw.get("world") {
            let world_path = base.join(w);
            let mut world = read_json(&world_path)?;
            anchor_grid_file(&mut world, world_path.parent().unwrap_or(Path::new(".")));
            raw["world"] = world;
        } else if let Some(world) = raw.get_mut("world") {
            anchor_grid_file(world, &base);
        }
        Self::from_value(raw, overrides)
    }

    pub fn from_value(raw: Value, overrides: &[String]) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_value(raw)?;
        let scenario = if overrides.is_empty() { scenario } else { scenario.with_overrides(overrides)? };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, ScenarioError> {
        let mut full = serde_json::to_value(self)?;
        for o in overrides {
            let (key, value) = o.split_once('=').ok_or_else(|| ScenarioError::MalformedOverride(o.clone()))?;
            let slot = key
                .split('.')
                .try_fold(&mut full, |v, k| v.get_mut(k))
                .ok_or_else(|| ScenarioError::UnknownKey(key.to_string()))?;
            *slot = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        }
        Ok(serde_json::from_value(full)?)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        let p = &self.params;
        p.design.resolve()?;
        let r = &p.rates;
        if !(r.replan_hz > 0.0 && r.replan_hz <= r.map_hz && r.map_hz <= r.control_hz && r.control_hz <= r.physics_hz) {
            return invalid("rates must satisfy 0 < replan ≤ map ≤ control ≤ physics".into());
        }
        for (name, hz) in [("control", r.control_hz), ("map", r.map_hz), ("replan", r.replan_hz)] {
            let ratio = r.physics_hz / hz;
            if (ratio - ratio.round()).abs() > 1e-9 {
                return invalid(format!("physics rate must be a multiple of the {name} rate"));
            }
        }
        check_governor_rate(p.k_g, 1.0 / r.control_hz).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if !(p.k_v > 0.0 && p.k_omega > 0.0 && p.gamma > 0.0) {
            return invalid("k_v, k_omega and gamma must be positive".into());
        }
        if !(p.q1 > 0.0 && p.q2 >= p.q1) {
            return invalid("directional metric needs 0 < q1 ≤ q2".into());
        }
        if !(p.v_max > 0.0 && p.omega_max > 0.0 && p.horizon > 0.0 && p.goal_tolerance > 0.0) {
            return invalid("v_max, omega_max, horizon and goal_tolerance must be positive".into());
        }
        if p.lidar_beams == 0 || !(p.lidar_range > 0.0) || p.n_boundary < 3 {
            return invalid("lidar needs beams and range; n_boundary must be at least 3".into());
        }
        if self.goals.is_empty() {
            return invalid("at least one goal is required".into());
        }
        if !(self.robot.radius > 0.0) {
            return invalid("robot radius must be positive".into());
        }
        if let Some(path) = &self.reference_path {
            if path.is_empty() || self.goals.len() != 1 {
                return invalid("a reference path needs vertices and exactly one goal".into());
            }
        }
        for (i, m) in self.movers.iter().enumerate() {
            if !(m.radius > 0.0) || m.speed < 0.0 || m.waypoints.is_empty() {
                return invalid(format!("mover {i} needs a positive radius, non-negative speed and waypoints"));
            }
        }
        if self.world.grid_file.is_none() {
            GridGeometry::new(self.world.width, self.world.height, self.world.resolution, to_point(self.world.origin))?;
        }
        Ok(())
    }
}
