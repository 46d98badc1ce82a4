//! Multi-rate closed loop on one logical clock.
//!
//! Each physics tick runs, in order: mapping (at map ticks), replanning (at
//! replan ticks), the control update and its log record (at control ticks),
//! then one physics step of the robot and the movers followed by collision
//! checks.

use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use super::movers::Mover;
use super::scenario::{to_point, GainMode, Params, Scenario, ScenarioError};
use super::world::{hits_static, lidar_scan, robot_clearance};
use crate::control::{adaptive_gain, control_law, integrate, ControlInput, RobotState};
use crate::geometry::{cone_from_state, cone_to_obstacles_distance, directional_cone_distance, DirectionalMetric};
use crate::governor::{check_init, governor_step, nominal_input, GovernorState, LocalSafeZone, NominalInput};
use crate::gridmap::{Cell, ClearanceDesign, ClearanceField, GridMap, OccupancyGrid};
use crate::planner::{plan, PiecewisePath, PlanError, PlanQuery};
use crate::safe_input::{cbf_constraint, cbf_value, solve_safe_input, SafeInputStatus};
use crate::Point;

/// Cells searched around an untraversable governor for a planning start.
const START_SEARCH_CELLS: i64 = 10;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("no initial path: {0}")]
    NoInitialPath(PlanError),
    #[error(
        "initial configuration fails the start check (cone must clear the obstacles and g must sit at the path start)"
    )]
    InitCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Reached,
    Collision,
    Dnf,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Reached => 0,
            RunStatus::Collision => 2,
            RunStatus::Dnf => 3,
        }
    }
}

/// One control step.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub x: RobotState,
    pub u: ControlInput,
    pub g: Point,
    pub u_g: Point,
    pub u_bar: Point,
    /// NaN while the governor holds.
    pub sigma: f64,
    pub zone_radius: f64,
    pub d_cone: f64,
    pub d_robot: f64,
    pub k_v: f64,
    /// `min_i h_i` over all movers; `+∞` without movers.
    pub h_star: f64,
    pub status: SafeInputStatus,
    pub replanned: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoverRecord {
    pub t: f64,
    pub id: usize,
    pub p: Point,
    pub v: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub name: String,
    pub status: RunStatus,
    pub goals_reached: usize,
    pub goals_total: usize,
    #[serde(flatten)]
    pub summary: LogSummary,
    pub fallback_count: usize,
    pub modified_count: usize,
    pub replan_count: usize,
    pub control_steps: usize,
    pub seed: u64,
    /// First plan for each goal.
    pub plans: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogSummary {
    pub plan_path_length: f64,
    pub trajectory_length: f64,
    pub finish_time: f64,
    pub avg_clearance: f64,
    pub min_clearance: f64,
    /// `None` without movers.
    pub min_h: Option<f64>,
}

/// Summary quantities of a finished log; `log` must be non-empty.
pub fn compute_metrics(log: &[Record], plans: &[PiecewisePath]) -> LogSummary {
    assert!(!log.is_empty(), "metrics need at least one record");
    let h = log.iter().map(|r| r.h_star).fold(f64::INFINITY, f64::min);
    LogSummary {
        plan_path_length: plans.iter().map(PiecewisePath::length).sum(),
        trajectory_length: log.windows(2).map(|w| (w[1].x.p - w[0].x.p).norm()).sum(),
        finish_time: log.last().unwrap().t,
        avg_clearance: log.iter().map(|r| r.d_robot).sum::<f64>() / log.len() as f64,
        min_clearance: log.iter().map(|r| r.d_robot).fold(f64::INFINITY, f64::min),
        min_h: h.is_finite().then_some(h),
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub log: Vec<Record>,
    pub movers: Vec<MoverRecord>,
    pub metrics: Metrics,
    /// Wall-clock time spent replanning; not part of the simulated schedule.
    pub plan_time: Duration,
    /// Wall-clock time of each control update.
    pub control_times: Vec<Duration>,
}

pub struct Simulation {
    name: String,
    params: Params,
    design: ClearanceDesign,
    r: f64,
    truth: GridMap,
    map: GridMap,
    track_map: bool,
    goals: Vec<Point>,
    fixed_path: bool,
    x: RobotState,
    gov: GovernorState,
    u: ControlInput,
    movers: Vec<Mover>,
    path: Option<PiecewisePath>,
    goal_idx: usize,
    goal_start: u64,
    tick: u64,
    ctrl_every: u64,
    map_every: u64,
    replan_every: u64,
    replanned: bool,
    log: Vec<Record>,
    mover_log: Vec<MoverRecord>,
    plans: Vec<PiecewisePath>,
    replan_count: usize,
    status: Option<RunStatus>,
    plan_time: Duration,
    control_times: Vec<Duration>,
}

impl Simulation {
    /// Builds the world, maps and plans at t = 0 and applies the start check.
    pub fn new(scenario: &Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let params = scenario.params.clone();
        let truth_grid = scenario.world.rasterize().map_err(ScenarioError::from)?;
        let map_grid = if scenario.world.prior_map {
            truth_grid.clone()
        } else {
            OccupancyGrid::filled(*truth_grid.geometry(), Cell::Unknown)
        };
        let rates = params.rates;
        let every = |hz: f64| (rates.physics_hz / hz).round() as u64;
        let start = scenario.robot.start;
        let x = RobotState::new(Point::new(start[0], start[1]), start[2]);
        let fixed =
            scenario.reference_path.as_ref().map(|v| PiecewisePath::new(v.iter().map(|&w| to_point(w)).collect()));
        let fixed = match fixed {
            Some(Ok(p)) => Some(p),
            Some(Err(e)) => return Err(ScenarioError::Invalid(format!("reference path: {e}")).into()),
            None => None,
        };
        let g0 = fixed.as_ref().map_or(x.p, |p| p.start());
        let mut sim = Self {
            name: scenario.name.clone(),
            design: params.design.resolve()?,
            r: scenario.robot.radius,
            truth: GridMap::new(truth_grid),
            map: GridMap::new(map_grid),
            track_map: !scenario.world.prior_map,
            goals: scenario.goals.iter().map(|&g| to_point(g)).collect(),
            fixed_path: fixed.is_some(),
            x,
            gov: GovernorState::new(g0),
            u: ControlInput { v: 0.0, omega: 0.0 },
            movers: scenario.movers.iter().map(Mover::new).collect(),
            path: None,
            goal_idx: 0,
            goal_start: 0,
            tick: 0,
            ctrl_every: every(rates.control_hz),
            map_every: every(rates.map_hz),
            replan_every: every(rates.replan_hz),
            replanned: false,
            log: Vec::new(),
            mover_log: Vec::new(),
            plans: Vec::new(),
            replan_count: 0,
            status: None,
            plan_time: Duration::ZERO,
            control_times: Vec::new(),
            params,
        };
        sim.update_map();
        match fixed {
            Some(p) => {
                sim.plans.push(p.clone());
                sim.path = Some(p);
            }
            None => sim.replan().map_err(SimError::NoInitialPath)?,
        }
        let path = sim.path.as_ref().expect("initial path installed");
        if !check_init(&sim.x, &sim.gov, path, &sim.map, sim.r) {
            return Err(SimError::InitCheck);
        }
        Ok(sim)
    }

    pub fn status(&self) -> Option<RunStatus> {
        self.status
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 / self.params.rates.physics_hz
    }

    pub fn state(&self) -> (&RobotState, &GovernorState) {
        (&self.x, &self.gov)
    }

    pub fn path(&self) -> Option<&PiecewisePath> {
        self.path.as_ref()
    }

    pub fn log(&self) -> &[Record] {
        &self.log
    }

    pub fn mapped(&self) -> &GridMap {
        &self.map
    }

    fn update_map(&mut self) {
        if !self.track_map {
            return;
        }
        let p = &self.params;
        let scan = lidar_scan(self.truth.grid(), &self.x, p.lidar_beams, p.lidar_range);
        self.map.integrate_scan(&self.x, &scan);
    }

    /// Cell center nearest to `g` among traversable cells within a small
    /// window, or `g` itself when its own cell is traversable.
    fn plan_start(&self, cf: &ClearanceField) -> Option<Point> {
        let geom = cf.geometry();
        let (gc, gr) = geom.world_to_cell(self.gov.g)?;
        if cf.is_traversable(gc, gr) {
            return Some(self.gov.g);
        }
        let mut best: Option<(f64, Point)> = None;
        for dr in -START_SEARCH_CELLS..=START_SEARCH_CELLS {
            for dc in -START_SEARCH_CELLS..=START_SEARCH_CELLS {
                let (c, r) = (gc as i64 + dc, gr as i64 + dr);
                if c < 0 || r < 0 || c >= geom.width as i64 || r >= geom.height as i64 {
                    continue;
                }
                if !cf.is_traversable(c as usize, r as usize) {
                    continue;
                }
                let center = geom.cell_center(c as usize, r as usize);
                let d = (center - self.gov.g).norm();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, center));
                }
            }
        }
        best.map(|(_, p)| p)
    }

    /// Plans from the governor to the current goal and installs the path,
    /// with its endpoints replaced by `g` and the goal.
    fn replan(&mut self) -> Result<(), PlanError> {
        let started = Instant::now();
        let result = self.compute_plan();
        self.plan_time += started.elapsed();
        let path = result?;
        if self.plans.len() == self.goal_idx {
            self.plans.push(path.clone());
        }
        self.path = Some(path);
        self.replanned = true;
        self.replan_count += 1;
        Ok(())
    }

    fn compute_plan(&self) -> Result<PiecewisePath, PlanError> {
        let goal = self.goals[self.goal_idx];
        let cf =
            ClearanceField::build(self.map.grid(), self.map.distance(), self.design, self.r, self.params.c_unknown)
                .expect("design validated with the scenario");
        let g = self.gov.g;
        let start = self.plan_start(&cf).ok_or(PlanError::UntraversableEndpoint(g))?;
        let found = plan(&PlanQuery { start, goal, clearance: &cf, connectivity: self.params.connectivity })?;
        let mut vertices = found.path.vertices().to_vec();
        if start == g {
            vertices[0] = g;
        } else {
            vertices.insert(0, g);
        }
        let last = vertices.len() - 1;
        if last == 0 {
            vertices.push(goal);
        } else {
            vertices[last] = goal;
        }
        Ok(PiecewisePath::new(vertices).expect("finite vertices"))
    }

    fn control_update(&mut self) {
        let started = Instant::now();
        let p = &self.params;
        let dt = 1.0 / p.rates.control_hz;
        let cone = cone_from_state(&self.x, &self.gov);
        let d_cone = cone_to_obstacles_distance(&cone, &self.map, self.r);
        let zone = LocalSafeZone::from_distance(self.gov.g, d_cone, p.lsz_semantics);
        let k_v = match p.k_v_mode {
            GainMode::Fixed => p.k_v,
            GainMode::Adaptive => {
                let metric = DirectionalMetric::from_angle(self.x.theta, p.q1, p.q2);
                let d_q = directional_cone_distance(&cone, &self.map, &metric, self.r, p.n_boundary);
                adaptive_gain(d_q, d_cone, p.q1, p.q2)
            }
        };
        let u = control_law(&self.x, self.gov.g, k_v, p.k_omega, &p.limits());
        let nominal = match &self.path {
            Some(path) => nominal_input(path, &zone),
            None => NominalInput { u_g: self.gov.g, sigma: None },
        };
        let mut h_star = f64::INFINITY;
        let mut constraints = Vec::new();
        for (id, m) in self.movers.iter().enumerate() {
            let obs = m.obstacle();
            h_star = h_star.min(cbf_value(&self.x, &self.gov, &obs, self.r));
            if (obs.p - self.x.p).norm() <= p.sensing_radius {
                constraints.push(cbf_constraint(&self.x, &self.gov, &obs, id, self.r, p.k_g, p.gamma, u));
            }
        }
        let filtered = solve_safe_input(nominal.u_g, &zone, &constraints);
        self.control_times.push(started.elapsed());

        let t = self.time();
        self.log.push(Record {
            t,
            x: self.x,
            u,
            g: self.gov.g,
            u_g: nominal.u_g,
            u_bar: filtered.u,
            sigma: nominal.sigma.unwrap_or(f64::NAN),
            zone_radius: zone.radius,
            d_cone,
            d_robot: robot_clearance(&self.truth, self.x.p, self.r),
            k_v,
            h_star,
            status: filtered.status,
            replanned: std::mem::take(&mut self.replanned),
        });
        for (id, m) in self.movers.iter().enumerate() {
            self.mover_log.push(MoverRecord { t, id, p: m.position(), v: m.velocity() });
        }
        self.gov = governor_step(&self.gov, filtered.u, p.k_g, dt);
        self.u = u;
    }

    /// Goal bookkeeping after a control record.
    fn check_progress(&mut self) {
        let p = &self.params;
        if (self.x.p - self.goals[self.goal_idx]).norm() <= p.goal_tolerance {
            self.goal_idx += 1;
            if self.goal_idx == self.goals.len() {
                self.status = Some(RunStatus::Reached);
                return;
            }
            self.goal_start = self.tick;
            // a failed plan leaves the governor holding until a later replan succeeds
            self.path = None;
            let _ = self.replan();
        } else if (self.tick - self.goal_start) as f64 / p.rates.physics_hz > p.horizon {
            self.status = Some(RunStatus::Dnf);
        }
    }

    fn physics(&mut self) {
        let dt = 1.0 / self.params.rates.physics_hz;
        self.x = integrate(&self.x, self.u, dt);
        for m in &mut self.movers {
            m.advance(dt);
        }
        self.tick += 1;
        let hit_mover = self.movers.iter().any(|m| (m.position() - self.x.p).norm() < self.r + m.radius());
        if hit_mover || hits_static(self.truth.grid(), self.x.p, self.r) {
            self.status = Some(RunStatus::Collision);
        }
    }

    /// Advances one physics tick; returns the final status once the run ends.
    pub fn step(&mut self) -> Option<RunStatus> {
        if self.status.is_some() {
            return self.status;
        }
        let n = self.tick;
        if n > 0 && n.is_multiple_of(self.map_every) {
            self.update_map();
        }
        if n > 0 && n.is_multiple_of(self.replan_every) && !self.fixed_path {
            let _ = self.replan();
        }
        if n.is_multiple_of(self.ctrl_every) {
            self.control_update();
            self.check_progress();
            if self.status.is_some() {
                return self.status;
            }
        }
        self.physics();
        self.status
    }

    pub fn finish(self) -> RunResult {
        let status = self.status.unwrap_or(RunStatus::Dnf);
        let count = |s: SafeInputStatus| self.log.iter().filter(|r| r.status == s).count();
        let metrics = Metrics {
            name: self.name.clone(),
            status,
            goals_reached: self.goal_idx.min(self.goals.len()),
            goals_total: self.goals.len(),
            summary: compute_metrics(&self.log, &self.plans),
            fallback_count: count(SafeInputStatus::Fallback),
            modified_count: count(SafeInputStatus::Modified),
            replan_count: self.replan_count,
            control_steps: self.log.len(),
            seed: self.params.seed,
            plans: self.plans.iter().map(|p| p.vertices().iter().map(|v| [v.x, v.y]).collect()).collect(),
        };
        RunResult {
            log: self.log,
            movers: self.mover_log,
            metrics,
            plan_time: self.plan_time,
            control_times: self.control_times,
        }
    }
}

/// Runs a scenario to completion: all goals reached, a collision, or a goal
/// horizon exceeded.
pub fn run(scenario: &Scenario) -> Result<RunResult, SimError> {
    let mut sim = Simulation::new(scenario)?;
    while sim.step().is_none() {}
    Ok(sim.finish())
}
