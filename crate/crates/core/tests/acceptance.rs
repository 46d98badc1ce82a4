//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Runs as a plain binary so the lines show up in `cargo test` output.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use east_core::control::{adaptive_gain, control_law, integrate, InputLimits, RobotState};
use east_core::geometry::{
    cone_from_state, cone_to_obstacles_distance, directional_cone_distance, point_to_cone_distance, ConeSet,
    DirectionalMetric,
};
use east_core::governor::{governor_step, nominal_input, GovernorState, LocalSafeZone};
use east_core::gridmap::{
    Cell, ClearanceDesign, ClearanceField, GridGeometry, GridMap, OccupancyGrid, DEFAULT_C_UNKNOWN,
};
use east_core::planner::{plan, Connectivity, PiecewisePath, PlanQuery};
use east_core::safe_input::{
    cbf_constraint, cbf_value, class_k, refined_oracle, solve_safe_input, CbfConstraint, MovingObstacle,
    SafeInputStatus,
};
use east_core::sim::output::{metrics_json, write_log};
use east_core::sim::{run, RunResult, RunStatus, Scenario};
use east_core::Point;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn load(rel: &str, overrides: &[&str]) -> Scenario {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    Scenario::load(&repo().join(rel), &o).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn timed_run(sc: &Scenario) -> (RunResult, Duration) {
    let t = Instant::now();
    let r = run(sc).unwrap_or_else(|e| panic!("{}: {e}", sc.name));
    (r, t.elapsed())
}

fn disk_point(rng: &mut ChaCha8Rng, center: Point, r: f64) -> Point {
    let rho = r * rng.gen::<f64>().sqrt();
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    center + Point::new(rho * phi.cos(), rho * phi.sin())
}

// ---------------------------------------------------------------- solver

fn solver_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let started = Instant::now();
    let (mut worst, mut checked, mut modified) = (0.0f64, 0, 0);
    while checked < 1000 {
        let g = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let r = rng.gen_range(0.05..5.0);
        let witness = disk_point(&mut rng, g, r - 0.02);
        let u_g = disk_point(&mut rng, g, 2.0 * r + 0.5);
        let k = rng.gen_range(0..=6);
        let cs: Vec<CbfConstraint> = (0..k)
            .map(|id| {
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                let scale = rng.gen_range(0.1..10.0);
                let a = Point::new(phi.cos(), phi.sin()) * scale;
                let slack = if rng.gen_bool(0.5) { rng.gen_range(0.002..0.01) } else { rng.gen_range(0.002..2.0) };
                CbfConstraint { a, b: -a.dot(&witness) + slack * scale, id }
            })
            .collect();
        let zone = LocalSafeZone { center: g, radius: r };
        let Some(o) = refined_oracle(u_g, &zone, &cs, 1e-3) else { continue };
        let s = solve_safe_input(u_g, &zone, &cs);
        if s.status == SafeInputStatus::Fallback {
            worst = f64::INFINITY;
        }
        if s.status == SafeInputStatus::Modified {
            modified += 1;
        }
        worst = worst.max((s.u - o).norm());
        checked += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        worst <= 2e-3 && secs < 10.0,
        format!("max deviation {worst:.2e} m over {checked} instances ({modified} modified), {secs:.2} s"),
    )
}

// ---------------------------------------------------------------- planner

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Plain Dijkstra with its own successor rule (8-connected, no corner
/// cutting) and edge cost `step + c(successor)`.
fn dijkstra(cf: &ClearanceField, start: (usize, usize), goal: (usize, usize)) -> Option<f64> {
    let geom = *cf.geometry();
    let ok = |c: i64, r: i64| {
        c >= 0
            && r >= 0
            && (c as usize) < geom.width
            && (r as usize) < geom.height
            && cf.is_traversable(c as usize, r as usize)
    };
    let mut dist = vec![f64::INFINITY; geom.len()];
    let s = geom.index(start.0, start.1);
    dist[s] = 0.0;
    let mut heap = BinaryHeap::from([Item(0.0, s)]);
    while let Some(Item(d, i)) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        let (c, r) = geom.coords(i);
        let (c, r) = (c as i64, r as i64);
        for dc in -1..=1i64 {
            for dr in -1..=1i64 {
                if (dc, dr) == (0, 0) || !ok(c + dc, r + dr) {
                    continue;
                }
                let diagonal = dc != 0 && dr != 0;
                if diagonal && !(ok(c + dc, r) && ok(c, r + dr)) {
                    continue;
                }
                let len = if diagonal { geom.resolution * std::f64::consts::SQRT_2 } else { geom.resolution };
                let (nc, nr) = ((c + dc) as usize, (r + dr) as usize);
                let nd = d + len + cf.cost(nc, nr);
                let j = geom.index(nc, nr);
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Item(nd, j));
                }
            }
        }
    }
    let gi = geom.index(goal.0, goal.1);
    if start == goal {
        return Some(cf.cost(start.0, start.1));
    }
    dist[gi].is_finite().then_some(dist[gi])
}

fn random_grid(rng: &mut ChaCha8Rng, n: usize, p_occ: f64, p_unknown: f64) -> OccupancyGrid {
    let geom = GridGeometry::new(n, n, 0.1, Point::zeros()).unwrap();
    let mut g = OccupancyGrid::filled(geom, Cell::Free);
    for row in 0..n {
        for col in 0..n {
            let x: f64 = rng.gen();
            if x < p_occ {
                g.set(col, row, Cell::Occupied);
            } else if x < p_occ + p_unknown {
                g.set(col, row, Cell::Unknown);
            }
        }
    }
    g
}

fn planner_optimality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let started = Instant::now();
    let (mut mismatches, mut found, mut worst) = (0, 0, 0.0f64);
    let mut tested = 0;
    while tested < 200 {
        let grid = random_grid(&mut rng, 32, 0.02, 0.1);
        let map = GridMap::new(grid);
        let cf =
            ClearanceField::build(map.grid(), map.distance(), ClearanceDesign::MEDIUM, 0.1, DEFAULT_C_UNKNOWN).unwrap();
        let free: Vec<(usize, usize)> =
            (0..32 * 32).map(|i| (i % 32, i / 32)).filter(|&(c, r)| cf.is_traversable(c, r)).collect();
        if free.len() < 2 {
            continue;
        }
        let s = free[rng.gen_range(0..free.len())];
        let t = free[rng.gen_range(0..free.len())];
        let geom = cf.geometry();
        let q = PlanQuery {
            start: geom.cell_center(s.0, s.1),
            goal: geom.cell_center(t.0, t.1),
            clearance: &cf,
            connectivity: Connectivity::Eight,
        };
        let a = plan(&q).ok().map(|p| p.cost);
        let d = dijkstra(&cf, s, t);
        match (a, d) {
            (Some(a), Some(d)) => {
                found += 1;
                worst = worst.max((a - d).abs());
                if a != d {
                    mismatches += 1;
                }
            }
            (None, None) => {}
            _ => mismatches += 1,
        }
        tested += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        mismatches == 0 && secs < 30.0,
        format!("{tested} grids ({found} with a path), {mismatches} inexact costs (max |Δ| {worst:.1e}), {secs:.2} s"),
    )
}

// ---------------------------------------------------------------- distances

fn cone_sampling_oracle(z: Point, cone: &ConeSet) -> f64 {
    // the cone is the union of the disk and the segments from the apex to
    // every disk point; its boundary lies on the fan to the circle
    const FAN: usize = 10_000;
    let mut best = ((z - cone.center).norm() - cone.radius).max(0.0);
    for k in 0..FAN {
        let phi = k as f64 / FAN as f64 * std::f64::consts::TAU;
        let q = cone.center + Point::new(phi.cos(), phi.sin()) * cone.radius;
        let e = q - cone.apex;
        let l2 = e.norm_squared();
        let t = if l2 > 0.0 { ((z - cone.apex).dot(&e) / l2).clamp(0.0, 1.0) } else { 0.0 };
        best = best.min((z - (cone.apex + e * t)).norm());
    }
    best
}

fn distance_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut dt_bad = 0;
    for k in 0..50 {
        let density = [0.0005, 0.01, 0.1, 0.5][k % 4];
        let grid = random_grid(&mut rng, 64, density, 0.1);
        let occ: Vec<(i64, i64)> = (0..64 * 64)
            .filter(|&i| grid.cells()[i] == Cell::Occupied)
            .map(|i| ((i % 64) as i64, (i / 64) as i64))
            .collect();
        let map = GridMap::new(grid);
        for row in 0..64i64 {
            for col in 0..64i64 {
                let brute = occ.iter().map(|&(c, r)| ((c - col).pow(2) + (r - row).pow(2)) as u64).min();
                let got = map.distance().squared_cells(col as usize, row as usize);
                let value_ok = match brute {
                    Some(sq) => map.distance().get(col as usize, row as usize) == (sq as f64).sqrt() * 0.1,
                    None => map.distance().get(col as usize, row as usize) == map.distance().sentinel(),
                };
                if got != brute || !value_ok {
                    dt_bad += 1;
                }
            }
        }
    }
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let apex = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let center = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let radius = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..4.0) };
        let cone = ConeSet::new(apex, center, radius);
        let z = Point::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        worst = worst.max((point_to_cone_distance(z, &cone) - cone_sampling_oracle(z, &cone)).abs());
    }
    verdict(
        dt_bad == 0 && worst <= 1e-3,
        format!(
            "distance transform: {dt_bad} mismatching cells on 50 grids; cone distance max error {worst:.1e} m on 500"
        ),
    )
}

// ---------------------------------------------------------------- invariance

fn cone_invariance() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let limits = InputLimits::default();
    let (mut worst_exit, mut unconverged) = (0.0f64, 0);
    for _ in 0..100 {
        let g = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let p0 = disk_point(&mut rng, g, 5.0);
        let x0 = RobotState::new(p0, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        let k_v = rng.gen_range(1.0..3.0);
        let cone = cone_from_state(&x0, &GovernorState::new(g));
        let mut x = x0;
        let mut converged = false;
        // control at 50 Hz, RK4 at 100 Hz
        for step in 0..1500 {
            let u = control_law(&x, g, k_v, 1.5, &limits);
            for _ in 0..2 {
                x = integrate(&x, u, 0.01);
                worst_exit = worst_exit.max(point_to_cone_distance(x.p, &cone));
            }
            if (x.p - g).norm() < 1e-2 {
                converged = step < 1500;
                break;
            }
        }
        if !converged {
            unconverged += 1;
        }
    }
    verdict(
        worst_exit <= 1e-3 && unconverged == 0,
        format!("max distance outside the cone {worst_exit:.1e} m, {unconverged}/100 not within 1e-2 m after 30 s"),
    )
}

// ---------------------------------------------------------------- scenarios

struct Runs {
    c_shape: (RunResult, Duration),
    c_shape_fixed: (RunResult, Duration),
    maze: (RunResult, Duration),
    sweep: Vec<(RunResult, Duration)>,
    six: (RunResult, Duration),
}

fn static_safety(runs: &Runs) -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    let all = [&runs.c_shape, &runs.maze].into_iter().chain(runs.sweep.iter());
    for (r, _) in all {
        let m = &r.metrics;
        let min_dp = r.log.iter().map(|x| x.d_robot).fold(f64::INFINITY, f64::min);
        let ok = m.status == RunStatus::Reached && min_dp > 0.0 && m.fallback_count == 0;
        pass &= ok;
        lines.push(format!("{} {:?} min d_p {:.3}", m.name, m.status, min_dp));
    }
    verdict(pass, lines.join("; "))
}

fn table_orderings(runs: &Runs) -> Verdict {
    let s: Vec<_> = runs.sweep.iter().map(|(r, _)| r.metrics.summary).collect();
    let slowest = runs.sweep.iter().map(|(_, d)| d.as_secs_f64()).fold(0.0, f64::max);
    let reached = runs.sweep.iter().all(|(r, _)| r.metrics.status == RunStatus::Reached);
    let lengths = s[0].plan_path_length < s[1].plan_path_length && s[1].plan_path_length < s[2].plan_path_length;
    let times = s[0].finish_time > s[1].finish_time;
    let clearance = s[0].min_clearance < s[1].min_clearance;
    verdict(
        reached && lengths && times && clearance && slowest < 60.0,
        format!(
            "plan length {:.2} < {:.2} < {:.2} m; finish time {:.2} > {:.2} s; min clearance {:.3} < {:.3} m; slowest run {:.2} s",
            s[0].plan_path_length,
            s[1].plan_path_length,
            s[2].plan_path_length,
            s[0].finish_time,
            s[1].finish_time,
            s[0].min_clearance,
            s[1].min_clearance,
            slowest
        ),
    )
}

fn adaptive_gain_check(runs: &Runs) -> Verdict {
    let adaptive = [&runs.c_shape, &runs.maze].into_iter().chain(runs.sweep.iter());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (r, _) in adaptive {
        for x in &r.log {
            lo = lo.min(x.k_v);
            hi = hi.max(x.k_v);
        }
    }
    let a = &runs.c_shape.0.metrics;
    let f = &runs.c_shape_fixed.0.metrics;
    let same_path = a.plans.first() == f.plans.first();
    let faster = a.status == RunStatus::Reached
        && f.status == RunStatus::Reached
        && a.summary.finish_time < f.summary.finish_time;
    verdict(
        lo >= 1.0 && hi <= 3.0 && faster && same_path,
        format!(
            "k_v in [{lo:.3}, {hi:.3}]; c_shape adaptive {:.2} s vs fixed {:.2} s (same first plan: {same_path})",
            a.summary.finish_time, f.summary.finish_time
        ),
    )
}

fn dynamic_safety(runs: &Runs) -> Verdict {
    let (r, _) = &runs.six;
    let sc = load("scenarios/six_movers.json", &[]);
    let p = &sc.params;
    let m = &r.metrics;
    let min_h = m.summary.min_h.unwrap_or(f64::INFINITY);
    let run_ok = m.status == RunStatus::Reached && min_h >= -1e-3;

    // finite-difference check of the barrier derivative along the flow
    let check =
        |x: &RobotState, g: Point, u_bar: Point, obs: &MovingObstacle, u: east_core::ControlInput| -> Option<f64> {
            if (g - x.p).norm() < 1e-3 {
                return None;
            }
            let gs = GovernorState::new(g);
            let c = cbf_constraint(x, &gs, obs, 0, sc.robot.radius, p.k_g, p.gamma, u);
            let h = cbf_value(x, &gs, obs, sc.robot.radius);
            let at = |s: f64| {
                let xs = RobotState { p: x.p + x.heading() * (u.v * s), theta: x.theta };
                let g2 = GovernorState::new(g + (u_bar - g) * (p.k_g * s));
                let o2 = MovingObstacle { p: obs.p + obs.v * s, ..*obs };
                cbf_value(&xs, &g2, &o2, sc.robot.radius)
            };
            let delta = 1e-6;
            let numeric = (at(delta) - at(-delta)) / (2.0 * delta);
            Some((numeric - (c.a.dot(&u_bar) + c.b - class_k(h, p.gamma))).abs())
        };
    let (mut samples, mut worst) = (0usize, 0.0f64);
    let n = sc.movers.len();
    for (k, rec) in r.log.iter().enumerate() {
        for mv in &r.movers[k * n..(k + 1) * n] {
            let obs = MovingObstacle { p: mv.p, v: mv.v, radius: sc.movers[mv.id].radius };
            if let Some(e) = check(&rec.x, rec.g, rec.u_bar, &obs, rec.u) {
                worst = worst.max(e);
                samples += 1;
            }
        }
    }
    let from_run = samples;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    while samples < 10_000 {
        let x =
            RobotState::new(Point::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..14.0)), rng.gen_range(-3.0..3.0));
        let g = disk_point(&mut rng, x.p, 4.0);
        let u_bar = disk_point(&mut rng, g, 3.0);
        let obs = MovingObstacle {
            p: disk_point(&mut rng, x.p, 12.0),
            v: Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            radius: 0.3,
        };
        let u = control_law(&x, g, p.k_v, p.k_omega, &p.limits());
        if let Some(e) = check(&x, g, u_bar, &obs, u) {
            worst = worst.max(e);
            samples += 1;
        }
    }
    verdict(
        run_ok && worst <= 1e-3,
        format!(
            "six_movers {:?}, min h* {min_h:.4}, collisions 0, fallbacks {}; barrier derivative max error {worst:.1e} over {samples} samples ({from_run} from the run)",
            m.status, m.fallback_count
        ),
    )
}

// ---------------------------------------------------------------- timing

fn performance() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let geom = GridGeometry::new(128, 128, 0.1, Point::zeros()).unwrap();
    let mut grid = OccupancyGrid::filled(geom, Cell::Free);
    for _ in 0..60 {
        let (c, r) = (rng.gen_range(0..124), rng.gen_range(0..124));
        for dc in 0..4 {
            for dr in 0..4 {
                grid.set(c + dc, r + dr, Cell::Occupied);
            }
        }
    }
    let map = GridMap::new(grid);
    let path = PiecewisePath::new(vec![Point::new(0.5, 0.5), Point::new(12.0, 6.0), Point::new(6.0, 12.3)]).unwrap();
    let limits = InputLimits::default();
    let mut times = Vec::new();
    for _ in 0..1000 {
        let x =
            RobotState::new(Point::new(rng.gen_range(1.0..11.8), rng.gen_range(1.0..11.8)), rng.gen_range(-3.0..3.0));
        let gov = GovernorState::new(disk_point(&mut rng, x.p, 1.0));
        let movers: Vec<MovingObstacle> = (0..10)
            .map(|_| MovingObstacle {
                p: disk_point(&mut rng, x.p, 7.5),
                v: Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                radius: 0.3,
            })
            .collect();
        let started = Instant::now();
        let cone = cone_from_state(&x, &gov);
        let d = cone_to_obstacles_distance(&cone, &map, 0.3);
        let metric = DirectionalMetric::from_angle(x.theta, 1.0, 9.0);
        let d_q = directional_cone_distance(&cone, &map, &metric, 0.3, 64);
        let k_v = adaptive_gain(d_q, d, 1.0, 9.0);
        let u = control_law(&x, gov.g, k_v, 1.5, &limits);
        let zone = LocalSafeZone::from_distance(gov.g, d, Default::default());
        let nominal = nominal_input(&path, &zone);
        let cs: Vec<_> =
            movers.iter().enumerate().map(|(i, o)| cbf_constraint(&x, &gov, o, i, 0.3, 2.0, 0.2, u)).collect();
        let out = solve_safe_input(nominal.u_g, &zone, &cs);
        let next = governor_step(&gov, out.u, 2.0, 0.02);
        times.push(started.elapsed());
        std::hint::black_box(next);
    }
    times.sort();
    let median = times[times.len() / 2];
    let p99 = times[times.len() * 99 / 100];
    verdict(
        median < Duration::from_millis(5),
        format!("median {:.3} ms, p99 {:.3} ms over 1000 steps (128×128 grid, 10 movers)", ms(median), ms(p99)),
    )
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn determinism() -> Verdict {
    let render = |rel: &str| {
        let r = run(&load(rel, &[])).unwrap();
        let mut buf = Vec::new();
        write_log(&mut buf, &r.log).unwrap();
        buf.extend(metrics_json(&r.metrics).into_bytes());
        buf
    };
    let mut same = true;
    for rel in ["scenarios/six_movers.json", "scenarios/maze.json"] {
        same &= render(rel) == render(rel);
    }
    verdict(same, "six_movers and maze logs and metrics byte-identical across two runs".into())
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let mut report = |name: &'static str, v: Verdict| {
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((name, v));
    };
    report("solver-oracle equivalence", solver_oracle());
    report("planner optimality", planner_optimality());
    report("distance oracles", distance_oracles());
    report("cone invariance", cone_invariance());

    let runs = Runs {
        c_shape: timed_run(&load("scenarios/c_shape.json", &[])),
        c_shape_fixed: timed_run(&load("scenarios/c_shape.json", &["params.k_v_mode=fixed", "params.k_v=1"])),
        maze: timed_run(&load("scenarios/maze.json", &[])),
        sweep: ["minimum", "medium", "maximum"]
            .iter()
            .map(|d| timed_run(&load(&format!("scenarios/clearance_sweep/{d}.json"), &[])))
            .collect(),
        six: timed_run(&load("scenarios/six_movers.json", &[])),
    };
    report("static safety end to end", static_safety(&runs));
    report("clearance design orderings", table_orderings(&runs));
    report("adaptive gain", adaptive_gain_check(&runs));
    report("dynamic safety", dynamic_safety(&runs));
    report("control step performance", performance());
    report("determinism", determinism());

    let failed = results.iter().filter(|(_, v)| !v.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed ({:.1} s)",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
