//! `east`: run scenarios, batch sweeps, one-shot planning and solver checks.
//!
//! Every failure prints a single `ERROR <code>: <text>` line on stderr.

mod oracle;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use east_core::gridmap::{ClearanceDesign, ClearanceField, GridMap, DEFAULT_C_UNKNOWN};
use east_core::planner::{plan, Connectivity, PlanQuery};
use east_core::sim::output::{fmt_float, metrics_json, write_log, write_movers};
use east_core::sim::scenario::WorldSpec;
use east_core::sim::{run, Metrics, RunResult, RunStatus, Scenario, ScenarioError, SimError};
use east_core::Point;

const EXIT_USAGE: u8 = 1;
const EXIT_NO_PATH: u8 = 4;

#[derive(Parser)]
#[command(name = "east", version, about = "Safe tracking simulator for a differential-drive robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write `<name>.log.csv` and `<name>.metrics.json`.
    Run {
        scenario: PathBuf,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
        /// Override a scenario value, e.g. `params.k_v_mode=fixed`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Recorded with the results.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write `<name>.movers.csv` with the moving-obstacle states.
        #[arg(long)]
        movers_log: bool,
    },
    /// Simulate several scenarios in parallel and write `summary.csv`.
    Batch {
        scenarios: Vec<PathBuf>,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Plan on a world file and print the path JSON.
    Plan {
        world: PathBuf,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        start: Point,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        goal: Point,
        /// Preset name (minimum, medium, maximum) or `kappa,c_u,c_f`.
        #[arg(long, default_value = "medium", value_parser = parse_design)]
        design: ClearanceDesign,
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        #[arg(long, default_value_t = 8)]
        connectivity: u8,
    },
    /// Compare the safe-input solver with the grid-search oracle.
    Oracle {
        #[arg(short, long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// JSON file of extra instances to check.
        #[arg(long)]
        instances: Option<PathBuf>,
    },
}

fn parse_point(s: &str) -> Result<Point, String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [x, y] => {
            let x: f64 = x.trim().parse().map_err(|e| format!("bad x: {e}"))?;
            let y: f64 = y.trim().parse().map_err(|e| format!("bad y: {e}"))?;
            Ok(Point::new(x, y))
        }
        _ => Err(format!("expected x,y, got '{s}'")),
    }
}

fn parse_design(s: &str) -> Result<ClearanceDesign, String> {
    if let Some(d) = ClearanceDesign::preset(s) {
        return Ok(d);
    }
    let v: Vec<f64> =
        s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let [kappa, c_u, c_f] = v[..] else {
        return Err(format!("expected a preset or kappa,c_u,c_f, got '{s}'"));
    };
    let d = ClearanceDesign { kappa, c_u, c_f };
    d.validate().map_err(|e| e.to_string())?;
    Ok(d)
}

/// A failure with its exit code and `ERROR` line.
struct Failure {
    exit: u8,
    code: &'static str,
    text: String,
}

impl Failure {
    fn new(exit: u8, code: &'static str, text: impl ToString) -> Self {
        Self { exit, code, text: text.to_string() }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match e {
            ScenarioError::Io { .. } => "io",
            ScenarioError::UnknownKey(_) | ScenarioError::MalformedOverride(_) => "override",
            _ => "scenario",
        };
        Failure::new(EXIT_USAGE, code, e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Scenario(s) => s.into(),
            SimError::NoInitialPath(_) => Failure::new(EXIT_NO_PATH, "no-path", e),
            SimError::InitCheck => Failure::new(EXIT_USAGE, "init", e),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_USAGE, "io", format!("{}: {e}", path.display()))
}

fn load_scenario(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<Scenario, ScenarioError> {
    let mut all = overrides.to_vec();
    if let Some(s) = seed {
        all.push(format!("params.seed={s}"));
    }
    Scenario::load(path, &all)
}

fn write_outputs(out: &Path, result: &RunResult, movers_log: bool) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let name = &result.metrics.name;
    let log_path = out.join(format!("{name}.log.csv"));
    let file = fs::File::create(&log_path).map_err(|e| io_failure(&log_path, e))?;
    write_log(BufWriter::new(file), &result.log).map_err(|e| io_failure(&log_path, e))?;
    let metrics_path = out.join(format!("{name}.metrics.json"));
    fs::write(&metrics_path, metrics_json(&result.metrics)).map_err(|e| io_failure(&metrics_path, e))?;
    if movers_log {
        let movers_path = out.join(format!("{name}.movers.csv"));
        let file = fs::File::create(&movers_path).map_err(|e| io_failure(&movers_path, e))?;
        write_movers(BufWriter::new(file), &result.movers).map_err(|e| io_failure(&movers_path, e))?;
    }
    Ok(())
}

fn report(m: &Metrics) -> String {
    let s = &m.summary;
    format!(
        "{}: {} goals {}/{} t={:.2}s plan={:.2}m traj={:.2}m clearance avg={:.3} min={:.3} fallbacks={}",
        m.name,
        serde_json::to_value(m.status).unwrap().as_str().unwrap(),
        m.goals_reached,
        m.goals_total,
        s.finish_time,
        s.plan_path_length,
        s.trajectory_length,
        s.avg_clearance,
        s.min_clearance,
        m.fallback_count
    )
}

fn cmd_run(
    scenario: &Path,
    out: &Path,
    overrides: &[String],
    seed: Option<u64>,
    movers_log: bool,
) -> Result<u8, Failure> {
    let sc = load_scenario(scenario, overrides, seed)?;
    let started = Instant::now();
    let result = run(&sc)?;
    eprintln!("wall clock {:.3}s (replanning {:.3}s)", started.elapsed().as_secs_f64(), result.plan_time.as_secs_f64());
    write_outputs(out, &result, movers_log)?;
    println!("{}", report(&result.metrics));
    Ok(result.metrics.status.exit_code() as u8)
}

const SUMMARY_COLUMNS: &str = "name,status,goals_reached,goals_total,plan_path_length,trajectory_length,finish_time,avg_clearance,min_clearance,min_h,fallback_count";

fn summary_row(m: &Metrics) -> String {
    let s = &m.summary;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        m.name,
        serde_json::to_value(m.status).unwrap().as_str().unwrap(),
        m.goals_reached,
        m.goals_total,
        fmt_float(s.plan_path_length),
        fmt_float(s.trajectory_length),
        fmt_float(s.finish_time),
        fmt_float(s.avg_clearance),
        fmt_float(s.min_clearance),
        s.min_h.map_or("".to_string(), fmt_float),
        m.fallback_count
    )
}

fn cmd_batch(
    scenarios: &[PathBuf],
    out: &Path,
    overrides: &[String],
    seed: Option<u64>,
    parallel: Option<usize>,
) -> Result<u8, Failure> {
    let loaded = scenarios.iter().map(|p| load_scenario(p, overrides, seed)).collect::<Result<Vec<_>, _>>()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = parallel {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| Failure::new(EXIT_USAGE, "usage", e))?;
    let results: Vec<Result<RunResult, SimError>> = pool.install(|| loaded.par_iter().map(run).collect());
    let mut rows = vec![SUMMARY_COLUMNS.to_string()];
    let mut ok = 0;
    let mut first_failure: Option<Failure> = None;
    for (path, result) in scenarios.iter().zip(results) {
        match result {
            Ok(r) => {
                write_outputs(out, &r, false)?;
                println!("{}", report(&r.metrics));
                if r.metrics.status == RunStatus::Reached {
                    ok += 1;
                }
                rows.push(summary_row(&r.metrics));
            }
            Err(e) => {
                let f = Failure::from(e);
                eprintln!("ERROR {}: {}: {}", f.code, path.display(), f.text);
                first_failure.get_or_insert(f);
            }
        }
    }
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let summary = out.join("summary.csv");
    fs::write(&summary, rows.join("\n") + "\n").map_err(|e| io_failure(&summary, e))?;
    println!("success {ok}/{}", scenarios.len());
    if let Some(f) = first_failure {
        return Ok(f.exit);
    }
    Ok(if ok == scenarios.len() { 0 } else { 3 })
}

fn cmd_plan(
    world: &Path,
    start: Point,
    goal: Point,
    design: ClearanceDesign,
    radius: f64,
    connectivity: u8,
) -> Result<u8, Failure> {
    let spec = WorldSpec::load(world)?;
    let map = GridMap::new(spec.rasterize().map_err(ScenarioError::from)?);
    let connectivity = Connectivity::try_from(connectivity).map_err(|e| Failure::new(EXIT_USAGE, "usage", e))?;
    let cf = ClearanceField::build(map.grid(), map.distance(), design, radius, DEFAULT_C_UNKNOWN)
        .map_err(|e| Failure::new(EXIT_USAGE, "usage", e))?;
    let found = plan(&PlanQuery { start, goal, clearance: &cf, connectivity })
        .map_err(|e| Failure::new(EXIT_NO_PATH, "no-path", e))?;
    println!("{}", serde_json::to_string_pretty(&found.to_json()).unwrap());
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Run { scenario, out, overrides, seed, movers_log } => {
            cmd_run(&scenario, &out, &overrides, seed, movers_log)
        }
        Command::Batch { scenarios, out, overrides, seed, parallel } => {
            cmd_batch(&scenarios, &out, &overrides, seed, parallel)
        }
        Command::Plan { world, start, goal, design, radius, connectivity } => {
            cmd_plan(&world, start, goal, design, radius, connectivity)
        }
        Command::Oracle { n, seed, step, instances } => oracle::cmd_oracle(n, seed, step, instances.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("ERROR usage: {first}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("ERROR {}: {}", f.code, f.text.replace('\n', " "));
            ExitCode::from(f.exit)
        }
    }
}
