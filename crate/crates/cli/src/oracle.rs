//! `east oracle`: solver against the refined grid-search oracle.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use east_core::governor::LocalSafeZone;
use east_core::safe_input::{refined_oracle, solve_safe_input, CbfConstraint, SafeInputStatus};
use east_core::Point;

use crate::{Failure, EXIT_USAGE};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintSpec {
    a: [f64; 2],
    b: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Instance {
    u_g: [f64; 2],
    g: [f64; 2],
    radius: f64,
    #[serde(default)]
    constraints: Vec<ConstraintSpec>,
}

impl Instance {
    fn parts(&self) -> (Point, LocalSafeZone, Vec<CbfConstraint>) {
        let cs = self
            .constraints
            .iter()
            .enumerate()
            .map(|(id, c)| CbfConstraint { a: Point::new(c.a[0], c.a[1]), b: c.b, id })
            .collect();
        let zone = LocalSafeZone { center: Point::new(self.g[0], self.g[1]), radius: self.radius };
        (Point::new(self.u_g[0], self.u_g[1]), zone, cs)
    }
}

fn disk_point(rng: &mut ChaCha8Rng, center: Point, r: f64) -> Point {
    let rho = r * rng.gen::<f64>().sqrt();
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    center + Point::new(rho * phi.cos(), rho * phi.sin())
}

/// Feasible by construction: a ball of radius at least 2·10⁻³ around a
/// witness point satisfies every constraint and lies in the disk. Half the
/// constraints pass within that margin of the witness, so they bind.
fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let g = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
    let radius = rng.gen_range(0.05..5.0);
    let witness = disk_point(rng, g, radius - 0.02);
    let u_g = disk_point(rng, g, 2.0 * radius + 0.5);
    let k = rng.gen_range(0..=6);
    let constraints = (0..k)
        .map(|_| {
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let scale = rng.gen_range(0.1..10.0);
            let a = Point::new(phi.cos(), phi.sin()) * scale;
            let slack = if rng.gen_bool(0.5) { rng.gen_range(0.002..0.01) } else { rng.gen_range(0.002..2.0) } * scale;
            ConstraintSpec { a: [a.x, a.y], b: -a.dot(&witness) + slack }
        })
        .collect();
    Instance { u_g: [u_g.x, u_g.y], g: [g.x, g.y], radius, constraints }
}

struct Tally {
    max_dev: f64,
    checked: usize,
    no_grid_point: usize,
    fallbacks: usize,
}

fn check(inst: &Instance, step: f64, tally: &mut Tally) {
    let (u_g, zone, cs) = inst.parts();
    let solved = solve_safe_input(u_g, &zone, &cs);
    match refined_oracle(u_g, &zone, &cs, step) {
        Some(o) => {
            if solved.status == SafeInputStatus::Fallback {
                // a feasible grid point exists, so the solver must not give up
                tally.fallbacks += 1;
                tally.max_dev = f64::INFINITY;
            } else {
                tally.max_dev = tally.max_dev.max((solved.u - o).norm());
            }
            tally.checked += 1;
        }
        None => tally.no_grid_point += 1,
    }
}

pub fn cmd_oracle(n: usize, seed: u64, step: f64, instances: Option<&Path>) -> Result<u8, Failure> {
    if n == 0 && instances.is_none() {
        return Err(Failure::new(EXIT_USAGE, "usage", "need at least one instance"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Failure::new(EXIT_USAGE, "usage", "step must be positive"));
    }
    let mut extra: Vec<Instance> = Vec::new();
    if let Some(path) = instances {
        let text = std::fs::read_to_string(path).map_err(|e| crate::io_failure(path, e))?;
        extra = serde_json::from_str(&text).map_err(|e| Failure::new(EXIT_USAGE, "instances", e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally { max_dev: 0.0, checked: 0, no_grid_point: 0, fallbacks: 0 };
    for _ in 0..n {
        check(&random_instance(&mut rng), step, &mut tally);
    }
    for inst in &extra {
        check(inst, step, &mut tally);
    }
    let bound = 2.0 * step;
    println!(
        "checked {} instances ({} without a feasible grid point), max deviation {:.3e} (bound {:.1e}), solver fallbacks {}",
        tally.checked, tally.no_grid_point, tally.max_dev, bound, tally.fallbacks
    );
    if tally.max_dev <= bound {
        Ok(0)
    } else {
        eprintln!("ERROR oracle: max deviation {:.3e} exceeds {:.1e}", tally.max_dev, bound);
        Ok(1)
    }
}
