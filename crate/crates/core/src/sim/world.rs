//! Ground-truth queries: simulated lidar, robot clearance and collision.

use std::f64::consts::TAU;

use crate::control::RobotState;
use crate::geometry::{nearest_obstacle_center, ConeSet};
use crate::gridmap::{Cell, GridMap, GridRay, OccupancyGrid, RangeScan};
use crate::Point;

/// Evenly spaced beams starting along the heading; each returns the entry
/// distance of the first Occupied cell, or `max_range`.
pub fn lidar_scan(truth: &OccupancyGrid, pose: &RobotState, beams: usize, max_range: f64) -> RangeScan {
    let increment = TAU / beams as f64;
    let ranges = (0..beams)
        .map(|k| {
            let angle = pose.theta + k as f64 * increment;
            let dir = Point::new(angle.cos(), angle.sin());
            GridRay::new(truth.geometry(), pose.p, dir, max_range)
                .find(|c| truth.get(c.col, c.row) == Cell::Occupied)
                .map_or(max_range, |c| c.t_enter.clamp(0.0, max_range))
        })
        .collect();
    RangeScan { angle_min: 0.0, angle_increment: increment, max_range, ranges }
}

/// `d(p, Ω⁺)`: distance to the nearest Occupied cell center minus the robot
/// radius and half a cell diagonal. Negative inside the inflated set.
pub fn robot_clearance(truth: &GridMap, p: Point, r_robot: f64) -> f64 {
    match nearest_obstacle_center(&ConeSet::point(p), truth) {
        Some(d) => d - r_robot - truth.geometry().half_diagonal(),
        None => truth.distance().sentinel(),
    }
}

/// Whether a disk of radius `r_robot` at `p` overlaps an Occupied cell square.
pub fn hits_static(truth: &OccupancyGrid, p: Point, r_robot: f64) -> bool {
    let geom = truth.geometry();
    let res = geom.resolution;
    let to_index = |v: f64, o: f64, n: usize| (((v - o) / res).floor().max(0.0) as usize).min(n - 1);
    let lo = p - Point::new(r_robot, r_robot);
    let hi = p + Point::new(r_robot, r_robot);
    if hi.x < geom.origin.x || hi.y < geom.origin.y {
        return false;
    }
    let extent = geom.origin + geom.extent();
    if lo.x > extent.x || lo.y > extent.y {
        return false;
    }
    let (c0, c1) = (to_index(lo.x, geom.origin.x, geom.width), to_index(hi.x, geom.origin.x, geom.width));
    let (r0, r1) = (to_index(lo.y, geom.origin.y, geom.height), to_index(hi.y, geom.origin.y, geom.height));
    for row in r0..=r1 {
        for col in c0..=c1 {
            if truth.get(col, row) != Cell::Occupied {
                continue;
            }
            let cmin = geom.origin + Point::new(col as f64 * res, row as f64 * res);
            let cmax = cmin + Point::new(res, res);
            let q = Point::new(p.x.clamp(cmin.x, cmax.x), p.y.clamp(cmin.y, cmax.y));
            if (p - q).norm() < r_robot {
                return true;
            }
        }
    }
    false
}
