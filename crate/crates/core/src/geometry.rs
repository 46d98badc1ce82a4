//! Ice-cream-cone reachable sets and their distances to mapped obstacles.
//!
//! Static obstacles are the Occupied cell centers of a [`GridMap`]. Every
//! distance to the inflated obstacle set subtracts the robot radius plus half
//! a cell diagonal from the center-to-center value, which keeps the result a
//! lower bound on the distance to the true cell squares.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::control::RobotState;
use crate::governor::GovernorState;
use crate::gridmap::{Cell, GridMap};
use crate::Point;

pub const DEFAULT_BOUNDARY_SAMPLES: usize = 64;

/// Convex hull of the apex and the disk `B_radius(center)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeSet {
    pub apex: Point,
    pub center: Point,
    pub radius: f64,
}

impl ConeSet {
    pub fn new(apex: Point, center: Point, radius: f64) -> Self {
        Self { apex, center, radius: radius.max(0.0) }
    }

    pub fn point(p: Point) -> Self {
        Self::new(p, p, 0.0)
    }

    pub fn distance_to(&self, z: Point) -> f64 {
        point_to_cone_distance(z, self)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Point, Point) {
        let r = Point::new(self.radius, self.radius);
        (self.apex.inf(&(self.center - r)), self.apex.sup(&(self.center + r)))
    }

    /// Tangent points of the two hull edges on the disk, when the apex lies
    /// outside the disk.
    fn tangent_points(&self) -> Option<(Point, Point)> {
        let axis = self.center - self.apex;
        let d = axis.norm();
        if self.radius <= 0.0 || d <= self.radius {
            return None;
        }
        let u = axis / d;
        let w = Point::new(-u.y, u.x);
        let (sin_phi, cos_phi) = (self.radius / d, (d * d - self.radius * self.radius).sqrt() / d);
        let len = d * cos_phi;
        let plus = self.apex + (u * cos_phi + w * sin_phi) * len;
        let minus = self.apex + (u * cos_phi - w * sin_phi) * len;
        Some((plus, minus))
    }

    /// Closed polygon approximating the boundary with `n` vertices. Arc
    /// vertices lie on the circle, so the polygon is contained in the set.
    pub fn boundary_polygon(&self, n: usize) -> Vec<Point> {
        let n = n.max(3);
        if self.radius <= 0.0 {
            return if self.apex == self.center { vec![self.apex] } else { vec![self.apex, self.center] };
        }
        let axis = self.center - self.apex;
        let d = axis.norm();
        let circle = |beta: f64, u: Point, w: Point| self.center + (u * beta.cos() + w * beta.sin()) * self.radius;
        if d <= self.radius {
            let (u, w) = (Point::x(), Point::y());
            return (0..n).map(|k| circle(TAU * k as f64 / n as f64, u, w)).collect();
        }
        let u = axis / d;
        let w = Point::new(-u.y, u.x);
        let half_span = FRAC_PI_2 + (self.radius / d).asin();
        let arc = n - 1;
        let mut poly = Vec::with_capacity(n);
        poly.push(self.apex);
        for k in 0..arc {
            let beta = half_span - 2.0 * half_span * k as f64 / (arc - 1) as f64;
            poly.push(circle(beta, u, w));
        }
        poly
    }
}

/// `M(x, g) = C(p, g, |e_v⊥|)`.
pub fn cone_from_state(x: &RobotState, g: &GovernorState) -> ConeSet {
    let (_, e_perp) = x.errors_to(g.g);
    ConeSet::new(x.p, g.g, e_perp.abs())
}

/// Ball `B_{‖g−p‖}(g)` containing the cone.
pub fn ball_overapprox(x: &RobotState, g: &GovernorState) -> (Point, f64) {
    (g.g, (g.g - x.p).norm())
}

fn point_segment_distance(z: Point, a: Point, b: Point) -> f64 {
    let e = b - a;
    let len2 = e.norm_squared();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = ((z - a).dot(&e) / len2).clamp(0.0, 1.0);
    (z - (a + e * t)).norm()
}

fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

fn point_triangle_distance(z: Point, a: Point, b: Point, c: Point) -> f64 {
    let s1 = cross(b - a, z - a);
    let s2 = cross(c - b, z - b);
    let s3 = cross(a - c, z - c);
    let inside = (s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0) || (s1 <= 0.0 && s2 <= 0.0 && s3 <= 0.0);
    if inside {
        return 0.0;
    }
    point_segment_distance(z, a, b).min(point_segment_distance(z, b, c)).min(point_segment_distance(z, c, a))
}

/// Exact Euclidean distance from `z` to the cone; zero inside.
///
/// The cone is the union of the disk and the triangle formed by the apex and
/// the two tangent points, so the distance is the smaller of the two.
pub fn point_to_cone_distance(z: Point, cone: &ConeSet) -> f64 {
    if cone.radius <= 0.0 {
        return point_segment_distance(z, cone.apex, cone.center);
    }
    let disk = ((z - cone.center).norm() - cone.radius).max(0.0);
    match cone.tangent_points() {
        None => disk,
        Some((plus, minus)) => disk.min(point_triangle_distance(z, cone.apex, plus, minus)),
    }
}

/// Visits Occupied cells whose centers lie in the axis-aligned box.
fn for_each_occupied_in_box(map: &GridMap, lo: Point, hi: Point, mut f: impl FnMut(Point)) {
    let geom = map.geometry();
    let res = geom.resolution;
    let to_index = |v: f64, o: f64, n: usize| -> Option<usize> {
        let k = ((v - o) / res).floor();
        if k < 0.0 {
            Some(0)
        } else if k >= n as f64 || !k.is_finite() {
            if k.is_nan() {
                None
            } else {
                Some(n - 1)
            }
        } else {
            Some(k as usize)
        }
    };
    if hi.x < geom.origin.x || hi.y < geom.origin.y {
        return;
    }
    let ext = geom.origin + geom.extent();
    if lo.x >= ext.x || lo.y >= ext.y {
        return;
    }
    let (Some(c0), Some(c1), Some(r0), Some(r1)) = (
        to_index(lo.x, geom.origin.x, geom.width),
        to_index(hi.x, geom.origin.x, geom.width),
        to_index(lo.y, geom.origin.y, geom.height),
        to_index(hi.y, geom.origin.y, geom.height),
    ) else {
        return;
    };
    let grid = map.grid();
    for row in r0..=r1 {
        for col in c0..=c1 {
            if grid.get(col, row) == Cell::Occupied {
                f(geom.cell_center(col, row));
            }
        }
    }
}

/// Upper bound on the distance from `p` to the nearest Occupied center, from
/// the distance field; infinite when `p` is off the grid.
fn apex_bound(map: &GridMap, p: Point) -> f64 {
    let geom = map.geometry();
    match geom.world_to_cell(p) {
        Some((c, r)) => map.distance().get(c, r) + geom.half_diagonal() + 1e-9,
        None => f64::INFINITY,
    }
}

/// Minimum center-to-cone distance over Occupied cells, or `None` if the map
/// has no Occupied cell.
pub fn nearest_obstacle_center(cone: &ConeSet, map: &GridMap) -> Option<f64> {
    if !map.distance().has_obstacles() {
        return None;
    }
    let bound = apex_bound(map, cone.apex);
    let (mut lo, mut hi) = cone.bounds();
    if bound.is_finite() {
        lo -= Point::new(bound, bound);
        hi += Point::new(bound, bound);
    } else {
        lo = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        hi = Point::new(f64::INFINITY, f64::INFINITY);
    }
    let mut best = f64::INFINITY;
    for_each_occupied_in_box(map, lo, hi, |z| {
        best = best.min(point_to_cone_distance(z, cone));
    });
    Some(best)
}

/// Euclidean distance from the cone to the inflated obstacle set, clamped at
/// zero; the distance-field sentinel when the map has no obstacles.
pub fn cone_to_obstacles_distance(cone: &ConeSet, map: &GridMap, r_robot: f64) -> f64 {
    match nearest_obstacle_center(cone, map) {
        Some(d) => (d - r_robot - map.geometry().half_diagonal()).max(0.0),
        None => map.distance().sentinel(),
    }
}

/// Quadratic norm that weighs displacement along the heading by `q1` and
/// across it by `q2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalMetric {
    heading: Point,
    q1: f64,
    q2: f64,
}

impl DirectionalMetric {
    /// Panics unless `0 < q1 <= q2`; `heading` need not be normalised but must
    /// be non-zero.
    pub fn new(heading: Point, q1: f64, q2: f64) -> Self {
        assert!(q1 > 0.0 && q2 >= q1, "directional metric needs 0 < q1 <= q2");
        let n = heading.norm();
        assert!(n > 0.0, "heading must be non-zero");
        Self { heading: heading / n, q1, q2 }
    }

    pub fn from_angle(theta: f64, q1: f64, q2: f64) -> Self {
        Self::new(Point::new(theta.cos(), theta.sin()), q1, q2)
    }

    pub fn q1(&self) -> f64 {
        self.q1
    }

    pub fn q2(&self) -> f64 {
        self.q2
    }

    pub fn matrix(&self) -> nalgebra::Matrix2<f64> {
        let v = self.heading;
        nalgebra::Matrix2::identity() * self.q2 + (v * v.transpose()) * (self.q1 - self.q2)
    }

    #[inline]
    fn inner(&self, a: Point, b: Point) -> f64 {
        self.q2 * a.dot(&b) + (self.q1 - self.q2) * self.heading.dot(&a) * self.heading.dot(&b)
    }

    pub fn norm(&self, x: Point) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    fn segment_distance(&self, z: Point, a: Point, b: Point) -> f64 {
        let e = b - a;
        let w = z - a;
        let ee = self.inner(e, e);
        if ee == 0.0 {
            return self.norm(w);
        }
        let t = (self.inner(w, e) / ee).clamp(0.0, 1.0);
        self.norm(w - e * t)
    }

    /// Distance in this metric from `z` to a closed polygon's edges.
    pub fn polygon_distance(&self, z: Point, poly: &[Point]) -> f64 {
        match poly.len() {
            0 => f64::INFINITY,
            1 => self.norm(z - poly[0]),
            2 => self.segment_distance(z, poly[0], poly[1]),
            n => (0..n).map(|k| self.segment_distance(z, poly[k], poly[(k + 1) % n])).fold(f64::INFINITY, f64::min),
        }
    }
}

/// Directional distance from the cone to the inflated obstacle set.
///
/// The cone boundary is discretised into `n_boundary` vertices; obstacle
/// points inside the cone give zero. The robot radius and half cell diagonal
/// are inflated by `√q2`, keeping the result a lower bound.
pub fn directional_cone_distance(
    cone: &ConeSet,
    map: &GridMap,
    metric: &DirectionalMetric,
    r_robot: f64,
    n_boundary: usize,
) -> f64 {
    let Some(d_euclid) = nearest_obstacle_center(cone, map) else {
        return map.distance().sentinel();
    };
    let (sq1, sq2) = (metric.q1.sqrt(), metric.q2.sqrt());
    // any point with √q1·d_E >= √q2·min d_E cannot improve on the best
    let reach = d_euclid * sq2 / sq1 + 1e-9;
    let (lo, hi) = cone.bounds();
    let poly = cone.boundary_polygon(n_boundary);
    let mut best = sq2 * d_euclid + 1e-12;
    for_each_occupied_in_box(map, lo - Point::new(reach, reach), hi + Point::new(reach, reach), |z| {
        let de = point_to_cone_distance(z, cone);
        if sq1 * de >= best {
            return;
        }
        let dq = if de == 0.0 { 0.0 } else { metric.polygon_distance(z, &poly) };
        best = best.min(dq);
    });
    (best - sq2 * (r_robot + map.geometry().half_diagonal())).max(0.0)
}
