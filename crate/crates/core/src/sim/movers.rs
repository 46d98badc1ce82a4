//! Moving obstacles following waypoint polylines at constant speed.

use super::scenario::{to_point, MoverSpec};
use crate::safe_input::MovingObstacle;
use crate::Point;

#[derive(Debug, Clone)]
pub struct Mover {
    vertices: Vec<Point>,
    /// Cumulative arclength at each vertex.
    cumulative: Vec<f64>,
    speed: f64,
    radius: f64,
    looping: bool,
    s: f64,
}

impl Mover {
    pub fn new(spec: &MoverSpec) -> Self {
        let mut vertices: Vec<Point> = spec.waypoints.iter().map(|&w| to_point(w)).collect();
        if spec.looping && vertices.len() > 1 {
            vertices.push(vertices[0]);
        }
        let mut cumulative = vec![0.0];
        for w in vertices.windows(2) {
            cumulative.push(cumulative.last().unwrap() + (w[1] - w[0]).norm());
        }
        let mut m =
            Self { vertices, cumulative, speed: spec.speed, radius: spec.radius, looping: spec.looping, s: 0.0 };
        m.s = m.wrap(spec.offset);
        m
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn wrap(&self, s: f64) -> f64 {
        let total = self.total();
        if total == 0.0 {
            0.0
        } else if self.looping {
            s.rem_euclid(total)
        } else {
            s.clamp(0.0, total)
        }
    }

    /// Segment holding arclength `s` (the later one at a vertex).
    fn segment(&self) -> Option<usize> {
        if self.total() == 0.0 || (!self.looping && self.s >= self.total()) {
            return None;
        }
        let i = self.cumulative.partition_point(|&c| c <= self.s);
        Some((i - 1).min(self.vertices.len() - 2))
    }

    pub fn position(&self) -> Point {
        match self.segment() {
            Some(i) => {
                let (a, b) = (self.vertices[i], self.vertices[i + 1]);
                let len = self.cumulative[i + 1] - self.cumulative[i];
                a + (b - a) * ((self.s - self.cumulative[i]) / len)
            }
            None => *self.vertices.last().unwrap(),
        }
    }

    pub fn velocity(&self) -> Point {
        match self.segment() {
            Some(i) => (self.vertices[i + 1] - self.vertices[i]).normalize() * self.speed,
            None => Point::zeros(),
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn advance(&mut self, dt: f64) {
        self.s = self.wrap(self.s + self.speed * dt);
    }

    pub fn obstacle(&self) -> MovingObstacle {
        MovingObstacle { p: self.position(), v: self.velocity(), radius: self.radius }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(waypoints: Vec<[f64; 2]>, looping: bool) -> MoverSpec {
        MoverSpec { radius: 0.3, speed: 1.0, waypoints, looping, offset: 0.0 }
    }

    #[test]
    fn follows_polyline_then_stops() {
        let mut m = Mover::new(&spec(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0]], false));
        assert_eq!(m.velocity(), Point::new(1.0, 0.0));
        m.advance(2.5);
        assert!((m.position() - Point::new(2.0, 0.5)).norm() < 1e-12);
        assert_eq!(m.velocity(), Point::new(0.0, 1.0));
        m.advance(10.0);
        assert_eq!(m.position(), Point::new(2.0, 1.0));
        assert_eq!(m.velocity(), Point::zeros());
    }

    #[test]
    fn loops_back_to_start() {
        let mut m = Mover::new(&spec(vec![[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]], true));
        m.advance(12.0 + 1.0);
        assert!((m.position() - Point::new(1.0, 0.0)).norm() < 1e-12);
        m.advance(6.0);
        // on the closing leg (3,4) → (0,0)
        assert!((m.velocity() - Point::new(-0.6, -0.8)).norm() < 1e-12);
    }

    #[test]
    fn single_waypoint_is_static() {
        let mut m = Mover::new(&spec(vec![[1.0, 2.0]], true));
        m.advance(3.0);
        assert_eq!(m.position(), Point::new(1.0, 2.0));
        assert_eq!(m.velocity(), Point::zeros());
    }

    #[test]
    fn step_length_matches_speed() {
        let mut m = Mover::new(&spec(vec![[0.0, 0.0], [5.0, 5.0], [9.0, 0.0]], true));
        for _ in 0..1000 {
            let (p, v) = (m.position(), m.velocity());
            m.advance(0.01);
            let q = m.position();
            if (q - p - v * 0.01).norm() < 1e-9 {
                assert!(((q - p).norm() - 0.01).abs() < 1e-12);
            }
        }
    }
}
