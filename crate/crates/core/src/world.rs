//! Procedural corridor worlds with primitive obstacles.
//!
//! The corridor runs along +x. Walls, floor and ceiling of the bounding box
//! are solid unless the world is built with [`Boundary::Open`] (test fixtures).

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("obstacle {index} could not be placed after {attempts} attempts (world too crowded)")]
    Overcrowded { index: usize, attempts: usize },
    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),
    #[error("invalid world config: {0}")]
    InvalidConfig(String),
}

/// Axis-aligned box given by its min and max corners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    pub fn size(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Parametric interval `[t_in, t_out]` of the ray inside the box.
    pub fn ray_interval(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let mut t_in = f64::NEG_INFINITY;
        let mut t_out = f64::INFINITY;
        for i in 0..3 {
            if dir[i].abs() < 1e-300 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let (a, b) = ((self.min[i] - origin[i]) * inv, (self.max[i] - origin[i]) * inv);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            t_in = t_in.max(lo);
            t_out = t_out.min(hi);
        }
        (t_in <= t_out).then_some((t_in, t_out))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Box,
    Sphere,
    /// Vertical cylinder: radius `half_extents.x`, half-height `half_extents.z`.
    Cylinder,
}

/// A static primitive with yaw-only orientation.
///
/// For spheres only `half_extents.x` (the radius) is used; for cylinders
/// `x` is the radius and `z` the half-height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveObstacle {
    pub kind: ObstacleKind,
    pub position: Vector3<f64>,
    pub yaw: f64,
    pub half_extents: Vector3<f64>,
}

impl PrimitiveObstacle {
    pub fn new(
        kind: ObstacleKind,
        position: Vector3<f64>,
        yaw: f64,
        half_extents: Vector3<f64>,
    ) -> Result<Self, WorldError> {
        if !half_extents.iter().all(|h| h.is_finite() && *h > 0.0) {
            return Err(WorldError::InvalidObstacle(format!(
                "half extents must be strictly positive, got {half_extents:?}"
            )));
        }
        Ok(Self { kind, position, yaw, half_extents })
    }

    pub fn sphere(center: Vector3<f64>, radius: f64) -> Result<Self, WorldError> {
        Self::new(ObstacleKind::Sphere, center, 0.0, Vector3::repeat(radius))
    }

    pub fn cuboid(center: Vector3<f64>, yaw: f64, half_extents: Vector3<f64>) -> Result<Self, WorldError> {
        Self::new(ObstacleKind::Box, center, yaw, half_extents)
    }

    pub fn cylinder(center: Vector3<f64>, radius: f64, half_height: f64) -> Result<Self, WorldError> {
        Self::new(ObstacleKind::Cylinder, center, 0.0, Vector3::new(radius, radius, half_height))
    }

    fn to_local(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let (s, c) = self.yaw.sin_cos();
        Vector3::new(c * v.x + s * v.y, -s * v.x + c * v.y, v.z)
    }

    /// Half extents of the world-aligned bounding box.
    pub fn aabb_half(&self) -> Vector3<f64> {
        let h = &self.half_extents;
        match self.kind {
            ObstacleKind::Sphere => Vector3::repeat(h.x),
            ObstacleKind::Cylinder => Vector3::new(h.x, h.x, h.z),
            ObstacleKind::Box => {
                let (s, c) = self.yaw.sin_cos();
                Vector3::new(c.abs() * h.x + s.abs() * h.y, s.abs() * h.x + c.abs() * h.y, h.z)
            }
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        match self.kind {
            ObstacleKind::Sphere => self.half_extents.x,
            ObstacleKind::Cylinder => self.half_extents.x.hypot(self.half_extents.z),
            ObstacleKind::Box => self.half_extents.norm(),
        }
    }

    /// Signed distance from `p` to the surface (negative inside).
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        let h = &self.half_extents;
        let d = p - self.position;
        match self.kind {
            ObstacleKind::Sphere => d.norm() - h.x,
            ObstacleKind::Box => {
                let l = self.to_local(&d);
                let q = l.abs() - h;
                let outside = q.map(|x| x.max(0.0)).norm();
                outside + q.max().min(0.0)
            }
            ObstacleKind::Cylinder => {
                let radial = d.x.hypot(d.y) - h.x;
                let axial = d.z.abs() - h.z;
                let outside = radial.max(0.0).hypot(axial.max(0.0));
                outside + radial.max(axial).min(0.0)
            }
        }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        self.signed_distance(p) <= 0.0
    }

    /// Parametric interval of the (infinite) line inside the solid.
    pub fn ray_interval(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let h = &self.half_extents;
        let oc = origin - self.position;
        match self.kind {
            ObstacleKind::Sphere => {
                let b = oc.dot(dir);
                let c = oc.norm_squared() - h.x * h.x;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                Some((-b - s, -b + s))
            }
            ObstacleKind::Box => {
                let o = self.to_local(&oc);
                let d = self.to_local(dir);
                Aabb::new(-h, *h).ray_interval(&o, &d)
            }
            ObstacleKind::Cylinder => {
                let a = dir.x * dir.x + dir.y * dir.y;
                let c = oc.x * oc.x + oc.y * oc.y - h.x * h.x;
                let (mut t_in, mut t_out) = if a < 1e-300 {
                    if c > 0.0 {
                        return None;
                    }
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    let b = oc.x * dir.x + oc.y * dir.y;
                    let disc = b * b - a * c;
                    if disc < 0.0 {
                        return None;
                    }
                    let s = disc.sqrt();
                    ((-b - s) / a, (-b + s) / a)
                };
                if dir.z.abs() < 1e-300 {
                    if oc.z.abs() > h.z {
                        return None;
                    }
                } else {
                    let (a, b) = ((-h.z - oc.z) / dir.z, (h.z - oc.z) / dir.z);
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    t_in = t_in.max(lo);
                    t_out = t_out.min(hi);
                }
                (t_in <= t_out).then_some((t_in, t_out))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Walls, floor and ceiling are solid surfaces.
    Solid,
    /// No enclosure; rays escape to infinity.
    Open,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub length_range: [f64; 2],
    pub width_range: [f64; 2],
    pub height_range: [f64; 2],
    pub obstacle_count: usize,
    /// Full extent (diameter / edge length) range of obstacles, metres.
    pub obstacle_size_range: [f64; 2],
    /// Depth of the start and goal slabs at either end of the corridor.
    pub end_slab: f64,
    /// Extra clearance kept between obstacles and the start/goal spheres.
    pub obstacle_clearance: f64,
    pub max_attempts: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            length_range: [10.0, 12.0],
            width_range: [5.0, 8.0],
            height_range: [4.0, 6.0],
            obstacle_count: 30,
            obstacle_size_range: [0.3, 1.2],
            end_slab: 1.5,
            obstacle_clearance: 0.2,
            max_attempts: 1000,
        }
    }
}

impl WorldConfig {
    pub fn with_obstacles(mut self, n: usize) -> Self {
        self.obstacle_count = n;
        self
    }

    /// Returns the offending field name and a message.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        for (name, r) in [
            ("length_range", self.length_range),
            ("width_range", self.width_range),
            ("height_range", self.height_range),
            ("obstacle_size_range", self.obstacle_size_range),
        ] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] > 0.0 && r[0] <= r[1]) {
                return Err((name, format!("expected 0 < min <= max, got {r:?}")));
            }
        }
        if !(self.end_slab > 0.0) {
            return Err(("end_slab", "must be positive".into()));
        }
        if !(self.obstacle_clearance >= 0.0) {
            return Err(("obstacle_clearance", "must be non-negative".into()));
        }
        if self.max_attempts == 0 {
            return Err(("max_attempts", "must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub bounds: Aabb,
    pub boundary: Boundary,
    pub obstacles: Vec<PrimitiveObstacle>,
    pub start: Vector3<f64>,
    pub goal: Vector3<f64>,
    pub seed: u64,
}

impl World {
    /// Solid-walled box `[0,l]×[0,w]×[0,h]` with no obstacles.
    pub fn enclosed(size: Vector3<f64>, start: Vector3<f64>, goal: Vector3<f64>) -> Self {
        Self {
            bounds: Aabb::new(Vector3::zeros(), size),
            boundary: Boundary::Solid,
            obstacles: Vec::new(),
            start,
            goal,
            seed: 0,
        }
    }

    /// Unbounded, empty fixture.
    pub fn open() -> Self {
        Self {
            bounds: Aabb::new(Vector3::repeat(-1e3), Vector3::repeat(1e3)),
            boundary: Boundary::Open,
            obstacles: Vec::new(),
            start: Vector3::zeros(),
            goal: Vector3::zeros(),
            seed: 0,
        }
    }

    pub fn with_obstacles(mut self, obstacles: Vec<PrimitiveObstacle>) -> Self {
        self.obstacles = obstacles;
        self
    }

    /// Smallest `t` in `[0, max_range]` where the ray meets a surface.
    ///
    /// A ray starting inside a solid reports a hit at `t = 0`.
    pub fn ray_intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>, max_range: f64) -> Option<f64> {
        let mut best = f64::INFINITY;
        if self.boundary == Boundary::Solid {
            best = if self.bounds.contains(origin) {
                self.bounds
                    .ray_interval(origin, dir)
                    .map(|(_, t_out)| t_out.max(0.0))
                    .unwrap_or(0.0)
            } else {
                0.0
            };
        }
        for obstacle in &self.obstacles {
            // bounding-sphere reject
            let oc = origin - obstacle.position;
            let r = obstacle.bounding_radius();
            let b = oc.dot(dir);
            let c = oc.norm_squared() - r * r;
            if c > 0.0 && (b > 0.0 || b * b < c) {
                continue;
            }
            if c > 0.0 && -b - (b * b - c).sqrt() >= best {
                continue;
            }
            if let Some((t_in, t_out)) = obstacle.ray_interval(origin, dir) {
                if t_out >= 0.0 {
                    best = best.min(t_in.max(0.0));
                }
            }
        }
        (best <= max_range).then_some(best)
    }

    /// Whether a sphere of `radius` at `p` touches any obstacle or the enclosure.
    pub fn check_collision(&self, p: &Vector3<f64>, radius: f64) -> bool {
        if self.boundary == Boundary::Solid {
            let lo = p - self.bounds.min;
            let hi = self.bounds.max - p;
            if lo.min() <= radius || hi.min() <= radius {
                return true;
            }
        }
        self.obstacles.iter().any(|o| o.signed_distance(p) <= radius)
    }

    /// Whether the point lies inside any solid (obstacle or outside the enclosure).
    pub fn is_solid(&self, p: &Vector3<f64>) -> bool {
        (self.boundary == Boundary::Solid && !self.bounds.contains(p)) || self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Distance from `p` to the nearest surface, ignoring sign.
    pub fn surface_distance(&self, p: &Vector3<f64>) -> f64 {
        let mut d = f64::INFINITY;
        if self.boundary == Boundary::Solid {
            let lo = p - self.bounds.min;
            let hi = self.bounds.max - p;
            d = lo.min().abs().min(hi.min().abs());
        }
        self.obstacles.iter().fold(d, |d, o| d.min(o.signed_distance(p).abs()))
    }

    pub fn distance_to_goal(&self, p: &Vector3<f64>) -> f64 {
        (self.goal - p).norm()
    }

    pub fn volume(&self) -> f64 {
        self.bounds.size().product()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("world serialises")
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Generate a corridor world. `robot_radius` is the collision radius kept
/// free around start and goal.
pub fn generate_world(cfg: &WorldConfig, robot_radius: f64, seed: u64) -> Result<World, WorldError> {
    cfg.validate()
        .map_err(|(field, msg)| WorldError::InvalidConfig(format!("{field}: {msg}")))?;
    let mut rng = rng::stream(seed, Stream::World);
    let size = Vector3::new(
        uniform(&mut rng, cfg.length_range),
        uniform(&mut rng, cfg.width_range),
        uniform(&mut rng, cfg.height_range),
    );
    let margin = robot_radius + 0.1;
    if size.y < 2.0 * margin || size.z < 2.0 * margin || cfg.end_slab <= margin || size.x < 2.0 * cfg.end_slab {
        return Err(WorldError::InvalidConfig("world too small for the robot radius".into()));
    }
    let lateral = |rng: &mut rand_chacha::ChaCha8Rng| {
        (
            uniform(rng, [margin, size.y - margin]),
            uniform(rng, [margin, size.z - margin]),
        )
    };
    let sx = uniform(&mut rng, [margin, cfg.end_slab]);
    let (sy, sz) = lateral(&mut rng);
    let gx = uniform(&mut rng, [size.x - cfg.end_slab, size.x - margin]);
    let (gy, gz) = lateral(&mut rng);
    let start = Vector3::new(sx, sy, sz);
    let goal = Vector3::new(gx, gy, gz);

    let keep_out = robot_radius + cfg.obstacle_clearance;
    let mut obstacles = Vec::with_capacity(cfg.obstacle_count);
    for index in 0..cfg.obstacle_count {
        let mut placed = None;
        for _ in 0..cfg.max_attempts {
            let o = sample_obstacle(&mut rng, cfg, &size);
            if let Some(o) = o {
                if o.signed_distance(&start) > keep_out && o.signed_distance(&goal) > keep_out {
                    placed = Some(o);
                    break;
                }
            }
        }
        match placed {
            Some(o) => obstacles.push(o),
            None => return Err(WorldError::Overcrowded { index, attempts: cfg.max_attempts }),
        }
    }
    Ok(World {
        bounds: Aabb::new(Vector3::zeros(), size),
        boundary: Boundary::Solid,
        obstacles,
        start,
        goal,
        seed,
    })
}

fn sample_obstacle(rng: &mut impl Rng, cfg: &WorldConfig, size: &Vector3<f64>) -> Option<PrimitiveObstacle> {
    let sizes = cfg.obstacle_size_range;
    let (kind, half) = match rng.random_range(0..3u8) {
        0 => {
            let h = Vector3::new(uniform(rng, sizes), uniform(rng, sizes), uniform(rng, sizes)) * 0.5;
            (ObstacleKind::Box, h)
        }
        1 => (ObstacleKind::Sphere, Vector3::repeat(0.5 * uniform(rng, sizes))),
        _ => {
            let r = 0.5 * uniform(rng, sizes);
            (ObstacleKind::Cylinder, Vector3::new(r, r, 0.5 * uniform(rng, sizes)))
        }
    };
    let yaw = if kind == ObstacleKind::Box {
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
    } else {
        0.0
    };
    let mut o = PrimitiveObstacle { kind, position: Vector3::zeros(), yaw, half_extents: half };
    let extent = o.aabb_half();
    let mut position = Vector3::zeros();
    for i in 0..3 {
        let (lo, hi) = (extent[i], size[i] - extent[i]);
        if lo > hi {
            return None;
        }
        position[i] = uniform(rng, [lo, hi]);
    }
    o.position = position;
    Some(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: Vector3<f64>) -> Vector3<f64> {
        v.normalize()
    }

    #[test]
    fn sphere_hit_is_analytic() {
        let w = World::open().with_obstacles(vec![PrimitiveObstacle::sphere(Vector3::zeros(), 1.0).unwrap()]);
        let t = w.ray_intersect(&Vector3::new(-5.0, 0.0, 0.0), &Vector3::x(), 10.0).unwrap();
        assert!((t - 4.0).abs() < 1e-12);
        assert_eq!(w.ray_intersect(&Vector3::new(-5.0, 0.0, 0.0), &Vector3::x(), 3.9), None);
    }

    #[test]
    fn open_empty_world_never_hits() {
        let w = World::open();
        for d in [Vector3::x(), -Vector3::z(), unit(Vector3::new(1.0, 2.0, -3.0))] {
            assert_eq!(w.ray_intersect(&Vector3::new(0.3, 0.2, 0.1), &d, 1e6), None);
        }
    }

    #[test]
    fn enclosure_hits_walls() {
        let w = World::enclosed(Vector3::new(10.0, 6.0, 4.0), Vector3::zeros(), Vector3::zeros());
        let t = w.ray_intersect(&Vector3::new(2.0, 3.0, 2.0), &Vector3::x(), 100.0).unwrap();
        assert!((t - 8.0).abs() < 1e-12);
        let t = w.ray_intersect(&Vector3::new(2.0, 3.0, 2.0), &-Vector3::z(), 100.0).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ray_from_inside_obstacle_hits_at_zero() {
        let w = World::open().with_obstacles(vec![PrimitiveObstacle::sphere(Vector3::zeros(), 1.0).unwrap()]);
        assert_eq!(w.ray_intersect(&Vector3::zeros(), &Vector3::y(), 5.0), Some(0.0));
    }

    #[test]
    fn rotated_box_and_cylinder_intervals() {
        let b = PrimitiveObstacle::cuboid(Vector3::zeros(), std::f64::consts::FRAC_PI_4, Vector3::new(1.0, 1.0, 1.0)).unwrap();
        let (t_in, _) = b.ray_interval(&Vector3::new(-5.0, 0.0, 0.0), &Vector3::x()).unwrap();
        assert!((t_in - (5.0 - 2f64.sqrt())).abs() < 1e-12);
        let c = PrimitiveObstacle::cylinder(Vector3::zeros(), 0.5, 1.0).unwrap();
        let (t_in, t_out) = c.ray_interval(&Vector3::new(0.0, 0.0, 5.0), &-Vector3::z()).unwrap();
        assert!((t_in - 4.0).abs() < 1e-12 && (t_out - 6.0).abs() < 1e-12);
        assert!(c.ray_interval(&Vector3::new(0.0, 0.6, 5.0), &-Vector3::z()).is_none());
    }

    #[test]
    fn collision_queries() {
        let mut w = World::enclosed(Vector3::new(10.0, 6.0, 4.0), Vector3::zeros(), Vector3::zeros());
        assert!(!w.check_collision(&Vector3::new(5.0, 3.0, 2.0), 0.4));
        w.obstacles.push(PrimitiveObstacle::cuboid(Vector3::new(5.0, 3.0, 2.0), 0.0, Vector3::repeat(0.5)).unwrap());
        assert!(w.check_collision(&Vector3::new(5.5, 3.0, 2.0), 0.4));
        assert!(w.check_collision(&Vector3::new(5.85, 3.0, 2.0), 0.4));
        assert!(!w.check_collision(&Vector3::new(5.95, 3.0, 2.0), 0.4));
        assert!(w.check_collision(&Vector3::new(0.3, 3.0, 2.0), 0.4));
    }

    #[test]
    fn distance_to_goal_is_euclidean() {
        let mut w = World::open();
        w.goal = Vector3::new(3.0, 4.0, 0.0);
        assert_eq!(w.distance_to_goal(&Vector3::zeros()), 5.0);
        assert_eq!(w.distance_to_goal(&w.goal.clone()), 0.0);
    }

    #[test]
    fn empty_config_generates_no_obstacles() {
        let w = generate_world(&WorldConfig::default().with_obstacles(0), 0.4, 11).unwrap();
        assert!(w.obstacles.is_empty());
        assert!(w.start.x <= 1.5 && w.goal.x >= w.bounds.max.x - 1.5);
    }

    #[test]
    fn generation_is_deterministic_and_counts_match() {
        for n in [0, 10, 20, 30] {
            let cfg = WorldConfig::default().with_obstacles(n);
            let a = generate_world(&cfg, 0.4, 99).unwrap();
            let b = generate_world(&cfg, 0.4, 99).unwrap();
            assert_eq!(a.obstacles.len(), n);
            assert_eq!(a.to_json(), b.to_json());
        }
    }

    #[test]
    fn generated_worlds_respect_invariants() {
        let cfg = WorldConfig::default();
        for seed in 0..50 {
            let w = generate_world(&cfg, 0.4, seed).unwrap();
            assert!(!w.check_collision(&w.start, 0.4));
            assert!(!w.check_collision(&w.goal, 0.4));
            assert!(w.start.x <= 1.5);
            assert!(w.goal.x >= w.bounds.max.x - 1.5);
            for o in &w.obstacles {
                let h = o.aabb_half();
                for i in 0..3 {
                    assert!(o.position[i] - h[i] >= -1e-12 && o.position[i] + h[i] <= w.bounds.max[i] + 1e-12);
                }
                assert!(o.signed_distance(&w.start) > 0.6 && o.signed_distance(&w.goal) > 0.6);
            }
        }
    }

    #[test]
    fn overcrowded_config_fails() {
        let cfg = WorldConfig {
            length_range: [3.1, 3.1],
            width_range: [2.0, 2.0],
            height_range: [2.0, 2.0],
            obstacle_count: 5,
            obstacle_size_range: [1.9, 1.9],
            max_attempts: 50,
            ..Default::default()
        };
        assert!(matches!(generate_world(&cfg, 0.4, 1), Err(WorldError::Overcrowded { .. })));
    }

    #[test]
    fn world_json_round_trips() {
        let w = generate_world(&WorldConfig::default().with_obstacles(5), 0.4, 3).unwrap();
        let back: World = serde_json::from_str(&w.to_json()).unwrap();
        assert_eq!(back, w);
    }
}
