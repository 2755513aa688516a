//! Policy interface and scripted baselines.
//!
//! The baselines are evaluation instruments: a potential-field goal seeker
//! combined with one of three camera behaviours (fixed, sinusoidal sweep,
//! greedy unknown-seeking), plus a random and a hovering policy.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::mount_rotation;
use crate::config::EnvConfig;
use crate::env::{Action, Observation};
use crate::mapping::{LocalGrid, VoxelState, LOCAL_N};
use crate::rng::{stream, Stream};

pub const POLICY_NAMES: [&str; 5] = ["static", "active-sweep", "active-greedy", "random", "hover"];

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown policy `{name}`; available: {}", POLICY_NAMES.join(", "))]
    Unknown { name: String },
    #[error("{0}")]
    Failed(String),
}

/// Per-episode state threaded through [`Policy::act`].
#[derive(Clone, Debug)]
pub struct PolicyMemory {
    pub step: usize,
    pub rng: ChaCha8Rng,
    pub state: Vec<f64>,
}

impl PolicyMemory {
    pub fn new(seed: u64) -> Self {
        Self { step: 0, rng: stream(seed, Stream::Policy), state: Vec::new() }
    }
}

pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    fn begin(&self, seed: u64) -> PolicyMemory {
        PolicyMemory::new(seed)
    }

    fn act(&self, obs: &Observation, memory: &mut PolicyMemory) -> Result<Action, PolicyError>;
}

/// Gains and camera-behaviour parameters shared by the scripted baselines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyParams {
    /// Speed of the attractive command, m/s.
    pub max_speed: f64,
    /// Yaw rate per radian of heading error, 1/s.
    pub yaw_gain: f64,
    /// Goal bearing the yaw loop holds in the vehicle frame, rad. At π/4
    /// the per-axis velocity bound allows √2 m/s toward the goal.
    pub yaw_offset: f64,
    pub repulsion_gain: f64,
    /// Sideways escape per unit of repulsion opposing the goal direction.
    pub slide_gain: f64,
    /// Relative repulsion of unknown cells (occupied cells weigh 1).
    pub unknown_weight: f64,
    /// Repulsion reaches out to `d_coll + influence_margin`, m.
    pub influence_margin: f64,
    /// Yaw amplitude of the camera sweep, rad.
    pub sweep_amplitude: f64,
    /// Sweep period in control steps.
    pub sweep_period: usize,
    /// Fixed downward pitch while sweeping, rad.
    pub sweep_pitch: f64,
    /// Control steps between greedy re-evaluations.
    pub greedy_hold: usize,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            max_speed: 1.0,
            yaw_gain: 1.0,
            yaw_offset: std::f64::consts::FRAC_PI_4,
            repulsion_gain: 1.0,
            slide_gain: 1.0,
            unknown_weight: 0.002,
            influence_margin: 0.4,
            sweep_amplitude: std::f64::consts::FRAC_PI_2,
            sweep_period: 16,
            sweep_pitch: 0.15,
            greedy_hold: 5,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        for (name, v) in [
            ("max_speed", self.max_speed),
            ("yaw_gain", self.yaw_gain),
            ("repulsion_gain", self.repulsion_gain),
            ("slide_gain", self.slide_gain),
            ("unknown_weight", self.unknown_weight),
            ("influence_margin", self.influence_margin),
            ("sweep_amplitude", self.sweep_amplitude),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err((name, format!("must be finite and non-negative, got {v}")));
            }
        }
        if !(self.yaw_offset.is_finite() && self.yaw_offset.abs() <= PI) {
            return Err(("yaw_offset", "must lie in [-pi, pi]".into()));
        }
        if !self.sweep_pitch.is_finite() {
            return Err(("sweep_pitch", "must be finite".into()));
        }
        if self.sweep_period == 0 {
            return Err(("sweep_period", "must be at least 1".into()));
        }
        if self.greedy_hold == 0 {
            return Err(("greedy_hold", "must be at least 1".into()));
        }
        Ok(())
    }
}

/// Potential-field navigation command in the vehicle frame.
///
/// Attraction points along `goal_dir` with its largest component at
/// `max_speed`; every occupied or unknown local cell closer than
/// `d0 = d_coll + influence_margin` pushes away with `k (1/d − 1/d0)` scaled
/// by its weight. The sum is rescaled so no component exceeds `max_speed`.
/// Returns that velocity and a yaw rate turning the goal toward bearing
/// `yaw_offset`.
pub fn goal_seek_with_avoidance(obs: &Observation, params: &PolicyParams, d_coll: f64) -> (Vector3<f64>, f64) {
    let speed = params.max_speed.min(Action::MAX_SPEED);
    let m = obs.goal_dir.amax();
    let attraction = if m > 0.0 { obs.goal_dir * (speed / m) } else { Vector3::zeros() };
    let push = repulsion(&obs.local_grid, params, d_coll);
    let mut v = attraction + push;
    // slide around an obstacle that blocks the goal direction, on the side
    // the field already pushes toward
    let head_on = if m > 0.0 { -push.dot(&obs.goal_dir) } else { 0.0 };
    let left = Vector3::new(-obs.goal_dir.y, obs.goal_dir.x, 0.0);
    let side = push.dot(&left);
    if head_on > 0.0 && side != 0.0 && left.norm() > 0.0 {
        v += left.normalize() * (side.signum() * head_on * params.slide_gain);
    }
    let v = saturate(v, speed);
    let bearing = obs.goal_dir.y.atan2(obs.goal_dir.x);
    let error = wrap_angle(bearing - params.yaw_offset);
    let yaw_rate = if obs.goal_dist > 0.0 { params.yaw_gain * error } else { 0.0 };
    (v, yaw_rate.clamp(-Action::MAX_YAW_RATE, Action::MAX_YAW_RATE))
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Scale `v` down, keeping its direction, until no component exceeds `limit`.
fn saturate(v: Vector3<f64>, limit: f64) -> Vector3<f64> {
    let m = v.amax();
    if m > limit {
        v * (limit / m)
    } else {
        v
    }
}

/// Summed repulsion of the local grid around its centre cell.
pub fn repulsion(grid: &LocalGrid, params: &PolicyParams, d_coll: f64) -> Vector3<f64> {
    let d0 = d_coll + params.influence_margin;
    let mut out = Vector3::zeros();
    for (i, s) in grid.cells().iter().enumerate() {
        let w = match s {
            VoxelState::Occupied => 1.0,
            VoxelState::Unknown => params.unknown_weight,
            VoxelState::Free => continue,
        };
        if w == 0.0 {
            continue;
        }
        let o = LocalGrid::cell_offset(LocalGrid::coords(i));
        let d = o.norm();
        if d == 0.0 || d >= d0 {
            continue;
        }
        out -= o / d * (w * params.repulsion_gain * (1.0 / d - 1.0 / d0));
    }
    out
}

/// Sinusoidal camera yaw with a fixed pitch bias, both saturated.
pub fn sweep_camera(t: usize, amplitude: f64, period: usize, pitch: f64, beta_max: f64, gamma_max: f64) -> (f64, f64) {
    let phase = 2.0 * PI * (t % period) as f64 / period as f64;
    let gamma = (amplitude * phase.sin()).clamp(-gamma_max, gamma_max);
    (pitch.clamp(-beta_max, beta_max), gamma)
}

/// Field of view used when counting cells inside a candidate frustum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frustum {
    pub hfov: f64,
    pub vfov: f64,
}

impl Frustum {
    /// Whether a vehicle-frame offset lies in the view of a camera at
    /// (beta, gamma). Body tilt is ignored.
    pub fn contains(&self, beta: f64, gamma: f64, offset: &Vector3<f64>) -> bool {
        let c = mount_rotation(beta, gamma).inverse() * offset;
        c.x > 0.0 && c.y.abs().atan2(c.x) <= self.hfov / 2.0 && c.z.abs().atan2(c.x) <= self.vfov / 2.0
    }

    pub fn count_unknown(&self, grid: &LocalGrid, beta: f64, gamma: f64) -> usize {
        grid.cells()
            .iter()
            .enumerate()
            .filter(|(i, s)| {
                **s == VoxelState::Unknown && self.contains(beta, gamma, &LocalGrid::cell_offset(LocalGrid::coords(*i)))
            })
            .count()
    }
}

/// The nine candidate mount orientations: pitch and yaw each in {−max, 0, max}.
pub fn candidate_orientations(beta_max: f64, gamma_max: f64) -> [(f64, f64); 9] {
    let mut out = [(0.0, 0.0); 9];
    for (k, slot) in out.iter_mut().enumerate() {
        let b = [-beta_max, 0.0, beta_max][k / 3];
        let g = [-gamma_max, 0.0, gamma_max][k % 3];
        *slot = (b, g);
    }
    out
}

/// Candidate whose frustum holds the most unknown local cells; ties go to
/// the smallest rotation away from `current`.
pub fn greedy_unknown_direction(
    grid: &LocalGrid,
    current: (f64, f64),
    frustum: &Frustum,
    beta_max: f64,
    gamma_max: f64,
) -> (f64, f64) {
    let now = mount_rotation(current.0, current.1);
    candidate_orientations(beta_max, gamma_max)
        .into_iter()
        .map(|(b, g)| {
            let count = frustum.count_unknown(grid, b, g);
            let turn = now.angle_to(&mount_rotation(b, g));
            ((b, g), count, turn)
        })
        .fold(None, |best: Option<((f64, f64), usize, f64)>, c| match best {
            Some(b) if b.1 > c.1 || (b.1 == c.1 && b.2 <= c.2) => Some(b),
            _ => Some(c),
        })
        .map(|(o, _, _)| o)
        .expect("nine candidates")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CameraMode {
    Fixed,
    Sweep,
    Greedy,
}

/// Potential-field navigation plus a scripted camera behaviour.
#[derive(Clone, Debug)]
pub struct GoalSeeker {
    pub name: &'static str,
    pub camera: CameraMode,
    pub params: PolicyParams,
    pub d_coll: f64,
    pub beta_max: f64,
    pub gamma_max: f64,
    pub frustum: Frustum,
}

impl GoalSeeker {
    pub fn new(name: &'static str, camera: CameraMode, cfg: &EnvConfig) -> Self {
        Self {
            name,
            camera,
            params: cfg.policy.clone(),
            d_coll: cfg.reward.d_coll,
            beta_max: cfg.mount.beta_max,
            gamma_max: cfg.mount.gamma_max,
            frustum: Frustum { hfov: cfg.camera.hfov, vfov: cfg.camera.vfov },
        }
    }

    pub fn static_camera(cfg: &EnvConfig) -> Self {
        Self::new("static", CameraMode::Fixed, cfg)
    }

    pub fn active_sweep(cfg: &EnvConfig) -> Self {
        Self::new("active-sweep", CameraMode::Sweep, cfg)
    }

    pub fn active_greedy(cfg: &EnvConfig) -> Self {
        Self::new("active-greedy", CameraMode::Greedy, cfg)
    }

    fn camera_command(&self, obs: &Observation, memory: &mut PolicyMemory) -> (f64, f64) {
        let p = &self.params;
        match self.camera {
            CameraMode::Fixed => (0.0, 0.0),
            CameraMode::Sweep => {
                sweep_camera(memory.step, p.sweep_amplitude, p.sweep_period, p.sweep_pitch, self.beta_max, self.gamma_max)
            }
            CameraMode::Greedy => {
                if memory.step.is_multiple_of(p.greedy_hold) || memory.state.len() != 2 {
                    let current = (obs.cam[0], obs.cam[1]);
                    let (b, g) = greedy_unknown_direction(&obs.local_grid, current, &self.frustum, self.beta_max, self.gamma_max);
                    memory.state = vec![b, g];
                }
                (memory.state[0], memory.state[1])
            }
        }
    }
}

impl Policy for GoalSeeker {
    fn name(&self) -> &str {
        self.name
    }

    fn act(&self, obs: &Observation, memory: &mut PolicyMemory) -> Result<Action, PolicyError> {
        let (v, yaw_rate) = goal_seek_with_avoidance(obs, &self.params, self.d_coll);
        let (beta, gamma) = self.camera_command(obs, memory);
        memory.step += 1;
        Ok(Action::new(v, yaw_rate, beta, gamma).clamped(self.beta_max, self.gamma_max))
    }
}

/// Uniform random actions within bounds.
#[derive(Clone, Debug)]
pub struct RandomPolicy {
    pub beta_max: f64,
    pub gamma_max: f64,
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&self, _obs: &Observation, memory: &mut PolicyMemory) -> Result<Action, PolicyError> {
        let r = &mut memory.rng;
        let mut u = |m: f64| if m > 0.0 { r.random_range(-m..=m) } else { 0.0 };
        let v = Vector3::new(u(Action::MAX_SPEED), u(Action::MAX_SPEED), u(Action::MAX_SPEED));
        let a = Action::new(v, u(Action::MAX_YAW_RATE), u(self.beta_max), u(self.gamma_max));
        memory.step += 1;
        Ok(a)
    }
}

/// Zero action forever.
#[derive(Clone, Copy, Debug, Default)]
pub struct Hover;

impl Policy for Hover {
    fn name(&self) -> &str {
        "hover"
    }

    fn act(&self, _obs: &Observation, memory: &mut PolicyMemory) -> Result<Action, PolicyError> {
        memory.step += 1;
        Ok(Action::default())
    }
}

pub fn by_name(name: &str, cfg: &EnvConfig) -> Result<Box<dyn Policy>, PolicyError> {
    Ok(match name {
        "static" => Box::new(GoalSeeker::static_camera(cfg)),
        "active-sweep" => Box::new(GoalSeeker::active_sweep(cfg)),
        "active-greedy" => Box::new(GoalSeeker::active_greedy(cfg)),
        "random" => Box::new(RandomPolicy { beta_max: cfg.mount.beta_max, gamma_max: cfg.mount.gamma_max }),
        "hover" => Box::new(Hover),
        _ => return Err(PolicyError::Unknown { name: name.to_string() }),
    })
}

/// Local-grid cell index for a vehicle-frame offset; convenience for tests
/// and hand-built grids.
pub fn cell_at(offset: &Vector3<f64>) -> Option<[usize; 3]> {
    LocalGrid::cell_of(offset).filter(|c| c.iter().all(|&i| i < LOCAL_N))
}
