//! Episode orchestration: reset, step, termination and batch evaluation.

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{
    camera_pose, corrupt_depth, mount_rotation, render_depth_with, step_mount, BlockPool, DepthEncoder, MountState,
    PixelRays,
};
use crate::config::EnvConfig;
use crate::exec::Exec;
use crate::mapping::{extract_local_grid, GlobalGrid, LocalGrid, StateSet};
use crate::policies::{Policy, PolicyError};
use crate::reward::{total_reward, RewardBreakdown, RewardInputs};
use crate::rng::{episode_seed, stream, Stream};
use crate::vehicle::{sample_disturbance, step_dynamics, vehicle_frame, yaw_of, ControllerParams, RobotState, VelocityCommand};
use crate::world::{generate_world, World, WorldError};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("step called before reset")]
    NotReset,
    #[error("step called on a finished episode")]
    EpisodeFinished,
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Commanded velocity (vehicle frame), yaw rate and absolute mount angles.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub velocity: Vector3<f64>,
    pub yaw_rate: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Action {
    pub const MAX_SPEED: f64 = 1.0;
    pub const MAX_YAW_RATE: f64 = 1.0;

    pub fn new(velocity: Vector3<f64>, yaw_rate: f64, beta: f64, gamma: f64) -> Self {
        Self { velocity, yaw_rate, beta, gamma }
    }

    /// `[vx, vy, vz, yaw_rate, beta, gamma]`
    pub fn to_array(&self) -> [f64; 6] {
        [self.velocity.x, self.velocity.y, self.velocity.z, self.yaw_rate, self.beta, self.gamma]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(Vector3::new(a[0], a[1], a[2]), a[3], a[4], a[5])
    }

    /// Clamp every entry to its bound; NaN becomes zero.
    pub fn clamped(&self, beta_max: f64, gamma_max: f64) -> Self {
        fn c(v: f64, m: f64) -> f64 {
            if v.is_nan() {
                0.0
            } else {
                v.clamp(-m, m)
            }
        }
        Self {
            velocity: self.velocity.map(|v| c(v, Self::MAX_SPEED)),
            yaw_rate: c(self.yaw_rate, Self::MAX_YAW_RATE),
            beta: c(self.beta, beta_max),
            gamma: c(self.gamma, gamma_max),
        }
    }

    pub fn within_bounds(&self, beta_max: f64, gamma_max: f64) -> bool {
        self.velocity.iter().all(|v| v.abs() <= Self::MAX_SPEED)
            && self.yaw_rate.abs() <= Self::MAX_YAW_RATE
            && self.beta.abs() <= beta_max
            && self.gamma.abs() <= gamma_max
    }
}

/// Everything the policy sees at one control step.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// Unit vector to the goal in the vehicle frame; zero at the goal.
    pub goal_dir: Vector3<f64>,
    pub goal_dist: f64,
    pub pitch: f64,
    pub roll: f64,
    /// Body-frame linear velocity, m/s.
    pub velocity: Vector3<f64>,
    /// Body-frame angular velocity, rad/s.
    pub angular_velocity: Vector3<f64>,
    /// Mount angles (beta, gamma).
    pub cam: [f64; 2],
    pub prev_action: [f64; 6],
    pub depth_feature: Vec<f64>,
    pub local_grid: LocalGrid,
}

impl Observation {
    pub fn is_finite(&self) -> bool {
        self.goal_dir.iter().all(|v| v.is_finite())
            && self.goal_dist.is_finite()
            && self.pitch.is_finite()
            && self.roll.is_finite()
            && self.velocity.iter().all(|v| v.is_finite())
            && self.angular_velocity.iter().all(|v| v.is_finite())
            && self.cam.iter().all(|v| v.is_finite())
            && self.prev_action.iter().all(|v| v.is_finite())
            && self.depth_feature.iter().all(|v| v.is_finite())
    }
}

/// Build an observation from the true state plus the per-step noise draws.
///
/// `position_noise` only affects the goal-relative fields.
#[allow(clippy::too_many_arguments)]
pub fn assemble_observation(
    state: &RobotState,
    goal: &Vector3<f64>,
    position_noise: &Vector3<f64>,
    velocity_noise: &Vector3<f64>,
    mount: &MountState,
    prev_action: [f64; 6],
    depth_feature: Vec<f64>,
    local_grid: LocalGrid,
) -> Observation {
    let to_goal = goal - (state.position + position_noise);
    let goal_dist = to_goal.norm();
    let goal_dir = if goal_dist > 0.0 {
        vehicle_frame(state).inverse() * (to_goal / goal_dist)
    } else {
        Vector3::zeros()
    };
    let (roll, pitch, _) = state.euler();
    Observation {
        goal_dir,
        goal_dist,
        pitch,
        roll,
        velocity: state.velocity + velocity_noise,
        angular_velocity: state.angular_velocity,
        cam: [mount.beta, mount.gamma],
        prev_action,
        depth_feature,
        local_grid,
    }
}

/// Restrict a vehicle-frame velocity to the cone of half-angle `half_angle`
/// around `axis` by projecting onto the nearest cone generator.
pub fn project_into_cone(v: &Vector3<f64>, axis: &Vector3<f64>, half_angle: f64) -> Vector3<f64> {
    let a = axis.normalize();
    let along = v.dot(&a);
    let perp = v - a * along;
    let perp_norm = perp.norm();
    let theta = perp_norm.atan2(along);
    if theta <= half_angle {
        return *v;
    }
    if theta >= half_angle + std::f64::consts::FRAC_PI_2 || perp_norm == 0.0 {
        return Vector3::zeros();
    }
    let u = a * half_angle.cos() + perp / perp_norm * half_angle.sin();
    u * v.dot(&u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Crash,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Crash => "crash",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: usize,
    pub exploration: f64,
    /// Sum of the four-term totals.
    pub reward_sum: f64,
    pub progress_sum: f64,
    pub smoothness_sum: f64,
    pub exploration_reward_sum: f64,
    pub proximity_sum: f64,
    pub terminal_reward: f64,
    pub path_length: f64,
    pub final_distance: f64,
    pub obstacle_count: usize,
    /// Seed the world was generated from.
    pub world_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: RewardBreakdown,
    /// Voxels that left the unknown state this step.
    pub transitions: usize,
    pub done: bool,
    pub record: Option<EpisodeRecord>,
}

#[derive(Clone, Copy, Debug, Default)]
struct Sums {
    total: f64,
    progress: f64,
    smoothness: f64,
    exploration: f64,
    proximity: f64,
    terminal: f64,
}

struct Episode {
    seed: u64,
    world: World,
    state: RobotState,
    mount: MountState,
    controller: ControllerParams,
    extrinsic: Isometry3<f64>,
    grid: GlobalGrid,
    disturbance_rng: ChaCha8Rng,
    position_rng: ChaCha8Rng,
    velocity_rng: ChaCha8Rng,
    depth_rng: ChaCha8Rng,
    step: usize,
    prev_action: [f64; 6],
    distance: f64,
    path_length: f64,
    sums: Sums,
    record: Option<EpisodeRecord>,
}

/// One simulated environment instance.
pub struct NavEnv {
    cfg: EnvConfig,
    rays: PixelRays,
    encoder: Box<dyn DepthEncoder>,
    nominal_mount: Isometry3<f64>,
    episode: Option<Episode>,
}

fn uniform_vec(rng: &mut ChaCha8Rng, half_width: f64) -> Vector3<f64> {
    if half_width == 0.0 {
        return Vector3::zeros();
    }
    Vector3::from_fn(|_, _| rng.random_range(-half_width..=half_width))
}

impl NavEnv {
    /// `cfg` is assumed valid (see [`EnvConfig::validate`]).
    pub fn new(cfg: EnvConfig) -> Self {
        let intr = cfg.camera.intrinsics();
        let [cols, rows] = cfg.camera.feature_blocks;
        let encoder = Box::new(BlockPool { cols, rows, far: intr.far });
        Self::with_encoder(cfg, encoder)
    }

    pub fn with_encoder(cfg: EnvConfig, encoder: Box<dyn DepthEncoder>) -> Self {
        let rays = PixelRays::new(&cfg.camera.intrinsics());
        let nominal_mount = Isometry3::from_parts(
            Translation3::from(Vector3::from(cfg.camera.mount_offset)),
            UnitQuaternion::identity(),
        );
        Self { cfg, rays, encoder, nominal_mount, episode: None }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn feature_dim(&self) -> usize {
        self.encoder.dim()
    }

    /// Generate a world from `seed` and start an episode in it.
    pub fn reset(&mut self, seed: u64) -> Result<Observation, EnvError> {
        let world = generate_world(&self.cfg.world, self.cfg.reward.d_coll, seed)?;
        Ok(self.reset_with_world(seed, world))
    }

    /// Start an episode in a caller-supplied world; `seed` drives every other
    /// random source.
    pub fn reset_with_world(&mut self, seed: u64, world: World) -> Observation {
        let noise = &self.cfg.noise;
        let ep = &self.cfg.episode;

        let yaw = match ep.initial_yaw {
            Some(y) => y,
            None => {
                let [lo, hi] = ep.initial_yaw_range;
                if hi > lo {
                    stream(seed, Stream::InitialYaw).random_range(lo..hi)
                } else {
                    lo
                }
            }
        };

        let controller = if noise.controller_on() {
            let mut rng = stream(seed, Stream::ControllerTau);
            let j = noise.tau_jitter;
            let fv = rng.random_range(1.0 - j..=1.0 + j);
            let fw = rng.random_range(1.0 - j..=1.0 + j);
            self.cfg.vehicle.scaled(fv, fw)
        } else {
            self.cfg.vehicle.clone()
        };

        let extrinsic = if noise.extrinsics_on() {
            let mut rng = stream(seed, Stream::Extrinsics);
            let t = uniform_vec(&mut rng, noise.cam_pos_jitter);
            let r = uniform_vec(&mut rng, noise.cam_rot_jitter);
            Isometry3::from_parts(Translation3::from(t), UnitQuaternion::from_euler_angles(r.x, r.y, r.z))
        } else {
            Isometry3::identity()
        };

        let grid = GlobalGrid::covering(&world.bounds, ep.grid_resolution);
        let state = RobotState::at_rest(world.start, yaw);
        let distance = world.distance_to_goal(&state.position);
        self.episode = Some(Episode {
            seed,
            world,
            state,
            mount: self.cfg.mount.at_rest(),
            controller,
            extrinsic,
            grid,
            disturbance_rng: stream(seed, Stream::Disturbance),
            position_rng: stream(seed, Stream::PositionNoise),
            velocity_rng: stream(seed, Stream::VelocityNoise),
            depth_rng: stream(seed, Stream::DepthNoise),
            step: 0,
            prev_action: [0.0; 6],
            distance,
            path_length: 0.0,
            sums: Sums::default(),
            record: None,
        });
        let (obs, _) = self.sense();
        obs
    }

    /// Render, corrupt, integrate and observe at the current state.
    fn sense(&mut self) -> (Observation, usize) {
        let cfg = &self.cfg;
        let ep = self.episode.as_mut().expect("active episode");
        let intr = cfg.camera.intrinsics();

        let robot_pose = ep.state.pose();
        let true_cam = camera_pose(&robot_pose, &ep.mount, &self.nominal_mount, &ep.extrinsic);
        let mut depth = render_depth_with(&ep.world, &true_cam, &intr, &self.rays);
        if cfg.noise.depth_on() {
            depth = corrupt_depth(&depth, &mut ep.depth_rng, &cfg.noise.depth_noise(), intr.near, intr.far);
        }
        let feature = self.encoder.encode(&depth);

        let position_noise = if cfg.noise.position_on() {
            uniform_vec(&mut ep.position_rng, cfg.noise.delta_pos)
        } else {
            Vector3::zeros()
        };
        let velocity_noise = if cfg.noise.velocity_on() {
            uniform_vec(&mut ep.velocity_rng, cfg.noise.delta_vel)
        } else {
            Vector3::zeros()
        };

        let believed = Isometry3::from_parts(
            Translation3::from(ep.state.position + position_noise),
            ep.state.attitude,
        );
        let believed_cam = camera_pose(&believed, &ep.mount, &self.nominal_mount, &Isometry3::identity());
        let transitions = ep.grid.integrate_depth(&depth, &self.rays, &believed_cam, cfg.episode.map_range);
        let local = extract_local_grid(&ep.grid, &believed.translation.vector, yaw_of(&ep.state.attitude));

        let obs = assemble_observation(
            &ep.state,
            &ep.world.goal,
            &position_noise,
            &velocity_noise,
            &ep.mount,
            ep.prev_action,
            feature,
            local,
        );
        (obs, transitions)
    }

    pub fn step(&mut self, action: &Action) -> Result<StepResult, EnvError> {
        let cfg = &self.cfg;
        let ep = self.episode.as_mut().ok_or(EnvError::NotReset)?;
        if ep.record.is_some() {
            return Err(EnvError::EpisodeFinished);
        }
        let action = action.clamped(ep.mount.beta_max, ep.mount.gamma_max);

        let mut velocity = action.velocity;
        if cfg.episode.fov_constrained {
            let axis = mount_rotation(ep.mount.beta, ep.mount.gamma) * Vector3::x();
            let half = cfg.camera.hfov.min(cfg.camera.vfov) / 2.0;
            velocity = project_into_cone(&velocity, &axis, half);
        }
        let cmd = VelocityCommand { velocity, yaw_rate: action.yaw_rate };

        let dt = cfg.episode.physics_dt();
        let radius = cfg.reward.d_coll;
        let mut crashed = false;
        for _ in 0..cfg.episode.substeps {
            let wrench = if cfg.noise.wrench_on() {
                sample_disturbance(&mut ep.disturbance_rng, cfg.noise.sigma_w, ep.controller.torque_arm)
            } else {
                Default::default()
            };
            let next = step_dynamics(&ep.state, &cmd, &ep.controller, &wrench, dt);
            ep.path_length += (next.position - ep.state.position).norm();
            ep.state = next;
            if ep.world.check_collision(&ep.state.position, radius) {
                crashed = true;
                break;
            }
        }
        ep.mount = step_mount(&ep.mount, action.beta, action.gamma, cfg.episode.control_dt);
        ep.step += 1;

        let (mut obs, transitions) = self.sense();
        let cfg = &self.cfg;
        let ep = self.episode.as_mut().expect("active episode");

        let d_now = ep.world.distance_to_goal(&ep.state.position);
        let near_count = ep.grid.count_near(&ep.state.position, cfg.reward.d_coll, StateSet::BLOCKING);
        let a_now = action.to_array();
        let mut reward = total_reward(
            &RewardInputs {
                d_prev: ep.distance,
                d_now,
                action: a_now,
                prev_action: ep.prev_action,
                transitions,
                near_count,
            },
            &cfg.reward,
        );
        ep.distance = d_now;
        ep.prev_action = a_now;
        obs.prev_action = a_now;

        let outcome = if crashed {
            Some(Outcome::Crash)
        } else if d_now <= cfg.episode.success_radius {
            Some(Outcome::Success)
        } else if ep.step >= cfg.episode.max_steps {
            Some(Outcome::Timeout)
        } else {
            None
        };
        reward.terminal = match outcome {
            Some(Outcome::Success) => cfg.reward.success_bonus,
            Some(Outcome::Crash) => cfg.reward.crash_penalty,
            _ => 0.0,
        };

        let s = &mut ep.sums;
        s.total += reward.total;
        s.progress += reward.progress;
        s.smoothness += reward.smoothness;
        s.exploration += reward.exploration;
        s.proximity += reward.proximity;
        s.terminal += reward.terminal;

        let record = outcome.map(|outcome| EpisodeRecord {
            seed: ep.seed,
            outcome,
            steps: ep.step,
            exploration: ep.grid.exploration_fraction(),
            reward_sum: s.total,
            progress_sum: s.progress,
            smoothness_sum: s.smoothness,
            exploration_reward_sum: s.exploration,
            proximity_sum: s.proximity,
            terminal_reward: s.terminal,
            path_length: ep.path_length,
            final_distance: d_now,
            obstacle_count: ep.world.obstacles.len(),
            world_seed: ep.world.seed,
        });
        ep.record = record.clone();

        Ok(StepResult { observation: obs, reward, transitions, done: record.is_some(), record })
    }

    pub fn is_done(&self) -> bool {
        self.episode.as_ref().is_some_and(|e| e.record.is_some())
    }

    pub fn step_count(&self) -> usize {
        self.episode.as_ref().map_or(0, |e| e.step)
    }

    pub fn state(&self) -> Option<&RobotState> {
        self.episode.as_ref().map(|e| &e.state)
    }

    pub fn mount(&self) -> Option<&MountState> {
        self.episode.as_ref().map(|e| &e.mount)
    }

    pub fn world(&self) -> Option<&World> {
        self.episode.as_ref().map(|e| &e.world)
    }

    /// The privileged global grid; never part of an observation.
    pub fn grid(&self) -> Option<&GlobalGrid> {
        self.episode.as_ref().map(|e| &e.grid)
    }

    pub fn controller(&self) -> Option<&ControllerParams> {
        self.episode.as_ref().map(|e| &e.controller)
    }

    pub fn camera_extrinsic(&self) -> Option<&Isometry3<f64>> {
        self.episode.as_ref().map(|e| &e.extrinsic)
    }

    pub fn record(&self) -> Option<&EpisodeRecord> {
        self.episode.as_ref().and_then(|e| e.record.as_ref())
    }
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("policy failed: {0}")]
    Policy(#[from] PolicyError),
}

/// Roll out one episode to termination.
pub fn run_episode(env: &mut NavEnv, policy: &dyn Policy, seed: u64) -> Result<EpisodeRecord, EpisodeError> {
    run_episode_with(env, policy, seed, |_, _, _| {})
}

/// Like [`run_episode`], calling `observe(env, action, result)` after every step.
pub fn run_episode_with(
    env: &mut NavEnv,
    policy: &dyn Policy,
    seed: u64,
    mut observe: impl FnMut(&NavEnv, &Action, &StepResult),
) -> Result<EpisodeRecord, EpisodeError> {
    let mut obs = env.reset(seed)?;
    let mut memory = policy.begin(seed);
    loop {
        let action = policy.act(&obs, &mut memory)?;
        let result = env.step(&action)?;
        observe(env, &action, &result);
        if let Some(record) = result.record {
            return Ok(record);
        }
        obs = result.observation;
    }
}

/// Per-condition row of an evaluation table. Rates are over episodes that
/// finished without error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionMetrics {
    pub condition: usize,
    pub episodes: usize,
    pub success: f64,
    pub timeout: f64,
    pub crash: f64,
    pub exploration: f64,
    pub errors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub condition: usize,
    pub index: usize,
    pub seed: u64,
    pub result: Result<EpisodeRecord, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub rows: Vec<ConditionMetrics>,
    pub episodes: Vec<EpisodeOutcome>,
}

/// Evaluate `policy` on `episodes` seeds per obstacle-count condition.
///
/// Seeds depend only on `(base_seed, condition, index)`, so the report is
/// identical for any `exec`.
pub fn run_batch(
    cfg: &EnvConfig,
    policy: &dyn Policy,
    conditions: &[usize],
    episodes: usize,
    base_seed: u64,
    exec: Exec,
) -> BatchReport {
    let jobs: Vec<(usize, usize, u64)> = conditions
        .iter()
        .flat_map(|&c| (0..episodes).map(move |i| (c, i, episode_seed(base_seed, c as u64, i as u64))))
        .collect();
    run_jobs(cfg, policy, conditions, &jobs, exec)
}

/// Like [`run_batch`] but every condition uses the same explicit seed list.
pub fn run_batch_seeds(cfg: &EnvConfig, policy: &dyn Policy, conditions: &[usize], seeds: &[u64], exec: Exec) -> BatchReport {
    let jobs: Vec<(usize, usize, u64)> = conditions
        .iter()
        .flat_map(|&c| seeds.iter().enumerate().map(move |(i, &s)| (c, i, s)))
        .collect();
    run_jobs(cfg, policy, conditions, &jobs, exec)
}

fn run_jobs(cfg: &EnvConfig, policy: &dyn Policy, conditions: &[usize], jobs: &[(usize, usize, u64)], exec: Exec) -> BatchReport {
    let outcomes = exec.map(jobs, |&(condition, index, seed)| {
        let mut c = cfg.clone();
        c.world.obstacle_count = condition;
        let mut env = NavEnv::new(c);
        let result = run_episode(&mut env, policy, seed).map_err(|e| e.to_string());
        EpisodeOutcome { condition, index, seed, result }
    });
    let rows = conditions
        .iter()
        .map(|&condition| aggregate(condition, outcomes.iter().filter(|o| o.condition == condition)))
        .collect();
    BatchReport { rows, episodes: outcomes }
}

fn aggregate<'a>(condition: usize, outcomes: impl Iterator<Item = &'a EpisodeOutcome>) -> ConditionMetrics {
    let mut m = ConditionMetrics {
        condition,
        episodes: 0,
        success: 0.0,
        timeout: 0.0,
        crash: 0.0,
        exploration: 0.0,
        errors: 0,
    };
    let (mut s, mut t, mut c) = (0usize, 0usize, 0usize);
    let mut explored = 0.0;
    for o in outcomes {
        match &o.result {
            Ok(r) => {
                m.episodes += 1;
                explored += r.exploration;
                match r.outcome {
                    Outcome::Success => s += 1,
                    Outcome::Timeout => t += 1,
                    Outcome::Crash => c += 1,
                }
            }
            Err(_) => m.errors += 1,
        }
    }
    if m.episodes > 0 {
        let n = m.episodes as f64;
        m.success = s as f64 / n;
        m.timeout = t as f64 / n;
        m.crash = c as f64 / n;
        m.exploration = explored / n;
    }
    m
}
