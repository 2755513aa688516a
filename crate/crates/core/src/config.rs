//! Environment configuration file (TOML).
//!
//! Every section and field is optional; missing values take their defaults.
//! Unknown fields are rejected and reported with their dotted path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, DepthNoise, MountConfig};
use crate::policies::PolicyParams;
use crate::reward::RewardConfig;
use crate::vehicle::ControllerParams;
use crate::world::WorldConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config error at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    /// Dotted path of the offending field, when known.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Io { .. } => None,
            ConfigError::Parse { field, .. } | ConfigError::Invalid { field, .. } => Some(field),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    /// Horizontal field of view, radians.
    pub hfov: f64,
    /// Vertical field of view, radians.
    pub vfov: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
    /// Body-frame position of the mount, m.
    pub mount_offset: [f64; 3],
    /// Block-pooling grid of the default depth feature (columns, rows).
    pub feature_blocks: [usize; 2],
}

impl Default for CameraConfig {
    fn default() -> Self {
        let i = CameraIntrinsics::default();
        Self {
            hfov: i.hfov,
            vfov: i.vfov,
            width: i.width,
            height: i.height,
            near: i.near,
            far: i.far,
            mount_offset: [0.15, 0.0, 0.0],
            feature_blocks: [12, 9],
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            hfov: self.hfov,
            vfov: self.vfov,
            width: self.width,
            height: self.height,
            near: self.near,
            far: self.far,
        }
    }
}

/// Randomisation suite. `enabled` is a master switch; each source can also
/// be toggled on its own.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub wrench: bool,
    pub position: bool,
    pub velocity: bool,
    pub extrinsics: bool,
    pub controller: bool,
    pub depth: bool,
    /// Disturbance force std-dev, N.
    pub sigma_w: f64,
    /// Position observation noise half-width, m.
    pub delta_pos: f64,
    /// Velocity observation noise half-width, m/s.
    pub delta_vel: f64,
    /// Camera position jitter half-width, m.
    pub cam_pos_jitter: f64,
    /// Camera orientation jitter half-width per axis, rad.
    pub cam_rot_jitter: f64,
    /// Relative spread of controller time constants.
    pub tau_jitter: f64,
    pub depth_sigma_coeff: f64,
    pub depth_dropout: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let d = DepthNoise::default();
        Self {
            enabled: true,
            wrench: true,
            position: true,
            velocity: true,
            extrinsics: true,
            controller: true,
            depth: true,
            sigma_w: 5.0,
            delta_pos: 0.1,
            delta_vel: 0.05,
            cam_pos_jitter: 0.05,
            cam_rot_jitter: 5f64.to_radians(),
            tau_jitter: 0.12,
            depth_sigma_coeff: d.sigma_coeff,
            depth_dropout: d.dropout,
        }
    }
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    pub fn wrench_on(&self) -> bool {
        self.enabled && self.wrench
    }
    pub fn position_on(&self) -> bool {
        self.enabled && self.position
    }
    pub fn velocity_on(&self) -> bool {
        self.enabled && self.velocity
    }
    pub fn extrinsics_on(&self) -> bool {
        self.enabled && self.extrinsics
    }
    pub fn controller_on(&self) -> bool {
        self.enabled && self.controller
    }
    pub fn depth_on(&self) -> bool {
        self.enabled && self.depth
    }

    pub fn depth_noise(&self) -> DepthNoise {
        DepthNoise { sigma_coeff: self.depth_sigma_coeff, dropout: self.depth_dropout }
    }

    fn validate(&self) -> Result<(), (&'static str, String)> {
        for (name, v) in [
            ("sigma_w", self.sigma_w),
            ("delta_pos", self.delta_pos),
            ("delta_vel", self.delta_vel),
            ("cam_pos_jitter", self.cam_pos_jitter),
            ("cam_rot_jitter", self.cam_rot_jitter),
            ("tau_jitter", self.tau_jitter),
            ("depth_sigma_coeff", self.depth_sigma_coeff),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err((name, format!("must be finite and non-negative, got {v}")));
            }
        }
        if self.tau_jitter >= 1.0 {
            return Err(("tau_jitter", "must be below 1".into()));
        }
        if !(0.0..=1.0).contains(&self.depth_dropout) {
            return Err(("depth_dropout", "must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Control steps before timeout.
    pub max_steps: usize,
    /// Control (and camera) period, s.
    pub control_dt: f64,
    /// Physics substeps per control step.
    pub substeps: usize,
    /// Goal distance that counts as success, m.
    pub success_radius: f64,
    /// Maximum ray length carved into the map, m.
    pub map_range: f64,
    /// Global grid resolution, m.
    pub grid_resolution: f64,
    /// Range of the uniformly sampled initial yaw, rad.
    pub initial_yaw_range: [f64; 2],
    /// Overrides the sampled initial yaw.
    pub initial_yaw: Option<f64>,
    /// Restrict commanded velocity to the camera's viewing cone.
    pub fov_constrained: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_steps: 100,
            control_dt: 0.1,
            substeps: 10,
            success_radius: 1.0,
            map_range: 3.0,
            grid_resolution: 0.1,
            initial_yaw_range: [-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2],
            initial_yaw: None,
            fov_constrained: false,
        }
    }
}

impl EpisodeConfig {
    pub fn physics_dt(&self) -> f64 {
        self.control_dt / self.substeps as f64
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub world: WorldConfig,
    pub noise: NoiseConfig,
    pub reward: RewardConfig,
    pub camera: CameraConfig,
    pub mount: MountConfig,
    pub vehicle: ControllerParams,
    pub episode: EpisodeConfig,
    pub policy: PolicyParams,
}

fn invalid(section: &str, (field, message): (&str, String)) -> ConfigError {
    ConfigError::Invalid { field: format!("{section}.{field}"), message }
}

impl EnvConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse {
            field: "<document>".into(),
            message: e.to_string().trim().to_string(),
        })?;
        let cfg: EnvConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            field: e.path().to_string(),
            message: e.inner().message().trim().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.world.validate().map_err(|e| invalid("world", e))?;
        self.noise.validate().map_err(|e| invalid("noise", e))?;
        self.reward.validate().map_err(|e| invalid("reward", e))?;
        self.camera.intrinsics().validate().map_err(|e| invalid("camera", e))?;
        let [cols, rows] = self.camera.feature_blocks;
        if cols == 0 || rows == 0 || cols > self.camera.width || rows > self.camera.height {
            return Err(invalid("camera", ("feature_blocks", "must be non-zero and no larger than the image".into())));
        }
        self.mount.validate().map_err(|e| invalid("mount", e))?;
        self.vehicle.validate().map_err(|e| invalid("vehicle", e))?;
        self.policy.validate().map_err(|e| invalid("policy", e))?;
        let ep = &self.episode;
        if ep.max_steps == 0 {
            return Err(invalid("episode", ("max_steps", "must be at least 1".into())));
        }
        if !(ep.control_dt > 0.0) {
            return Err(invalid("episode", ("control_dt", "must be positive".into())));
        }
        if ep.substeps == 0 {
            return Err(invalid("episode", ("substeps", "must be at least 1".into())));
        }
        if !(ep.success_radius >= 0.0) {
            return Err(invalid("episode", ("success_radius", "must be non-negative".into())));
        }
        if !(ep.map_range > 0.0) {
            return Err(invalid("episode", ("map_range", "must be positive".into())));
        }
        if !(ep.grid_resolution > 0.0) {
            return Err(invalid("episode", ("grid_resolution", "must be positive".into())));
        }
        let [lo, hi] = ep.initial_yaw_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(invalid("episode", ("initial_yaw_range", "expected min <= max".into())));
        }
        // forward Euler on the servos is only stable below the time constant
        if self.mount.tau_beta <= ep.control_dt {
            return Err(invalid("mount", ("tau_beta", "must exceed episode.control_dt".into())));
        }
        if self.mount.tau_gamma <= ep.control_dt {
            return Err(invalid("mount", ("tau_gamma", "must exceed episode.control_dt".into())));
        }
        Ok(())
    }
}
