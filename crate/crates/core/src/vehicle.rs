//! Velocity-commanded quadrotor abstraction.
//!
//! The low-level flight controller is replaced by per-axis first-order
//! tracking of the commanded vehicle-frame velocity and yaw rate. Roll and
//! pitch follow kinematically from the commanded acceleration.

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub const GRAVITY: f64 = 9.81;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// World position, m.
    pub position: Vector3<f64>,
    /// World attitude.
    pub attitude: UnitQuaternion<f64>,
    /// Body-frame linear velocity, m/s.
    pub velocity: Vector3<f64>,
    /// Body-frame angular velocity, rad/s.
    pub angular_velocity: Vector3<f64>,
    /// Tracked yaw rate about world z, rad/s.
    pub yaw_rate: f64,
}

impl RobotState {
    pub fn at_rest(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            attitude: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
            velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            yaw_rate: 0.0,
        }
    }

    pub fn pose(&self) -> nalgebra::Isometry3<f64> {
        nalgebra::Isometry3::from_parts(self.position.into(), self.attitude)
    }

    /// Velocity expressed in the vehicle frame.
    pub fn vehicle_velocity(&self) -> Vector3<f64> {
        let frame = vehicle_frame(self);
        frame.inverse() * (self.attitude * self.velocity)
    }

    /// (roll, pitch, yaw), ZYX convention.
    pub fn euler(&self) -> (f64, f64, f64) {
        self.attitude.euler_angles()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerParams {
    /// Velocity tracking time constant, s.
    pub tau_v: f64,
    /// Yaw-rate tracking time constant, s.
    pub tau_w: f64,
    /// Nominal mass used to map disturbance forces to acceleration, kg.
    pub mass: f64,
    /// Yaw inertia used to map disturbance torque, kg·m².
    pub yaw_inertia: f64,
    /// Lever arm turning the disturbance scale into a yaw torque scale, m.
    pub torque_arm: f64,
    /// Roll/pitch cap, rad.
    pub max_tilt: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            tau_v: 0.3,
            tau_w: 0.2,
            mass: 1.0,
            yaw_inertia: 0.05,
            torque_arm: 0.01,
            max_tilt: 30f64.to_radians(),
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        for (name, v) in [
            ("tau_v", self.tau_v),
            ("tau_w", self.tau_w),
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("max_tilt", self.max_tilt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err((name, format!("must be positive, got {v}")));
            }
        }
        if !(self.torque_arm >= 0.0) {
            return Err(("torque_arm", "must be non-negative".into()));
        }
        Ok(())
    }

    /// Time constants scaled by per-episode factors.
    pub fn scaled(&self, tau_v_factor: f64, tau_w_factor: f64) -> Self {
        Self { tau_v: self.tau_v * tau_v_factor, tau_w: self.tau_w * tau_w_factor, ..self.clone() }
    }
}

/// External disturbance: world-frame force and torque.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

/// Vehicle-frame velocity and yaw-rate command.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub velocity: Vector3<f64>,
    pub yaw_rate: f64,
}

/// Forces i.i.d. N(0, σ²) per axis; torque only about z with scale σ·arm.
pub fn sample_disturbance(rng: &mut impl Rng, sigma_w: f64, torque_arm: f64) -> Wrench {
    if sigma_w == 0.0 {
        return Wrench::default();
    }
    let n = Normal::new(0.0, sigma_w).expect("sigma_w is finite and non-negative");
    let force = Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng));
    let tz = n.sample(rng) * torque_arm;
    Wrench { force, torque: Vector3::new(0.0, 0.0, tz) }
}

/// Yaw-only rotation of the vehicle frame.
pub fn vehicle_frame(state: &RobotState) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw_of(&state.attitude))
}

/// Heading of the body x axis projected on the horizontal plane.
pub fn yaw_of(q: &UnitQuaternion<f64>) -> f64 {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z))
}

fn attitude_from(roll: f64, pitch: f64, yaw: f64) -> UnitQuaternion<f64> {
    let q = UnitQuaternion::from_euler_angles(roll, pitch, yaw);
    UnitQuaternion::new_normalize(q.into_inner())
}

/// One physics substep of length `dt`.
pub fn step_dynamics(
    state: &RobotState,
    cmd: &VelocityCommand,
    params: &ControllerParams,
    disturbance: &Wrench,
    dt: f64,
) -> RobotState {
    debug_assert!(dt > 0.0);
    let yaw = yaw_of(&state.attitude);
    let heading = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
    let v_vehicle = heading.inverse() * (state.attitude * state.velocity);

    let gain_v = (dt / params.tau_v).min(1.0);
    let gain_w = (dt / params.tau_w).min(1.0);
    let accel_cmd = (cmd.velocity - v_vehicle) * (gain_v / dt);
    let accel_dist = heading.inverse() * disturbance.force / params.mass;
    let v_vehicle = v_vehicle + (accel_cmd + accel_dist) * dt;

    let yaw_rate = state.yaw_rate + gain_w * (cmd.yaw_rate - state.yaw_rate) + disturbance.torque.z / params.yaw_inertia * dt;
    let yaw = yaw + yaw_rate * dt;

    let pitch = (accel_cmd.x / GRAVITY).atan().clamp(-params.max_tilt, params.max_tilt);
    let roll = (-accel_cmd.y / GRAVITY).atan().clamp(-params.max_tilt, params.max_tilt);
    let attitude = attitude_from(roll, pitch, yaw);
    let heading = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);

    let position = state.position + heading * v_vehicle * dt;
    let velocity = attitude.inverse() * (heading * v_vehicle);
    let delta = state.attitude.inverse() * attitude;
    let angular_velocity = delta.scaled_axis() / dt;

    RobotState { position, attitude, velocity, angular_velocity, yaw_rate }
}
