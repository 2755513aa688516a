//! Actuated pan-tilt depth camera.
//!
//! Frame conventions: the camera looks along its +x axis with +y to the left
//! and +z up. The mount applies yaw `gamma` about +z, then pitch `beta` about
//! the yawed +y axis, so a positive pitch tilts the optical axis downward.

use std::io::{self, Write};

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::world::World;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraIntrinsics {
    /// Horizontal field of view, radians.
    pub hfov: f64,
    /// Vertical field of view, radians.
    pub vfov: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            hfov: 86f64.to_radians(),
            vfov: 57f64.to_radians(),
            width: 84,
            height: 54,
            near: 0.2,
            far: 10.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        use std::f64::consts::PI;
        if !(self.hfov > 0.0 && self.hfov < PI) {
            return Err(("hfov", format!("must lie in (0, pi), got {}", self.hfov)));
        }
        if !(self.vfov > 0.0 && self.vfov < PI) {
            return Err(("vfov", format!("must lie in (0, pi), got {}", self.vfov)));
        }
        if self.width < 8 {
            return Err(("width", format!("must be at least 8, got {}", self.width)));
        }
        if self.height < 8 {
            return Err(("height", format!("must be at least 8, got {}", self.height)));
        }
        if !(self.near > 0.0) {
            return Err(("near", "must be positive".into()));
        }
        if !(self.far > self.near) {
            return Err(("far", "must exceed near".into()));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

/// Unit ray directions of every pixel in the camera frame, row-major.
#[derive(Clone, Debug)]
pub struct PixelRays {
    pub width: usize,
    pub height: usize,
    dirs: Vec<Vector3<f64>>,
}

impl PixelRays {
    /// Pinhole model with independent tangent mapping per axis.
    pub fn new(intr: &CameraIntrinsics) -> Self {
        let th = (intr.hfov * 0.5).tan();
        let tv = (intr.vfov * 0.5).tan();
        let mut dirs = Vec::with_capacity(intr.pixels());
        for r in 0..intr.height {
            let v = (r as f64 + 0.5) / intr.height as f64 * 2.0 - 1.0;
            for c in 0..intr.width {
                let u = (c as f64 + 0.5) / intr.width as f64 * 2.0 - 1.0;
                dirs.push(Vector3::new(1.0, -u * th, -v * tv).normalize());
            }
        }
        Self { width: intr.width, height: intr.height, dirs }
    }

    pub fn get(&self, index: usize) -> &Vector3<f64> {
        &self.dirs[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vector3<f64>> {
        self.dirs.iter()
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountConfig {
    pub beta_max: f64,
    pub gamma_max: f64,
    pub tau_beta: f64,
    pub tau_gamma: f64,
}

impl Default for MountConfig {
    fn default() -> Self {
        Self::training()
    }
}

impl MountConfig {
    /// Limits used in simulation training: ±90° on both axes.
    pub fn training() -> Self {
        Self {
            beta_max: std::f64::consts::FRAC_PI_2,
            gamma_max: std::f64::consts::FRAC_PI_2,
            tau_beta: 0.2,
            tau_gamma: 0.2,
        }
    }

    /// Limits of the physical gimbal: ±60° pitch, ±45° yaw.
    pub fn hardware() -> Self {
        Self {
            beta_max: 60f64.to_radians(),
            gamma_max: 45f64.to_radians(),
            ..Self::training()
        }
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        for (name, v) in [
            ("beta_max", self.beta_max),
            ("gamma_max", self.gamma_max),
            ("tau_beta", self.tau_beta),
            ("tau_gamma", self.tau_gamma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err((name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn at_rest(&self) -> MountState {
        MountState {
            beta: 0.0,
            gamma: 0.0,
            beta_max: self.beta_max,
            gamma_max: self.gamma_max,
            tau_beta: self.tau_beta,
            tau_gamma: self.tau_gamma,
        }
    }
}

/// Servo angles plus the limits and time constants they obey.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MountState {
    pub beta: f64,
    pub gamma: f64,
    pub beta_max: f64,
    pub gamma_max: f64,
    pub tau_beta: f64,
    pub tau_gamma: f64,
}

/// One forward-Euler step of the first-order servo model.
///
/// Commands are saturated to the mount limits before the update and the
/// resulting angles are clamped again. Requires `dt < min(tau_beta, tau_gamma)`.
pub fn step_mount(state: &MountState, beta_cmd: f64, gamma_cmd: f64, dt: f64) -> MountState {
    debug_assert!(dt > 0.0);
    let beta_ref = beta_cmd.clamp(-state.beta_max, state.beta_max);
    let gamma_ref = gamma_cmd.clamp(-state.gamma_max, state.gamma_max);
    let beta = state.beta + dt / state.tau_beta * (beta_ref - state.beta);
    let gamma = state.gamma + dt / state.tau_gamma * (gamma_ref - state.gamma);
    MountState {
        beta: beta.clamp(-state.beta_max, state.beta_max),
        gamma: gamma.clamp(-state.gamma_max, state.gamma_max),
        ..*state
    }
}

/// Rotation of the camera relative to the mount base.
pub fn mount_rotation(beta: f64, gamma: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), gamma) * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), beta)
}

/// World pose of the camera: body ∘ nominal mount ∘ servo rotation ∘ extrinsic offset.
pub fn camera_pose(
    robot_pose: &Isometry3<f64>,
    mount: &MountState,
    nominal: &Isometry3<f64>,
    extrinsic_offset: &Isometry3<f64>,
) -> Isometry3<f64> {
    let servo = Isometry3::from_parts(Translation3::identity(), mount_rotation(mount.beta, mount.gamma));
    robot_pose * nominal * servo * extrinsic_offset
}

/// Range image; [`DepthImage::INVALID`] marks pixels without a return.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl DepthImage {
    pub const INVALID: f64 = 0.0;

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    #[inline]
    pub fn is_valid(v: f64) -> bool {
        v > 0.0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|v| Self::is_valid(**v)).count()
    }

    /// Binary 16-bit PGM in millimetres, `0` for invalid pixels.
    pub fn write_pgm16(&self, mut out: impl Write) -> io::Result<()> {
        write!(out, "P5\n{} {}\n65535\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.data.len() * 2);
        for &v in &self.data {
            let mm = if Self::is_valid(v) { (v * 1000.0).round().clamp(1.0, 65535.0) as u16 } else { 0 };
            buf.extend_from_slice(&mm.to_be_bytes());
        }
        out.write_all(&buf)
    }
}

/// Ray-cast a depth image from `pose`.
pub fn render_depth(world: &World, pose: &Isometry3<f64>, intr: &CameraIntrinsics) -> DepthImage {
    render_depth_with(world, pose, intr, &PixelRays::new(intr))
}

/// [`render_depth`] with precomputed pixel rays.
pub fn render_depth_with(world: &World, pose: &Isometry3<f64>, intr: &CameraIntrinsics, rays: &PixelRays) -> DepthImage {
    let mut img = DepthImage::filled(intr.width, intr.height, DepthImage::INVALID);
    let origin = pose.translation.vector;
    let rot = pose.rotation;
    let width = intr.width;
    crate::exec::fill_rows(&mut img.data, width, |r, row| {
        for (c, px) in row.iter_mut().enumerate() {
            let dir = rot * rays.get(r * width + c);
            *px = match world.ray_intersect(&origin, &dir, intr.far) {
                Some(t) if t >= intr.near => t,
                _ => DepthImage::INVALID,
            };
        }
    });
    img
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthNoise {
    /// `a` in sigma(z) = a·z², per metre.
    pub sigma_coeff: f64,
    pub dropout: f64,
}

impl Default for DepthNoise {
    fn default() -> Self {
        Self { sigma_coeff: 0.002, dropout: 0.01 }
    }
}

impl DepthNoise {
    pub fn none() -> Self {
        Self { sigma_coeff: 0.0, dropout: 0.0 }
    }
}

/// Range-dependent Gaussian noise plus independent per-pixel dropout.
///
/// Every valid pixel consumes one uniform and one normal draw, in row-major
/// order, whatever the parameters.
pub fn corrupt_depth(img: &DepthImage, rng: &mut impl Rng, noise: &DepthNoise, near: f64, far: f64) -> DepthImage {
    debug_assert!((0.0..=1.0).contains(&noise.dropout));
    let mut out = img.clone();
    for v in out.data.iter_mut() {
        if !DepthImage::is_valid(*v) {
            continue;
        }
        let u: f64 = rng.random();
        let n: f64 = StandardNormal.sample(rng);
        if u < noise.dropout {
            *v = DepthImage::INVALID;
        } else {
            let sigma = noise.sigma_coeff * *v * *v;
            *v = (*v + sigma * n).clamp(near, far);
        }
    }
    out
}

/// Pluggable depth-image feature extractor.
pub trait DepthEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, img: &DepthImage) -> Vec<f64>;
}

/// Block average pooling; invalid pixels count as `far`.
#[derive(Clone, Debug)]
pub struct BlockPool {
    pub cols: usize,
    pub rows: usize,
    pub far: f64,
}

impl DepthEncoder for BlockPool {
    fn dim(&self) -> usize {
        self.cols * self.rows
    }

    fn encode(&self, img: &DepthImage) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for br in 0..self.rows {
            let (r0, r1) = (br * img.height / self.rows, (br + 1) * img.height / self.rows);
            for bc in 0..self.cols {
                let (c0, c1) = (bc * img.width / self.cols, (bc + 1) * img.width / self.cols);
                let mut sum = 0.0;
                for r in r0..r1 {
                    for c in c0..c1 {
                        let v = img.get(r, c);
                        sum += if DepthImage::is_valid(v) { v } else { self.far };
                    }
                }
                let n = ((r1 - r0) * (c1 - c0)).max(1);
                out.push(sum / n as f64);
            }
        }
        out
    }
}

/// Raw flattened image, row-major.
#[derive(Clone, Debug)]
pub struct Passthrough {
    pub pixels: usize,
}

impl DepthEncoder for Passthrough {
    fn dim(&self) -> usize {
        self.pixels
    }

    fn encode(&self, img: &DepthImage) -> Vec<f64> {
        img.data.clone()
    }
}

pub fn depth_feature(img: &DepthImage, encoder: &dyn DepthEncoder) -> Vec<f64> {
    encoder.encode(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use crate::world::PrimitiveObstacle;
    use std::f64::consts::FRAC_PI_2;

    fn mount(tau: f64) -> MountState {
        MountState { tau_beta: tau, tau_gamma: tau, ..MountConfig::training().at_rest() }
    }

    #[test]
    fn mount_fixed_point() {
        let m = MountState { beta: 0.3, gamma: -0.2, ..mount(0.1) };
        assert_eq!(step_mount(&m, 0.3, -0.2, 0.01), m);
    }

    #[test]
    fn mount_single_step_value() {
        let m = step_mount(&mount(0.1), 1.0, 0.0, 0.01);
        assert!((m.beta - 0.1).abs() < 1e-15);
    }

    #[test]
    fn mount_saturates_commands() {
        let mut m = mount(0.05);
        for _ in 0..1000 {
            m = step_mount(&m, 10.0, -10.0, 0.01);
            assert!(m.beta.abs() <= m.beta_max && m.gamma.abs() <= m.gamma_max);
        }
        assert!((m.beta - FRAC_PI_2).abs() < 1e-9);
        assert!((m.gamma + FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn mount_converges_geometrically() {
        let dt = 0.01;
        let mut m = mount(0.2);
        let target = 0.7;
        let mut err = (m.beta - target).abs();
        for _ in 0..100 {
            m = step_mount(&m, target, 0.0, dt);
            let e = (m.beta - target).abs();
            assert!((e - err * (1.0 - dt / 0.2)).abs() < 1e-12);
            err = e;
        }
    }

    #[test]
    fn yaw_quarter_turn_rotates_optical_axis() {
        let m = MountState { gamma: FRAC_PI_2, ..mount(0.2) };
        let pose = camera_pose(&Isometry3::identity(), &m, &Isometry3::identity(), &Isometry3::identity());
        let axis = pose.rotation * Vector3::x();
        assert!((axis - Vector3::y()).norm() < 1e-12);
    }

    #[test]
    fn positive_pitch_looks_down() {
        let axis = mount_rotation(0.3, 0.0) * Vector3::x();
        assert!(axis.z < 0.0);
    }

    #[test]
    fn zero_angles_give_nominal_pose() {
        let body = Isometry3::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(0.0, 0.0, 0.4));
        let nominal = Isometry3::translation(0.15, 0.0, 0.0);
        let pose = camera_pose(&body, &mount(0.2), &nominal, &Isometry3::identity());
        assert!((pose.to_homogeneous() - (body * nominal).to_homogeneous()).norm() < 1e-12);
    }

    #[test]
    fn open_world_renders_invalid() {
        let intr = CameraIntrinsics::default();
        let img = render_depth(&World::open(), &Isometry3::identity(), &intr);
        assert_eq!(img.valid_count(), 0);
    }

    #[test]
    fn axial_wall_depth() {
        let intr = CameraIntrinsics { width: 85, height: 55, ..Default::default() };
        let w = World::open().with_obstacles(vec![PrimitiveObstacle::cuboid(
            Vector3::new(3.5, 0.0, 0.0),
            0.0,
            Vector3::new(0.5, 20.0, 20.0),
        )
        .unwrap()]);
        let img = render_depth(&w, &Isometry3::identity(), &intr);
        assert!((img.get(27, 42) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn near_hits_are_invalid() {
        let intr = CameraIntrinsics::default();
        let w = World::open().with_obstacles(vec![PrimitiveObstacle::sphere(Vector3::new(0.25, 0.0, 0.0), 0.1).unwrap()]);
        let img = render_depth(&w, &Isometry3::identity(), &intr);
        assert!(img.data.iter().all(|v| *v == DepthImage::INVALID || *v >= intr.near));
    }

    #[test]
    fn corrupt_identity_and_full_dropout() {
        let img = DepthImage { width: 8, height: 8, data: (0..64).map(|i| 0.5 + i as f64 * 0.1).collect() };
        let mut rng = stream(1, Stream::DepthNoise);
        assert_eq!(corrupt_depth(&img, &mut rng, &DepthNoise::none(), 0.2, 10.0), img);
        let all = corrupt_depth(&img, &mut rng, &DepthNoise { sigma_coeff: 0.0, dropout: 1.0 }, 0.2, 10.0);
        assert_eq!(all.valid_count(), 0);
    }

    #[test]
    fn corrupt_is_pure_and_clamped() {
        let img = DepthImage { width: 8, height: 8, data: vec![9.9; 64] };
        let copy = img.clone();
        let noise = DepthNoise { sigma_coeff: 0.05, dropout: 0.1 };
        let a = corrupt_depth(&img, &mut stream(4, Stream::DepthNoise), &noise, 0.2, 10.0);
        let b = corrupt_depth(&img, &mut stream(4, Stream::DepthNoise), &noise, 0.2, 10.0);
        assert_eq!(a, b);
        assert_eq!(img, copy);
        assert!(a.data.iter().all(|v| *v == 0.0 || (0.2..=10.0).contains(v)));
    }

    #[test]
    fn pooling_constant_and_hand_computed() {
        let img = DepthImage { width: 4, height: 4, data: vec![2.5; 16] };
        let pool = BlockPool { cols: 2, rows: 2, far: 10.0 };
        assert_eq!(depth_feature(&img, &pool), vec![2.5; 4]);

        let img = DepthImage { width: 4, height: 4, data: (1..=16).map(f64::from).collect() };
        assert_eq!(depth_feature(&img, &pool), vec![3.5, 5.5, 11.5, 13.5]);

        let mut img = DepthImage { width: 4, height: 4, data: vec![1.0; 16] };
        img.data[0] = DepthImage::INVALID;
        assert_eq!(depth_feature(&img, &pool)[0], (3.0 + 10.0) / 4.0);
    }

    #[test]
    fn passthrough_is_exact() {
        let img = DepthImage { width: 3, height: 2, data: vec![0.0, 1.5, 2.25, 3.0, 0.0, 9.75] };
        assert_eq!(depth_feature(&img, &Passthrough { pixels: 6 }), img.data);
    }

    #[test]
    fn pgm_header_and_payload() {
        let img = DepthImage { width: 2, height: 1, data: vec![1.2345, DepthImage::INVALID] };
        let mut buf = Vec::new();
        img.write_pgm16(&mut buf).unwrap();
        let header = b"P5\n2 1\n65535\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(&buf[header.len()..], &[0x04, 0xD3, 0x00, 0x00]);
    }
}
