use std::f64::consts::FRAC_PI_2;

use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;

use activenav::mapping::{extract_local_grid, GlobalGrid, GridGeometry, LocalGrid, VoxelState, LOCAL_CENTER};
use activenav::vehicle::{step_dynamics, vehicle_frame, yaw_of, ControllerParams, RobotState, VelocityCommand, Wrench};

fn crossing(samples: &[(f64, f64)], level: f64) -> f64 {
    let w = samples.windows(2).find(|w| w[0].1 < level && w[1].1 >= level).expect("crossing");
    let ((t0, x0), (t1, x1)) = (w[0], w[1]);
    t0 + (level - x0) / (x1 - x0) * (t1 - t0)
}

#[test]
fn velocity_step_rises_in_two_point_two_tau() {
    let params = ControllerParams::default();
    let dt = 0.01;
    let mut s = RobotState::at_rest(Vector3::zeros(), 0.4);
    let cmd = VelocityCommand { velocity: Vector3::new(1.0, 0.0, 0.0), yaw_rate: 0.0 };
    let mut samples = vec![(0.0, 0.0)];
    for k in 1..300 {
        s = step_dynamics(&s, &cmd, &params, &Wrench::default(), dt);
        samples.push((k as f64 * dt, s.vehicle_velocity().x));
    }
    let rise = crossing(&samples, 0.9) - crossing(&samples, 0.1);
    assert!((rise - 2.2 * params.tau_v).abs() / (2.2 * params.tau_v) < 0.05, "rise {rise}");
}

#[test]
fn vehicle_frame_is_heading_only() {
    for (roll, pitch, yaw) in [(0.2, -0.1, 1.0), (-0.3, 0.25, -2.5), (0.0, 0.0, 3.0)] {
        let mut s = RobotState::at_rest(Vector3::zeros(), 0.0);
        s.attitude = UnitQuaternion::from_euler_angles(roll, pitch, yaw);
        let q = vehicle_frame(&s);
        let x = q * Vector3::x();
        let body_x = s.attitude * Vector3::x();
        let horizontal = Vector3::new(body_x.x, body_x.y, 0.0).normalize();
        assert!((x - horizontal).norm() < 1e-12);
        assert!(((q * Vector3::z()) - Vector3::z()).norm() < 1e-12);
        assert!((yaw_of(&s.attitude) - yaw).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn tilt_stays_capped(vx in -1.0f64..1.0, vy in -1.0f64..1.0, fx in -20.0f64..20.0) {
        let params = ControllerParams::default();
        let mut s = RobotState::at_rest(Vector3::zeros(), 0.0);
        let cmd = VelocityCommand { velocity: Vector3::new(vx, vy, 0.0), yaw_rate: 0.5 };
        let w = Wrench { force: Vector3::new(fx, 0.0, 0.0), torque: Vector3::zeros() };
        for _ in 0..50 {
            s = step_dynamics(&s, &cmd, &params, &w, 0.01);
            let (roll, pitch, _) = s.euler();
            prop_assert!(roll.abs() <= params.max_tilt + 1e-9 && pitch.abs() <= params.max_tilt + 1e-9);
        }
    }
}

fn grid() -> GlobalGrid {
    GlobalGrid::new(GridGeometry { origin: Vector3::zeros(), resolution: 0.1, dims: [60, 60, 40] })
}

#[test]
fn local_grid_rotates_with_yaw() {
    let p = Vector3::new(3.05, 3.05, 2.05);
    let mut g = grid();
    let ahead_world_x = g.geometry().voxel_of(&(p + Vector3::new(0.3, 0.0, 0.0))).unwrap();
    let ahead_world_y = g.geometry().voxel_of(&(p + Vector3::new(0.0, 0.3, 0.0))).unwrap();
    g.set(ahead_world_x, VoxelState::Occupied);
    g.set(ahead_world_y, VoxelState::Free);

    let c = LOCAL_CENTER;
    let facing_x = extract_local_grid(&g, &p, 0.0);
    assert_eq!(facing_x.get([c + 3, c, c]), VoxelState::Occupied);
    assert_eq!(facing_x.get([c, c + 3, c]), VoxelState::Free);

    // facing +y: world +x is to the right (local -y), world +y is ahead
    let facing_y = extract_local_grid(&g, &p, FRAC_PI_2);
    assert_eq!(facing_y.get([c, c - 3, c]), VoxelState::Occupied);
    assert_eq!(facing_y.get([c + 3, c, c]), VoxelState::Free);
    let marked = facing_y.cells().iter().filter(|s| **s != VoxelState::Unknown).count();
    assert_eq!(marked, 2);
}

#[test]
fn local_cells_outside_the_lattice_are_unknown() {
    let mut g = grid();
    for i in 0..g.geometry().len() {
        let v = g.geometry().coords(i);
        g.set(v, VoxelState::Free);
    }
    let corner = Vector3::new(0.05, 0.05, 0.05);
    let local = extract_local_grid(&g, &corner, 0.0);
    let unknown = local.cells().iter().filter(|s| **s == VoxelState::Unknown).count();
    // cells with any negative coordinate offset fall outside
    let inside = 11 * 11 * 11;
    assert_eq!(unknown, LocalGrid::unknown().cells().len() - inside);
}

#[test]
fn snapshot_round_trip_preserves_counts() {
    let mut g = grid();
    g.set([1, 2, 3], VoxelState::Occupied);
    g.set([4, 5, 6], VoxelState::Free);
    let mut buf = Vec::new();
    g.write_snapshot(&mut buf).unwrap();
    let back = GlobalGrid::read_snapshot(buf.as_slice()).unwrap();
    assert_eq!(back.states(), g.states());
    assert_eq!(back.counts(), g.recount());
    assert_eq!(back.exploration_fraction(), g.exploration_fraction());
}
