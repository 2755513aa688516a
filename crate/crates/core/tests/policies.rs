use std::f64::consts::FRAC_PI_4;

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use activenav::camera::mount_rotation;
use activenav::env::{Action, Observation};
use activenav::mapping::{LocalGrid, VoxelState};
use activenav::policies::{
    by_name, candidate_orientations, goal_seek_with_avoidance, greedy_unknown_direction, Frustum, PolicyError,
    PolicyMemory, PolicyParams, POLICY_NAMES,
};
use activenav::EnvConfig;

fn observation(goal_dir: Vector3<f64>, grid: LocalGrid) -> Observation {
    Observation {
        goal_dir,
        goal_dist: 5.0,
        pitch: 0.0,
        roll: 0.0,
        velocity: Vector3::zeros(),
        angular_velocity: Vector3::zeros(),
        cam: [0.0; 2],
        prev_action: [0.0; 6],
        depth_feature: vec![0.0; 108],
        local_grid: grid,
    }
}

fn free_grid() -> LocalGrid {
    LocalGrid::from_cells(vec![VoxelState::Free; LocalGrid::unknown().cells().len()]).unwrap()
}

#[test]
fn obstacle_dead_ahead_reverses_the_command() {
    let params = PolicyParams::default();
    let mut grid = free_grid();
    grid.set([13, 10, 10], VoxelState::Occupied);
    let obs = observation(Vector3::x(), grid);
    let (v, yaw_rate) = goal_seek_with_avoidance(&obs, &params, 0.4);
    // attraction 1, repulsion 1/0.3 - 1/0.8 straight back, saturated to speed 1
    let raw = 1.0 - (1.0 / 0.3 - 1.0 / 0.8);
    assert!(raw < -1.0);
    assert!((v - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12, "{v}");
    assert!((yaw_rate - (-FRAC_PI_4)).abs() < 1e-12);
}

#[test]
fn free_space_heads_straight_for_the_goal() {
    let params = PolicyParams::default();
    let dir = Vector3::new(0.6, -0.8, 0.0);
    let (v, _) = goal_seek_with_avoidance(&observation(dir, free_grid()), &params, 0.4);
    assert!((v - dir / 0.8).norm() < 1e-12);
}

#[test]
fn greedy_choice_matches_exhaustive_count() {
    let cfg = EnvConfig::default();
    let frustum = Frustum { hfov: cfg.camera.hfov, vfov: cfg.camera.vfov };
    let (bmax, gmax) = (cfg.mount.beta_max, cfg.mount.gamma_max);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..40 {
        let p = rng.random_range(0.05..0.95);
        let cells: Vec<VoxelState> = (0..LocalGrid::unknown().cells().len())
            .map(|_| if rng.random_bool(p) { VoxelState::Unknown } else { VoxelState::Free })
            .collect();
        let grid = LocalGrid::from_cells(cells).unwrap();
        let current = (rng.random_range(-bmax..bmax), rng.random_range(-gmax..gmax));
        let choice = greedy_unknown_direction(&grid, current, &frustum, bmax, gmax);

        let count = |(b, g): (f64, f64)| {
            let inv = mount_rotation(b, g).inverse();
            (0..grid.cells().len())
                .filter(|i| grid.cells()[*i] == VoxelState::Unknown)
                .filter(|i| {
                    let c = inv * LocalGrid::cell_offset(LocalGrid::coords(*i));
                    c.x > 0.0 && (c.y / c.x).abs() <= (frustum.hfov / 2.0).tan() && (c.z / c.x).abs() <= (frustum.vfov / 2.0).tan()
                })
                .count()
        };
        let best = candidate_orientations(bmax, gmax).into_iter().map(count).max().unwrap();
        assert_eq!(count(choice), best);
    }
}

#[test]
fn unknown_policy_names_list_alternatives() {
    let err = by_name("teleport", &EnvConfig::default()).err().unwrap();
    assert!(matches!(err, PolicyError::Unknown { .. }));
    let msg = err.to_string();
    assert!(POLICY_NAMES.iter().all(|n| msg.contains(n)), "{msg}");
}

proptest! {
    #[test]
    fn every_policy_emits_admissible_actions(
        gx in -1.0f64..1.0, gy in -1.0f64..1.0, gz in -1.0f64..1.0,
        occupancy in 0.0f64..0.3, seed in any::<u64>(), which in 0usize..POLICY_NAMES.len(),
    ) {
        let cfg = EnvConfig::default();
        let policy = by_name(POLICY_NAMES[which], &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = (0..LocalGrid::unknown().cells().len())
            .map(|_| match rng.random_range(0.0..1.0) {
                x if x < occupancy => VoxelState::Occupied,
                x if x < 2.0 * occupancy => VoxelState::Unknown,
                _ => VoxelState::Free,
            })
            .collect();
        let dir = Vector3::new(gx, gy, gz);
        let dir = if dir.norm() > 1e-6 { dir.normalize() } else { Vector3::x() };
        let obs = observation(dir, LocalGrid::from_cells(cells).unwrap());
        let mut mem: PolicyMemory = policy.begin(seed);
        for _ in 0..20 {
            let a: Action = policy.act(&obs, &mut mem).unwrap();
            prop_assert!(a.within_bounds(cfg.mount.beta_max, cfg.mount.gamma_max), "{:?}", a);
        }
    }
}
