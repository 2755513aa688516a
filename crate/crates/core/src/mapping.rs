//! Tri-state voxel occupancy grids.
//!
//! [`GlobalGrid`] is the privileged map covering the whole world; rewards and
//! the exploration metric are computed on it. [`LocalGrid`] is the 21³
//! ego-centric window handed to policies.

use std::io::{self, Read, Write};

use nalgebra::{Isometry3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{DepthImage, PixelRays};
use crate::world::Aabb;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[repr(u8)]
pub enum VoxelState {
    #[default]
    Unknown = 0,
    Free = 1,
    Occupied = 2,
}

impl VoxelState {
    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            0 => Some(Self::Unknown),
            1 => Some(Self::Free),
            2 => Some(Self::Occupied),
            _ => None,
        }
    }
}

/// Set of voxel states, used by proximity queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateSet(u8);

impl StateSet {
    pub const UNKNOWN: Self = Self(1);
    pub const FREE: Self = Self(2);
    pub const OCCUPIED: Self = Self(4);
    /// States that count against the robot in the proximity penalty.
    pub const BLOCKING: Self = Self(1 | 4);

    pub fn contains(self, s: VoxelState) -> bool {
        self.0 & (1 << s as u8) != 0
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }
}

/// Placement of a dense voxel lattice in the world.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin: Vector3<f64>,
    pub resolution: f64,
    pub dims: [usize; 3],
}

impl GridGeometry {
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent(&self) -> Aabb {
        let size = Vector3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.resolution;
        Aabb::new(self.origin, self.origin + size)
    }

    #[inline]
    pub fn index(&self, [x, y, z]: [usize; 3]) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let y = (index / self.dims[0]) % self.dims[1];
        let z = index / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    /// Voxel containing `p`, if inside the lattice.
    #[inline]
    pub fn voxel_of(&self, p: &Vector3<f64>) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for i in 0..3 {
            let f = ((p[i] - self.origin[i]) / self.resolution).floor();
            if !(f >= 0.0 && f < self.dims[i] as f64) {
                return None;
            }
            out[i] = f as usize;
        }
        Some(out)
    }

    pub fn center(&self, [x, y, z]: [usize; 3]) -> Vector3<f64> {
        self.origin + Vector3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) * self.resolution
    }

    /// Walk the voxels pierced by the segment `start + t·dir`, `t ∈ [0, length)`.
    ///
    /// `visit` receives each voxel with the parametric interval the segment
    /// spends inside it, clipped to the lattice. Returns `true` when the
    /// segment end lies inside the lattice (the last visited voxel then
    /// contains the point just before the end).
    pub fn walk_segment(
        &self,
        start: &Vector3<f64>,
        dir: &Vector3<f64>,
        length: f64,
        mut visit: impl FnMut([usize; 3], f64, f64),
    ) -> bool {
        let Some((t_in, t_out)) = self.extent().ray_interval(start, dir) else {
            return false;
        };
        let t0 = t_in.max(0.0);
        let t1 = t_out.min(length);
        if t0 >= t1 {
            return false;
        }
        let ends_inside = t_out > length;
        let res = self.resolution;

        let entry = start + dir * t0;
        let mut cell = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for i in 0..3 {
            let rel = (entry[i] - self.origin[i]) / res;
            let mut c = rel.floor() as i64;
            let max = self.dims[i] as i64 - 1;
            // entering exactly on the far face of the lattice
            if c > max {
                c = max;
            }
            if c < 0 {
                c = 0;
            }
            // on a boundary while moving backwards, the walk starts in the lower cell
            if dir[i] < 0.0 && rel == rel.floor() && c > 0 && (c as f64) == rel {
                c -= 1;
            }
            cell[i] = c;
            if dir[i] > 0.0 {
                step[i] = 1;
                let boundary = self.origin[i] + (c + 1) as f64 * res;
                t_max[i] = (boundary - start[i]) / dir[i];
                t_delta[i] = res / dir[i];
            } else if dir[i] < 0.0 {
                step[i] = -1;
                let boundary = self.origin[i] + c as f64 * res;
                t_max[i] = (boundary - start[i]) / dir[i];
                t_delta[i] = -res / dir[i];
            }
        }

        let mut t_enter = t0;
        loop {
            let axis = if t_max[0] < t_max[1] {
                if t_max[0] < t_max[2] { 0 } else { 2 }
            } else if t_max[1] < t_max[2] {
                1
            } else {
                2
            };
            let t_exit = t_max[axis].min(t1);
            visit([cell[0] as usize, cell[1] as usize, cell[2] as usize], t_enter, t_exit);
            if t_max[axis] >= t1 {
                break;
            }
            cell[axis] += step[axis];
            if cell[axis] < 0 || cell[axis] >= self.dims[axis] as i64 {
                return false;
            }
            t_enter = t_max[axis];
            t_max[axis] += t_delta[axis];
        }
        ends_inside
    }
}

/// Voxel counts by state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StateCounts {
    pub unknown: usize,
    pub free: usize,
    pub occupied: usize,
}

impl StateCounts {
    pub fn total(&self) -> usize {
        self.unknown + self.free + self.occupied
    }

    fn slot(&mut self, s: VoxelState) -> &mut usize {
        match s {
            VoxelState::Unknown => &mut self.unknown,
            VoxelState::Free => &mut self.free,
            VoxelState::Occupied => &mut self.occupied,
        }
    }
}

/// JSON companion of a grid snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub origin: [f64; 3],
    pub resolution: f64,
    pub dims: [usize; 3],
    pub counts: StateCounts,
    pub exploration_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalGrid {
    geom: GridGeometry,
    states: Vec<VoxelState>,
    counts: StateCounts,
}

impl GlobalGrid {
    pub fn new(geom: GridGeometry) -> Self {
        let n = geom.len();
        Self {
            geom,
            states: vec![VoxelState::Unknown; n],
            counts: StateCounts { unknown: n, free: 0, occupied: 0 },
        }
    }

    /// All-unknown grid whose lattice covers `bounds`.
    pub fn covering(bounds: &Aabb, resolution: f64) -> Self {
        let size = bounds.size();
        let dim = |s: f64| ((s / resolution - 1e-9).ceil() as usize).max(1);
        Self::new(GridGeometry {
            origin: bounds.min,
            resolution,
            dims: [dim(size.x), dim(size.y), dim(size.z)],
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn counts(&self) -> StateCounts {
        self.counts
    }

    pub fn states(&self) -> &[VoxelState] {
        &self.states
    }

    pub fn get(&self, idx: [usize; 3]) -> VoxelState {
        self.states[self.geom.index(idx)]
    }

    pub fn set(&mut self, idx: [usize; 3], s: VoxelState) {
        let i = self.geom.index(idx);
        self.set_linear(i, s);
    }

    #[inline]
    fn set_linear(&mut self, i: usize, s: VoxelState) {
        let old = self.states[i];
        if old != s {
            *self.counts.slot(old) -= 1;
            *self.counts.slot(s) += 1;
            self.states[i] = s;
        }
    }

    pub fn state_at(&self, p: &Vector3<f64>) -> Option<VoxelState> {
        self.geom.voxel_of(p).map(|v| self.get(v))
    }

    /// Exhaustive recount; equals [`GlobalGrid::counts`] at all times.
    pub fn recount(&self) -> StateCounts {
        let mut c = StateCounts::default();
        for s in &self.states {
            *c.slot(*s) += 1;
        }
        c
    }

    /// Carve one depth frame into the grid and return how many voxels left
    /// the unknown state.
    ///
    /// Each valid pixel's ray marks the voxels it crosses up to
    /// `min(depth, max_range)` free; if the return lies within `max_range`
    /// the voxel holding the hit is marked occupied. Free never overwrites
    /// occupied.
    pub fn integrate_depth(&mut self, img: &DepthImage, rays: &PixelRays, pose: &Isometry3<f64>, max_range: f64) -> usize {
        debug_assert!(max_range > 0.0);
        let unknown_before = self.counts.unknown;
        let origin = pose.translation.vector;
        let geom = self.geom;
        for (i, &depth) in img.data.iter().enumerate() {
            if !DepthImage::is_valid(depth) {
                continue;
            }
            let dir = pose.rotation * rays.get(i);
            let hit = depth <= max_range;
            let length = depth.min(max_range);
            let mut last: Option<usize> = None;
            let ends_inside = geom.walk_segment(&origin, &dir, length, |v, _, _| {
                if let Some(prev) = last {
                    self.mark_free(prev);
                }
                last = Some(geom.index(v));
            });
            if let Some(end) = last {
                if hit && ends_inside {
                    self.set_linear(end, VoxelState::Occupied);
                } else {
                    self.mark_free(end);
                }
            }
        }
        unknown_before - self.counts.unknown
    }

    #[inline]
    fn mark_free(&mut self, i: usize) {
        if self.states[i] == VoxelState::Unknown {
            self.set_linear(i, VoxelState::Free);
        }
    }

    /// Number of voxels whose centre lies within `radius` of `center` and
    /// whose state is in `states`.
    pub fn count_near(&self, center: &Vector3<f64>, radius: f64, states: StateSet) -> usize {
        let g = &self.geom;
        let r2 = radius * radius;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for i in 0..3 {
            let a = ((center[i] - radius - g.origin[i]) / g.resolution - 0.5).ceil().max(0.0);
            let b = ((center[i] + radius - g.origin[i]) / g.resolution - 0.5).floor();
            if b < 0.0 || a >= g.dims[i] as f64 || a > b {
                return 0;
            }
            lo[i] = a as usize;
            hi[i] = (b as usize).min(g.dims[i] - 1);
        }
        let mut n = 0;
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let idx = [x, y, z];
                    if (g.center(idx) - center).norm_squared() <= r2 && states.contains(self.get(idx)) {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    /// (free + occupied) / total.
    pub fn exploration_fraction(&self) -> f64 {
        let total = self.counts.total();
        if total == 0 {
            return 0.0;
        }
        (self.counts.free + self.counts.occupied) as f64 / total as f64
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            origin: [self.geom.origin.x, self.geom.origin.y, self.geom.origin.z],
            resolution: self.geom.resolution,
            dims: self.geom.dims,
            counts: self.counts,
            exploration_fraction: self.exploration_fraction(),
        }
    }

    /// Snapshot layout (little endian): origin `3×f64`, resolution `f64`,
    /// dims `3×u32`, then one byte per voxel (x fastest):
    /// 0 unknown, 1 free, 2 occupied.
    pub fn write_snapshot(&self, mut out: impl Write) -> io::Result<()> {
        let mut buf = Vec::with_capacity(44 + self.states.len());
        for v in self.geom.origin.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&self.geom.resolution.to_le_bytes());
        for d in self.geom.dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        buf.extend(self.states.iter().map(|s| *s as u8));
        out.write_all(&buf)
    }

    pub fn read_snapshot(mut input: impl Read) -> io::Result<Self> {
        let mut head = [0u8; 44];
        input.read_exact(&mut head)?;
        let f = |i: usize| f64::from_le_bytes(head[i * 8..i * 8 + 8].try_into().unwrap());
        let d = |i: usize| u32::from_le_bytes(head[32 + i * 4..36 + i * 4].try_into().unwrap()) as usize;
        let geom = GridGeometry {
            origin: Vector3::new(f(0), f(1), f(2)),
            resolution: f(3),
            dims: [d(0), d(1), d(2)],
        };
        let mut bytes = Vec::with_capacity(geom.len());
        input.read_to_end(&mut bytes)?;
        if bytes.len() != geom.len() {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "voxel payload length does not match dims"));
        }
        let mut grid = GlobalGrid::new(geom);
        for (i, b) in bytes.into_iter().enumerate() {
            let s = VoxelState::from_u8(b)
                .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, format!("bad voxel state byte {b}")))?;
            grid.set_linear(i, s);
        }
        Ok(grid)
    }
}

/// Cells per side of the ego-centric grid.
pub const LOCAL_N: usize = 21;
/// Ego-centric grid resolution, metres.
pub const LOCAL_RES: f64 = 0.1;
/// Index of the centre cell along each axis.
pub const LOCAL_CENTER: usize = LOCAL_N / 2;

/// 21³ window in the vehicle frame (yaw-aligned, level), robot in the centre cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalGrid {
    cells: Vec<VoxelState>,
}

impl Default for LocalGrid {
    fn default() -> Self {
        Self::unknown()
    }
}

impl LocalGrid {
    pub fn unknown() -> Self {
        Self { cells: vec![VoxelState::Unknown; LOCAL_N * LOCAL_N * LOCAL_N] }
    }

    pub fn side_length() -> f64 {
        LOCAL_N as f64 * LOCAL_RES
    }

    #[inline]
    pub fn index([x, y, z]: [usize; 3]) -> usize {
        (z * LOCAL_N + y) * LOCAL_N + x
    }

    pub fn coords(index: usize) -> [usize; 3] {
        [index % LOCAL_N, (index / LOCAL_N) % LOCAL_N, index / (LOCAL_N * LOCAL_N)]
    }

    /// Offset of a cell centre from the robot, vehicle frame.
    pub fn cell_offset([x, y, z]: [usize; 3]) -> Vector3<f64> {
        let c = LOCAL_CENTER as f64;
        Vector3::new(x as f64 - c, y as f64 - c, z as f64 - c) * LOCAL_RES
    }

    /// Cell containing a vehicle-frame offset from the robot.
    pub fn cell_of(offset: &Vector3<f64>) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for i in 0..3 {
            let f = (offset[i] / LOCAL_RES + LOCAL_CENTER as f64 + 0.5).floor();
            if !(f >= 0.0 && f < LOCAL_N as f64) {
                return None;
            }
            out[i] = f as usize;
        }
        Some(out)
    }

    pub fn get(&self, idx: [usize; 3]) -> VoxelState {
        self.cells[Self::index(idx)]
    }

    pub fn set(&mut self, idx: [usize; 3], s: VoxelState) {
        self.cells[Self::index(idx)] = s;
    }

    pub fn cells(&self) -> &[VoxelState] {
        &self.cells
    }

    pub fn from_cells(cells: Vec<VoxelState>) -> Option<Self> {
        (cells.len() == LOCAL_N * LOCAL_N * LOCAL_N).then_some(Self { cells })
    }

    pub fn count(&self, states: StateSet) -> usize {
        self.cells.iter().filter(|s| states.contains(**s)).count()
    }
}

/// Sample the global grid at each local cell centre rotated by `yaw` about
/// the robot (nearest voxel). Cells outside the global lattice are unknown.
pub fn extract_local_grid(grid: &GlobalGrid, robot_position: &Vector3<f64>, robot_yaw: f64) -> LocalGrid {
    let (s, c) = robot_yaw.sin_cos();
    let mut out = LocalGrid::unknown();
    let geom = grid.geometry();
    for (i, cell) in out.cells.iter_mut().enumerate() {
        let o = LocalGrid::cell_offset(LocalGrid::coords(i));
        let p = robot_position + Vector3::new(c * o.x - s * o.y, s * o.x + c * o.y, o.z);
        if let Some(v) = geom.voxel_of(&p) {
            *cell = grid.get(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraIntrinsics;

    fn small_grid() -> GlobalGrid {
        GlobalGrid::new(GridGeometry { origin: Vector3::zeros(), resolution: 0.1, dims: [40, 30, 20] })
    }

    /// Voxels touched by a segment, by dense sampling.
    fn sampled_voxels(g: &GridGeometry, s: &Vector3<f64>, d: &Vector3<f64>, len: f64) -> Vec<[usize; 3]> {
        let mut out: Vec<[usize; 3]> = Vec::new();
        let n = (len / 1e-5) as usize;
        for k in 1..n {
            if let Some(v) = g.voxel_of(&(s + d * (k as f64 * 1e-5))) {
                if out.last() != Some(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    fn is_subsequence(needle: &[[usize; 3]], hay: &[[usize; 3]]) -> bool {
        let mut it = hay.iter();
        needle.iter().all(|n| it.any(|h| h == n))
    }

    #[test]
    fn walk_matches_dense_sampling() {
        let g = small_grid().geom;
        let cases = [
            (Vector3::new(0.05, 0.05, 0.05), Vector3::new(1.0, 0.7, 0.3)),
            (Vector3::new(3.93, 2.81, 1.07), Vector3::new(-0.9, -0.2, 0.4)),
            (Vector3::new(-0.5, 1.23, 0.77), Vector3::new(1.0, 0.05, -0.01)),
            (Vector3::new(2.0, 1.5, 1.0), Vector3::new(0.0, 0.0, -1.0)),
        ];
        for (s, d) in cases {
            let d = d.normalize();
            let mut walked = Vec::new();
            g.walk_segment(&s, &d, 1.7, |v, t0, t1| walked.push((v, t1 - t0)));
            let sampled = sampled_voxels(&g, &s, &d, 1.7);
            // sampling at 1e-5 can step over a corner clip shorter than that
            let all: Vec<_> = walked.iter().map(|w| w.0).collect();
            let long: Vec<_> = walked.iter().filter(|w| w.1 > 2e-5).map(|w| w.0).collect();
            assert!(is_subsequence(&sampled, &all), "start {s:?} dir {d:?}");
            assert!(is_subsequence(&long, &sampled), "start {s:?} dir {d:?}");
        }
    }

    #[test]
    fn walk_reports_clipped_end() {
        let g = small_grid().geom;
        let s = Vector3::new(3.5, 1.5, 1.0);
        assert!(g.walk_segment(&s, &Vector3::x(), 0.3, |_, _, _| {}));
        assert!(!g.walk_segment(&s, &Vector3::x(), 1.0, |_, _, _| {}));
    }

    #[test]
    fn axial_ray_single_hit() {
        let mut g = small_grid();
        let intr = CameraIntrinsics { width: 9, height: 9, ..Default::default() };
        let rays = PixelRays::new(&intr);
        let mut img = DepthImage::filled(9, 9, DepthImage::INVALID);
        img.data[4 * 9 + 4] = 1.0;
        let pose = Isometry3::translation(0.55, 1.55, 1.05);
        let n = g.integrate_depth(&img, &rays, &pose, 3.0);
        // free voxels x = 5..=14, occupied x = 15
        assert_eq!(n, 11);
        assert_eq!(g.counts().occupied, 1);
        assert_eq!(g.get([15, 15, 10]), VoxelState::Occupied);
        for x in 5..15 {
            assert_eq!(g.get([x, 15, 10]), VoxelState::Free);
        }
        assert_eq!(g.integrate_depth(&img, &rays, &pose, 3.0), 0);
    }

    #[test]
    fn hit_beyond_max_range_is_not_marked() {
        let mut g = small_grid();
        let intr = CameraIntrinsics { width: 9, height: 9, ..Default::default() };
        let rays = PixelRays::new(&intr);
        let mut img = DepthImage::filled(9, 9, DepthImage::INVALID);
        img.data[4 * 9 + 4] = 2.0;
        let pose = Isometry3::translation(0.55, 1.55, 1.05);
        g.integrate_depth(&img, &rays, &pose, 1.0);
        assert_eq!(g.counts().occupied, 0);
        assert_eq!(g.counts().free, 11);
    }

    #[test]
    fn occupied_is_never_cleared() {
        let mut g = small_grid();
        g.set([10, 15, 10], VoxelState::Occupied);
        let intr = CameraIntrinsics { width: 9, height: 9, ..Default::default() };
        let rays = PixelRays::new(&intr);
        let mut img = DepthImage::filled(9, 9, DepthImage::INVALID);
        img.data[4 * 9 + 4] = 2.5;
        g.integrate_depth(&img, &rays, &Isometry3::translation(0.55, 1.55, 1.05), 3.0);
        assert_eq!(g.get([10, 15, 10]), VoxelState::Occupied);
        assert_eq!(g.recount(), g.counts());
    }

    #[test]
    fn count_near_exhaustive() {
        let g = small_grid();
        let center = Vector3::new(1.23, 1.11, 0.98);
        let expected = (0..g.geom.len())
            .filter(|&i| (g.geom.center(g.geom.coords(i)) - center).norm() <= 0.4)
            .count();
        assert!(expected > 200);
        assert_eq!(g.count_near(&center, 0.4, StateSet::BLOCKING), expected);
        assert_eq!(g.count_near(&center, 0.4, StateSet::FREE), 0);
    }

    #[test]
    fn count_near_tiny_radius() {
        let mut g = small_grid();
        let c = g.geom.center([3, 4, 5]);
        assert_eq!(g.count_near(&c, 0.04, StateSet::UNKNOWN), 1);
        g.set([3, 4, 5], VoxelState::Free);
        assert_eq!(g.count_near(&c, 0.04, StateSet::BLOCKING), 0);
    }

    #[test]
    fn exploration_fraction_tracks_counts() {
        let mut g = small_grid();
        assert_eq!(g.exploration_fraction(), 0.0);
        for i in 0..120 {
            g.set(g.geom.coords(i * 7), VoxelState::Free);
        }
        assert_eq!(g.exploration_fraction(), 120.0 / g.geom.len() as f64);
        for i in 0..g.geom.len() {
            g.set(g.geom.coords(i), VoxelState::Occupied);
        }
        assert_eq!(g.exploration_fraction(), 1.0);
    }

    #[test]
    fn local_grid_identity_window() {
        let mut g = small_grid();
        for i in 0..g.geom.len() {
            let s = VoxelState::from_u8((i % 3) as u8).unwrap();
            g.set(g.geom.coords(i), s);
        }
        let robot = g.geom.center([20, 15, 10]);
        let local = extract_local_grid(&g, &robot, 0.0);
        for i in 0..LOCAL_N.pow(3) {
            let [x, y, z] = LocalGrid::coords(i);
            let expected = if z < 20 { g.get([x + 10, y + 5, z]) } else { VoxelState::Unknown };
            assert_eq!(local.get([x, y, z]), expected);
        }
    }

    #[test]
    fn local_grid_of_unknown_is_unknown() {
        let g = small_grid();
        let local = extract_local_grid(&g, &Vector3::new(0.1, 0.1, 0.1), 1.3);
        assert_eq!(local.count(StateSet::UNKNOWN), LOCAL_N.pow(3));
    }

    #[test]
    fn snapshot_round_trip() {
        let mut g = small_grid();
        for i in (0..g.geom.len()).step_by(5) {
            g.set(g.geom.coords(i), if i % 2 == 0 { VoxelState::Free } else { VoxelState::Occupied });
        }
        let mut buf = Vec::new();
        g.write_snapshot(&mut buf).unwrap();
        assert_eq!(buf.len(), 44 + g.geom.len());
        let back = GlobalGrid::read_snapshot(&buf[..]).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.exploration_fraction(), g.exploration_fraction());
    }

    #[test]
    fn covering_grid_dims() {
        let g = GlobalGrid::covering(&Aabb::new(Vector3::zeros(), Vector3::new(10.05, 5.0, 4.0)), 0.1);
        assert_eq!(g.geometry().dims, [101, 50, 40]);
    }
}
