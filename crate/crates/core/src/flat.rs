//! Flat array form of [`Observation`] for foreign-language consumers.
//!
//! An observation becomes three arrays: a fixed-length `f64` vector of the
//! scalar and small-vector fields (order given by [`LAYOUT`]), the depth
//! feature, and the local grid as one byte per cell (0 unknown, 1 free,
//! 2 occupied, x-fastest). The conversion is lossless in both directions.

use nalgebra::Vector3;
use thiserror::Error;

use crate::env::Observation;
use crate::mapping::{LocalGrid, VoxelState, LOCAL_N};

/// Bumped whenever [`LAYOUT`] or the grid encoding changes.
pub const LAYOUT_VERSION: &str = "activenav-flat/1";

pub const VECTOR_LEN: usize = 20;
pub const GRID_LEN: usize = LOCAL_N * LOCAL_N * LOCAL_N;

/// One named slice of the flat vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Field {
    pub name: &'static str,
    pub offset: usize,
    pub len: usize,
}

pub const LAYOUT: [Field; 8] = [
    Field { name: "goal_dir", offset: 0, len: 3 },
    Field { name: "goal_dist", offset: 3, len: 1 },
    Field { name: "pitch", offset: 4, len: 1 },
    Field { name: "roll", offset: 5, len: 1 },
    Field { name: "velocity", offset: 6, len: 3 },
    Field { name: "angular_velocity", offset: 9, len: 3 },
    Field { name: "cam", offset: 12, len: 2 },
    Field { name: "prev_action", offset: 14, len: 6 },
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlatError {
    #[error("vector part has length {0}, expected {VECTOR_LEN}")]
    VectorLength(usize),
    #[error("grid part has length {0}, expected {GRID_LEN}")]
    GridLength(usize),
    #[error("grid cell {index} holds invalid state {value}")]
    GridValue { index: usize, value: u8 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlatObservation {
    pub vector: Vec<f64>,
    pub feature: Vec<f64>,
    pub grid: Vec<u8>,
}

pub fn field(name: &str) -> Option<Field> {
    LAYOUT.iter().copied().find(|f| f.name == name)
}

pub fn flatten(obs: &Observation) -> FlatObservation {
    let mut vector = Vec::with_capacity(VECTOR_LEN);
    vector.extend_from_slice(obs.goal_dir.as_slice());
    vector.push(obs.goal_dist);
    vector.push(obs.pitch);
    vector.push(obs.roll);
    vector.extend_from_slice(obs.velocity.as_slice());
    vector.extend_from_slice(obs.angular_velocity.as_slice());
    vector.extend_from_slice(&obs.cam);
    vector.extend_from_slice(&obs.prev_action);
    debug_assert_eq!(vector.len(), VECTOR_LEN);
    FlatObservation {
        vector,
        feature: obs.depth_feature.clone(),
        grid: obs.local_grid.cells().iter().map(|s| *s as u8).collect(),
    }
}

pub fn unflatten(flat: &FlatObservation) -> Result<Observation, FlatError> {
    let v = &flat.vector;
    if v.len() != VECTOR_LEN {
        return Err(FlatError::VectorLength(v.len()));
    }
    if flat.grid.len() != GRID_LEN {
        return Err(FlatError::GridLength(flat.grid.len()));
    }
    let cells = flat
        .grid
        .iter()
        .enumerate()
        .map(|(index, &value)| VoxelState::from_u8(value).ok_or(FlatError::GridValue { index, value }))
        .collect::<Result<Vec<_>, _>>()?;
    let v3 = |o: usize| Vector3::new(v[o], v[o + 1], v[o + 2]);
    let mut prev_action = [0.0; 6];
    prev_action.copy_from_slice(&v[14..20]);
    Ok(Observation {
        goal_dir: v3(0),
        goal_dist: v[3],
        pitch: v[4],
        roll: v[5],
        velocity: v3(6),
        angular_velocity: v3(9),
        cam: [v[12], v[13]],
        prev_action,
        depth_feature: flat.feature.clone(),
        local_grid: LocalGrid::from_cells(cells).expect("length checked"),
    })
}
