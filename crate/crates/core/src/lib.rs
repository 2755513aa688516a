//! Seedable simulation stack for aerial navigation with an actuated depth camera.
//!
//! The crate is organised bottom-up:
//!
//! * [`world`] procedural corridor worlds plus ray and collision queries
//! * [`camera`] pan-tilt mount dynamics, depth rendering and depth noise
//! * [`mapping`] tri-state voxel grids (privileged global grid, ego-centric local grid)
//! * [`vehicle`] velocity-tracking quadrotor abstraction and disturbances
//! * [`reward`] the four-term navigation/exploration reward
//! * [`env`] episode orchestration and batch evaluation
//! * [`policies`] policy interface and scripted baselines
//! * [`flat`] the flat array layout used by foreign-language bindings
//! * [`cli`] the command-line front end

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod cli;
pub mod config;
pub mod env;
pub mod exec;
pub mod flat;
pub mod mapping;
pub mod policies;
pub mod reward;
pub mod rng;
pub mod vehicle;
pub mod world;

pub use config::{ConfigError, EnvConfig};
pub use env::{Action, EpisodeRecord, NavEnv, Observation, Outcome, StepResult};
pub use world::World;
