//! Forward dynamics of a fixed-base chain of rigid bodies joined by 6-DOF
//! frame springs and pulled by excitation-driven line actuators.

mod config;
mod integrate;
mod model;
mod muscle;
pub mod quat;
mod spring;

use thiserror::Error;

pub use config::{build_chain, ChainConfig, LoadSpec, MuscleSpec};
pub use integrate::{
    at_rest, body_loads, damping_matrix, kinetic_energy, pose_feature, potential_energy, sensitivity, spring_energy, step,
    BodyLoads, Sensitivity,
};
pub use model::{ChainModel, ExcitationVector, ExternalLoad, ModelState, Pose, PoseFeature, RigidBody, Twist};
pub use muscle::{
    active_force_length, force_velocity, force_velocity_slope, muscle_force, muscle_geometry, passive_force_length, tension_velocity_slope, Muscle,
    MuscleGeometry, MuscleMode,
};
pub use spring::{spring_wrench, FrameSpring, SpringLoad, Wrench};

/// Default simulation timestep, seconds.
pub const DEFAULT_DT: f64 = 0.010;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("excitation {index} = {value} outside [0, 1]")]
    ExcitationOutOfRange { index: usize, value: f64 },
    #[error("muscle {muscle} has coincident attachment points")]
    CoincidentAttachments { muscle: usize },
    #[error("timestep must be positive and finite, got {0}")]
    InvalidTimestep(f64),
    #[error("simulation diverged at t = {time}")]
    Diverged { time: f64 },
}
