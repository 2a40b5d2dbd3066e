//! Mass-spring-damper soft-landing benchmark.

mod env;
mod experiments;
mod model;

pub use env::{DisturbanceMode, MsdEnv, Reference, VIOLATION_TOL};
pub use experiments::{run_experiment, Experiment, ExperimentConfig, ExperimentOutput, Setup};
pub use model::{
    adversarial_disturbance, boundary_velocity, build_constraint_polygon, build_model, reward,
    weights_for_mass, MsdParams, MsdVariant,
};
