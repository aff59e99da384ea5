//! Conditional law of the hidden regime given the observed debt ratio and
//! macroeconomic indicator.

pub mod ks;
pub mod particle;

pub use ks::{
    innovations_from_observations, ks_jump_update, ks_step_general, ks_step_two_regime,
    project_to_simplex, run_filter, two_regime_step, FilterMode, FilterPath, FilterState,
    Innovations, StepObservation, CLIP_EPS, MATCH_TOL,
};
pub use particle::{particle_filter_oracle, systematic_resample, ParticleEstimate};
