//! Model constants and full-information simulation of the hidden-regime
//! system `(Z, X⁰, η)`.

pub mod coefficients;
pub mod cost;
pub mod generator;
pub mod params;
pub mod presets;
pub mod simulate;

pub use coefficients::{IndicatorDynamics, JumpLaw};
pub use cost::{CostFunction, CostSpec};
pub use generator::GeneratorMatrix;
pub use params::{alpha_fn, rho_floor, ModelParams, ModelSpec, RhoSpec, TwoRegime};
pub use simulate::{
    simulate_path, simulate_paths, simulate_regime, simulate_uncontrolled, simulate_with_noise,
    InitialRegime, JumpRecord, Noise, Observations, PathSetup, RegimePath, SamplePath,
};
