//! Optimal reduction of a debt-to-GDP ratio whose growth regime is hidden.
//!
//! The crate covers the whole pipeline: simulation of the regime-switching
//! jump-diffusion model ([`model`]), the Kushner–Stratonovich filter for the
//! hidden regime ([`filter`]), the two-regime optimal stopping problem and
//! its free boundary ([`stopping`]), and the reflection control built from
//! that boundary together with Monte Carlo cost evaluation ([`control`]).

pub mod config;
pub mod control;
pub mod error;
pub mod filter;
pub mod io;
pub mod model;
pub mod par;
pub mod rng;
pub mod scenario;
pub mod stopping;
pub mod validation;

pub use error::{Error, Result};
pub use par::Execution;
