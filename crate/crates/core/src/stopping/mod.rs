//! Two-regime optimal stopping problem: grid, relaxation solver, one-dimensional
//! bounds and the free boundary.

pub mod boundary;
pub mod bounds;
pub mod grid;
pub mod operator;
pub mod psor;

pub use boundary::{extract_boundary, layer_distance, smooth_fit_report, FreeBoundary, SmoothFitReport};
pub use bounds::{
    one_dim_bounds, one_dim_bounds_numeric, one_dim_psor, positive_root, quadratic_threshold, zeta_lower,
    OneDimBounds, OneDimSolver,
};
pub use grid::{build_grid, Grid2D, GridSpec};
pub use operator::{generator_apply, stencil, Stencil};
pub use psor::{
    complementarity_field, solve_variational_inequality, PsorConfig, Region, SolveStats,
    ValueSurface,
};
