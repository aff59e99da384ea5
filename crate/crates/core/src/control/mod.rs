//! Singular control built from the stopping problem: value reconstruction,
//! HJB check, and Monte Carlo evaluation of the reflection policy.

pub mod policy;
pub mod value;

use serde::Serialize;

use crate::error::Result;
use crate::model::TwoRegime;
use crate::par::Execution;
use crate::stopping::FreeBoundary;

pub use policy::{
    batch_means, evaluate_cost, path_cost, policy_costs, running_infimum_path, simulate_policy,
    truncation_horizon, CostEstimate, McSettings, Policy, PolicyOutcome,
};
pub use value::{
    hjb_residual, value_from_stopping, vyy_discrepancy, vyy_formula, ControlValueSurface,
    HjbReport,
};

/// One row of the PDE-versus-Monte-Carlo comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyRow {
    pub x: f64,
    pub y: f64,
    pub v_pde: f64,
    pub v_mc: f64,
    pub ci_half: f64,
    pub pass: bool,
}

/// Compares `V(x,y)` with the Monte Carlo cost of the reflection policy.
/// A point passes when `|V − MC| ≤ 3·CI + rel_tol·V`.
pub fn value_consistency_check(
    two: &TwoRegime,
    value: &ControlValueSurface,
    boundary: &FreeBoundary,
    points: &[(f64, f64)],
    mc: &McSettings,
    rel_tol: f64,
    exec: Execution,
) -> Result<Vec<ConsistencyRow>> {
    points
        .iter()
        .map(|&(x, y)| {
            let est = evaluate_cost(two, Policy::Reflect, Some(boundary), x, y, mc, exec)?;
            let v_pde = value.value_at(x, y);
            Ok(ConsistencyRow {
                x,
                y,
                v_pde,
                v_mc: est.mean,
                ci_half: est.ci_half,
                pass: (v_pde - est.mean).abs() <= 3.0 * est.ci_half + rel_tol * v_pde,
            })
        })
        .collect()
}

/// One row of the policy comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct PolicyRow {
    pub policy: String,
    pub x0: f64,
    pub y0: f64,
    pub mean_cost: f64,
    pub ci_half: f64,
    pub n_paths: usize,
}

/// Evaluates every policy at every start point with common random numbers.
pub fn compare_policies(
    two: &TwoRegime,
    policies: &[Policy],
    boundary: &FreeBoundary,
    points: &[(f64, f64)],
    mc: &McSettings,
    exec: Execution,
) -> Result<Vec<PolicyRow>> {
    let mut rows = Vec::new();
    for &(x0, y0) in points {
        for &p in policies {
            let est = evaluate_cost(two, p, Some(boundary), x0, y0, mc, exec)?;
            rows.push(PolicyRow {
                policy: p.label(),
                x0,
                y0,
                mean_cost: est.mean,
                ci_half: est.ci_half,
                n_paths: est.n_paths,
            });
        }
    }
    Ok(rows)
}

/// Reflection versus do-nothing and five constant ceilings at fractions of
/// the median boundary level.
pub fn standard_policy_set(boundary: &FreeBoundary) -> Vec<Policy> {
    let mut d = boundary.d.clone();
    d.sort_by(f64::total_cmp);
    let median = d[d.len() / 2];
    let mut out = vec![Policy::Reflect, Policy::DoNothing];
    for f in [0.5, 0.75, 1.25, 1.5, 2.0] {
        out.push(Policy::ConstantCeiling { level: f * median });
    }
    out.push(Policy::ImmediateFullReduction);
    out
}
