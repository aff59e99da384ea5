//! Monte Carlo simulation of debt-reduction policies under the filtered
//! dynamics `(X, π)` driven by the innovations.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::filter::two_regime_step;
use crate::model::TwoRegime;
use crate::par::{map_indexed, Execution};
use crate::rng::{stream, Purpose};
use crate::stopping::FreeBoundary;

/// Number of batches used for the batch-means confidence interval.
pub const N_BATCHES: usize = 20;

/// Debt-reduction rules compared by Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Reflect `X` at the belief-dependent ceiling `d(π)`.
    Reflect,
    /// Reflect `X` at a fixed level.
    ConstantCeiling { level: f64 },
    DoNothing,
    /// Pay the whole debt at time zero.
    ImmediateFullReduction,
}

impl Policy {
    pub fn label(&self) -> String {
        match self {
            Policy::Reflect => "reflect".into(),
            Policy::ConstantCeiling { level } => format!("constant_ceiling({level:.6})"),
            Policy::DoNothing => "do_nothing".into(),
            Policy::ImmediateFullReduction => "immediate_full_reduction".into(),
        }
    }

    fn ceiling(&self, boundary: Option<&FreeBoundary>, y: f64) -> f64 {
        match self {
            Policy::Reflect => boundary.expect("reflect policy needs a boundary").at(y),
            Policy::ConstantCeiling { level } => *level,
            Policy::DoNothing => f64::INFINITY,
            Policy::ImmediateFullReduction => 0.0,
        }
    }
}

/// Full record of one controlled path.
#[derive(Debug, Clone)]
pub struct PolicyOutcome {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub pi: Vec<f64>,
    /// Cumulative control `ν`, including the initial lump.
    pub nu: Vec<f64>,
    /// Exponential factor of the uncontrolled dynamics, `X⁰_t / x`.
    pub growth: Vec<f64>,
    pub discounted_cost: f64,
    pub initial_jump: f64,
}

/// Largest `dt · |drift|` accepted, matching the model simulator.
const MAX_DRIFT_STEP: f64 = 0.1;

fn check_inputs(two: &TwoRegime, x0: f64, y0: f64, horizon: f64, dt: f64) -> Result<usize> {
    if !(x0 >= 0.0) || !(0.0..=1.0).contains(&y0) {
        return Err(Error::InvalidParameter(format!("start ({x0}, {y0}) outside the domain")));
    }
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::InvalidParameter("horizon and dt must be positive".into()));
    }
    let drift = two.beta2.abs().max(two.x_drift(1.0).abs());
    if dt * drift > MAX_DRIFT_STEP {
        return Err(Error::StepTooCoarse(dt));
    }
    Ok((horizon / dt).round().max(1.0) as usize)
}

/// Simulates one path under `policy`, keeping every step.
#[allow(clippy::too_many_arguments)]
pub fn simulate_policy<R: Rng + ?Sized>(
    two: &TwoRegime,
    policy: Policy,
    boundary: Option<&FreeBoundary>,
    x0: f64,
    y0: f64,
    horizon: f64,
    dt: f64,
    rng: &mut R,
) -> Result<PolicyOutcome> {
    let n = check_inputs(two, x0, y0, horizon, dt)?;
    let mut out = PolicyOutcome {
        t: Vec::with_capacity(n + 1),
        x: Vec::with_capacity(n + 1),
        pi: Vec::with_capacity(n + 1),
        nu: Vec::with_capacity(n + 1),
        growth: Vec::with_capacity(n + 1),
        discounted_cost: 0.0,
        initial_jump: 0.0,
    };
    let mut pi = y0;
    let lump = (x0 - policy.ceiling(boundary, pi)).max(0.0);
    let mut x = x0 - lump;
    let mut nu = lump;
    let mut growth = 1.0;
    let mut cost = lump;
    out.initial_jump = lump;
    out.t.push(0.0);
    out.x.push(x);
    out.pi.push(pi);
    out.nu.push(nu);
    out.growth.push(growth);
    let s2 = 0.5 * two.sigma * two.sigma;
    for k in 0..n {
        let disc = (-two.rho * k as f64 * dt).exp();
        cost += disc * two.cost.h(x) * dt;
        let di: f64 = rng.sample::<f64, _>(StandardNormal) * dt.sqrt();
        let di1: f64 = rng.sample::<f64, _>(StandardNormal) * dt.sqrt();
        let factor = ((two.x_drift(pi) - s2) * dt + two.sigma * di).exp();
        growth *= factor;
        let x_free = x * factor;
        pi = two_regime_step(two, pi, di, di1, dt);
        let cap = policy.ceiling(boundary, pi);
        let push = (x_free - cap).max(0.0);
        x = x_free - push;
        nu += push;
        cost += disc * push;
        out.t.push((k + 1) as f64 * dt);
        out.x.push(x);
        out.pi.push(pi);
        out.nu.push(nu);
        out.growth.push(growth);
    }
    out.discounted_cost = cost;
    Ok(out)
}

/// Discounted cost of one path without storing it.
#[allow(clippy::too_many_arguments)]
pub fn path_cost<R: Rng + ?Sized>(
    two: &TwoRegime,
    policy: Policy,
    boundary: Option<&FreeBoundary>,
    x0: f64,
    y0: f64,
    n_steps: usize,
    dt: f64,
    rng: &mut R,
) -> f64 {
    if policy == Policy::ImmediateFullReduction {
        return x0;
    }
    let mut pi = y0;
    let lump = (x0 - policy.ceiling(boundary, pi)).max(0.0);
    let mut x = x0 - lump;
    let mut cost = lump;
    let s2 = 0.5 * two.sigma * two.sigma;
    let decay = (-two.rho * dt).exp();
    let mut disc = 1.0;
    for _ in 0..n_steps {
        cost += disc * two.cost.h(x) * dt;
        let di: f64 = rng.sample::<f64, _>(StandardNormal) * dt.sqrt();
        let di1: f64 = rng.sample::<f64, _>(StandardNormal) * dt.sqrt();
        x *= ((two.x_drift(pi) - s2) * dt + two.sigma * di).exp();
        pi = two_regime_step(two, pi, di, di1, dt);
        let push = (x - policy.ceiling(boundary, pi)).max(0.0);
        x -= push;
        cost += disc * push;
        disc *= decay;
    }
    cost
}

/// The same controlled path rebuilt from the running infimum
/// `ν̄_k = [x − min_{m≤k} d(π_m)/E_m]⁺`, `X_k = E_k (x − ν̄_k)`.
pub fn running_infimum_path(outcome: &PolicyOutcome, boundary: &FreeBoundary, x0: f64) -> Vec<f64> {
    let mut inf = f64::INFINITY;
    outcome
        .pi
        .iter()
        .zip(&outcome.growth)
        .map(|(&pi, &e)| {
            inf = inf.min(boundary.at(pi) / e);
            e * (x0 - (x0 - inf).max(0.0))
        })
        .collect()
}

/// Monte Carlo estimate with a batch-means 95% confidence half-width.
#[derive(Debug, Clone, Serialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub ci_half: f64,
    pub n_paths: usize,
}

/// Batch-means mean and 95% half-width of equally sized contiguous
/// batches.
pub fn batch_means(samples: &[f64]) -> CostEstimate {
    let n = samples.len();
    let nb = N_BATCHES.min(n.max(1));
    let size = n / nb;
    if size == 0 {
        let mean = samples.iter().sum::<f64>() / n.max(1) as f64;
        return CostEstimate {
            mean,
            ci_half: f64::INFINITY,
            n_paths: n,
        };
    }
    let means: Vec<f64> = (0..nb)
        .map(|b| samples[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / nb as f64;
    if nb < 2 {
        return CostEstimate {
            mean,
            ci_half: f64::INFINITY,
            n_paths: n,
        };
    }
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (nb - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (nb - 1) as f64)
        .expect("valid Student t")
        .inverse_cdf(0.975);
    CostEstimate {
        mean,
        ci_half: t * (var / nb as f64).sqrt(),
        n_paths: nb * size,
    }
}

/// Monte Carlo settings shared by policy evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Per-path discounted costs. Path `k` always uses the stream
/// `(seed, Control, k)`, so different policies share their noise.
pub fn policy_costs(
    two: &TwoRegime,
    policy: Policy,
    boundary: Option<&FreeBoundary>,
    x0: f64,
    y0: f64,
    mc: &McSettings,
    exec: Execution,
) -> Result<Vec<f64>> {
    let n = check_inputs(two, x0, y0, mc.horizon, mc.dt)?;
    if policy == Policy::Reflect && boundary.is_none() {
        return Err(Error::InvalidParameter("reflect policy needs a boundary".into()));
    }
    Ok(map_indexed(exec, mc.n_paths, |k| {
        let mut rng = stream(mc.seed, Purpose::Control, k as u64);
        path_cost(two, policy, boundary, x0, y0, n, mc.dt, &mut rng)
    }))
}

pub fn evaluate_cost(
    two: &TwoRegime,
    policy: Policy,
    boundary: Option<&FreeBoundary>,
    x0: f64,
    y0: f64,
    mc: &McSettings,
    exec: Execution,
) -> Result<CostEstimate> {
    Ok(batch_means(&policy_costs(two, policy, boundary, x0, y0, mc, exec)?))
}

/// Horizon after which the discounted remainder is below `tol · scale`.
///
/// The remainder is bounded by the running cost of the uncontrolled path
/// plus an immediate full reduction at `T`, using
/// `h(x) ≤ K(1 + x^γ)` and `E[X_t^p] ≤ x^p e^{κ_p t}`.
pub fn truncation_horizon(two: &TwoRegime, x0: f64, tol: f64) -> Result<f64> {
    let c = &two.cost;
    let g = c.gamma;
    let b_max = two.beta2.max(two.x_drift(1.0));
    let kappa = |p: f64| p * b_max + 0.5 * two.sigma * two.sigma * p * (p - 1.0);
    let (kg, k1) = (kappa(g), kappa(1.0));
    if !(two.rho > kg.max(k1)) {
        return Err(Error::DiscountTooSmall {
            rho: two.rho,
            floor: kg.max(k1),
        });
    }
    let scale = x0.min(c.h(x0) / two.rho).max(1e-12);
    let tail = |t: f64| {
        c.k * ((-two.rho * t).exp() / two.rho
            + x0.powf(g) * (-(two.rho - kg) * t).exp() / (two.rho - kg))
            + x0 * (-(two.rho - k1) * t).exp()
    };
    let mut t = 0.0;
    let step = 0.01 / two.rho;
    while tail(t) > tol * scale {
        t += step;
        if t > 1e4 {
            return Err(Error::InvalidParameter("no finite truncation horizon".into()));
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::benchmark_spec;
    use crate::model::ModelParams;
    use crate::stopping::OneDimBounds;

    fn two() -> TwoRegime {
        ModelParams::validate(&benchmark_spec()).unwrap().two_regime.unwrap()
    }

    fn flat_boundary(level: f64) -> FreeBoundary {
        let y: Vec<f64> = (0..101).map(|j| 0.001 + 0.998 * j as f64 / 100.0).collect();
        FreeBoundary {
            d: vec![level; 101],
            d_raw: vec![level; 101],
            first_stop: vec![0; 101],
            zeta: vec![level; 101],
            bounds: OneDimBounds {
                x_star_lower: level,
                x_star_upper: level,
            },
            y,
        }
    }

    #[test]
    fn immediate_full_reduction_costs_x() {
        let mc = McSettings {
            horizon: 0.5,
            dt: 1e-3,
            n_paths: 40,
            seed: 3,
        };
        let est = evaluate_cost(&two(), Policy::ImmediateFullReduction, None, 7.5, 0.3, &mc, Execution::Sequential).unwrap();
        assert_eq!(est.mean, 7.5);
        assert_eq!(est.ci_half, 0.0);
    }

    #[test]
    fn lump_and_confinement() {
        let two = two();
        let b = flat_boundary(10.0);
        let mut rng = stream(1, Purpose::Control, 0);
        let out = simulate_policy(&two, Policy::Reflect, Some(&b), 13.0, 0.5, 0.3, 1e-3, &mut rng).unwrap();
        assert_eq!(out.initial_jump, 3.0);
        assert!(out.x.iter().all(|&x| x <= 10.0 && x >= 0.0));
        assert!(out.nu.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn running_infimum_reproduces_projection() {
        let two = two();
        let b = flat_boundary(1.0);
        let mut rng = stream(9, Purpose::Control, 4);
        let out = simulate_policy(&two, Policy::Reflect, Some(&b), 1.0, 0.5, 1.0, 1e-3, &mut rng).unwrap();
        assert!(out.nu.last().unwrap() > &0.0, "path never touched the ceiling");
        let alt = running_infimum_path(&out, &b, 1.0);
        for (a, c) in out.x.iter().zip(&alt) {
            assert!((a - c).abs() < 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn interior_path_is_uncontrolled() {
        let two = two();
        let b = flat_boundary(1e6);
        let mut r1 = stream(2, Purpose::Control, 0);
        let mut r2 = stream(2, Purpose::Control, 0);
        let a = simulate_policy(&two, Policy::Reflect, Some(&b), 1.0, 0.4, 0.05, 1e-3, &mut r1).unwrap();
        let c = simulate_policy(&two, Policy::DoNothing, None, 1.0, 0.4, 0.05, 1e-3, &mut r2).unwrap();
        assert_eq!(a.x, c.x);
        assert_eq!(*a.nu.last().unwrap(), 0.0);
    }

    #[test]
    fn path_cost_matches_full_simulation() {
        let two = two();
        let b = flat_boundary(1.02);
        let mut r1 = stream(5, Purpose::Control, 1);
        let mut r2 = stream(5, Purpose::Control, 1);
        let full = simulate_policy(&two, Policy::Reflect, Some(&b), 1.0, 0.6, 0.5, 1e-3, &mut r1).unwrap();
        let lean = path_cost(&two, Policy::Reflect, Some(&b), 1.0, 0.6, 500, 1e-3, &mut r2);
        assert!((full.discounted_cost - lean).abs() < 1e-12 * lean);
    }

    #[test]
    fn batch_means_of_constant_sample() {
        let est = batch_means(&vec![2.0; 100]);
        assert_eq!(est.mean, 2.0);
        assert_eq!(est.ci_half, 0.0);
    }

    #[test]
    fn horizon_bounds_tail() {
        let two = two();
        let t = truncation_horizon(&two, 10.0, 1e-2).unwrap();
        assert!(t > 0.2 && t < 2.0, "{t}");
    }
}
