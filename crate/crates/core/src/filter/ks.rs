//! Kushner–Stratonovich filter: Euler steps between indicator jumps and the
//! Bayes update at jump times.

use crate::error::{Error, Result};
use crate::model::{alpha_fn, ModelParams, Observations, TwoRegime};

/// Lower clip applied to every filter component after an Euler step.
pub const CLIP_EPS: f64 = 1e-8;
/// Relative tolerance when matching an observed jump mark to `c(η−, i)`.
pub const MATCH_TOL: f64 = 1e-9;

/// Conditional regime law at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub t: f64,
    pub pi: Vec<f64>,
}

impl FilterState {
    pub fn new(t: f64, pi: Vec<f64>) -> Self {
        Self { t, pi }
    }

    /// `π(f) = Σ f(i) π(i)`.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.pi.iter().enumerate().map(|(i, p)| f(i) * p).sum()
    }
}

/// Innovation increments `(dI, dI¹)` over one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Innovations {
    pub di: f64,
    pub di1: f64,
}

/// One step of observed data.
#[derive(Debug, Clone, Copy)]
pub struct StepObservation {
    pub x_prev: f64,
    pub x_next: f64,
    pub eta_prev: f64,
    /// `η` increment with the jump marks removed.
    pub d_eta_cont: f64,
    pub dt: f64,
}

/// Itô form of `dX⁰ / X⁰` recovered from a log increment.
fn relative_increment(x_prev: f64, x_next: f64, sigma: f64, dt: f64) -> f64 {
    (x_next / x_prev).ln() + 0.5 * sigma * sigma * dt
}

/// Inverts the observation equations for the innovation increments.
pub fn innovations_from_observations(
    params: &ModelParams,
    obs: &StepObservation,
    state: &FilterState,
) -> Result<Innovations> {
    if !(obs.x_prev > 0.0 && obs.x_next > 0.0) {
        return Err(Error::InvalidParameter("debt ratio must stay positive".into()));
    }
    let sigma = params.sigma;
    let eta = obs.eta_prev;
    let s2 = params.indicator.sigma2(eta);
    if !(s2 > 0.0) {
        return Err(Error::DegenerateSigma2 { q: eta, value: s2 });
    }
    let pi_beta = state.expect(|i| params.beta[i]);
    let di = relative_increment(obs.x_prev, obs.x_next, sigma, obs.dt) / sigma
        - pi_beta / sigma * obs.dt;
    let pi_b1 = state.expect(|i| params.indicator.drift(eta, i));
    let di1 = (obs.d_eta_cont - pi_b1 * obs.dt - params.indicator.sigma1(eta) * di) / s2;
    Ok(Innovations { di, di1 })
}

/// Projects onto `{π : π_i ≥ ε, Σ π_i = 1}` by clipping and rescaling the
/// unclipped components.
pub fn project_to_simplex(pi: &mut [f64], eps: f64) {
    let q = pi.len();
    if q == 1 {
        pi[0] = 1.0;
        return;
    }
    let mut fixed = vec![false; q];
    for _ in 0..q {
        let mut changed = false;
        for (p, f) in pi.iter_mut().zip(fixed.iter_mut()) {
            if !*f && !(*p >= eps) {
                *p = eps;
                *f = true;
                changed = true;
            }
        }
        let n_fixed = fixed.iter().filter(|&&f| f).count();
        let free_sum: f64 = pi
            .iter()
            .zip(&fixed)
            .filter(|(_, &f)| !f)
            .map(|(p, _)| *p)
            .sum();
        let target = 1.0 - n_fixed as f64 * eps;
        if free_sum > 0.0 {
            let scale = target / free_sum;
            for (p, &f) in pi.iter_mut().zip(&fixed) {
                if !f {
                    *p *= scale;
                }
            }
        }
        if !changed && pi.iter().all(|&p| p >= eps) {
            break;
        }
    }
}

/// Euler step of the filter between jump times, general `Q`.
pub fn ks_step_general(
    params: &ModelParams,
    state: &FilterState,
    innov: &Innovations,
    eta: f64,
    dt: f64,
) -> FilterState {
    let q = params.q();
    let pi = &state.pi;
    let forward = params.generator.forward(pi);
    let vis: Vec<f64> = (0..q).map(|i| params.visible_jump_rate(eta, i)).collect();
    let alpha: Vec<f64> = (0..q)
        .map(|i| alpha_fn(params, eta, i).unwrap_or(0.0))
        .collect();
    let mean_vis: f64 = (0..q).map(|j| vis[j] * pi[j]).sum();
    let mean_beta: f64 = (0..q).map(|j| params.beta[j] * pi[j]).sum();
    let mean_alpha: f64 = (0..q).map(|j| alpha[j] * pi[j]).sum();
    let mut next: Vec<f64> = (0..q)
        .map(|i| {
            let drift = forward[i] - pi[i] * (vis[i] - mean_vis);
            let d1 = pi[i] * (params.beta[i] - mean_beta) / params.sigma;
            let d2 = pi[i] * (alpha[i] - mean_alpha);
            pi[i] + drift * dt + d1 * innov.di + d2 * innov.di1
        })
        .collect();
    project_to_simplex(&mut next, CLIP_EPS);
    FilterState::new(state.t + dt, next)
}

/// Scalar Euler step of the two-regime filter for `π = π(1)`.
pub fn two_regime_step(two: &TwoRegime, pi: f64, di: f64, di1: f64, dt: f64) -> f64 {
    let (load_i, load_i1) = two.belief_loadings();
    let next = pi + two.y_drift(pi) * dt + pi * (1.0 - pi) * (load_i * di + load_i1 * di1);
    next.clamp(CLIP_EPS, 1.0 - CLIP_EPS)
}

/// Euler step of the reduced two-regime filter.
pub fn ks_step_two_regime(
    params: &ModelParams,
    state: &FilterState,
    innov: &Innovations,
    dt: f64,
) -> Result<FilterState> {
    let two = params.two_regime()?;
    let p = two_regime_step(two, state.pi[0], innov.di, innov.di1, dt);
    Ok(FilterState::new(state.t + dt, vec![p, 1.0 - p]))
}

fn marks_match(c: f64, mark: f64) -> bool {
    c != 0.0 && (c - mark).abs() <= MATCH_TOL * c.abs().max(mark.abs())
}

/// Bayes reweighting at an observed jump of `η` with the given mark.
pub fn ks_jump_update(
    params: &ModelParams,
    state_pre: &FilterState,
    eta_pre: f64,
    mark: f64,
) -> Result<FilterState> {
    let weights: Vec<f64> = state_pre
        .pi
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if marks_match(params.jumps.size(eta_pre, i), mark) {
                params.jump_intensity[i] * p
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UnmatchableJump {
            mark,
            eta: eta_pre,
        });
    }
    Ok(FilterState::new(
        state_pre.t,
        weights.into_iter().map(|w| w / total).collect(),
    ))
}

/// Which filter equations to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    General,
    TwoRegime,
}

/// Filter output aligned with the observation grid.
#[derive(Debug, Clone)]
pub struct FilterPath {
    pub t: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
    /// Innovation increments of the step ending at each row (zero at row 0).
    pub innovations: Vec<Innovations>,
    /// Jumps whose marks no regime could explain (update skipped).
    pub skipped_jumps: usize,
}

/// Runs the filter over a whole observation record.
pub fn run_filter(
    params: &ModelParams,
    obs: &Observations,
    y0: &[f64],
    mode: FilterMode,
) -> Result<FilterPath> {
    if y0.len() != params.q() {
        return Err(Error::InvalidParameter(format!(
            "initial law has {} entries, expected {}",
            y0.len(),
            params.q()
        )));
    }
    if mode == FilterMode::TwoRegime {
        params.two_regime()?;
    }
    let n = obs.n_steps();
    let dt = obs.dt;
    let mut state = FilterState::new(obs.t[0], y0.to_vec());
    let mut out = FilterPath {
        t: obs.t.clone(),
        pi: Vec::with_capacity(n + 1),
        innovations: Vec::with_capacity(n + 1),
        skipped_jumps: 0,
    };
    out.pi.push(state.pi.clone());
    out.innovations.push(Innovations::default());
    let mut jcur = 0;
    for k in 0..n {
        let start = jcur;
        while jcur < obs.jumps.len() && obs.jumps[jcur].0 == k + 1 {
            jcur += 1;
        }
        let marks = &obs.jumps[start..jcur];
        let step = StepObservation {
            x_prev: obs.x0[k],
            x_next: obs.x0[k + 1],
            eta_prev: obs.eta[k],
            d_eta_cont: obs.continuous_eta_increment(k, marks),
            dt,
        };
        let innov = innovations_from_observations(params, &step, &state)?;
        state = match mode {
            FilterMode::General => ks_step_general(params, &state, &innov, obs.eta[k], dt),
            FilterMode::TwoRegime => ks_step_two_regime(params, &state, &innov, dt)?,
        };
        state.t = obs.t[k + 1];
        let mut eta_pre = obs.eta[k + 1] - marks.iter().map(|m| m.1).sum::<f64>();
        for &(_, mark) in marks {
            match ks_jump_update(params, &state, eta_pre, mark) {
                Ok(s) => state = s,
                Err(Error::UnmatchableJump { mark, eta }) => {
                    log::warn!("skipping unmatchable jump mark {mark} at eta = {eta}");
                    out.skipped_jumps += 1;
                }
                Err(e) => return Err(e),
            }
            eta_pre += mark;
        }
        out.pi.push(state.pi.clone());
        out.innovations.push(innov);
    }
    Ok(out)
}
