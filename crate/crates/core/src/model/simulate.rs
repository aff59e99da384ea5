//! Full-information simulation of the regime chain, the debt ratio `X⁰`
//! and the indicator `η`.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::generator::GeneratorMatrix;
use super::params::{alpha_fn, ModelParams};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rng::{self, Purpose};

/// Starting law of the chain.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialRegime {
    Fixed(usize),
    Distribution(Vec<f64>),
}

impl InitialRegime {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            Self::Fixed(i) => *i,
            Self::Distribution(p) => sample_index(p, rng.random::<f64>()),
        }
    }
}

/// Inverse-CDF draw from a discrete law.
pub(crate) fn sample_index(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Exact chain path: switch times plus its projection onto the time grid.
#[derive(Debug, Clone)]
pub struct RegimePath {
    pub dt: f64,
    /// `states[k]` is `Z_{t_k}`; coefficients on `[t_k, t_{k+1})` use it.
    pub states: Vec<usize>,
    pub initial: usize,
    /// `(time, new state)` for every transition, in time order.
    pub switches: Vec<(f64, usize)>,
}

impl RegimePath {
    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    /// Right-continuous state at time `t`.
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.switches.partition_point(|&(s, _)| s <= t);
        if k == 0 {
            self.initial
        } else {
            self.switches[k - 1].1
        }
    }
}

/// Number of grid steps covering `horizon`.
pub fn grid_steps(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and horizon > 0, got dt = {dt}, horizon = {horizon}"
        )));
    }
    Ok(((horizon / dt).round() as usize).max(1))
}

/// Samples the chain by exponential holding times, then reads it off the grid.
pub fn simulate_regime<R: Rng + ?Sized>(
    gen: &GeneratorMatrix,
    init: &InitialRegime,
    horizon: f64,
    dt: f64,
    rng: &mut R,
) -> Result<RegimePath> {
    let n = grid_steps(horizon, dt)?;
    let t_end = n as f64 * dt;
    let initial = init.draw(rng);
    let mut switches = Vec::new();
    let mut state = initial;
    let mut t = 0.0;
    loop {
        let rate = gen.exit_rate(state);
        if rate <= 0.0 {
            break;
        }
        t += Exp::new(rate).expect("positive rate").sample(rng);
        if t > t_end {
            break;
        }
        // Jump target proportional to the off-diagonal rates.
        let u = rng.random::<f64>() * rate;
        let mut acc = 0.0;
        let mut next = state;
        for j in (0..gen.q()).filter(|&j| j != state) {
            acc += gen.rate(state, j);
            next = j;
            if u < acc {
                break;
            }
        }
        state = next;
        switches.push((t, state));
    }
    let mut path = RegimePath {
        dt,
        states: Vec::with_capacity(n + 1),
        initial,
        switches,
    };
    let mut cursor = 0;
    let mut current = initial;
    for k in 0..=n {
        let tk = k as f64 * dt;
        while cursor < path.switches.len() && path.switches[cursor].0 <= tk {
            current = path.switches[cursor].1;
            cursor += 1;
        }
        path.states.push(current);
    }
    Ok(path)
}

/// Driving randomness of one path: Brownian increments and the dominating
/// Poisson candidates `(time, uniform)` used for thinning.
#[derive(Debug, Clone)]
pub struct Noise {
    pub dt: f64,
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
    pub candidates: Vec<(f64, f64)>,
}

impl Noise {
    pub fn draw<R: Rng + ?Sized>(n: usize, dt: f64, envelope: f64, rng: &mut R) -> Self {
        let sd = dt.sqrt();
        let mut dw = Vec::with_capacity(n);
        let mut db = Vec::with_capacity(n);
        for _ in 0..n {
            dw.push(sd * rng.sample::<f64, _>(StandardNormal));
            db.push(sd * rng.sample::<f64, _>(StandardNormal));
        }
        let mut candidates = Vec::new();
        if envelope > 0.0 {
            let exp = Exp::new(envelope).expect("positive envelope");
            let t_end = n as f64 * dt;
            let mut t = 0.0;
            loop {
                t += exp.sample(rng);
                if t > t_end {
                    break;
                }
                candidates.push((t, rng.random::<f64>()));
            }
        }
        Self {
            dt,
            dw,
            db,
            candidates,
        }
    }
}

/// One observed jump of `η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    /// Grid row at which the post-jump value is recorded.
    pub row: usize,
    pub time: f64,
    pub mark: f64,
    pub eta_pre: f64,
    /// Hidden regime `Z_{T−}` that produced the jump.
    pub regime: usize,
}

/// Aligned full-information path.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub dt: f64,
    pub t: Vec<f64>,
    pub z: Vec<usize>,
    pub x0: Vec<f64>,
    pub eta: Vec<f64>,
    pub jumps: Vec<JumpRecord>,
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
    pub seed: Option<(u64, u64)>,
}

/// The observable part of a path: what the filter is allowed to see.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub dt: f64,
    pub t: Vec<f64>,
    pub x0: Vec<f64>,
    pub eta: Vec<f64>,
    /// `(row, mark)` sorted by row.
    pub jumps: Vec<(usize, f64)>,
}

impl Observations {
    pub fn n_steps(&self) -> usize {
        self.t.len() - 1
    }

    /// Continuous part of `η_{k+1} − η_k`.
    pub fn continuous_eta_increment(&self, k: usize, marks: &[(usize, f64)]) -> f64 {
        let jump: f64 = marks.iter().map(|&(_, m)| m).sum();
        self.eta[k + 1] - self.eta[k] - jump
    }
}

impl SamplePath {
    pub fn n_steps(&self) -> usize {
        self.t.len() - 1
    }

    pub fn observations(&self) -> Observations {
        Observations {
            dt: self.dt,
            t: self.t.clone(),
            x0: self.x0.clone(),
            eta: self.eta.clone(),
            jumps: self.jumps.iter().map(|j| (j.row, j.mark)).collect(),
        }
    }
}

/// Rejects steps where the frozen-regime growth factor moves too much.
pub fn check_step(params: &ModelParams, dt: f64) -> Result<()> {
    let worst = params.beta.iter().fold(0.0f64, |m, b| m.max(b.abs())) * dt;
    if worst > 0.1 {
        return Err(Error::StepTooCoarse(worst));
    }
    Ok(())
}

/// Simulates `(X⁰, η)` along a regime path with fresh noise.
pub fn simulate_uncontrolled<R: Rng + ?Sized>(
    params: &ModelParams,
    regime: &RegimePath,
    x0: f64,
    eta0: f64,
    rng: &mut R,
) -> Result<SamplePath> {
    let envelope = params.jump_intensity.iter().fold(0.0f64, |m, &l| m.max(l));
    let envelope = if params.jumps.is_none() { 0.0 } else { envelope };
    let noise = Noise::draw(regime.n_steps(), regime.dt, envelope, rng);
    simulate_with_noise(params, regime, x0, eta0, &noise)
}

/// Deterministic core of [`simulate_uncontrolled`]: log-Euler for `X⁰`,
/// Euler–Maruyama for `η`, thinning for the jump clock.
pub fn simulate_with_noise(
    params: &ModelParams,
    regime: &RegimePath,
    x0: f64,
    eta0: f64,
    noise: &Noise,
) -> Result<SamplePath> {
    let dt = regime.dt;
    check_step(params, dt)?;
    if !(x0 > 0.0) {
        return Err(Error::InvalidParameter(format!("x0 = {x0} must be positive")));
    }
    let n = regime.n_steps();
    assert_eq!(noise.dw.len(), n, "noise length must match the grid");
    let envelope = params.jump_intensity.iter().fold(0.0f64, |m, &l| m.max(l));
    let sigma = params.sigma;
    let ind = &params.indicator;

    let mut t = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n + 1);
    let mut etas = Vec::with_capacity(n + 1);
    let mut jumps = Vec::new();
    let mut log_x = x0.ln();
    let mut eta = eta0;
    let mut cand = 0;
    let mut alpha_max = 0.0f64;
    t.push(0.0);
    xs.push(x0);
    etas.push(eta0);

    for k in 0..n {
        let z = regime.states[k];
        let (dw, db) = (noise.dw[k], noise.db[k]);
        log_x += (params.beta[z] - 0.5 * sigma * sigma) * dt + sigma * dw;
        if let Ok(a) = alpha_fn(params, eta, z) {
            alpha_max = alpha_max.max(a.abs());
        }
        eta += ind.drift(eta, z) * dt + ind.sigma1(eta) * dw + ind.sigma2(eta) * db;

        let t_next = (k + 1) as f64 * dt;
        while cand < noise.candidates.len() && noise.candidates[cand].0 <= t_next {
            let (s, u) = noise.candidates[cand];
            cand += 1;
            let zs = regime.state_at(s);
            if u * envelope < params.jump_intensity[zs] {
                let mark = params.jumps.size(eta, zs);
                if mark != 0.0 {
                    jumps.push(JumpRecord {
                        row: k + 1,
                        time: s,
                        mark,
                        eta_pre: eta,
                        regime: zs,
                    });
                    eta += mark;
                }
            }
        }
        t.push(t_next);
        xs.push(log_x.exp());
        etas.push(eta);
    }
    if alpha_max > params.alpha_bound {
        log::warn!(
            "observed |alpha| = {alpha_max:.3} exceeds the Novikov diagnostic bound {}",
            params.alpha_bound
        );
    }
    Ok(SamplePath {
        dt,
        t,
        z: regime.states.clone(),
        x0: xs,
        eta: etas,
        jumps,
        dw: noise.dw.clone(),
        db: noise.db.clone(),
        seed: None,
    })
}

/// Simulation inputs shared by every path of a batch.
#[derive(Debug, Clone)]
pub struct PathSetup {
    pub init: InitialRegime,
    pub x0: f64,
    pub eta0: f64,
    pub horizon: f64,
    pub dt: f64,
}

/// Path `index` of the batch keyed by `seed`; reproducible in isolation.
pub fn simulate_path(
    params: &ModelParams,
    setup: &PathSetup,
    seed: u64,
    index: u64,
) -> Result<SamplePath> {
    let mut regime_rng = rng::stream(seed, Purpose::Regime, index);
    let mut noise_rng = rng::stream(seed, Purpose::Noise, index);
    let regime = simulate_regime(
        &params.generator,
        &setup.init,
        setup.horizon,
        setup.dt,
        &mut regime_rng,
    )?;
    let mut path = simulate_uncontrolled(params, &regime, setup.x0, setup.eta0, &mut noise_rng)?;
    path.seed = Some((seed, index));
    Ok(path)
}

/// Simulates `n_paths` independent paths, in parallel when enabled.
pub fn simulate_paths(
    params: &ModelParams,
    setup: &PathSetup,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<SamplePath>> {
    par::map_indexed(exec, n_paths, |i| simulate_path(params, setup, seed, i as u64))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coefficients::{IndicatorDynamics, JumpLaw};
    use crate::model::cost::CostSpec;
    use crate::model::params::{ModelSpec, RhoSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn jump_spec() -> ModelSpec {
        ModelSpec {
            generator: vec![vec![-1.0, 1.0], vec![2.0, -2.0]],
            r: 0.02,
            sigma: 0.2,
            g: vec![0.05, -0.01],
            indicator: IndicatorDynamics::Arithmetic {
                drift: vec![0.5, -0.5],
                vol_common: 0.1,
                vol_own: 0.3,
            },
            jumps: JumpLaw::PerRegime {
                sizes: vec![0.25, -0.4],
            },
            jump_intensity: vec![3.0, 1.5],
            rho: RhoSpec::Value(1.0),
            cost: CostSpec::Quadratic { scale: 1.0 },
            two_regime: false,
            alpha_bound: 50.0,
        }
    }

    #[test]
    fn absorbing_chain_is_constant() {
        let g = GeneratorMatrix::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = simulate_regime(&g, &InitialRegime::Fixed(1), 2.0, 0.01, &mut rng).unwrap();
        assert!(p.states.iter().all(|&s| s == 1));
        assert!(p.switches.is_empty());
    }

    #[test]
    fn grid_projection_is_consistent_with_switches() {
        let g = GeneratorMatrix::two_state(3.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = simulate_regime(&g, &InitialRegime::Fixed(0), 5.0, 0.01, &mut rng).unwrap();
        assert!(!p.switches.is_empty());
        for (k, &s) in p.states.iter().enumerate() {
            assert_eq!(s, p.state_at(k as f64 * 0.01));
        }
    }

    #[test]
    fn jump_marks_match_left_limits() {
        let params = ModelParams::validate(&jump_spec()).unwrap();
        let setup = PathSetup {
            init: InitialRegime::Distribution(vec![0.5, 0.5]),
            x0: 1.0,
            eta0: 0.0,
            horizon: 5.0,
            dt: 1e-3,
        };
        let path = simulate_path(&params, &setup, 11, 0).unwrap();
        assert!(!path.jumps.is_empty());
        for j in &path.jumps {
            assert_eq!(j.mark, params.jumps.size(j.eta_pre, j.regime));
            assert_eq!(path.eta[j.row], j.eta_pre + j.mark);
        }
        assert!(path.x0.iter().all(|&x| x > 0.0));
        assert!(path.eta.iter().all(|e| e.is_finite()));
    }

    #[test]
    fn zero_jump_law_yields_no_jumps() {
        let mut spec = jump_spec();
        spec.jumps = JumpLaw::None;
        let params = ModelParams::validate(&spec).unwrap();
        let setup = PathSetup {
            init: InitialRegime::Fixed(0),
            x0: 1.0,
            eta0: 0.0,
            horizon: 3.0,
            dt: 1e-3,
        };
        let path = simulate_path(&params, &setup, 5, 2).unwrap();
        assert!(path.jumps.is_empty());
    }

    #[test]
    fn coarse_step_rejected() {
        let mut spec = jump_spec();
        spec.g = vec![5.0, -5.0];
        let params = ModelParams::validate(&spec).unwrap();
        assert!(matches!(check_step(&params, 0.1), Err(Error::StepTooCoarse(_))));
    }

    #[test]
    fn zero_drift_and_tiny_vol_keeps_ratio_constant() {
        let mut spec = jump_spec();
        spec.r = 0.03;
        spec.g = vec![0.03, 0.03];
        spec.sigma = 1e-12;
        let params = ModelParams::validate(&spec).unwrap();
        let setup = PathSetup {
            init: InitialRegime::Fixed(0),
            x0: 2.5,
            eta0: 0.0,
            horizon: 1.0,
            dt: 1e-3,
        };
        let path = simulate_path(&params, &setup, 3, 0).unwrap();
        for &x in &path.x0 {
            assert!((x - 2.5).abs() < 1e-9);
        }
    }
}
