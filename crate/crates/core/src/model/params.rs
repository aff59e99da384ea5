use serde::{Deserialize, Serialize};

use super::coefficients::{IndicatorDynamics, JumpLaw};
use super::cost::{CostFunction, CostSpec};
use super::generator::GeneratorMatrix;
use crate::error::{Error, Result};

/// Discount rate, given directly or derived from the case-study floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    Value(f64),
    /// `ρ = max(factor · ρ_o⁺, minimum)`; requires the two-regime model.
    Auto { floor_factor: f64, minimum: f64 },
}

fn default_alpha_bound() -> f64 {
    50.0
}

fn default_jumps() -> JumpLaw {
    JumpLaw::None
}

/// Serialized (unvalidated) model constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub generator: Vec<Vec<f64>>,
    pub r: f64,
    pub sigma: f64,
    pub g: Vec<f64>,
    pub indicator: IndicatorDynamics,
    #[serde(default = "default_jumps")]
    pub jumps: JumpLaw,
    pub jump_intensity: Vec<f64>,
    pub rho: RhoSpec,
    pub cost: CostSpec,
    /// Enforce the two-regime case-study assumptions (ordering of growth
    /// rates, no indicator jumps, discount above the floor).
    #[serde(default)]
    pub two_regime: bool,
    /// Novikov diagnostic: warn when |α| observed along a path exceeds this.
    #[serde(default = "default_alpha_bound")]
    pub alpha_bound: f64,
}

/// Validated model constants with derived quantities.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub generator: GeneratorMatrix,
    pub r: f64,
    pub sigma: f64,
    pub g: Vec<f64>,
    /// `β_i = r − g(i)`.
    pub beta: Vec<f64>,
    pub indicator: IndicatorDynamics,
    pub jumps: JumpLaw,
    pub jump_intensity: Vec<f64>,
    pub rho: f64,
    pub cost: CostFunction,
    pub alpha_bound: f64,
    /// Present when the spec asked for the two-regime case study.
    pub two_regime: Option<TwoRegime>,
}

/// Scalar constants of the two-regime case study, regime 1 being the
/// fast-growth state (`g₁ > g₂`).
#[derive(Debug, Clone)]
pub struct TwoRegime {
    pub g1: f64,
    pub g2: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Rate of leaving regime 1, `λ₁₂`.
    pub lambda1: f64,
    /// Rate of leaving regime 2, `λ₂₁`.
    pub lambda2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub sigma: f64,
    pub rho: f64,
    pub theta_sq: f64,
    /// Unclamped `ρ_o`.
    pub rho_floor: f64,
    pub cost: CostFunction,
}

impl TwoRegime {
    /// Drift of `X̂` per unit level at belief `y`: `β₂ + (g₂−g₁) y`.
    pub fn x_drift(&self, y: f64) -> f64 {
        self.beta2 + (self.g2 - self.g1) * y
    }

    /// Drift of the belief: `λ₂ − (λ₁+λ₂) y`.
    pub fn y_drift(&self, y: f64) -> f64 {
        self.lambda2 - (self.lambda1 + self.lambda2) * y
    }

    /// Coefficient of `∂²_y`: `θ² y² (1−y)²`.
    pub fn y_diffusion(&self, y: f64) -> f64 {
        let s = y * (1.0 - y);
        self.theta_sq * s * s
    }

    /// Belief volatility loadings on `(dI, dI¹)` divided by `y(1−y)`.
    pub fn belief_loadings(&self) -> (f64, f64) {
        ((self.beta1 - self.beta2) / self.sigma, self.alpha1 - self.alpha2)
    }

    /// `ρ − β₂ − (g₂−g₁) y`, the level `h'` must reach for stopping.
    pub fn stopping_threshold(&self, y: f64) -> f64 {
        self.rho - self.x_drift(y)
    }
}

impl ModelParams {
    /// Checks every structural assumption and fills in derived fields.
    pub fn validate(spec: &ModelSpec) -> Result<Self> {
        let generator = GeneratorMatrix::new(spec.generator.clone())?;
        let q = generator.q();
        let len_err = |what: &str, n: usize| {
            Error::InvalidParameter(format!("{what} has {n} entries, expected {q}"))
        };
        if spec.g.len() != q {
            return Err(len_err("g", spec.g.len()));
        }
        if spec.jump_intensity.len() != q {
            return Err(len_err("jump_intensity", spec.jump_intensity.len()));
        }
        if spec.indicator.n_regimes() != q {
            return Err(len_err("indicator drift", spec.indicator.n_regimes()));
        }
        if let Some(n) = spec.jumps.n_regimes() {
            if n != q {
                return Err(len_err("jump sizes", n));
            }
        }
        if !(spec.r >= 0.0) || !spec.r.is_finite() {
            return Err(Error::InvalidParameter(format!("r = {} must be >= 0", spec.r)));
        }
        if !(spec.sigma > 0.0) || !spec.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma = {} must be > 0",
                spec.sigma
            )));
        }
        if spec.g.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter("g must be finite".into()));
        }
        if spec
            .jump_intensity
            .iter()
            .any(|l| !(*l > 0.0) || !l.is_finite())
        {
            return Err(Error::InvalidParameter(
                "jump intensities must be positive and finite".into(),
            ));
        }
        check_indicator(&spec.indicator)?;
        let cost = CostFunction::new(spec.cost.clone())?;
        let beta: Vec<f64> = spec.g.iter().map(|g| spec.r - g).collect();

        let mut params = Self {
            generator,
            r: spec.r,
            sigma: spec.sigma,
            g: spec.g.clone(),
            beta,
            indicator: spec.indicator.clone(),
            jumps: spec.jumps.clone(),
            jump_intensity: spec.jump_intensity.clone(),
            rho: f64::NAN,
            cost,
            alpha_bound: spec.alpha_bound,
            two_regime: None,
        };

        params.rho = match spec.rho {
            RhoSpec::Value(rho) => rho,
            RhoSpec::Auto {
                floor_factor,
                minimum,
            } => (rho_floor(&params)?.max(0.0) * floor_factor).max(minimum),
        };
        if spec.two_regime {
            let two = params.build_two_regime()?;
            let floor = two.rho_floor.max(0.0);
            if !(params.rho > floor) {
                return Err(Error::DiscountTooSmall {
                    rho: params.rho,
                    floor,
                });
            }
            params.two_regime = Some(two);
        }
        if !(params.rho > 0.0) || !params.rho.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rho = {} must be > 0",
                params.rho
            )));
        }
        Ok(params)
    }

    pub fn q(&self) -> usize {
        self.generator.q()
    }

    pub fn two_regime(&self) -> Result<&TwoRegime> {
        self.two_regime
            .as_ref()
            .ok_or_else(|| Error::NotTwoRegime("model was not validated in two-regime mode".into()))
    }

    /// Jump intensity restricted to regimes whose jump size at `q` is nonzero.
    pub fn visible_jump_rate(&self, q: f64, i: usize) -> f64 {
        if self.jumps.size(q, i) != 0.0 {
            self.jump_intensity[i]
        } else {
            0.0
        }
    }

    fn build_two_regime(&self) -> Result<TwoRegime> {
        if self.q() != 2 {
            return Err(Error::NotTwoRegime(format!("Q = {}", self.q())));
        }
        if !self.jumps.is_none() {
            return Err(Error::NotTwoRegime("indicator jumps must vanish".into()));
        }
        if !self.indicator.alpha_is_state_free() {
            return Err(Error::NotTwoRegime("alpha must not depend on q".into()));
        }
        let (g1, g2) = (self.g[0], self.g[1]);
        if !(g2 < g1) {
            return Err(Error::NotTwoRegime(format!(
                "need g(2) < g(1), got g1 = {g1}, g2 = {g2}"
            )));
        }
        let (lambda1, lambda2) = (self.generator.rate(0, 1), self.generator.rate(1, 0));
        if !(lambda1 > 0.0 && lambda2 > 0.0) {
            return Err(Error::NotTwoRegime("switching rates must be positive".into()));
        }
        let alpha1 = alpha_fn(self, 1.0, 0)?;
        let alpha2 = alpha_fn(self, 1.0, 1)?;
        Ok(TwoRegime {
            g1,
            g2,
            beta1: self.beta[0],
            beta2: self.beta[1],
            lambda1,
            lambda2,
            alpha1,
            alpha2,
            sigma: self.sigma,
            rho: self.rho,
            theta_sq: theta_sq(g1, g2, self.sigma, alpha1, alpha2),
            rho_floor: rho_floor(self)?,
            cost: self.cost.clone(),
        })
    }
}

fn check_indicator(ind: &IndicatorDynamics) -> Result<()> {
    let grid: Vec<f64> = match ind {
        IndicatorDynamics::Arithmetic { .. } => (-20..=20).map(|k| k as f64 * 0.5).collect(),
        IndicatorDynamics::Geometric { .. } => (1..=40).map(|k| k as f64 * 0.25).collect(),
    };
    for q in grid {
        let (s1, s2) = (ind.sigma1(q), ind.sigma2(q));
        if !(s2 > 0.0) {
            return Err(Error::DegenerateSigma2 { q, value: s2 });
        }
        if !(s1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma_1({q}) = {s1} must be positive"
            )));
        }
        if (0..ind.n_regimes()).any(|i| !ind.drift(q, i).is_finite()) {
            return Err(Error::InvalidParameter("indicator drift not finite".into()));
        }
    }
    Ok(())
}

/// `α(q,i) = σ₂(q)⁻¹ (b₁(q,i) − σ⁻¹ β_i σ₁(q))`.
pub fn alpha_fn(params: &ModelParams, q: f64, i: usize) -> Result<f64> {
    let s2 = params.indicator.sigma2(q);
    if !(s2 > 0.0) {
        return Err(Error::DegenerateSigma2 { q, value: s2 });
    }
    let b1 = params.indicator.drift(q, i);
    let s1 = params.indicator.sigma1(q);
    Ok((b1 - params.beta[i] * s1 / params.sigma) / s2)
}

/// `θ² = ½[(g₁−g₂)²/σ² + (α₁−α₂)²]`.
pub fn theta_sq(g1: f64, g2: f64, sigma: f64, alpha1: f64, alpha2: f64) -> f64 {
    0.5 * ((g1 - g2).powi(2) / (sigma * sigma) + (alpha1 - alpha2).powi(2))
}

/// The six-term discount floor `ρ_o` of the two-regime case study.
pub fn rho_floor_terms(
    beta2: f64,
    sigma: f64,
    gamma: f64,
    theta_sq: f64,
    lambda_sum: f64,
) -> [f64; 6] {
    let s2 = sigma * sigma;
    let gm = gamma.max(2.0);
    [
        beta2 + 0.5 * s2,
        gamma * beta2 + 0.5 * s2 * gamma * (gamma - 1.0),
        2.0 * beta2 + s2,
        24.0 * theta_sq - lambda_sum,
        4.0 * beta2 + 6.0 * s2,
        4.0 * beta2 * gm + 2.0 * s2 * gm * (4.0 * gm - 1.0),
    ]
}

/// `ρ_o` for a two-regime parameter set (not clamped at zero).
pub fn rho_floor(params: &ModelParams) -> Result<f64> {
    if params.q() != 2 {
        return Err(Error::NotTwoRegime(format!("Q = {}", params.q())));
    }
    let a1 = alpha_fn(params, 1.0, 0)?;
    let a2 = alpha_fn(params, 1.0, 1)?;
    let th = theta_sq(params.g[0], params.g[1], params.sigma, a1, a2);
    let lambda_sum = params.generator.rate(0, 1) + params.generator.rate(1, 0);
    let terms = rho_floor_terms(
        params.beta[1],
        params.sigma,
        params.cost.gamma,
        th,
        lambda_sum,
    );
    Ok(terms.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn spec_two_regime(rho: RhoSpec) -> ModelSpec {
        ModelSpec {
            generator: vec![vec![-0.5, 0.5], vec![0.5, -0.5]],
            r: 0.02,
            sigma: 0.1,
            g: vec![0.04, 0.0],
            indicator: IndicatorDynamics::Arithmetic {
                drift: vec![0.96, 0.0],
                vol_common: 0.1,
                vol_own: 1.0,
            },
            jumps: JumpLaw::None,
            jump_intensity: vec![1.0, 1.0],
            rho,
            cost: CostSpec::Quadratic { scale: 1.0 },
            two_regime: true,
            alpha_bound: 50.0,
        }
    }

    #[test]
    fn benchmark_floor_terms() {
        let p = ModelParams::validate(&spec_two_regime(RhoSpec::Auto {
            floor_factor: 1.1,
            minimum: 0.5,
        }))
        .unwrap();
        let two = p.two_regime().unwrap();
        assert!((two.alpha1 - two.alpha2 - 1.0).abs() < 1e-12);
        assert!((two.theta_sq - 0.58).abs() < 1e-12);
        // Largest term is 24θ² − (λ₁+λ₂) = 12.92.
        assert!((two.rho_floor - 12.92).abs() < 1e-12);
        assert!((p.rho - 14.212).abs() < 1e-12);
    }

    #[test]
    fn floor_terms_evaluated_literally() {
        // β₂=0, σ=1, γ=2, θ=0, λ₁+λ₂=1.
        let t = rho_floor_terms(0.0, 1.0, 2.0, 0.0, 1.0);
        assert_eq!(t, [0.5, 1.0, 1.0, -1.0, 6.0, 28.0]);
    }

    #[test]
    fn all_negative_terms_clamp_to_zero() {
        let t = rho_floor_terms(-10.0, 0.01, 2.0, 0.0, 100.0);
        let floor = t.into_iter().fold(f64::NEG_INFINITY, f64::max);
        assert!(floor < 0.0);
        assert_eq!(floor.max(0.0), 0.0);
    }

    #[test]
    fn equal_growth_and_alpha_leave_minus_lambda_sum() {
        let th = theta_sq(0.03, 0.03, 0.2, 0.4, 0.4);
        assert_eq!(th, 0.0);
        assert_eq!(rho_floor_terms(0.01, 0.2, 2.0, th, 1.7)[3], -1.7);
    }

    #[test]
    fn zero_discount_rejected() {
        let err = ModelParams::validate(&spec_two_regime(RhoSpec::Value(0.0))).unwrap_err();
        assert!(matches!(err, Error::DiscountTooSmall { .. }));
        let err = ModelParams::validate(&spec_two_regime(RhoSpec::Value(1.0))).unwrap_err();
        assert!(matches!(err, Error::DiscountTooSmall { .. }));
    }

    #[test]
    fn non_conservative_generator_rejected() {
        let mut s = spec_two_regime(RhoSpec::Value(20.0));
        s.generator = vec![vec![-0.5, 0.6], vec![0.5, -0.5]];
        assert!(matches!(
            ModelParams::validate(&s).unwrap_err(),
            Error::NonConservativeGenerator { .. }
        ));
    }

    #[test]
    fn alpha_cancellation_and_substitution() {
        let mut s = spec_two_regime(RhoSpec::Value(20.0));
        s.two_regime = false;
        // b₁ = σ⁻¹ β_i σ₁ gives α = 0.
        s.indicator = IndicatorDynamics::Arithmetic {
            drift: vec![-0.02 * 0.3 / 0.1, 0.02 * 0.3 / 0.1],
            vol_common: 0.3,
            vol_own: 2.0,
        };
        let p = ModelParams::validate(&s).unwrap();
        assert!(alpha_fn(&p, 0.7, 0).unwrap().abs() < 1e-15);
        assert!(alpha_fn(&p, -3.0, 1).unwrap().abs() < 1e-15);

        // σ₂ = 1, negligible σ₁, b₁(q,i) = i (1-based) gives α ≈ i.
        s.indicator = IndicatorDynamics::Arithmetic {
            drift: vec![1.0, 2.0],
            vol_common: 1e-300,
            vol_own: 1.0,
        };
        let p = ModelParams::validate(&s).unwrap();
        assert_eq!(alpha_fn(&p, 0.0, 0).unwrap(), 1.0);
        assert_eq!(alpha_fn(&p, 0.0, 1).unwrap(), 2.0);
    }

    #[test]
    fn geometric_alpha_is_state_free() {
        let mut s = spec_two_regime(RhoSpec::Value(20.0));
        s.two_regime = false;
        s.indicator = IndicatorDynamics::Geometric {
            drift: vec![0.3, -0.1],
            vol_common: 0.2,
            vol_own: 0.5,
        };
        let p = ModelParams::validate(&s).unwrap();
        for &q in &[0.5, 1.0, 4.0] {
            let expect = (0.3 - p.beta[0] * 0.2 / 0.1) / 0.5;
            assert!((alpha_fn(&p, q, 0).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn growth_ordering_enforced() {
        let mut s = spec_two_regime(RhoSpec::Value(20.0));
        s.g = vec![0.0, 0.04];
        assert!(matches!(
            ModelParams::validate(&s).unwrap_err(),
            Error::NotTwoRegime(_)
        ));
    }
}
