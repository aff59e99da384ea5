use serde::{Deserialize, Serialize};

/// Coefficients `b₁(q,i)`, `σ₁(q)`, `σ₂(q)` of the macroeconomic indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndicatorDynamics {
    /// `dη = b(i) dt + s₁ dW + s₂ dB`.
    Arithmetic {
        drift: Vec<f64>,
        vol_common: f64,
        vol_own: f64,
    },
    /// `dη = b(i) η dt + s₁ η dW + s₂ η dB`.
    Geometric {
        drift: Vec<f64>,
        vol_common: f64,
        vol_own: f64,
    },
}

impl IndicatorDynamics {
    pub fn drift(&self, q: f64, i: usize) -> f64 {
        match self {
            Self::Arithmetic { drift, .. } => drift[i],
            Self::Geometric { drift, .. } => drift[i] * q,
        }
    }

    pub fn sigma1(&self, q: f64) -> f64 {
        match self {
            Self::Arithmetic { vol_common, .. } => *vol_common,
            Self::Geometric { vol_common, .. } => vol_common * q,
        }
    }

    pub fn sigma2(&self, q: f64) -> f64 {
        match self {
            Self::Arithmetic { vol_own, .. } => *vol_own,
            Self::Geometric { vol_own, .. } => vol_own * q,
        }
    }

    pub fn n_regimes(&self) -> usize {
        match self {
            Self::Arithmetic { drift, .. } | Self::Geometric { drift, .. } => drift.len(),
        }
    }

    /// True when `α(q,i)` does not depend on `q` (both catalogue entries qualify).
    pub fn alpha_is_state_free(&self) -> bool {
        true
    }
}

/// Jump sizes `c(q,i)` of the indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpLaw {
    None,
    /// `c(q,i) ≡ size`.
    Constant { size: f64 },
    /// `c(q,i) = sizes[i]`.
    PerRegime { sizes: Vec<f64> },
    /// `c(q,i) = factors[i] · q`.
    Proportional { factors: Vec<f64> },
}

impl JumpLaw {
    pub fn size(&self, q: f64, i: usize) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Constant { size } => *size,
            Self::PerRegime { sizes } => sizes[i],
            Self::Proportional { factors } => factors[i] * q,
        }
    }

    pub fn is_none(&self) -> bool {
        match self {
            Self::None => true,
            Self::Constant { size } => *size == 0.0,
            Self::PerRegime { sizes } => sizes.iter().all(|&c| c == 0.0),
            Self::Proportional { factors } => factors.iter().all(|&c| c == 0.0),
        }
    }

    pub fn n_regimes(&self) -> Option<usize> {
        match self {
            Self::None | Self::Constant { .. } => None,
            Self::PerRegime { sizes } => Some(sizes.len()),
            Self::Proportional { factors } => Some(factors.len()),
        }
    }
}
