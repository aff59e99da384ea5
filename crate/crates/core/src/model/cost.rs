use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named running-cost shapes available from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    /// `h(x) = ½ ϑ x²`.
    Quadratic { scale: f64 },
    /// `h(x) = s (x⁺)^p`, `p ≥ 2`.
    Power { scale: f64, exponent: f64 },
    /// `h(x) = a x + ½ b x²`.
    QuadraticLinear { linear: f64, quadratic: f64 },
}

/// Convex running cost `h` together with its growth-envelope constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    pub spec: CostSpec,
    pub gamma: f64,
    pub k_o: f64,
    pub k: f64,
    pub k1: f64,
    pub k2: f64,
}

impl CostFunction {
    pub fn new(spec: CostSpec) -> Result<Self> {
        let (gamma, k_o, k, k1, k2) = match spec {
            CostSpec::Quadratic { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::NonConvexCost(format!("quadratic scale {scale}")));
                }
                (2.0, 0.5 * scale, scale, scale, scale)
            }
            CostSpec::Power { scale, exponent } => {
                if !(scale > 0.0) || !(exponent >= 2.0) {
                    return Err(Error::NonConvexCost(format!(
                        "power cost needs scale > 0 and exponent >= 2, got {scale}, {exponent}"
                    )));
                }
                let p = exponent;
                (p, scale, 2.0 * scale, scale * p, scale * p * (p - 1.0))
            }
            CostSpec::QuadraticLinear { linear, quadratic } => {
                if !(linear >= 0.0) || !(quadratic > 0.0) {
                    return Err(Error::NonConvexCost(format!(
                        "need linear >= 0 and quadratic > 0, got {linear}, {quadratic}"
                    )));
                }
                let k = 0.5 * linear + quadratic;
                (2.0, 0.5 * quadratic, k, linear + quadratic, quadratic)
            }
        };
        let cost = Self {
            spec,
            gamma,
            k_o,
            k,
            k1,
            k2,
        };
        cost.check_on_grid()?;
        Ok(cost)
    }

    pub fn quadratic(scale: f64) -> Self {
        Self::new(CostSpec::Quadratic { scale }).expect("valid quadratic cost")
    }

    pub fn h(&self, x: f64) -> f64 {
        match self.spec {
            CostSpec::Quadratic { scale } => 0.5 * scale * x * x,
            CostSpec::Power { scale, exponent } => scale * x.max(0.0).powf(exponent),
            CostSpec::QuadraticLinear { linear, quadratic } => {
                linear * x + 0.5 * quadratic * x * x
            }
        }
    }

    pub fn h_prime(&self, x: f64) -> f64 {
        match self.spec {
            CostSpec::Quadratic { scale } => scale * x,
            CostSpec::Power { scale, exponent } => {
                scale * exponent * x.max(0.0).powf(exponent - 1.0)
            }
            CostSpec::QuadraticLinear { linear, quadratic } => linear + quadratic * x,
        }
    }

    pub fn h_second(&self, x: f64) -> f64 {
        match self.spec {
            CostSpec::Quadratic { scale } => scale,
            CostSpec::Power { scale, exponent } => {
                scale * exponent * (exponent - 1.0) * x.max(0.0).powf(exponent - 2.0)
            }
            CostSpec::QuadraticLinear { quadratic, .. } => quadratic,
        }
    }

    /// `(h')⁻¹(p)` on `[0, ∞)`; 0 when `p ≤ h'(0)`.
    pub fn inverse_derivative(&self, p: f64) -> f64 {
        match self.spec {
            CostSpec::Quadratic { scale } => (p / scale).max(0.0),
            CostSpec::QuadraticLinear { linear, quadratic } => {
                ((p - linear) / quadratic).max(0.0)
            }
            CostSpec::Power { .. } => self.inverse_derivative_bisect(p),
        }
    }

    /// Bisection inverse of the increasing map `h'` on `[0, ∞)`.
    pub fn inverse_derivative_bisect(&self, p: f64) -> f64 {
        if p <= self.h_prime(0.0) {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.h_prime(hi) < p {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while hi - lo > 1e-12 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.h_prime(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn check_on_grid(&self) -> Result<()> {
        if self.h(0.0) != 0.0 {
            return Err(Error::NonConvexCost("h(0) != 0".into()));
        }
        if !(self.gamma > 1.0 && self.k_o > 0.0 && self.k_o < self.k) {
            return Err(Error::NonConvexCost("envelope constants out of range".into()));
        }
        for k in 0..=120 {
            let x = 10f64.powf(-3.0 + 6.0 * k as f64 / 120.0);
            let (h, hp, hpp) = (self.h(x), self.h_prime(x), self.h_second(x));
            if !(hpp > 0.0) || hp < 0.0 {
                return Err(Error::NonConvexCost(format!("h'' or h' sign fails at x = {x}")));
            }
            let xg = x.powf(self.gamma);
            let slack = 1e-12 * (1.0 + xg);
            if self.k_o * xg - self.k > h + slack || h > self.k * (1.0 + xg) + slack {
                return Err(Error::NonConvexCost(format!("growth envelope fails at x = {x}")));
            }
            if hp > self.k1 * (1.0 + x.powf(self.gamma - 1.0)) + slack {
                return Err(Error::NonConvexCost(format!("h' envelope fails at x = {x}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_inverse_is_identity_scaled() {
        let c = CostFunction::quadratic(1.0);
        assert_eq!(c.inverse_derivative(3.5), 3.5);
        assert_eq!(c.h(2.0), 2.0);
    }

    #[test]
    fn bisection_inverse_residual() {
        let c = CostFunction::new(CostSpec::Power {
            scale: 0.3,
            exponent: 3.0,
        })
        .unwrap();
        for &p in &[0.01, 0.5, 14.2, 300.0] {
            let x = c.inverse_derivative(p);
            assert!((c.h_prime(x) - p).abs() < 1e-10 * p.max(1.0), "p={p}");
        }
    }

    #[test]
    fn rejects_concave_power() {
        let err = CostFunction::new(CostSpec::Power {
            scale: 1.0,
            exponent: 1.5,
        })
        .unwrap_err();
        assert!(matches!(err, Error::NonConvexCost(_)));
    }

    #[test]
    fn rejects_negative_quadratic() {
        assert!(CostFunction::new(CostSpec::Quadratic { scale: -1.0 }).is_err());
        assert!(CostFunction::new(CostSpec::QuadraticLinear {
            linear: 1.0,
            quadratic: 0.0
        })
        .is_err());
    }
}
