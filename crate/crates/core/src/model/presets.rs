use crate::model::{CostSpec, IndicatorDynamics, JumpLaw, ModelSpec, RhoSpec};

/// Two-regime benchmark: `r = 0.02`, `g = (0.04, 0)`, `σ = 0.1`,
/// `λ₁ = λ₂ = 0.5`, `α₁ − α₂ = 1`, `h(x) = ½x²`, `ρ = max(1.1 ρ_o⁺, 0.5)`.
pub fn benchmark_spec() -> ModelSpec {
    ModelSpec {
        generator: vec![vec![-0.5, 0.5], vec![0.5, -0.5]],
        r: 0.02,
        sigma: 0.1,
        g: vec![0.04, 0.0],
        // α = (b₁ − σ₁β/σ)/σ₂ = (0.98, −0.02).
        indicator: IndicatorDynamics::Arithmetic {
            drift: vec![0.96, 0.0],
            vol_common: 0.1,
            vol_own: 1.0,
        },
        jumps: JumpLaw::None,
        jump_intensity: vec![1.0, 1.0],
        rho: RhoSpec::Auto {
            floor_factor: 1.1,
            minimum: 0.5,
        },
        cost: CostSpec::Quadratic { scale: 1.0 },
        two_regime: true,
        alpha_bound: 50.0,
    }
}
