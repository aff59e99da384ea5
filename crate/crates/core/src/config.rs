//! Scenario configuration: one JSON document for every stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{presets::benchmark_spec, ModelParams, ModelSpec};
use crate::par::Execution;
use crate::stopping::{GridSpec, PsorConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub x0: f64,
    pub eta0: f64,
    /// Law of the initial regime; also the filter's prior.
    pub initial_law: Vec<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n_paths: 4,
            horizon: 2.0,
            dt: 1e-3,
            x0: 1.0,
            eta0: 0.0,
            initial_law: vec![0.5, 0.5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterChoice {
    General,
    TwoRegime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub mode: FilterChoice,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            mode: FilterChoice::General,
        }
    }
}

/// Monte Carlo settings for policy evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    /// Fixed horizon; when absent it is chosen from `truncation_tol` at the
    /// largest evaluation point.
    pub horizon: Option<f64>,
    pub truncation_tol: f64,
    /// Interior `(x, y)` evaluation points.
    pub points: Vec<(f64, f64)>,
    /// Relative slack in the value identity check.
    pub rel_tol: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            dt: 1e-3,
            horizon: None,
            truncation_tol: 1e-2,
            points: vec![(4.0, 0.25), (8.0, 0.5), (12.0, 0.75), (14.0, 0.5), (18.0, 0.5)],
            rel_tol: 0.05,
        }
    }
}

/// Sizes and tolerances of the validation suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub projection_paths: usize,
    pub projection_times: Vec<f64>,
    pub projection_y0: f64,
    pub particle_paths: usize,
    pub particles: usize,
    pub particle_horizon: f64,
    pub particle_tol: f64,
    pub jump_tol: f64,
    pub bounds_rel_tol: f64,
    /// Resolution ladder for smooth fit and HJB refinement.
    pub refinements: Vec<usize>,
    /// Ratio window for smooth-fit errors per halving.
    pub smooth_fit_ratio: (f64, f64),
    pub jump_decrease: f64,
    pub hjb_tol: f64,
    pub vyy_factor: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            projection_paths: 20_000,
            projection_times: vec![0.5, 1.0, 2.0],
            projection_y0: 0.8,
            particle_paths: 20,
            particles: 100_000,
            particle_horizon: 1.0,
            particle_tol: 0.02,
            jump_tol: 1e-14,
            bounds_rel_tol: 1e-4,
            refinements: vec![200, 400, 800],
            smooth_fit_ratio: (0.3, 0.7),
            jump_decrease: 1.5,
            hjb_tol: 1e-2,
            vyy_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub paths: bool,
    pub filter: bool,
    pub surface: bool,
    pub boundary: bool,
    pub control_surface: bool,
    pub policy: bool,
    pub consistency: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            paths: true,
            filter: true,
            surface: true,
            boundary: true,
            control_surface: true,
            policy: true,
            consistency: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSpec,
    pub seed: u64,
    pub parallel: bool,
    pub simulate: SimulateConfig,
    pub filter: FilterConfig,
    pub grid: GridSpec,
    pub psor: PsorConfig,
    pub mc: McConfig,
    pub validation: ValidationConfig,
    pub outputs: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            model: benchmark_spec(),
            seed: 20240601,
            parallel: true,
            simulate: SimulateConfig::default(),
            filter: FilterConfig::default(),
            grid: GridSpec::default(),
            psor: PsorConfig::default(),
            mc: McConfig::default(),
            validation: ValidationConfig::default(),
            outputs: OutputConfig::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    /// Validates the model and every tolerance.
    pub fn check(&self) -> Result<ModelParams> {
        let params = ModelParams::validate(&self.model)?;
        let s = &self.simulate;
        positive("simulate.horizon", s.horizon)?;
        positive("simulate.dt", s.dt)?;
        positive("simulate.x0", s.x0)?;
        if s.initial_law.len() != params.q()
            || s.initial_law.iter().any(|p| !(*p >= 0.0))
            || (s.initial_law.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!(
                "simulate.initial_law must be a probability vector of length {}",
                params.q()
            )));
        }
        positive("psor.omega", self.psor.omega)?;
        positive("psor.tol_psor", self.psor.tol_psor)?;
        positive("psor.tol_comp", self.psor.tol_comp)?;
        positive("mc.dt", self.mc.dt)?;
        positive("mc.truncation_tol", self.mc.truncation_tol)?;
        positive("mc.rel_tol", self.mc.rel_tol)?;
        if let Some(h) = self.mc.horizon {
            positive("mc.horizon", h)?;
        }
        let v = &self.validation;
        for (name, x) in [
            ("validation.particle_tol", v.particle_tol),
            ("validation.jump_tol", v.jump_tol),
            ("validation.bounds_rel_tol", v.bounds_rel_tol),
            ("validation.hjb_tol", v.hjb_tol),
            ("validation.vyy_factor", v.vyy_factor),
            ("validation.particle_horizon", v.particle_horizon),
        ] {
            positive(name, x)?;
        }
        if v.refinements.len() < 3 {
            return Err(Error::Config(
                "validation.refinements needs three resolutions".into(),
            ));
        }
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_the_benchmark() {
        let c = ScenarioConfig::from_json("{}").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        let params = c.check().unwrap();
        assert!(params.two_regime.is_some());
    }

    #[test]
    fn round_trip() {
        let c = ScenarioConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_and_bad_tolerances_are_rejected() {
        assert!(ScenarioConfig::from_json(r#"{"grdi": {}}"#).is_err());
        let mut c = ScenarioConfig::default();
        c.psor.tol_comp = 0.0;
        assert!(matches!(c.check(), Err(Error::Config(_))));
    }

    #[test]
    fn low_discount_is_reported() {
        let mut c = ScenarioConfig::default();
        c.model.rho = crate::model::RhoSpec::Value(0.01);
        assert!(matches!(c.check(), Err(Error::DiscountTooSmall { .. })));
    }
}
