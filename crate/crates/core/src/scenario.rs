//! Stage orchestration: simulate → filter → solve-stopping → solve-control
//! → evaluate, with artifacts and a run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{FilterChoice, ScenarioConfig};
use crate::control::{
    compare_policies, hjb_residual, standard_policy_set, truncation_horizon,
    value_consistency_check, value_from_stopping, ConsistencyRow, ControlValueSurface,
    HjbReport, McSettings, PolicyRow,
};
use crate::error::Result;
use crate::filter::{run_filter, FilterMode, FilterPath};
use crate::io;
use crate::model::{
    simulate_paths, InitialRegime, ModelParams, Observations, PathSetup, SamplePath, TwoRegime,
};
use crate::par::Execution;
use crate::rng::derive_seed;
use crate::stopping::{
    build_grid, extract_boundary, one_dim_bounds, smooth_fit_report, solve_variational_inequality,
    FreeBoundary, GridSpec, OneDimBounds, PsorConfig, SmoothFitReport, SolveStats, ValueSurface,
};

/// Seed tags keeping the stages' randomness apart.
pub(crate) mod tags {
    pub const SIMULATE: u64 = 1;
    pub const EVALUATE: u64 = 2;
    pub const PROJECTION: u64 = 3;
    pub const PARTICLE: u64 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Simulate,
    Filter,
    SolveStopping,
    SolveControl,
    Evaluate,
    Validate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Filter => "filter",
            Self::SolveStopping => "solve-stopping",
            Self::SolveControl => "solve-control",
            Self::Evaluate => "evaluate",
            Self::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Run record written next to the artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub parallel: bool,
    pub timings: Vec<StageTiming>,
    pub artifacts: Vec<String>,
}

/// Hex SHA-256 of the canonical JSON form of a configuration.
pub fn config_hash(config: &ScenarioConfig) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Output of the stopping stage.
#[derive(Debug, Clone)]
pub struct StoppingSolution {
    pub bounds: OneDimBounds,
    pub surface: ValueSurface,
    pub boundary: FreeBoundary,
}

pub fn solve_stopping(
    two: &TwoRegime,
    grid: &GridSpec,
    psor: &PsorConfig,
    exec: Execution,
) -> Result<StoppingSolution> {
    let bounds = one_dim_bounds(two)?;
    let g = build_grid(two, grid, bounds.x_star_lower, bounds.x_star_upper)?;
    let surface = solve_variational_inequality(two, &g, psor, exec)?;
    let boundary = extract_boundary(two, &surface, bounds)?;
    Ok(StoppingSolution {
        bounds,
        surface,
        boundary,
    })
}

/// Monte Carlo settings for evaluation; the horizon defaults to the
/// truncation rule at the largest evaluation point.
pub fn mc_settings(config: &ScenarioConfig, two: &TwoRegime, seed: u64) -> Result<McSettings> {
    let horizon = match config.mc.horizon {
        Some(h) => h,
        None => {
            let x_max = config.mc.points.iter().map(|p| p.0).fold(1.0, f64::max);
            truncation_horizon(two, x_max, config.mc.truncation_tol)?
        }
    };
    Ok(McSettings {
        horizon,
        dt: config.mc.dt,
        n_paths: config.mc.n_paths,
        seed: derive_seed(seed, tags::EVALUATE),
    })
}

pub fn filter_mode(choice: FilterChoice) -> FilterMode {
    match choice {
        FilterChoice::General => FilterMode::General,
        FilterChoice::TwoRegime => FilterMode::TwoRegime,
    }
}

#[derive(Debug, Serialize)]
struct StoppingReport<'a> {
    bounds: &'a OneDimBounds,
    stats: &'a SolveStats,
    nx: usize,
    ny: usize,
    smooth_fit: SmoothFitSummary,
}

#[derive(Debug, Serialize)]
struct SmoothFitSummary {
    h_u: f64,
    h_y: f64,
    max_vx_error: f64,
    max_vy: f64,
}

impl From<&SmoothFitReport> for SmoothFitSummary {
    fn from(r: &SmoothFitReport) -> Self {
        Self {
            h_u: r.h_u,
            h_y: r.h_y,
            max_vx_error: r.max_vx_error,
            max_vy: r.max_vy,
        }
    }
}

/// Runs `stage` and everything it depends on, writing artifacts under
/// `out`. `observations` replaces simulated data in the filter stage.
pub struct Runner<'a> {
    pub config: &'a ScenarioConfig,
    pub out: PathBuf,
    pub observations: Option<PathBuf>,
    params: ModelParams,
    timings: Vec<StageTiming>,
    artifacts: Vec<String>,
}

impl<'a> Runner<'a> {
    pub fn new(config: &'a ScenarioConfig, out: &Path, observations: Option<PathBuf>) -> Result<Self> {
        let params = config.check()?;
        Ok(Self {
            config,
            out: out.to_path_buf(),
            observations,
            params,
            timings: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn exec(&self) -> Execution {
        self.config.execution()
    }

    fn timed<T>(&mut self, stage: Stage, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self)?;
        self.timings.push(StageTiming {
            stage: stage.name().to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    fn record(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.out).unwrap_or(path);
        self.artifacts.push(rel.display().to_string());
    }

    pub fn simulate(&mut self) -> Result<Vec<SamplePath>> {
        self.timed(Stage::Simulate, |r| {
            let s = &r.config.simulate;
            let setup = PathSetup {
                init: InitialRegime::Distribution(s.initial_law.clone()),
                x0: s.x0,
                eta0: s.eta0,
                horizon: s.horizon,
                dt: s.dt,
            };
            let seed = derive_seed(r.config.seed, tags::SIMULATE);
            let paths = simulate_paths(&r.params, &setup, s.n_paths, seed, r.exec())?;
            if r.config.outputs.paths {
                for (k, p) in paths.iter().enumerate() {
                    let file = r.out.join("paths").join(format!("path_{k:04}.csv"));
                    io::write_path_csv(&file, p)?;
                    r.record(&file);
                }
            }
            Ok(paths)
        })
    }

    pub fn filter(&mut self) -> Result<Vec<FilterPath>> {
        let inputs: Vec<(String, Observations)> = match self.observations.clone() {
            Some(file) => vec![("observed".to_string(), io::read_observations_csv(&file)?)],
            None => self
                .simulate()?
                .iter()
                .enumerate()
                .map(|(k, p)| (format!("{k:04}"), p.observations()))
                .collect(),
        };
        self.timed(Stage::Filter, |r| {
            let mode = filter_mode(r.config.filter.mode);
            let y0 = r.config.simulate.initial_law.clone();
            let mut out = Vec::with_capacity(inputs.len());
            for (name, obs) in &inputs {
                let f = run_filter(&r.params, obs, &y0, mode)?;
                if r.config.outputs.filter {
                    let file = r.out.join("filter").join(format!("filter_{name}.csv"));
                    io::write_filter_csv(&file, &f)?;
                    r.record(&file);
                }
                out.push(f);
            }
            Ok(out)
        })
    }

    pub fn solve_stopping(&mut self) -> Result<StoppingSolution> {
        self.timed(Stage::SolveStopping, |r| {
            let two = r.params.two_regime()?.clone();
            let sol = solve_stopping(&two, &r.config.grid, &r.config.psor, r.exec())?;
            if r.config.outputs.surface {
                let file = r.out.join("surface.csv");
                io::write_surface_csv(&file, &sol.surface)?;
                r.record(&file);
            }
            if r.config.outputs.boundary {
                let file = r.out.join("boundary.csv");
                io::write_boundary_csv(&file, &sol.boundary)?;
                r.record(&file);
            }
            let fit = smooth_fit_report(&sol.surface, &sol.boundary);
            let report = StoppingReport {
                bounds: &sol.bounds,
                stats: &sol.surface.stats,
                nx: sol.surface.grid.nx(),
                ny: sol.surface.grid.ny(),
                smooth_fit: (&fit).into(),
            };
            let file = r.out.join("stopping_report.json");
            io::write_json(&file, &report)?;
            r.record(&file);
            Ok(sol)
        })
    }

    pub fn solve_control(&mut self) -> Result<(StoppingSolution, ControlValueSurface, HjbReport)> {
        let sol = self.solve_stopping()?;
        self.timed(Stage::SolveControl, |r| {
            let two = r.params.two_regime()?.clone();
            let value = value_from_stopping(&sol.surface);
            let hjb = hjb_residual(&two, &sol.surface, &sol.boundary, &value)?;
            if r.config.outputs.control_surface {
                let file = r.out.join("control_surface.csv");
                io::write_control_csv(&file, &value)?;
                r.record(&file);
            }
            let file = r.out.join("control_report.json");
            io::write_json(&file, &hjb)?;
            r.record(&file);
            Ok((sol, value, hjb))
        })
    }

    pub fn evaluate(&mut self) -> Result<(Vec<ConsistencyRow>, Vec<PolicyRow>)> {
        let (sol, value, _) = self.solve_control()?;
        self.timed(Stage::Evaluate, |r| {
            let two = r.params.two_regime()?.clone();
            let mc = mc_settings(r.config, &two, r.config.seed)?;
            let points = &r.config.mc.points;
            let rows = value_consistency_check(
                &two,
                &value,
                &sol.boundary,
                points,
                &mc,
                r.config.mc.rel_tol,
                r.exec(),
            )?;
            let policies = standard_policy_set(&sol.boundary);
            let table = compare_policies(&two, &policies, &sol.boundary, points, &mc, r.exec())?;
            if r.config.outputs.consistency {
                let file = r.out.join("consistency.csv");
                io::write_consistency_csv(&file, &rows)?;
                r.record(&file);
            }
            if r.config.outputs.policy {
                let file = r.out.join("policy.csv");
                io::write_policy_csv(&file, &table)?;
                r.record(&file);
            }
            Ok((rows, table))
        })
    }

    /// Runs `stage` with its prerequisites.
    pub fn run(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Simulate => self.simulate().map(drop),
            Stage::Filter => self.filter().map(drop),
            Stage::SolveStopping => self.solve_stopping().map(drop),
            Stage::SolveControl => self.solve_control().map(drop),
            Stage::Evaluate => self.evaluate().map(drop),
            Stage::Validate => Ok(()),
        }
    }

    pub fn push_timing(&mut self, stage: Stage, seconds: f64) {
        self.timings.push(StageTiming {
            stage: stage.name().to_string(),
            seconds,
        });
    }

    pub fn push_timing_label(&mut self, label: &str, seconds: f64) {
        self.timings.push(StageTiming {
            stage: label.to_string(),
            seconds,
        });
    }

    pub fn push_artifact(&mut self, path: &Path) {
        self.record(path);
    }

    /// Writes `manifest.json` and returns it.
    pub fn finish(self, command: Stage) -> Result<Manifest> {
        let manifest = Manifest {
            command: command.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_hash(self.config),
            seed: self.config.seed,
            parallel: self.config.parallel,
            timings: self.timings,
            artifacts: self.artifacts,
        };
        io::write_json(&self.out.join("manifest.json"), &manifest)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_content() {
        let a = ScenarioConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn simulate_stage_writes_paths() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ScenarioConfig::default();
        c.simulate.n_paths = 2;
        c.simulate.horizon = 0.05;
        let mut r = Runner::new(&c, dir.path(), None).unwrap();
        r.run(Stage::Simulate).unwrap();
        let m = r.finish(Stage::Simulate).unwrap();
        assert_eq!(m.artifacts, vec!["paths/path_0000.csv", "paths/path_0001.csv"]);
        assert!(dir.path().join("manifest.json").exists());
    }
}
