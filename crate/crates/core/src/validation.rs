//! The acceptance suite behind `validate`.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::control::{
    batch_means, compare_policies, hjb_residual, policy_costs, standard_policy_set,
    value_consistency_check, value_from_stopping, vyy_discrepancy, ControlValueSurface, Policy,
};
use crate::error::Result;
use crate::filter::{ks_jump_update, particle_filter_oracle, run_filter, FilterState};
use crate::model::{
    presets::benchmark_spec, simulate_path, InitialRegime, JumpLaw, ModelParams, PathSetup,
    RhoSpec, TwoRegime,
};
use crate::par::{map_indexed, Execution};
use crate::rng::derive_seed;
use crate::scenario::{config_hash, filter_mode, mc_settings, solve_stopping, tags, StoppingSolution};
use crate::stopping::{
    complementarity_field, one_dim_bounds, one_dim_bounds_numeric, smooth_fit_report, GridSpec,
    OneDimSolver,
};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub values: BTreeMap<String, f64>,
}

impl CheckResult {
    fn new(id: u8, name: &str) -> Self {
        Self {
            id,
            name: name.to_string(),
            pass: true,
            detail: String::new(),
            values: BTreeMap::new(),
        }
    }

    fn value(&mut self, key: &str, v: f64) {
        self.values.insert(key.to_string(), v);
    }

    fn require(&mut self, ok: bool) {
        self.pass &= ok;
    }

    /// One status line, e.g. `[PASS]  4 complementarity  ...`.
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<24} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub config_sha256: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

struct Context<'a> {
    config: &'a ScenarioConfig,
    params: ModelParams,
    two: TwoRegime,
    exec: Execution,
}

impl Context<'_> {
    fn solve_at(&self, nx: usize, ny: usize) -> Result<StoppingSolution> {
        let spec = GridSpec {
            nx,
            ny,
            ..self.config.grid.clone()
        };
        solve_stopping(&self.two, &spec, &self.config.psor, self.exec)
    }
}

/// Runs every check in order. Errors are returned only for failures that
/// prevent a check from producing a measurement.
pub fn run_validation(config: &ScenarioConfig) -> Result<ValidationReport> {
    run_validation_timed(config).map(|(r, _)| r)
}

/// As [`run_validation`], also returning wall time per check in seconds.
/// Timings are kept out of the report so that reruns compare bitwise.
pub fn run_validation_timed(config: &ScenarioConfig) -> Result<(ValidationReport, Vec<(u8, f64)>)> {
    let params = config.check()?;
    let two = params.two_regime()?.clone();
    let ctx = Context {
        config,
        params,
        two,
        exec: config.execution(),
    };
    let mut checks = Vec::new();
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut push = |check: Result<CheckResult>| -> Result<()> {
        let c = check?;
        log::info!("{}", c.line());
        timings.push((c.id, clock.elapsed().as_secs_f64()));
        checks.push(c);
        clock = Instant::now();
        Ok(())
    };

    push(filter_projection(&ctx))?;
    push(particle_agreement(&ctx))?;
    push(jump_update(&ctx))?;
    let base = ctx.solve_at(config.grid.nx, config.grid.ny)?;
    push(complementarity(&ctx, &base))?;
    push(sandwich(&ctx, &base))?;
    push(monotonicity(&ctx, &base))?;
    let ladder = config
        .validation
        .refinements
        .iter()
        .map(|&n| {
            if n == config.grid.nx && n == config.grid.ny {
                Ok(base.clone())
            } else {
                ctx.solve_at(n, n)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    push(smooth_fit(&ctx, &ladder))?;
    let value = value_from_stopping(&base.surface);
    push(value_identity(&ctx, &base, &value))?;
    push(dominance(&ctx, &base))?;
    push(hjb(&ctx, &base, &value, &ladder[1]))?;
    push(determinism(&ctx, &base, &value))?;

    let all_pass = checks.iter().all(|c| c.pass);
    let report = ValidationReport {
        config_sha256: config_hash(config),
        seed: config.seed,
        checks,
        all_pass,
    };
    Ok((report, timings))
}

fn filter_projection(ctx: &Context) -> Result<CheckResult> {
    let v = &ctx.config.validation;
    let mut c = CheckResult::new(1, "filter projection");
    let y0 = vec![v.projection_y0, 1.0 - v.projection_y0];
    let dt = ctx.config.simulate.dt;
    let horizon = v.projection_times.iter().cloned().fold(0.0, f64::max);
    let setup = PathSetup {
        init: InitialRegime::Distribution(y0.clone()),
        x0: ctx.config.simulate.x0,
        eta0: ctx.config.simulate.eta0,
        horizon,
        dt,
    };
    let rows: Vec<usize> = v.projection_times.iter().map(|t| (t / dt).round() as usize).collect();
    let seed = derive_seed(ctx.config.seed, tags::PROJECTION);
    let mode = filter_mode(ctx.config.filter.mode);
    let samples = map_indexed(ctx.exec, v.projection_paths, |k| -> Result<Vec<f64>> {
        let path = simulate_path(&ctx.params, &setup, seed, k as u64)?;
        let f = run_filter(&ctx.params, &path.observations(), &y0, mode)?;
        Ok(rows.iter().map(|&r| f.pi[r][0]).collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let n = samples.len() as f64;
    let mut parts = Vec::new();
    for (m, &t) in v.projection_times.iter().enumerate() {
        let mean = samples.iter().map(|s| s[m]).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s[m] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let exact = ctx.params.generator.marginal(&y0, t)[0];
        let z = (mean - exact).abs() / se;
        c.require(z <= 3.0);
        c.value(&format!("t{t}_mean"), mean);
        c.value(&format!("t{t}_exact"), exact);
        c.value(&format!("t{t}_z"), z);
        parts.push(format!("t={t}: |Δ|/se={z:.2}"));
    }
    c.detail = format!("{} paths, {} (≤ 3)", v.projection_paths, parts.join(", "));
    Ok(c)
}

fn particle_agreement(ctx: &Context) -> Result<CheckResult> {
    let v = &ctx.config.validation;
    let mut c = CheckResult::new(2, "filter vs particle");
    let y0 = ctx.config.simulate.initial_law.clone();
    let setup = PathSetup {
        init: InitialRegime::Distribution(y0.clone()),
        x0: ctx.config.simulate.x0,
        eta0: ctx.config.simulate.eta0,
        horizon: v.particle_horizon,
        dt: ctx.config.simulate.dt,
    };
    let seed = derive_seed(ctx.config.seed, tags::PARTICLE);
    let mode = filter_mode(ctx.config.filter.mode);
    let mut worst: f64 = 0.0;
    let mut total = 0.0;
    for k in 0..v.particle_paths {
        let path = simulate_path(&ctx.params, &setup, seed, k as u64)?;
        let obs = path.observations();
        let ks = run_filter(&ctx.params, &obs, &y0, mode)?;
        let pf = particle_filter_oracle(&ctx.params, &obs, &y0, v.particles, seed, k as u64, ctx.exec)?;
        let err = ks
            .pi
            .iter()
            .zip(&pf.pi)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
            .sum::<f64>()
            / ks.pi.len() as f64;
        worst = worst.max(err);
        total += err;
    }
    let mean = total / v.particle_paths.max(1) as f64;
    c.require(worst <= v.particle_tol);
    c.value("max_time_avg_error", worst);
    c.value("mean_time_avg_error", mean);
    c.detail = format!(
        "{} paths x {} particles, worst time-avg |Δπ| {worst:.4} (≤ {}), mean {mean:.4}",
        v.particle_paths, v.particles, v.particle_tol
    );
    Ok(c)
}

/// Two regimes, constant jump size and jump intensities `(2, 1)`.
fn jump_model() -> Result<ModelParams> {
    let mut spec = benchmark_spec();
    spec.jumps = JumpLaw::Constant { size: 0.3 };
    spec.jump_intensity = vec![2.0, 1.0];
    spec.two_regime = false;
    spec.rho = RhoSpec::Value(1.0);
    ModelParams::validate(&spec)
}

fn jump_update(ctx: &Context) -> Result<CheckResult> {
    let mut c = CheckResult::new(3, "jump update");
    let params = jump_model()?;
    let mut worst: f64 = 0.0;
    for k in 1..100 {
        let p = k as f64 / 100.0;
        let pre = FilterState::new(0.5, vec![p, 1.0 - p]);
        let post = ks_jump_update(&params, &pre, 0.1, 0.3)?;
        let expected = 2.0 * p / (2.0 * p + (1.0 - p));
        worst = worst.max((post.pi[0] - expected).abs());
    }
    let tol = ctx.config.validation.jump_tol;
    c.require(worst <= tol);
    c.value("max_error", worst);
    c.detail = format!("99 pre-jump laws, max |π⁺ − 2π⁻/(2π⁻+π⁻₂)| {worst:.1e} (≤ {tol:.0e})");
    Ok(c)
}

fn complementarity(ctx: &Context, base: &StoppingSolution) -> Result<CheckResult> {
    let mut c = CheckResult::new(4, "complementarity");
    let g = &base.surface.grid;
    let field = complementarity_field(&ctx.two, g, &base.surface.v);
    let worst = field
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.is_nan())
        .map(|(k, r)| r.abs() / (1.0 + g.x[k % g.nx()]))
        .fold(0.0, f64::max);
    let sweeps = base.surface.stats.sweeps;
    let tol = ctx.config.psor.tol_comp;
    c.require(worst <= tol && sweeps <= 100_000);
    c.value("max_scaled_residual", worst);
    c.value("sweeps", sweeps as f64);
    c.detail = format!(
        "{}x{}: {sweeps} sweeps (≤ 1e5), max residual/(1+x) {worst:.2e} (≤ {tol:.0e})",
        g.nx(),
        g.ny()
    );
    Ok(c)
}

fn sandwich(ctx: &Context, base: &StoppingSolution) -> Result<CheckResult> {
    let mut c = CheckResult::new(5, "boundary sandwich");
    let closed = one_dim_bounds(&ctx.two)?;
    let numeric = one_dim_bounds_numeric(&ctx.two, &OneDimSolver::default())?;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs();
    let rel_lower = rel(closed.x_star_lower, numeric.x_star_lower);
    let rel_upper = rel(closed.x_star_upper, numeric.x_star_upper);
    let tol = ctx.config.validation.bounds_rel_tol;
    c.require(rel_lower <= tol && rel_upper <= tol);
    let b = &base.boundary;
    let h_u = base.surface.grid.h_u;
    let mut violation: f64 = 0.0;
    for j in 0..b.y.len() {
        let d = b.d_raw[j];
        let lo = b.zeta[j].max(closed.x_star_lower) - h_u * d;
        let hi = closed.x_star_upper + h_u * d;
        violation = violation.max(lo - d).max(d - hi);
    }
    c.require(violation <= 0.0);
    c.value("x_star_lower", closed.x_star_lower);
    c.value("x_star_upper", closed.x_star_upper);
    c.value("rel_lower", rel_lower);
    c.value("rel_upper", rel_upper);
    c.value("max_violation", violation);
    c.detail = format!(
        "x* ∈ [{:.5}, {:.5}], 1D cross-check rel {:.1e}/{:.1e} (≤ {tol:.0e}), worst excess {:.2e}",
        closed.x_star_lower,
        closed.x_star_upper,
        rel_lower,
        rel_upper,
        violation.max(0.0)
    );
    Ok(c)
}

fn max_jump(d: &[f64]) -> (f64, bool) {
    let mut jump: f64 = 0.0;
    let mut monotone = true;
    for w in d.windows(2) {
        monotone &= w[1] >= w[0];
        jump = jump.max((w[1] - w[0]).abs());
    }
    (jump, monotone)
}

fn monotonicity(ctx: &Context, base: &StoppingSolution) -> Result<CheckResult> {
    let mut c = CheckResult::new(6, "boundary monotonicity");
    let (nx, ny) = (ctx.config.grid.nx, ctx.config.grid.ny);
    let fine = ctx.solve_at(nx, 2 * ny)?;
    let (j1, m1) = max_jump(&base.boundary.d_raw);
    let (j2, m2) = max_jump(&fine.boundary.d_raw);
    let ratio = j1 / j2;
    let need = ctx.config.validation.jump_decrease;
    c.require(m1 && m2 && ratio >= need);
    c.value("max_jump_coarse", j1);
    c.value("max_jump_fine", j2);
    c.value("ratio", ratio);
    c.detail = format!(
        "nondecreasing {}, max jump {j1:.2e} at {ny} rows → {j2:.2e} at {} rows, ratio {ratio:.2} (≥ {need})",
        m1 && m2,
        2 * ny
    );
    Ok(c)
}

fn smooth_fit(ctx: &Context, ladder: &[StoppingSolution]) -> Result<CheckResult> {
    let mut c = CheckResult::new(7, "smooth fit");
    let reports: Vec<_> = ladder
        .iter()
        .map(|s| smooth_fit_report(&s.surface, &s.boundary))
        .collect();
    let (lo, hi) = ctx.config.validation.smooth_fit_ratio;
    let mut parts = Vec::new();
    for (label, pick) in [
        ("vx", (|r: &crate::stopping::SmoothFitReport| r.max_vx_error) as fn(&_) -> f64),
        ("vy", |r: &crate::stopping::SmoothFitReport| r.max_vy),
    ] {
        let errs: Vec<f64> = reports.iter().map(pick).collect();
        let ratios: Vec<f64> = errs.windows(2).map(|w| w[1] / w[0]).collect();
        for (k, r) in reports.iter().enumerate() {
            c.value(&format!("{label}_err_{}", r.h_u), errs[k]);
        }
        for (k, r) in ratios.iter().enumerate() {
            c.value(&format!("{label}_ratio_{k}"), *r);
            c.require((lo..=hi).contains(r));
        }
        let e = errs.iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>().join("/");
        let q = ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join("/");
        parts.push(format!("{label} err {e} ratios {q}"));
    }
    let sizes = ladder
        .iter()
        .map(|s| s.surface.grid.nx().to_string())
        .collect::<Vec<_>>()
        .join("/");
    c.detail = format!("n={sizes}: {} (ratios in [{lo}, {hi}])", parts.join("; "));
    Ok(c)
}

fn value_identity(
    ctx: &Context,
    base: &StoppingSolution,
    value: &ControlValueSurface,
) -> Result<CheckResult> {
    let mut c = CheckResult::new(8, "value identity");
    let mc = mc_settings(ctx.config, &ctx.two, ctx.config.seed)?;
    let rows = value_consistency_check(
        &ctx.two,
        value,
        &base.boundary,
        &ctx.config.mc.points,
        &mc,
        ctx.config.mc.rel_tol,
        ctx.exec,
    )?;
    let mut worst: f64 = 0.0;
    for r in &rows {
        c.require(r.pass);
        let slack = 3.0 * r.ci_half + ctx.config.mc.rel_tol * r.v_pde;
        worst = worst.max((r.v_pde - r.v_mc).abs() / slack);
        c.value(&format!("V_pde({},{})", r.x, r.y), r.v_pde);
        c.value(&format!("V_mc({},{})", r.x, r.y), r.v_mc);
    }
    c.value("worst_fraction_of_slack", worst);
    c.detail = format!(
        "{} points, {} paths, horizon {:.3}: worst |V−MC| is {:.2} of 3·CI + {}·V",
        rows.len(),
        mc.n_paths,
        mc.horizon,
        worst,
        ctx.config.mc.rel_tol
    );
    Ok(c)
}

fn dominance(ctx: &Context, base: &StoppingSolution) -> Result<CheckResult> {
    let mut c = CheckResult::new(9, "policy dominance");
    let mc = mc_settings(ctx.config, &ctx.two, ctx.config.seed)?;
    let points = &ctx.config.mc.points;
    let policies: Vec<Policy> = standard_policy_set(&base.boundary)
        .into_iter()
        .filter(|p| *p != Policy::ImmediateFullReduction)
        .collect();
    let rows = compare_policies(&ctx.two, &policies, &base.boundary, points, &mc, ctx.exec)?;
    let mut worst_margin = f64::NEG_INFINITY;
    for &(x0, y0) in points {
        let at: Vec<_> = rows.iter().filter(|r| r.x0 == x0 && r.y0 == y0).collect();
        let reflect = at.iter().find(|r| r.policy == Policy::Reflect.label()).expect("reflect row");
        for other in at.iter().filter(|r| r.policy != reflect.policy) {
            // Positive margin: reflect is worse beyond the joint interval.
            let margin = (reflect.mean_cost - other.mean_cost) - (reflect.ci_half + other.ci_half);
            worst_margin = worst_margin.max(margin);
        }
    }
    c.require(worst_margin <= 0.0);
    let mut immediate_exact = true;
    let short = crate::control::McSettings {
        n_paths: 64,
        ..mc
    };
    for &(x0, y0) in points {
        let costs = policy_costs(&ctx.two, Policy::ImmediateFullReduction, None, x0, y0, &short, ctx.exec)?;
        immediate_exact &= costs.iter().all(|&k| k == x0) && batch_means(&costs).mean == x0;
    }
    c.require(immediate_exact);
    c.value("worst_margin", worst_margin);
    c.detail = format!(
        "{} alternatives at {} points: worst (reflect − other) − joint CI {worst_margin:.2e} (≤ 0); immediate reduction = x exactly {immediate_exact}",
        policies.len() - 1,
        points.len()
    );
    Ok(c)
}

fn hjb(
    ctx: &Context,
    base: &StoppingSolution,
    value: &ControlValueSurface,
    finer: &StoppingSolution,
) -> Result<CheckResult> {
    let mut c = CheckResult::new(10, "hjb residual");
    let base_hjb = hjb_residual(&ctx.two, &base.surface, &base.boundary, value)?;
    let fine_value = value_from_stopping(&finer.surface);
    let fine_hjb = hjb_residual(&ctx.two, &finer.surface, &finer.boundary, &fine_value)?;
    let tol = ctx.config.validation.hjb_tol;
    c.require(base_hjb.max_scaled <= tol && fine_hjb.max_scaled < base_hjb.max_scaled);
    let disc = vyy_discrepancy(&ctx.two, &base.surface, &base.boundary, value)?;
    let h_y = base.surface.grid.h_y;
    let vyy_tol = ctx.config.validation.vyy_factor * h_y;
    c.require(disc <= vyy_tol);
    c.value("max_scaled", base_hjb.max_scaled);
    c.value("max_scaled_fine", fine_hjb.max_scaled);
    c.value("vyy_discrepancy", disc);
    c.value("vyy_tol", vyy_tol);
    c.detail = format!(
        "sup/(1+x) {:.2e} at {}² (≤ {tol:.0e}) → {:.2e} at {}²; V_yy closed form vs FD {disc:.2e} (≤ {vyy_tol:.2e})",
        base_hjb.max_scaled,
        base.surface.grid.nx(),
        fine_hjb.max_scaled,
        finer.surface.grid.nx()
    );
    Ok(c)
}

/// Replays the solve and one Monte Carlo estimate on the sequential path
/// and compares bit patterns.
fn determinism(ctx: &Context, base: &StoppingSolution, value: &ControlValueSurface) -> Result<CheckResult> {
    let mut c = CheckResult::new(11, "determinism");
    let seq = solve_stopping(&ctx.two, &ctx.config.grid, &ctx.config.psor, Execution::Sequential)?;
    let same_surface = seq.surface.v.iter().zip(&base.surface.v).all(|(a, b)| a.to_bits() == b.to_bits())
        && seq.boundary.d.iter().zip(&base.boundary.d).all(|(a, b)| a.to_bits() == b.to_bits());
    let mc = crate::control::McSettings {
        n_paths: 1000,
        ..mc_settings(ctx.config, &ctx.two, ctx.config.seed)?
    };
    let pts = &ctx.config.mc.points[..1];
    let run = |exec| value_consistency_check(&ctx.two, value, &base.boundary, pts, &mc, 0.05, exec);
    let (a, b) = (run(ctx.exec)?, run(Execution::Sequential)?);
    let same_mc = a[0].v_mc.to_bits() == b[0].v_mc.to_bits() && a[0].ci_half.to_bits() == b[0].ci_half.to_bits();
    c.require(same_surface && same_mc);
    c.detail = format!("replayed surface identical {same_surface}, replayed Monte Carlo identical {same_mc}");
    Ok(c)
}
