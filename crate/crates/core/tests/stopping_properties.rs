use std::sync::OnceLock;

use debt_reduction::model::{presets::benchmark_spec, ModelParams, TwoRegime};
use debt_reduction::scenario::{solve_stopping, StoppingSolution};
use debt_reduction::stopping::{
    complementarity_field, layer_distance, positive_root, quadratic_threshold, zeta_lower,
    GridSpec, PsorConfig, Region,
};
use debt_reduction::{Error, Execution};
use proptest::prelude::*;

fn two() -> TwoRegime {
    ModelParams::validate(&benchmark_spec()).unwrap().two_regime().unwrap().clone()
}

fn coarse() -> GridSpec {
    GridSpec { nx: 100, ny: 100, ..Default::default() }
}

fn solution() -> &'static StoppingSolution {
    static SOL: OnceLock<StoppingSolution> = OnceLock::new();
    SOL.get_or_init(|| solve_stopping(&two(), &coarse(), &PsorConfig::default(), Execution::Parallel).unwrap())
}

proptest! {
    #[test]
    fn threshold_rises_with_the_discount(b in -0.1f64..0.05, sigma in 0.1f64..0.5, rho in 0.5f64..2.0) {
        let lo = quadratic_threshold(1.0, b, sigma, rho).unwrap();
        let hi = quadratic_threshold(1.0, b, sigma, rho + 0.1).unwrap();
        prop_assert!(hi > lo);
        let g = positive_root(b, sigma, rho);
        let resid = 0.5 * sigma * sigma * g * (g - 1.0) + b * g - rho;
        prop_assert!(resid.abs() < 1e-10 * (1.0 + rho));
    }

    #[test]
    fn layer_distance_grows_with_the_gap(gap in 1e-6f64..1e-2, extra in 1e-6f64..1e-2) {
        let s1 = layer_distance(gap, -0.03, 0.25, 14.212, 1.0).unwrap();
        let s2 = layer_distance(gap + extra, -0.03, 0.25, 14.212, 1.0).unwrap();
        prop_assert!(s2 > s1 && s1 > 0.0);
    }

    #[test]
    fn zeta_is_monotone_in_belief(y in 0.0f64..0.99, dy in 1e-3f64..1e-2) {
        let t = two();
        prop_assert!(zeta_lower(&t, (y + dy).min(1.0)) >= zeta_lower(&t, y));
    }
}

#[test]
fn value_lies_between_zero_and_x() {
    let s = &solution().surface;
    let g = &s.grid;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let v = s.at(i, j);
            assert!(v >= -1e-12 && v <= g.x[i] * (1.0 + 1e-12), "v({i},{j}) = {v}");
        }
    }
}

#[test]
fn stopped_nodes_hold_the_obstacle() {
    let s = &solution().surface;
    let g = &s.grid;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            if s.region_at(i, j) == Region::Stop {
                assert!((s.at(i, j) - g.x[i]).abs() <= 1e-9 * g.x[i]);
            }
        }
    }
}

#[test]
fn complementarity_holds_on_the_coarse_grid() {
    let s = &solution().surface;
    let g = &s.grid;
    let field = complementarity_field(&two(), g, &s.v);
    // Edge nodes carry NaN and are fixed by the boundary conditions.
    let worst = field
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.is_nan())
        .map(|(k, r)| r.abs() / (1.0 + g.x[k % g.nx()]))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn boundary_is_monotone_and_sandwiched() {
    let sol = solution();
    let b = &sol.boundary;
    for w in b.d_raw.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-9));
    }
    for &d in &b.d {
        assert!(d >= sol.bounds.x_star_lower && d <= sol.bounds.x_star_upper);
    }
    assert!(b.at(0.5) >= b.at(0.2));
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let seq = solve_stopping(&two(), &coarse(), &PsorConfig::default(), Execution::Sequential).unwrap();
    let par = solution();
    assert_eq!(seq.surface.stats.sweeps, par.surface.stats.sweeps);
    for (a, b) in seq.surface.v.iter().zip(&par.surface.v) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn coarse_grids_are_refused() {
    let g = GridSpec { nx: 50, ny: 100, ..Default::default() };
    assert!(matches!(
        solve_stopping(&two(), &g, &PsorConfig::default(), Execution::Sequential),
        Err(Error::ResolutionTooCoarse(50))
    ));
}

#[test]
fn sweep_budget_is_enforced() {
    let cfg = PsorConfig { max_iter: 5, ..Default::default() };
    let r = solve_stopping(&two(), &coarse(), &cfg, Execution::Sequential);
    assert!(matches!(r, Err(Error::NoConvergence { .. })), "{r:?}");
}
