use debt_reduction::filter::{
    ks_jump_update, ks_step_general, ks_step_two_regime, project_to_simplex, run_filter,
    FilterMode, FilterState, Innovations, CLIP_EPS,
};
use debt_reduction::model::{
    presets::benchmark_spec, simulate_path, InitialRegime, JumpLaw, ModelParams, ModelSpec,
    PathSetup, RhoSpec,
};
use proptest::prelude::*;

fn benchmark() -> ModelParams {
    ModelParams::validate(&benchmark_spec()).unwrap()
}

fn three_regime() -> ModelParams {
    let mut spec: ModelSpec = benchmark_spec();
    spec.generator = vec![
        vec![-1.0, 0.6, 0.4],
        vec![0.3, -0.5, 0.2],
        vec![0.5, 0.5, -1.0],
    ];
    spec.g = vec![0.04, 0.01, -0.02];
    spec.indicator = debt_reduction::model::IndicatorDynamics::Arithmetic {
        drift: vec![0.5, 0.0, -0.5],
        vol_common: 0.1,
        vol_own: 0.8,
    };
    spec.jumps = JumpLaw::PerRegime { sizes: vec![0.2, -0.3, 0.2] };
    spec.jump_intensity = vec![1.0, 2.0, 0.5];
    spec.two_regime = false;
    spec.rho = RhoSpec::Value(1.0);
    ModelParams::validate(&spec).unwrap()
}

fn law(q: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, q).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

proptest! {
    #[test]
    fn general_step_stays_on_the_simplex(
        pi in law(3),
        di in -0.2f64..0.2,
        di1 in -0.2f64..0.2,
        dt in 1e-4f64..1e-2,
    ) {
        let p = three_regime();
        let next = ks_step_general(&p, &FilterState::new(0.0, pi), &Innovations { di, di1 }, 0.0, dt);
        prop_assert!((next.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(next.pi.iter().all(|&x| x >= CLIP_EPS * (1.0 - 1e-12)));
    }

    #[test]
    fn reduced_and_general_steps_agree(
        p1 in 0.01f64..0.99,
        di in -0.05f64..0.05,
        di1 in -0.05f64..0.05,
    ) {
        let p = benchmark();
        let s = FilterState::new(0.0, vec![p1, 1.0 - p1]);
        let inn = Innovations { di, di1 };
        let a = ks_step_general(&p, &s, &inn, 0.0, 1e-3);
        let b = ks_step_two_regime(&p, &s, &inn, 1e-3).unwrap();
        // Both clip at the same level, so agreement is to rounding.
        prop_assert!((a.pi[0] - b.pi[0]).abs() < 1e-13);
    }

    #[test]
    fn jump_update_is_bayes_on_intensities(pi in law(3)) {
        let p = three_regime();
        // Mark 0.2 is produced by regimes 1 and 3 with intensities 1 and 0.5.
        let post = ks_jump_update(&p, &FilterState::new(0.0, pi.clone()), 0.0, 0.2).unwrap();
        let z = pi[0] + 0.5 * pi[2];
        prop_assert!((post.pi[0] - pi[0] / z).abs() < 1e-14);
        prop_assert_eq!(post.pi[1], 0.0);
        prop_assert!((post.pi[2] - 0.5 * pi[2] / z).abs() < 1e-14);
    }

    #[test]
    fn projection_is_idempotent(raw in prop::collection::vec(-0.5f64..1.5, 2..6)) {
        let mut a = raw.clone();
        if a.iter().all(|&x| x <= 0.0) {
            a[0] = 1.0;
        }
        project_to_simplex(&mut a, CLIP_EPS);
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(a.iter().all(|&x| x >= CLIP_EPS * (1.0 - 1e-12)));
        let mut b = a.clone();
        project_to_simplex(&mut b, CLIP_EPS);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-15);
        }
    }
}

#[test]
fn filter_tracks_the_hidden_regime_with_jumps() {
    let p = three_regime();
    let setup = PathSetup {
        init: InitialRegime::Fixed(0),
        x0: 1.0,
        eta0: 0.0,
        horizon: 5.0,
        dt: 1e-3,
    };
    // Over many paths the filter puts more mass on the true regime than
    // the uninformed prior does.
    let (mut filtered, mut prior) = (0.0, 0.0);
    for k in 0..40 {
        let path = simulate_path(&p, &setup, 99, k).unwrap();
        let f = run_filter(&p, &path.observations(), &[1.0 / 3.0; 3], FilterMode::General).unwrap();
        assert_eq!(f.skipped_jumps, 0);
        for (row, z) in path.z.iter().enumerate().step_by(100) {
            filtered += f.pi[row][*z];
            prior += p.generator.marginal(&[1.0, 0.0, 0.0], path.t[row])[*z];
        }
    }
    assert!(filtered > 1.2 * prior, "{filtered} vs {prior}");
}

#[test]
fn unmatchable_marks_are_skipped() {
    let p = three_regime();
    let setup = PathSetup {
        init: InitialRegime::Fixed(1),
        x0: 1.0,
        eta0: 0.0,
        horizon: 0.2,
        dt: 1e-3,
    };
    let mut obs = simulate_path(&p, &setup, 5, 0).unwrap().observations();
    obs.jumps.retain(|_| false);
    obs.jumps.push((50, 7.0));
    for k in 50..obs.eta.len() {
        obs.eta[k] += 7.0;
    }
    let f = run_filter(&p, &obs, &[1.0 / 3.0; 3], FilterMode::General).unwrap();
    assert_eq!(f.skipped_jumps, 1);
}
