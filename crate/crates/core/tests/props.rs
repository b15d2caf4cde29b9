//! Property tests for the moment recursions, fixed points and rate machinery.

use lookaround_core::convergence::{
    build_lookahead_system, cm_rate, optimal_rate, rate, QuadraticSpec1D,
};
use lookaround_core::quad::{
    check_ordering, fixed_point, iterate_to_stationarity, lookaround_fixed_point,
    lookaround_fixed_point_via_lookahead, lookaround_moment_round, sgd_fixed_point,
    sgd_moment_step, DiagNoisyQuadratic, MethodSpec, MomentState,
};
use proptest::prelude::*;

/// Random diagonal model plus a step size strictly inside (0, 1/L_max).
fn model_and_gamma() -> impl Strategy<Value = (DiagNoisyQuadratic, f64)> {
    (
        prop::collection::vec((0.1f64..10.0, 0.01f64..2.0), 1..=8),
        0.05f64..0.95,
    )
        .prop_map(|(coords, frac)| {
            let (a, sigma2): (Vec<f64>, Vec<f64>) = coords.into_iter().unzip();
            let l_max = a.iter().cloned().fold(f64::MIN, f64::max);
            let gamma = frac / l_max;
            (DiagNoisyQuadratic::new(a, sigma2).unwrap(), gamma)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sgd_fixed_point_is_stationary((model, gamma) in model_and_gamma()) {
        let init = MomentState::point(vec![1.0; model.dim()]);
        let stat = iterate_to_stationarity(init, |s| sgd_moment_step(&model, s, gamma)).unwrap();
        let closed = sgd_fixed_point(&model, gamma).unwrap();
        for (v, c) in stat.var.iter().zip(&closed) {
            prop_assert!((v - c).abs() <= 1e-10 * c.abs().max(1e-300));
        }
    }

    #[test]
    fn lookaround_fixed_point_is_stationary(
        (model, gamma) in model_and_gamma(),
        k in 1usize..=50,
        d in 1usize..=6,
    ) {
        let init = MomentState::point(vec![1.0; model.dim()]);
        let stat = iterate_to_stationarity(init, |s| {
            lookaround_moment_round(&model, s, gamma, k, d)
        })
        .unwrap();
        let closed = lookaround_fixed_point(&model, gamma, k, d).unwrap();
        for (v, c) in stat.var.iter().zip(&closed) {
            prop_assert!((v - c).abs() <= 1e-10 * c.abs().max(1e-300));
        }
    }

    #[test]
    fn two_fixed_point_routes_agree(
        (model, gamma) in model_and_gamma(),
        k in 1usize..=50,
        d in 1usize..=6,
        alpha in 0.05f64..1.0,
    ) {
        let direct = lookaround_fixed_point(&model, gamma, k, d).unwrap();
        let via = lookaround_fixed_point_via_lookahead(&model, gamma, k, d, alpha).unwrap();
        for (x, y) in direct.iter().zip(&via) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn ordering_holds_under_conditions(
        (model, gamma) in model_and_gamma(),
        k in 1usize..=50,
        d in 3usize..=6,
        alpha in 0.5f64..1.0,
    ) {
        let report = check_ordering(&model, gamma, k, d, alpha).unwrap();
        prop_assert!(report.holds);
    }

    #[test]
    fn lookaround_variance_monotone_in_d(
        (model, gamma) in model_and_gamma(),
        k in 1usize..=50,
    ) {
        let mut prev: Option<Vec<f64>> = None;
        for d in 1..=6 {
            let cur = lookaround_fixed_point(&model, gamma, k, d).unwrap();
            if let Some(p) = prev {
                for (c, pv) in cur.iter().zip(&p) {
                    prop_assert!(*c <= pv * (1.0 + 1e-12));
                }
            }
            prev = Some(cur);
        }
    }

    #[test]
    fn lookahead_alpha_one_reduces_to_sgd(
        (model, gamma) in model_and_gamma(),
        k in 1usize..=50,
    ) {
        let la = fixed_point(&model, &MethodSpec::Lookahead { gamma, k, alpha: 1.0 }).unwrap();
        let sgd = sgd_fixed_point(&model, gamma).unwrap();
        for (x, y) in la.iter().zip(&sgd) {
            prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300));
        }
    }

    #[test]
    fn lookahead_system_alpha_one_is_cm(
        a in 0.1f64..10.0,
        gamma_frac in 0.05f64..1.9,
        beta in 0.0f64..0.999,
        k in 1usize..=30,
    ) {
        let q = QuadraticSpec1D { a, gamma: gamma_frac / a, beta, k };
        let sys = build_lookahead_system(&q, 1.0).unwrap();
        let r = rate(&sys).unwrap();
        let base = cm_rate(&q).unwrap();
        // rate() reports the k-th root of the k-step composition.
        prop_assert!((r - base).abs() <= 1e-9, "{r} vs {base}");
    }

    #[test]
    fn optimal_rate_below_one(kappa in 1.0f64..1e9) {
        let r = optimal_rate(kappa).unwrap();
        prop_assert!((0.0..1.0).contains(&r));
    }
}
