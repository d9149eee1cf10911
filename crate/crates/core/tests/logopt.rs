mod common;

use powerctl_core::logopt::{from_log, log_box, kkt_residual, objective_and_gradient, solve_g2off, solve_g2too, G2offConfig, G2tooConfig};
use powerctl_core::fixedpoint::AsyncSchedule;
use powerctl_core::{NetworkModel, Utility, UtilitySpec};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gradient_matches_central_differences((m, u, y) in common::instance(1..=5)) {
        let (_, g) = objective_and_gradient(&m, &u, &y).unwrap();
        let h = 1e-6;
        let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for j in 0..y.len() {
            let mut up = y.clone();
            let mut dn = y.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (objective_and_gradient(&m, &u, &up).unwrap().0 - objective_and_gradient(&m, &u, &dn).unwrap().0) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-5 * scale, "j={} fd={} analytic={}", j, fd, g[j]);
        }
    }

    #[test]
    fn objective_is_concave_on_segments(
        (m, u, y1) in common::instance(1..=5),
        t in prop::collection::vec(0.0..1.0f64, 5),
        lam in 0.0..1.0f64,
    ) {
        let y2: Vec<f64> = m.p_max().iter().zip(&t).map(|(c, t)| c.ln() + (t - 1.0) * 1000f64.ln()).collect();
        let mid: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        let f = |y: &[f64]| objective_and_gradient(&m, &u, y).unwrap().0;
        prop_assert!(f(&mid) >= lam * f(&y1) + (1.0 - lam) * f(&y2) - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn g2off_ascent_is_monotone_and_certified((m, u, _) in common::instance(1..=4)) {
        let sol = solve_g2off(&m, &u, &G2offConfig::default()).unwrap();
        prop_assert!(sol.objective_history.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(sol.converged);
        prop_assert!(sol.kkt.max() <= 1e-8, "{:?}", sol.kkt);
        let again = kkt_residual(&m, &u, &sol.y_star.y, &sol.multipliers).unwrap();
        prop_assert_eq!(again, sol.kkt);
    }

    #[test]
    fn solutions_stay_in_the_box((m, u, _) in common::instance(1..=4), seed in 0..1000u64) {
        let (lo, hi) = log_box(&m);
        let n = m.num_links();
        let mut cfg = G2tooConfig::new(n);
        cfg.schedule = AsyncSchedule::uniform(n, 3, 0.8, seed);
        for sol in [solve_g2off(&m, &u, &G2offConfig::default()).unwrap(), solve_g2too(&m, &u, &cfg).unwrap()] {
            for i in 0..n {
                prop_assert!(lo[i] <= sol.y_star.y[i] && sol.y_star.y[i] <= hi[i], "{}: y {:?}", sol.algorithm, sol.y_star.y);
            }
        }
    }

    #[test]
    fn optimal_sinr_is_scale_invariant((m, u, _) in common::instance(1..=3), c in 0.1..10.0f64) {
        let base = solve_g2off(&m, &u, &G2offConfig::default()).unwrap();
        let n = m.num_links();
        let scaled = m
            .with_scaled_noise(c)
            .unwrap()
            .with_power_limits(vec![0.0; n], m.p_max().iter().map(|p| p * c).collect())
            .unwrap();
        let sol = solve_g2off(&scaled, &u, &G2offConfig::default()).unwrap();
        for (a, b) in sol.sinr.iter().zip(&base.sinr) {
            prop_assert!((a - b).abs() <= 1e-6 * b, "{} vs {}", a, b);
        }
    }
}

fn regression_instances() -> Vec<(NetworkModel, UtilitySpec)> {
    let pair = NetworkModel::new(vec![vec![1.0, 0.5], vec![0.5, 1.0]], vec![0.1, 0.1]).unwrap();
    let triple = NetworkModel::new(
        vec![vec![1.0, 0.6, 0.3], vec![0.5, 0.9, 0.7], vec![0.4, 0.8, 1.1]],
        vec![0.05, 0.1, 0.02],
    )
    .unwrap();
    let quad = NetworkModel::new(
        vec![
            vec![1.2, 0.3, 0.1, 0.2],
            vec![0.2, 0.8, 0.4, 0.1],
            vec![0.3, 0.1, 1.0, 0.5],
            vec![0.1, 0.6, 0.2, 0.9],
        ],
        vec![0.02, 0.05, 0.01, 0.03],
    )
    .unwrap();
    vec![
        (pair.clone().with_uniform_cap(1.0).unwrap(), UtilitySpec::uniform(Utility::Log, 2)),
        (pair.with_uniform_cap(1.0).unwrap(), UtilitySpec::uniform(Utility::AlphaFair(2.0), 2)),
        (triple.clone().with_uniform_cap(3.0).unwrap(), UtilitySpec::uniform(Utility::AlphaFair(2.0), 3)),
        (triple.with_uniform_cap(1.0).unwrap(), UtilitySpec::uniform(Utility::Log, 3)),
        (
            quad.with_uniform_cap(2.0).unwrap(),
            UtilitySpec::per_link(vec![Utility::Log, Utility::AlphaFair(2.0), Utility::AlphaFair(3.0), Utility::Log]),
        ),
    ]
}

#[test]
fn g2too_agrees_with_g2off_on_regression_instances() {
    for (k, (m, u)) in regression_instances().into_iter().enumerate() {
        let n = m.num_links();
        let reference = solve_g2off(&m, &u, &G2offConfig::default()).unwrap();
        for (d, prob) in [(0, 1.0), (3, 0.8), (10, 0.5)] {
            let mut cfg = G2tooConfig::new(n);
            cfg.schedule = AsyncSchedule::uniform(n, d, prob, 7 + k as u64);
            let sol = solve_g2too(&m, &u, &cfg).unwrap();
            assert!(sol.converged, "instance {k}, D={d}: {:?}", sol.kkt);
            for (a, b) in sol.powers.iter().zip(&reference.powers) {
                assert!((a - b).abs() <= 1e-4 * b, "instance {k}, D={d}: {:?} vs {:?}", sol.powers, reference.powers);
            }
            assert!((sol.objective - reference.objective).abs() <= 1e-6, "instance {k}, D={d}");
        }
    }
}

#[test]
fn log_coordinates_round_trip() {
    let p = from_log(&[0.0, -2.0, 1.5]).unwrap();
    assert_eq!(p[0], 1.0);
    assert!((p[1] - (-2.0f64).exp()).abs() < 1e-16);
}
