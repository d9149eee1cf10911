mod common;

use powerctl_core::{
    budget_check, sinr, sinr_mc, solve_g2off, solve_mc, CarrierUtilitySplit, G2offConfig, McConfig, MultiCarrierModel,
    NetworkModel, PowerVector, Utility, UtilitySpec,
};
use proptest::prelude::*;

/// `p_f = max(0, w - n_f)` with the water level `w` chosen so the powers sum to `budget`.
fn waterfill(noise: &[f64], budget: f64) -> Vec<f64> {
    let mut sorted = noise.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut level = 0.0;
    for k in 1..=sorted.len() {
        let w = (budget + sorted[..k].iter().sum::<f64>()) / k as f64;
        if k == sorted.len() || w <= sorted[k] {
            level = w;
            break;
        }
    }
    noise.iter().map(|n| (level - n).max(0.0)).collect()
}

fn single_link(noise: &[f64], budget: f64) -> MultiCarrierModel {
    let carriers = noise.iter().map(|&n| NetworkModel::new(vec![vec![1.0]], vec![n]).unwrap()).collect();
    MultiCarrierModel::new(carriers, vec![budget]).unwrap()
}

#[test]
fn waterfill_oracle_matches_hand_computation() {
    let p = waterfill(&[0.1, 0.4], 1.0);
    assert!((p[0] - 0.65).abs() < 1e-15 && (p[1] - 0.35).abs() < 1e-15);
    assert_eq!(waterfill(&[0.1, 2.0], 1.0), vec![1.0, 0.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn rate_allocation_is_waterfilling(
        noise in prop::collection::vec(0.01..1.0f64, 1..=8),
        budget in 0.1..3.0f64,
    ) {
        let mc = single_link(&noise, budget);
        let sol = solve_mc(&mc, &CarrierUtilitySplit::uniform(Utility::Rate, 1, noise.len()), &McConfig::default()).unwrap();
        let expect = waterfill(&noise, budget);
        for (p, e) in sol.powers[0].iter().zip(&expect) {
            prop_assert!((p - e).abs() <= 1e-5, "{:?} vs {:?}", sol.powers[0], expect);
        }
        prop_assert!(sol.budget[0].slack >= -1e-9);
    }
}

fn mc_instance() -> impl Strategy<Value = (MultiCarrierModel, Vec<usize>)> {
    (2..=4usize, 2..=3usize).prop_flat_map(|(nf, n)| {
        (
            prop::collection::vec(common::model(n..=n), nf),
            prop::collection::vec(0.3..3.0f64, n),
            Just((0..nf).collect::<Vec<usize>>()).prop_shuffle(),
        )
            .prop_map(|(carriers, budget, perm)| (MultiCarrierModel::new(carriers, budget).unwrap(), perm))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn carrier_permutation_is_equivariant((mc, perm) in mc_instance()) {
        let n = mc.num_links();
        let nf = mc.num_carriers();
        let split = CarrierUtilitySplit::uniform(Utility::Log, n, nf);
        let base = solve_mc(&mc, &split, &McConfig::default()).unwrap();
        let permuted = MultiCarrierModel::new(perm.iter().map(|&f| mc.carrier(f).clone()).collect(), mc.budget().to_vec()).unwrap();
        let sol = solve_mc(&permuted, &split, &McConfig::default()).unwrap();
        for i in 0..n {
            for (g, &f) in perm.iter().enumerate() {
                prop_assert_eq!(sol.powers[i][g].to_bits(), base.powers[i][f].to_bits());
            }
        }
        prop_assert_eq!(sol.objective.to_bits(), base.objective.to_bits());
    }

    #[test]
    fn budgets_hold_at_exit((mc, _) in mc_instance()) {
        let split = CarrierUtilitySplit::uniform(Utility::AlphaFair(2.0), mc.num_links(), mc.num_carriers());
        let sol = solve_mc(&mc, &split, &McConfig::default()).unwrap();
        prop_assert!(sol.converged, "{:?}", sol.kkt);
        for b in budget_check(&mc, &sol.powers).unwrap() {
            prop_assert!(b.used <= b.budget + 1e-9);
        }
    }

    #[test]
    fn single_carrier_matches_g2off((m, u, _) in common::instance(1..=4)) {
        let n = m.num_links();
        let reference = solve_g2off(&m, &u, &G2offConfig::default()).unwrap();
        let v: Vec<Vec<Utility>> = u.iter().map(|x| vec![x.clone()]).collect();
        let mc = MultiCarrierModel::new(vec![m.clone()], m.p_max().iter().map(|p| 2.0 * p).collect()).unwrap();
        let sol = solve_mc(&mc, &CarrierUtilitySplit::new(v), &McConfig::default()).unwrap();
        for i in 0..n {
            prop_assert!((sol.powers[i][0] - reference.powers[i]).abs() <= 1e-6 * reference.powers[i]);
        }
    }

    #[test]
    fn single_carrier_sinr_is_bitwise((m, _, y) in common::instance(1..=5)) {
        let p: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        let mc = MultiCarrierModel::new(vec![m.clone()], vec![1.0; m.num_links()]).unwrap();
        let a = sinr_mc(&mc, &p.iter().map(|v| vec![*v]).collect::<Vec<_>>()).unwrap();
        let b = sinr(&m, &PowerVector::new(p).unwrap()).unwrap();
        for (row, s) in a.iter().zip(b.iter()) {
            prop_assert_eq!(row[0].to_bits(), s.to_bits());
        }
    }
}

#[test]
fn uniform_spec_helper_is_consistent() {
    assert_eq!(UtilitySpec::uniform(Utility::Log, 3).len(), 3);
}
