use powerctl_core::multicarrier::QosMode;
use powerctl_core::scenario::{
    Algo, Bound, CarrierSlice, CarrierSpec, GeneratorSpec, Limits, NetworkSpec, PerLink, SolverSpec, UtilityChoice,
    UtilityKind, SCHEMA_VERSION,
};
use powerctl_core::{generate, oracle_gridsearch, solve_g2off, G2offConfig, ScenarioFile, Utility, UtilitySpec};
use proptest::option;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![0.0..10.0f64, 1e-9..1e-3f64, Just(0.1), Just(1.0)]
}

fn per_link(n: usize) -> impl Strategy<Value = PerLink> {
    prop_oneof![finite().prop_map(PerLink::Uniform), prop::collection::vec(finite(), n).prop_map(PerLink::Each)]
}

fn bound(n: usize) -> impl Strategy<Value = Bound> {
    prop_oneof![
        finite().prop_map(Bound::Uniform),
        prop::collection::vec(option::of(finite()), n).prop_map(Bound::Each)
    ]
}

fn kind() -> impl Strategy<Value = UtilityKind> {
    prop_oneof![
        Just(UtilityKind::Log),
        Just(UtilityKind::Rate),
        (1.0..5.0f64).prop_map(|alpha| UtilityKind::AlphaFair { alpha })
    ]
}

fn utility(n: usize) -> impl Strategy<Value = UtilityChoice> {
    prop_oneof![kind().prop_map(UtilityChoice::Uniform), prop::collection::vec(kind(), n).prop_map(UtilityChoice::PerLink)]
}

fn gains(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(finite(), n), n)
}

fn carriers(n: usize) -> impl Strategy<Value = CarrierSpec> {
    let slice = (option::of(gains(n)), option::of(per_link(n)), option::of(bound(n)))
        .prop_map(|(gains, noise, cap)| CarrierSlice { gains, noise, cap });
    (
        prop::collection::vec(slice, 1..4),
        per_link(n),
        option::of(per_link(n)),
        prop_oneof![Just(QosMode::PerLink), Just(QosMode::PerCarrier)],
        option::of(bound(n)),
        option::of(utility(n)),
        option::of(utility(n)),
    )
        .prop_map(|(slices, budget, u_min, qos_mode, v_max, utility, qos_utility)| CarrierSpec {
            slices,
            budget,
            u_min: u_min.filter(|_| qos_utility.is_some()),
            qos_mode,
            v_max,
            utility,
            qos_utility,
        })
}

fn solver() -> impl Strategy<Value = SolverSpec> {
    (
        option::of(1e-12..1e-2f64),
        option::of(1usize..100_000),
        option::of(prop_oneof![Just(Algo::G2off), Just(Algo::G2too)]),
        option::of(0usize..20),
        option::of(0.1..1.0f64),
        option::of(0.0..1e-2f64),
        option::of(any::<u64>()),
        option::of(any::<bool>()),
    )
        .prop_map(|(tol, max_iter, algo, async_staleness, update_probability, measurement_noise, seed, allow_nonconcave)| {
            SolverSpec {
                tol,
                max_iter,
                algo,
                async_staleness,
                update_probability,
                measurement_noise,
                seed,
                allow_nonconcave,
            }
        })
}

fn generator(n: usize) -> impl Strategy<Value = GeneratorSpec> {
    (1.0..1e4f64, 2.0..=6.0f64, 0.1..50.0f64, any::<u64>()).prop_map(move |(area_size, path_loss_exponent, d, seed)| {
        GeneratorSpec { num_links: n, area_size, path_loss_exponent, min_tx_rx_distance: d, seed }
    })
}

fn scenario() -> impl Strategy<Value = ScenarioFile> {
    (1usize..5).prop_flat_map(|n| {
        let limits = (option::of(bound(n)), option::of(bound(n)), option::of(bound(n)), option::of(bound(n)))
            .prop_map(|(p_min, p_max, gamma_min, gamma_max)| Limits { p_min, p_max, gamma_min, gamma_max });
        (
            option::of("[a-z0-9 -]{0,12}"),
            prop_oneof![gains(n).prop_map(NetworkSpec::Gains), generator(n).prop_map(NetworkSpec::Generator)],
            per_link(n),
            limits,
            option::of(per_link(n)),
            utility(n),
            option::of(carriers(n)),
            solver(),
            option::of(generator(n)),
        )
            .prop_map(|(name, network, noise, limits, gamma_target, utility, carriers, solver, generated_by)| {
                ScenarioFile {
                    schema_version: SCHEMA_VERSION,
                    name,
                    network,
                    noise,
                    limits,
                    gamma_target,
                    utility,
                    carriers,
                    solver,
                    generated_by,
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn emit_then_parse_is_identity(s in scenario()) {
        let text = s.to_json();
        let back = ScenarioFile::from_json(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn generated_files_are_deterministic(spec in (1usize..8).prop_flat_map(generator)) {
        let a = generate(&spec).unwrap();
        prop_assert_eq!(a.to_json(), generate(&spec).unwrap().to_json());
        let gains = a.gains().unwrap();
        prop_assert!(gains.iter().flatten().all(|g| *g > 0.0 && g.is_finite()));
        for (i, row) in gains.iter().enumerate() {
            for k in 0..gains.len() {
                prop_assert!(gains[k][i] <= row[i] || k == i || gains[k][i] <= gains[i][i]);
            }
        }
        prop_assert!(a.resolve().is_ok());
    }
}

#[test]
fn oracle_agrees_with_solver_on_symmetric_pair() {
    let text = r#"{
        "schema_version": 1,
        "network": {"gains": [[1.0, 0.5], [0.5, 1.0]]},
        "noise": 0.1,
        "limits": {"p_max": 1.0}
    }"#;
    let r = ScenarioFile::from_json(text).unwrap().resolve().unwrap();
    let sol = solve_g2off(&r.model, &r.utilities, &G2offConfig::default()).unwrap();
    let oracle = oracle_gridsearch(&r.model, &r.utilities, 41, 4).unwrap();
    assert!((sol.objective - oracle.objective).abs() <= 1e-6, "{} vs {}", sol.objective, oracle.objective);
    let corners = oracle_gridsearch(&r.model, &r.utilities, 2, 0).unwrap();
    assert!(corners.objective <= sol.objective + 1e-9);
}

#[test]
fn single_link_oracle_picks_the_cap() {
    let m = powerctl_core::NetworkModel::new(vec![vec![0.7]], vec![0.2]).unwrap().with_uniform_cap(3.0).unwrap();
    let r = oracle_gridsearch(&m, &UtilitySpec::uniform(Utility::Log, 1), 41, 4).unwrap();
    assert_eq!(r.powers, vec![3.0]);
}
