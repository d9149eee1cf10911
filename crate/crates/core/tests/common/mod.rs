#![allow(dead_code)]

use powerctl_core::{NetworkModel, Utility, UtilitySpec};
use proptest::prelude::*;

/// Random instance with direct gains in [0.5, 2], cross gains in [0, 0.5],
/// noise in [0.01, 0.5] and caps in [0.5, 5].
pub fn model(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = NetworkModel> {
    n.prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(0.0..0.5f64, n), n),
            prop::collection::vec(0.5..2.0f64, n),
            prop::collection::vec(0.01..0.5f64, n),
            prop::collection::vec(0.5..5.0f64, n),
        )
            .prop_map(|(mut g, d, noise, cap)| {
                for i in 0..g.len() {
                    g[i][i] = d[i];
                }
                let n = g.len();
                NetworkModel::new(g, noise).unwrap().with_power_limits(vec![0.0; n], cap).unwrap()
            })
    })
}

/// Log or alpha-fair utilities (alpha in [1, 4]) per link.
pub fn utilities(n: usize) -> impl Strategy<Value = UtilitySpec> {
    prop::collection::vec(prop_oneof![Just(Utility::Log), (1.0..4.0f64).prop_map(Utility::AlphaFair)], n)
        .prop_map(UtilitySpec::per_link)
}

/// Model, utilities and a point of the log box with powers in [1e-3 p_max, p_max].
pub fn instance(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = (NetworkModel, UtilitySpec, Vec<f64>)> {
    model(n).prop_flat_map(|m| {
        let n = m.num_links();
        let caps = m.p_max().to_vec();
        (Just(m), utilities(n), prop::collection::vec(0.0..1.0f64, n)).prop_map(move |(m, u, t)| {
            let y = t.iter().zip(&caps).map(|(t, c)| c.ln() + (t - 1.0) * 1000f64.ln()).collect();
            (m, u, y)
        })
    })
}
