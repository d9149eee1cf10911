//! Seeded problem instances shared by the benches.

use powerctl_core::{NetworkModel, SinrVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` links with direct gains in [0.5, 2], cross gains in [0, 0.5 / n] and
/// noise in [0.01, 0.5]. Every link is capped at 1.
pub fn random_network(n: usize, seed: u64) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cross = 0.5 / n as f64;
    let mut g: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..cross)).collect()).collect();
    for (i, row) in g.iter_mut().enumerate() {
        row[i] = rng.random_range(0.5..2.0);
    }
    let noise = (0..n).map(|_| rng.random_range(0.01..0.5)).collect();
    NetworkModel::new(g, noise).unwrap().with_uniform_cap(1.0).unwrap()
}

pub fn uniform_target(n: usize, gamma: f64) -> SinrVector {
    SinrVector::uniform(n, gamma).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use powerctl_core::check_feasibility;

    #[test]
    fn instances_are_feasible_at_unit_target() {
        for n in [2, 8, 32] {
            let v = check_feasibility(&random_network(n, 1), &uniform_target(n, 1.0)).unwrap();
            assert!(v.p_star.is_some());
        }
    }

    #[test]
    fn instances_are_seeded() {
        assert_eq!(random_network(4, 7), random_network(4, 7));
    }
}
