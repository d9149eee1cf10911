//! Brute-force maximization of total utility for small networks.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::model::{total_utility, NetworkModel, PowerVector};
use crate::utility::UtilitySpec;

pub const MAX_ORACLE_LINKS: usize = 3;

/// Each refinement round shrinks the log-width of every axis by this factor.
const SHRINK: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub powers: Vec<f64>,
    pub objective: f64,
    pub evaluations: usize,
}

/// Exhaustive search on a log-spaced grid with `resolution` points per axis over
/// `[max(p_min, 1e-3 p_max), p_max]`, followed by `refine_rounds` searches on
/// windows centred at the incumbent and clipped to that box.
///
/// Points where the utility is undefined or the SINR limits are violated are
/// skipped. The objective only grows across rounds.
pub fn oracle_gridsearch(
    model: &NetworkModel,
    u: &UtilitySpec,
    resolution: usize,
    refine_rounds: usize,
) -> Result<OracleResult> {
    model.validate()?;
    let n = model.num_links();
    check_len("utility assignment", n, u.len())?;
    if n > MAX_ORACLE_LINKS {
        return Err(Error::Domain(format!(
            "grid search handles at most {MAX_ORACLE_LINKS} links, got {n}"
        )));
    }
    if resolution < 2 {
        return Err(Error::Domain(format!("grid resolution must be at least 2, got {resolution}")));
    }
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for i in 0..n {
        let p_max = model.p_max()[i];
        if !p_max.is_finite() {
            return Err(Error::Domain(format!("grid search needs a finite p_max on link {i}")));
        }
        lo.push(model.p_min()[i].max(1e-3 * p_max).ln());
        hi.push(p_max.ln());
    }

    // exact box ends, so a solution at a bound reports the bound itself
    let ends: Vec<(f64, f64)> = (0..n).map(|i| (model.p_min()[i].max(1e-3 * model.p_max()[i]), model.p_max()[i])).collect();
    let to_power = |y: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| match y[i] {
                v if v == lo[i] => ends[i].0,
                v if v == hi[i] => ends[i].1,
                v => v.exp(),
            })
            .collect()
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluations = 0;
    let mut window: Vec<(f64, f64)> = lo.iter().copied().zip(hi.iter().copied()).collect();
    for round in 0..=refine_rounds {
        if round > 0 {
            let (y, _) = best.as_ref().expect("refinement follows a successful round");
            window = (0..n)
                .map(|i| {
                    let width = (window[i].1 - window[i].0) * SHRINK;
                    let a = (y[i] - width / 2.0).max(lo[i]);
                    let b = (a + width).min(hi[i]);
                    ((b - width).max(lo[i]), b)
                })
                .collect();
        }
        let axes: Vec<Vec<f64>> = window
            .iter()
            .map(|&(a, b)| {
                (0..resolution)
                    .map(|k| if k + 1 == resolution { b } else { a + (b - a) * k as f64 / (resolution - 1) as f64 })
                    .collect()
            })
            .collect();
        let mut index = vec![0usize; n];
        loop {
            let y: Vec<f64> = (0..n).map(|i| axes[i][index[i]]).collect();
            evaluations += 1;
            if let Some(f) = evaluate(model, u, &to_power(&y)) {
                if best.as_ref().is_none_or(|(_, b)| f > *b) {
                    best = Some((y, f));
                }
            }
            let mut d = 0;
            while d < n {
                index[d] += 1;
                if index[d] < resolution {
                    break;
                }
                index[d] = 0;
                d += 1;
            }
            if d == n {
                break;
            }
        }
        if best.is_none() {
            return Err(Error::Infeasible("no grid point satisfies the SINR limits".into()));
        }
    }
    let (y, objective) = best.expect("checked above");
    Ok(OracleResult {
        powers: to_power(&y),
        objective,
        evaluations,
    })
}

fn evaluate(model: &NetworkModel, u: &UtilitySpec, p: &[f64]) -> Option<f64> {
    let p = PowerVector::new(p.to_vec()).ok()?;
    if model.has_sinr_limits() {
        let gamma = crate::model::sinr(model, &p).ok()?;
        let ok = gamma
            .iter()
            .enumerate()
            .all(|(i, &g)| g >= model.gamma_min()[i] && g <= model.gamma_max()[i]);
        if !ok {
            return None;
        }
    }
    total_utility(model, &p, u).ok().filter(|f| f.is_finite())
}
