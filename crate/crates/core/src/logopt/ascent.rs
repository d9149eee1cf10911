//! Projected gradient ascent over a box with Armijo backtracking.

use super::stationarity;
use crate::error::Result;
use crate::linalg::sum_sorted;

#[derive(Debug, Clone, Copy)]
pub(crate) struct AscentParams {
    pub step0: f64,
    pub beta: f64,
    pub armijo_c: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Scale each coordinate's step by `e^{hi_j - y_j}`, i.e. the ratio of the
    /// power ceiling to the current power. Keeps coordinates that head for the
    /// log-power floor from stalling on their vanishing gradient.
    pub power_scaled: bool,
    /// Start each backtracking search at 4x the previous accepted step (capped
    /// at 1e8) instead of at `step0`.
    pub warm_step: bool,
}

pub(crate) struct AscentOutcome {
    pub y: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

const MIN_STEP: f64 = 1e-20;

fn clamp(v: f64, lo: f64, hi: f64) -> f64 {
    v.max(lo).min(hi)
}

/// Maximizes `eval` over `[lo, hi]` from `y0`: `y <- P[y + s D g]` with `s` halved
/// by `beta` from `step0` until the Armijo condition holds.
///
/// The Armijo test uses `increment(y, y_new)` instead of a difference of two
/// evaluations, and the recorded history accumulates those increments from
/// `f(y0)`, so it is nondecreasing even when steps are below the resolution of `f`.
pub(crate) fn projected_ascent<F, D>(
    mut eval: F,
    mut increment: D,
    y0: Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    params: &AscentParams,
) -> Result<AscentOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    D: FnMut(&[f64], &[f64]) -> Result<f64>,
{
    let n = y0.len();
    let mut y: Vec<f64> = (0..n).map(|j| clamp(y0[j], lo[j], hi[j])).collect();
    let (f0, mut g) = eval(&y)?;
    let mut f = f0;
    let mut history = vec![f];
    let mut iterations = 0;
    let mut converged = false;
    let mut trial = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut last_step = params.step0;

    while iterations < params.max_iter {
        if stationarity(&y, &g, lo, hi) <= params.tol {
            converged = true;
            break;
        }
        for j in 0..n {
            dir[j] = if params.power_scaled { g[j] * (hi[j] - y[j]).exp() } else { g[j] };
        }
        let mut s = if params.warm_step { (4.0 * last_step).min(1e8) } else { params.step0 };
        let accepted = loop {
            for j in 0..n {
                trial[j] = clamp(y[j] + s * dir[j], lo[j], hi[j]);
            }
            let slope = sum_sorted((0..n).map(|j| g[j] * (trial[j] - y[j])).collect());
            let gain = increment(&y, &trial)?;
            if gain >= params.armijo_c * slope {
                last_step = s;
                break Some((f + gain, eval(&trial)?.1));
            }
            s *= params.beta;
            if s < MIN_STEP {
                break None;
            }
        };
        let Some((f_new, g_new)) = accepted else {
            break;
        };
        std::mem::swap(&mut y, &mut trial);
        f = f_new;
        g = g_new;
        iterations += 1;
        history.push(f);
    }
    if !converged && stationarity(&y, &g, lo, hi) <= params.tol {
        converged = true;
    }
    Ok(AscentOutcome {
        y,
        iterations,
        converged,
        history,
    })
}
