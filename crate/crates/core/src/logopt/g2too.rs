use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    augmented, check_solver_inputs, finalize, log_box, log_point, penalty_loop, stationarity, InnerStats, LogSolution,
    SinrPenalty,
};
use crate::error::{check_len, Error, Result};
use crate::fixedpoint::{AsyncSchedule, StaleView};
use crate::model::NetworkModel;
use crate::utility::{Utility, UtilitySpec};

/// Consecutive objective regressions tolerated before the run is declared oscillating.
pub const OSCILLATION_LIMIT: usize = 1000;
const MAX_HISTORY: usize = 10_000;
const NOISE_STREAM: u64 = 0x6a09_e667_f3bc_c908;
const PROBE_STREAM: u64 = 0xbb67_ae85_84ca_a73b;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct G2tooConfig {
    pub schedule: AsyncSchedule,
    /// Per-link step sizes; estimated by a gradient-difference probe when absent.
    pub step: Option<Vec<f64>>,
    /// Receivers measure `gamma (1 + zeta)` with `zeta ~ U[-b, b]`.
    pub measurement_noise: f64,
    pub tol: f64,
    /// Activations (virtual time steps).
    pub max_iter: usize,
    pub allow_nonconcave: bool,
    pub probe_samples: usize,
    pub y0: Option<Vec<f64>>,
}

impl G2tooConfig {
    /// Synchronous schedule (every link every activation, no staleness), no noise.
    pub fn new(n: usize) -> Self {
        Self {
            schedule: AsyncSchedule::uniform(n, 0, 1.0, 0),
            step: None,
            measurement_noise: 0.0,
            tol: 1e-8,
            max_iter: 200_000,
            allow_nonconcave: false,
            probe_samples: 10,
            y0: None,
        }
    }

    /// Stationarity level the run stops at: measurement noise puts a floor under
    /// the attainable gradient norm.
    pub fn effective_tol(&self) -> f64 {
        self.tol.max(10.0 * self.measurement_noise)
    }
}

/// Receiver side of a link: knows its own utility and SINR limits, measures its
/// SINR and interference, announces a price.
struct Receiver<'a> {
    link: usize,
    utility: &'a Utility,
}

impl Receiver<'_> {
    /// `(c_i, pi_i)`: the marginal `d/dz` of the (penalized) utility at the
    /// measured SINR and the price `c_i / q_i`.
    fn announce(&self, z_meas: f64, q_meas: f64, pen: &SinrPenalty) -> Result<(f64, f64)> {
        let c = self
            .utility
            .marginal_log(z_meas)
            .ok_or(Error::UtilityDomain { link: self.link, gamma: z_meas.exp() })?;
        let c = c + pen.terms(self.link, z_meas).0;
        Ok((c, c / q_meas))
    }
}

/// Transmitter side of a link: knows its own power box and its outgoing gains
/// `h[j][i]`, hears prices.
struct Transmitter {
    link: usize,
    gains_out: Vec<f64>,
    lo: f64,
    hi: f64,
    step: f64,
}

impl Transmitter {
    fn update(&self, y: f64, own_marginal: f64, prices: &[f64]) -> f64 {
        let paid: f64 = prices
            .iter()
            .zip(&self.gains_out)
            .enumerate()
            .filter(|(i, _)| *i != self.link)
            .map(|(_, (pi, h))| pi * h)
            .sum();
        let g = own_marginal - y.exp() * paid;
        (y + self.step * g).max(self.lo).min(self.hi)
    }
}

/// Per-link Lipschitz estimates `max_k |g_j(y0 + d_k) - g_j(y0)| / |d_k|_inf`
/// over `samples` random perturbations with entries in `[-0.5, 0.5]`.
fn probe_steps(
    model: &NetworkModel,
    u: &UtilitySpec,
    y0: &[f64],
    lo: &[f64],
    hi: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = y0.len();
    let pen = SinrPenalty::new(model);
    let base = augmented(model, u, y0, &pen)?.grad;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PROBE_STREAM);
    let mut lip = vec![0.0f64; n];
    let mut y = vec![0.0; n];
    for _ in 0..samples {
        for j in 0..n {
            y[j] = (y0[j] + rng.random_range(-0.5..=0.5)).max(lo[j]).min(hi[j]);
        }
        let dist = y.iter().zip(y0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if dist == 0.0 {
            continue;
        }
        let g = augmented(model, u, &y, &pen)?.grad;
        for j in 0..n {
            lip[j] = lip[j].max((g[j] - base[j]).abs() / dist);
        }
    }
    Ok(lip.into_iter().map(|l| 0.1 / l.max(1e-6)).collect())
}

fn push_decimated(history: &mut Vec<f64>, stride: &mut usize, tick: usize, value: f64) {
    if !tick.is_multiple_of(*stride) {
        return;
    }
    history.push(value);
    if history.len() > MAX_HISTORY {
        let kept: Vec<f64> = history.iter().step_by(2).copied().collect();
        *history = kept;
        *stride *= 2;
    }
}

/// Distributed asynchronous ascent with interference prices.
///
/// Each activation, every receiver measures its SINR and interference and
/// announces `pi_i = u_i'(gamma_i) gamma_i / q_i`. Each active transmitter `j`
/// then moves `y_j <- P[y_j + s_j (c_j - e^{y_j} sum_{i != j} pi_i h[j][i])]`,
/// reading prices that are up to `D` activations old.
///
/// The run stops when the true projected gradient falls below
/// [`G2tooConfig::effective_tol`], or at `max_iter` activations with
/// `converged = false`.
pub fn solve_g2too(model: &NetworkModel, u: &UtilitySpec, config: &G2tooConfig) -> Result<LogSolution> {
    let n = model.num_links();
    check_solver_inputs(model, u, config.allow_nonconcave)?;
    config.schedule.validate(n)?;
    if !(config.measurement_noise >= 0.0 && config.measurement_noise < 1.0) {
        return Err(Error::Domain(format!(
            "measurement noise bound must lie in [0, 1), got {}",
            config.measurement_noise
        )));
    }
    if !(config.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", config.tol)));
    }
    let (lo, hi) = log_box(model);
    let y0 = match &config.y0 {
        Some(y) => {
            check_len("starting point", n, y.len())?;
            y.iter().enumerate().map(|(j, v)| v.max(lo[j]).min(hi[j])).collect()
        }
        None => hi.clone(),
    };
    let steps = match &config.step {
        Some(s) => {
            check_len("step sizes", n, s.len())?;
            if let Some(j) = s.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Domain(format!("step of link {j} must be positive, got {}", s[j])));
            }
            s.clone()
        }
        None => probe_steps(model, u, &y0, &lo, &hi, config.probe_samples, config.schedule.seed)?,
    };
    let receivers: Vec<Receiver> = (0..n).map(|i| Receiver { link: i, utility: u.link(i) }).collect();
    let transmitters: Vec<Transmitter> = (0..n)
        .map(|j| Transmitter {
            link: j,
            gains_out: model.gains()[j].clone(),
            lo: lo[j],
            hi: hi[j],
            step: steps[j],
        })
        .collect();
    let tol_eff = config.effective_tol();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(config.schedule.seed ^ NOISE_STREAM);
    let mut budget = config.max_iter;

    let (pen, stats) = penalty_loop(model, tol_eff, y0, |pen, mut y| {
        let b = config.measurement_noise;
        let mut measure = |y: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
            let pt = log_point(model, y);
            let mut marginals = Vec::with_capacity(n);
            let mut prices = Vec::with_capacity(n);
            for (i, r) in receivers.iter().enumerate() {
                let zeta = if b > 0.0 { noise_rng.random_range(-b..=b) } else { 0.0 };
                let (c, pi) = r.announce(pt.z[i] + zeta.ln_1p(), pt.q[i], pen)?;
                marginals.push(c);
                prices.push(pi);
            }
            Ok((marginals, prices))
        };

        let (mut marginals, prices) = measure(&y)?;
        let mut view = StaleView::new(&config.schedule, &prices);
        let mut seen = vec![0.0; n];
        let mut next = y.clone();
        let mut state = augmented(model, u, &y, pen)?;
        let mut history = vec![state.value];
        let mut stride = 1;
        let mut regressions = 0;
        let mut ticks = 0;
        let mut converged = stationarity(&y, &state.grad, &lo, &hi) <= tol_eff;
        while !converged && ticks < budget {
            next.copy_from_slice(&y);
            for j in view.draw_active() {
                view.view_for(j, &mut seen);
                next[j] = transmitters[j].update(y[j], marginals[j], &seen);
            }
            std::mem::swap(&mut y, &mut next);
            ticks += 1;
            let (m, p) = measure(&y)?;
            marginals = m;
            view.push(&p);

            let prev = state.value;
            state = augmented(model, u, &y, pen)?;
            if state.value < prev - 8.0 * f64::EPSILON * prev.abs().max(1.0) {
                regressions += 1;
                if regressions > OSCILLATION_LIMIT {
                    return Err(Error::Oscillation { activations: ticks });
                }
            } else {
                regressions = 0;
            }
            push_decimated(&mut history, &mut stride, ticks, state.value);
            converged = stationarity(&y, &state.grad, &lo, &hi) <= tol_eff;
        }
        if history.len() > 1 && ticks % stride != 0 {
            history.push(state.value);
        }
        budget -= ticks;
        Ok(InnerStats {
            y,
            iterations: ticks,
            converged,
            history,
        })
    })?;
    let y = stats.y.clone();
    finalize("g2too", model, u, y, &pen, stats, tol_eff)
}
