//! Utility maximization in log-power coordinates.
//!
//! With `y = ln p` the log-SINR is
//! `z_i(y) = ln h[i][i] + y_i - ln(sum_{k != i} h[k][i] e^{y_k} + n_i)`,
//! which is concave in `y`. For utilities whose relative risk aversion is at
//! least 1, `u_i(e^z)` is concave and nondecreasing in `z`, so the total utility
//! `F(y) = sum_i u_i(e^{z_i(y)})` is concave over the power box.
//!
//! Two solvers share the evaluation code here:
//!
//! - [`solve_g2off`]: centralized projected gradient ascent with Armijo backtracking.
//! - [`solve_g2too`]: distributed asynchronous ascent where receivers announce
//!   interference prices `pi_i = u_i'(gamma_i) gamma_i / q_i`.
//!
//! SINR limits enter both through an augmented-Lagrangian term on `z`.

mod ascent;
mod g2off;
mod g2too;

pub use g2off::{solve_g2off, G2offConfig};
pub use g2too::{solve_g2too, G2tooConfig};

pub(crate) use ascent::{projected_ascent, AscentParams};

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::model::{interference_at, NetworkModel, PowerVector};
use crate::utility::UtilitySpec;

/// Smallest power represented in log coordinates; `p_min = 0` maps to `ln(1e-12)`.
pub const LOG_POWER_FLOOR: f64 = 1e-12;
/// Distance to a bound under which a coordinate counts as active.
pub const ACTIVE_TOL: f64 = 1e-12;
/// Upper limit of the penalty weight ramp for SINR limits.
pub const MAX_PENALTY_WEIGHT: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogVars {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub y_min: Vec<f64>,
    pub y_max: Vec<f64>,
    pub z_min: Vec<f64>,
    pub z_max: Vec<f64>,
}

/// `(y_min, y_max)` for a model, with `p_min` floored at [`LOG_POWER_FLOOR`].
pub fn log_box(model: &NetworkModel) -> (Vec<f64>, Vec<f64>) {
    let lo = model.p_min().iter().map(|&p| p.max(LOG_POWER_FLOOR).ln()).collect();
    let hi = model.p_max().iter().map(|&p| p.ln()).collect();
    (lo, hi)
}

pub(crate) fn sinr_log_bounds(model: &NetworkModel) -> (Vec<f64>, Vec<f64>) {
    // ln 0 = -inf and ln inf = inf: absent limits become infinite bounds
    let lo = model.gamma_min().iter().map(|g| g.ln()).collect();
    let hi = model.gamma_max().iter().map(|g| g.ln()).collect();
    (lo, hi)
}

pub fn to_log(model: &NetworkModel, p: &PowerVector) -> Result<LogVars> {
    check_len("power vector", model.num_links(), p.len())?;
    if let Some(i) = p.iter().position(|&v| v <= 0.0) {
        return Err(Error::Domain(format!("link {i} has zero power, which has no log coordinate")));
    }
    let y: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    let z = log_point(model, &y).z;
    let (y_min, y_max) = log_box(model);
    let (z_min, z_max) = sinr_log_bounds(model);
    Ok(LogVars {
        y,
        z,
        y_min,
        y_max,
        z_min,
        z_max,
    })
}

pub fn from_log(y: &[f64]) -> Result<PowerVector> {
    PowerVector::new(y.iter().map(|v| v.exp()).collect())
}

/// Powers, interference-plus-noise and log-SINRs at a log-power point.
#[derive(Debug, Clone)]
pub(crate) struct LogPoint {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub z: Vec<f64>,
}

pub(crate) fn log_point(model: &NetworkModel, y: &[f64]) -> LogPoint {
    let p: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let q: Vec<f64> = (0..p.len()).map(|i| interference_at(model, &p, i)).collect();
    let z = (0..p.len())
        .map(|i| model.direct_gain(i).ln() + y[i] - q[i].ln())
        .collect();
    LogPoint { p, q, z }
}

/// Gradient in `y` of any objective `sum_i phi_i(z_i(y))` given `c_i = phi_i'(z_i)`:
/// `c_j - p_j sum_{i != j} h[j][i] c_i / q_i`.
pub(crate) fn gradient_from_marginals(model: &NetworkModel, pt: &LogPoint, c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let prices: Vec<f64> = c.iter().zip(&pt.q).map(|(ci, qi)| ci / qi).collect();
    (0..n)
        .map(|j| {
            let mut paid = 0.0;
            for (i, price) in prices.iter().enumerate() {
                if i != j {
                    paid += model.gain(j, i) * price;
                }
            }
            c[j] - pt.p[j] * paid
        })
        .collect()
}

fn utility_terms(u: &UtilitySpec, z: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut total = 0.0;
    let mut c = Vec::with_capacity(z.len());
    for (i, &zi) in z.iter().enumerate() {
        let domain = || Error::UtilityDomain { link: i, gamma: zi.exp() };
        total += u.link(i).value_log(zi).ok_or_else(domain)?;
        c.push(u.link(i).marginal_log(zi).ok_or_else(domain)?);
    }
    Ok((total, c))
}

/// `F(y) = sum_i u_i(gamma_i(e^y))` and its analytic gradient in `y`.
pub fn objective_and_gradient(model: &NetworkModel, u: &UtilitySpec, y: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len("log-power vector", model.num_links(), y.len())?;
    check_len("utility assignment", model.num_links(), u.len())?;
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("log-power y[{i}] = {} is not finite", y[i])));
    }
    let pt = log_point(model, y);
    let (f, c) = utility_terms(u, &pt.z)?;
    Ok((f, gradient_from_marginals(model, &pt, &c)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Multipliers {
    /// SINR floor `z_i >= ln gamma_min_i`.
    pub lambda_l: Vec<f64>,
    /// SINR ceiling `z_i <= ln gamma_max_i`.
    pub lambda_u: Vec<f64>,
    /// Power ceiling `y_i <= y_max_i`.
    pub mu: Vec<f64>,
    /// Power floor `y_i >= y_min_i`.
    pub nu: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(n: usize) -> Self {
        Self {
            lambda_l: vec![0.0; n],
            lambda_u: vec![0.0; n],
            mu: vec![0.0; n],
            nu: vec![0.0; n],
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        for (what, v) in [
            ("lambda_l", &self.lambda_l),
            ("lambda_u", &self.lambda_u),
            ("mu", &self.mu),
            ("nu", &self.nu),
        ] {
            check_len(what, n, v.len())?;
            if v.iter().any(|m| !(*m >= 0.0)) {
                return Err(Error::Domain(format!("multiplier {what} must be nonnegative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResiduals {
    pub stationarity_inf_norm: f64,
    pub primal_violation: f64,
    pub comp_slack_max: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity_inf_norm.max(self.primal_violation).max(self.comp_slack_max)
    }
}

fn slack_product(multiplier: f64, gap: f64) -> f64 {
    if multiplier == 0.0 {
        0.0
    } else {
        multiplier * gap.abs()
    }
}

/// Residuals of the Lagrangian conditions
/// `grad F + J_z^T (lambda_l - lambda_u) - mu + nu = 0` plus primal feasibility and
/// complementary slackness, over the model's power box and SINR limits.
pub fn kkt_residual(model: &NetworkModel, u: &UtilitySpec, y: &[f64], m: &Multipliers) -> Result<KktResiduals> {
    let n = model.num_links();
    m.check(n)?;
    let (_, grad) = objective_and_gradient(model, u, y)?;
    let pt = log_point(model, y);
    let dual: Vec<f64> = m.lambda_l.iter().zip(&m.lambda_u).map(|(l, h)| l - h).collect();
    let sinr_part = gradient_from_marginals(model, &pt, &dual);
    let (y_min, y_max) = log_box(model);
    let (z_min, z_max) = sinr_log_bounds(model);

    let mut res = KktResiduals {
        stationarity_inf_norm: 0.0,
        primal_violation: 0.0,
        comp_slack_max: 0.0,
    };
    for j in 0..n {
        let s = grad[j] + sinr_part[j] - m.mu[j] + m.nu[j];
        res.stationarity_inf_norm = res.stationarity_inf_norm.max(s.abs());
        let viol = [y[j] - y_max[j], y_min[j] - y[j], z_min[j] - pt.z[j], pt.z[j] - z_max[j]]
            .into_iter()
            .fold(0.0, f64::max);
        res.primal_violation = res.primal_violation.max(viol);
        let slack = [
            slack_product(m.mu[j], y_max[j] - y[j]),
            slack_product(m.nu[j], y[j] - y_min[j]),
            slack_product(m.lambda_l[j], pt.z[j] - z_min[j]),
            slack_product(m.lambda_u[j], z_max[j] - pt.z[j]),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        res.comp_slack_max = res.comp_slack_max.max(slack);
    }
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogSolution {
    pub algorithm: &'static str,
    pub y_star: LogVars,
    pub powers: Vec<f64>,
    pub sinr: Vec<f64>,
    pub multipliers: Multipliers,
    pub kkt: KktResiduals,
    /// Total utility at the solution.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Tolerance the convergence flag refers to.
    pub tol: f64,
    /// Objective after each ascent step of the final inner solve (may be decimated).
    pub objective_history: Vec<f64>,
}

/// Augmented-Lagrangian state for the SINR limits `z_min <= z <= z_max`.
#[derive(Debug, Clone)]
pub(crate) struct SinrPenalty {
    z_min: Vec<f64>,
    z_max: Vec<f64>,
    pub lambda_l: Vec<f64>,
    pub lambda_u: Vec<f64>,
    pub weight: f64,
}

impl SinrPenalty {
    pub fn new(model: &NetworkModel) -> Self {
        let (z_min, z_max) = sinr_log_bounds(model);
        let n = z_min.len();
        Self {
            z_min,
            z_max,
            lambda_l: vec![0.0; n],
            lambda_u: vec![0.0; n],
            weight: 1.0,
        }
    }

    pub fn is_active(&self) -> bool {
        self.z_min.iter().any(|v| v.is_finite()) || self.z_max.iter().any(|v| v.is_finite())
    }

    /// Marginal added to `c_i` and the penalty subtracted from the objective.
    pub fn terms(&self, i: usize, z: f64) -> (f64, f64) {
        let w = self.weight;
        let mut dc = 0.0;
        let mut psi = 0.0;
        if self.z_min[i].is_finite() {
            let lam = self.lambda_l[i];
            let t = (lam - w * (z - self.z_min[i])).max(0.0);
            dc += t;
            psi += (t * t - lam * lam) / (2.0 * w);
        }
        if self.z_max[i].is_finite() {
            let lam = self.lambda_u[i];
            let t = (lam - w * (self.z_max[i] - z)).max(0.0);
            dc -= t;
            psi += (t * t - lam * lam) / (2.0 * w);
        }
        (dc, psi)
    }

    /// `psi(z + dz) - psi(z)` for link `i`.
    pub fn psi_increment(&self, i: usize, z: f64, dz: f64) -> f64 {
        let w = self.weight;
        let mut total = 0.0;
        for (bound, lam, sign) in [(self.z_min[i], self.lambda_l[i], 1.0), (self.z_max[i], self.lambda_u[i], -1.0)] {
            if !bound.is_finite() {
                continue;
            }
            // t = lam - w * sign * (z - bound), so dt = -w * sign * dz while t stays positive
            let t0 = (lam - w * sign * (z - bound)).max(0.0);
            let t1 = (lam - w * sign * (z + dz - bound)).max(0.0);
            total += if t0 > 0.0 && t1 > 0.0 {
                -sign * dz * (t0 + t1) / 2.0
            } else {
                (t1 * t1 - t0 * t0) / (2.0 * w)
            };
        }
        total
    }

    pub fn violation(&self, z: &[f64]) -> f64 {
        z.iter()
            .enumerate()
            .map(|(i, &zi)| (self.z_min[i] - zi).max(zi - self.z_max[i]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// First-order multiplier update `lambda <- max(0, lambda - w g)`.
    pub fn update_multipliers(&mut self, z: &[f64]) {
        let w = self.weight;
        for (i, &zi) in z.iter().enumerate() {
            if self.z_min[i].is_finite() {
                self.lambda_l[i] = (self.lambda_l[i] - w * (zi - self.z_min[i])).max(0.0);
            }
            if self.z_max[i].is_finite() {
                self.lambda_u[i] = (self.lambda_u[i] - w * (self.z_max[i] - zi)).max(0.0);
            }
        }
    }
}

/// Augmented objective and its gradient at `y`.
pub(crate) struct Augmented {
    pub value: f64,
    pub grad: Vec<f64>,
}

pub(crate) fn augmented(model: &NetworkModel, u: &UtilitySpec, y: &[f64], pen: &SinrPenalty) -> Result<Augmented> {
    let pt = log_point(model, y);
    let (mut value, mut c) = utility_terms(u, &pt.z)?;
    if pen.is_active() {
        for (i, ci) in c.iter_mut().enumerate() {
            let (dc, psi) = pen.terms(i, pt.z[i]);
            *ci += dc;
            value -= psi;
        }
    }
    let grad = gradient_from_marginals(model, &pt, &c);
    Ok(Augmented { value, grad })
}

/// State at `y_old` plus the step to `y_new` in powers and log-SINRs:
/// `dp_k = p_k expm1(dy_k)` and `dz_i = dy_i - ln(1 + dq_i / q_i)`, both free of
/// cancellation for small steps.
pub(crate) fn log_step(model: &NetworkModel, y_old: &[f64], y_new: &[f64]) -> (LogPoint, Vec<f64>, Vec<f64>) {
    let n = y_old.len();
    let pt = log_point(model, y_old);
    let dp: Vec<f64> = (0..n).map(|k| pt.p[k] * (y_new[k] - y_old[k]).exp_m1()).collect();
    let dz = (0..n)
        .map(|i| {
            let dq: f64 = (0..n).filter(|&k| k != i).map(|k| model.gain(k, i) * dp[k]).sum();
            (y_new[i] - y_old[i]) - (dq / pt.q[i]).ln_1p()
        })
        .collect();
    (pt, dz, dp)
}

/// `A(y_new) - A(y_old)` for the augmented objective, assembled from per-link
/// increments so steps far below the resolution of `A` keep their sign.
pub(crate) fn augmented_increment(
    model: &NetworkModel,
    u: &UtilitySpec,
    pen: &SinrPenalty,
    y_old: &[f64],
    y_new: &[f64],
) -> Result<f64> {
    let (pt, dz, _) = log_step(model, y_old, y_new);
    let mut total = 0.0;
    for (i, (&z, &dz)) in pt.z.iter().zip(&dz).enumerate() {
        total += u
            .link(i)
            .increment_log(z, dz)
            .ok_or(Error::UtilityDomain { link: i, gamma: (z + dz).exp() })?;
        if pen.is_active() {
            total -= pen.psi_increment(i, z, dz);
        }
    }
    Ok(total)
}

/// Box multipliers read off the projection: a coordinate sitting on a bound
/// (within [`ACTIVE_TOL`]) whose gradient points outward gets `|g_j|`.
pub(crate) fn box_multipliers(y: &[f64], grad: &[f64], lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut mu = vec![0.0; y.len()];
    let mut nu = vec![0.0; y.len()];
    for j in 0..y.len() {
        if y[j] >= hi[j] - ACTIVE_TOL && grad[j] > 0.0 {
            mu[j] = grad[j];
        } else if y[j] <= lo[j] + ACTIVE_TOL && grad[j] < 0.0 {
            nu[j] = -grad[j];
        }
    }
    (mu, nu)
}

/// Projected-gradient stationarity: `|g_j|` for free coordinates, 0 where the
/// gradient pushes into an active bound.
pub(crate) fn stationarity(y: &[f64], grad: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    (0..y.len())
        .map(|j| {
            let blocked = (y[j] >= hi[j] - ACTIVE_TOL && grad[j] > 0.0) || (y[j] <= lo[j] + ACTIVE_TOL && grad[j] < 0.0);
            if blocked {
                0.0
            } else {
                grad[j].abs()
            }
        })
        .fold(0.0, f64::max)
}

pub(crate) fn check_solver_inputs(model: &NetworkModel, u: &UtilitySpec, allow_nonconcave: bool) -> Result<()> {
    check_len("utility assignment", model.num_links(), u.len())?;
    if let Some(i) = model.p_max().iter().position(|p| !p.is_finite()) {
        return Err(Error::Domain(format!("solvers need a finite p_max (link {i} is unbounded)")));
    }
    if let Some(i) = model.p_max().iter().position(|&p| p < LOG_POWER_FLOOR) {
        return Err(Error::Domain(format!("p_max of link {i} is below the log-power floor {LOG_POWER_FLOOR}")));
    }
    if !allow_nonconcave {
        u.certify_log_concave()?;
    }
    Ok(())
}

/// Runs the augmented-Lagrangian outer loop around `inner`, which maximizes the
/// augmented objective for the given penalty state starting from `y`.
///
/// Without SINR limits this is a single inner solve. Otherwise multipliers are
/// updated after every inner solve and the weight doubles (from 1, up to
/// [`MAX_PENALTY_WEIGHT`]) whenever the violation did not shrink by 4x.
pub(crate) fn penalty_loop<F>(model: &NetworkModel, tol: f64, y0: Vec<f64>, mut inner: F) -> Result<(SinrPenalty, InnerStats)>
where
    F: FnMut(&SinrPenalty, Vec<f64>) -> Result<InnerStats>,
{
    const MAX_OUTER: usize = 200;
    let mut pen = SinrPenalty::new(model);
    if !pen.is_active() {
        let stats = inner(&pen, y0)?;
        return Ok((pen, stats));
    }
    let mut y = y0;
    let mut iterations = 0;
    let mut prev_violation = f64::INFINITY;
    let mut last = InnerStats::default();
    for _ in 0..MAX_OUTER {
        let stats = inner(&pen, y)?;
        iterations += stats.iterations;
        y = stats.y.clone();
        let z = log_point(model, &y).z;
        let violation = pen.violation(&z);
        let (old_l, old_u) = (pen.lambda_l.clone(), pen.lambda_u.clone());
        pen.update_multipliers(&z);
        let moved = old_l
            .iter()
            .zip(&pen.lambda_l)
            .chain(old_u.iter().zip(&pen.lambda_u))
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        let converged = stats.converged && violation <= tol && moved <= tol;
        last = InnerStats {
            iterations,
            converged,
            ..stats
        };
        if converged {
            return Ok((pen, last));
        }
        if violation > 0.25 * prev_violation {
            if pen.weight >= MAX_PENALTY_WEIGHT && violation > tol {
                return Err(Error::Infeasible(format!(
                    "sinr limits still violated by {violation:.3e} (log units) at penalty weight {MAX_PENALTY_WEIGHT:e}"
                )));
            }
            pen.weight = (pen.weight * 2.0).min(MAX_PENALTY_WEIGHT);
        }
        prev_violation = violation;
    }
    Ok((pen, last))
}

#[derive(Debug, Clone, Default)]
pub(crate) struct InnerStats {
    pub y: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Assembles a [`LogSolution`] at `y` with multipliers from the penalty state and
/// the projection activity of the Lagrangian gradient.
pub(crate) fn finalize(
    algorithm: &'static str,
    model: &NetworkModel,
    u: &UtilitySpec,
    y: Vec<f64>,
    pen: &SinrPenalty,
    stats: InnerStats,
    tol: f64,
) -> Result<LogSolution> {
    let (lo, hi) = log_box(model);
    let n = y.len();
    let pt = log_point(model, &y);
    let (utility, c) = utility_terms(u, &pt.z)?;
    let mut lagr_c = c;
    let lambda_l = if pen.is_active() { pen.lambda_l.clone() } else { vec![0.0; n] };
    let lambda_u = if pen.is_active() { pen.lambda_u.clone() } else { vec![0.0; n] };
    for i in 0..n {
        lagr_c[i] += lambda_l[i] - lambda_u[i];
    }
    let grad = gradient_from_marginals(model, &pt, &lagr_c);
    let (mu, nu) = box_multipliers(&y, &grad, &lo, &hi);
    let multipliers = Multipliers { lambda_l, lambda_u, mu, nu };
    let kkt = kkt_residual(model, u, &y, &multipliers)?;
    let (z_min, z_max) = sinr_log_bounds(model);
    let converged = stats.converged && kkt.stationarity_inf_norm <= tol && kkt.primal_violation <= tol;
    let powers = pt.p.clone();
    let sinr = pt.z.iter().map(|z| z.exp()).collect();
    Ok(LogSolution {
        algorithm,
        y_star: LogVars {
            z: pt.z,
            y,
            y_min: lo,
            y_max: hi,
            z_min,
            z_max,
        },
        powers,
        sinr,
        multipliers,
        kkt,
        objective: utility,
        iterations: stats.iterations,
        converged,
        tol,
        objective_history: stats.history,
    })
}
