//! Multiple frequency carriers with per-link power budgets.
//!
//! Each carrier `f` is a [`NetworkModel`] slice sharing the link set; its
//! `p_max` is the per-carrier cap. Links additionally split a total budget
//! `sum_f p[i][f] <= budget[i]` across carriers. Powers are indexed `[link][carrier]`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::feasibility::{check_feasibility, FeasibilityVerdict};
use crate::linalg::sum_sorted;
use crate::logopt::{
    box_multipliers, gradient_from_marginals, log_point, log_step, projected_ascent, stationarity, AscentParams,
    LogPoint, ACTIVE_TOL, LOG_POWER_FLOOR, MAX_PENALTY_WEIGHT,
};
use crate::model::{sinr, NetworkModel, PowerVector, SinrVector};
use crate::utility::{Utility, UtilitySpec};

/// Width of the band over which `min(V, V_max)` is smoothed.
pub const SATURATION_BAND: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QosMode {
    /// `sum_f U[i][f](gamma[i][f]) >= U_min[i]`.
    #[default]
    PerLink,
    /// `U[i][f](gamma[i][f]) >= U_min[i]` on every carrier.
    PerCarrier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiCarrierModel {
    carriers: Vec<NetworkModel>,
    budget: Vec<f64>,
    u_min: Option<Vec<f64>>,
    qos_mode: QosMode,
    v_max: Option<Vec<f64>>,
}

impl MultiCarrierModel {
    pub fn new(carriers: Vec<NetworkModel>, budget: Vec<f64>) -> Result<Self> {
        let Some(first) = carriers.first() else {
            return Err(Error::InvalidModel("no carriers".into()));
        };
        let n = first.num_links();
        for c in &carriers {
            check_len("links per carrier", n, c.num_links())?;
        }
        check_len("budgets", n, budget.len())?;
        if let Some(i) = budget.iter().position(|b| !(*b > 0.0)) {
            return Err(Error::InvalidModel(format!("budget of link {i} must be positive, got {}", budget[i])));
        }
        Ok(Self {
            carriers,
            budget,
            u_min: None,
            qos_mode: QosMode::PerLink,
            v_max: None,
        })
    }

    pub fn with_qos_floor(mut self, u_min: Vec<f64>, mode: QosMode) -> Result<Self> {
        check_len("QoS floors", self.num_links(), u_min.len())?;
        if let Some(i) = u_min.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(format!("QoS floor of link {i} must be finite")));
        }
        self.u_min = Some(u_min);
        self.qos_mode = mode;
        Ok(self)
    }

    /// Caps link `i`'s objective at `v_max[i]` (infinite entries leave it uncapped).
    pub fn with_utility_ceiling(mut self, v_max: Vec<f64>) -> Result<Self> {
        check_len("utility ceilings", self.num_links(), v_max.len())?;
        if let Some(i) = v_max.iter().position(|v| v.is_nan()) {
            return Err(Error::InvalidModel(format!("utility ceiling of link {i} is NaN")));
        }
        self.v_max = Some(v_max);
        Ok(self)
    }

    pub fn num_links(&self) -> usize {
        self.budget.len()
    }

    pub fn num_carriers(&self) -> usize {
        self.carriers.len()
    }

    pub fn carrier(&self, f: usize) -> &NetworkModel {
        &self.carriers[f]
    }

    pub fn carriers(&self) -> &[NetworkModel] {
        &self.carriers
    }

    pub fn budget(&self) -> &[f64] {
        &self.budget
    }

    pub fn u_min(&self) -> Option<&[f64]> {
        self.u_min.as_deref()
    }

    pub fn qos_mode(&self) -> QosMode {
        self.qos_mode
    }

    pub fn v_max(&self) -> Option<&[f64]> {
        self.v_max.as_deref()
    }

    pub fn cap(&self, i: usize, f: usize) -> f64 {
        self.carriers[f].p_max()[i]
    }

    fn check_matrix(&self, what: &'static str, m: &[Vec<f64>]) -> Result<()> {
        check_len(what, self.num_links(), m.len())?;
        for row in m {
            check_len(what, self.num_carriers(), row.len())?;
        }
        Ok(())
    }
}

fn column(m: &[Vec<f64>], f: usize) -> Vec<f64> {
    m.iter().map(|row| row[f]).collect()
}

/// Per-carrier SINRs `gamma[i][f]`, computed slice by slice with [`sinr`].
pub fn sinr_mc(model: &MultiCarrierModel, p: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    model.check_matrix("power matrix", p)?;
    let mut out = vec![vec![0.0; model.num_carriers()]; model.num_links()];
    for (f, slice) in model.carriers.iter().enumerate() {
        let g = sinr(slice, &PowerVector::new(column(p, f))?)?;
        for (i, v) in g.iter().enumerate() {
            out[i][f] = *v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McFeasibility {
    pub carriers: Vec<FeasibilityVerdict>,
    /// `sum_f p_star[i][f]`, when every carrier has a minimal power vector.
    pub total_power: Option<Vec<f64>>,
    pub budget_exceeded: Vec<bool>,
}

impl McFeasibility {
    pub fn is_feasible(&self) -> bool {
        self.carriers.iter().all(|v| v.is_feasible()) && !self.budget_exceeded.iter().any(|&b| b)
    }
}

/// Feasibility of per-carrier SINR targets `gamma_target[i][f]`, slice by slice,
/// plus the budget check on the summed minimal powers.
pub fn feasibility_mc(model: &MultiCarrierModel, gamma_target: &[Vec<f64>]) -> Result<McFeasibility> {
    model.check_matrix("SINR targets", gamma_target)?;
    let carriers = model
        .carriers
        .iter()
        .enumerate()
        .map(|(f, slice)| check_feasibility(slice, &SinrVector::new(column(gamma_target, f))?))
        .collect::<Result<Vec<_>>>()?;
    let total_power = carriers
        .iter()
        .map(|v| v.p_star.as_ref())
        .collect::<Option<Vec<_>>>()
        .map(|ps| {
            (0..model.num_links())
                .map(|i| sum_sorted(ps.iter().map(|p| p[i]).collect()))
                .collect::<Vec<f64>>()
        });
    let budget_exceeded = match &total_power {
        Some(t) => t.iter().zip(&model.budget).map(|(u, b)| *u > *b * (1.0 + 1e-12)).collect(),
        None => vec![false; model.num_links()],
    };
    Ok(McFeasibility {
        carriers,
        total_power,
        budget_exceeded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetStatus {
    pub used: f64,
    pub budget: f64,
    pub slack: f64,
}

pub fn budget_check(model: &MultiCarrierModel, p: &[Vec<f64>]) -> Result<Vec<BudgetStatus>> {
    model.check_matrix("power matrix", p)?;
    Ok(p.iter()
        .zip(&model.budget)
        .map(|(row, &budget)| {
            let used = sum_sorted(row.clone());
            BudgetStatus {
                used,
                budget,
                slack: budget - used,
            }
        })
        .collect())
}

/// Objective utilities `V[i][f]` and, for the QoS floor, `U[i][f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierUtilitySplit {
    pub v: Vec<Vec<Utility>>,
    pub u: Option<Vec<Vec<Utility>>>,
}

impl CarrierUtilitySplit {
    pub fn new(v: Vec<Vec<Utility>>) -> Self {
        Self { v, u: None }
    }

    pub fn uniform(v: Utility, num_links: usize, num_carriers: usize) -> Self {
        Self::new(vec![vec![v; num_carriers]; num_links])
    }

    pub fn with_qos(mut self, u: Vec<Vec<Utility>>) -> Self {
        self.u = Some(u);
        self
    }

    fn check(&self, n: usize, nf: usize) -> Result<()> {
        check_len("objective utilities", n, self.v.len())?;
        for row in &self.v {
            check_len("objective utilities per carrier", nf, row.len())?;
        }
        if let Some(u) = &self.u {
            check_len("QoS utilities", n, u.len())?;
            for row in u {
                check_len("QoS utilities per carrier", nf, row.len())?;
            }
        }
        Ok(())
    }

    fn carrier_spec(&self, f: usize) -> UtilitySpec {
        UtilitySpec::per_link(self.v.iter().map(|row| row[f].clone()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McConfig {
    pub tol: f64,
    /// Relative tolerance on `sum_f p[i][f] - budget[i]` for links whose dual is positive.
    pub budget_tol: f64,
    /// Initial dual step. Halved when a link's budget residual changes sign,
    /// doubled (up to 1e6 times the initial value) after two updates without one.
    pub kappa: f64,
    /// Total ascent steps across all inner solves.
    pub max_iter: usize,
    /// Dual updates per QoS round.
    pub max_outer: usize,
    pub allow_nonconcave: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            budget_tol: 1e-9,
            kappa: 0.01,
            max_iter: 500_000,
            max_outer: 20_000,
            allow_nonconcave: false,
        }
    }
}

/// Which concavity argument admitted the objective utilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// Relative risk aversion >= 1 on every carrier.
    LogConcave,
    /// Every carrier is interference-free and each `V` is concave in SINR.
    DecoupledConcave,
    /// Certification failed and was overridden.
    Overridden,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McKkt {
    pub stationarity_inf_norm: f64,
    pub budget_violation: f64,
    pub qos_violation: f64,
    pub comp_slack_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSolution {
    pub powers: Vec<Vec<f64>>,
    pub sinr: Vec<Vec<f64>>,
    pub budget_duals: Vec<f64>,
    /// One per QoS constraint: per link, or `[link][carrier]` flattened in per-carrier mode.
    pub qos_duals: Vec<f64>,
    pub cap_duals: Vec<Vec<f64>>,
    pub floor_duals: Vec<Vec<f64>>,
    pub budget: Vec<BudgetStatus>,
    pub kkt: McKkt,
    /// `sum_i min(sum_f V[i][f], V_max[i])` at the solution.
    pub objective: f64,
    pub iterations: usize,
    pub dual_updates: usize,
    pub converged: bool,
    pub certificate: Certificate,
}

/// `min(a, cap)` smoothed quadratically over `|a - cap| < SATURATION_BAND`, with its slope in `a`.
fn smooth_min(a: f64, cap: f64) -> (f64, f64) {
    let d = a - cap;
    let w = SATURATION_BAND;
    if d <= -w {
        (a, 1.0)
    } else if d >= w {
        (cap, 0.0)
    } else {
        (a - (d + w) * (d + w) / (4.0 * w), 1.0 - (d + w) / (2.0 * w))
    }
}

fn smooth_min_increment(a: f64, da: f64, cap: f64) -> f64 {
    let w = SATURATION_BAND;
    let (d0, d1) = (a - cap, a + da - cap);
    if d0 <= -w && d1 <= -w {
        da
    } else if d0 >= w && d1 >= w {
        0.0
    } else if d0.abs() < w && d1.abs() < w {
        da - da * (d0 + d1 + 2.0 * w) / (4.0 * w)
    } else {
        smooth_min(a + da, cap).0 - smooth_min(a, cap).0
    }
}

struct QosConstraint {
    link: usize,
    carriers: Vec<usize>,
    floor: f64,
}

struct Duals {
    budget: Vec<f64>,
    qos: Vec<f64>,
    weight: f64,
}

impl Duals {
    /// PHR term for constraint value `g >= 0`: `(t, psi)` with `t = max(0, lambda - w g)`.
    fn qos_term(&self, k: usize, g: f64) -> (f64, f64) {
        let lam = self.qos[k];
        let t = (lam - self.weight * g).max(0.0);
        (t, (t * t - lam * lam) / (2.0 * self.weight))
    }
}

fn domain(i: usize, z: f64) -> Error {
    Error::UtilityDomain { link: i, gamma: z.exp() }
}

/// Flattened `[link][carrier]` log-power problem.
struct Problem<'a> {
    model: &'a MultiCarrierModel,
    split: &'a CarrierUtilitySplit,
    n: usize,
    nf: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    qos: Vec<QosConstraint>,
}

impl Problem<'_> {
    fn idx(&self, i: usize, f: usize) -> usize {
        i * self.nf + f
    }

    fn points(&self, y: &[f64]) -> Vec<LogPoint> {
        (0..self.nf)
            .map(|f| {
                let col: Vec<f64> = (0..self.n).map(|i| y[self.idx(i, f)]).collect();
                log_point(self.model.carrier(f), &col)
            })
            .collect()
    }

    fn qos_utility(&self, i: usize, f: usize) -> &Utility {
        &self.split.u.as_ref().expect("QoS constraints imply QoS utilities")[i][f]
    }

    fn qos_values(&self, pts: &[LogPoint]) -> Result<Vec<f64>> {
        self.qos
            .iter()
            .map(|c| {
                let vals = c
                    .carriers
                    .iter()
                    .map(|&f| self.qos_utility(c.link, f).value_log(pts[f].z[c.link]).ok_or_else(|| domain(c.link, pts[f].z[c.link])))
                    .collect::<Result<Vec<_>>>()?;
                Ok(sum_sorted(vals) - c.floor)
            })
            .collect()
    }

    /// Per link: `(sum_f V, d W / d sum_f V)`.
    fn link_objective(&self, pts: &[LogPoint], i: usize) -> Result<(f64, f64, f64)> {
        let vals = (0..self.nf)
            .map(|f| self.split.v[i][f].value_log(pts[f].z[i]).ok_or_else(|| domain(i, pts[f].z[i])))
            .collect::<Result<Vec<_>>>()?;
        let s = sum_sorted(vals);
        let (w, dw) = match self.model.v_max() {
            Some(cap) if cap[i].is_finite() => smooth_min(s, cap[i]),
            _ => (s, 1.0),
        };
        Ok((s, w, dw))
    }

    /// Marginals `c[i][f]` of `sum_i W_i + sum_k lambda_k G_k`-type terms, with the
    /// QoS weights supplied per constraint.
    fn marginals(&self, pts: &[LogPoint], dw: &[f64], qos_weight: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut c = vec![vec![0.0; self.n]; self.nf];
        for i in 0..self.n {
            for f in 0..self.nf {
                let z = pts[f].z[i];
                c[f][i] = dw[i] * self.split.v[i][f].marginal_log(z).ok_or_else(|| domain(i, z))?;
            }
        }
        for (k, con) in self.qos.iter().enumerate() {
            if qos_weight[k] == 0.0 {
                continue;
            }
            for &f in &con.carriers {
                let z = pts[f].z[con.link];
                c[f][con.link] += qos_weight[k] * self.qos_utility(con.link, f).marginal_log(z).ok_or_else(|| domain(con.link, z))?;
            }
        }
        Ok(c)
    }

    fn gradient(&self, pts: &[LogPoint], c: &[Vec<f64>], budget_duals: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n * self.nf];
        for f in 0..self.nf {
            let col = gradient_from_marginals(self.model.carrier(f), &pts[f], &c[f]);
            for i in 0..self.n {
                g[self.idx(i, f)] = col[i] - budget_duals[i] * pts[f].p[i];
            }
        }
        g
    }

    fn used(&self, pts: &[LogPoint]) -> Vec<f64> {
        (0..self.n).map(|i| sum_sorted(pts.iter().map(|pt| pt.p[i]).collect())).collect()
    }

    fn eval(&self, y: &[f64], d: &Duals) -> Result<(f64, Vec<f64>)> {
        let pts = self.points(y);
        let mut terms = Vec::with_capacity(2 * self.n + self.qos.len());
        let mut dw = vec![0.0; self.n];
        for i in 0..self.n {
            let (_, w, slope) = self.link_objective(&pts, i)?;
            terms.push(w);
            dw[i] = slope;
        }
        let g = self.qos_values(&pts)?;
        let mut t = vec![0.0; self.qos.len()];
        for k in 0..self.qos.len() {
            let (tk, psi) = d.qos_term(k, g[k]);
            t[k] = tk;
            terms.push(-psi);
        }
        for (i, used) in self.used(&pts).into_iter().enumerate() {
            terms.push(-d.budget[i] * used);
        }
        let c = self.marginals(&pts, &dw, &t)?;
        Ok((sum_sorted(terms), self.gradient(&pts, &c, &d.budget)))
    }

    fn increment(&self, y0: &[f64], y1: &[f64], d: &Duals) -> Result<f64> {
        let mut pts = Vec::with_capacity(self.nf);
        let mut dz = Vec::with_capacity(self.nf);
        let mut dp = Vec::with_capacity(self.nf);
        for f in 0..self.nf {
            let c0: Vec<f64> = (0..self.n).map(|i| y0[self.idx(i, f)]).collect();
            let c1: Vec<f64> = (0..self.n).map(|i| y1[self.idx(i, f)]).collect();
            let (pt, z, p) = log_step(self.model.carrier(f), &c0, &c1);
            pts.push(pt);
            dz.push(z);
            dp.push(p);
        }
        let mut terms = Vec::with_capacity(2 * self.n + self.qos.len());
        for i in 0..self.n {
            let dv = (0..self.nf)
                .map(|f| self.split.v[i][f].increment_log(pts[f].z[i], dz[f][i]).ok_or_else(|| domain(i, pts[f].z[i] + dz[f][i])))
                .collect::<Result<Vec<_>>>()?;
            let ds = sum_sorted(dv);
            terms.push(match self.model.v_max() {
                Some(cap) if cap[i].is_finite() => smooth_min_increment(self.link_objective(&pts, i)?.0, ds, cap[i]),
                _ => ds,
            });
            terms.push(-d.budget[i] * sum_sorted((0..self.nf).map(|f| dp[f][i]).collect()));
        }
        let g0 = self.qos_values(&pts)?;
        for (k, con) in self.qos.iter().enumerate() {
            let dg = sum_sorted(
                con.carriers
                    .iter()
                    .map(|&f| {
                        let (z, step) = (pts[f].z[con.link], dz[f][con.link]);
                        self.qos_utility(con.link, f).increment_log(z, step).ok_or_else(|| domain(con.link, z + step))
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
            let (t0, psi0) = d.qos_term(k, g0[k]);
            let (t1, psi1) = d.qos_term(k, g0[k] + dg);
            terms.push(if t0 > 0.0 && t1 > 0.0 { dg * (t0 + t1) / 2.0 } else { psi0 - psi1 });
        }
        Ok(sum_sorted(terms))
    }
}

fn certify(model: &MultiCarrierModel, split: &CarrierUtilitySplit, allow_nonconcave: bool) -> Result<Certificate> {
    let specs: Vec<UtilitySpec> = (0..model.num_carriers()).map(|f| split.carrier_spec(f)).collect();
    let Err(err) = specs.iter().try_for_each(|s| s.certify_log_concave()) else {
        return Ok(Certificate::LogConcave);
    };
    let decoupled = model.carriers.iter().all(|c| c.is_decoupled());
    if decoupled && specs.iter().all(|s| s.certify_concave().is_ok()) {
        return Ok(Certificate::DecoupledConcave);
    }
    if allow_nonconcave {
        Ok(Certificate::Overridden)
    } else {
        Err(err)
    }
}

fn qos_constraints(model: &MultiCarrierModel, split: &CarrierUtilitySplit) -> Result<Vec<QosConstraint>> {
    let Some(u_min) = model.u_min() else {
        return Ok(Vec::new());
    };
    if split.u.is_none() {
        return Err(Error::Domain("a QoS floor needs QoS utilities in the carrier split".into()));
    }
    let nf = model.num_carriers();
    Ok(match model.qos_mode() {
        QosMode::PerLink => u_min
            .iter()
            .enumerate()
            .map(|(link, &floor)| QosConstraint {
                link,
                carriers: (0..nf).collect(),
                floor,
            })
            .collect(),
        QosMode::PerCarrier => u_min
            .iter()
            .enumerate()
            .flat_map(|(link, &floor)| (0..nf).map(move |f| QosConstraint { link, carriers: vec![f], floor }))
            .collect(),
    })
}

/// Maximizes `sum_i min(sum_f V[i][f](gamma[i][f]), V_max[i])` subject to caps,
/// budgets and the optional QoS floor.
///
/// Projected gradient ascent in `y = ln p`, with each coordinate's step scaled by
/// `p_hat / p` (`p_hat` the effective upper bound) so carriers that should be
/// switched off reach the floor. The budget is priced by a per-link dual updated
/// as `mu <- [mu + kappa (sum_f p - budget)]+`, halving `kappa` whenever the
/// residual changes sign. The QoS floor uses the same augmented-Lagrangian
/// schedule as the single-carrier SINR limits.
pub fn solve_mc(model: &MultiCarrierModel, split: &CarrierUtilitySplit, config: &McConfig) -> Result<McSolution> {
    let (n, nf) = (model.num_links(), model.num_carriers());
    split.check(n, nf)?;
    if !(config.tol > 0.0 && config.budget_tol > 0.0 && config.kappa > 0.0) {
        return Err(Error::Domain("tolerances and dual step must be positive".into()));
    }
    if let Some(f) = model.carriers.iter().position(|c| c.has_sinr_limits()) {
        return Err(Error::Domain(format!("carrier {f} has SINR limits, which the multi-carrier solver does not support")));
    }
    let certificate = certify(model, split, config.allow_nonconcave)?;
    let mut lo = vec![0.0; n * nf];
    let mut hi = vec![0.0; n * nf];
    for i in 0..n {
        for f in 0..nf {
            // the box stays above the budget so a link spending its whole budget on one
            // carrier is priced by its budget dual rather than a box multiplier
            let top = model.cap(i, f).min(2.0 * model.budget[i]);
            if !top.is_finite() {
                return Err(Error::Domain(format!("link {i} on carrier {f} has neither a cap nor a finite budget")));
            }
            if top < LOG_POWER_FLOOR {
                return Err(Error::Domain(format!("upper power bound of link {i} on carrier {f} is below {LOG_POWER_FLOOR}")));
            }
            lo[i * nf + f] = model.carrier(f).p_min()[i].max(LOG_POWER_FLOOR).ln();
            hi[i * nf + f] = top.ln();
        }
    }
    let problem = Problem {
        model,
        split,
        n,
        nf,
        qos: qos_constraints(model, split)?,
        lo,
        hi,
    };
    let mut y: Vec<f64> = (0..n * nf)
        .map(|j| (model.budget[j / nf] / nf as f64).ln().min(problem.hi[j]).max(problem.lo[j]))
        .collect();
    let mut duals = Duals {
        budget: vec![0.0; n],
        qos: vec![0.0; problem.qos.len()],
        weight: 1.0,
    };

    const MAX_QOS_ROUNDS: usize = 200;
    let mut iterations = 0;
    let mut dual_updates = 0;
    let mut converged = false;
    let mut prev_violation = f64::INFINITY;
    for _ in 0..MAX_QOS_ROUNDS {
        let ok = budget_loop(&problem, &mut duals, &mut y, config, &mut iterations, &mut dual_updates)?;
        if problem.qos.is_empty() {
            converged = ok;
            break;
        }
        let g = problem.qos_values(&problem.points(&y))?;
        let violation = g.iter().fold(0.0f64, |m, v| m.max(-v));
        let mut moved = 0.0f64;
        for (k, gk) in g.iter().enumerate() {
            let next = (duals.qos[k] - duals.weight * gk).max(0.0);
            moved = moved.max((next - duals.qos[k]).abs());
            duals.qos[k] = next;
        }
        if ok && violation <= config.tol && moved <= config.tol {
            converged = true;
            break;
        }
        if violation > 0.25 * prev_violation {
            if duals.weight >= MAX_PENALTY_WEIGHT && violation > config.tol {
                return Err(Error::Infeasible(format!(
                    "QoS floor still violated by {violation:.3e} at penalty weight {MAX_PENALTY_WEIGHT:e}"
                )));
            }
            duals.weight = (duals.weight * 2.0).min(MAX_PENALTY_WEIGHT);
        }
        prev_violation = violation;
        if iterations >= config.max_iter {
            break;
        }
    }

    // pull any residual overshoot back inside the budget, leaving capped carriers alone
    let pts = problem.points(&y);
    for (i, used) in problem.used(&pts).into_iter().enumerate() {
        if used <= model.budget[i] {
            continue;
        }
        let at_cap: Vec<bool> = (0..nf)
            .map(|f| y[problem.idx(i, f)] >= problem.hi[problem.idx(i, f)] - ACTIVE_TOL)
            .collect();
        let capped = sum_sorted((0..nf).filter(|&f| at_cap[f]).map(|f| pts[f].p[i]).collect());
        let free = used - capped;
        let scale = if free > 0.0 && capped < model.budget[i] {
            ((model.budget[i] - capped) / free, false)
        } else {
            (model.budget[i] / used, true)
        };
        for f in 0..nf {
            if scale.1 || !at_cap[f] {
                let j = problem.idx(i, f);
                y[j] = (y[j] + scale.0.ln()).max(problem.lo[j]);
            }
        }
    }
    finish(&problem, &duals, y, iterations, dual_updates, converged, certificate, config)
}

/// Ascent steps per inner solve; the dual update proceeds from an inexact inner
/// solution when this runs out.
const INNER_MAX_ITER: usize = 2000;

/// Dual ascent on the budgets around inner ascents at fixed duals; returns
/// whether both the inner solve and the budget conditions converged.
fn budget_loop(
    problem: &Problem,
    duals: &mut Duals,
    y: &mut Vec<f64>,
    config: &McConfig,
    iterations: &mut usize,
    dual_updates: &mut usize,
) -> Result<bool> {
    let n = problem.n;
    let budget = problem.model.budget();
    let mut kappa = vec![config.kappa; n];
    let mut last = vec![0.0f64; n];
    let mut same_sign = vec![0usize; n];
    for _ in 0..config.max_outer {
        let params = AscentParams {
            step0: 1.0,
            beta: 0.5,
            armijo_c: 1e-4,
            tol: 0.01 * config.tol,
            max_iter: INNER_MAX_ITER.min(config.max_iter.saturating_sub(*iterations)),
            power_scaled: true,
            warm_step: true,
        };
        let d: &Duals = duals;
        let out = projected_ascent(
            |y| problem.eval(y, d),
            |a, b| problem.increment(a, b, d),
            std::mem::take(y),
            &problem.lo,
            &problem.hi,
            &params,
        )?;
        *y = out.y;
        *iterations += out.iterations;
        let used = problem.used(&problem.points(y));
        let mut settled = out.converged;
        for i in 0..n {
            let r = used[i] - budget[i];
            let tol = config.budget_tol * budget[i];
            if r > tol || (duals.budget[i] > 0.0 && r.abs() > tol) {
                settled = false;
            }
        }
        if settled {
            return Ok(true);
        }
        if *iterations >= config.max_iter {
            return Ok(false);
        }
        for i in 0..n {
            if !budget[i].is_finite() {
                continue;
            }
            let r = used[i] - budget[i];
            if r * last[i] < 0.0 {
                kappa[i] /= 2.0;
                same_sign[i] = 0;
            } else {
                same_sign[i] += 1;
                if same_sign[i] >= 2 {
                    kappa[i] = (kappa[i] * 2.0).min(1e6 * config.kappa);
                    same_sign[i] = 0;
                }
            }
            duals.budget[i] = (duals.budget[i] + kappa[i] * r).max(0.0);
            last[i] = r;
        }
        *dual_updates += 1;
    }
    Ok(false)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &Problem,
    duals: &Duals,
    y: Vec<f64>,
    iterations: usize,
    dual_updates: usize,
    loops_converged: bool,
    certificate: Certificate,
    config: &McConfig,
) -> Result<McSolution> {
    let (n, nf) = (problem.n, problem.nf);
    let model = problem.model;
    let pts = problem.points(&y);
    let mut objective_terms = Vec::with_capacity(n);
    let mut dw = vec![0.0; n];
    for i in 0..n {
        let (_, w, slope) = problem.link_objective(&pts, i)?;
        objective_terms.push(w);
        dw[i] = slope;
    }
    let g = problem.qos_values(&pts)?;
    let c = problem.marginals(&pts, &dw, &duals.qos)?;
    let grad = problem.gradient(&pts, &c, &duals.budget);
    let (mu, nu) = box_multipliers(&y, &grad, &problem.lo, &problem.hi);
    let station = stationarity(&y, &grad, &problem.lo, &problem.hi);

    let powers: Vec<Vec<f64>> = (0..n).map(|i| (0..nf).map(|f| pts[f].p[i]).collect()).collect();
    let budget = budget_check(model, &powers)?;
    let mut comp = 0.0f64;
    let mut budget_violation = 0.0f64;
    for (i, b) in budget.iter().enumerate() {
        budget_violation = budget_violation.max(-b.slack);
        if duals.budget[i] > 0.0 {
            comp = comp.max(duals.budget[i] * b.slack.abs());
        }
    }
    let mut qos_violation = 0.0f64;
    for (k, gk) in g.iter().enumerate() {
        qos_violation = qos_violation.max(-gk);
        if duals.qos[k] > 0.0 {
            comp = comp.max(duals.qos[k] * gk.abs());
        }
    }
    for j in 0..n * nf {
        if mu[j] > 0.0 {
            comp = comp.max(mu[j] * (problem.hi[j] - y[j]).abs());
        }
        if nu[j] > 0.0 {
            comp = comp.max(nu[j] * (y[j] - problem.lo[j]).abs());
        }
    }
    let budget_ok = budget.iter().all(|b| b.slack >= -config.budget_tol * b.budget);
    let converged = loops_converged && station <= config.tol && budget_ok && qos_violation <= config.tol;
    let to_matrix = |v: &[f64]| -> Vec<Vec<f64>> { (0..n).map(|i| v[i * nf..(i + 1) * nf].to_vec()).collect() };
    Ok(McSolution {
        sinr: (0..n).map(|i| (0..nf).map(|f| pts[f].z[i].exp()).collect()).collect(),
        powers,
        budget_duals: duals.budget.clone(),
        qos_duals: duals.qos.clone(),
        cap_duals: to_matrix(&mu),
        floor_duals: to_matrix(&nu),
        budget,
        kkt: McKkt {
            stationarity_inf_norm: station,
            budget_violation,
            qos_violation,
            comp_slack_max: comp,
        },
        objective: sum_sorted(objective_terms),
        iterations,
        dual_updates,
        converged,
        certificate,
    })
}
