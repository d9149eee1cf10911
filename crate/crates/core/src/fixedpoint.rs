//! Standard interference functions and their fixed-point iterations.
//!
//! A map `I` is *standard* when it is positive, monotone and scalable
//! (`alpha > 1 => alpha I(p) > I(alpha p)`). For such maps the iteration
//! `p <- I(p)` converges to the unique fixed point, both synchronously and
//! under bounded-staleness asynchronous updates.
//!
//! The asynchronous engine is a seeded virtual-time simulation: no threads,
//! so a run is reproducible bit for bit from its seed.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dist_inf, norm_inf};
use crate::model::{interference_at, NetworkModel, PowerVector, SinrVector};

pub type MapFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Upper bound on stored trajectory samples; older samples are thinned by 2 when exceeded.
pub const MAX_TRAJECTORY_SAMPLES: usize = 10_000;
/// Iterates above `DIVERGENCE_FACTOR * max(1, |I(0)|_inf)` abort the run.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Clone)]
pub enum InterferenceMap {
    /// `I_i(p) = gamma_i q_i(p) / h[i][i]`
    TargetSinr {
        model: Arc<NetworkModel>,
        gamma_target: Vec<f64>,
    },
    /// `min(p_max_i, I_i(p))`
    PowerCapped {
        inner: Box<InterferenceMap>,
        p_max: Vec<f64>,
    },
    Custom {
        dim: usize,
        label: String,
        eval: MapFn,
    },
}

impl std::fmt::Debug for InterferenceMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::TargetSinr { gamma_target, .. } => {
                f.debug_struct("TargetSinr").field("gamma_target", gamma_target).finish_non_exhaustive()
            }
            Self::PowerCapped { inner, p_max } => {
                f.debug_struct("PowerCapped").field("inner", inner).field("p_max", p_max).finish()
            }
            Self::Custom { dim, label, .. } => {
                f.debug_struct("Custom").field("dim", dim).field("label", label).finish_non_exhaustive()
            }
        }
    }
}

impl InterferenceMap {
    pub fn target_sinr(model: &NetworkModel, gamma_target: &SinrVector) -> Result<Self> {
        check_len("sinr targets", model.num_links(), gamma_target.len())?;
        if let Some((i, g)) = gamma_target.iter().enumerate().find(|(_, g)| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::Domain(format!("sinr target of link {i} must be finite and > 0, got {g}")));
        }
        Ok(Self::TargetSinr {
            model: Arc::new(model.clone()),
            gamma_target: gamma_target.to_vec(),
        })
    }

    pub fn custom(dim: usize, label: impl Into<String>, eval: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self::Custom {
            dim,
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn capped(self, p_max: Vec<f64>) -> Result<Self> {
        check_len("power caps", self.dim(), p_max.len())?;
        if let Some((i, c)) = p_max.iter().enumerate().find(|(_, c)| !(**c > 0.0)) {
            return Err(Error::Domain(format!("power cap of link {i} must be > 0, got {c}")));
        }
        Ok(Self::PowerCapped {
            inner: Box::new(self),
            p_max,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::TargetSinr { gamma_target, .. } => gamma_target.len(),
            Self::PowerCapped { p_max, .. } => p_max.len(),
            Self::Custom { dim, .. } => *dim,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::TargetSinr { .. } => "target_sinr".into(),
            Self::PowerCapped { inner, .. } => format!("capped({})", inner.label()),
            Self::Custom { label, .. } => label.clone(),
        }
    }

    /// Component `i` of `I(p)`.
    pub fn eval_component(&self, i: usize, p: &[f64]) -> f64 {
        match self {
            Self::TargetSinr { model, gamma_target } => {
                gamma_target[i] * interference_at(model, p, i) / model.direct_gain(i)
            }
            Self::PowerCapped { inner, p_max } => inner.eval_component(i, p).min(p_max[i]),
            Self::Custom { dim, eval, .. } => {
                let mut out = vec![0.0; *dim];
                eval(p, &mut out);
                out[i]
            }
        }
    }

    pub fn eval_into(&self, p: &[f64], out: &mut [f64]) {
        match self {
            Self::Custom { eval, .. } => eval(p, out),
            Self::PowerCapped { inner, p_max } => {
                inner.eval_into(p, out);
                out.iter_mut().zip(p_max).for_each(|(o, c)| *o = o.min(*c));
            }
            Self::TargetSinr { .. } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = self.eval_component(i, p);
                }
            }
        }
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(p, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub record_trajectory: bool,
}

impl Default for IterOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100_000,
            record_trajectory: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub iter: usize,
    pub p: Vec<f64>,
    /// `|I(p) - p|_inf` at this iterate.
    pub residual: f64,
}

/// Iterate history, decimated to at most [`MAX_TRAJECTORY_SAMPLES`] entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub stride: usize,
    pub samples: Vec<TrajectorySample>,
}

impl Default for Trajectory {
    fn default() -> Self {
        Self {
            stride: 1,
            samples: Vec::new(),
        }
    }
}

impl Trajectory {
    pub(crate) fn record(&mut self, iter: usize, p: &[f64], residual: f64) {
        if !iter.is_multiple_of(self.stride) {
            return;
        }
        self.samples.push(TrajectorySample {
            iter,
            p: p.to_vec(),
            residual,
        });
        if self.samples.len() > MAX_TRAJECTORY_SAMPLES {
            self.stride *= 2;
            let stride = self.stride;
            self.samples.retain(|s| s.iter % stride == 0);
        }
    }

    /// Keeps the final iterate even when it falls between strides.
    pub(crate) fn finish(&mut self, iter: usize, p: &[f64], residual: f64) {
        if self.samples.last().map(|s| s.iter) != Some(iter) {
            self.samples.push(TrajectorySample {
                iter,
                p: p.to_vec(),
                residual,
            });
        }
    }

    /// CSV with columns `iter, p_1..p_n, residual`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.samples.first().map_or(0, |s| s.p.len());
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Scenario(format!("writing trajectory csv: {e}"));
        let mut header = vec!["iter".to_string()];
        header.extend((1..=n).map(|i| format!("p_{i}")));
        header.push("residual".into());
        w.write_record(&header).map_err(io)?;
        for s in &self.samples {
            let mut row = vec![s.iter.to_string()];
            row.extend(s.p.iter().map(|v| v.to_string()));
            row.push(s.residual.to_string());
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Scenario(format!("writing trajectory csv: {e}")))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub p_bar: Vec<f64>,
    pub iterations: usize,
    /// `|p_bar - I(p_bar)|_inf`
    pub residual: f64,
    pub converged: bool,
    pub trajectory: Option<Trajectory>,
    pub schedule_seed: Option<u64>,
}

struct DivergenceGuard {
    limit: f64,
}

impl DivergenceGuard {
    fn new(map: &InterferenceMap) -> Self {
        let scale = norm_inf(&map.apply(&vec![0.0; map.dim()]));
        Self {
            limit: DIVERGENCE_FACTOR * scale.max(1.0),
        }
    }

    fn check(&self, candidate: &[f64], last: &[f64], iterations: usize) -> Result<()> {
        if candidate.iter().all(|v| v.is_finite() && v.abs() <= self.limit) {
            Ok(())
        } else {
            Err(Error::Divergence {
                iterations,
                last_finite: last.to_vec(),
            })
        }
    }
}

fn check_start(map: &InterferenceMap, p0: &PowerVector, opts: &IterOptions) -> Result<()> {
    check_len("initial power vector", map.dim(), p0.len())?;
    if !(opts.tol >= 0.0) {
        return Err(Error::Domain(format!("tolerance must be >= 0, got {}", opts.tol)));
    }
    Ok(())
}

/// Synchronous iteration `p(t+1) = I(p(t))`, stopped once `|I(p) - p|_inf <= tol`
/// at the current iterate. At least one update is always performed.
pub fn iterate_sync(map: &InterferenceMap, p0: &PowerVector, opts: &IterOptions) -> Result<FixedPointResult> {
    check_start(map, p0, opts)?;
    let guard = DivergenceGuard::new(map);
    let mut traj = opts.record_trajectory.then(Trajectory::default);
    let mut cur = p0.to_vec();
    let mut img = map.apply(&cur);
    guard.check(&img, &cur, 0)?;
    let mut residual = dist_inf(&img, &cur);
    if let Some(t) = traj.as_mut() {
        t.record(0, &cur, residual);
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        std::mem::swap(&mut cur, &mut img);
        iterations += 1;
        map.eval_into(&cur, &mut img);
        guard.check(&img, &cur, iterations)?;
        residual = dist_inf(&img, &cur);
        if let Some(t) = traj.as_mut() {
            t.record(iterations, &cur, residual);
        }
        if residual <= opts.tol {
            converged = true;
            break;
        }
    }
    if let Some(t) = traj.as_mut() {
        t.finish(iterations, &cur, residual);
    }
    Ok(FixedPointResult {
        p_bar: cur,
        iterations,
        residual,
        converged,
        trajectory: traj,
        schedule_seed: None,
    })
}

/// Bounded-staleness asynchronous schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsyncSchedule {
    /// Maximum age `D` (in activations) of any component value a link reads.
    pub staleness_bound: usize,
    /// Per-link probability of updating in a given activation, in `(0, 1]`.
    pub update_probability: Vec<f64>,
    pub seed: u64,
}

impl AsyncSchedule {
    pub fn uniform(n: usize, staleness_bound: usize, update_probability: f64, seed: u64) -> Self {
        Self {
            staleness_bound,
            update_probability: vec![update_probability; n],
            seed,
        }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        check_len("update probabilities", n, self.update_probability.len())?;
        if let Some((i, q)) = self
            .update_probability
            .iter()
            .enumerate()
            .find(|(_, q)| !(**q > 0.0 && **q <= 1.0))
        {
            return Err(Error::Domain(format!("update probability of link {i} must lie in (0, 1], got {q}")));
        }
        Ok(())
    }
}

/// Ring of recent iterates plus the seeded draws that pick who updates and how stale
/// each value it reads is.
pub(crate) struct StaleView {
    history: VecDeque<Vec<f64>>,
    bound: usize,
    probs: Vec<f64>,
    rng: ChaCha8Rng,
}

impl StaleView {
    pub(crate) fn new(schedule: &AsyncSchedule, initial: &[f64]) -> Self {
        let mut history = VecDeque::with_capacity(schedule.staleness_bound + 1);
        history.push_front(initial.to_vec());
        Self {
            history,
            bound: schedule.staleness_bound,
            probs: schedule.update_probability.clone(),
            rng: ChaCha8Rng::seed_from_u64(schedule.seed),
        }
    }

    /// Links updating in this activation, in index order.
    pub(crate) fn draw_active(&mut self) -> Vec<usize> {
        let probs = &self.probs;
        let rng = &mut self.rng;
        (0..probs.len()).filter(|&i| rng.random_bool(probs[i])).collect()
    }

    /// The vector link `i` sees: its own entry is current, every other entry is
    /// `d` activations old with `d` uniform in `[0, min(D, available history)]`.
    pub(crate) fn view_for(&mut self, i: usize, out: &mut [f64]) {
        let depth = self.history.len() - 1;
        for (k, o) in out.iter_mut().enumerate() {
            let d = if k == i || depth == 0 { 0 } else { self.rng.random_range(0..=depth) };
            *o = self.history[d][k];
        }
    }

    pub(crate) fn push(&mut self, current: &[f64]) {
        if self.history.len() > self.bound {
            self.history.pop_back();
        }
        self.history.push_front(current.to_vec());
    }
}

/// Totally asynchronous iteration under `schedule`; stops once the residual at the
/// current iterate is within `tol`.
pub fn iterate_async(
    map: &InterferenceMap,
    p0: &PowerVector,
    schedule: &AsyncSchedule,
    opts: &IterOptions,
) -> Result<FixedPointResult> {
    check_start(map, p0, opts)?;
    let n = map.dim();
    schedule.validate(n)?;
    let guard = DivergenceGuard::new(map);
    let mut traj = opts.record_trajectory.then(Trajectory::default);
    let mut view = StaleView::new(schedule, p0);
    let mut cur = p0.to_vec();
    let mut img = map.apply(&cur);
    guard.check(&img, &cur, 0)?;
    let mut residual = dist_inf(&img, &cur);
    if let Some(t) = traj.as_mut() {
        t.record(0, &cur, residual);
    }
    let mut seen = vec![0.0; n];
    let mut next = cur.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        next.copy_from_slice(&cur);
        for i in view.draw_active() {
            view.view_for(i, &mut seen);
            next[i] = map.eval_component(i, &seen);
        }
        guard.check(&next, &cur, iterations)?;
        std::mem::swap(&mut cur, &mut next);
        iterations += 1;
        view.push(&cur);
        map.eval_into(&cur, &mut img);
        residual = dist_inf(&img, &cur);
        if let Some(t) = traj.as_mut() {
            t.record(iterations, &cur, residual);
        }
        if residual <= opts.tol {
            converged = true;
            break;
        }
    }
    if let Some(t) = traj.as_mut() {
        t.finish(iterations, &cur, residual);
    }
    Ok(FixedPointResult {
        p_bar: cur,
        iterations,
        residual,
        converged,
        trajectory: traj,
        schedule_seed: Some(schedule.seed),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifySampler {
    pub num_pairs: usize,
    /// Powers are drawn log-uniformly from this range.
    pub power_range: (f64, f64),
    pub seed: u64,
}

pub const SCALABILITY_FACTORS: [f64; 3] = [1.1, 2.0, 10.0];
const MAX_WITNESSES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub link: usize,
    pub p: Vec<f64>,
    /// Second point for monotonicity witnesses.
    pub p_other: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    /// The two sides of the violated inequality `lhs > rhs` (or `lhs <= rhs`).
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AxiomCheck {
    pub trials: usize,
    pub failures: usize,
    pub witnesses: Vec<Witness>,
}

impl AxiomCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn fail(&mut self, w: Witness) {
        self.failures += 1;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(w);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PropertyReport {
    pub positivity: AxiomCheck,
    pub monotonicity: AxiomCheck,
    pub scalability: AxiomCheck,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.positivity.passed() && self.monotonicity.passed() && self.scalability.passed()
    }
}

/// Randomized check of positivity, monotonicity and scalability.
pub fn certify_standard(map: &InterferenceMap, sampler: &CertifySampler) -> Result<PropertyReport> {
    let (lo, hi) = sampler.power_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::Domain(format!("sampler power range must be positive, got [{lo}, {hi}]")));
    }
    let n = map.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut report = PropertyReport::default();

    let positivity = |p: &[f64], ip: &[f64], report: &mut PropertyReport| {
        report.positivity.trials += 1;
        if let Some(i) = ip.iter().position(|v| !(*v > 0.0)) {
            report.positivity.fail(Witness {
                link: i,
                p: p.to_vec(),
                p_other: None,
                alpha: None,
                lhs: ip[i],
                rhs: 0.0,
            });
        }
    };
    let zero = vec![0.0; n];
    positivity(&zero, &map.apply(&zero), &mut report);

    for _ in 0..sampler.num_pairs {
        let p: Vec<f64> = (0..n)
            .map(|_| if lhi > llo { rng.random_range(llo..lhi).exp() } else { lo })
            .collect();
        let ip = map.apply(&p);
        positivity(&p, &ip, &mut report);

        let p_up: Vec<f64> = p
            .iter()
            .map(|&v| if rng.random_bool(0.5) { v * (1.0 + rng.random_range(0.0..1.0)) } else { v })
            .collect();
        let ip_up = map.apply(&p_up);
        report.monotonicity.trials += 1;
        if let Some(i) = (0..n).find(|&i| !(ip[i] <= ip_up[i])) {
            report.monotonicity.fail(Witness {
                link: i,
                p: p.clone(),
                p_other: Some(p_up),
                alpha: None,
                lhs: ip[i],
                rhs: ip_up[i],
            });
        }

        for alpha in SCALABILITY_FACTORS {
            let scaled: Vec<f64> = p.iter().map(|v| alpha * v).collect();
            let i_scaled = map.apply(&scaled);
            report.scalability.trials += 1;
            if let Some(i) = (0..n).find(|&i| !(alpha * ip[i] > i_scaled[i])) {
                report.scalability.fail(Witness {
                    link: i,
                    p: p.clone(),
                    p_other: None,
                    alpha: Some(alpha),
                    lhs: alpha * ip[i],
                    rhs: i_scaled[i],
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sinr;
    use crate::testkit::symmetric_pair;

    fn target_map(g: f64) -> InterferenceMap {
        InterferenceMap::target_sinr(&symmetric_pair(), &SinrVector::uniform(2, g).unwrap()).unwrap()
    }

    fn pv(v: &[f64]) -> PowerVector {
        PowerVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sync_target_sinr_converges_to_minimal_power() {
        let r = iterate_sync(&target_map(1.0), &pv(&[1.0, 1.0]), &IterOptions::default()).unwrap();
        assert!(r.converged && r.residual <= 1e-9);
        assert!((r.p_bar[0] - 0.2).abs() < 1e-8 && (r.p_bar[1] - 0.2).abs() < 1e-8);
        let g = sinr(&symmetric_pair(), &pv(&r.p_bar)).unwrap();
        assert!(g.iter().all(|g| (g - 1.0).abs() < 1e-7));
    }

    #[test]
    fn capped_infeasible_saturates() {
        let map = target_map(2.5).capped(vec![1.0, 1.0]).unwrap();
        let r = iterate_sync(&map, &pv(&[0.0, 0.0]), &IterOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.p_bar, vec![1.0, 1.0]);
        let g = sinr(&symmetric_pair(), &pv(&r.p_bar)).unwrap();
        assert!(g.iter().all(|&g| g < 2.5));
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let id = InterferenceMap::custom(3, "identity", |p, out| out.copy_from_slice(p));
        let r = iterate_sync(&id, &pv(&[0.3, 2.0, 5.0]), &IterOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.p_bar, vec![0.3, 2.0, 5.0]);
    }

    #[test]
    fn uncapped_infeasible_diverges() {
        let err = iterate_sync(&target_map(2.5), &pv(&[1.0, 1.0]), &IterOptions::default()).unwrap_err();
        match err {
            Error::Divergence { last_finite, .. } => assert!(last_finite.iter().all(|v| v.is_finite())),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn budget_exhaustion_is_flagged_not_an_error() {
        let opts = IterOptions {
            max_iter: 3,
            ..Default::default()
        };
        let r = iterate_sync(&target_map(1.9), &pv(&[0.0, 0.0]), &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn async_matches_sync_fixed_point() {
        for seed in [1, 2, 99] {
            let sched = AsyncSchedule::uniform(2, 3, 0.6, seed);
            let r = iterate_async(&target_map(1.0), &pv(&[1.0, 1.0]), &sched, &IterOptions::default()).unwrap();
            assert!(r.converged);
            assert_eq!(r.schedule_seed, Some(seed));
            assert!((r.p_bar[0] - 0.2).abs() < 1e-7 && (r.p_bar[1] - 0.2).abs() < 1e-7);
        }
    }

    #[test]
    fn degenerate_schedule_reproduces_sync_trajectory() {
        let opts = IterOptions {
            record_trajectory: true,
            ..Default::default()
        };
        let map = target_map(1.5).capped(vec![0.8, 0.9]).unwrap();
        let s = iterate_sync(&map, &pv(&[0.0, 0.0]), &opts).unwrap();
        let a = iterate_async(&map, &pv(&[0.0, 0.0]), &AsyncSchedule::uniform(2, 0, 1.0, 7), &opts).unwrap();
        assert_eq!(s.trajectory, a.trajectory);
        assert_eq!(s.p_bar, a.p_bar);
        assert_eq!(s.iterations, a.iterations);
    }

    #[test]
    fn async_is_deterministic_per_seed() {
        let sched = AsyncSchedule::uniform(2, 5, 0.4, 1234);
        let a = iterate_async(&target_map(1.2), &pv(&[0.5, 0.1]), &sched, &IterOptions::default()).unwrap();
        let b = iterate_async(&target_map(1.2), &pv(&[0.5, 0.1]), &sched, &IterOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn async_rejects_bad_probability() {
        let sched = AsyncSchedule::uniform(2, 1, 0.0, 0);
        assert!(iterate_async(&target_map(1.0), &pv(&[0.0, 0.0]), &sched, &IterOptions::default()).is_err());
    }

    #[test]
    fn cap_is_idempotent() {
        let once = target_map(1.7).capped(vec![0.5, 0.7]).unwrap();
        let twice = once.clone().capped(vec![0.5, 0.7]).unwrap();
        let opts = IterOptions {
            record_trajectory: true,
            ..Default::default()
        };
        let a = iterate_sync(&once, &pv(&[0.0, 0.0]), &opts).unwrap();
        let b = iterate_sync(&twice, &pv(&[0.0, 0.0]), &opts).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
    }

    #[test]
    fn trajectory_is_decimated() {
        let slow = InterferenceMap::custom(1, "slow", |p, out| out[0] = 0.99999 * p[0] + 1.0);
        let opts = IterOptions {
            tol: 0.0,
            max_iter: 50_000,
            record_trajectory: true,
        };
        let r = iterate_sync(&slow, &pv(&[0.0]), &opts).unwrap();
        let t = r.trajectory.unwrap();
        assert!(t.samples.len() <= MAX_TRAJECTORY_SAMPLES + 1);
        assert!(t.stride > 1);
        assert_eq!(t.samples.last().unwrap().iter, 50_000);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,p_1,residual\n0,0,1\n"));
    }

    #[test]
    fn certify_target_and_capped_maps() {
        let sampler = CertifySampler {
            num_pairs: 200,
            power_range: (1e-3, 10.0),
            seed: 3,
        };
        assert!(certify_standard(&target_map(1.3), &sampler).unwrap().all_pass());
        let capped = target_map(1.3).capped(vec![0.2, 5.0]).unwrap();
        assert!(certify_standard(&capped, &sampler).unwrap().all_pass());
        let constant = InterferenceMap::custom(2, "const", |_, out| out.fill(0.7));
        assert!(certify_standard(&constant, &sampler).unwrap().all_pass());
    }

    #[test]
    fn quadratic_map_fails_scalability_with_witness() {
        let quad = InterferenceMap::custom(1, "quadratic", |p, out| out[0] = p[0] * p[0] + 1.0);
        // the documented witness: alpha = 2, p = 2 gives 10 < 17
        assert_eq!(2.0 * quad.apply(&[2.0])[0], 10.0);
        assert_eq!(quad.apply(&[4.0])[0], 17.0);
        let report = certify_standard(
            &quad,
            &CertifySampler {
                num_pairs: 100,
                power_range: (0.01, 10.0),
                seed: 0,
            },
        )
        .unwrap();
        assert!(report.positivity.passed() && report.monotonicity.passed());
        assert!(!report.scalability.passed());
        let w = &report.scalability.witnesses[0];
        assert!(w.lhs <= w.rhs);
        let alpha = w.alpha.unwrap();
        assert_eq!(w.lhs, alpha * (w.p[0] * w.p[0] + 1.0));
    }

    #[test]
    fn certify_rejects_bad_range() {
        let s = CertifySampler {
            num_pairs: 1,
            power_range: (0.0, 1.0),
            seed: 0,
        };
        assert!(certify_standard(&target_map(1.0), &s).is_err());
    }
}
