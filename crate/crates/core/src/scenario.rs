//! Scenario files: JSON descriptions of a network, its limits and utilities,
//! optional carriers and solver overrides.
//!
//! Per-link quantities are either one number for every link or an array. For
//! limits, `null` (or an absent field) means unbounded, and so does a `null`
//! array entry for a maximum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetworkModel, SinrVector};
use crate::multicarrier::{CarrierUtilitySplit, MultiCarrierModel, QosMode};
use crate::utility::{Utility, UtilitySpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerLink {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerLink {
    pub fn resolve(&self, n: usize) -> Vec<f64> {
        match self {
            PerLink::Uniform(v) => vec![*v; n],
            PerLink::Each(v) => v.clone(),
        }
    }

    fn check(&self, what: &str, n: usize, problems: &mut Vec<String>) {
        match self {
            PerLink::Each(v) if v.len() != n => problems.push(format!("{what}: expected {n} entries, found {}", v.len())),
            _ => {}
        }
        if self.resolve(n).iter().any(|v| !v.is_finite()) {
            problems.push(format!("{what}: entries must be finite numbers"));
        }
    }
}

/// A per-link limit whose `null` entries are unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Uniform(f64),
    Each(Vec<Option<f64>>),
}

impl Bound {
    pub fn resolve(&self, n: usize, unbounded: f64) -> Vec<f64> {
        match self {
            Bound::Uniform(v) => vec![*v; n],
            Bound::Each(v) => v.iter().map(|x| x.unwrap_or(unbounded)).collect(),
        }
    }

    fn check(&self, what: &str, n: usize, problems: &mut Vec<String>) {
        if let Bound::Each(v) = self {
            if v.len() != n {
                problems.push(format!("{what}: expected {n} entries, found {}", v.len()));
            }
        }
        if self.resolve(n, 0.0).iter().any(|v| !v.is_finite()) {
            problems.push(format!("{what}: entries must be finite numbers or null"));
        }
    }
}

fn resolve_bound(b: &Option<Bound>, n: usize, unbounded: f64) -> Vec<f64> {
    b.as_ref().map_or_else(|| vec![unbounded; n], |b| b.resolve(n, unbounded))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub num_links: usize,
    /// Side of the square deployment area, in metres.
    pub area_size: f64,
    pub path_loss_exponent: f64,
    /// Receivers sit between this distance and twice it from their transmitter, in metres.
    pub min_tx_rx_distance: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    fn check(&self, problems: &mut Vec<String>) {
        if self.num_links == 0 {
            problems.push("generator.num_links must be at least 1".into());
        }
        if !(self.area_size > 0.0 && self.area_size.is_finite()) {
            problems.push(format!("generator.area_size must be positive, got {}", self.area_size));
        }
        if !(2.0..=6.0).contains(&self.path_loss_exponent) {
            problems.push(format!(
                "generator.path_loss_exponent must lie in [2, 6], got {}",
                self.path_loss_exponent
            ));
        }
        if !(self.min_tx_rx_distance > 0.0 && self.min_tx_rx_distance.is_finite()) {
            problems.push(format!(
                "generator.min_tx_rx_distance must be positive, got {}",
                self.min_tx_rx_distance
            ));
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        self.check(&mut problems);
        itemized(problems)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkSpec {
    /// `gains[k][i]`: transmitter `k` to receiver `i`.
    Gains(Vec<Vec<f64>>),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<Bound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<Bound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_min: Option<Bound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_max: Option<Bound>,
}

impl Limits {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilityKind {
    Log,
    AlphaFair { alpha: f64 },
    Rate,
}

impl UtilityKind {
    pub fn to_utility(&self) -> Result<Utility> {
        match self {
            UtilityKind::Log => Ok(Utility::Log),
            UtilityKind::AlphaFair { alpha } => Utility::alpha_fair(*alpha),
            UtilityKind::Rate => Ok(Utility::Rate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UtilityChoice {
    Uniform(UtilityKind),
    PerLink(Vec<UtilityKind>),
}

impl Default for UtilityChoice {
    fn default() -> Self {
        UtilityChoice::Uniform(UtilityKind::Log)
    }
}

impl UtilityChoice {
    pub fn resolve(&self, n: usize) -> Result<Vec<Utility>> {
        match self {
            UtilityChoice::Uniform(k) => Ok(vec![k.to_utility()?; n]),
            UtilityChoice::PerLink(v) => {
                if v.len() != n {
                    return Err(Error::Scenario(format!("utility: expected {n} entries, found {}", v.len())));
                }
                v.iter().map(UtilityKind::to_utility).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierSlice {
    /// Defaults to the scenario's network gains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<Vec<f64>>>,
    /// Defaults to the scenario's noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<PerLink>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<Bound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierSpec {
    pub slices: Vec<CarrierSlice>,
    pub budget: PerLink,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_min: Option<PerLink>,
    #[serde(default)]
    pub qos_mode: QosMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<Bound>,
    /// Objective utility; defaults to the scenario's utility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilityChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qos_utility: Option<UtilityChoice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    G2off,
    G2too,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algo: Option<Algo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub async_staleness: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update_probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_nonconcave: Option<bool>,
}

impl SolverSpec {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub network: NetworkSpec,
    pub noise: PerLink,
    #[serde(default, skip_serializing_if = "Limits::is_empty")]
    pub limits: Limits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_target: Option<PerLink>,
    #[serde(default)]
    pub utility: UtilityChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carriers: Option<CarrierSpec>,
    #[serde(default, skip_serializing_if = "SolverSpec::is_empty")]
    pub solver: SolverSpec,
    /// The generator run that produced explicit gains, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_by: Option<GeneratorSpec>,
}

/// A scenario resolved into the core model types.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub model: NetworkModel,
    pub utilities: UtilitySpec,
    pub gamma_target: Option<SinrVector>,
    pub multicarrier: Option<(MultiCarrierModel, CarrierUtilitySplit)>,
}

fn itemized(problems: Vec<String>) -> Result<()> {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Scenario(problems.join("; ")))
    }
}

impl ScenarioFile {
    /// A scenario with explicit gains, uniform noise, log utilities and no limits.
    pub fn with_gains(gains: Vec<Vec<f64>>, noise: PerLink) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: None,
            network: NetworkSpec::Gains(gains),
            noise,
            limits: Limits::default(),
            gamma_target: None,
            utility: UtilityChoice::default(),
            carriers: None,
            solver: SolverSpec::default(),
            generated_by: None,
        }
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| Error::Scenario(format!("malformed scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("scenario serializes");
        text.push('\n');
        text
    }

    pub fn num_links(&self) -> usize {
        match &self.network {
            NetworkSpec::Gains(g) => g.len(),
            NetworkSpec::Generator(spec) => spec.num_links,
        }
    }

    /// Schema checks that do not need the resolved model; every problem is listed.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            problems.push(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let n = self.num_links();
        match &self.network {
            NetworkSpec::Gains(g) => {
                if g.is_empty() {
                    problems.push("network.gains is empty".into());
                }
                if g.iter().any(|row| row.len() != n) {
                    problems.push(format!("network.gains must be {n}x{n}"));
                }
            }
            NetworkSpec::Generator(spec) => spec.check(&mut problems),
        }
        self.noise.check("noise", n, &mut problems);
        for (what, b) in [
            ("limits.p_min", &self.limits.p_min),
            ("limits.p_max", &self.limits.p_max),
            ("limits.gamma_min", &self.limits.gamma_min),
            ("limits.gamma_max", &self.limits.gamma_max),
        ] {
            if let Some(b) = b {
                b.check(what, n, &mut problems);
            }
        }
        if let Some(t) = &self.gamma_target {
            t.check("gamma_target", n, &mut problems);
        }
        if let UtilityChoice::PerLink(v) = &self.utility {
            if v.len() != n {
                problems.push(format!("utility: expected {n} entries, found {}", v.len()));
            }
        }
        if let Some(c) = &self.carriers {
            if c.slices.is_empty() {
                problems.push("carriers.slices is empty".into());
            }
            for (f, s) in c.slices.iter().enumerate() {
                if let Some(g) = &s.gains {
                    if g.len() != n || g.iter().any(|row| row.len() != n) {
                        problems.push(format!("carriers.slices[{f}].gains must be {n}x{n}"));
                    }
                }
                if let Some(noise) = &s.noise {
                    noise.check(&format!("carriers.slices[{f}].noise"), n, &mut problems);
                }
                if let Some(cap) = &s.cap {
                    cap.check(&format!("carriers.slices[{f}].cap"), n, &mut problems);
                }
            }
            c.budget.check("carriers.budget", n, &mut problems);
            if let Some(u) = &c.u_min {
                u.check("carriers.u_min", n, &mut problems);
                if c.qos_utility.is_none() {
                    problems.push("carriers.u_min needs carriers.qos_utility".into());
                }
            }
            if let Some(v) = &c.v_max {
                v.check("carriers.v_max", n, &mut problems);
            }
        }
        if let Some(p) = self.solver.update_probability {
            if !(p > 0.0 && p <= 1.0) {
                problems.push(format!("solver.update_probability must lie in (0, 1], got {p}"));
            }
        }
        if let Some(t) = self.solver.tol {
            if !(t > 0.0) {
                problems.push(format!("solver.tol must be positive, got {t}"));
            }
        }
        itemized(problems)
    }

    pub fn gains(&self) -> Result<Vec<Vec<f64>>> {
        match &self.network {
            NetworkSpec::Gains(g) => Ok(g.clone()),
            NetworkSpec::Generator(spec) => generate_gains(spec),
        }
    }

    pub fn resolve(&self) -> Result<ResolvedScenario> {
        self.validate()?;
        let n = self.num_links();
        let gains = self.gains()?;
        let noise = self.noise.resolve(n);
        let model = NetworkModel::new(gains.clone(), noise.clone())?
            .with_power_limits(
                resolve_bound(&self.limits.p_min, n, 0.0),
                resolve_bound(&self.limits.p_max, n, f64::INFINITY),
            )?
            .with_sinr_limits(
                resolve_bound(&self.limits.gamma_min, n, 0.0),
                resolve_bound(&self.limits.gamma_max, n, f64::INFINITY),
            )?;
        let utilities = UtilitySpec::per_link(self.utility.resolve(n)?);
        let gamma_target = self.gamma_target.as_ref().map(|t| SinrVector::new(t.resolve(n))).transpose()?;
        let multicarrier = self
            .carriers
            .as_ref()
            .map(|c| resolve_carriers(c, &gains, &noise, &self.utility, n))
            .transpose()?;
        Ok(ResolvedScenario {
            model,
            utilities,
            gamma_target,
            multicarrier,
        })
    }
}

fn resolve_carriers(
    c: &CarrierSpec,
    gains: &[Vec<f64>],
    noise: &[f64],
    utility: &UtilityChoice,
    n: usize,
) -> Result<(MultiCarrierModel, CarrierUtilitySplit)> {
    let slices = c
        .slices
        .iter()
        .map(|s| {
            let g = s.gains.clone().unwrap_or_else(|| gains.to_vec());
            let nz = s.noise.as_ref().map_or_else(|| noise.to_vec(), |v| v.resolve(n));
            NetworkModel::new(g, nz)?.with_power_limits(vec![0.0; n], resolve_bound(&s.cap, n, f64::INFINITY))
        })
        .collect::<Result<Vec<_>>>()?;
    let nf = slices.len();
    let mut model = MultiCarrierModel::new(slices, c.budget.resolve(n))?;
    if let Some(u) = &c.u_min {
        model = model.with_qos_floor(u.resolve(n), c.qos_mode)?;
    }
    if let Some(v) = &c.v_max {
        model = model.with_utility_ceiling(v.resolve(n, f64::INFINITY))?;
    }
    let per_carrier = |choice: &UtilityChoice| -> Result<Vec<Vec<Utility>>> {
        Ok(choice.resolve(n)?.into_iter().map(|u| vec![u; nf]).collect())
    };
    let mut split = CarrierUtilitySplit::new(per_carrier(c.utility.as_ref().unwrap_or(utility))?);
    if let Some(q) = &c.qos_utility {
        split = split.with_qos(per_carrier(q)?);
    }
    Ok((model, split))
}

/// Placements and gains `h[k][i] = max(d(tx_k, rx_i), d(tx_i, rx_i))^-alpha`.
///
/// Transmitters are uniform over the square; each receiver sits at a uniform
/// angle and a distance uniform in `[d_min, 2 d_min]` from its own transmitter.
/// Cross distances are floored at the receiver's direct distance, so no cross
/// gain exceeds the direct gain and every cross/direct ratio
/// `(d_ii / max(d_ki, d_ii))^alpha` is nonincreasing in `alpha`.
pub fn generate_gains(spec: &GeneratorSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let n = spec.num_links;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut tx = Vec::with_capacity(n);
    let mut rx = Vec::with_capacity(n);
    for _ in 0..n {
        let t = (rng.random_range(0.0..spec.area_size), rng.random_range(0.0..spec.area_size));
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let d = rng.random_range(spec.min_tx_rx_distance..=2.0 * spec.min_tx_rx_distance);
        tx.push(t);
        rx.push((t.0 + d * angle.cos(), t.1 + d * angle.sin()));
    }
    let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
    let alpha = spec.path_loss_exponent;
    Ok((0..n)
        .map(|k| {
            (0..n)
                .map(|i| {
                    let direct = dist(tx[i], rx[i]);
                    dist(tx[k], rx[i]).max(direct).powf(-alpha)
                })
                .collect()
        })
        .collect())
}

/// A self-contained scenario with the generated gains and noise
/// `1e-2 * d_min^-alpha` (20 dB SNR at unit power and the minimum distance).
pub fn generate(spec: &GeneratorSpec) -> Result<ScenarioFile> {
    let gains = generate_gains(spec)?;
    let noise = 1e-2 * spec.min_tx_rx_distance.powf(-spec.path_loss_exponent);
    Ok(ScenarioFile {
        name: Some(format!("generated-{}-links-seed-{}", spec.num_links, spec.seed)),
        generated_by: Some(spec.clone()),
        ..ScenarioFile::with_gains(gains, PerLink::Uniform(noise))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(alpha: f64, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            num_links: 5,
            area_size: 500.0,
            path_loss_exponent: alpha,
            min_tx_rx_distance: 20.0,
            seed,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&spec(4.0, 9)).unwrap().to_json();
        let b = generate(&spec(4.0, 9)).unwrap().to_json();
        assert_eq!(a, b);
        assert_ne!(a, generate(&spec(4.0, 10)).unwrap().to_json());
    }

    #[test]
    fn single_link_has_no_cross_gains() {
        let g = generate_gains(&GeneratorSpec { num_links: 1, ..spec(3.0, 1) }).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g[0][0] > 0.0);
    }

    #[test]
    fn steeper_path_loss_weakens_relative_interference() {
        for seed in 0..20 {
            let g2 = generate_gains(&spec(2.0, seed)).unwrap();
            let g4 = generate_gains(&spec(4.0, seed)).unwrap();
            for k in 0..5 {
                for i in 0..5 {
                    assert!(g4[k][i] > 0.0);
                    assert!(g4[k][i] / g4[i][i] <= g2[k][i] / g2[i][i] * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn invalid_generator_fields_are_itemized() {
        let bad = GeneratorSpec {
            num_links: 0,
            area_size: -1.0,
            path_loss_exponent: 7.0,
            min_tx_rx_distance: 0.0,
            seed: 0,
        };
        let Err(Error::Scenario(msg)) = bad.validate() else { panic!() };
        assert_eq!(msg.split("; ").count(), 4, "{msg}");
    }

    #[test]
    fn parses_nulls_as_unbounded() {
        let text = r#"{
            "schema_version": 1,
            "network": {"gains": [[1.0, 0.5], [0.5, 1.0]]},
            "noise": 0.1,
            "limits": {"p_max": [1.0, null], "gamma_max": null},
            "gamma_target": 1.0,
            "utility": {"kind": "alpha_fair", "alpha": 2.0}
        }"#;
        let s = ScenarioFile::from_json(text).unwrap();
        let r = s.resolve().unwrap();
        assert_eq!(r.model.p_max(), &[1.0, f64::INFINITY]);
        assert_eq!(r.model.gamma_max(), &[f64::INFINITY; 2]);
        assert_eq!(r.utilities.link(1), &Utility::AlphaFair(2.0));
        assert_eq!(r.gamma_target.unwrap().as_slice(), &[1.0, 1.0]);
        assert_eq!(ScenarioFile::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn rejects_unknown_fields_and_versions() {
        let base = r#"{"schema_version": 1, "network": {"gains": [[1.0]]}, "noise": 0.1, "bogus": 1}"#;
        assert!(ScenarioFile::from_json(base).is_err());
        let v2 = r#"{"schema_version": 2, "network": {"gains": [[1.0]]}, "noise": 0.1}"#;
        assert!(matches!(ScenarioFile::from_json(v2), Err(Error::Scenario(_))));
        let shape = r#"{"schema_version": 1, "network": {"gains": [[1.0, 0.2]]}, "noise": [0.1, 0.2]}"#;
        assert!(ScenarioFile::from_json(shape).is_err());
    }

    #[test]
    fn carriers_resolve_with_defaults() {
        let text = r#"{
            "schema_version": 1,
            "network": {"gains": [[1.0]]},
            "noise": 0.1,
            "utility": {"kind": "rate"},
            "carriers": {"slices": [{}, {"noise": 0.4, "cap": 0.3}], "budget": 1.0}
        }"#;
        let r = ScenarioFile::from_json(text).unwrap().resolve().unwrap();
        let (mc, split) = r.multicarrier.unwrap();
        assert_eq!(mc.num_carriers(), 2);
        assert_eq!(mc.carrier(1).noise(), &[0.4]);
        assert_eq!(mc.cap(0, 0), f64::INFINITY);
        assert_eq!(mc.cap(0, 1), 0.3);
        assert_eq!(split.v[0], vec![Utility::Rate, Utility::Rate]);
    }

    #[test]
    fn generator_network_resolves_like_generated_file() {
        let s = ScenarioFile {
            network: NetworkSpec::Generator(spec(3.0, 4)),
            ..ScenarioFile::with_gains(vec![], PerLink::Uniform(1e-6))
        };
        let r = s.resolve().unwrap();
        assert_eq!(r.model.gains(), generate_gains(&spec(3.0, 4)).unwrap().as_slice());
    }
}
