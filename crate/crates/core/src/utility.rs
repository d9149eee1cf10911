//! Per-link utility functions of SINR.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied utility given by value, first and second derivative evaluators.
#[derive(Clone)]
pub struct TabulatedUtility {
    name: String,
    value: ScalarFn,
    first: ScalarFn,
    second: ScalarFn,
}

impl TabulatedUtility {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        first: impl Fn(f64) -> f64 + Send + Sync + 'static,
        second: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            value: Arc::new(value),
            first: Arc::new(first),
            second: Arc::new(second),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for TabulatedUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabulatedUtility").field("name", &self.name).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Utility {
    /// `ln(gamma)`
    Log,
    /// `gamma^(1 - alpha) / (1 - alpha)`; `alpha = 1` is the `Log` limit.
    AlphaFair(f64),
    /// `ln(1 + gamma)`
    Rate,
    Tabulated(TabulatedUtility),
}

impl PartialEq for Utility {
    fn eq(&self, other: &Self) -> bool {
        match (self.normalized(), other.normalized()) {
            (Utility::Log, Utility::Log) | (Utility::Rate, Utility::Rate) => true,
            (Utility::AlphaFair(a), Utility::AlphaFair(b)) => a == b,
            (Utility::Tabulated(a), Utility::Tabulated(b)) => Arc::ptr_eq(&a.value, &b.value),
            _ => false,
        }
    }
}

impl Utility {
    pub fn alpha_fair(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidUtility {
                link: None,
                reason: format!("alpha-fair exponent must be finite and >= 0, got {alpha}"),
            });
        }
        Ok(Self::AlphaFair(alpha).normalized())
    }

    fn normalized(&self) -> Self {
        match self {
            Utility::AlphaFair(a) if *a == 1.0 => Utility::Log,
            other => other.clone(),
        }
    }

    pub fn label(&self) -> String {
        match self.normalized() {
            Utility::Log => "log".into(),
            Utility::AlphaFair(a) => format!("alpha_fair({a})"),
            Utility::Rate => "rate".into(),
            Utility::Tabulated(t) => format!("tabulated({})", t.name),
        }
    }

    /// `u(gamma)`, or `None` outside the domain (`gamma <= 0` for log and
    /// alpha-fair, `gamma < 0` for rate).
    pub fn value(&self, gamma: f64) -> Option<f64> {
        let v = match self {
            Utility::AlphaFair(a) if *a == 1.0 => return Utility::Log.value(gamma),
            Utility::Log if gamma > 0.0 => gamma.ln(),
            Utility::AlphaFair(a) if gamma > 0.0 => gamma.powf(1.0 - a) / (1.0 - a),
            Utility::Rate if gamma >= 0.0 => gamma.ln_1p(),
            Utility::Tabulated(t) => (t.value)(gamma),
            _ => return None,
        };
        v.is_finite().then_some(v)
    }

    pub fn derivative(&self, gamma: f64) -> Option<f64> {
        let v = match self {
            Utility::AlphaFair(a) if *a == 1.0 => return Utility::Log.derivative(gamma),
            Utility::Log if gamma > 0.0 => 1.0 / gamma,
            Utility::AlphaFair(a) if gamma > 0.0 => gamma.powf(-a),
            Utility::Rate if gamma >= 0.0 => 1.0 / (1.0 + gamma),
            Utility::Tabulated(t) => (t.first)(gamma),
            _ => return None,
        };
        v.is_finite().then_some(v)
    }

    pub fn second_derivative(&self, gamma: f64) -> Option<f64> {
        let v = match self {
            Utility::AlphaFair(a) if *a == 1.0 => return Utility::Log.second_derivative(gamma),
            Utility::Log if gamma > 0.0 => -1.0 / (gamma * gamma),
            Utility::AlphaFair(a) if gamma > 0.0 => -a * gamma.powf(-a - 1.0),
            Utility::Rate if gamma >= 0.0 => -1.0 / ((1.0 + gamma) * (1.0 + gamma)),
            Utility::Tabulated(t) => (t.second)(gamma),
            _ => return None,
        };
        v.is_finite().then_some(v)
    }

    /// `u(e^z)`: the utility as a function of log-SINR.
    pub fn value_log(&self, z: f64) -> Option<f64> {
        match self {
            Utility::Log => z.is_finite().then_some(z),
            Utility::AlphaFair(a) if *a == 1.0 => Utility::Log.value_log(z),
            Utility::AlphaFair(a) => {
                let v = ((1.0 - a) * z).exp() / (1.0 - a);
                v.is_finite().then_some(v)
            }
            _ => self.value(z.exp()),
        }
    }

    /// `u(e^{z + dz}) - u(e^z)`, evaluated without cancellation. Tabulated
    /// utilities fall back to a midpoint-marginal estimate once the step is below
    /// the resolution of `u`.
    pub fn increment_log(&self, z: f64, dz: f64) -> Option<f64> {
        let v = match self {
            Utility::Log => dz,
            Utility::AlphaFair(a) if *a == 1.0 => dz,
            Utility::AlphaFair(a) => ((1.0 - a) * z).exp() * ((1.0 - a) * dz).exp_m1() / (1.0 - a),
            Utility::Rate => {
                let g = z.exp();
                (g * dz.exp_m1() / (1.0 + g)).ln_1p()
            }
            Utility::Tabulated(_) => {
                let (a, b) = (self.value_log(z)?, self.value_log(z + dz)?);
                if (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
                    self.marginal_log(z + 0.5 * dz)? * dz
                } else {
                    b - a
                }
            }
        };
        v.is_finite().then_some(v)
    }

    /// `d/dz u(e^z) = gamma * u'(gamma)`.
    pub fn marginal_log(&self, z: f64) -> Option<f64> {
        match self {
            Utility::Log => Some(1.0),
            Utility::AlphaFair(a) if *a == 1.0 => Some(1.0),
            Utility::AlphaFair(a) => {
                let v = ((1.0 - a) * z).exp();
                v.is_finite().then_some(v)
            }
            Utility::Rate => Some(1.0 / (1.0 + (-z).exp())),
            Utility::Tabulated(_) => {
                let g = z.exp();
                self.derivative(g).map(|d| d * g).filter(|v| v.is_finite())
            }
        }
    }

    /// `-gamma u''(gamma) / u'(gamma)`; values >= 1 certify that `u(e^z)` is concave in `z`.
    pub fn relative_risk_aversion(&self, gamma: f64) -> Result<f64> {
        let invalid = |reason: String| Error::InvalidUtility { link: None, reason };
        if !(gamma > 0.0) {
            return Err(Error::Domain(format!("relative risk aversion needs gamma > 0, got {gamma}")));
        }
        let d1 = self.derivative(gamma).ok_or_else(|| invalid(format!("u' undefined at {gamma}")))?;
        if d1 <= 0.0 {
            return Err(invalid(format!("u'({gamma}) = {d1} is not positive")));
        }
        let d2 = self
            .second_derivative(gamma)
            .ok_or_else(|| invalid(format!("u'' undefined at {gamma}")))?;
        Ok(-gamma * d2 / d1)
    }
}

/// Range and resolution used when certifying log-domain concavity.
pub const CERTIFY_RANGE: (f64, f64) = (1e-4, 1e4);
const CERTIFY_POINTS: usize = 81;

/// Log-spaced sample points over the certification range.
pub(crate) fn certification_grid() -> impl Iterator<Item = f64> {
    let (lo, hi) = (CERTIFY_RANGE.0.ln(), CERTIFY_RANGE.1.ln());
    (0..CERTIFY_POINTS).map(move |k| (lo + (hi - lo) * k as f64 / (CERTIFY_POINTS - 1) as f64).exp())
}

/// Utility assignment, one entry per link.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilitySpec {
    links: Vec<Utility>,
}

impl UtilitySpec {
    pub fn uniform(u: Utility, n: usize) -> Self {
        Self { links: vec![u; n] }
    }

    pub fn per_link(links: Vec<Utility>) -> Self {
        Self { links }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn link(&self, i: usize) -> &Utility {
        &self.links[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Utility> {
        self.links.iter()
    }

    /// Checks relative risk aversion >= 1 on the certification grid for every link.
    pub fn certify_log_concave(&self) -> Result<()> {
        for (link, u) in self.links.iter().enumerate() {
            for gamma in certification_grid() {
                let rra = u.relative_risk_aversion(gamma).map_err(|e| match e {
                    Error::InvalidUtility { reason, .. } => Error::InvalidUtility { link: Some(link), reason },
                    other => other,
                })?;
                if rra < 1.0 - 1e-12 {
                    return Err(Error::NonConcave { link, gamma, rra });
                }
            }
        }
        Ok(())
    }

    /// Checks `u'' <= 0` on the certification grid (concavity in linear SINR).
    pub fn certify_concave(&self) -> Result<()> {
        for (link, u) in self.links.iter().enumerate() {
            for gamma in certification_grid() {
                let d2 = u.second_derivative(gamma).unwrap_or(f64::NAN);
                if !(d2 <= 0.0) {
                    return Err(Error::InvalidUtility {
                        link: Some(link),
                        reason: format!("u''({gamma}) = {d2} is not <= 0"),
                    });
                }
            }
        }
        Ok(())
    }
}
