//! Single-carrier network model and the SINR algebra.
//!
//! Gains are stored transmitter-major: `gain[k][i]` is the linear power gain
//! from transmitter `k` to receiver `i`. The interference-plus-noise seen by
//! receiver `i` is therefore a column sum over `k != i`.

use std::ops::Deref;

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    gain: Vec<Vec<f64>>,
    noise: Vec<f64>,
    p_min: Vec<f64>,
    p_max: Vec<f64>,
    gamma_min: Vec<f64>,
    gamma_max: Vec<f64>,
}

impl NetworkModel {
    /// Builds a model with no power or SINR limits (`p_min = 0`,
    /// `p_max = +inf`, `gamma_min = 0`, `gamma_max = +inf`).
    pub fn new(gain: Vec<Vec<f64>>, noise: Vec<f64>) -> Result<Self> {
        let n = noise.len();
        let model = Self {
            gain,
            noise,
            p_min: vec![0.0; n],
            p_max: vec![f64::INFINITY; n],
            gamma_min: vec![0.0; n],
            gamma_max: vec![f64::INFINITY; n],
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_power_limits(mut self, p_min: Vec<f64>, p_max: Vec<f64>) -> Result<Self> {
        self.p_min = p_min;
        self.p_max = p_max;
        self.validate()?;
        Ok(self)
    }

    pub fn with_sinr_limits(mut self, gamma_min: Vec<f64>, gamma_max: Vec<f64>) -> Result<Self> {
        self.gamma_min = gamma_min;
        self.gamma_max = gamma_max;
        self.validate()?;
        Ok(self)
    }

    /// Uniform `p_max` on every link, `p_min = 0`.
    pub fn with_uniform_cap(self, p_max: f64) -> Result<Self> {
        let n = self.num_links();
        self.with_power_limits(vec![0.0; n], vec![p_max; n])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.noise.len();
        if n == 0 {
            return Err(Error::InvalidModel("network has no links".into()));
        }
        check_len("gain rows", n, self.gain.len())?;
        for row in &self.gain {
            check_len("gain columns", n, row.len())?;
        }
        check_len("p_min", n, self.p_min.len())?;
        check_len("p_max", n, self.p_max.len())?;
        check_len("gamma_min", n, self.gamma_min.len())?;
        check_len("gamma_max", n, self.gamma_max.len())?;
        for (k, row) in self.gain.iter().enumerate() {
            for (i, &h) in row.iter().enumerate() {
                if !h.is_finite() || h < 0.0 {
                    return Err(Error::InvalidModel(format!("gain h[{k}][{i}] = {h} must be finite and >= 0")));
                }
                if k == i && h <= 0.0 {
                    return Err(Error::InvalidModel(format!("direct gain h[{i}][{i}] must be > 0")));
                }
            }
        }
        for i in 0..n {
            let nz = self.noise[i];
            if !nz.is_finite() || nz <= 0.0 {
                return Err(Error::InvalidModel(format!("noise n[{i}] = {nz} must be finite and > 0")));
            }
            let (lo, hi) = (self.p_min[i], self.p_max[i]);
            if !lo.is_finite() || lo < 0.0 || hi.is_nan() || lo > hi {
                return Err(Error::InvalidModel(format!(
                    "power limits of link {i} must satisfy 0 <= p_min <= p_max (got {lo}, {hi})"
                )));
            }
            let (lo, hi) = (self.gamma_min[i], self.gamma_max[i]);
            if !lo.is_finite() || lo < 0.0 || hi.is_nan() || lo > hi {
                return Err(Error::InvalidModel(format!(
                    "sinr limits of link {i} must satisfy 0 <= gamma_min <= gamma_max (got {lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    pub fn num_links(&self) -> usize {
        self.noise.len()
    }

    /// Gain from transmitter `k` to receiver `i`.
    #[inline]
    pub fn gain(&self, k: usize, i: usize) -> f64 {
        self.gain[k][i]
    }

    #[inline]
    pub fn direct_gain(&self, i: usize) -> f64 {
        self.gain[i][i]
    }

    pub fn gains(&self) -> &[Vec<f64>] {
        &self.gain
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    pub fn p_min(&self) -> &[f64] {
        &self.p_min
    }

    pub fn p_max(&self) -> &[f64] {
        &self.p_max
    }

    pub fn gamma_min(&self) -> &[f64] {
        &self.gamma_min
    }

    pub fn gamma_max(&self) -> &[f64] {
        &self.gamma_max
    }

    pub fn has_sinr_limits(&self) -> bool {
        self.gamma_min.iter().any(|&g| g > 0.0) || self.gamma_max.iter().any(|g| g.is_finite())
    }

    /// True when every off-diagonal gain is zero.
    pub fn is_decoupled(&self) -> bool {
        self.gain
            .iter()
            .enumerate()
            .all(|(k, row)| row.iter().enumerate().all(|(i, &h)| k == i || h == 0.0))
    }

    /// Returns a copy with every noise power multiplied by `c`.
    pub fn with_scaled_noise(&self, c: f64) -> Result<Self> {
        let mut m = self.clone();
        for n in &mut m.noise {
            *n *= c;
        }
        m.validate()?;
        Ok(m)
    }
}

macro_rules! vector_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

vector_newtype!(
    /// Per-link transmit powers in watts; finite and nonnegative.
    PowerVector
);
vector_newtype!(
    /// Per-link linear SINR.
    SinrVector
);
vector_newtype!(
    /// Interference-plus-noise power at each receiver, in watts.
    InterferenceVector
);

impl PowerVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!("power p[{i}] = {v} must be finite and >= 0")));
        }
        Ok(Self(p))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    fn check(&self, model: &NetworkModel) -> Result<()> {
        check_len("power vector", model.num_links(), self.len())
    }
}

impl SinrVector {
    /// Builds a vector of SINR values, rejecting negative or NaN entries.
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = gamma.iter().enumerate().find(|(_, v)| v.is_nan() || **v < 0.0) {
            return Err(Error::Domain(format!("sinr gamma[{i}] = {v} must be >= 0")));
        }
        Ok(Self(gamma))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }
}

/// Interference-plus-noise at receiver `i`, summed over transmitters in index order.
#[inline]
pub(crate) fn interference_at(model: &NetworkModel, p: &[f64], i: usize) -> f64 {
    let mut q = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        if k != i {
            q += model.gain[k][i] * pk;
        }
    }
    q + model.noise[i]
}

/// `q_i = sum_{k != i} h[k][i] p[k] + n[i]`.
pub fn interference(model: &NetworkModel, p: &PowerVector) -> Result<InterferenceVector> {
    p.check(model)?;
    Ok(InterferenceVector(
        (0..model.num_links()).map(|i| interference_at(model, p, i)).collect(),
    ))
}

/// `gamma_i = h[i][i] p[i] / q_i`; a zero-power link has SINR exactly 0.
pub fn sinr(model: &NetworkModel, p: &PowerVector) -> Result<SinrVector> {
    let q = interference(model, p)?;
    Ok(SinrVector(
        q.iter()
            .enumerate()
            .map(|(i, &qi)| if p[i] == 0.0 { 0.0 } else { model.direct_gain(i) * p[i] / qi })
            .collect(),
    ))
}

/// Sum of per-link utilities at the SINRs produced by `p`.
pub fn total_utility(model: &NetworkModel, p: &PowerVector, u: &UtilitySpec) -> Result<f64> {
    check_len("utility assignment", model.num_links(), u.len())?;
    let gamma = sinr(model, p)?;
    let mut total = 0.0;
    for (i, &g) in gamma.iter().enumerate() {
        total += u.link(i).value(g).ok_or(Error::UtilityDomain { link: i, gamma: g })?;
    }
    Ok(total)
}

/// Shannon capacity in bits per channel use, `log2(1 + gamma)`.
pub fn capacity(gamma: f64) -> Result<f64> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::Domain(format!("capacity needs gamma >= 0, got {gamma}")));
    }
    Ok(gamma.ln_1p() / std::f64::consts::LN_2)
}
