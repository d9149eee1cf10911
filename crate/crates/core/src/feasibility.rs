//! Feasibility of SINR targets through the Perron root of the normalized gain matrix.
//!
//! For targets `gamma`, the constraints `gamma_i(p) >= gamma_target_i` read
//! `p >= A p + eta` with `A[i][k] = gamma_i h[k][i] / h[i][i]` (`k != i`) and
//! `eta_i = gamma_i n_i / h[i][i]`. They admit a positive solution iff
//! `rho(A) < 1`, and the smallest one is `p* = (I - A)^{-1} eta`.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dist_inf, norm_inf, Matrix};
use crate::model::{NetworkModel, SinrVector};

pub const SPECTRAL_TOL: f64 = 1e-10;
pub const SPECTRAL_MAX_ITER: usize = 10_000;
/// Relative step at which the Neumann series for `p*` is considered converged.
const NEUMANN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedGainMatrix {
    pub a: Matrix,
    /// Diagonal of `D`, `gamma_i / h[i][i]`.
    pub d: Vec<f64>,
    pub eta: Vec<f64>,
}

pub fn build_normalized(model: &NetworkModel, gamma_target: &SinrVector) -> Result<NormalizedGainMatrix> {
    let n = model.num_links();
    check_len("sinr targets", n, gamma_target.len())?;
    if let Some((i, g)) = gamma_target.iter().enumerate().find(|(_, g)| !(**g > 0.0) || !g.is_finite()) {
        return Err(Error::Domain(format!("sinr target of link {i} must be finite and > 0, got {g}")));
    }
    let d: Vec<f64> = (0..n).map(|i| gamma_target[i] / model.direct_gain(i)).collect();
    let mut a = Matrix::zeros(n);
    for i in 0..n {
        for k in 0..n {
            if k != i {
                a[(i, k)] = d[i] * model.gain(k, i);
            }
        }
    }
    let eta = (0..n).map(|i| d[i] * model.noise()[i]).collect();
    Ok(NormalizedGainMatrix { a, d, eta })
}

/// Perron root of a nonnegative matrix by power iteration from the all-ones vector.
///
/// The estimate is the Rayleigh quotient of the current iterate; the loop stops
/// once `|A x - lambda x|_inf <= tol * lambda |x|_inf`. Nonnegative matrices can
/// be periodic (the power iteration then cycles), so when the residual stops
/// improving the iteration switches to `A + s I` with `s = |A|_inf`, which has the
/// same eigenvectors and a strictly dominant Perron root.
pub fn spectral_radius(a: &Matrix, tol: f64, max_iter: usize) -> Result<f64> {
    let n = a.dim();
    if !a.is_nonnegative() {
        return Err(Error::Domain("spectral radius expects a nonnegative matrix".into()));
    }
    if n == 0 || a.norm_inf() == 0.0 {
        return Ok(0.0);
    }
    let mut x = vec![1.0; n];
    let mut ax = vec![0.0; n];
    let mut shift = 0.0;
    let mut best = (f64::INFINITY, 0.0);
    let mut window_best = f64::INFINITY;
    const WINDOW: usize = 64;

    for it in 0..max_iter {
        a.mul_vec_into(&x, &mut ax);
        let ax_norm = norm_inf(&ax);
        if ax_norm == 0.0 {
            // A^k 1 = 0 with A >= 0 means A is nilpotent.
            return Ok(0.0);
        }
        let num: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().map(|v| v * v).sum();
        let lambda = num / den;
        let residual = if lambda > 0.0 {
            ax.iter().zip(&x).fold(0.0, |m, (b, a)| f64::max(m, (b - lambda * a).abs()))
                / (lambda * norm_inf(&x))
        } else {
            f64::INFINITY
        };
        if residual < best.0 {
            best = (residual, lambda);
        }
        if residual <= tol {
            return Ok(lambda);
        }
        if shift == 0.0 && (it + 1) % WINDOW == 0 {
            if best.0 > 0.5 * window_best {
                shift = a.norm_inf();
            }
            window_best = best.0;
        }
        for (xi, axi) in x.iter_mut().zip(&ax) {
            *xi = axi + shift * *xi;
        }
        let scale = norm_inf(&x);
        x.iter_mut().for_each(|v| *v /= scale);
    }
    Err(Error::Convergence {
        what: "spectral radius",
        iterations: max_iter,
        best: best.1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityStatus {
    Feasible,
    InfeasibleSpectral,
    InfeasibleBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    AboveMax,
    BelowMin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundViolation {
    pub link: usize,
    pub kind: BoundKind,
    pub power: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityVerdict {
    pub rho: f64,
    pub status: FeasibilityStatus,
    pub p_star: Option<Vec<f64>>,
    pub bound_violations: Vec<BoundViolation>,
}

impl FeasibilityVerdict {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasibilityStatus::Feasible
    }

    /// True when `rho < 1`, regardless of the power box.
    pub fn is_spectrally_feasible(&self) -> bool {
        self.status != FeasibilityStatus::InfeasibleSpectral
    }
}

/// Sums the Neumann series `sum_k A^k eta` for `rho(A) < 1`.
///
/// Partial sums are doubled (`S_2m = S_m + A^m S_m`) so the number of matrix
/// products grows with `log(1 / (1 - rho))`, then a few plain steps
/// `p <- A p + eta` polish the result. Returns `None` if the series blows up.
pub fn neumann_solve(a: &Matrix, eta: &[f64]) -> Option<Vec<f64>> {
    let mut p = eta.to_vec();
    let mut power = a.clone();
    for _ in 0..64 {
        let tail = power.mul_vec(&p);
        let step = norm_inf(&tail);
        p.iter_mut().zip(&tail).for_each(|(pi, ti)| *pi += ti);
        if !p.iter().all(|v| v.is_finite()) {
            return None;
        }
        if step <= NEUMANN_TOL * norm_inf(&p) {
            break;
        }
        power = power.mul(&power);
    }
    let mut next = vec![0.0; p.len()];
    for _ in 0..100 {
        a.mul_vec_into(&p, &mut next);
        next.iter_mut().zip(eta).for_each(|(v, e)| *v += e);
        let step = dist_inf(&next, &p);
        std::mem::swap(&mut p, &mut next);
        if step <= NEUMANN_TOL * norm_inf(&p) {
            break;
        }
    }
    p.iter().all(|v| v.is_finite()).then_some(p)
}

pub fn check_feasibility(model: &NetworkModel, gamma_target: &SinrVector) -> Result<FeasibilityVerdict> {
    let norm = build_normalized(model, gamma_target)?;
    let rho = match spectral_radius(&norm.a, SPECTRAL_TOL, SPECTRAL_MAX_ITER) {
        Ok(r) => r,
        Err(Error::Convergence { best, .. }) => best,
        Err(e) => return Err(e),
    };
    let p_star = if rho < 1.0 { neumann_solve(&norm.a, &norm.eta) } else { None };
    let Some(p_star) = p_star else {
        return Ok(FeasibilityVerdict {
            rho,
            status: FeasibilityStatus::InfeasibleSpectral,
            p_star: None,
            bound_violations: Vec::new(),
        });
    };
    let mut bound_violations = Vec::new();
    for (i, &p) in p_star.iter().enumerate() {
        let (lo, hi) = (model.p_min()[i], model.p_max()[i]);
        if p > hi * (1.0 + 1e-12) {
            bound_violations.push(BoundViolation { link: i, kind: BoundKind::AboveMax, power: p, limit: hi });
        } else if p < lo * (1.0 - 1e-12) {
            bound_violations.push(BoundViolation { link: i, kind: BoundKind::BelowMin, power: p, limit: lo });
        }
    }
    let status = if bound_violations.is_empty() {
        FeasibilityStatus::Feasible
    } else {
        FeasibilityStatus::InfeasibleBounds
    };
    Ok(FeasibilityVerdict {
        rho,
        status,
        p_star: Some(p_star),
        bound_violations,
    })
}

/// Largest `s` such that `s * gamma_target` is spectrally feasible (`1 / rho`),
/// or `+inf` for a decoupled network.
pub fn max_uniform_scaling(model: &NetworkModel, gamma_target: &SinrVector) -> Result<f64> {
    let norm = build_normalized(model, gamma_target)?;
    let rho = spectral_radius(&norm.a, SPECTRAL_TOL, SPECTRAL_MAX_ITER)?;
    Ok(if rho == 0.0 { f64::INFINITY } else { 1.0 / rho })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::symmetric_pair;

    fn targets(v: &[f64]) -> SinrVector {
        SinrVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn normalized_symmetric_pair() {
        let norm = build_normalized(&symmetric_pair(), &targets(&[1.0, 1.0])).unwrap();
        assert_eq!(norm.a.to_rows(), vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        assert_eq!(norm.eta, vec![0.1, 0.1]);
        assert_eq!(norm.d, vec![1.0, 1.0]);
    }

    #[test]
    fn normalized_diagonal_and_linearity() {
        let m = NetworkModel::new(vec![vec![2.0, 0.0], vec![0.0, 4.0]], vec![0.1, 0.2]).unwrap();
        let norm = build_normalized(&m, &targets(&[3.0, 1.0])).unwrap();
        assert!(norm.a.to_rows().iter().flatten().all(|&v| v == 0.0));
        assert!((norm.eta[0] - 0.15).abs() < 1e-15 && (norm.eta[1] - 0.05).abs() < 1e-15);

        let base = build_normalized(&symmetric_pair(), &targets(&[0.7, 1.3])).unwrap();
        let scaled = build_normalized(&symmetric_pair(), &targets(&[2.1, 3.9])).unwrap();
        for (x, y) in base.a.scaled(3.0).to_rows().iter().flatten().zip(scaled.a.to_rows().iter().flatten()) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!(build_normalized(&symmetric_pair(), &targets(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn spectral_radius_basics() {
        let a = Matrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        assert!((spectral_radius(&a, 1e-10, 10_000).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(spectral_radius(&Matrix::zeros(3), 1e-10, 10_000).unwrap(), 0.0);
        let nil = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(spectral_radius(&nil, 1e-10, 10_000).unwrap(), 0.0);
    }

    #[test]
    fn spectral_radius_periodic_asymmetric() {
        // eigenvalues +-sqrt(0.2 * 1.8) = +-0.6; plain power iteration cycles
        let a = Matrix::from_rows(&[vec![0.0, 0.2], vec![1.8, 0.0]]).unwrap();
        assert!((spectral_radius(&a, 1e-10, 10_000).unwrap() - 0.6).abs() < 1e-9);
        let cyc = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0], vec![3.0, 0.0, 0.0]]).unwrap();
        assert!((spectral_radius(&cyc, 1e-10, 10_000).unwrap() - 6f64.cbrt()).abs() < 1e-9);
    }

    #[test]
    fn spectral_radius_reports_best_on_budget_exhaustion() {
        let a = Matrix::from_rows(&[vec![0.3, 0.9], vec![0.8, 0.2]]).unwrap();
        match spectral_radius(&a, 0.0, 5) {
            Err(Error::Convergence { best, .. }) => assert!(best > 0.0),
            other => panic!("expected convergence error, got {other:?}"),
        }
        let neg = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!(spectral_radius(&neg, 1e-10, 10).is_err());
    }

    #[test]
    fn feasible_symmetric_pair() {
        let m = symmetric_pair().with_uniform_cap(1.0).unwrap();
        let v = check_feasibility(&m, &targets(&[1.0, 1.0])).unwrap();
        assert_eq!(v.status, FeasibilityStatus::Feasible);
        assert!((v.rho - 0.5).abs() < 1e-12);
        let p = v.p_star.unwrap();
        assert!((p[0] - 0.2).abs() < 1e-12 && (p[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn infeasible_spectral() {
        let v = check_feasibility(&symmetric_pair(), &targets(&[2.5, 2.5])).unwrap();
        assert_eq!(v.status, FeasibilityStatus::InfeasibleSpectral);
        assert!((v.rho - 1.25).abs() < 1e-12);
        assert!(v.p_star.is_none());
    }

    #[test]
    fn bounds_keep_p_star_for_diagnosis() {
        let m = symmetric_pair().with_power_limits(vec![0.0, 0.3], vec![0.1, 1.0]).unwrap();
        let v = check_feasibility(&m, &targets(&[1.0, 1.0])).unwrap();
        assert_eq!(v.status, FeasibilityStatus::InfeasibleBounds);
        assert!((v.rho - 0.5).abs() < 1e-12);
        assert!(v.p_star.is_some());
        let kinds: Vec<_> = v.bound_violations.iter().map(|b| (b.link, b.kind)).collect();
        assert_eq!(kinds, vec![(0, BoundKind::AboveMax), (1, BoundKind::BelowMin)]);
    }

    #[test]
    fn diagonal_model_feasibility_is_the_box_check() {
        let m = NetworkModel::new(vec![vec![1.0, 0.0], vec![0.0, 2.0]], vec![0.1, 0.1])
            .unwrap()
            .with_power_limits(vec![0.0, 0.0], vec![1.0, 1.0])
            .unwrap();
        assert!(check_feasibility(&m, &targets(&[10.0, 20.0])).unwrap().is_feasible());
        let v = check_feasibility(&m, &targets(&[10.0, 20.1])).unwrap();
        assert_eq!(v.status, FeasibilityStatus::InfeasibleBounds);
        assert_eq!(v.rho, 0.0);
    }

    #[test]
    fn uniform_scaling() {
        let m = symmetric_pair();
        assert!((max_uniform_scaling(&m, &targets(&[1.0, 1.0])).unwrap() - 2.0).abs() < 1e-12);
        assert!((max_uniform_scaling(&m, &targets(&[0.5, 0.5])).unwrap() - 4.0).abs() < 1e-12);
        let d = NetworkModel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.1, 0.1]).unwrap();
        assert_eq!(max_uniform_scaling(&d, &targets(&[1.0, 1.0])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn neumann_matches_closed_form() {
        let a = Matrix::from_rows(&[vec![0.0, 0.95], vec![0.95, 0.0]]).unwrap();
        let p = neumann_solve(&a, &[0.1, 0.1]).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-11);
        let r: Vec<f64> = a.mul_vec(&p).iter().zip(&p).map(|(ap, pi)| pi - ap - 0.1).collect();
        assert!(norm_inf(&r) <= 1e-9 * 0.1);
    }
}
