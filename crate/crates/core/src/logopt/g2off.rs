use serde::Serialize;

use super::{augmented, augmented_increment, check_solver_inputs, finalize, log_box, penalty_loop, projected_ascent, AscentParams, InnerStats, LogSolution};
use crate::error::{check_len, Error, Result};
use crate::model::NetworkModel;
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct G2offConfig {
    /// Initial trial step of each backtracking search.
    pub step: f64,
    pub beta: f64,
    pub armijo_c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub allow_nonconcave: bool,
    /// Starting log-powers; defaults to `y_max`.
    pub y0: Option<Vec<f64>>,
}

impl Default for G2offConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            beta: 0.5,
            armijo_c: 1e-4,
            tol: 1e-8,
            max_iter: 50_000,
            allow_nonconcave: false,
            y0: None,
        }
    }
}

impl G2offConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Domain(format!("step must be positive, got {}", self.step)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Domain(format!("backtracking beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::Domain(format!("armijo constant must lie in (0, 1), got {}", self.armijo_c)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Centralized projected gradient ascent on `F(y)` over the log-power box.
///
/// Hitting `max_iter` is not an error: the last iterate is returned with
/// `converged = false`.
pub fn solve_g2off(model: &NetworkModel, u: &UtilitySpec, config: &G2offConfig) -> Result<LogSolution> {
    config.validate()?;
    check_solver_inputs(model, u, config.allow_nonconcave)?;
    let (lo, hi) = log_box(model);
    let y0 = match &config.y0 {
        Some(y) => {
            check_len("starting point", model.num_links(), y.len())?;
            y.clone()
        }
        None => hi.clone(),
    };
    let mut budget = config.max_iter;
    let (pen, stats) = penalty_loop(model, config.tol, y0, |pen, y| {
        let params = AscentParams {
            step0: config.step,
            beta: config.beta,
            armijo_c: config.armijo_c,
            tol: config.tol,
            max_iter: budget,
            power_scaled: false,
            warm_step: false,
        };
        let out = projected_ascent(
            |y| augmented(model, u, y, pen).map(|a| (a.value, a.grad)),
            |a, b| augmented_increment(model, u, pen, a, b),
            y,
            &lo,
            &hi,
            &params,
        )?;
        budget -= out.iterations;
        Ok(InnerStats {
            y: out.y,
            iterations: out.iterations,
            converged: out.converged,
            history: out.history,
        })
    })?;
    let y = stats.y.clone();
    finalize("g2off", model, u, y, &pen, stats, config.tol)
}
