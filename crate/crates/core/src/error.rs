use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("utility of link {link} is undefined at sinr {gamma}")]
    UtilityDomain { link: usize, gamma: f64 },

    #[error("invalid utility{}: {reason}", link.map(|l| format!(" on link {l}")).unwrap_or_default())]
    InvalidUtility { link: Option<usize>, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("utility of link {link} is not concave in log-sinr: relative risk aversion {rra} < 1 at sinr {gamma}")]
    NonConcave { link: usize, gamma: f64, rra: f64 },

    #[error("{what} did not converge after {iterations} iterations (best estimate {best})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        best: f64,
    },

    #[error("iteration diverged after {iterations} iterations")]
    Divergence {
        iterations: usize,
        last_finite: Vec<f64>,
    },

    #[error("oscillation detected: objective regressed for {activations} consecutive activations")]
    Oscillation { activations: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("scenario error: {0}")]
    Scenario(String),
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}
