//! Utility-based power control for interference-limited wireless networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`] and [`utility`]: the single-carrier network, SINR algebra and utilities.
//! - [`feasibility`]: Perron-root feasibility of SINR targets and the minimal power vector.
//! - [`fixedpoint`]: standard interference maps, synchronous and asynchronous iteration.
//! - [`logopt`]: utility maximization in log-power coordinates, centralized (`G2off`)
//!   and distributed with interference prices (`G2Too`), with KKT certification.
//! - [`multicarrier`]: per-carrier SINR, feasibility and budget-constrained allocation.
//! - [`scenario`] and [`oracle`]: scenario files, the gain generator and a brute-force
//!   grid-search oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feasibility;
pub mod fixedpoint;
pub mod linalg;
pub mod logopt;
pub mod model;
pub mod multicarrier;
pub mod oracle;
pub mod scenario;
pub mod utility;

pub use error::{Error, Result};
pub use feasibility::{check_feasibility, max_uniform_scaling, FeasibilityStatus, FeasibilityVerdict};
pub use logopt::{
    kkt_residual, objective_and_gradient, solve_g2off, solve_g2too, G2offConfig, G2tooConfig, KktResiduals, LogSolution,
    LogVars, Multipliers,
};
pub use model::{capacity, interference, sinr, total_utility, InterferenceVector, NetworkModel, PowerVector, SinrVector};
pub use multicarrier::{
    budget_check, feasibility_mc, sinr_mc, solve_mc, CarrierUtilitySplit, McConfig, McSolution, MultiCarrierModel, QosMode,
};
pub use oracle::{oracle_gridsearch, OracleResult};
pub use scenario::{generate, generate_gains, GeneratorSpec, ResolvedScenario, ScenarioFile};
pub use utility::{TabulatedUtility, Utility, UtilitySpec};

#[cfg(test)]
pub(crate) mod testkit {
    use crate::model::NetworkModel;

    /// Two links, unit direct gains, cross gains 0.5, noise 0.1.
    pub fn symmetric_pair() -> NetworkModel {
        NetworkModel::new(vec![vec![1.0, 0.5], vec![0.5, 1.0]], vec![0.1, 0.1]).unwrap()
    }
}
