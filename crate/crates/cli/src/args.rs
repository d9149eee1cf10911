use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use powerctl_core::scenario::Algo;

#[derive(Debug, Parser)]
#[command(name = "powerctl", version, about = "Utility-based power control workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

/// Flags shared by every command; they override the scenario's `solver` section.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Scenario file (JSON, schema_version 1).
    #[arg(long, global = true, value_name = "FILE")]
    pub scenario: Option<PathBuf>,
    /// Seed for schedules, noise and the generator.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Stopping tolerance.
    #[arg(long, global = true, value_name = "X")]
    pub tol: Option<f64>,
    /// Iteration limit.
    #[arg(long, global = true, value_name = "N")]
    pub max_iter: Option<usize>,
    /// Single-carrier solver.
    #[arg(long, global = true, value_enum)]
    pub algo: Option<AlgoArg>,
    /// Directory for report.json and CSV artifacts; the report goes to stdout otherwise.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Uniform SINR target `X`, or a range `LO:HI:STEP` for sweep and plot.
    #[arg(long, global = true, value_name = "LO:HI:STEP")]
    pub gamma: Option<GammaArg>,
    /// Staleness bound D; switches fixed-point and g2too to an asynchronous schedule.
    #[arg(long, global = true, value_name = "D")]
    pub async_staleness: Option<usize>,
    /// Measurement noise bound b for g2too.
    #[arg(long, global = true, value_name = "B")]
    pub noise: Option<f64>,
    /// Solve even when the concavity certificate fails.
    #[arg(long, global = true)]
    pub allow_nonconcave: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    G2off,
    G2too,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::G2off => Algo::G2off,
            AlgoArg::G2too => Algo::G2too,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Perron-root feasibility of the SINR target and the minimal power vector.
    CheckFeas,
    /// Fixed-point iteration of the target-SINR map from p = 0.
    FixedPoint,
    /// Utility maximization with g2off or g2too.
    Solve,
    /// Multi-carrier allocation under per-link budgets.
    SolveMc,
    /// Tabulate feasibility over a uniform SINR target range, or the optimum over a budget range.
    Sweep {
        /// Uniform budget range `LO:HI:STEP` (multi-carrier scenarios).
        #[arg(long, value_name = "LO:HI:STEP")]
        budget: Option<Range>,
    },
    /// Randomized check that the interference maps are standard.
    CertifyIf {
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
    },
    /// Grid-search optimum for networks of at most three links.
    Oracle {
        #[arg(long, default_value_t = 41)]
        resolution: usize,
        #[arg(long, default_value_t = 4)]
        refine_rounds: usize,
    },
    /// Convergence and sweep CSVs plus a matplotlib script (needs --out).
    Plot,
    /// Synthesize a scenario from random placements.
    Generate {
        #[arg(long)]
        links: usize,
        /// Side of the square area in metres.
        #[arg(long, default_value_t = 500.0)]
        area: f64,
        #[arg(long, default_value_t = 4.0)]
        alpha: f64,
        /// Minimum transmitter-receiver distance in metres.
        #[arg(long, default_value_t = 20.0)]
        min_distance: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckFeas => "check-feas",
            Command::FixedPoint => "fixed-point",
            Command::Solve => "solve",
            Command::SolveMc => "solve-mc",
            Command::Sweep { .. } => "sweep",
            Command::CertifyIf { .. } => "certify-if",
            Command::Oracle { .. } => "oracle",
            Command::Plot => "plot",
            Command::Generate { .. } => "generate",
        }
    }
}

/// `LO:HI:STEP`, inclusive of `HI` when it lies on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

/// Rounds to 12 significant digits so grid values such as `0.1 + 19 * 0.1` land on `2`.
fn round_sig(v: f64) -> f64 {
    format!("{v:.11e}").parse().expect("formatted float parses")
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step * (1.0 + 1e-12)).floor() as usize + 1;
        (0..count).map(|k| round_sig(self.lo + k as f64 * self.step)).collect()
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else {
            return Err(format!("expected LO:HI:STEP, got {s:?}"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"));
        let r = Range {
            lo: num(lo)?,
            hi: num(hi)?,
            step: num(step)?,
        };
        if !(r.lo.is_finite() && r.hi.is_finite() && r.step > 0.0 && r.step.is_finite() && r.hi >= r.lo) {
            return Err(format!("range needs finite LO <= HI and STEP > 0, got {s:?}"));
        }
        if (r.hi - r.lo) / r.step > 1e6 {
            return Err(format!("range {s:?} has more than a million points"));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaArg {
    Value(f64),
    Range(Range),
}

impl FromStr for GammaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains(':') {
            return s.parse().map(GammaArg::Range);
        }
        let v: f64 = s.trim().parse().map_err(|e| format!("bad SINR target {s:?}: {e}"))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(format!("SINR target must be positive, got {v}"));
        }
        Ok(GammaArg::Value(v))
    }
}
