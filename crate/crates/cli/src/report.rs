use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Infeasible,
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Infeasible => crate::error::EXIT_INFEASIBLE,
            Status::NotConverged => crate::error::EXIT_NOT_CONVERGED,
        }
    }

    pub fn from_converged(converged: bool) -> Self {
        if converged {
            Status::Ok
        } else {
            Status::NotConverged
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: String,
    /// The invocation, for re-running.
    pub argv: Vec<String>,
    /// `sha256:` of the canonical (sorted-key, compact) input JSON.
    pub input_digest: Option<String>,
    pub seed: u64,
    pub status: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub results: Value,
    pub artifacts: Vec<String>,
    pub wall_time_s: f64,
}

/// Content hash of a JSON document, independent of key order and whitespace.
pub fn canonical_digest(value: &Value) -> String {
    // serde_json's map is ordered by key, so compact serialization is canonical
    let bytes = serde_json::to_vec(value).expect("json value serializes");
    let hash = Sha256::digest(&bytes);
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}
