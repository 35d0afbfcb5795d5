//! Telemetry-producing experiments built on the channel, simulator and
//! refrigerator modules.
//!
//! Every run is a pure function of its configuration and seed. Runtime
//! assertions are recorded as [`Check`]s rather than aborting, so callers can
//! still persist the trace of a failing run.

mod bounds;
mod decay;
mod epr;
mod protocol;
mod stockpile;

pub use bounds::{
    concavity_margin, dephasing_bound, entropy_ledger_exhaustive, entropy_ledger_step, pinsker_margin,
    run_bounds, BoundsConfig, ConstantMode, DephasingBoundParams, EntropyLedger,
};
pub use decay::{run_depolarizing_decay, CircuitPolicy, DecayConfig};
pub use epr::{max_dephased_decoder_fidelity, run_epr_storage, EprCode, EprConfig};
pub use protocol::{
    run_refrigerator_protocol, CodeBasis, LogicalState, ProtocolConfig, ProtocolParams, SimMode,
};
pub use stockpile::{run_stockpile, StockpileConfig};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{choi_positive, io::ChannelFile, ChannelError, SuperOp};
use crate::classify::ClassifyError;
use crate::densim::SimError;
use crate::fridge::FridgeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("registers have different shapes")]
    ShapeMismatch,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Fridge(#[from] FridgeError),
}

/// One row of experiment telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub entropy_bits: f64,
    pub information_bits: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epr_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub logical_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub gaps: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_gap: Option<f64>,
}

impl TraceRecord {
    pub fn new(step: usize, entropy_bits: f64, information_bits: f64) -> Self {
        Self {
            step,
            entropy_bits,
            information_bits,
            epr_fidelity: None,
            logical_fidelity: None,
            gaps: Vec::new(),
            max_gap: None,
        }
    }
}

/// A named runtime assertion and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunOutput {
    pub records: Vec<TraceRecord>,
    /// A second trace for paired comparisons (stale-ancilla baseline).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Vec<TraceRecord>>,
    pub summary: serde_json::Map<String, serde_json::Value>,
    pub checks: Vec<Check>,
}

impl RunOutput {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).expect("serializable"));
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(|v| v.as_f64())
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Named noise channels accepted in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Identity,
    Depolarizing { p: f64 },
    Dephasing { p: f64 },
    AmplitudeDamping { p: f64 },
    GeneralizedAmplitudeDamping { gamma: f64, excited: f64 },
    Pauli { px: f64, py: f64, pz: f64 },
    Custom {
        #[serde(default)]
        kraus: Option<Vec<Vec<Vec<[f64; 2]>>>>,
        #[serde(default)]
        ptm: Option<Vec<Vec<f64>>>,
    },
}

impl NoiseSpec {
    pub fn to_superop(&self) -> Result<SuperOp, ChannelError> {
        match self {
            Self::Identity => Ok(SuperOp::identity()),
            Self::Depolarizing { p } => SuperOp::depolarizing(*p),
            Self::Dephasing { p } => SuperOp::dephasing(*p),
            Self::AmplitudeDamping { p } => SuperOp::amplitude_damping(*p),
            Self::GeneralizedAmplitudeDamping { gamma, excited } => {
                SuperOp::generalized_amplitude_damping(*gamma, *excited)
            }
            Self::Pauli { px, py, pz } => SuperOp::pauli(*px, *py, *pz),
            Self::Custom { kraus, ptm } => {
                let c = ChannelFile { kraus: kraus.clone(), ptm: ptm.clone() }.to_superop()?;
                if !choi_positive(&c) {
                    return Err(ChannelError::NotCompletelyPositive("Choi matrix has a negative eigenvalue".into()));
                }
                Ok(c)
            }
        }
    }
}

/// Trace rows as JSON lines.
pub fn to_jsonl(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("serializable"));
        out.push('\n');
    }
    out
}

pub const CSV_HEADER: &str = "step,entropy_bits,information_bits,epr_fidelity,logical_fidelity,max_gap";

/// Format a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Trace rows as CSV with the fixed column order in [`CSV_HEADER`]; missing
/// values are empty fields.
pub fn to_csv(records: &[TraceRecord]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.step,
            fmt_f64(r.entropy_bits),
            fmt_f64(r.information_bits),
            opt(r.epr_fidelity),
            opt(r.logical_fidelity),
            opt(r.max_gap)
        );
    }
    out
}

fn default_seed() -> u64 {
    0
}
