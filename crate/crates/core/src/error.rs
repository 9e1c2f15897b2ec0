use thiserror::Error;

use crate::model::{PmId, VmId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("zero capacity in {0}")]
    ZeroCapacity(&'static str),

    #[error("invalid utilization sample: {0}")]
    InvalidSample(String),

    #[error("negative interval: t1 ({t1}) < t0 ({t0})")]
    NegativeInterval { t0: f64, t1: f64 },

    #[error("line {line}: cannot parse {text:?}")]
    Parse { line: usize, text: String },

    #[error("line {line}: value {value} outside 0..=100")]
    Range { line: usize, value: i64 },

    #[error("trace contains no values")]
    EmptyTrace,

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("no feasible host for VM {vm}")]
    PlacementFailed { vm: VmId },

    #[error("no powered-on hosts")]
    NoHosts,

    #[error("PM {0} hosts no VMs")]
    NoVm(PmId),

    #[error("invariant violated at tick {tick}: {what}")]
    InvariantViolation { tick: u64, what: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
