use thiserror::Error;

use crate::vrnet::{IncOp, PacketId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("channel support is empty")]
    EmptySupport,
    #[error("expected {support} entries (one per quality), got {got}")]
    SupportMismatch { support: usize, got: usize },
    #[error("frequencies must be positive and sum to 1")]
    BadFrequencies,
    #[error("periodic pattern is empty")]
    EmptyPattern,
    #[error("quality not in support")]
    UnknownQuality,
    #[error("transition matrix rows must be probability vectors")]
    BadTransition,
    #[error("invalid arrival rate {0}")]
    BadRate(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VrError {
    #[error("operation {0:?} is infeasible in the current state")]
    Infeasible(IncOp),
    #[error("reactive coding is undefined for a tuple with no recorded reception")]
    NoReception,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpnError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("service activity graph contains a cycle")]
    Cyclic,
    #[error("entry ({queue}, {activity}) violates the input/output pattern")]
    Pattern { queue: usize, activity: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("protocol violation at {receiver}: {detail}")]
    ProtocolViolation { receiver: &'static str, detail: String },
    #[error("cannot encode {0:?}: queue heads missing")]
    MissingHeads(IncOp),
    #[error("packet {0} is not in the source buffer")]
    MissingPayload(PacketId),
    #[error("packet {0} is not recoverable by its destination")]
    Undecodable(PacketId),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

impl ScenarioError {
    pub fn invalid(field: impl Into<String>, message: impl ToString) -> Self {
        Self::Invalid { field: field.into(), message: message.to_string() }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Vr(#[from] VrError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Spn(#[from] SpnError),
    #[error("invariant violated at step {step}: {detail}")]
    Invariant { step: u64, detail: String },
}
