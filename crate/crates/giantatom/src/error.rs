//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown atom id {0}")]
    UnknownAtom(usize),

    #[error("unknown waveguide id {0}")]
    UnknownWaveguide(usize),

    #[error("self-coupling requested for atom {0}; Lamb-shift terms are not modeled")]
    SelfCoupling(usize),

    #[error("expected {expected} frequencies, got {got}")]
    FrequencyCountMismatch { expected: usize, got: usize },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schedule does not cover [{t0}, {t1}] for atom index {atom}")]
    ScheduleGap { atom: usize, t0: f64, t1: f64 },

    #[error(
        "step underflow in segment starting at t = {t_start} (length {length}, \
         {steps} steps required); rates too fast for the segment"
    )]
    StepUnderflow { t_start: f64, length: f64, steps: u64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("root refinement failed in bracket [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("state validation failed: {0}")]
    InvalidState(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("addressing conflict: {0}")]
    AddressingConflict(String),

    #[error("resonance condition unmet: {0}")]
    ResonanceMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
