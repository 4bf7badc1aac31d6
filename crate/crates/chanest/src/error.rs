use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("non-finite gradient in parameter block '{block}' at offset {index}")]
    NonFiniteGradient { block: String, index: usize },

    #[error("backward requires a recorded scalar loss node")]
    NoRecordedLoss,

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("fit diverged (non-finite loss) at iteration {iteration}")]
    FitDiverged { iteration: usize },

    #[error("pilot entry {index} is not unit modulus (|x| = {modulus})")]
    NonUnitPilot { index: usize, modulus: f64 },

    #[error("coherence interval too short: {required} pilot slots needed, {available} symbols available")]
    IntervalTooShort { required: usize, available: usize },

    #[error("user {user} has {found} pilot slots, expected {expected}")]
    MissingSlots { user: usize, expected: usize, found: usize },

    #[error("no pilot slots found for user {user}")]
    NoSlots { user: usize },

    #[error("sample count must be at least 1")]
    EmptyGeneration,

    #[error("reference matrix has zero energy")]
    ZeroTruth,

    #[error("sweep failed at snr {snr_db} dB, realization {realization}: {source}")]
    Sweep {
        snr_db: f64,
        realization: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
