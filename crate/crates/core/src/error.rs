use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("qubit index {index} out of range for {qubits} qubits")]
    QubitOutOfRange { index: usize, qubits: usize },

    #[error("dense matrix of {qubits} qubits exceeds the cap of {cap}")]
    DenseCap { qubits: usize, cap: usize },

    #[error("parameter vector has length {actual}, circuit expects {expected}")]
    ParameterCount { expected: usize, actual: usize },

    #[error("parameter slot {slot} out of range (circuit has {count})")]
    InvalidSlot { slot: usize, count: usize },

    #[error("empty Pauli sum")]
    EmptySum,

    #[error("sampler needs at least one nonzero coefficient")]
    InvalidSampler,

    #[error("Pauli product has {terms} terms, cap is {cap}")]
    TermCap { terms: usize, cap: usize },

    #[error("invalid Hadamard-test placement: {0}")]
    InvalidPlacement(String),

    #[error("shot count must be positive")]
    ZeroShots,

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("singular matrix (smallest singular value {0:e})")]
    Singular(f64),

    #[error("energy {energy} outside the admissible range [{lo}, {hi}]")]
    EnergyOutOfRange { energy: f64, lo: f64, hi: f64 },

    #[error("condition number must be at least 1, got {0}")]
    InvalidKappa(f64),

    #[error("non-finite energy at step {step}")]
    NonFiniteEnergy { step: usize },

    #[error("metric is singular beyond regularization")]
    SingularMetric,

    #[error("state annihilated by operator (norm {0:e})")]
    Annihilated(f64),

    #[error("step {step} failed: energy {energy:e} above tolerance {tolerance:e}")]
    StepFailed {
        step: usize,
        energy: f64,
        tolerance: f64,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
