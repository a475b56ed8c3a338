use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("entry count {len} does not match {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("length {0} is not a power of two in [2, 64]")]
    BadStateLength(usize),
    #[error("state vector norm {0} is not 1")]
    NotNormalized(f64),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("probability {name} = {value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("Kraus set is not complete (deviation {0:e})")]
    Incomplete(f64),
    #[error("channel acts on dimension {channel}, expected {expected}")]
    ChannelDimension { channel: usize, expected: usize },
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("invalid bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("angle {0} outside [0, pi/2]")]
    AngleOutOfRange(f64),
    #[error("client count {0} is invalid (must be 1..=9 per circuit)")]
    ClientCount(usize),
    #[error("empty client set")]
    NoClients,
    #[error("mitigation ill-conditioned: attenuation {0:e} below 1e-6")]
    IllConditioned(f64),
    #[error("degenerate calibration probes")]
    DegenerateProbes,
    #[error("calibration produced non-positive attenuation {0}")]
    BadCalibration(f64),
    #[error("at least {needed} trials required, got {got}")]
    TooFewTrials { needed: usize, got: usize },
    #[error("server count must be at least 1")]
    NoServers,
    #[error("cannot select {m} of {n} clients")]
    Selection { n: usize, m: usize },
    #[error("bit source exhausted")]
    EntropyExhausted,
    #[error("empty history")]
    EmptyHistory,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged: non-finite loss at step {step}")]
    Diverged { step: usize },
    #[error("empty test set")]
    EmptyTestSet,
}
