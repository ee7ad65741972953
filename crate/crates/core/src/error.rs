use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("bin index {index} out of range for {n_bins} bins")]
    BinOutOfRange { index: usize, n_bins: usize },

    #[error("two-photon sector requires j < k, got ({0}, {1})")]
    UnorderedPair(usize, usize),

    #[error("state dimension {got} does not match basis dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero-norm state ({0})")]
    ZeroNorm(&'static str),

    #[error("non-finite amplitude after {0}")]
    NonFinite(&'static str),

    #[error("jump probability {0} >= 1; the time step is too large")]
    JumpProbability(f64),

    #[error("output-bin population {0} outside [0, 1]")]
    CorruptPopulation(f64),

    #[error("bin 0 still occupied before shift (|amplitude| = {0:e})")]
    OccupiedOutputBin(f64),

    #[error("steady state not reached: {0}")]
    NoSteadyState(String),

    #[error("zero output flux; correlation functions are undefined")]
    ZeroFlux,

    #[error("invalid histogram: {0}")]
    EmptyHistogram(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{failed} of {total} trajectories aborted (tolerance {tolerance})")]
    TooManyAborts {
        failed: usize,
        total: usize,
        tolerance: f64,
    },

    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
