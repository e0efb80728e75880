use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{function} is undefined for x = {x}")]
    Domain { function: &'static str, x: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training inputs {first} and {second} coincide")]
    DuplicateInput { first: usize, second: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("need at least 2 replicates per input, got {0}")]
    InsufficientReplicates(usize),

    #[error("sample variance at input {index} is zero; its log-variance statistic is undefined")]
    ZeroSampleVariance { index: usize },

    #[error("conditional variance {value:e} of sample {sample} is negative beyond tolerance")]
    NegativeVariance { sample: usize, value: f64 },

    #[error("posterior variance routes disagree: mixture {mixture:e} vs quadratic form {quadratic:e}")]
    Inconsistent { mixture: f64, quadratic: f64 },

    #[error("could not bracket delta = {target} after {doublings} doublings")]
    Bracketing { target: f64, doublings: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
