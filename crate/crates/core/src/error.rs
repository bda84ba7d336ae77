use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid problem instance: {0}")]
    InvalidInstance(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("interpolation parameter s = {0} outside [0, 1]")]
    ParameterOutOfRange(f64),

    #[error("time t = {t} outside schedule range [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("misspecification chi = {chi} is invalid for N = {dim}")]
    InvalidChi { chi: f64, dim: usize },

    #[error("reduced Hamiltonian is undefined when a noise term is attached")]
    NoiseBreaksSubspace,

    #[error("dense oracle refused n = {0} (limit is 10)")]
    OracleTooLarge(u32),

    #[error("step size underflow at t = {t} (h = {step}, error ratio {ratio})")]
    StepUnderflow { t: f64, step: f64, ratio: f64 },

    #[error("invalid integrator configuration: {0}")]
    InvalidIntegrator(String),

    #[error("invalid bath parameters: {0}")]
    InvalidBath(String),

    #[error("quadrature did not converge: estimate {estimate}, error {error}")]
    QuadratureFailed { estimate: f64, error: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
