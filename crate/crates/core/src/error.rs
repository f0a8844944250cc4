use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has {found} samples, grid has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("field contains a non-finite value at node {0}")]
    NonFinite(usize),
    #[error("derivative order {0} not supported (expected 1, 2 or 3)")]
    DerivativeOrder(u32),
    #[error("speed {0} outside (-1, 1) \\ {{0}}")]
    InvalidSpeed(f64),
    #[error("max |v| = {max_v} is not below the ceiling {ceiling}")]
    VCeiling { max_v: f64, ceiling: f64 },
    #[error("in-plane component vanishes at node {node} (|m1 + i m2| = {modulus})")]
    VanishingPlanar { node: usize, modulus: f64 },
    #[error("empty window [{lo}, {hi})")]
    EmptyWindow { lo: f64, hi: f64 },
    #[error("weight overflow guard: rate * half_length = {0} exceeds 600")]
    WeightOverflow(f64),
    #[error("spectral check failed: {0}")]
    Spectral(String),
    #[error("Newton iteration failed after {iterations} iterations: {reason}")]
    Newton { iterations: usize, reason: String },
    #[error("step {step} at t = {time}: {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("phase undefined: windowed integral has modulus {0}")]
    PhaseUndefined(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
