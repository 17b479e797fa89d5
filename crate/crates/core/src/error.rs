use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ambient dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("expected a pure degree-{expected} multivector, found mixed or degree {found:?}")]
    NotPureDegree { expected: usize, found: Option<usize> },
    #[error("index tuple {0:?} is not strictly increasing within 1..={1}")]
    BadIndexTuple(Vec<u8>, usize),
    #[error("pairing undefined: need n = 2k with k even, got n = {n}, k = {k}")]
    PairingUndefined { n: usize, k: usize },
    #[error("invalid ring presentation: {0}")]
    InvalidRing(String),
    #[error("degree overflow: {0} + {1} exceeds formal dimension {2}")]
    DegreeOverflow(usize, usize, usize),
    #[error("matrix is not symmetric at ({0},{1})")]
    NotSymmetric(usize, usize),
    #[error("form is not unimodular: |det| = {0}")]
    NotUnimodular(String),
    #[error("middle-degree pairing is not integral at ({0},{1})")]
    NonIntegralPairing(usize, usize),
    #[error("no unimodular even form has signature ({0},{1}) in the supported range")]
    ImpossibleEvenForm(usize, usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;
