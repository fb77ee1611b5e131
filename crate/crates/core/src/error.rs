use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("basis mismatch: {left} vs {right}")]
    BasisMismatch { left: String, right: String },

    #[error("site index {site} out of range for {n} spins")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("site {0} appears twice in one Pauli string")]
    DuplicateSite(usize),

    #[error("pauli strings are undefined on the Dicke basis")]
    PauliOnDicke,

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operator breaks the {symmetry} symmetry of the sector (residual {residual:.3e})")]
    SymmetryViolation { symmetry: &'static str, residual: f64 },

    #[error("weight state is not normalized (norm {norm})")]
    UnnormalizedWeight { norm: f64 },

    #[error("{name} = {value} is outside {range}")]
    OutOfRange { name: &'static str, value: f64, range: &'static str },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("degenerate gamma recursion at k = {k} (denominator {denominator:.3e})")]
    DegenerateRecursion { k: usize, denominator: f64 },

    #[error("requested order {requested} exceeds the effective Krylov depth {available}")]
    DepthExceeded { requested: usize, available: usize },

    #[error("insufficient Lanczos coefficients: need {needed}, have {available}")]
    InsufficientCoefficients { needed: usize, available: usize },

    #[error("degenerate levels {m} and {n} are coupled by the deformation ({coupling:.3e})")]
    DegenerateCoupling { m: usize, n: usize, coupling: f64 },

    #[error("degenerate ground state (gap {gap:.3e})")]
    DegenerateGroundState { gap: f64 },

    #[error("norm drift {drift:.3e} at step {step}; increase the step count")]
    NormDrift { step: usize, drift: f64 },

    #[error("invalid evolution setup: {0}")]
    InvalidEvolution(String),

    #[error("objective returned a non-finite value at {at:?}")]
    NonFiniteObjective { at: Vec<f64> },

    #[error("invalid optimization setup: {0}")]
    InvalidOptimization(String),

    #[error("evolution failed at betas {betas:?}: {source}")]
    EvolutionAt { betas: Vec<f64>, source: Box<Error> },

    #[error("matrix logarithm is branch-ambiguous: spectral radius {radius:.3} >= pi")]
    LogBranch { radius: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}
