use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("projection onto surface did not converge (|phi| = {residual:e})")]
    NonConvergence { residual: f64 },
    #[error("surface gradient vanishes (|grad phi| = {norm:e})")]
    DegenerateGradient { norm: f64 },
    #[error("adaptive step underflow at t = {t}")]
    StepFailure { t: f64 },
    #[error("operation requires a quartic-sphere surface")]
    VariantMismatch,
    #[error("trajectory too short: {crossings} section crossings, need at least 2")]
    TooShort { crossings: usize },
    #[error("frame formula singular at L = {0:?} (L2^2 + L3^2 = 0)")]
    FramePole([f64; 3]),
    #[error("all deformation coefficients vanish; every L is stationary")]
    DegenerateEpsilon,
    #[error("point is not stationary (|rhs| = {residual:e})")]
    NotStationary { residual: f64 },
    #[error("marginal case: deciding quantity {value:e} is within tolerance of zero")]
    Marginal { value: f64 },
    #[error("graph is not closed under the antipodal map: {0}")]
    AsymmetricInput(String),
    #[error("no topological type has {foci} foci and {saddles} saddles")]
    UnknownCounts { foci: usize, saddles: usize },
    #[error("net type {from_graph} disagrees with inequality type {from_eps}")]
    ConsistencyError { from_graph: String, from_eps: String },
    #[error("all deformation coefficients are zero")]
    AllZero,
}

impl Error {
    /// Degenerate or boundary input, as opposed to a numerical failure.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::Marginal { .. }
                | Error::DegenerateEpsilon
                | Error::AllZero
                | Error::FramePole(_)
                | Error::DegenerateGradient { .. }
        )
    }
}
