use thiserror::Error;

/// Errors raised by the analysis, oracle and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stability invariant violated: rho = {rho} must be < 1")]
    Unstable { rho: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported kind: {0}")]
    UnsupportedKind(String),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("branch loss: {0}")]
    BranchLoss(String),

    #[error("ambiguous profile: {0}")]
    AmbiguousProfile(String),

    #[error("case mismatch: {0}")]
    CaseMismatch(String),

    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    #[error("precision exhausted: coefficient {first_unusable} is not usable (n_max = {n_max}, digits = {digits})")]
    PrecisionExhausted {
        first_unusable: usize,
        n_max: usize,
        digits: u32,
    },

    #[error("unstable drift: orbit size reached {orbit}")]
    UnstableDrift { orbit: u64 },
}

impl Error {
    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Unstable { .. } | Error::UnsupportedKind(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
