use thiserror::Error;

/// Errors raised by the library.
///
/// `Domain` and `Divergent`/`Unsupported` are input-validation failures;
/// the remaining variants signal that a numerical procedure did not succeed.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid harmonic index: {0}")]
    InvalidIndex(String),

    #[error("mixed dimensions: {0} vs {1}")]
    MixedDimensions(usize, usize),

    #[error("divergent sum rule for d={d}, p={p}")]
    DivergentSumRule { d: usize, p: usize },

    #[error("divergent quantity: {0}")]
    Divergent(String),

    #[error("unsupported order p={0}: only p = 2, 3 are implemented")]
    UnsupportedOrder(usize),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("positivity bound violated: |kappa| = {kappa} must be below {bound}")]
    PositivityViolated { kappa: f64, bound: f64 },

    #[error("density is not positive: minimum sampled value {0}")]
    NonPositiveDensity(f64),

    #[error("density is not real: {0}")]
    NonRealDensity(String),

    #[error("cutoff too small: {0}")]
    CutoffTooSmall(String),

    #[error("overlap matrix is not positive definite (block {0})")]
    NotPositiveDefinite(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("cache error: {0}")]
    Cache(String),
}

impl Error {
    /// True for failures of a numerical procedure rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence(_) | Error::NotPositiveDefinite(_) | Error::Cache(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
