use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("inadmissible profile: {0}")]
    InadmissibleProfile(String),

    #[error("kernel evaluated on diagonal (|r - rho|/r = {0:e})")]
    DiagonalKernel(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parameters outside the theorem's hypotheses: {0}")]
    OutOfRegime(String),

    #[error("eps0 selection failed: no dyadic eps0 down to 2^-20 gives a negative image on the verification grid")]
    Eps0SelectionFailed {
        /// `(eps0, max over the grid of the evaluated image)` for every rung tried.
        margin_profile: Vec<(f64, f64)>,
    },

    #[error("Case 3 infeasible: slack {0} <= 0")]
    Case3Infeasible(f64),

    #[error("schedule did not terminate within {0} steps")]
    ScheduleDiverged(usize),

    #[error("estimator unstable: {0}")]
    EstimatorUnstable(String),

    #[error("resource bound exceeded: {0}")]
    ResourceBound(String),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
