use thiserror::Error;

/// Errors produced by model construction, evaluation and estimation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter lies outside its admissible domain (kernel extras,
    /// quantile levels, tolerances, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Dimensions of inputs do not agree with the model specification.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A value lies outside the mathematical domain of an operation
    /// (non-positive observation, probability outside (0,1), ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric routine failed to reach its tolerance or produced a
    /// non-finite intermediate value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The autoregressive polynomial has a root on or inside the unit
    /// circle, so MA(∞)/stationarity-based quantities are undefined.
    #[error("non-stationary AR polynomial: {0}")]
    NonStationary(String),

    /// The design matrix is rank deficient.
    #[error("collinear design: {0}")]
    Collinear(String),

    /// The negated Hessian at the fitted point is not positive definite;
    /// standard errors cannot be extracted from it.
    #[error("singular observed information: {0}")]
    SingularInformation(String),

    /// The optimizer exhausted its iteration budget or every start failed.
    #[error("estimation did not converge: {0}")]
    NonConvergence(String),

    /// A sample is degenerate for the requested statistic
    /// (constant series, too few observations, ...).
    #[error("degenerate sample: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
