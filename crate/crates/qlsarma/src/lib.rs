//! Quantile log-symmetric ARMAX time-series models.

pub mod diagnostics;
pub mod distribution;
pub mod error;
pub mod estimation;
pub mod forecast;
pub mod kernel;
pub mod likelihood;
pub mod model;
mod optimize;
pub mod quadrature;
pub mod simulation;

pub use diagnostics::{
    Describe, EnvelopeTarget, QqEnvelope, ResidualReport, acf_pacf, describe, qq_envelope,
    residuals, survival_residuals,
};
pub use distribution::QlsDistribution;
pub use error::{Error, Result};
pub use estimation::{
    Criteria, FitConfig, FitResult, ProfileEntry, crossing_fraction, fit, fit_from, fit_profile,
    information_criteria, initialize, select_by_aic,
};
pub use forecast::{
    ForecastMetrics, ForecastRequest, ForecastResult, forecast, forecast_metrics,
    forecast_with_intervals, point_forecast,
};
pub use kernel::{GDerivs, KernelFamily, KernelKind, StandardKernel};
pub use likelihood::{HessianEstimate, HessianMode, LikelihoodContext, observed_info_se};
pub use simulation::{
    CovariateLaw, McCell, McDesign, McReport, ResidualStatMeans, run_mc, simulate_series,
};

pub use model::{
    DesignData, Link, ModelSpec, ParamVector, PolynomialReport, RecursionState, polynomial_report,
    psi_weights, run_recursion,
};
