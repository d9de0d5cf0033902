//! Multi-step quantile forecasts and forecast-accuracy metrics.
//!
//! The point forecast extends the fitted recursion past the sample end:
//! future innovations are set to their martingale-difference mean of
//! zero, and once a lag reaches into the future the realized `h(y)` is
//! replaced by its own forecast (`h(ŷ) = η̂` under the log link, so the
//! recursion simply feeds back η̂). The forecast at horizon `h` is the
//! conditional τ-quantile of `y_{n+h}`, not a conditional mean.
//!
//! Interval bands are quantile-model bands: separate fits of the same
//! specification at the lower and upper levels, each forecast forward,
//! rather than normal-theory bands around the point path.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimation::{FitConfig, FitResult, fit, fit_from};
use crate::kernel::StandardKernel;
use crate::likelihood::LikelihoodContext;
use crate::model::{DesignData, ModelSpec, ParamVector, run_recursion};

/// What to forecast: horizon, future designs, optional band levels.
#[derive(Debug, Clone)]
pub struct ForecastRequest {
    pub horizon: usize,
    /// Mean design for the `horizon` future periods (intercept first).
    pub future_x: DMatrix<f64>,
    /// Dispersion design for the future periods; carried for interface
    /// parity with the in-sample layout (quantile forecasts do not need
    /// the future dispersion path).
    pub future_w: DMatrix<f64>,
    /// `(τ_lo, τ_hi)` levels for a quantile band.
    pub interval_levels: Option<(f64, f64)>,
}

impl ForecastRequest {
    fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter(
                "forecast horizon must be at least 1".into(),
            ));
        }
        for (name, mat, cols) in [
            ("mean", &self.future_x, spec.n_beta()),
            ("dispersion", &self.future_w, spec.n_tau_coefs()),
        ] {
            if mat.nrows() != self.horizon || mat.ncols() != cols {
                return Err(Error::Shape(format!(
                    "future {name} design must be {}×{cols}, got {}×{}",
                    self.horizon,
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "future {name} design contains a non-finite entry"
                )));
            }
            if (0..self.horizon).any(|r| mat[(r, 0)] != 1.0) {
                return Err(Error::Shape(format!(
                    "future {name} design must start with an all-ones intercept column"
                )));
            }
        }
        if let Some((lo, hi)) = self.interval_levels {
            if !(0.0 < lo && lo < hi && hi < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "interval levels must satisfy 0 < τ_lo < τ_hi < 1, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Point path and optional band.
#[derive(Debug, Clone)]
pub struct ForecastResult {
    pub point: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// Quantile level of the point forecast.
    pub basis_tau: f64,
}

/// Forecast recursion for a given coefficient set.
///
/// Innovations beyond the sample are zero; lagged responses beyond the
/// sample use their own forecasts.
pub fn point_forecast(
    spec: &ModelSpec,
    data: &DesignData,
    params: &ParamVector,
    horizon: usize,
    future_x: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let st = run_recursion(spec, data, params)?;
    let n = data.n();
    let hy: Vec<f64> = data.y().iter().map(|&y| spec.mean_link.apply(y)).collect();
    let xb_hist = data.x() * &params.beta;
    let xb_future = future_x * &params.beta;

    // Link-scale histories indexed 0..n+horizon; the future part fills in
    // as the recursion advances.
    let mut hy_ext = hy;
    let mut xb_ext: Vec<f64> = xb_hist.iter().copied().collect();
    let mut r_ext = st.innovation;
    let mut out = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let t = n + h;
        let mut eta = xb_future[h];
        for i in 1..=spec.p {
            eta += params.phi[i - 1] * (hy_ext[t - i] - xb_ext[t - i]);
        }
        for j in 1..=spec.q {
            if t - j < n {
                eta += params.theta[j - 1] * r_ext[t - j];
            }
        }
        if !eta.is_finite() {
            return Err(Error::Numeric(format!(
                "forecast recursion degenerated at horizon {}",
                h + 1
            )));
        }
        // h(ŷ) = η̂ under the log link.
        hy_ext.push(eta);
        xb_ext.push(xb_future[h]);
        r_ext.push(0.0);
        out.push(spec.mean_link.inverse(eta));
    }
    Ok(out)
}

/// Forecasts from a converged fit. Band fits at the requested interval
/// levels must be supplied by the caller (or use
/// [`forecast_with_intervals`] to have them fitted).
pub fn forecast(
    fit_result: &FitResult,
    spec: &ModelSpec,
    data: &DesignData,
    req: &ForecastRequest,
    band_fits: Option<(&FitResult, &FitResult)>,
) -> Result<ForecastResult> {
    req.validate(spec)?;
    if !fit_result.converged {
        return Err(Error::NonConvergence(
            "refusing to forecast from a non-converged fit".into(),
        ));
    }
    let point = point_forecast(spec, data, &fit_result.params, req.horizon, &req.future_x)?;
    let (lower, upper) = match (req.interval_levels, band_fits) {
        (None, _) => (None, None),
        (Some(_), None) => {
            return Err(Error::InvalidParameter(
                "interval levels requested but no band fits supplied".into(),
            ));
        }
        (Some(_), Some((lo_fit, hi_fit))) => {
            let lo = point_forecast(spec, data, &lo_fit.params, req.horizon, &req.future_x)?;
            let hi = point_forecast(spec, data, &hi_fit.params, req.horizon, &req.future_x)?;
            (Some(lo), Some(hi))
        }
    };
    Ok(ForecastResult {
        point,
        lower,
        upper,
        basis_tau: spec.tau_level,
    })
}

/// Fits the point model and, when a band is requested, the lower/upper
/// quantile models (warm-started from the point fit), then forecasts.
pub fn forecast_with_intervals(
    spec: &ModelSpec,
    data: &DesignData,
    kernel: &StandardKernel,
    config: &FitConfig,
    req: &ForecastRequest,
) -> Result<(FitResult, ForecastResult)> {
    req.validate(spec)?;
    let ctx = LikelihoodContext::new(spec, data, kernel)?;
    let point_fit = fit(&ctx, config)?;

    let band = match req.interval_levels {
        None => None,
        Some((lo, hi)) => {
            let fit_level = |tau: f64| -> Result<FitResult> {
                let mut level_spec = spec.clone();
                level_spec.tau_level = tau;
                let level_ctx = LikelihoodContext::new(&level_spec, data, kernel)?;
                fit_from(&level_ctx, config, &point_fit.params)
            };
            Some((fit_level(lo)?, fit_level(hi)?))
        }
    };
    let result = forecast(
        &point_fit,
        spec,
        data,
        req,
        band.as_ref().map(|(a, b)| (a, b)),
    )?;
    Ok((point_fit, result))
}

/// Point- and interval-accuracy summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// MAE scaled by the in-sample mean absolute first difference.
    pub mase: f64,
    /// Symmetric percentage error on the 0–200 scale.
    pub smape: f64,
    /// Mean scaled interval score; present when a band was supplied.
    pub msis: Option<f64>,
}

/// Accuracy of a forecast path against realized values.
///
/// `insample` supplies the scaling series for MASE/MSIS (mean absolute
/// one-step difference); `alpha` is the nominal interval miss rate for
/// the MSIS penalty.
pub fn forecast_metrics(
    actual: &[f64],
    point: &[f64],
    lower: Option<&[f64]>,
    upper: Option<&[f64]>,
    insample: &[f64],
    alpha: f64,
) -> Result<ForecastMetrics> {
    let h = actual.len();
    if h == 0 || point.len() != h {
        return Err(Error::Shape(format!(
            "actuals ({}) and forecasts ({}) must have equal positive length",
            h,
            point.len()
        )));
    }
    if let Some(l) = lower {
        if l.len() != h || upper.is_none_or(|u| u.len() != h) {
            return Err(Error::Shape("band lengths must match the horizon".into()));
        }
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "interval miss rate must lie in (0,1), got {alpha}"
        )));
    }
    if insample.len() < 2 {
        return Err(Error::Shape(
            "scaling series needs at least two observations".into(),
        ));
    }
    let scale = insample
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .sum::<f64>()
        / (insample.len() - 1) as f64;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Degenerate(
            "scaling series is constant; MASE/MSIS undefined".into(),
        ));
    }

    let hf = h as f64;
    let mut se = 0.0;
    let mut ae = 0.0;
    let mut sm = 0.0;
    for t in 0..h {
        let d = actual[t] - point[t];
        se += d * d;
        ae += d.abs();
        let denom = actual[t].abs() + point[t].abs();
        if denom > 0.0 {
            sm += 200.0 * d.abs() / denom;
        }
    }
    let mae = ae / hf;
    let msis = match (lower, upper) {
        (Some(lo), Some(hi)) => {
            let mut score = 0.0;
            for t in 0..h {
                score += (hi[t] - lo[t])
                    + (2.0 / alpha) * (lo[t] - actual[t]).max(0.0)
                    + (2.0 / alpha) * (actual[t] - hi[t]).max(0.0);
            }
            Some(score / hf / scale)
        }
        _ => None,
    };
    Ok(ForecastMetrics {
        rmse: (se / hf).sqrt(),
        mae,
        mase: mae / scale,
        smape: sm / hf,
        msis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn ones(rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_element(rows, cols, 1.0)
    }

    #[test]
    fn hand_computed_two_step_path() {
        // ARMA(1,1), log link, β₀ = 1, φ = 0.5, θ = 0.2 with a two-point
        // history built so that r̂_n = 0.3 and log y_n = 1.4:
        //   η̂_{n+1} = 1 + 0.5·(1.4−1) + 0.2·0.3 = 1.26
        //   η̂_{n+2} = 1 + 0.5·(1.26−1)          = 1.13
        let spec = ModelSpec::new(1, 1, 0, 0, 0.5, KernelFamily::normal()).unwrap();
        let data =
            DesignData::from_series(vec![1.2_f64.exp(), 1.4_f64.exp()]).unwrap();
        let params = ParamVector {
            beta: DVector::from_vec(vec![1.0]),
            tau_coefs: DVector::from_vec(vec![0.0]),
            phi: DVector::from_vec(vec![0.5]),
            theta: DVector::from_vec(vec![0.2]),
        };
        // The crafted history indeed produces r̂_n = 0.3.
        let st = run_recursion(&spec, &data, &params).unwrap();
        assert_abs_diff_eq!(st.innovation[1], 0.3, epsilon = 1e-14);

        let path = point_forecast(&spec, &data, &params, 2, &ones(2, 1)).unwrap();
        assert_abs_diff_eq!(path[0], 1.26_f64.exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(path[1], 1.13_f64.exp(), epsilon = 1e-12);
    }

    #[test]
    fn pure_regression_projection() {
        // p = q = 0: the forecast ignores the history entirely.
        let spec = ModelSpec::new(0, 0, 1, 0, 0.5, KernelFamily::normal()).unwrap();
        let n = 10;
        let x = DMatrix::from_fn(n, 2, |t, j| if j == 0 { 1.0 } else { t as f64 / 10.0 });
        let data = DesignData::new(
            (0..n).map(|t| (0.1 * t as f64).exp()).collect(),
            x,
            ones(n, 1),
        )
        .unwrap();
        let params = ParamVector {
            beta: DVector::from_vec(vec![0.4, -0.6]),
            tau_coefs: DVector::from_vec(vec![0.0]),
            phi: DVector::zeros(0),
            theta: DVector::zeros(0),
        };
        let fx = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 3.0]);
        let path = point_forecast(&spec, &data, &params, 2, &fx).unwrap();
        assert_abs_diff_eq!(path[0], (0.4 - 1.2_f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(path[1], (0.4 - 1.8_f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn one_step_matches_in_sample_recursion_formula() {
        // Append the forecast recursion's own output: running the fitted
        // recursion on the extended series with the realized y_{n+1} equal
        // to any positive value must produce the same η̂_{n+1} (the
        // innovation enters only after the quantile is set).
        let spec = ModelSpec::new(2, 1, 0, 0, 0.5, KernelFamily::normal()).unwrap();
        let y: Vec<f64> = (0..12)
            .map(|t| (0.3 * (t as f64 * 0.7).sin() + 0.1).exp())
            .collect();
        let data = DesignData::from_series(y.clone()).unwrap();
        let params = ParamVector {
            beta: DVector::from_vec(vec![0.1]),
            tau_coefs: DVector::from_vec(vec![-0.5]),
            phi: DVector::from_vec(vec![0.45, -0.3]),
            theta: DVector::from_vec(vec![0.25]),
        };
        let path = point_forecast(&spec, &data, &params, 1, &ones(1, 1)).unwrap();

        let mut extended = y;
        extended.push(7.7); // arbitrary future realization
        let ext = DesignData::from_series(extended).unwrap();
        let st = run_recursion(&spec, &ext, &params).unwrap();
        assert_abs_diff_eq!(path[0], st.quantile[12], epsilon = 1e-13);
    }

    #[test]
    fn request_validation() {
        let spec = ModelSpec::new(0, 0, 0, 0, 0.5, KernelFamily::normal()).unwrap();
        let bad_rows = ForecastRequest {
            horizon: 2,
            future_x: ones(1, 1),
            future_w: ones(2, 1),
            interval_levels: None,
        };
        assert!(bad_rows.validate(&spec).is_err());
        let bad_levels = ForecastRequest {
            horizon: 1,
            future_x: ones(1, 1),
            future_w: ones(1, 1),
            interval_levels: Some((0.9, 0.1)),
        };
        assert!(bad_levels.validate(&spec).is_err());
        let ok = ForecastRequest {
            horizon: 1,
            future_x: ones(1, 1),
            future_w: ones(1, 1),
            interval_levels: Some((0.025, 0.975)),
        };
        assert!(ok.validate(&spec).is_ok());
    }

    #[test]
    fn metrics_reference_values() {
        let m = forecast_metrics(
            &[2.0, 4.0],
            &[1.0, 5.0],
            None,
            None,
            &[1.0, 2.0, 3.0],
            0.05,
        )
        .unwrap();
        assert_abs_diff_eq!(m.rmse, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mae, 1.0, epsilon = 1e-15);
        // Scale = mean(|1|,|1|) = 1 ⇒ MASE = MAE.
        assert_abs_diff_eq!(m.mase, 1.0, epsilon = 1e-15);
        assert!(m.msis.is_none());

        let perfect =
            forecast_metrics(&[3.0, 3.0], &[3.0, 3.0], None, None, &[1.0, 2.0], 0.05).unwrap();
        assert_eq!(perfect.rmse, 0.0);
        assert_eq!(perfect.mae, 0.0);
        assert_eq!(perfect.smape, 0.0);
    }

    #[test]
    fn naive_forecast_has_unit_mase() {
        // Forecasting each value by its predecessor over the scaling
        // window itself gives MASE = 1 by construction.
        let series: Vec<f64> = (0..40).map(|t| ((t as f64) * 0.7).sin() + 2.0).collect();
        let actual = &series[1..];
        let point = &series[..series.len() - 1];
        let m = forecast_metrics(actual, point, None, None, &series, 0.05).unwrap();
        assert_abs_diff_eq!(m.mase, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn msis_penalizes_misses() {
        // Covering band: width only. Missing band: width + penalty.
        let insample = [1.0, 2.0, 3.0, 4.0]; // scale 1
        let cover = forecast_metrics(
            &[5.0],
            &[5.0],
            Some(&[4.0]),
            Some(&[6.0]),
            &insample,
            0.05,
        )
        .unwrap();
        assert_abs_diff_eq!(cover.msis.unwrap(), 2.0, epsilon = 1e-12);
        let miss = forecast_metrics(
            &[7.0],
            &[5.0],
            Some(&[4.0]),
            Some(&[6.0]),
            &insample,
            0.05,
        )
        .unwrap();
        // Width 2 plus (2/0.05)·(7−6) = 42.
        assert_abs_diff_eq!(miss.msis.unwrap(), 42.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_scaling_series_rejected() {
        let err =
            forecast_metrics(&[1.0], &[1.0], None, None, &[2.0, 2.0, 2.0], 0.05).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }
}
