//! Conditional maximum-likelihood fitting.
//!
//! A fit proceeds in three stages: a least-squares initializer (ordinary
//! regression of `h(y)` on the mean design, then a Hannan–Rissanen-style
//! two-stage regression for the ARMA block), BFGS ascent of the
//! conditional log-likelihood with the analytic score, and a
//! finite-difference observed-information pass for standard errors.
//! Multistart perturbs the initializer deterministically from the
//! configured seed and keeps the best maximum.
//!
//! φ and θ are optimized unconstrained; stationarity/invertibility of the
//! fitted polynomials is diagnosed afterwards and attached as a warning
//! rather than enforced, so near-unit-root fits remain representable.
//! Dispersion positivity needs no constraint at all — the log link keeps
//! `κ_t = exp(w_tᵀτ)` positive for any coefficient vector.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::likelihood::{HessianMode, LikelihoodContext, observed_info_se};
use crate::model::{DesignData, ModelSpec, ParamVector, polynomial_report, run_recursion};
use crate::optimize::{self, BfgsOptions};

/// Optimizer and multistart settings.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    /// Number of starting points (1 = initializer only).
    pub multistart: usize,
    /// Seed for the deterministic start perturbations.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-6,
            step_tol: 1e-10,
            multistart: 3,
            seed: 1,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0 && self.step_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "optimizer tolerances must be positive".into(),
            ));
        }
        if self.multistart == 0 {
            return Err(Error::InvalidParameter(
                "multistart must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Penalized-likelihood model-comparison criteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Criteria {
    pub aic: f64,
    pub bic: f64,
    pub caic: f64,
    pub hqic: f64,
}

/// `AIC/BIC/CAIC/HQIC` from a log-likelihood, parameter count and
/// effective sample size.
pub fn information_criteria(loglik: f64, n_params: usize, n_used: usize) -> Result<Criteria> {
    let kp = n_params as f64;
    let n = n_used as f64;
    if n_used <= n_params + 1 {
        return Err(Error::Degenerate(format!(
            "CAIC undefined: effective sample size {n_used} must exceed {} (parameters + 1)",
            n_params + 1
        )));
    }
    let neg2 = -2.0 * loglik;
    Ok(Criteria {
        aic: neg2 + 2.0 * kp,
        bic: neg2 + kp * n.ln(),
        caic: neg2 + 2.0 * kp * n / (n - kp - 1.0),
        hqic: neg2 + 2.0 * kp * n.ln().ln(),
    })
}

/// Outcome of one conditional maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ParamVector,
    /// Observed-information standard errors in packed order; `None` when
    /// the negated Hessian is not positive definite.
    pub se: Option<DVector<f64>>,
    pub loglik: f64,
    /// Observations entering the likelihood, `n − m`.
    pub n_used: usize,
    pub criteria: Criteria,
    /// Fitted conditional quantiles `Q̂_t` (NaN over the conditioning
    /// window `t < m`).
    pub fitted_q: Vec<f64>,
    /// Link-scale innovations `r̂_t` (zero over the conditioning window).
    pub innovations: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `‖score‖_∞` at the returned point.
    pub grad_norm: f64,
    /// Non-fatal findings: non-stationary/non-invertible fitted
    /// polynomials, indefinite information, Hessian asymmetry.
    pub warnings: Vec<String>,
}

/// Least-squares starting values.
///
/// β comes from OLS of `h(y)` on the mean design. With ARMA terms, the
/// OLS residuals feed a long autoregression whose own residuals proxy the
/// innovations; regressing the residual on its lags and the proxy's lags
/// gives (φ, θ), shrunk toward zero until stationary and invertible. The
/// dispersion intercept starts at the log residual variance.
pub fn initialize(spec: &ModelSpec, data: &DesignData) -> Result<ParamVector> {
    spec.validate()?;
    data.check_against(spec)?;
    let n = data.n();
    if n <= spec.m() + spec.n_params() {
        return Err(Error::Shape(format!(
            "series length {n} is too short for {} parameters with a conditioning window of {}",
            spec.n_params(),
            spec.m()
        )));
    }

    let hy = DVector::from_iterator(n, data.y().iter().map(|&y| spec.mean_link.apply(y)));
    let beta = least_squares(data.x(), &hy, "mean")?;
    let resid = &hy - data.x() * &beta;

    // Residual variance on the link scale seeds the dispersion intercept;
    // floored so a perfect regression fit cannot produce κ = 0.
    let dof = (n - spec.n_beta()).max(1) as f64;
    let sigma2 = (resid.dot(&resid) / dof).max(1e-8);
    let mut tau_coefs = DVector::zeros(spec.n_tau_coefs());
    tau_coefs[0] = sigma2.ln();

    let (phi, theta) = if spec.p + spec.q > 0 {
        hannan_rissanen(resid.as_slice(), spec.p, spec.q)
    } else {
        (DVector::zeros(0), DVector::zeros(0))
    };

    Ok(ParamVector {
        beta,
        tau_coefs,
        phi,
        theta,
    })
}

/// OLS solve with an explicit collinearity check naming the first column
/// that is linearly dependent on its predecessors.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, design: &str) -> Result<DVector<f64>> {
    let k = x.ncols();
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * x.nrows().max(k) as f64 * f64::EPSILON;
    if svd.rank(tol) < k {
        // Locate the offender by growing a column prefix.
        for j in 1..k {
            let prefix = x.columns(0, j + 1).into_owned();
            let s = prefix.svd(false, false);
            let stol = s.singular_values.max() * x.nrows() as f64 * f64::EPSILON;
            if s.rank(stol) <= j {
                return Err(Error::Collinear(format!(
                    "{design} design column {} is linearly dependent on earlier columns",
                    j + 1
                )));
            }
        }
        return Err(Error::Collinear(format!(
            "{design} design is rank deficient"
        )));
    }
    svd.solve(y, tol)
        .map_err(|e| Error::Numeric(format!("least-squares solve failed: {e}")))
}

/// Two-stage residual regression for ARMA starting values.
fn hannan_rissanen(resid: &[f64], p: usize, q: usize) -> (DVector<f64>, DVector<f64>) {
    let n = resid.len();
    // Long-AR order: generous enough to whiten, small enough to leave
    // usable rows.
    let long = ((10.0 * (n as f64).log10()) as usize)
        .max(p + q)
        .min(n / 4)
        .max(1);

    // Innovation proxies from the long autoregression; zero where the
    // regression cannot reach.
    let mut eps = vec![0.0; n];
    if n > 2 * long {
        let rows = n - long;
        let xl = DMatrix::from_fn(rows, long, |r, c| resid[r + long - 1 - c]);
        let yl = DVector::from_iterator(rows, resid[long..].iter().copied());
        if let Ok(coef) = least_squares_unchecked(&xl, &yl) {
            for t in long..n {
                let mut pred = 0.0;
                for (c, &a) in coef.iter().enumerate() {
                    pred += a * resid[t - 1 - c];
                }
                eps[t] = resid[t] - pred;
            }
        }
    }

    // Second stage: residual on its own lags and the proxy innovations'.
    let start = long.max(p).max(q);
    let rows = n.saturating_sub(start);
    let mut phi = DVector::zeros(p);
    let mut theta = DVector::zeros(q);
    if rows > 2 * (p + q) && p + q > 0 {
        let x2 = DMatrix::from_fn(rows, p + q, |r, c| {
            let t = r + start;
            if c < p {
                resid[t - 1 - c]
            } else {
                eps[t - 1 - (c - p)]
            }
        });
        let y2 = DVector::from_iterator(rows, resid[start..].iter().copied());
        if let Ok(coef) = least_squares_unchecked(&x2, &y2) {
            for i in 0..p {
                phi[i] = coef[i];
            }
            for j in 0..q {
                theta[j] = coef[p + j];
            }
        }
    }

    shrink_to_admissible(&mut phi, &mut theta);
    (phi, theta)
}

/// Plain SVD least squares without the collinearity policing (internal
/// stages tolerate rank deficiency by falling back to zeros).
fn least_squares_unchecked(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = x.clone().svd(true, true);
    let tol = svd.singular_values.max() * x.nrows().max(x.ncols()) as f64 * f64::EPSILON;
    svd.solve(y, tol)
        .map_err(|e| Error::Numeric(format!("least-squares solve failed: {e}")))
}

/// Shrinks each polynomial toward zero until stationary/invertible.
fn shrink_to_admissible(phi: &mut DVector<f64>, theta: &mut DVector<f64>) {
    for _ in 0..400 {
        let report = polynomial_report(phi, theta);
        if report.stationary && report.invertible {
            return;
        }
        if !report.stationary {
            *phi *= 0.95;
        }
        if !report.invertible {
            *theta *= 0.95;
        }
    }
    // Coefficients this stubborn are numerically degenerate; zero them.
    phi.fill(0.0);
    theta.fill(0.0);
}

fn bfgs_options(config: &FitConfig) -> BfgsOptions {
    BfgsOptions {
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
        step_tol: config.step_tol,
    }
}

/// Fits by CML from the least-squares initializer, with deterministic
/// multistart perturbations.
pub fn fit(ctx: &LikelihoodContext, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let init = initialize(ctx.spec(), ctx.data())?;
    let mut starts = vec![init.clone()];
    for s in 1..config.multistart {
        starts.push(perturb(ctx.spec(), &init, config.seed, s as u64));
    }
    fit_from_starts(ctx, config, &starts)
}

/// Fits from a single caller-supplied starting point (used for warm
/// starts and refits).
pub fn fit_from(ctx: &LikelihoodContext, config: &FitConfig, start: &ParamVector) -> Result<FitResult> {
    config.validate()?;
    start.check_against(ctx.spec())?;
    fit_from_starts(ctx, config, std::slice::from_ref(start))
}

fn perturb(spec: &ModelSpec, base: &ParamVector, seed: u64, index: u64) -> ParamVector {
    // Distinct, reproducible stream per start.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E3779B97F4A7C15));
    let mut jiggle = |v: &DVector<f64>, scale: f64| {
        DVector::from_iterator(
            v.len(),
            v.iter().map(|&c| c + scale * (rng.random::<f64>() - 0.5)),
        )
    };
    let mut out = ParamVector {
        beta: jiggle(&base.beta, 0.4),
        tau_coefs: jiggle(&base.tau_coefs, 0.4),
        phi: jiggle(&base.phi, 0.2),
        theta: jiggle(&base.theta, 0.2),
    };
    let _ = spec;
    shrink_to_admissible(&mut out.phi, &mut out.theta);
    out
}

fn fit_from_starts(
    ctx: &LikelihoodContext,
    config: &FitConfig,
    starts: &[ParamVector],
) -> Result<FitResult> {
    let opts = bfgs_options(config);
    let outcomes: Vec<_> = starts
        .par_iter()
        .map(|start| {
            optimize::maximize(
                |x| ctx.loglik(&ParamVector::unpack(ctx.spec(), x)?),
                |x| ctx.score(&ParamVector::unpack(ctx.spec(), x)?),
                &start.pack(),
                &opts,
            )
        })
        .collect();

    // Best finite maximum wins; converged runs outrank stalled ones at
    // equal likelihood. Ties resolve to the earliest start so the result
    // is deterministic.
    let mut best: Option<&optimize::BfgsOutcome> = None;
    for out in outcomes.iter().flatten() {
        if !out.value.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                out.value > b.value || (out.value == b.value && out.converged && !b.converged)
            }
        };
        if better {
            best = Some(out);
        }
    }
    let Some(best) = best else {
        let detail = outcomes
            .iter()
            .map(|o| match o {
                Ok(out) => format!("stopped: {}", out.message.as_deref().unwrap_or("?")),
                Err(e) => format!("failed: {e}"),
            })
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::NonConvergence(format!(
            "no start produced a usable maximum ({detail})"
        )));
    };

    let params = ParamVector::unpack(ctx.spec(), &best.x)?;
    let mut warnings = Vec::new();
    if !best.converged {
        if let Some(msg) = &best.message {
            warnings.push(format!("optimizer stopped without convergence: {msg}"));
        }
    }

    let report = polynomial_report(&params.phi, &params.theta);
    if !report.stationary {
        warnings.push(format!(
            "fitted AR polynomial is non-stationary (min root modulus {:.4})",
            report.min_ar_root_modulus
        ));
    }
    if !report.invertible {
        warnings.push(format!(
            "fitted MA polynomial is non-invertible (min root modulus {:.4})",
            report.min_ma_root_modulus
        ));
    }

    // Observed information via differenced analytic score: uniform across
    // kernels, including the families without closed-form curvature.
    let se = match ctx.hessian(&params, HessianMode::FiniteDiff) {
        Ok(h) => {
            if let Some(w) = h.asymmetry_warning() {
                warnings.push(w);
            }
            match observed_info_se(&h.matrix) {
                Ok(se) => Some(se),
                Err(e) => {
                    warnings.push(format!("standard errors unavailable: {e}"));
                    None
                }
            }
        }
        Err(e) => {
            warnings.push(format!("Hessian evaluation failed: {e}"));
            None
        }
    };

    let st = run_recursion(ctx.spec(), ctx.data(), &params)?;
    let criteria = information_criteria(best.value, ctx.dim(), ctx.n_used())?;
    Ok(FitResult {
        params,
        se,
        loglik: best.value,
        n_used: ctx.n_used(),
        criteria,
        fitted_q: st.quantile,
        innovations: st.innovation,
        converged: best.converged,
        iterations: best.iterations,
        grad_norm: best.grad_norm,
        warnings,
    })
}

/// One quantile level of a profile fit.
#[derive(Debug)]
pub struct ProfileEntry {
    pub tau: f64,
    pub fit: Result<FitResult>,
}

/// Fits the same data across a grid of quantile levels, warm-starting
/// each level from the last successful solution. Failures are recorded
/// per level and do not abort the sweep.
pub fn fit_profile(
    spec: &ModelSpec,
    data: &DesignData,
    kernel: &crate::kernel::StandardKernel,
    config: &FitConfig,
    tau_grid: &[f64],
) -> Result<Vec<ProfileEntry>> {
    if tau_grid.is_empty() {
        return Err(Error::InvalidParameter("quantile grid is empty".into()));
    }
    if let Some(&bad) = tau_grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "quantile grid level {bad} outside (0,1)"
        )));
    }
    let mut out = Vec::with_capacity(tau_grid.len());
    let mut warm: Option<ParamVector> = None;
    for &tau in tau_grid {
        let mut level_spec = spec.clone();
        level_spec.tau_level = tau;
        let entry = LikelihoodContext::new(&level_spec, data, kernel).and_then(|ctx| match &warm {
            Some(start) => fit_from(&ctx, config, start),
            None => fit(&ctx, config),
        });
        if let Ok(f) = &entry {
            warm = Some(f.params.clone());
        }
        out.push(ProfileEntry { tau, fit: entry });
    }
    Ok(out)
}

/// Fits every candidate specification and returns the index and result
/// attaining the smallest AIC. Intended for kernel or shape-parameter
/// grids over the same data.
pub fn select_by_aic(
    candidates: &[ModelSpec],
    data: &DesignData,
    config: &FitConfig,
) -> Result<(usize, FitResult)> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate models".into()));
    }
    let mut best: Option<(usize, FitResult)> = None;
    let mut failures = Vec::new();
    for (i, spec) in candidates.iter().enumerate() {
        let attempt = crate::kernel::StandardKernel::new(spec.kernel.clone())
            .and_then(|kernel| {
                let ctx = LikelihoodContext::new(spec, data, &kernel)?;
                fit(&ctx, config)
            });
        match attempt {
            Ok(f) => {
                let better = best
                    .as_ref()
                    .is_none_or(|(_, b)| f.criteria.aic < b.criteria.aic);
                if better {
                    best = Some((i, f));
                }
            }
            Err(e) => failures.push(format!("candidate {i}: {e}")),
        }
    }
    best.ok_or_else(|| {
        Error::NonConvergence(format!(
            "every candidate model failed to fit ({})",
            failures.join("; ")
        ))
    })
}

/// Fraction of usable time points where a supposedly-lower quantile curve
/// sits strictly above a higher one — a soft coherence diagnostic for
/// fits at different levels.
pub fn crossing_fraction(lower_curve: &[f64], upper_curve: &[f64]) -> f64 {
    let mut total = 0usize;
    let mut crossed = 0usize;
    for (&lo, &hi) in lower_curve.iter().zip(upper_curve) {
        if lo.is_finite() && hi.is_finite() {
            total += 1;
            if lo > hi {
                crossed += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        crossed as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelFamily, StandardKernel};
    use approx::assert_abs_diff_eq;

    #[test]
    fn criteria_reference_values() {
        let c = information_criteria(100.0, 5, 200).unwrap();
        assert_eq!(c.aic, -190.0);
        assert_abs_diff_eq!(c.bic, -173.50841316725982, epsilon = 1e-12);
        assert_abs_diff_eq!(c.caic, -200.0 + 2000.0 / 194.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            c.hqic,
            -200.0 + 10.0 * 200.0_f64.ln().ln(),
            epsilon = 1e-12
        );
        // Effective sample too small for the CAIC denominator.
        assert!(information_criteria(100.0, 5, 6).is_err());
    }

    fn regression_data(n: usize, beta: &[f64], noise: f64) -> DesignData {
        let x = DMatrix::from_fn(n, beta.len(), |t, j| {
            if j == 0 {
                1.0
            } else {
                (0.37 * t as f64 * j as f64).cos()
            }
        });
        let y: Vec<f64> = (0..n)
            .map(|t| {
                let mut eta = 0.0;
                for (j, b) in beta.iter().enumerate() {
                    eta += b * x[(t, j)];
                }
                // Deterministic pseudo-noise.
                (eta + noise * (1000.0 * (t as f64 + 0.5).sin()).sin()).exp()
            })
            .collect();
        let w = DMatrix::from_element(n, 1, 1.0);
        DesignData::new(y, x, w).unwrap()
    }

    #[test]
    fn initializer_recovers_noiseless_regression() {
        let truth = [0.5, 0.8];
        let data = regression_data(50, &truth, 0.0);
        let spec = ModelSpec::new(0, 0, 1, 0, 0.5, KernelFamily::normal()).unwrap();
        let init = initialize(&spec, &data).unwrap();
        assert_abs_diff_eq!(init.beta[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(init.beta[1], 0.8, epsilon = 1e-10);
    }

    #[test]
    fn initializer_rejects_collinear_design() {
        let n = 30;
        let y: Vec<f64> = (0..n).map(|t| (0.1 * t as f64).exp()).collect();
        // Third column duplicates the second.
        let x = DMatrix::from_fn(n, 3, |t, j| match j {
            0 => 1.0,
            _ => (0.37 * t as f64).cos(),
        });
        let w = DMatrix::from_element(n, 1, 1.0);
        let data = DesignData::new(y, x, w).unwrap();
        let spec = ModelSpec::new(0, 0, 2, 0, 0.5, KernelFamily::normal()).unwrap();
        let err = initialize(&spec, &data).unwrap_err();
        match err {
            Error::Collinear(msg) => assert!(msg.contains("column 3"), "{msg}"),
            other => panic!("expected collinearity error, got {other}"),
        }
    }

    #[test]
    fn initializer_always_admissible() {
        // Whatever the data, the ARMA start must be stationary/invertible.
        for scale in [0.1, 0.5, 2.0] {
            let y: Vec<f64> = (0..60)
                .map(|t| (scale * (0.9 * t as f64).sin() + 0.01 * t as f64).exp())
                .collect();
            let data = DesignData::from_series(y).unwrap();
            let spec = ModelSpec::new(2, 2, 0, 0, 0.5, KernelFamily::normal()).unwrap();
            let init = initialize(&spec, &data).unwrap();
            let report = polynomial_report(&init.phi, &init.theta);
            assert!(report.stationary && report.invertible);
        }
    }

    #[test]
    fn static_median_fit_equals_least_squares() {
        // Normal kernel, τ = 0.5, p = q = 0: the CML β̂ is exactly the
        // log-scale OLS estimate.
        let data = regression_data(80, &[0.5, 0.8], 0.3);
        let spec = ModelSpec::new(0, 0, 1, 0, 0.5, KernelFamily::normal()).unwrap();
        let kernel = StandardKernel::new(KernelFamily::normal()).unwrap();
        let ctx = LikelihoodContext::new(&spec, &data, &kernel).unwrap();
        let fit = fit(&ctx, &FitConfig::default()).unwrap();
        assert!(fit.converged);

        let hy = DVector::from_iterator(80, data.y().iter().map(|&v: &f64| v.ln()));
        let ols = least_squares(data.x(), &hy, "mean").unwrap();
        assert_abs_diff_eq!(fit.params.beta[0], ols[0], epsilon = 1e-6);
        assert_abs_diff_eq!(fit.params.beta[1], ols[1], epsilon = 1e-6);
        // Gradient condition from the convergence contract.
        assert!(fit.grad_norm <= 1e-6 * (1.0 + fit.loglik.abs()));
        // Criteria recomputed from the stored likelihood match bitwise.
        let again = information_criteria(fit.loglik, ctx.dim(), fit.n_used).unwrap();
        assert_eq!(again, fit.criteria);
    }

    fn arma_data(n: usize) -> DesignData {
        // Mildly autocorrelated positive series (deterministic).
        let mut hy = vec![0.0; n];
        for t in 0..n {
            let shock = 0.3 * (2000.0 * ((t as f64) + 0.25).sin()).sin();
            hy[t] = 0.2 + if t > 0 { 0.55 * (hy[t - 1] - 0.2) } else { 0.0 } + shock;
        }
        DesignData::from_series(hy.iter().map(|&v| v.exp()).collect()).unwrap()
    }

    #[test]
    fn refit_from_maximum_is_stationary() {
        let data = arma_data(70);
        let spec = ModelSpec::new(1, 1, 0, 0, 0.5, KernelFamily::normal()).unwrap();
        let kernel = StandardKernel::new(KernelFamily::normal()).unwrap();
        let ctx = LikelihoodContext::new(&spec, &data, &kernel).unwrap();
        let config = FitConfig::default();
        let first = fit(&ctx, &config).unwrap();
        assert!(first.converged, "warnings: {:?}", first.warnings);

        let again = fit_from(&ctx, &config, &first.params).unwrap();
        assert!(again.iterations <= 2, "took {} iterations", again.iterations);
        assert_abs_diff_eq!(
            again.loglik,
            first.loglik,
            epsilon = 1e-8 * (1.0 + first.loglik.abs())
        );
    }

    #[test]
    fn fit_is_deterministic() {
        let data = arma_data(60);
        let spec = ModelSpec::new(1, 1, 0, 0, 0.5, KernelFamily::normal()).unwrap();
        let kernel = StandardKernel::new(KernelFamily::normal()).unwrap();
        let ctx = LikelihoodContext::new(&spec, &data, &kernel).unwrap();
        let config = FitConfig {
            multistart: 3,
            seed: 42,
            ..FitConfig::default()
        };
        let a = fit(&ctx, &config).unwrap();
        let b = fit(&ctx, &config).unwrap();
        assert_eq!(a.params.pack(), b.params.pack());
        assert_eq!(a.loglik, b.loglik);
    }

    #[test]
    fn single_level_profile_matches_plain_fit() {
        let data = arma_data(60);
        let spec = ModelSpec::new(1, 0, 0, 0, 0.5, KernelFamily::normal()).unwrap();
        let kernel = StandardKernel::new(KernelFamily::normal()).unwrap();
        let ctx = LikelihoodContext::new(&spec, &data, &kernel).unwrap();
        let config = FitConfig::default();
        let direct = fit(&ctx, &config).unwrap();
        let profile = fit_profile(&spec, &data, &kernel, &config, &[0.5]).unwrap();
        assert_eq!(profile.len(), 1);
        let entry = profile[0].fit.as_ref().unwrap();
        assert_abs_diff_eq!(
            entry.loglik,
            direct.loglik,
            epsilon = 1e-10 * (1.0 + direct.loglik.abs())
        );
        // Rejects out-of-range levels.
        assert!(fit_profile(&spec, &data, &kernel, &config, &[0.5, 1.2]).is_err());
    }

    #[test]
    fn crossing_fraction_counts_inversions() {
        let lo = [1.0, 2.0, f64::NAN, 5.0];
        let hi = [2.0, 1.5, 3.0, 6.0];
        assert_abs_diff_eq!(crossing_fraction(&lo, &hi), 1.0 / 3.0, epsilon = 1e-15);
    }
}
