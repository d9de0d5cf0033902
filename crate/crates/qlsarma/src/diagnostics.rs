//! Residual diagnostics: survival-based residuals, descriptive
//! statistics, autocorrelations, and simulated QQ envelopes.
//!
//! Two residual transforms are produced from the fitted conditional
//! survival Ŝ_t = 1 − F̂(y_t):
//!
//! * generalized Cox–Snell, `GCS_t = −ln Ŝ_t`, standard exponential
//!   under a correct specification;
//! * randomized-free quantile, `RQ_t = Φ⁻¹(1 − Ŝ_t)`, standard normal
//!   under a correct specification. No randomization is involved — the
//!   response is continuous — so the transform is deterministic.
//!
//! Survival values are clamped to [1e−15, 1−1e−15] before the
//! transforms; the number of clamped observations is reported so that
//! gross misfit shows up rather than hiding in saturated tails.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::distribution::QlsDistribution;
use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::likelihood::LikelihoodContext;
use crate::model::{ParamVector, run_recursion};

const SURVIVAL_FLOOR: f64 = 1e-15;

/// Summary statistics in reporting order.
#[derive(Debug, Clone, PartialEq)]
pub struct Describe {
    pub mean: f64,
    /// Midpoint of the two central order statistics for even lengths.
    pub median: f64,
    /// Sample standard deviation (n−1 denominator).
    pub sd: f64,
    /// Bias-corrected skewness; `None` for n < 3 or zero variance.
    pub skewness: Option<f64>,
    /// Bias-corrected excess kurtosis; `None` for n < 4 or zero variance.
    pub kurtosis: Option<f64>,
    pub min: f64,
    pub max: f64,
    /// Coefficient of variation in percent; `None` when the mean is zero.
    pub cv: Option<f64>,
    pub n: usize,
}

/// Descriptive statistics of a series (requires n ≥ 2).
pub fn describe(series: &[f64]) -> Result<Describe> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Shape(format!(
            "summary statistics need at least 2 observations, got {n}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "series contains a non-finite value".into(),
        ));
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in series {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let sd = (m2 * nf / (nf - 1.0)).sqrt();
    let skewness = (n >= 3 && m2 > 0.0).then(|| {
        let g1 = m3 / m2.powf(1.5);
        g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)
    });
    let kurtosis = (n >= 4 && m2 > 0.0).then(|| {
        let g2 = m4 / (m2 * m2) - 3.0;
        ((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0))
    });
    let cv = (mean != 0.0).then(|| sd / mean * 100.0);
    Ok(Describe {
        mean,
        median,
        sd,
        skewness,
        kurtosis,
        min: sorted[0],
        max: sorted[n - 1],
        cv,
        n,
    })
}

/// Sample autocorrelations (lags 0..=max_lag, biased 1/n covariances)
/// and partial autocorrelations (lags 1..=max_lag, Durbin–Levinson).
pub fn acf_pacf(series: &[f64], max_lag: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = series.len();
    if max_lag == 0 || max_lag >= n {
        return Err(Error::Shape(format!(
            "lag bound must satisfy 1 ≤ max_lag < {n}, got {max_lag}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0 = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return Err(Error::Degenerate(
            "constant series has no autocorrelation structure".into(),
        ));
    }
    let mut acf = Vec::with_capacity(max_lag + 1);
    acf.push(1.0);
    for k in 1..=max_lag {
        let ck = (k..n)
            .map(|t| (series[t] - mean) * (series[t - k] - mean))
            .sum::<f64>()
            / n as f64;
        acf.push(ck / c0);
    }

    // Durbin–Levinson: pacf[k−1] = φ_{kk} from the Yule–Walker system.
    let mut pacf = Vec::with_capacity(max_lag);
    let mut prev: Vec<f64> = vec![acf[1]];
    pacf.push(acf[1]);
    for k in 2..=max_lag {
        let num = acf[k] - (1..k).map(|j| prev[j - 1] * acf[k - j]).sum::<f64>();
        let den = 1.0 - (1..k).map(|j| prev[j - 1] * acf[j]).sum::<f64>();
        if den.abs() < 1e-12 {
            return Err(Error::Numeric(format!(
                "partial autocorrelation system is singular at lag {k}"
            )));
        }
        let phi_kk = num / den;
        let mut cur = vec![0.0; k];
        for j in 1..k {
            cur[j - 1] = prev[j - 1] - phi_kk * prev[k - 1 - j];
        }
        cur[k - 1] = phi_kk;
        pacf.push(phi_kk);
        prev = cur;
    }
    Ok((acf, pacf))
}

/// Survival-based residual pair for each usable observation (t ≥ m).
///
/// Returns `(gcs, rq, clamped)` where `clamped` counts survival values
/// that hit the numerical floor/ceiling.
pub fn survival_residuals(
    ctx: &LikelihoodContext,
    params: &ParamVector,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let spec = ctx.spec();
    let data = ctx.data();
    let st = run_recursion(spec, data, params)?;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut gcs = Vec::with_capacity(ctx.n_used());
    let mut rq = Vec::with_capacity(ctx.n_used());
    let mut clamped = 0usize;
    for t in st.m..data.n() {
        let dist = QlsDistribution::new(ctx.kernel(), st.quantile[t], st.kappa[t], spec.tau_level)?;
        let f = dist.cdf(data.y()[t])?;
        let mut survival = 1.0 - f;
        if !(SURVIVAL_FLOOR..=1.0 - SURVIVAL_FLOOR).contains(&survival) {
            survival = survival.clamp(SURVIVAL_FLOOR, 1.0 - SURVIVAL_FLOOR);
            clamped += 1;
        }
        gcs.push(-survival.ln());
        rq.push(std_normal.inverse_cdf(1.0 - survival));
    }
    Ok((gcs, rq, clamped))
}

/// Full residual report for a fit.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub gcs: Vec<f64>,
    pub rq: Vec<f64>,
    pub stats_gcs: Describe,
    pub stats_rq: Describe,
    /// Autocorrelations of the quantile residuals, lags 0..=max_lag.
    pub acf: Vec<f64>,
    /// Partial autocorrelations, lags 1..=max_lag.
    pub pacf: Vec<f64>,
    /// Observations whose survival hit the numerical clamp.
    pub clamped: usize,
    /// Simulated QQ band, attached separately via [`qq_envelope`].
    pub envelope: Option<QqEnvelope>,
}

/// Residual diagnostics at the fitted coefficients.
pub fn residuals(
    fit: &FitResult,
    ctx: &LikelihoodContext,
    max_lag: usize,
) -> Result<ResidualReport> {
    let (gcs, rq, clamped) = survival_residuals(ctx, &fit.params)?;
    let stats_gcs = describe(&gcs)?;
    let stats_rq = describe(&rq)?;
    let (acf, pacf) = acf_pacf(&rq, max_lag)?;
    Ok(ResidualReport {
        gcs,
        rq,
        stats_gcs,
        stats_rq,
        acf,
        pacf,
        clamped,
        envelope: None,
    })
}

/// Reference law for a QQ envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeTarget {
    StandardNormal,
    StandardExponential,
}

impl EnvelopeTarget {
    fn quantile(self, p: f64) -> f64 {
        match self {
            EnvelopeTarget::StandardNormal => {
                Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
            }
            EnvelopeTarget::StandardExponential => -(1.0 - p).ln(),
        }
    }

    fn sample<R: Rng>(self, rng: &mut R) -> f64 {
        // Inverse-CDF sampling from an open-interval uniform.
        let u = rng.random::<f64>().mul_add(1.0 - 2e-16, 1e-16);
        self.quantile(u)
    }
}

/// Order-statistic QQ plot data with a simulated pointwise band.
#[derive(Debug, Clone, PartialEq)]
pub struct QqEnvelope {
    /// Target quantiles at midpoint plotting positions (i+½)/n.
    pub theoretical: Vec<f64>,
    /// Sorted residuals.
    pub observed: Vec<f64>,
    /// 2.5% rank-wise envelope bound over the simulated samples.
    pub lower: Vec<f64>,
    /// 97.5% rank-wise envelope bound.
    pub upper: Vec<f64>,
}

/// Simulates `n_sim` samples of the residual length from the target law
/// and takes rank-wise 2.5%/97.5% bounds across their order statistics.
/// Deterministic for a fixed generator state.
pub fn qq_envelope<R: Rng>(
    residuals: &[f64],
    target: EnvelopeTarget,
    n_sim: usize,
    rng: &mut R,
) -> Result<QqEnvelope> {
    let n = residuals.len();
    if n < 2 {
        return Err(Error::Shape(
            "QQ envelope needs at least 2 residuals".into(),
        ));
    }
    if n_sim < 19 {
        return Err(Error::InvalidParameter(format!(
            "envelope needs at least 19 simulated samples, got {n_sim}"
        )));
    }
    let mut observed = residuals.to_vec();
    observed.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let theoretical: Vec<f64> = (0..n)
        .map(|i| target.quantile((i as f64 + 0.5) / n as f64))
        .collect();

    // ranks[i] holds the i-th order statistic from every simulation.
    let mut ranks = vec![Vec::with_capacity(n_sim); n];
    let mut draw = vec![0.0; n];
    for _ in 0..n_sim {
        for slot in draw.iter_mut() {
            *slot = target.sample(rng);
        }
        draw.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, &v) in draw.iter().enumerate() {
            ranks[i].push(v);
        }
    }
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let lo_idx = (0.025 * (n_sim - 1) as f64).floor() as usize;
    let hi_idx = (0.975 * (n_sim - 1) as f64).ceil() as usize;
    for rank in &mut ranks {
        rank.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lower.push(rank[lo_idx]);
        upper.push(rank[hi_idx]);
    }
    Ok(QqEnvelope {
        theoretical,
        observed,
        lower,
        upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use crate::model::{DesignData, ModelSpec};
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn describe_reference_values() {
        let d = describe(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(d.mean, 3.0);
        assert_eq!(d.median, 3.0);
        assert_abs_diff_eq!(d.sd, 1.5811388300841898, epsilon = 1e-15);
        assert_eq!(d.min, 1.0);
        assert_eq!(d.max, 5.0);
        assert_eq!(d.n, 5);
        assert_abs_diff_eq!(d.skewness.unwrap(), 0.0, epsilon = 1e-15);
        // Bias-corrected excess kurtosis of 1..5 (matches R's e1071 type 2).
        assert_abs_diff_eq!(d.kurtosis.unwrap(), -1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(d.cv.unwrap(), 1.5811388300841898 / 3.0 * 100.0, epsilon = 1e-12);
    }

    #[test]
    fn median_uses_midpoint_for_even_lengths() {
        let d = describe(&[10.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.median, 2.5);
    }

    #[test]
    fn degenerate_lengths_and_constant_series() {
        assert!(describe(&[1.0]).is_err());
        let pair = describe(&[1.0, 2.0]).unwrap();
        assert!(pair.skewness.is_none() && pair.kurtosis.is_none());
        let triple = describe(&[1.0, 2.0, 4.0]).unwrap();
        assert!(triple.skewness.is_some() && triple.kurtosis.is_none());
        let flat = describe(&[2.0; 6]).unwrap();
        assert_eq!(flat.sd, 0.0);
        assert!(flat.skewness.is_none() && flat.kurtosis.is_none());
    }

    #[test]
    fn acf_small_case_by_hand() {
        // (1,2,3,4): c₀ = 1.25, c₁ = 0.3125, c₂ = −0.375.
        let (acf, pacf) = acf_pacf(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(acf[0], 1.0);
        assert_abs_diff_eq!(acf[1], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(acf[2], -0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(pacf[0], 0.25, epsilon = 1e-15);
        // φ₂₂ = (ρ₂ − ρ₁²)/(1 − ρ₁²) = −0.3625/0.9375.
        assert_abs_diff_eq!(pacf[1], -0.3625 / 0.9375, epsilon = 1e-15);
    }

    #[test]
    fn ar1_autocorrelation_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x = vec![0.0_f64; 6000];
        for t in 1..x.len() {
            let u = rng.random::<f64>().mul_add(1.0 - 2e-16, 1e-16);
            x[t] = 0.6 * x[t - 1] + normal.inverse_cdf(u);
        }
        let (acf, pacf) = acf_pacf(&x[100..], 3).unwrap();
        assert_abs_diff_eq!(acf[1], 0.6, epsilon = 0.03);
        assert_abs_diff_eq!(acf[2], 0.36, epsilon = 0.03);
        assert_abs_diff_eq!(pacf[0], 0.6, epsilon = 0.03);
        // AR(1): partials beyond lag 1 vanish.
        assert_abs_diff_eq!(pacf[1], 0.0, epsilon = 0.05);
        assert_abs_diff_eq!(pacf[2], 0.0, epsilon = 0.05);
    }

    #[test]
    fn constant_series_has_no_acf() {
        assert!(matches!(
            acf_pacf(&[5.0; 30], 4),
            Err(Error::Degenerate(_))
        ));
        assert!(acf_pacf(&[1.0, 2.0], 2).is_err());
    }

    fn static_context() -> (ModelSpec, DesignData) {
        let spec = ModelSpec::new(0, 0, 1, 0, 0.5, KernelFamily::normal()).unwrap();
        let n = 24;
        let x = DMatrix::from_fn(n, 2, |t, j| if j == 0 { 1.0 } else { (t as f64 / n as f64) - 0.5 });
        let y: Vec<f64> = (0..n)
            .map(|t| {
                let eta = 0.2 + 0.3 * ((t as f64 / n as f64) - 0.5);
                // y = Q·e^δ with a deterministic wobble, except t = 5
                // which sits exactly at the fitted quantile.
                let delta = if t == 5 { 0.0 } else { 0.4 * (t as f64 * 1.3).sin() };
                (eta + delta).exp()
            })
            .collect();
        let data = DesignData::new(y, x, DMatrix::from_element(n, 1, 1.0)).unwrap();
        (spec, data)
    }

    fn static_params() -> ParamVector {
        ParamVector {
            beta: DVector::from_vec(vec![0.2, 0.3]),
            tau_coefs: DVector::from_vec(vec![-0.7]),
            phi: DVector::zeros(0),
            theta: DVector::zeros(0),
        }
    }

    #[test]
    fn observation_at_the_fitted_median() {
        // Ŝ = ½ there: GCS = ln 2, RQ = 0.
        let (spec, data) = static_context();
        let kernel = crate::kernel::StandardKernel::new(KernelFamily::normal()).unwrap();
        let ctx = LikelihoodContext::new(&spec, &data, &kernel).unwrap();
        let (gcs, rq, clamped) = survival_residuals(&ctx, &static_params()).unwrap();
        assert_eq!(gcs.len(), data.n());
        assert_eq!(clamped, 0);
        assert_abs_diff_eq!(gcs[5], std::f64::consts::LN_2, epsilon = 1e-9);
        assert_abs_diff_eq!(rq[5], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn residual_transforms_are_consistent() {
        // RQ = Φ⁻¹(1 − e^{−GCS}) elementwise.
        let (spec, data) = static_context();
        let family = KernelFamily::student_t(4.0).unwrap();
        let kernel = crate::kernel::StandardKernel::new(family.clone()).unwrap();
        let spec = ModelSpec { kernel: family, ..spec };
        let ctx = LikelihoodContext::new(&spec, &data, &kernel).unwrap();
        let (gcs, rq, _) = survival_residuals(&ctx, &static_params()).unwrap();
        let normal = Normal::new(0.0, 1.0).unwrap();
        for (g, r) in gcs.iter().zip(&rq) {
            assert_abs_diff_eq!(*r, normal.inverse_cdf(1.0 - (-g).exp()), epsilon = 1e-10);
        }
    }

    #[test]
    fn report_lengths_follow_the_conditioning_window() {
        // ARMA(2,1) drops m = 2 leading observations.
        let spec = ModelSpec::new(2, 1, 0, 0, 0.25, KernelFamily::normal()).unwrap();
        let y: Vec<f64> = (0..30).map(|t| (0.3 * (t as f64 * 0.9).sin()).exp()).collect();
        let data = DesignData::from_series(y).unwrap();
        let kernel = crate::kernel::StandardKernel::new(KernelFamily::normal()).unwrap();
        let ctx = LikelihoodContext::new(&spec, &data, &kernel).unwrap();
        let params = ParamVector {
            beta: DVector::from_vec(vec![0.0]),
            tau_coefs: DVector::from_vec(vec![-1.0]),
            phi: DVector::from_vec(vec![0.3, -0.1]),
            theta: DVector::from_vec(vec![0.2]),
        };
        let (gcs, rq, _) = survival_residuals(&ctx, &params).unwrap();
        assert_eq!(gcs.len(), 28);
        assert_eq!(rq.len(), 28);
    }

    #[test]
    fn envelope_shapes_and_determinism() {
        let resid: Vec<f64> = (0..40).map(|t| ((t * 37 % 17) as f64 - 8.0) / 4.0).collect();
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            qq_envelope(&resid, EnvelopeTarget::StandardNormal, 19, &mut rng).unwrap()
        };
        let a = run(7);
        let b = run(7);
        assert_eq!(a, b);
        assert_eq!(a.theoretical.len(), 40);
        assert!(a.lower.iter().zip(&a.upper).all(|(l, u)| l <= u));
        assert!(a.observed.windows(2).all(|w| w[0] <= w[1]));
        assert!(a.theoretical.windows(2).all(|w| w[0] <= w[1]));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(qq_envelope(&resid, EnvelopeTarget::StandardNormal, 18, &mut rng).is_err());
    }

    #[test]
    fn envelope_covers_a_well_specified_sample() {
        // A genuine exponential sample should sit almost entirely inside
        // its own 95% band.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample: Vec<f64> = (0..100)
            .map(|_| EnvelopeTarget::StandardExponential.sample(&mut rng))
            .collect();
        let env = qq_envelope(&sample, EnvelopeTarget::StandardExponential, 99, &mut rng).unwrap();
        let inside = env
            .observed
            .iter()
            .enumerate()
            .filter(|(i, v)| env.lower[*i] <= **v && **v <= env.upper[*i])
            .count();
        assert!(inside >= 85, "only {inside}/100 inside the band");
    }
}
