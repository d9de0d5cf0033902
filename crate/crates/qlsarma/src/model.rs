//! Model specification and the conditional-quantile recursion.
//!
//! The τ-th quantile of `y_t` given its past is driven on the link scale by
//!
//! ```text
//! η_t = x_tᵀβ + Σᵢ φᵢ·[h(y_{t−i}) − x_{t−i}ᵀβ] + Σⱼ θⱼ·r_{t−j},
//! r_t = h(y_t) − η_t,      Q_t = h⁻¹(η_t),
//! ```
//!
//! with the dispersion following its own regression `κ_t = s⁻¹(w_tᵀτ)`.
//! The recursion conditions on the first `m = max(p, q)` observations:
//! `η_t`/`Q_t` are undefined (NaN) for `t < m` and pre-sample innovations
//! are fixed at zero, so likelihood sums always run over `t ≥ m`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::KernelFamily;

/// Invertible transform carrying a positive quantity to the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// Natural logarithm; the only link currently offered.
    Log,
}

impl Link {
    /// Forward map `h(y)`.
    pub fn apply(self, y: f64) -> f64 {
        match self {
            Link::Log => y.ln(),
        }
    }

    /// Inverse map `h⁻¹(η)`.
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Log => eta.exp(),
        }
    }
}

/// Orders, covariate arities and distributional choices for one model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    /// Autoregressive order `p ≥ 0`.
    pub p: usize,
    /// Moving-average order `q ≥ 0`.
    pub q: usize,
    /// Number of mean covariates beyond the intercept.
    pub n_mean_covariates: usize,
    /// Number of dispersion covariates beyond the intercept.
    pub n_disp_covariates: usize,
    /// Quantile level τ ∈ (0, 1) being modeled.
    pub tau_level: f64,
    /// Kernel generating the standardized law.
    pub kernel: KernelFamily,
    /// Link for the conditional quantile.
    pub mean_link: Link,
    /// Link for the conditional dispersion.
    pub disp_link: Link,
}

impl ModelSpec {
    /// Convenience constructor with log links on both components.
    pub fn new(
        p: usize,
        q: usize,
        n_mean_covariates: usize,
        n_disp_covariates: usize,
        tau_level: f64,
        kernel: KernelFamily,
    ) -> Result<Self> {
        let spec = Self {
            p,
            q,
            n_mean_covariates,
            n_disp_covariates,
            tau_level,
            kernel,
            mean_link: Link::Log,
            disp_link: Link::Log,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_level > 0.0 && self.tau_level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "quantile level must lie in (0,1), got {}",
                self.tau_level
            )));
        }
        Ok(())
    }

    /// Number of conditioning observations, `m = max(p, q)`.
    pub fn m(&self) -> usize {
        self.p.max(self.q)
    }

    /// Mean-regression coefficient count (intercept included).
    pub fn n_beta(&self) -> usize {
        self.n_mean_covariates + 1
    }

    /// Dispersion-regression coefficient count (intercept included).
    pub fn n_tau_coefs(&self) -> usize {
        self.n_disp_covariates + 1
    }

    /// Total free parameters: β, dispersion coefficients, φ, θ.
    pub fn n_params(&self) -> usize {
        self.n_beta() + self.n_tau_coefs() + self.p + self.q
    }
}

/// Response series plus mean/dispersion design matrices.
///
/// Both matrices carry a leading column of ones for the intercept; rows
/// align with observations.
#[derive(Debug, Clone)]
pub struct DesignData {
    y: DVector<f64>,
    x: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl DesignData {
    pub fn new(y: Vec<f64>, x: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Shape("response series is empty".into()));
        }
        for (t, &v) in y.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!(
                    "response must be positive and finite; observation {} is {v}",
                    t + 1
                )));
            }
        }
        for (name, mat) in [("mean", &x), ("dispersion", &w)] {
            if mat.nrows() != n {
                return Err(Error::Shape(format!(
                    "{name} design has {} rows but the response has {n}",
                    mat.nrows()
                )));
            }
            if mat.ncols() == 0 {
                return Err(Error::Shape(format!(
                    "{name} design needs at least the intercept column"
                )));
            }
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "{name} design contains a non-finite entry"
                )));
            }
            if (0..n).any(|t| mat[(t, 0)] != 1.0) {
                return Err(Error::Shape(format!(
                    "{name} design must start with an all-ones intercept column"
                )));
            }
        }
        Ok(Self {
            y: DVector::from_vec(y),
            x,
            w,
        })
    }

    /// Intercept-only designs for a pure time-series model.
    pub fn from_series(y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(
            y,
            DMatrix::from_element(n, 1, 1.0),
            DMatrix::from_element(n, 1, 1.0),
        )
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Confirms the design arities match a specification.
    pub fn check_against(&self, spec: &ModelSpec) -> Result<()> {
        if self.x.ncols() != spec.n_beta() {
            return Err(Error::Shape(format!(
                "mean design has {} columns, expected {}",
                self.x.ncols(),
                spec.n_beta()
            )));
        }
        if self.w.ncols() != spec.n_tau_coefs() {
            return Err(Error::Shape(format!(
                "dispersion design has {} columns, expected {}",
                self.w.ncols(),
                spec.n_tau_coefs()
            )));
        }
        if self.n() <= spec.m() {
            return Err(Error::Shape(format!(
                "series length {} does not exceed the conditioning window m = {}",
                self.n(),
                spec.m()
            )));
        }
        Ok(())
    }
}

/// Full coefficient set in structured form.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    /// Mean-regression coefficients (intercept first).
    pub beta: DVector<f64>,
    /// Dispersion-regression coefficients (intercept first).
    pub tau_coefs: DVector<f64>,
    /// Autoregressive coefficients `φ₁..φ_p`.
    pub phi: DVector<f64>,
    /// Moving-average coefficients `θ₁..θ_q`.
    pub theta: DVector<f64>,
}

impl ParamVector {
    pub fn zeros(spec: &ModelSpec) -> Self {
        Self {
            beta: DVector::zeros(spec.n_beta()),
            tau_coefs: DVector::zeros(spec.n_tau_coefs()),
            phi: DVector::zeros(spec.p),
            theta: DVector::zeros(spec.q),
        }
    }

    pub fn len(&self) -> usize {
        self.beta.len() + self.tau_coefs.len() + self.phi.len() + self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_against(&self, spec: &ModelSpec) -> Result<()> {
        let ok = self.beta.len() == spec.n_beta()
            && self.tau_coefs.len() == spec.n_tau_coefs()
            && self.phi.len() == spec.p
            && self.theta.len() == spec.q;
        if !ok {
            return Err(Error::Shape(format!(
                "parameter blocks ({},{},{},{}) do not match the specification ({},{},{},{})",
                self.beta.len(),
                self.tau_coefs.len(),
                self.phi.len(),
                self.theta.len(),
                spec.n_beta(),
                spec.n_tau_coefs(),
                spec.p,
                spec.q
            )));
        }
        if let Some(bad) = self
            .beta
            .iter()
            .chain(self.tau_coefs.iter())
            .chain(self.phi.iter())
            .chain(self.theta.iter())
            .find(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "parameter vector contains non-finite entry {bad}"
            )));
        }
        Ok(())
    }

    /// Flattens in the canonical order β, dispersion coefficients, φ, θ.
    pub fn pack(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend(self.beta.iter());
        out.extend(self.tau_coefs.iter());
        out.extend(self.phi.iter());
        out.extend(self.theta.iter());
        DVector::from_vec(out)
    }

    /// Rebuilds the structured form from a flat vector.
    pub fn unpack(spec: &ModelSpec, flat: &DVector<f64>) -> Result<Self> {
        if flat.len() != spec.n_params() {
            return Err(Error::Shape(format!(
                "flat parameter vector has length {}, expected {}",
                flat.len(),
                spec.n_params()
            )));
        }
        let k = spec.n_beta();
        let l = spec.n_tau_coefs();
        let s = flat.as_slice();
        Ok(Self {
            beta: DVector::from_row_slice(&s[..k]),
            tau_coefs: DVector::from_row_slice(&s[k..k + l]),
            phi: DVector::from_row_slice(&s[k + l..k + l + spec.p]),
            theta: DVector::from_row_slice(&s[k + l + spec.p..]),
        })
    }
}

/// Per-observation quantities produced by one pass of the recursion.
#[derive(Debug, Clone)]
pub struct RecursionState {
    /// Link-scale conditional quantile `η_t`; NaN for `t < m`.
    pub eta: Vec<f64>,
    /// Conditional quantile `Q_t = h⁻¹(η_t)`; NaN for `t < m`.
    pub quantile: Vec<f64>,
    /// Link-scale dispersion predictor `w_tᵀτ` for every `t`.
    pub gamma: Vec<f64>,
    /// Conditional dispersion `κ_t` for every `t`.
    pub kappa: Vec<f64>,
    /// Innovations `r_t = h(y_t) − η_t`; zero for `t < m`.
    pub innovation: Vec<f64>,
    /// Conditioning window; sums over usable observations start here.
    pub m: usize,
}

/// Runs the quantile recursion over the whole sample.
pub fn run_recursion(
    spec: &ModelSpec,
    data: &DesignData,
    params: &ParamVector,
) -> Result<RecursionState> {
    spec.validate()?;
    data.check_against(spec)?;
    params.check_against(spec)?;

    let n = data.n();
    let m = spec.m();
    let hy: Vec<f64> = data.y().iter().map(|&y| spec.mean_link.apply(y)).collect();
    let xb = data.x() * &params.beta;
    let gamma_v = data.w() * &params.tau_coefs;

    let mut gamma = vec![0.0; n];
    let mut kappa = vec![0.0; n];
    for t in 0..n {
        gamma[t] = gamma_v[t];
        kappa[t] = spec.disp_link.inverse(gamma_v[t]);
        if !(kappa[t].is_finite() && kappa[t] > 0.0) {
            return Err(Error::Numeric(format!(
                "dispersion recursion degenerated at observation {} (κ = {})",
                t + 1,
                kappa[t]
            )));
        }
    }

    let mut eta = vec![f64::NAN; n];
    let mut quantile = vec![f64::NAN; n];
    let mut innovation = vec![0.0; n];
    for t in m..n {
        let mut e = xb[t];
        for i in 1..=spec.p {
            e += params.phi[i - 1] * (hy[t - i] - xb[t - i]);
        }
        for j in 1..=spec.q {
            e += params.theta[j - 1] * innovation[t - j];
        }
        let q = spec.mean_link.inverse(e);
        if !e.is_finite() || !(q.is_finite() && q > 0.0) {
            return Err(Error::Numeric(format!(
                "quantile recursion degenerated at observation {} (η = {e})",
                t + 1
            )));
        }
        eta[t] = e;
        quantile[t] = q;
        innovation[t] = hy[t] - e;
    }

    Ok(RecursionState {
        eta,
        quantile,
        gamma,
        kappa,
        innovation,
        m,
    })
}

/// Moving-average representation weights `ψ₀..ψ_h` of an ARMA pair.
///
/// Defined by `ψ_j = θ_j + Σ_{i=1}^{min(j,p)} φᵢ·ψ_{j−i}` with `ψ₀ = 1`
/// and `θ_j = 0` past the MA order; equivalently the power-series
/// coefficients of `Θ(z)/Φ(z)`. Requires a stationary AR part so the
/// weights are summable.
pub fn psi_weights(phi: &DVector<f64>, theta: &DVector<f64>, horizon: usize) -> Result<Vec<f64>> {
    let report = polynomial_report(phi, theta);
    if !report.stationary {
        return Err(Error::NonStationary(format!(
            "autoregressive polynomial has a root of modulus {:.6} ≤ 1",
            report.min_ar_root_modulus
        )));
    }
    let p = phi.len();
    let q = theta.len();
    let mut psi = vec![0.0; horizon + 1];
    psi[0] = 1.0;
    for j in 1..=horizon {
        let mut v = if j <= q { theta[j - 1] } else { 0.0 };
        for i in 1..=j.min(p) {
            v += phi[i - 1] * psi[j - i];
        }
        psi[j] = v;
    }
    Ok(psi)
}

/// Root diagnostics for the AR and MA polynomials.
#[derive(Debug, Clone)]
pub struct PolynomialReport {
    /// Roots of `1 − φ₁z − … − φ_p z^p` (empty when p = 0).
    pub ar_roots: Vec<Complex<f64>>,
    /// Roots of `1 + θ₁z + … + θ_q z^q` (empty when q = 0).
    pub ma_roots: Vec<Complex<f64>>,
    /// All AR roots strictly outside the unit circle.
    pub stationary: bool,
    /// All MA roots strictly outside the unit circle.
    pub invertible: bool,
    /// Smallest AR root modulus; +∞ when p = 0.
    pub min_ar_root_modulus: f64,
    /// Smallest MA root modulus; +∞ when q = 0.
    pub min_ma_root_modulus: f64,
}

/// Locates the lag-polynomial roots and classifies the process.
pub fn polynomial_report(phi: &DVector<f64>, theta: &DVector<f64>) -> PolynomialReport {
    let ar_roots = lag_polynomial_roots(phi.as_slice(), -1.0);
    let ma_roots = lag_polynomial_roots(theta.as_slice(), 1.0);
    let min_mod = |roots: &[Complex<f64>]| {
        roots
            .iter()
            .map(|r| r.norm())
            .fold(f64::INFINITY, f64::min)
    };
    let min_ar = min_mod(&ar_roots);
    let min_ma = min_mod(&ma_roots);
    PolynomialReport {
        stationary: min_ar > 1.0,
        invertible: min_ma > 1.0,
        min_ar_root_modulus: min_ar,
        min_ma_root_modulus: min_ma,
        ar_roots,
        ma_roots,
    }
}

/// Roots of `1 + sign·(c₁z + … + c_k z^k)`, dropping trailing zero
/// coefficients. Computed as reciprocals of the eigenvalues of the
/// companion matrix of `λ^k + sign·c₁λ^{k−1} + … + sign·c_k`.
fn lag_polynomial_roots(coefs: &[f64], sign: f64) -> Vec<Complex<f64>> {
    let k = coefs
        .iter()
        .rposition(|&c| c != 0.0)
        .map_or(0, |idx| idx + 1);
    if k == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::zeros(k, k);
    for i in 0..k {
        companion[(0, i)] = -sign * coefs[i];
    }
    for i in 1..k {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|lam| {
            if lam.norm() < 1e-300 {
                Complex::new(f64::INFINITY, 0.0)
            } else {
                lam.inv()
            }
        })
        .collect()
}
