//! Symmetric density generators and the standardized laws they induce.
//!
//! A generator is a function `g : [0, ∞) → (0, ∞)` with `∫ g(z²) dz < ∞`;
//! it induces a symmetric density `ξ·g(z²)` on ℝ, where the normalizing
//! constant `ξ` makes the density integrate to one. Every distribution in
//! this crate is built from one of eight generator families:
//!
//! | family                  | g(u)                                              | extras            |
//! |-------------------------|---------------------------------------------------|-------------------|
//! | normal                  | exp(−u/2)                                         | —                 |
//! | Student t               | (1 + u/ϑ)^{−(ϑ+1)/2}                              | ϑ > 0             |
//! | power exponential       | exp(−u^{1/(1+ϑ)}/2)                               | −1 < ϑ ≤ 1        |
//! | hyperbolic              | exp(−ϑ√(1+u))                                     | ϑ > 0             |
//! | slash                   | γ(ϑ+½, u/2) / (u/2)^{ϑ+½}                         | ϑ > 0             |
//! | contaminated normal     | √ϑ₂·e^{−ϑ₂u/2} + ((1−ϑ₁)/ϑ₁)·e^{−u/2}             | 0 < ϑ₁, ϑ₂ < 1    |
//! | extended BS (sinh-normal)| cosh(√u)·exp(−(2/ϑ²)·sinh²(√u))                  | ϑ > 0             |
//! | extended BS-t (sinh-t)  | cosh(√u)·(ϑ₂ϑ₁² + 4sinh²(√u))^{−(ϑ₂+1)/2}         | ϑ₁, ϑ₂ > 0        |
//!
//! Besides `g` itself the likelihood machinery needs the weight
//! `v(z) = −2·g′(z²)/g(z²)` and its derivative, the normalizing constant,
//! and the standardized CDF `G(w) = ξ·∫_{−∞}^w g(z²) dz` together with its
//! inverse. CDF values are obtained by adaptive quadrature on the tail
//! (avoiding cancellation), quantiles by safeguarded root bracketing, and
//! i.i.d. sampling by inversion on a cached monotone table refined near
//! the tails.

use std::collections::HashMap;
use std::fmt;
use std::sync::{OnceLock, RwLock};

use rand::Rng;
use statrs::function::gamma::{gamma, gamma_li};

use crate::error::{Error, Result};
use crate::quadrature;

/// Central finite-difference step factor for the generator families whose
/// closed second derivative is not implemented (slash, extended BS-t).
pub(crate) const FD_CBRT_EPS: f64 = 6.055454452393343e-6; // cbrt(f64::EPSILON)

/// The eight supported generator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Normal,
    StudentT,
    PowerExponential,
    Hyperbolic,
    Slash,
    ContaminatedNormal,
    ExtendedBirnbaumSaunders,
    ExtendedBirnbaumSaundersT,
}

impl KernelKind {
    /// Number of extra shape parameters the family takes.
    pub fn n_extra(self) -> usize {
        match self {
            KernelKind::Normal => 0,
            KernelKind::StudentT
            | KernelKind::PowerExponential
            | KernelKind::Hyperbolic
            | KernelKind::Slash
            | KernelKind::ExtendedBirnbaumSaunders => 1,
            KernelKind::ContaminatedNormal | KernelKind::ExtendedBirnbaumSaundersT => 2,
        }
    }

    /// Short lowercase name used in reports and CLI output.
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Normal => "normal",
            KernelKind::StudentT => "student-t",
            KernelKind::PowerExponential => "power-exponential",
            KernelKind::Hyperbolic => "hyperbolic",
            KernelKind::Slash => "slash",
            KernelKind::ContaminatedNormal => "contaminated-normal",
            KernelKind::ExtendedBirnbaumSaunders => "ebs",
            KernelKind::ExtendedBirnbaumSaundersT => "ebs-t",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A generator family together with validated shape parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFamily {
    kind: KernelKind,
    extra: Vec<f64>,
}

/// Value and first two derivatives of a generator at a point.
#[derive(Debug, Clone, Copy)]
pub struct GDerivs {
    pub g: f64,
    pub dg: f64,
    pub d2g: f64,
    /// True when `d2g` comes from a finite difference of the analytic `dg`
    /// rather than a closed-form expression.
    pub d2g_is_fd: bool,
}

impl KernelFamily {
    /// Builds a family after validating the shape parameters.
    pub fn new(kind: KernelKind, extra: &[f64]) -> Result<Self> {
        if extra.len() != kind.n_extra() {
            return Err(Error::InvalidParameter(format!(
                "{} kernel takes {} extra parameter(s), got {}",
                kind,
                kind.n_extra(),
                extra.len()
            )));
        }
        if extra.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{kind} kernel extras must be finite"
            )));
        }
        let ok = match kind {
            KernelKind::Normal => true,
            KernelKind::StudentT | KernelKind::Hyperbolic | KernelKind::Slash => extra[0] > 0.0,
            KernelKind::PowerExponential => extra[0] > -1.0 && extra[0] <= 1.0,
            KernelKind::ContaminatedNormal => {
                extra[0] > 0.0 && extra[0] < 1.0 && extra[1] > 0.0 && extra[1] < 1.0
            }
            KernelKind::ExtendedBirnbaumSaunders => extra[0] > 0.0,
            KernelKind::ExtendedBirnbaumSaundersT => extra[0] > 0.0 && extra[1] > 0.0,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "extras {extra:?} outside the domain of the {kind} kernel"
            )));
        }
        Ok(Self {
            kind,
            extra: extra.to_vec(),
        })
    }

    pub fn normal() -> Self {
        Self::new(KernelKind::Normal, &[]).expect("no extras to validate")
    }

    pub fn student_t(df: f64) -> Result<Self> {
        Self::new(KernelKind::StudentT, &[df])
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn extra(&self) -> &[f64] {
        &self.extra
    }

    /// Generator value `g(u)` for `u ≥ 0`.
    pub fn g(&self, u: f64) -> f64 {
        debug_assert!(u >= 0.0, "generator argument must be non-negative");
        let e = &self.extra;
        match self.kind {
            KernelKind::Normal => (-0.5 * u).exp(),
            KernelKind::StudentT => (1.0 + u / e[0]).powf(-0.5 * (e[0] + 1.0)),
            KernelKind::PowerExponential => (-0.5 * u.powf(1.0 / (1.0 + e[0]))).exp(),
            KernelKind::Hyperbolic => (-e[0] * (1.0 + u).sqrt()).exp(),
            KernelKind::Slash => lig_ratio(e[0] + 0.5, 0.5 * u),
            KernelKind::ContaminatedNormal => {
                e[1].sqrt() * (-0.5 * e[1] * u).exp()
                    + (1.0 - e[0]) / e[0] * (-0.5 * u).exp()
            }
            KernelKind::ExtendedBirnbaumSaunders => {
                let s = u.sqrt();
                if s > 350.0 {
                    // exp(−c·sinh²s) underflows long before sinh² overflows
                    return 0.0;
                }
                let sh = s.sinh();
                s.cosh() * (-2.0 / (e[0] * e[0]) * sh * sh).exp()
            }
            KernelKind::ExtendedBirnbaumSaundersT => {
                let s = u.sqrt();
                if s > 350.0 {
                    // asymptotically cosh(s)·(4sinh²s)^{−(ϑ₂+1)/2} = e^{−ϑ₂s}/2
                    return (-e[1] * s - std::f64::consts::LN_2).exp();
                }
                let sh = s.sinh();
                let d = e[1] * e[0] * e[0] + 4.0 * sh * sh;
                s.cosh() * d.powf(-0.5 * (e[1] + 1.0))
            }
        }
    }

    /// Generator value with its first two derivatives in `u`.
    ///
    /// The slash and extended BS-t second derivatives are central finite
    /// differences of the analytic first derivative with step
    /// `h = ∛ε·(1 + u)`, flagged through [`GDerivs::d2g_is_fd`].
    pub fn g_derivs(&self, u: f64) -> GDerivs {
        debug_assert!(u >= 0.0, "generator argument must be non-negative");
        let e = &self.extra;
        match self.kind {
            KernelKind::Normal => {
                let g = (-0.5 * u).exp();
                GDerivs {
                    g,
                    dg: -0.5 * g,
                    d2g: 0.25 * g,
                    d2g_is_fd: false,
                }
            }
            KernelKind::StudentT => {
                let df = e[0];
                let b = 0.5 * (df + 1.0);
                let w = 1.0 + u / df;
                let g = w.powf(-b);
                let dg = -(b / df) * w.powf(-b - 1.0);
                let d2g = b * (b + 1.0) / (df * df) * w.powf(-b - 2.0);
                GDerivs {
                    g,
                    dg,
                    d2g,
                    d2g_is_fd: false,
                }
            }
            KernelKind::PowerExponential => {
                let pw = 1.0 / (1.0 + e[0]);
                let g = (-0.5 * u.powf(pw)).exp();
                let dg = -0.5 * pw * u.powf(pw - 1.0) * g;
                let d2g =
                    g * (0.25 * pw * pw * u.powf(2.0 * pw - 2.0)
                        - 0.5 * pw * (pw - 1.0) * u.powf(pw - 2.0));
                GDerivs {
                    g,
                    dg,
                    d2g,
                    d2g_is_fd: false,
                }
            }
            KernelKind::Hyperbolic => {
                let th = e[0];
                let r = (1.0 + u).sqrt();
                let g = (-th * r).exp();
                let dg = -0.5 * th / r * g;
                let d2g = g * (0.25 * th * th / (r * r) + 0.25 * th / (r * r * r));
                GDerivs {
                    g,
                    dg,
                    d2g,
                    d2g_is_fd: false,
                }
            }
            KernelKind::Slash => {
                let a = e[0] + 0.5;
                let (g, dgdx) = lig_ratio_with_deriv(a, 0.5 * u);
                let dg = 0.5 * dgdx;
                GDerivs {
                    g,
                    dg,
                    d2g: self.fd_d2g(u),
                    d2g_is_fd: true,
                }
            }
            KernelKind::ContaminatedNormal => {
                let (t1, t2) = (e[0], e[1]);
                let b = (1.0 - t1) / t1;
                let e1 = (-0.5 * t2 * u).exp();
                let e2 = (-0.5 * u).exp();
                GDerivs {
                    g: t2.sqrt() * e1 + b * e2,
                    dg: -0.5 * (t2.powf(1.5) * e1 + b * e2),
                    d2g: 0.25 * (t2.powf(2.5) * e1 + b * e2),
                    d2g_is_fd: false,
                }
            }
            KernelKind::ExtendedBirnbaumSaunders => {
                let c = 2.0 / (e[0] * e[0]);
                let s = u.sqrt();
                if s > 350.0 {
                    // value and both derivatives underflow doubly
                    // exponentially fast
                    return GDerivs {
                        g: 0.0,
                        dg: 0.0,
                        d2g: 0.0,
                        d2g_is_fd: false,
                    };
                }
                let sh = s.sinh();
                let ch = s.cosh();
                let ee = (-c * sh * sh).exp();
                // B = sinh(s)/s, B' = dB/du, and the compound products
                // below follow from g = cosh(s)·E with s = √u.
                let (big_b, big_b_du, shch_over_s) = if s < 1e-4 {
                    let s2 = s * s;
                    (
                        1.0 + s2 / 6.0 + s2 * s2 / 120.0,
                        1.0 / 6.0 + s2 / 60.0,
                        1.0 + 2.0 * s2 / 3.0,
                    )
                } else {
                    (
                        sh / s,
                        0.5 * (ch / (s * s) - sh / (s * s * s)),
                        sh * ch / s,
                    )
                };
                let cterm = 0.5 - c * ch * ch;
                let e_du = -c * ee * shch_over_s;
                let c_du = -c * shch_over_s;
                let g = ch * ee;
                let dg = ee * big_b * cterm;
                let d2g = e_du * big_b * cterm + ee * big_b_du * cterm + ee * big_b * c_du;
                GDerivs {
                    g,
                    dg,
                    d2g,
                    d2g_is_fd: false,
                }
            }
            KernelKind::ExtendedBirnbaumSaundersT => GDerivs {
                g: self.g(u),
                dg: self.dg_only(u),
                d2g: self.fd_d2g(u),
                d2g_is_fd: true,
            },
        }
    }

    /// Finite-difference second derivative from the analytic first one.
    fn fd_d2g(&self, u: f64) -> f64 {
        let h = FD_CBRT_EPS * (1.0 + u);
        let fwd = self.dg_only(u + h);
        if u >= h {
            (fwd - self.dg_only(u - h)) / (2.0 * h)
        } else {
            (fwd - self.dg_only(u)) / h
        }
    }

    /// First derivative alone, without triggering the finite-difference
    /// second derivative of the flagged families.
    fn dg_only(&self, u: f64) -> f64 {
        let e = &self.extra;
        match self.kind {
            KernelKind::Slash => {
                let (_, dgdx) = lig_ratio_with_deriv(e[0] + 0.5, 0.5 * u);
                0.5 * dgdx
            }
            KernelKind::ExtendedBirnbaumSaundersT => {
                let ex = 0.5 * (e[1] + 1.0);
                let s = u.sqrt();
                if s > 350.0 {
                    return -e[1] / (2.0 * s) * (-e[1] * s - std::f64::consts::LN_2).exp();
                }
                let sh = s.sinh();
                let ch = s.cosh();
                let d = e[1] * e[0] * e[0] + 4.0 * sh * sh;
                let big_b = if s < 1e-4 { 1.0 + s * s / 6.0 } else { sh / s };
                d.powf(-ex - 1.0) * big_b * (0.5 * d - 4.0 * ex * ch * ch)
            }
            _ => self.g_derivs(u).dg,
        }
    }

    /// Whether the generator's second derivative is available in closed
    /// form. Families answering `false` fall back to finite differences
    /// inside [`g_derivs`](Self::g_derivs), so curvature-based consumers
    /// should prefer differencing the first derivative themselves.
    pub fn curvature_is_analytic(&self) -> bool {
        !matches!(
            self.kind,
            KernelKind::Slash | KernelKind::ExtendedBirnbaumSaundersT
        )
    }

    /// Density weight `v(z) = −2·g′(z²)/g(z²)`, written in forms that stay
    /// stable far in the tails where `g` itself underflows.
    pub fn weight_v(&self, z: f64) -> f64 {
        let e = &self.extra;
        let u = z * z;
        match self.kind {
            KernelKind::Normal => 1.0,
            KernelKind::StudentT => (e[0] + 1.0) / (e[0] + u),
            KernelKind::PowerExponential => {
                let pw = 1.0 / (1.0 + e[0]);
                pw * u.powf(pw - 1.0)
            }
            KernelKind::Hyperbolic => e[0] / (1.0 + u).sqrt(),
            KernelKind::Slash => {
                let a = e[0] + 0.5;
                let x = 0.5 * u;
                if x > 700.0 {
                    // e^{-x} is zero to machine precision; only the
                    // polynomial tail a/x survives.
                    return a / x;
                }
                let (g, dgdx) = lig_ratio_with_deriv(a, x);
                -dgdx / g
            }
            KernelKind::ContaminatedNormal => {
                let (t1, t2) = (e[0], e[1]);
                let b = (1.0 - t1) / t1;
                // factor e^{-t2 u/2} out of numerator and denominator
                let es = (-0.5 * (1.0 - t2) * u).exp();
                (t2.powf(1.5) + b * es) / (t2.sqrt() + b * es)
            }
            KernelKind::ExtendedBirnbaumSaunders => {
                let c = 2.0 / (e[0] * e[0]);
                let s = z.abs();
                let ts = if s < 1e-8 { 1.0 } else { s.tanh() / s };
                let ch = s.cosh();
                ts * (2.0 * c * ch * ch - 1.0)
            }
            KernelKind::ExtendedBirnbaumSaundersT => {
                let ex = 0.5 * (e[1] + 1.0);
                let s = z.abs();
                if s > 300.0 {
                    return e[1] / s;
                }
                let ts = if s < 1e-8 { 1.0 } else { s.tanh() / s };
                let ch = s.cosh();
                let d = e[1] * e[0] * e[0] + 4.0 * s.sinh().powi(2);
                ts * (8.0 * ex * ch * ch / d - 1.0)
            }
        }
    }

    /// `v(z)·z`, with the removable 0·∞ at the origin of the power
    /// exponential family resolved analytically.
    pub(crate) fn weight_vz(&self, z: f64) -> f64 {
        if let KernelKind::PowerExponential = self.kind {
            let pw = 1.0 / (1.0 + self.extra[0]);
            return pw * z.abs().powf(2.0 * pw - 1.0) * z.signum();
        }
        if z == 0.0 {
            return 0.0;
        }
        self.weight_v(z) * z
    }

    /// Derivative `v′(z) = dv/dz`, used by the analytic Hessian.
    pub fn weight_v_prime(&self, z: f64) -> f64 {
        let e = &self.extra;
        let u = z * z;
        match self.kind {
            KernelKind::Normal => 0.0,
            KernelKind::StudentT => -2.0 * z * (e[0] + 1.0) / ((e[0] + u) * (e[0] + u)),
            KernelKind::PowerExponential => {
                let pw = 1.0 / (1.0 + e[0]);
                2.0 * z * pw * (pw - 1.0) * u.powf(pw - 2.0)
            }
            KernelKind::Hyperbolic => -e[0] * z * (1.0 + u).powf(-1.5),
            KernelKind::ContaminatedNormal => {
                let (t1, t2) = (e[0], e[1]);
                let b = (1.0 - t1) / t1;
                let es = (-0.5 * (1.0 - t2) * u).exp();
                let den = t2.sqrt() + b * es;
                -z * b * t2.sqrt() * (1.0 - t2) * (1.0 - t2) * es / (den * den)
            }
            KernelKind::ExtendedBirnbaumSaunders => {
                let c = 2.0 / (e[0] * e[0]);
                let s = z.abs();
                let ch = s.cosh();
                let c2 = 2.0 * c * ch * ch - 1.0;
                let (ts, dts) = if s < 1e-4 {
                    let s2 = s * s;
                    (1.0 - s2 / 3.0, -2.0 * s / 3.0 + 8.0 * s2 * s / 15.0)
                } else {
                    let th = s.tanh();
                    let sech2 = 1.0 - th * th;
                    (th / s, sech2 / s - th / (s * s))
                };
                let dv_ds = dts * c2 + ts * 2.0 * c * (2.0 * s).sinh();
                dv_ds * z.signum()
            }
            // v′ for the FD-flagged families follows the generic identity
            // v′(z) = −4z·(g″g − g′²)/g²  with the finite-difference g″.
            KernelKind::Slash | KernelKind::ExtendedBirnbaumSaundersT => {
                let d = self.g_derivs(u);
                -4.0 * z * (d.d2g * d.g - d.dg * d.dg) / (d.g * d.g)
            }
        }
    }

    /// Closed-form normalizing constant where one exists.
    fn closed_form_normalization(&self) -> Option<f64> {
        let e = &self.extra;
        match self.kind {
            KernelKind::Normal => Some(1.0 / (std::f64::consts::TAU).sqrt()),
            KernelKind::StudentT => {
                let df = e[0];
                Some(
                    gamma(0.5 * (df + 1.0))
                        / (gamma(0.5 * df) * (df * std::f64::consts::PI).sqrt()),
                )
            }
            KernelKind::PowerExponential => {
                // ∫ exp(−|z|^{2p}/2) dz = 2^{1 + 1/(2p)}·Γ(1 + 1/(2p)) with
                // p = 1/(1+ϑ), i.e. 1/(2p) = (1+ϑ)/2.
                let half_inv = 0.5 * (1.0 + e[0]);
                Some(1.0 / (2.0_f64.powf(1.0 + half_inv) * gamma(1.0 + half_inv)))
            }
            _ => None,
        }
    }

    /// Normalizing constant `ξ` with `ξ·∫ g(z²) dz = 1`.
    ///
    /// Closed forms are used for the normal, Student-t and power
    /// exponential families; the others are integrated numerically to the
    /// requested absolute tolerance.
    pub fn normalization_constant(&self, tol: f64) -> Result<f64> {
        if let Some(xi) = self.closed_form_normalization() {
            return Ok(xi);
        }
        let mass = 2.0 * quadrature::integrate_half_line(|z| self.g(z * z), 0.0, 0.5 * tol)?;
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Numeric(format!(
                "normalization integral for {self} evaluated to {mass}"
            )));
        }
        Ok(1.0 / mass)
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.extra.is_empty() {
            write!(f, "{}", self.kind)
        } else {
            let extras: Vec<String> = self.extra.iter().map(|e| e.to_string()).collect();
            write!(f, "{}({})", self.kind, extras.join(","))
        }
    }
}

/// `γ(a, x)/x^a`: the lower incomplete gamma function scaled so the slash
/// generator stays finite and smooth down to `u = 0`, where it equals `1/a`.
fn lig_ratio(a: f64, x: f64) -> f64 {
    if x <= 1.0 {
        lig_ratio_series(a, x).0
    } else {
        gamma_li(a, x) / x.powf(a)
    }
}

/// Scaled lower incomplete gamma together with its derivative in `x`.
fn lig_ratio_with_deriv(a: f64, x: f64) -> (f64, f64) {
    if x <= 1.0 {
        lig_ratio_series(a, x)
    } else {
        let r = gamma_li(a, x) / x.powf(a);
        // d/dx [γ(a,x)·x^{-a}] = e^{-x}/x − a·r/x
        (r, ((-x).exp() - a * r) / x)
    }
}

/// Power series `γ(a,x)/x^a = e^{−x} Σ_{n≥0} xⁿ / (a(a+1)⋯(a+n))`,
/// differentiated term by term for the derivative.
fn lig_ratio_series(a: f64, x: f64) -> (f64, f64) {
    let mut term = 1.0 / a;
    let mut s = term;
    let mut ds = 0.0;
    for n in 1..200 {
        let nf = n as f64;
        // n·xⁿ⁻¹/∏_{k≤n}(a+k) from the previous power term, avoiding any
        // division by x so the expansion is exact at x = 0.
        ds += term * nf / (a + nf);
        term *= x / (a + nf);
        s += term;
        if term < s * 1e-17 && n > 2 {
            break;
        }
    }
    let emx = (-x).exp();
    (emx * s, emx * (ds - s))
}

/// Node count of the cached inverse-CDF table used for sampling.
const TABLE_NODES: usize = 1024;
/// Tail mass left outside the table on each side; draws landing there are
/// resolved by direct root finding.
const TABLE_TAIL: f64 = 1e-7;

struct CdfTable {
    prob: Vec<f64>,
    z: Vec<f64>,
    /// dz/dp = 1/density at the nodes, for Hermite inversion.
    slope: Vec<f64>,
}

/// A generator family with its normalizing constant and cached CDF
/// machinery: the standardized law with density `ξ·g(z²)`.
///
/// Logically immutable after construction; the inverse-CDF sampling table
/// and quantile cache are materialized lazily behind synchronization.
pub struct StandardKernel {
    family: KernelFamily,
    xi_nc: f64,
    tol: f64,
    table: OnceLock<std::result::Result<CdfTable, Error>>,
    quantile_cache: RwLock<HashMap<u64, f64>>,
}

impl fmt::Debug for StandardKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StandardKernel")
            .field("family", &self.family)
            .field("xi_nc", &self.xi_nc)
            .field("tol", &self.tol)
            .finish()
    }
}

impl StandardKernel {
    /// Builds the standardized law with the default quadrature tolerance
    /// of 1e−10 (absolute).
    pub fn new(family: KernelFamily) -> Result<Self> {
        Self::with_tolerance(family, 1e-10)
    }

    pub fn with_tolerance(family: KernelFamily, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < 1e-2) {
            return Err(Error::InvalidParameter(format!(
                "quadrature tolerance must lie in (0, 1e-2), got {tol}"
            )));
        }
        let xi_nc = family.normalization_constant(tol)?;
        let kernel = Self {
            family,
            xi_nc,
            tol,
            table: OnceLock::new(),
            quantile_cache: RwLock::new(HashMap::new()),
        };
        // Cross-check ξ against an independent quadrature pass so a wrong
        // closed form cannot slip through silently.
        let mass =
            2.0 * quadrature::integrate_half_line(|z| kernel.family.g(z * z), 0.0, 0.5 * tol)?;
        if (xi_nc * mass - 1.0).abs() > 1e-7 {
            return Err(Error::Numeric(format!(
                "normalization check failed for {}: xi*mass = {}",
                kernel.family,
                xi_nc * mass
            )));
        }
        Ok(kernel)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    /// Normalizing constant `ξ` of the standardized density `ξ·g(z²)`.
    pub fn xi_nc(&self) -> f64 {
        self.xi_nc
    }

    /// Standardized density `ξ·g(w²)`.
    pub fn standard_pdf(&self, w: f64) -> f64 {
        self.xi_nc * self.family.g(w * w)
    }

    /// `G(w) = ξ·∫_{−∞}^w g(z²) dz`, evaluated through the tail integral on
    /// whichever side is smaller so the result never suffers cancellation.
    pub fn standard_cdf(&self, w: f64) -> Result<f64> {
        if w.is_nan() {
            return Err(Error::Domain("CDF argument is NaN".into()));
        }
        if w == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        if w == f64::INFINITY {
            return Ok(1.0);
        }
        if w <= 0.0 {
            let tail =
                quadrature::integrate_half_line(|z| self.family.g(z * z), -w, self.tol)?;
            Ok((self.xi_nc * tail).clamp(0.0, 0.5))
        } else {
            Ok(1.0 - self.standard_cdf(-w)?)
        }
    }

    /// Inverse of [`standard_cdf`](Self::standard_cdf) by safeguarded
    /// bisection/secant bracketing.
    pub fn standard_quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!(
                "quantile level must lie in (0,1), got {p}"
            )));
        }
        if p == 0.5 {
            return Ok(0.0);
        }
        // Symmetry: solve on the lower half only.
        if p > 0.5 {
            return Ok(-self.standard_quantile(1.0 - p)?);
        }
        let mut lo = -1.0_f64;
        let mut flo = self.standard_cdf(lo)?;
        while flo > p {
            lo *= 2.0;
            if lo < -1e9 {
                return Err(Error::Numeric(format!(
                    "quantile bracket expansion failed at level {p}"
                )));
            }
            flo = self.standard_cdf(lo)?;
        }
        let mut hi = 0.0_f64;
        let mut fhi = 0.5_f64;
        // Bisection with a secant proposal when it falls safely inside the
        // bracket; stops on |G(z) − p| below a tenth of the CDF tolerance.
        let ptol = 0.1 * self.tol;
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            let secant = if (fhi - flo).abs() > f64::MIN_POSITIVE {
                lo + (p - flo) * (hi - lo) / (fhi - flo)
            } else {
                f64::NAN
            };
            let width = hi - lo;
            mid = if secant.is_finite()
                && secant > lo + 0.01 * width
                && secant < hi - 0.01 * width
            {
                secant
            } else {
                0.5 * (lo + hi)
            };
            let fmid = self.standard_cdf(mid)?;
            if (fmid - p).abs() <= ptol || width <= 1e-15 * mid.abs().max(1.0) {
                return Ok(mid);
            }
            if fmid < p {
                lo = mid;
                flo = fmid;
            } else {
                hi = mid;
                fhi = fmid;
            }
        }
        Ok(mid)
    }

    /// Quantile of the standardized law memoized by level; repeated model
    /// evaluations at a fixed quantile level hit the cache.
    pub(crate) fn z_tau(&self, tau: f64) -> Result<f64> {
        let key = tau.to_bits();
        if let Some(&z) = self.quantile_cache.read().expect("lock poisoned").get(&key) {
            return Ok(z);
        }
        let z = self.standard_quantile(tau)?;
        self.quantile_cache
            .write()
            .expect("lock poisoned")
            .insert(key, z);
        Ok(z)
    }

    /// Draws `n` i.i.d. variates from the standardized law by inversion:
    /// table lookup with monotone cubic interpolation inside
    /// `[1e−7, 1−1e−7]`, direct root finding in the extreme tails.
    pub fn standard_sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<f64>> {
        let table = self.cdf_table()?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let p = rng.random::<f64>().max(1e-300);
            out.push(self.invert(table, p)?);
        }
        Ok(out)
    }

    fn invert(&self, table: &CdfTable, p: f64) -> Result<f64> {
        let np = table.prob.len();
        if p < table.prob[0] || p > table.prob[np - 1] {
            return self.standard_quantile(p);
        }
        let idx = match table
            .prob
            .binary_search_by(|v| v.partial_cmp(&p).expect("table probs are finite"))
        {
            Ok(i) => return Ok(table.z[i]),
            Err(i) => i - 1,
        };
        let i = idx.min(np - 2);
        let h = table.prob[i + 1] - table.prob[i];
        let t = (p - table.prob[i]) / h;
        let (z0, z1) = (table.z[i], table.z[i + 1]);
        let (d0, d1) = (table.slope[i], table.slope[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * z0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * z1
            + (t3 - t2) * h * d1;
        Ok(v.clamp(z0, z1))
    }

    fn cdf_table(&self) -> Result<&CdfTable> {
        self.table
            .get_or_init(|| self.build_table())
            .as_ref()
            .map_err(|e| e.clone())
    }

    /// Two-pass table construction: a coarse uniform-in-z cumulative pass
    /// locates approximately equal-mass nodes, then exact CDF values and
    /// densities are computed at those nodes.
    fn build_table(&self) -> std::result::Result<CdfTable, Error> {
        let z_min = self.standard_quantile(TABLE_TAIL)?;
        let z_max = self.standard_quantile(1.0 - TABLE_TAIL)?;

        let coarse_n = 2 * TABLE_NODES;
        let step = (z_max - z_min) / coarse_n as f64;
        let mut coarse_z = Vec::with_capacity(coarse_n + 1);
        let mut coarse_p = Vec::with_capacity(coarse_n + 1);
        let mut acc = self.standard_cdf(z_min)?;
        coarse_z.push(z_min);
        coarse_p.push(acc);
        let cell_tol = 1e-13;
        for i in 0..coarse_n {
            let a = z_min + i as f64 * step;
            let b = if i == coarse_n - 1 {
                z_max
            } else {
                a + step
            };
            acc += self.xi_nc * quadrature::integrate(|z| self.family.g(z * z), a, b, cell_tol)?;
            coarse_z.push(b);
            coarse_p.push(acc);
        }

        // Equal-mass node placement through the coarse inverse.
        let p_start = coarse_p[0];
        let p_end = coarse_p[coarse_n];
        let mut nodes = Vec::with_capacity(TABLE_NODES);
        let mut j = 0usize;
        for i in 0..TABLE_NODES {
            let target = p_start + (p_end - p_start) * i as f64 / (TABLE_NODES - 1) as f64;
            while j + 1 < coarse_n && coarse_p[j + 1] < target {
                j += 1;
            }
            let span = coarse_p[j + 1] - coarse_p[j];
            let frac = if span > 0.0 {
                ((target - coarse_p[j]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let z = coarse_z[j] + frac * (coarse_z[j + 1] - coarse_z[j]);
            if nodes.last().map_or(true, |&last| z > last) {
                nodes.push(z);
            }
        }

        // Exact cumulative values and densities at the final nodes.
        let mut prob = Vec::with_capacity(nodes.len());
        let mut slope = Vec::with_capacity(nodes.len());
        let mut acc = self.standard_cdf(nodes[0])?;
        prob.push(acc);
        for w in nodes.windows(2) {
            acc += self.xi_nc
                * quadrature::integrate(|z| self.family.g(z * z), w[0], w[1], cell_tol)?;
            prob.push(acc.min(1.0));
        }
        for &z in &nodes {
            let d = self.standard_pdf(z);
            slope.push(if d > 0.0 { 1.0 / d } else { 0.0 });
        }
        // The cumulative pass must stay strictly monotone for inversion.
        for w in prob.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Numeric(format!(
                    "CDF table for {} is not strictly increasing",
                    self.family
                )));
            }
        }
        Ok(CdfTable {
            prob,
            z: nodes,
            slope,
        })
    }
}
