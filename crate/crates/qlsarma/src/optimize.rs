//! Dense BFGS ascent with Armijo backtracking.
//!
//! Purpose-built for likelihood surfaces of modest dimension (≤ ~20):
//! maintains an explicit inverse-Hessian approximation, backtracks on the
//! Armijo condition, and treats objective evaluation errors (diverging
//! recursions, overflowing dispersions) as line-search rejections rather
//! than hard failures — the search simply shortens the step.
//!
//! Convergence is declared only on the gradient test
//! `‖∇f‖_∞ ≤ grad_tol·(1 + |f|)`; stopping on a vanishing step or the
//! iteration cap leaves `converged = false` so callers can distinguish a
//! stationary point from a stalled search.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct BfgsOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Why iteration stopped when not converged.
    pub message: Option<String>,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: u32 = 60;

/// Maximizes `f` from `x0`. Fails only if the starting point itself cannot
/// be evaluated; later evaluation errors shorten the line search instead.
pub(crate) fn maximize<F, G>(f: F, grad: G, x0: &DVector<f64>, opts: &BfgsOptions) -> Result<BfgsOutcome>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
    G: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let d = x0.len();
    let mut x = x0.clone();
    let mut fx = f(&x)?;
    if !fx.is_finite() {
        return Err(Error::Numeric(format!(
            "objective is not finite at the starting point ({fx})"
        )));
    }
    let mut g = grad(&x)?;
    // Inverse-Hessian approximation of the negated objective.
    let mut binv = DMatrix::<f64>::identity(d, d);

    let grad_ok = |g: &DVector<f64>, fx: f64, tol: f64| g.amax() <= tol * (1.0 + fx.abs());

    for iter in 0..opts.max_iters {
        if grad_ok(&g, fx, opts.grad_tol) {
            return Ok(BfgsOutcome {
                grad_norm: g.amax(),
                x,
                value: fx,
                iterations: iter,
                converged: true,
                message: None,
            });
        }

        // Ascent direction; fall back to the raw gradient if the
        // approximation has lost positive definiteness.
        let mut dir = &binv * &g;
        if dir.dot(&g) <= 0.0 {
            binv = DMatrix::identity(d, d);
            dir = g.clone();
        }

        // Armijo backtracking on f(x + α·dir) ≥ f(x) + c₁·α·gᵀdir.
        let slope = g.dot(&dir);
        let mut alpha = 1.0_f64;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let cand = &x + alpha * &dir;
            match f(&cand) {
                Ok(fc) if fc.is_finite() && fc >= fx + ARMIJO_C1 * alpha * slope => {
                    accepted = Some((cand, fc));
                    break;
                }
                _ => alpha *= 0.5,
            }
        }
        let Some((xn, fn_)) = accepted else {
            return Ok(BfgsOutcome {
                grad_norm: g.amax(),
                x,
                value: fx,
                iterations: iter,
                converged: false,
                message: Some("line search failed to find an uphill step".into()),
            });
        };

        let step = &xn - &x;
        let step_small = step.norm() <= opts.step_tol * (1.0 + x.norm());
        let gn = grad(&xn)?;
        let yk = &gn - &g;

        // BFGS update on the negated objective: with s = step and
        // ȳ = −y, require sᵀȳ > 0, i.e. sᵀy < 0 in ascent terms.
        let sy = -step.dot(&yk);
        if sy > 1e-12 * step.norm() * yk.norm() {
            let rho = 1.0 / sy;
            // Sherman–Morrison form: B ← (I−ρsȳᵀ)B(I−ρȳsᵀ) + ρssᵀ.
            let by = &binv * (-&yk);
            let ybyt = (-&yk).dot(&by);
            let term1 = (&step * step.transpose()) * (rho * rho * ybyt + rho);
            let term2 = (&by * step.transpose() + &step * by.transpose()) * rho;
            binv = binv + term1 - term2;
        }

        x = xn;
        fx = fn_;
        g = gn;

        if step_small {
            let converged = grad_ok(&g, fx, opts.grad_tol);
            return Ok(BfgsOutcome {
                grad_norm: g.amax(),
                x,
                value: fx,
                iterations: iter + 1,
                converged,
                message: (!converged).then(|| "step size fell below tolerance".into()),
            });
        }
    }

    let converged = grad_ok(&g, fx, opts.grad_tol);
    Ok(BfgsOutcome {
        grad_norm: g.amax(),
        x,
        value: fx,
        iterations: opts.max_iters,
        converged,
        message: (!converged).then(|| "iteration limit reached".into()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn opts() -> BfgsOptions {
        BfgsOptions {
            max_iters: 500,
            grad_tol: 1e-8,
            step_tol: 1e-12,
        }
    }

    #[test]
    fn quadratic_bowl() {
        // f(x) = −(x−c)ᵀA(x−c) with A ≻ 0 peaks at c.
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let f = |x: &DVector<f64>| {
            let d = x - &c;
            Ok(-(d.dot(&(&a * &d))))
        };
        let g = |x: &DVector<f64>| {
            let d = x - &c;
            Ok(-(&a + a.transpose()) * d)
        };
        let out = maximize(f, g, &DVector::zeros(3), &opts()).unwrap();
        assert!(out.converged);
        for i in 0..3 {
            assert_abs_diff_eq!(out.x[i], c[i], epsilon = 1e-6);
        }
    }

    #[test]
    fn rosenbrock_valley() {
        // Maximize the negated Rosenbrock function; optimum (1, 1).
        let f = |x: &DVector<f64>| {
            Ok(-((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)))
        };
        let g = |x: &DVector<f64>| {
            Ok(DVector::from_vec(vec![
                2.0 * (1.0 - x[0]) + 400.0 * x[0] * (x[1] - x[0] * x[0]),
                -200.0 * (x[1] - x[0] * x[0]),
            ]))
        };
        let out = maximize(f, g, &DVector::from_vec(vec![-1.2, 1.0]), &opts()).unwrap();
        assert!(out.converged, "stopped: {:?}", out.message);
        assert_abs_diff_eq!(out.x[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(out.x[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn evaluation_errors_shrink_the_step() {
        // Objective defined only on |x| < 2; optimum at 1.5 reachable
        // despite errors outside the domain.
        let f = |x: &DVector<f64>| {
            if x[0].abs() >= 2.0 {
                Err(Error::Numeric("out of domain".into()))
            } else {
                Ok(-(x[0] - 1.5_f64).powi(2))
            }
        };
        let g = |x: &DVector<f64>| Ok(DVector::from_vec(vec![-2.0 * (x[0] - 1.5)]));
        let out = maximize(f, g, &DVector::from_vec(vec![-1.9]), &opts()).unwrap();
        assert!(out.converged);
        assert_abs_diff_eq!(out.x[0], 1.5, epsilon = 1e-6);
    }

    #[test]
    fn rejects_bad_start() {
        let f = |_: &DVector<f64>| Err(Error::Numeric("nope".into()));
        let g = |_: &DVector<f64>| Ok(DVector::zeros(1));
        assert!(maximize(f, g, &DVector::zeros(1), &opts()).is_err());
    }
}
