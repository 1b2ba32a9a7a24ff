//! Conjugate gradient for matrix-free operators, with an optional diagonal
//! inner-product weight.
//!
//! The weight handles operators that are self-adjoint only in a weighted
//! inner product (Neumann closures are symmetric under the trapezoid
//! weights, not entrywise). All reductions are sequential so results do not
//! depend on thread count.

use crate::error::{MfwhError, Result};

pub struct CgOutcome {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64], w: Option<&[f64]>) -> f64 {
    match w {
        None => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        Some(w) => a.iter().zip(b).zip(w).map(|((x, y), d)| d * x * y).sum(),
    }
}

/// Solve `A x = b` for an SPD (possibly weight-SPD) operator.
///
/// `apply` computes `y = A x`. Convergence is declared on the relative
/// weighted residual norm.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    weights: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    assert_eq!(x.len(), n);
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let bnorm = dot(b, b, weights).sqrt();
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(CgOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut rho = dot(&r, &r, weights);
    if rho.sqrt() <= tol * bnorm {
        return Ok(CgOutcome {
            iterations: 0,
            residual: rho.sqrt() / bnorm,
        });
    }
    let mut p = r.clone();
    for k in 1..=max_iter {
        apply(&p, &mut ap);
        let alpha = rho / dot(&p, &ap, weights);
        crate::par::zip_apply(x, &p, move |xi, pi| *xi += alpha * pi);
        crate::par::zip_apply(&mut r, &ap, move |ri, api| *ri -= alpha * api);
        let rho_new = dot(&r, &r, weights);
        if rho_new.sqrt() <= tol * bnorm {
            return Ok(CgOutcome {
                iterations: k,
                residual: rho_new.sqrt() / bnorm,
            });
        }
        let beta = rho_new / rho;
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(MfwhError::LinearSolve(format!(
        "CG did not reach tol {tol:.2e} in {max_iter} iterations (relative residual {:.3e})",
        rho.sqrt() / bnorm
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_tridiagonal() {
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut v = 3.0 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i < n - 1 {
                    v -= x[i + 1];
                }
                y[i] = v;
            }
        };
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        apply(&x_true, &mut b);
        let mut x = vec![0.0; n];
        let out = conjugate_gradient(apply, &b, &mut x, None, 1e-13, 500).unwrap();
        let err = x
            .iter()
            .zip(&x_true)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-10, "err {err:.2e} after {} its", out.iterations);
    }

    #[test]
    fn weighted_inner_product_handles_weighted_spd() {
        // A = D^{-1} S with S SPD and D diagonal: self-adjoint in the D inner
        // product, not entrywise symmetric.
        let n = 20;
        let d: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 } else { 1.0 }).collect();
        let s = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut v = 2.5 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i < n - 1 {
                    v -= x[i + 1];
                }
                y[i] = v;
            }
        };
        let dw = d.clone();
        let apply = move |x: &[f64], y: &mut [f64]| {
            s(x, y);
            for i in 0..n {
                y[i] /= dw[i];
            }
        };
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut b = vec![0.0; n];
        apply(&x_true, &mut b);
        let mut x = vec![0.0; n];
        conjugate_gradient(apply, &b, &mut x, Some(&d), 1e-13, 400).unwrap();
        let err = x
            .iter()
            .zip(&x_true)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-10, "err {err:.2e}");
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let apply = |x: &[f64], y: &mut [f64]| y.copy_from_slice(x);
        let b = vec![0.0; 5];
        let mut x = vec![1.0; 5];
        conjugate_gradient(apply, &b, &mut x, None, 1e-12, 10).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }
}
