//! Restarted GMRES with modified Gram-Schmidt and one reorthogonalization
//! pass, for matrix-free operators.

use crate::error::{MfwhError, Result};

#[derive(Debug, Clone)]
pub struct GmresConfig {
    /// Krylov vectors per cycle before restarting.
    pub restart: usize,
    /// Cap on total operator applications.
    pub max_iter: usize,
    /// Relative residual tolerance (against ||b||).
    pub tol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            restart: 200,
            max_iter: 200,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub residual: f64,
    /// Relative residual after each operator application.
    pub history: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = b`; `apply` computes `y = A x`. `x` holds the initial guess
/// on entry and the solution on exit.
pub fn gmres(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    cfg: &GmresConfig,
) -> Result<GmresOutcome> {
    let n = b.len();
    assert_eq!(x.len(), n);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(GmresOutcome {
            iterations: 0,
            residual: 0.0,
            history: Vec::new(),
            converged: true,
        });
    }
    let m = cfg.restart.max(1);
    let mut total = 0usize;
    let mut history = Vec::new();
    let mut work = vec![0.0; n];

    loop {
        // residual of current iterate
        apply(x, &mut work);
        let mut r: Vec<f64> = (0..n).map(|i| b[i] - work[i]).collect();
        let beta = norm(&r);
        if beta / bnorm <= cfg.tol {
            return Ok(GmresOutcome {
                iterations: total,
                residual: beta / bnorm,
                history,
                converged: true,
            });
        }
        if total >= cfg.max_iter {
            return Ok(GmresOutcome {
                iterations: total,
                residual: beta / bnorm,
                history,
                converged: false,
            });
        }

        for v in r.iter_mut() {
            *v /= beta;
        }
        let mut basis: Vec<Vec<f64>> = vec![r];
        let mut h = vec![vec![0.0f64; m]; m + 1]; // h[row][col]
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut k_done = 0;
        let mut breakdown = false;

        for k in 0..m {
            if total >= cfg.max_iter {
                break;
            }
            total += 1;
            let mut w = vec![0.0; n];
            apply(&basis[k], &mut w);
            // modified Gram-Schmidt with one reorthogonalization pass
            for j in 0..=k {
                let hj = dot(&w, &basis[j]);
                h[j][k] = hj;
                crate::par::zip_apply(&mut w, &basis[j], move |wi, vj| *wi -= hj * vj);
            }
            for j in 0..=k {
                let corr = dot(&w, &basis[j]);
                h[j][k] += corr;
                crate::par::zip_apply(&mut w, &basis[j], move |wi, vj| *wi -= corr * vj);
            }
            let hk1 = norm(&w);
            h[k + 1][k] = hk1;
            if hk1 > 0.0 {
                for v in w.iter_mut() {
                    *v /= hk1;
                }
            }
            basis.push(w);

            // apply accumulated Givens rotations to the new column
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom == 0.0 {
                k_done = k + 1;
                breakdown = true;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_done = k + 1;
            let rel = g[k + 1].abs() / bnorm;
            history.push(rel);
            if rel <= cfg.tol || hk1 == 0.0 {
                breakdown = hk1 == 0.0;
                break;
            }
        }

        if k_done > 0 {
            // back-substitute the triangular system and update x
            let mut y = vec![0.0f64; k_done];
            for i in (0..k_done).rev() {
                let mut s = g[i];
                for j in (i + 1)..k_done {
                    s -= h[i][j] * y[j];
                }
                if h[i][i] == 0.0 {
                    return Err(MfwhError::LinearSolve(
                        "GMRES breakdown: singular Hessenberg diagonal".into(),
                    ));
                }
                y[i] = s / h[i][i];
            }
            for (j, yj) in y.iter().enumerate() {
                let yj = *yj;
                crate::par::zip_apply(x, &basis[j], move |xi, vj| *xi += yj * vj);
            }
        }

        let rel_est = g[k_done].abs() / bnorm;
        if rel_est <= cfg.tol || breakdown {
            // verify with a true residual on the way out
            apply(x, &mut work);
            let res = (0..n)
                .map(|i| (b[i] - work[i]) * (b[i] - work[i]))
                .sum::<f64>()
                .sqrt()
                / bnorm;
            return Ok(GmresOutcome {
                iterations: total,
                residual: res,
                history,
                converged: res <= cfg.tol * 10.0,
            });
        }
        if total >= cfg.max_iter {
            apply(x, &mut work);
            let res = (0..n)
                .map(|i| (b[i] - work[i]) * (b[i] - work[i]))
                .sum::<f64>()
                .sqrt()
                / bnorm;
            return Ok(GmresOutcome {
                iterations: total,
                residual: res,
                history,
                converged: false,
            });
        }
        // otherwise restart
    }
}
