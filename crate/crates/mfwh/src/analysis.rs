//! Convergence theory for the fixed-point iteration: the rate function
//! mu(lambda) (continuous and discrete), filter weights, the discrete
//! spectrum of the assembled Laplacian, and the asymptotic convergence-rate
//! (ACR) predictor.
//!
//! The fixed-point error in each eigenmode of the spatial operator is
//! multiplied per sweep by `mu(lambda_nu) = sum_m w_m beta_m(lambda_nu)`,
//! where `w_m` are the column sums of the inverse filter matrix. The
//! predictor maximizes `|mu_d|` over the time-adjusted discrete spectrum.

use crate::error::{MfwhError, Result};
use crate::filter::{beta_continuous, FilterBank};
use crate::grid::{BcKind, BoundaryCondition, Face, Grid, GridFunction};
use crate::wave::TimePlan;
use nalgebra::DMatrix;
use std::sync::Arc;

/// Time-discretization adjustment of a spectral value; the same arccos map
/// as the modified driving frequencies.
pub fn lambda_tilde(lambda: f64, dt: f64, alpha_i: f64, beta_i: f64) -> Result<f64> {
    crate::wave::modified_frequency(lambda, dt, alpha_i, beta_i)
}

/// Column sums of A^{-1}: the weights combining per-frequency filters into
/// the scalar rate function.
pub fn filter_weights(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| MfwhError::Filter("filter matrix is singular".into()))?;
    Ok((0..inv.ncols())
        .map(|m| inv.column(m).iter().sum())
        .collect())
}

enum Betas {
    Continuous {
        omegas: Vec<f64>,
        t_filters: Vec<f64>,
        alphas: Vec<f64>,
    },
    Discrete(FilterBank),
}

/// The rate function `mu(lambda)`, continuous or discrete.
pub struct MuFunction {
    betas: Betas,
    weights: Vec<f64>,
    a: DMatrix<f64>,
}

impl MuFunction {
    /// Continuous mu for whole-period filters: `T_{f,m} = N_{p,m} T_m` with
    /// `N_{p,m} = floor(N_p T_1 / T_m)`, all shifts alpha = 1/2.
    pub fn continuous(omegas: &[f64], n_periods: usize) -> Result<Self> {
        let alphas = vec![0.5; omegas.len()];
        Self::continuous_with_alpha(omegas, n_periods, &alphas)
    }

    pub fn continuous_with_alpha(
        omegas: &[f64],
        n_periods: usize,
        alphas: &[f64],
    ) -> Result<Self> {
        if omegas.is_empty() || omegas.len() != alphas.len() {
            return Err(MfwhError::Filter(
                "mu needs matching nonempty frequency and shift lists".into(),
            ));
        }
        let t1 = 2.0 * std::f64::consts::PI / omegas[0];
        let horizon = n_periods as f64 * t1;
        let t_filters: Vec<f64> = omegas
            .iter()
            .map(|&w| {
                let t = 2.0 * std::f64::consts::PI / w;
                (horizon / t + 1e-12).floor() * t
            })
            .collect();
        let nf = omegas.len();
        let a = DMatrix::from_fn(nf, nf, |i, j| {
            beta_continuous(omegas[j], omegas[i], t_filters[i], alphas[i])
        });
        let weights = filter_weights(&a)?;
        Ok(Self {
            betas: Betas::Continuous {
                omegas: omegas.to_vec(),
                t_filters,
                alphas: alphas.to_vec(),
            },
            weights,
            a,
        })
    }

    /// Discrete mu built on a filter bank.
    pub fn discrete(bank: FilterBank) -> Result<Self> {
        let a = bank.matrix().clone();
        let weights = filter_weights(&a)?;
        Ok(Self {
            betas: Betas::Discrete(bank),
            weights,
            a,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn n_freq(&self) -> usize {
        self.weights.len()
    }

    fn beta(&self, lambda: f64, m: usize) -> f64 {
        match &self.betas {
            Betas::Continuous {
                omegas,
                t_filters,
                alphas,
            } => beta_continuous(lambda, omegas[m], t_filters[m], alphas[m]),
            Betas::Discrete(bank) => bank.beta_discrete(lambda, m),
        }
    }

    /// `mu(lambda) = sum_m w_m beta_m(lambda)`.
    pub fn mu(&self, lambda: f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(m, w)| w * self.beta(lambda, m))
            .sum()
    }
}

/// Brute-force confirmation that the error-iteration matrix `A^{-1} B(lambda)`
/// has one nonzero eigenvalue equal to `mu(lambda)`.
#[derive(Debug, Clone)]
pub struct EquivalenceCheck {
    /// Largest-magnitude eigenvalue of A^{-1} B (should be mu).
    pub mu_via_matrix: f64,
    /// The weighted-sum formula.
    pub mu_via_formula: f64,
    /// Largest magnitude among the remaining eigenvalues (should be ~0).
    pub residual_eigenvalue: f64,
}

pub fn eigenvalue_equivalence_check(mu_fn: &MuFunction, lambda: f64) -> Result<EquivalenceCheck> {
    let nf = mu_fn.n_freq();
    let b = DMatrix::from_fn(nf, nf, |i, _| mu_fn.beta(lambda, i));
    let a_inv = mu_fn
        .a
        .clone()
        .try_inverse()
        .ok_or_else(|| MfwhError::Filter("filter matrix is singular".into()))?;
    let m = a_inv * b;
    let eigs = m.complex_eigenvalues();
    let mut mags: Vec<(f64, f64)> = eigs.iter().map(|z| (z.norm(), z.re)).collect();
    mags.sort_by(|p, q| q.0.total_cmp(&p.0));
    Ok(EquivalenceCheck {
        mu_via_matrix: mags[0].1,
        mu_via_formula: mu_fn.mu(lambda),
        residual_eigenvalue: mags.get(1).map_or(0.0, |p| p.0),
    })
}

/// Discrete spectrum of the assembled operator `L Phi = -lambda^2 Phi`
/// with homogeneous boundary conditions, via per-axis dense eigensolves and
/// tensor sums.
pub struct SpectrumInfo {
    /// All lambda values (sqrt of the tensor-sum eigenvalues), ascending.
    lambdas: Vec<f64>,
    /// Per-axis lambda^2 lists, each ascending.
    axis_lambda_sq: Vec<Vec<f64>>,
    /// Per-axis eigenvectors (columns), over the axis unknowns; kept for
    /// grids small enough to matter.
    axis_vectors: Vec<Option<DMatrix<f64>>>,
    /// Per-axis unknown positions (grid point index along the axis).
    axis_positions: Vec<Vec<usize>>,
}

impl SpectrumInfo {
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn axis_lambda_sq(&self, axis: usize) -> &[f64] {
        &self.axis_lambda_sq[axis]
    }

    /// Tensor-product eigenvector (kx, ky are per-axis mode indices into the
    /// ascending per-axis eigenvalues) and its lambda^2.
    pub fn eigenpair_2d(
        &self,
        grid: &Arc<Grid>,
        kx: usize,
        ky: usize,
    ) -> Result<(f64, GridFunction)> {
        if grid.dim() != 2 {
            return Err(MfwhError::Grid("eigenpair_2d needs a 2D grid".into()));
        }
        let vx = self.axis_vectors[0]
            .as_ref()
            .ok_or_else(|| MfwhError::Grid("axis eigenvectors not retained".into()))?;
        let vy = self.axis_vectors[1]
            .as_ref()
            .ok_or_else(|| MfwhError::Grid("axis eigenvectors not retained".into()))?;
        let lam2 = self.axis_lambda_sq[0][kx] + self.axis_lambda_sq[1][ky];
        let mut phi = GridFunction::zeros(grid);
        for (bi, &i) in self.axis_positions[0].iter().enumerate() {
            for (bj, &j) in self.axis_positions[1].iter().enumerate() {
                phi.set(i as isize, j as isize, vx[(bi, kx)] * vy[(bj, ky)]);
            }
        }
        Ok((lam2, phi))
    }
}

fn axis_bc(bc: &BoundaryCondition, axis: usize) -> BoundaryCondition {
    let (lo, hi) = if axis == 0 {
        (bc.kind(Face::XLow), bc.kind(Face::XHigh))
    } else {
        (bc.kind(Face::YLow), bc.kind(Face::YHigh))
    };
    BoundaryCondition::per_face([lo, hi, BcKind::Dirichlet, BcKind::Dirichlet])
}

/// Eigendecompose each 1D operator densely; 2D eigenvalues follow by tensor
/// sums. The per-axis operators are symmetrized with the trapezoid weights;
/// a closure that breaks this structure is reported as an error.
pub fn discrete_spectrum(
    grid: &Arc<Grid>,
    order: usize,
    bc: &BoundaryCondition,
) -> Result<SpectrumInfo> {
    let mut axis_lambda_sq = Vec::new();
    let mut axis_vectors = Vec::new();
    let mut axis_positions = Vec::new();
    for axis in 0..grid.dim() {
        if grid.cells(axis) > 4096 {
            return Err(MfwhError::Grid(format!(
                "axis {axis} too large for a dense eigensolve ({} cells)",
                grid.cells(axis)
            )));
        }
        let g1 = Arc::new(Grid::new(
            &[(grid.lower(axis), grid.upper(axis))],
            &[grid.cells(axis)],
            order,
        )?);
        let bc1 = axis_bc(bc, axis);
        let (l, map) = crate::assemble::assemble_operator(&g1, order, &bc1, 1.0)?;
        let d = map.trapezoid_weights(&bc1);
        let n = map.len();
        // S = D^{1/2} L D^{-1/2} is symmetric for intact closures
        let s = DMatrix::from_fn(n, n, |i, j| {
            l.get(i, j) * (d[i] / d[j]).sqrt()
        });
        let asym = (&s - s.transpose()).abs().max();
        if asym > 1e-8 * l.norm_inf().max(1.0) {
            return Err(MfwhError::Grid(format!(
                "axis {axis} operator not similarity-symmetric (deviation {asym:.3e}); boundary closure broke the spectral structure"
            )));
        }
        let sym = (&s + s.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        // lambda^2 = -eigenvalues of L
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&p, &q| (-eig.eigenvalues[p]).total_cmp(&(-eig.eigenvalues[q])));
        let lam2: Vec<f64> = idx.iter().map(|&p| -eig.eigenvalues[p]).collect();
        if let Some(&low) = lam2.first() {
            if low < -1e-8 * l.norm_inf().max(1.0) {
                return Err(MfwhError::Grid(format!(
                    "axis {axis} operator has a positive eigenvalue {low:.3e}; closure not dissipative"
                )));
            }
        }
        // eigenvectors of L: Phi = D^{-1/2} q, reordered
        let keep_vectors = n <= 1025;
        let vectors = keep_vectors.then(|| {
            let mut v = DMatrix::zeros(n, n);
            for (col, &p) in idx.iter().enumerate() {
                for r in 0..n {
                    v[(r, col)] = eig.eigenvectors[(r, p)] / d[r].sqrt();
                }
            }
            v
        });
        axis_lambda_sq.push(lam2);
        axis_vectors.push(vectors);
        axis_positions.push(map.points().iter().map(|&(i, _)| i).collect());
    }

    let mut lambdas: Vec<f64> = if grid.dim() == 1 {
        axis_lambda_sq[0]
            .iter()
            .map(|&l2| l2.max(0.0).sqrt())
            .collect()
    } else {
        axis_lambda_sq[0]
            .iter()
            .flat_map(|&lx| {
                axis_lambda_sq[1]
                    .iter()
                    .map(move |&ly| (lx + ly).max(0.0).sqrt())
            })
            .collect()
    };
    lambdas.sort_by(f64::total_cmp);
    Ok(SpectrumInfo {
        lambdas,
        axis_lambda_sq,
        axis_vectors,
        axis_positions,
    })
}

/// Prediction of the fixed-point iteration's asymptotic convergence rate.
#[derive(Debug, Clone)]
pub struct AcrReport {
    /// max over the spectrum of |mu_d(lambda_tilde)|.
    pub acr: f64,
    /// The physical eigenvalue responsible for the maximum.
    pub worst_lambda: f64,
    /// Signed mu at the worst eigenvalue.
    pub worst_mu: f64,
    pub warnings: Vec<String>,
}

/// Evaluate `mu_d` at the time-adjusted discrete eigenvalues and take the
/// worst case. Near-unit values away from the driven frequencies are
/// flagged as possible spurious resonances (the 1e-3 closeness threshold is
/// heuristic).
pub fn predict_acr(
    plan: &TimePlan,
    mu_fn: &MuFunction,
    spectrum: &SpectrumInfo,
) -> Result<AcrReport> {
    let mut acr = 0.0f64;
    let mut worst_lambda = f64::NAN;
    let mut worst_mu = f64::NAN;
    let mut warnings = Vec::new();
    for &lam in spectrum.lambdas() {
        let lt = lambda_tilde(lam, plan.dt(), plan.alpha_i(), plan.beta_i())?;
        let mu = mu_fn.mu(lt);
        if mu.abs() > acr {
            acr = mu.abs();
            worst_lambda = lam;
            worst_mu = mu;
        }
        if (1.0 - mu).abs() < 1e-3 {
            let near_driven = (0..plan.n_freq())
                .any(|m| (lt - plan.omega_tilde(m)).abs() <= 1e-2 * plan.omega_tilde(m));
            if !near_driven {
                warnings.push(format!(
                    "possible spurious resonance: mu({lam:.6}) = {mu:.8} near 1 away from all driven frequencies (heuristic 1e-3 threshold)"
                ));
            }
        }
    }
    Ok(AcrReport {
        acr,
        worst_lambda,
        worst_mu,
        warnings,
    })
}

/// Uniform lambda samples of `mu(lambda_tilde(lambda))` for curve output.
/// With `adjust = None` the raw `mu(lambda)` is sampled.
pub fn sample_mu_curve(
    lo: f64,
    hi: f64,
    count: usize,
    mu_fn: &MuFunction,
    adjust: Option<&TimePlan>,
) -> Result<Vec<(f64, f64)>> {
    if count < 2 {
        return Err(MfwhError::Filter("curve sampling needs count >= 2".into()));
    }
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let lam = lo + (hi - lo) * k as f64 / (count - 1) as f64;
        let x = match adjust {
            Some(plan) => lambda_tilde(lam, plan.dt(), plan.alpha_i(), plan.beta_i())?,
            None => lam,
        };
        out.push((lam, mu_fn.mu(x)));
    }
    Ok(out)
}
