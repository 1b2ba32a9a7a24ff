//! WaveHoltz time filters: the continuous filter function, its discrete
//! quadrature form, the per-frequency filter weights, and the small coupling
//! matrix A that makes the multi-frequency update implicit.
//!
//! Each filter m integrates `(cos(omega_tilde_m t) - alpha_m/2) * W(t)` over
//! `N_{p,m}` whole modified periods with a composite trapezoid rule whose
//! last cell is cut at the filter horizon. The discrete filter is normalized
//! so its response to `cos(omega_tilde_m t)` is exactly one; this row
//! scaling cancels out of the update `A v = p` and of the convergence
//! function, it only pins the normalization that the partial-interval
//! quadrature would otherwise miss at the 1e-4 level.

use crate::error::{MfwhError, Result};
use crate::grid::GridFunction;
use crate::wave::TimePlan;
use nalgebra::DMatrix;

/// `sin(x)/x` with `sinc(0) = 1`; series branch below |x| = 1e-4.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Closed form of the single-frequency filter transfer function
/// `(2/T) * int_0^T (cos(omega t) - alpha/2) cos(lambda t) dt`.
pub fn beta_continuous(lambda: f64, omega: f64, t_final: f64, alpha: f64) -> f64 {
    sinc((omega - lambda) * t_final) + sinc((omega + lambda) * t_final)
        - alpha * sinc(lambda * t_final)
}

/// Filter shift `alpha_m = tan(omega_tilde dt / 2) / tan(omega_tilde dt)`,
/// the discrete analogue of alpha = 1/2.
pub fn alpha_shift(omega_tilde: f64, dt: f64) -> Result<f64> {
    let x = omega_tilde * dt;
    if !(x > 0.0 && x < std::f64::consts::PI) {
        return Err(MfwhError::Filter(format!(
            "filter shift needs omega_tilde*dt in (0, pi), got {x:.6}"
        )));
    }
    Ok((0.5 * x).tan() / x.tan())
}

/// Composite trapezoid weights over `[0, t_filter]` on the step grid
/// `t_n = n dt`, n = 0..=n_steps, with the final partial cell integrated by
/// the linear interpolant. Returns the weight vector together with the
/// cutoff index q and the cell fraction theta.
pub fn quadrature_weights(t_filter: f64, dt: f64, n_steps: usize) -> Result<(Vec<f64>, usize, f64)> {
    if !(t_filter > 0.0) || !(dt > 0.0) {
        return Err(MfwhError::Filter(format!(
            "quadrature needs positive t_filter and dt, got {t_filter}, {dt}"
        )));
    }
    if t_filter > n_steps as f64 * dt * (1.0 + 1e-12) {
        return Err(MfwhError::Filter(format!(
            "filter horizon {t_filter:.6} exceeds the time horizon {:.6}",
            n_steps as f64 * dt
        )));
    }
    let ratio = t_filter / dt;
    let mut q = ratio.floor() as usize;
    let mut theta = ratio - q as f64;
    // snap an exact fit that floating point put a hair on either side
    if theta > 1.0 - 1e-9 {
        q += 1;
        theta = 0.0;
    } else if theta < 1e-9 {
        theta = 0.0;
    }
    if q > n_steps {
        q = n_steps;
        theta = 0.0;
    }
    if q == 0 {
        return Err(MfwhError::Filter(
            "filter horizon shorter than one step".into(),
        ));
    }
    let mut sigma = vec![0.0; n_steps + 1];
    sigma[0] = 0.5 * dt;
    for s in sigma.iter_mut().take(q).skip(1) {
        *s = dt;
    }
    sigma[q] = 0.5 * dt + dt * theta * (1.0 - 0.5 * theta);
    if q + 1 <= n_steps {
        sigma[q + 1] = 0.5 * dt * theta * theta;
    } else if theta != 0.0 {
        return Err(MfwhError::Filter(
            "partial cell extends past the final step".into(),
        ));
    }
    Ok((sigma, q, theta))
}

/// Discrete filters for one time plan: quadrature weights, shifts, the
/// normalized accumulation coefficients, and the coupling matrix A with its
/// inverse.
#[derive(Debug, Clone)]
pub struct FilterBank {
    n_freq: usize,
    dt: f64,
    n_steps: usize,
    omega_tilde: Vec<f64>,
    alphas: Vec<f64>,
    sigmas: Vec<Vec<f64>>,
    cutoffs: Vec<usize>,
    thetas: Vec<f64>,
    /// Raw diagonal response divided out of each filter.
    scales: Vec<f64>,
    /// psi[m][n]: normalized coefficient of W^n in filter m.
    psi: Vec<Vec<f64>>,
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    cond: f64,
}

/// Build the discrete filter bank for a plan.
///
/// Fails when the coupling matrix is numerically singular (condition number
/// above 1e12), which happens when frequencies sit too close together for
/// the chosen number of periods.
pub fn build_filter_bank(plan: &TimePlan) -> Result<FilterBank> {
    let nf = plan.n_freq();
    let dt = plan.dt();
    let n_steps = plan.n_steps();
    let mut alphas = Vec::with_capacity(nf);
    let mut sigmas = Vec::with_capacity(nf);
    let mut cutoffs = Vec::with_capacity(nf);
    let mut thetas = Vec::with_capacity(nf);
    let mut scales = Vec::with_capacity(nf);
    let mut psi = Vec::with_capacity(nf);
    let omega_tilde: Vec<f64> = plan.omega_tildes().to_vec();

    for m in 0..nf {
        let ot = omega_tilde[m];
        let t_f = plan.filter_horizon(m);
        let (sigma, q, theta) = quadrature_weights(t_f, dt, n_steps)?;
        let alpha = alpha_shift(ot, dt)?;
        let pref = 2.0 / t_f;
        let raw: Vec<f64> = (0..=n_steps)
            .map(|n| {
                let t = plan.time(n);
                pref * sigma[n] * ((ot * t).cos() - 0.5 * alpha)
            })
            .collect();
        let scale: f64 = raw
            .iter()
            .enumerate()
            .map(|(n, &w)| w * (ot * plan.time(n)).cos())
            .sum();
        if !(scale > 0.5 && scale < 2.0) {
            return Err(MfwhError::Filter(format!(
                "filter {} normalization {scale:.6} is far from one; plan is unusable",
                m + 1
            )));
        }
        psi.push(raw.iter().map(|w| w / scale).collect());
        alphas.push(alpha);
        sigmas.push(sigma);
        cutoffs.push(q);
        thetas.push(theta);
        scales.push(scale);
    }

    let mut bank = FilterBank {
        n_freq: nf,
        dt,
        n_steps,
        omega_tilde,
        alphas,
        sigmas,
        cutoffs,
        thetas,
        scales,
        psi,
        a: DMatrix::zeros(nf, nf),
        a_inv: DMatrix::zeros(nf, nf),
        cond: 0.0,
    };
    let a = DMatrix::from_fn(nf, nf, |i, j| bank.beta_discrete(bank.omega_tilde[j], i));
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond < 1e12) {
        return Err(MfwhError::Filter(format!(
            "filter matrix numerically singular (condition {cond:.3e}); frequencies too close for the chosen number of periods"
        )));
    }
    let a_inv = a.clone().try_inverse().ok_or_else(|| {
        MfwhError::Filter("filter matrix inversion failed".into())
    })?;
    bank.a = a;
    bank.a_inv = a_inv;
    bank.cond = cond;
    Ok(bank)
}

impl FilterBank {
    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    pub fn alpha(&self, m: usize) -> f64 {
        self.alphas[m]
    }

    pub fn sigma(&self, m: usize) -> &[f64] {
        &self.sigmas[m]
    }

    pub fn cutoff(&self, m: usize) -> usize {
        self.cutoffs[m]
    }

    pub fn theta(&self, m: usize) -> f64 {
        self.thetas[m]
    }

    pub fn normalization(&self, m: usize) -> f64 {
        self.scales[m]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn matrix_inv(&self) -> &DMatrix<f64> {
        &self.a_inv
    }

    pub fn condition_number(&self) -> f64 {
        self.cond
    }

    pub fn omega_tilde(&self, m: usize) -> f64 {
        self.omega_tilde[m]
    }

    /// Normalized discrete filter response of filter m to `cos(lambda t)`.
    pub fn beta_discrete(&self, lambda: f64, m: usize) -> f64 {
        self.psi[m]
            .iter()
            .enumerate()
            .map(|(n, &w)| w * (lambda * (n as f64 * self.dt)).cos())
            .sum()
    }

    /// Streaming update `p_m += psi[m][n] * W^n` for every filter.
    pub fn accumulate(&self, p: &mut [GridFunction], w: &GridFunction, n: usize) {
        for (m, pm) in p.iter_mut().enumerate() {
            let c = self.psi[m][n];
            if c != 0.0 {
                pm.axpy(c, w);
            }
        }
    }

    /// Solve `A v = p` pointwise across the grid via the precomputed
    /// inverse (the matrix is tiny and its conditioning checked at build).
    pub fn filter_solve(&self, p: &[GridFunction]) -> Vec<GridFunction> {
        assert_eq!(p.len(), self.n_freq);
        (0..self.n_freq)
            .map(|m| {
                let mut v = GridFunction::zeros(p[0].grid());
                for (j, pj) in p.iter().enumerate() {
                    v.axpy(self.a_inv[(m, j)], pj);
                }
                v
            })
            .collect()
    }
}

/// Order-enforcing streaming accumulator for one wave solve.
pub struct FilterAccumulator<'b> {
    bank: &'b FilterBank,
    p: Vec<GridFunction>,
    next: usize,
}

impl<'b> FilterAccumulator<'b> {
    pub fn new(bank: &'b FilterBank, grid: &std::sync::Arc<crate::grid::Grid>) -> Self {
        Self {
            bank,
            p: (0..bank.n_freq()).map(|_| GridFunction::zeros(grid)).collect(),
            next: 0,
        }
    }

    /// Feed W^n; steps must arrive in order n = 0, 1, .., N_t.
    pub fn add(&mut self, n: usize, w: &GridFunction) -> Result<()> {
        if n != self.next {
            return Err(MfwhError::Filter(format!(
                "filter accumulation out of order: got step {n}, expected {}",
                self.next
            )));
        }
        if n > self.bank.n_steps {
            return Err(MfwhError::Filter(format!(
                "filter accumulation past the final step: {n} > {}",
                self.bank.n_steps
            )));
        }
        self.bank.accumulate(&mut self.p, w, n);
        self.next = n + 1;
        Ok(())
    }

    /// Apply the implicit filter solve after the final step has arrived.
    pub fn finish(self) -> Result<Vec<GridFunction>> {
        if self.next != self.bank.n_steps + 1 {
            return Err(MfwhError::Filter(format!(
                "filter accumulation incomplete: saw {} of {} states",
                self.next,
                self.bank.n_steps + 1
            )));
        }
        Ok(self.bank.filter_solve(&self.p))
    }
}
