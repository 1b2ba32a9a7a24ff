//! Second-order time stepping for the forced wave equation, explicit and
//! implicit, plus construction of the time plan (step size, step count,
//! modified frequencies, filter horizons).
//!
//! The schemes share one update form:
//! `D+t D-t W^n = L(alpha_I W^{n+1} + beta_I W^n + alpha_I W^{n-1}) - F^n`
//! with `beta_I = 1 - 2 alpha_I`. The forcing oscillates at modified
//! frequencies so that the converged filter output solves the discrete
//! Helmholtz systems at the original frequencies.

use crate::assemble::{assemble_operator, boundary_lift, UnknownMap};
use crate::error::{MfwhError, Result};
use crate::grid::{BoundaryCondition, Grid, GridFunction};
use crate::linalg::banded::{BandedLu, BandedMatrix};
use crate::linalg::cg::conjugate_gradient;
use crate::problem::MultiHelmholtzProblem;
use crate::stencil;
use std::sync::Arc;

/// Time-stepping scheme; the implicit weights follow `beta_I = 1 - 2 alpha_I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Explicit,
    Trapezoidal,
    FullWeighting,
}

impl Scheme {
    pub fn weights(self) -> (f64, f64) {
        match self {
            Scheme::Explicit => (0.0, 1.0),
            Scheme::Trapezoidal => (0.5, 0.0),
            Scheme::FullWeighting => (0.25, 0.5),
        }
    }

    pub fn is_implicit(self) -> bool {
        !matches!(self, Scheme::Explicit)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Explicit => "explicit",
            Scheme::Trapezoidal => "trapezoidal",
            Scheme::FullWeighting => "full_weighting",
        }
    }
}

/// Frequency seen by the discrete scheme:
/// `(1/dt) * arccos((1 - (beta_I/2)(omega dt)^2) / (1 + alpha_I (omega dt)^2))`.
///
/// For implicit schemes the argument always lies in (-1, 1]; the explicit
/// scheme requires `omega * dt <= 2`.
pub fn modified_frequency(omega: f64, dt: f64, alpha_i: f64, beta_i: f64) -> Result<f64> {
    let x = omega * dt;
    // Evaluated as 2 arcsin(sqrt((1 - arg)/2)) with the cancellation-free
    // identity 1 - arg = x^2 (alpha_I + beta_I/2) / (1 + alpha_I x^2);
    // the direct arccos loses half the significant digits as x -> 0.
    let one_minus = x * x * (alpha_i + 0.5 * beta_i) / (1.0 + alpha_i * x * x);
    if !(0.0..=2.0).contains(&one_minus) {
        return Err(MfwhError::Plan(format!(
            "modified frequency undefined: omega*dt = {x:.6} puts arccos argument at {:.6}",
            1.0 - one_minus
        )));
    }
    Ok(2.0 * (0.5 * one_minus).sqrt().asin() / dt)
}

/// Options controlling time-step selection.
#[derive(Debug, Clone, Copy)]
pub struct TimePlanOptions {
    /// Safety factor on the explicit stability limit.
    pub cfl: f64,
    /// Steps over the smallest (pristine) period for implicit schemes.
    pub steps_per_period: f64,
}

impl Default for TimePlanOptions {
    fn default() -> Self {
        Self {
            cfl: 0.9,
            steps_per_period: 10.0,
        }
    }
}

/// Fully resolved time discretization for one MFWH solve.
#[derive(Debug, Clone)]
pub struct TimePlan {
    scheme: Scheme,
    alpha_i: f64,
    beta_i: f64,
    dt: f64,
    n_steps: usize,
    n_periods: usize,
    omegas: Vec<f64>,
    omega_tilde: Vec<f64>,
    /// N_{p,m}: whole modified periods inside the overall horizon.
    periods_m: Vec<usize>,
    /// Filter horizon per component: N_{p,m} * 2*pi / omega_tilde_m.
    filter_horizon: Vec<f64>,
    options: TimePlanOptions,
}

impl TimePlan {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn alpha_i(&self) -> f64 {
        self.alpha_i
    }

    pub fn beta_i(&self) -> f64 {
        self.beta_i
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn n_freq(&self) -> usize {
        self.omegas.len()
    }

    pub fn omega(&self, m: usize) -> f64 {
        self.omegas[m]
    }

    pub fn omega_tilde(&self, m: usize) -> f64 {
        self.omega_tilde[m]
    }

    pub fn omega_tildes(&self) -> &[f64] {
        &self.omega_tilde
    }

    pub fn periods_m(&self, m: usize) -> usize {
        self.periods_m[m]
    }

    pub fn all_periods_m(&self) -> &[usize] {
        &self.periods_m
    }

    pub fn filter_horizon(&self, m: usize) -> f64 {
        self.filter_horizon[m]
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn options(&self) -> TimePlanOptions {
        self.options
    }

    /// Temporal factor multiplying f^(m)(x) in the discrete forcing:
    /// `cos(omega_tilde_m t) * (beta_I + 2 alpha_I cos(omega_tilde_m dt))`.
    pub fn forcing_cos(&self, m: usize, t: f64) -> f64 {
        let ot = self.omega_tilde[m];
        (ot * t).cos() * (self.beta_i + 2.0 * self.alpha_i * (ot * self.dt).cos())
    }
}

/// Build the time plan for a problem on a grid.
///
/// Explicit: `dt0 = cfl * 2 / sqrt(lambda_max)` with `lambda_max` the
/// Gershgorin row-sum bound of the assembled `-L`. Implicit:
/// `dt0 = T_{Nf} / steps_per_period`. Either way the step is then adjusted
/// so the overall horizon `N_p * T~_1` is a whole number of steps: the step
/// count is frozen from the initial estimate and
/// `dt <- N_p * T~_1(dt) / N_t` is iterated to a relative tolerance of
/// 1e-14 (the modified periods depend on dt, so this is a fixed point).
pub fn build_time_plan(
    problem: &MultiHelmholtzProblem,
    scheme: Scheme,
    n_periods: usize,
    grid: &Arc<Grid>,
    order: usize,
    options: TimePlanOptions,
) -> Result<TimePlan> {
    if n_periods < 1 {
        return Err(MfwhError::Plan("number of periods must be >= 1".into()));
    }
    let (alpha_i, beta_i) = scheme.weights();
    let omegas = problem.omegas();
    let omega_max = *omegas.last().expect("problem has frequencies");

    let mut stability_limit = f64::INFINITY;
    let mut dt = match scheme {
        Scheme::Explicit => {
            let (l, _) = assemble_operator(grid, order, problem.bc(), problem.wave_speed())?;
            let lambda_max = l.norm_inf();
            stability_limit = 2.0 / lambda_max.sqrt();
            if omega_max * options.cfl * stability_limit > 2.0 {
                return Err(MfwhError::Plan(format!(
                    "explicit scheme cannot represent omega = {omega_max} at this grid's stable step; refine the grid or use an implicit scheme"
                )));
            }
            options.cfl * stability_limit
        }
        _ => (2.0 * std::f64::consts::PI / omega_max) / options.steps_per_period,
    };

    // Freeze the step count, then iterate dt so that N_p modified periods of
    // the lowest frequency fit exactly.
    let tilde_1 = modified_frequency(omegas[0], dt, alpha_i, beta_i)?;
    let horizon = n_periods as f64 * 2.0 * std::f64::consts::PI / tilde_1;
    let n_steps = (horizon / dt - 1e-12).ceil().max(1.0) as usize;
    for _ in 0..100 {
        let tilde_1 = modified_frequency(omegas[0], dt, alpha_i, beta_i)?;
        let dt_new = n_periods as f64 * 2.0 * std::f64::consts::PI / tilde_1 / n_steps as f64;
        let done = (dt_new - dt).abs() <= 1e-14 * dt;
        dt = dt_new;
        if done {
            break;
        }
    }
    if scheme == Scheme::Explicit && dt > stability_limit {
        return Err(MfwhError::Plan(format!(
            "adjusted step {dt:.3e} exceeds the explicit stability limit {stability_limit:.3e}"
        )));
    }

    let omega_tilde: Vec<f64> = omegas
        .iter()
        .map(|&w| modified_frequency(w, dt, alpha_i, beta_i))
        .collect::<Result<_>>()?;
    for w in omega_tilde.windows(2) {
        if !(w[0] < w[1]) {
            return Err(MfwhError::Plan(
                "modified frequencies failed to stay sorted; step size too large".into(),
            ));
        }
    }
    // at least five steps per period of every driven mode
    for (m, &ot) in omega_tilde.iter().enumerate() {
        let steps_per = 2.0 * std::f64::consts::PI / ot / dt;
        if scheme.is_implicit() && steps_per < 5.0 - 1e-9 {
            return Err(MfwhError::Plan(format!(
                "only {steps_per:.2} steps per period for frequency {} (need at least 5); increase steps_per_period",
                m + 1
            )));
        }
        if ot * dt >= std::f64::consts::PI {
            return Err(MfwhError::Plan(format!(
                "omega_tilde*dt = {:.4} >= pi for frequency {}; filter shift undefined",
                ot * dt,
                m + 1
            )));
        }
    }

    let tilde_1 = omega_tilde[0];
    let horizon = n_periods as f64 * 2.0 * std::f64::consts::PI / tilde_1;
    let mut periods_m = Vec::with_capacity(omegas.len());
    let mut filter_horizon = Vec::with_capacity(omegas.len());
    for &ot in &omega_tilde {
        let t_m = 2.0 * std::f64::consts::PI / ot;
        let k = ((horizon / t_m) + 1e-12).floor() as usize;
        periods_m.push(k);
        filter_horizon.push(k as f64 * t_m);
    }
    debug_assert_eq!(periods_m[0], n_periods);

    Ok(TimePlan {
        scheme,
        alpha_i,
        beta_i,
        dt,
        n_steps,
        n_periods,
        omegas,
        omega_tilde,
        periods_m,
        filter_horizon,
        options,
    })
}

/// Inner linear solver for the implicit step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolverKind {
    /// CG for order 2, banded LU for order 4.
    Auto,
    /// Banded LU factorization (reused across all steps).
    Direct,
    /// Conjugate gradient in the trapezoid-weighted inner product.
    Cg,
}

enum Backend {
    Identity,
    Direct(BandedLu),
    Cg {
        matrix: BandedMatrix,
        weights: Vec<f64>,
        tol: f64,
        max_iter: usize,
    },
}

/// Evolves the forced wave equation, handing each state to a callback.
pub struct WaveSolver {
    grid: Arc<Grid>,
    order: usize,
    plan: TimePlan,
    bc: BoundaryCondition,
    wave_speed: f64,
    map: UnknownMap,
    forcing_fields: Vec<GridFunction>,
    boundary_needed: bool,
    backend: Backend,
    problem: MultiHelmholtzProblem,
}

/// Rolling pair of wave states W^{n-1}, W^n (ghosts filled).
pub struct WaveState {
    pub prev: GridFunction,
    pub curr: GridFunction,
    pub n: usize,
}

impl WaveState {
    pub fn time(&self, plan: &TimePlan) -> f64 {
        plan.time(self.n)
    }
}

impl WaveSolver {
    pub fn new(
        problem: &MultiHelmholtzProblem,
        grid: &Arc<Grid>,
        order: usize,
        plan: TimePlan,
        inner: InnerSolverKind,
        inner_tol: f64,
    ) -> Result<Self> {
        let map = UnknownMap::new(grid, problem.bc());
        let forcing_fields = (1..=problem.n_freq())
            .map(|m| problem.forcing_field(m, grid))
            .collect::<Result<Vec<_>>>()?;
        let shift = plan.alpha_i() * plan.dt() * plan.dt();
        let backend = if shift == 0.0 {
            Backend::Identity
        } else {
            let (l, _) = assemble_operator(grid, order, problem.bc(), problem.wave_speed())?;
            // M = I - shift * L over the unknowns
            let mut m = BandedMatrix::zeros(map.len(), l.bandwidths().0, l.bandwidths().1);
            for i in 0..map.len() {
                let lo = i.saturating_sub(l.bandwidths().1);
                let hi = (i + l.bandwidths().0).min(map.len() - 1);
                for j in lo..=hi {
                    let v = -shift * l.get(i, j) + if i == j { 1.0 } else { 0.0 };
                    if v != 0.0 {
                        m.add(i, j, v);
                    }
                }
            }
            let use_cg = match inner {
                InnerSolverKind::Auto => order == 2,
                InnerSolverKind::Cg => true,
                InnerSolverKind::Direct => false,
            };
            if use_cg {
                Backend::Cg {
                    weights: map.trapezoid_weights(problem.bc()),
                    matrix: m,
                    tol: inner_tol,
                    max_iter: 50_000,
                }
            } else {
                Backend::Direct(m.lu()?)
            }
        };
        Ok(Self {
            grid: Arc::clone(grid),
            order,
            plan,
            bc: *problem.bc(),
            wave_speed: problem.wave_speed(),
            map,
            forcing_fields,
            boundary_needed: !problem.homogeneous_boundary(),
            backend,
            problem: problem.clone(),
        })
    }

    pub fn plan(&self) -> &TimePlan {
        &self.plan
    }

    pub fn map(&self) -> &UnknownMap {
        &self.map
    }

    fn boundary_data(&self, t: f64) -> Option<GridFunction> {
        if self.boundary_needed {
            self.problem.boundary_field(&self.grid, t, &self.plan)
        } else {
            None
        }
    }

    /// Solve `(I - alpha_I dt^2 L) x = rhs` over the unknowns.
    fn backend_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match &self.backend {
            Backend::Identity => Ok(rhs.to_vec()),
            Backend::Direct(lu) => Ok(lu.solve(rhs)),
            Backend::Cg {
                matrix,
                weights,
                tol,
                max_iter,
            } => {
                let mut x = vec![0.0; rhs.len()];
                conjugate_gradient(
                    |v, out| matrix.matvec(v, out),
                    rhs,
                    &mut x,
                    Some(weights),
                    *tol,
                    *max_iter,
                )
                .map_err(|e| {
                    MfwhError::LinearSolve(format!("implicit wave step: {e}"))
                })?;
                Ok(x)
            }
        }
    }

    /// Assemble W^{n+1} from solved unknown values and the boundary data at
    /// the new time level.
    fn finish_level(&self, x: &[f64], t_new: f64) -> Result<GridFunction> {
        let mut w = GridFunction::zeros(&self.grid);
        self.map.scatter(x, &mut w);
        let data = self.boundary_data(t_new);
        stencil::fill_ghosts(&mut w, &self.bc, data.as_ref(), self.order)?;
        Ok(w)
    }

    /// Discrete forcing at an unknown point (by unknown index) and time.
    fn forcing_at(&self, t: f64) -> Vec<f64> {
        let nf = self.plan.n_freq();
        let mut f = vec![0.0; self.map.len()];
        for m in 0..nf {
            let c = self.plan.forcing_cos(m, t);
            if c == 0.0 {
                continue;
            }
            let field = &self.forcing_fields[m];
            for (k, &(i, j)) in self.map.points().iter().enumerate() {
                f[k] += c * field.get(i as isize, j as isize);
            }
        }
        f
    }

    /// First update from rest: combines `D_{0t} W^0 = 0` with the n = 0
    /// interior scheme, so the implicit matrix equals the interior one.
    pub fn first_step(&self, w0: &GridFunction) -> Result<GridFunction> {
        let dt = self.plan.dt();
        let dt2 = dt * dt;
        let lap = stencil::apply_laplacian(w0, self.order, self.wave_speed)?;
        let f0 = self.forcing_at(0.0);
        let mut rhs = vec![0.0; self.map.len()];
        for (k, &(i, j)) in self.map.points().iter().enumerate() {
            let (ii, jj) = (i as isize, j as isize);
            rhs[k] = w0.get(ii, jj) + 0.5 * self.plan.beta_i() * dt2 * lap.get(ii, jj)
                - 0.5 * dt2 * f0[k];
        }
        if self.plan.alpha_i() != 0.0 {
            if let Some(lift) = self.lift_at(dt)? {
                let s = self.plan.alpha_i() * dt2;
                for (r, l) in rhs.iter_mut().zip(&lift) {
                    *r += s * l;
                }
            }
        }
        let x = self.backend_solve(&rhs)?;
        self.finish_level(&x, dt)
    }

    fn lift_at(&self, t: f64) -> Result<Option<Vec<f64>>> {
        match self.boundary_data(t) {
            None => Ok(None),
            Some(d) => Ok(Some(boundary_lift(
                &self.grid,
                self.order,
                &self.bc,
                self.wave_speed,
                Some(&d),
                &self.map,
            )?)),
        }
    }

    /// One interior update W^{n-1}, W^n -> W^{n+1}.
    pub fn step(&self, state: &WaveState) -> Result<GridFunction> {
        let dt = self.plan.dt();
        let dt2 = dt * dt;
        let (alpha, beta) = (self.plan.alpha_i(), self.plan.beta_i());
        let t_new = self.plan.time(state.n + 1);

        // beta W^n + alpha W^{n-1}, ghosts included (both levels carry
        // boundary-consistent ghosts, so the combination does too)
        let lap = if alpha == 0.0 {
            stencil::apply_laplacian(&state.curr, self.order, self.wave_speed)?
        } else {
            let mut combo = state.curr.clone();
            combo.scale(beta);
            combo.axpy(alpha, &state.prev);
            stencil::apply_laplacian(&combo, self.order, self.wave_speed)?
        };
        let fn_ = self.forcing_at(self.plan.time(state.n));
        let mut rhs = vec![0.0; self.map.len()];
        for (k, &(i, j)) in self.map.points().iter().enumerate() {
            let (ii, jj) = (i as isize, j as isize);
            rhs[k] = 2.0 * state.curr.get(ii, jj) - state.prev.get(ii, jj)
                + dt2 * lap.get(ii, jj)
                - dt2 * fn_[k];
        }
        if alpha != 0.0 {
            if let Some(lift) = self.lift_at(t_new)? {
                let s = alpha * dt2;
                for (r, l) in rhs.iter_mut().zip(&lift) {
                    *r += s * l;
                }
            }
        }
        let x = self.backend_solve(&rhs)?;
        self.finish_level(&x, t_new)
    }

    /// Run the full forced solve from initial data `w0` (zero initial
    /// velocity), invoking `on_state(n, W^n)` for n = 0..=N_t.
    ///
    /// `w0`'s non-ghost values are taken as given; ghosts are filled here
    /// with the t = 0 boundary data.
    pub fn run(
        &self,
        w0: &GridFunction,
        mut on_state: impl FnMut(usize, &GridFunction),
    ) -> Result<()> {
        // Initial data is given on all non-ghost points; only ghost values
        // follow the boundary operator at t = 0.
        let data0 = self.boundary_data(0.0);
        let mut w0_filled = w0.clone();
        stencil::fill_ghosts(&mut w0_filled, &self.bc, data0.as_ref(), self.order)?;
        w0_filled.copy_interior_from(w0);
        let w0 = w0_filled;

        on_state(0, &w0);
        let w1 = self.first_step(&w0)?;
        on_state(1, &w1);
        let mut state = WaveState {
            prev: w0,
            curr: w1,
            n: 1,
        };
        while state.n < self.plan.n_steps() {
            let next = self.step(&state)?;
            on_state(state.n + 1, &next);
            state.prev = std::mem::replace(&mut state.curr, next);
            state.n += 1;
        }
        Ok(())
    }
}

/// Standalone shifted solve `(I - shift L) u = rhs` with boundary lifting;
/// builds and discards its own factorization.
pub fn implicit_solve(
    rhs: &GridFunction,
    shift: f64,
    order: usize,
    bc: &BoundaryCondition,
    c: f64,
    data: Option<&GridFunction>,
    tol: f64,
) -> Result<GridFunction> {
    if shift < 0.0 {
        return Err(MfwhError::Plan(format!("negative shift {shift}")));
    }
    let grid = rhs.grid().clone();
    let (l, map) = assemble_operator(&grid, order, bc, c)?;
    let mut rhs_v = map.gather(rhs);
    if shift == 0.0 {
        let mut out = GridFunction::zeros(&grid);
        map.scatter(&rhs_v, &mut out);
        stencil::fill_ghosts(&mut out, bc, data, order)?;
        return Ok(out);
    }
    let lift = boundary_lift(&grid, order, bc, c, data, &map)?;
    for (r, l) in rhs_v.iter_mut().zip(&lift) {
        *r += shift * l;
    }
    let n = map.len();
    let mut m = BandedMatrix::zeros(n, l.bandwidths().0, l.bandwidths().1);
    for i in 0..n {
        let lo = i.saturating_sub(l.bandwidths().1);
        let hi = (i + l.bandwidths().0).min(n - 1);
        for j in lo..=hi {
            let v = -shift * l.get(i, j) + if i == j { 1.0 } else { 0.0 };
            if v != 0.0 {
                m.add(i, j, v);
            }
        }
    }
    // weighted CG is enough here: I - shift*L is positive definite in the
    // trapezoid inner product for both boundary conditions
    let weights = map.trapezoid_weights(bc);
    let mut x = vec![0.0; n];
    conjugate_gradient(|v, out| m.matvec(v, out), &rhs_v, &mut x, Some(&weights), tol, 50_000)?;
    let mut out = GridFunction::zeros(&grid);
    map.scatter(&x, &mut out);
    stencil::fill_ghosts(&mut out, bc, data, order)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BcKind, BoundaryCondition};
    use crate::problem::{gaussian_problem, three_frequency_problem};

    fn unit_problem(omegas: &[f64]) -> MultiHelmholtzProblem {
        let n = omegas.len();
        gaussian_problem(
            omegas,
            &vec![1.0; n],
            &vec![10.0; n],
            &vec![[0.5, 0.5]; n],
            BoundaryCondition::dirichlet(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn modified_frequency_limits() {
        // dt -> 0 recovers omega
        let w = 5.1;
        let wt = modified_frequency(w, 1e-6, 0.5, 0.0).unwrap();
        assert!((wt - w).abs() / w < 1e-9);
        // frozen reference values (explicit and trapezoidal)
        let we = modified_frequency(5.1, 0.01, 0.0, 1.0).unwrap();
        let expect = (1.0f64 - 0.051f64 * 0.051 / 2.0).acos() / 0.01;
        assert!((we - expect).abs() < 1e-10 * we);
        let dt = 2.0 * std::f64::consts::PI / (5.1 * 10.0);
        let wi = modified_frequency(5.1, dt, 0.5, 0.0).unwrap();
        let x = 5.1 * dt;
        let expect = ((1.0) / (1.0 + 0.5 * x * x)).acos() / dt;
        assert!((wi - expect).abs() < 1e-10 * wi);
        // explicit domain violation
        assert!(modified_frequency(5.1, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn plan_single_frequency_exact_horizon() {
        let grid = Arc::new(Grid::unit(&[16, 16], 2).unwrap());
        let p = unit_problem(&[5.1]);
        let plan = build_time_plan(
            &p,
            Scheme::Trapezoidal,
            3,
            &grid,
            2,
            TimePlanOptions::default(),
        )
        .unwrap();
        assert_eq!(plan.periods_m(0), 3);
        let horizon = 3.0 * 2.0 * std::f64::consts::PI / plan.omega_tilde(0);
        assert!(
            ((plan.n_steps() as f64 * plan.dt()) - horizon).abs() < 1e-12 * horizon,
            "horizon not a whole number of steps"
        );
        assert!((plan.filter_horizon(0) - horizon).abs() < 1e-12 * horizon);
    }

    #[test]
    fn plan_three_frequency_period_counts() {
        let grid = Arc::new(Grid::unit(&[32, 32], 4).unwrap());
        let p = three_frequency_problem(BoundaryCondition::dirichlet());
        let plan = build_time_plan(
            &p,
            Scheme::Trapezoidal,
            2,
            &grid,
            4,
            TimePlanOptions::default(),
        )
        .unwrap();
        // floor(2*omega_m/omega_1) = {2, 3, 5}; the modified frequencies
        // keep the same counts for this configuration
        assert_eq!(plan.all_periods_m(), &[2, 3, 5]);
        // all modified periods resolved by at least five steps
        for m in 0..3 {
            let steps = 2.0 * std::f64::consts::PI / plan.omega_tilde(m) / plan.dt();
            assert!(steps >= 5.0);
        }
    }

    #[test]
    fn plan_seven_frequency_period_counts() {
        let grid = Arc::new(Grid::unit(&[32, 32], 4).unwrap());
        let p = crate::problem::seven_frequency_problem(BoundaryCondition::dirichlet());
        let plan = build_time_plan(
            &p,
            Scheme::Trapezoidal,
            6,
            &grid,
            4,
            TimePlanOptions::default(),
        )
        .unwrap();
        assert_eq!(plan.all_periods_m(), &[6, 8, 10, 12, 15, 18, 21]);
    }

    #[test]
    fn explicit_plan_respects_cfl() {
        let grid = Arc::new(Grid::unit(&[32, 32], 4).unwrap());
        let p = three_frequency_problem(BoundaryCondition::dirichlet());
        let plan = build_time_plan(
            &p,
            Scheme::Explicit,
            2,
            &grid,
            4,
            TimePlanOptions::default(),
        )
        .unwrap();
        let (l, _) = assemble_operator(&grid, 4, p.bc(), 1.0).unwrap();
        let dt_max = 2.0 / l.norm_inf().sqrt();
        assert!(plan.dt() <= dt_max);
        assert!(plan.dt() >= 0.85 * dt_max, "dt too conservative");
    }

    #[test]
    fn zero_data_zero_forcing_stays_zero() {
        let grid = Arc::new(Grid::unit(&[12, 12], 2).unwrap());
        let p = unit_problem(&[5.1]);
        // zero forcing: scale the amplitude away via a tabulated zero field
        let zero = crate::problem::Component {
            omega: 5.1,
            forcing: crate::problem::ForcingSpec::Tabulated(GridFunction::zeros(&grid)),
            boundary: None,
        };
        let p0 =
            MultiHelmholtzProblem::new(vec![zero], *p.bc(), 1.0).unwrap();
        let plan = build_time_plan(
            &p0,
            Scheme::Trapezoidal,
            1,
            &grid,
            2,
            TimePlanOptions::default(),
        )
        .unwrap();
        let solver =
            WaveSolver::new(&p0, &grid, 2, plan, InnerSolverKind::Auto, 1e-12).unwrap();
        let w0 = GridFunction::zeros(&grid);
        solver
            .run(&w0, |_, w| {
                assert!(w.norm_inf() == 0.0);
            })
            .unwrap();
    }

    #[test]
    fn explicit_first_step_constant_neumann() {
        // L W0 = 0 for constant data under Neumann; F = const c_f:
        // W1 = W0 - dt^2 F / 2
        let grid = Arc::new(Grid::unit(&[8, 8], 2).unwrap());
        let f = GridFunction::from_fn(&grid, |_| 3.0);
        let comp = crate::problem::Component {
            omega: 2.0,
            forcing: crate::problem::ForcingSpec::Tabulated(f),
            boundary: None,
        };
        let p = MultiHelmholtzProblem::new(vec![comp], BoundaryCondition::neumann(), 1.0).unwrap();
        let plan = build_time_plan(
            &p,
            Scheme::Explicit,
            1,
            &grid,
            2,
            TimePlanOptions::default(),
        )
        .unwrap();
        let solver = WaveSolver::new(&p, &grid, 2, plan, InnerSolverKind::Auto, 1e-12).unwrap();
        let mut w0 = GridFunction::from_fn(&grid, |_| 1.0);
        stencil::fill_ghosts(&mut w0, &BoundaryCondition::neumann(), None, 2).unwrap();
        let w1 = solver.first_step(&w0).unwrap();
        let dt = solver.plan().dt();
        let f_factor = solver.plan().forcing_cos(0, 0.0); // includes scheme weights
        let expect = 1.0 - 0.5 * dt * dt * 3.0 * f_factor;
        for (i, j) in grid.iter_points() {
            assert!(
                (w1.get(i as isize, j as isize) - expect).abs() < 1e-13,
                "at ({i},{j})"
            );
        }
    }

    #[test]
    fn eigenmode_matches_scalar_recurrence() {
        // Single Dirichlet eigenmode, no forcing, explicit scheme: the PDE
        // update reduces to a 2-term scalar recurrence per mode.
        let n = 16usize;
        let grid = Arc::new(Grid::unit(&[n], 2).unwrap());
        let comp = crate::problem::Component {
            omega: 1.0,
            forcing: crate::problem::ForcingSpec::Tabulated(GridFunction::zeros(&grid)),
            boundary: None,
        };
        let p = MultiHelmholtzProblem::new(vec![comp], BoundaryCondition::dirichlet(), 1.0).unwrap();
        let plan = build_time_plan(
            &p,
            Scheme::Explicit,
            1,
            &grid,
            2,
            TimePlanOptions::default(),
        )
        .unwrap();
        let solver = WaveSolver::new(&p, &grid, 2, plan, InnerSolverKind::Auto, 1e-12).unwrap();
        let k = 3.0;
        let h = grid.spacing(0);
        let lam2 = 4.0 / (h * h) * (k * std::f64::consts::PI * h / 2.0).sin().powi(2);
        let w0 = GridFunction::from_fn(&grid, |x| (k * std::f64::consts::PI * x[0]).sin());
        let dt = solver.plan().dt();
        // scalar recurrence a_{n+1} = (2 - dt^2 lam2) a_n - a_{n-1}, a_{-1} = a_1
        let steps = solver.plan().n_steps().min(50);
        let mut amp = vec![1.0f64; steps + 1];
        amp[1] = 1.0 - 0.5 * dt * dt * lam2;
        for i in 1..steps {
            amp[i + 1] = (2.0 - dt * dt * lam2) * amp[i] - amp[i - 1];
        }
        let probe = (n / 3) as isize;
        let x = grid.coord(0, probe);
        let phi = (k * std::f64::consts::PI * x).sin();
        solver
            .run(&w0, |step, w| {
                if step <= steps {
                    let want = amp[step] * phi;
                    assert!(
                        (w.get(probe, 0) - want).abs() < 1e-10 * (1.0 + want.abs()),
                        "step {step}: {} vs {want}",
                        w.get(probe, 0)
                    );
                }
            })
            .unwrap();
    }

    #[test]
    fn implicit_unconditionally_stable_beyond_cfl() {
        let n = 24usize;
        let grid = Arc::new(Grid::unit(&[n, n], 2).unwrap());
        let comp = crate::problem::Component {
            omega: 5.0,
            forcing: crate::problem::ForcingSpec::Tabulated(GridFunction::zeros(&grid)),
            boundary: None,
        };
        let p = MultiHelmholtzProblem::new(vec![comp], BoundaryCondition::dirichlet(), 1.0).unwrap();
        let (l, _) = assemble_operator(&grid, 2, p.bc(), 1.0).unwrap();
        let dt_cfl = 2.0 / l.norm_inf().sqrt();
        // force a step 5x beyond the explicit limit
        let spp = 2.0 * std::f64::consts::PI / 5.0 / (5.0 * dt_cfl);
        let plan = build_time_plan(
            &p,
            Scheme::Trapezoidal,
            1,
            &grid,
            2,
            TimePlanOptions {
                cfl: 0.9,
                steps_per_period: spp,
            },
        )
        .unwrap();
        assert!(plan.dt() > 4.0 * dt_cfl);
        let solver = WaveSolver::new(&p, &grid, 2, plan, InnerSolverKind::Auto, 1e-12).unwrap();
        let w0 = GridFunction::from_fn(&grid, |x| {
            (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin()
        });
        let init = w0.norm_inf();
        let mut max_seen = 0.0f64;
        solver
            .run(&w0, |_, w| {
                max_seen = max_seen.max(w.norm_inf());
            })
            .unwrap();
        assert!(
            max_seen <= 10.0 * init,
            "solution grew to {max_seen} from {init}"
        );
    }

    #[test]
    fn first_step_matches_dense_solve_trapezoidal() {
        let n = 16usize;
        let grid = Arc::new(Grid::unit(&[n, n], 2).unwrap());
        let p = unit_problem(&[5.1]);
        let plan = build_time_plan(
            &p,
            Scheme::Trapezoidal,
            1,
            &grid,
            2,
            TimePlanOptions::default(),
        )
        .unwrap();
        let solver =
            WaveSolver::new(&p, &grid, 2, plan, InnerSolverKind::Auto, 1e-13).unwrap();
        let w0 = GridFunction::from_fn(&grid, |x| (x[0] * (1.0 - x[0])) * (x[1] * (1.0 - x[1])));
        let mut w0f = w0.clone();
        stencil::fill_ghosts(&mut w0f, p.bc(), None, 2).unwrap();
        let w1 = solver.first_step(&w0f).unwrap();

        // dense oracle for the same linear system
        let dt = solver.plan().dt();
        let dt2 = dt * dt;
        let (l, map) = assemble_operator(&grid, 2, p.bc(), 1.0).unwrap();
        let nu = map.len();
        let dense = nalgebra::DMatrix::from_fn(nu, nu, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) - 0.5 * dt2 * l.get(i, j)
        });
        let lap = stencil::apply_laplacian(&w0f, 2, 1.0).unwrap();
        let f0 = {
            let field = p.forcing_field(1, &grid).unwrap();
            let c = solver.plan().forcing_cos(0, 0.0);
            map.points()
                .iter()
                .map(|&(i, j)| c * field.get(i as isize, j as isize))
                .collect::<Vec<_>>()
        };
        let mut rhs = nalgebra::DVector::zeros(nu);
        for (k, &(i, j)) in map.points().iter().enumerate() {
            // beta_I = 0 for trapezoidal
            let _ = lap;
            rhs[k] = w0f.get(i as isize, j as isize) - 0.5 * dt2 * f0[k];
        }
        let sol = dense.lu().solve(&rhs).unwrap();
        let got = map.gather(&w1);
        let scale = sol.amax();
        for (g, s) in got.iter().zip(sol.iter()) {
            assert!((g - s).abs() <= 1e-11 * scale.max(1.0), "{g} vs {s}");
        }
    }

    #[test]
    fn implicit_solve_round_trip_and_eigen_identity() {
        let n = 24usize;
        let grid = Arc::new(Grid::unit(&[n], 2).unwrap());
        let bc = BoundaryCondition::dirichlet();
        // round trip
        let v = GridFunction::from_fn(&grid, |x| (2.3 * x[0]).sin() * x[0]);
        let shift = 3e-3;
        let (l, map) = assemble_operator(&grid, 2, &bc, 1.0).unwrap();
        let vv = map.gather(&v);
        let mut lv = vec![0.0; map.len()];
        l.matvec(&vv, &mut lv);
        let mut rhs = GridFunction::zeros(&grid);
        let rv: Vec<f64> = vv
            .iter()
            .zip(&lv)
            .map(|(a, b)| a - shift * b)
            .collect();
        map.scatter(&rv, &mut rhs);
        let u = implicit_solve(&rhs, shift, 2, &bc, 1.0, None, 1e-13).unwrap();
        let got = map.gather(&u);
        for (g, w) in got.iter().zip(&vv) {
            assert!((g - w).abs() < 1e-10);
        }
        // eigenvector identity: u = rhs / (1 + shift*lam2)
        let h = grid.spacing(0);
        let k = 2.0;
        let lam2 = 4.0 / (h * h) * (k * std::f64::consts::PI * h / 2.0).sin().powi(2);
        let phi = GridFunction::from_fn(&grid, |x| (k * std::f64::consts::PI * x[0]).sin());
        let u = implicit_solve(&phi, shift, 2, &bc, 1.0, None, 1e-13).unwrap();
        for i in 1..n as isize {
            let want = phi.get(i, 0) / (1.0 + shift * lam2);
            assert!((u.get(i, 0) - want).abs() < 1e-11);
        }
        // shift = 0 is the identity
        let u = implicit_solve(&phi, 0.0, 2, &bc, 1.0, None, 1e-13).unwrap();
        for i in 1..n as isize {
            assert_eq!(u.get(i, 0), phi.get(i, 0));
        }
        let _ = BcKind::Dirichlet;
    }
}
