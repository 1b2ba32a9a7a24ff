//! The multi-frequency fixed-point iteration and its GMRES acceleration.
//!
//! One application of the iteration map: seed the wave equation with the
//! sum of the current iterates, march it over the planned horizon while the
//! filters accumulate, then solve the small coupled system `A v = p`. The
//! map is affine; GMRES solves `(I - S) V = b` matrix-free, where each
//! operator application costs exactly one wave solve.

use crate::assemble::UnknownMap;
use crate::error::{MfwhError, Result};
use crate::filter::{build_filter_bank, FilterAccumulator, FilterBank};
use crate::grid::{Grid, GridFunction};
use crate::linalg::gmres::{gmres, GmresConfig};
use crate::problem::MultiHelmholtzProblem;
use crate::stencil;
use crate::wave::{InnerSolverKind, TimePlan, WaveSolver};
use std::cell::Cell;
use std::sync::Arc;
use std::time::Instant;

/// Knobs for one solver run.
#[derive(Debug, Clone)]
pub struct DriverConfig {
    /// Relative convergence tolerance (iterate-difference for the fixed
    /// point, linear residual for GMRES).
    pub tol: f64,
    pub max_iter: usize,
    pub gmres_restart: usize,
    pub inner: InnerSolverKind,
    pub inner_tol: f64,
    /// A-posteriori Helmholtz residual threshold; `None` uses sqrt(tol).
    pub posterior_tol: Option<f64>,
    /// Initial iterates (warm start); zero when absent.
    pub initial: Option<Vec<GridFunction>>,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            gmres_restart: 200,
            inner: InnerSolverKind::Auto,
            inner_tol: 1e-12,
            posterior_tol: None,
            initial: None,
        }
    }
}

/// Outcome of a solver run.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub mode: &'static str,
    pub iterations: usize,
    pub wave_solves: usize,
    pub converged: bool,
    pub diverged: bool,
    /// r^(k), k = 1.. (iterate differences for fpi, relative linear
    /// residuals for gmres).
    pub residual_history: Vec<f64>,
    pub cr: f64,
    pub ecr: f64,
    /// Normalized Helmholtz residual per component.
    pub helmholtz_residuals: Vec<f64>,
    pub wall_seconds: f64,
    pub warnings: Vec<String>,
    pub solution: Vec<GridFunction>,
}

/// Iterate-difference residual
/// `sqrt( (1/(Nf Na)) sum_m sum_{unknowns} (v_new - v_old)^2 )`.
pub fn residual(v_new: &[GridFunction], v_old: &[GridFunction], map: &UnknownMap) -> f64 {
    let nf = v_new.len();
    let na = map.len();
    let mut s = 0.0;
    for (vn, vo) in v_new.iter().zip(v_old) {
        for &(i, j) in map.points() {
            let d = vn.get(i as isize, j as isize) - vo.get(i as isize, j as isize);
            s += d * d;
        }
    }
    (s / (nf as f64 * na as f64)).sqrt()
}

/// Average and work-normalized convergence rates:
/// `CR = (r_last / r_first)^(1/N_it)` over the stored residuals
/// r^(1)..r^(N_it), and `ECR = CR^(1/N_p)`.
pub fn convergence_rates(history: &[f64], n_periods: usize) -> Result<(f64, f64)> {
    if history.len() < 2 {
        return Err(MfwhError::Solver(
            "convergence rates need at least two residuals".into(),
        ));
    }
    let r1 = history[0];
    if !(r1 > 0.0) {
        return Err(MfwhError::Solver("first residual must be positive".into()));
    }
    let n_it = history.len() as f64;
    let cr = (history[history.len() - 1] / r1).powf(1.0 / n_it);
    let ecr = cr.powf(1.0 / n_periods as f64);
    Ok((cr, ecr))
}

/// Driver for one problem/grid/plan combination. One instance serves one
/// run at a time (the wave-solve counter is not synchronized).
pub struct MfwhDriver {
    problem: MultiHelmholtzProblem,
    grid: Arc<Grid>,
    order: usize,
    plan: TimePlan,
    bank: FilterBank,
    wave: WaveSolver,
    map: UnknownMap,
    wave_solves: Cell<usize>,
}

impl MfwhDriver {
    pub fn new(
        problem: &MultiHelmholtzProblem,
        grid: &Arc<Grid>,
        order: usize,
        plan: TimePlan,
        cfg: &DriverConfig,
    ) -> Result<Self> {
        let bank = build_filter_bank(&plan)?;
        let wave = WaveSolver::new(problem, grid, order, plan.clone(), cfg.inner, cfg.inner_tol)?;
        let map = UnknownMap::new(grid, problem.bc());
        Ok(Self {
            problem: problem.clone(),
            grid: Arc::clone(grid),
            order,
            plan,
            bank,
            wave,
            map,
            wave_solves: Cell::new(0),
        })
    }

    pub fn plan(&self) -> &TimePlan {
        &self.plan
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn map(&self) -> &UnknownMap {
        &self.map
    }

    pub fn wave_solves(&self) -> usize {
        self.wave_solves.get()
    }

    pub fn reset_wave_solves(&self) {
        self.wave_solves.set(0);
    }

    fn zero_iterates(&self) -> Vec<GridFunction> {
        (0..self.problem.n_freq())
            .map(|_| GridFunction::zeros(&self.grid))
            .collect()
    }

    /// One full sweep of the iteration map: exactly one wave solve.
    pub fn apply_map(&self, v: &[GridFunction]) -> Result<Vec<GridFunction>> {
        assert_eq!(v.len(), self.problem.n_freq());
        let mut w0 = GridFunction::zeros(&self.grid);
        for vm in v {
            w0.add(vm);
        }
        let mut acc = FilterAccumulator::new(&self.bank, &self.grid);
        let mut acc_err: Option<MfwhError> = None;
        self.wave.run(&w0, |n, w| {
            if acc_err.is_none() {
                if let Err(e) = acc.add(n, w) {
                    acc_err = Some(e);
                }
            }
        })?;
        if let Some(e) = acc_err {
            return Err(e);
        }
        self.wave_solves.set(self.wave_solves.get() + 1);
        acc.finish()
    }

    /// Normalized RMS residual of the original Helmholtz systems at the
    /// pristine frequencies: `||L v + omega^2 v - f|| / ||f||` over the
    /// unknowns, per component.
    pub fn helmholtz_residual_check(&self, v: &[GridFunction]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(v.len());
        for (m, vm) in v.iter().enumerate() {
            let f = self.problem.forcing_field(m + 1, &self.grid)?;
            let mut vg = vm.clone();
            stencil::fill_ghosts(
                &mut vg,
                self.problem.bc(),
                self.problem.component(m).boundary.as_ref(),
                self.order,
            )?;
            let lv = stencil::apply_laplacian(&vg, self.order, self.problem.wave_speed())?;
            let om2 = self.problem.omega(m) * self.problem.omega(m);
            let mut num = 0.0;
            let mut den = 0.0;
            for &(i, j) in self.map.points() {
                let (ii, jj) = (i as isize, j as isize);
                let r = lv.get(ii, jj) + om2 * vg.get(ii, jj) - f.get(ii, jj);
                num += r * r;
                den += f.get(ii, jj) * f.get(ii, jj);
            }
            out.push(if den > 0.0 {
                (num / den).sqrt()
            } else {
                num.sqrt()
            });
        }
        Ok(out)
    }

    /// Plain fixed-point iteration. Divergence (five consecutive growing
    /// residuals beyond 1e3 times the first) is reported, not raised.
    pub fn run_fpi(&self, cfg: &DriverConfig) -> Result<SolverReport> {
        let start = Instant::now();
        self.reset_wave_solves();
        let mut v = match &cfg.initial {
            Some(v0) => v0.clone(),
            None => self.zero_iterates(),
        };
        let mut history: Vec<f64> = Vec::new();
        let mut converged = false;
        let mut diverged = false;
        let mut growth_streak = 0usize;
        let mut warnings = Vec::new();

        for _k in 1..=cfg.max_iter {
            let v_new = self.apply_map(&v)?;
            let r = residual(&v_new, &v, &self.map);
            v = v_new;
            if let Some(&prev) = history.last() {
                growth_streak = if r > prev { growth_streak + 1 } else { 0 };
            }
            history.push(r);
            let r1 = history[0];
            if r <= cfg.tol * r1 {
                converged = true;
                break;
            }
            if growth_streak >= 5 && r > 1e3 * r1 {
                diverged = true;
                warnings.push(format!(
                    "fixed-point iteration diverging: residual grew for {growth_streak} consecutive iterations to {r:.3e}"
                ));
                break;
            }
        }

        let helmholtz = self.helmholtz_residual_check(&v)?;
        let posterior = cfg.posterior_tol.unwrap_or_else(|| cfg.tol.sqrt());
        if converged && helmholtz.iter().any(|&h| h > posterior) {
            converged = false;
            warnings.push(format!(
                "a-posteriori Helmholtz residual check failed (max {:.3e} > {posterior:.1e}); possible spurious resonance",
                helmholtz.iter().cloned().fold(0.0, f64::max)
            ));
        }
        let (cr, ecr) = if history.len() >= 2 && history[0] > 0.0 {
            convergence_rates(&history, self.plan.n_periods())?
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(SolverReport {
            mode: "fpi",
            iterations: history.len(),
            wave_solves: self.wave_solves(),
            converged,
            diverged,
            residual_history: history,
            cr,
            ecr,
            helmholtz_residuals: helmholtz,
            wall_seconds: start.elapsed().as_secs_f64(),
            warnings,
            solution: v,
        })
    }

    /// Pack unknown values of all components into one flat vector.
    fn pack(&self, v: &[GridFunction]) -> Vec<f64> {
        let na = self.map.len();
        let mut out = vec![0.0; na * v.len()];
        for (m, vm) in v.iter().enumerate() {
            self.map.gather_into(vm, &mut out[m * na..(m + 1) * na]);
        }
        out
    }

    /// Rebuild full fields from packed unknowns; Dirichlet boundary values
    /// carry the problem's boundary data.
    fn unpack(&self, x: &[f64]) -> Result<Vec<GridFunction>> {
        let na = self.map.len();
        let nf = self.problem.n_freq();
        assert_eq!(x.len(), na * nf);
        let mut out = Vec::with_capacity(nf);
        for m in 0..nf {
            let mut vm = GridFunction::zeros(&self.grid);
            self.map.scatter(&x[m * na..(m + 1) * na], &mut vm);
            stencil::fill_ghosts(
                &mut vm,
                self.problem.bc(),
                self.problem.component(m).boundary.as_ref(),
                self.order,
            )?;
            out.push(vm);
        }
        Ok(out)
    }

    /// GMRES on `(I - S) V = b` with `b` the map applied to zero iterates.
    /// Every Arnoldi vector costs one wave solve; the a-posteriori
    /// Helmholtz check gates the converged flag.
    pub fn run_gmres(&self, cfg: &DriverConfig) -> Result<SolverReport> {
        let start = Instant::now();
        self.reset_wave_solves();
        // The Krylov space holds unknown values only; the affine base point
        // must use the same boundary pinning as every operator application,
        // so it is the map at zero unknowns, not at zero fields.
        let zero_unknowns = vec![0.0; self.map.len() * self.problem.n_freq()];
        let b_fields = self.apply_map(&self.unpack(&zero_unknowns)?)?;
        let b = self.pack(&b_fields);
        let solve_err: Cell<Option<MfwhError>> = Cell::new(None);
        let apply = |x: &[f64], y: &mut [f64]| {
            let mut run = || -> Result<()> {
                let v = self.unpack(x)?;
                let wv = self.apply_map(&v)?;
                let sw = self.pack(&wv);
                for i in 0..y.len() {
                    y[i] = x[i] - (sw[i] - b[i]);
                }
                Ok(())
            };
            if let Err(e) = run() {
                y.fill(0.0);
                if solve_err.take().is_none() {
                    solve_err.set(Some(e));
                }
            }
        };
        let mut x = match &cfg.initial {
            Some(v0) => self.pack(v0),
            None => vec![0.0; b.len()],
        };
        let out = gmres(
            apply,
            &b,
            &mut x,
            &GmresConfig {
                restart: cfg.gmres_restart,
                max_iter: cfg.max_iter,
                tol: cfg.tol,
            },
        )?;
        if let Some(e) = solve_err.take() {
            return Err(e);
        }
        let solution = self.unpack(&x)?;
        let helmholtz = self.helmholtz_residual_check(&solution)?;
        let posterior = cfg.posterior_tol.unwrap_or_else(|| cfg.tol.sqrt());
        let mut warnings = Vec::new();
        let mut converged = out.converged;
        if converged && helmholtz.iter().any(|&h| h > posterior) {
            converged = false;
            warnings.push(format!(
                "a-posteriori Helmholtz residual check failed (max {:.3e} > {posterior:.1e}); possible spurious resonance",
                helmholtz.iter().cloned().fold(0.0, f64::max)
            ));
        }
        if !out.converged {
            warnings.push(format!(
                "GMRES stopped at relative residual {:.3e} after {} wave solves",
                out.residual, out.iterations
            ));
        }
        let (cr, ecr) = if out.history.len() >= 2 && out.history[0] > 0.0 {
            convergence_rates(&out.history, self.plan.n_periods())?
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(SolverReport {
            mode: "gmres",
            iterations: out.iterations,
            wave_solves: self.wave_solves(),
            converged,
            diverged: false,
            residual_history: out.history,
            cr,
            ecr,
            helmholtz_residuals: helmholtz,
            wall_seconds: start.elapsed().as_secs_f64(),
            warnings,
            solution,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryCondition;
    use crate::problem::gaussian_problem;
    use crate::wave::{build_time_plan, Scheme, TimePlanOptions};

    fn small_driver(np: usize) -> MfwhDriver {
        let grid = Arc::new(Grid::unit(&[16, 16], 2).unwrap());
        let p = gaussian_problem(
            &[5.1, 10.1],
            &[25.0, 100.0],
            &[15.0, 15.0],
            &[[0.6, 0.45], [0.4, 0.5]],
            BoundaryCondition::dirichlet(),
            1.0,
        )
        .unwrap();
        let plan =
            build_time_plan(&p, Scheme::Trapezoidal, np, &grid, 2, TimePlanOptions::default())
                .unwrap();
        MfwhDriver::new(&p, &grid, 2, plan, &DriverConfig::default()).unwrap()
    }

    #[test]
    fn residual_formula_matches_brute_force() {
        let grid = Arc::new(Grid::unit(&[8, 8], 2).unwrap());
        let map = UnknownMap::new(&grid, &BoundaryCondition::dirichlet());
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut g = GridFunction::zeros(&grid);
            for (i, j) in grid.iter_points() {
                g.set(i as isize, j as isize, rng.gen_range(-1.0..1.0));
            }
            g
        };
        let a = vec![mk(&mut rng), mk(&mut rng)];
        let b = vec![mk(&mut rng), mk(&mut rng)];
        let r = residual(&a, &b, &map);
        // independent double loop
        let mut s = 0.0;
        let mut cnt = 0;
        for m in 0..2 {
            for i in 1..8 {
                for j in 1..8 {
                    let d = a[m].get(i, j) - b[m].get(i, j);
                    s += d * d;
                    cnt += 1;
                }
            }
        }
        let want = (s / cnt as f64).sqrt();
        assert!((r - want).abs() < 1e-14);

        // identical iterates
        assert_eq!(residual(&a, &a, &map), 0.0);

        // constant difference in one of Nf components: c / sqrt(Nf)
        let mut c = a.clone();
        for (i, j) in grid.iter_points() {
            let v = c[0].get(i as isize, j as isize) + 0.7;
            c[0].set(i as isize, j as isize, v);
        }
        let r = residual(&c, &a, &map);
        assert!((r - 0.7 / (2.0f64).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn convergence_rate_arithmetic() {
        // CR = 0.5, Np = 1 -> ECR = 0.5; CR = 0.25, Np = 2 -> ECR = 0.5
        let h = vec![0.5, 0.25];
        let (cr, ecr) = convergence_rates(&h, 1).unwrap();
        assert!((cr - 0.5f64.powf(0.5)).abs() < 1e-14);
        let _ = ecr;
        let (cr, ecr) = convergence_rates(&[0.3, 0.09, 0.027], 1).unwrap();
        assert!((cr - (0.027f64 / 0.3).powf(1.0 / 3.0)).abs() < 1e-14);
        assert_eq!(cr, ecr);
        let (cr, ecr) = convergence_rates(&[0.25, 0.0625], 2).unwrap();
        let _ = cr;
        // ECR = CR^(1/2)
        assert!((ecr - (0.0625f64 / 0.25).powf(0.5 / 2.0)).abs() < 1e-14);
        assert!(convergence_rates(&[1.0], 1).is_err());
        assert!(convergence_rates(&[0.0, 1.0], 1).is_err());
    }

    #[test]
    fn map_affinity_three_extra_solves() {
        let d = small_driver(2);
        let grid = d.map().grid().clone();
        let mk = |f: fn(&[f64; 2]) -> f64| GridFunction::from_fn(&grid, f);
        let v1 = vec![mk(|x| (3.0 * x[0]).sin()), mk(|x| x[1] * x[1])];
        let v2 = vec![mk(|x| (2.0 * x[1]).cos() - 0.4), mk(|x| x[0])];
        let b = d.apply_map(&d.zero_iterates()).unwrap();
        let w1 = d.apply_map(&v1).unwrap();
        let w2 = d.apply_map(&v2).unwrap();
        let (a_c, b_c) = (0.7, -1.3);
        let mut combo = Vec::new();
        for m in 0..2 {
            let mut g = GridFunction::zeros(&grid);
            g.axpy(a_c, &v1[m]);
            g.axpy(b_c, &v2[m]);
            combo.push(g);
        }
        let wc = d.apply_map(&combo).unwrap();
        // W(a v1 + b v2) - b = a (W(v1) - b) + b (W(v2) - b)
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for m in 0..2 {
            for &(i, j) in d.map().points() {
                let (ii, jj) = (i as isize, j as isize);
                let lhs = wc[m].get(ii, jj) - b[m].get(ii, jj);
                let rhs = a_c * (w1[m].get(ii, jj) - b[m].get(ii, jj))
                    + b_c * (w2[m].get(ii, jj) - b[m].get(ii, jj));
                worst = worst.max((lhs - rhs).abs());
                scale = scale.max(lhs.abs());
            }
        }
        assert!(worst <= 1e-10 * scale.max(1.0), "affinity violated: {worst:.3e}");
    }

    #[test]
    fn gmres_and_fpi_agree_when_both_converge() {
        let d = small_driver(3);
        let cfg = DriverConfig {
            tol: 1e-11,
            max_iter: 400,
            ..DriverConfig::default()
        };
        let fpi = d.run_fpi(&cfg).unwrap();
        assert!(fpi.converged, "fpi residuals: {:?}", &fpi.residual_history);
        let gm = d.run_gmres(&cfg).unwrap();
        assert!(gm.converged);
        for m in 0..2 {
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for &(i, j) in d.map().points() {
                let (ii, jj) = (i as isize, j as isize);
                num += (fpi.solution[m].get(ii, jj) - gm.solution[m].get(ii, jj)).powi(2);
                den += gm.solution[m].get(ii, jj).powi(2);
            }
            assert!(
                num.sqrt() <= 1e-9 * den.sqrt(),
                "m={m}: fpi/gmres disagree by {:.3e}",
                num.sqrt() / den.sqrt()
            );
        }
        // b, the initial residual, one per Arnoldi vector, final residual
        assert_eq!(gm.wave_solves, gm.iterations + 3);
    }

    #[test]
    fn zero_forcing_fixed_point_is_zero() {
        let grid = Arc::new(Grid::unit(&[12, 12], 2).unwrap());
        let comp = crate::problem::Component {
            omega: 5.1,
            forcing: crate::problem::ForcingSpec::Tabulated(GridFunction::zeros(&grid)),
            boundary: None,
        };
        let p = MultiHelmholtzProblem::new(vec![comp], BoundaryCondition::dirichlet(), 1.0)
            .unwrap();
        let plan =
            build_time_plan(&p, Scheme::Trapezoidal, 2, &grid, 2, TimePlanOptions::default())
                .unwrap();
        let d = MfwhDriver::new(&p, &grid, 2, plan, &DriverConfig::default()).unwrap();
        let b = d.apply_map(&d.zero_iterates()).unwrap();
        assert!(b[0].norm_inf() == 0.0);
    }
}
