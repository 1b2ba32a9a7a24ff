//! Batch front-end: load a config, run the requested mode, write outputs.
//!
//! Modes: `fpi` and `gmres` run the iterative solver; `direct` solves the
//! Helmholtz systems by banded LU; `analyze` emits the spectrum and the
//! rate-function curve without solving; `verify` runs GMRES and compares
//! against the direct solutions.
//!
//! Exit codes: 0 success/converged, 2 detected divergence or a
//! non-converged run (outputs still written), 1 hard errors.

use crate::analysis::{self, MuFunction, SpectrumInfo};
use crate::config::{Mode, RunConfig};
use crate::driver::{DriverConfig, MfwhDriver, SolverReport};
use crate::error::{MfwhError, Result};
use crate::fields;
use crate::filter::build_filter_bank;
use crate::grid::{Grid, GridFunction};
use crate::problem::{Component, ForcingSpec, GaussianSpec, MultiHelmholtzProblem};
use crate::reference;
use crate::wave::{build_time_plan, TimePlan, TimePlanOptions};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

/// Run from a config file path, with optional mode/output overrides.
pub fn run(config_path: &Path, mode: Option<&str>, out_dir: Option<&Path>) -> Result<i32> {
    let mut cfg = RunConfig::from_path(config_path)?;
    if let Some(m) = mode {
        cfg.mode = Mode::parse(m)?;
    }
    if let Some(d) = out_dir {
        cfg.out_dir = d.to_path_buf();
    }
    run_config(&cfg)
}

#[cfg(feature = "parallel")]
fn init_threads(threads: usize) {
    let n = if threads > 0 {
        threads
    } else {
        std::env::var("MFWH_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .unwrap_or(0)
    };
    if n > 0 {
        // ignore the error when a pool already exists (repeat runs in-process)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads(_threads: usize) {}

struct Setup {
    grid: Arc<Grid>,
    problem: MultiHelmholtzProblem,
    plan: TimePlan,
}

fn build_setup(cfg: &RunConfig) -> Result<Setup> {
    let grid = Arc::new(Grid::new(&cfg.bounds, &cfg.cells, cfg.order)?);
    let dim = grid.dim();
    let components = cfg
        .freqs
        .iter()
        .map(|f| {
            let forcing = match &f.forcing_file {
                Some(path) => ForcingSpec::Tabulated(fields::read_field(path, cfg.order)?),
                None => ForcingSpec::Gaussian(GaussianSpec {
                    amplitude: f.amplitude,
                    width: f.width,
                    center: if dim == 1 {
                        [f.center[0], 0.0]
                    } else {
                        f.center
                    },
                }),
            };
            Ok(Component {
                omega: f.omega,
                forcing,
                boundary: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let problem = MultiHelmholtzProblem::new(components, cfg.bc, 1.0)?;
    let plan = build_time_plan(
        &problem,
        cfg.scheme,
        cfg.n_periods,
        &grid,
        cfg.order,
        TimePlanOptions {
            cfl: cfg.cfl,
            steps_per_period: cfg.steps_per_period,
        },
    )?;
    Ok(Setup {
        grid,
        problem,
        plan,
    })
}

fn driver_config(cfg: &RunConfig) -> Result<DriverConfig> {
    let initial = match &cfg.warm_start {
        None => None,
        Some(paths) => {
            if paths.len() != cfg.freqs.len() {
                return Err(MfwhError::Config {
                    key: "run.warm_start".into(),
                    msg: format!(
                        "need one field per frequency ({} given, {} frequencies)",
                        paths.len(),
                        cfg.freqs.len()
                    ),
                });
            }
            Some(
                paths
                    .iter()
                    .map(|p| fields::read_field(p, cfg.order))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
    };
    Ok(DriverConfig {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        gmres_restart: cfg.gmres_restart,
        inner: cfg.inner_solver,
        inner_tol: cfg.inner_tol,
        posterior_tol: None,
        initial,
    })
}

/// Spectrum + ACR when the grid is small enough for dense per-axis
/// eigensolves.
fn try_spectrum(cfg: &RunConfig, setup: &Setup) -> Result<Option<(SpectrumInfo, MuFunction)>> {
    if cfg.cells.iter().any(|&c| c > 1024) {
        return Ok(None);
    }
    let spectrum = analysis::discrete_spectrum(&setup.grid, cfg.order, setup.problem.bc())?;
    let bank = build_filter_bank(&setup.plan)?;
    let mu = MuFunction::discrete(bank)?;
    Ok(Some((spectrum, mu)))
}

fn write_analysis_outputs(
    cfg: &RunConfig,
    setup: &Setup,
    spectrum: &SpectrumInfo,
    mu: &MuFunction,
) -> Result<()> {
    let plan = &setup.plan;
    if cfg.dump_spectrum {
        let rows: Vec<(usize, f64, f64, f64)> = spectrum
            .lambdas()
            .iter()
            .enumerate()
            .map(|(nu, &lam)| {
                let lt = analysis::lambda_tilde(lam, plan.dt(), plan.alpha_i(), plan.beta_i())?;
                Ok((nu, lam, lt, mu.mu(lt)))
            })
            .collect::<Result<_>>()?;
        fields::write_spectrum_csv(&cfg.out_dir.join("spectrum.csv"), &rows)?;
    }
    if cfg.dump_mu_curve {
        let hi = if cfg.mu_lambda_max > 0.0 {
            cfg.mu_lambda_max
        } else {
            1.3 * setup.problem.omegas().last().copied().unwrap_or(10.0)
        };
        let curve = analysis::sample_mu_curve(1e-9, hi, cfg.mu_samples, mu, Some(plan))?;
        fields::write_mu_curve_csv(&cfg.out_dir.join("mu_curve.csv"), &curve)?;
    }
    Ok(())
}

fn report_block(
    cfg: &RunConfig,
    setup: &Setup,
    report: Option<&SolverReport>,
    acr: Option<&analysis::AcrReport>,
    filter_cond: Option<f64>,
    extra: &[(String, String)],
) -> String {
    let mut s = String::new();
    let plan = &setup.plan;
    let _ = writeln!(s, "mode = {}", cfg.mode.name());
    let _ = writeln!(
        s,
        "grid = {}",
        cfg.cells
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("x")
    );
    let _ = writeln!(s, "order = {}", cfg.order);
    let _ = writeln!(s, "scheme = {}", plan.scheme().name());
    let _ = writeln!(s, "n_periods = {}", plan.n_periods());
    let _ = writeln!(s, "dt = {}", fields::fmt_full(plan.dt()));
    let _ = writeln!(s, "n_steps = {}", plan.n_steps());
    let _ = writeln!(s, "n_freq = {}", plan.n_freq());
    for m in 0..plan.n_freq() {
        let _ = writeln!(
            s,
            "omega_{} = {} (modified {}, periods {})",
            m + 1,
            fields::fmt_full(plan.omega(m)),
            fields::fmt_full(plan.omega_tilde(m)),
            plan.periods_m(m)
        );
    }
    if let Some(c) = filter_cond {
        let _ = writeln!(s, "filter_matrix_condition = {}", fields::fmt_full(c));
    }
    if let Some(a) = acr {
        let _ = writeln!(s, "acr = {}", fields::fmt_full(a.acr));
        let _ = writeln!(s, "acr_worst_lambda = {}", fields::fmt_full(a.worst_lambda));
        for w in &a.warnings {
            let _ = writeln!(s, "warning = {w}");
        }
    }
    if let Some(r) = report {
        let _ = writeln!(s, "iterations = {}", r.iterations);
        let _ = writeln!(s, "wave_solves = {}", r.wave_solves);
        let _ = writeln!(s, "converged = {}", r.converged);
        let _ = writeln!(s, "diverged = {}", r.diverged);
        if r.cr.is_finite() {
            let _ = writeln!(s, "cr = {}", fields::fmt_full(r.cr));
            let _ = writeln!(s, "ecr = {}", fields::fmt_full(r.ecr));
        }
        if let Some(&last) = r.residual_history.last() {
            let _ = writeln!(s, "final_residual = {}", fields::fmt_full(last));
        }
        for (m, h) in r.helmholtz_residuals.iter().enumerate() {
            let _ = writeln!(s, "helmholtz_residual_{} = {}", m + 1, fields::fmt_full(*h));
        }
        let _ = writeln!(s, "wall_seconds = {:.3}", r.wall_seconds);
        for w in &r.warnings {
            let _ = writeln!(s, "warning = {w}");
        }
    }
    for (k, v) in extra {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

fn dump_solution(cfg: &RunConfig, fields_out: &[GridFunction]) -> Result<()> {
    if !cfg.dump_fields {
        return Ok(());
    }
    for (m, u) in fields_out.iter().enumerate() {
        fields::write_field(&cfg.out_dir.join(format!("u_m{}.field", m + 1)), u)?;
    }
    Ok(())
}

/// Execute a validated config; returns the process exit code.
pub fn run_config(cfg: &RunConfig) -> Result<i32> {
    init_threads(cfg.threads);
    std::fs::create_dir_all(&cfg.out_dir)?;
    let setup = build_setup(cfg)?;
    let filter_cond = Some(build_filter_bank(&setup.plan)?.condition_number());
    let spec_mu = try_spectrum(cfg, &setup)?;
    let acr = match &spec_mu {
        Some((spectrum, mu)) => Some(analysis::predict_acr(&setup.plan, mu, spectrum)?),
        None => None,
    };
    if let Some((spectrum, mu)) = &spec_mu {
        if cfg.mode == Mode::Analyze || cfg.dump_mu_curve || cfg.dump_spectrum {
            write_analysis_outputs(cfg, &setup, spectrum, mu)?;
        }
    }

    let exit = match cfg.mode {
        Mode::Analyze => {
            let text = report_block(cfg, &setup, None, acr.as_ref(), filter_cond, &[]);
            std::fs::write(cfg.out_dir.join("report.txt"), &text)?;
            print!("{text}");
            0
        }
        Mode::Direct => {
            let mut sols = Vec::new();
            for m in 1..=setup.problem.n_freq() {
                sols.push(reference::solve_direct(
                    &setup.problem,
                    &setup.grid,
                    cfg.order,
                    m,
                )?);
            }
            dump_solution(cfg, &sols)?;
            let text = report_block(cfg, &setup, None, acr.as_ref(), filter_cond, &[]);
            std::fs::write(cfg.out_dir.join("report.txt"), &text)?;
            print!("{text}");
            0
        }
        Mode::Fpi | Mode::Gmres => {
            let dcfg = driver_config(cfg)?;
            let driver = MfwhDriver::new(&setup.problem, &setup.grid, cfg.order, setup.plan.clone(), &dcfg)?;
            let report = if cfg.mode == Mode::Fpi {
                driver.run_fpi(&dcfg)?
            } else {
                driver.run_gmres(&dcfg)?
            };
            if cfg.dump_residuals {
                fields::write_residuals_csv(
                    &cfg.out_dir.join("residuals.csv"),
                    &report.residual_history,
                )?;
            }
            dump_solution(cfg, &report.solution)?;
            let text = report_block(cfg, &setup, Some(&report), acr.as_ref(), filter_cond, &[]);
            std::fs::write(cfg.out_dir.join("report.txt"), &text)?;
            print!("{text}");
            if report.converged {
                0
            } else {
                2
            }
        }
        Mode::Verify => {
            let dcfg = driver_config(cfg)?;
            let driver = MfwhDriver::new(&setup.problem, &setup.grid, cfg.order, setup.plan.clone(), &dcfg)?;
            let report = driver.run_gmres(&dcfg)?;
            let mut extra = Vec::new();
            for m in 1..=setup.problem.n_freq() {
                let direct = reference::solve_direct(&setup.problem, &setup.grid, cfg.order, m)?;
                let mut num = 0.0f64;
                let mut den = 0.0f64;
                for &(i, j) in driver.map().points() {
                    let (ii, jj) = (i as isize, j as isize);
                    num += (report.solution[m - 1].get(ii, jj) - direct.get(ii, jj)).powi(2);
                    den += direct.get(ii, jj).powi(2);
                }
                let rel = if den > 0.0 {
                    (num / den).sqrt()
                } else {
                    num.sqrt()
                };
                extra.push((format!("relative_error_{m}"), fields::fmt_full(rel)));
            }
            if cfg.dump_residuals {
                fields::write_residuals_csv(
                    &cfg.out_dir.join("residuals.csv"),
                    &report.residual_history,
                )?;
            }
            dump_solution(cfg, &report.solution)?;
            let text = report_block(cfg, &setup, Some(&report), acr.as_ref(), filter_cond, &extra);
            std::fs::write(cfg.out_dir.join("report.txt"), &text)?;
            print!("{text}");
            if report.converged {
                0
            } else {
                2
            }
        }
    };
    let _ = std::io::stdout().flush();
    Ok(exit)
}
