//! Run configuration: a flat TOML file with `[run]`, `[grid]`, `[bc]`,
//! `[scheme]`, `[output]`, and one `[freq.N]` section per component.
//!
//! Example:
//! ```toml
//! [run]
//! mode = "gmres"
//! tol = 1e-10
//!
//! [grid]
//! cells = [64, 64]
//! order = 4
//!
//! [scheme]
//! kind = "trapezoidal"
//! n_periods = 2
//!
//! [freq.1]
//! omega = 5.1
//! amplitude = 25.0
//! width = 15.0
//! center = [0.6, 0.45]
//! ```

use crate::error::{MfwhError, Result};
use crate::grid::{BcKind, BoundaryCondition};
use crate::wave::{InnerSolverKind, Scheme};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fpi,
    Gmres,
    Direct,
    Analyze,
    Verify,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "fpi" => Ok(Mode::Fpi),
            "gmres" => Ok(Mode::Gmres),
            "direct" => Ok(Mode::Direct),
            "analyze" => Ok(Mode::Analyze),
            "verify" => Ok(Mode::Verify),
            other => Err(MfwhError::Config {
                key: "run.mode".into(),
                msg: format!("unknown mode `{other}` (use fpi, gmres, direct, analyze, verify)"),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Fpi => "fpi",
            Mode::Gmres => "gmres",
            Mode::Direct => "direct",
            Mode::Analyze => "analyze",
            Mode::Verify => "verify",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    run: Option<RawRun>,
    grid: RawGrid,
    bc: Option<RawBc>,
    scheme: Option<RawScheme>,
    output: Option<RawOutput>,
    freq: BTreeMap<String, RawFreq>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    mode: Option<String>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    gmres_restart: Option<usize>,
    inner_solver: Option<String>,
    inner_tol: Option<f64>,
    threads: Option<usize>,
    warm_start: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    cells: Vec<usize>,
    bounds: Option<Vec<[f64; 2]>>,
    order: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBc {
    kind: Option<String>,
    faces: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    kind: Option<String>,
    n_periods: Option<usize>,
    steps_per_period: Option<f64>,
    cfl: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    fields: Option<bool>,
    residuals: Option<bool>,
    mu_curve: Option<bool>,
    spectrum: Option<bool>,
    mu_lambda_max: Option<f64>,
    mu_samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFreq {
    omega: f64,
    amplitude: Option<f64>,
    width: Option<f64>,
    center: Option<Vec<f64>>,
    forcing_file: Option<String>,
}

/// One frequency entry after validation.
#[derive(Debug, Clone)]
pub struct FreqConfig {
    pub omega: f64,
    pub amplitude: f64,
    pub width: f64,
    pub center: [f64; 2],
    pub forcing_file: Option<PathBuf>,
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub cells: Vec<usize>,
    pub bounds: Vec<(f64, f64)>,
    pub order: usize,
    pub bc: BoundaryCondition,
    pub scheme: Scheme,
    pub n_periods: usize,
    pub steps_per_period: f64,
    pub cfl: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub gmres_restart: usize,
    pub inner_solver: InnerSolverKind,
    pub inner_tol: f64,
    pub threads: usize,
    pub warm_start: Option<Vec<PathBuf>>,
    pub freqs: Vec<FreqConfig>,
    pub out_dir: PathBuf,
    pub dump_fields: bool,
    pub dump_residuals: bool,
    pub dump_mu_curve: bool,
    pub dump_spectrum: bool,
    pub mu_lambda_max: f64,
    pub mu_samples: usize,
}

fn bc_kind(s: &str, key: &str) -> Result<BcKind> {
    match s {
        "dirichlet" => Ok(BcKind::Dirichlet),
        "neumann" => Ok(BcKind::Neumann),
        other => Err(MfwhError::Config {
            key: key.into(),
            msg: format!("unknown boundary kind `{other}` (use dirichlet or neumann)"),
        }),
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MfwhError::Config {
            key: "config".into(),
            msg: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| MfwhError::Config {
            key: "config".into(),
            msg: e.to_string(),
        })?;

        let dim = raw.grid.cells.len();
        if dim == 0 || dim > 2 {
            return Err(MfwhError::Config {
                key: "grid.cells".into(),
                msg: format!("need 1 or 2 axes, got {dim}"),
            });
        }
        for (l, &c) in raw.grid.cells.iter().enumerate() {
            if c < 4 {
                return Err(MfwhError::Config {
                    key: "grid.cells".into(),
                    msg: format!("axis {l} has too few cells ({c})"),
                });
            }
        }
        let bounds: Vec<(f64, f64)> = match raw.grid.bounds {
            None => vec![(0.0, 1.0); dim],
            Some(b) => {
                if b.len() != dim {
                    return Err(MfwhError::Config {
                        key: "grid.bounds".into(),
                        msg: format!("expected {dim} bound pairs, got {}", b.len()),
                    });
                }
                b.iter().map(|p| (p[0], p[1])).collect()
            }
        };
        for (l, &(a, b)) in bounds.iter().enumerate() {
            if !(b > a) {
                return Err(MfwhError::Config {
                    key: "grid.bounds".into(),
                    msg: format!("axis {l} bounds ({a}, {b}) are degenerate"),
                });
            }
        }
        let order = raw.grid.order.unwrap_or(4);
        if order != 2 && order != 4 {
            return Err(MfwhError::Config {
                key: "grid.order".into(),
                msg: format!("order must be 2 or 4, got {order}"),
            });
        }

        let bc = match raw.bc {
            None => BoundaryCondition::dirichlet(),
            Some(rb) => match (rb.kind, rb.faces) {
                (Some(k), None) => BoundaryCondition::uniform(bc_kind(&k, "bc.kind")?),
                (None, Some(faces)) => {
                    if faces.len() != 4 {
                        return Err(MfwhError::Config {
                            key: "bc.faces".into(),
                            msg: format!("need 4 face kinds, got {}", faces.len()),
                        });
                    }
                    let mut kinds = [BcKind::Dirichlet; 4];
                    for (k, f) in kinds.iter_mut().zip(&faces) {
                        *k = bc_kind(f, "bc.faces")?;
                    }
                    BoundaryCondition::per_face(kinds)
                }
                (None, None) => BoundaryCondition::dirichlet(),
                (Some(_), Some(_)) => {
                    return Err(MfwhError::Config {
                        key: "bc".into(),
                        msg: "give either bc.kind or bc.faces, not both".into(),
                    })
                }
            },
        };

        let rs = raw.scheme.unwrap_or(RawScheme {
            kind: None,
            n_periods: None,
            steps_per_period: None,
            cfl: None,
        });
        let scheme = match rs.kind.as_deref() {
            None | Some("trapezoidal") => Scheme::Trapezoidal,
            Some("explicit") => Scheme::Explicit,
            Some("full_weighting") => Scheme::FullWeighting,
            Some(other) => {
                return Err(MfwhError::Config {
                    key: "scheme.kind".into(),
                    msg: format!(
                        "unknown scheme `{other}` (use explicit, trapezoidal, full_weighting)"
                    ),
                })
            }
        };
        let n_periods = rs.n_periods.unwrap_or(2);
        if n_periods < 1 {
            return Err(MfwhError::Config {
                key: "scheme.n_periods".into(),
                msg: "must be >= 1".into(),
            });
        }
        let steps_per_period = rs.steps_per_period.unwrap_or(10.0);
        if !(steps_per_period >= 5.0) {
            return Err(MfwhError::Config {
                key: "scheme.steps_per_period".into(),
                msg: format!("must be >= 5, got {steps_per_period}"),
            });
        }
        let cfl = rs.cfl.unwrap_or(0.9);
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(MfwhError::Config {
                key: "scheme.cfl".into(),
                msg: format!("must lie in (0, 1], got {cfl}"),
            });
        }

        let rr = raw.run.unwrap_or(RawRun {
            mode: None,
            tol: None,
            max_iter: None,
            gmres_restart: None,
            inner_solver: None,
            inner_tol: None,
            threads: None,
            warm_start: None,
        });
        let mode = Mode::parse(rr.mode.as_deref().unwrap_or("gmres"))?;
        let tol = rr.tol.unwrap_or(1e-10);
        if !(tol > 0.0 && tol < 1.0) {
            return Err(MfwhError::Config {
                key: "run.tol".into(),
                msg: format!("must lie in (0, 1), got {tol}"),
            });
        }
        let max_iter = rr.max_iter.unwrap_or(200);
        if max_iter < 1 {
            return Err(MfwhError::Config {
                key: "run.max_iter".into(),
                msg: "must be >= 1".into(),
            });
        }
        let gmres_restart = rr.gmres_restart.unwrap_or(200);
        if gmres_restart < 1 {
            return Err(MfwhError::Config {
                key: "run.gmres_restart".into(),
                msg: "must be >= 1".into(),
            });
        }
        let inner_solver = match rr.inner_solver.as_deref() {
            None | Some("auto") => InnerSolverKind::Auto,
            Some("direct") => InnerSolverKind::Direct,
            Some("cg") => InnerSolverKind::Cg,
            Some(other) => {
                return Err(MfwhError::Config {
                    key: "run.inner_solver".into(),
                    msg: format!("unknown inner solver `{other}` (use auto, direct, cg)"),
                })
            }
        };
        let inner_tol = rr.inner_tol.unwrap_or(1e-12);
        if !(inner_tol > 0.0 && inner_tol < 1e-3) {
            return Err(MfwhError::Config {
                key: "run.inner_tol".into(),
                msg: format!("must lie in (0, 1e-3), got {inner_tol}"),
            });
        }

        if raw.freq.is_empty() {
            return Err(MfwhError::Config {
                key: "freq".into(),
                msg: "need at least one [freq.N] section".into(),
            });
        }
        let mut entries: Vec<(usize, RawFreq)> = Vec::new();
        for (k, v) in raw.freq {
            let idx: usize = k.parse().map_err(|_| MfwhError::Config {
                key: format!("freq.{k}"),
                msg: "section name must be a 1-based integer".into(),
            })?;
            entries.push((idx, v));
        }
        entries.sort_by_key(|(i, _)| *i);
        let mut freqs = Vec::with_capacity(entries.len());
        for (pos, (idx, rf)) in entries.into_iter().enumerate() {
            if idx != pos + 1 {
                return Err(MfwhError::Config {
                    key: format!("freq.{idx}"),
                    msg: format!("sections must be numbered 1..N without gaps (expected {})", pos + 1),
                });
            }
            let key = format!("freq.{idx}");
            if !(rf.omega > 0.0) {
                return Err(MfwhError::Config {
                    key: format!("{key}.omega"),
                    msg: format!("must be positive, got {}", rf.omega),
                });
            }
            let center = match rf.center {
                None => [0.5, 0.5],
                Some(c) => {
                    if c.len() != 2 && c.len() != 1 {
                        return Err(MfwhError::Config {
                            key: format!("{key}.center"),
                            msg: format!("need 1 or 2 coordinates, got {}", c.len()),
                        });
                    }
                    [c[0], c.get(1).copied().unwrap_or(0.0)]
                }
            };
            let width = rf.width.unwrap_or(15.0);
            if rf.forcing_file.is_none() && !(width > 0.0) {
                return Err(MfwhError::Config {
                    key: format!("{key}.width"),
                    msg: format!("must be positive, got {width}"),
                });
            }
            freqs.push(FreqConfig {
                omega: rf.omega,
                amplitude: rf.amplitude.unwrap_or(1.0),
                width,
                center,
                forcing_file: rf.forcing_file.map(PathBuf::from),
            });
        }
        for w in freqs.windows(2) {
            if !(w[0].omega < w[1].omega) {
                return Err(MfwhError::Config {
                    key: "freq".into(),
                    msg: format!(
                        "frequencies must be ascending and distinct; got {} before {}",
                        w[0].omega, w[1].omega
                    ),
                });
            }
        }

        let ro = raw.output.unwrap_or(RawOutput {
            dir: None,
            fields: None,
            residuals: None,
            mu_curve: None,
            spectrum: None,
            mu_lambda_max: None,
            mu_samples: None,
        });
        let mu_samples = ro.mu_samples.unwrap_or(1000);
        if mu_samples < 2 {
            return Err(MfwhError::Config {
                key: "output.mu_samples".into(),
                msg: "must be >= 2".into(),
            });
        }
        let mu_lambda_max = ro.mu_lambda_max.unwrap_or(0.0); // 0: derive from spectrum
        if mu_lambda_max < 0.0 {
            return Err(MfwhError::Config {
                key: "output.mu_lambda_max".into(),
                msg: "must be >= 0".into(),
            });
        }

        Ok(RunConfig {
            mode,
            cells: raw.grid.cells,
            bounds,
            order,
            bc,
            scheme,
            n_periods,
            steps_per_period,
            cfl,
            tol,
            max_iter,
            gmres_restart,
            inner_solver,
            inner_tol,
            threads: rr.threads.unwrap_or(0),
            warm_start: rr
                .warm_start
                .map(|v| v.into_iter().map(PathBuf::from).collect()),
            freqs,
            out_dir: PathBuf::from(ro.dir.unwrap_or_else(|| "out".into())),
            dump_fields: ro.fields.unwrap_or(true),
            dump_residuals: ro.residuals.unwrap_or(true),
            dump_mu_curve: ro.mu_curve.unwrap_or(true),
            dump_spectrum: ro.spectrum.unwrap_or(true),
            mu_lambda_max,
            mu_samples,
        })
    }
}
