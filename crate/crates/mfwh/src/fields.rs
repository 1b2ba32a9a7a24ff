//! File formats: the plain-text grid-function field format and the CSV
//! outputs (residual history, mu curve, spectrum).
//!
//! Field format: header line `nx ny xa xb ya yb`, then one value per line
//! for every non-ghost point, row-major with x fastest, 17 significant
//! digits. 1D fields use `ny = 0` with `ya = yb = 0`.

use crate::error::{MfwhError, Result};
use crate::grid::{Grid, GridFunction};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

/// Format a float with 17 significant digits (lossless round trip).
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_field(path: &Path, u: &GridFunction) -> Result<()> {
    let g = u.grid();
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    let (ny, ya, yb) = if g.dim() > 1 {
        (g.cells(1), g.lower(1), g.upper(1))
    } else {
        (0, 0.0, 0.0)
    };
    writeln!(
        w,
        "{} {} {} {} {} {}",
        g.cells(0),
        ny,
        fmt_full(g.lower(0)),
        fmt_full(g.upper(0)),
        fmt_full(ya),
        fmt_full(yb)
    )?;
    for (i, j) in g.iter_points() {
        writeln!(w, "{}", fmt_full(u.get(i as isize, j as isize)))?;
    }
    Ok(())
}

/// Read a field written by [`write_field`]; reconstructs the grid with the
/// requested stencil order (ghost values start at zero).
pub fn read_field(path: &Path, order: usize) -> Result<GridFunction> {
    let f = std::fs::File::open(path)?;
    let mut lines = BufReader::new(f).lines();
    let header = lines
        .next()
        .ok_or_else(|| MfwhError::Grid(format!("{}: empty field file", path.display())))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 6 {
        return Err(MfwhError::Grid(format!(
            "{}: malformed field header `{header}`",
            path.display()
        )));
    }
    let nx: usize = parts[0]
        .parse()
        .map_err(|_| MfwhError::Grid(format!("bad nx in `{header}`")))?;
    let ny: usize = parts[1]
        .parse()
        .map_err(|_| MfwhError::Grid(format!("bad ny in `{header}`")))?;
    let nums: Vec<f64> = parts[2..]
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| MfwhError::Grid(format!("bad bound in `{header}`")))
        })
        .collect::<Result<_>>()?;
    let grid = if ny == 0 {
        Grid::new(&[(nums[0], nums[1])], &[nx], order)?
    } else {
        Grid::new(&[(nums[0], nums[1]), (nums[2], nums[3])], &[nx, ny], order)?
    };
    let grid = Arc::new(grid);
    let mut u = GridFunction::zeros(&grid);
    let mut it = grid.iter_points();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (i, j) = it.next().ok_or_else(|| {
            MfwhError::Grid(format!("{}: more values than grid points", path.display()))
        })?;
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| MfwhError::Grid(format!("bad value `{line}`")))?;
        u.set(i as isize, j as isize, v);
    }
    if it.next().is_some() {
        return Err(MfwhError::Grid(format!(
            "{}: fewer values than grid points",
            path.display()
        )));
    }
    Ok(u)
}

/// residuals.csv: `k, r, cr_running`.
pub fn write_residuals_csv(path: &Path, history: &[f64]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    writeln!(w, "k,r,cr_running")?;
    for (k, &r) in history.iter().enumerate() {
        let cr = if k > 0 && history[0] > 0.0 {
            (r / history[0]).powf(1.0 / (k + 1) as f64)
        } else {
            f64::NAN
        };
        writeln!(w, "{},{},{}", k + 1, fmt_full(r), fmt_full(cr))?;
    }
    Ok(())
}

/// mu_curve.csv: `lambda, mu, abs_mu`.
pub fn write_mu_curve_csv(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    writeln!(w, "lambda,mu,abs_mu")?;
    for &(lam, mu) in curve {
        writeln!(w, "{},{},{}", fmt_full(lam), fmt_full(mu), fmt_full(mu.abs()))?;
    }
    Ok(())
}

/// spectrum.csv: `nu, lambda_h, lambda_tilde, mu_d`.
pub fn write_spectrum_csv(path: &Path, rows: &[(usize, f64, f64, f64)]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    writeln!(w, "nu,lambda_h,lambda_tilde,mu_d")?;
    for &(nu, lh, lt, mu) in rows {
        writeln!(w, "{},{},{},{}", nu, fmt_full(lh), fmt_full(lt), fmt_full(mu))?;
    }
    Ok(())
}
