//! Finite-difference Laplacian stencils and ghost-point closures.
//!
//! Order 2 uses the 3-point stencil per axis, order 4 the 5-point stencil
//! `(-u_{j-2} + 16u_{j-1} - 30u_j + 16u_{j+1} - u_{j+2}) / (12h^2)`.
//!
//! Ghost closures:
//! * Dirichlet: boundary value pinned to the data, first ghost by odd
//!   reflection of `u - g` about the boundary, second ghost by 5-point
//!   one-sided extrapolation of the reflected extension.
//! * Neumann: even reflection, with a centered-difference flux adjustment
//!   (`D_0 u = g`) when the data is nonzero.

use crate::error::{MfwhError, Result};
use crate::grid::{BcKind, BoundaryCondition, Face, Grid, GridFunction};

fn check_order(grid: &Grid, order: usize) -> Result<()> {
    let ng = crate::grid::ghost_width(order)?;
    if grid.ghost() < ng {
        return Err(MfwhError::Grid(format!(
            "grid has ghost width {} but order {} needs {}",
            grid.ghost(),
            order,
            ng
        )));
    }
    Ok(())
}

/// Fill boundary points and ghost layers of `u` in place.
///
/// `data` supplies boundary values (Dirichlet) or outward-normal fluxes
/// (Neumann), read at the boundary points of each face; `None` means zero.
pub fn fill_ghosts(
    u: &mut GridFunction,
    bc: &BoundaryCondition,
    data: Option<&GridFunction>,
    order: usize,
) -> Result<()> {
    let grid = u.grid().clone();
    check_order(&grid, order)?;
    if let Some(d) = data {
        if d.grid().as_ref() != grid.as_ref() {
            return Err(MfwhError::Grid(
                "boundary data lives on a different grid".into(),
            ));
        }
    }
    let ng = crate::grid::ghost_width(order)?;

    // Pin Dirichlet boundary values first so reflections see them.
    for &face in grid.faces() {
        if bc.kind(face) == BcKind::Dirichlet {
            for_face_points(&grid, face, |i, j| {
                let g = data.map_or(0.0, |d| d.get(i, j));
                u.set(i, j, g);
            });
        }
    }

    for &face in grid.faces() {
        let axis = face.axis();
        let n = grid.cells(axis) as isize;
        // (boundary index, direction towards the interior)
        let (b, into): (isize, isize) = if face.is_low() { (0, 1) } else { (n, -1) };
        let h = grid.spacing(axis);
        match bc.kind(face) {
            BcKind::Dirichlet => {
                for_face_points(&grid, face, |i, j| {
                    let g = data.map_or(0.0, |d| d.get(i, j));
                    let u1 = get_axis(u, axis, i, j, b + into);
                    set_axis(u, axis, i, j, b - into, 2.0 * g - u1);
                    if ng >= 2 {
                        let line = |k: isize| get_axis(u, axis, i, j, b + into * k);
                        let g2 = 5.0 * line(-1) - 10.0 * line(0) + 10.0 * line(1)
                            - 5.0 * line(2)
                            + line(3);
                        set_axis(u, axis, i, j, b - 2 * into, g2);
                    }
                });
            }
            BcKind::Neumann => {
                for_face_points(&grid, face, |i, j| {
                    let g = data.map_or(0.0, |d| d.get(i, j));
                    for k in 1..=ng as isize {
                        let mirror = get_axis(u, axis, i, j, b + into * k);
                        set_axis(u, axis, i, j, b - into * k, mirror + 2.0 * k as f64 * h * g);
                    }
                });
            }
        }
    }
    Ok(())
}

/// Visit the non-ghost points of a face as (i, j) index pairs.
fn for_face_points(grid: &Grid, face: Face, mut f: impl FnMut(isize, isize)) {
    let axis = face.axis();
    let fixed = if face.is_low() {
        0
    } else {
        grid.cells(axis) as isize
    };
    let other = 1 - axis;
    let m = grid.points(other) as isize;
    for t in 0..m {
        let (i, j) = if axis == 0 { (fixed, t) } else { (t, fixed) };
        f(i, j);
    }
}

#[inline]
fn get_axis(u: &GridFunction, axis: usize, i: isize, j: isize, k: isize) -> f64 {
    if axis == 0 {
        u.get(k, j)
    } else {
        u.get(i, k)
    }
}

#[inline]
fn set_axis(u: &mut GridFunction, axis: usize, i: isize, j: isize, k: isize, v: f64) {
    if axis == 0 {
        u.set(k, j, v);
    } else {
        u.set(i, k, v);
    }
}

/// `out = c^2 * discrete Laplacian of u` at every non-ghost point.
///
/// Ghosts of `u` must already be filled consistently with the boundary
/// condition; ghost entries of `out` are zeroed.
pub fn apply_laplacian_into(
    u: &GridFunction,
    order: usize,
    c: f64,
    out: &mut GridFunction,
) -> Result<()> {
    let grid = u.grid().clone();
    check_order(&grid, order)?;
    assert!(
        out.grid().as_ref() == grid.as_ref(),
        "output grid function on wrong grid"
    );
    let c2 = c * c;
    let dim = grid.dim();
    let ng = grid.ghost() as isize;
    let nx = grid.points(0);
    let ny = grid.points(1);
    let width = grid.padded(0);
    let inv_hx2 = 1.0 / (grid.spacing(0) * grid.spacing(0));
    let inv_hy2 = if dim > 1 {
        1.0 / (grid.spacing(1) * grid.spacing(1))
    } else {
        0.0
    };
    let uv = u.values();

    out.fill(0.0);
    let ghost_rows = if dim > 1 { ng as usize } else { 0 };
    crate::par::for_each_row(out.values_mut(), width, |row, out_row| {
        if dim > 1 && (row < ghost_rows || row >= ghost_rows + ny) {
            return; // ghost row
        }
        let base = row * width + ng as usize; // flat index of (0, j)
        match order {
            2 => {
                for i in 0..nx {
                    let k = base + i;
                    let mut lap = (uv[k - 1] - 2.0 * uv[k] + uv[k + 1]) * inv_hx2;
                    if dim > 1 {
                        lap += (uv[k - width] - 2.0 * uv[k] + uv[k + width]) * inv_hy2;
                    }
                    out_row[ng as usize + i] = c2 * lap;
                }
            }
            4 => {
                let w = width;
                for i in 0..nx {
                    let k = base + i;
                    let mut lap = (-uv[k - 2] + 16.0 * uv[k - 1] - 30.0 * uv[k]
                        + 16.0 * uv[k + 1]
                        - uv[k + 2])
                        * (inv_hx2 / 12.0);
                    if dim > 1 {
                        lap += (-uv[k - 2 * w] + 16.0 * uv[k - w] - 30.0 * uv[k]
                            + 16.0 * uv[k + w]
                            - uv[k + 2 * w])
                            * (inv_hy2 / 12.0);
                    }
                    out_row[ng as usize + i] = c2 * lap;
                }
            }
            _ => unreachable!("order validated above"),
        }
    });
    Ok(())
}

/// Allocating convenience wrapper around [`apply_laplacian_into`].
pub fn apply_laplacian(u: &GridFunction, order: usize, c: f64) -> Result<GridFunction> {
    let mut out = GridFunction::zeros(u.grid());
    apply_laplacian_into(u, order, c, &mut out)?;
    Ok(out)
}
