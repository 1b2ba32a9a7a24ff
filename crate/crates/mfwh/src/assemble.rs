//! Assembled sparse (banded) form of the discrete Laplacian over the
//! solver's unknowns, with homogeneous boundary conditions baked into the
//! stencil rows. Inhomogeneous data enters through right-hand-side lifting.
//!
//! Unknowns are the non-ghost points that are not pinned by a Dirichlet
//! face; Neumann boundary points carry the interior equation with reflected
//! stencils and stay in the unknown set.

use crate::error::Result;
use crate::grid::{BcKind, BoundaryCondition, Grid, GridFunction};
use crate::linalg::banded::BandedMatrix;
use crate::stencil;
use std::sync::Arc;

/// Mapping between grid points and the flat unknown vector.
#[derive(Debug, Clone)]
pub struct UnknownMap {
    /// (i, j) of each unknown, in row-major order.
    points: Vec<(usize, usize)>,
    /// padded-storage flat index of each unknown.
    flats: Vec<usize>,
    /// inverse: padded flat index -> unknown index.
    inverse: Vec<isize>,
    grid: Arc<Grid>,
}

impl UnknownMap {
    pub fn new(grid: &Arc<Grid>, bc: &BoundaryCondition) -> Self {
        let mut points = Vec::new();
        let mut flats = Vec::new();
        let mut inverse = vec![-1isize; grid.padded_len()];
        for (i, j) in grid.iter_points() {
            let pinned = grid.faces().iter().any(|&f| {
                bc.kind(f) == BcKind::Dirichlet && grid.on_face(i, j, f)
            });
            if !pinned {
                let flat = grid.flat(i as isize, j as isize);
                inverse[flat] = points.len() as isize;
                points.push((i, j));
                flats.push(flat);
            }
        }
        Self {
            points,
            flats,
            inverse,
            grid: Arc::clone(grid),
        }
    }

    /// Number of unknowns N_a.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Unknown index of non-ghost point (i, j), if it is an unknown.
    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let f = self.grid.flat(i as isize, j as isize);
        let k = self.inverse[f];
        (k >= 0).then_some(k as usize)
    }

    /// Extract unknown values from a grid function.
    pub fn gather(&self, u: &GridFunction) -> Vec<f64> {
        self.flats.iter().map(|&f| u.values()[f]).collect()
    }

    pub fn gather_into(&self, u: &GridFunction, out: &mut [f64]) {
        for (o, &f) in out.iter_mut().zip(&self.flats) {
            *o = u.values()[f];
        }
    }

    /// Write unknown values into a grid function (other points untouched).
    pub fn scatter(&self, x: &[f64], u: &mut GridFunction) {
        assert_eq!(x.len(), self.flats.len());
        for (&f, &v) in self.flats.iter().zip(x) {
            u.values_mut()[f] = v;
        }
    }

    /// Trapezoid-rule point weights (1/2 per Neumann face membership per
    /// axis). The assembled operator is self-adjoint in this inner product.
    pub fn trapezoid_weights(&self, bc: &BoundaryCondition) -> Vec<f64> {
        self.points
            .iter()
            .map(|&(i, j)| {
                let mut w = 1.0;
                for &f in self.grid.faces() {
                    if bc.kind(f) == BcKind::Neumann && self.grid.on_face(i, j, f) {
                        w *= 0.5;
                    }
                }
                w
            })
            .collect()
    }
}

/// Per-axis stencil couplings after folding ghosts through the closure,
/// as (target point index on axis, coefficient/h^2).
fn axis_couplings(
    pos: usize,
    n: usize,
    order: usize,
    low: BcKind,
    high: BcKind,
    inv_h2: f64,
) -> Vec<(usize, f64)> {
    let stencil: &[(isize, f64)] = match order {
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        4 => &[
            (-2, -1.0 / 12.0),
            (-1, 16.0 / 12.0),
            (0, -30.0 / 12.0),
            (1, 16.0 / 12.0),
            (2, -1.0 / 12.0),
        ],
        _ => unreachable!(),
    };
    let mut out = Vec::with_capacity(5);
    for &(off, c) in stencil {
        let k = pos as isize + off;
        let (target, sign) = if k < 0 {
            match low {
                BcKind::Dirichlet => {
                    debug_assert_eq!(k, -1, "Dirichlet unknowns never reach the second ghost");
                    ((-k) as usize, -1.0)
                }
                BcKind::Neumann => ((-k) as usize, 1.0),
            }
        } else if k > n as isize {
            match high {
                BcKind::Dirichlet => {
                    debug_assert_eq!(k, n as isize + 1);
                    ((2 * n as isize - k) as usize, -1.0)
                }
                BcKind::Neumann => ((2 * n as isize - k) as usize, 1.0),
            }
        } else {
            ((k as usize), 1.0)
        };
        // homogeneous Dirichlet boundary values drop out
        if (target == 0 && low == BcKind::Dirichlet) || (target == n && high == BcKind::Dirichlet)
        {
            continue;
        }
        out.push((target, sign * c * inv_h2));
    }
    out
}

/// Assemble `c^2 * Laplacian` over the unknowns as a banded matrix.
///
/// Its action agrees pointwise with `fill_ghosts` (zero data) followed by
/// `apply_laplacian`.
pub fn assemble_operator(
    grid: &Arc<Grid>,
    order: usize,
    bc: &BoundaryCondition,
    c: f64,
) -> Result<(BandedMatrix, UnknownMap)> {
    crate::grid::ghost_width(order)?; // validates order
    let map = UnknownMap::new(grid, bc);
    let c2 = c * c;
    let dim = grid.dim();
    let kinds = |axis: usize| -> (BcKind, BcKind) {
        if axis == 0 {
            (bc.kind(crate::grid::Face::XLow), bc.kind(crate::grid::Face::XHigh))
        } else {
            (bc.kind(crate::grid::Face::YLow), bc.kind(crate::grid::Face::YHigh))
        }
    };

    // first pass: bandwidth
    let mut band = 0usize;
    let mut row_entries: Vec<Vec<(usize, f64)>> = Vec::with_capacity(map.len());
    for (row, &(i, j)) in map.points().iter().enumerate() {
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(9);
        for axis in 0..dim {
            let (low, high) = kinds(axis);
            let n = grid.cells(axis);
            let inv_h2 = 1.0 / (grid.spacing(axis) * grid.spacing(axis));
            let pos = if axis == 0 { i } else { j };
            for (target, coef) in axis_couplings(pos, n, order, low, high, inv_h2) {
                let (ti, tj) = if axis == 0 { (target, j) } else { (i, target) };
                let col = map
                    .index_of(ti, tj)
                    .expect("stencil coupling targets an unknown");
                entries.push((col, c2 * coef));
                band = band.max(row.abs_diff(col));
            }
        }
        row_entries.push(entries);
    }

    let mut a = BandedMatrix::zeros(map.len(), band, band);
    for (row, entries) in row_entries.into_iter().enumerate() {
        for (col, v) in entries {
            a.add(row, col, v);
        }
    }
    Ok((a, map))
}

/// Right-hand-side lifting of inhomogeneous boundary data: the action of
/// the full (data-carrying) operator on the zero grid function, gathered
/// over the unknowns.
pub fn boundary_lift(
    grid: &Arc<Grid>,
    order: usize,
    bc: &BoundaryCondition,
    c: f64,
    data: Option<&GridFunction>,
    map: &UnknownMap,
) -> Result<Vec<f64>> {
    match data {
        None => Ok(vec![0.0; map.len()]),
        Some(d) => {
            let mut z = GridFunction::zeros(grid);
            stencil::fill_ghosts(&mut z, bc, Some(d), order)?;
            let l = stencil::apply_laplacian(&z, order, c)?;
            Ok(map.gather(&l))
        }
    }
}
