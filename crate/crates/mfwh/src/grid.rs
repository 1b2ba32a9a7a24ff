//! Cartesian tensor grids with ghost layers, grid functions, and boundary
//! condition descriptors.
//!
//! A grid covers `[a_l, b_l]` with `N_l` cells per axis, spacing
//! `h_l = (b_l - a_l) / N_l`, and `n_g` ghost layers on every side
//! (one layer for second-order stencils, two for fourth-order).
//! Point coordinates are always reconstructed as `a + j*h` so that
//! index -> coordinate is exactly reproducible.

use crate::error::{MfwhError, Result};
use std::sync::Arc;

/// Boundary condition kind on a single face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

/// Grid faces in a fixed order: x-low, x-high, y-low, y-high.
/// 1D grids use only the first two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    XLow = 0,
    XHigh = 1,
    YLow = 2,
    YHigh = 3,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::XLow, Face::XHigh, Face::YLow, Face::YHigh];

    /// Axis this face bounds (0 = x, 1 = y).
    pub fn axis(self) -> usize {
        (self as usize) / 2
    }

    /// True for the low-coordinate side of the axis.
    pub fn is_low(self) -> bool {
        (self as usize) % 2 == 0
    }
}

/// Boundary condition: one kind per face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryCondition {
    kinds: [BcKind; 4],
}

impl BoundaryCondition {
    /// Same kind on every face.
    pub fn uniform(kind: BcKind) -> Self {
        Self { kinds: [kind; 4] }
    }

    pub fn dirichlet() -> Self {
        Self::uniform(BcKind::Dirichlet)
    }

    pub fn neumann() -> Self {
        Self::uniform(BcKind::Neumann)
    }

    pub fn per_face(kinds: [BcKind; 4]) -> Self {
        Self { kinds }
    }

    pub fn kind(&self, face: Face) -> BcKind {
        self.kinds[face as usize]
    }

    /// True when every face is Dirichlet.
    pub fn all_dirichlet(&self) -> bool {
        self.kinds.iter().all(|k| *k == BcKind::Dirichlet)
    }
}

/// Cartesian tensor grid in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    bounds: [(f64, f64); 2],
    cells: [usize; 2],
    spacing: [f64; 2],
    ghost: usize,
}

impl Grid {
    /// Build a grid for a stencil of the given order (2 or 4).
    ///
    /// Ghost width is 1 for order 2 and 2 for order 4. Each axis needs at
    /// least `4 * ghost` cells so that boundary closures never overlap.
    pub fn new(bounds: &[(f64, f64)], cells: &[usize], order: usize) -> Result<Self> {
        let ghost = ghost_width(order)?;
        let dim = bounds.len();
        if dim == 0 || dim > 2 || cells.len() != dim {
            return Err(MfwhError::Grid(format!(
                "expected 1 or 2 axes with matching cell counts, got {} bounds and {} cell counts",
                dim,
                cells.len()
            )));
        }
        let mut b = [(0.0, 0.0); 2];
        let mut n = [0usize; 2];
        let mut h = [0.0f64; 2];
        for l in 0..dim {
            let (a, bb) = bounds[l];
            if !(bb > a) || !a.is_finite() || !bb.is_finite() {
                return Err(MfwhError::Grid(format!(
                    "degenerate bounds ({a}, {bb}) on axis {l}"
                )));
            }
            if cells[l] < 4 * ghost {
                return Err(MfwhError::Grid(format!(
                    "axis {} needs at least {} cells for order {}, got {}",
                    l,
                    4 * ghost,
                    order,
                    cells[l]
                )));
            }
            b[l] = (a, bb);
            n[l] = cells[l];
            h[l] = (bb - a) / cells[l] as f64;
        }
        Ok(Self {
            dim,
            bounds: b,
            cells: n,
            spacing: h,
            ghost,
        })
    }

    /// Unit interval / unit square convenience constructor.
    pub fn unit(cells: &[usize], order: usize) -> Result<Self> {
        let bounds: Vec<(f64, f64)> = cells.iter().map(|_| (0.0, 1.0)).collect();
        Self::new(&bounds, cells, order)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.bounds[axis].0
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.bounds[axis].1
    }

    pub fn ghost(&self) -> usize {
        self.ghost
    }

    /// Number of non-ghost points along an axis (N_l + 1); 1 for an
    /// inactive axis of a 1D grid.
    pub fn points(&self, axis: usize) -> usize {
        if axis < self.dim {
            self.cells[axis] + 1
        } else {
            1
        }
    }

    /// Storage width along an axis including ghosts.
    pub fn padded(&self, axis: usize) -> usize {
        if axis < self.dim {
            self.cells[axis] + 1 + 2 * self.ghost
        } else {
            1
        }
    }

    /// Total stored values including ghosts.
    pub fn padded_len(&self) -> usize {
        self.padded(0) * self.padded(1)
    }

    /// Number of non-ghost points.
    pub fn n_all(&self) -> usize {
        self.points(0) * self.points(1)
    }

    /// Coordinate of point `j` on `axis` (j may be negative for ghosts).
    pub fn coord(&self, axis: usize, j: isize) -> f64 {
        self.bounds[axis].0 + j as f64 * self.spacing[axis]
    }

    /// Coordinates of the non-ghost point with indices (i, j).
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.coord(0, i as isize),
            if self.dim > 1 {
                self.coord(1, j as isize)
            } else {
                0.0
            },
        ]
    }

    /// Flat storage index of point (i, j); ghost indices are negative.
    #[inline]
    pub fn flat(&self, i: isize, j: isize) -> usize {
        let ng = self.ghost as isize;
        let row = if self.dim > 1 { (j + ng) as usize } else { 0 };
        row * self.padded(0) + (i + ng) as usize
    }

    /// True if the non-ghost point (i, j) lies on the boundary.
    pub fn on_boundary(&self, i: usize, j: usize) -> bool {
        i == 0
            || i == self.cells[0]
            || (self.dim > 1 && (j == 0 || j == self.cells[1]))
    }

    /// True if (i, j) lies on the given face.
    pub fn on_face(&self, i: usize, j: usize, face: Face) -> bool {
        match face {
            Face::XLow => i == 0,
            Face::XHigh => i == self.cells[0],
            Face::YLow => self.dim > 1 && j == 0,
            Face::YHigh => self.dim > 1 && j == self.cells[1],
        }
    }

    /// Faces that exist on this grid.
    pub fn faces(&self) -> &'static [Face] {
        if self.dim == 1 {
            &Face::ALL[..2]
        } else {
            &Face::ALL
        }
    }

    /// Iterate all non-ghost points as (i, j).
    pub fn iter_points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nx = self.points(0);
        let ny = self.points(1);
        (0..ny).flat_map(move |j| (0..nx).map(move |i| (i, j)))
    }
}

/// Ghost width required by a stencil order.
pub fn ghost_width(order: usize) -> Result<usize> {
    match order {
        2 => Ok(1),
        4 => Ok(2),
        _ => Err(MfwhError::Grid(format!(
            "unsupported order {order}; use 2 or 4"
        ))),
    }
}

/// Real-valued grid function stored over all points including ghosts,
/// row-major with x fastest.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.padded_len()],
        }
    }

    /// Evaluate `f` at every non-ghost point; ghosts start at zero.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64; 2]) -> f64) -> Self {
        let mut gf = Self::zeros(grid);
        for (i, j) in grid.iter_points() {
            let x = grid.point(i, j);
            gf[(i as isize, j as isize)] = f(&x);
        }
        gf
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        self.values[self.grid.flat(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, v: f64) {
        let k = self.grid.flat(i, j);
        self.values[k] = v;
    }

    fn assert_same_grid(&self, other: &Self) {
        assert!(
            self.grid.as_ref() == other.grid.as_ref(),
            "grid functions belong to different grids"
        );
    }

    /// self += a * other, over all stored values (ghosts included).
    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.assert_same_grid(other);
        crate::par::zip_apply(&mut self.values, &other.values, move |y, x| *y += a * x);
    }

    pub fn scale(&mut self, a: f64) {
        crate::par::apply(&mut self.values, move |y| *y *= a);
    }

    pub fn add(&mut self, other: &Self) {
        self.axpy(1.0, other);
    }

    pub fn fill(&mut self, v: f64) {
        self.values.fill(v);
    }

    /// Max-norm over non-ghost points.
    pub fn norm_inf(&self) -> f64 {
        let mut m = 0.0f64;
        for (i, j) in self.grid.iter_points() {
            m = m.max(self.get(i as isize, j as isize).abs());
        }
        m
    }

    /// Copy the non-ghost values of `other` into self (ghosts untouched).
    pub fn copy_interior_from(&mut self, other: &Self) {
        self.assert_same_grid(other);
        for (i, j) in self.grid.clone().iter_points() {
            self.set(i as isize, j as isize, other.get(i as isize, j as isize));
        }
    }
}

impl std::ops::Index<(isize, isize)> for GridFunction {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (isize, isize)) -> &f64 {
        &self.values[self.grid.flat(i, j)]
    }
}

impl std::ops::IndexMut<(isize, isize)> for GridFunction {
    #[inline]
    fn index_mut(&mut self, (i, j): (isize, isize)) -> &mut f64 {
        let k = self.grid.flat(i, j);
        &mut self.values[k]
    }
}
