//! Linear algebra kernels: banded LU, conjugate gradient, and GMRES.

pub mod banded;
pub mod cg;
pub mod gmres;
