//! Thin data-parallel helpers. With the `parallel` feature (default) the
//! loops run on rayon; without it they fall back to sequential code.
//!
//! Only embarrassingly parallel element/row maps go through here. Reductions
//! (dot products, norms) stay sequential everywhere so results are bitwise
//! reproducible regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Minimum slice length before fanning out to threads.
const PAR_MIN: usize = 4096;

/// Apply `f` to every element of `y`.
pub fn apply<F>(y: &mut [f64], f: F)
where
    F: Fn(&mut f64) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if y.len() >= PAR_MIN {
            y.par_iter_mut().for_each(f);
            return;
        }
    }
    y.iter_mut().for_each(f);
}

/// Apply `f(y_i, x_i)` over two equal-length slices.
pub fn zip_apply<F>(y: &mut [f64], x: &[f64], f: F)
where
    F: Fn(&mut f64, f64) + Sync + Send,
{
    assert_eq!(y.len(), x.len());
    #[cfg(feature = "parallel")]
    {
        if y.len() >= PAR_MIN {
            y.par_iter_mut()
                .zip(x.par_iter())
                .for_each(|(yi, xi)| f(yi, *xi));
            return;
        }
    }
    y.iter_mut().zip(x.iter()).for_each(|(yi, xi)| f(yi, *xi));
}

/// Run `f(j, row_j)` over disjoint rows of `data`, where row `j` is
/// `data[j*row_len .. (j+1)*row_len]`.
pub fn for_each_row<F>(data: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if data.len() >= PAR_MIN && data.len() / row_len > 1 {
            data.par_chunks_mut(row_len)
                .enumerate()
                .for_each(|(j, row)| f(j, row));
            return;
        }
    }
    data.chunks_mut(row_len)
        .enumerate()
        .for_each(|(j, row)| f(j, row));
}

/// Sequential variants, always compiled; the criterion bench compares these
/// against the parallel dispatch above.
pub mod seq {
    pub fn apply<F: Fn(&mut f64)>(y: &mut [f64], f: F) {
        y.iter_mut().for_each(f);
    }

    pub fn zip_apply<F: Fn(&mut f64, f64)>(y: &mut [f64], x: &[f64], f: F) {
        assert_eq!(y.len(), x.len());
        y.iter_mut().zip(x.iter()).for_each(|(yi, xi)| f(yi, *xi));
    }

    pub fn for_each_row<F: Fn(usize, &mut [f64])>(data: &mut [f64], row_len: usize, f: F) {
        data.chunks_mut(row_len)
            .enumerate()
            .for_each(|(j, row)| f(j, row));
    }
}
