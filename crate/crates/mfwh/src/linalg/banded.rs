//! Banded matrix storage and LU factorization with partial pivoting.
//!
//! Storage follows the LAPACK `dgbtrf` convention: a matrix with `kl`
//! sub-diagonals and `ku` super-diagonals is kept column-wise in a
//! `(2*kl + ku + 1) x n` panel so that row interchanges during the
//! factorization have room for fill-in (U widens to `kl + ku`
//! super-diagonals).

use crate::error::{MfwhError, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    /// Column-major band panel: entry (i, j) at `ab[j*ldab + kl + ku + i - j]`.
    ab: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let d = i as isize - j as isize;
        if d > self.kl as isize || d < -(self.ku as isize) {
            return None;
        }
        Some(j * self.ldab + (self.kl as isize + self.ku as isize + d) as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.ab[s])
    }

    /// Add `v` to entry (i, j); the entry must lie inside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) outside band kl={} ku={}", self.kl, self.ku));
        self.ab[s] += v;
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let xj = x[j];
            for i in lo..=hi {
                y[i] += self.get(i, j) * xj;
            }
        }
    }

    /// Largest absolute row sum (infinity norm); also the Gershgorin
    /// spectral-radius bound for the matrix.
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0f64; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                sums[i] += self.get(i, j).abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Entrywise max |A - A^T| over the band.
    pub fn asymmetry(&self) -> f64 {
        let mut dev = 0.0f64;
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                dev = dev.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        dev
    }

    /// Factor in place with partial pivoting.
    pub fn lu(mut self) -> Result<BandedLu> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let mut ipiv = vec![0usize; n];
        let scale = self.norm_inf().max(f64::MIN_POSITIVE);
        for j in 0..n {
            // pivot search in column j, rows j..=j+kl
            let imax = (j + kl).min(n - 1);
            let mut p = j;
            let mut pmax = self.ab[j * ldab + kl + ku].abs();
            for i in (j + 1)..=imax {
                let v = self.ab[j * ldab + (kl + ku + i - j)].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax <= scale * 1e-14 {
                return Err(MfwhError::LinearSolve(format!(
                    "banded LU pivot {pmax:.3e} at column {j} (matrix numerically singular)"
                )));
            }
            ipiv[j] = p;
            let jmax = (j + kl + ku).min(n - 1);
            if p != j {
                for k in j..=jmax {
                    let sj = k * ldab + (kl as isize + ku as isize + j as isize - k as isize) as usize;
                    let sp = k * ldab + (kl as isize + ku as isize + p as isize - k as isize) as usize;
                    self.ab.swap(sj, sp);
                }
            }
            let piv = self.ab[j * ldab + kl + ku];
            for i in (j + 1)..=imax {
                let s = j * ldab + (kl + ku + i - j);
                let m = self.ab[s] / piv;
                self.ab[s] = m;
                if m != 0.0 {
                    for k in (j + 1)..=jmax {
                        let skj = k * ldab
                            + (kl as isize + ku as isize + j as isize - k as isize) as usize;
                        let ski = k * ldab
                            + (kl as isize + ku as isize + i as isize - k as isize) as usize;
                        self.ab[ski] -= m * self.ab[skj];
                    }
                }
            }
        }
        Ok(BandedLu {
            mat: self,
            ipiv,
        })
    }
}

/// LU factorization of a banded matrix; reusable for many right-hand sides.
#[derive(Debug, Clone)]
pub struct BandedLu {
    mat: BandedMatrix,
    ipiv: Vec<usize>,
}

impl BandedLu {
    pub fn n(&self) -> usize {
        self.mat.n
    }

    /// Solve A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku, ldab) = (self.mat.n, self.mat.kl, self.mat.ku, self.mat.ldab);
        assert_eq!(b.len(), n);
        let ab = &self.mat.ab;
        // L solve (unit diagonal, with pivoting)
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                let imax = (j + kl).min(n - 1);
                for i in (j + 1)..=imax {
                    b[i] -= ab[j * ldab + (kl + ku + i - j)] * bj;
                }
            }
        }
        // U solve (bandwidth kl + ku)
        for j in (0..n).rev() {
            let mut s = b[j];
            let kmax = (j + kl + ku).min(n - 1);
            for k in (j + 1)..=kmax {
                s -= ab[k * ldab + (kl as isize + ku as isize + j as isize - k as isize) as usize]
                    * b[k];
            }
            b[j] = s / ab[j * ldab + kl + ku];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, ku: usize, rng: &mut ChaCha8Rng) -> BandedMatrix {
        let mut a = BandedMatrix::zeros(n, kl, ku);
        for j in 0..n {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl).min(n - 1);
            for i in lo..=hi {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a.add(i, j, if i == j { v + 4.0 } else { v });
            }
        }
        a
    }

    #[test]
    fn lu_solves_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1usize, 0usize, 0usize), (5, 1, 1), (40, 3, 2), (80, 5, 9)] {
            let a = random_banded(n, kl, ku, &mut rng);
            let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut b = vec![0.0; n];
            a.matvec(&x_true, &mut b);
            let lu = a.clone().lu().unwrap();
            let x = lu.solve(&b);
            let err = x
                .iter()
                .zip(&x_true)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0f64, f64::max);
            assert!(err < 1e-11, "n={n} kl={kl} ku={ku}: err={err:.3e}");
        }
    }

    #[test]
    fn tridiagonal_dirichlet_laplacian() {
        // (1/h^2) tridiag(1,-2,1), h = 1/4, N = 4 -> 3 unknowns
        let h = 0.25;
        let mut a = BandedMatrix::zeros(3, 1, 1);
        for i in 0..3 {
            a.add(i, i, -2.0 / (h * h));
            if i > 0 {
                a.add(i, i - 1, 1.0 / (h * h));
            }
            if i < 2 {
                a.add(i, i + 1, 1.0 / (h * h));
            }
        }
        assert_eq!(a.get(0, 0), -32.0);
        assert_eq!(a.get(1, 0), 16.0);
        assert_eq!(a.get(0, 2), 0.0);
        assert!(a.asymmetry() < 1e-15);
    }

    #[test]
    fn singular_matrix_rejected() {
        let mut a = BandedMatrix::zeros(3, 1, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        // third row/column all zero
        assert!(a.lu().is_err());
    }

    #[test]
    fn indefinite_pivoted_solve() {
        // Helmholtz-like shifted operator: tridiagonal with sign changes.
        let n = 60;
        let h = 1.0 / (n as f64 + 1.0);
        let omega2 = 450.0; // above several eigenvalues of -d^2/dx^2
        let mut a = BandedMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.add(i, i, -2.0 / (h * h) + omega2);
            if i > 0 {
                a.add(i, i - 1, 1.0 / (h * h));
            }
            if i < n - 1 {
                a.add(i, i + 1, 1.0 / (h * h));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut b = vec![0.0; n];
        a.matvec(&x_true, &mut b);
        let x = a.clone().lu().unwrap().solve(&b);
        let err = x
            .iter()
            .zip(&x_true)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-9, "err={err:.3e}");
    }
}
