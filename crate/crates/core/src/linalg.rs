//! Small dense-free linear algebra: tridiagonal solves and banded LU with
//! partial pivoting.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

/// Solves a tridiagonal system in place (Thomas algorithm, no pivoting).
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (`lower[0]` unused), `upper[i]`
/// multiplies `x[i+1]` (`upper[n-1]` unused). Intended for diagonally
/// dominant matrices.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::Dimension("tridiagonal bands must match rhs length".into()));
    }
    let mut c = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::Singular(0));
    }
    c[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 {
            return Err(Error::Singular(i));
        }
        c[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored
/// column-major with `kl` extra rows for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ld,
            data: vec![0.0; ld * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku + self.kl >= j && j + self.kl >= i);
        j * self.ld + self.kl + self.ku + i - j
    }

    /// True if `(i, j)` lies inside the declared band.
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += value;
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.n {
            self.add(i, i, value);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for (i, yi) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yi += self.data[self.idx(i, j)] * x[j];
            }
        }
        y
    }

    /// Factorizes in place (LAPACK `gbtf2` ordering).
    pub fn factorize(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Singular(k));
            }
            pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let kj = self.data[self.idx(k, j)];
                        let ij = self.idx(i, j);
                        self.data[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(BandLu { a: self, pivots })
    }
}

/// LU factors of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    a: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.a.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let a = &self.a;
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= a.data[a.idx(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= a.data[a.idx(k, j)] * b[j];
            }
            b[k] = s / a.data[a.idx(k, k)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Solves the bordered system
///
/// ```text
/// [ A    col ] [x]   [rhs]
/// [ row  corner ] [y] = [rhs_last]
/// ```
///
/// by block elimination on the factored `A` followed by one step of
/// iterative refinement, which keeps the solve accurate when `A` is close
/// to singular (as it is near a bifurcation point).
pub fn solve_bordered(
    a: &BandMatrix,
    lu: &BandLu,
    col: &[f64],
    row: &[f64],
    corner: f64,
    rhs: &[f64],
    rhs_last: f64,
) -> (Vec<f64>, f64) {
    let once = |r: &[f64], r_last: f64| -> (Vec<f64>, f64) {
        let z = lu.solve(col);
        let w = lu.solve(r);
        let denom = corner - dot(row, &z);
        let y = (r_last - dot(row, &w)) / denom;
        let x: Vec<f64> = w.iter().zip(&z).map(|(wi, zi)| wi - y * zi).collect();
        (x, y)
    };
    let (mut x, mut y) = once(rhs, rhs_last);
    let ax = a.mul_vec(&x);
    let res: Vec<f64> = rhs
        .iter()
        .zip(&ax)
        .zip(col)
        .map(|((r, axi), c)| r - axi - c * y)
        .collect();
    let res_last = rhs_last - dot(row, &x) - corner * y;
    let (dx, dy) = once(&res, res_last);
    x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
    y += dy;
    (x, y)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, rng: &mut ChaCha8Rng) -> BandMatrix {
        let mut m = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        m
    }

    #[test]
    fn banded_lu_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (5, 1, 1), (40, 3, 3), (33, 2, 4), (60, 0, 2)] {
            let m = random_band(n, kl, ku, &mut rng);
            let dense = nalgebra::DMatrix::from_fn(n, n, |i, j| m.get(i, j));
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let expected = dense.clone().lu().solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
            let x = m.clone().factorize().unwrap().solve(&b);
            for i in 0..n {
                assert!((x[i] - expected[i]).abs() < 1e-9 * (1.0 + expected[i].abs()), "n={n} i={i}");
            }
        }
    }

    #[test]
    fn pivoting_needed() {
        // zero leading diagonal forces a row swap
        let mut m = BandMatrix::zeros(3, 1, 1);
        m.set(0, 0, 0.0);
        m.set(0, 1, 1.0);
        m.set(1, 0, 2.0);
        m.set(1, 1, 1.0);
        m.set(1, 2, 1.0);
        m.set(2, 1, 1.0);
        m.set(2, 2, 3.0);
        let x = m.clone().factorize().unwrap().solve(&[1.0, 4.0, 7.0]);
        let r = m.mul_vec(&x);
        for (a, b) in r.iter().zip([1.0, 4.0, 7.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_detected() {
        let m = BandMatrix::zeros(4, 1, 1);
        assert_eq!(m.factorize().unwrap_err(), Error::Singular(0));
    }

    #[test]
    fn tridiagonal_solve() {
        let n = 50;
        let lower = vec![-1.0; n];
        let upper = vec![-1.0; n];
        let diag = vec![3.0; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = 3.0 * x_true[i];
                if i > 0 {
                    s -= x_true[i - 1];
                }
                if i + 1 < n {
                    s -= x_true[i + 1];
                }
                s
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut b).unwrap();
        for i in 0..n {
            assert!((b[i] - x_true[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn bordered_near_singular() {
        // A = diag(1, ..., 1, eps) with a border that makes the full system
        // well conditioned
        let n = 20;
        let eps = 1e-13;
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, if i == n - 1 { eps } else { 1.0 });
        }
        let lu = a.clone().factorize().unwrap();
        let mut col = vec![0.0; n];
        col[n - 1] = 1.0;
        let mut row = vec![0.0; n];
        row[n - 1] = 1.0;
        let rhs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let (x, y) = solve_bordered(&a, &lu, &col, &row, 0.0, &rhs, 2.0);
        // exact: x_i = i for i < n-1, x_{n-1} = 2, y = (n-1) - eps*2
        for i in 0..n - 1 {
            assert!((x[i] - i as f64).abs() < 1e-12);
        }
        assert!((x[n - 1] - 2.0).abs() < 1e-9);
        assert!((y - ((n - 1) as f64 - 2.0 * eps)).abs() < 1e-9);
    }
}
