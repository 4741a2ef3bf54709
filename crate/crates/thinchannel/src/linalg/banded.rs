use super::ordering::{adjacency, bandwidth, reverse_cuthill_mckee};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Banded LU factorization with partial pivoting of a reordered sparse matrix.
#[derive(Clone, Debug)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<T>,
    ipiv: Vec<usize>,
    perm: Vec<usize>,
    /// max |U_ij| / max |A_ij|
    pub pivot_growth: T,
    /// min |U_jj| / max |U_jj|
    pub pivot_ratio: T,
}

impl<T: Real> BandedLu<T> {
    /// Factors `m` after a reverse Cuthill–McKee reordering. A zero pivot is
    /// reported with its original row index.
    pub fn factor(m: &CsrMatrix<T>, pivoting: bool) -> Result<Self> {
        if m.nrows != m.ncols {
            return Err(Error::Structure(format!("cannot factor a {}x{} matrix", m.nrows, m.ncols)));
        }
        let n = m.nrows;
        let perm = reverse_cuthill_mckee(&adjacency(m));
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (kl, ku0) = bandwidth(m, &perm);
        let ku = if pivoting { ku0 + kl } else { ku0 };
        let ld = kl + ku + 1;
        let mut ab = vec![T::zero(); ld * n.max(1)];
        let mut amax = T::zero();
        for i in 0..n {
            for (j, v) in m.row(i) {
                let (r, c) = (inv[i], inv[j]);
                ab[c * ld + ku + r - c] = ab[c * ld + ku + r - c] + v;
                amax = amax.max(v.abs());
            }
        }
        let mut lu = BandedLu { n, kl, ku, ld, ab, ipiv: (0..n).collect(), perm, pivot_growth: T::one(), pivot_ratio: T::one() };
        lu.eliminate(pivoting, amax)?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ld + self.ku + i - j
    }

    fn eliminate(&mut self, pivoting: bool, amax: T) -> Result<()> {
        let n = self.n;
        let tiny = amax * T::epsilon() * T::c(1e-3);
        let mut umax = T::zero();
        let (mut dmin, mut dmax) = (T::infinity(), T::zero());
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let ju = (j + self.ku).min(n - 1);
            let mut p = 0;
            if pivoting {
                let mut best = T::zero();
                for t in 0..=km {
                    let v = self.ab[self.idx(j + t, j)].abs();
                    if v > best {
                        best = v;
                        p = t;
                    }
                }
            }
            self.ipiv[j] = j + p;
            let piv = self.ab[self.idx(j + p, j)];
            if piv.abs() <= tiny || !piv.is_finite() {
                return Err(Error::Singular { block: String::new(), row: self.perm[j] });
            }
            if p != 0 {
                for c in j..=ju {
                    let (a, b) = (self.idx(j, c), self.idx(j + p, c));
                    self.ab.swap(a, b);
                }
            }
            let d = self.ab[self.idx(j, j)];
            dmin = dmin.min(d.abs());
            dmax = dmax.max(d.abs());
            for t in 1..=km {
                let k = self.idx(j + t, j);
                self.ab[k] = self.ab[k] / d;
            }
            let col_j = j * self.ld + self.ku - j;
            for c in j + 1..=ju {
                let a = self.ab[self.idx(j, c)];
                umax = umax.max(a.abs());
                if a == T::zero() {
                    continue;
                }
                let col_c = c * self.ld + self.ku - c;
                for t in 1..=km {
                    let r = j + t;
                    self.ab[col_c + r] = self.ab[col_c + r] - self.ab[col_j + r] * a;
                }
            }
        }
        umax = umax.max(dmax);
        self.pivot_growth = if amax > T::zero() { umax / amax } else { T::one() };
        self.pivot_ratio = if dmax > T::zero() { dmin / dmax } else { T::one() };
        Ok(())
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
            let km = self.kl.min(n - 1 - j);
            let xj = x[j];
            if xj != T::zero() {
                for t in 1..=km {
                    x[j + t] = x[j + t] - self.ab[self.idx(j + t, j)] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] = x[j] / self.ab[self.idx(j, j)];
            let xj = x[j];
            let lo = j.saturating_sub(self.ku);
            for i in lo..j {
                x[i] = x[i] - self.ab[self.idx(i, j)] * xj;
            }
        }
        let mut out = vec![T::zero(); n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    /// Diagonal of U (in the reordered numbering).
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|j| self.ab[self.idx(j, j)]).collect()
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}

/// Solve with a direct factorization and one step of iterative refinement.
pub fn solve_refined<T: Real>(m: &CsrMatrix<T>, lu: &BandedLu<T>, b: &[T]) -> Vec<T> {
    let mut x = lu.solve(b);
    let r: Vec<T> = m.mul_vec(&x).iter().zip(b).map(|(&ax, &bi)| bi - ax).collect();
    let dx = lu.solve(&r);
    for (xi, di) in x.iter_mut().zip(dx) {
        *xi = *xi + di;
    }
    x
}

/// True when the symmetric matrix `m` + shift·I admits an unpivoted LU with
/// positive pivots, i.e. `m` is positive semidefinite up to `shift`.
pub fn is_positive_semidefinite<T: Real>(m: &CsrMatrix<T>, shift: T) -> bool {
    let shifted = m.add(&CsrMatrix::identity(m.nrows).scale(shift)).expect("square");
    match BandedLu::factor(&shifted, false) {
        Ok(lu) => lu.diagonal().iter().all(|&d| d > T::zero()),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn solves_tridiagonal_system() {
        let m = laplacian(50);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = m.mul_vec(&x_true);
        let lu = BandedLu::factor(&m, true).unwrap();
        let x = lu.solve(&b);
        for (a, e) in x.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn pivots_through_zero_diagonal() {
        // saddle point [[1, 1], [1, 0]]
        let m = CsrMatrix::<f64>::from_dense(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 2.0], vec![0.0, 2.0, 1.0]]);
        let lu = BandedLu::factor(&m, true).unwrap();
        let x = lu.solve(&[1.0, 3.0, 3.0]);
        let r = m.mul_vec(&x);
        for (a, b) in r.iter().zip([1.0, 3.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn reports_singular_rows() {
        let m = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(BandedLu::factor(&m, true), Err(Error::Singular { .. })));
    }

    #[test]
    fn semidefiniteness_check() {
        assert!(is_positive_semidefinite(&laplacian(10), 1e-12));
        let indefinite = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(!is_positive_semidefinite(&indefinite, 1e-12));
        let singular = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(is_positive_semidefinite(&singular, 1e-12));
    }

    #[test]
    fn random_nonsymmetric_system() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n: usize = 40;
        let mut t = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(3)..(i + 4).min(n) {
                t.push((i, j, rng.gen_range(-1.0f64..1.0)));
            }
        }
        let m = CsrMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let lu = BandedLu::factor(&m, true).unwrap();
        let x = solve_refined(&m, &lu, &b);
        let r = m.mul_vec(&x);
        for (a, e) in r.iter().zip(&b) {
            assert!((a - e).abs() < 1e-10);
        }
    }
}
