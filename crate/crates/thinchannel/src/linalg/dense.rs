//! Small dense routines for the inf-sup and kernel-coercivity estimates.

use rayon::prelude::*;

use super::banded::BandedLu;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub n: usize,
    pub a: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(n: usize) -> Self {
        Dense { n, a: vec![T::zero(); n * n] }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        Dense { n, a: rows.iter().flat_map(|r| r.iter().copied()).collect() }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.a[i * self.n + j] = v;
    }

    /// Lower Cholesky factor.
    pub fn cholesky(&self) -> Result<Dense<T>> {
        let n = self.n;
        let mut l = Dense::zeros(n);
        for j in 0..n {
            let mut d = self.at(j, j);
            for k in 0..j {
                d = d - l.at(j, k) * l.at(j, k);
            }
            if !(d > T::zero()) {
                return Err(Error::Singular { block: "dense Cholesky".into(), row: j });
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in j + 1..n {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s = s - l.at(i, k) * l.at(j, k);
                }
                l.set(i, j, s / d);
            }
        }
        Ok(l)
    }

    /// Solves L y = b for lower-triangular self.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let mut y = b.to_vec();
        for i in 0..self.n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.at(i, k) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        y
    }

    /// Solves Lᵀ x = y for lower-triangular self.
    pub fn backward_transposed(&self, y: &[T]) -> Vec<T> {
        let mut x = y.to_vec();
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in i + 1..self.n {
                s = s - self.at(k, i) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }

    /// Eigenvalues of a symmetric matrix, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        let (d, e) = tridiagonalize(self);
        tridiagonal_ql(d, e)
    }
}

/// Largest total size (velocity + pressure DOFs) accepted by the dense inf-sup estimate.
pub const INFSUP_MAX_DOFS: usize = 5000;

/// Smallest singular value of M_p^{-1/2} B M_v^{-1/2}, i.e. the square root of the
/// smallest generalized eigenvalue of B M_v⁻¹ Bᵀ x = λ M_p x.
pub fn scaled_min_singular_value<T: Real>(b: &CsrMatrix<T>, m_v: &CsrMatrix<T>, m_p: &CsrMatrix<T>) -> Result<T> {
    let (np, nv) = (b.nrows, b.ncols);
    if nv + np > INFSUP_MAX_DOFS {
        return Err(Error::Size(format!("{} DOFs exceed the dense inf-sup limit of {INFSUP_MAX_DOFS}", nv + np)));
    }
    if m_v.nrows != nv || m_p.nrows != np {
        return Err(Error::Structure("norm matrices do not match the blocks of B".into()));
    }
    let lu = BandedLu::factor(m_v, false)?;
    let bt = b.transpose();
    // columns of M_v⁻¹ Bᵀ
    let cols: Vec<Vec<T>> = (0..np)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![T::zero(); np];
            e[j] = T::one();
            lu.solve(&bt.mul_vec(&e))
        })
        .collect();
    let mut s = Dense::zeros(np);
    for (j, col) in cols.iter().enumerate() {
        let bc = b.mul_vec(col);
        for i in 0..np {
            s.set(i, j, bc[i]);
        }
    }
    let l = Dense::from_rows(&m_p.to_dense()).cholesky()?;
    // C = L⁻¹ S L⁻ᵀ
    let mut tmp = Dense::zeros(np);
    for j in 0..np {
        let col: Vec<T> = (0..np).map(|i| s.at(i, j)).collect();
        for (i, v) in l.forward(&col).into_iter().enumerate() {
            tmp.set(i, j, v);
        }
    }
    let mut c = Dense::zeros(np);
    for i in 0..np {
        let row: Vec<T> = (0..np).map(|j| tmp.at(i, j)).collect();
        for (j, v) in l.forward(&row).into_iter().enumerate() {
            c.set(i, j, v);
        }
    }
    for i in 0..np {
        for j in 0..i {
            let avg = (c.at(i, j) + c.at(j, i)) * T::c(0.5);
            c.set(i, j, avg);
            c.set(j, i, avg);
        }
    }
    let ev = c.symmetric_eigenvalues();
    Ok(ev.first().copied().unwrap_or(T::zero()).max(T::zero()).sqrt())
}

/// Householder reduction of a symmetric matrix to tridiagonal form: (diagonal, off-diagonal).
fn tridiagonalize<T: Real>(m: &Dense<T>) -> (Vec<T>, Vec<T>) {
    let n = m.n;
    let mut a = m.a.clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    let two = T::c(2.0);
    for k in 0..n.saturating_sub(2) {
        // Householder vector annihilating a[k+2.., k]
        let mut alpha = T::zero();
        for i in k + 1..n {
            alpha = alpha + a[i * n + k] * a[i * n + k];
        }
        alpha = alpha.sqrt();
        if alpha == T::zero() {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        if x0 > T::zero() {
            alpha = -alpha;
        }
        let mut v = vec![T::zero(); n];
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = a[i * n + k];
        }
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        // A ← H A H with H = I − 2 v vᵀ / (vᵀv)
        let mut p = vec![T::zero(); n];
        for i in k..n {
            let mut s = T::zero();
            for j in k + 1..n {
                s = s + a[i * n + j] * v[j];
            }
            p[i] = two * s / vnorm2;
        }
        let kc: T = (k + 1..n).map(|i| v[i] * p[i]).sum::<T>() / vnorm2;
        for i in k..n {
            p[i] = p[i] - kc * v[i];
        }
        for i in k..n {
            for j in k..n {
                a[i * n + j] = a[i * n + j] - v[i] * p[j] - p[i] * v[j];
            }
        }
    }
    for i in 0..n {
        d[i] = a[i * n + i];
        if i + 1 < n {
            e[i] = a[(i + 1) * n + i];
        }
    }
    (d, e)
}

/// Implicit QL iteration on a symmetric tridiagonal matrix; eigenvalues ascending.
fn tridiagonal_ql<T: Real>(mut d: Vec<T>, mut e: Vec<T>) -> Vec<T> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (T::c(2.0) * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = T::zero();
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + T::c(2.0) * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d
}
