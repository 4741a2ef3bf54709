use crate::error::{Error, Result};
use crate::scalar::Real;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), data: vec![T::one(); n] }
    }

    /// Sums duplicate entries; the summation order is the order of `triplets`, so
    /// equal inputs give bit-identical matrices.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            debug_assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        let mut order: Vec<usize> = Vec::new();
        for r in 0..nrows {
            let (lo, hi) = (counts[r], counts[r + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_by_key(|&k| cols[k]);
            let mut last = usize::MAX;
            for &k in &order {
                if cols[k] == last {
                    let d = data.len() - 1;
                    data[d] = data[d] + vals[k];
                } else {
                    indices.push(cols[k]);
                    data.push(vals[k]);
                    last = cols[k];
                }
            }
            indptr[r + 1] = indices.len();
        }
        CsrMatrix { nrows, ncols, indptr, indices, data }
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &t)
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        match self.indices[lo..hi].binary_search(&j) {
            Ok(k) => self.data[lo + k],
            Err(_) => T::zero(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out[i][j] = v;
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).fold(T::zero(), |acc, (j, v)| acc + v * x[j])).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push((j, i, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = *v * s);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::Structure(format!(
                "cannot add {}x{} and {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut t = self.triplets();
        t.extend(other.triplets());
        Ok(Self::from_triplets(self.nrows, self.ncols, &t))
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push((i, j, v));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::Structure(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut acc = vec![T::zero(); other.ncols];
        let mut used = vec![false; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for i in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !used[j] {
                        used[j] = true;
                        cols.push(j);
                    }
                    acc[j] = acc[j] + a * b;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                indices.push(j);
                data.push(acc[j]);
                acc[j] = T::zero();
                used[j] = false;
            }
            indptr[i + 1] = indices.len();
        }
        Ok(CsrMatrix { nrows: self.nrows, ncols: other.ncols, indptr, indices, data })
    }

    /// Largest |M_ij − M_ji|.
    pub fn max_asymmetry(&self) -> T {
        let t = self.transpose();
        let mut worst = T::zero();
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - t.get(i, j)).abs());
            }
            for (j, v) in t.row(i) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Rows `rows` and columns `cols` (both given as index lists).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = Vec::new();
        for (ri, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                if col_map[j] != usize::MAX {
                    t.push((ri, col_map[j], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), &t)
    }

    /// Block matrix from a grid of optional blocks with the given row/column sizes.
    pub fn block(grid: &[Vec<Option<&CsrMatrix<T>>>], row_sizes: &[usize], col_sizes: &[usize]) -> Result<Self> {
        let mut t = Vec::new();
        let mut r0 = 0;
        for (bi, row) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (bj, blk) in row.iter().enumerate() {
                if let Some(m) = blk {
                    if m.nrows != row_sizes[bi] || m.ncols != col_sizes[bj] {
                        return Err(Error::Structure(format!(
                            "block ({bi}, {bj}) is {}x{}, expected {}x{}",
                            m.nrows, m.ncols, row_sizes[bi], col_sizes[bj]
                        )));
                    }
                    for (i, j, v) in m.triplets() {
                        t.push((r0 + i, c0 + j, v));
                    }
                }
                c0 += col_sizes[bj];
            }
            r0 += row_sizes[bi];
        }
        Ok(Self::from_triplets(row_sizes.iter().sum(), col_sizes.iter().sum(), &t))
    }
}

pub fn norm2<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, &x| a + x * x).sqrt()
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 2.0), (0, 2, 3.0), (0, 0, -1.0)]);
        assert_eq!(m.to_dense(), vec![vec![-1.0, 0.0, 4.0], vec![2.0, 0.0, 0.0]]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 2.0]);
    }

    #[test]
    fn products_and_transposes() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0], vec![4.0, 0.0]]);
        let b = CsrMatrix::from_dense(&[vec![1.0, 0.0, 1.0], vec![0.0, 2.0, 0.0]]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.to_dense(), vec![vec![1.0, 4.0, 1.0], vec![0.0, 6.0, 0.0], vec![4.0, 0.0, 4.0]]);
        assert_eq!(a.transpose().to_dense(), vec![vec![1.0, 0.0, 4.0], vec![2.0, 3.0, 0.0]]);
        assert!(a.matmul(&a).is_err());
        assert_eq!(c.max_asymmetry(), 4.0);
        let s = a.transpose().matmul(&a).unwrap();
        assert_eq!(s.max_asymmetry(), 0.0);
    }

    #[test]
    fn blocks_and_selection() {
        let a = CsrMatrix::<f64>::identity(2);
        let b = CsrMatrix::from_dense(&[vec![5.0, 6.0]]);
        let bt = b.transpose();
        let k = CsrMatrix::block(&[vec![Some(&a), Some(&bt)], vec![Some(&b), None]], &[2, 1], &[2, 1]).unwrap();
        assert_eq!(k.to_dense(), vec![vec![1.0, 0.0, 5.0], vec![0.0, 1.0, 6.0], vec![5.0, 6.0, 0.0]]);
        assert_eq!(k.select(&[2], &[0, 1]).to_dense(), vec![vec![5.0, 6.0]]);
        assert!(CsrMatrix::block(&[vec![Some(&b)]], &[2], &[2]).is_err());
    }
}
