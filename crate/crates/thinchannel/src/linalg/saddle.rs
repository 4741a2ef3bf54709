//! Saddle-point systems [[A, Bᵀ], [−B, 0]] [u; p] = [f; g].

use super::banded::{solve_refined, BandedLu};
use super::sparse::{dot, norm2, CsrMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct SaddleSolution<T> {
    pub u: Vec<T>,
    pub p: Vec<T>,
    /// ‖K x − rhs‖ / ‖rhs‖ (absolute when rhs = 0).
    pub relative_residual: T,
    pub pivot_growth: T,
    pub pivot_ratio: T,
}

pub fn saddle_matrix<T: Real>(a: &CsrMatrix<T>, b: &CsrMatrix<T>) -> Result<CsrMatrix<T>> {
    let bt = b.transpose();
    let nb = b.scale(-T::one());
    CsrMatrix::block(&[vec![Some(a), Some(&bt)], vec![Some(&nb), None]], &[a.nrows, b.nrows], &[a.ncols, b.nrows])
}

/// Names the block a global row of the saddle system falls in.
pub type BlockNamer<'a> = &'a dyn Fn(usize) -> (String, usize);

/// Direct solve with partial pivoting and one refinement step.
pub fn solve_saddle<T: Real>(a: &CsrMatrix<T>, b: &CsrMatrix<T>, f: &[T], g: &[T], namer: BlockNamer<'_>) -> Result<SaddleSolution<T>> {
    let k = saddle_matrix(a, b)?;
    let rhs: Vec<T> = f.iter().chain(g).copied().collect();
    let lu = match BandedLu::factor(&k, true) {
        Ok(lu) => lu,
        Err(Error::Singular { row, .. }) => {
            let (block, local) = namer(row);
            return Err(Error::Singular { block, row: local });
        }
        Err(e) => return Err(e),
    };
    let x = solve_refined(&k, &lu, &rhs);
    let r: Vec<T> = k.mul_vec(&x).iter().zip(&rhs).map(|(&kx, &bi)| kx - bi).collect();
    let rn = norm2(&rhs);
    let relative_residual = if rn > T::zero() { norm2(&r) / rn } else { norm2(&r) };
    let (u, p) = x.split_at(a.nrows);
    Ok(SaddleSolution { u: u.to_vec(), p: p.to_vec(), relative_residual, pivot_growth: lu.pivot_growth, pivot_ratio: lu.pivot_ratio })
}

/// Uzawa iteration accelerated by conjugate gradients on the pressure Schur
/// complement B A⁻¹ Bᵀ; A must be symmetric positive definite.
pub fn uzawa_cg<T: Real>(a: &CsrMatrix<T>, b: &CsrMatrix<T>, f: &[T], g: &[T], tol: T, max_iter: usize) -> Result<(Vec<T>, Vec<T>, usize)> {
    let lu = BandedLu::factor(a, false)?;
    let bt = b.transpose();
    let schur = |p: &[T]| -> Vec<T> { b.mul_vec(&lu.solve(&bt.mul_vec(p))) };
    let u0 = lu.solve(f);
    // S p = g + B A⁻¹ f
    let rhs: Vec<T> = b.mul_vec(&u0).iter().zip(g).map(|(&x, &y)| x + y).collect();
    let mut p = vec![T::zero(); b.nrows];
    let mut r = rhs.clone();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    let stop = tol * norm2(&rhs).max(T::min_positive_value());
    let mut it = 0;
    while rr.sqrt() > stop && it < max_iter {
        let sd = schur(&d);
        let alpha = rr / dot(&d, &sd);
        for i in 0..p.len() {
            p[i] = p[i] + alpha * d[i];
            r[i] = r[i] - alpha * sd[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..d.len() {
            d[i] = r[i] + beta * d[i];
        }
        it += 1;
    }
    if rr.sqrt() > stop {
        return Err(Error::Conditioning(format!("Uzawa-CG did not converge in {max_iter} iterations")));
    }
    let btp = bt.mul_vec(&p);
    let u = lu.solve(&f.iter().zip(&btp).map(|(&x, &y)| x - y).collect::<Vec<_>>());
    Ok((u, p, it))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (CsrMatrix<f64>, CsrMatrix<f64>) {
        let a = CsrMatrix::from_dense(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let b = CsrMatrix::from_dense(&[vec![1.0, -1.0, 0.0], vec![0.0, 1.0, 1.0]]);
        (a, b)
    }

    #[test]
    fn direct_and_uzawa_agree() {
        let (a, b) = toy();
        let f = [1.0, 2.0, 3.0];
        let g = [0.5, -1.0];
        let s = solve_saddle(&a, &b, &f, &g, &|r| ("all".into(), r)).unwrap();
        assert!(s.relative_residual < 1e-14);
        let (u, p, _) = uzawa_cg(&a, &b, &f, &g, 1e-14, 50).unwrap();
        for (x, y) in s.u.iter().zip(&u).chain(s.p.iter().zip(&p)) {
            assert!((x - y).abs() < 1e-12);
        }
        // second row block: −B u = g
        let bu = b.mul_vec(&s.u);
        assert!((bu[0] + 0.5).abs() < 1e-13 && (bu[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn singular_rows_are_named() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let b = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![2.0, 0.0]]);
        let err = solve_saddle(&a, &b, &[0.0; 2], &[0.0; 2], &|r| if r < 2 { ("u".into(), r) } else { ("p".into(), r - 2) }).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }
}
