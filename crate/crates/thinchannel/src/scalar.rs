use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the solvers are generic over.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Vec2<T> = [T; 2];
pub type Mat2<T> = [[T; 2]; 2];

pub fn dot<T: Real>(a: Vec2<T>, b: Vec2<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm<T: Real>(a: Vec2<T>) -> T {
    a[0].hypot(a[1])
}

pub fn mat_vec<T: Real>(m: &Mat2<T>, v: Vec2<T>) -> Vec2<T> {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Square root of a symmetric positive semidefinite 2x2 matrix.
pub fn sqrt_spd<T: Real>(m: &Mat2<T>) -> Mat2<T> {
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).max(T::zero());
    let s = det.sqrt();
    let t = (m[0][0] + m[1][1] + s + s).max(T::zero()).sqrt();
    if t == T::zero() {
        return [[T::zero(); 2]; 2];
    }
    [
        [(m[0][0] + s) / t, m[0][1] / t],
        [m[1][0] / t, (m[1][1] + s) / t],
    ]
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
pub fn sym_eigenvalues<T: Real>(m: &Mat2<T>) -> (T, T) {
    let half = T::c(0.5);
    let mean = (m[0][0] + m[1][1]) * half;
    let dev = ((m[0][0] - m[1][1]) * half).hypot(m[0][1]);
    (mean - dev, mean + dev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_spd_squares_back() {
        let m = [[2.0, 0.5], [0.5, 1.0]];
        let r = sqrt_spd(&m);
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| r[i][k] * r[k][j]).sum();
                assert!((v - m[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let (a, b) = sym_eigenvalues(&[[3.0f32, 0.0], [0.0, 1.0]]);
        assert_eq!((a, b), (1.0, 3.0));
    }
}
