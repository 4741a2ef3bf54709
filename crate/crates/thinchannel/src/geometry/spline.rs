use crate::error::{Error, Result};
use crate::scalar::Real;

/// Natural cubic spline through a table of knots.
#[derive(Clone, Debug)]
pub struct CubicSpline<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    // second derivatives at the knots
    m: Vec<T>,
}

impl<T> CubicSpline<T> {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

impl<T: Real> CubicSpline<T> {
    pub fn new(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        let n = xs.len();
        if n != ys.len() {
            return Err(Error::InvalidChart(format!("table has {} x values but {} z values", n, ys.len())));
        }
        if n < 4 {
            return Err(Error::InvalidChart(format!("spline table needs at least 4 knots, got {n}")));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidChart("table contains non-finite values".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidChart("table x values must be strictly increasing".into()));
        }
        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        let two = T::c(2.0);
        let six = T::c(6.0);
        let mut m = vec![T::zero(); n];
        let k = n - 2;
        let mut diag = vec![T::zero(); k];
        let mut rhs = vec![T::zero(); k];
        let mut sub = vec![T::zero(); k];
        let mut sup = vec![T::zero(); k];
        for j in 0..k {
            let i = j + 1;
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            sub[j] = h0;
            diag[j] = two * (h0 + h1);
            sup[j] = h1;
            rhs[j] = six * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
        }
        for j in 1..k {
            let w = sub[j] / diag[j - 1];
            diag[j] = diag[j] - w * sup[j - 1];
            rhs[j] = rhs[j] - w * rhs[j - 1];
        }
        for j in (0..k).rev() {
            let next = if j + 1 < k { m[j + 2] } else { T::zero() };
            m[j + 1] = (rhs[j] - sup[j] * next) / diag[j];
        }
        Ok(CubicSpline { xs, ys, m })
    }

    pub fn range(&self) -> (T, T) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn knots(&self) -> (&[T], &[T]) {
        (&self.xs, &self.ys)
    }

    /// Value, first and second derivative at `x` (clamped to the table range).
    pub fn eval(&self, x: T) -> [T; 3] {
        let n = self.xs.len();
        let (lo, hi) = self.range();
        let x = x.max(lo).min(hi);
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        let six = T::c(6.0);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let value = a * self.ys[i] + b * self.ys[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / six;
        let slope = (self.ys[i + 1] - self.ys[i]) / h
            + (-(T::c(3.0) * a * a - T::one()) * m0 + (T::c(3.0) * b * b - T::one()) * m1) * h / six;
        let curvature = a * m0 + b * m1;
        [value, slope, curvature]
    }
}
