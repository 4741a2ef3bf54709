use std::fmt;
use std::sync::Arc;

use crate::discretization::Mesh;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::scalar::{sqrt_spd, sym_eigenvalues, Mat2, Real};

type Callback<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// A scalar datum of position: constant, parsed expression or closure.
#[derive(Clone)]
pub enum Source<T> {
    Const(T),
    Expr(Arc<Expr>),
    Func(Callback<T>),
}

impl<T: Real> Source<T> {
    pub fn expr(src: &str) -> Result<Self> {
        Ok(Source::Expr(Arc::new(Expr::parse(src)?)))
    }

    pub fn func(f: impl Fn(T, T) -> T + Send + Sync + 'static) -> Self {
        Source::Func(Arc::new(f))
    }

    pub fn eval(&self, x: T, z: T) -> T {
        match self {
            Source::Const(c) => *c,
            Source::Expr(e) => e.eval(x, z),
            Source::Func(f) => f(x, z),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Source::Const(c) if *c == T::zero())
    }

    pub fn scaled(&self, s: T) -> Self {
        match self {
            Source::Const(c) => Source::Const(*c * s),
            other => {
                let inner = other.clone();
                Source::func(move |x, z| s * inner.eval(x, z))
            }
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Source<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Const(c) => write!(f, "{c:?}"),
            Source::Expr(e) => write!(f, "`{e}`"),
            Source::Func(_) => write!(f, "<fn>"),
        }
    }
}

/// Symmetric tensor field Q from its three independent entries.
#[derive(Clone, Debug)]
pub struct QTensor<T> {
    pub xx: Source<T>,
    pub xy: Source<T>,
    pub yy: Source<T>,
}

impl<T: Real> QTensor<T> {
    pub fn identity() -> Self {
        QTensor { xx: Source::Const(T::one()), xy: Source::Const(T::zero()), yy: Source::Const(T::one()) }
    }

    pub fn constant(m: Mat2<T>) -> Self {
        QTensor { xx: Source::Const(m[0][0]), xy: Source::Const(m[0][1]), yy: Source::Const(m[1][1]) }
    }

    pub fn at(&self, x: T, y: T) -> Mat2<T> {
        let o = self.xy.eval(x, y);
        [[self.xx.eval(x, y), o], [o, self.yy.eval(x, y)]]
    }

    /// τ̂ᵀ √Q τ̂ at a point.
    pub fn sqrt_tangential(&self, x: T, y: T, tau: [T; 2]) -> T {
        let s = sqrt_spd(&self.at(x, y));
        tau[0] * (s[0][0] * tau[0] + s[0][1] * tau[1]) + tau[1] * (s[1][0] * tau[0] + s[1][1] * tau[1])
    }
}

/// Coefficients and data of the coupled problem.
#[derive(Clone, Debug)]
pub struct ProblemCoefficients<T> {
    pub q: QTensor<T>,
    pub mu: T,
    pub alpha: T,
    pub beta: T,
    /// Channel forcing in reference coordinates (x, z).
    pub f2: [Source<T>; 2],
    /// Porous source in (x, y).
    pub h1: Source<T>,
    pub eps: T,
}

impl<T: Real> Default for ProblemCoefficients<T> {
    fn default() -> Self {
        ProblemCoefficients {
            q: QTensor::identity(),
            mu: T::one(),
            alpha: T::one(),
            beta: T::one(),
            f2: [Source::Const(T::one()), Source::Const(T::one())],
            h1: Source::Const(T::one()),
            eps: T::one(),
        }
    }
}

impl<T: Real> ProblemCoefficients<T> {
    pub fn with_eps(&self, eps: T) -> Self {
        ProblemCoefficients { eps, ..self.clone() }
    }

    pub fn zero_data(&self) -> Self {
        ProblemCoefficients { f2: [Source::Const(T::zero()), Source::Const(T::zero())], h1: Source::Const(T::zero()), ..self.clone() }
    }

    /// Multiplies both forcings by s.
    pub fn scale_data(&self, s: T) -> Self {
        ProblemCoefficients { f2: [self.f2[0].scaled(s), self.f2[1].scaled(s)], h1: self.h1.scaled(s), ..self.clone() }
    }

    pub fn check_eps(&self) -> Result<()> {
        if self.eps > T::zero() && self.eps <= T::one() {
            Ok(())
        } else {
            Err(Error::param("eps", format!("must lie in (0, 1], got {}", self.eps)))
        }
    }

    /// Scalar bounds, plus ellipticity of Q at every mesh vertex.
    pub fn validate(&self, mesh: &Mesh<T>) -> Result<()> {
        self.check_eps()?;
        if !(self.mu > T::zero() && self.mu.is_finite()) {
            return Err(Error::param("mu", format!("must be positive, got {}", self.mu)));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v >= T::zero() && v.is_finite()) {
                return Err(Error::param(name, format!("must be nonnegative, got {v}")));
            }
        }
        let limit = T::c(1e-12);
        for &c in &mesh.porous_cells {
            for &v in &mesh.cells[c].v {
                let p = mesh.vertices[v];
                let (lo, _) = sym_eigenvalues(&self.q.at(p[0], p[1]));
                if !(lo > limit) {
                    return Err(Error::param("q", format!("not positive definite at ({}, {})", p[0], p[1])));
                }
            }
        }
        // the interface uses √Q at Γ as well
        for (i, &x) in mesh.xs.iter().enumerate() {
            let (lo, _) = sym_eigenvalues(&self.q.at(x, mesh.zeta_nodes[i]));
            if !(lo > limit) {
                return Err(Error::param("q", format!("not positive definite on the interface at x = {x}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sources_evaluate() {
        let s: Source<f64> = Source::expr("x + 2*z").unwrap();
        assert_eq!(s.eval(1.0, 2.0), 5.0);
        assert_eq!(s.scaled(2.0).eval(1.0, 2.0), 10.0);
        assert!(Source::Const(0.0).is_zero());
        assert!(!Source::<f64>::func(|_, _| 0.0).is_zero());
    }

    #[test]
    fn sqrt_q_projects_on_tangent() {
        let q: QTensor<f64> = QTensor::constant([[4.0, 0.0], [0.0, 9.0]]);
        assert!((q.sqrt_tangential(0.0, 0.0, [1.0, 0.0]) - 2.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((q.sqrt_tangential(0.0, 0.0, [s, s]) - 2.5).abs() < 1e-14);
    }
}
