//! Transformed differential operators on the reference channel and the
//! tangential/normal decomposition of vector fields.
//!
//! Everything here is pointwise: callers supply the value and the reference
//! derivatives ∂ₓw, ∂_z w of a field at a point (usually a quadrature point).

use crate::error::{Error, Result};
use crate::geometry::{Frame, InterfaceChart, LocalFrame};
use crate::scalar::{Mat2, Real, Vec2};

/// Value and reference-coordinate derivatives of a vector field at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelJet<T> {
    pub point: Vec2<T>,
    pub value: Vec2<T>,
    pub dx: Vec2<T>,
    pub dz: Vec2<T>,
}

impl<T: Real> ChannelJet<T> {
    pub fn zero(point: Vec2<T>) -> Self {
        ChannelJet { point, value: [T::zero(); 2], dx: [T::zero(); 2], dz: [T::zero(); 2] }
    }
}

pub fn check_eps<T: Real>(eps: T) -> Result<()> {
    if eps > T::zero() && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::param("eps", format!("must be positive, got {eps}")))
    }
}

/// D^ε w = ∇_T w + (1 − 1/ε) ∂_z w ⊗ ∇_T ζ; in 2D a single column.
pub fn d_epsilon_at<T: Real>(dx: Vec2<T>, dz: Vec2<T>, slope: T, eps: T) -> Vec2<T> {
    if eps == T::one() {
        return dx;
    }
    let k = (T::one() - T::one() / eps) * slope;
    [dx[0] + k * dz[0], dx[1] + k * dz[1]]
}

/// [D^ε w | ε⁻¹ ∂_z w], row-major with rows indexed by the component of w.
pub fn transformed_gradient_at<T: Real>(dx: Vec2<T>, dz: Vec2<T>, slope: T, eps: T) -> Mat2<T> {
    let d = d_epsilon_at(dx, dz, slope, eps);
    [[d[0], dz[0] / eps], [d[1], dz[1] / eps]]
}

/// ∇_T·w_T + (1 − 1/ε) ∂_z w_T·∇_T ζ + ε⁻¹ ∂_z w_N.
pub fn transformed_divergence_at<T: Real>(dx: Vec2<T>, dz: Vec2<T>, slope: T, eps: T) -> T {
    dx[0] + (T::one() - T::one() / eps) * dz[0] * slope + dz[1] / eps
}

/// Tensor values sampled at a list of points.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField<T> {
    pub points: Vec<Vec2<T>>,
    pub values: Vec<Mat2<T>>,
}

/// Column-vector valued D^ε samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnField<T> {
    pub points: Vec<Vec2<T>>,
    pub values: Vec<Vec2<T>>,
}

pub fn d_epsilon<T: Real>(jets: &[ChannelJet<T>], chart: &InterfaceChart<T>, eps: T) -> Result<ColumnField<T>> {
    check_eps(eps)?;
    let values = jets.iter().map(|j| d_epsilon_at(j.dx, j.dz, chart.slope(j.point[0]), eps)).collect();
    Ok(ColumnField { points: jets.iter().map(|j| j.point).collect(), values })
}

pub fn transformed_gradient<T: Real>(jets: &[ChannelJet<T>], chart: &InterfaceChart<T>, eps: T) -> Result<TensorField<T>> {
    check_eps(eps)?;
    let values = jets.iter().map(|j| transformed_gradient_at(j.dx, j.dz, chart.slope(j.point[0]), eps)).collect();
    Ok(TensorField { points: jets.iter().map(|j| j.point).collect(), values })
}

pub fn transformed_divergence<T: Real>(jets: &[ChannelJet<T>], chart: &InterfaceChart<T>, eps: T) -> Result<Vec<T>> {
    check_eps(eps)?;
    Ok(jets.iter().map(|j| transformed_divergence_at(j.dx, j.dz, chart.slope(j.point[0]), eps)).collect())
}

/// Tangential and normal components of a sampled vector field.
#[derive(Clone, Debug)]
pub struct FrameDecomposition<T> {
    pub points: Vec<Vec2<T>>,
    pub w_tau: Vec<T>,
    pub w_n: Vec<T>,
    pub frame: LocalFrame<T>,
}

pub fn decompose_frame<T: Real>(points: &[Vec2<T>], values: &[Vec2<T>], frame: &LocalFrame<T>) -> Result<FrameDecomposition<T>> {
    if points.len() != values.len() {
        return Err(Error::Structure(format!("{} points but {} values", points.len(), values.len())));
    }
    let mut w_tau = Vec::with_capacity(values.len());
    let mut w_n = Vec::with_capacity(values.len());
    for (p, w) in points.iter().zip(values) {
        let c = frame.chart.frame(p[0]).decompose(*w);
        w_tau.push(c[0]);
        w_n.push(c[1]);
    }
    Ok(FrameDecomposition { points: points.to_vec(), w_tau, w_n, frame: frame.clone() })
}

pub fn recompose_frame<T: Real>(d: &FrameDecomposition<T>) -> Result<Vec<Vec2<T>>> {
    if d.w_tau.len() != d.points.len() || d.w_n.len() != d.points.len() {
        return Err(Error::Structure("component arrays do not match the sample points".into()));
    }
    Ok(d.points
        .iter()
        .zip(d.w_tau.iter().zip(&d.w_n))
        .map(|(p, (&t, &n))| d.frame.chart.frame(p[0]).recompose([t, n]))
        .collect())
}

/// Decomposition of a jet; the frame is z-independent so ∂_z passes through it.
pub fn decompose_jet<T: Real>(jet: &ChannelJet<T>, frame: &Frame<T>, frame_dx: &Frame<T>) -> ChannelJet<T> {
    let dx_from_frame = [
        frame_dx.tau[0] * jet.value[0] + frame_dx.tau[1] * jet.value[1],
        frame_dx.n[0] * jet.value[0] + frame_dx.n[1] * jet.value[1],
    ];
    let dx = frame.decompose(jet.dx);
    ChannelJet {
        point: jet.point,
        value: frame.decompose(jet.value),
        dx: [dx[0] + dx_from_frame[0], dx[1] + dx_from_frame[1]],
        dz: frame.decompose(jet.dz),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{map_from_reference, map_to_reference};

    fn chart(src: &str) -> InterfaceChart<f64> {
        InterfaceChart::analytic(src, 0.0, 1.0).unwrap()
    }

    #[test]
    fn d_epsilon_examples() {
        // w = (xz, z), ζ = x, ε = 1/2 → (z − x, −1)
        let (x, z): (f64, f64) = (0.3, 0.9);
        let d = d_epsilon_at([z, 0.0], [x, 1.0], 1.0, 0.5);
        assert!((d[0] - (z - x)).abs() < 1e-15 && (d[1] + 1.0).abs() < 1e-15);
        assert_eq!(d_epsilon_at([0.3, -0.2], [5.0, 7.0], 0.8, 1.0), [0.3, -0.2]);
        assert_eq!(d_epsilon_at([0.3, -0.2], [5.0, 7.0], 0.0, 0.01), [0.3, -0.2]);
        assert!(d_epsilon::<f64>(&[], &chart("x"), 0.0).is_err());
    }

    #[test]
    fn divergence_is_trace_of_gradient() {
        // w = (x, z) on a flat chart with ε = 1/2 → 1 + 2
        assert_eq!(transformed_divergence_at([1.0, 0.0], [0.0, 1.0], 0.0, 0.5), 3.0);
        let g: Mat2<f64> = transformed_gradient_at([0.2, -1.3], [0.7, 0.4], 0.35, 0.1);
        let d = transformed_divergence_at([0.2, -1.3], [0.7, 0.4], 0.35, 0.1);
        assert!((g[0][0] + g[1][1] - d).abs() < 1e-13);
    }

    #[test]
    fn gradient_matches_physical_finite_differences() {
        // w(x, z) = (x z + z², sin x + x z) on the reference channel
        let w = |p: [f64; 2]| [p[0] * p[1] + p[1] * p[1], p[0].sin() + p[0] * p[1]];
        let dx = |p: [f64; 2]| [p[1], p[0].cos() + p[1]];
        let dz = |p: [f64; 2]| [p[0] + 2.0 * p[1], p[0]];
        for src in ["0", "x", "0.1*sin(2*pi*x)"] {
            let c = chart(src);
            for &eps in &[1.0, 0.5, 0.1] {
                let xr = [0.4, c.zeta(0.4) + 0.55];
                let y = map_from_reference(&c, eps, xr).unwrap();
                let phys = |q: [f64; 2]| w(map_to_reference(&c, eps, q).unwrap());
                let h = 1e-5;
                let g = transformed_gradient_at(dx(xr), dz(xr), c.slope(xr[0]), eps);
                for comp in 0..2 {
                    let fx = (phys([y[0] + h, y[1]])[comp] - phys([y[0] - h, y[1]])[comp]) / (2.0 * h);
                    let fy = (phys([y[0], y[1] + h])[comp] - phys([y[0], y[1] - h])[comp]) / (2.0 * h);
                    assert!((g[comp][0] - fx).abs() < 1e-6, "{src} eps={eps}");
                    assert!((g[comp][1] - fy).abs() < 1e-6, "{src} eps={eps}");
                }
            }
        }
    }

    #[test]
    fn frame_round_trip_and_special_fields() {
        let c = chart("x");
        let lf = LocalFrame::new(&c);
        let pts = vec![[0.2, 0.5], [0.7, 1.1]];
        let d = FrameDecomposition { points: pts.clone(), w_tau: vec![0.0, 0.0], w_n: vec![1.0, 1.0], frame: lf.clone() };
        let r = recompose_frame(&d).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r[0][0] + s).abs() < 1e-15 && (r[0][1] - s).abs() < 1e-15);
        let normals: Vec<_> = pts.iter().map(|p| c.frame(p[0]).n).collect();
        let d = decompose_frame(&pts, &normals, &lf).unwrap();
        assert!(d.w_tau.iter().all(|v| v.abs() < 1e-15) && d.w_n.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(decompose_frame(&pts, &normals[..1], &lf).is_err());
        let mut broken = d.clone();
        broken.w_n.pop();
        assert!(matches!(recompose_frame(&broken), Err(Error::Structure(_))));
    }

    #[test]
    fn flat_decomposition_is_canonical() {
        let c = chart("0");
        let lf = LocalFrame::new(&c);
        let d = decompose_frame(&[[0.1, 0.2]], &[[3.0, -4.0]], &lf).unwrap();
        assert_eq!((d.w_tau[0], d.w_n[0]), (3.0, -4.0));
        let zero = FrameDecomposition { points: vec![[0.5, 0.5]], w_tau: vec![0.0], w_n: vec![0.0], frame: lf };
        assert_eq!(recompose_frame(&zero).unwrap(), vec![[0.0, 0.0]]);
    }
}
