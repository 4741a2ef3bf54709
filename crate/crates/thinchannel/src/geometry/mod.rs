//! Interface chart, normal/tangent frame and the channel change of variables.

mod spline;

use std::fmt;
use std::sync::Arc;

pub use spline::CubicSpline;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::scalar::{Real, Vec2};

/// Smallest admissible normal lower bound before a chart is rejected.
pub const DELTA_TOLERANCE: f64 = 1e-6;
/// Fraction of |G| beyond each end of G on which the chart must stay C².
pub const C2_MARGIN: f64 = 0.05;

type Callback<T> = Arc<dyn Fn(T) -> [T; 3] + Send + Sync>;

#[derive(Clone)]
enum Shape<T> {
    Analytic { src: String, zeta: Expr, d1: Expr, d2: Expr },
    Table(CubicSpline<T>),
    Callback(Callback<T>),
}

/// Graph chart ζ of the interface over the projection interval G = (g_lo, g_hi).
#[derive(Clone)]
pub struct InterfaceChart<T> {
    pub g_lo: T,
    pub g_hi: T,
    pub n_samples: usize,
    shape: Shape<T>,
    slope_fault: T,
}

impl<T: fmt::Debug> fmt::Debug for InterfaceChart<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = match &self.shape {
            Shape::Analytic { src, .. } => format!("analytic `{src}`"),
            Shape::Table(s) => format!("table with {} knots", s.len()),
            Shape::Callback(_) => "callback".to_string(),
        };
        write!(f, "InterfaceChart({shape} on [{:?}, {:?}])", self.g_lo, self.g_hi)
    }
}

impl<T: Real> InterfaceChart<T> {
    fn build(g_lo: T, g_hi: T, shape: Shape<T>) -> Result<Self> {
        if !(g_lo.is_finite() && g_hi.is_finite() && g_lo < g_hi) {
            return Err(Error::InvalidChart(format!("projection interval [{g_lo}, {g_hi}] is empty")));
        }
        let chart = InterfaceChart { g_lo, g_hi, n_samples: 1000, shape, slope_fault: T::zero() };
        chart.check_smooth_margin()?;
        normal_lower_bound(&chart)?;
        Ok(chart)
    }

    pub fn flat(g_lo: T, g_hi: T) -> Result<Self> {
        Self::analytic("0", g_lo, g_hi)
    }

    /// Chart from an expression in `x`; derivatives come from the expression tree.
    pub fn analytic(src: &str, g_lo: T, g_hi: T) -> Result<Self> {
        let zeta = Expr::parse(src).map_err(|e| Error::InvalidChart(e.to_string()))?;
        let d1 = zeta.derivative_x();
        let d2 = d1.derivative_x();
        Self::build(g_lo, g_hi, Shape::Analytic { src: src.to_string(), zeta, d1, d2 })
    }

    /// Chart interpolated by a natural cubic spline; the table must cover the C² margin.
    pub fn table(xs: Vec<T>, zs: Vec<T>, g_lo: T, g_hi: T) -> Result<Self> {
        let spline = CubicSpline::new(xs, zs)?;
        let (lo, hi) = spline.range();
        let margin = T::c(C2_MARGIN) * (g_hi - g_lo);
        let slack = T::c(1e-12) * (T::one() + (hi - lo).abs());
        if g_lo - margin < lo - slack || g_hi + margin > hi + slack {
            return Err(Error::InvalidChart(format!(
                "table range [{lo}, {hi}] does not cover G = [{g_lo}, {g_hi}] plus the 5% margin"
            )));
        }
        Self::build(g_lo, g_hi, Shape::Table(spline))
    }

    /// Table chart whose G is the largest interval leaving the C² margin inside the table.
    pub fn table_auto(xs: Vec<T>, zs: Vec<T>) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::InvalidChart("spline table needs at least 4 knots".into()));
        }
        let (lo, hi) = (xs[0], xs[xs.len() - 1]);
        let len = (hi - lo) / T::c(1.0 + 2.0 * C2_MARGIN);
        let g_lo = lo + T::c(C2_MARGIN) * len;
        Self::table(xs, zs, g_lo, g_lo + len)
    }

    /// Chart from a closure returning (ζ, ζ', ζ'').
    pub fn from_fn(f: impl Fn(T) -> [T; 3] + Send + Sync + 'static, g_lo: T, g_hi: T) -> Result<Self> {
        Self::build(g_lo, g_hi, Shape::Callback(Arc::new(f)))
    }

    /// Copy of the chart whose reported slope is off by `bias`; used as a negative control.
    pub fn with_slope_fault(mut self, bias: T) -> Self {
        self.slope_fault = bias;
        self
    }

    pub fn describe(&self) -> String {
        format!("{self:?}")
    }

    pub fn length(&self) -> T {
        self.g_hi - self.g_lo
    }

    pub fn is_flat(&self) -> bool {
        match &self.shape {
            Shape::Analytic { zeta, .. } => matches!(zeta, Expr::Num(v) if *v == 0.0) && self.slope_fault == T::zero(),
            _ => false,
        }
    }

    /// (ζ, ζ', ζ'') without a domain check.
    pub fn jet(&self, x: T) -> [T; 3] {
        let [z, d1, d2] = match &self.shape {
            Shape::Analytic { zeta, d1, d2, .. } => [zeta.eval(x, T::zero()), d1.eval(x, T::zero()), d2.eval(x, T::zero())],
            Shape::Table(s) => s.eval(x),
            Shape::Callback(f) => f(x),
        };
        [z, d1 + self.slope_fault, d2]
    }

    pub fn zeta(&self, x: T) -> T {
        self.jet(x)[0]
    }

    pub fn slope(&self, x: T) -> T {
        self.jet(x)[1]
    }

    pub fn contains(&self, x: T) -> bool {
        let tol = T::c(1e-12) * (T::one() + self.length());
        x >= self.g_lo - tol && x <= self.g_hi + tol
    }

    pub fn check(&self, x: T) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain { x: x.f64(), z: f64::NAN, domain: "G" })
        }
    }

    /// |(−ζ', 1)| at x without a domain check.
    pub fn metric(&self, x: T) -> T {
        T::one().hypot(self.slope(x))
    }

    /// Tangent/normal frame at x without a domain check.
    pub fn frame(&self, x: T) -> Frame<T> {
        Frame::from_slope(self.slope(x))
    }

    fn check_smooth_margin(&self) -> Result<()> {
        let margin = T::c(C2_MARGIN) * self.length();
        let n = 2000;
        for k in 0..=n {
            let x = self.g_lo - margin + (self.length() + margin + margin) * T::from_usize_lossy(k) / T::from_usize_lossy(n);
            let j = self.jet(x);
            if j.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidChart(format!("chart is not C² near x = {x} (non-finite derivative)")));
            }
        }
        Ok(())
    }
}

/// Orthonormal frame U = [τ̂ | n̂] at one point of G.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame<T> {
    pub tau: Vec2<T>,
    pub n: Vec2<T>,
}

impl<T: Real> Frame<T> {
    pub fn from_slope(s: T) -> Self {
        let m = T::one().hypot(s);
        Frame { tau: [T::one() / m, s / m], n: [-s / m, T::one() / m] }
    }

    /// Matrix with columns τ̂ and n̂, row-major.
    pub fn matrix(&self) -> [[T; 2]; 2] {
        [[self.tau[0], self.n[0]], [self.tau[1], self.n[1]]]
    }

    pub fn u_t_tau(&self) -> T {
        self.tau[0]
    }
    pub fn u_t_n(&self) -> T {
        self.n[0]
    }
    pub fn u_n_tau(&self) -> T {
        self.tau[1]
    }
    pub fn u_n_n(&self) -> T {
        self.n[1]
    }

    /// Canonical components → (tangential, normal).
    pub fn decompose(&self, w: Vec2<T>) -> Vec2<T> {
        [self.tau[0] * w[0] + self.tau[1] * w[1], self.n[0] * w[0] + self.n[1] * w[1]]
    }

    /// (tangential, normal) → canonical components.
    pub fn recompose(&self, c: Vec2<T>) -> Vec2<T> {
        [self.tau[0] * c[0] + self.n[0] * c[1], self.tau[1] * c[0] + self.n[1] * c[1]]
    }
}

/// The frame field x ↦ U(x) of a chart.
#[derive(Clone, Debug)]
pub struct LocalFrame<T> {
    pub chart: InterfaceChart<T>,
}

impl<T: Real> LocalFrame<T> {
    pub fn new(chart: &InterfaceChart<T>) -> Self {
        LocalFrame { chart: chart.clone() }
    }

    pub fn at(&self, x: T) -> Result<Frame<T>> {
        stream_frame(&self.chart, x)
    }

    /// dU/dx: τ̂' = ζ''/m² n̂ and n̂' = −ζ''/m² τ̂.
    pub fn derivative(&self, x: T) -> Result<Frame<T>> {
        self.chart.check(x)?;
        let [_, s, c] = self.chart.jet(x);
        let f = Frame::from_slope(s);
        let k = c / (T::one() + s * s);
        Ok(Frame { tau: [k * f.n[0], k * f.n[1]], n: [-k * f.tau[0], -k * f.tau[1]] })
    }
}

/// Porous block depth plus chart; the reference channel has unit height.
#[derive(Clone, Debug)]
pub struct DomainSpec<T> {
    pub chart: InterfaceChart<T>,
    pub omega1_depth: T,
    pub epsilon: T,
}

impl<T: Real> DomainSpec<T> {
    pub fn new(chart: InterfaceChart<T>, omega1_depth: T) -> Result<Self> {
        if !(omega1_depth > T::zero() && omega1_depth.is_finite()) {
            return Err(Error::param("omega1_depth", "must be positive"));
        }
        Ok(DomainSpec { chart, omega1_depth, epsilon: T::one() })
    }
}

pub fn interface_normal<T: Real>(chart: &InterfaceChart<T>, x: T) -> Result<Vec2<T>> {
    chart.check(x)?;
    Ok(chart.frame(x).n)
}

pub fn surface_measure<T: Real>(chart: &InterfaceChart<T>, x: T) -> Result<T> {
    chart.check(x)?;
    Ok(chart.metric(x))
}

pub fn stream_frame<T: Real>(chart: &InterfaceChart<T>, x: T) -> Result<Frame<T>> {
    chart.check(x)?;
    Ok(chart.frame(x))
}

fn check_eps<T: Real>(eps: T) -> Result<()> {
    if eps > T::zero() && eps <= T::one() && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::param("eps", format!("must lie in (0, 1], got {eps}")))
    }
}

fn in_band<T: Real>(chart: &InterfaceChart<T>, p: Vec2<T>, height: T, domain: &'static str) -> Result<T> {
    if !chart.contains(p[0]) {
        return Err(Error::Domain { x: p[0].f64(), z: p[1].f64(), domain });
    }
    let zeta = chart.zeta(p[0]);
    let tol = T::c(1e-12) * (T::one() + zeta.abs());
    if p[1] < zeta - tol || p[1] > zeta + height + tol {
        return Err(Error::Domain { x: p[0].f64(), z: p[1].f64(), domain });
    }
    Ok(zeta)
}

/// φ: physical channel Ω₂^ε → reference channel Ω₂.
pub fn map_to_reference<T: Real>(chart: &InterfaceChart<T>, eps: T, y: Vec2<T>) -> Result<Vec2<T>> {
    check_eps(eps)?;
    let zeta = in_band(chart, y, eps, "the physical channel")?;
    Ok([y[0], (y[1] - zeta) / eps + zeta])
}

/// φ⁻¹: reference channel Ω₂ → physical channel Ω₂^ε.
pub fn map_from_reference<T: Real>(chart: &InterfaceChart<T>, eps: T, x: Vec2<T>) -> Result<Vec2<T>> {
    check_eps(eps)?;
    let zeta = in_band(chart, x, T::one(), "the reference channel")?;
    Ok([x[0], eps * (x[1] - zeta) + zeta])
}

/// δ = min over `n` sample points of n̂·ê_N = 1/|(−ζ', 1)|.
pub fn normal_lower_bound_sampled<T: Real>(chart: &InterfaceChart<T>, n: usize) -> Result<T> {
    let n = n.max(2);
    let mut delta = T::infinity();
    for k in 0..=n {
        let x = chart.g_lo + chart.length() * T::from_usize_lossy(k) / T::from_usize_lossy(n);
        let d = T::one() / chart.metric(x);
        if !d.is_finite() {
            return Err(Error::InvalidChart(format!("slope is not finite at x = {x}")));
        }
        delta = delta.min(d);
    }
    if delta <= T::c(DELTA_TOLERANCE) {
        return Err(Error::InvalidChart(format!("normal lower bound δ = {delta:e} is not positive")));
    }
    Ok(delta)
}

pub fn normal_lower_bound<T: Real>(chart: &InterfaceChart<T>) -> Result<T> {
    normal_lower_bound_sampled(chart, chart.n_samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    const S2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn chart(src: &str) -> InterfaceChart<f64> {
        InterfaceChart::analytic(src, 0.0, 1.0).unwrap()
    }

    #[test]
    fn normals_of_simple_charts() {
        assert_eq!(interface_normal(&chart("0"), 0.3).unwrap(), [0.0, 1.0]);
        let n = interface_normal(&chart("x"), 0.5).unwrap();
        assert!((n[0] + S2).abs() < 1e-15 && (n[1] - S2).abs() < 1e-15);
        let c = chart("x^2/2");
        let n = interface_normal(&c, 1.0).unwrap();
        let h = 1e-6;
        let fd = (c.zeta(1.0 + h) - c.zeta(1.0 - h)) / (2.0 * h);
        let m = (1.0 + fd * fd).sqrt();
        assert!((n[0] + fd / m).abs() < 1e-9 && (n[1] - 1.0 / m).abs() < 1e-9);
        assert!((n[0] + S2).abs() < 1e-15);
    }

    #[test]
    fn out_of_domain_queries_fail() {
        let c = chart("0");
        assert!(matches!(interface_normal(&c, 1.5), Err(Error::Domain { .. })));
        assert!(surface_measure(&c, -0.1).is_err());
        assert!(stream_frame(&c, 2.0).is_err());
    }

    #[test]
    fn surface_measure_values() {
        assert_eq!(surface_measure(&chart("0"), 0.2).unwrap(), 1.0);
        assert!((surface_measure(&chart("x"), 0.2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let s = InterfaceChart::analytic("sin(x)", -1.0, 1.0).unwrap();
        assert!((surface_measure(&s, 0.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn frames() {
        let f = stream_frame(&chart("0"), 0.4).unwrap();
        assert_eq!(f.matrix(), [[1.0, 0.0], [0.0, 1.0]]);
        let f = stream_frame(&chart("x"), 0.9).unwrap();
        assert!((f.tau[0] - S2).abs() < 1e-15 && (f.tau[1] - S2).abs() < 1e-15);
        assert!((f.n[0] + S2).abs() < 1e-15 && (f.n[1] - S2).abs() < 1e-15);
        assert!((f.recompose([0.0, 1.0])[0] + S2).abs() < 1e-15);
    }

    #[test]
    fn maps_and_round_trip() {
        let flat = chart("0");
        assert_eq!(map_to_reference(&flat, 0.5, [0.3, 0.2]).unwrap(), [0.3, 0.4]);
        assert_eq!(map_from_reference(&flat, 0.5, [0.3, 0.4]).unwrap(), [0.3, 0.2]);
        let c = chart("x^2/2");
        let y = [1.0, 0.5 + 0.1];
        let x = map_to_reference(&c, 0.25, y).unwrap();
        assert!((x[1] - 0.9).abs() < 1e-14);
        let back = map_from_reference(&c, 0.25, x).unwrap();
        assert!((back[1] - y[1]).abs() < 1e-15);
        assert_eq!(map_to_reference(&c, 1.0, [0.4, 0.3]).unwrap(), [0.4, 0.3]);
        assert!(map_to_reference(&c, 0.25, [0.4, 0.5]).is_err());
        assert!(map_to_reference(&c, 0.0, [0.4, 0.1]).is_err());
        assert!(map_from_reference(&c, 0.5, [0.4, 2.0]).is_err());
    }

    #[test]
    fn lower_bounds() {
        assert_eq!(normal_lower_bound(&chart("0")).unwrap(), 1.0);
        assert!((normal_lower_bound(&chart("x")).unwrap() - S2).abs() < 1e-15);
        assert!((normal_lower_bound(&chart("2*x")).unwrap() - 1.0 / 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_charts() {
        assert!(InterfaceChart::<f64>::analytic("1/(x - 1)", 0.0, 1.0).is_err());
        assert!(InterfaceChart::<f64>::analytic("sqrt(x)", 0.0, 1.0).is_err());
        assert!(InterfaceChart::<f64>::analytic("1e7*x", 0.0, 1.0).is_err());
        assert!(InterfaceChart::<f64>::analytic("x", 1.0, 1.0).is_err());
        let jump = InterfaceChart::<f64>::table(vec![-0.1, 0.5, 0.5 + 1e-8, 1.1], vec![0.0, 0.0, 1.0, 1.0], 0.0, 1.0);
        assert!(matches!(jump, Err(Error::InvalidChart(_))));
        let short = InterfaceChart::<f64>::table(vec![0.0, 0.5, 0.8, 1.0], vec![0.0; 4], 0.0, 1.0);
        assert!(short.is_err());
    }

    #[test]
    fn table_chart_matches_smooth_function() {
        let xs: Vec<f64> = (0..=60).map(|i| -0.1 + 1.2 * i as f64 / 60.0).collect();
        let zs: Vec<f64> = xs.iter().map(|x| 0.1 * (2.0 * std::f64::consts::PI * x).sin()).collect();
        let c = InterfaceChart::table(xs, zs, 0.0, 1.0).unwrap();
        let a = chart("0.1*sin(2*pi*x)");
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            assert!((c.zeta(x) - a.zeta(x)).abs() < 1e-5);
            assert!((c.slope(x) - a.slope(x)).abs() < 1e-3);
        }
        let auto = InterfaceChart::<f64>::table_auto(vec![0.0, 0.4, 0.7, 1.1], vec![0.0, 0.1, 0.0, 0.2]).unwrap();
        assert!((auto.g_lo - 0.05).abs() < 1e-12 && (auto.g_hi - 1.05).abs() < 1e-12);
    }

    #[test]
    fn frame_derivative_matches_finite_difference() {
        let c = chart("0.1*sin(2*pi*x)");
        let lf = LocalFrame::new(&c);
        let h = 1e-6;
        for &x in &[0.1, 0.45, 0.8] {
            let d = lf.derivative(x).unwrap();
            let p = lf.at(x + h).unwrap();
            let m = lf.at(x - h).unwrap();
            for k in 0..2 {
                assert!((d.tau[k] - (p.tau[k] - m.tau[k]) / (2.0 * h)).abs() < 1e-7);
                assert!((d.n[k] - (p.n[k] - m.n[k]) / (2.0 * h)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let c = InterfaceChart::<f32>::analytic("x", 0.0, 1.0).unwrap();
        let n = interface_normal(&c, 0.5).unwrap();
        assert!((n[1] - std::f32::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }
}
