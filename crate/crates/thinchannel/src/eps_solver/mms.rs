//! Manufactured solutions for the ε-problem.
//!
//! The right-hand side is the weak form applied to the exact fields, so every
//! interface and boundary term is consistent by construction and the discrete
//! solution is the Galerkin projection of the manufactured state.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::Serialize;

use super::{assemble_eps, eps_d_eps, eps_div, solve_eps, EpsSolution, EpsSystem, ProblemCoefficients};
use crate::asymptotics::fit_slope;
use crate::discretization::assembly::{gamma_rule, integrate, POROUS_ORDER};
use crate::discretization::elements::Affine;
use crate::discretization::{build_mesh, BasisEval, Mesh};
use crate::error::Result;
use crate::geometry::{DomainSpec, InterfaceChart};
use crate::scalar::Real;

/// Value with its x and z derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T> {
    pub v: T,
    pub dx: T,
    pub dz: T,
}

impl<T: Real> Jet<T> {
    pub fn constant(c: T) -> Self {
        Jet { v: c, dx: T::zero(), dz: T::zero() }
    }

    pub fn x(x: T) -> Self {
        Jet { v: x, dx: T::one(), dz: T::zero() }
    }

    pub fn z(z: T) -> Self {
        Jet { v: z, dx: T::zero(), dz: T::one() }
    }

    pub fn scale(self, c: T) -> Self {
        Jet { v: self.v * c, dx: self.dx * c, dz: self.dz * c }
    }

    pub fn sin(self) -> Self {
        let d = self.v.cos();
        Jet { v: self.v.sin(), dx: d * self.dx, dz: d * self.dz }
    }

    pub fn cos(self) -> Self {
        let d = -self.v.sin();
        Jet { v: self.v.cos(), dx: d * self.dx, dz: d * self.dz }
    }

    pub fn grad(self) -> [T; 2] {
        [self.dx, self.dz]
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Jet { v: self.v + o.v, dx: self.dx + o.dx, dz: self.dz + o.dz }
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Jet { v: self.v - o.v, dx: self.dx - o.dx, dz: self.dz - o.dz }
    }
}

impl<T: Real> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Jet { v: self.v * o.v, dx: self.dx * o.v + self.v * o.dx, dz: self.dz * o.v + self.v * o.dz }
    }
}

impl<T: Real> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

/// A manufactured state in reference coordinates.
pub trait Manufactured<T>: Sync {
    /// Darcy velocity (with derivatives) and pressure at (x, z) in Ω₁.
    fn porous(&self, x: T, z: T) -> ([Jet<T>; 2], T);
    /// Channel velocity (with derivatives) and pressure at (x, z) in Ω₂.
    fn channel(&self, x: T, z: T) -> ([Jet<T>; 2], T);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MmsCase {
    /// Smooth curved-aware fields satisfying the wall, top and flux-matching constraints.
    Smooth,
    /// Zero velocity with constant pressures, reproduced exactly by the discretization.
    ConstantPressure,
}

/// Smooth state adapted to the chart: with s = z − ζ(x) and S = sin πx,
/// v² = (S(1+s²), ζ'S(1+s²) + (1−s)²R) and v¹ = (0, R) + s(cos πx, x),
/// R = ½ sin 2πx. Both have normal flux R on Γ, v² vanishes on the walls and
/// is tangent to the top.
pub struct SmoothState<T> {
    pub chart: InterfaceChart<T>,
}

impl<T: Real> SmoothState<T> {
    fn parts(&self, x: T, z: T) -> (Jet<T>, Jet<T>, Jet<T>) {
        let [zeta, slope, curv] = self.chart.jet(x);
        let s = Jet::z(z) - Jet { v: zeta, dx: slope, dz: T::zero() };
        let slope = Jet { v: slope, dx: curv, dz: T::zero() };
        let r = Jet::x(x).scale(T::c(2.0) * T::PI()).sin().scale(T::c(0.5));
        (s, slope, r)
    }
}

impl<T: Real> Manufactured<T> for SmoothState<T> {
    fn porous(&self, x: T, z: T) -> ([Jet<T>; 2], T) {
        let (s, _, r) = self.parts(x, z);
        let cx = Jet::x(x).scale(T::PI()).cos();
        let p = (T::PI() * x).sin() * z + x;
        ([s * cx, r + s * Jet::x(x)], p)
    }

    fn channel(&self, x: T, z: T) -> ([Jet<T>; 2], T) {
        let (s, slope, r) = self.parts(x, z);
        let one = Jet::constant(T::one());
        let sx = Jet::x(x).scale(T::PI()).sin();
        let v1 = sx * (one + s * s);
        let top = one - s;
        let v2 = slope * v1 + top * top * r;
        let p = (T::PI() * x).cos() * (T::one() + s.v);
        ([v1, v2], p)
    }
}

pub struct ConstantPressure<T> {
    pub p1: T,
    pub p2: T,
}

impl<T: Real> Manufactured<T> for ConstantPressure<T> {
    fn porous(&self, _: T, _: T) -> ([Jet<T>; 2], T) {
        ([Jet::constant(T::zero()); 2], self.p1)
    }

    fn channel(&self, _: T, _: T) -> ([Jet<T>; 2], T) {
        ([Jet::constant(T::zero()); 2], self.p2)
    }
}

fn as_basis<T: Real>(v: &[Jet<T>; 2]) -> BasisEval<T> {
    BasisEval { value: [v[0].v, v[1].v], grad: [v[0].grad(), v[1].grad()], div: v[0].dx + v[1].dz }
}

/// Full-space functionals (F, G) obtained by applying the weak form to the exact state.
pub fn manufactured_rhs<T: Real, M: Manufactured<T>>(system: &EpsSystem<T>, state: &M) -> Result<(Vec<T>, Vec<T>)> {
    use crate::discretization::assembly::assemble_linear;
    let mesh = system.mesh.as_ref();
    let s = &system.spaces;
    let c = &system.coeffs;
    let (eps, mu) = (system.eps, c.mu);
    let order = system.channel_order;

    let mut f1 = assemble_linear(mesh, &s.v1, POROUS_ORDER + 2, |qp| {
        let (v, p) = state.porous(qp.x[0], qp.x[1]);
        let m = c.q.at(qp.x[0], qp.x[1]);
        let qv = [m[0][0] * v[0].v + m[0][1] * v[1].v, m[1][0] * v[0].v + m[1][1] * v[1].v];
        move |w: &BasisEval<T>| qv[0] * w.value[0] + qv[1] * w.value[1] - p * w.div
    })?;
    let mut f2 = assemble_linear(mesh, &s.v2, order, |qp| {
        let slope = mesh.chart.slope(qp.x[0]);
        let (v, p) = state.channel(qp.x[0], qp.x[1]);
        let vb = as_basis(&v);
        move |w: &BasisEval<T>| {
            let mut acc = T::zero();
            for k in 0..2 {
                acc = acc + eps_d_eps(&vb, k, slope, eps) * eps_d_eps(w, k, slope, eps) + vb.grad[k][1] * w.grad[k][1];
            }
            mu * acc - p * eps_div(w, slope, eps)
        }
    })?;
    for g in gamma_rule(mesh, order) {
        let e = mesh.gamma[g.column];
        let edge = &mesh.edges[e];
        let (v, _) = state.porous(g.x, g.y);
        let vn = v[0].v * edge.normal[0] + v[1].v * edge.normal[1];
        f1[e] = f1[e] + c.alpha * vn / edge.length * g.metric() * g.weight;

        let (cell, r) = g.channel;
        let geo = Affine::new(mesh.cell_vertices(cell));
        let (v, _) = state.channel(g.x, g.y);
        let tau = g.tangent();
        let k = eps * eps * c.beta * c.q.sqrt_tangential(g.x, g.jet[0], tau) * g.metric() * g.weight * (v[0].v * tau[0] + v[1].v * tau[1]);
        for (d, b) in s.v2.local_dofs(mesh, cell).into_iter().zip(s.v2.eval(mesh, cell, &geo, r)) {
            f2[d] = f2[d] + k * (b.value[0] * tau[0] + b.value[1] * tau[1]);
        }
    }
    let g1 = assemble_linear(mesh, &s.p1, POROUS_ORDER + 2, |qp| {
        let (v, _) = state.porous(qp.x[0], qp.x[1]);
        let d = v[0].dx + v[1].dz;
        move |phi: &BasisEval<T>| d * phi.value[0]
    })?;
    let g2 = assemble_linear(mesh, &s.p2, order, |qp| {
        let slope = mesh.chart.slope(qp.x[0]);
        let (v, _) = state.channel(qp.x[0], qp.x[1]);
        let d = eps_div(&as_basis(&v), slope, eps);
        move |phi: &BasisEval<T>| d * phi.value[0]
    })?;
    f1.extend(f2);
    let mut g = g1;
    g.extend(g2);
    Ok((f1, g))
}

/// L² errors (v¹, v², p¹, p²) against the exact state, relative where the exact norm is nonzero.
pub fn manufactured_errors<T: Real, M: Manufactured<T>>(system: &EpsSystem<T>, sol: &EpsSolution<T>, state: &M) -> [T; 4] {
    let mesh = system.mesh.as_ref();
    let s = &system.spaces;
    let order = system.channel_order;
    let porous = |g: &Affine<T>, q: &crate::discretization::assembly::QPoint<T>| {
        let (v, p) = state.porous(q.x[0], q.x[1]);
        let vh = sol.v1.eval(&s.v1, mesh, q.cell, g, q.r).value;
        let ph = sol.p1.eval(&s.p1, mesh, q.cell, g, q.r).value[0];
        [sq(vh[0] - v[0].v) + sq(vh[1] - v[1].v), sq(v[0].v) + sq(v[1].v), sq(ph - p), sq(p)]
    };
    let channel = |g: &Affine<T>, q: &crate::discretization::assembly::QPoint<T>| {
        let (v, p) = state.channel(q.x[0], q.x[1]);
        let vh = sol.v2.eval(&s.v2, mesh, q.cell, g, q.r).value;
        let ph = sol.p2.eval(&s.p2, mesh, q.cell, g, q.r).value[0];
        [sq(vh[0] - v[0].v) + sq(vh[1] - v[1].v), sq(v[0].v) + sq(v[1].v), sq(ph - p), sq(p)]
    };
    let po: Vec<T> = (0..4).map(|k| integrate(mesh, &mesh.porous_cells, POROUS_ORDER + 2, |g, q| porous(g, q)[k])).collect();
    let ch: Vec<T> = (0..4).map(|k| integrate(mesh, &mesh.channel_cells, order, |g, q| channel(g, q)[k])).collect();
    let rel = |e: T, n: T| if n > T::zero() { (e / n).sqrt() } else { e.sqrt() };
    [rel(po[0], po[1]), rel(ch[0], ch[1]), rel(po[2], po[3]), rel(ch[2], ch[3])]
}

fn sq<T: Real>(v: T) -> T {
    v * v
}

/// Errors at one refinement level.
#[derive(Clone, Debug, Serialize)]
pub struct MmsLevel {
    pub n_t: usize,
    pub n_z: usize,
    pub n_1: usize,
    pub h: f64,
    pub dofs: usize,
    pub v1: f64,
    pub v2: f64,
    pub p1: f64,
    pub p2: f64,
    pub residual: f64,
}

/// Per-level errors and fitted orders (None with fewer than 3 levels or a zero error).
#[derive(Clone, Debug, Serialize)]
pub struct MmsReport {
    /// "eps" or "limit".
    pub problem: String,
    pub case: MmsCase,
    pub eps: f64,
    pub chart: String,
    pub levels: Vec<MmsLevel>,
    pub order_v1: Option<f64>,
    pub order_v2: Option<f64>,
    pub order_p1: Option<f64>,
    pub order_p2: Option<f64>,
}

impl MmsReport {
    /// Largest relative error over the four fields at the finest level.
    pub fn finest_max_error(&self) -> f64 {
        self.levels.last().map(|l| l.v1.max(l.v2).max(l.p1).max(l.p2)).unwrap_or(f64::NAN)
    }
}

/// Fitted log-log orders of the four error columns against h.
pub fn fitted_orders(levels: &[MmsLevel]) -> [Option<f64>; 4] {
    let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let col = |f: fn(&MmsLevel) -> f64| -> Option<f64> {
        let ys: Vec<f64> = levels.iter().map(f).collect();
        fit_slope(&hs, &ys).ok()
    };
    [col(|l| l.v1), col(|l| l.v2), col(|l| l.p1), col(|l| l.p2)]
}

/// Solves the manufactured problem on one mesh.
pub fn manufactured_solve<T: Real>(
    coeffs: &ProblemCoefficients<T>,
    mesh: &Arc<Mesh<T>>,
    case: MmsCase,
) -> Result<(EpsSystem<T>, EpsSolution<T>, [T; 4])> {
    let base = assemble_eps(coeffs, mesh)?;
    let run = |state: &dyn Fn(&EpsSystem<T>) -> Result<(Vec<T>, Vec<T>)>| -> Result<(EpsSystem<T>, EpsSolution<T>)> {
        let (f, g) = state(&base)?;
        let sys = base.with_rhs(f, g)?;
        let sol = solve_eps(&sys)?;
        Ok((sys, sol))
    };
    match case {
        MmsCase::Smooth => {
            let st = SmoothState { chart: mesh.chart.clone() };
            let (sys, sol) = run(&|s| manufactured_rhs(s, &st))?;
            let e = manufactured_errors(&sys, &sol, &st);
            Ok((sys, sol, e))
        }
        MmsCase::ConstantPressure => {
            let st = ConstantPressure { p1: T::c(0.75), p2: T::c(-1.25) };
            let (sys, sol) = run(&|s| manufactured_rhs(s, &st))?;
            let e = manufactured_errors(&sys, &sol, &st);
            Ok((sys, sol, e))
        }
    }
}

/// Convergence study over `levels` = [(n_t, n_z, n_1), ...].
pub fn mms_verify<T: Real>(
    coeffs: &ProblemCoefficients<T>,
    chart: &InterfaceChart<T>,
    depth: T,
    levels: &[(usize, usize, usize)],
    case: MmsCase,
) -> Result<MmsReport> {
    let spec = DomainSpec::new(chart.clone(), depth)?;
    let mut out = Vec::new();
    for &(n_t, n_z, n_1) in levels {
        let mesh = Arc::new(build_mesh(&spec, n_t, n_z, n_1)?);
        let (sys, sol, e) = manufactured_solve(coeffs, &mesh, case)?;
        out.push(MmsLevel {
            n_t,
            n_z,
            n_1,
            h: 1.0 / n_t as f64,
            dofs: sys.blocks.free() + sys.blocks.pressure(),
            v1: e[0].f64(),
            v2: e[1].f64(),
            p1: e[2].f64(),
            p2: e[3].f64(),
            residual: sol.residual_norm.f64(),
        });
    }
    let orders = fitted_orders(&out);
    Ok(MmsReport {
        problem: "eps".into(),
        case,
        eps: coeffs.eps.f64(),
        chart: chart.describe(),
        order_v1: orders[0],
        order_v2: orders[1],
        order_p1: orders[2],
        order_p2: orders[3],
        levels: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(src: &str) -> InterfaceChart<f64> {
        InterfaceChart::analytic(src, 0.0, 1.0).unwrap()
    }

    #[test]
    fn jet_product_rule() {
        let x = Jet::x(0.3);
        let z = Jet::z(0.7);
        let f = (x * z).sin() + x * x;
        assert!((f.dx - (0.7 * (0.21f64).cos() + 0.6)).abs() < 1e-15);
        assert!((f.dz - 0.3 * (0.21f64).cos()).abs() < 1e-15);
    }

    #[test]
    fn smooth_state_respects_constraints() {
        let st = SmoothState { chart: chart("0.1*sin(2*pi*x)") };
        for &x in &[0.0, 0.13, 0.5, 0.81, 1.0] {
            let [zeta, slope, _] = st.chart.jet(x);
            let (vc, _) = st.channel(x, zeta);
            let (vp, _) = st.porous(x, zeta);
            let fc = -slope * vc[0].v + vc[1].v;
            let fp = -slope * vp[0].v + vp[1].v;
            assert!((fc - fp).abs() < 1e-14);
            let (vt, _) = st.channel(x, zeta + 1.0);
            assert!((-slope * vt[0].v + vt[1].v).abs() < 1e-14);
        }
        for &z in &[0.2, 0.6] {
            let (v, _) = st.channel(0.0, z);
            assert!(v[0].v.abs() < 1e-15 && v[1].v.abs() < 1e-15);
        }
    }

    #[test]
    fn constant_pressure_is_exact() {
        for src in ["0", "0.1*sin(2*pi*x)"] {
            let mesh = Arc::new(build_mesh(&DomainSpec::new(chart(src), 0.5).unwrap(), 6, 3, 3).unwrap());
            for eps in [1.0, 0.25] {
                let (_, _, e) = manufactured_solve(&ProblemCoefficients::default().with_eps(eps), &mesh, MmsCase::ConstantPressure).unwrap();
                assert!(e.iter().all(|v| *v < 1e-9), "{src} {eps} {e:?}");
            }
        }
    }

    #[test]
    fn smooth_errors_decrease() {
        let r = mms_verify(&ProblemCoefficients::default(), &chart("0"), 0.5, &[(4, 2, 2), (8, 4, 4), (16, 8, 8)], MmsCase::Smooth).unwrap();
        assert!(r.order_v1.unwrap() > 0.9, "{r:?}");
        assert!(r.order_v2.unwrap() > 1.9, "{r:?}");
    }
}
