//! Manufactured solutions for the limit problem.

use std::sync::Arc;

use super::{assemble_limit, gamma_coefficients, solve_limit, surface_rule, LimitModel, LimitSolution, LimitSystem};
use crate::discretization::assembly::{assemble_linear, integrate, POROUS_ORDER};
use crate::discretization::{build_mesh, BasisEval, Mesh};
use crate::eps_solver::mms::{fitted_orders, Jet, MmsCase, MmsLevel, MmsReport, SmoothState};
use crate::eps_solver::ProblemCoefficients;
use crate::error::Result;
use crate::geometry::{DomainSpec, InterfaceChart};
use crate::scalar::Real;

/// Exact limit state: Darcy fields on Ω₁ and (s, s', p²) along G.
pub trait LimitManufactured<T>: Sync {
    fn porous(&self, x: T, z: T) -> ([Jet<T>; 2], T);
    fn surface(&self, x: T) -> (T, T, T);
}

/// Darcy part of the smooth ε-state with s = ½ sin(πx)(1 + x), p² = cos πx + x/2.
pub struct SmoothLimitState<T> {
    pub inner: SmoothState<T>,
}

impl<T: Real> LimitManufactured<T> for SmoothLimitState<T> {
    fn porous(&self, x: T, z: T) -> ([Jet<T>; 2], T) {
        use crate::eps_solver::mms::Manufactured;
        self.inner.porous(x, z)
    }

    fn surface(&self, x: T) -> (T, T, T) {
        let pi = T::PI();
        let half = T::c(0.5);
        let s = half * (pi * x).sin() * (T::one() + x);
        let ds = half * (pi * (pi * x).cos() * (T::one() + x) + (pi * x).sin());
        (s, ds, (pi * x).cos() + half * x)
    }
}

pub struct ConstantLimitPressure<T> {
    pub p1: T,
    pub p2: T,
}

impl<T: Real> LimitManufactured<T> for ConstantLimitPressure<T> {
    fn porous(&self, _: T, _: T) -> ([Jet<T>; 2], T) {
        ([Jet::constant(T::zero()); 2], self.p1)
    }

    fn surface(&self, _: T) -> (T, T, T) {
        (T::zero(), T::zero(), self.p2)
    }
}

/// Exact Darcy flux per unit length through the chord under x.
fn exact_normal_flux<T: Real, M: LimitManufactured<T>>(mesh: &Mesh<T>, state: &M, column: usize, x: T) -> T {
    let e = &mesh.edges[mesh.gamma[column]];
    let (_, y) = mesh.chord_zeta(x);
    let (v, _) = state.porous(x, y);
    v[0].v * e.normal[0] + v[1].v * e.normal[1]
}

/// Full-space functionals of the limit weak form at the exact state.
pub fn limit_manufactured_rhs<T: Real, M: LimitManufactured<T>>(system: &LimitSystem<T>, state: &M) -> Result<(Vec<T>, Vec<T>)> {
    let mesh = system.mesh.as_ref();
    let sp = &system.spaces;
    let c = &system.coeffs;
    let mut f = assemble_linear(mesh, &sp.v1, POROUS_ORDER + 2, |qp| {
        let (v, p) = state.porous(qp.x[0], qp.x[1]);
        let m = c.q.at(qp.x[0], qp.x[1]);
        let qv = [m[0][0] * v[0].v + m[0][1] * v[1].v, m[1][0] * v[0].v + m[1][1] * v[1].v];
        move |w: &BasisEval<T>| qv[0] * w.value[0] + qv[1] * w.value[1] - p * w.div
    })?;
    let n1 = sp.v1.n_dofs;
    f.extend(vec![T::zero(); sp.s.n_dofs]);
    let mut g = assemble_linear(mesh, &sp.p1, POROUS_ORDER + 2, |qp| {
        let (v, _) = state.porous(qp.x[0], qp.x[1]);
        let d = v[0].dx + v[1].dz;
        move |phi: &BasisEval<T>| d * phi.value[0]
    })?;
    let m1 = g.len();
    g.extend(vec![T::zero(); sp.p2.n_dofs]);
    for q in surface_rule(mesh, system.order) {
        let k = gamma_coefficients(system.model, c, q.x, q.jet);
        let e = mesh.gamma[q.column];
        let inv_l = T::one() / mesh.edges[e].length;
        let vn = exact_normal_flux(mesh, state, q.column, q.x);
        let (s, ds, p2) = state.surface(q.x);
        let w = q.weight;
        f[e] = f[e] + w * (k.nn * vn + k.ns * s + k.div_n * p2) * inv_l;
        for a in 0..3 {
            let i = n1 + 2 * q.column + a;
            f[i] = f[i]
                + w * (k.ns * vn * q.phi[a] + k.ss_d * ds * q.dphi[a] + k.ss_0 * s * q.phi[a]
                    - p2 * (k.div_d * q.dphi[a] + k.div_0 * q.phi[a]));
        }
        for j in 0..2 {
            let r = m1 + q.column + j;
            g[r] = g[r] + w * q.psi[j] * (k.div_d * ds + k.div_0 * s - k.div_n * vn);
        }
    }
    Ok((f, g))
}

/// Relative L² errors of (v¹, s, p¹, p²); Ω₁ for the Darcy pair, G for the surface pair.
pub fn limit_manufactured_errors<T: Real, M: LimitManufactured<T>>(system: &LimitSystem<T>, sol: &LimitSolution<T>, state: &M) -> [T; 4] {
    let mesh = system.mesh.as_ref();
    let sp = &system.spaces;
    let sq = |v: T| v * v;
    let po: Vec<T> = (0..4)
        .map(|k| {
            integrate(mesh, &mesh.porous_cells, POROUS_ORDER + 2, |g, q| {
                let (v, p) = state.porous(q.x[0], q.x[1]);
                let vh = sol.v1.eval(&sp.v1, mesh, q.cell, g, q.r).value;
                let ph = sol.p1.eval(&sp.p1, mesh, q.cell, g, q.r).value[0];
                [sq(vh[0] - v[0].v) + sq(vh[1] - v[1].v), sq(v[0].v) + sq(v[1].v), sq(ph - p), sq(p)][k]
            })
        })
        .collect();
    let mut su = [T::zero(); 4];
    for q in surface_rule(mesh, system.order) {
        let (s, _, p2) = state.surface(q.x);
        let sh = sol.speed_at(mesh, q.x);
        let ph = sol.surface_pressure(mesh, q.x);
        for (k, v) in [sq(sh - s), sq(s), sq(ph - p2), sq(p2)].into_iter().enumerate() {
            su[k] = su[k] + q.weight * v;
        }
    }
    let rel = |e: T, n: T| if n > T::zero() { (e / n).sqrt() } else { e.sqrt() };
    [rel(po[0], po[1]), rel(su[0], su[1]), rel(po[2], po[3]), rel(su[2], su[3])]
}

pub fn limit_manufactured_solve<T: Real>(
    coeffs: &ProblemCoefficients<T>,
    mesh: &Arc<Mesh<T>>,
    model: LimitModel,
    case: MmsCase,
) -> Result<(LimitSystem<T>, LimitSolution<T>, [T; 4])> {
    let base = assemble_limit(coeffs, mesh, model)?;
    fn go<T: Real, M: LimitManufactured<T>>(base: &LimitSystem<T>, st: &M) -> Result<(LimitSystem<T>, LimitSolution<T>, [T; 4])> {
        let (f, g) = limit_manufactured_rhs(base, st)?;
        let sys = base.with_rhs(f, g)?;
        let sol = solve_limit(&sys)?;
        let e = limit_manufactured_errors(&sys, &sol, st);
        Ok((sys, sol, e))
    }
    match case {
        MmsCase::Smooth => go(&base, &SmoothLimitState { inner: SmoothState { chart: mesh.chart.clone() } }),
        MmsCase::ConstantPressure => go(&base, &ConstantLimitPressure { p1: T::c(0.75), p2: T::c(-1.25) }),
    }
}

/// Convergence study of the limit solver; the v2 column holds the surface speed s.
pub fn limit_mms_verify<T: Real>(
    coeffs: &ProblemCoefficients<T>,
    chart: &InterfaceChart<T>,
    depth: T,
    levels: &[(usize, usize, usize)],
    model: LimitModel,
    case: MmsCase,
) -> Result<MmsReport> {
    let spec = DomainSpec::new(chart.clone(), depth)?;
    let mut out = Vec::new();
    for &(n_t, n_z, n_1) in levels {
        let mesh = Arc::new(build_mesh(&spec, n_t, n_z, n_1)?);
        let (sys, sol, e) = limit_manufactured_solve(coeffs, &mesh, model, case)?;
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
    let o = fitted_orders(&out);
    Ok(MmsReport {
        problem: "limit".into(),
        case,
        eps: 0.0,
        chart: chart.describe(),
        levels: out,
        order_v1: o[0],
        order_v2: o[1],
        order_p1: o[2],
        order_p2: o[3],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_pressure_exact() {
        for src in ["0", "0.1*sin(2*pi*x)"] {
            let chart = InterfaceChart::analytic(src, 0.0, 1.0).unwrap();
            let mesh = Arc::new(build_mesh(&DomainSpec::new(chart, 0.5).unwrap(), 6, 3, 3).unwrap());
            for model in [LimitModel::Consistent, LimitModel::AsStated] {
                let (_, _, e) = limit_manufactured_solve(&ProblemCoefficients::default(), &mesh, model, MmsCase::ConstantPressure).unwrap();
                assert!(e.iter().all(|v| *v < 1e-9), "{src} {model:?} {e:?}");
            }
        }
    }

    #[test]
    fn smooth_orders() {
        let chart = InterfaceChart::analytic("0.1*sin(2*pi*x)", 0.0, 1.0).unwrap();
        let r = limit_mms_verify(&ProblemCoefficients::default(), &chart, 0.5, &[(8, 2, 4), (16, 2, 8), (32, 2, 16)], LimitModel::Consistent, MmsCase::Smooth).unwrap();
        assert!(r.order_v1.unwrap() > 0.9, "{r:?}");
        assert!(r.order_v2.unwrap() > 1.9, "{r:?}");
    }
}
