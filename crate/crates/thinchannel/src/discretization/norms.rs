//! A-priori norm bundle and the channel trace/Poincaré inequalities.
//!
//! Γ norms use the surface measure dS = |(−ζ', 1)| dx.

use serde::Serialize;

use super::assembly::{gamma_rule, integrate, POROUS_ORDER};
use super::elements::Affine;
use super::mesh::Mesh;
use super::space::{FeSpace, Field, SpaceKind};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Squared terms of the a-priori velocity estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct NormBundle {
    #[serde(rename = "v1_sq_omega1")]
    pub v1: f64,
    #[serde(rename = "d_eps_of_eps_v2_sq_omega2")]
    pub d_eps: f64,
    #[serde(rename = "dz_v2_t_sq_omega2")]
    pub dz_t: f64,
    #[serde(rename = "dz_v2_n_sq_omega2")]
    pub dz_n: f64,
    #[serde(rename = "v2_normal_sq_gamma")]
    pub normal_trace: f64,
    #[serde(rename = "eps_v2_tangential_sq_gamma")]
    pub eps_tangential_trace: f64,
}

impl NormBundle {
    pub const NAMES: [&'static str; 6] = [
        "v1_sq_omega1",
        "d_eps_of_eps_v2_sq_omega2",
        "dz_v2_t_sq_omega2",
        "dz_v2_n_sq_omega2",
        "v2_normal_sq_gamma",
        "eps_v2_tangential_sq_gamma",
    ];

    pub fn values(&self) -> [f64; 6] {
        [self.v1, self.d_eps, self.dz_t, self.dz_n, self.normal_trace, self.eps_tangential_trace]
    }
}

fn check_kind(space: &FeSpace, kind: SpaceKind, field: &Field<impl Real>) -> Result<()> {
    if space.kind != kind || field.kind != kind {
        return Err(Error::Structure(format!("expected a {kind:?} field, got {:?} on {:?}", field.kind, space.kind)));
    }
    space.check_len(field.coeffs.len())
}

/// Norm bundle of (v¹, v²) at ε. Canonical components: T = first, N = second.
pub fn norm_bundle<T: Real>(
    mesh: &Mesh<T>,
    v1_space: &FeSpace,
    v2_space: &FeSpace,
    v1: &Field<T>,
    v2: &Field<T>,
    eps: T,
    order: usize,
) -> Result<NormBundle> {
    check_kind(v1_space, SpaceKind::HdivDarcy, v1)?;
    check_kind(v2_space, SpaceKind::H1VectorStokes, v2)?;
    let a = integrate(mesh, &mesh.porous_cells, POROUS_ORDER, |g, q| {
        let v = v1.eval(v1_space, mesh, q.cell, g, q.r).value;
        v[0] * v[0] + v[1] * v[1]
    });
    let channel = |k: usize| {
        integrate(mesh, &mesh.channel_cells, order, |g, q| {
            let e = v2.eval(v2_space, mesh, q.cell, g, q.r);
            let s = mesh.chart.slope(q.x[0]);
            match k {
                0 => (0..2).fold(T::zero(), |acc, c| {
                    let d = eps * e.grad[c][0] + (eps - T::one()) * s * e.grad[c][1];
                    acc + d * d
                }),
                1 => e.grad[0][1] * e.grad[0][1],
                _ => e.grad[1][1] * e.grad[1][1],
            }
        })
    };
    let (mut nt, mut tt) = (T::zero(), T::zero());
    for g in gamma_rule(mesh, order) {
        let (c, r) = g.channel;
        let geo = Affine::new(mesh.cell_vertices(c));
        let v = v2.eval(v2_space, mesh, c, &geo, r).value;
        let (n, t) = (g.normal(), g.tangent());
        let vn = v[0] * n[0] + v[1] * n[1];
        let vt = eps * (v[0] * t[0] + v[1] * t[1]);
        let ds = g.metric() * g.weight;
        nt = nt + vn * vn * ds;
        tt = tt + vt * vt * ds;
    }
    Ok(NormBundle {
        v1: a.f64(),
        d_eps: channel(0).f64(),
        dz_t: channel(1).f64(),
        dz_n: channel(2).f64(),
        normal_trace: nt.f64(),
        eps_tangential_trace: tt.f64(),
    })
}

/// ‖w‖_{Ω₂}, ‖∂_z w‖_{Ω₂} and ‖w‖_Γ of a channel scalar.
pub fn channel_scalar_norms<T: Real>(mesh: &Mesh<T>, space: &FeSpace, w: &Field<T>, order: usize) -> Result<[T; 3]> {
    check_kind(space, SpaceKind::H1ScalarChannel, w)?;
    let l2 = integrate(mesh, &mesh.channel_cells, order, |g, q| {
        let v = w.eval(space, mesh, q.cell, g, q.r).value[0];
        v * v
    });
    let dz = integrate(mesh, &mesh.channel_cells, order, |g, q| {
        let d = w.eval(space, mesh, q.cell, g, q.r).grad[0][1];
        d * d
    });
    let mut tr = T::zero();
    for g in gamma_rule(mesh, order) {
        let (c, r) = g.channel;
        let v = w.eval(space, mesh, c, &Affine::new(mesh.cell_vertices(c)), r).value[0];
        tr = tr + v * v * g.metric() * g.weight;
    }
    Ok([l2.sqrt(), dz.sqrt(), tr.sqrt()])
}

/// (‖w‖_Γ, √2(‖w‖_{Ω₂} + ‖∂_z w‖_{Ω₂})).
pub fn trace_inequality_check<T: Real>(mesh: &Mesh<T>, space: &FeSpace, w: &Field<T>, order: usize) -> Result<(T, T)> {
    let [l2, dz, tr] = channel_scalar_norms(mesh, space, w, order)?;
    Ok((tr, T::SQRT_2() * (l2 + dz)))
}

/// (‖w‖_{Ω₂}, √2(‖∂_z w‖_{Ω₂} + ‖w‖_Γ)).
pub fn trace_control_check<T: Real>(mesh: &Mesh<T>, space: &FeSpace, w: &Field<T>, order: usize) -> Result<(T, T)> {
    let [l2, dz, tr] = channel_scalar_norms(mesh, space, w, order)?;
    Ok((l2, T::SQRT_2() * (dz + tr)))
}

/// Frame components of a channel vector: ‖w_c‖, ‖∂_z w_c‖, ‖w_c‖_Γ for c = τ̂, n̂.
pub fn frame_component_norms<T: Real>(mesh: &Mesh<T>, space: &FeSpace, w: &Field<T>, order: usize) -> Result<[[T; 3]; 2]> {
    check_kind(space, SpaceKind::H1VectorStokes, w)?;
    let comp = |q: &crate::discretization::assembly::QPoint<T>, g: &Affine<T>, which: usize| {
        let e = w.eval(space, mesh, q.cell, g, q.r);
        let f = mesh.chart.frame(q.x[0]);
        let d = if which == 0 { f.tau } else { f.n };
        (e.value[0] * d[0] + e.value[1] * d[1], e.grad[0][1] * d[0] + e.grad[1][1] * d[1])
    };
    let mut out = [[T::zero(); 3]; 2];
    for (which, o) in out.iter_mut().enumerate() {
        o[0] = integrate(mesh, &mesh.channel_cells, order, |g, q| comp(q, g, which).0.powi(2)).sqrt();
        o[1] = integrate(mesh, &mesh.channel_cells, order, |g, q| comp(q, g, which).1.powi(2)).sqrt();
    }
    for g in gamma_rule(mesh, order) {
        let (c, r) = g.channel;
        let v = w.eval(space, mesh, c, &Affine::new(mesh.cell_vertices(c)), r).value;
        let (t, n) = (g.tangent(), g.normal());
        let ds = g.metric() * g.weight;
        out[0][2] = out[0][2] + (v[0] * t[0] + v[1] * t[1]).powi(2) * ds;
        out[1][2] = out[1][2] + (v[0] * n[0] + v[1] * n[1]).powi(2) * ds;
    }
    out[0][2] = out[0][2].sqrt();
    out[1][2] = out[1][2].sqrt();
    Ok(out)
}

/// Pairs (‖w_c‖, ‖∂_z w_c‖ + 2‖w_c‖_Γ) for c = τ̂ and c = n̂.
pub fn frame_poincare_check<T: Real>(mesh: &Mesh<T>, space: &FeSpace, w: &Field<T>, order: usize) -> Result<[(T, T); 2]> {
    let n = frame_component_norms(mesh, space, w, order)?;
    let two = T::c(2.0);
    Ok([(n[0][0], n[0][1] + two * n[0][2]), (n[1][0], n[1][1] + two * n[1][2])])
}

/// (‖∂_z w‖², ‖∂_z w_τ‖² + ‖∂_z w_n‖²); equal because the frame does not depend on z.
pub fn parseval_check<T: Real>(mesh: &Mesh<T>, space: &FeSpace, w: &Field<T>, order: usize) -> Result<(T, T)> {
    check_kind(space, SpaceKind::H1VectorStokes, w)?;
    let full = integrate(mesh, &mesh.channel_cells, order, |g, q| {
        let e = w.eval(space, mesh, q.cell, g, q.r);
        e.grad[0][1].powi(2) + e.grad[1][1].powi(2)
    });
    let n = frame_component_norms(mesh, space, w, order)?;
    Ok((full, n[0][1].powi(2) + n[1][1].powi(2)))
}

/// Interpolates a function of the reference point into a channel P2 space (scalar or vector).
pub fn interpolate_channel<T: Real>(mesh: &Mesh<T>, space: &FeSpace, f: impl Fn(T, T) -> [T; 2]) -> Result<Field<T>> {
    let lw = 2 * mesh.n_t + 1;
    let lh = 2 * mesh.n_z + 1;
    let comps = match space.kind {
        SpaceKind::H1ScalarChannel => 1,
        SpaceKind::H1VectorStokes => 2,
        k => return Err(Error::Structure(format!("cannot interpolate nodally into {k:?}"))),
    };
    let mut c = vec![T::zero(); space.n_dofs];
    for lk in 0..lh {
        for li in 0..lw {
            let p = mesh.channel_node_position(li, lk);
            let v = f(p[0], p[1]);
            let node = lk * lw + li;
            for k in 0..comps {
                c[comps * node + k] = v[k];
            }
        }
    }
    Field::new(space, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_mesh;
    use crate::geometry::{DomainSpec, InterfaceChart};

    fn mesh(src: &str) -> Mesh<f64> {
        let chart = InterfaceChart::analytic(src, 0.0, 1.0).unwrap();
        build_mesh(&DomainSpec::new(chart, 0.5).unwrap(), 8, 4, 2).unwrap()
    }

    #[test]
    fn constant_field_trace() {
        let m = mesh("0");
        let s = FeSpace::new(&m, SpaceKind::H1ScalarChannel);
        let w = interpolate_channel(&m, &s, |_, _| [1.0, 0.0]).unwrap();
        let (lhs, rhs) = trace_inequality_check(&m, &s, &w, 6).unwrap();
        assert!((lhs - 1.0).abs() < 1e-13 && (rhs - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn zero_trace_field() {
        let m = mesh("0.1*sin(2*pi*x)");
        let s = FeSpace::new(&m, SpaceKind::H1ScalarChannel);
        let zeta = m.chart.clone();
        // z − ζ vanishes on Γ; its interpolant is off only by the chord sag
        let w = interpolate_channel(&m, &s, |x, z| [z - zeta.zeta(x), 0.0]).unwrap();
        let (lhs, rhs) = trace_inequality_check(&m, &s, &w, 6).unwrap();
        assert!(lhs < 1e-2 && lhs <= rhs, "{lhs} {rhs}");
        let flat = mesh("0");
        let sf = FeSpace::new(&flat, SpaceKind::H1ScalarChannel);
        let w = interpolate_channel(&flat, &sf, |_, z| [z, 0.0]).unwrap();
        assert!(trace_inequality_check(&flat, &sf, &w, 6).unwrap().0 < 1e-15);
    }

    #[test]
    fn constant_tangent_bundle() {
        let m = mesh("0");
        let v1s = FeSpace::new(&m, SpaceKind::HdivDarcy);
        let v2s = FeSpace::new(&m, SpaceKind::H1VectorStokes);
        let v2 = interpolate_channel(&m, &v2s, |_, _| [1.0, 0.0]).unwrap();
        let v1 = Field::zeros(&v1s);
        let eps = 0.3;
        let b = norm_bundle(&m, &v1s, &v2s, &v1, &v2, eps, 6).unwrap();
        assert!([b.v1, b.d_eps, b.dz_t, b.dz_n, b.normal_trace].iter().all(|v| v.abs() < 1e-28));
        assert!((b.eps_tangential_trace - eps * eps).abs() < 1e-14);
    }

    #[test]
    fn bundle_matches_closed_form() {
        // v² = (z², 0) on the flat channel: ‖∂_z v_T‖² = ∫4z² = 4/3, ε D^ε part is zero (no x-dependence)
        let m = mesh("0");
        let v1s = FeSpace::new(&m, SpaceKind::HdivDarcy);
        let v2s = FeSpace::new(&m, SpaceKind::H1VectorStokes);
        let v2 = interpolate_channel(&m, &v2s, |x, z| [z * z, x * x]).unwrap();
        let b = norm_bundle(&m, &v1s, &v2s, &Field::zeros(&v1s), &v2, 0.5, 6).unwrap();
        assert!((b.dz_t - 4.0 / 3.0).abs() < 1e-12);
        assert!(b.dz_n.abs() < 1e-14);
        // ε ∂ₓ v_N = 2εx: ∫ (2·0.5·x)² = 1/3
        assert!((b.d_eps - 1.0 / 3.0).abs() < 1e-12);
        // v·n̂ on Γ = x², ∫ x⁴ = 1/5
        assert!((b.normal_trace - 0.2).abs() < 1e-12);
    }

    #[test]
    fn parseval_on_curved_chart() {
        let m = mesh("0.1*sin(2*pi*x)");
        let s = FeSpace::new(&m, SpaceKind::H1VectorStokes);
        let w = interpolate_channel(&m, &s, |x, z| [(3.0 * x * z).sin(), x * z * z - z]).unwrap();
        let (a, b) = parseval_check(&m, &s, &w, 6).unwrap();
        assert!((a - b).abs() < 1e-10 * a.max(1.0));
        let checks = frame_poincare_check(&m, &s, &w, 6).unwrap();
        assert!(checks.iter().all(|(l, r)| l <= r));
    }

    #[test]
    fn kind_mismatch_is_structural() {
        let m = mesh("0");
        let s = FeSpace::new(&m, SpaceKind::H1ScalarChannel);
        let v = FeSpace::new(&m, SpaceKind::H1VectorStokes);
        let w = Field::<f64>::zeros(&v);
        assert!(matches!(trace_inequality_check(&m, &s, &w, 6), Err(Error::Structure(_))));
    }
}
