//! The ε-problem on the fixed reference geometry: assembly, elimination of the
//! essential and interface constraints, and a direct saddle-point solve.

pub mod coefficients;
pub mod mms;

pub use mms::{mms_verify, MmsCase, MmsReport};

use std::sync::Arc;

use serde::Serialize;

use crate::discretization::assembly::{
    assemble_bilinear, assemble_form, assemble_linear, gamma_rule, order_for_delta, FormSpec, GammaPoint, CHANNEL_ORDER, POROUS_ORDER,
};
use crate::discretization::elements::{p2_line, Affine};
use crate::discretization::{BasisEval, FeSpace, Field, Mesh, SpaceKind};
use crate::error::{Error, Result};
use crate::geometry::normal_lower_bound;
use crate::linalg::{is_positive_semidefinite, norm2, scaled_min_singular_value, solve_saddle, CsrMatrix};
use crate::scalar::Real;

pub use coefficients::{ProblemCoefficients, QTensor, Source};


/// Smallest ε solved without an explicit conditioning check.
pub const MIN_UNCHECKED_EPS: f64 = 1.0 / 256.0;
/// Largest accepted relative residual of a direct solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// The four spaces of the coupled problem.
#[derive(Clone, Debug)]
pub struct EpsSpaces {
    pub v1: FeSpace,
    pub v2: FeSpace,
    pub p1: FeSpace,
    pub p2: FeSpace,
}

impl EpsSpaces {
    pub fn new<T: Real>(mesh: &Mesh<T>) -> Self {
        EpsSpaces {
            v1: FeSpace::new(mesh, SpaceKind::HdivDarcy),
            v2: FeSpace::new(mesh, SpaceKind::H1VectorStokes),
            p1: FeSpace::new(mesh, SpaceKind::L2PressureBulk),
            p2: FeSpace::new(mesh, SpaceKind::L2PressureChannel),
        }
    }
}

/// Sizes of the (v¹, v², p¹, p²) blocks before constraint elimination, and the
/// number of free velocity unknowns in each velocity block after it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BlockMap {
    pub v1: usize,
    pub v2: usize,
    pub p1: usize,
    pub p2: usize,
    pub v1_free: usize,
    pub v2_free: usize,
}

impl BlockMap {
    pub fn velocity(&self) -> usize {
        self.v1 + self.v2
    }

    pub fn pressure(&self) -> usize {
        self.p1 + self.p2
    }

    pub fn free(&self) -> usize {
        self.v1_free + self.v2_free
    }

    /// Block name and local index of a row of the reduced saddle system.
    pub fn name_row(&self, row: usize) -> (String, usize) {
        let free = self.free();
        if row < self.v1_free {
            ("v1".into(), row)
        } else if row < free {
            ("v2".into(), row - self.v1_free)
        } else if row < free + self.p1 {
            ("p1".into(), row - free)
        } else {
            ("p2".into(), row - free - self.p1)
        }
    }
}

/// Assembled system, full and reduced.
///
/// Velocity unknowns are u = P u_free: channel-wall nodes are dropped, top nodes keep
/// only their component along τ̂, and the flux DOF of each Γ edge is slaved to the
/// least-squares mean of v²·n̂ over that edge.
#[derive(Clone, Debug)]
pub struct EpsSystem<T> {
    pub mesh: Arc<Mesh<T>>,
    pub spaces: EpsSpaces,
    pub coeffs: ProblemCoefficients<T>,
    pub eps: T,
    pub blocks: BlockMap,
    pub a_full: CsrMatrix<T>,
    pub b_full: CsrMatrix<T>,
    pub f_full: Vec<T>,
    pub g: Vec<T>,
    pub p: CsrMatrix<T>,
    pub a: CsrMatrix<T>,
    pub b: CsrMatrix<T>,
    pub f: Vec<T>,
    pub channel_order: usize,
}

impl<T: Real> EpsSystem<T> {
    /// Replaces the right-hand side (full velocity functional and pressure functional).
    pub fn with_rhs(&self, f_full: Vec<T>, g: Vec<T>) -> Result<Self> {
        if f_full.len() != self.blocks.velocity() || g.len() != self.blocks.pressure() {
            return Err(Error::Structure("right-hand side does not match the block sizes".into()));
        }
        let f = self.p.transpose().mul_vec(&f_full);
        Ok(EpsSystem { f_full, g, f, ..self.clone() })
    }
}

/// Discrete (v¹, v², p¹, p²) at one ε.
#[derive(Clone, Debug)]
pub struct EpsSolution<T> {
    pub eps: T,
    pub v1: Field<T>,
    pub v2: Field<T>,
    pub p1: Field<T>,
    pub p2: Field<T>,
    pub residual_norm: T,
    /// ‖B u + g‖ / ‖g‖ on the full velocity.
    pub conservation_residual: T,
    /// ‖v²·n̂ − v¹·n̂‖ on Γ left by the per-edge least-squares matching.
    pub flux_mismatch: T,
    pub pivot_growth: T,
}

impl<T: Real> EpsSolution<T> {
    pub fn velocity(&self) -> Vec<T> {
        self.v1.coeffs.iter().chain(&self.v2.coeffs).copied().collect()
    }

    pub fn pressure(&self) -> Vec<T> {
        self.p1.coeffs.iter().chain(&self.p2.coeffs).copied().collect()
    }
}

/// Channel velocity basis restricted to Γ, one row of the flux-matching constraint per edge:
/// F_e = |e| ∫_e (v²·n̂) dS / ∫_e dS, with coefficients on (node, component) of the three trace nodes.
fn flux_matching_weights<T: Real>(mesh: &Mesh<T>, gp: &[GammaPoint<T>]) -> Vec<[[T; 2]; 3]> {
    let mut w = vec![[[T::zero(); 2]; 3]; mesh.n_t];
    let mut meas = vec![T::zero(); mesh.n_t];
    for q in gp {
        let (phi, _) = p2_line(q.channel.1[0]);
        // n̂ dS = (−ζ', 1) dx
        let nm = [-q.jet[1], T::one()];
        for a in 0..3 {
            for c in 0..2 {
                w[q.column][a][c] = w[q.column][a][c] + q.weight * phi[a] * nm[c];
            }
        }
        meas[q.column] = meas[q.column] + q.weight * q.metric();
    }
    for i in 0..mesh.n_t {
        let l = mesh.edges[mesh.gamma[i]].length;
        for a in 0..3 {
            for c in 0..2 {
                w[i][a][c] = w[i][a][c] * l / meas[i];
            }
        }
    }
    w
}

fn constraint_matrix<T: Real>(mesh: &Mesh<T>, spaces: &EpsSpaces, gp: &[GammaPoint<T>]) -> (CsrMatrix<T>, usize, usize) {
    let n_rt = spaces.v1.n_dofs;
    let mut is_gamma = vec![false; n_rt];
    for &e in &mesh.gamma {
        is_gamma[e] = true;
    }
    let mut t = Vec::new();
    let mut col = 0;
    for (e, &g) in is_gamma.iter().enumerate() {
        if !g {
            t.push((e, col, T::one()));
            col += 1;
        }
    }
    let v1_free = col;
    let lw = 2 * mesh.n_t + 1;
    let lh = 2 * mesh.n_z + 1;
    let mut free_col = vec![usize::MAX; spaces.v2.n_dofs];
    for node in 0..lw * lh {
        let (li, lk) = (node % lw, node / lw);
        if li == 0 || li == lw - 1 {
            continue;
        }
        if lk == lh - 1 {
            let x = mesh.channel_node_position(li, lk)[0];
            let tau = mesh.chart.frame(x).tau;
            t.push((n_rt + 2 * node, col, tau[0]));
            t.push((n_rt + 2 * node + 1, col, tau[1]));
            col += 1;
        } else {
            for c in 0..2 {
                free_col[2 * node + c] = col;
                t.push((n_rt + 2 * node + c, col, T::one()));
                col += 1;
            }
        }
    }
    let w = flux_matching_weights(mesh, gp);
    for (i, &e) in mesh.gamma.iter().enumerate() {
        for (a, wa) in w[i].iter().enumerate() {
            // trace nodes of Γ edge i sit at lk = 0, li = 2i + a
            let node = 2 * i + a;
            for (c, &v) in wa.iter().enumerate() {
                let fc = free_col[2 * node + c];
                if fc != usize::MAX && v != T::zero() {
                    t.push((e, fc, v));
                }
            }
        }
    }
    (CsrMatrix::from_triplets(n_rt + spaces.v2.n_dofs, col, &t), v1_free, col - v1_free)
}

/// Quadrature order for channel terms on this chart.
pub fn channel_order<T: Real>(mesh: &Mesh<T>) -> usize {
    let delta = normal_lower_bound(&mesh.chart).map(|d| d.f64()).unwrap_or(1.0);
    order_for_delta(CHANNEL_ORDER, delta)
}

/// ε ∂ₓw + (ε − 1) ζ' ∂_z w, i.e. ε D^ε w, for component k of a basis function.
#[inline]
pub(crate) fn eps_d_eps<T: Real>(b: &BasisEval<T>, k: usize, slope: T, eps: T) -> T {
    eps * b.grad[k][0] + (eps - T::one()) * slope * b.grad[k][1]
}

/// ε ∂ₓw₁ + (ε − 1) ζ' ∂_z w₁ + ∂_z w₂: ε times the transformed divergence.
#[inline]
pub(crate) fn eps_div<T: Real>(b: &BasisEval<T>, slope: T, eps: T) -> T {
    eps * b.grad[0][0] + (eps - T::one()) * slope * b.grad[0][1] + b.grad[1][1]
}

/// Darcy mass ∫Q v·w, divergence block −∫φ ∇·w and source ∫h¹φ on Ω₁.
pub(crate) fn porous_blocks<T: Real>(
    coeffs: &ProblemCoefficients<T>,
    mesh: &Mesh<T>,
    v1: &FeSpace,
    p1: &FeSpace,
) -> Result<(CsrMatrix<T>, CsrMatrix<T>, Vec<T>)> {
    let q = &coeffs.q;
    let a11 = assemble_bilinear(mesh, v1, v1, POROUS_ORDER, |qp| {
        let m = q.at(qp.x[0], qp.x[1]);
        move |w: &BasisEval<T>, v: &BasisEval<T>| {
            w.value[0] * (m[0][0] * v.value[0] + m[0][1] * v.value[1]) + w.value[1] * (m[1][0] * v.value[0] + m[1][1] * v.value[1])
        }
    })?;
    let b11 = assemble_form(mesh, p1, v1, FormSpec::Divergence(-T::one()), POROUS_ORDER)?;
    let h1 = &coeffs.h1;
    let g = assemble_linear(mesh, p1, POROUS_ORDER, |qp| {
        let h = h1.eval(qp.x[0], qp.x[1]);
        move |phi: &BasisEval<T>| h * phi.value[0]
    })?;
    Ok((a11, b11, g))
}

/// Assembles the fixed-geometry ε-system on `mesh`.
pub fn assemble_eps<T: Real>(coeffs: &ProblemCoefficients<T>, mesh: &Arc<Mesh<T>>) -> Result<EpsSystem<T>> {
    coeffs.validate(mesh)?;
    let eps = coeffs.eps;
    let spaces = EpsSpaces::new(mesh.as_ref());
    let order = channel_order(mesh);
    let gp = gamma_rule(mesh, order);
    let chart = &mesh.chart;

    let (a11, b11, g_p1) = porous_blocks(coeffs, mesh.as_ref(), &spaces.v1, &spaces.p1)?;
    let mut alpha_t = Vec::new();
    {
        let mut meas = vec![T::zero(); mesh.n_t];
        for g in &gp {
            meas[g.column] = meas[g.column] + g.weight * g.metric();
        }
        for (i, &e) in mesh.gamma.iter().enumerate() {
            let l = mesh.edges[e].length;
            alpha_t.push((e, e, coeffs.alpha * meas[i] / (l * l)));
        }
    }
    let a11 = a11.add(&CsrMatrix::from_triplets(spaces.v1.n_dofs, spaces.v1.n_dofs, &alpha_t))?;

    // channel block
    let (mu, beta) = (coeffs.mu, coeffs.beta);
    let a22 = assemble_bilinear(mesh, &spaces.v2, &spaces.v2, order, |qp| {
        let s = chart.slope(qp.x[0]);
        move |w: &BasisEval<T>, v: &BasisEval<T>| {
            let mut acc = T::zero();
            for k in 0..2 {
                acc = acc + eps_d_eps(w, k, s, eps) * eps_d_eps(v, k, s, eps) + w.grad[k][1] * v.grad[k][1];
            }
            mu * acc
        }
    })?;
    let mut beta_t = Vec::new();
    if beta != T::zero() {
        for g in &gp {
            let (c, r) = g.channel;
            let geo = Affine::new(mesh.cell_vertices(c));
            let basis = spaces.v2.eval(mesh, c, &geo, r);
            let dofs = spaces.v2.local_dofs(mesh, c);
            let tau = g.tangent();
            let k = eps * eps * beta * coeffs.q.sqrt_tangential(g.x, g.jet[0], tau) * g.metric() * g.weight;
            let vt: Vec<T> = basis.iter().map(|b| b.value[0] * tau[0] + b.value[1] * tau[1]).collect();
            for (i, &di) in dofs.iter().enumerate() {
                for (j, &dj) in dofs.iter().enumerate() {
                    let v = k * vt[i] * vt[j];
                    if v != T::zero() {
                        beta_t.push((di, dj, v));
                    }
                }
            }
        }
    }
    let a22 = a22.add(&CsrMatrix::from_triplets(spaces.v2.n_dofs, spaces.v2.n_dofs, &beta_t))?;

    let b22 = assemble_bilinear(mesh, &spaces.p2, &spaces.v2, order, |qp| {
        let s = chart.slope(qp.x[0]);
        move |phi: &BasisEval<T>, w: &BasisEval<T>| -phi.value[0] * eps_div(w, s, eps)
    })?;

    let f2 = coeffs.f2.clone();
    let f_v2 = assemble_linear(mesh, &spaces.v2, order, |qp| {
        let f = [f2[0].eval(qp.x[0], qp.x[1]), f2[1].eval(qp.x[0], qp.x[1])];
        move |w: &BasisEval<T>| eps * (f[0] * w.value[0] + f[1] * w.value[1])
    })?;

    let (n1, n2, m1, m2) = (spaces.v1.n_dofs, spaces.v2.n_dofs, spaces.p1.n_dofs, spaces.p2.n_dofs);
    let a_full = CsrMatrix::block(&[vec![Some(&a11), None], vec![None, Some(&a22)]], &[n1, n2], &[n1, n2])?;
    let b_full = CsrMatrix::block(&[vec![Some(&b11), None], vec![None, Some(&b22)]], &[m1, m2], &[n1, n2])?;
    let f_full: Vec<T> = vec![T::zero(); n1].into_iter().chain(f_v2).collect();
    let g: Vec<T> = g_p1.into_iter().chain(vec![T::zero(); m2]).collect();

    let (p, v1_free, v2_free) = constraint_matrix(mesh, &spaces, &gp);
    let pt = p.transpose();
    let a = pt.matmul(&a_full)?.matmul(&p)?;
    let b = b_full.matmul(&p)?;
    let f = pt.mul_vec(&f_full);
    let blocks = BlockMap { v1: n1, v2: n2, p1: m1, p2: m2, v1_free, v2_free };
    Ok(EpsSystem {
        mesh: Arc::clone(mesh),
        spaces,
        coeffs: coeffs.clone(),
        eps,
        blocks,
        a_full,
        b_full,
        f_full,
        g,
        p,
        a,
        b,
        f,
        channel_order: order,
    })
}

/// Solves the assembled system; deterministic for identical input.
pub fn solve_eps<T: Real>(system: &EpsSystem<T>) -> Result<EpsSolution<T>> {
    let blocks = system.blocks;
    let namer = move |row: usize| blocks.name_row(row);
    let sol = solve_saddle(&system.a, &system.b, &system.f, &system.g, &namer)?;
    if system.eps < T::c(MIN_UNCHECKED_EPS) && (sol.pivot_growth > T::c(1e12) || sol.pivot_ratio < T::c(1e-15)) {
        return Err(Error::Conditioning(format!(
            "eps = {} below {MIN_UNCHECKED_EPS}: pivot growth {:e}, pivot ratio {:e}",
            system.eps, sol.pivot_growth, sol.pivot_ratio
        )));
    }
    if !(sol.relative_residual < T::c(RESIDUAL_TOLERANCE)) {
        return Err(Error::Conditioning(format!("relative residual {:e} after refinement", sol.relative_residual)));
    }
    let u = system.p.mul_vec(&sol.u);
    let bu = system.b_full.mul_vec(&u);
    let r: Vec<T> = bu.iter().zip(&system.g).map(|(&x, &y)| x + y).collect();
    let gn = norm2(&system.g);
    let conservation_residual = if gn > T::zero() { norm2(&r) / gn } else { norm2(&r) };
    let (u1, u2) = u.split_at(blocks.v1);
    let (p1, p2) = sol.p.split_at(blocks.p1);
    let s = &system.spaces;
    let mut out = EpsSolution {
        eps: system.eps,
        v1: Field::new(&s.v1, u1.to_vec())?,
        v2: Field::new(&s.v2, u2.to_vec())?,
        p1: Field::new(&s.p1, p1.to_vec())?,
        p2: Field::new(&s.p2, p2.to_vec())?,
        residual_norm: sol.relative_residual,
        conservation_residual,
        flux_mismatch: T::zero(),
        pivot_growth: sol.pivot_growth,
    };
    out.flux_mismatch = flux_mismatch(system, &out);
    Ok(out)
}

/// Normal flux of v¹ on Γ edge i (flux DOF over edge length).
pub fn porous_normal_flux<T: Real>(mesh: &Mesh<T>, v1: &Field<T>, i: usize) -> T {
    let e = mesh.gamma[i];
    v1.coeffs[e] / mesh.edges[e].length
}

fn flux_mismatch<T: Real>(system: &EpsSystem<T>, sol: &EpsSolution<T>) -> T {
    let mesh = &system.mesh;
    let mut acc = T::zero();
    for g in gamma_rule(mesh, system.channel_order) {
        let (c, r) = g.channel;
        let geo = Affine::new(mesh.cell_vertices(c));
        let v = sol.v2.eval(&system.spaces.v2, mesh, c, &geo, r).value;
        let n = g.normal();
        let d = v[0] * n[0] + v[1] * n[1] - porous_normal_flux(mesh, &sol.v1, g.column);
        acc = acc + d * d * g.metric() * g.weight;
    }
    acc.sqrt()
}

/// Diagonal testing: (uᵀ A u, F(u) + G(p)); the two agree for an exact solve.
pub fn energy_identity<T: Real>(system: &EpsSystem<T>, sol: &EpsSolution<T>) -> (T, T) {
    let u = sol.velocity();
    let p = sol.pressure();
    let au = system.a_full.mul_vec(&u);
    let lhs = u.iter().zip(&au).fold(T::zero(), |s, (&a, &b)| s + a * b);
    let rhs = u.iter().zip(&system.f_full).chain(p.iter().zip(&system.g)).fold(T::zero(), |s, (&a, &b)| s + a * b);
    (lhs, rhs)
}

/// Velocity norm (H(div) on Ω₁, H¹ on Ω₂) on the free unknowns and L² pressure norm.
pub fn norm_matrices<T: Real>(system: &EpsSystem<T>) -> Result<(CsrMatrix<T>, CsrMatrix<T>)> {
    let mesh = system.mesh.as_ref();
    let s = &system.spaces;
    let one = T::one();
    let hdiv = assemble_form(mesh, &s.v1, &s.v1, FormSpec::Mass(one), POROUS_ORDER)?
        .add(&assemble_form(mesh, &s.v1, &s.v1, FormSpec::DivDiv(one), POROUS_ORDER)?)?;
    let h1 = assemble_form(mesh, &s.v2, &s.v2, FormSpec::Mass(one), 4)?.add(&assemble_form(mesh, &s.v2, &s.v2, FormSpec::Stiffness(one), 4)?)?;
    let (n1, n2) = (s.v1.n_dofs, s.v2.n_dofs);
    let mv = CsrMatrix::block(&[vec![Some(&hdiv), None], vec![None, Some(&h1)]], &[n1, n2], &[n1, n2])?;
    let mv = system.p.transpose().matmul(&mv)?.matmul(&system.p)?;
    let m1 = assemble_form(mesh, &s.p1, &s.p1, FormSpec::Mass(one), 2)?;
    let m2 = assemble_form(mesh, &s.p2, &s.p2, FormSpec::Mass(one), 4)?;
    let (k1, k2) = (s.p1.n_dofs, s.p2.n_dofs);
    let mp = CsrMatrix::block(&[vec![Some(&m1), None], vec![None, Some(&m2)]], &[k1, k2], &[k1, k2])?;
    Ok((mv, mp))
}

/// Smallest singular value of the norm-scaled coupling block B.
pub fn infsup_estimate<T: Real>(system: &EpsSystem<T>) -> Result<T> {
    let total = system.blocks.free() + system.blocks.pressure();
    if total > crate::linalg::INFSUP_MAX_DOFS {
        return Err(Error::Size(format!("{total} DOFs exceed the dense inf-sup limit of {}", crate::linalg::INFSUP_MAX_DOFS)));
    }
    let (mv, mp) = norm_matrices(system)?;
    scaled_min_singular_value(&system.b, &mv, &mp)
}

/// Largest asymmetry of the reduced A block and whether it is positive semidefinite.
pub fn a_block_check<T: Real>(a: &CsrMatrix<T>) -> (T, bool) {
    let shift = a.max_abs() * T::c(1e-12);
    (a.max_asymmetry(), is_positive_semidefinite(a, shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_mesh;
    use crate::geometry::{DomainSpec, InterfaceChart};

    fn mesh(src: &str, n: usize) -> Arc<Mesh<f64>> {
        let chart = InterfaceChart::analytic(src, 0.0, 1.0).unwrap();
        Arc::new(build_mesh(&DomainSpec::new(chart, 0.5).unwrap(), n, n / 2, n / 2).unwrap())
    }

    #[test]
    fn flat_unit_eps_has_no_twist_blocks() {
        // at ε = 1 and ζ ≡ 0 the channel block is μ(∇v:∇w) exactly
        let m = mesh("0", 4);
        let sys = assemble_eps(&ProblemCoefficients::default().with_eps(1.0), &m).unwrap();
        let s = &sys.spaces;
        let stiff = assemble_form(m.as_ref(), &s.v2, &s.v2, FormSpec::Stiffness(1.0), 6).unwrap();
        let n1 = s.v1.n_dofs;
        let a22 = sys.a_full.select(&(n1..n1 + s.v2.n_dofs).collect::<Vec<_>>(), &(n1..n1 + s.v2.n_dofs).collect::<Vec<_>>());
        // β term only touches Γ nodes; compare away from Γ
        let lw = 2 * m.n_t + 1;
        for r in 2 * 2 * lw..s.v2.n_dofs {
            for (c, v) in a22.row(r) {
                assert!((v - stiff.get(r, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let m = mesh("0.1*sin(2*pi*x)", 4);
        let sys = assemble_eps(&ProblemCoefficients::default().zero_data().with_eps(0.5), &m).unwrap();
        assert!(sys.f.iter().chain(&sys.g).all(|v| *v == 0.0));
        let sol = solve_eps(&sys).unwrap();
        assert!(sol.velocity().iter().chain(&sol.pressure()).all(|v| *v == 0.0));
        assert_eq!(sol.residual_norm, 0.0);
    }

    #[test]
    fn solve_is_deterministic_and_conservative() {
        let m = mesh("0.1*sin(2*pi*x)", 6);
        let sys = assemble_eps(&ProblemCoefficients::default().with_eps(0.25), &m).unwrap();
        let a = solve_eps(&sys).unwrap();
        let b = solve_eps(&sys).unwrap();
        assert_eq!(a.velocity(), b.velocity());
        assert_eq!(a.pressure(), b.pressure());
        assert!(a.residual_norm < 1e-10 && a.conservation_residual < 1e-10, "{} {}", a.residual_norm, a.conservation_residual);
        let (lhs, rhs) = energy_identity(&sys, &a);
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{lhs} {rhs}");
        let (asym, psd) = a_block_check(&sys.a);
        assert!(asym < 1e-12 && psd);
    }

    #[test]
    fn flux_is_matched_on_interface() {
        let m = mesh("0.1*sin(2*pi*x)", 6);
        let sys = assemble_eps(&ProblemCoefficients::default().with_eps(0.5), &m).unwrap();
        let sol = solve_eps(&sys).unwrap();
        // constrained DOFs reproduce the least-squares mean of v²·n̂ exactly
        let gp = gamma_rule(m.as_ref(), sys.channel_order);
        let w = flux_matching_weights(m.as_ref(), &gp);
        for (i, &e) in m.gamma.iter().enumerate() {
            let mut f = 0.0;
            for a in 0..3 {
                for c in 0..2 {
                    f += w[i][a][c] * sol.v2.coeffs[2 * (2 * i + a) + c];
                }
            }
            assert!((f - sol.v1.coeffs[e]).abs() < 1e-14);
        }
        assert!(sol.flux_mismatch.is_finite());
    }

    #[test]
    fn rejects_bad_eps() {
        let m = mesh("0", 4);
        for e in [0.0, -1.0, 1.5] {
            let err = assemble_eps(&ProblemCoefficients::default().with_eps(e), &m).unwrap_err();
            assert!(matches!(err, Error::Parameter { ref name, .. } if name == "eps"));
        }
    }

    #[test]
    fn infsup_is_positive_on_coarse_flat_mesh() {
        let m = mesh("0", 4);
        let sys = assemble_eps(&ProblemCoefficients::default(), &m).unwrap();
        let s = infsup_estimate(&sys).unwrap();
        assert!(s > 0.05, "{s}");
    }
}
