//! Reduced Darcy–Brinkman problem on Ω₁ × Γ and the higher-order profiles ξ, χ·n̂.
//!
//! Unknowns: RT0 Darcy flux v¹ (Γ edges included), the tangential speed s of the
//! surface velocity v² = s τ̂ (P2 along G, zero at both ends), P0 pressure p¹ and
//! P1 surface pressure p². Surface integrals are written on G with the metric
//! m = |(−ζ', 1)| made explicit, so every Γ term is a weight times dx.

pub mod mms;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::discretization::assembly::{integrate, POROUS_ORDER};
use crate::discretization::elements::{p1_line, p2_line};
use crate::discretization::quadrature::line_rule;
use crate::discretization::{assemble_form, FeSpace, Field, FormSpec, Mesh, SpaceKind};
use crate::eps_solver::{channel_order, porous_blocks, BlockMap, ProblemCoefficients};
use crate::error::{Error, Result};
use crate::linalg::{dot, is_positive_semidefinite, norm2, scaled_min_singular_value, solve_saddle, uzawa_cg, BandedLu, CsrMatrix, INFSUP_MAX_DOFS};
use crate::scalar::Real;

/// Which reduced model to assemble.
///
/// `AsStated` keeps the printed weights: (α+μ̄)m on the normal trace, μ̄m on the
/// surface gradient, m(·/m)' − m²(·) in the conservation row and m f̄·τ̂ as load.
/// `Consistent` is the ε → 0 limit of the discrete fixed-geometry problem:
/// (αm + μm²) on the normal trace, μ/m² on s', the curvature cross term
/// μζ'ζ''/m², conservation (·/m)' − m(·) and load f̄·τ̂. On a flat interface they coincide.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitModel {
    AsStated,
    #[default]
    Consistent,
}

/// Weights per dx of the Γ terms at one point of G:
/// A: nn·vₙwₙ + ns·(s wₙ + t vₙ) + ss_d·s't' + ss_0·s t,
/// B: −ψ(div_d·t' + div_0·t − div_n·wₙ), load: load·(f̄·τ̂)·t.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaCoefficients<T> {
    pub nn: T,
    pub ns: T,
    pub ss_d: T,
    pub ss_0: T,
    pub div_d: T,
    pub div_0: T,
    pub div_n: T,
    pub load: T,
}

/// Γ weights at x with chart jet (ζ, ζ', ζ'').
pub fn gamma_coefficients<T: Real>(model: LimitModel, coeffs: &ProblemCoefficients<T>, x: T, jet: [T; 3]) -> GammaCoefficients<T> {
    let [zeta, d1, d2] = jet;
    let m = T::one().hypot(d1);
    let m2 = m * m;
    let tau = [T::one() / m, d1 / m];
    let (mu, alpha) = (coeffs.mu, coeffs.alpha);
    let brinkman = coeffs.beta * coeffs.q.sqrt_tangential(x, zeta, tau) * m;
    match model {
        LimitModel::Consistent => GammaCoefficients {
            nn: alpha * m + mu * m2,
            ns: mu * d1 * d2 / m2,
            ss_d: mu / m2,
            ss_0: mu * d2 * d2 / (m2 * m2) + brinkman,
            div_d: T::one() / m,
            div_0: -d1 * d2 / (m2 * m),
            div_n: m,
            load: T::one(),
        },
        LimitModel::AsStated => GammaCoefficients {
            nn: (alpha + mu) * m,
            ns: T::zero(),
            ss_d: mu * m,
            ss_0: mu * d2 * d2 / (m2 * m) + brinkman,
            div_d: T::one(),
            div_0: -d1 * d2 / m2,
            div_n: m2,
            load: m,
        },
    }
}

/// f̄ = ∫₀¹ f²(x, ζ(x) + σ) dσ.
pub fn averaged_force<T: Real>(coeffs: &ProblemCoefficients<T>, x: T, zeta: T) -> [T; 2] {
    let mut out = [T::zero(); 2];
    for (s, w) in line_rule::<T>(8) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = *o + w * coeffs.f2[k].eval(x, zeta + s);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct LimitSpaces {
    pub v1: FeSpace,
    pub s: FeSpace,
    pub p1: FeSpace,
    pub p2: FeSpace,
}

impl LimitSpaces {
    pub fn new<T: Real>(mesh: &Mesh<T>) -> Self {
        LimitSpaces {
            v1: FeSpace::new(mesh, SpaceKind::HdivDarcy),
            s: FeSpace::new(mesh, SpaceKind::SurfaceH1Vector),
            p1: FeSpace::new(mesh, SpaceKind::L2PressureBulk),
            p2: FeSpace::new(mesh, SpaceKind::SurfaceL2),
        }
    }
}

/// Assembled limit system; `p` drops the two end nodes of s.
#[derive(Clone, Debug)]
pub struct LimitSystem<T> {
    pub mesh: Arc<Mesh<T>>,
    pub spaces: LimitSpaces,
    pub coeffs: ProblemCoefficients<T>,
    pub model: LimitModel,
    pub blocks: BlockMap,
    pub a_full: CsrMatrix<T>,
    pub b_full: CsrMatrix<T>,
    pub f_full: Vec<T>,
    pub g: Vec<T>,
    pub p: CsrMatrix<T>,
    pub a: CsrMatrix<T>,
    pub b: CsrMatrix<T>,
    pub f: Vec<T>,
    pub order: usize,
}

impl<T: Real> LimitSystem<T> {
    pub fn with_rhs(&self, f_full: Vec<T>, g: Vec<T>) -> Result<Self> {
        if f_full.len() != self.blocks.velocity() || g.len() != self.blocks.pressure() {
            return Err(Error::Structure("right-hand side does not match the block sizes".into()));
        }
        let f = self.p.transpose().mul_vec(&f_full);
        Ok(LimitSystem { f_full, g, f, ..self.clone() })
    }
}

/// One Gauss point of column i of G with the local bases.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint<T> {
    pub column: usize,
    pub x: T,
    pub weight: T,
    pub jet: [T; 3],
    pub phi: [T; 3],
    /// d/dx of the P2 basis.
    pub dphi: [T; 3],
    pub psi: [T; 2],
}

impl<T: Real> SurfacePoint<T> {
    pub fn metric(&self) -> T {
        T::one().hypot(self.jet[1])
    }

    pub fn tangent(&self) -> [T; 2] {
        let m = self.metric();
        [T::one() / m, self.jet[1] / m]
    }

    pub fn normal(&self) -> [T; 2] {
        let m = self.metric();
        [-self.jet[1] / m, T::one() / m]
    }
}

/// Gauss points along G, ordered by column.
pub fn surface_rule<T: Real>(mesh: &Mesh<T>, order: usize) -> Vec<SurfacePoint<T>> {
    let dx = mesh.dx();
    let rule = line_rule::<T>(order);
    let mut out = Vec::with_capacity(rule.len() * mesh.n_t);
    for i in 0..mesh.n_t {
        for &(t, w) in &rule {
            let x = mesh.xs[i] + dx * t;
            let (phi, dphi) = p2_line(t);
            let (psi, _) = p1_line(t);
            out.push(SurfacePoint {
                column: i,
                x,
                weight: w * dx,
                jet: mesh.chart.jet(x),
                phi,
                dphi: [dphi[0] / dx, dphi[1] / dx, dphi[2] / dx],
                psi,
            });
        }
    }
    out
}

/// Assembles the limit system on the same mesh as the ε-problem (ε unused).
pub fn assemble_limit<T: Real>(coeffs: &ProblemCoefficients<T>, mesh: &Arc<Mesh<T>>, model: LimitModel) -> Result<LimitSystem<T>> {
    coeffs.with_eps(T::one()).validate(mesh)?;
    let spaces = LimitSpaces::new(mesh.as_ref());
    let order = channel_order(mesh);
    let (a11, b11, g1) = porous_blocks(coeffs, mesh.as_ref(), &spaces.v1, &spaces.p1)?;
    let (n1, ns, m1, m2) = (spaces.v1.n_dofs, spaces.s.n_dofs, spaces.p1.n_dofs, spaces.p2.n_dofs);
    let (mut at, mut bt) = (a11.triplets(), b11.triplets());
    let mut f = vec![T::zero(); n1 + ns];
    for q in surface_rule(mesh.as_ref(), order) {
        let c = gamma_coefficients(model, coeffs, q.x, q.jet);
        let e = mesh.gamma[q.column];
        let inv_l = T::one() / mesh.edges[e].length;
        let w = q.weight;
        let tau = q.tangent();
        let fb = averaged_force(coeffs, q.x, q.jet[0]);
        let ft = fb[0] * tau[0] + fb[1] * tau[1];
        at.push((e, e, w * c.nn * inv_l * inv_l));
        for a in 0..3 {
            let sa = n1 + 2 * q.column + a;
            let v = w * c.ns * q.phi[a] * inv_l;
            at.push((e, sa, v));
            at.push((sa, e, v));
            for b in 0..3 {
                let sb = n1 + 2 * q.column + b;
                at.push((sa, sb, w * (c.ss_d * q.dphi[a] * q.dphi[b] + c.ss_0 * q.phi[a] * q.phi[b])));
            }
            f[sa] = f[sa] + w * c.load * ft * q.phi[a];
            for j in 0..2 {
                let pj = m1 + q.column + j;
                bt.push((pj, sa, -w * q.psi[j] * (c.div_d * q.dphi[a] + c.div_0 * q.phi[a])));
            }
        }
        for j in 0..2 {
            bt.push((m1 + q.column + j, e, w * q.psi[j] * c.div_n * inv_l));
        }
    }
    let a_full = CsrMatrix::from_triplets(n1 + ns, n1 + ns, &at);
    let b_full = CsrMatrix::from_triplets(m1 + m2, n1 + ns, &bt);
    let mut g = g1;
    g.extend(vec![T::zero(); m2]);

    let mut pt: Vec<(usize, usize, T)> = (0..n1).map(|i| (i, i, T::one())).collect();
    pt.extend((1..ns - 1).map(|k| (n1 + k, n1 + k - 1, T::one())));
    let p = CsrMatrix::from_triplets(n1 + ns, n1 + ns - 2, &pt);
    let ptr = p.transpose();
    let a = ptr.matmul(&a_full)?.matmul(&p)?;
    let b = b_full.matmul(&p)?;
    let fr = ptr.mul_vec(&f);
    Ok(LimitSystem {
        mesh: Arc::clone(mesh),
        spaces,
        coeffs: coeffs.clone(),
        model,
        blocks: BlockMap { v1: n1, v2: ns, p1: m1, p2: m2, v1_free: n1, v2_free: ns - 2 },
        a_full,
        b_full,
        f_full: f,
        g,
        p,
        a,
        b,
        f: fr,
        order,
    })
}

/// ξ(x, z) = vₙ(x)(ζ_h(x) + 1 − z) with vₙ the Darcy normal flux per Γ edge.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XiProfile<T> {
    pub normal_flux: Vec<T>,
}

impl<T: Real> XiProfile<T> {
    pub fn eval(&self, mesh: &Mesh<T>, x: T, z: T) -> T {
        let (i, zh) = mesh.chord_zeta(x);
        self.normal_flux[i] * (zh + T::one() - z)
    }

    /// ∂_z ξ on column i.
    pub fn dz(&self, column: usize) -> T {
        -self.normal_flux[column]
    }
}

/// Solved limit fields and post-processed profiles.
#[derive(Clone, Debug)]
pub struct LimitSolution<T> {
    pub model: LimitModel,
    pub v1: Field<T>,
    /// Tangential speed s at the P2 nodes of G; v² = s τ̂.
    pub s: Field<T>,
    pub p1: Field<T>,
    pub p2: Field<T>,
    pub xi: XiProfile<T>,
    /// χ·n̂ = −vₙ per Γ edge.
    pub chi_n: Vec<T>,
    pub mu_bar: T,
    pub residual_norm: T,
    pub conservation_residual: T,
    /// ‖(B u)_{p²}‖ / ‖u‖: the discrete surface conservation row.
    pub surface_conservation: T,
    pub pivot_growth: T,
}

impl<T: Real> LimitSolution<T> {
    pub fn velocity(&self) -> Vec<T> {
        self.v1.coeffs.iter().chain(&self.s.coeffs).copied().collect()
    }

    pub fn pressure(&self) -> Vec<T> {
        self.p1.coeffs.iter().chain(&self.p2.coeffs).copied().collect()
    }

    /// s at x on column i (local coordinate from x).
    pub fn speed_at(&self, mesh: &Mesh<T>, x: T) -> T {
        let (i, t) = column_coordinate(mesh, x);
        let (phi, _) = p2_line(t);
        (0..3).fold(T::zero(), |acc, a| acc + phi[a] * self.s.coeffs[2 * i + a])
    }

    /// Surface velocity s τ̂ at x.
    pub fn surface_velocity(&self, mesh: &Mesh<T>, x: T) -> [T; 2] {
        let s = self.speed_at(mesh, x);
        let f = mesh.chart.frame(x);
        [s * f.tau[0], s * f.tau[1]]
    }

    pub fn surface_pressure(&self, mesh: &Mesh<T>, x: T) -> T {
        let (i, t) = column_coordinate(mesh, x);
        self.p2.coeffs[i] * (T::one() - t) + self.p2.coeffs[i + 1] * t
    }

    /// Darcy normal flux per unit length on the Γ edge under x.
    pub fn normal_flux(&self, mesh: &Mesh<T>, x: T) -> T {
        self.xi.normal_flux[column_coordinate(mesh, x).0]
    }
}

/// Column index and local coordinate t ∈ [0, 1] of x.
pub fn column_coordinate<T: Real>(mesh: &Mesh<T>, x: T) -> (usize, T) {
    let u = ((x - mesh.chart.g_lo) / mesh.dx()).max(T::zero());
    let i = u.floor().to_usize().unwrap_or(0).min(mesh.n_t - 1);
    (i, u - T::from_usize_lossy(i))
}

fn unpack<T: Real>(system: &LimitSystem<T>, u_free: &[T], p: &[T], residual: T, growth: T) -> Result<LimitSolution<T>> {
    let mesh = system.mesh.as_ref();
    let blocks = system.blocks;
    let u = system.p.mul_vec(u_free);
    let bu = system.b_full.mul_vec(&u);
    let r: Vec<T> = bu.iter().zip(&system.g).map(|(&a, &b)| a + b).collect();
    let gn = norm2(&system.g);
    let conservation_residual = if gn > T::zero() { norm2(&r) / gn } else { norm2(&r) };
    let un = norm2(&u);
    let surf = norm2(&bu[blocks.p1..]);
    let surface_conservation = if un > T::zero() { surf / un } else { surf };
    let (u1, us) = u.split_at(blocks.v1);
    let (p1, p2) = p.split_at(blocks.p1);
    let normal_flux: Vec<T> = mesh.gamma.iter().map(|&e| u1[e] / mesh.edges[e].length).collect();
    let chi_n = normal_flux.iter().map(|&v| -v).collect();
    let sp = &system.spaces;
    Ok(LimitSolution {
        model: system.model,
        v1: Field::new(&sp.v1, u1.to_vec())?,
        s: Field::new(&sp.s, us.to_vec())?,
        p1: Field::new(&sp.p1, p1.to_vec())?,
        p2: Field::new(&sp.p2, p2.to_vec())?,
        xi: XiProfile { normal_flux },
        chi_n,
        // ∫ μ dz over the unit channel
        mu_bar: system.coeffs.mu,
        residual_norm: residual,
        conservation_residual,
        surface_conservation,
        pivot_growth: growth,
    })
}

/// Direct solve of the limit system.
pub fn solve_limit<T: Real>(system: &LimitSystem<T>) -> Result<LimitSolution<T>> {
    let blocks = system.blocks;
    let namer = move |row: usize| {
        let (name, i) = blocks.name_row(row);
        (if name == "v2" { "s".to_string() } else { name }, i)
    };
    let sol = solve_saddle(&system.a, &system.b, &system.f, &system.g, &namer)?;
    if !(sol.relative_residual < T::c(crate::eps_solver::RESIDUAL_TOLERANCE)) {
        return Err(Error::Conditioning(format!("relative residual {:e} after refinement", sol.relative_residual)));
    }
    unpack(system, &sol.u, &sol.p, sol.relative_residual, sol.pivot_growth)
}

/// Uzawa/CG solve on the A⁰, B⁰ blocks; agrees with the direct path to `tol`.
pub fn solve_limit_uzawa<T: Real>(system: &LimitSystem<T>, tol: T, max_iter: usize) -> Result<(LimitSolution<T>, usize)> {
    let (u, p, iters) = uzawa_cg(&system.a, &system.b, &system.f, &system.g, tol, max_iter)?;
    let au = system.a.mul_vec(&u);
    let btp = system.b.transpose().mul_vec(&p);
    let bu = system.b.mul_vec(&u);
    let r1: Vec<T> = au.iter().zip(&btp).zip(&system.f).map(|((&a, &b), &f)| a + b - f).collect();
    let r2: Vec<T> = bu.iter().zip(&system.g).map(|(&a, &g)| a + g).collect();
    let rn = (dot(&r1, &r1) + dot(&r2, &r2)).sqrt();
    let bn = (dot(&system.f, &system.f) + dot(&system.g, &system.g)).sqrt();
    let rel = if bn > T::zero() { rn / bn } else { rn };
    Ok((unpack(system, &u, &p, rel, T::one())?, iters))
}

/// (uᵀA⁰u, F(u) + G(p)).
pub fn limit_energy_identity<T: Real>(system: &LimitSystem<T>, sol: &LimitSolution<T>) -> (T, T) {
    let u = sol.velocity();
    let p = sol.pressure();
    let lhs = dot(&u, &system.a_full.mul_vec(&u));
    (lhs, dot(&u, &system.f_full) + dot(&p, &system.g))
}

/// Reduced A⁰ and B⁰ blocks.
pub fn mixed_operator_blocks<T: Real>(system: &LimitSystem<T>) -> (&CsrMatrix<T>, &CsrMatrix<T>) {
    (&system.a, &system.b)
}

/// Smallest Rayleigh quotient of A⁰ over `samples` random vectors projected onto ker(B⁰).
pub fn kernel_coercivity<T: Real>(system: &LimitSystem<T>, samples: usize, seed: u64) -> Result<T> {
    let (a, b) = mixed_operator_blocks(system);
    let bt = b.transpose();
    let bbt = b.matmul(&bt)?;
    let lu = BandedLu::factor(&bbt, true)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut best = T::infinity();
    for _ in 0..samples {
        let x: Vec<T> = (0..a.ncols).map(|_| T::c(rng.gen_range(-1.0..1.0))).collect();
        let y = lu.solve(&b.mul_vec(&x));
        let corr = bt.mul_vec(&y);
        let k: Vec<T> = x.iter().zip(&corr).map(|(&u, &c)| u - c).collect();
        let kk = dot(&k, &k);
        if kk > T::zero() {
            best = best.min(dot(&k, &a.mul_vec(&k)) / kk);
        }
    }
    Ok(best)
}

/// Velocity norm (H(div) on Ω₁, L²(Γ) normal trace, H¹ of s on G) and pressure norm (L² on Ω₁ and Γ).
pub fn limit_norm_matrices<T: Real>(system: &LimitSystem<T>) -> Result<(CsrMatrix<T>, CsrMatrix<T>)> {
    let mesh = system.mesh.as_ref();
    let sp = &system.spaces;
    let one = T::one();
    let hdiv = assemble_form(mesh, &sp.v1, &sp.v1, FormSpec::Mass(one), POROUS_ORDER)?
        .add(&assemble_form(mesh, &sp.v1, &sp.v1, FormSpec::DivDiv(one), POROUS_ORDER)?)?;
    let (n1, ns, m1, m2) = (sp.v1.n_dofs, sp.s.n_dofs, sp.p1.n_dofs, sp.p2.n_dofs);
    let mut vt = hdiv.triplets();
    let mut pt = assemble_form(mesh, &sp.p1, &sp.p1, FormSpec::Mass(one), 2)?.triplets();
    for q in surface_rule(mesh, system.order) {
        let e = mesh.gamma[q.column];
        let l = mesh.edges[e].length;
        let m = q.metric();
        vt.push((e, e, q.weight * m / (l * l)));
        for a in 0..3 {
            for b in 0..3 {
                let v = q.weight * (q.phi[a] * q.phi[b] + q.dphi[a] * q.dphi[b]);
                vt.push((n1 + 2 * q.column + a, n1 + 2 * q.column + b, v));
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                pt.push((m1 + q.column + i, m1 + q.column + j, q.weight * m * q.psi[i] * q.psi[j]));
            }
        }
    }
    let mv = CsrMatrix::from_triplets(n1 + ns, n1 + ns, &vt);
    let mv = system.p.transpose().matmul(&mv)?.matmul(&system.p)?;
    Ok((mv, CsrMatrix::from_triplets(m1 + m2, m1 + m2, &pt)))
}

/// Smallest singular value of the norm-scaled B⁰.
pub fn limit_infsup_estimate<T: Real>(system: &LimitSystem<T>) -> Result<T> {
    let total = system.blocks.free() + system.blocks.pressure();
    if total > INFSUP_MAX_DOFS {
        return Err(Error::Size(format!("{total} DOFs exceed the dense inf-sup limit of {INFSUP_MAX_DOFS}")));
    }
    let (mv, mp) = limit_norm_matrices(system)?;
    scaled_min_singular_value(&system.b, &mv, &mp)
}

/// Whether A⁰ is symmetric (returned asymmetry) and positive semidefinite.
pub fn limit_a_block_check<T: Real>(system: &LimitSystem<T>) -> (T, bool) {
    let a = &system.a;
    (a.max_asymmetry(), is_positive_semidefinite(a, a.max_abs() * T::c(1e-12)))
}

/// ξ as a P2 channel field; nodes on column boundaries average the two neighbouring fluxes.
pub fn reconstruct_xi<T: Real>(limit: &LimitSolution<T>, mesh: &Mesh<T>) -> Result<Field<T>> {
    let space = FeSpace::new(mesh, SpaceKind::H1ScalarChannel);
    let lw = 2 * mesh.n_t + 1;
    let lh = 2 * mesh.n_z + 1;
    let vn = &limit.xi.normal_flux;
    let mut c = vec![T::zero(); space.n_dofs];
    for lk in 0..lh {
        for li in 0..lw {
            let flux = if li % 2 == 1 {
                vn[li / 2]
            } else if li == 0 {
                vn[0]
            } else if li == lw - 1 {
                vn[mesh.n_t - 1]
            } else {
                (vn[li / 2 - 1] + vn[li / 2]) * T::c(0.5)
            };
            let s = T::from_usize_lossy(lk) / T::from_usize_lossy(2 * mesh.n_z);
            c[lk * lw + li] = flux * (T::one() - s);
        }
    }
    Field::new(&space, c)
}

/// ∫_{Ω₂} ξ² computed column by column from the profile.
pub fn xi_norm_sq<T: Real>(limit: &LimitSolution<T>, mesh: &Mesh<T>, order: usize) -> T {
    integrate(mesh, &mesh.channel_cells, order, |_, q| limit.xi.eval(mesh, q.x[0], q.x[1]).powi(2))
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
    fn models_coincide_on_flat_interface() {
        let m = mesh("0", 6);
        let c = ProblemCoefficients::default();
        let a = assemble_limit(&c, &m, LimitModel::AsStated).unwrap();
        let b = assemble_limit(&c, &m, LimitModel::Consistent).unwrap();
        assert!(a.a.add(&b.a.scale(-1.0)).unwrap().max_abs() < 1e-14);
        assert!(a.b.add(&b.b.scale(-1.0)).unwrap().max_abs() < 1e-14);
        assert_eq!(a.f, b.f);
        let q = gamma_coefficients(LimitModel::Consistent, &c, 0.3, [0.0, 0.0, 0.0]);
        assert_eq!((q.nn, q.ns, q.ss_d, q.div_n, q.load), (2.0, 0.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn zero_data_zero_solution() {
        let m = mesh("0.1*sin(2*pi*x)", 6);
        let sys = assemble_limit(&ProblemCoefficients::default().zero_data(), &m, LimitModel::Consistent).unwrap();
        let sol = solve_limit(&sys).unwrap();
        assert!(sol.velocity().iter().chain(&sol.pressure()).all(|v| *v == 0.0));
        assert!(sol.xi.normal_flux.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn deterministic_linear_and_conservative() {
        let m = mesh("0.1*sin(2*pi*x)", 8);
        let c = ProblemCoefficients::default();
        for model in [LimitModel::Consistent, LimitModel::AsStated] {
            let sys = assemble_limit(&c, &m, model).unwrap();
            let a = solve_limit(&sys).unwrap();
            let b = solve_limit(&sys).unwrap();
            assert_eq!(a.velocity(), b.velocity());
            assert!(a.residual_norm < 1e-10 && a.conservation_residual < 1e-10 && a.surface_conservation < 1e-10);
            let sys3 = assemble_limit(&c.scale_data(3.0), &m, model).unwrap();
            let s3 = solve_limit(&sys3).unwrap();
            for (x, y) in s3.velocity().iter().zip(a.velocity()) {
                assert!((x - 3.0 * y).abs() < 1e-9 * (1.0 + y.abs()));
            }
            let (lhs, rhs) = limit_energy_identity(&sys, &a);
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
            assert!(a.s.coeffs[0] == 0.0 && *a.s.coeffs.last().unwrap() == 0.0);
        }
    }

    #[test]
    fn xi_profile_and_chi() {
        let m = mesh("0", 4);
        let limit = LimitSolution {
            model: LimitModel::Consistent,
            v1: Field::zeros(&FeSpace::new(m.as_ref(), SpaceKind::HdivDarcy)),
            s: Field::zeros(&FeSpace::new(m.as_ref(), SpaceKind::SurfaceH1Vector)),
            p1: Field::zeros(&FeSpace::new(m.as_ref(), SpaceKind::L2PressureBulk)),
            p2: Field::zeros(&FeSpace::new(m.as_ref(), SpaceKind::SurfaceL2)),
            xi: XiProfile { normal_flux: vec![1.0; 4] },
            chi_n: vec![-1.0; 4],
            mu_bar: 1.0,
            residual_norm: 0.0,
            conservation_residual: 0.0,
            surface_conservation: 0.0,
            pivot_growth: 1.0,
        };
        assert_eq!(limit.xi.eval(&m, 0.3, 0.0), 1.0);
        assert_eq!(limit.xi.eval(&m, 0.3, 1.0), 0.0);
        assert!((limit.xi.eval(&m, 0.3, 0.25) - 0.75).abs() < 1e-15);
        assert_eq!(limit.xi.dz(2), -1.0);
        let f = reconstruct_xi(&limit, &m).unwrap();
        let lw = 2 * m.n_t + 1;
        assert!(f.coeffs[..lw].iter().all(|v| *v == 1.0));
        assert!(f.coeffs[f.coeffs.len() - lw..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uzawa_matches_direct() {
        let m = mesh("0.1*sin(2*pi*x)", 6);
        let sys = assemble_limit(&ProblemCoefficients::default(), &m, LimitModel::Consistent).unwrap();
        let d = solve_limit(&sys).unwrap();
        let (u, _) = solve_limit_uzawa(&sys, 1e-12, 2000).unwrap();
        for (a, b) in d.velocity().iter().zip(u.velocity()) {
            assert!((a - b).abs() < 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn kernel_coercive_and_infsup_positive() {
        let m = mesh("0.1*sin(2*pi*x)", 4);
        let sys = assemble_limit(&ProblemCoefficients::default(), &m, LimitModel::Consistent).unwrap();
        assert!(kernel_coercivity(&sys, 20, 7).unwrap() > 0.0);
        assert!(limit_infsup_estimate(&sys).unwrap() > 0.0);
        let (asym, psd) = limit_a_block_check(&sys);
        assert!(asym < 1e-12 && psd);
    }

    #[test]
    fn divergence_row_of_constant_tangential_field() {
        // v¹ = 0, s ≡ 1 on the interior nodes: only the p² rows respond
        let m = mesh("0", 4);
        let sys = assemble_limit(&ProblemCoefficients::default(), &m, LimitModel::Consistent).unwrap();
        let mut u = vec![0.0; sys.blocks.free()];
        for v in &mut u[sys.blocks.v1_free..] {
            *v = 1.0;
        }
        let bu = sys.b.mul_vec(&u);
        assert!(bu[..sys.blocks.p1].iter().all(|v| *v == 0.0));
        assert!(bu[sys.blocks.p1..].iter().any(|v| *v != 0.0));
    }
}
