//! Element loops: quadrature points, bilinear and linear forms, sparse accumulation.

use rayon::prelude::*;

use super::elements::Affine;
use super::mesh::Mesh;
use super::quadrature::{line_rule, triangle_rule};
use super::space::{BasisEval, FeSpace};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::scalar::{Real, Vec2};

/// Channel quadrature order (curved metric factors).
pub const CHANNEL_ORDER: usize = 6;
/// Porous-block quadrature order.
pub const POROUS_ORDER: usize = 4;

/// Quadrature order for a chart, raised when the normal bound is small.
pub fn order_for_delta(base: usize, delta: f64) -> usize {
    if delta < 0.25 {
        base + 4
    } else if delta < 0.5 {
        base + 2
    } else {
        base
    }
}

/// One quadrature point of a cell: physical point, reference point and weight (|K| included).
#[derive(Clone, Copy, Debug)]
pub struct QPoint<T> {
    pub cell: usize,
    pub x: Vec2<T>,
    pub r: [T; 2],
    pub weight: T,
}

pub fn cell_qpoints<T: Real>(mesh: &Mesh<T>, cell: usize, order: usize) -> (Affine<T>, Vec<QPoint<T>>) {
    let geo = Affine::new(mesh.cell_vertices(cell));
    let jac = geo.det.abs();
    let pts = triangle_rule::<T>(order)
        .into_iter()
        .map(|(r, w)| QPoint { cell, x: geo.map(r), r, weight: w * jac })
        .collect();
    (geo, pts)
}

fn check_pair(test: &FeSpace, trial: &FeSpace) -> Result<()> {
    if test.kind.region().is_none() || test.kind.region() != trial.kind.region() {
        return Err(Error::Structure(format!("{:?} and {:?} do not live on the same cells", test.kind, trial.kind)));
    }
    Ok(())
}

/// Assembles Σ_K Σ_q kernel(q)(φ_i, ψ_j) into a (test × trial) matrix.
///
/// `kernel` is called once per quadrature point and returns the pointwise
/// bilinear integrand (the weight is applied by the caller of the inner closure).
pub fn assemble_bilinear<T, F, G>(mesh: &Mesh<T>, test: &FeSpace, trial: &FeSpace, order: usize, kernel: F) -> Result<CsrMatrix<T>>
where
    T: Real,
    F: Fn(&QPoint<T>) -> G + Sync,
    G: Fn(&BasisEval<T>, &BasisEval<T>) -> T,
{
    check_pair(test, trial)?;
    let blocks: Vec<Vec<(usize, usize, T)>> = test
        .cells
        .par_iter()
        .map(|&c| {
            let (geo, qps) = cell_qpoints(mesh, c, order);
            let rows = test.local_dofs(mesh, c);
            let cols = trial.local_dofs(mesh, c);
            let mut local = vec![T::zero(); rows.len() * cols.len()];
            for q in &qps {
                let bt = test.eval(mesh, c, &geo, q.r);
                let bu = trial.eval(mesh, c, &geo, q.r);
                let k = kernel(q);
                for (i, phi) in bt.iter().enumerate() {
                    for (j, psi) in bu.iter().enumerate() {
                        local[i * cols.len() + j] = local[i * cols.len() + j] + q.weight * k(phi, psi);
                    }
                }
            }
            let mut t = Vec::with_capacity(local.len());
            for (i, &r) in rows.iter().enumerate() {
                for (j, &cc) in cols.iter().enumerate() {
                    let v = local[i * cols.len() + j];
                    if v != T::zero() {
                        t.push((r, cc, v));
                    }
                }
            }
            t
        })
        .collect();
    let triplets: Vec<_> = blocks.into_iter().flatten().collect();
    Ok(CsrMatrix::from_triplets(test.n_dofs, trial.n_dofs, &triplets))
}

/// Assembles Σ_K Σ_q kernel(q)(φ_i) into a vector.
pub fn assemble_linear<T, F, G>(mesh: &Mesh<T>, test: &FeSpace, order: usize, kernel: F) -> Result<Vec<T>>
where
    T: Real,
    F: Fn(&QPoint<T>) -> G + Sync,
    G: Fn(&BasisEval<T>) -> T,
{
    if test.kind.region().is_none() {
        return Err(Error::Structure(format!("{:?} has no volume cells", test.kind)));
    }
    let blocks: Vec<Vec<(usize, T)>> = test
        .cells
        .par_iter()
        .map(|&c| {
            let (geo, qps) = cell_qpoints(mesh, c, order);
            let rows = test.local_dofs(mesh, c);
            let mut local = vec![T::zero(); rows.len()];
            for q in &qps {
                let k = kernel(q);
                for (i, phi) in test.eval(mesh, c, &geo, q.r).iter().enumerate() {
                    local[i] = local[i] + q.weight * k(phi);
                }
            }
            rows.into_iter().zip(local).collect()
        })
        .collect();
    let mut out = vec![T::zero(); test.n_dofs];
    for (r, v) in blocks.into_iter().flatten() {
        out[r] = out[r] + v;
    }
    Ok(out)
}

/// Integral of a pointwise quantity over the cells of a space.
pub fn integrate<T, F>(mesh: &Mesh<T>, cells: &[usize], order: usize, f: F) -> T
where
    T: Real,
    F: Fn(&Affine<T>, &QPoint<T>) -> T + Sync,
{
    let parts: Vec<T> = cells
        .par_iter()
        .map(|&c| {
            let (geo, qps) = cell_qpoints(mesh, c, order);
            qps.iter().fold(T::zero(), |s, q| s + q.weight * f(&geo, q))
        })
        .collect();
    parts.into_iter().fold(T::zero(), |a, b| a + b)
}

/// Quadrature point on the polygonal interface with its two adjacent cells.
#[derive(Clone, Copy, Debug)]
pub struct GammaPoint<T> {
    /// Column index along G.
    pub column: usize,
    pub x: T,
    /// Height of the chord (the discrete interface) at x.
    pub y: T,
    /// dx weight; multiply by `metric()` for dS.
    pub weight: T,
    /// ζ, ζ', ζ'' of the exact chart at x.
    pub jet: [T; 3],
    pub channel: (usize, [T; 2]),
    pub porous: (usize, [T; 2]),
}

impl<T: Real> GammaPoint<T> {
    pub fn metric(&self) -> T {
        T::one().hypot(self.jet[1])
    }

    /// Upward unit normal n̂(x).
    pub fn normal(&self) -> Vec2<T> {
        let m = self.metric();
        [-self.jet[1] / m, T::one() / m]
    }

    pub fn tangent(&self) -> Vec2<T> {
        let m = self.metric();
        [T::one() / m, self.jet[1] / m]
    }
}

/// Gauss points along every Γ edge, ordered along G.
pub fn gamma_rule<T: Real>(mesh: &Mesh<T>, order: usize) -> Vec<GammaPoint<T>> {
    let rule = line_rule::<T>(order);
    let dx = mesh.dx();
    let mut out = Vec::with_capacity(mesh.n_t * rule.len());
    for i in 0..mesh.n_t {
        let (za, zb) = (mesh.zeta_nodes[i], mesh.zeta_nodes[i + 1]);
        for &(t, w) in &rule {
            let x = mesh.xs[i] + dx * t;
            out.push(GammaPoint {
                column: i,
                x,
                y: za + (zb - za) * t,
                weight: w * dx,
                jet: mesh.chart.jet(x),
                // channel side: edge 2 of the lower cell runs v0 → v1
                channel: (mesh.gamma_channel_side[i].0, [t, T::zero()]),
                // porous side: edge 0 of the upper cell runs v2 → v1
                porous: (mesh.gamma_porous_side[i].0, [t, T::one() - t]),
            });
        }
    }
    out
}

/// Standard forms with a constant coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FormSpec<T> {
    /// c ∫ u·v
    Mass(T),
    /// c ∫ ∇u : ∇v
    Stiffness(T),
    /// c ∫ (∇·u)(∇·v)
    DivDiv(T),
    /// c ∫ q ∇·u, test = pressure, trial = velocity
    Divergence(T),
}

pub fn assemble_form<T: Real>(mesh: &Mesh<T>, test: &FeSpace, trial: &FeSpace, form: FormSpec<T>, order: usize) -> Result<CsrMatrix<T>> {
    match form {
        FormSpec::Mass(c) => assemble_bilinear(mesh, test, trial, order, move |_| {
            move |a: &BasisEval<T>, b: &BasisEval<T>| c * (a.value[0] * b.value[0] + a.value[1] * b.value[1])
        }),
        FormSpec::Stiffness(c) => assemble_bilinear(mesh, test, trial, order, move |_| {
            move |a: &BasisEval<T>, b: &BasisEval<T>| {
                let mut s = T::zero();
                for k in 0..2 {
                    for l in 0..2 {
                        s = s + a.grad[k][l] * b.grad[k][l];
                    }
                }
                c * s
            }
        }),
        FormSpec::DivDiv(c) => assemble_bilinear(mesh, test, trial, order, move |_| move |a: &BasisEval<T>, b: &BasisEval<T>| c * a.div * b.div),
        FormSpec::Divergence(c) => {
            assemble_bilinear(mesh, test, trial, order, move |_| move |a: &BasisEval<T>, b: &BasisEval<T>| c * a.value[0] * b.div)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::build_mesh;
    use crate::discretization::quadrature::triangle_rule;
    use crate::discretization::space::SpaceKind;
    use crate::geometry::{DomainSpec, InterfaceChart};

    fn mesh(src: &str) -> Mesh<f64> {
        let chart = InterfaceChart::analytic(src, 0.0, 1.0).unwrap();
        build_mesh(&DomainSpec::new(chart, 0.5).unwrap(), 4, 2, 2).unwrap()
    }

    #[test]
    fn pressure_mass_is_cell_area() {
        let m = mesh("0");
        let p0 = FeSpace::new(&m, SpaceKind::L2PressureBulk);
        let mass = assemble_form(&m, &p0, &p0, FormSpec::Mass(1.0), 2).unwrap();
        let total: f64 = mass.data.iter().sum();
        assert!((total - 0.5).abs() < 1e-14);
        for c in 0..p0.n_dofs {
            assert!((mass.get(c, c) - 0.5 / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rt0_mass_matches_closed_form() {
        // closed-form RT0 mass on a triangle: ∫ φ_i·φ_j with φ_j = s_j (x − p_j)/(2|K|)
        let m = mesh("0.1*sin(2*pi*x)");
        let rt = FeSpace::new(&m, SpaceKind::HdivDarcy);
        let mass = assemble_form(&m, &rt, &rt, FormSpec::Mass(1.0), 2).unwrap();
        let mut t = Vec::new();
        for &c in &m.porous_cells {
            let p = m.cell_vertices(c);
            let geo = Affine::new(p);
            let a = geo.area();
            let cen = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
            // ∫ (x−p_i)·(x−p_j) = |K| [ (c−p_i)·(c−p_j) + (1/12) Σ_k |p_k − c|² ]
            let spread: f64 = p.iter().map(|q| (q[0] - cen[0]).powi(2) + (q[1] - cen[1]).powi(2)).sum::<f64>() / 12.0;
            for i in 0..3 {
                for j in 0..3 {
                    let di = [cen[0] - p[i][0], cen[1] - p[i][1]];
                    let dj = [cen[0] - p[j][0], cen[1] - p[j][1]];
                    let v = a * (di[0] * dj[0] + di[1] * dj[1] + spread) / (4.0 * a * a);
                    let s = m.edge_sign(c, i) * m.edge_sign(c, j);
                    t.push((m.cell_edges[c][i], m.cell_edges[c][j], s * v));
                }
            }
        }
        let oracle = CsrMatrix::from_triplets(rt.n_dofs, rt.n_dofs, &t);
        let diff = mass.add(&oracle.scale(-1.0)).unwrap();
        assert!(diff.max_abs() < 1e-13, "{}", diff.max_abs());
        assert!(mass.max_asymmetry() < 1e-14);
    }

    #[test]
    fn p2_stiffness_matches_high_order_reference() {
        let m = mesh("x");
        let s = FeSpace::new(&m, SpaceKind::H1ScalarChannel);
        let k = assemble_form(&m, &s, &s, FormSpec::Stiffness(1.0), 2).unwrap();
        let k10 = assemble_form(&m, &s, &s, FormSpec::Stiffness(1.0), 10).unwrap();
        assert!(k.add(&k10.scale(-1.0)).unwrap().max_abs() < 1e-12);
        // constants lie in the kernel
        let ones = vec![1.0; s.n_dofs];
        assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        assert!(k.max_asymmetry() < 1e-12);
        // reference element matrix of P2 on the unit right triangle, vertex block
        let geo = Affine::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let mut kv = [[0.0; 6]; 6];
        for (r, w) in triangle_rule::<f64>(10) {
            let (_, g) = crate::discretization::elements::p2_ref(r);
            for i in 0..6 {
                for j in 0..6 {
                    let (a, b) = (geo.grad(g[i]), geo.grad(g[j]));
                    kv[i][j] += w * (a[0] * b[0] + a[1] * b[1]);
                }
            }
        }
        assert!((kv[0][0] - 1.0).abs() < 1e-13 && (kv[1][1] - 0.5).abs() < 1e-13 && (kv[3][3] - 8.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn gamma_points_sit_on_both_sides() {
        let m = mesh("0.1*sin(2*pi*x)");
        let pts = gamma_rule(&m, 4);
        let len: f64 = pts.iter().map(|p| p.weight).sum();
        assert!((len - 1.0).abs() < 1e-14);
        for p in &pts {
            for (c, r) in [p.channel, p.porous] {
                let q = Affine::new(m.cell_vertices(c)).map(r);
                assert!((q[0] - p.x).abs() < 1e-14 && (q[1] - p.y).abs() < 1e-14);
            }
            assert_eq!(m.cells[p.channel.0].row, m.n_1);
            assert_eq!(m.cells[p.porous.0].row, m.n_1 - 1);
        }
    }

    #[test]
    fn mismatched_spaces_are_rejected() {
        let m = mesh("0");
        let rt = FeSpace::new(&m, SpaceKind::HdivDarcy);
        let p1 = FeSpace::new(&m, SpaceKind::L2PressureChannel);
        assert!(matches!(assemble_form(&m, &p1, &rt, FormSpec::Divergence(1.0), 2), Err(Error::Structure(_))));
    }

    #[test]
    fn linear_form_integrates_constants() {
        let m = mesh("0.1*sin(2*pi*x)");
        let p1 = FeSpace::new(&m, SpaceKind::L2PressureChannel);
        let b = assemble_linear(&m, &p1, 4, |_| |phi: &BasisEval<f64>| phi.value[0]).unwrap();
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }
}
