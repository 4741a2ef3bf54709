//! Finite element spaces on the column-sheared mesh and their DOF maps.

use serde::Serialize;

use super::elements::{p1_ref, p2_ref, rt0, Affine};
use super::mesh::{Mesh, Region};
use crate::error::{Error, Result};
use crate::scalar::{Mat2, Real, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SpaceKind {
    /// Lowest-order Raviart–Thomas on Ω₁ (flux DOFs).
    HdivDarcy,
    /// Continuous P2 vectors on Ω₂.
    H1VectorStokes,
    /// Continuous P2 scalars on Ω₂.
    H1ScalarChannel,
    /// Piecewise constants on Ω₁.
    L2PressureBulk,
    /// Continuous P1 on Ω₂.
    L2PressureChannel,
    /// P2 tangential velocity along Γ (one scalar per node times τ̂).
    SurfaceH1Vector,
    /// P1 on Γ.
    SurfaceL2,
}

impl SpaceKind {
    pub fn region(self) -> Option<Region> {
        match self {
            SpaceKind::HdivDarcy | SpaceKind::L2PressureBulk => Some(Region::Porous),
            SpaceKind::H1VectorStokes | SpaceKind::H1ScalarChannel | SpaceKind::L2PressureChannel => Some(Region::Channel),
            SpaceKind::SurfaceH1Vector | SpaceKind::SurfaceL2 => None,
        }
    }
}

/// Value, gradient (rows = components) and divergence of one basis function.
#[derive(Clone, Copy, Debug, Default)]
pub struct BasisEval<T> {
    pub value: Vec2<T>,
    pub grad: Mat2<T>,
    pub div: T,
}

#[derive(Clone, Debug)]
pub struct FeSpace {
    pub kind: SpaceKind,
    pub n_dofs: usize,
    pub cells: Vec<usize>,
    /// True for DOFs carrying an essential condition (channel walls, fixed normal on Γ+1).
    pub bc_mask: Vec<bool>,
}

impl FeSpace {
    pub fn new<T: Real>(mesh: &Mesh<T>, kind: SpaceKind) -> Self {
        let n_pe = mesh.edges.iter().filter(|e| e.lattice.1 <= 2 * mesh.n_1).count();
        let (n_dofs, cells) = match kind {
            SpaceKind::HdivDarcy => (n_pe, mesh.porous_cells.clone()),
            SpaceKind::L2PressureBulk => (mesh.porous_cells.len(), mesh.porous_cells.clone()),
            SpaceKind::H1VectorStokes => (2 * mesh.n_channel_nodes(), mesh.channel_cells.clone()),
            SpaceKind::H1ScalarChannel => (mesh.n_channel_nodes(), mesh.channel_cells.clone()),
            SpaceKind::L2PressureChannel => (mesh.n_channel_vertices(), mesh.channel_cells.clone()),
            SpaceKind::SurfaceH1Vector => (2 * mesh.n_t + 1, Vec::new()),
            SpaceKind::SurfaceL2 => (mesh.n_t + 1, Vec::new()),
        };
        let mut bc_mask = vec![false; n_dofs];
        let lw = 2 * mesh.n_t + 1;
        let lh = 2 * mesh.n_z + 1;
        match kind {
            SpaceKind::H1VectorStokes => {
                for lk in 0..lh {
                    for li in 0..lw {
                        let node = lk * lw + li;
                        if li == 0 || li == lw - 1 {
                            bc_mask[2 * node] = true;
                            bc_mask[2 * node + 1] = true;
                        } else if lk == lh - 1 {
                            bc_mask[2 * node + 1] = true;
                        }
                    }
                }
            }
            SpaceKind::SurfaceH1Vector => {
                bc_mask[0] = true;
                bc_mask[n_dofs - 1] = true;
            }
            _ => {}
        }
        FeSpace { kind, n_dofs, cells, bc_mask }
    }

    /// Channel P2 node ids of a channel cell (3 vertices, then 3 edge midpoints).
    pub fn channel_nodes<T: Real>(mesh: &Mesh<T>, cell: usize) -> [usize; 6] {
        let w = mesh.n_t + 1;
        let c = &mesh.cells[cell];
        let mut out = [0; 6];
        for (a, slot) in out.iter_mut().take(3).enumerate() {
            let v = c.v[a];
            *slot = mesh.channel_node_index(2 * (v % w), 2 * (v / w));
        }
        for j in 0..3 {
            let (li, lk) = mesh.edges[mesh.cell_edges[cell][j]].lattice;
            out[3 + j] = mesh.channel_node_index(li, lk);
        }
        out
    }

    pub fn local_dofs<T: Real>(&self, mesh: &Mesh<T>, cell: usize) -> Vec<usize> {
        let w = mesh.n_t + 1;
        let c = &mesh.cells[cell];
        match self.kind {
            SpaceKind::HdivDarcy => mesh.cell_edges[cell].to_vec(),
            SpaceKind::L2PressureBulk => vec![cell],
            SpaceKind::H1VectorStokes => {
                let nodes = Self::channel_nodes(mesh, cell);
                nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect()
            }
            SpaceKind::H1ScalarChannel => Self::channel_nodes(mesh, cell).to_vec(),
            SpaceKind::L2PressureChannel => c.v.iter().map(|&v| mesh.channel_vertex_index(v % w, v / w)).collect(),
            SpaceKind::SurfaceH1Vector | SpaceKind::SurfaceL2 => Vec::new(),
        }
    }

    /// Basis functions of `cell` at reference point r (physical point x = geo.map(r)).
    pub fn eval<T: Real>(&self, mesh: &Mesh<T>, cell: usize, geo: &Affine<T>, r: [T; 2]) -> Vec<BasisEval<T>> {
        let z = T::zero();
        match self.kind {
            SpaceKind::HdivDarcy => {
                let x = geo.map(r);
                (0..3)
                    .map(|j| {
                        let s = mesh.edge_sign(cell, j);
                        let (v, d) = rt0(geo, j, x);
                        let a2 = geo.area() * T::c(2.0);
                        BasisEval { value: [s * v[0], s * v[1]], grad: [[s / a2, z], [z, s / a2]], div: s * d }
                    })
                    .collect()
            }
            SpaceKind::L2PressureBulk => vec![BasisEval { value: [T::one(), z], ..Default::default() }],
            SpaceKind::L2PressureChannel => {
                let (v, g) = p1_ref(r);
                (0..3).map(|a| BasisEval { value: [v[a], z], grad: [geo.grad(g[a]), [z, z]], div: z }).collect()
            }
            SpaceKind::H1ScalarChannel => {
                let (v, g) = p2_ref(r);
                (0..6).map(|a| BasisEval { value: [v[a], z], grad: [geo.grad(g[a]), [z, z]], div: z }).collect()
            }
            SpaceKind::H1VectorStokes => {
                let (v, g) = p2_ref(r);
                let mut out = Vec::with_capacity(12);
                for a in 0..6 {
                    let gp = geo.grad(g[a]);
                    out.push(BasisEval { value: [v[a], z], grad: [gp, [z, z]], div: gp[0] });
                    out.push(BasisEval { value: [z, v[a]], grad: [[z, z], gp], div: gp[1] });
                }
                out
            }
            SpaceKind::SurfaceH1Vector | SpaceKind::SurfaceL2 => Vec::new(),
        }
    }

    pub fn check_len(&self, coeffs: usize) -> Result<()> {
        if coeffs == self.n_dofs {
            Ok(())
        } else {
            Err(Error::Structure(format!("{:?} field has {} coefficients, space has {}", self.kind, coeffs, self.n_dofs)))
        }
    }
}

/// Coefficient vector tagged with its space.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    pub kind: SpaceKind,
    pub coeffs: Vec<T>,
}

pub type ScalarField<T> = Field<T>;
pub type VectorField<T> = Field<T>;

impl<T: Real> Field<T> {
    pub fn zeros(space: &FeSpace) -> Self {
        Field { kind: space.kind, coeffs: vec![T::zero(); space.n_dofs] }
    }

    pub fn new(space: &FeSpace, coeffs: Vec<T>) -> Result<Self> {
        space.check_len(coeffs.len())?;
        Ok(Field { kind: space.kind, coeffs })
    }

    /// Value, gradient and divergence of the field on `cell` at reference point r.
    pub fn eval(&self, space: &FeSpace, mesh: &Mesh<T>, cell: usize, geo: &Affine<T>, r: [T; 2]) -> BasisEval<T> {
        let dofs = space.local_dofs(mesh, cell);
        let basis = space.eval(mesh, cell, geo, r);
        let mut out = BasisEval::default();
        for (d, b) in dofs.iter().zip(&basis) {
            let c = self.coeffs[*d];
            for k in 0..2 {
                out.value[k] = out.value[k] + c * b.value[k];
                for l in 0..2 {
                    out.grad[k][l] = out.grad[k][l] + c * b.grad[k][l];
                }
            }
            out.div = out.div + c * b.div;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::build_mesh;
    use crate::geometry::{DomainSpec, InterfaceChart};

    fn mesh() -> Mesh<f64> {
        let chart = InterfaceChart::analytic("0.1*sin(2*pi*x)", 0.0, 1.0).unwrap();
        build_mesh(&DomainSpec::new(chart, 0.5).unwrap(), 4, 2, 2).unwrap()
    }

    #[test]
    fn dof_counts() {
        let m = mesh();
        assert_eq!(FeSpace::new(&m, SpaceKind::L2PressureChannel).n_dofs, 15);
        assert_eq!(FeSpace::new(&m, SpaceKind::H1VectorStokes).n_dofs, 2 * 9 * 5);
        assert_eq!(FeSpace::new(&m, SpaceKind::L2PressureBulk).n_dofs, 16);
        // porous edges: 4x2 quads → 3 per quad + top row + right column
        assert_eq!(FeSpace::new(&m, SpaceKind::HdivDarcy).n_dofs, 3 * 8 + 4 + 2);
    }

    #[test]
    fn p2_nodes_match_positions() {
        let m = mesh();
        let s = FeSpace::new(&m, SpaceKind::H1ScalarChannel);
        let lw = 2 * m.n_t + 1;
        for &c in &m.channel_cells {
            let geo = Affine::new(m.cell_vertices(c));
            let nodes = FeSpace::channel_nodes(&m, c);
            let refs = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.0, 0.5], [0.5, 0.0]];
            for (a, &n) in nodes.iter().enumerate() {
                let p = geo.map(refs[a]);
                let q = m.channel_node_position(n % lw, n / lw);
                assert!((p[0] - q[0]).abs() < 1e-14 && (p[1] - q[1]).abs() < 1e-14);
            }
            assert_eq!(s.local_dofs(&m, c).len(), 6);
        }
    }

    #[test]
    fn rt_normal_component_is_continuous() {
        let m = mesh();
        let s = FeSpace::new(&m, SpaceKind::HdivDarcy);
        let coeffs: Vec<f64> = (0..s.n_dofs).map(|i| (i as f64 * 0.37).sin()).collect();
        let f = Field::new(&s, coeffs).unwrap();
        // evaluate the normal trace from both sides of every interior edge at its midpoint
        let mut traces: Vec<Vec<f64>> = vec![Vec::new(); m.edges.len()];
        for &c in &m.porous_cells {
            let geo = Affine::new(m.cell_vertices(c));
            for j in 0..3 {
                let e = m.cell_edges[c][j];
                let [a, b] = [m.vertices[m.edges[e].v[0]], m.vertices[m.edges[e].v[1]]];
                let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                let v = f.eval(&s, &m, c, &geo, geo.inverse(mid)).value;
                let n = m.edges[e].normal;
                traces[e].push(v[0] * n[0] + v[1] * n[1]);
            }
        }
        for (e, t) in traces.iter().enumerate() {
            if t.len() == 2 {
                assert!((t[0] - t[1]).abs() < 1e-12);
            }
            if !t.is_empty() {
                assert!((t[0] * m.edges[e].length - f.coeffs[e]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wall_and_top_masks() {
        let m = mesh();
        let s = FeSpace::new(&m, SpaceKind::H1VectorStokes);
        let fixed = s.bc_mask.iter().filter(|&&b| b).count();
        // two walls of 5 nodes x 2 comps + 7 interior top nodes x 1 comp
        assert_eq!(fixed, 2 * 5 * 2 + 7);
        assert!(Field::new(&s, vec![0.0; 3]).is_err());
    }
}
