//! Column-sheared triangular mesh of Ω₁ ∪ Ω₂.
//!
//! Vertices sit on the lattice (i, k), i = 0..=n_t along G and k = 0..=n_1+n_z
//! upwards; row k = n_1 lies on Γ. Each column strip is an affine shear of a
//! rectangle, every lattice quad is split along its (i,k)–(i+1,k+1) diagonal.
//! Edges (and P2 midpoint nodes) are addressed by the sum of their endpoint
//! lattice indices, which is unique.

use crate::error::{Error, Result};
use crate::geometry::{normal_lower_bound_sampled, DomainSpec, InterfaceChart};
use crate::scalar::{Real, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Porous,
    Channel,
}

#[derive(Clone, Copy, Debug)]
pub struct Cell {
    pub v: [usize; 3],
    pub region: Region,
    pub column: usize,
    pub row: usize,
    pub upper: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct Edge<T> {
    pub v: [usize; 2],
    /// Lattice address (i_a + i_b, k_a + k_b).
    pub lattice: (usize, usize),
    pub normal: Vec2<T>,
    pub length: T,
}

#[derive(Clone, Debug)]
pub struct Mesh<T> {
    pub n_t: usize,
    pub n_z: usize,
    pub n_1: usize,
    pub level: usize,
    pub depth: T,
    pub chart: InterfaceChart<T>,
    pub xs: Vec<T>,
    pub zeta_nodes: Vec<T>,
    pub vertices: Vec<Vec2<T>>,
    pub cells: Vec<Cell>,
    pub cell_edges: Vec<[usize; 3]>,
    pub edges: Vec<Edge<T>>,
    edge_of_lattice: Vec<usize>,
    pub porous_cells: Vec<usize>,
    pub channel_cells: Vec<usize>,
    /// Γ edges ordered along G.
    pub gamma: Vec<usize>,
    /// (cell, local edge) of each Γ edge seen from Ω₁ and from Ω₂.
    pub gamma_porous_side: Vec<(usize, usize)>,
    pub gamma_channel_side: Vec<(usize, usize)>,
    pub top: Vec<usize>,
    pub porous_outer: Vec<usize>,
    pub channel_walls: Vec<usize>,
}

pub const NO_EDGE: usize = usize::MAX;

impl<T: Real> Mesh<T> {
    pub fn rows(&self) -> usize {
        self.n_1 + self.n_z
    }

    pub fn vertex_id(&self, i: usize, k: usize) -> usize {
        k * (self.n_t + 1) + i
    }

    pub fn dx(&self) -> T {
        self.chart.length() / T::from_usize_lossy(self.n_t)
    }

    pub fn edge_at(&self, li: usize, lk: usize) -> usize {
        self.edge_of_lattice[lk * (2 * self.n_t + 1) + li]
    }

    pub fn edge_between(&self, a: usize, b: usize) -> usize {
        let w = self.n_t + 1;
        self.edge_at(a % w + b % w, a / w + b / w)
    }

    /// Local edge j joins local vertices j+1 and j+2 (mod 3).
    pub fn local_edge_vertices(cell: &Cell, j: usize) -> [usize; 2] {
        [cell.v[(j + 1) % 3], cell.v[(j + 2) % 3]]
    }

    pub fn cell_vertices(&self, c: usize) -> [Vec2<T>; 3] {
        let v = self.cells[c].v;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    /// Outward normal of local edge j of cell c.
    pub fn outward_normal(&self, c: usize, j: usize) -> Vec2<T> {
        let p = self.cell_vertices(c);
        let a = p[(j + 1) % 3];
        let b = p[(j + 2) % 3];
        let t = [b[0] - a[0], b[1] - a[1]];
        // cells are counter-clockwise, so the outward normal is t rotated clockwise
        let l = t[0].hypot(t[1]);
        [t[1] / l, -t[0] / l]
    }

    /// +1 when the outward normal of (c, j) agrees with the global edge normal.
    pub fn edge_sign(&self, c: usize, j: usize) -> T {
        let e = &self.edges[self.cell_edges[c][j]];
        let o = self.outward_normal(c, j);
        if o[0] * e.normal[0] + o[1] * e.normal[1] > T::zero() {
            T::one()
        } else {
            -T::one()
        }
    }

    /// Lattice address (2i+a, 2k'+b) in the channel P2 node lattice for edge or vertex
    /// lattice coordinates; `k` counts from the bottom of the whole mesh.
    pub fn channel_node_index(&self, li: usize, lk: usize) -> usize {
        (lk - 2 * self.n_1) * (2 * self.n_t + 1) + li
    }

    pub fn n_channel_nodes(&self) -> usize {
        (2 * self.n_t + 1) * (2 * self.n_z + 1)
    }

    pub fn channel_vertex_index(&self, i: usize, k: usize) -> usize {
        (k - self.n_1) * (self.n_t + 1) + i
    }

    pub fn n_channel_vertices(&self) -> usize {
        (self.n_t + 1) * (self.n_z + 1)
    }

    /// Position of a channel P2 node from its lattice address.
    pub fn channel_node_position(&self, li: usize, lk: usize) -> Vec2<T> {
        let half = T::c(0.5);
        let x = self.chart.g_lo + self.dx() * T::from_usize_lossy(li) * half;
        let zeta = if li % 2 == 0 {
            self.zeta_nodes[li / 2]
        } else {
            (self.zeta_nodes[li / 2] + self.zeta_nodes[li / 2 + 1]) * half
        };
        let s = T::from_usize_lossy(lk) / T::from_usize_lossy(2 * self.n_z);
        [x, zeta + s]
    }

    /// Interpolated interface height ζ_h on the chord under x.
    pub fn chord_zeta(&self, x: T) -> (usize, T) {
        let t = ((x - self.chart.g_lo) / self.dx()).max(T::zero());
        let i = t.floor().to_usize().unwrap_or(0).min(self.n_t - 1);
        let xi = t - T::from_usize_lossy(i);
        (i, self.zeta_nodes[i] * (T::one() - xi) + self.zeta_nodes[i + 1] * xi)
    }

    /// Cell containing p and its reference coordinates (ξ, η) in that triangle.
    pub fn locate(&self, p: Vec2<T>) -> Option<(usize, [T; 2])> {
        let tol = T::c(1e-10);
        if !self.chart.contains(p[0]) {
            return None;
        }
        let (i, zh) = self.chord_zeta(p[0]);
        let xi = (p[0] - self.xs[i]) / self.dx();
        let row_f = if p[1] >= zh {
            T::from_usize_lossy(self.n_1) + (p[1] - zh) * T::from_usize_lossy(self.n_z)
        } else {
            T::from_usize_lossy(self.n_1) - (zh - p[1]) * T::from_usize_lossy(self.n_1) / self.depth
        };
        if row_f < -tol || row_f > T::from_usize_lossy(self.rows()) + tol {
            return None;
        }
        let k = row_f.floor().to_usize().unwrap_or(0).min(self.rows() - 1);
        let eta = row_f - T::from_usize_lossy(k);
        let upper = eta > xi;
        let c = 2 * (k * self.n_t + i) + usize::from(upper);
        // reference coordinates inside the triangle
        let r = if upper { [xi, eta - xi] } else { [xi - eta, eta] };
        Some((c, r))
    }
}

/// Builds the mesh; fails when the chart's normal lower bound degenerates.
pub fn build_mesh<T: Real>(spec: &DomainSpec<T>, n_t: usize, n_z: usize, n_1: usize) -> Result<Mesh<T>> {
    for (name, v) in [("n_t", n_t), ("n_z", n_z), ("n_1", n_1)] {
        if v < 2 {
            return Err(Error::param(name, format!("must be at least 2, got {v}")));
        }
    }
    let chart = spec.chart.clone();
    normal_lower_bound_sampled(&chart, 10 * n_t)?;
    let depth = spec.omega1_depth;
    let rows = n_1 + n_z;
    let w = n_t + 1;
    let dx = chart.length() / T::from_usize_lossy(n_t);
    let xs: Vec<T> = (0..=n_t).map(|i| chart.g_lo + dx * T::from_usize_lossy(i)).collect();
    let zeta_nodes: Vec<T> = xs.iter().map(|&x| chart.zeta(x)).collect();
    let mut vertices = Vec::with_capacity(w * (rows + 1));
    for k in 0..=rows {
        for i in 0..=n_t {
            let y = if k <= n_1 {
                zeta_nodes[i] - depth * T::from_usize_lossy(n_1 - k) / T::from_usize_lossy(n_1)
            } else {
                zeta_nodes[i] + T::from_usize_lossy(k - n_1) / T::from_usize_lossy(n_z)
            };
            vertices.push([xs[i], y]);
        }
    }
    let vid = |i: usize, k: usize| k * w + i;
    let mut cells = Vec::with_capacity(2 * n_t * rows);
    for k in 0..rows {
        for i in 0..n_t {
            let region = if k < n_1 { Region::Porous } else { Region::Channel };
            cells.push(Cell { v: [vid(i, k), vid(i + 1, k), vid(i + 1, k + 1)], region, column: i, row: k, upper: false });
            cells.push(Cell { v: [vid(i, k), vid(i + 1, k + 1), vid(i, k + 1)], region, column: i, row: k, upper: true });
        }
    }

    // Edges on the doubled lattice; vertex points (even, even) stay empty.
    let lw = 2 * n_t + 1;
    let lh = 2 * rows + 1;
    let mut edge_of_lattice = vec![NO_EDGE; lw * lh];
    let mut edges = Vec::new();
    for lk in 0..lh {
        for li in 0..lw {
            let (a, b) = match (li % 2, lk % 2) {
                (1, 0) => (vid(li / 2, lk / 2), vid(li / 2 + 1, lk / 2)),
                (0, 1) => (vid(li / 2, lk / 2), vid(li / 2, lk / 2 + 1)),
                (1, 1) => (vid(li / 2, lk / 2), vid(li / 2 + 1, lk / 2 + 1)),
                _ => continue,
            };
            let pa = vertices[a];
            let pb = vertices[b];
            let t = [pb[0] - pa[0], pb[1] - pa[1]];
            let length = t[0].hypot(t[1]);
            // horizontal edges point up, vertical and diagonal edges point right
            let normal = if lk % 2 == 0 { [-t[1] / length, t[0] / length] } else { [t[1] / length, -t[0] / length] };
            edge_of_lattice[lk * lw + li] = edges.len();
            edges.push(Edge { v: [a, b], lattice: (li, lk), normal, length });
        }
    }
    let cell_edges: Vec<[usize; 3]> = cells
        .iter()
        .map(|c| {
            let mut out = [0; 3];
            for (j, slot) in out.iter_mut().enumerate() {
                let [a, b] = Mesh::<T>::local_edge_vertices(c, j);
                *slot = edge_of_lattice[(a / w + b / w) * lw + (a % w + b % w)];
            }
            out
        })
        .collect();

    let porous_cells = (0..cells.len()).filter(|&c| cells[c].region == Region::Porous).collect();
    let channel_cells = (0..cells.len()).filter(|&c| cells[c].region == Region::Channel).collect();
    let horiz = |k: usize| -> Vec<usize> { (0..n_t).map(|i| edge_of_lattice[2 * k * lw + 2 * i + 1]).collect() };
    let gamma = horiz(n_1);
    let top = horiz(rows);
    let gamma_porous_side = (0..n_t).map(|i| (2 * ((n_1 - 1) * n_t + i) + 1, 0)).collect();
    let gamma_channel_side = (0..n_t).map(|i| (2 * (n_1 * n_t + i), 2)).collect();
    let mut porous_outer = horiz(0);
    let mut channel_walls = Vec::new();
    for k in 0..rows {
        for li in [0, 2 * n_t] {
            let e = edge_of_lattice[(2 * k + 1) * lw + li];
            if k < n_1 {
                porous_outer.push(e);
            } else {
                channel_walls.push(e);
            }
        }
    }
    let level = (n_t.min(n_z).min(n_1) as f64).log2().floor() as usize;
    Ok(Mesh {
        n_t,
        n_z,
        n_1,
        level,
        depth,
        chart,
        xs,
        zeta_nodes,
        vertices,
        cells,
        cell_edges,
        edges,
        edge_of_lattice,
        porous_cells,
        channel_cells,
        gamma,
        gamma_porous_side,
        gamma_channel_side,
        top,
        porous_outer,
        channel_walls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(src: &str, n_t: usize, n_z: usize, n_1: usize) -> Mesh<f64> {
        let chart = InterfaceChart::analytic(src, 0.0, 1.0).unwrap();
        build_mesh(&DomainSpec::new(chart, 0.5).unwrap(), n_t, n_z, n_1).unwrap()
    }

    fn area(m: &Mesh<f64>, c: usize) -> f64 {
        let p = m.cell_vertices(c);
        0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
    }

    #[test]
    fn counts_and_areas() {
        let m = mesh("0", 4, 2, 2);
        assert_eq!(m.n_channel_vertices(), 15);
        assert_eq!(m.cells.len(), 2 * 4 * 4);
        assert!(m.cells.iter().enumerate().all(|(c, _)| area(&m, c) > 0.0));
        let porous: f64 = m.porous_cells.iter().map(|&c| area(&m, c)).sum();
        let channel: f64 = m.channel_cells.iter().map(|&c| area(&m, c)).sum();
        assert!((porous - 0.5).abs() < 1e-14 && (channel - 1.0).abs() < 1e-14);
        let fine = mesh("0", 8, 4, 4);
        assert_eq!(fine.cells.len(), 4 * m.cells.len());
    }

    #[test]
    fn interface_is_conforming() {
        let m = mesh("0.1*sin(2*pi*x)", 6, 3, 2);
        assert_eq!(m.gamma.len(), 6);
        for (i, &e) in m.gamma.iter().enumerate() {
            let (cp, jp) = m.gamma_porous_side[i];
            let (cc, jc) = m.gamma_channel_side[i];
            assert_eq!(m.cell_edges[cp][jp], e);
            assert_eq!(m.cell_edges[cc][jc], e);
            assert_eq!(m.cells[cp].region, Region::Porous);
            assert_eq!(m.cells[cc].region, Region::Channel);
            let ev = m.edges[e].v;
            for &v in &ev {
                let p = m.vertices[v];
                assert!((p[1] - m.chart.zeta(p[0])).abs() < 1e-15);
            }
            assert!(m.edge_sign(cc, jc) < 0.0 && m.edge_sign(cp, jp) > 0.0);
            let count = m.gamma_porous_side.iter().filter(|&&(c, j)| m.cell_edges[c][j] == e).count();
            assert_eq!(count, 1);
        }
        assert_eq!(m.top.len(), 6);
        assert_eq!(m.channel_walls.len(), 6);
        assert_eq!(m.porous_outer.len(), 6 + 4);
    }

    #[test]
    fn interior_edges_have_two_cells_with_opposite_signs() {
        let m = mesh("0.2*x^2", 5, 3, 3);
        let mut seen = vec![Vec::new(); m.edges.len()];
        for c in 0..m.cells.len() {
            for j in 0..3 {
                seen[m.cell_edges[c][j]].push(m.edge_sign(c, j));
            }
        }
        let boundary = m.top.len() + m.porous_outer.len() + m.channel_walls.len();
        assert_eq!(seen.iter().filter(|s| s.len() == 1).count(), boundary);
        for s in seen.iter().filter(|s| s.len() == 2) {
            assert_eq!(s[0] + s[1], 0.0);
        }
    }

    #[test]
    fn locate_finds_cells() {
        let m = mesh("0.1*sin(2*pi*x)", 8, 4, 3);
        for c in [0, 5, 40, 77, m.cells.len() - 1] {
            let p = m.cell_vertices(c);
            let centroid = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
            let (found, r) = m.locate(centroid).unwrap();
            assert_eq!(found, c);
            assert!((r[0] - 1.0 / 3.0).abs() < 1e-12 && (r[1] - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(m.locate([0.5, 5.0]).is_none());
    }

    #[test]
    fn rejects_thin_meshes() {
        let chart = InterfaceChart::<f64>::flat(0.0, 1.0).unwrap();
        let spec = DomainSpec::new(chart, 0.5).unwrap();
        assert!(build_mesh(&spec, 4, 1, 2).is_err());
        assert!(build_mesh(&spec, 1, 2, 2).is_err());
    }
}
