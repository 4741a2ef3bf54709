//! Legacy ASCII VTK export.

use std::fmt::Write as _;
use std::path::Path;

use super::elements::Affine;
use super::mesh::Mesh;
use super::space::{FeSpace, Field};
use crate::error::Result;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub enum Data {
    Scalar(Vec<f64>),
    Vector(Vec<[f64; 2]>),
}

impl Data {
    fn len(&self) -> usize {
        match self {
            Data::Scalar(v) => v.len(),
            Data::Vector(v) => v.len(),
        }
    }
}

/// Unstructured grid with a single cell type.
#[derive(Clone, Debug, Default)]
pub struct VtkPiece {
    pub title: String,
    pub points: Vec<[f64; 2]>,
    pub cells: Vec<Vec<usize>>,
    /// 5 = triangle, 4 = polyline.
    pub cell_type: u8,
    pub point_data: Vec<(String, Data)>,
    pub cell_data: Vec<(String, Data)>,
}

impl VtkPiece {
    pub fn to_vtk_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# vtk DataFile Version 3.0\n{}\nASCII\nDATASET UNSTRUCTURED_GRID", self.title);
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
        }
        let size: usize = self.cells.iter().map(|c| c.len() + 1).sum();
        let _ = writeln!(s, "CELLS {} {}", self.cells.len(), size);
        for c in &self.cells {
            let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(s, "{} {}", c.len(), ids.join(" "));
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.cells.len());
        for _ in &self.cells {
            let _ = writeln!(s, "{}", self.cell_type);
        }
        write_section(&mut s, "POINT_DATA", self.points.len(), &self.point_data);
        write_section(&mut s, "CELL_DATA", self.cells.len(), &self.cell_data);
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_vtk_string())?;
        Ok(())
    }
}

fn write_section(s: &mut String, header: &str, n: usize, data: &[(String, Data)]) {
    let data: Vec<_> = data.iter().filter(|(_, d)| d.len() == n).collect();
    if data.is_empty() {
        return;
    }
    let _ = writeln!(s, "{header} {n}");
    for (name, d) in data {
        match d {
            Data::Scalar(v) => {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in v {
                    let _ = writeln!(s, "{x:e}");
                }
            }
            Data::Vector(v) => {
                let _ = writeln!(s, "VECTORS {name} double");
                for x in v {
                    let _ = writeln!(s, "{:e} {:e} 0", x[0], x[1]);
                }
            }
        }
    }
}

/// Ω₁ triangles with cell-centred v¹ and p¹.
pub fn porous_piece<T: Real>(mesh: &Mesh<T>, v1_space: &FeSpace, v1: &Field<T>, p1_space: &FeSpace, p1: &Field<T>) -> VtkPiece {
    let w = mesh.n_t + 1;
    let n_pts = (mesh.n_1 + 1) * w;
    let points = mesh.vertices[..n_pts].iter().map(|p| [p[0].f64(), p[1].f64()]).collect();
    let third = T::c(1.0 / 3.0);
    let (mut cells, mut vel, mut pre) = (Vec::new(), Vec::new(), Vec::new());
    for &c in &mesh.porous_cells {
        cells.push(mesh.cells[c].v.to_vec());
        let geo = Affine::new(mesh.cell_vertices(c));
        let v = v1.eval(v1_space, mesh, c, &geo, [third, third]).value;
        vel.push([v[0].f64(), v[1].f64()]);
        pre.push(p1.eval(p1_space, mesh, c, &geo, [third, third]).value[0].f64());
    }
    VtkPiece {
        title: "porous region".into(),
        points,
        cells,
        cell_type: 5,
        point_data: Vec::new(),
        cell_data: vec![("v1".into(), Data::Vector(vel)), ("p1".into(), Data::Scalar(pre))],
    }
}

/// Ω₂ triangles with v² and p² at the vertices, plus any extra vertex arrays.
pub fn channel_piece<T: Real>(mesh: &Mesh<T>, v2: &Field<T>, p2: &Field<T>, extra: Vec<(String, Data)>) -> VtkPiece {
    let w = mesh.n_t + 1;
    let base = mesh.n_1 * w;
    let points: Vec<[f64; 2]> = mesh.vertices[base..].iter().map(|p| [p[0].f64(), p[1].f64()]).collect();
    let cells = mesh.channel_cells.iter().map(|&c| mesh.cells[c].v.iter().map(|v| v - base).collect()).collect();
    let (mut vel, mut pre) = (Vec::new(), Vec::new());
    for k in mesh.n_1..=mesh.rows() {
        for i in 0..w {
            let node = mesh.channel_node_index(2 * i, 2 * k);
            vel.push([v2.coeffs[2 * node].f64(), v2.coeffs[2 * node + 1].f64()]);
            pre.push(p2.coeffs[mesh.channel_vertex_index(i, k)].f64());
        }
    }
    let mut point_data = vec![("v2".into(), Data::Vector(vel)), ("p2".into(), Data::Scalar(pre))];
    point_data.extend(extra);
    VtkPiece { title: "channel region".into(), points, cells, cell_type: 5, point_data, cell_data: Vec::new() }
}

/// Γ as one polyline through the mesh vertices (x_i, ζ(x_i)).
pub fn gamma_polyline<T: Real>(mesh: &Mesh<T>, point_data: Vec<(String, Data)>) -> VtkPiece {
    let points: Vec<[f64; 2]> = mesh.xs.iter().zip(&mesh.zeta_nodes).map(|(x, z)| [x.f64(), z.f64()]).collect();
    let cells = vec![(0..points.len()).collect()];
    VtkPiece { title: "interface".into(), points, cells, cell_type: 4, point_data, cell_data: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_mesh, SpaceKind};
    use crate::geometry::{DomainSpec, InterfaceChart};

    #[test]
    fn writes_well_formed_channel_file() {
        let chart = InterfaceChart::analytic("0", 0.0, 1.0).unwrap();
        let mesh = build_mesh(&DomainSpec::new(chart, 0.5).unwrap(), 4, 2, 2).unwrap();
        let v2 = Field::<f64>::zeros(&FeSpace::new(&mesh, SpaceKind::H1VectorStokes));
        let p2 = Field::<f64>::zeros(&FeSpace::new(&mesh, SpaceKind::L2PressureChannel));
        let s = channel_piece(&mesh, &v2, &p2, Vec::new()).to_vtk_string();
        assert!(s.starts_with("# vtk DataFile Version 3.0"));
        assert!(s.contains("POINTS 15 double"));
        assert!(s.contains("CELLS 16 64"));
        assert!(s.contains("POINT_DATA 15"));
        let poly = gamma_polyline(&mesh, vec![("u".into(), Data::Scalar(vec![0.0; 5]))]).to_vtk_string();
        assert!(poly.contains("CELLS 1 6") && poly.contains("SCALARS u double 1"));
    }
}
