//! Reference-element shape functions and the affine cell map.

use crate::scalar::{Mat2, Real, Vec2};

/// Affine map from the reference triangle (0,0),(1,0),(0,1).
#[derive(Clone, Copy, Debug)]
pub struct Affine<T> {
    pub p: [Vec2<T>; 3],
    pub jac: Mat2<T>,
    pub det: T,
    inv_t: Mat2<T>,
}

impl<T: Real> Affine<T> {
    pub fn new(p: [Vec2<T>; 3]) -> Self {
        let jac = [[p[1][0] - p[0][0], p[2][0] - p[0][0]], [p[1][1] - p[0][1], p[2][1] - p[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        // J^{-T}
        let inv_t = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
        Affine { p, jac, det, inv_t }
    }

    pub fn area(&self) -> T {
        self.det.abs() * T::c(0.5)
    }

    pub fn map(&self, r: [T; 2]) -> Vec2<T> {
        [
            self.p[0][0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.p[0][1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    /// Physical gradient from a reference gradient.
    pub fn grad(&self, g: [T; 2]) -> Vec2<T> {
        [self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1], self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1]]
    }

    /// Reference coordinates of a physical point.
    pub fn inverse(&self, x: Vec2<T>) -> [T; 2] {
        let d = [x[0] - self.p[0][0], x[1] - self.p[0][1]];
        // J^{-1} = (J^{-T})^T
        [self.inv_t[0][0] * d[0] + self.inv_t[1][0] * d[1], self.inv_t[0][1] * d[0] + self.inv_t[1][1] * d[1]]
    }
}

pub fn barycentric<T: Real>(r: [T; 2]) -> [T; 3] {
    [T::one() - r[0] - r[1], r[0], r[1]]
}

const BARY_GRAD: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// P1 values and reference gradients.
pub fn p1_ref<T: Real>(r: [T; 2]) -> ([T; 3], [[T; 2]; 3]) {
    let l = barycentric(r);
    let g = BARY_GRAD.map(|g| [T::c(g[0]), T::c(g[1])]);
    (l, g)
}

/// P2 values and reference gradients: vertices 0..3, then the midpoint of
/// edge j (opposite vertex j) at index 3 + j.
pub fn p2_ref<T: Real>(r: [T; 2]) -> ([T; 6], [[T; 2]; 6]) {
    let l = barycentric(r);
    let g = BARY_GRAD.map(|g| [T::c(g[0]), T::c(g[1])]);
    let two = T::c(2.0);
    let four = T::c(4.0);
    let mut v = [T::zero(); 6];
    let mut d = [[T::zero(); 2]; 6];
    for i in 0..3 {
        v[i] = l[i] * (two * l[i] - T::one());
        let f = four * l[i] - T::one();
        d[i] = [f * g[i][0], f * g[i][1]];
    }
    for j in 0..3 {
        let (a, b) = ((j + 1) % 3, (j + 2) % 3);
        v[3 + j] = four * l[a] * l[b];
        d[3 + j] = [four * (g[a][0] * l[b] + l[a] * g[b][0]), four * (g[a][1] * l[b] + l[a] * g[b][1])];
    }
    (v, d)
}

/// Flux-normalized lowest-order Raviart–Thomas function of edge j:
/// (x − p_j)/(2|K|), unit outward flux through edge j, divergence 1/|K|.
pub fn rt0<T: Real>(geo: &Affine<T>, j: usize, x: Vec2<T>) -> (Vec2<T>, T) {
    let a2 = geo.area() * T::c(2.0);
    ([(x[0] - geo.p[j][0]) / a2, (x[1] - geo.p[j][1]) / a2], T::one() / geo.area())
}

/// Quadratic Lagrange basis on [0, 1] with nodes 0, 1/2, 1: values and d/dt.
pub fn p2_line<T: Real>(t: T) -> ([T; 3], [T; 3]) {
    let one = T::one();
    let two = T::c(2.0);
    let four = T::c(4.0);
    (
        [(one - t) * (one - two * t), four * t * (one - t), t * (two * t - one)],
        [four * t - T::c(3.0), four - T::c(8.0) * t, four * t - one],
    )
}

/// Linear Lagrange basis on [0, 1]: values and d/dt.
pub fn p1_line<T: Real>(t: T) -> ([T; 2], [T; 2]) {
    ([T::one() - t, t], [-T::one(), T::one()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_is_nodal() {
        let nodes = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.0, 0.5], [0.5, 0.0]];
        for (k, n) in nodes.iter().enumerate() {
            let (v, _) = p2_ref::<f64>(*n);
            for (i, vi) in v.iter().enumerate() {
                assert!((vi - if i == k { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let (_, d) = p2_ref::<f64>([0.2, 0.3]);
        let sx: f64 = d.iter().map(|g| g[0]).sum();
        assert!(sx.abs() < 1e-14);
    }

    #[test]
    fn rt0_has_unit_flux_on_its_edge_only() {
        let geo = Affine::<f64>::new([[0.0, 0.0], [2.0, 0.1], [0.3, 1.5]]);
        for j in 0..3 {
            for e in 0..3 {
                let a = geo.p[(e + 1) % 3];
                let b = geo.p[(e + 2) % 3];
                let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                let t = [b[0] - a[0], b[1] - a[1]];
                let normal = [t[1], -t[0]]; // outward, length |e|
                let (v, _) = rt0(&geo, j, mid);
                let flux = v[0] * normal[0] + v[1] * normal[1];
                assert!((flux - if e == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn affine_inverse_round_trips() {
        let geo = Affine::<f64>::new([[0.1, 0.0], [1.0, 0.3], [0.2, 0.9]]);
        let r = [0.25, 0.6];
        let back = geo.inverse(geo.map(r));
        assert!((back[0] - r[0]).abs() < 1e-15 && (back[1] - r[1]).abs() < 1e-15);
    }

    #[test]
    fn line_bases_partition_unity() {
        for &t in &[0.0, 0.3, 0.5, 1.0] {
            let (v, d) = p2_line::<f64>(t);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15 && d.iter().sum::<f64>().abs() < 1e-14);
            let (v, _) = p1_line::<f64>(t);
            assert!((v[0] + v[1] - 1.0).abs() < 1e-15);
        }
    }
}
