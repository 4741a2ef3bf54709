use crate::scalar::Real;

/// Gauss–Legendre rule with `n` points on [0, 1] (weights sum to 1).
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Newton iteration on P_n starting from the Chebyshev guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) * 0.5, w * 0.5));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Points needed for a 1D rule exact to polynomial degree `order`.
pub fn points_for_order(order: usize) -> usize {
    order / 2 + 1
}

/// Rule on [0, 1] exact for polynomials of degree `order`.
pub fn line_rule<T: Real>(order: usize) -> Vec<(T, T)> {
    gauss_legendre_unit(points_for_order(order)).into_iter().map(|(x, w)| (T::c(x), T::c(w))).collect()
}

/// Collapsed-product rule on the reference triangle (0,0),(1,0),(0,1), exact to degree `order`.
/// Returns barycentric-free reference coordinates (ξ, η) and weights summing to 1/2.
pub fn triangle_rule<T: Real>(order: usize) -> Vec<([T; 2], T)> {
    let n = (order + 2).div_ceil(2);
    let g = gauss_legendre_unit(n);
    let mut out = Vec::with_capacity(n * n);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            let xi = u;
            let eta = v * (1.0 - u);
            out.push(([T::c(xi), T::c(eta)], T::c(wu * wv * (1.0 - u))));
        }
    }
    out
}
