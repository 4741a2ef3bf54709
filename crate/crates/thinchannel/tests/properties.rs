//! Property-based invariants of the operators, frames, maps and solvers.

use std::sync::Arc;

use proptest::prelude::*;
use thinchannel::asymptotics::fit_slope;
use thinchannel::discretization::build_mesh;
use thinchannel::eps_solver::{assemble_eps, energy_identity, solve_eps};
use thinchannel::geometry::{map_from_reference, map_to_reference};
use thinchannel::operators::{d_epsilon_at, transformed_divergence_at, transformed_gradient_at};
use thinchannel::{Chart, Coefficients, Domain};

fn curved() -> Chart {
    Chart::analytic("0.1*sin(2*pi*x)", 0.0, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn d_epsilon_is_linear(a in -3.0..3.0f64, dx in prop::array::uniform2(-5.0..5.0f64), dz in prop::array::uniform2(-5.0..5.0f64),
                           ex in prop::array::uniform2(-5.0..5.0f64), ez in prop::array::uniform2(-5.0..5.0f64),
                           slope in -2.0..2.0f64, eps in 0.01..1.0f64) {
        let combo = |u: [f64; 2], v: [f64; 2]| [a * u[0] + v[0], a * u[1] + v[1]];
        let lhs = d_epsilon_at(combo(dx, ex), combo(dz, ez), slope, eps);
        let (p, q) = (d_epsilon_at(dx, dz, slope, eps), d_epsilon_at(ex, ez, slope, eps));
        for c in 0..2 {
            prop_assert!((lhs[c] - (a * p[c] + q[c])).abs() < 1e-9 * (1.0 + lhs[c].abs()) / eps);
        }
    }

    #[test]
    fn divergence_is_trace(dx in prop::array::uniform2(-5.0..5.0f64), dz in prop::array::uniform2(-5.0..5.0f64), slope in -2.0..2.0f64, eps in 0.01..1.0f64) {
        let g = transformed_gradient_at(dx, dz, slope, eps);
        let d = transformed_divergence_at(dx, dz, slope, eps);
        prop_assert!((g[0][0] + g[1][1] - d).abs() < 1e-10 * (1.0 + d.abs()));
    }

    #[test]
    fn reference_map_round_trips(x in 0.0..1.0f64, t in 0.0..1.0f64, eps in 0.01..1.0f64) {
        let c = curved();
        let p = [x, c.zeta(x) + t];
        let y = map_from_reference(&c, eps, p).unwrap();
        let back = map_to_reference(&c, eps, y).unwrap();
        prop_assert!((back[0] - p[0]).abs() < 1e-14 && (back[1] - p[1]).abs() < 1e-12);
    }

    #[test]
    fn frame_is_orthonormal_and_isometric(x in 0.0..1.0f64, w in prop::array::uniform2(-10.0..10.0f64)) {
        let f = curved().frame(x);
        let c = f.decompose(w);
        let r = f.recompose(c);
        prop_assert!((c[0].hypot(c[1]) - w[0].hypot(w[1])).abs() < 1e-12);
        prop_assert!((r[0] - w[0]).abs() < 1e-12 && (r[1] - w[1]).abs() < 1e-12);
        prop_assert!((f.tau[0] * f.n[0] + f.tau[1] * f.n[1]).abs() < 1e-15);
        prop_assert!(f.n[1] > 0.0);
    }

    #[test]
    fn fit_slope_recovers_power_laws(p in -3.0..3.0f64, c in 0.1..10.0f64) {
        let xs: Vec<f64> = (0..6).map(|i| 0.5f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(p)).collect();
        prop_assert!((fit_slope(&xs, &ys).unwrap() - p).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Solutions are linear in the data and satisfy uᵀAu = F·u + G·p.
    #[test]
    fn eps_solution_is_linear_and_balances_energy(scale in 0.1..4.0f64, eps in 0.05..1.0f64) {
        let mesh = Arc::new(build_mesh(&Domain::new(curved(), 0.5).unwrap(), 6, 3, 3).unwrap());
        let base = Coefficients::default().with_eps(eps);
        let s1 = assemble_eps(&base, &mesh).unwrap();
        let s2 = assemble_eps(&base.scale_data(scale), &mesh).unwrap();
        let (u1, u2) = (solve_eps(&s1).unwrap(), solve_eps(&s2).unwrap());
        for (a, b) in u1.velocity().iter().zip(u2.velocity()) {
            prop_assert!((scale * a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
        let (q, w) = energy_identity(&s2, &u2);
        prop_assert!((q - w).abs() < 1e-9 * q.abs().max(1e-12));
        prop_assert!(q >= 0.0);
    }
}
