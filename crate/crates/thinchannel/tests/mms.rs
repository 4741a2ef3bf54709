//! Manufactured-solution convergence of both solvers on flat and curved charts.

use thinchannel::eps_solver::{mms_verify, MmsCase, MmsReport};
use thinchannel::limit_solver::mms::limit_mms_verify;
use thinchannel::limit_solver::LimitModel;
use thinchannel::{Chart, Coefficients};

const LEVELS: [(usize, usize, usize); 3] = [(8, 4, 4), (16, 8, 8), (32, 16, 16)];

fn chart(src: &str) -> Chart {
    Chart::analytic(src, 0.0, 1.0).unwrap()
}

fn assert_orders(r: &MmsReport, label: &str) {
    let v1 = r.order_v1.unwrap();
    let v2 = r.order_v2.unwrap();
    assert!(v1 >= 0.9, "{label}: Darcy velocity order {v1}");
    assert!(v2 >= 1.9, "{label}: channel velocity order {v2}");
    assert!(r.levels.windows(2).all(|w| w[1].v1 < w[0].v1 && w[1].v2 < w[0].v2), "{label}: errors must shrink");
}

#[test]
fn eps_solver_orders_flat_and_curved() {
    for src in ["0", "0.1*sin(2*pi*x)"] {
        for eps in [1.0, 0.25, 1.0 / 32.0] {
            let c = Coefficients::default().with_eps(eps);
            let r = mms_verify(&c, &chart(src), 0.5, &LEVELS, MmsCase::Smooth).unwrap();
            assert_orders(&r, &format!("eps solver, {src}, eps = {eps}"));
        }
    }
}

#[test]
fn limit_solver_orders_flat_and_curved() {
    for src in ["0", "0.1*sin(2*pi*x)"] {
        for model in [LimitModel::Consistent, LimitModel::AsStated] {
            let r = limit_mms_verify(&Coefficients::default(), &chart(src), 0.5, &LEVELS, model, MmsCase::Smooth).unwrap();
            assert_orders(&r, &format!("limit solver, {src}, {model:?}"));
        }
    }
}

#[test]
fn constant_pressure_states_are_exact() {
    for src in ["0", "x", "0.1*sin(2*pi*x)"] {
        let c = Coefficients::default().with_eps(0.1);
        let e = mms_verify(&c, &chart(src), 0.5, &LEVELS[..1], MmsCase::ConstantPressure).unwrap();
        let l = limit_mms_verify(&c, &chart(src), 0.5, &LEVELS[..1], LimitModel::Consistent, MmsCase::ConstantPressure).unwrap();
        assert!(e.finest_max_error() < 1e-9, "{src}: {}", e.finest_max_error());
        assert!(l.finest_max_error() < 1e-9, "{src}: {}", l.finest_max_error());
    }
}
