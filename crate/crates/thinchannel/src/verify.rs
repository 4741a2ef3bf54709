//! Property suites behind `verify`: operator chain rule, frame isometry,
//! trace and Poincaré inequalities, inf-sup stability, A-block structure and MMS.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{RunConfig, Setup};
use crate::discretization::norms::{frame_poincare_check, interpolate_channel, parseval_check, trace_control_check, trace_inequality_check};
use crate::discretization::{FeSpace, Field, Mesh, SpaceKind};
use crate::eps_solver::{a_block_check, assemble_eps, infsup_estimate, mms_verify, channel_order, MmsCase, MmsReport};
use crate::error::{Error, Result};
use crate::geometry::{map_from_reference, map_to_reference, InterfaceChart};
use crate::limit_solver::mms::limit_mms_verify;
use crate::limit_solver::{assemble_limit, limit_a_block_check, limit_infsup_estimate};
use crate::operators::transformed_gradient_at;

pub const SUITES: [&str; 7] = ["chain-rule", "frame", "trace", "poincare", "infsup", "spsd", "mms"];

/// ε values the operator and A-block suites run at.
pub const SUITE_EPS: [f64; 3] = [1.0, 0.5, 0.1];

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Smooth random vector field on the reference channel with closed-form derivatives:
/// w_c = a₀ + a₁x + a₂z + a₃xz + a₄ sin(k₁x + k₂z + φ).
#[derive(Clone, Copy, Debug)]
pub struct SmoothField {
    a: [[f64; 5]; 2],
    k: [[f64; 2]; 2],
    phase: [f64; 2],
}

impl SmoothField {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut a = [[0.0; 5]; 2];
        let mut k = [[0.0; 2]; 2];
        let mut phase = [0.0; 2];
        for c in 0..2 {
            for v in a[c].iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            k[c] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            phase[c] = rng.gen_range(0.0..std::f64::consts::TAU);
        }
        SmoothField { a, k, phase }
    }

    pub fn value(&self, p: [f64; 2]) -> [f64; 2] {
        let [x, z] = p;
        std::array::from_fn(|c| {
            let a = self.a[c];
            a[0] + a[1] * x + a[2] * z + a[3] * x * z + a[4] * (self.k[c][0] * x + self.k[c][1] * z + self.phase[c]).sin()
        })
    }

    /// (∂ₓw, ∂_z w).
    pub fn derivatives(&self, p: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        let [x, z] = p;
        let mut dx = [0.0; 2];
        let mut dz = [0.0; 2];
        for c in 0..2 {
            let a = self.a[c];
            let cs = a[4] * (self.k[c][0] * x + self.k[c][1] * z + self.phase[c]).cos();
            dx[c] = a[1] + a[3] * z + cs * self.k[c][0];
            dz[c] = a[2] + a[3] * x + cs * self.k[c][1];
        }
        (dx, dz)
    }
}

/// Fourth-order central difference of `f` along `dir` at `y`.
fn central_difference(f: &dyn Fn([f64; 2]) -> Result<[f64; 2]>, y: [f64; 2], dir: usize, h: f64) -> Result<[f64; 2]> {
    let at = |s: f64| {
        let mut q = y;
        q[dir] += s * h;
        f(q)
    };
    let (m2, m1, p1, p2) = (at(-2.0)?, at(-1.0)?, at(1.0)?, at(2.0)?);
    Ok(std::array::from_fn(|c| (m2[c] - 8.0 * m1[c] + 8.0 * p1[c] - p2[c]) / (12.0 * h)))
}

/// Largest deviation between the transformed gradient and a physical-domain
/// finite-difference gradient through φ, plus whether D¹ reproduced ∇_T bit for bit.
pub fn chain_rule_check(chart: &InterfaceChart<f64>, eps_values: &[f64], n_fields: usize, seed: u64) -> Result<(f64, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, len) = (chart.g_lo, chart.length());
    let mut max_err = 0.0f64;
    let mut d1_exact = true;
    for _ in 0..n_fields {
        let w = SmoothField::random(&mut rng);
        for _ in 0..4 {
            let x = lo + len * rng.gen_range(0.1..0.9);
            let xr = [x, chart.zeta(x) + rng.gen_range(0.1..0.9)];
            let (dx, dz) = w.derivatives(xr);
            for &eps in eps_values {
                let g = transformed_gradient_at(dx, dz, chart.slope(x), eps);
                if eps == 1.0 {
                    d1_exact &= (0..2).all(|c| g[c][0] == dx[c] && g[c][1] == dz[c]);
                }
                let y = map_from_reference(chart, eps, xr)?;
                let phys = |q: [f64; 2]| map_to_reference(chart, eps, q).map(|r| w.value(r));
                let h = 1e-4 * eps;
                for dir in 0..2 {
                    let fd = central_difference(&phys, y, dir, h)?;
                    for c in 0..2 {
                        max_err = max_err.max((g[c][dir] - fd[c]).abs());
                    }
                }
            }
        }
    }
    Ok((max_err, d1_exact))
}

/// Uniform random coefficients in [−1, 1].
pub fn random_field(space: &FeSpace, rng: &mut impl Rng) -> Field<f64> {
    Field::new(space, (0..space.n_dofs).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("length matches")
}

/// Interpolant of a random `SmoothField`; scalar spaces take its first component.
pub fn random_smooth_field(mesh: &Mesh<f64>, space: &FeSpace, rng: &mut impl Rng) -> Result<Field<f64>> {
    let w = SmoothField::random(rng);
    interpolate_channel(mesh, space, |x, z| w.value([x, z]))
}

/// Alternates rough nodal fields with smooth interpolants; smooth ones sit close to the sharp constants.
fn test_field(mesh: &Mesh<f64>, space: &FeSpace, rng: &mut impl Rng, k: usize) -> Result<Field<f64>> {
    if k % 2 == 0 {
        random_smooth_field(mesh, space, rng)
    } else {
        Ok(random_field(space, rng))
    }
}

fn ok(name: &str, pass: bool, detail: String) -> SuiteResult {
    SuiteResult { name: name.into(), pass, detail }
}

/// Largest relative gap between ‖∂_z w‖² and its frame split over random fields.
pub fn parseval_suite(mesh: &Mesh<f64>, n: usize, seed: u64) -> Result<f64> {
    let space = FeSpace::new(mesh, SpaceKind::H1VectorStokes);
    let order = channel_order(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for k in 0..n {
        let (full, parts) = parseval_check(mesh, &space, &test_field(mesh, &space, &mut rng, k)?, order)?;
        worst = worst.max((full - parts).abs() / full.max(1.0));
    }
    Ok(worst)
}

/// Largest lhs/rhs ratio of the trace inequality and trace control over random scalar fields.
pub fn trace_suite(mesh: &Mesh<f64>, n: usize, seed: u64) -> Result<(f64, f64)> {
    let space = FeSpace::new(mesh, SpaceKind::H1ScalarChannel);
    let order = channel_order(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for k in 0..n {
        let w = test_field(mesh, &space, &mut rng, k)?;
        let (l, r) = trace_inequality_check(mesh, &space, &w, order)?;
        a = a.max(l / r);
        let (l, r) = trace_control_check(mesh, &space, &w, order)?;
        b = b.max(l / r);
    }
    Ok((a, b))
}

/// Largest lhs/rhs ratio of the frame Poincaré bounds over random vector fields.
pub fn poincare_suite(mesh: &Mesh<f64>, n: usize, seed: u64) -> Result<f64> {
    let space = FeSpace::new(mesh, SpaceKind::H1VectorStokes);
    let order = channel_order(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for k in 0..n {
        for (l, r) in frame_poincare_check(mesh, &space, &test_field(mesh, &space, &mut rng, k)?, order)? {
            worst = worst.max(l / r);
        }
    }
    Ok(worst)
}

/// Inf-sup constants of the ε-system (at ε = 1) and of the limit system per level.
pub fn infsup_levels(cfg: &RunConfig, setup: &Setup) -> Result<Vec<(usize, f64, f64)>> {
    let mut out = Vec::new();
    for &n in &cfg.verify.infsup_levels {
        let mesh = Arc::new(cfg.mesh_for(&setup.chart, n)?);
        let sys = assemble_eps(&setup.coeffs.with_eps(1.0), &mesh)?;
        let lim = assemble_limit(&setup.coeffs, &mesh, cfg.model)?;
        out.push((sys.blocks.free() + sys.blocks.pressure(), infsup_estimate(&sys)?, limit_infsup_estimate(&lim)?));
    }
    Ok(out)
}

/// (max − min)/max.
pub fn variation(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) / max
}

/// MMS reports: ε smooth, ε constant-pressure, limit smooth, limit constant-pressure.
pub fn mms_reports(cfg: &RunConfig, setup: &Setup) -> Result<[MmsReport; 4]> {
    let levels: Vec<(usize, usize, usize)> = cfg.mms.levels.iter().map(|l| (l[0], l[1], l[2])).collect();
    let (c, chart, d) = (&setup.coeffs, &setup.chart, cfg.mesh.depth);
    Ok([
        mms_verify(c, chart, d, &levels, MmsCase::Smooth)?,
        mms_verify(c, chart, d, &levels[..1], MmsCase::ConstantPressure)?,
        limit_mms_verify(c, chart, d, &levels, cfg.model, MmsCase::Smooth)?,
        limit_mms_verify(c, chart, d, &levels[..1], cfg.model, MmsCase::ConstantPressure)?,
    ])
}

/// Order thresholds: RT0/P0 Darcy velocity and Taylor–Hood channel (or surface) velocity.
pub const DARCY_ORDER: f64 = 0.9;
pub const CHANNEL_ORDER: f64 = 1.9;
pub const EXACT_TOLERANCE: f64 = 1e-9;

pub fn mms_pass(r: &[MmsReport; 4]) -> bool {
    let orders = |m: &MmsReport| m.order_v1.is_some_and(|o| o >= DARCY_ORDER) && m.order_v2.is_some_and(|o| o >= CHANNEL_ORDER);
    orders(&r[0]) && orders(&r[2]) && r[1].finest_max_error() < EXACT_TOLERANCE && r[3].finest_max_error() < EXACT_TOLERANCE
}

fn fmt_order(o: Option<f64>) -> String {
    o.map_or("n/a".into(), |v| format!("{v:.2}"))
}

/// Runs one named suite.
pub fn run_suite(name: &str, cfg: &RunConfig, setup: &Setup) -> Result<SuiteResult> {
    let v = &cfg.verify;
    let mesh = setup.mesh.as_ref();
    Ok(match name {
        "chain-rule" => {
            let mut worst = 0.0f64;
            let mut exact = true;
            let fault = cfg.chart.slope_fault;
            let mut charts = vec![setup.chart.clone()];
            for src in ["0", "x", "0.1*sin(2*pi*x)"] {
                let c = InterfaceChart::analytic(src, 0.0, 1.0)?;
                charts.push(if fault != 0.0 { c.with_slope_fault(fault) } else { c });
            }
            for (i, c) in charts.iter().enumerate() {
                let (e, d1) = chain_rule_check(c, &SUITE_EPS, v.smooth_fields, v.seed + i as u64)?;
                worst = worst.max(e);
                exact &= d1;
            }
            ok(name, worst < v.chain_rule_tolerance && exact, format!("max |∇ε w − FD| = {worst:.2e} (< {:.0e}), D¹ = ∇_T exact: {exact}", v.chain_rule_tolerance))
        }
        "frame" => {
            let w = parseval_suite(mesh, v.random_fields, v.seed)?;
            ok(name, w < v.parseval_tolerance, format!("max relative Parseval gap {w:.2e} over {} fields", v.random_fields))
        }
        "trace" => {
            let (a, b) = trace_suite(mesh, v.random_fields, v.seed + 1)?;
            ok(name, a <= 1.0 && b <= 1.0, format!("max ratio {a:.3} (trace), {b:.3} (trace control) over {} fields", v.random_fields))
        }
        "poincare" => {
            let w = poincare_suite(mesh, v.random_fields, v.seed + 2)?;
            ok(name, w <= 1.0, format!("max ratio {w:.3} over {} fields", v.random_fields))
        }
        "infsup" => {
            let lv = infsup_levels(cfg, setup)?;
            let (e, l): (Vec<f64>, Vec<f64>) = lv.iter().map(|t| (t.1, t.2)).unzip();
            let pass = e.iter().chain(&l).all(|&s| s > 0.0) && variation(&e) < v.infsup_variation && variation(&l) < v.infsup_variation;
            let rows: Vec<String> = lv.iter().map(|(n, a, b)| format!("{n} dofs: {a:.4}/{b:.4}")).collect();
            ok(name, pass, format!("eps/limit {}; variation {:.1}%/{:.1}%", rows.join(", "), 100.0 * variation(&e), 100.0 * variation(&l)))
        }
        "spsd" => {
            let mut worst = 0.0f64;
            let mut psd = true;
            for &n in &v.infsup_levels {
                let m = Arc::new(cfg.mesh_for(&setup.chart, n)?);
                for eps in SUITE_EPS {
                    let (a, p) = a_block_check(&assemble_eps(&setup.coeffs.with_eps(eps), &m)?.a);
                    worst = worst.max(a);
                    psd &= p;
                }
                let (a, p) = limit_a_block_check(&assemble_limit(&setup.coeffs, &m, cfg.model)?);
                worst = worst.max(a);
                psd &= p;
            }
            ok(name, worst < 1e-12 && psd, format!("max relative asymmetry {worst:.1e}, semidefinite: {psd}"))
        }
        "mms" => {
            let r = mms_reports(cfg, setup)?;
            let detail = format!(
                "eps orders v1 {} v2 {}, limit orders v1 {} s {}, exact states {:.1e}/{:.1e}",
                fmt_order(r[0].order_v1),
                fmt_order(r[0].order_v2),
                fmt_order(r[2].order_v1),
                fmt_order(r[2].order_v2),
                r[1].finest_max_error(),
                r[3].finest_max_error()
            );
            ok(name, mms_pass(&r), detail)
        }
        other => return Err(Error::param("suite", format!("unknown suite `{other}`; expected one of {}", SUITES.join(", ")))),
    })
}
