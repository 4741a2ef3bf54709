//! ε-sweeps, limit-structure diagnostics and reports.
//!
//! Every ε is solved on the same reference mesh, so channel fields at different
//! ε and the limit fields are compared without interpolation.

pub mod report;

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::assembly::{gamma_rule, integrate, POROUS_ORDER};
use crate::discretization::elements::Affine;
use crate::discretization::norms::{norm_bundle, NormBundle};
use crate::discretization::Mesh;
use crate::eps_solver::{assemble_eps, solve_eps, EpsSolution, EpsSystem, ProblemCoefficients};
use crate::error::{Error, Result};
use crate::limit_solver::{assemble_limit, gamma_coefficients, solve_limit, LimitModel, LimitSolution, LimitSystem};
use crate::scalar::Real;

pub use report::{write_csv, write_json, SweepRow};

/// Least-squares slope of log ys against log xs.
pub fn fit_slope<T: Real>(xs: &[T], ys: &[T]) -> Result<T> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Value(format!("need at least 3 paired points, got {} and {}", xs.len(), ys.len())));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > T::zero()) || !v.is_finite()) {
        return Err(Error::Value(format!("log-log fit needs positive finite entries, got {v}")));
    }
    let n = T::from_usize_lossy(xs.len());
    let lx: Vec<T> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<T> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().fold(T::zero(), |s, &v| s + v) / n;
    let my = ly.iter().fold(T::zero(), |s, &v| s + v) / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&a, &b) in lx.iter().zip(&ly) {
        sxy = sxy + (a - mx) * (b - my);
        sxx = sxx + (a - mx) * (a - mx);
    }
    if sxx == T::zero() {
        return Err(Error::Value("log-log fit needs at least two distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// Default tolerated non-monotonicity per step.
pub const DEFAULT_SLACK: f64 = 0.02;
/// Default bound on norm-bundle growth relative to ε = 1.
pub const DEFAULT_CEILING: f64 = 50.0;

/// Checks that ε values are strictly decreasing and lie in (0, 1].
pub fn check_eps_list(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::param("eps_list", "must not be empty"));
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(Error::param("eps_list", format!("{e} is outside (0, 1]")));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("eps_list", "must be strictly decreasing"));
    }
    Ok(())
}

/// Residuals of the limit relations, raw and divided by the size of the compared terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LimitResiduals {
    /// ‖v^{2,ε}·n̂ − ξ‖ on Ω₂.
    pub r1: f64,
    /// ‖∂_z(v^{2,ε}·n̂) + v¹·n̂|_Γ‖ on Ω₂.
    pub r2: f64,
    /// ‖z-avg p^{2,ε} − p²‖ on Γ.
    pub r3: f64,
    /// ‖normal-stress balance of the limit fields‖ on Γ.
    pub r4: f64,
    pub r1_rel: f64,
    pub r2_rel: f64,
    pub r3_rel: f64,
    pub r4_rel: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        a
    }
}

fn check_same_mesh<T: Real>(a: &Mesh<T>, b: &Mesh<T>) -> Result<()> {
    if (a.n_t, a.n_z, a.n_1) != (b.n_t, b.n_z, b.n_1) || a.chart.describe() != b.chart.describe() || a.depth != b.depth {
        return Err(Error::Structure("ε-solution and limit solution live on different meshes".into()));
    }
    Ok(())
}

/// P0 pressure traced onto Γ column i by linear extrapolation of the two top porous rows.
pub fn porous_pressure_trace<T: Real>(mesh: &Mesh<T>, p1: &[T], column: usize) -> T {
    let row = |k: usize| {
        let c = 2 * (k * mesh.n_t + column);
        (p1[c] + p1[c + 1]) * T::c(0.5)
    };
    let (a, b) = (row(mesh.n_1 - 1), row(mesh.n_1 - 2));
    a * T::c(1.5) - b * T::c(0.5)
}

/// z-average and variance of the P1 channel pressure on the vertical line through vertex column i.
pub fn vertical_line_stats<T: Real>(mesh: &Mesh<T>, p2: &[T], i: usize) -> (T, T) {
    let h = T::one() / T::from_usize_lossy(mesh.n_z);
    let (mut mean, mut sq) = (T::zero(), T::zero());
    for k in mesh.n_1..mesh.rows() {
        let a = p2[mesh.channel_vertex_index(i, k)];
        let b = p2[mesh.channel_vertex_index(i, k + 1)];
        mean = mean + h * (a + b) * T::c(0.5);
        sq = sq + h * (a * a + a * b + b * b) / T::c(3.0);
    }
    (mean, (sq - mean * mean).max(T::zero()))
}

/// Trapezoid weights along the vertex columns of G.
fn column_weights<T: Real>(mesh: &Mesh<T>) -> Vec<T> {
    let dx = mesh.dx();
    (0..=mesh.n_t).map(|i| if i == 0 || i == mesh.n_t { dx * T::c(0.5) } else { dx }).collect()
}

/// r₁–r₄ for one ε-solution against the limit.
pub fn limit_relation_residuals<T: Real>(
    eps_sys: &EpsSystem<T>,
    eps_sol: &EpsSolution<T>,
    lim_sys: &LimitSystem<T>,
    lim: &LimitSolution<T>,
) -> Result<LimitResiduals> {
    let mesh = eps_sys.mesh.as_ref();
    check_same_mesh(mesh, lim_sys.mesh.as_ref())?;
    let sp = &eps_sys.spaces;
    let order = eps_sys.channel_order;
    let parts = |k: usize| {
        integrate(mesh, &mesh.channel_cells, order, |g, q| {
            let e = eps_sol.v2.eval(&sp.v2, mesh, q.cell, g, q.r);
            let n = mesh.chart.frame(q.x[0]).n;
            let vn = e.value[0] * n[0] + e.value[1] * n[1];
            let dzvn = e.grad[0][1] * n[0] + e.grad[1][1] * n[1];
            let xi = lim.xi.eval(mesh, q.x[0], q.x[1]);
            let flux = lim.normal_flux(mesh, q.x[0]);
            [(vn - xi).powi(2), xi.powi(2), (dzvn + flux).powi(2), flux.powi(2)][k]
        })
        .f64()
        .sqrt()
    };
    let (r1, xi_n, r2, flux_n) = (parts(0), parts(1), parts(2), parts(3));
    let (r3, p2_n) = surface_pressure_gap(mesh, eps_sol, lim);
    let (r4, r4_scale) = normal_stress_residual(lim_sys, lim);
    Ok(LimitResiduals { r1, r2, r3, r4, r1_rel: rel(r1, xi_n), r2_rel: rel(r2, flux_n), r3_rel: rel(r3, p2_n), r4_rel: rel(r4, r4_scale) })
}

/// (‖z-avg p^{2,ε} − p²‖_Γ, ‖p²‖_Γ) with nodal trapezoid quadrature and dS weights.
fn surface_pressure_gap<T: Real>(mesh: &Mesh<T>, eps_sol: &EpsSolution<T>, lim: &LimitSolution<T>) -> (f64, f64) {
    let (mut gap, mut norm) = (T::zero(), T::zero());
    for (i, w) in column_weights(mesh).into_iter().enumerate() {
        let (avg, _) = vertical_line_stats(mesh, &eps_sol.p2.coeffs, i);
        let p = lim.p2.coeffs[i];
        let ds = w * mesh.chart.metric(mesh.xs[i]);
        gap = gap + (avg - p).powi(2) * ds;
        norm = norm + p * p * ds;
    }
    (gap.sqrt().f64(), norm.sqrt().f64())
}

/// ‖r₄‖_Γ and the sum of the norms of its terms, with
/// r₄·m = −p¹|_Γ m + c_nn vₙ + c_ns s + c_n p² from the limit model's Γ weights.
pub fn normal_stress_residual<T: Real>(sys: &LimitSystem<T>, lim: &LimitSolution<T>) -> (f64, f64) {
    let mesh = sys.mesh.as_ref();
    let mut acc = [T::zero(); 5];
    for q in crate::limit_solver::surface_rule(mesh, sys.order) {
        let c = gamma_coefficients(sys.model, &sys.coeffs, q.x, q.jet);
        let m = q.metric();
        let p1 = porous_pressure_trace(mesh, &lim.p1.coeffs, q.column);
        let vn = lim.xi.normal_flux[q.column];
        let s = lim.speed_at(mesh, q.x);
        let p2 = lim.surface_pressure(mesh, q.x);
        let terms = [-p1, c.nn * vn / m, c.ns * s / m, c.div_n * p2 / m];
        let r = terms.iter().fold(T::zero(), |a, &b| a + b);
        let ds = q.weight * m;
        acc[0] = acc[0] + r * r * ds;
        for k in 0..4 {
            acc[k + 1] = acc[k + 1] + terms[k] * terms[k] * ds;
        }
    }
    let scale = acc[1..].iter().map(|v| v.sqrt().f64()).sum();
    (acc[0].sqrt().f64(), scale)
}

/// Diagnostics of one ε-solve.
#[derive(Clone, Debug, Serialize)]
pub struct EpsDiagnostics {
    pub eps: f64,
    /// ‖∂_z(ε v^{2,ε})‖ on Ω₂.
    pub dz_decay: f64,
    /// (∫_G Var_z p^{2,ε} dx)^{1/2} along vertical mesh lines.
    pub p2_z_variance: f64,
    /// ‖v^{2,ε}·n̂ − v¹·n̂‖ on Γ against the limit.
    pub normal_trace_gap: f64,
    pub v1_gap: f64,
    pub p1_gap: f64,
    /// ‖z-avg p^{2,ε} − p²‖ on Γ.
    pub p2_average_gap: f64,
    /// ‖v_τ‖/‖v_n̂‖ on Ω₂; None when either vanishes.
    pub velocity_ratio: Option<f64>,
    pub bundle: NormBundle,
    pub residuals: LimitResiduals,
    pub residual_norm: f64,
    pub conservation_residual: f64,
    pub flux_mismatch: f64,
}

/// Diagnostics of `sol` against the limit.
pub fn diagnose<T: Real>(sys: &EpsSystem<T>, sol: &EpsSolution<T>, lim_sys: &LimitSystem<T>, lim: &LimitSolution<T>) -> Result<EpsDiagnostics> {
    let mesh = sys.mesh.as_ref();
    check_same_mesh(mesh, lim_sys.mesh.as_ref())?;
    let sp = &sys.spaces;
    let lsp = &lim_sys.spaces;
    let eps = sys.eps;
    let order = sys.channel_order;
    let channel = |k: usize| {
        integrate(mesh, &mesh.channel_cells, order, |g, q| {
            let e = sol.v2.eval(&sp.v2, mesh, q.cell, g, q.r);
            let f = mesh.chart.frame(q.x[0]);
            match k {
                0 => eps * eps * (e.grad[0][1].powi(2) + e.grad[1][1].powi(2)),
                1 => (e.value[0] * f.tau[0] + e.value[1] * f.tau[1]).powi(2),
                _ => (e.value[0] * f.n[0] + e.value[1] * f.n[1]).powi(2),
            }
        })
        .f64()
        .sqrt()
    };
    let (dz_decay, vt, vn) = (channel(0), channel(1), channel(2));
    let porous = |k: usize| {
        integrate(mesh, &mesh.porous_cells, POROUS_ORDER, |g, q| {
            if k == 0 {
                let a = sol.v1.eval(&sp.v1, mesh, q.cell, g, q.r).value;
                let b = lim.v1.eval(&lsp.v1, mesh, q.cell, g, q.r).value;
                (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
            } else {
                (sol.p1.coeffs[q.cell] - lim.p1.coeffs[q.cell]).powi(2)
            }
        })
        .f64()
        .sqrt()
    };
    let mut var = T::zero();
    for (i, w) in column_weights(mesh).into_iter().enumerate() {
        var = var + w * vertical_line_stats(mesh, &sol.p2.coeffs, i).1;
    }
    let mut gap = T::zero();
    for g in gamma_rule(mesh, order) {
        let (c, r) = g.channel;
        let v = sol.v2.eval(&sp.v2, mesh, c, &Affine::new(mesh.cell_vertices(c)), r).value;
        let n = g.normal();
        let d = v[0] * n[0] + v[1] * n[1] - lim.xi.normal_flux[g.column];
        gap = gap + d * d * g.metric() * g.weight;
    }
    let (p2_average_gap, _) = surface_pressure_gap(mesh, sol, lim);
    let bundle = norm_bundle(mesh, &sp.v1, &sp.v2, &sol.v1, &sol.v2, eps, order)?;
    Ok(EpsDiagnostics {
        eps: eps.f64(),
        dz_decay,
        p2_z_variance: var.sqrt().f64(),
        normal_trace_gap: gap.sqrt().f64(),
        v1_gap: porous(0),
        p1_gap: porous(1),
        p2_average_gap,
        velocity_ratio: if vt > 0.0 && vn > 0.0 { Some(vt / vn) } else { None },
        bundle,
        residuals: limit_relation_residuals(sys, sol, lim_sys, lim)?,
        residual_norm: sol.residual_norm.f64(),
        conservation_residual: sol.conservation_residual.f64(),
        flux_mismatch: sol.flux_mismatch.f64(),
    })
}

/// Sweep parameters.
#[derive(Clone, Debug, Serialize)]
pub struct SweepSettings {
    pub eps_list: Vec<f64>,
    pub model: LimitModel,
    pub slack: f64,
    pub ceiling: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            eps_list: vec![1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125],
            model: LimitModel::Consistent,
            slack: DEFAULT_SLACK,
            ceiling: DEFAULT_CEILING,
        }
    }
}

/// Limit-solution summary echoed into reports.
#[derive(Clone, Debug, Serialize)]
pub struct LimitSummary {
    pub model: LimitModel,
    pub mu_bar: f64,
    pub residual_norm: f64,
    pub surface_conservation: f64,
    pub v1_sq: f64,
    pub s_sq: f64,
    pub p2_sq: f64,
    /// Normal-stress residual of the limit fields, relative to its terms.
    pub r4_rel: f64,
}

/// One named pass/fail property of a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub eps_list: Vec<f64>,
    pub settings: SweepSettings,
    pub config: serde_json::Value,
    pub rows: Vec<EpsDiagnostics>,
    pub limit: LimitSummary,
    /// log-log slopes against ε; None when a column has a zero entry.
    pub slopes: Vec<(String, Option<f64>)>,
    pub checks: Vec<SweepCheck>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&SweepCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Wall-clock seconds, kept apart from the report so reports stay byte-identical.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SweepTimings {
    pub eps_solves: Vec<(f64, f64)>,
    pub limit_solve: f64,
    pub total: f64,
}

/// True when every step decreases, tolerating `slack` relative growth.
pub fn decreasing_with_slack(ys: &[f64], slack: f64) -> bool {
    ys.windows(2).all(|w| w[1] < w[0] * (1.0 + slack))
}

pub fn increasing_with_slack(ys: &[f64], slack: f64) -> bool {
    ys.windows(2).all(|w| w[1] > w[0] * (1.0 - slack))
}

fn fmt_seq(ys: &[f64]) -> String {
    let v: Vec<String> = ys.iter().map(|y| format!("{y:.4e}")).collect();
    v.join(" > ")
}

fn sweep_checks(rows: &[EpsDiagnostics], settings: &SweepSettings) -> Vec<SweepCheck> {
    let col = |f: fn(&EpsDiagnostics) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
    let slack = settings.slack;
    let mut out = Vec::new();
    let mut dec = |name: &str, ys: Vec<f64>| {
        out.push(SweepCheck { name: name.into(), pass: decreasing_with_slack(&ys, slack), detail: fmt_seq(&ys) });
    };
    dec("dz_decay_decreasing", col(|r| r.dz_decay));
    dec("p2_z_variance_decreasing", col(|r| r.p2_z_variance));
    dec("p2_average_gap_decreasing", col(|r| r.p2_average_gap));
    dec("v1_gap_decreasing", col(|r| r.v1_gap));
    let a = col(|r| r.dz_decay);
    let ratio = match (a.first(), a.last()) {
        (Some(&f), Some(&l)) if f > 0.0 => l / f,
        _ => f64::NAN,
    };
    out.push(SweepCheck { name: "dz_decay_final_over_initial".into(), pass: ratio < 0.2, detail: format!("{ratio:.4e} < 0.2") });
    let vr: Option<Vec<f64>> = rows.iter().map(|r| r.velocity_ratio).collect();
    out.push(match vr {
        Some(v) => SweepCheck { name: "velocity_ratio_increasing".into(), pass: increasing_with_slack(&v, slack), detail: v.iter().map(|y| format!("{y:.4e}")).collect::<Vec<_>>().join(" < ") },
        None => SweepCheck { name: "velocity_ratio_increasing".into(), pass: false, detail: "ratio undefined (zero tangential or normal velocity)".into() },
    });
    out.push(bundle_check(rows, settings.ceiling));
    out
}

/// Every bundle entry stays below ceiling × its value at the first ε. The max/min
/// ratio and log-log slope are reported but not asserted.
pub fn bundle_check(rows: &[EpsDiagnostics], ceiling: f64) -> SweepCheck {
    let mut pass = true;
    let mut detail = Vec::new();
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    for (k, name) in NormBundle::NAMES.iter().enumerate() {
        let ys: Vec<f64> = rows.iter().map(|r| r.bundle.values()[k]).collect();
        let first = ys.first().copied().unwrap_or(0.0);
        let max = ys.iter().copied().fold(0.0, f64::max);
        let bounded = if first > 0.0 { max <= ceiling * first } else { max <= 1e-300 };
        let min = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let slope = fit_slope(&eps, &ys).ok();
        pass &= bounded;
        detail.push(format!(
            "{name}: max/first={:.3}, max/min={:.3}, slope={}",
            if first > 0.0 { max / first } else { 0.0 },
            if min > 0.0 { max / min } else { f64::INFINITY },
            slope.map_or("n/a".into(), |s| format!("{s:.3}"))
        ));
    }
    SweepCheck { name: "norm_bundle_bounded".into(), pass, detail: detail.join("; ") }
}

/// Solves every ε (concurrently) and the limit once, then assembles the report in ε order.
pub fn run_sweep<T: Real>(
    coeffs: &ProblemCoefficients<T>,
    mesh: &Arc<Mesh<T>>,
    settings: &SweepSettings,
    config: serde_json::Value,
) -> Result<(SweepReport, SweepTimings)> {
    run_sweep_with(|_| coeffs.clone(), coeffs, mesh, settings, config)
}

/// As `run_sweep`, with ε-indexed data from `data_for(ε)`; the limit uses `limit_data`.
pub fn run_sweep_with<T: Real>(
    data_for: impl Fn(T) -> ProblemCoefficients<T> + Sync,
    limit_data: &ProblemCoefficients<T>,
    mesh: &Arc<Mesh<T>>,
    settings: &SweepSettings,
    config: serde_json::Value,
) -> Result<(SweepReport, SweepTimings)> {
    check_eps_list(&settings.eps_list)?;
    let start = Instant::now();
    let t0 = Instant::now();
    let lim_sys = assemble_limit(limit_data, mesh, settings.model)?;
    let lim = solve_limit(&lim_sys)?;
    let limit_time = t0.elapsed().as_secs_f64();
    let solved: Vec<Result<(EpsDiagnostics, f64)>> = settings
        .eps_list
        .par_iter()
        .map(|&e| {
            let t = Instant::now();
            let eps = T::c(e);
            let wrap = |err: Error| Error::Sweep { eps: e, source: Box::new(err) };
            let sys = assemble_eps(&data_for(eps).with_eps(eps), mesh).map_err(wrap)?;
            let sol = solve_eps(&sys).map_err(wrap)?;
            let d = diagnose(&sys, &sol, &lim_sys, &lim).map_err(wrap)?;
            Ok((d, t.elapsed().as_secs_f64()))
        })
        .collect();
    let mut rows = Vec::new();
    let mut timings = SweepTimings { limit_solve: limit_time, ..Default::default() };
    for r in solved {
        let (d, t) = r?;
        timings.eps_solves.push((d.eps, t));
        rows.push(d);
    }
    if let Some(bad) = rows.iter().find(|r| !all_finite(r)) {
        return Err(Error::Sweep { eps: bad.eps, source: Box::new(Error::Value("non-finite diagnostic".into())) });
    }
    let sp = &lim_sys.spaces;
    let m = mesh.as_ref();
    let rule = crate::limit_solver::surface_rule(m, lim_sys.order);
    let limit = LimitSummary {
        model: settings.model,
        mu_bar: lim.mu_bar.f64(),
        residual_norm: lim.residual_norm.f64(),
        surface_conservation: lim.surface_conservation.f64(),
        v1_sq: integrate(m, &m.porous_cells, POROUS_ORDER, |g, q| {
            let v = lim.v1.eval(&sp.v1, m, q.cell, g, q.r).value;
            v[0] * v[0] + v[1] * v[1]
        })
        .f64(),
        s_sq: rule.iter().fold(T::zero(), |a, q| a + q.weight * q.metric() * lim.speed_at(m, q.x).powi(2)).f64(),
        p2_sq: rule.iter().fold(T::zero(), |a, q| a + q.weight * q.metric() * lim.surface_pressure(m, q.x).powi(2)).f64(),
        r4_rel: {
            let (r, s) = normal_stress_residual(&lim_sys, &lim);
            rel(r, s)
        },
    };
    let eps = settings.eps_list.clone();
    let slope = |f: fn(&EpsDiagnostics) -> f64| fit_slope(&eps, &rows.iter().map(f).collect::<Vec<_>>()).ok();
    let slopes = vec![
        ("dz_decay".to_string(), slope(|r| r.dz_decay)),
        ("p2_z_variance".to_string(), slope(|r| r.p2_z_variance)),
        ("normal_trace_gap".to_string(), slope(|r| r.normal_trace_gap)),
        ("v1_gap".to_string(), slope(|r| r.v1_gap)),
        ("p1_gap".to_string(), slope(|r| r.p1_gap)),
        ("p2_average_gap".to_string(), slope(|r| r.p2_average_gap)),
    ];
    let checks = sweep_checks(&rows, settings);
    timings.total = start.elapsed().as_secs_f64();
    Ok((SweepReport { eps_list: eps, settings: settings.clone(), config, rows, limit, slopes, checks }, timings))
}

fn all_finite(r: &EpsDiagnostics) -> bool {
    let rr = &r.residuals;
    [r.dz_decay, r.p2_z_variance, r.normal_trace_gap, r.v1_gap, r.p1_gap, r.p2_average_gap, rr.r1, rr.r2, rr.r3, rr.r4]
        .iter()
        .chain(r.bundle.values().iter())
        .chain(r.velocity_ratio.iter())
        .all(|v| v.is_finite())
}
