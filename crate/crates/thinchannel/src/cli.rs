//! Batch command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error, 3 solver error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::asymptotics::{report::csv_string, run_sweep, vertical_line_stats, write_json, normal_stress_residual, SweepSettings};
use crate::config::{RunConfig, Setup};
use crate::discretization::norms::{interpolate_channel, norm_bundle, NormBundle};
use crate::discretization::vtk::{channel_piece, gamma_polyline, porous_piece, Data};
use crate::discretization::{FeSpace, Field, SpaceKind};
use crate::eps_solver::{assemble_eps, energy_identity, solve_eps, MmsReport};
use crate::error::Error;
use crate::limit_solver::{assemble_limit, limit_energy_identity, solve_limit, xi_norm_sq, LimitModel};
use crate::verify::{mms_pass, mms_reports, run_suite, SuiteResult, SUITES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "thinchannel", version, about = "Darcy–Stokes thin-channel solver and ε → 0 asymptotics harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set mesh.n_t=16` (repeatable).
    #[arg(long = "set", global = true, value_name = "K=V")]
    pub set: Vec<String>,
    /// Output directory (overrides `output`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Suppress progress and tables on stdout
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the ε-problem at `eps`; writes VTK fields and a JSON summary.
    SolveEps,
    /// Solve the limit problem; writes VTK fields and an energy summary.
    SolveLimit,
    /// Solve every ε in `eps_list` and compare against the limit.
    Sweep,
    /// Run property suites and print a pass/fail table.
    Verify {
        /// Run only these suites.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: Vec<String>,
    },
    /// Manufactured-solution convergence study of both solvers.
    Mms,
}

type Run<T> = std::result::Result<T, Failure>;

enum Failure {
    Config(Error),
    Solver(Error),
}

fn config_err(e: Error) -> Failure {
    Failure::Config(e)
}

fn solver_err(e: Error) -> Failure {
    Failure::Solver(e)
}

struct Ctx {
    cfg: RunConfig,
    setup: Setup,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, s: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", s.as_ref());
        }
    }

    fn dir(&self, sub: &str) -> Run<PathBuf> {
        let d = if sub.is_empty() { self.out.clone() } else { self.out.join(sub) };
        std::fs::create_dir_all(&d).map_err(|e| solver_err(e.into()))?;
        Ok(d)
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run_from<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            code
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    let work = || -> Run<bool> {
        let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.set).map_err(config_err)?;
        if let Some(o) = &cli.out {
            cfg.output = o.display().to_string();
        }
        let setup = cfg.setup().map_err(config_err)?;
        let ctx = Ctx { out: PathBuf::from(&cfg.output), cfg, setup, quiet: cli.quiet };
        match &cli.command {
            Command::SolveEps => cmd_solve_eps(&ctx).map(|_| true),
            Command::SolveLimit => cmd_solve_limit(&ctx).map(|_| true),
            Command::Sweep => cmd_sweep(&ctx).map(|_| true),
            Command::Verify { suite } => cmd_verify(&ctx, suite),
            Command::Mms => cmd_mms(&ctx),
        }
    };
    let result = match cli.jobs {
        Some(0) => Err(config_err(Error::param("jobs", "must be at least 1"))),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(e) => Err(solver_err(Error::Io(std::io::Error::other(e)))),
        },
        None => work(),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VERIFY,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver error: {e}");
            EXIT_SOLVER
        }
    }
}

#[derive(Serialize)]
struct Energy {
    /// uᵀAu
    quadratic: f64,
    /// F·u + G·p
    work: f64,
}

#[derive(Serialize)]
struct EpsSummary {
    eps: f64,
    dofs: usize,
    norm_bundle: NormBundle,
    energy: Energy,
    residual_norm: f64,
    conservation_residual: f64,
    flux_mismatch: f64,
    pivot_growth: f64,
    config: serde_json::Value,
}

fn write_vtk(piece: crate::discretization::vtk::VtkPiece, path: &Path) -> Run<()> {
    piece.write(path).map_err(solver_err)
}

fn cmd_solve_eps(ctx: &Ctx) -> Run<()> {
    let Setup { mesh, coeffs, .. } = &ctx.setup;
    let sys = assemble_eps(coeffs, mesh).map_err(solver_err)?;
    let sol = solve_eps(&sys).map_err(solver_err)?;
    let sp = &sys.spaces;
    let bundle = norm_bundle(mesh, &sp.v1, &sp.v2, &sol.v1, &sol.v2, sys.eps, sys.channel_order).map_err(solver_err)?;
    let (quadratic, work) = energy_identity(&sys, &sol);
    let dir = ctx.dir("eps")?;
    write_vtk(porous_piece(mesh, &sp.v1, &sol.v1, &sp.p1, &sol.p1), &dir.join("porous.vtk"))?;
    write_vtk(channel_piece(mesh, &sol.v2, &sol.p2, Vec::new()), &dir.join("channel.vtk"))?;
    let avg = (0..=mesh.n_t).map(|i| vertical_line_stats(mesh, &sol.p2.coeffs, i).0).collect();
    write_vtk(gamma_polyline(mesh, vec![("p2_z_average".into(), Data::Scalar(avg))]), &dir.join("interface.vtk"))?;
    let summary = EpsSummary {
        eps: sys.eps,
        dofs: sys.blocks.free() + sys.blocks.pressure(),
        norm_bundle: bundle,
        energy: Energy { quadratic, work },
        residual_norm: sol.residual_norm,
        conservation_residual: sol.conservation_residual,
        flux_mismatch: sol.flux_mismatch,
        pivot_growth: sol.pivot_growth,
        config: ctx.cfg.to_json(),
    };
    write_json(&summary, &dir.join("summary.json")).map_err(solver_err)?;
    ctx.say(format!("eps = {}: {} dofs, residual {:.2e}", sys.eps, summary.dofs, sol.residual_norm));
    for (name, v) in NormBundle::NAMES.iter().zip(bundle.values()) {
        ctx.say(format!("  {name:<28} {v:.6e}"));
    }
    ctx.say(format!("wrote {}", dir.display()));
    Ok(())
}

#[derive(Serialize)]
struct LimitReport {
    model: LimitModel,
    dofs: usize,
    mu_bar: f64,
    energy: Energy,
    residual_norm: f64,
    conservation_residual: f64,
    surface_conservation: f64,
    normal_stress_residual: f64,
    xi_sq_omega2: f64,
    config: serde_json::Value,
}

fn cmd_solve_limit(ctx: &Ctx) -> Run<()> {
    let Setup { mesh, coeffs, .. } = &ctx.setup;
    let sys = assemble_limit(coeffs, mesh, ctx.cfg.model).map_err(solver_err)?;
    let lim = solve_limit(&sys).map_err(solver_err)?;
    let sp = &sys.spaces;
    let (quadratic, work) = limit_energy_identity(&sys, &lim);
    let dir = ctx.dir("limit")?;
    write_vtk(porous_piece(mesh, &sp.v1, &lim.v1, &sp.p1, &lim.p1), &dir.join("porous.vtk"))?;
    // channel: s τ̂ + ξ n̂ and p² extended in z
    let vspace = FeSpace::new(mesh, SpaceKind::H1VectorStokes);
    let v2 = interpolate_channel(mesh, &vspace, |x, z| {
        let f = mesh.chart.frame(x);
        let (s, xi) = (lim.speed_at(mesh, x), lim.xi.eval(mesh, x, z));
        [s * f.tau[0] + xi * f.n[0], s * f.tau[1] + xi * f.n[1]]
    })
    .map_err(solver_err)?;
    let pspace = FeSpace::new(mesh, SpaceKind::L2PressureChannel);
    let mut pc = vec![0.0; pspace.n_dofs];
    for k in mesh.n_1..=mesh.rows() {
        for i in 0..=mesh.n_t {
            pc[mesh.channel_vertex_index(i, k)] = lim.p2.coeffs[i];
        }
    }
    let p2 = Field::new(&pspace, pc).map_err(solver_err)?;
    let xi_nodes = (mesh.n_1..=mesh.rows())
        .flat_map(|k| (0..=mesh.n_t).map(move |i| (i, k)))
        .map(|(i, k)| {
            let p = mesh.vertices[k * (mesh.n_t + 1) + i];
            lim.xi.eval(mesh, p[0], p[1])
        })
        .collect();
    write_vtk(channel_piece(mesh, &v2, &p2, vec![("xi".into(), Data::Scalar(xi_nodes))]), &dir.join("channel.vtk"))?;
    let surface = |f: &dyn Fn(f64) -> f64| mesh.xs.iter().map(|&x| f(x)).collect::<Vec<f64>>();
    let vel = mesh.xs.iter().map(|&x| lim.surface_velocity(mesh, x)).collect();
    let gamma = vec![
        ("s".into(), Data::Scalar(surface(&|x| lim.speed_at(mesh, x)))),
        ("p2".into(), Data::Scalar(surface(&|x| lim.surface_pressure(mesh, x)))),
        ("normal_flux".into(), Data::Scalar(lim.xi.normal_flux.iter().copied().chain(lim.xi.normal_flux.last().copied()).collect())),
        ("surface_velocity".into(), Data::Vector(vel)),
    ];
    write_vtk(gamma_polyline(mesh, gamma), &dir.join("interface.vtk"))?;
    let (r4, scale) = normal_stress_residual(&sys, &lim);
    let report = LimitReport {
        model: sys.model,
        dofs: sys.blocks.free() + sys.blocks.pressure(),
        mu_bar: lim.mu_bar,
        energy: Energy { quadratic, work },
        residual_norm: lim.residual_norm,
        conservation_residual: lim.conservation_residual,
        surface_conservation: lim.surface_conservation,
        normal_stress_residual: if scale > 0.0 { r4 / scale } else { r4 },
        xi_sq_omega2: xi_norm_sq(&lim, mesh, sys.order),
        config: ctx.cfg.to_json(),
    };
    write_json(&report, &dir.join("summary.json")).map_err(solver_err)?;
    ctx.say(format!(
        "limit ({:?}): {} dofs, residual {:.2e}, energy {:.6e} = {:.6e}",
        report.model, report.dofs, report.residual_norm, quadratic, work
    ));
    ctx.say(format!("wrote {}", dir.display()));
    Ok(())
}

fn cmd_sweep(ctx: &Ctx) -> Run<()> {
    let cfg = &ctx.cfg;
    let settings = SweepSettings { eps_list: cfg.eps_list.clone(), model: cfg.model, slack: cfg.sweep.slack, ceiling: cfg.sweep.ceiling };
    let (report, timings) = run_sweep(&ctx.setup.coeffs, &ctx.setup.mesh, &settings, cfg.to_json()).map_err(solver_err)?;
    let dir = ctx.dir("")?;
    let csv = csv_string(&report).map_err(solver_err)?;
    std::fs::write(dir.join("sweep.csv"), csv).map_err(|e| solver_err(e.into()))?;
    write_json(&report, &dir.join("sweep.json")).map_err(solver_err)?;
    write_json(&timings, &dir.join("timings.json")).map_err(solver_err)?;
    ctx.say(format!("{:>9} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}", "eps", "dz_decay", "p2_zvar", "p2_avg_gap", "v1_gap", "p1_gap", "v_ratio"));
    for r in &report.rows {
        ctx.say(format!(
            "{:>9.5} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11}",
            r.eps,
            r.dz_decay,
            r.p2_z_variance,
            r.p2_average_gap,
            r.v1_gap,
            r.p1_gap,
            r.velocity_ratio.map_or("n/a".into(), |v| format!("{v:.4e}"))
        ));
    }
    for c in &report.checks {
        ctx.say(format!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name));
    }
    ctx.say(format!("wrote {}", dir.display()));
    Ok(())
}

fn cmd_verify(ctx: &Ctx, only: &[String]) -> Run<bool> {
    let names: Vec<&str> = if only.is_empty() { SUITES.to_vec() } else { only.iter().map(String::as_str).collect() };
    let mut results: Vec<SuiteResult> = Vec::new();
    for name in names {
        let r = run_suite(name, &ctx.cfg, &ctx.setup).map_err(solver_err)?;
        ctx.say(format!("{} {:<11} {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail));
        results.push(r);
    }
    write_json(&results, &ctx.dir("")?.join("verify.json")).map_err(solver_err)?;
    Ok(results.iter().all(|r| r.pass))
}

#[derive(Serialize)]
struct MmsRow<'a> {
    problem: &'a str,
    case: String,
    n_t: usize,
    n_z: usize,
    n_1: usize,
    dofs: usize,
    v1: f64,
    v2: f64,
    p1: f64,
    p2: f64,
    residual: f64,
}

fn cmd_mms(ctx: &Ctx) -> Run<bool> {
    let reports = mms_reports(&ctx.cfg, &ctx.setup).map_err(solver_err)?;
    let dir = ctx.dir("")?;
    write_json(&reports, &dir.join("mms.json")).map_err(solver_err)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &reports {
        for l in &r.levels {
            let row = MmsRow {
                problem: &r.problem,
                case: format!("{:?}", r.case),
                n_t: l.n_t,
                n_z: l.n_z,
                n_1: l.n_1,
                dofs: l.dofs,
                v1: l.v1,
                v2: l.v2,
                p1: l.p1,
                p2: l.p2,
                residual: l.residual,
            };
            w.serialize(row).map_err(|e| solver_err(Error::Io(std::io::Error::other(e))))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| solver_err(Error::Io(std::io::Error::other(e.to_string()))))?;
    std::fs::write(dir.join("mms.csv"), bytes).map_err(|e| solver_err(e.into()))?;
    for r in &reports {
        print_mms(ctx, r);
    }
    let pass = mms_pass(&reports);
    ctx.say(format!("{} mms", if pass { "PASS" } else { "FAIL" }));
    Ok(pass)
}

fn print_mms(ctx: &Ctx, r: &MmsReport) {
    ctx.say(format!("{} {:?} (eps = {})", r.problem, r.case, r.eps));
    for l in &r.levels {
        ctx.say(format!("  {:>3}x{:<3} {:>6} dofs  v1 {:.3e}  v2 {:.3e}  p1 {:.3e}  p2 {:.3e}", l.n_t, l.n_z, l.dofs, l.v1, l.v2, l.p1, l.p2));
    }
    let o = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
    ctx.say(format!("  orders       v1 {}  v2 {}  p1 {}  p2 {}", o(r.order_v1), o(r.order_v2), o(r.order_p1), o(r.order_p2)));
}
