//! CSV and JSON output of sweep reports.

use std::path::Path;

use serde::Serialize;

use super::{EpsDiagnostics, SweepReport};
use crate::error::{Error, Result};

/// Flat CSV row: one per ε.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub dz_decay: f64,
    pub p2_z_variance: f64,
    pub normal_trace_gap: f64,
    pub v1_gap: f64,
    pub p1_gap: f64,
    pub p2_average_gap: f64,
    /// Empty cell when undefined.
    pub velocity_ratio: Option<f64>,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub v1_sq_omega1: f64,
    pub d_eps_of_eps_v2_sq_omega2: f64,
    pub dz_v2_t_sq_omega2: f64,
    pub dz_v2_n_sq_omega2: f64,
    pub v2_normal_sq_gamma: f64,
    pub eps_v2_tangential_sq_gamma: f64,
    pub residual_norm: f64,
}

impl From<&EpsDiagnostics> for SweepRow {
    fn from(d: &EpsDiagnostics) -> Self {
        let b = &d.bundle;
        SweepRow {
            eps: d.eps,
            dz_decay: d.dz_decay,
            p2_z_variance: d.p2_z_variance,
            normal_trace_gap: d.normal_trace_gap,
            v1_gap: d.v1_gap,
            p1_gap: d.p1_gap,
            p2_average_gap: d.p2_average_gap,
            velocity_ratio: d.velocity_ratio,
            r1: d.residuals.r1,
            r2: d.residuals.r2,
            r3: d.residuals.r3,
            r4: d.residuals.r4,
            v1_sq_omega1: b.v1,
            d_eps_of_eps_v2_sq_omega2: b.d_eps,
            dz_v2_t_sq_omega2: b.dz_t,
            dz_v2_n_sq_omega2: b.dz_n,
            v2_normal_sq_gamma: b.normal_trace,
            eps_v2_tangential_sq_gamma: b.eps_tangential_trace,
            residual_norm: d.residual_norm,
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn csv_string(report: &SweepReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &report.rows {
        w.serialize(SweepRow::from(r)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv(report: &SweepReport, path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(report)?)?;
    Ok(())
}

pub fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(path, s + "\n")?;
    Ok(())
}
