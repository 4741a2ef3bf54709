//! Run configuration: a TOML tree layered as defaults ← file ← `--set` overrides,
//! validated into a chart, a mesh and problem coefficients before any solve.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::discretization::{build_mesh, Mesh};
use crate::eps_solver::{ProblemCoefficients, QTensor, Source};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{DomainSpec, InterfaceChart};
use crate::limit_solver::LimitModel;

/// Every key and its default. Keys not listed here are rejected.
pub const DEFAULTS: &str = r#"
# ε for solve-eps; must lie in (0, 1]
eps = 0.125
# strictly decreasing ε values in (0, 1] for sweep
eps_list = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125]
# limit model: "consistent" or "as_stated"
model = "consistent"
# output directory, created on demand
output = "out"

[chart]
# "analytic" uses `zeta`; "table" interpolates `xs`/`zs` with a cubic spline
kind = "analytic"
zeta = "0.1*sin(2*pi*x)"
g_lo = 0.0
g_hi = 1.0
xs = []
zs = []
# debugging hook: bias added to the reported slope ζ'
slope_fault = 0.0

[mesh]
n_t = 32
n_z = 16
n_1 = 16
# depth of the porous block below Γ
depth = 0.5

[coefficients]
# scalar multiple of the identity or a symmetric 2x2 array
q = 1.0
mu = 1.0
alpha = 1.0
beta = 1.0

[forcing]
# channel forcing in reference coordinates (x, z)
f2 = ["1", "1"]
# porous source in (x, y)
h1 = "1"

[sweep]
slack = 0.02
ceiling = 50.0

[verify]
seed = 20240601
random_fields = 200
smooth_fields = 20
chain_rule_tolerance = 1e-6
parseval_tolerance = 1e-10
# (n_t, n_z, n_1) levels for the inf-sup suite
infsup_levels = [[4, 2, 2], [8, 4, 4], [16, 8, 8]]
infsup_variation = 0.2

[mms]
levels = [[8, 4, 4], [16, 8, 8], [32, 16, 16]]
"#;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Analytic,
    Table,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub kind: ChartKind,
    pub zeta: String,
    pub g_lo: f64,
    pub g_hi: f64,
    pub xs: Vec<f64>,
    pub zs: Vec<f64>,
    pub slope_fault: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub n_t: usize,
    pub n_z: usize,
    pub n_1: usize,
    pub depth: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QConfig {
    Scalar(f64),
    Matrix([[f64; 2]; 2]),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    pub q: QConfig,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    pub f2: [String; 2],
    pub h1: String,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub slack: f64,
    pub ceiling: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    pub random_fields: usize,
    pub smooth_fields: usize,
    pub chain_rule_tolerance: f64,
    pub parseval_tolerance: f64,
    pub infsup_levels: Vec<[usize; 3]>,
    pub infsup_variation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsConfig {
    pub levels: Vec<[usize; 3]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub eps: f64,
    pub eps_list: Vec<f64>,
    pub model: LimitModel,
    pub output: String,
    pub chart: ChartConfig,
    pub mesh: MeshConfig,
    pub coefficients: CoefficientConfig,
    pub forcing: ForcingConfig,
    pub sweep: SweepConfig,
    pub verify: VerifyConfig,
    pub mms: MmsConfig,
}

/// Chart, mesh and coefficients built from a validated config.
#[derive(Clone, Debug)]
pub struct Setup {
    pub chart: InterfaceChart<f64>,
    pub mesh: Arc<Mesh<f64>>,
    pub coeffs: ProblemCoefficients<f64>,
}

fn defaults() -> Table {
    toml::from_str(DEFAULTS).expect("default table parses")
}

fn kind_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "a string",
        Value::Integer(_) => "an integer",
        Value::Float(_) => "a number",
        Value::Boolean(_) => "a boolean",
        Value::Datetime(_) => "a date",
        Value::Array(_) => "an array",
        Value::Table(_) => "a table",
    }
}

/// `value` converted to the type of `default`, or an error naming `key`.
fn coerce(key: &str, default: &Value, value: Value) -> Result<Value> {
    let bad = |v: &Value| Error::param(key, format!("expected {}, got {}", kind_name(default), kind_name(v)));
    Ok(match (default, value) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::String(_), Value::Integer(i)) => Value::String(i.to_string()),
        (Value::String(_), Value::Float(f)) => Value::String(f.to_string()),
        // q may be a scalar or a 2x2 array
        (Value::Float(_), v @ Value::Array(_)) if key == "coefficients.q" => v,
        (Value::Array(_), Value::Array(items)) => Value::Array(
            items
                .into_iter()
                .enumerate()
                .map(|(i, v)| match (default.as_array().and_then(|d| d.first()), &v) {
                    (Some(d), _) => coerce(&format!("{key}[{i}]"), d, v),
                    (None, Value::Integer(n)) => Ok(Value::Float(*n as f64)),
                    (None, _) => Ok(v),
                })
                .collect::<Result<_>>()?,
        ),
        (Value::Table(d), Value::Table(t)) => Value::Table(merge(key, d.clone(), t)?),
        (d, v) if std::mem::discriminant(d) == std::mem::discriminant(&v) => v,
        (_, v) => return Err(bad(&v)),
    })
}

fn merge(prefix: &str, mut base: Table, over: Table) -> Result<Table> {
    for (k, v) in over {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        let Some(d) = base.get(&k) else {
            return Err(Error::param(key, "unknown key"));
        };
        let v = coerce(&key, d, v)?;
        base.insert(k, v);
    }
    Ok(base)
}

/// Parses the right-hand side of `--set`: a TOML value, or a bare string.
fn parse_override_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies one `key.path=value` override.
pub fn apply_override(tree: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::param(assignment, "override must have the form key=value"))?;
    let key = key.trim();
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().unwrap_or_default();
    let mut node = &mut *tree;
    for p in parts {
        node = match node.get_mut(p) {
            Some(Value::Table(t)) => t,
            _ => return Err(Error::param(key, "unknown key")),
        };
    }
    let default = node.get(leaf).ok_or_else(|| Error::param(key, "unknown key"))?;
    let v = coerce(key, default, parse_override_value(raw.trim()))?;
    node.insert(leaf.to_string(), v);
    Ok(())
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_tree(defaults()).expect("defaults deserialize")
    }
}

impl RunConfig {
    fn from_tree(tree: Table) -> Result<Self> {
        let cfg: RunConfig = Value::Table(tree).try_into().map_err(|e: toml::de::Error| Error::param("config", e.to_string()))?;
        Ok(cfg)
    }

    /// Defaults, then `text` (TOML), then each `key=value` override.
    pub fn from_parts(text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut tree = defaults();
        if let Some(text) = text {
            let user: Table = toml::from_str(text).map_err(|e| Error::param("config", e.to_string()))?;
            tree = merge("", tree, user)?;
        }
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        Self::from_tree(tree)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::param("config", format!("{}: {e}", p.display())))?),
            None => None,
        };
        Self::from_parts(text.as_deref(), overrides)
    }

    /// Config echo for reports; the output location is left out so that reports
    /// written to different directories stay byte-identical.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("output");
        }
        v
    }

    pub fn chart(&self) -> Result<InterfaceChart<f64>> {
        let c = &self.chart;
        let chart = match c.kind {
            ChartKind::Analytic => InterfaceChart::analytic(&c.zeta, c.g_lo, c.g_hi).map_err(|e| Error::param("chart.zeta", e.to_string()))?,
            ChartKind::Table => {
                if c.xs.len() != c.zs.len() {
                    return Err(Error::param("chart.zs", format!("{} values for {} knots", c.zs.len(), c.xs.len())));
                }
                InterfaceChart::table(c.xs.clone(), c.zs.clone(), c.g_lo, c.g_hi).map_err(|e| Error::param("chart.xs", e.to_string()))?
            }
        };
        if !c.slope_fault.is_finite() {
            return Err(Error::param("chart.slope_fault", "must be finite"));
        }
        Ok(if c.slope_fault != 0.0 { chart.with_slope_fault(c.slope_fault) } else { chart })
    }

    pub fn mesh_for(&self, chart: &InterfaceChart<f64>, n: [usize; 3]) -> Result<Mesh<f64>> {
        let spec = DomainSpec::new(chart.clone(), self.mesh.depth).map_err(|e| rename(e, "mesh.depth"))?;
        build_mesh(&spec, n[0], n[1], n[2]).map_err(|e| rename(e, "mesh"))
    }

    pub fn coefficients(&self) -> Result<ProblemCoefficients<f64>> {
        let c = &self.coefficients;
        let q = match c.q {
            QConfig::Scalar(s) => QTensor::constant([[s, 0.0], [0.0, s]]),
            QConfig::Matrix(m) => {
                if m[0][1] != m[1][0] {
                    return Err(Error::param("coefficients.q", "must be symmetric"));
                }
                QTensor::constant(m)
            }
        };
        let source = |key: &str, s: &str| -> Result<Source<f64>> {
            match s.trim().parse::<f64>() {
                Ok(v) => Ok(Source::Const(v)),
                Err(_) => Expr::parse(s).map(|e| Source::Expr(Arc::new(e))).map_err(|e| Error::param(key, e.to_string())),
            }
        };
        Ok(ProblemCoefficients {
            q,
            mu: c.mu,
            alpha: c.alpha,
            beta: c.beta,
            f2: [source("forcing.f2[0]", &self.forcing.f2[0])?, source("forcing.f2[1]", &self.forcing.f2[1])?],
            h1: source("forcing.h1", &self.forcing.h1)?,
            eps: self.eps,
        })
    }

    /// Builds and validates everything a run needs; every error names a config key.
    pub fn setup(&self) -> Result<Setup> {
        crate::asymptotics::check_eps_list(&self.eps_list)?;
        for (key, v, lo) in [("sweep.slack", self.sweep.slack, 0.0), ("sweep.ceiling", self.sweep.ceiling, 1.0)] {
            if !(v >= lo && v.is_finite()) {
                return Err(Error::param(key, format!("must be at least {lo}")));
            }
        }
        for (key, levels) in [("mms.levels", &self.mms.levels), ("verify.infsup_levels", &self.verify.infsup_levels)] {
            if levels.len() < 3 {
                return Err(Error::param(key, "needs at least 3 refinement levels"));
            }
        }
        let chart = self.chart()?;
        let m = &self.mesh;
        let mesh = Arc::new(self.mesh_for(&chart, [m.n_t, m.n_z, m.n_1])?);
        let coeffs = self.coefficients()?;
        coeffs.validate(&mesh).map_err(|e| rename(e, "coefficients"))?;
        Ok(Setup { chart, mesh, coeffs })
    }
}

/// Qualifies a parameter error with its config section.
fn rename(e: Error, section: &str) -> Error {
    match e {
        Error::Parameter { name, reason } => {
            let key = match name.as_str() {
                "eps" => "eps".to_string(),
                "omega1_depth" => "mesh.depth".to_string(),
                n => format!("{section}.{n}"),
            };
            Error::Parameter { name: key, reason }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(e: Error) -> String {
        match e {
            Error::Parameter { name, .. } => name,
            other => panic!("expected a parameter error, got {other}"),
        }
    }

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        let s = cfg.setup().unwrap();
        assert_eq!(s.mesh.n_t, 32);
        assert_eq!(cfg.model, LimitModel::Consistent);
    }

    #[test]
    fn overrides_and_files_merge() {
        let cfg = RunConfig::from_parts(Some("eps = 0.5\n[mesh]\nn_t = 8\n"), &["mesh.n_z=4".into(), "chart.zeta=0".into(), "coefficients.mu=2".into()]).unwrap();
        assert_eq!((cfg.eps, cfg.mesh.n_t, cfg.mesh.n_z, cfg.coefficients.mu), (0.5, 8, 4, 2.0));
        assert_eq!(cfg.chart.zeta, "0");
        let cfg = RunConfig::from_parts(None, &["coefficients.q=[[2, 0.5], [0.5, 1]]".into(), "forcing.h1=x*y".into()]).unwrap();
        assert!(matches!(cfg.coefficients.q, QConfig::Matrix(_)));
        cfg.setup().unwrap();
    }

    #[test]
    fn errors_name_the_key() {
        let cases: [(&[&str], &str); 9] = [
            (&["eps=0"], "eps"),
            (&["eps_list=[0.5, 1.0]"], "eps_list"),
            (&["mesh.bogus=1"], "mesh.bogus"),
            (&["mesh.n_t=1"], "mesh.n_t"),
            (&["mesh.n_t=\"many\""], "mesh.n_t"),
            (&["coefficients.q=[[1, 0], [0, -1]]"], "coefficients.q"),
            (&["coefficients.q=[[1, 2], [0, 1]]"], "coefficients.q"),
            (&["chart.zeta=1e9*x"], "chart.zeta"),
            (&["forcing.h1=sin("], "forcing.h1"),
        ];
        for (sets, key) in cases {
            let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
            let err = RunConfig::from_parts(None, &sets).and_then(|c| c.setup().map(|_| c)).unwrap_err();
            assert_eq!(key_of(err), key, "{sets:?}");
        }
        assert_eq!(key_of(RunConfig::from_parts(Some("[verify]\nnope = 1\n"), &[]).unwrap_err()), "verify.nope");
    }

    #[test]
    fn table_chart_with_a_jump_is_rejected() {
        let sets = vec![
            "chart.kind=\"table\"".to_string(),
            "chart.xs=[-0.2, 0.0, 0.5, 0.5000001, 1.0, 1.2]".to_string(),
            "chart.zs=[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]".to_string(),
        ];
        let err = RunConfig::from_parts(None, &sets).unwrap().setup().unwrap_err();
        assert!(key_of(err).starts_with("chart."));
    }
}
