//! Sweep configuration files (TOML) and their validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use qkdfk_core::finitekey::{AttackModel, EntropyPath};
use qkdfk_core::pipeline::RateSettings;
use qkdfk_core::relent::QreApproxConfig;
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NValue {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Explicit N values; the string "inf" selects the asymptotic limit.
    pub n: Option<Vec<NValue>>,
    /// Log-spaced N values 10^from ..= 10^to.
    pub n_log10: Option<LogGrid>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Num(f64),
    List(Vec<f64>),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecuritySection {
    pub eps_sec: f64,
    pub eps_cor: f64,
    pub alpha_pe: f64,
    pub f_ec: f64,
}

impl Default for SecuritySection {
    fn default() -> Self {
        let d = RateSettings::default();
        SecuritySection { eps_sec: d.eps_sec, eps_cor: d.eps_cor, alpha_pe: d.alpha_pe, f_ec: d.f_ec }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    pub m: usize,
    pub k: usize,
    /// Brent tolerance of the inner optimizations.
    pub opt_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let q = QreApproxConfig::default();
        SolverSection { tol: q.tol, m: q.m, k: q.k, opt_tol: 1e-4 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<String>,
    pub format: Option<String>,
}

/// The file as written.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub protocol: String,
    #[serde(default)]
    pub paths: Option<String>,
    #[serde(default)]
    pub attack: Option<String>,
    #[serde(default)]
    pub fine_grained: bool,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    /// Parameters maximized per point, as [lo, hi] brackets.
    #[serde(default)]
    pub optimize: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub security: SecuritySection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => err(format!("output.format: expected csv or json, got {s:?}")),
        }
    }
}

pub fn parse_paths(s: &str) -> Result<Vec<EntropyPath>, ConfigError> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        let p = match part {
            "vn" => vec![EntropyPath::VonNeumann],
            "min" => vec![EntropyPath::MinEntropy],
            "both" => vec![EntropyPath::VonNeumann, EntropyPath::MinEntropy],
            _ => return err(format!("paths: expected vn, min or both, got {part:?}")),
        };
        for q in p {
            if !out.contains(&q) {
                out.push(q);
            }
        }
    }
    if out.is_empty() {
        return err("paths: no entropy path selected");
    }
    Ok(out)
}

/// Numeric parameter of a protocol and its default (None = required).
struct ParamSpec {
    name: &'static str,
    default: Option<f64>,
}

const fn req(name: &'static str) -> ParamSpec {
    ParamSpec { name, default: None }
}

const fn opt(name: &'static str, v: f64) -> ParamSpec {
    ParamSpec { name, default: Some(v) }
}

/// BB84-family noise may be given as `qber` or as `p_depol` (Q = 2p).
const NOISE: [&str; 2] = ["qber", "p_depol"];

fn protocol_params(protocol: &str) -> Option<(Vec<ParamSpec>, bool, Vec<(&'static str, &'static str)>)> {
    // (numeric parameters, uses BB84-style noise, text parameters)
    Some(match protocol {
        "bb84" => (vec![opt("p_z", 0.5)], true, vec![]),
        "b92" => (vec![req("theta_deg"), req("p_depol")], false, vec![]),
        "twin_field" => (
            vec![req("loss_db"), opt("p_dark", 0.0), req("q_param"), opt("p_z", 0.1)],
            false,
            vec![("key_basis", "X")],
        ),
        "bb84_mismatch" => (vec![opt("p_z", 0.5), opt("eta0", 1.0), req("eta1")], true, vec![]),
        "trojan_bb84" => (vec![opt("p_z", 0.5), req("mu_out")], true, vec![]),
        _ => return None,
    })
}

#[derive(Debug, Clone)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

/// A validated sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub protocol: String,
    /// Parameter axes in the protocol's declared order; fixed values are
    /// one-point axes.
    pub axes: Vec<Axis>,
    pub text: Vec<(String, String)>,
    /// The parameter optimized per point and its bracket.
    pub optimize: Option<(String, (f64, f64))>,
    pub n_values: Vec<f64>,
    pub paths: Vec<EntropyPath>,
    pub attack: AttackModel,
    pub fine_grained: bool,
    pub security: SecuritySection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

impl SweepConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        Self::validate(raw)
    }

    pub fn validate(raw: RawConfig) -> Result<Self, ConfigError> {
        let Some((specs, noise, text_specs)) = protocol_params(&raw.protocol) else {
            return err(format!(
                "protocol: unknown protocol {:?} (known: {})",
                raw.protocol,
                qkdfk_core::protocols::CATALOG.join(", ")
            ));
        };
        let mut numeric: Vec<(&str, Option<f64>)> = specs.iter().map(|s| (s.name, s.default)).collect();
        if noise {
            let given: Vec<&str> = NOISE.iter().copied().filter(|n| raw.params.contains_key(*n) || raw.optimize.contains_key(*n)).collect();
            match given.as_slice() {
                [one] => numeric.insert(0, (one, None)),
                [] => return err("params.qber: missing (give qber or p_depol)"),
                _ => return err("params: give only one of qber and p_depol"),
            }
        }
        for key in raw.params.keys().chain(raw.optimize.keys()) {
            let known = numeric.iter().any(|(n, _)| n == key) || text_specs.iter().any(|(n, _)| n == key);
            if !known {
                return err(format!("params.{key}: not a parameter of {}", raw.protocol));
            }
        }
        let mut optimize = None;
        for (name, [lo, hi]) in &raw.optimize {
            if optimize.is_some() {
                return err("optimize: at most one parameter can be optimized");
            }
            if raw.params.contains_key(name) {
                return err(format!("optimize.{name}: also fixed in [params]"));
            }
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return err(format!("optimize.{name}: bracket must satisfy lo < hi"));
            }
            optimize = Some((name.clone(), (*lo, *hi)));
        }
        let mut axes = Vec::new();
        for (name, default) in numeric {
            if optimize.as_ref().is_some_and(|(n, _)| n == name) {
                continue;
            }
            let values = match (raw.params.get(name), default) {
                (Some(ParamValue::Num(v)), _) => vec![*v],
                (Some(ParamValue::List(v)), _) => v.clone(),
                (Some(ParamValue::Text(_)), _) => return err(format!("params.{name}: expected a number or a list")),
                (None, Some(d)) => vec![d],
                (None, None) => return err(format!("params.{name}: missing")),
            };
            if values.is_empty() {
                return err(format!("params.{name}: empty grid"));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return err(format!("params.{name}: values must be finite"));
            }
            axes.push(Axis { name: name.to_string(), values });
        }
        let mut text = Vec::new();
        for (name, default) in text_specs {
            let v = match raw.params.get(name) {
                Some(ParamValue::Text(s)) => s.clone(),
                Some(_) => return err(format!("params.{name}: expected a string")),
                None => default.to_string(),
            };
            text.push((name.to_string(), v));
        }
        let n_values = n_grid(&raw.grid)?;
        let paths = parse_paths(raw.paths.as_deref().unwrap_or("both"))?;
        let attack = match raw.attack.as_deref().unwrap_or("collective") {
            "collective" => AttackModel::Collective,
            "coherent" => AttackModel::Coherent,
            other => return err(format!("attack: expected collective or coherent, got {other:?}")),
        };
        let s = &raw.security;
        if !(s.eps_sec > 0.0 && s.eps_sec < 1.0) || !(s.eps_cor > 0.0 && s.eps_cor < 1.0) {
            return err("security: eps_sec and eps_cor must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&s.alpha_pe) || !(s.f_ec >= 1.0) {
            return err("security: need 0 <= alpha_pe < 1 and f_ec >= 1");
        }
        if !(raw.solver.tol > 0.0) || raw.solver.m == 0 || !(raw.solver.opt_tol > 0.0) {
            return err("solver: need tol > 0, m >= 1, opt_tol > 0");
        }
        if let Some(f) = &raw.output.format {
            OutputFormat::parse(f)?;
        }
        Ok(SweepConfig {
            protocol: raw.protocol,
            axes,
            text,
            optimize,
            n_values,
            paths,
            attack,
            fine_grained: raw.fine_grained,
            security: raw.security,
            solver: raw.solver,
            output: raw.output,
        })
    }

    /// Number of grid points (paths excluded).
    pub fn num_points(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product::<usize>() * self.n_values.len()
    }

    pub fn text_param(&self, name: &str) -> Option<&str> {
        self.text.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    pub fn settings(&self, n_total: f64) -> RateSettings {
        RateSettings {
            n_total,
            alpha_pe: self.security.alpha_pe,
            f_ec: self.security.f_ec,
            eps_sec: self.security.eps_sec,
            eps_cor: self.security.eps_cor,
            attack: self.attack,
            qre: QreApproxConfig {
                m: self.solver.m,
                k: self.solver.k,
                tol: self.solver.tol,
                ..QreApproxConfig::default()
            },
            minent_tol: self.solver.tol,
        }
    }
}

fn n_grid(g: &GridSection) -> Result<Vec<f64>, ConfigError> {
    let mut out = Vec::new();
    if let Some(list) = &g.n {
        for v in list {
            let x = match v {
                NValue::Num(x) => *x,
                NValue::Text(t) if t == "inf" => f64::INFINITY,
                NValue::Text(t) => return err(format!("grid.n: expected a number or \"inf\", got {t:?}")),
            };
            if !(x >= 1.0) {
                return err(format!("grid.n: N = {x} must be at least 1"));
            }
            out.push(x);
        }
    }
    if let Some(l) = &g.n_log10 {
        if l.points == 0 || !(l.from.is_finite() && l.to.is_finite()) || l.from < 0.0 || l.to < l.from {
            return err("grid.n_log10: need 0 <= from <= to and points >= 1");
        }
        for i in 0..l.points {
            let t = if l.points == 1 { 0.0 } else { i as f64 / (l.points - 1) as f64 };
            out.push(10f64.powf(l.from + t * (l.to - l.from)).round());
        }
    }
    if out.is_empty() {
        return err("grid: empty N grid (set grid.n or grid.n_log10)");
    }
    Ok(out)
}
