//! Grid expansion and per-point evaluation.

use std::path::{Path, PathBuf};
use std::time::Instant;

use qkdfk_core::finitekey::{EntropyPath, SecurityProfile, TransmissionBudget};
use qkdfk_core::minent::build_minent_dual;
use qkdfk_core::pipeline::{rate, PathOutcome, RateSettings};
use qkdfk_core::protocols::{self, plob, transmittance_from_db, KeyBasis, ProtocolInstance};
use qkdfk_core::relent::build_qre_sdp;
use qkdfk_core::sdp::SolveStatus;
use qkdfk_core::Error;
use rayon::prelude::*;

use crate::config::{ConfigError, SweepConfig};
use crate::optimize::brent_multistart;

/// One grid point: parameter values in axis order plus N.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub index: usize,
    pub values: Vec<(String, f64)>,
    pub n_total: f64,
}

impl GridPoint {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    fn with(&self, name: &str, v: f64) -> GridPoint {
        let mut p = self.clone();
        match p.values.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = v,
            None => p.values.push((name.to_string(), v)),
        }
        p
    }
}

/// Expands the axes; the first axis varies slowest and N fastest.
pub fn expand_grid(cfg: &SweepConfig) -> Vec<GridPoint> {
    let mut combos: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for axis in &cfg.axes {
        let mut next = Vec::with_capacity(combos.len() * axis.values.len());
        for c in &combos {
            for &v in &axis.values {
                let mut c2 = c.clone();
                c2.push((axis.name.clone(), v));
                next.push(c2);
            }
        }
        combos = next;
    }
    let mut out = Vec::with_capacity(combos.len() * cfg.n_values.len());
    for values in combos {
        for &n in &cfg.n_values {
            out.push(GridPoint { index: out.len(), values: values.clone(), n_total: n });
        }
    }
    out
}

fn need(p: &GridPoint, name: &str) -> Result<f64, Error> {
    p.get(name).ok_or_else(|| Error::Domain(format!("parameter {name} not set")))
}

fn bb84_noise(p: &GridPoint) -> Result<f64, Error> {
    match (p.get("qber"), p.get("p_depol")) {
        (Some(q), _) => Ok(q / 2.0),
        (None, Some(d)) => Ok(d),
        _ => Err(Error::Domain("no noise parameter".into())),
    }
}

/// Builds the protocol instance of a grid point.
pub fn build_instance(cfg: &SweepConfig, p: &GridPoint) -> Result<ProtocolInstance, Error> {
    let inst = match cfg.protocol.as_str() {
        "bb84" => protocols::bb84(bb84_noise(p)?, need(p, "p_z")?),
        "b92" => protocols::b92(need(p, "theta_deg")?.to_radians(), need(p, "p_depol")?),
        "twin_field" => {
            let eta = transmittance_from_db(need(p, "loss_db")?);
            let kb = match cfg.text_param("key_basis").unwrap_or("X") {
                "X" => KeyBasis::X,
                "Z" => KeyBasis::Z,
                other => return Err(Error::Domain(format!("key_basis {other:?} is not X or Z"))),
            };
            protocols::twin_field(need(p, "q_param")?, eta.sqrt(), need(p, "p_dark")?, need(p, "p_z")?, kb)
        }
        "bb84_mismatch" => {
            protocols::bb84_mismatch(bb84_noise(p)?, need(p, "p_z")?, need(p, "eta0")?, need(p, "eta1")?)
        }
        "trojan_bb84" => protocols::trojan_bb84(bb84_noise(p)?, need(p, "p_z")?, need(p, "mu_out")?),
        other => return Err(Error::Domain(format!("unknown protocol {other}"))),
    }?;
    Ok(if cfg.fine_grained { inst.with_fine_constraints() } else { inst })
}

/// One output row (one grid point, one path).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub index: usize,
    pub protocol: String,
    pub n_total: f64,
    pub loss_db: Option<f64>,
    pub q_param: Option<f64>,
    pub theta_deg: Option<f64>,
    /// Error rate of the key basis of the simulated statistics.
    pub qber: Option<f64>,
    pub p_dark: Option<f64>,
    pub p_pass: Option<f64>,
    pub path: EntropyPath,
    pub entropy_term: Option<f64>,
    pub ell: Option<f64>,
    pub rate: f64,
    pub plob: Option<f64>,
    pub status: String,
    /// Largest rate over the computed paths at this grid point.
    pub best: f64,
    /// Whether the rate rests on an exactly feasible dual point.
    pub certified: bool,
    pub reason: String,
    pub p_z: Option<f64>,
    pub p_depol: Option<f64>,
    pub mu_out: Option<f64>,
    pub eta0: Option<f64>,
    pub eta1: Option<f64>,
    pub attack: String,
    pub wall_s: f64,
}

/// Status column: the solver status, except that a stalled solve whose
/// dual point still certifies is reported as `stalled`.
fn status_of(o: &PathOutcome) -> (&'static str, &'static str) {
    match o.status {
        SolveStatus::Optimal | SolveStatus::NearOptimal => (o.status.as_str(), ""),
        _ => ("stalled", "solver_stalled_certified"),
    }
}

fn reason_code(e: &Error) -> &'static str {
    match e {
        Error::Dimension(_) => "dimension",
        Error::NotHermitian(_) => "not_hermitian",
        Error::NotPsd(_) => "not_psd",
        Error::Domain(_) => "domain",
        Error::Infeasible(_) => "infeasible",
        Error::Numerical(_) => "numerical_failure",
    }
}

fn evaluate(cfg: &SweepConfig, p: &GridPoint, path: EntropyPath) -> (Result<ProtocolInstance, Error>, Result<PathOutcome, Error>) {
    let settings = cfg.settings(p.n_total);
    match build_instance(cfg, p) {
        Ok(inst) => {
            let r = rate(&inst, &settings, path);
            (Ok(inst), r)
        }
        Err(e) => (Err(e.clone()), Err(e)),
    }
}

fn rate_or_zero(cfg: &SweepConfig, p: &GridPoint, path: EntropyPath) -> f64 {
    match evaluate(cfg, p, path).1 {
        Ok(o) => o.result.rate,
        Err(_) => 0.0,
    }
}

/// Maximizes the rate over the optimized parameter, if any.
fn optimized_point(cfg: &SweepConfig, p: &GridPoint, path: EntropyPath) -> GridPoint {
    let Some((name, bracket)) = &cfg.optimize else { return p.clone() };
    let f = |x: f64| -rate_or_zero(cfg, &p.with(name, x), path);
    match brent_multistart(f, *bracket, cfg.solver.opt_tol) {
        Ok((x, _)) => p.with(name, x),
        Err(_) => p.with(name, 0.5 * (bracket.0 + bracket.1)),
    }
}

fn row_for(cfg: &SweepConfig, p: &GridPoint, path: EntropyPath) -> ResultRow {
    let start = Instant::now();
    let point = optimized_point(cfg, p, path);
    let (inst, out) = evaluate(cfg, &point, path);
    let loss_db = point.get("loss_db");
    let param = |name: &str| inst.as_ref().ok().and_then(|i| i.param(name));
    let mut row = ResultRow {
        index: p.index,
        protocol: cfg.protocol.clone(),
        n_total: p.n_total,
        loss_db,
        q_param: point.get("q_param"),
        theta_deg: point.get("theta_deg"),
        qber: inst.as_ref().ok().map(|i| i.key_error_q),
        p_dark: point.get("p_dark"),
        p_pass: inst.as_ref().ok().map(|i| i.p_pass),
        path,
        entropy_term: None,
        ell: None,
        rate: 0.0,
        plob: loss_db.and_then(|db| plob(transmittance_from_db(db)).ok()),
        status: String::new(),
        best: 0.0,
        certified: false,
        reason: String::new(),
        p_z: point.get("p_z"),
        p_depol: param("p_depol").or(point.get("p_depol")),
        mu_out: point.get("mu_out"),
        eta0: point.get("eta0"),
        eta1: point.get("eta1"),
        attack: cfg.attack.as_str().to_string(),
        wall_s: 0.0,
    };
    match out {
        Ok(o) => {
            let (status, reason) = status_of(&o);
            row.entropy_term = Some(o.entropy);
            row.ell = o.result.ell;
            row.rate = o.result.rate;
            row.status = status.to_string();
            row.reason = reason.to_string();
            row.certified = true;
        }
        Err(e) => {
            row.status = if matches!(e, Error::Numerical(_)) { "numerical-failure" } else { "error" }.to_string();
            row.reason = reason_code(&e).to_string();
        }
    }
    row.wall_s = start.elapsed().as_secs_f64();
    row
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses the available parallelism.
    pub threads: usize,
    pub dump_sdp: Option<PathBuf>,
}

/// Runs every grid point and path. Rows come back in grid order, paths in
/// the configured order, independently of scheduling.
pub fn run_sweep(cfg: &SweepConfig, opts: &RunOptions) -> Result<Vec<ResultRow>, ConfigError> {
    let points = expand_grid(cfg);
    if points.is_empty() {
        return Err(ConfigError("empty sweep grid".into()));
    }
    let tasks: Vec<(&GridPoint, EntropyPath)> =
        points.iter().flat_map(|p| cfg.paths.iter().map(move |&path| (p, path))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| ConfigError(format!("cannot start worker pool: {e}")))?;
    let mut rows: Vec<ResultRow> = pool.install(|| tasks.par_iter().map(|&(p, path)| row_for(cfg, p, path)).collect());
    for chunk in rows.chunk_by_mut(|a, b| a.index == b.index) {
        let best = chunk.iter().map(|r| r.rate).fold(0.0, f64::max);
        for r in chunk {
            r.best = best;
        }
    }
    if let Some(dir) = &opts.dump_sdp {
        dump_sdps(cfg, &points, &rows, dir).map_err(|e| ConfigError(format!("--dump-sdp: {e}")))?;
    }
    Ok(rows)
}

/// Writes the step-one and fidelity programs of every evaluated point.
fn dump_sdps(cfg: &SweepConfig, points: &[GridPoint], rows: &[ResultRow], dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for row in rows {
        let mut p = points[row.index].clone();
        for (name, v) in [("theta_deg", row.theta_deg), ("q_param", row.q_param)] {
            if let Some(v) = v {
                p = p.with(name, v);
            }
        }
        let Ok(inst) = build_instance(cfg, &p) else { continue };
        let s = cfg.settings(p.n_total);
        let Some(text) = dump_text(&inst, &s, row.path) else { continue };
        let file = dir.join(format!("point{:04}_{}.txt", row.index, row.path.as_str()));
        std::fs::write(file, text)?;
    }
    Ok(())
}

fn dump_text(inst: &ProtocolInstance, s: &RateSettings, path: EntropyPath) -> Option<String> {
    let budget = TransmissionBudget::new(s.n_total, inst.p_pass, s.alpha_pe).ok()?;
    let profile = SecurityProfile::new(s.eps_sec, s.eps_cor, path, inst.n_pe()).ok()?;
    let constraints = inst.constraints_for(budget.m, profile.eps_pe_per_constraint).ok()?;
    match path {
        EntropyPath::VonNeumann => build_qre_sdp(&constraints, &inst.sift, &s.qre).ok().map(|q| q.problem.dump()),
        EntropyPath::MinEntropy => build_minent_dual(&constraints, &inst.sift).ok().map(|q| q.problem.dump()),
    }
}
