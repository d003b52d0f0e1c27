//! Semidefinite programs: a small modeling layer, a homogeneous self-dual
//! interior-point solver, and rigorous certification of dual points.
//!
//! Problems are written in LMI form: real scalar (or Hermitian matrix)
//! variables, linear (in)equalities, and affine Hermitian matrix expressions
//! constrained to be PSD. Complex LMIs are embedded as real symmetric blocks
//! of twice the size before solving.

mod chol;
mod ipm;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matqi::{cr, eig_cmat, CMat, HermitianMatrix, C64};

pub use ipm::SolveOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Free,
    NonNeg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

#[derive(Clone, Debug)]
struct VarInfo {
    name: String,
    kind: VarKind,
    group: u32,
}

/// Σ terms + rhs relation.
#[derive(Clone, Debug)]
pub struct LinearConstraint {
    pub label: String,
    pub terms: Vec<(usize, f64)>,
    pub rel: Relation,
    pub rhs: f64,
}

type Entry = (usize, usize, C64);

/// Affine matrix expression C₀ + Σ xᵢ Cᵢ with sparse coefficients.
#[derive(Clone, Debug)]
pub struct AffineMatrix {
    pub rows: usize,
    pub cols: usize,
    constant: Vec<Entry>,
    terms: BTreeMap<usize, Vec<Entry>>,
}

impl AffineMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        AffineMatrix { rows, cols, constant: Vec::new(), terms: BTreeMap::new() }
    }

    pub fn constant(m: &CMat) -> Self {
        let mut a = Self::zeros(m.nrows(), m.ncols());
        a.constant = sparsify(m);
        a
    }

    /// A single scalar variable times a fixed matrix.
    pub fn scaled_var(var: usize, m: &CMat) -> Self {
        let mut a = Self::zeros(m.nrows(), m.ncols());
        a.terms.insert(var, sparsify(m));
        a
    }

    pub fn add(&self, other: &AffineMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "affine shapes differ");
        let mut out = self.clone();
        out.constant.extend(other.constant.iter().cloned());
        out.constant = merge(std::mem::take(&mut out.constant));
        for (v, e) in &other.terms {
            let slot = out.terms.entry(*v).or_default();
            slot.extend(e.iter().cloned());
            *slot = merge(std::mem::take(slot));
        }
        out.terms.retain(|_, e| !e.is_empty());
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let f = |e: &Vec<Entry>| e.iter().map(|&(r, c, v)| (r, c, v * s)).collect::<Vec<_>>();
        AffineMatrix {
            rows: self.rows,
            cols: self.cols,
            constant: f(&self.constant),
            terms: self.terms.iter().map(|(k, e)| (*k, f(e))).collect(),
        }
    }

    pub fn sub(&self, other: &AffineMatrix) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn add_constant(&self, m: &CMat) -> Self {
        self.add(&AffineMatrix::constant(m))
    }

    pub fn adjoint(&self) -> Self {
        let f = |e: &Vec<Entry>| e.iter().map(|&(r, c, v)| (c, r, v.conj())).collect::<Vec<_>>();
        AffineMatrix {
            rows: self.cols,
            cols: self.rows,
            constant: f(&self.constant),
            terms: self.terms.iter().map(|(k, e)| (*k, f(e))).collect(),
        }
    }

    /// Applies a linear map to every coefficient matrix.
    pub fn map(&self, out_rows: usize, out_cols: usize, f: impl Fn(&CMat) -> CMat) -> Self {
        let g = |e: &Vec<Entry>| {
            if e.is_empty() {
                return Vec::new();
            }
            let m = f(&densify(self.rows, self.cols, e));
            assert_eq!((m.nrows(), m.ncols()), (out_rows, out_cols), "linear map produced wrong shape");
            sparsify(&m)
        };
        let mut out = AffineMatrix {
            rows: out_rows,
            cols: out_cols,
            constant: g(&self.constant),
            terms: self.terms.iter().map(|(k, e)| (*k, g(e))).collect(),
        };
        out.terms.retain(|_, e| !e.is_empty());
        out
    }

    /// Left and right multiplication by fixed matrices: L · self · R.
    pub fn sandwich(&self, l: &CMat, r: &CMat) -> Self {
        self.map(l.nrows(), r.ncols(), |m| l * m * r)
    }

    /// Assembles a block matrix; `None` entries are zero blocks.
    pub fn block(grid: &[Vec<Option<&AffineMatrix>>]) -> Self {
        let nr = grid.len();
        let nc = grid[0].len();
        let mut heights = vec![0; nr];
        let mut widths = vec![0; nc];
        for (i, row) in grid.iter().enumerate() {
            assert_eq!(row.len(), nc, "ragged block grid");
            for (j, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    heights[i] = b.rows;
                    widths[j] = b.cols;
                }
            }
        }
        let roff: Vec<usize> = heights.iter().scan(0, |a, &h| { let o = *a; *a += h; Some(o) }).collect();
        let coff: Vec<usize> = widths.iter().scan(0, |a, &w| { let o = *a; *a += w; Some(o) }).collect();
        let mut out = AffineMatrix::zeros(heights.iter().sum(), widths.iter().sum());
        for (i, row) in grid.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                let Some(b) = b else { continue };
                assert!(b.rows == heights[i] && b.cols == widths[j], "inconsistent block sizes");
                let shift = |e: &Vec<Entry>| e.iter().map(|&(r, c, v)| (r + roff[i], c + coff[j], v)).collect::<Vec<_>>();
                out.constant.extend(shift(&b.constant));
                for (k, e) in &b.terms {
                    out.terms.entry(*k).or_default().extend(shift(e));
                }
            }
        }
        out.constant = merge(out.constant);
        for e in out.terms.values_mut() {
            *e = merge(std::mem::take(e));
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        let mut m = densify(self.rows, self.cols, &self.constant);
        for (k, e) in &self.terms {
            let xv = x[*k];
            if xv != 0.0 {
                for &(r, c, v) in e {
                    m[(r, c)] += v * xv;
                }
            }
        }
        m
    }

    pub fn is_real(&self) -> bool {
        self.constant.iter().chain(self.terms.values().flatten()).all(|e| e.2.im == 0.0)
    }

    pub fn variables(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.keys().cloned()
    }

    pub fn coefficient(&self, var: usize) -> Option<CMat> {
        self.terms.get(&var).map(|e| densify(self.rows, self.cols, e))
    }

    pub fn constant_part(&self) -> CMat {
        densify(self.rows, self.cols, &self.constant)
    }

    fn max_hermitian_deviation(&self) -> f64 {
        let dev = |e: &Vec<Entry>| crate::matqi::hermitian_deviation(&densify(self.rows, self.cols, e));
        self.terms.values().map(dev).fold(dev(&self.constant), f64::max)
    }

    fn symmetrize(&mut self) {
        let f = |e: &Vec<Entry>| {
            let mut all: Vec<Entry> = Vec::with_capacity(2 * e.len());
            for &(r, c, v) in e {
                all.push((r, c, v * 0.5));
                all.push((c, r, v.conj() * 0.5));
            }
            merge(all)
        };
        self.constant = f(&self.constant);
        for e in self.terms.values_mut() {
            *e = f(e);
        }
    }
}

fn sparsify(m: &CMat) -> Vec<Entry> {
    let scale = m.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let cut = 1e-15 * scale;
    let mut out = Vec::new();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            let v = C64::new(if v.re.abs() > cut { v.re } else { 0.0 }, if v.im.abs() > cut { v.im } else { 0.0 });
            if v != C64::default() {
                out.push((r, c, v));
            }
        }
    }
    out
}

fn densify(rows: usize, cols: usize, e: &[Entry]) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for &(r, c, v) in e {
        m[(r, c)] += v;
    }
    m
}

fn merge(mut e: Vec<Entry>) -> Vec<Entry> {
    e.sort_by_key(|&(r, c, _)| (c, r));
    let mut out: Vec<Entry> = Vec::with_capacity(e.len());
    for (r, c, v) in e {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => out.push((r, c, v)),
        }
    }
    out.retain(|x| x.2 != C64::default());
    out
}

/// A Hermitian (or real symmetric) matrix of scalar variables.
#[derive(Clone, Debug)]
pub struct MatrixVar {
    pub n: usize,
    pub field: Field,
    first: usize,
}

impl MatrixVar {
    pub fn param_count(&self) -> usize {
        match self.field {
            Field::Real => self.n * (self.n + 1) / 2,
            Field::Complex => self.n * self.n,
        }
    }

    /// Variable holding diagonal entry i.
    pub fn diag_var(&self, i: usize) -> usize {
        assert!(i < self.n);
        self.first + i
    }

    pub fn var_range(&self) -> std::ops::Range<usize> {
        self.first..self.first + self.param_count()
    }

    /// Parameter layout: diagonal entries first, then each strict upper
    /// entry (real part, and imaginary part for complex fields).
    fn params(&self) -> Vec<(usize, usize, usize, C64)> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.param_count());
        let mut v = self.first;
        for i in 0..n {
            out.push((v, i, i, cr(1.0)));
            v += 1;
        }
        for i in 0..n {
            for j in i + 1..n {
                out.push((v, i, j, cr(1.0)));
                v += 1;
                if self.field == Field::Complex {
                    out.push((v, i, j, C64::new(0.0, 1.0)));
                    v += 1;
                }
            }
        }
        out
    }

    pub fn expr(&self) -> AffineMatrix {
        let mut a = AffineMatrix::zeros(self.n, self.n);
        for (v, i, j, z) in self.params() {
            let e = if i == j { vec![(i, i, z)] } else { vec![(i, j, z), (j, i, z.conj())] };
            a.terms.insert(v, e);
        }
        a
    }

    /// Linear form Tr(X Γ) in the parameters.
    pub fn trace_form(&self, gamma: &CMat) -> Vec<(usize, f64)> {
        self.params()
            .into_iter()
            .map(|(v, i, j, z)| {
                let val = if i == j {
                    gamma[(i, i)].re
                } else {
                    (z * gamma[(j, i)] + z.conj() * gamma[(i, j)]).re
                };
                (v, val)
            })
            .filter(|&(_, val)| val != 0.0)
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> HermitianMatrix {
        HermitianMatrix::symmetrized(self.expr().eval(x))
    }

    /// Parameter vector representing a given Hermitian matrix.
    pub fn params_of(&self, m: &CMat) -> Vec<(usize, f64)> {
        self.params()
            .into_iter()
            .map(|(v, i, j, z)| (v, if z.im == 0.0 { m[(i, j)].re } else { m[(i, j)].im }))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Lmi {
    pub label: String,
    pub expr: AffineMatrix,
    /// Scalar variable whose coefficient in this LMI is `coef`·I with
    /// coef ≠ 0; certification moves it to repair PSD violations.
    pub shift: Option<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    vars: Vec<VarInfo>,
    objective: BTreeMap<usize, f64>,
    objective_constant: f64,
    pub sense: Sense,
    linear: Vec<LinearConstraint>,
    lmis: Vec<Lmi>,
}

impl SdpProblem {
    pub fn new(sense: Sense) -> Self {
        SdpProblem { vars: Vec::new(), objective: BTreeMap::new(), objective_constant: 0.0, sense, linear: Vec::new(), lmis: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn lmis(&self) -> &[Lmi] {
        &self.lmis
    }

    pub fn linear_constraints(&self) -> &[LinearConstraint] {
        &self.linear
    }

    pub fn var_name(&self, i: usize) -> &str {
        &self.vars[i].name
    }

    pub fn var_kind(&self, i: usize) -> VarKind {
        self.vars[i].kind
    }

    pub fn add_scalar(&mut self, name: impl Into<String>, kind: VarKind) -> usize {
        self.vars.push(VarInfo { name: name.into(), kind, group: 0 });
        self.vars.len() - 1
    }

    /// Free Hermitian matrix variable.
    pub fn add_matrix(&mut self, name: &str, n: usize, field: Field) -> MatrixVar {
        let mv = MatrixVar { n, field, first: self.vars.len() };
        for k in 0..mv.param_count() {
            self.vars.push(VarInfo { name: format!("{name}[{k}]"), kind: VarKind::Free, group: 0 });
        }
        mv
    }

    /// Matrix variable constrained to the PSD cone.
    pub fn add_psd_block(&mut self, name: &str, n: usize, field: Field) -> MatrixVar {
        let mv = self.add_matrix(name, n, field);
        self.lmis.push(Lmi { label: format!("{name} psd"), expr: mv.expr(), shift: None });
        mv
    }

    /// Elimination hint: the solver orders variables by (group, index).
    /// Densely coupled variables belong in a high group.
    pub fn set_group(&mut self, vars: impl IntoIterator<Item = usize>, group: u32) {
        for v in vars {
            self.vars[v].group = group;
        }
    }

    pub fn add_objective(&mut self, var: usize, coef: f64) {
        *self.objective.entry(var).or_insert(0.0) += coef;
    }

    pub fn add_objective_terms(&mut self, terms: &[(usize, f64)]) {
        for &(v, c) in terms {
            self.add_objective(v, c);
        }
    }

    pub fn add_objective_constant(&mut self, c: f64) {
        self.objective_constant += c;
    }

    pub fn add_linear(&mut self, label: impl Into<String>, terms: Vec<(usize, f64)>, rel: Relation, rhs: f64) -> usize {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (v, c) in terms {
            *merged.entry(v).or_insert(0.0) += c;
        }
        let terms = merged.into_iter().filter(|&(_, c)| c != 0.0).collect();
        self.linear.push(LinearConstraint { label: label.into(), terms, rel, rhs });
        self.linear.len() - 1
    }

    /// Adds expr ⪰ 0. The expression must be Hermitian; it is symmetrized.
    pub fn add_lmi(&mut self, label: impl Into<String>, mut expr: AffineMatrix) -> Result<usize> {
        if expr.rows != expr.cols {
            return Err(Error::Dimension("LMI expression must be square".into()));
        }
        let dev = expr.max_hermitian_deviation();
        if dev > 1e-9 {
            return Err(Error::NotHermitian(dev));
        }
        if let Some(v) = expr.variables().find(|&v| v >= self.vars.len()) {
            return Err(Error::Dimension(format!("LMI refers to unknown variable {v}")));
        }
        expr.symmetrize();
        self.lmis.push(Lmi { label: label.into(), expr, shift: None });
        Ok(self.lmis.len() - 1)
    }

    pub fn set_lmi_shift(&mut self, lmi: usize, var: usize, coef: f64) {
        self.lmis[lmi].shift = Some((var, coef));
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|(&v, &c)| c * x[v]).sum::<f64>()
    }

    /// Largest violation of the linear constraints and variable signs at `x`.
    pub fn linear_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for lc in &self.linear {
            let lhs: f64 = lc.terms.iter().map(|&(v, c)| c * x[v]).sum();
            let viol = match lc.rel {
                Relation::Eq => (lhs - lc.rhs).abs(),
                Relation::Le => (lhs - lc.rhs).max(0.0),
                Relation::Ge => (lc.rhs - lhs).max(0.0),
            };
            worst = worst.max(viol);
        }
        for (i, v) in self.vars.iter().enumerate() {
            if v.kind == VarKind::NonNeg {
                worst = worst.max(-x[i]);
            }
        }
        worst
    }

    /// Smallest eigenvalue of each LMI at `x`.
    pub fn lmi_min_eigenvalues(&self, x: &[f64]) -> Vec<f64> {
        self.lmis.iter().map(|l| eig_cmat(&HermitianMatrix::symmetrized(l.expr.eval(x)).into_inner()).values[0]).collect()
    }

    /// Human-readable sparse dump. Lines are
    /// `obj var value`, `lin index rel rhs` followed by `  var coef` pairs,
    /// and `lmi index block row col re im` where block `-` is the constant.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let sense = match self.sense {
            Sense::Minimize => "minimize",
            Sense::Maximize => "maximize",
        };
        let _ = writeln!(s, "# sdp {sense} vars {} linear {} lmis {}", self.vars.len(), self.linear.len(), self.lmis.len());
        for (i, v) in self.vars.iter().enumerate() {
            let kind = if v.kind == VarKind::NonNeg { "nonneg" } else { "free" };
            let _ = writeln!(s, "var {i} {kind} {}", v.name);
        }
        let _ = writeln!(s, "objconst {:.17e}", self.objective_constant);
        for (v, c) in &self.objective {
            let _ = writeln!(s, "obj {v} {c:.17e}");
        }
        for (i, lc) in self.linear.iter().enumerate() {
            let rel = match lc.rel {
                Relation::Eq => "=",
                Relation::Le => "<=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(s, "lin {i} {rel} {:.17e} # {}", lc.rhs, lc.label);
            for (v, c) in &lc.terms {
                let _ = writeln!(s, "  {v} {c:.17e}");
            }
        }
        for (i, l) in self.lmis.iter().enumerate() {
            let _ = writeln!(s, "lmidim {i} {} # {}", l.expr.rows, l.label);
            for &(r, c, v) in &l.expr.constant {
                let _ = writeln!(s, "lmi {i} - {r} {c} {:.17e} {:.17e}", v.re, v.im);
            }
            for (k, e) in &l.expr.terms {
                for &(r, c, v) in e {
                    let _ = writeln!(s, "lmi {i} {k} {r} {c} {:.17e} {:.17e}", v.re, v.im);
                }
            }
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::NearOptimal => "near-optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical-failure",
        }
    }

    pub fn usable(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Variable values (the primal point of the problem as modeled).
    pub x: Vec<f64>,
    /// Objective at `x`, in the problem's own sense.
    pub primal_value: f64,
    /// Lagrange dual objective of the solver's dual point.
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Multipliers of the linear constraints (nonnegative for inequalities).
    pub linear_duals: Vec<f64>,
    /// PSD multipliers of each LMI.
    pub lmi_duals: Vec<HermitianMatrix>,
    /// Points of all iterates, when requested.
    pub trail: Vec<Vec<f64>>,
}

impl SdpSolution {
    pub fn matrix(&self, mv: &MatrixVar) -> HermitianMatrix {
        mv.eval(&self.x)
    }

    pub fn value(&self, var: usize) -> f64 {
        self.x[var]
    }

    /// Values of every LMI expression at the solution (the primal blocks).
    pub fn lmi_values(&self, problem: &SdpProblem) -> Vec<HermitianMatrix> {
        problem.lmis.iter().map(|l| HermitianMatrix::symmetrized(l.expr.eval(&self.x))).collect()
    }
}

pub fn solve(problem: &SdpProblem, tol: f64) -> Result<SdpSolution> {
    solve_with(problem, &SolveOptions { tol, ..SolveOptions::default() })
}

pub fn solve_with(problem: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution> {
    if problem.vars.is_empty() {
        return Err(Error::Dimension("problem has no variables".into()));
    }
    if problem.lmis.is_empty() && problem.linear.iter().all(|l| l.rel == Relation::Eq) && problem.vars.iter().all(|v| v.kind == VarKind::Free) {
        return Err(Error::Dimension("problem has no cone constraints".into()));
    }
    ipm::solve(problem, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundDirection {
    Lower,
    Upper,
}

/// A bound that holds for every feasible point of the related problem.
#[derive(Clone, Debug)]
pub struct CertifiedBound {
    pub value: f64,
    pub direction: BoundDirection,
    /// Largest PSD violation of the repaired point (0 when certified).
    pub psd_residual: f64,
    /// Largest linear violation of the repaired point (0 when certified).
    pub linear_residual: f64,
    /// The repaired, exactly feasible point.
    pub point: Vec<f64>,
}

/// Safety margin added on top of measured eigenvalue violations.
const SHIFT_MARGIN: f64 = 1e-11;
/// Dual points further than this from feasibility are rejected.
pub const CERTIFY_MAX_RESIDUAL: f64 = 1e-4;

/// Turns an approximate solution of a problem into a rigorous bound.
///
/// The problem is read as the dual of some other program, so a feasible
/// point of a maximization yields a lower bound on that program and a
/// feasible point of a minimization an upper bound. Sign-constrained
/// variables are clamped, then every violated LMI is repaired by moving its
/// designated shift variable, and the objective is re-evaluated at the
/// repaired point.
pub fn certify_dual(problem: &SdpProblem, solution: &SdpSolution) -> Result<CertifiedBound> {
    certify_point(problem, &solution.x)
}

pub fn certify_point(problem: &SdpProblem, x0: &[f64]) -> Result<CertifiedBound> {
    if x0.len() != problem.vars.len() {
        return Err(Error::Dimension("point has the wrong number of variables".into()));
    }
    let mut x = x0.to_vec();
    let mut initial_violation = 0.0f64;
    for (i, v) in problem.vars.iter().enumerate() {
        if v.kind == VarKind::NonNeg && x[i] < 0.0 {
            initial_violation = initial_violation.max(-x[i]);
            x[i] = 0.0;
        }
    }
    let lin0 = problem.linear_violation(&x);
    for pass in 0..3 {
        let mut changed = false;
        for l in &problem.lmis {
            let m = HermitianMatrix::symmetrized(l.expr.eval(&x));
            let scale = 1.0 + m.iter().fold(0.0f64, |a, z| a.max(z.norm()));
            let lmin = eig_cmat(m.mat()).values[0];
            let margin = SHIFT_MARGIN * scale;
            if lmin < margin && (lmin < 0.0 || pass > 0) {
                if lmin < 0.0 {
                    initial_violation = initial_violation.max(-lmin / scale);
                }
                let Some((var, coef)) = l.shift else {
                    if lmin < 0.0 {
                        return Err(Error::Numerical(format!("LMI '{}' violated by {:.3e} with no shift variable", l.label, -lmin)));
                    }
                    continue;
                };
                let delta = (margin - lmin) / coef;
                x[var] += delta;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if initial_violation > CERTIFY_MAX_RESIDUAL {
        return Err(Error::Numerical(format!("dual point violates constraints by {initial_violation:.3e}")));
    }
    let psd_residual = problem.lmi_min_eigenvalues(&x).into_iter().fold(0.0f64, |a, l| a.max(-l));
    let linear_residual = problem.linear_violation(&x);
    if psd_residual > 0.0 || linear_residual > lin0.max(0.0) + 1e-15 {
        return Err(Error::Numerical(format!(
            "could not repair dual point (psd {psd_residual:.3e}, linear {linear_residual:.3e})"
        )));
    }
    if linear_residual > 1e-12 {
        return Err(Error::Numerical(format!("dual point violates linear constraints by {linear_residual:.3e}")));
    }
    let direction = match problem.sense {
        Sense::Maximize => BoundDirection::Lower,
        Sense::Minimize => BoundDirection::Upper,
    };
    Ok(CertifiedBound { value: problem.objective_value(&x), direction, psd_residual, linear_residual, point: x })
}

#[derive(Clone, Debug, PartialEq)]
pub enum SlaterReport {
    /// A point with every cone constraint strictly satisfied exists.
    StrictlyFeasible { margin: f64 },
    /// Feasible, but no interior point was found.
    NoInterior { margin: f64 },
    Infeasible,
    Inconclusive(String),
}

/// Probes strict feasibility by maximizing the common margin t of every
/// cone constraint (LMIs ⪰ tI, inequalities slack ≥ t, t ≤ 1).
pub fn check_slater(problem: &SdpProblem) -> SlaterReport {
    let mut aux = SdpProblem::new(Sense::Maximize);
    aux.vars = problem.vars.iter().map(|v| VarInfo { kind: VarKind::Free, ..v.clone() }).collect();
    let t = aux.add_scalar("margin", VarKind::Free);
    aux.add_objective(t, 1.0);
    aux.add_linear("margin cap", vec![(t, 1.0)], Relation::Le, 1.0);
    for lc in &problem.linear {
        match lc.rel {
            Relation::Eq => {
                aux.add_linear(lc.label.clone(), lc.terms.clone(), Relation::Eq, lc.rhs);
            }
            Relation::Ge => {
                let mut terms = lc.terms.clone();
                terms.push((t, -1.0));
                aux.add_linear(lc.label.clone(), terms, Relation::Ge, lc.rhs);
            }
            Relation::Le => {
                let mut terms = lc.terms.clone();
                terms.push((t, 1.0));
                aux.add_linear(lc.label.clone(), terms, Relation::Le, lc.rhs);
            }
        }
    }
    for (i, v) in problem.vars.iter().enumerate() {
        if v.kind == VarKind::NonNeg {
            aux.add_linear(format!("{} sign", v.name), vec![(i, 1.0), (t, -1.0)], Relation::Ge, 0.0);
        }
    }
    for l in &problem.lmis {
        let n = l.expr.rows;
        let e = l.expr.sub(&AffineMatrix::scaled_var(t, &CMat::identity(n, n)));
        aux.lmis.push(Lmi { label: l.label.clone(), expr: e, shift: None });
    }
    // Keep the auxiliary bounded below in every direction of the original variables.
    match solve(&aux, 1e-8) {
        Ok(sol) => match sol.status {
            SolveStatus::Optimal | SolveStatus::NearOptimal => {
                let m = sol.x[t];
                if m > 1e-7 {
                    SlaterReport::StrictlyFeasible { margin: m }
                } else if m > -1e-7 {
                    SlaterReport::NoInterior { margin: m }
                } else {
                    SlaterReport::Infeasible
                }
            }
            SolveStatus::Infeasible => SlaterReport::Infeasible,
            s => SlaterReport::Inconclusive(s.as_str().to_string()),
        },
        Err(e) => SlaterReport::Inconclusive(e.to_string()),
    }
}
