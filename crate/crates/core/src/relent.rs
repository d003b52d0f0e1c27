//! Von Neumann key term: min over the constraint set of D(S(ρ)‖Z(S(ρ))).
//!
//! Step one solves an (m,k) semidefinite approximation of the relative
//! entropy to find a near-optimal ρ̂. Step two linearizes the exact objective
//! at ρ̂ and bounds the linear term by a certified dual point, so the result
//! is a valid lower bound however rough ρ̂ is.

use std::f64::consts::LN_2;

use crate::channels::{ConstraintSet, SiftMap};
use crate::error::{domain, Result};
use crate::matqi::{
    cr, eig_hermitian, kron, mat_log2_regularized, CMat, DensityMatrix, HermitianMatrix, DEFAULT_EPS_PERT,
};
use crate::sdp::{
    certify_dual, solve_with, AffineMatrix, CertifiedBound, Field, MatrixVar, Relation, SdpProblem, Sense,
    SolveOptions, SolveStatus, VarKind,
};

/// Nodes and weights of the m-point Gauss–Legendre rule on [0, 1].
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "quadrature needs at least one node");
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            // Newton on P_m from the usual cosine guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre(m, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(m, x);
            // Affine map [−1, 1] → [0, 1] halves the weights.
            (0.5 * (x + 1.0), 1.0 / ((1.0 - x * x) * d * d))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for n in 2..=m {
        let p2 = ((2 * n - 1) as f64 * x * p1 - (n - 1) as f64 * p0) / n as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QreApproxConfig {
    pub m: usize,
    pub k: usize,
    pub eps_pert: f64,
    pub tol: f64,
    /// Frank–Wolfe refinements of ρ̂ between step one and the final bound.
    pub refine_iters: usize,
}

impl Default for QreApproxConfig {
    fn default() -> Self {
        QreApproxConfig { m: 4, k: 4, eps_pert: DEFAULT_EPS_PERT, tol: 1e-8, refine_iters: 30 }
    }
}

impl QreApproxConfig {
    pub fn new(m: usize, k: usize) -> Result<Self> {
        if m == 0 {
            return Err(domain("quadrature order m must be at least 1"));
        }
        Ok(QreApproxConfig { m, k, ..Default::default() })
    }
}

/// Handles into a built step-one problem.
pub struct QreSdp {
    pub problem: SdpProblem,
    pub rho: MatrixVar,
}

fn check_inputs(constraints: &ConstraintSet, sift: &SiftMap) -> Result<()> {
    if constraints.dim != sift.in_dim() {
        return Err(crate::Error::Dimension(format!(
            "constraints act on dim {}, sift map on dim {}",
            constraints.dim,
            sift.in_dim()
        )));
    }
    constraints.check_ordered()
}

fn field_for(constraints: &ConstraintSet, sift: &SiftMap) -> Field {
    // With real data the objective is invariant under ρ → conj(ρ) and convex,
    // so a real minimizer exists.
    if constraints.is_real() && sift.is_real() {
        Field::Real
    } else {
        Field::Complex
    }
}

/// Adds Tr ρ = 1 and the bounds of every constraint on the matrix variable.
pub(crate) fn add_state_constraints(p: &mut SdpProblem, rho: &MatrixVar, constraints: &ConstraintSet) {
    let n = rho.n;
    p.add_linear("trace", rho.trace_form(&CMat::identity(n, n)), Relation::Eq, 1.0);
    for c in &constraints.items {
        let form = rho.trace_form(c.op.mat());
        if c.lb == c.ub {
            p.add_linear(c.label.clone(), form, Relation::Eq, c.lb);
        } else {
            p.add_linear(format!("{} lb", c.label), form.clone(), Relation::Ge, c.lb);
            p.add_linear(format!("{} ub", c.label), form, Relation::Le, c.ub);
        }
    }
}

/// Step-one program. Each sift block b contributes
/// X = S_b(ρ) ⊗ I, Y = I ⊗ conj(Z(S_b(ρ))), the squaring chain
/// [[M_i, M_{i+1}], [M_{i+1}, X]] ⪰ 0 from M_0 = Y to M_k = T, and per node
/// [[⟨e|X|e⟩ − s_j t_j / w_j, ⟨e|X], [X|e⟩, X + s_j (T − X)]] ⪰ 0 with
/// 2^k Σ_j t_j + τ_b ≥ 0. The objective Σ_b τ_b / ln 2 is in bits.
pub fn build_qre_sdp(constraints: &ConstraintSet, sift: &SiftMap, cfg: &QreApproxConfig) -> Result<QreSdp> {
    check_inputs(constraints, sift)?;
    if cfg.m == 0 {
        return Err(domain("quadrature order m must be at least 1"));
    }
    let field = field_for(constraints, sift);
    let (nodes, weights) = gauss_legendre_unit(cfg.m);
    let mut p = SdpProblem::new(Sense::Minimize);
    if let Some(blk) = sift.blocks().iter().find(|b| b.out_dim() > 8) {
        return Err(domain(format!(
            "sift block {} has output dimension {}; use a block-diagonal or single-Kraus map",
            blk.label,
            blk.out_dim()
        )));
    }
    // Block variables first so that ρ, which touches every block, is
    // eliminated last.
    let mut block_vars = Vec::new();
    for (bi, blk) in sift.blocks().iter().enumerate() {
        let n = blk.out_dim();
        let nn = n * n;
        let chain: Vec<MatrixVar> = (1..=cfg.k).map(|i| p.add_matrix(&format!("b{bi}.M{i}"), nn, field)).collect();
        let t: Vec<usize> = (0..cfg.m).map(|j| p.add_scalar(format!("b{bi}.t{j}"), VarKind::Free)).collect();
        let tau = p.add_scalar(format!("b{bi}.tau"), VarKind::Free);
        let mut vars: Vec<usize> = chain.iter().flat_map(|mv| mv.var_range()).collect();
        vars.extend(&t);
        vars.push(tau);
        p.set_group(vars, bi as u32);
        block_vars.push((chain, t, tau));
    }
    let rho = p.add_matrix("rho", sift.in_dim(), field);
    p.set_group(rho.var_range(), u32::MAX);
    p.add_lmi("rho psd", rho.expr())?;
    add_state_constraints(&mut p, &rho, constraints);

    let rho_e = rho.expr();
    for (bi, (blk, (chain, t, tau))) in sift.blocks().iter().zip(block_vars).enumerate() {
        let n = blk.out_dim();
        let nn = n * n;
        let id = CMat::identity(n, n);
        let s_rho = rho_e.map(n, n, |m| blk.apply(m).into_inner());
        let x = s_rho.map(nn, nn, |m| kron(m, &id));
        let y = s_rho.map(nn, nn, |m| kron(&id, &blk.pinch(&HermitianMatrix::symmetrized(m.clone())).into_inner().conjugate()));
        let mut ms: Vec<AffineMatrix> = vec![y];
        ms.extend(chain.iter().map(MatrixVar::expr));
        let top = ms.last().unwrap().clone();
        for i in 0..cfg.k {
            let lmi = AffineMatrix::block(&[vec![Some(&ms[i]), Some(&ms[i + 1])], vec![Some(&ms[i + 1]), Some(&x)]]);
            p.add_lmi(format!("b{bi} chain {i}"), lmi)?;
        }
        // |e⟩ = vec(I); ⟨e|X|e⟩ and X|e⟩ as affine expressions.
        let e = crate::matqi::identity_vec(n);
        let e_col = CMat::from_column_slice(nn, 1, e.as_slice());
        let x_e = x.map(nn, 1, |m| m * &e_col);
        let e_x = x_e.adjoint();
        let exe = x.map(1, 1, |m| e_col.adjoint() * m * &e_col);
        for j in 0..cfg.m {
            let (s, w) = (nodes[j], weights[j]);
            let corner = exe.sub(&AffineMatrix::scaled_var(t[j], &CMat::from_element(1, 1, cr(s / w))));
            let body = x.add(&top.sub(&x).scale(s));
            let lmi = AffineMatrix::block(&[vec![Some(&corner), Some(&e_x)], vec![Some(&x_e), Some(&body)]]);
            p.add_lmi(format!("b{bi} node {j}"), lmi)?;
        }
        let scale = 2f64.powi(cfg.k as i32);
        let mut terms: Vec<(usize, f64)> = t.iter().map(|&v| (v, scale)).collect();
        terms.push((tau, 1.0));
        p.add_linear(format!("b{bi} epigraph"), terms, Relation::Ge, 0.0);
        p.add_objective(tau, 1.0 / LN_2);
    }
    Ok(QreSdp { problem: p, rho })
}

/// ∇f(ρ)ᵀ = Σ_b S_b†[log₂ S_b(ρ) − log₂ Z(S_b(ρ))], evaluated at the
/// regularized state (1−ε)ρ + εI/d. Scalar block weights cancel inside the
/// logarithms.
pub fn grad_objective(rho_hat: &HermitianMatrix, sift: &SiftMap, eps_pert: f64) -> Result<HermitianMatrix> {
    let rho = regularize(rho_hat, eps_pert);
    let parts = sift.apply_blocks(&rho)?;
    let mut logs = Vec::with_capacity(parts.len());
    for (blk, s) in sift.blocks().iter().zip(&parts) {
        if blk.weight == 0.0 {
            logs.push(HermitianMatrix::zeros(blk.out_dim()));
            continue;
        }
        let unit = s.scale(1.0 / blk.weight);
        let l = log2_pd(&unit)?.sub(&log2_pd(&blk.pinch(&unit))?);
        logs.push(l);
    }
    sift.adjoint_blocks(&logs)
}

fn regularize(rho: &HermitianMatrix, eps: f64) -> HermitianMatrix {
    let d = rho.dim();
    rho.scale(1.0 - eps).add(&HermitianMatrix::identity(d).scale(eps / d as f64))
}

fn log2_pd(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    mat_log2_regularized(m, 0.0)
}

/// Projects onto density matrices: symmetrize, clamp eigenvalues, renormalize.
pub fn nearest_state(m: &HermitianMatrix) -> HermitianMatrix {
    let spec = eig_hermitian(m);
    let clamped = spec.apply(|l| l.max(0.0));
    let tr = clamped.trace_re();
    if tr > 0.0 {
        clamped.scale(1.0 / tr)
    } else {
        HermitianMatrix::identity(m.dim()).scale(1.0 / m.dim() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct KeyTermBound {
    /// Certified lower bound on min p_pass·H(Z_A|E) in bits.
    pub value: f64,
    pub rho_hat: DensityMatrix,
    pub certificate: CertifiedBound,
    /// Exact objective f(ρ̂) at the (regularized) step-one state.
    pub f_at_rho_hat: f64,
    /// Step-one approximate optimum, when step one produced one.
    pub step_one_value: Option<f64>,
    pub step_one_status: SolveStatus,
    pub step_two_status: SolveStatus,
}

impl KeyTermBound {
    /// f(ρ̂) minus the certified bound; zero when ρ̂ is the true minimizer.
    pub fn linearization_gap(&self) -> f64 {
        self.f_at_rho_hat - self.value
    }
}

/// Step two only: the certified linearization at a given state.
pub fn certified_linearization(
    constraints: &ConstraintSet,
    sift: &SiftMap,
    rho_hat: &HermitianMatrix,
    eps_pert: f64,
    tol: f64,
) -> Result<Linearization> {
    check_inputs(constraints, sift)?;
    let rho_reg = regularize(rho_hat, eps_pert);
    let f = sift.key_relative_entropy(&rho_reg)?;
    let grad = grad_objective(rho_hat, sift, eps_pert)?;
    let offset = f - rho_reg.inner(&grad);
    let (certificate, status, minimizer) = certified_linear_min(constraints, &grad, tol)?;
    Ok(Linearization { value: offset + certificate.value, f, certificate, status, minimizer })
}

/// Certified lower bound on min Tr(G ρ) over the constraint set, with the
/// approximate minimizer recovered from the LMI multiplier.
pub fn certified_linear_min(
    constraints: &ConstraintSet,
    g: &HermitianMatrix,
    tol: f64,
) -> Result<(CertifiedBound, SolveStatus, Option<HermitianMatrix>)> {
    if g.dim() != constraints.dim {
        return Err(crate::Error::Dimension("objective and constraints differ in dimension".into()));
    }
    constraints.check_ordered()?;
    let (problem, lmi) = linear_dual(constraints, g);
    let sol = solve_with(&problem, &SolveOptions { tol, ..SolveOptions::default() })?;
    let certificate = certify_dual(&problem, &sol)?;
    let minimizer = sol.lmi_duals.get(lmi).map(nearest_state);
    Ok((certificate, sol.status, minimizer))
}

/// Result of bounding the linearized objective at one state.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub value: f64,
    pub f: f64,
    pub certificate: CertifiedBound,
    pub status: SolveStatus,
    /// Approximate minimizer of Tr(∇f σ) over the set (the LMI multiplier).
    pub minimizer: Option<HermitianMatrix>,
}

/// maximize z + Σ(x_i γ_i^LB − y_i γ_i^UB) s.t. zI + Σ(x_i − y_i)Γ_i ⪯ G,
/// x, y ≥ 0. Tight constraints use one free multiplier.
fn linear_dual(constraints: &ConstraintSet, grad: &HermitianMatrix) -> (SdpProblem, usize) {
    // Returns the problem and the index of its single LMI.
    let n = grad.dim();
    let mut p = SdpProblem::new(Sense::Maximize);
    let z = p.add_scalar("z", VarKind::Free);
    p.add_objective(z, 1.0);
    let mut expr = AffineMatrix::constant(grad.mat()).sub(&AffineMatrix::scaled_var(z, &CMat::identity(n, n)));
    for c in &constraints.items {
        if c.lb == c.ub {
            let v = p.add_scalar(format!("{} mult", c.label), VarKind::Free);
            p.add_objective(v, c.lb);
            expr = expr.sub(&AffineMatrix::scaled_var(v, c.op.mat()));
        } else {
            let x = p.add_scalar(format!("{} lb mult", c.label), VarKind::NonNeg);
            let y = p.add_scalar(format!("{} ub mult", c.label), VarKind::NonNeg);
            p.add_objective(x, c.lb);
            p.add_objective(y, -c.ub);
            expr = expr.sub(&AffineMatrix::scaled_var(x, c.op.mat()));
            expr = expr.add(&AffineMatrix::scaled_var(y, c.op.mat()));
        }
    }
    let idx = p.add_lmi("linearized dual", expr).expect("gradient is Hermitian");
    p.set_lmi_shift(idx, z, -1.0);
    (p, idx)
}

/// Two-step certified lower bound on min D(S(ρ)‖Z(S(ρ))) over the set.
pub fn certified_keyterm(constraints: &ConstraintSet, sift: &SiftMap, cfg: &QreApproxConfig) -> Result<KeyTermBound> {
    certified_keyterm_from(constraints, sift, cfg, None)
}

/// As [`certified_keyterm`], with `fallback` as ρ̂ when step one fails
/// (the maximally mixed state otherwise).
pub fn certified_keyterm_from(
    constraints: &ConstraintSet,
    sift: &SiftMap,
    cfg: &QreApproxConfig,
    fallback: Option<&HermitianMatrix>,
) -> Result<KeyTermBound> {
    check_inputs(constraints, sift)?;
    let d = sift.in_dim();
    let start = fallback.cloned().unwrap_or_else(|| HermitianMatrix::identity(d).scale(1.0 / d as f64));
    let (mut rho_hat, step_one_value, step_one_status) = match step_one(constraints, sift, cfg) {
        Ok((r, v, s)) => (r, Some(v), s),
        Err(_) => (start, None, SolveStatus::NumericalFailure),
    };
    let tol = cfg.tol.max(1e-10);
    let mut lin = certified_linearization(constraints, sift, &rho_hat, cfg.eps_pert, tol)?;
    let mut best = (lin.clone(), rho_hat.clone());
    // Every linearization is a valid bound, so refining ρ̂ by Frank–Wolfe
    // steps only tightens the result.
    for _ in 0..cfg.refine_iters {
        if lin.f - lin.value < 1e-9 {
            break;
        }
        let Some(sigma) = lin.minimizer.clone() else { break };
        let next = line_search(sift, &rho_hat, &sigma, cfg.eps_pert)?;
        let Ok(l) = certified_linearization(constraints, sift, &next, cfg.eps_pert, tol) else { break };
        rho_hat = next;
        lin = l;
        if lin.value > best.0.value {
            best = (lin.clone(), rho_hat.clone());
        }
    }
    let (lin, rho_hat) = best;
    Ok(KeyTermBound {
        value: lin.value,
        rho_hat: DensityMatrix::new(rho_hat, vec![d])?,
        certificate: lin.certificate,
        f_at_rho_hat: lin.f,
        step_one_value,
        step_one_status,
        step_two_status: lin.status,
    })
}

/// Minimizes f on the segment from ρ to σ (f is convex along it).
fn line_search(sift: &SiftMap, rho: &HermitianMatrix, sigma: &HermitianMatrix, eps: f64) -> Result<HermitianMatrix> {
    let point = |t: f64| rho.scale(1.0 - t).add(&sigma.scale(t));
    let f = |t: f64| sift.key_relative_entropy(&regularize(&point(t), eps));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let t = 0.5 * (a + b);
    Ok(if f(t)? <= f(0.0)? { point(t) } else { rho.clone() })
}

fn step_one(
    constraints: &ConstraintSet,
    sift: &SiftMap,
    cfg: &QreApproxConfig,
) -> Result<(HermitianMatrix, f64, SolveStatus)> {
    let sdp = build_qre_sdp(constraints, sift, cfg)?;
    let opts = SolveOptions { tol: cfg.tol, ..SolveOptions::default() };
    let sol = solve_with(&sdp.problem, &opts)?;
    // Step two certifies whatever ρ̂ it is handed, so a stalled solve still
    // provides a useful starting point.
    if matches!(sol.status, SolveStatus::Infeasible | SolveStatus::Unbounded) {
        return Err(crate::Error::Numerical(format!("step one ended with status {}", sol.status.as_str())));
    }
    let rho = sol.matrix(&sdp.rho);
    Ok((nearest_state(&rho), sol.primal_value, sol.status))
}
