//! Min-entropy key term through the fidelity SDP.
//!
//! H_min(Z_A|E) of the sifted state equals −log₂ max_σ F(S(ρ), Z(σ)) + log₂ p_pass.
//! Only the dual of the √F maximization is built, so any feasible dual point,
//! converged or not, is an upper bound on √F and hence a lower bound on H_min.

use crate::channels::{ConstraintSet, SiftMap};
use crate::error::{Error, Result};
use crate::matqi::{c, cr, CMat, HermitianMatrix};
use crate::relent::certified_linear_min;
use crate::sdp::{
    certify_point, solve_with, AffineMatrix, CertifiedBound, Field, MatrixVar, SdpProblem, Sense, SolveOptions,
    SolveStatus, VarKind,
};

#[derive(Debug, Clone)]
pub struct MinEntropyBound {
    /// Certified lower bound on H_min(Z_A|E) per sifted signal.
    pub hmin_value: f64,
    /// Certified upper bound on max √F(S(ρ), Z(σ)).
    pub fidelity_sqrt: f64,
    /// Lower bound on the postselection probability over the set.
    pub p_pass: f64,
    pub certificate: CertifiedBound,
    pub status: SolveStatus,
}

impl MinEntropyBound {
    /// The bound in the same normalization as the von Neumann key term.
    pub fn keyterm(&self) -> f64 {
        self.p_pass * self.hmin_value
    }
}

/// Handles into the dual program.
pub struct MinentSdp {
    pub problem: SdpProblem,
    /// Y₁₁ and Y₂₂ per sift block.
    pub y11: Vec<MatrixVar>,
    pub y22: Vec<MatrixVar>,
    /// Indices of the coupling LMIs [[Y₁₁, −I/2], [−I/2, Y₂₂]] ⪰ 0.
    pub coupling: Vec<usize>,
}

/// minimize z + ȳ + Σ(y_i γ_i^UB − x_i γ_i^LB)
/// s.t. ȳI + Σ(y_i − x_i)Γ_i ⪰ S†(Y₁₁), zI ⪰ Z(Y₂₂), [[Y₁₁, −I/2], [−I/2, Y₂₂]] ⪰ 0.
///
/// S(ρ) is block diagonal and the pinching respects the blocks, so Y₁₁ and
/// Y₂₂ are taken block diagonal as well (the ρ-side maximum over σ is
/// attained on block-diagonal σ).
pub fn build_minent_dual(constraints: &ConstraintSet, sift: &SiftMap) -> Result<MinentSdp> {
    if constraints.dim != sift.in_dim() {
        return Err(Error::Dimension(format!(
            "constraints act on dim {}, sift map on dim {}",
            constraints.dim,
            sift.in_dim()
        )));
    }
    constraints.check_ordered()?;
    let field = if constraints.is_real() && sift.is_real() { Field::Real } else { Field::Complex };
    let d = sift.in_dim();
    let mut p = SdpProblem::new(Sense::Minimize);
    let z = p.add_scalar("z", VarKind::Free);
    let ybar = p.add_scalar("ybar", VarKind::Free);
    p.add_objective(z, 1.0);
    p.add_objective(ybar, 1.0);

    let mut lhs = AffineMatrix::scaled_var(ybar, &CMat::identity(d, d));
    for c in &constraints.items {
        if c.lb == c.ub {
            let v = p.add_scalar(format!("{} mult", c.label), VarKind::Free);
            p.add_objective(v, c.ub);
            lhs = lhs.add(&AffineMatrix::scaled_var(v, c.op.mat()));
        } else {
            let x = p.add_scalar(format!("{} lb mult", c.label), VarKind::NonNeg);
            let y = p.add_scalar(format!("{} ub mult", c.label), VarKind::NonNeg);
            p.add_objective(y, c.ub);
            p.add_objective(x, -c.lb);
            lhs = lhs.add(&AffineMatrix::scaled_var(y, c.op.mat()));
            lhs = lhs.sub(&AffineMatrix::scaled_var(x, c.op.mat()));
        }
    }

    let (mut y11, mut y22, mut coupling) = (Vec::new(), Vec::new(), Vec::new());
    let mut pinch_lmis = Vec::new();
    for (bi, blk) in sift.blocks().iter().enumerate() {
        let n = blk.out_dim();
        let a = p.add_matrix(&format!("b{bi}.Y11"), n, field);
        let b = p.add_matrix(&format!("b{bi}.Y22"), n, field);
        let half = AffineMatrix::constant(&(CMat::identity(n, n) * cr(-0.5)));
        let (ae, be) = (a.expr(), b.expr());
        let block = AffineMatrix::block(&[vec![Some(&ae), Some(&half)], vec![Some(&half), Some(&be)]]);
        coupling.push(p.add_lmi(format!("b{bi} coupling"), block)?);
        lhs = lhs.sub(&ae.map(d, d, |m| blk.adjoint(m).into_inner()));
        let pinched = be.map(n, n, |m| blk.pinch(&HermitianMatrix::symmetrized(m.clone())).into_inner());
        pinch_lmis.push((bi, AffineMatrix::scaled_var(z, &CMat::identity(n, n)).sub(&pinched)));
        y11.push(a);
        y22.push(b);
    }
    let main = p.add_lmi("state side", lhs)?;
    p.set_lmi_shift(main, ybar, 1.0);
    for (bi, e) in pinch_lmis {
        let idx = p.add_lmi(format!("b{bi} pinched"), e)?;
        p.set_lmi_shift(idx, z, 1.0);
    }
    Ok(MinentSdp { problem: p, y11, y22, coupling })
}

/// Makes a dual point exactly feasible and evaluates it. The coupling blocks
/// are repaired by adding δI to both Y₁₁ and Y₂₂; the other LMIs then absorb
/// the change through ȳ and z.
pub fn certify_minent_point(sdp: &MinentSdp, x0: &[f64]) -> Result<CertifiedBound> {
    let mut x = x0.to_vec();
    for (k, &li) in sdp.coupling.iter().enumerate() {
        let lmi = &sdp.problem.lmis()[li];
        let m = HermitianMatrix::symmetrized(lmi.expr.eval(&x));
        let scale = 1.0 + m.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        let margin = 1e-11 * scale;
        let lmin = m.min_eigenvalue();
        if lmin < margin {
            let delta = margin - lmin;
            for i in 0..sdp.y11[k].n {
                x[sdp.y11[k].diag_var(i)] += delta;
                x[sdp.y22[k].diag_var(i)] += delta;
            }
        }
    }
    certify_point(&sdp.problem, &x)
}

pub fn certified_minent(constraints: &ConstraintSet, sift: &SiftMap) -> Result<MinEntropyBound> {
    certified_minent_with(constraints, sift, 1e-8)
}

pub fn certified_minent_with(constraints: &ConstraintSet, sift: &SiftMap, tol: f64) -> Result<MinEntropyBound> {
    let sdp = build_minent_dual(constraints, sift)?;
    let sol = solve_with(&sdp.problem, &SolveOptions { tol, keep_trail: true, ..SolveOptions::default() })?;
    if matches!(sol.status, SolveStatus::Infeasible | SolveStatus::Unbounded) {
        return Err(Error::Infeasible(format!("fidelity dual ended {}", sol.status.as_str())));
    }
    // Every iterate is a candidate dual point; on degenerate instances the
    // final one is not necessarily the tightest after repair.
    let mut certificate = certify_minent_point(&sdp, &sol.x);
    for x in sol.trail.iter().rev().take(40) {
        if let Ok(c) = certify_minent_point(&sdp, x) {
            if certificate.as_ref().map_or(true, |b| c.value < b.value) {
                certificate = Ok(c);
            }
        }
    }
    let certificate = certificate?;
    // √F(S(ρ), σ) ≤ √(Tr S(ρ)) ≤ 1, so clamping keeps the bound valid.
    let u = certificate.value.min(1.0);
    if u <= 0.0 {
        return Err(Error::Numerical(format!("nonpositive fidelity bound {u:.3e}")));
    }
    let p_pass = p_pass_lower_bound(constraints, sift, tol)?;
    Ok(MinEntropyBound {
        hmin_value: -2.0 * u.log2() + p_pass.log2(),
        fidelity_sqrt: u,
        p_pass,
        certificate,
        status: sol.status,
    })
}

/// min Tr(ρ S†(I)) over the set; exact when S†(I) is a multiple of I.
pub fn p_pass_lower_bound(constraints: &ConstraintSet, sift: &SiftMap, tol: f64) -> Result<f64> {
    let d = sift.in_dim();
    let g = sift.adjoint(&HermitianMatrix::identity(sift.out_dim()))?;
    let c = g.trace_re() / d as f64;
    let dev = g.sub(&HermitianMatrix::identity(d).scale(c));
    let p = if dev.iter().all(|v| v.norm() < 1e-13) {
        c
    } else {
        certified_linear_min(constraints, &g, tol)?.0.value
    };
    if p <= 0.0 {
        return Err(Error::Numerical("postselection probability has no positive lower bound".into()));
    }
    Ok(p.min(1.0))
}

/// max Re Tr X s.t. [[ρ, X], [X†, σ]] ⪰ 0. The optimum is √F(ρ, σ); used to
/// cross-check the dual formulation against the spectral oracle.
pub fn root_fidelity_sdp(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<SdpProblem> {
    let n = rho.dim();
    if sigma.dim() != n {
        return Err(Error::Dimension("fidelity arguments differ in size".into()));
    }
    let mut p = SdpProblem::new(Sense::Maximize);
    let mut x = AffineMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = p.add_scalar(format!("re X{i}{j}"), VarKind::Free);
            let im = p.add_scalar(format!("im X{i}{j}"), VarKind::Free);
            let mut e = CMat::zeros(n, n);
            e[(i, j)] = cr(1.0);
            x = x.add(&AffineMatrix::scaled_var(re, &e));
            e[(i, j)] = c(0.0, 1.0);
            x = x.add(&AffineMatrix::scaled_var(im, &e));
            if i == j {
                p.add_objective(re, 1.0);
            }
        }
    }
    let block = AffineMatrix::block(&[
        vec![Some(&AffineMatrix::constant(rho.mat())), Some(&x)],
        vec![Some(&x.adjoint()), Some(&AffineMatrix::constant(sigma.mat()))],
    ]);
    p.add_lmi("fidelity", block)?;
    Ok(p)
}
