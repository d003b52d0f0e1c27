//! Primal-dual interior-point method on the homogeneous self-dual embedding
//! of the cone program
//!
//!   minimize cᵀx  subject to  Gx + s = h,  Ax = b,  s ∈ R₊ˡ × S₊ⁿ¹ × …
//!
//! with Nesterov–Todd scaling and Mehrotra predictor-corrector steps. The
//! Newton systems reduce to a Schur complement in x that is factored with an
//! envelope Cholesky using the variable ordering hints of the model.

use nalgebra::{DMatrix, SymmetricEigen, SVD};

use super::chol::EnvelopeCholesky;
use super::{Relation, SdpProblem, SdpSolution, Sense, SolveStatus, VarKind};
use crate::error::{Error, Result};
use crate::matqi::{C64, CMat, HermitianMatrix};

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub verbose: bool,
    /// Record the point of every iterate in `SdpSolution::trail`.
    pub keep_trail: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iter: 200, verbose: false, keep_trail: false }
    }
}

const STEP: f64 = 0.99;
const TAU_KAPPA_INFEASIBLE: f64 = 1e-9;

enum LpOrigin {
    Sign,
    Linear(usize),
}

struct Block {
    dim: usize,
    orig_dim: usize,
    complex: bool,
    h: DMatrix<f64>,
    /// Internal variable index and the entries of its G column (both triangles).
    cols: Vec<(usize, Vec<(usize, usize, f64)>)>,
}

struct Compiled {
    n: usize,
    order: Vec<usize>,
    c: Vec<f64>,
    sign: f64,
    obj_const: f64,
    lp_g: Vec<Vec<(usize, f64)>>,
    lp_h: Vec<f64>,
    lp_origin: Vec<LpOrigin>,
    a: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    a_origin: Vec<usize>,
    blocks: Vec<Block>,
    first: Vec<usize>,
}

fn embed_entries(entries: &[(usize, usize, C64)], n: usize, complex: bool, scale: f64) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(entries.len() * if complex { 4 } else { 1 });
    for &(r, c, v) in entries {
        if v.re != 0.0 {
            out.push((r, c, scale * v.re));
            if complex {
                out.push((r + n, c + n, scale * v.re));
            }
        }
        if complex && v.im != 0.0 {
            out.push((r, c + n, -scale * v.im));
            out.push((r + n, c, scale * v.im));
        }
    }
    out
}

fn compile(p: &SdpProblem) -> Compiled {
    let nv = p.vars.len();
    let mut order: Vec<usize> = (0..nv).collect();
    order.sort_by_key(|&i| (p.vars[i].group, i));
    let mut pos = vec![0; nv];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    let sign = if p.sense == Sense::Minimize { 1.0 } else { -1.0 };
    let mut c = vec![0.0; nv];
    for (&v, &coef) in &p.objective {
        c[pos[v]] += sign * coef;
    }
    let mut lp_g = Vec::new();
    let mut lp_h = Vec::new();
    let mut lp_origin = Vec::new();
    for (i, v) in p.vars.iter().enumerate() {
        if v.kind == VarKind::NonNeg {
            lp_g.push(vec![(pos[i], -1.0)]);
            lp_h.push(0.0);
            lp_origin.push(LpOrigin::Sign);
        }
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut a_origin = Vec::new();
    for (j, lc) in p.linear.iter().enumerate() {
        let terms: Vec<(usize, f64)> = lc.terms.iter().map(|&(v, coef)| (pos[v], coef)).collect();
        match lc.rel {
            Relation::Eq => {
                a.push(terms);
                b.push(lc.rhs);
                a_origin.push(j);
            }
            Relation::Ge => {
                lp_g.push(terms.iter().map(|&(v, coef)| (v, -coef)).collect());
                lp_h.push(-lc.rhs);
                lp_origin.push(LpOrigin::Linear(j));
            }
            Relation::Le => {
                lp_g.push(terms);
                lp_h.push(lc.rhs);
                lp_origin.push(LpOrigin::Linear(j));
            }
        }
    }
    let mut blocks = Vec::new();
    for l in &p.lmis {
        let complex = !l.expr.is_real();
        let n = l.expr.rows;
        let dim = if complex { 2 * n } else { n };
        let mut h = DMatrix::zeros(dim, dim);
        for (r, cc, v) in embed_entries(&l.expr.constant, n, complex, 1.0) {
            h[(r, cc)] += v;
        }
        let mut cols: Vec<(usize, Vec<(usize, usize, f64)>)> = l
            .expr
            .terms
            .iter()
            .map(|(&v, e)| (pos[v], embed_entries(e, n, complex, -1.0)))
            .filter(|(_, e)| !e.is_empty())
            .collect();
        cols.sort_by_key(|c| c.0);
        blocks.push(Block { dim, orig_dim: n, complex, h, cols });
    }
    let mut first: Vec<usize> = (0..nv).collect();
    let mut touch = |vars: &mut dyn Iterator<Item = usize>| {
        let vs: Vec<usize> = vars.collect();
        if let Some(&mn) = vs.iter().min() {
            for v in vs {
                first[v] = first[v].min(mn);
            }
        }
    };
    for row in lp_g.iter().chain(a.iter()) {
        touch(&mut row.iter().map(|t| t.0));
    }
    for blk in &blocks {
        touch(&mut blk.cols.iter().map(|t| t.0));
    }
    Compiled { n: nv, order, c, sign, obj_const: p.objective_constant, lp_g, lp_h, lp_origin, a, b, a_origin, blocks, first }
}

/// Element of the cone's ambient space: LP part and one symmetric matrix per block.
#[derive(Clone, Debug)]
struct ConeVec {
    lp: Vec<f64>,
    m: Vec<DMatrix<f64>>,
}

impl ConeVec {
    fn zeros(cp: &Compiled) -> Self {
        ConeVec { lp: vec![0.0; cp.lp_h.len()], m: cp.blocks.iter().map(|b| DMatrix::zeros(b.dim, b.dim)).collect() }
    }

    fn identity(cp: &Compiled) -> Self {
        ConeVec { lp: vec![1.0; cp.lp_h.len()], m: cp.blocks.iter().map(|b| DMatrix::identity(b.dim, b.dim)).collect() }
    }

    fn h(cp: &Compiled) -> Self {
        ConeVec { lp: cp.lp_h.clone(), m: cp.blocks.iter().map(|b| b.h.clone()).collect() }
    }

    fn dot(&self, o: &ConeVec) -> f64 {
        let mut s: f64 = self.lp.iter().zip(&o.lp).map(|(a, b)| a * b).sum();
        for (a, b) in self.m.iter().zip(&o.m) {
            s += a.dot(b);
        }
        s
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn axpy(&mut self, alpha: f64, o: &ConeVec) {
        for (a, b) in self.lp.iter_mut().zip(&o.lp) {
            *a += alpha * b;
        }
        for (a, b) in self.m.iter_mut().zip(&o.m) {
            *a += b * alpha;
        }
    }

    fn scaled(&self, alpha: f64) -> ConeVec {
        ConeVec { lp: self.lp.iter().map(|v| v * alpha).collect(), m: self.m.iter().map(|m| m * alpha).collect() }
    }

    fn is_finite(&self) -> bool {
        self.lp.iter().all(|v| v.is_finite()) && self.m.iter().all(|m| m.iter().all(|v| v.is_finite()))
    }

    /// Smallest t ≥ 0 such that self + t·e lies in the cone (−λmin when negative).
    fn max_violation(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for v in &self.lp {
            worst = worst.max(-v);
        }
        for m in &self.m {
            worst = worst.max(-min_eig(m));
        }
        worst
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(sym(m)).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dotv(a, a).sqrt()
}

impl Compiled {
    fn g_mul(&self, x: &[f64]) -> ConeVec {
        let mut out = ConeVec::zeros(self);
        for (i, row) in self.lp_g.iter().enumerate() {
            out.lp[i] = row.iter().map(|&(v, g)| g * x[v]).sum();
        }
        for (b, blk) in self.blocks.iter().enumerate() {
            let m = &mut out.m[b];
            for (v, e) in &blk.cols {
                let xv = x[*v];
                if xv != 0.0 {
                    for &(r, c, g) in e {
                        m[(r, c)] += g * xv;
                    }
                }
            }
        }
        out
    }

    fn gt_mul(&self, z: &ConeVec) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, row) in self.lp_g.iter().enumerate() {
            for &(v, g) in row {
                out[v] += g * z.lp[i];
            }
        }
        for (b, blk) in self.blocks.iter().enumerate() {
            let m = &z.m[b];
            for (v, e) in &blk.cols {
                out[*v] += e.iter().map(|&(r, c, g)| g * m[(r, c)]).sum::<f64>();
            }
        }
        out
    }

    fn a_mul(&self, x: &[f64]) -> Vec<f64> {
        self.a.iter().map(|row| row.iter().map(|&(v, a)| a * x[v]).sum()).collect()
    }

    fn at_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (j, row) in self.a.iter().enumerate() {
            for &(v, a) in row {
                out[v] += a * y[j];
            }
        }
        out
    }

    fn degree(&self) -> usize {
        self.lp_h.len() + self.blocks.iter().map(|b| b.dim).sum::<usize>()
    }
}

/// Nesterov–Todd scaling: W z = W⁻ᵀ s = λ. For PSD blocks W(u) = RᵀuR.
struct Scaling {
    d: Vec<f64>,
    lam_lp: Vec<f64>,
    r: Vec<DMatrix<f64>>,
    rinv: Vec<DMatrix<f64>>,
    p: Vec<DMatrix<f64>>,
    lam: Vec<Vec<f64>>,
}

/// Factor with s = L Lᵀ; Cholesky when possible, clamped spectral factor otherwise.
fn psd_factor(s: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let s = sym(s);
    if let Some(ch) = s.clone().cholesky() {
        let l = ch.l();
        let n = l.nrows();
        let linv = l.solve_lower_triangular(&DMatrix::identity(n, n)).unwrap_or_else(|| DMatrix::identity(n, n));
        return (l, linv);
    }
    let eig = SymmetricEigen::new(s);
    let floor = 1e-300;
    let sq: Vec<f64> = eig.eigenvalues.iter().map(|&e| e.max(floor).sqrt()).collect();
    let v = &eig.eigenvectors;
    let mut l = v.clone();
    let mut linv = v.transpose();
    for j in 0..sq.len() {
        l.column_mut(j).scale_mut(sq[j]);
        linv.row_mut(j).scale_mut(1.0 / sq[j]);
    }
    (l, linv)
}

/// NT scaling of a single pair (s, z): returns (R, R⁻¹, λ).
fn nt_pair(s: &DMatrix<f64>, z: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let (ls, lsinv) = psd_factor(s);
    let (lz, _) = psd_factor(z);
    let svd = SVD::new(lz.transpose() * &ls, true, true);
    let u_t = svd.v_t.expect("svd v_t");
    let v = u_t.transpose();
    let sig: Vec<f64> = svd.singular_values.iter().map(|&x| x.max(1e-300)).collect();
    let mut r = &ls * &v;
    let mut rinv = u_t * &lsinv;
    for j in 0..sig.len() {
        r.column_mut(j).scale_mut(1.0 / sig[j].sqrt());
        rinv.row_mut(j).scale_mut(sig[j].sqrt());
    }
    (r, rinv, sig)
}

impl Scaling {
    fn from_pair(cp: &Compiled, s: &ConeVec, z: &ConeVec) -> Self {
        let d: Vec<f64> = s.lp.iter().zip(&z.lp).map(|(a, b)| (a / b).sqrt()).collect();
        let lam_lp = s.lp.iter().zip(&z.lp).map(|(a, b)| (a * b).sqrt()).collect();
        let mut sc = Scaling { d, lam_lp, r: vec![], rinv: vec![], p: vec![], lam: vec![] };
        for b in 0..cp.blocks.len() {
            let (r, rinv, lam) = nt_pair(&s.m[b], &z.m[b]);
            sc.p.push(rinv.transpose() * &rinv);
            sc.r.push(r);
            sc.rinv.push(rinv);
            sc.lam.push(lam);
        }
        sc
    }

    fn w(&self, u: &ConeVec) -> ConeVec {
        ConeVec {
            lp: u.lp.iter().zip(&self.d).map(|(a, d)| a * d).collect(),
            m: u.m.iter().zip(&self.r).map(|(m, r)| sym(&(r.transpose() * m * r))).collect(),
        }
    }

    fn wt(&self, u: &ConeVec) -> ConeVec {
        ConeVec {
            lp: u.lp.iter().zip(&self.d).map(|(a, d)| a * d).collect(),
            m: u.m.iter().zip(&self.r).map(|(m, r)| sym(&(r * m * r.transpose()))).collect(),
        }
    }

    fn wtw_inv(&self, u: &ConeVec) -> ConeVec {
        ConeVec {
            lp: u.lp.iter().zip(&self.d).map(|(a, d)| a / (d * d)).collect(),
            m: u.m.iter().zip(&self.p).map(|(m, p)| sym(&(p * m * p))).collect(),
        }
    }

    fn wtw(&self, u: &ConeVec) -> ConeVec {
        self.wt(&self.w(u))
    }

    /// λ∘λ.
    fn lam_sq(&self) -> ConeVec {
        ConeVec {
            lp: self.lam_lp.iter().map(|l| l * l).collect(),
            m: self.lam.iter().map(|l| DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(l.len(), l.iter().map(|x| x * x)))).collect(),
        }
    }

    /// Solves λ∘u = v.
    fn lam_div(&self, v: &ConeVec) -> ConeVec {
        ConeVec {
            lp: v.lp.iter().zip(&self.lam_lp).map(|(a, l)| a / l).collect(),
            m: v
                .m
                .iter()
                .zip(&self.lam)
                .map(|(m, l)| DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| 2.0 * m[(i, j)] / (l[i] + l[j])))
                .collect(),
        }
    }

    /// Largest α with λ + α·u in the cone.
    fn max_step(&self, u: &ConeVec) -> f64 {
        let mut alpha = f64::INFINITY;
        for (v, l) in u.lp.iter().zip(&self.lam_lp) {
            if *v < 0.0 {
                alpha = alpha.min(-l / v);
            }
        }
        for (m, l) in u.m.iter().zip(&self.lam) {
            let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] / (l[i] * l[j]).sqrt());
            let nu = min_eig(&scaled);
            if nu < 0.0 {
                alpha = alpha.min(-1.0 / nu);
            }
        }
        alpha
    }
}

fn jordan(u: &ConeVec, v: &ConeVec) -> ConeVec {
    ConeVec {
        lp: u.lp.iter().zip(&v.lp).map(|(a, b)| a * b).collect(),
        m: u.m.iter().zip(&v.m).map(|(a, b)| sym(&(a * b))).collect(),
    }
}

struct Kkt<'a> {
    cp: &'a Compiled,
    sc: &'a Scaling,
    chol: EnvelopeCholesky,
    kinv_at: Vec<Vec<f64>>,
    schur: Option<EnvelopeCholesky>,
}

impl<'a> Kkt<'a> {
    fn factor(cp: &'a Compiled, sc: &'a Scaling) -> Result<Self> {
        let n = cp.n;
        let mut k = vec![0.0; n * n];
        for (row, d) in cp.lp_g.iter().zip(&sc.d) {
            let w = 1.0 / (d * d);
            for &(i, gi) in row {
                for &(j, gj) in row {
                    if i >= j {
                        k[i * n + j] += w * gi * gj;
                    }
                }
            }
        }
        for (b, blk) in cp.blocks.iter().enumerate() {
            let p = &sc.p[b];
            let nb = blk.dim;
            let mut t = DMatrix::<f64>::zeros(nb, nb);
            let mut y = nalgebra::DVector::<f64>::zeros(nb);
            for (jj, (vj, ej)) in blk.cols.iter().enumerate() {
                // T = P G_j P, accumulated column by column of G_j.
                t.fill(0.0);
                let mut idx: Vec<usize> = (0..ej.len()).collect();
                idx.sort_by_key(|&q| ej[q].1);
                let mut q = 0;
                while q < idx.len() {
                    let col = ej[idx[q]].1;
                    y.fill(0.0);
                    while q < idx.len() && ej[idx[q]].1 == col {
                        let (r, _, g) = ej[idx[q]];
                        y.axpy(g, &p.column(r), 1.0);
                        q += 1;
                    }
                    t.ger(1.0, &y, &p.column(col), 1.0);
                }
                for (vi, ei) in &blk.cols[jj..] {
                    let hij: f64 = ei.iter().map(|&(r, c, g)| g * t[(r, c)]).sum();
                    k[*vi * n + *vj] += hij;
                }
            }
        }
        for row in &cp.a {
            for &(i, ai) in row {
                for &(j, aj) in row {
                    if i >= j {
                        k[i * n + j] += ai * aj;
                    }
                }
            }
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite Schur complement".into()));
        }
        let chol = EnvelopeCholesky::factor(n, k, &cp.first);
        let mut kinv_at = Vec::with_capacity(cp.a.len());
        for row in &cp.a {
            let mut v = vec![0.0; n];
            for &(i, a) in row {
                v[i] += a;
            }
            chol.solve(&mut v);
            kinv_at.push(v);
        }
        let schur = if cp.a.is_empty() {
            None
        } else {
            let m = cp.a.len();
            let mut s = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..=i {
                    s[i * m + j] = cp.a[i].iter().map(|&(v, a)| a * kinv_at[j][v]).sum();
                }
            }
            Some(EnvelopeCholesky::factor(m, s, &vec![0; m]))
        };
        Ok(Kkt { cp, sc, chol, kinv_at, schur })
    }

    fn solve_once(&self, rx: &[f64], ry: &[f64], rz: &ConeVec) -> (Vec<f64>, Vec<f64>, ConeVec) {
        let cp = self.cp;
        let t = self.sc.wtw_inv(rz);
        let gt = cp.gt_mul(&t);
        let atry = cp.at_mul(ry);
        let mut v: Vec<f64> = (0..cp.n).map(|i| rx[i] + gt[i] + atry[i]).collect();
        self.chol.solve(&mut v);
        let mut uy = vec![0.0; cp.a.len()];
        if let Some(s) = &self.schur {
            let av = cp.a_mul(&v);
            for j in 0..uy.len() {
                uy[j] = av[j] - ry[j];
            }
            s.solve(&mut uy);
            for (j, col) in self.kinv_at.iter().enumerate() {
                for i in 0..cp.n {
                    v[i] -= uy[j] * col[i];
                }
            }
        }
        let mut uz = self.sc.wtw_inv(&cp.g_mul(&v));
        uz.axpy(-1.0, &t);
        (v, uy, uz)
    }

    /// Solves [0 Aᵀ Gᵀ; A 0 0; G 0 −WᵀW] u = r with one refinement step.
    fn solve(&self, rx: &[f64], ry: &[f64], rz: &ConeVec) -> (Vec<f64>, Vec<f64>, ConeVec) {
        let cp = self.cp;
        let (mut ux, mut uy, mut uz) = self.solve_once(rx, ry, rz);
        let aty = cp.at_mul(&uy);
        let gtz = cp.gt_mul(&uz);
        let ex: Vec<f64> = (0..cp.n).map(|i| rx[i] - aty[i] - gtz[i]).collect();
        let aux = cp.a_mul(&ux);
        let ey: Vec<f64> = ry.iter().zip(&aux).map(|(a, b)| a - b).collect();
        let mut ez = rz.clone();
        ez.axpy(-1.0, &cp.g_mul(&ux));
        ez.axpy(1.0, &self.sc.wtw(&uz));
        let (dx, dy, dz) = self.solve_once(&ex, &ey, &ez);
        for i in 0..ux.len() {
            ux[i] += dx[i];
        }
        for i in 0..uy.len() {
            uy[i] += dy[i];
        }
        uz.axpy(1.0, &dz);
        (ux, uy, uz)
    }
}

#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: ConeVec,
    s: ConeVec,
    tau: f64,
    kappa: f64,
}

struct Measures {
    pres: f64,
    dres: f64,
    pcost: f64,
    dcost: f64,
    relgap: f64,
    pinf: Option<f64>,
    dinf: Option<f64>,
}

fn measure(cp: &Compiled, it: &Iterate, h: &ConeVec, norms: (f64, f64, f64)) -> Measures {
    let (resx0, resy0, resz0) = norms;
    let tau = it.tau;
    let aty = cp.at_mul(&it.y);
    let gtz = cp.gt_mul(&it.z);
    let hrx: Vec<f64> = (0..cp.n).map(|i| -aty[i] - gtz[i]).collect();
    let rx: Vec<f64> = (0..cp.n).map(|i| hrx[i] - cp.c[i] * tau).collect();
    let ax = cp.a_mul(&it.x);
    let ry: Vec<f64> = ax.iter().zip(&cp.b).map(|(a, b)| a - b * tau).collect();
    let mut hrz = cp.g_mul(&it.x);
    hrz.axpy(1.0, &it.s);
    let mut rz = hrz.clone();
    rz.axpy(-tau, h);
    let cx = dotv(&cp.c, &it.x);
    let by = dotv(&cp.b, &it.y);
    let hz = h.dot(&it.z);
    let pcost = cx / tau;
    let dcost = -(by + hz) / tau;
    let pres = (norm2(&ry) / resy0).max(rz.norm() / resz0) / tau;
    let dres = norm2(&rx) / resx0 / tau;
    let gap = it.s.dot(&it.z) / (tau * tau);
    let scale = 1.0 + pcost.abs().min(dcost.abs());
    let relgap = gap.max((pcost - dcost).abs()) / scale;
    let pinf = if hz + by < 0.0 { Some(norm2(&hrx) / resx0 / (-(hz + by))) } else { None };
    let dinf = if cx < 0.0 { Some((norm2(&ax) / resy0).max(hrz.norm() / resz0) / (-cx)) } else { None };
    Measures { pres, dres, pcost, dcost, relgap, pinf, dinf }
}

pub(super) fn solve(problem: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution> {
    let cp = compile(problem);
    let h = ConeVec::h(&cp);
    let norms = (norm2(&cp.c).max(1.0), norm2(&cp.b).max(1.0), h.norm().max(1.0));
    let deg = cp.degree() as f64;
    let m_eq = cp.a.len();
    let tol = opts.tol;
    let near_tol = (tol * 1e3).max(1e-6);

    // Starting point from two least-squares solves with W = I.
    let ident = {
        let one = ConeVec::identity(&cp);
        Scaling::from_pair(&cp, &one, &one)
    };
    let kkt0 = Kkt::factor(&cp, &ident)?;
    let (x0, _, uz) = kkt0.solve(&vec![0.0; cp.n], &cp.b, &h);
    let mut s = uz.scaled(-1.0);
    let negc: Vec<f64> = cp.c.iter().map(|v| -v).collect();
    let (_, y0, mut z) = kkt0.solve(&negc, &vec![0.0; m_eq], &ConeVec::zeros(&cp));
    let e = ConeVec::identity(&cp);
    for v in [&mut s, &mut z] {
        let ts = v.max_violation();
        let nrm = v.norm();
        if ts >= -1e-8 * nrm.max(1.0) {
            v.axpy(1.0 + ts, &e);
        }
    }
    let mut it = Iterate { x: x0, y: y0, z, s, tau: 1.0, kappa: 1.0 };
    let mut sc = Scaling::from_pair(&cp, &it.s, &it.z);

    let mut best: Option<(f64, Iterate)> = None;
    let mut trail = Vec::new();
    let mut status = SolveStatus::NumericalFailure;
    let mut iterations = 0;
    let mut small_steps = 0;

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let ms = measure(&cp, &it, &h, norms);
        if opts.verbose {
            eprintln!(
                "{iter:3} pcost {:+.9e} dcost {:+.9e} pres {:.2e} dres {:.2e} gap {:.2e} tau {:.2e} kappa {:.2e}",
                ms.pcost, ms.dcost, ms.pres, ms.dres, ms.relgap, it.tau, it.kappa
            );
        }
        if opts.keep_trail && it.tau > 0.0 {
            trail.push(point_of(&cp, &it));
        }
        let metric = ms.pres.max(ms.dres).max(ms.relgap);
        if metric.is_finite() && best.as_ref().map_or(true, |(b, _)| metric < *b) {
            best = Some((metric, it.clone()));
        }
        if ms.pres <= tol && ms.dres <= tol && ms.relgap <= tol {
            status = SolveStatus::Optimal;
            break;
        }
        if ms.pinf.is_some_and(|p| p <= tol) {
            status = SolveStatus::Infeasible;
            break;
        }
        if ms.dinf.is_some_and(|d| d <= tol) {
            status = SolveStatus::Unbounded;
            break;
        }
        if it.tau / it.kappa < TAU_KAPPA_INFEASIBLE {
            let p = ms.pinf.unwrap_or(f64::INFINITY);
            let d = ms.dinf.unwrap_or(f64::INFINITY);
            if p.is_finite() || d.is_finite() {
                status = if p <= d { SolveStatus::Infeasible } else { SolveStatus::Unbounded };
                break;
            }
        }
        if iter == opts.max_iter || small_steps >= 3 {
            break;
        }

        let kkt = match Kkt::factor(&cp, &sc) {
            Ok(k) => k,
            Err(e) => {
                if opts.verbose {
                    eprintln!("stopping: {e}");
                }
                break;
            }
        };
        let (x2, y2, z2) = kkt.solve(&negc, &cp.b, &h);
        let denom2 = dotv(&cp.c, &x2) + dotv(&cp.b, &y2) + h.dot(&z2) - it.kappa / it.tau;

        let aty = cp.at_mul(&it.y);
        let gtz = cp.gt_mul(&it.z);
        let rx: Vec<f64> = (0..cp.n).map(|i| aty[i] + gtz[i] + cp.c[i] * it.tau).collect();
        let ax = cp.a_mul(&it.x);
        let ry: Vec<f64> = (0..m_eq).map(|j| -ax[j] + cp.b[j] * it.tau).collect();
        let mut rz = cp.g_mul(&it.x);
        rz.axpy(1.0, &it.s);
        rz.axpy(-it.tau, &h);
        let rt = it.kappa + dotv(&cp.c, &it.x) + dotv(&cp.b, &it.y) + h.dot(&it.z);
        let mu = (it.s.dot(&it.z) + it.tau * it.kappa) / (deg + 1.0);
        let lam_sq = sc.lam_sq();

        let mut sigma = 0.0;
        let mut aff: Option<(ConeVec, ConeVec, f64, f64)> = None;
        let mut dir = None;
        for pass in 0..2 {
            let eta = if pass == 0 { 1.0 } else { 1.0 - sigma };
            let mut bs = lam_sq.scaled(-1.0);
            let mut bk = -it.tau * it.kappa;
            if let Some((dsa, dza, dta, dka)) = &aff {
                bs.axpy(-1.0, &jordan(dsa, dza));
                bs.axpy(sigma * mu, &e);
                bk += sigma * mu - dta * dka;
            }
            let lbs = sc.lam_div(&bs);
            let mut bz = rz.scaled(-eta);
            bz.axpy(-1.0, &sc.wt(&lbs));
            let bx: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
            let by: Vec<f64> = ry.iter().map(|v| eta * v).collect();
            let (x1, y1, z1) = kkt.solve(&bx, &by, &bz);
            let bt = -eta * rt - bk / it.tau;
            let dtau = (bt - (dotv(&cp.c, &x1) + dotv(&cp.b, &y1) + h.dot(&z1))) / denom2;
            let dx: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + dtau * b).collect();
            let dy: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + dtau * b).collect();
            let mut dz = z1;
            dz.axpy(dtau, &z2);
            let dkappa = (bk - it.kappa * dtau) / it.tau;
            let dzt = sc.w(&dz);
            let mut dst = lbs;
            dst.axpy(-1.0, &dzt);
            if !dst.is_finite() || !dzt.is_finite() || !dtau.is_finite() {
                if opts.verbose {
                    eprintln!("stopping: non-finite search direction");
                }
                break;
            }
            let mut alpha = sc.max_step(&dst).min(sc.max_step(&dzt));
            if dtau < 0.0 {
                alpha = alpha.min(-it.tau / dtau);
            }
            if dkappa < 0.0 {
                alpha = alpha.min(-it.kappa / dkappa);
            }
            if pass == 0 {
                sigma = (1.0 - alpha.min(1.0)).max(0.0).powi(3);
                aff = Some((dst, dzt, dtau, dkappa));
            } else {
                dir = Some((dx, dy, dz, dst, dzt, dtau, dkappa, alpha));
            }
        }
        let Some((dx, dy, dz, dst, _dzt, dtau, dkappa, alpha)) = dir else { break };
        let step = (STEP * alpha).min(1.0);
        if opts.verbose {
            eprintln!("    step {step:.3e} sigma {sigma:.3e} regularized pivots {}", kkt.chol.regularized);
        }
        if step < 1e-9 {
            small_steps += 1;
        } else {
            small_steps = 0;
        }
        for i in 0..cp.n {
            it.x[i] += step * dx[i];
        }
        for j in 0..m_eq {
            it.y[j] += step * dy[j];
        }
        it.tau += step * dtau;
        it.kappa += step * dkappa;
        let ds = sc.wt(&dst);
        it.s.axpy(step, &ds);
        it.z.axpy(step, &dz);
        sc = Scaling::from_pair(&cp, &it.s, &it.z);
    }

    if status == SolveStatus::NumericalFailure {
        if let Some((metric, b)) = best.take() {
            if metric <= tol {
                status = SolveStatus::Optimal;
            } else if metric <= near_tol {
                status = SolveStatus::NearOptimal;
            }
            it = b;
        }
    }
    let mut sol = assemble(problem, &cp, &it, &h, status, iterations);
    sol.trail = trail;
    Ok(sol)
}

fn point_of(cp: &Compiled, it: &Iterate) -> Vec<f64> {
    let mut x = vec![0.0; cp.n];
    for (k, &v) in cp.order.iter().enumerate() {
        x[v] = it.x[k] / it.tau;
    }
    x
}

fn assemble(problem: &SdpProblem, cp: &Compiled, it: &Iterate, h: &ConeVec, status: SolveStatus, iterations: usize) -> SdpSolution {
    let certificate = matches!(status, SolveStatus::Infeasible | SolveStatus::Unbounded);
    let tau = if certificate { 1.0 } else { it.tau };
    let mut x = vec![0.0; cp.n];
    for (k, &v) in cp.order.iter().enumerate() {
        x[v] = it.x[k] / tau;
    }
    let primal_value = problem.objective_value(&x);
    let dcost = -(dotv(&cp.b, &it.y) + h.dot(&it.z)) / tau;
    let dual_value = cp.sign * dcost + cp.obj_const;
    let mut linear_duals = vec![0.0; problem.linear.len()];
    for (row, o) in cp.lp_origin.iter().enumerate() {
        if let LpOrigin::Linear(j) = o {
            linear_duals[*j] = it.z.lp[row] / tau;
        }
    }
    for (row, &j) in cp.a_origin.iter().enumerate() {
        linear_duals[j] = -it.y[row] / tau;
    }
    let lmi_duals = cp
        .blocks
        .iter()
        .zip(&it.z.m)
        .map(|(blk, zm)| {
            let zm = zm / tau;
            let n = blk.orig_dim;
            let w = if blk.complex {
                CMat::from_fn(n, n, |i, j| C64::new(zm[(i, j)] + zm[(i + n, j + n)], zm[(i + n, j)] - zm[(i, j + n)]))
            } else {
                zm.map(|v| C64::new(v, 0.0))
            };
            HermitianMatrix::symmetrized(w)
        })
        .collect();
    SdpSolution {
        status,
        x,
        primal_value,
        dual_value,
        gap: (primal_value - dual_value).abs(),
        iterations,
        linear_duals,
        lmi_duals,
        trail: Vec::new(),
    }
}
