//! Channels, POVMs and the sifting (announcement + postselection + key map)
//! machinery.
//!
//! A [`SiftMap`] is stored as a list of blocks. Each block carries a scalar
//! weight, Kraus operators into its own output space and the key-register
//! projectors on that space; the forward map is the direct sum of the block
//! outputs. Block-diagonal maps built from POVMs are compressed to the range
//! of each key branch, so no announcement register is ever materialized.

use crate::error::{domain, Error, Result};
use crate::matqi::{
    cr, eig_hermitian, entropy, kron, kron_all, sqrtm_psd, CMat, DensityMatrix, HermitianMatrix,
};

const POVM_TOL: f64 = 1e-10;
const TRACE_NONINCREASING_TOL: f64 = 1e-9;
const RANGE_TOL: f64 = 1e-12;

/// Operator acting as `op` on subsystem `target` and identity elsewhere.
pub fn local_operator(op: &CMat, dims: &[usize], target: usize) -> Result<CMat> {
    if target >= dims.len() || op.nrows() != dims[target] || op.ncols() != dims[target] {
        return Err(Error::Dimension(format!("operator does not fit subsystem {target} of {dims:?}")));
    }
    let ids: Vec<CMat> = dims.iter().map(|&d| CMat::identity(d, d)).collect();
    let factors: Vec<&CMat> = (0..dims.len()).map(|i| if i == target { op } else { &ids[i] }).collect();
    Ok(kron_all(&factors))
}

/// Applies the channel with the given single-subsystem Kraus operators.
pub fn apply_local_kraus(rho: &DensityMatrix, target: usize, kraus: &[CMat]) -> Result<DensityMatrix> {
    let dims = rho.dims().to_vec();
    let mut out = CMat::zeros(rho.dim(), rho.dim());
    for k in kraus {
        let full = local_operator(k, &dims, target)?;
        out += &full * rho.mat() * full.adjoint();
    }
    DensityMatrix::new(HermitianMatrix::symmetrized(out), dims)
}

fn qubit_target(rho: &DensityMatrix, target: usize) -> Result<()> {
    match rho.dims().get(target) {
        Some(2) => Ok(()),
        Some(d) => Err(domain(format!("target subsystem has dimension {d}, expected a qubit"))),
        None => Err(Error::Dimension(format!("no subsystem {target}"))),
    }
}

/// Qubit depolarizing channel (1−p)ρ + p·Tr_target(ρ)⊗I/2 on one subsystem.
pub fn depolarize(rho: &DensityMatrix, p: f64, target: usize) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("depolarizing probability {p} outside [0,1]")));
    }
    qubit_target(rho, target)?;
    // (1−p)ρ + p·I/2 equals (1 − 3p/4)ρ + (p/4)Σ σρσ.
    let a = (1.0 - 0.75 * p).sqrt();
    let b = (0.25 * p).sqrt();
    let x = CMat::from_row_slice(2, 2, &[cr(0.0), cr(b), cr(b), cr(0.0)]);
    let y = CMat::from_row_slice(2, 2, &[cr(0.0), crate::matqi::c(0.0, -b), crate::matqi::c(0.0, b), cr(0.0)]);
    let z = CMat::from_row_slice(2, 2, &[cr(b), cr(0.0), cr(0.0), cr(-b)]);
    let i = CMat::identity(2, 2) * cr(a);
    apply_local_kraus(rho, target, &[i, x, y, z])
}

/// Pure loss on a {vacuum, one photon} mode: a beamsplitter with amplitude
/// transmittance √sqrt_eta against a vacuum ancilla, which is then discarded.
/// A single photon survives with probability `sqrt_eta`.
pub fn pure_loss_single_photon(rho: &DensityMatrix, sqrt_eta: f64, target: usize) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&sqrt_eta) {
        return Err(domain(format!("transmittance {sqrt_eta} outside [0,1]")));
    }
    qubit_target(rho, target)?;
    let k0 = CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(sqrt_eta.sqrt())]);
    let k1 = CMat::from_row_slice(2, 2, &[cr(0.0), cr((1.0 - sqrt_eta).sqrt()), cr(0.0), cr(0.0)]);
    apply_local_kraus(rho, target, &[k0, k1])
}

/// Declarative channel description used by configs.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    Depolarizing { p: f64, target: usize },
    PureLoss { sqrt_eta: f64, target: usize },
    Composed(Vec<ChannelSpec>),
}

impl ChannelSpec {
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        match self {
            ChannelSpec::Depolarizing { p, target } => depolarize(rho, *p, *target),
            ChannelSpec::PureLoss { sqrt_eta, target } => pure_loss_single_photon(rho, *sqrt_eta, *target),
            ChannelSpec::Composed(parts) => {
                let mut out = rho.clone();
                for part in parts {
                    out = part.apply(&out)?;
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PovmElement {
    /// Announcement tag (basis).
    pub basis: String,
    /// Classical value within the basis.
    pub value: usize,
    pub op: HermitianMatrix,
}

#[derive(Debug, Clone)]
pub struct Povm {
    dim: usize,
    elements: Vec<PovmElement>,
}

impl Povm {
    pub fn new(elements: Vec<PovmElement>) -> Result<Self> {
        let dim = elements.first().ok_or_else(|| domain("empty POVM"))?.op.dim();
        let mut total = CMat::zeros(dim, dim);
        for e in &elements {
            if e.op.dim() != dim {
                return Err(Error::Dimension("POVM elements of different sizes".into()));
            }
            let lo = e.op.min_eigenvalue();
            if lo < -POVM_TOL {
                return Err(Error::NotPsd(lo));
            }
            total += e.op.mat();
        }
        let dev = (total - CMat::identity(dim, dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > POVM_TOL {
            return Err(domain(format!("POVM elements sum to identity only within {dev:.3e}")));
        }
        Ok(Povm { dim, elements })
    }

    /// Builds a POVM from `(basis, value, operator)` triples.
    pub fn from_parts(parts: Vec<(&str, usize, HermitianMatrix)>) -> Result<Self> {
        Povm::new(
            parts
                .into_iter()
                .map(|(b, v, op)| PovmElement { basis: b.to_string(), value: v, op })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[PovmElement] {
        &self.elements
    }

    /// Distinct announcement tags in first-appearance order.
    pub fn bases(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.elements {
            if !out.contains(&e.basis.as_str()) {
                out.push(&e.basis);
            }
        }
        out
    }

    pub fn in_basis<'a>(&'a self, basis: &'a str) -> impl Iterator<Item = &'a PovmElement> + 'a {
        self.elements.iter().filter(move |e| e.basis == basis)
    }

    /// Sum of the elements announced under `basis`.
    pub fn basis_total(&self, basis: &str) -> HermitianMatrix {
        let mut total = CMat::zeros(self.dim, self.dim);
        for e in self.in_basis(basis) {
            total += e.op.mat();
        }
        HermitianMatrix::symmetrized(total)
    }

    fn has_basis(&self, basis: &str) -> bool {
        self.elements.iter().any(|e| e.basis == basis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiftMode {
    /// Announcement and value registers are explicit; the map carries Π.
    Dilated,
    /// S(ρ) = SρS† for a single operator S.
    SingleKraus,
    /// Direct sum of weighted, compressed blocks.
    BlockDiagonal,
}

#[derive(Debug, Clone)]
pub struct SiftBlock {
    pub label: String,
    pub weight: f64,
    pub kraus: Vec<CMat>,
    /// Postselection projector on the block output (dilated mode).
    pub projector: Option<HermitianMatrix>,
    pub key_projectors: Vec<HermitianMatrix>,
}

impl SiftBlock {
    pub fn out_dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.kraus[0].ncols()
    }

    pub fn apply(&self, rho: &CMat) -> HermitianMatrix {
        let mut out = CMat::zeros(self.out_dim(), self.out_dim());
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        if let Some(p) = &self.projector {
            out = p.mat() * out * p.mat();
        }
        HermitianMatrix::symmetrized(out * cr(self.weight))
    }

    pub fn adjoint(&self, sigma: &CMat) -> HermitianMatrix {
        let s = match &self.projector {
            Some(p) => p.mat() * sigma * p.mat(),
            None => sigma.clone(),
        };
        let mut out = CMat::zeros(self.in_dim(), self.in_dim());
        for k in &self.kraus {
            out += k.adjoint() * &s * k;
        }
        HermitianMatrix::symmetrized(out * cr(self.weight))
    }

    pub fn pinch(&self, m: &HermitianMatrix) -> HermitianMatrix {
        pinch_unchecked(m, &self.key_projectors)
    }

    fn is_real(&self) -> bool {
        self.kraus.iter().all(|k| k.iter().all(|z| z.im.abs() < 1e-14))
            && self.key_projectors.iter().all(|p| p.is_real(1e-14))
            && self.projector.as_ref().map_or(true, |p| p.is_real(1e-14))
    }
}

#[derive(Debug, Clone)]
pub struct SiftMap {
    pub mode: SiftMode,
    in_dim: usize,
    blocks: Vec<SiftBlock>,
}

impl SiftMap {
    pub fn new(mode: SiftMode, blocks: Vec<SiftBlock>) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| domain("sift map without blocks"))?;
        let in_dim = first.in_dim();
        let mut total = CMat::zeros(in_dim, in_dim);
        for b in &blocks {
            if b.kraus.is_empty() {
                return Err(domain(format!("block {} has no Kraus operators", b.label)));
            }
            let out = b.out_dim();
            if b.kraus.iter().any(|k| k.ncols() != in_dim || k.nrows() != out) {
                return Err(Error::Dimension(format!("Kraus operators of block {} disagree in size", b.label)));
            }
            if !(b.weight >= 0.0) {
                return Err(domain(format!("block {} has negative weight", b.label)));
            }
            if let Some(p) = &b.projector {
                check_projector(p.mat(), out)?;
            }
            check_projector_family(&b.key_projectors, out)?;
            total += b.adjoint(&CMat::identity(out, out)).mat();
        }
        let excess = eig_hermitian(&HermitianMatrix::symmetrized(total)).values.last().copied().unwrap_or(0.0);
        if excess > 1.0 + TRACE_NONINCREASING_TOL {
            return Err(domain(format!("sift map increases trace (S†(I) has eigenvalue {excess:.6})")));
        }
        Ok(SiftMap { mode, in_dim, blocks })
    }

    /// S(ρ) = SρS† with key projectors on the output of S.
    pub fn single_kraus(s: CMat, key_projectors: Vec<HermitianMatrix>) -> Result<Self> {
        let block = SiftBlock { label: "S".into(), weight: 1.0, kraus: vec![s], projector: None, key_projectors };
        SiftMap::new(SiftMode::SingleKraus, vec![block])
    }

    /// No postselection: the key map acts directly on ρ.
    pub fn identity(dim: usize, key_projectors: Vec<HermitianMatrix>) -> Result<Self> {
        let block = SiftBlock {
            label: "id".into(),
            weight: 1.0,
            kraus: vec![CMat::identity(dim, dim)],
            projector: None,
            key_projectors,
        };
        SiftMap::new(SiftMode::BlockDiagonal, vec![block])
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.blocks.iter().map(SiftBlock::out_dim).sum()
    }

    pub fn blocks(&self) -> &[SiftBlock] {
        &self.blocks
    }

    /// Multiplies every block weight by `c` (e.g. a heralding probability).
    pub fn scaled(mut self, c: f64) -> Result<Self> {
        for b in &mut self.blocks {
            b.weight *= c;
        }
        SiftMap::new(self.mode, self.blocks)
    }

    pub fn is_real(&self) -> bool {
        self.blocks.iter().all(SiftBlock::is_real)
    }

    fn check_in(&self, m: &CMat) -> Result<()> {
        if m.nrows() != self.in_dim {
            return Err(Error::Dimension(format!("state has dim {}, sift map expects {}", m.nrows(), self.in_dim)));
        }
        Ok(())
    }

    pub fn apply_blocks(&self, rho: &HermitianMatrix) -> Result<Vec<HermitianMatrix>> {
        self.check_in(rho.mat())?;
        Ok(self.blocks.iter().map(|b| b.apply(rho.mat())).collect())
    }

    /// Forward map as a direct sum over blocks, with p_pass = Tr S(ρ).
    pub fn apply(&self, rho: &HermitianMatrix) -> Result<(HermitianMatrix, f64)> {
        let parts = self.apply_blocks(rho)?;
        let p_pass = parts.iter().map(HermitianMatrix::trace_re).sum();
        Ok((direct_sum(&parts), p_pass))
    }

    /// Adjoint of the direct-sum map.
    pub fn adjoint(&self, sigma: &HermitianMatrix) -> Result<HermitianMatrix> {
        if sigma.dim() != self.out_dim() {
            return Err(Error::Dimension(format!(
                "operator has dim {}, sifted space has dim {}",
                sigma.dim(),
                self.out_dim()
            )));
        }
        let mut out = CMat::zeros(self.in_dim, self.in_dim);
        let mut off = 0;
        for b in &self.blocks {
            let d = b.out_dim();
            let part = sigma.mat().view((off, off), (d, d)).into_owned();
            out += b.adjoint(&part).mat();
            off += d;
        }
        Ok(HermitianMatrix::symmetrized(out))
    }

    pub fn adjoint_blocks(&self, sigmas: &[HermitianMatrix]) -> Result<HermitianMatrix> {
        if sigmas.len() != self.blocks.len() {
            return Err(Error::Dimension("one operator per block expected".into()));
        }
        let mut out = CMat::zeros(self.in_dim, self.in_dim);
        for (b, s) in self.blocks.iter().zip(sigmas) {
            if s.dim() != b.out_dim() {
                return Err(Error::Dimension(format!("block {} expects dim {}", b.label, b.out_dim())));
            }
            out += b.adjoint(s.mat()).mat();
        }
        Ok(HermitianMatrix::symmetrized(out))
    }

    /// Key projectors lifted to the direct-sum space.
    pub fn key_projectors(&self) -> Vec<HermitianMatrix> {
        let n = self.out_dim();
        let count = self.blocks.iter().map(|b| b.key_projectors.len()).max().unwrap_or(0);
        let mut out = vec![CMat::zeros(n, n); count];
        let mut off = 0;
        for b in &self.blocks {
            let d = b.out_dim();
            for (j, p) in b.key_projectors.iter().enumerate() {
                out[j].view_mut((off, off), (d, d)).copy_from(p.mat());
            }
            off += d;
        }
        out.into_iter().map(HermitianMatrix::symmetrized).collect()
    }

    /// D(S(ρ) ‖ Σ_j Z_j S(ρ) Z_j) in bits, summed over blocks. Uses
    /// D(A‖pinch A) = H(pinch A) − H(A), which needs no regularization.
    pub fn key_relative_entropy(&self, rho: &HermitianMatrix) -> Result<f64> {
        let parts = self.apply_blocks(rho)?;
        Ok(self
            .blocks
            .iter()
            .zip(&parts)
            .map(|(b, s)| entropy(&b.pinch(s)) - entropy(s))
            .sum())
    }
}

fn direct_sum(parts: &[HermitianMatrix]) -> HermitianMatrix {
    let n: usize = parts.iter().map(HermitianMatrix::dim).sum();
    let mut out = CMat::zeros(n, n);
    let mut off = 0;
    for p in parts {
        out.view_mut((off, off), (p.dim(), p.dim())).copy_from(p.mat());
        off += p.dim();
    }
    HermitianMatrix::symmetrized(out)
}

fn check_projector(p: &CMat, dim: usize) -> Result<()> {
    if p.nrows() != dim {
        return Err(Error::Dimension(format!("projector of dim {} on a {dim}-dim space", p.nrows())));
    }
    let dev = (p * p - p).iter().chain((p - p.adjoint()).iter()).map(|z| z.norm()).fold(0.0, f64::max);
    if dev > 1e-9 {
        return Err(domain(format!("not an orthogonal projector (deviation {dev:.3e})")));
    }
    Ok(())
}

fn check_projector_family(ps: &[HermitianMatrix], dim: usize) -> Result<()> {
    if ps.is_empty() {
        return Err(domain("empty projector family"));
    }
    let mut total = CMat::zeros(dim, dim);
    for (i, p) in ps.iter().enumerate() {
        check_projector(p.mat(), dim)?;
        for q in &ps[i + 1..] {
            let overlap = (p.mat() * q.mat()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if overlap > 1e-9 {
                return Err(domain("projectors are not mutually orthogonal"));
            }
        }
        total += p.mat();
    }
    let dev = (total - CMat::identity(dim, dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > 1e-9 {
        return Err(domain("projectors do not sum to the identity"));
    }
    Ok(())
}

/// Pinching channel Σ_j P_j ρ P_j.
pub fn pinch(rho: &HermitianMatrix, projectors: &[HermitianMatrix]) -> Result<HermitianMatrix> {
    check_projector_family(projectors, rho.dim())?;
    Ok(pinch_unchecked(rho, projectors))
}

pub(crate) fn pinch_unchecked(rho: &HermitianMatrix, projectors: &[HermitianMatrix]) -> HermitianMatrix {
    let mut out = CMat::zeros(rho.dim(), rho.dim());
    for p in projectors {
        out += p.mat() * rho.mat() * p.mat();
    }
    HermitianMatrix::symmetrized(out)
}

/// Projectors onto Alice's values, Z_A^j ⊗ I_B, for a product key register.
pub fn key_projectors_on_first(basis: &[crate::matqi::CVec], d_rest: usize) -> Vec<HermitianMatrix> {
    basis
        .iter()
        .map(|v| HermitianMatrix::symmetrized(kron(HermitianMatrix::projector(v).mat(), &CMat::identity(d_rest, d_rest))))
        .collect()
}

fn check_keep(alice: &Povm, bob: &Povm, keep: &[(&str, &str)]) -> Result<()> {
    if keep.is_empty() {
        return Err(domain("no announcement pairs kept"));
    }
    for (a, b) in keep {
        if !alice.has_basis(a) || !bob.has_basis(b) {
            return Err(domain(format!("kept pair ({a},{b}) names an unknown announcement")));
        }
    }
    Ok(())
}

fn value_count(alice: &Povm) -> usize {
    alice.elements.iter().map(|e| e.value + 1).max().unwrap_or(1)
}

/// Block-diagonal sift map for the kept announcement pairs, keyed on Alice's
/// values. Bob's value register is dropped (its announcement sum enters as one
/// Kraus factor). Each block is compressed to the span of its key branches.
pub fn build_sift_map(alice: &Povm, bob: &Povm, keep: &[(&str, &str)]) -> Result<SiftMap> {
    check_keep(alice, bob, keep)?;
    let nv = value_count(alice);
    let (da, db) = (alice.dim(), bob.dim());
    let mut blocks = Vec::new();
    for (ab, bb) in keep {
        let sqrt_b = sqrtm_psd(&bob.basis_total(bb));
        // Branch j: √M_A^{(ab,j)} ⊗ √M̄_B^{bb}, mapping into A⊗B.
        let mut branches: Vec<CMat> = vec![CMat::zeros(da * db, da * db); nv];
        for e in alice.in_basis(ab) {
            branches[e.value] += kron(sqrtm_psd(&e.op).mat(), sqrt_b.mat());
        }
        let mut rows: Vec<CMat> = Vec::new();
        let mut sizes = Vec::new();
        for br in &branches {
            let u = range_basis(br);
            sizes.push(u.ncols());
            if u.ncols() > 0 {
                rows.push(u.adjoint() * br);
            }
        }
        let out: usize = sizes.iter().sum();
        if out == 0 {
            continue;
        }
        let mut k = CMat::zeros(out, da * db);
        let mut off = 0;
        for r in &rows {
            k.view_mut((off, 0), (r.nrows(), r.ncols())).copy_from(r);
            off += r.nrows();
        }
        let gram = HermitianMatrix::symmetrized(k.adjoint() * &k);
        let weight = gram.max_eigenvalue();
        if weight <= 0.0 {
            continue;
        }
        k *= cr(1.0 / weight.sqrt());
        let mut key_projectors = Vec::new();
        let mut off = 0;
        for &s in &sizes {
            let mut d = vec![0.0; out];
            d[off..off + s].iter_mut().for_each(|x| *x = 1.0);
            off += s;
            key_projectors.push(HermitianMatrix::diag(&d));
        }
        key_projectors.retain(|p| p.trace_re() > 0.0);
        blocks.push(SiftBlock { label: format!("{ab}{bb}"), weight, kraus: vec![k], projector: None, key_projectors });
    }
    if blocks.is_empty() {
        return Err(domain("every kept announcement pair has zero probability"));
    }
    SiftMap::new(SiftMode::BlockDiagonal, blocks)
}

/// Orthonormal basis (columns) of the range of `m`.
fn range_basis(m: &CMat) -> CMat {
    let g = HermitianMatrix::symmetrized(m * m.adjoint());
    let spec = eig_hermitian(&g);
    let top = spec.values.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return CMat::zeros(m.nrows(), 0);
    }
    let cols: Vec<usize> = (0..spec.values.len()).filter(|&i| spec.values[i] > RANGE_TOL * top.max(1.0)).collect();
    let mut u = CMat::zeros(m.nrows(), cols.len());
    for (c, &i) in cols.iter().enumerate() {
        u.set_column(c, &spec.vectors.column(i));
    }
    u
}

/// The same sift map with explicit registers, ordered A ⊗ A_b ⊗ A_v ⊗ B ⊗ B_b.
/// Kraus operators are (K_A^{a_b} ⊗ K_B^{b_b}) for every announcement pair and
/// Π keeps the listed pairs. Intended for cross-checks; the output dimension
/// grows quickly.
pub fn build_dilated_sift_map(alice: &Povm, bob: &Povm, keep: &[(&str, &str)]) -> Result<SiftMap> {
    check_keep(alice, bob, keep)?;
    let nv = value_count(alice);
    let a_bases = alice.bases();
    let b_bases = bob.bases();
    let (na, nb) = (a_bases.len(), b_bases.len());
    let (da, db) = (alice.dim(), bob.dim());
    let ket = |n: usize, i: usize| {
        let mut v = CMat::zeros(n, 1);
        v[(i, 0)] = cr(1.0);
        v
    };
    let mut kraus = Vec::new();
    for (ia, ab) in a_bases.iter().enumerate() {
        let mut ka = CMat::zeros(da * na * nv, da);
        for e in alice.in_basis(ab) {
            ka += kron_all(&[sqrtm_psd(&e.op).mat(), &ket(na, ia), &ket(nv, e.value)]);
        }
        for (ib, bb) in b_bases.iter().enumerate() {
            let kb = kron(sqrtm_psd(&bob.basis_total(bb)).mat(), &ket(nb, ib));
            kraus.push(kron(&ka, &kb));
        }
    }
    let out = da * na * nv * db * nb;
    let mut pi = CMat::zeros(out, out);
    for (ab, bb) in keep {
        let ia = a_bases.iter().position(|x| x == ab).unwrap();
        let ib = b_bases.iter().position(|x| x == bb).unwrap();
        let pa = ket(na, ia) * ket(na, ia).adjoint();
        let pb = ket(nb, ib) * ket(nb, ib).adjoint();
        pi += kron_all(&[
            &CMat::identity(da, da),
            &pa,
            &CMat::identity(nv, nv),
            &CMat::identity(db, db),
            &pb,
        ]);
    }
    let key_projectors = (0..nv)
        .map(|j| {
            let pj = ket(nv, j) * ket(nv, j).adjoint();
            HermitianMatrix::symmetrized(kron_all(&[
                &CMat::identity(da * na, da * na),
                &pj,
                &CMat::identity(db * nb, db * nb),
            ]))
        })
        .collect();
    let block = SiftBlock {
        label: "dilated".into(),
        weight: 1.0,
        kraus,
        projector: Some(HermitianMatrix::symmetrized(pi)),
        key_projectors,
    };
    SiftMap::new(SiftMode::Dilated, vec![block])
}

/// One observable with bounds on its expectation.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub label: String,
    pub op: HermitianMatrix,
    pub lb: f64,
    pub ub: f64,
}

/// Observables Γ_i with γ_i^LB ≤ Tr(ρΓ_i) ≤ γ_i^UB, plus the implicit Tr ρ = 1.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub dim: usize,
    pub items: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(dim: usize) -> Self {
        ConstraintSet { dim, items: Vec::new() }
    }

    pub fn push(&mut self, label: impl Into<String>, op: HermitianMatrix, lb: f64, ub: f64) -> Result<()> {
        if op.dim() != self.dim {
            return Err(Error::Dimension(format!("observable has dim {}, expected {}", op.dim(), self.dim)));
        }
        self.items.push(Constraint { label: label.into(), op, lb, ub });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_real(&self) -> bool {
        self.items.iter().all(|c| c.op.is_real(1e-14))
    }

    pub fn expectations(&self, rho: &HermitianMatrix) -> Vec<f64> {
        self.items.iter().map(|c| rho.inner(&c.op)).collect()
    }

    /// Sets every bound to the expectation in `rho` (tight constraints).
    pub fn tightened_to(&self, rho: &HermitianMatrix) -> Self {
        let mut out = self.clone();
        for c in &mut out.items {
            let g = rho.inner(&c.op);
            c.lb = g;
            c.ub = g;
        }
        out
    }

    /// Replaces each bound pair with `f(label, lb, ub)`.
    pub fn map_bounds(&self, f: impl Fn(&Constraint) -> (f64, f64)) -> Self {
        let mut out = self.clone();
        for c in &mut out.items {
            let (lb, ub) = f(c);
            c.lb = lb;
            c.ub = ub;
        }
        out
    }

    pub fn find(&self, label: &str) -> Option<&Constraint> {
        self.items.iter().find(|c| c.label == label)
    }

    /// Largest violation of the bounds by `rho` (0 when feasible).
    pub fn violation(&self, rho: &HermitianMatrix) -> f64 {
        self.items
            .iter()
            .map(|c| {
                let g = rho.inner(&c.op);
                (c.lb - g).max(g - c.ub).max(0.0)
            })
            .fold((rho.trace_re() - 1.0).abs(), f64::max)
    }

    pub fn check_ordered(&self) -> Result<()> {
        for c in &self.items {
            if !(c.lb <= c.ub) {
                return Err(Error::Infeasible(format!("bounds of {} are reversed ({} > {})", c.label, c.lb, c.ub)));
            }
        }
        Ok(())
    }
}

/// Coarse-grained observables per kept pair: Γ^(=) sums M_A⊗M_B over equal
/// values, Γ^(≠) over different values. Bounds are left at [0, 1].
pub fn coarse_grain(alice: &Povm, bob: &Povm, keep: &[(&str, &str)]) -> Result<ConstraintSet> {
    check_keep(alice, bob, keep)?;
    let mut set = ConstraintSet::new(alice.dim() * bob.dim());
    for (ab, bb) in keep {
        let n = alice.dim() * bob.dim();
        let mut eq = CMat::zeros(n, n);
        let mut ne = CMat::zeros(n, n);
        for ea in alice.in_basis(ab) {
            for eb in bob.in_basis(bb) {
                let t = kron(ea.op.mat(), eb.op.mat());
                if ea.value == eb.value {
                    eq += t;
                } else {
                    ne += t;
                }
            }
        }
        set.push(format!("eq_{ab}{bb}"), HermitianMatrix::symmetrized(eq), 0.0, 1.0)?;
        set.push(format!("ne_{ab}{bb}"), HermitianMatrix::symmetrized(ne), 0.0, 1.0)?;
    }
    Ok(set)
}

/// Fine-grained observables M_A^a ⊗ M_B^b for every pair of elements.
pub fn fine_grain(alice: &Povm, bob: &Povm) -> Result<ConstraintSet> {
    let mut set = ConstraintSet::new(alice.dim() * bob.dim());
    for ea in alice.elements() {
        for eb in bob.elements() {
            let t = kron(ea.op.mat(), eb.op.mat());
            let label = format!("{}{}_{}{}", ea.basis, ea.value, eb.basis, eb.value);
            set.push(label, HermitianMatrix::symmetrized(t), 0.0, 1.0)?;
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matqi::{ket, minus, phi_plus, plus, random_density, relative_entropy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bb84_povms(pz: f64) -> (Povm, Povm) {
        let px = 1.0 - pz;
        let mk = |p: f64| {
            Povm::from_parts(vec![
                ("Z", 0, HermitianMatrix::projector(&ket(2, 0)).scale(p)),
                ("Z", 1, HermitianMatrix::projector(&ket(2, 1)).scale(p)),
                ("X", 0, HermitianMatrix::projector(&plus()).scale(1.0 - p)),
                ("X", 1, HermitianMatrix::projector(&minus()).scale(1.0 - p)),
            ])
            .unwrap()
        };
        (mk(pz), mk(1.0 - px))
    }

    fn phi() -> DensityMatrix {
        DensityMatrix::pure(&phi_plus(), vec![2, 2]).unwrap()
    }

    #[test]
    fn depolarize_limits() {
        let r = depolarize(&phi(), 1.0, 1).unwrap();
        let target = HermitianMatrix::identity(4).scale(0.25);
        assert!(crate::matqi::frobenius(&(r.mat() - target.mat())) < 1e-12);
        let r0 = depolarize(&phi(), 0.0, 1).unwrap();
        assert!(crate::matqi::frobenius(&(r0.mat() - phi().mat())) < 1e-12);
        assert!(depolarize(&phi(), 1.5, 1).is_err());
    }

    #[test]
    fn pure_loss_single_photon_populations() {
        let one = DensityMatrix::pure(&ket(2, 1), vec![2]).unwrap();
        let out = pure_loss_single_photon(&one, 0.3, 0).unwrap();
        assert!((out.mat()[(1, 1)].re - 0.3).abs() < 1e-12);
        assert!((out.mat()[(0, 0)].re - 0.7).abs() < 1e-12);
        let vac = DensityMatrix::pure(&ket(2, 0), vec![2]).unwrap();
        let out = pure_loss_single_photon(&vac, 0.3, 0).unwrap();
        assert!((out.mat()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bb84_blocks_and_pass_probability() {
        let (a, b) = bb84_povms(0.5);
        let map = build_sift_map(&a, &b, &[("Z", "Z"), ("X", "X")]).unwrap();
        assert_eq!(map.mode, SiftMode::BlockDiagonal);
        assert_eq!(map.blocks().len(), 2);
        for blk in map.blocks() {
            assert!((blk.weight - 0.25).abs() < 1e-12);
            assert_eq!(blk.out_dim(), 4);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(4, &mut rng);
        let (_, p) = map.apply(&rho).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_pairs_kept_passes_everything() {
        let (a, b) = bb84_povms(0.3);
        let map = build_sift_map(&a, &b, &[("Z", "Z"), ("Z", "X"), ("X", "Z"), ("X", "X")]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (_, p) = map.apply(&random_density(4, &mut rng)).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_entropy_matches_full_state_entropy() {
        // D(ρ_z‖Z(ρ_z)) equals D(ρ‖Z_A ρ Z_A), and likewise for X.
        let (a, b) = bb84_povms(0.5);
        let map = build_sift_map(&a, &b, &[("Z", "Z"), ("X", "X")]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let rho = random_density(4, &mut rng);
            let parts = map.apply_blocks(&rho).unwrap();
            let zk = key_projectors_on_first(&[ket(2, 0), ket(2, 1)], 2);
            let xk = key_projectors_on_first(&[plus(), minus()], 2);
            let dz = relative_entropy(&rho, &pinch(&rho, &zk).unwrap(), 0.0).unwrap();
            let dx = relative_entropy(&rho, &pinch(&rho, &xk).unwrap(), 0.0).unwrap();
            let bz = map.blocks()[0].pinch(&parts[0]);
            let bx = map.blocks()[1].pinch(&parts[1]);
            let dbz = entropy(&bz) - entropy(&parts[0]);
            let dbx = entropy(&bx) - entropy(&parts[1]);
            assert!((dbz - 0.25 * dz).abs() < 1e-9, "{dbz} vs {}", 0.25 * dz);
            assert!((dbx - 0.25 * dx).abs() < 1e-9);
        }
    }

    #[test]
    fn dilated_and_blocked_maps_agree_on_key_entropy() {
        let (a, b) = bb84_povms(0.6);
        let keep = [("Z", "Z"), ("X", "X")];
        let blocked = build_sift_map(&a, &b, &keep).unwrap();
        let dilated = build_dilated_sift_map(&a, &b, &keep).unwrap();
        assert_eq!(dilated.out_dim(), 32);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho = random_density(4, &mut rng);
        let d1 = blocked.key_relative_entropy(&rho).unwrap();
        let d2 = dilated.key_relative_entropy(&rho).unwrap();
        assert!((d1 - d2).abs() < 1e-9);
        let (_, p1) = blocked.apply(&rho).unwrap();
        let (_, p2) = dilated.apply(&rho).unwrap();
        assert!((p1 - p2).abs() < 1e-12);
    }

    #[test]
    fn adjoint_identity() {
        let (a, b) = bb84_povms(0.5);
        let maps = [
            build_sift_map(&a, &b, &[("Z", "Z"), ("X", "X")]).unwrap(),
            build_dilated_sift_map(&a, &b, &[("Z", "Z"), ("X", "X")]).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for map in &maps {
            let rho = random_density(4, &mut rng);
            let sigma = crate::matqi::random_hermitian(map.out_dim(), &mut rng);
            let (s, _) = map.apply(&rho).unwrap();
            let lhs = s.inner(&sigma);
            let rhs = rho.inner(&map.adjoint(&sigma).unwrap());
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn pinch_examples() {
        let z = [HermitianMatrix::projector(&ket(2, 0)), HermitianMatrix::projector(&ket(2, 1))];
        let p = pinch(&HermitianMatrix::projector(&plus()), &z).unwrap();
        assert!(crate::matqi::frobenius(&(p.mat() - HermitianMatrix::identity(2).scale(0.5).mat())) < 1e-15);
        let bad = [HermitianMatrix::projector(&ket(2, 0)), HermitianMatrix::projector(&plus())];
        assert!(pinch(&p, &bad).is_err());
    }

    #[test]
    fn coarse_grain_bb84_error_operators() {
        let (a, b) = bb84_povms(0.5);
        let set = coarse_grain(&a, &b, &[("Z", "Z"), ("X", "X")]).unwrap();
        assert_eq!(set.len(), 4);
        let r = depolarize(&phi(), 0.1, 1).unwrap();
        let e = set.find("ne_ZZ").unwrap();
        // Γ^(≠) carries the p_Z² basis weight: Q = 0.05 scaled by 1/4.
        assert!((r.matrix().inner(&e.op) - 0.25 * 0.05).abs() < 1e-12);
    }

    #[test]
    fn povm_completeness_enforced() {
        let bad = Povm::from_parts(vec![("Z", 0, HermitianMatrix::projector(&ket(2, 0)))]);
        assert!(bad.is_err());
    }
}
