//! Dense complex linear algebra and the quantum-information primitives the
//! rest of the crate is built on.
//!
//! Matrices here are small (at most a few hundred rows), so everything is
//! dense and spectral functions go through a full eigendecomposition.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{domain, Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Tolerance used when validating Hermiticity of user-supplied matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Default depolarization used before taking matrix logarithms.
pub const DEFAULT_EPS_PERT: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A Hermitian matrix. Construction symmetrizes, so the stored entries are
/// exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    /// Checks Hermiticity (relative to the largest entry) and symmetrizes.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!("{}x{} is not a nonempty square matrix", m.nrows(), m.ncols())));
        }
        let dev = hermitian_deviation(&m);
        let scale = m.iter().fold(1.0f64, |a, z| a.max(z.norm()));
        if dev > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::symmetrized(m))
    }

    /// Projects onto the Hermitian part without validation.
    pub fn symmetrized(m: CMat) -> Self {
        let h = (&m + m.adjoint()) * cr(0.5);
        HermitianMatrix(h)
    }

    pub fn from_real(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(cr))
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix(CMat::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix(CMat::zeros(n, n))
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        HermitianMatrix(CMat::from_fn(n, n, |i, j| if i == j { cr(d[i]) } else { C64::default() }))
    }

    /// |v⟩⟨v| for an arbitrary (not necessarily normalized) vector.
    pub fn projector(v: &CVec) -> Self {
        HermitianMatrix::symmetrized(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn mat(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }

    pub fn trace_re(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    /// Tr(self · other), which is real for Hermitian arguments.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        inner_re(&self.0, &other.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianMatrix(&self.0 * cr(s))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix(&self.0 - &other.0)
    }

    /// K · self · K†.
    pub fn conjugate_by(&self, k: &CMat) -> Self {
        HermitianMatrix::symmetrized(k * &self.0 * k.adjoint())
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.0.iter().all(|z| z.im.abs() <= tol)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eig_hermitian(self).values[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *eig_hermitian(self).values.last().unwrap()
    }

    /// Entrywise complex conjugate (equal to the transpose for Hermitian input).
    pub fn conj(&self) -> Self {
        HermitianMatrix(self.0.map(|z| z.conj()))
    }
}

impl Deref for HermitianMatrix {
    type Target = CMat;
    fn deref(&self) -> &CMat {
        &self.0
    }
}

pub fn hermitian_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Re Tr(a·b) computed without forming the product.
pub fn inner_re(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a[(i, j)];
            let y = b[(j, i)];
            s += x.re * y.re - x.im * y.im;
        }
    }
    s
}

/// A unit-trace PSD operator with labelled subsystem dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: HermitianMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    pub const PSD_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;

    pub fn new(mat: HermitianMatrix, dims: Vec<usize>) -> Result<Self> {
        check_dims(mat.dim(), &dims)?;
        let tr = mat.trace_re();
        if (tr - 1.0).abs() > Self::TRACE_TOL {
            return Err(domain(format!("density matrix trace {tr} differs from 1")));
        }
        let lmin = mat.min_eigenvalue();
        if lmin < -Self::PSD_TOL {
            return Err(Error::NotPsd(lmin));
        }
        Ok(DensityMatrix { mat, dims })
    }

    /// Rescales a PSD operator to unit trace.
    pub fn normalized(mat: HermitianMatrix, dims: Vec<usize>) -> Result<Self> {
        let tr = mat.trace_re();
        if tr <= 0.0 {
            return Err(domain("cannot normalize an operator with non-positive trace"));
        }
        Self::new(mat.scale(1.0 / tr), dims)
    }

    pub fn pure(psi: &CVec, dims: Vec<usize>) -> Result<Self> {
        Self::normalized(HermitianMatrix::projector(psi), dims)
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        DensityMatrix { mat: HermitianMatrix::identity(n).scale(1.0 / n as f64), dims }
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.mat
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    /// Expectation value Tr(ρ Γ).
    pub fn expect(&self, obs: &HermitianMatrix) -> f64 {
        self.mat.inner(obs)
    }
}

impl Deref for DensityMatrix {
    type Target = HermitianMatrix;
    fn deref(&self) -> &HermitianMatrix {
        &self.mat
    }
}

fn check_dims(n: usize, dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(Error::Dimension("subsystem dimensions must be positive".into()));
    }
    let prod: usize = dims.iter().product();
    if prod != n {
        return Err(Error::Dimension(format!("subsystem dims {dims:?} do not multiply to {n}")));
    }
    Ok(())
}

/// Eigendecomposition with eigenvalues sorted ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Spectrum {
    /// V f(Λ) V†.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        HermitianMatrix::symmetrized(scaled * self.vectors.adjoint())
    }
}

pub fn eig_hermitian(m: &HermitianMatrix) -> Spectrum {
    eig_cmat(m.mat())
}

/// Eigendecomposition of a matrix assumed Hermitian (only used internally on
/// matrices known to be Hermitian up to round-off).
pub(crate) fn eig_cmat(m: &CMat) -> Spectrum {
    let n = m.nrows();
    if n == 1 {
        return Spectrum { values: vec![m[(0, 0)].re], vectors: CMat::identity(1, 1) };
    }
    let se = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, col| se.eigenvectors[(r, idx[col])]);
    Spectrum { values, vectors }
}

/// Checked eigendecomposition for external callers.
pub fn eig_checked(m: &CMat) -> Result<Spectrum> {
    Ok(eig_hermitian(&HermitianMatrix::new(m.clone())?))
}

pub fn eig_real_sym(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let se = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, col| se.eigenvectors[(r, idx[col])]);
    (vals, vecs)
}

pub fn min_eig_real_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let se = SymmetricEigen::new(m.clone());
    se.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_herm(a: &HermitianMatrix, b: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix(a.mat().kronecker(b.mat()))
}

pub fn kron_all(ms: &[&CMat]) -> CMat {
    let mut out = CMat::identity(1, 1);
    for m in ms {
        out = out.kronecker(*m);
    }
    out
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    a.kronecker(b)
}

/// Partial trace over every subsystem not listed in `keep`. Kept subsystems
/// stay in their original order.
pub fn partial_trace_mat(m: &CMat, dims: &[usize], keep: &[usize]) -> Result<CMat> {
    check_dims(m.nrows(), dims)?;
    if keep.is_empty() {
        return Err(Error::Dimension("keep set must be nonempty".into()));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if let Some(&bad) = keep_sorted.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::Dimension(format!("subsystem index {bad} out of range")));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep_sorted.contains(i)).collect();
    let dk: usize = keep_sorted.iter().map(|&i| dims[i]).product();
    let dt: usize = traced.iter().map(|&i| dims[i]).product();
    let strides = strides(dims);
    let index_of = |kept: usize, tr: usize| -> usize {
        let mut idx = 0;
        let mut r = kept;
        for &s in keep_sorted.iter().rev() {
            idx += (r % dims[s]) * strides[s];
            r /= dims[s];
        }
        let mut r = tr;
        for &s in traced.iter().rev() {
            idx += (r % dims[s]) * strides[s];
            r /= dims[s];
        }
        idx
    };
    let mut out = CMat::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = C64::default();
            for t in 0..dt {
                acc += m[(index_of(i, t), index_of(j, t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let m = partial_trace_mat(rho.mat(), rho.dims(), keep)?;
    let mut k = keep.to_vec();
    k.sort_unstable();
    k.dedup();
    let dims = k.iter().map(|&i| rho.dims()[i]).collect();
    Ok(DensityMatrix { mat: HermitianMatrix::symmetrized(m), dims })
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Reorders tensor factors: output factor `k` is input factor `perm[k]`.
pub fn permute_subsystems(m: &CMat, dims: &[usize], perm: &[usize]) -> Result<CMat> {
    check_dims(m.nrows(), dims)?;
    let mut seen = perm.to_vec();
    seen.sort_unstable();
    if seen != (0..dims.len()).collect::<Vec<_>>() {
        return Err(Error::Dimension(format!("{perm:?} is not a permutation of the subsystems")));
    }
    let n = m.nrows();
    let in_strides = strides(dims);
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let map: Vec<usize> = (0..n)
        .map(|new_idx| {
            let mut r = new_idx;
            let mut old = 0;
            for k in (0..perm.len()).rev() {
                old += (r % new_dims[k]) * in_strides[perm[k]];
                r /= new_dims[k];
            }
            old
        })
        .collect();
    Ok(CMat::from_fn(n, n, |i, j| m[(map[i], map[j])]))
}

/// log₂ of (1−ε)m + εI/d, via the spectrum.
pub fn mat_log2_regularized(m: &HermitianMatrix, eps_pert: f64) -> Result<HermitianMatrix> {
    if !(0.0..=1e-6).contains(&eps_pert) {
        return Err(domain(format!("eps_pert {eps_pert} outside [0, 1e-6]")));
    }
    let d = m.dim() as f64;
    let spec = eig_hermitian(m);
    let vals: Vec<f64> = spec.values.iter().map(|&l| (1.0 - eps_pert) * l + eps_pert / d).collect();
    if let Some(&bad) = vals.iter().find(|&&v| v < -1e-10) {
        return Err(Error::NotPsd(bad));
    }
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(domain("matrix logarithm of a singular matrix (use eps_pert > 0)"));
    }
    let spec = Spectrum { values: vals, vectors: spec.vectors };
    Ok(spec.apply(f64::log2))
}

/// Square root of a PSD matrix with negative eigenvalues clamped to zero.
pub fn sqrtm_psd(m: &HermitianMatrix) -> HermitianMatrix {
    eig_hermitian(m).apply(|l| l.max(0.0).sqrt())
}

/// Uhlmann fidelity (Tr√(√p q √p))² via spectral square roots.
pub fn fidelity_oracle(p: &HermitianMatrix, q: &HermitianMatrix) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension("fidelity arguments differ in size".into()));
    }
    for m in [p, q] {
        let lmin = m.min_eigenvalue();
        let scale = 1.0f64.max(m.max_eigenvalue());
        if lmin < -1e-10 * scale {
            return Err(Error::NotPsd(lmin));
        }
    }
    let sp = sqrtm_psd(p);
    let inner = HermitianMatrix::symmetrized(sp.mat() * q.mat() * sp.mat());
    let root_trace: f64 = eig_hermitian(&inner).values.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok(root_trace * root_trace)
}

/// Relative entropy D(ρ‖σ) in bits. Both operators are regularized by
/// `eps_pert` before taking logarithms; the first term uses exact 0·log 0 = 0.
pub fn relative_entropy(rho: &HermitianMatrix, sigma: &HermitianMatrix, eps_pert: f64) -> Result<f64> {
    let lr = mat_log2_regularized(rho, eps_pert)?;
    let ls = mat_log2_regularized(sigma, eps_pert)?;
    Ok(rho.inner(&lr.sub(&ls)))
}

/// Von Neumann entropy in bits.
pub fn entropy(rho: &HermitianMatrix) -> f64 {
    eig_hermitian(rho).values.iter().filter(|&&l| l > 0.0).map(|&l| -l * l.log2()).sum()
}

pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || x.is_nan() {
        return Err(domain(format!("binary entropy argument {x} outside [0,1]")));
    }
    Ok(h2(x))
}

/// Binary entropy for arguments already known to lie in [0,1].
pub fn h2(x: f64) -> f64 {
    let t = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    t(x) + t(1.0 - x)
}

/// |e⟩ = vec(I_n), the column-stacked identity.
pub fn identity_vec(n: usize) -> CVec {
    let mut v = CVec::zeros(n * n);
    for i in 0..n {
        v[i * n + i] = cr(1.0);
    }
    v
}

/// Computational basis ket |i⟩ in dimension n.
pub fn ket(n: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[i] = cr(1.0);
    v
}

pub fn ket_from(re: &[f64]) -> CVec {
    CVec::from_iterator(re.len(), re.iter().map(|&x| cr(x)))
}

pub fn plus() -> CVec {
    ket_from(&[1.0, 1.0]) * cr(std::f64::consts::FRAC_1_SQRT_2)
}

pub fn minus() -> CVec {
    ket_from(&[1.0, -1.0]) * cr(std::f64::consts::FRAC_1_SQRT_2)
}

/// (|00⟩ + |11⟩)/√2.
pub fn phi_plus() -> CVec {
    ket_from(&[1.0, 0.0, 0.0, 1.0]) * cr(std::f64::consts::FRAC_1_SQRT_2)
}

/// Projector family {|v⟩⟨v|} for an orthonormal list of vectors.
pub fn projectors(vs: &[CVec]) -> Vec<HermitianMatrix> {
    vs.iter().map(HermitianMatrix::projector).collect()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Haar-ish random pure state from a complex Gaussian vector.
pub fn random_pure<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    let v = CVec::from_fn(n, |_, _| c(gauss(rng), gauss(rng)));
    let norm = v.norm();
    v / cr(norm)
}

/// Random full-rank density matrix from the Ginibre ensemble.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    let g = CMat::from_fn(n, n, |_, _| c(gauss(rng), gauss(rng)));
    let m = HermitianMatrix::symmetrized(&g * g.adjoint());
    m.scale(1.0 / m.trace_re())
}

/// Random real symmetric density matrix.
pub fn random_real_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    let g = CMat::from_fn(n, n, |_, _| cr(gauss(rng)));
    let m = HermitianMatrix::symmetrized(&g * g.adjoint());
    m.scale(1.0 / m.trace_re())
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    let g = CMat::from_fn(n, n, |_, _| c(gauss(rng), gauss(rng)));
    HermitianMatrix::symmetrized(g)
}

/// Standard normal sample by Box–Muller.
pub fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &CMat, b: &CMat, tol: f64) -> bool {
        frobenius(&(a - b)) <= tol
    }

    #[test]
    fn kron_examples() {
        let i2 = CMat::identity(2, 2);
        assert_eq!(kron(&i2, &i2), CMat::identity(4, 4));
        let d = kron(HermitianMatrix::diag(&[1.0, 0.0]).mat(), HermitianMatrix::diag(&[0.0, 1.0]).mat());
        assert!(close(&d, HermitianMatrix::diag(&[0.0, 1.0, 0.0, 0.0]).mat(), 0.0));
        // Trace is multiplicative: Tr(I/2)·Tr(|0⟩⟨0|) = 1.
        let half_id = HermitianMatrix::identity(2).scale(0.5);
        let p0 = HermitianMatrix::diag(&[1.0, 0.0]);
        assert!((kron_herm(&half_id, &p0).trace_re() - half_id.trace_re() * p0.trace_re()).abs() < 1e-15);
        assert!((kron_herm(&half_id.scale(0.5), &p0).trace_re() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn partial_trace_examples() {
        let phi = DensityMatrix::pure(&phi_plus(), vec![2, 2]).unwrap();
        let a = partial_trace(&phi, &[0]).unwrap();
        assert!(close(a.mat(), &(CMat::identity(2, 2) * cr(0.5)), 1e-15));

        // Beamsplitter on |1⟩|0⟩ with transmittance t keeps the photon with probability t.
        let t: f64 = 0.3;
        let psi = ket_from(&[0.0, -(1.0 - t).sqrt(), t.sqrt(), 0.0]);
        let out = partial_trace_mat(&(&psi * psi.adjoint()), &[2, 2], &[0]).unwrap();
        assert!(close(&out, HermitianMatrix::diag(&[1.0 - t, t]).mat(), 1e-15));
    }

    #[test]
    fn partial_trace_rejects_bad_index() {
        let m = CMat::identity(4, 4);
        assert!(partial_trace_mat(&m, &[2, 2], &[2]).is_err());
        assert!(partial_trace_mat(&m, &[2, 2], &[]).is_err());
    }

    #[test]
    fn eig_examples() {
        let s = eig_hermitian(&HermitianMatrix::diag(&[3.0, 1.0]));
        assert_eq!(s.values, vec![1.0, 3.0]);
        let x = HermitianMatrix::from_real(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let s = eig_hermitian(&x);
        assert!((s.values[0] + 1.0).abs() < 1e-14 && (s.values[1] - 1.0).abs() < 1e-14);
        let v0 = s.vectors.column(0);
        assert!((v0[0].norm() - v0[1].norm()).abs() < 1e-12);
        assert!((v0[0] + v0[1]).norm() < 1e-12);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(0.0), cr(0.0)]);
        assert!(matches!(eig_checked(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn eig_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(6, &mut rng);
        let s = eig_hermitian(&h);
        let rec = s.apply(|l| l);
        assert!(frobenius(&(rec.mat() - h.mat())) <= 1e-9 * 6.0);
        assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn log2_examples() {
        let z = mat_log2_regularized(&HermitianMatrix::identity(2), 0.0).unwrap();
        assert!(frobenius(z.mat()) < 1e-15);
        let l = mat_log2_regularized(&HermitianMatrix::diag(&[4.0, 0.25]), 1e-10).unwrap();
        assert!((l[(0, 0)].re - 2.0).abs() < 1e-9 && (l[(1, 1)].re + 2.0).abs() < 1e-9);
        let l = mat_log2_regularized(&HermitianMatrix::diag(&[1.0, 0.0]), 1e-10).unwrap();
        assert!((l[(1, 1)].re - (5e-11f64).log2()).abs() < 1e-6);
        assert!((l[(1, 1)].re + 34.2).abs() < 0.05);
        assert!(mat_log2_regularized(&HermitianMatrix::diag(&[1.0, 0.0]), 0.0).is_err());
        assert!(mat_log2_regularized(&HermitianMatrix::diag(&[1.0, -0.1]), 1e-10).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_density(3, &mut rng);
        assert!((fidelity_oracle(&r, &r).unwrap() - 1.0).abs() < 1e-10);
        let p0 = HermitianMatrix::diag(&[1.0, 0.0]);
        let p1 = HermitianMatrix::diag(&[0.0, 1.0]);
        assert!(fidelity_oracle(&p0, &p1).unwrap().abs() < 1e-15);
        let mixed = HermitianMatrix::identity(2).scale(0.5);
        assert!((fidelity_oracle(&p0, &mixed).unwrap() - 0.5).abs() < 1e-14);
        assert!(fidelity_oracle(&p0, &HermitianMatrix::diag(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert!((binary_entropy(0.11).unwrap() - 0.49992).abs() < 1e-4);
        assert!(binary_entropy(1.2).is_err());
    }

    #[test]
    fn identity_vec_examples() {
        assert_eq!(identity_vec(1), ket_from(&[1.0]));
        assert_eq!(identity_vec(2), ket_from(&[1.0, 0.0, 0.0, 1.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = CMat::from_fn(3, 3, |_, _| c(gauss(&mut rng), gauss(&mut rng)));
        let e = identity_vec(3);
        let lhs = (e.adjoint() * kron(&a, &CMat::identity(3, 3)) * &e)[(0, 0)];
        assert!((lhs - a.transpose().trace()).norm() < 1e-12);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(HermitianMatrix::diag(&[0.5, 0.6]), vec![2]).is_err());
        assert!(DensityMatrix::new(HermitianMatrix::diag(&[1.2, -0.2]), vec![2]).is_err());
        assert!(DensityMatrix::new(HermitianMatrix::diag(&[0.5, 0.5]), vec![3]).is_err());
        assert!(DensityMatrix::new(HermitianMatrix::diag(&[0.5, 0.5]), vec![2]).is_ok());
    }

    #[test]
    fn permute_swaps_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_density(2, &mut rng);
        let b = random_density(3, &mut rng);
        let ab = kron(a.mat(), b.mat());
        let ba = permute_subsystems(&ab, &[2, 3], &[1, 0]).unwrap();
        assert!(close(&ba, &kron(b.mat(), a.mat()), 1e-14));
    }
}
