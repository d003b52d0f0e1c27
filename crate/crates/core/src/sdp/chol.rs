//! Envelope (profile) Cholesky factorization.
//!
//! The Schur complements produced by the key-rate SDPs are block banded once
//! variables are ordered sensibly, so factoring only inside each row's
//! envelope is much cheaper than a dense factorization.

/// Lower-triangular factor stored row-major; row `i` is meaningful on
/// columns `first[i]..=i`.
pub struct EnvelopeCholesky {
    n: usize,
    first: Vec<usize>,
    l: Vec<f64>,
    /// Number of pivots that had to be lifted to stay positive.
    pub regularized: usize,
}

impl EnvelopeCholesky {
    /// Factors the symmetric matrix whose lower triangle is stored row-major
    /// in `k`. Entries left of `first[i]` in row `i` must be zero.
    pub fn factor(n: usize, mut k: Vec<f64>, first: &[usize]) -> Self {
        debug_assert_eq!(k.len(), n * n);
        let max_diag = (0..n).map(|i| k[i * n + i].abs()).fold(0.0f64, f64::max).max(1e-300);
        let floor = 1e-15 * max_diag;
        let mut regularized = 0;
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let (head, tail) = k.split_at_mut(i * n);
                let row_j = &head[j * n..j * n + n];
                let row_i = &mut tail[..n];
                let s = row_i[j] - dot(&row_i[lo..j], &row_j[lo..j]);
                row_i[j] = s / row_j[j];
            }
            let row_i = &mut k[i * n..i * n + n];
            let mut d = row_i[i] - dot(&row_i[fi..i], &row_i[fi..i]);
            if !(d > floor) {
                d = floor.max(1e-300);
                regularized += 1;
            }
            row_i[i] = d.sqrt();
        }
        EnvelopeCholesky { n, first: first.to_vec(), l: k, regularized }
    }

    /// Solves (L Lᵀ) x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + n];
            let fi = self.first[i];
            let s = b[i] - dot(&row[fi..i], &b[fi..i]);
            b[i] = s / row[i];
        }
        for i in (0..n).rev() {
            let row = &self.l[i * n..i * n + n];
            let xi = b[i] / row[i];
            b[i] = xi;
            for j in self.first[i]..i {
                b[j] -= row[j] * xi;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let o = 4 * c;
        acc[0] += a[o] * b[o];
        acc[1] += a[o + 1] * b[o + 1];
        acc[2] += a[o + 2] * b[o + 2];
        acc[3] += a[o + 3] * b[o + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for o in 4 * chunks..a.len() {
        s += a[o] * b[o];
    }
    s
}
