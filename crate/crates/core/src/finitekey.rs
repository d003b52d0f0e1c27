//! Finite-statistics corrections and key length.
//!
//! All logarithms are base 2 except inside the deviation bound, which uses
//! natural logarithms.

use crate::error::{domain, Result};
use crate::matqi::h2;
use crate::minent::MinEntropyBound;
use crate::relent::KeyTermBound;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyPath {
    VonNeumann,
    MinEntropy,
}

impl EntropyPath {
    pub fn as_str(self) -> &'static str {
        match self {
            EntropyPath::VonNeumann => "vn",
            EntropyPath::MinEntropy => "min",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackModel {
    Collective,
    Coherent,
}

impl AttackModel {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackModel::Collective => "collective",
            AttackModel::Coherent => "coherent",
        }
    }
}

/// ε-budget with every individual parameter equal to ε′, except the
/// per-constraint estimation failure 2ε′ and no smoothing on the
/// min-entropy path.
#[derive(Debug, Clone, PartialEq)]
pub struct SecurityProfile {
    pub eps_sec: f64,
    pub eps_cor: f64,
    pub path: EntropyPath,
    /// Number of statistically estimated constraints.
    pub n_pe: usize,
    pub eps_prime: f64,
    pub eps_pa: f64,
    pub eps_ec: f64,
    /// Smoothing parameter (0 on the min-entropy path).
    pub eps_smooth: f64,
    pub eps_pe_per_constraint: f64,
}

impl SecurityProfile {
    /// ε_sec = ε + ε_PA + ε_PE + ε_EC with ε_PE = 2 n_PE ε′, i.e.
    /// ε′ = ε_sec/(3 + 2n_PE) or ε_sec/(2 + 2n_PE) without smoothing.
    pub fn new(eps_sec: f64, eps_cor: f64, path: EntropyPath, n_pe: usize) -> Result<Self> {
        if !(eps_sec > 0.0 && eps_sec < 1.0) || !(eps_cor > 0.0 && eps_cor < 1.0) {
            return Err(domain("security parameters must lie in (0, 1)"));
        }
        let shares = match path {
            EntropyPath::VonNeumann => 3 + 2 * n_pe,
            EntropyPath::MinEntropy => 2 + 2 * n_pe,
        };
        let e = eps_sec / shares as f64;
        Ok(SecurityProfile {
            eps_sec,
            eps_cor,
            path,
            n_pe,
            eps_prime: e,
            eps_pa: e,
            eps_ec: e,
            eps_smooth: if path == EntropyPath::VonNeumann { e } else { 0.0 },
            eps_pe_per_constraint: 2.0 * e,
        })
    }

    /// Standard defaults: ε_sec = 1e-10, ε_cor = 1e-15, two constraints.
    pub fn standard(path: EntropyPath) -> Self {
        SecurityProfile::new(1e-10, 1e-15, path, 2).expect("defaults are valid")
    }

    pub fn eps_pe(&self) -> f64 {
        self.n_pe as f64 * self.eps_pe_per_constraint
    }

    /// Itemized secrecy terms; they sum to ε_sec.
    pub fn eps_terms(&self) -> [(&'static str, f64); 4] {
        [("smooth", self.eps_smooth), ("pa", self.eps_pa), ("pe", self.eps_pe()), ("ec", self.eps_ec)]
    }

    pub fn eps_total(&self) -> f64 {
        self.eps_terms().iter().map(|t| t.1).sum()
    }
}

/// How N transmissions split into key and estimation signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionBudget {
    /// Total transmissions; infinite for the asymptotic limit.
    pub n_total: f64,
    pub p_pass: f64,
    pub alpha_pe: f64,
    /// Sifted signals kept for the key.
    pub n: f64,
    /// Sifted signals used for estimation (shared by all constraints).
    pub m: f64,
}

impl TransmissionBudget {
    pub fn new(n_total: f64, p_pass: f64, alpha_pe: f64) -> Result<Self> {
        if !(n_total >= 1.0) {
            return Err(domain("N must be at least 1"));
        }
        if !(0.0..=1.0).contains(&p_pass) || !(0.0..1.0).contains(&alpha_pe) {
            return Err(domain("p_pass must lie in [0, 1] and alpha_PE in [0, 1)"));
        }
        let sifted = p_pass * n_total;
        let (n, m) = if n_total.is_infinite() {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (((1.0 - alpha_pe) * sifted).round(), (alpha_pe * sifted).round())
        };
        Ok(TransmissionBudget { n_total, p_pass, alpha_pe, n, m })
    }

    pub fn asymptotic(p_pass: f64, alpha_pe: f64) -> Result<Self> {
        Self::new(f64::INFINITY, p_pass, alpha_pe)
    }

    pub fn is_asymptotic(&self) -> bool {
        self.n_total.is_infinite()
    }

    /// Key signals per transmission, n/N.
    pub fn key_fraction(&self) -> f64 {
        if self.is_asymptotic() {
            (1.0 - self.alpha_pe) * self.p_pass
        } else {
            self.n / self.n_total
        }
    }
}

/// Δ(m, d) = ½ √((2 ln(1/ε) + d ln(m+1)) / m).
pub fn deviation(m: f64, d: usize, eps: f64) -> Result<f64> {
    if !(m >= 1.0) || d < 2 || !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("deviation needs m ≥ 1, d ≥ 2, 0 < ε < 1 (got m={m}, d={d}, ε={eps})")));
    }
    if m.is_infinite() {
        return Ok(0.0);
    }
    Ok(0.5 * ((2.0 * (1.0 / eps).ln() + d as f64 * (m + 1.0).ln()) / m).sqrt())
}

/// Confidence interval for an observed frequency, clamped to [0, 1].
/// An infinite sample gives the tight interval (γ, γ).
pub fn gamma_bounds(gamma: f64, m: f64, d: usize, eps: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(domain(format!("observed frequency {gamma} outside [0, 1]")));
    }
    let delta = deviation(m, d, eps)?;
    Ok(((gamma - delta).max(0.0), (gamma + delta).min(1.0)))
}

/// Total error-correction leakage in bits:
/// n [f H(Z_A|Z_B) + log₂(d+3) √(3 log₂(2/ε_EC)/n)].
pub fn leak_ec(n: f64, d: usize, h_ab: f64, f_ec: f64, eps_ec: f64) -> Result<f64> {
    Ok(n * leak_ec_per_signal(n, d, h_ab, f_ec, eps_ec)?)
}

pub fn leak_ec_per_signal(n: f64, d: usize, h_ab: f64, f_ec: f64, eps_ec: f64) -> Result<f64> {
    if !(n >= 1.0) || d < 2 || !(f_ec >= 1.0) || !(eps_ec > 0.0 && eps_ec < 1.0) || !(h_ab >= 0.0) {
        return Err(domain("leak_EC needs n ≥ 1, d ≥ 2, f_EC ≥ 1, 0 < ε_EC < 1, H ≥ 0"));
    }
    let finite = if n.is_infinite() { 0.0 } else { ((d + 3) as f64).log2() * (3.0 * (2.0 / eps_ec).log2() / n).sqrt() };
    Ok(f_ec * h_ab + finite)
}

/// Leakage for a binary key with error rate Q.
pub fn leak_ec_binary(n: f64, q: f64, f_ec: f64, eps_ec: f64) -> Result<f64> {
    leak_ec(n, 2, h2(q.clamp(0.0, 1.0)), f_ec, eps_ec)
}

/// δ(n, ε) = (2d+3) √(log₂(2/ε)/n).
pub fn entropy_correction(n: f64, eps: f64, d: usize) -> Result<f64> {
    if !(n >= 1.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(domain("entropy correction needs n ≥ 1 and 0 < ε < 1"));
    }
    if n.is_infinite() {
        return Ok(0.0);
    }
    Ok((2 * d + 3) as f64 * ((2.0 / eps).log2() / n).sqrt())
}

/// Itemized per-key-signal terms of the key length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateComponents {
    /// Entropy per sifted signal.
    pub entropy: f64,
    pub delta: f64,
    pub leak_per_signal: f64,
    /// (2/n) log₂(1/(2ε_PA)).
    pub pa_term: f64,
    /// (1/n) log₂(2/ε_cor).
    pub cor_term: f64,
    pub n: f64,
}

impl RateComponents {
    pub fn per_signal(&self) -> f64 {
        self.entropy - self.delta - self.leak_per_signal - self.pa_term - self.cor_term
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateResult {
    /// Key length in bits; infinite budgets report none.
    pub ell: Option<f64>,
    pub rate: f64,
    pub path: EntropyPath,
    pub attack_model: AttackModel,
    pub components: RateComponents,
    pub n_total: f64,
    /// Secrecy parameter the result is valid for.
    pub eps_sec: f64,
}

impl KeyRateResult {
    /// Recomputes the rate from the components.
    pub fn recomputed_rate(&self) -> f64 {
        let c = &self.components;
        match self.ell {
            Some(_) => (c.n * c.per_signal()).floor().max(0.0) / self.n_total,
            None => (c.n / self.n_total * c.per_signal()).max(0.0),
        }
    }
}

/// ℓ = max(0, ⌊n (H − δ − leak/n − (2/n) log₂(1/(2ε_PA)) − (1/n) log₂(2/ε_cor))⌋),
/// rate = ℓ/N. In the asymptotic limit rate = (n/N)(H − leak/n).
pub fn key_length(
    entropy: f64,
    budget: &TransmissionBudget,
    profile: &SecurityProfile,
    leak_bits: f64,
) -> Result<KeyRateResult> {
    let n = budget.n;
    let asym = budget.is_asymptotic();
    let (delta, pa_term, cor_term, leak_per_signal) = if asym {
        // leak_bits is then read as per-signal leakage.
        (0.0, 0.0, 0.0, leak_bits)
    } else if n >= 1.0 {
        let delta = match profile.path {
            EntropyPath::VonNeumann => entropy_correction(n, profile.eps_smooth, 2)?,
            EntropyPath::MinEntropy => 0.0,
        };
        (delta, 2.0 / n * (1.0 / (2.0 * profile.eps_pa)).log2(), (2.0 / profile.eps_cor).log2() / n, leak_bits / n)
    } else {
        (0.0, 0.0, 0.0, 0.0)
    };
    let components = RateComponents { entropy, delta, leak_per_signal, pa_term, cor_term, n };
    let (ell, rate) = if asym {
        (None, (budget.key_fraction() * components.per_signal()).max(0.0))
    } else if n < 1.0 {
        (Some(0.0), 0.0)
    } else {
        let ell = (n * components.per_signal()).floor().max(0.0);
        (Some(ell), ell / budget.n_total)
    };
    Ok(KeyRateResult {
        ell,
        rate,
        path: profile.path,
        attack_model: AttackModel::Collective,
        components,
        n_total: budget.n_total,
        eps_sec: profile.eps_sec,
    })
}

/// Key length from the von Neumann bound; the key term carries p_pass,
/// which is divided out to get entropy per sifted signal.
pub fn key_length_vn(
    keyterm: &KeyTermBound,
    budget: &TransmissionBudget,
    profile: &SecurityProfile,
    leak_bits: f64,
) -> Result<KeyRateResult> {
    if profile.path != EntropyPath::VonNeumann {
        return Err(domain("von Neumann key length needs a von Neumann profile"));
    }
    if budget.p_pass <= 0.0 {
        return Err(domain("p_pass must be positive"));
    }
    key_length(keyterm.value / budget.p_pass, budget, profile, leak_bits)
}

pub fn key_length_min(
    minent: &MinEntropyBound,
    budget: &TransmissionBudget,
    profile: &SecurityProfile,
    leak_bits: f64,
) -> Result<KeyRateResult> {
    if profile.path != EntropyPath::MinEntropy {
        return Err(domain("min-entropy key length needs a min-entropy profile"));
    }
    key_length(minent.hmin_value, budget, profile, leak_bits)
}

/// Postselection-technique penalty 2(d⁴−1) log₂(N+1)/N.
pub fn coherent_penalty(n_total: f64, d_signal: usize) -> f64 {
    if n_total.is_infinite() {
        return 0.0;
    }
    let k = (d_signal as f64).powi(4) - 1.0;
    2.0 * k * (n_total + 1.0).log2() / n_total
}

/// r^coh = r − 2(d⁴−1) log₂(N+1)/N; the result is then secret up to
/// ε_sec^coh = ε_sec (N+1)^(d⁴−1).
pub fn coherent_correction(result: &KeyRateResult, n_total: f64, d_signal: usize) -> KeyRateResult {
    let mut out = result.clone();
    out.rate = (result.rate - coherent_penalty(n_total, d_signal)).max(0.0);
    if out.ell.is_some() {
        let ell = (out.rate * n_total).floor();
        out.ell = Some(ell);
        out.rate = ell / n_total;
    }
    let k = (d_signal as f64).powi(4) - 1.0;
    out.eps_sec = if n_total.is_infinite() { f64::INFINITY } else { result.eps_sec * (n_total + 1.0).powf(k) };
    out.attack_model = AttackModel::Coherent;
    out
}
