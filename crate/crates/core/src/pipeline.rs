//! End-to-end key rate of a protocol instance along either entropy path.

use crate::error::{domain, Result};
use crate::finitekey::{
    coherent_correction, key_length, leak_ec, AttackModel, EntropyPath, KeyRateResult, SecurityProfile,
    TransmissionBudget,
};
use crate::minent::{certified_minent_with, MinEntropyBound};
use crate::protocols::ProtocolInstance;
use crate::relent::{certified_keyterm_from, KeyTermBound, QreApproxConfig};
use crate::sdp::SolveStatus;

#[derive(Debug, Clone)]
pub struct RateSettings {
    /// Total transmissions; `f64::INFINITY` selects the asymptotic limit.
    pub n_total: f64,
    pub alpha_pe: f64,
    pub f_ec: f64,
    pub eps_sec: f64,
    pub eps_cor: f64,
    pub attack: AttackModel,
    pub qre: QreApproxConfig,
    pub minent_tol: f64,
}

impl Default for RateSettings {
    fn default() -> Self {
        RateSettings {
            n_total: f64::INFINITY,
            alpha_pe: 0.1,
            f_ec: 1.2,
            eps_sec: 1e-10,
            eps_cor: 1e-15,
            attack: AttackModel::Collective,
            qre: QreApproxConfig::default(),
            minent_tol: 1e-8,
        }
    }
}

impl RateSettings {
    /// The limit N → ∞ with a vanishing estimation fraction and error
    /// correction at the Shannon limit (α_PE = 0, f_EC = 1).
    pub fn asymptotic() -> Self {
        RateSettings { alpha_pe: 0.0, f_ec: 1.0, ..Self::default() }
    }

    pub fn finite(n_total: f64) -> Self {
        RateSettings { n_total, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub enum EntropyBound {
    VonNeumann(KeyTermBound),
    MinEntropy(MinEntropyBound),
}

#[derive(Debug, Clone)]
pub struct PathOutcome {
    pub result: KeyRateResult,
    /// Certified entropy per sifted signal entering the key length.
    pub entropy: f64,
    pub bound: EntropyBound,
    /// Status of the solve whose dual point is certified.
    pub status: SolveStatus,
}

fn budget_and_profile(
    inst: &ProtocolInstance,
    s: &RateSettings,
    path: EntropyPath,
) -> Result<(TransmissionBudget, SecurityProfile)> {
    if inst.p_pass <= 0.0 {
        return Err(domain("instance never passes postselection"));
    }
    let budget = TransmissionBudget::new(s.n_total, inst.p_pass, s.alpha_pe)?;
    let profile = SecurityProfile::new(s.eps_sec, s.eps_cor, path, inst.n_pe())?;
    Ok((budget, profile))
}

fn leak(inst: &ProtocolInstance, s: &RateSettings, budget: &TransmissionBudget, profile: &SecurityProfile) -> Result<f64> {
    if budget.is_asymptotic() {
        // Per-signal leakage in the limit.
        Ok(s.f_ec * inst.h_ab)
    } else if budget.n >= 1.0 {
        leak_ec(budget.n, 2, inst.h_ab, s.f_ec, profile.eps_ec)
    } else {
        Ok(0.0)
    }
}

fn finish(inst: &ProtocolInstance, s: &RateSettings, r: KeyRateResult) -> KeyRateResult {
    match s.attack {
        AttackModel::Collective => r,
        AttackModel::Coherent => coherent_correction(&r, s.n_total, inst.d_signal),
    }
}

/// Rate from the relative-entropy path. The key term is computed on the
/// heralded state, so it is rescaled by the herald probability before the
/// division by p_pass.
pub fn vn_rate(inst: &ProtocolInstance, s: &RateSettings) -> Result<PathOutcome> {
    let (budget, profile) = budget_and_profile(inst, s, EntropyPath::VonNeumann)?;
    let constraints = inst.constraints_for(budget.m, profile.eps_pe_per_constraint)?;
    let kt = certified_keyterm_from(&constraints, &inst.sift, &s.qre, Some(inst.rho_sim.matrix()))?;
    let entropy = (kt.value * inst.herald_probability / inst.p_pass).max(0.0);
    let leak_bits = leak(inst, s, &budget, &profile)?;
    let r = finish(inst, s, key_length(entropy, &budget, &profile, leak_bits)?);
    let status = kt.step_two_status;
    Ok(PathOutcome { result: r, entropy, status, bound: EntropyBound::VonNeumann(kt) })
}

/// Rate from the fidelity path.
pub fn min_rate(inst: &ProtocolInstance, s: &RateSettings) -> Result<PathOutcome> {
    let (budget, profile) = budget_and_profile(inst, s, EntropyPath::MinEntropy)?;
    let constraints = inst.constraints_for(budget.m, profile.eps_pe_per_constraint)?;
    let mb = certified_minent_with(&constraints, &inst.sift, s.minent_tol)?;
    let entropy = mb.hmin_value.max(0.0);
    let leak_bits = leak(inst, s, &budget, &profile)?;
    let r = finish(inst, s, key_length(entropy, &budget, &profile, leak_bits)?);
    Ok(PathOutcome { result: r, entropy, status: mb.status, bound: EntropyBound::MinEntropy(mb) })
}

pub fn rate(inst: &ProtocolInstance, s: &RateSettings, path: EntropyPath) -> Result<PathOutcome> {
    match path {
        EntropyPath::VonNeumann => vn_rate(inst, s),
        EntropyPath::MinEntropy => min_rate(inst, s),
    }
}
