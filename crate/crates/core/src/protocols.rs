//! Protocol catalog: simulated statistics, sift maps and constraint sets.
//!
//! Depolarizing strengths for the BB84 family (`bb84`, `bb84_mismatch`,
//! `trojan_bb84`) follow the convention Q = 2p, i.e. the Pauli form
//! (1−3p)ρ + p(XρX + YρY + ZρZ), which is [`depolarize`] at probability 4p.
//! B92 passes its probability to [`depolarize`] unchanged.

use crate::channels::{
    build_sift_map, coarse_grain, depolarize, fine_grain, pure_loss_single_photon, ConstraintSet, Povm,
    SiftMap,
};
use crate::error::{domain, Result};
use crate::finitekey::gamma_bounds;
use crate::matqi::{
    c, cr, eig_hermitian, h2, ket, kron, kron_vec, minus, partial_trace_mat, permute_subsystems,
    phi_plus, plus, CMat, CVec, DensityMatrix, HermitianMatrix,
};

/// Self-consistency tolerance between stored γ and Tr(ρ_sim Γ).
pub const CONSISTENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyBasis {
    X,
    Z,
}

impl KeyBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            KeyBasis::X => "X",
            KeyBasis::Z => "Z",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolInstance {
    pub name: String,
    /// State after the channel (and after heralding, for twin-field).
    pub rho_sim: DensityMatrix,
    pub sift: SiftMap,
    /// Default (coarse) constraints, tight at the simulated values.
    pub constraints: ConstraintSet,
    /// Whether each default constraint is estimated from data. Source
    /// constraints are known exactly and stay tight at every N.
    pub statistical: Vec<bool>,
    pub fine_constraints: ConstraintSet,
    /// Error rate of the key-generating basis (average over key bases).
    pub key_error_q: f64,
    /// H(Z_A|Z_B) per sifted signal used for the leakage term.
    pub h_ab: f64,
    /// Probability of passing postselection, herald included.
    pub p_pass: f64,
    /// Probability the untrusted node announces success (1 when there is none).
    pub herald_probability: f64,
    /// Joint single-signal dimension used by the coherent-attack penalty.
    pub d_signal: usize,
    pub params: Vec<(String, f64)>,
    pub flags: Vec<String>,
}

impl ProtocolInstance {
    /// Number of constraints bounded by parameter estimation.
    pub fn n_pe(&self) -> usize {
        self.statistical.iter().filter(|&&s| s).count()
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    /// Flags are `name` or `name: explanation`; this matches on the name.
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f.split(':').next() == Some(flag))
    }

    /// Constraints after estimation from m signals with per-constraint
    /// failure probability `eps_i`. m = ∞ keeps them tight.
    pub fn constraints_for(&self, m: f64, eps_i: f64) -> Result<ConstraintSet> {
        let mut out = self.constraints.clone();
        for (c, &stat) in out.items.iter_mut().zip(&self.statistical) {
            if stat && m.is_finite() {
                let g = c.lb.clamp(0.0, 1.0);
                let (lb, ub) = gamma_bounds(g, m, 2, eps_i)?;
                c.lb = lb;
                c.ub = ub;
            }
        }
        Ok(out)
    }

    /// Largest |Tr(ρ_sim Γ_i) − γ_i| over both constraint sets.
    pub fn consistency_residual(&self) -> f64 {
        let rho = self.rho_sim.matrix();
        self.constraints
            .items
            .iter()
            .chain(&self.fine_constraints.items)
            .map(|c| (rho.inner(&c.op) - c.lb).abs().max((rho.inner(&c.op) - c.ub).abs()))
            .fold(0.0, f64::max)
    }
}

/// −log₂(1−η), the repeaterless capacity of a pure-loss channel.
pub fn plob(eta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(domain(format!("PLOB bound needs 0 ≤ η < 1 (got {eta})")));
    }
    Ok(-(1.0 - eta).log2())
}

/// Loss in dB to transmittance.
pub fn transmittance_from_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// (p_Z² + p_X²)(1 − h₂(Q)).
pub fn bb84_vn_reference(q: f64, p_z: f64) -> f64 {
    (p_z * p_z + (1.0 - p_z) * (1.0 - p_z)) * (1.0 - h2(q))
}

/// (p_Z² + p_X²)(1 − log₂(1 + 2√(Q(1−Q)))).
pub fn bb84_min_reference(q: f64, p_z: f64) -> f64 {
    (p_z * p_z + (1.0 - p_z) * (1.0 - p_z)) * (1.0 - (1.0 + 2.0 * (q * (1.0 - q)).sqrt()).log2())
}

/// min(η₀, η₁)[1 − h₂(Q)] − h₂(Q).
pub fn mismatch_reference(q: f64, eta0: f64, eta1: f64) -> f64 {
    eta0.min(eta1) * (1.0 - h2(q)) - h2(q)
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("{name} = {x} outside [0, 1]")));
    }
    Ok(())
}

fn check_bb84_depol(p: f64) -> Result<()> {
    if !(0.0..=0.25).contains(&p) {
        return Err(domain(format!("depolarizing probability {p} outside [0, 1/4] (Q = 2p)")));
    }
    Ok(())
}

fn proj(v: &CVec) -> HermitianMatrix {
    HermitianMatrix::projector(v)
}

fn herm(m: CMat) -> HermitianMatrix {
    HermitianMatrix::symmetrized(m)
}

/// Qubit BB84 measurement with basis weights (Z: |0⟩, |1⟩; X: |+⟩, |−⟩).
pub fn bb84_povm(weight_z: f64, weight_x: f64) -> Result<Povm> {
    Povm::from_parts(vec![
        ("Z", 0, proj(&ket(2, 0)).scale(weight_z)),
        ("Z", 1, proj(&ket(2, 1)).scale(weight_z)),
        ("X", 0, proj(&plus()).scale(weight_x)),
        ("X", 1, proj(&minus()).scale(weight_x)),
    ])
}

/// Coarse-grained observables of POVMs whose elements were all multiplied
/// by `1/factor` to stay normalized; the factor is undone on the operators.
fn coarse_rescaled(alice: &Povm, bob: &Povm, keep: &[(&str, &str)], factor: f64) -> Result<ConstraintSet> {
    let mut set = coarse_grain(alice, bob, keep)?;
    for c in &mut set.items {
        c.op = c.op.scale(factor);
    }
    Ok(set)
}

/// Tight constraints at ρ plus the per-constraint "statistical" flags.
fn tight(set: ConstraintSet, rho: &HermitianMatrix, statistical: bool) -> (ConstraintSet, Vec<bool>) {
    let flags = vec![statistical; set.len()];
    (set.tightened_to(rho), flags)
}

/// Appends exact source constraints Ω ⊗ I_B that fix ρ_A.
///
/// Ω runs over the first d−1 spectral projectors of ρ_A (the last one is
/// implied by Tr ρ = 1) and the off-diagonal operators |ψ_j⟩⟨ψ_k| + h.c.,
/// i(|ψ_j⟩⟨ψ_k| − h.c.) of its eigenbasis, which together are tomographically
/// complete. When every other ingredient is real the imaginary parts are
/// dropped: the optimum is then attained on real states, which satisfy
/// them automatically.
fn push_source_constraints(
    set: &mut ConstraintSet,
    statistical: &mut Vec<bool>,
    rho_ab: &DensityMatrix,
    include_imaginary: bool,
) -> Result<()> {
    let da = rho_ab.dims()[0];
    let db = rho_ab.dim() / da;
    let rho_a = herm(partial_trace_mat(rho_ab.mat(), &[da, db], &[0])?);
    let spec = eig_hermitian(&rho_a);
    let id_b = CMat::identity(db, db);
    let col = |j: usize| -> CVec { spec.vectors.column(j).into_owned() };
    let mut push = |label: String, op_a: CMat| -> Result<()> {
        let op = herm(kron(&op_a, &id_b));
        let g = rho_ab.matrix().inner(&op);
        set.push(label, op, g, g)?;
        statistical.push(false);
        Ok(())
    };
    for j in 0..da - 1 {
        push(format!("omega_{j}"), proj(&col(j)).into_inner())?;
    }
    for j in 0..da {
        for k in j + 1..da {
            let jk = col(j) * col(k).adjoint();
            push(format!("omega_re_{j}{k}"), &jk + jk.adjoint())?;
            if include_imaginary {
                push(format!("omega_im_{j}{k}"), (&jk - jk.adjoint()) * c(0.0, 1.0))?;
            }
        }
    }
    Ok(())
}

/// H(Z_A|Z_B) per sifted signal and the average key-basis error, from
/// per-basis (probability, error rate) pairs.
fn leak_entropy(parts: &[(f64, f64)]) -> (f64, f64) {
    let total: f64 = parts.iter().map(|p| p.0).sum();
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    let h = parts.iter().map(|&(w, q)| w * h2(q.clamp(0.0, 1.0))).sum::<f64>() / total;
    let q = parts.iter().map(|&(w, q)| w * q).sum::<f64>() / total;
    (h, q)
}

fn error_rate(rho: &HermitianMatrix, eq: &HermitianMatrix, ne: &HermitianMatrix) -> (f64, f64) {
    let (e, n) = (rho.inner(eq), rho.inner(ne));
    let tot = e + n;
    (tot, if tot > 0.0 { n / tot } else { 0.0 })
}

/// Entanglement-based BB84 with basis probabilities p_Z, p_X = 1 − p_Z for
/// both parties and depolarizing noise on Bob's qubit.
pub fn bb84(p_depol: f64, p_z: f64) -> Result<ProtocolInstance> {
    check_bb84_depol(p_depol)?;
    check_unit("p_Z", p_z)?;
    let p_x = 1.0 - p_z;
    let alice = bb84_povm(p_z, p_x)?;
    let bob = bb84_povm(p_z, p_x)?;
    let keep = [("Z", "Z"), ("X", "X")];
    let sift = build_sift_map(&alice, &bob, &keep)?;
    let rho = depolarize(&DensityMatrix::pure(&phi_plus(), vec![2, 2])?, 4.0 * p_depol, 1)?;

    // Unweighted error operators E_Z, E_X: their expectations are the QBERs.
    let half = bb84_povm(0.5, 0.5)?;
    let coarse = coarse_rescaled(&half, &half, &keep, 4.0)?;
    let mut set = ConstraintSet::new(4);
    for label in ["ne_ZZ", "ne_XX"] {
        let c = coarse.find(label).expect("coarse_grain labels");
        set.push(if label == "ne_ZZ" { "E_Z" } else { "E_X" }, c.op.clone(), 0.0, 1.0)?;
    }
    let (constraints, statistical) = tight(set, rho.matrix(), true);
    let fine = fine_grain(&alice, &bob)?.tightened_to(rho.matrix());
    let qz = constraints.items[0].lb;
    let qx = constraints.items[1].lb;
    let (h_ab, q) = leak_entropy(&[(p_z * p_z, qz), (p_x * p_x, qx)]);
    let mut flags = Vec::new();
    if p_z == 1.0 || p_x == 1.0 {
        flags.push("single_basis: one basis never sifted; its constraint is degenerate".to_string());
    }
    Ok(ProtocolInstance {
        name: "bb84".into(),
        p_pass: sift.apply(rho.matrix())?.1,
        rho_sim: rho,
        sift,
        constraints,
        statistical,
        fine_constraints: fine,
        key_error_q: q,
        h_ab,
        herald_probability: 1.0,
        d_signal: 4,
        params: vec![("p_depol".into(), p_depol), ("p_Z".into(), p_z), ("Q".into(), 2.0 * p_depol)],
        flags,
    })
}

/// The B92 signal states |φ₀⟩, |φ₁⟩ with ⟨φ₀|φ₁⟩ = cos(θ/2) and their
/// orthogonal complements |φ̄₀⟩, |φ̄₁⟩.
pub fn b92_states(theta: f64) -> [CVec; 4] {
    let (cs, sn) = ((theta / 4.0).cos(), (theta / 4.0).sin());
    let v = |a: f64, b: f64| CVec::from_vec(vec![cr(a), cr(b)]);
    [v(cs, sn), v(cs, -sn), v(-sn, cs), v(sn, cs)]
}

/// B92 in its source-replacement form, postselected on Bob's conclusive
/// outcomes |φ̄₀⟩, |φ̄₁⟩ (bit 1 and 0), each reached with his basis
/// probability ½.
pub fn b92(theta: f64, p_depol: f64) -> Result<ProtocolInstance> {
    if !(theta > 0.0 && theta < std::f64::consts::PI) {
        return Err(domain(format!("B92 angle {theta} must lie strictly inside (0, π)")));
    }
    check_unit("depolarizing probability", p_depol)?;
    let [phi0, phi1, bar0, bar1] = b92_states(theta);
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let psi = (kron_vec(&ket(2, 0), &phi0) + kron_vec(&ket(2, 1), &phi1)) * cr(s2);
    let rho = depolarize(&DensityMatrix::pure(&psi, vec![2, 2])?, p_depol, 1)?;

    let pass_b = (proj(&bar0).into_inner() + proj(&bar1).into_inner()) * cr(0.5);
    let s = kron(&CMat::identity(2, 2), crate::matqi::sqrtm_psd(&herm(pass_b)).mat());
    let key = vec![
        herm(kron(proj(&ket(2, 0)).mat(), &CMat::identity(2, 2))),
        herm(kron(proj(&ket(2, 1)).mat(), &CMat::identity(2, 2))),
    ];
    let sift = SiftMap::single_kraus(s, key)?;

    let a0 = proj(&ket(2, 0)).into_inner();
    let a1 = proj(&ket(2, 1)).into_inner();
    let eq = herm((kron(&a0, proj(&bar1).mat()) + kron(&a1, proj(&bar0).mat())) * cr(0.5));
    let ne = herm((kron(&a0, proj(&bar0).mat()) + kron(&a1, proj(&bar1).mat())) * cr(0.5));
    let mut set = ConstraintSet::new(4);
    set.push("eq", eq.clone(), 0.0, 1.0)?;
    set.push("ne", ne.clone(), 0.0, 1.0)?;
    let (mut constraints, mut statistical) = tight(set, rho.matrix(), true);
    push_source_constraints(&mut constraints, &mut statistical, &rho, false)?;

    let bob = Povm::from_parts(vec![
        ("B0", 0, proj(&phi0).scale(0.5)),
        ("B0", 1, proj(&bar0).scale(0.5)),
        ("B1", 0, proj(&phi1).scale(0.5)),
        ("B1", 1, proj(&bar1).scale(0.5)),
    ])?;
    let alice = Povm::from_parts(vec![("A", 0, proj(&ket(2, 0))), ("A", 1, proj(&ket(2, 1)))])?;
    let fine = fine_grain(&alice, &bob)?.tightened_to(rho.matrix());

    let (p_pass, q) = error_rate(rho.matrix(), &eq, &ne);
    Ok(ProtocolInstance {
        name: "b92".into(),
        rho_sim: rho,
        sift,
        constraints,
        statistical,
        fine_constraints: fine,
        key_error_q: q,
        h_ab: h2(q),
        p_pass,
        herald_probability: 1.0,
        d_signal: 4,
        params: vec![("theta".into(), theta), ("p_depol".into(), p_depol)],
        flags: Vec::new(),
    })
}

/// Charlie's success element on A′B′ (basis |00⟩, |01⟩, |10⟩, |11⟩):
/// (1−p_d)² ½(|Ψ⁻⟩⟨Ψ⁻| + |11⟩⟨11|) + p_d(1−p_d) I/4.
pub fn charlie_element(p_dark: f64) -> HermitianMatrix {
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let psi_m = CVec::from_vec(vec![cr(0.0), cr(s2), cr(-s2), cr(0.0)]);
    let both = proj(&ket(4, 3));
    let click = proj(&psi_m).add(&both).scale(0.5 * (1.0 - p_dark).powi(2));
    click.add(&HermitianMatrix::identity(4).scale(0.25 * p_dark * (1.0 - p_dark)))
}

/// Unnormalized heralded state on AB and the herald probability.
fn twin_field_herald(q: f64, sqrt_eta: f64, p_dark: f64) -> Result<(HermitianMatrix, f64)> {
    let phi_q = CVec::from_vec(vec![cr(q.sqrt()), cr(0.0), cr(0.0), cr((1.0 - q).sqrt())]);
    let one = DensityMatrix::pure(&phi_q, vec![2, 2])?;
    let one = pure_loss_single_photon(&one, sqrt_eta, 1)?;
    // A A′ B B′ reordered to A B A′ B′.
    let joint = kron(one.mat(), one.mat());
    let joint = permute_subsystems(&joint, &[2, 2, 2, 2], &[0, 2, 1, 3])?;
    let m = kron(&CMat::identity(4, 4), charlie_element(p_dark).mat());
    let rho_ab = partial_trace_mat(&(m * joint), &[2, 2, 2, 2], &[0, 1])?;
    let rho_ab = herm(rho_ab);
    let p = rho_ab.trace_re();
    Ok((rho_ab, p))
}

/// Probability that Charlie announces the |Ψ⁻⟩ outcome.
pub fn charlie_success_probability(q: f64, sqrt_eta: f64, p_dark: f64) -> Result<f64> {
    check_unit("q", q)?;
    check_unit("sqrt_eta", sqrt_eta)?;
    check_unit("p_dark", p_dark)?;
    Ok(twin_field_herald(q, sqrt_eta, p_dark)?.1)
}

/// Twin-field QKD: Alice and Bob each prepare √q|00⟩ + √(1−q)|11⟩ on a
/// qubit and a photonic mode, send the modes through pure loss with
/// amplitude transmittance √η each, and keep the rounds where Charlie
/// announces |Ψ⁻⟩. The key uses `key_basis`; statistics of both bases are
/// constraints. Bob's values are relabeled so that the anticorrelated
/// outcomes of |Ψ⁻⟩ count as agreement.
pub fn twin_field(q: f64, sqrt_eta: f64, p_dark: f64, p_z: f64, key_basis: KeyBasis) -> Result<ProtocolInstance> {
    check_unit("q", q)?;
    check_unit("sqrt_eta", sqrt_eta)?;
    check_unit("p_dark", p_dark)?;
    check_unit("p_Z", p_z)?;
    let (unnorm, herald) = twin_field_herald(q, sqrt_eta, p_dark)?;
    if herald <= 1e-300 {
        return Err(domain("Charlie never announces success for these parameters"));
    }
    let rho = DensityMatrix::normalized(unnorm, vec![2, 2])?;
    let p_x = 1.0 - p_z;
    let alice = bb84_povm(p_z, p_x)?;
    let flip = |wz: f64, wx: f64| {
        Povm::from_parts(vec![
            ("Z", 0, proj(&ket(2, 1)).scale(wz)),
            ("Z", 1, proj(&ket(2, 0)).scale(wz)),
            ("X", 0, proj(&minus()).scale(wx)),
            ("X", 1, proj(&plus()).scale(wx)),
        ])
    };
    let bob = flip(p_z, p_x)?;
    let kb = key_basis.as_str();
    let sift = build_sift_map(&alice, &bob, &[(kb, kb)])?;

    let keep = [("Z", "Z"), ("X", "X")];
    let set = coarse_rescaled(&bb84_povm(0.5, 0.5)?, &flip(0.5, 0.5)?, &keep, 4.0)?;
    let (constraints, statistical) = tight(set, rho.matrix(), true);
    let fine = fine_grain(&alice, &bob)?.tightened_to(rho.matrix());
    let eq = &constraints.find(&format!("eq_{kb}{kb}")).expect("coarse label").op;
    let ne = &constraints.find(&format!("ne_{kb}{kb}")).expect("coarse label").op;
    let (_, qk) = error_rate(rho.matrix(), eq, ne);
    let p_sift = sift.apply(rho.matrix())?.1;
    Ok(ProtocolInstance {
        name: "twin_field".into(),
        rho_sim: rho,
        sift,
        constraints,
        statistical,
        fine_constraints: fine,
        key_error_q: qk,
        h_ab: h2(qk),
        p_pass: herald * p_sift,
        herald_probability: herald,
        d_signal: 4,
        params: vec![
            ("q".into(), q),
            ("sqrt_eta".into(), sqrt_eta),
            ("eta".into(), sqrt_eta * sqrt_eta),
            ("p_dark".into(), p_dark),
            ("p_Z".into(), p_z),
        ],
        flags: vec![format!("key_basis={kb}")],
    })
}

/// BB84 with a qubit Alice and a qutrit Bob (|2⟩ is the vacuum), whose
/// detectors for bit 0 and bit 1 have efficiencies η₀ and η₁ in both bases.
/// Alice's X-basis constraint operators are |±⟩⟨±|.
pub fn bb84_mismatch(p_depol: f64, p_z: f64, eta0: f64, eta1: f64) -> Result<ProtocolInstance> {
    check_bb84_depol(p_depol)?;
    check_unit("p_Z", p_z)?;
    check_unit("eta0", eta0)?;
    check_unit("eta1", eta1)?;
    let p_x = 1.0 - p_z;
    let embed = |v: &CVec| CVec::from_vec(vec![v[0], v[1], cr(0.0)]);
    let bob_parts = |wz: f64, wx: f64| {
        let parts = [
            ("Z", 0, proj(&ket(3, 0)).scale(wz * eta0)),
            ("Z", 1, proj(&ket(3, 1)).scale(wz * eta1)),
            ("X", 0, proj(&embed(&plus())).scale(wx * eta0)),
            ("X", 1, proj(&embed(&minus())).scale(wx * eta1)),
        ];
        let mut sum = CMat::zeros(3, 3);
        for (_, _, m) in &parts {
            sum += m.mat();
        }
        let mut v = parts.to_vec();
        v.push(("N", 0, herm(CMat::identity(3, 3) - sum)));
        Povm::from_parts(v)
    };
    let bob = bob_parts(p_z, p_x)?;
    let alice = bb84_povm(p_z, p_x)?;
    let keep = [("Z", "Z"), ("X", "X")];
    let sift = build_sift_map(&alice, &bob, &keep)?;

    let rho2 = depolarize(&DensityMatrix::pure(&phi_plus(), vec![2, 2])?, 4.0 * p_depol, 1)?;
    // Embed Bob's qubit into the qutrit.
    let iso = kron(&CMat::identity(2, 2), &CMat::from_fn(3, 2, |i, j| cr(if i == j { 1.0 } else { 0.0 })));
    let rho = DensityMatrix::new(herm(&iso * rho2.mat() * iso.adjoint()), vec![2, 3])?;

    let set = coarse_rescaled(&bb84_povm(0.5, 0.5)?, &bob, &keep, 2.0)?;
    let (constraints, statistical) = tight(set, rho.matrix(), true);
    let fine = fine_grain(&alice, &bob)?.tightened_to(rho.matrix());
    let pick = |l: &str| &constraints.find(l).expect("coarse label").op;
    let (wz, qz) = error_rate(rho.matrix(), pick("eq_ZZ"), pick("ne_ZZ"));
    let (wx, qx) = error_rate(rho.matrix(), pick("eq_XX"), pick("ne_XX"));
    let (h_ab, q) = leak_entropy(&[(p_z * wz, qz), (p_x * wx, qx)]);
    let mut flags = Vec::new();
    if eta0 == 0.0 || eta1 == 0.0 {
        flags.push("blind_detector: one detector never clicks".to_string());
    }
    Ok(ProtocolInstance {
        name: "bb84_mismatch".into(),
        p_pass: sift.apply(rho.matrix())?.1,
        rho_sim: rho,
        sift,
        constraints,
        statistical,
        fine_constraints: fine,
        key_error_q: q,
        h_ab,
        herald_probability: 1.0,
        d_signal: 6,
        params: vec![
            ("p_depol".into(), p_depol),
            ("p_Z".into(), p_z),
            ("eta0".into(), eta0),
            ("eta1".into(), eta1),
            ("Q".into(), 2.0 * p_depol),
        ],
        flags,
    })
}

/// ⟨α|β⟩ for coherent states.
fn coherent_overlap(a: crate::C64, b: crate::C64) -> crate::C64 {
    (-(a.norm_sqr() + b.norm_sqr()) / 2.0 + a.conj() * b).exp()
}

/// κ = ¼(1−i)√(p_Z p_X) e^{−μ(1+i)}.
pub fn trojan_kappa(p_z: f64, mu_out: f64) -> crate::C64 {
    c(0.25, -0.25) * (p_z * (1.0 - p_z)).sqrt() * (c(-mu_out, -mu_out)).exp()
}

/// Alice's reduced state under the Trojan-horse model (analytic form).
pub fn trojan_rho_a(p_z: f64, mu_out: f64) -> HermitianMatrix {
    let k = trojan_kappa(p_z, mu_out);
    let kc = k.conj();
    let (z, x) = (cr(p_z / 2.0), cr((1.0 - p_z) / 2.0));
    let o = cr(0.0);
    herm(CMat::from_row_slice(4, 4, &[z, o, k, kc, o, z, kc, k, kc, k, x, o, k, kc, o, x]))
}

/// Prepare-and-measure BB84 whose phase encoder leaks coherent states with
/// mean photon number μ_out to Eve. A is Alice's 4-dim preparation label,
/// B Bob's single-photon qubit in the leading/trailing basis.
pub fn trojan_bb84(p_depol: f64, p_z: f64, mu_out: f64) -> Result<ProtocolInstance> {
    check_bb84_depol(p_depol)?;
    check_unit("p_Z", p_z)?;
    if !(mu_out >= 0.0) || !mu_out.is_finite() {
        return Err(domain(format!("mu_out = {mu_out} must be finite and nonnegative")));
    }
    let p_x = 1.0 - p_z;
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    // Leading/trailing basis |10⟩, |01⟩ as |0⟩, |1⟩.
    let zp = CVec::from_vec(vec![cr(s2), cr(s2)]);
    let zm = CVec::from_vec(vec![cr(s2), cr(-s2)]);
    let xp = CVec::from_vec(vec![cr(s2), c(0.0, s2)]);
    let xm = CVec::from_vec(vec![cr(s2), c(0.0, -s2)]);
    let r = mu_out.sqrt();
    let amps = [(p_z / 2.0).sqrt(), (p_z / 2.0).sqrt(), (p_x / 2.0).sqrt(), (p_x / 2.0).sqrt()];
    let bs = [&zp, &zm, &xp, &xm];
    let es = [cr(r), cr(-r), c(0.0, r), c(0.0, -r)];
    // ρ_AB = Σ_jk a_j a_k ⟨e_k|e_j⟩ |j⟩⟨k| ⊗ |b_j⟩⟨b_k|.
    let mut m = CMat::zeros(8, 8);
    for j in 0..4 {
        for k in 0..4 {
            let w = cr(amps[j] * amps[k]) * coherent_overlap(es[k], es[j]);
            let ajk = ket(4, j) * ket(4, k).adjoint();
            let bjk = bs[j] * bs[k].adjoint();
            m += kron(&ajk, &bjk) * w;
        }
    }
    let pure = DensityMatrix::new(herm(m), vec![4, 2])?;
    let rho = depolarize(&pure, 4.0 * p_depol, 1)?;

    let alice = Povm::from_parts(vec![
        ("Z", 0, proj(&ket(4, 0))),
        ("Z", 1, proj(&ket(4, 1))),
        ("X", 0, proj(&ket(4, 2))),
        ("X", 1, proj(&ket(4, 3))),
    ])?;
    let bob = Povm::from_parts(vec![
        ("Z", 0, proj(&zp).scale(p_z)),
        ("Z", 1, proj(&zm).scale(p_z)),
        ("X", 0, proj(&xp).scale(p_x)),
        ("X", 1, proj(&xm).scale(p_x)),
    ])?;
    let keep = [("Z", "Z"), ("X", "X")];
    let sift = build_sift_map(&alice, &bob, &keep)?;
    let set = coarse_grain(&alice, &bob, &keep)?;
    let (mut constraints, mut statistical) = tight(set, rho.matrix(), true);
    let (wz, qz) = {
        let (e, n) = (&constraints.items[0].op, &constraints.items[1].op);
        error_rate(rho.matrix(), e, n)
    };
    let (wx, qx) = {
        let (e, n) = (&constraints.items[2].op, &constraints.items[3].op);
        error_rate(rho.matrix(), e, n)
    };
    push_source_constraints(&mut constraints, &mut statistical, &rho, true)?;
    let fine = fine_grain(&alice, &bob)?.tightened_to(rho.matrix());
    let (h_ab, q) = leak_entropy(&[(wz, qz), (wx, qx)]);
    Ok(ProtocolInstance {
        name: "trojan_bb84".into(),
        p_pass: sift.apply(rho.matrix())?.1,
        rho_sim: rho,
        sift,
        constraints,
        statistical,
        fine_constraints: fine,
        key_error_q: q,
        h_ab,
        herald_probability: 1.0,
        d_signal: 8,
        params: vec![
            ("p_depol".into(), p_depol),
            ("p_Z".into(), p_z),
            ("mu_out".into(), mu_out),
            ("Q".into(), 2.0 * p_depol),
        ],
        flags: Vec::new(),
    })
}

/// Protocol names in the catalog.
pub const CATALOG: [&str; 5] = ["bb84", "b92", "twin_field", "bb84_mismatch", "trojan_bb84"];

/// One-line descriptions of the catalog.
pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "bb84" => "entanglement-based BB84, depolarizing noise (Q = 2p), key from both bases",
        "b92" => "B92 with two states at Bloch angle theta, single-Kraus postselection, source constraints",
        "twin_field" => "twin-field QKD with pure loss and dark counts, heralded on Psi-minus",
        "bb84_mismatch" => "BB84 with detector-efficiency mismatch, qutrit Bob with vacuum outcome",
        "trojan_bb84" => "prepare-and-measure BB84 under a Trojan-horse attack with mu_out leaked photons",
        _ => return None,
    })
}

impl ProtocolInstance {
    /// The same instance constrained by the fine-grained statistics
    /// (every POVM pair) instead of the coarse ones. Exact source
    /// constraints are kept.
    pub fn with_fine_constraints(mut self) -> Self {
        let mut set = self.fine_constraints.clone();
        let mut stat = vec![true; set.len()];
        for (c, &s) in self.constraints.items.iter().zip(&self.statistical) {
            if !s {
                set.items.push(c.clone());
                stat.push(false);
            }
        }
        self.constraints = set;
        self.statistical = stat;
        self.flags.push("fine_grained".into());
        self
    }
}
