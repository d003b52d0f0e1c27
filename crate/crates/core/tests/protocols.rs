use qkdfk_core::matqi::{cr, ket, partial_trace_mat, CMat, CVec, HermitianMatrix};
use qkdfk_core::protocols::{
    b92, bb84, bb84_mismatch, bb84_povm, bb84_vn_reference, charlie_success_probability, plob, transmittance_from_db,
    trojan_bb84, trojan_kappa, trojan_rho_a, twin_field, KeyBasis, ProtocolInstance, CONSISTENCY_TOL,
};
use qkdfk_core::relent::{certified_keyterm, QreApproxConfig};

fn corpus() -> Vec<ProtocolInstance> {
    vec![
        bb84(0.0, 0.5).unwrap(),
        bb84(0.025, 0.3).unwrap(),
        b92(1.2, 0.05).unwrap(),
        twin_field(0.9, transmittance_from_db(30.0).sqrt(), 1e-8, 0.1, KeyBasis::X).unwrap(),
        twin_field(0.5, 1.0, 0.0, 0.5, KeyBasis::Z).unwrap(),
        bb84_mismatch(0.01, 0.5, 1.0, 0.75).unwrap(),
        bb84_mismatch(0.01, 0.5, 1.0, 0.0).unwrap(),
        trojan_bb84(0.025, 0.5, 0.1).unwrap(),
    ]
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn simulated_statistics_match_constraints() {
    for inst in corpus() {
        assert!(inst.consistency_residual() <= CONSISTENCY_TOL, "{}: {}", inst.name, inst.consistency_residual());
        assert!(inst.constraints.violation(inst.rho_sim.matrix()) <= CONSISTENCY_TOL);
        assert!(inst.fine_constraints.violation(inst.rho_sim.matrix()) <= CONSISTENCY_TOL);
        assert!(inst.p_pass > 0.0 && inst.p_pass <= 1.0 + 1e-12, "{}", inst.name);
    }
}

#[test]
fn povms_are_complete() {
    // Every fine-grained pair summed over both parties gives the identity.
    for inst in corpus() {
        let d = inst.fine_constraints.dim;
        let sum = inst.fine_constraints.items.iter().fold(HermitianMatrix::zeros(d), |acc, c| acc.add(&c.op));
        let err = max_abs(&(sum.mat() - CMat::identity(d, d)));
        assert!(err <= 1e-10, "{}: {err}", inst.name);
    }
    let b = bb84_povm(0.3, 0.7).unwrap();
    let sum = b.elements().iter().fold(CMat::zeros(2, 2), |acc, e| acc + e.op.mat());
    assert!(max_abs(&(sum - CMat::identity(2, 2))) <= 1e-12);
}

#[test]
fn bb84_error_rates() {
    let inst = bb84(0.025, 0.5).unwrap();
    assert!((inst.key_error_q - 0.05).abs() < 1e-12);
    for c in &inst.constraints.items {
        assert!((c.lb - 0.05).abs() < 1e-12 && c.lb == c.ub, "{}", c.label);
    }
    let clean = bb84(0.0, 0.5).unwrap();
    assert!(clean.key_error_q.abs() < 1e-12);
    assert!((bb84_vn_reference(0.0, 0.5) - 0.5).abs() < 1e-15);
}

#[test]
fn bb84_single_basis_limit() {
    let inst = bb84(0.01, 1.0).unwrap();
    assert!((inst.p_pass - 1.0).abs() < 1e-12);
    assert!(inst.has_flag("single_basis"));
    assert!(!bb84(0.01, 0.5).unwrap().has_flag("single_basis"));
}

#[test]
fn bb84_rejects_noise_beyond_a_quarter() {
    assert!(bb84(0.3, 0.5).is_err());
}

#[test]
fn b92_noiseless_has_no_intrinsic_error() {
    let inst = b92(std::f64::consts::FRAC_PI_2, 0.0).unwrap();
    let ne = inst.constraints.find("ne").unwrap();
    assert!(inst.rho_sim.expect(&ne.op).abs() < 1e-12);
    assert!(inst.key_error_q.abs() < 1e-12);
    assert!(b92(0.0, 0.01).is_err() && b92(std::f64::consts::PI, 0.01).is_err());
}

fn bell_minus() -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_vec(vec![cr(0.0), cr(s), cr(-s), cr(0.0)])
}

#[test]
fn twin_field_matches_sixteen_dim_evaluation() {
    // η = 1, p_d = 0, q = ½: A′ = A and B′ = B, so ψ = ½ Σ_ab |ab⟩_AB |ab⟩_A′B′.
    let m = {
        let pm = HermitianMatrix::projector(&bell_minus()).add(&HermitianMatrix::projector(&ket(4, 3)));
        pm.scale(0.5)
    };
    let mut psi = CVec::zeros(16);
    for ab in 0..4 {
        psi[ab * 4 + ab] = cr(0.5);
    }
    let full = &psi * psi.adjoint();
    let meas = qkdfk_core::matqi::kron(&CMat::identity(4, 4), m.mat());
    let unnorm = partial_trace_mat(&(meas * full), &[4, 4], &[0]).unwrap();
    let herald = unnorm.trace().re;
    assert!((herald - 0.25).abs() < 1e-12);
    let inst = twin_field(0.5, 1.0, 0.0, 0.5, KeyBasis::Z).unwrap();
    assert!((inst.herald_probability - herald).abs() < 1e-12);
    let expect = unnorm / cr(herald);
    assert!(max_abs(&(inst.rho_sim.matrix().mat() - &expect)) < 1e-12);
    // Hand expansion: ρ = ½|Ψ⁻⟩⟨Ψ⁻| + ½|11⟩⟨11|.
    let w = inst.rho_sim.expect(&HermitianMatrix::projector(&bell_minus()));
    assert!((w - 0.5).abs() < 1e-12, "{w}");
}

#[test]
fn twin_field_vacuum_never_heralds() {
    assert!(charlie_success_probability(1.0, 0.8, 0.0).unwrap().abs() < 1e-15);
    assert!(twin_field(1.0, 0.8, 0.0, 0.1, KeyBasis::X).is_err());
    assert!(charlie_success_probability(1.0, 0.8, 1e-6).unwrap() > 0.0);
}

#[test]
fn twin_field_herald_shrinks_with_loss() {
    let p = |db: f64| charlie_success_probability(0.9, transmittance_from_db(db).sqrt(), 1e-9).unwrap();
    assert!(p(10.0) > p(20.0) && p(20.0) > p(40.0));
}

#[test]
fn mismatch_without_mismatch_is_bb84() {
    let a = bb84(0.025, 0.5).unwrap();
    let b = bb84_mismatch(0.025, 0.5, 1.0, 1.0).unwrap();
    assert!((a.p_pass - b.p_pass).abs() < 1e-12);
    assert!((a.key_error_q - b.key_error_q).abs() < 1e-12);
    let cfg = QreApproxConfig::default();
    let ka = certified_keyterm(&a.constraints, &a.sift, &cfg).unwrap().value;
    let kb = certified_keyterm(&b.constraints, &b.sift, &cfg).unwrap().value;
    assert!((ka - kb).abs() < 1e-6, "{ka} vs {kb}");
}

#[test]
fn mismatch_blind_detector_is_well_formed() {
    let inst = bb84_mismatch(0.01, 0.5, 1.0, 0.0).unwrap();
    assert!(inst.has_flag("blind_detector"));
    assert_eq!(inst.rho_sim.dims(), &[2, 3]);
    // Bit 1 is never detected in Z, so only Alice's bit 0 survives sifting there.
    assert!(inst.p_pass > 0.0 && inst.p_pass < 0.5);
}

#[test]
fn trojan_source_state() {
    let pz = 0.5;
    let k0 = trojan_kappa(pz, 0.0);
    let want = qkdfk_core::matqi::c(0.25, -0.25) * (pz * (1.0 - pz)).sqrt();
    assert!((k0 - want).norm() < 1e-15);
    assert!(trojan_kappa(pz, 40.0).norm() < 1e-15);
    for mu in [0.0, 0.01, 0.1, 1.0] {
        let ra = trojan_rho_a(pz, mu);
        assert!((ra.trace_re() - 1.0).abs() < 1e-12);
        assert!(ra.min_eigenvalue() >= -1e-12, "μ={mu}: {}", ra.min_eigenvalue());
        // The analytic marginal is the marginal of the simulated joint state.
        let inst = trojan_bb84(0.0, pz, mu).unwrap();
        let marg = partial_trace_mat(inst.rho_sim.matrix().mat(), &[4, 2], &[0]).unwrap();
        let diff = max_abs(&(marg - ra.mat()));
        assert!(diff < 1e-12, "μ={mu}: {diff}");
    }
}

#[test]
fn plob_values() {
    assert!((plob(0.5).unwrap() - 1.0).abs() < 1e-15);
    assert!((plob(0.1).unwrap() - 0.1520).abs() < 5e-5);
    let eta = 1e-6;
    assert!((plob(eta).unwrap() / eta - 1.0 / std::f64::consts::LN_2).abs() < 1e-5);
    assert!(plob(1.0).is_err());
    assert!(plob(0.0).unwrap() == 0.0);
}
