//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `DOCUMENTED_FAILURES` are expected to fail; they are
//! still evaluated and printed as FAIL, and the binary exits nonzero only if
//! some other criterion fails.

use std::time::Instant;

use qkdfk_cli::brent_multistart;
use qkdfk_core::channels::{build_dilated_sift_map, build_sift_map, pinch, ConstraintSet, SiftMap};
use qkdfk_core::finitekey::{
    coherent_correction, gamma_bounds, key_length, leak_ec, EntropyPath, SecurityProfile, TransmissionBudget,
};
use qkdfk_core::matqi::{
    fidelity_oracle, h2, mat_log2_regularized, random_density, random_hermitian, CMat, HermitianMatrix,
};
use qkdfk_core::minent::{certified_minent, root_fidelity_sdp};
use qkdfk_core::pipeline::{min_rate, rate, vn_rate, EntropyBound, RateSettings};
use qkdfk_core::protocols::{
    b92, bb84, bb84_min_reference, bb84_mismatch, bb84_povm, bb84_vn_reference, mismatch_reference, plob,
    transmittance_from_db, trojan_bb84, twin_field, KeyBasis,
};
use qkdfk_core::relent::{certified_keyterm, grad_objective, nearest_state, QreApproxConfig};
use qkdfk_core::sdp::solve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DOCUMENTED_FAILURES: [usize; 1] = [4];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn vn_keyterm(inst: &qkdfk_core::protocols::ProtocolInstance, s: &RateSettings) -> f64 {
    match vn_rate(inst, s).expect("von Neumann path").bound {
        EntropyBound::VonNeumann(kt) => kt.value * inst.herald_probability,
        EntropyBound::MinEntropy(_) => unreachable!(),
    }
}

fn qber_grid() -> Vec<f64> {
    (0..=11).map(|i| i as f64 / 100.0).collect()
}

fn criterion_1() -> Outcome {
    let s = RateSettings::asymptotic();
    let (mut worst, mut slowest, mut sound) = (0.0f64, 0.0f64, true);
    for q in qber_grid() {
        let t = Instant::now();
        let inst = bb84(q / 2.0, 0.5).unwrap();
        let kt = vn_keyterm(&inst, &s);
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let reference = bb84_vn_reference(q, 0.5);
        worst = worst.max((kt - reference).abs());
        sound &= kt <= reference + 1e-6;
    }
    outcome(
        worst <= 1e-3 && slowest <= 5.0 && sound,
        format!("max |key term - closed form| = {worst:.2e} (tol 1e-3), slowest point {slowest:.2} s (limit 5 s), never above the closed form: {sound}"),
    )
}

fn criterion_2() -> Outcome {
    let s = RateSettings::asymptotic();
    let mut worst = 0.0f64;
    for q in qber_grid() {
        let inst = bb84(q / 2.0, 0.5).unwrap();
        let o = min_rate(&inst, &s).unwrap();
        let EntropyBound::MinEntropy(mb) = o.bound else { unreachable!() };
        worst = worst.max((mb.keyterm() - bb84_min_reference(q, 0.5)).abs());
    }
    let mut zero = true;
    let mut seen = Vec::new();
    for q in [0.0758, 0.08, 0.09, 0.10, 0.11] {
        let inst = bb84(q / 2.0, 0.5).unwrap();
        for n in [f64::INFINITY, 1e8, 1e12] {
            let s = if n.is_infinite() { RateSettings::asymptotic() } else { RateSettings::finite(n) };
            let r = min_rate(&inst, &s).unwrap().result.rate;
            zero &= r == 0.0;
            seen.push(r);
        }
    }
    let max_seen = seen.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst <= 1e-3 && zero,
        format!("max |key term - closed form| = {worst:.2e} (tol 1e-3); rate for Q >= 7.58% at N in {{inf, 1e8, 1e12}}: max {max_seen:e} (must be exactly 0)"),
    )
}

fn analytic_finite(q: f64, n_total: f64, path: EntropyPath) -> f64 {
    let d = RateSettings::default();
    let budget = TransmissionBudget::new(n_total, 0.5, d.alpha_pe).unwrap();
    let profile = SecurityProfile::new(d.eps_sec, d.eps_cor, path, 2).unwrap();
    let q_ub = gamma_bounds(q, budget.m, 2, profile.eps_pe_per_constraint).unwrap().1.min(0.5);
    let h = match path {
        EntropyPath::VonNeumann => 1.0 - h2(q_ub),
        EntropyPath::MinEntropy => 1.0 - (1.0 + 2.0 * (q_ub * (1.0 - q_ub)).sqrt()).log2(),
    };
    let leak = leak_ec(budget.n, 2, h2(q), d.f_ec, profile.eps_ec).unwrap();
    key_length(h, &budget, &profile, leak).unwrap().rate
}

fn criterion_3() -> Outcome {
    let ns: Vec<f64> = (6..=12).map(|e| 10f64.powi(e)).collect();
    let vn_share = SecurityProfile::new(1e-10, 1e-15, EntropyPath::VonNeumann, 2).unwrap().eps_prime;
    let min_share = SecurityProfile::new(1e-10, 1e-15, EntropyPath::MinEntropy, 2).unwrap().eps_prime;
    let shares_ok = (vn_share - 1e-10 / 7.0).abs() < 1e-25 && (min_share - 1e-10 / 6.0).abs() < 1e-25;
    let (mut worst, mut bounded, mut monotone) = (0.0f64, true, true);
    for q in [0.01, 0.05] {
        let inst = bb84(q / 2.0, 0.5).unwrap();
        for path in [EntropyPath::VonNeumann, EntropyPath::MinEntropy] {
            let asym = rate(&inst, &RateSettings::default(), path).unwrap().result.rate;
            let mut prev = 0.0;
            for &n in &ns {
                let r = rate(&inst, &RateSettings::finite(n), path).unwrap().result.rate;
                worst = worst.max((r - analytic_finite(q, n, path)).abs());
                bounded &= r <= asym;
                monotone &= r >= prev;
                prev = r;
            }
        }
    }
    outcome(
        worst <= 1e-3 && bounded && monotone && shares_ok,
        format!("Q in {{1%, 5%}}, N = 1e6..1e12, both paths: max |numerical - analytic| = {worst:.2e} (tol 1e-3), <= asymptotic: {bounded}, nondecreasing: {monotone}, eps' = eps_sec/7 and /6: {shares_ok}"),
    )
}

fn b92_rate(theta_deg: f64, p: f64) -> f64 {
    b92(theta_deg.to_radians(), p)
        .and_then(|i| vn_rate(&i, &RateSettings::asymptotic()))
        .map(|o| o.result.rate)
        .unwrap_or(0.0)
}

fn criterion_4() -> Outcome {
    let (t1, r1) = brent_multistart(|t| -b92_rate(t, 0.01), (5.0, 175.0), 1e-2).unwrap();
    let r_low = -r1;
    let r_fixed = b92_rate(64.8, 0.15);
    let (t2, r2) = brent_multistart(|t| -b92_rate(t, 0.15), (5.0, 175.0), 1e-2).unwrap();
    let r_high = -r2;
    let a = r_low >= 0.24;
    let b = (r_fixed - 0.00574).abs() <= 0.3 * 0.00574;
    let c = r_high > 0.0;
    outcome(
        a && b && c,
        format!("p = 0.01: max rate {r_low:.4} at {t1:.1} deg (need >= 0.24); p = 0.15, 64.8 deg: {r_fixed:.3e} (need 0.00574 +/- 30%); p = 0.15 optimized: {r_high:.3e} at {t2:.1} deg (need > 0)"),
    )
}

fn tf_rate(q: f64, loss_db: f64) -> f64 {
    let eta = transmittance_from_db(loss_db);
    twin_field(q, eta.sqrt(), 1e-9, 0.1, KeyBasis::X)
        .and_then(|i| vn_rate(&i, &RateSettings::asymptotic()))
        .map(|o| o.result.rate)
        .unwrap_or(0.0)
}

fn tf_best(loss_db: f64) -> (f64, f64) {
    let (q, r) = brent_multistart(|q| -tf_rate(q, loss_db), (0.5, 0.999), 1e-4).unwrap();
    (q, -r)
}

fn criterion_5() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for db in [10.0, 20.0] {
        let (q, r) = tf_best(db);
        let bound = plob(transmittance_from_db(db)).unwrap();
        ok &= r < bound;
        parts.push(format!("{db} dB: {r:.3e} at q = {q:.3} < PLOB {bound:.3e}"));
    }
    for db in [50.0, 60.0] {
        let (q, r) = tf_best(db);
        let bound = plob(transmittance_from_db(db)).unwrap();
        ok &= r > bound;
        parts.push(format!("{db} dB: {r:.3e} at q = {q:.3} > PLOB {bound:.3e}"));
    }
    let (q40, r40) = tf_best(40.0);
    let q_ok = (q40 - 0.93).abs() <= 0.03;
    parts.push(format!("40 dB: q* = {q40:.4} (need 0.93 +/- 0.03, rate {r40:.3e})"));
    outcome(ok && q_ok, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let s = RateSettings::asymptotic();
    let mut worst = 0.0f64;
    for q in qber_grid() {
        let inst = bb84_mismatch(q / 2.0, 0.5, 1.0, 1.0).unwrap();
        worst = worst.max((vn_keyterm(&inst, &s) - bb84_vn_reference(q, 0.5)).abs());
    }
    let mut ok = worst <= 1e-3;
    let mut parts = vec![format!("eta0 = eta1 = 1: max |key term - closed form| = {worst:.2e}")];
    let sifted = 0.5;
    for eta1 in [0.25, 0.75] {
        for q in [0.01, 0.05] {
            let inst = bb84_mismatch(q / 2.0, 0.5, 1.0, eta1).unwrap();
            let r = vn_rate(&inst, &s).unwrap().result.rate / sifted;
            let analytic = mismatch_reference(q, 1.0, eta1);
            ok &= r >= analytic - 1e-3;
            parts.push(format!("eta1 = {eta1}, Q = {q}: {r:.4} vs analytic {analytic:.4}"));
        }
    }
    outcome(ok, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let s = RateSettings::asymptotic();
    let q = 0.05;
    let reference = vn_rate(&bb84(q / 2.0, 0.5).unwrap(), &s).unwrap().result.rate;
    let rates: Vec<f64> = [0.0, 1e-3, 1e-2, 1e-1]
        .iter()
        .map(|&mu| vn_rate(&trojan_bb84(q / 2.0, 0.5, mu).unwrap(), &s).unwrap().result.rate)
        .collect();
    let matches = (rates[0] - reference).abs() <= 1e-3;
    let monotone = rates.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        matches && monotone,
        format!("Q = 5%: BB84 {reference:.5}; mu_out = 0, 1e-3, 1e-2, 1e-1 -> {:.5}, {:.5}, {:.5}, {:.5}", rates[0], rates[1], rates[2], rates[3]),
    )
}

/// Random interval constraints around a full-rank state.
fn random_set(rng: &mut ChaCha8Rng) -> (ConstraintSet, HermitianMatrix) {
    let rho0 = random_density(4, rng).scale(0.7).add(&HermitianMatrix::identity(4).scale(0.3 / 4.0));
    let mut set = ConstraintSet::new(4);
    for i in 0..rng.gen_range(1..=3) {
        let g = random_hermitian(4, rng);
        let g = g.scale(1.0 / g.max_eigenvalue().abs().max(g.min_eigenvalue().abs()));
        let v = rho0.inner(&g);
        let w = rng.gen_range(0.005..0.05);
        set.push(format!("g{i}"), g, v - w, v + w).unwrap();
    }
    (set, rho0)
}

fn feasible(set: &ConstraintSet, rho: &HermitianMatrix) -> bool {
    set.violation(rho) <= 1e-12 && rho.min_eigenvalue() >= 0.0
}

/// Feasible points found by mixing toward random states, then a random
/// local descent on `score` (lower is better).
fn sample_feasible(
    set: &ConstraintSet,
    rho0: &HermitianMatrix,
    rng: &mut ChaCha8Rng,
    score: &dyn Fn(&HermitianMatrix) -> f64,
) -> (Vec<HermitianMatrix>, HermitianMatrix, f64) {
    let mut pts = vec![rho0.clone()];
    for _ in 0..150 {
        let sigma = random_density(4, rng);
        for t in [1.0, 0.5, 0.25, 0.1, 0.05] {
            let r = rho0.scale(1.0 - t).add(&sigma.scale(t));
            if feasible(set, &r) {
                pts.push(r);
                break;
            }
        }
    }
    let (mut best, mut fbest) = (rho0.clone(), score(rho0));
    for p in &pts {
        let f = score(p);
        if f < fbest {
            best = p.clone();
            fbest = f;
        }
    }
    let mut step = 0.05;
    for _ in 0..300 {
        let h = random_hermitian(4, rng);
        let h = h.scale(step / h.max_eigenvalue().abs().max(h.min_eigenvalue().abs()));
        let cand = nearest_state(&best.add(&h));
        if feasible(set, &cand) {
            let f = score(&cand);
            if f < fbest {
                best = cand;
                fbest = f;
                continue;
            }
        }
        step = (step * 0.97).max(1e-4);
    }
    pts.push(best.clone());
    (pts, best, fbest)
}

fn max_root_fidelity(sift: &SiftMap, rho: &HermitianMatrix, iters: usize, rng: &mut ChaCha8Rng) -> f64 {
    let zs = sift.key_projectors();
    let (a, _) = sift.apply(rho).unwrap();
    let n = a.dim();
    let za = pinch(&a, &zs).unwrap();
    let mut best_sigma = za.scale(1.0 / za.trace_re());
    let f = |s: &HermitianMatrix| fidelity_oracle(&a, &pinch(s, &zs).unwrap()).unwrap().sqrt();
    let mut best = f(&best_sigma);
    let mut step = 0.05;
    for _ in 0..iters {
        let h = random_hermitian(n, rng);
        let h = h.scale(step / h.max_eigenvalue().abs().max(h.min_eigenvalue().abs()));
        let cand = nearest_state(&best_sigma.add(&h));
        let v = f(&cand);
        if v > best {
            best = v;
            best_sigma = cand;
        } else {
            step = (step * 0.97).max(1e-4);
        }
    }
    best
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let sift = bb84(0.0, 0.5).unwrap().sift;
    let cfg = QreApproxConfig::default();
    let (mut violations, mut worst_vn, mut worst_min) = (0, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..50 {
        let (set, rho0) = random_set(&mut rng);
        let kt = certified_keyterm(&set, &sift, &cfg).unwrap();
        let (_, _, f_best) = sample_feasible(&set, &rho0, &mut rng, &|r| sift.key_relative_entropy(r).unwrap());
        let gap_vn = kt.value - f_best;
        worst_vn = worst_vn.max(gap_vn);
        let mb = certified_minent(&set, &sift).unwrap();
        let mut local = rng.clone();
        let (pts, _, _) = sample_feasible(&set, &rho0, &mut rng, &|r| -max_root_fidelity(&sift, r, 0, &mut local.clone()));
        let u_brute = pts.iter().map(|r| max_root_fidelity(&sift, r, 30, &mut local)).fold(0.0, f64::max);
        let gap_min = u_brute - mb.fidelity_sqrt;
        worst_min = worst_min.max(gap_min);
        violations += usize::from(gap_vn > 1e-6) + usize::from(gap_min > 1e-6);
    }
    outcome(
        violations == 0,
        format!("50 random 4-dim sets: {violations} violations at 1e-6 slack; max (certified - sampled) key term {worst_vn:.2e}, max (sampled - certified) root fidelity {worst_min:.2e}"),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0009);
    let mut fid = 0.0f64;
    for _ in 0..50 {
        let (r, s) = (random_density(4, &mut rng), random_density(4, &mut rng));
        let sol = solve(&root_fidelity_sdp(&r, &s).unwrap(), 1e-10).unwrap();
        fid = fid.max((sol.primal_value - fidelity_oracle(&r, &s).unwrap().sqrt()).abs());
    }
    let sifts: Vec<SiftMap> = vec![
        bb84(0.02, 0.3).unwrap().sift,
        b92(1.2, 0.05).unwrap().sift,
        twin_field(0.9, 0.3, 1e-6, 0.1, KeyBasis::X).unwrap().sift,
        bb84_mismatch(0.02, 0.5, 1.0, 0.6).unwrap().sift,
        trojan_bb84(0.02, 0.5, 0.01).unwrap().sift,
    ];
    let mut adj = 0.0f64;
    for sift in &sifts {
        for _ in 0..10 {
            let x = random_hermitian(sift.in_dim(), &mut rng);
            let y = random_hermitian(sift.out_dim(), &mut rng);
            let lhs = y.inner(&sift.apply(&x).unwrap().0);
            let rhs = sift.adjoint(&y).unwrap().inner(&x);
            adj = adj.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        }
    }
    // Block identity for Tr[M log M'] and the block vs dilated key entropy.
    let mut block = 0.0f64;
    for _ in 0..20 {
        let pd = |n: usize, rng: &mut ChaCha8Rng| random_density(n, rng).add(&HermitianMatrix::identity(n).scale(0.05));
        let (a, a2, b, b2) = (pd(3, &mut rng), pd(3, &mut rng), pd(2, &mut rng), pd(2, &mut rng));
        let sum = |x: &HermitianMatrix, y: &HermitianMatrix| {
            let mut m = CMat::zeros(5, 5);
            m.view_mut((0, 0), (3, 3)).copy_from(x.mat());
            m.view_mut((3, 3), (2, 2)).copy_from(y.mat());
            HermitianMatrix::symmetrized(m)
        };
        let tr_log = |x: &HermitianMatrix, y: &HermitianMatrix| x.inner(&mat_log2_regularized(y, 0.0).unwrap());
        let whole = tr_log(&sum(&a, &b), &sum(&a2, &b2));
        block = block.max((whole - tr_log(&a, &a2) - tr_log(&b, &b2)).abs());
    }
    let alice = bb84_povm(0.4, 0.6).unwrap();
    let bob = bb84_povm(0.4, 0.6).unwrap();
    let keep = [("Z", "Z"), ("X", "X")];
    let compact = build_sift_map(&alice, &bob, &keep).unwrap();
    let dilated = build_dilated_sift_map(&alice, &bob, &keep).unwrap();
    for _ in 0..10 {
        let rho = random_density(4, &mut rng);
        let d = compact.key_relative_entropy(&rho).unwrap() - dilated.key_relative_entropy(&rho).unwrap();
        block = block.max(d.abs());
    }
    let sift = &sifts[0];
    let rho = random_density(4, &mut rng).scale(0.8).add(&HermitianMatrix::identity(4).scale(0.05));
    let g = grad_objective(&rho, sift, 0.0).unwrap();
    let mut grad = 0.0f64;
    for _ in 0..20 {
        let h = random_hermitian(4, &mut rng);
        let h = h.sub(&HermitianMatrix::identity(4).scale(h.trace_re() / 4.0));
        let h = h.scale(1.0 / h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        let t = 1e-5;
        let fd = (sift.key_relative_entropy(&rho.add(&h.scale(t))).unwrap()
            - sift.key_relative_entropy(&rho.sub(&h.scale(t))).unwrap())
            / (2.0 * t);
        let an = g.inner(&h);
        grad = grad.max((fd - an).abs() / an.abs().max(1e-2));
    }
    outcome(
        fid <= 1e-6 && adj <= 1e-12 && block <= 1e-10 && grad <= 1e-5,
        format!("fidelity SDP vs oracle {fid:.2e} (tol 1e-6); adjoint {adj:.2e} (tol 1e-12); block identity {block:.2e} (tol 1e-10); gradient vs FD {grad:.2e} relative (tol 1e-5)"),
    )
}

fn criterion_10() -> Outcome {
    let s = RateSettings { n_total: 1e10, ..RateSettings::default() };
    let r = key_length(0.5, &TransmissionBudget::asymptotic(1.0, 0.0).unwrap(), &SecurityProfile::standard(EntropyPath::VonNeumann), 0.0)
        .unwrap();
    let corrected = coherent_correction(&r, s.n_total, 4).rate;
    let exact = 0.5 - 2.0 * 255.0 * (1e10f64 + 1.0).log2() / 1e10;
    let a = (corrected - exact).abs() <= 1e-9;
    let b = (corrected - 0.4999983).abs() <= 5e-8;
    outcome(
        a && b,
        format!("r^coh = {corrected:.10}; |r^coh - exact arithmetic| = {:.1e} (tol 1e-9); |r^coh - 0.4999983| = {:.1e} (7-digit reference)", (corrected - exact).abs(), (corrected - 0.4999983).abs()),
    )
}

fn main() {
    // Filter arguments from `cargo test` are accepted and ignored.
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "BB84 von Neumann oracle", criterion_1),
        (2, "BB84 min-entropy oracle", criterion_2),
        (3, "finite-key BB84 curves", criterion_3),
        (4, "B92 asymptotics", criterion_4),
        (5, "twin-field vs PLOB", criterion_5),
        (6, "efficiency-mismatch reduction", criterion_6),
        (7, "Trojan-horse sanity", criterion_7),
        (8, "certification soundness", criterion_8),
        (9, "oracle equivalences", criterion_9),
        (10, "coherent-attack correction", criterion_10),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let t = Instant::now();
        let o = run();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        let note = if !o.passed && DOCUMENTED_FAILURES.contains(&id) { " [documented deviation]" } else { "" };
        println!("criterion {id:>2} {tag}{note} {name} ({:.1} s): {}", t.elapsed().as_secs_f64(), o.detail);
        if !o.passed && !DOCUMENTED_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
