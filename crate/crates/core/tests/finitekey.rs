use qkdfk_core::finitekey::{
    coherent_correction, coherent_penalty, deviation, entropy_correction, gamma_bounds, key_length, leak_ec, leak_ec_binary,
    leak_ec_per_signal, EntropyPath, SecurityProfile, TransmissionBudget,
};
use qkdfk_core::matqi::h2;
use qkdfk_core::pipeline::{rate, RateSettings};
use qkdfk_core::protocols::bb84;

#[test]
fn deviation_examples() {
    assert!((deviation(1e6, 2, 1e-10).unwrap() - 0.004292).abs() < 5e-7);
    assert!(deviation(1e4, 2, 1e-10).unwrap() > deviation(1e6, 2, 1e-10).unwrap());
    let m = 1e12;
    let limit = 0.5 * (2.0 * (m + 1.0f64).ln() / m).sqrt();
    assert!((deviation(m, 2, 1.0 - 1e-15).unwrap() - limit).abs() < 1e-12 * limit.max(1.0));
    assert_eq!(deviation(f64::INFINITY, 2, 1e-10).unwrap(), 0.0);
    assert!(deviation(0.5, 2, 1e-10).is_err() && deviation(10.0, 1, 1e-10).is_err() && deviation(10.0, 2, 1.0).is_err());
}

#[test]
fn gamma_bounds_examples() {
    let (lb, ub) = gamma_bounds(0.05, 1e6, 2, 1e-10).unwrap();
    assert!((lb - 0.045708).abs() < 5e-7 && (ub - 0.054292).abs() < 5e-7, "({lb}, {ub})");
    assert_eq!(gamma_bounds(0.0, 100.0, 2, 1e-10).unwrap().0, 0.0);
    assert_eq!(gamma_bounds(1.0, 100.0, 2, 1e-10).unwrap().1, 1.0);
    assert_eq!(gamma_bounds(0.3, f64::INFINITY, 2, 1e-10).unwrap(), (0.3, 0.3));
    assert!(gamma_bounds(1.2, 100.0, 2, 1e-10).is_err());
}

#[test]
fn leakage_examples() {
    let eps: f64 = 1e-10 / 7.0;
    let n: f64 = 1e8;
    let want = 1.2 * h2(0.05) + 5f64.log2() * (3.0 * (2.0 / eps).log2() / n).sqrt();
    assert!((leak_ec_binary(n, 0.05, 1.2, eps).unwrap() / n - want).abs() < 1e-14);
    assert_eq!(leak_ec_per_signal(f64::INFINITY, 2, 0.0, 1.0, eps).unwrap(), 0.0);
    assert!(leak_ec_binary(1e30, 0.0, 1.0, eps).unwrap() / 1e30 < 1e-12);
    assert!(leak_ec(n, 2, 0.3, 0.9, eps).is_err());
}

#[test]
fn entropy_correction_examples() {
    let d = entropy_correction(1e9, 1e-10, 2).unwrap();
    assert!((d - 1.295e-3).abs() < 1e-6, "{d}");
    let half = entropy_correction(4e9, 1e-10, 2).unwrap();
    assert!((half - d / 2.0).abs() < 1e-15);
    assert_eq!(entropy_correction(f64::INFINITY, 1e-10, 2).unwrap(), 0.0);
}

#[test]
fn security_budget_closes() {
    for path in [EntropyPath::VonNeumann, EntropyPath::MinEntropy] {
        for n_pe in [0, 2, 7] {
            let p = SecurityProfile::new(1e-10, 1e-15, path, n_pe).unwrap();
            assert!((p.eps_total() - 1e-10).abs() < 1e-24, "{path:?} {n_pe}");
        }
    }
    assert!((SecurityProfile::standard(EntropyPath::VonNeumann).eps_prime - 1e-10 / 7.0).abs() < 1e-25);
    assert!((SecurityProfile::standard(EntropyPath::MinEntropy).eps_prime - 1e-10 / 6.0).abs() < 1e-25);
    assert_eq!(SecurityProfile::standard(EntropyPath::MinEntropy).eps_smooth, 0.0);
}

#[test]
fn asymptotic_noiseless_bb84_with_table_defaults() {
    let inst = bb84(0.0, 0.5).unwrap();
    let out = rate(&inst, &RateSettings::default(), EntropyPath::VonNeumann).unwrap();
    assert!((out.result.rate - 0.45).abs() < 1e-4, "{}", out.result.rate);
}

#[test]
fn key_length_clamps_and_is_integral() {
    let profile = SecurityProfile::standard(EntropyPath::VonNeumann);
    let small = TransmissionBudget::new(1e3, 0.5, 0.1).unwrap();
    let r = key_length(0.5, &small, &profile, 0.0).unwrap();
    assert_eq!(r.ell, Some(0.0));
    assert_eq!(r.rate, 0.0);
    let big = TransmissionBudget::new(1e10, 0.5, 0.1).unwrap();
    let r = key_length(0.9, &big, &profile, 0.1 * big.n).unwrap();
    let ell = r.ell.unwrap();
    assert_eq!(ell, ell.floor());
    assert!(ell > 0.0);
    assert!((r.rate * 1e10 - ell).abs() <= 0.5);
    assert_eq!(r.recomputed_rate(), r.rate);
}

#[test]
fn min_entropy_turns_positive_first_without_noise() {
    // No δ term: the min-entropy rate is already positive where the
    // von Neumann bracket is still negative.
    let inst = bb84(0.0, 0.5).unwrap();
    let s = RateSettings::finite(3e4);
    let vn = rate(&inst, &s, EntropyPath::VonNeumann).unwrap().result.rate;
    let min = rate(&inst, &s, EntropyPath::MinEntropy).unwrap().result.rate;
    assert!(min > 0.01 && vn == 0.0, "min {min} vs vn {vn}");
}

#[test]
fn coherent_penalty_examples() {
    let profile = SecurityProfile::standard(EntropyPath::VonNeumann);
    let budget = TransmissionBudget::asymptotic(0.5, 0.0).unwrap();
    let mut r = key_length(1.0, &budget, &profile, 0.0).unwrap();
    r.rate = 0.5;
    let c = coherent_correction(&r, 1e10, 4);
    let exact = 0.5 - 510.0 * (1e10f64 + 1.0).log2() / 1e10;
    assert!((c.rate - exact).abs() < 1e-15);
    assert!((c.rate - 0.4999983).abs() < 5e-8);
    assert_eq!(coherent_penalty(f64::INFINITY, 4), 0.0);
    let mut prev = f64::INFINITY;
    for k in 1..40 {
        let n = 3.0 * 1.7f64.powi(k);
        let p = coherent_penalty(n, 4);
        assert!(p < prev, "not decreasing at N={n}");
        prev = p;
    }
}
