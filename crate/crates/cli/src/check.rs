//! Quick self-test corpus behind `qkdfk check`.

use qkdfk_core::finitekey::{coherent_correction, deviation, KeyRateResult};
use qkdfk_core::matqi::{fidelity_oracle, ket_from, HermitianMatrix};
use qkdfk_core::minent::root_fidelity_sdp;
use qkdfk_core::pipeline::{min_rate, vn_rate, PathOutcome, RateSettings};
use qkdfk_core::protocols::{bb84, bb84_min_reference, bb84_vn_reference, plob};
use qkdfk_core::sdp::solve;

use crate::optimize::brent_minimize;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, expected: f64, tol: f64) -> CheckResult {
    let err = (value - expected).abs();
    CheckResult { name, passed: err <= tol, detail: format!("got {value:.9}, expected {expected:.9} (tol {tol:.0e})") }
}

fn failed(name: &'static str, e: impl std::fmt::Display) -> CheckResult {
    CheckResult { name, passed: false, detail: e.to_string() }
}

fn keyterm(o: &PathOutcome, p_pass: f64) -> f64 {
    o.entropy * p_pass
}

pub fn run_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let s = RateSettings::asymptotic();
    match bb84(0.025, 0.5) {
        Ok(inst) => {
            out.push(match vn_rate(&inst, &s) {
                Ok(o) => check("bb84 von Neumann key term, Q = 5%", keyterm(&o, inst.p_pass), bb84_vn_reference(0.05, 0.5), 1e-3),
                Err(e) => failed("bb84 von Neumann key term, Q = 5%", e),
            });
            out.push(match min_rate(&inst, &s) {
                Ok(o) => check("bb84 min-entropy key term, Q = 5%", keyterm(&o, inst.p_pass), bb84_min_reference(0.05, 0.5), 1e-3),
                Err(e) => failed("bb84 min-entropy key term, Q = 5%", e),
            });
        }
        Err(e) => out.push(failed("bb84 instance", e)),
    }
    out.push(match deviation(1e6, 2, 1e-10) {
        Ok(d) => check("estimation deviation m = 1e6", d, 0.004292, 5e-7),
        Err(e) => failed("estimation deviation m = 1e6", e),
    });
    let r = KeyRateResult { rate: 0.5, ..dummy_result() };
    out.push(check("coherent-attack correction", coherent_correction(&r, 1e10, 4).rate, 0.4999983, 1e-7));
    out.push(match plob(0.5) {
        Ok(v) => check("repeaterless bound at eta = 1/2", v, 1.0, 1e-15),
        Err(e) => failed("repeaterless bound at eta = 1/2", e),
    });
    out.push(fidelity_check());
    out.push(match brent_minimize(|x| (x - 0.3) * (x - 0.3), (0.0, 1.0), 1e-6) {
        Ok((x, _)) => check("Brent minimization of (x - 0.3)^2", x, 0.3, 1e-6),
        Err(e) => failed("Brent minimization of (x - 0.3)^2", e),
    });
    out
}

fn fidelity_check() -> CheckResult {
    let name = "fidelity SDP against the spectral oracle";
    let rho = HermitianMatrix::diag(&[0.6, 0.3, 0.1]);
    let v = ket_from(&[0.8, 0.6, 0.0]);
    let sigma = HermitianMatrix::projector(&v).scale(0.5).add(&HermitianMatrix::identity(3).scale(0.5 / 3.0));
    let run = || -> qkdfk_core::Result<(f64, f64)> {
        let sol = solve(&root_fidelity_sdp(&rho, &sigma)?, 1e-9)?;
        Ok((sol.primal_value, fidelity_oracle(&rho, &sigma)?.sqrt()))
    };
    match run() {
        Ok((a, b)) => check(name, a, b, 1e-6),
        Err(e) => failed(name, e),
    }
}

fn dummy_result() -> KeyRateResult {
    use qkdfk_core::finitekey::{AttackModel, EntropyPath, RateComponents};
    KeyRateResult {
        ell: None,
        rate: 0.0,
        path: EntropyPath::VonNeumann,
        attack_model: AttackModel::Collective,
        components: RateComponents { entropy: 0.0, delta: 0.0, leak_per_signal: 0.0, pa_term: 0.0, cor_term: 0.0, n: 1e10 },
        n_total: 1e10,
        eps_sec: 1e-10,
    }
}
