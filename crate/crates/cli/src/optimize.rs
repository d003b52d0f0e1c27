//! Derivative-free scalar minimization for the inner θ / q optimizations.

use std::fmt;

pub const MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct BracketError(pub String);

impl fmt::Display for BracketError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid bracket: {}", self.0)
    }
}

impl std::error::Error for BracketError {}

fn check_bracket(lo: f64, hi: f64, tol: f64) -> Result<(), BracketError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(BracketError(format!("need finite lo < hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(BracketError(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Brent's method (golden section with parabolic steps) on [lo, hi],
/// started from the golden-section point.
pub fn brent_minimize(f: impl FnMut(f64) -> f64, bracket: (f64, f64), tol: f64) -> Result<(f64, f64), BracketError> {
    let (lo, hi) = bracket;
    check_bracket(lo, hi, tol)?;
    let x0 = lo + GOLD * (hi - lo);
    brent_from(f, lo, hi, x0, tol)
}

/// Runs Brent from the three quartile points of the bracket and keeps the
/// best result, which guards against mildly multimodal objectives.
pub fn brent_multistart(mut f: impl FnMut(f64) -> f64, bracket: (f64, f64), tol: f64) -> Result<(f64, f64), BracketError> {
    let (lo, hi) = bracket;
    check_bracket(lo, hi, tol)?;
    let mut best: Option<(f64, f64)> = None;
    for k in 1..=3 {
        let x0 = lo + 0.25 * k as f64 * (hi - lo);
        let r = brent_from(&mut f, lo, hi, x0, tol)?;
        if best.map_or(true, |b| r.1 < b.1) {
            best = Some(r);
        }
    }
    Ok(best.expect("three starts"))
}

const GOLD: f64 = 0.381_966_011_250_105_1;

fn brent_from(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, x0: f64, tol: f64) -> Result<(f64, f64), BracketError> {
    if !(lo..=hi).contains(&x0) {
        return Err(BracketError(format!("start {x0} outside [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..MAX_ITER {
        let xm = 0.5 * (a + b);
        let tol1 = f64::EPSILON.sqrt() * x.abs() * 1e-3 + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x < xm { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Ok((x, fx))
}
