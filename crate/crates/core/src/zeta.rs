//! Hurwitz zeta `zeta(s, q) = sum_{k>=0} (k + q)^(-s)` for `s > 1`, `q > 0`.
//!
//! Terms are summed directly until the shifted argument reaches
//! [`SHIFT`]; the remaining tail is the Euler–Maclaurin integral plus
//! Bernoulli corrections, which keeps the relative error near machine
//! precision for exponents used in power-law fitting.

use crate::{Error, Result};

const SHIFT: f64 = 24.0;

/// `B_{2j} / (2j)!` for `j = 1..=10`.
const BERNOULLI_OVER_FACTORIAL: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
    -3617.0 / 10_670_622_842_880_000.0,
    43_867.0 / 5_109_094_217_170_944_000.0,
    -174_611.0 / 802_857_662_698_291_200_000.0,
];

pub fn hurwitz_zeta(s: f64, q: f64) -> Result<f64> {
    if !(s > 1.0 && s.is_finite()) {
        return Err(Error::Domain(format!("zeta exponent must be > 1, got {s}")));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Domain(format!("zeta offset must be > 0, got {q}")));
    }
    Ok(hurwitz_unchecked(s, q))
}

/// [`hurwitz_zeta`] without argument validation, for hot loops.
#[inline]
pub(crate) fn hurwitz_unchecked(s: f64, q: f64) -> f64 {
    let mut x = q;
    let mut head = 0.0;
    while x < SHIFT {
        head += x.powf(-s);
        x += 1.0;
    }
    head + tail(s, x)
}

/// `sum_{k>=0} (x + k)^(-s)` by Euler–Maclaurin, valid for `x >= SHIFT`.
#[inline]
pub(crate) fn tail(s: f64, x: f64) -> f64 {
    let ln_x = x.ln();
    let xs = (-s * ln_x).exp();
    let mut sum = x * xs / (s - 1.0) + 0.5 * xs;
    let inv_x2 = 1.0 / (x * x);
    // s (s+1) ... (s+2j-2) x^(-s-2j+1)
    let mut term = s * xs / x;
    for (j, b) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let delta = b * term;
        sum += delta;
        if delta.abs() <= 1e-17 * sum {
            break;
        }
        let k = 2.0 * (j as f64 + 1.0);
        term *= (s + k - 1.0) * (s + k) * inv_x2;
    }
    sum
}
