//! Closed-form probabilities on the 2-sphere.
//!
//! On `S^2` the dot product of two independent uniform directions is uniform
//! on `[-1, 1]`, so the set `{x' : (x, x') >= t}` covers a fraction
//! `(1 - t) / 2` of the sphere. Integrating that cap fraction against the
//! Pareto density gives every expression below.
//!
//! All functions here implicitly assume `d = 3`; callers holding a
//! [`ModelConfig`](crate::ModelConfig) should check
//! [`require_analytic`](crate::ModelConfig::require_analytic) first.

use std::fmt;
use std::sync::Arc;

use crate::model::{LinkFn, ParetoParams};
use crate::quad;
use crate::zeta;
use crate::{Error, Result};

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("theta must be finite and >= 0, got {theta}")))
    }
}

fn check_weight(w: f64, pareto: &ParetoParams) -> Result<()> {
    if w.is_finite() && w >= pareto.scale() {
        Ok(())
    } else {
        Err(Error::Domain(format!("weight {w} is below the Pareto scale w0 = {}", pareto.scale())))
    }
}

fn check_exponents(alpha: f64, beta: f64) -> Result<()> {
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
        }
    }
    Ok(())
}

fn pairs(n: u64) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Probability that a node of weight `w` links to a random node.
pub fn p_edge_given_weight(w: f64, pareto: &ParetoParams, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    check_weight(w, pareto)?;
    let (a, w0) = (pareto.shape(), pareto.scale());
    Ok(if w * w0 > theta {
        0.5 * (1.0 - a * theta / (w * (a + 1.0) * w0))
    } else {
        0.5 / (a + 1.0) * (w0 * w / theta).powf(a)
    })
}

/// Probability that two random nodes are linked.
pub fn p_edge(pareto: &ParetoParams, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let (a, w0) = (pareto.shape(), pareto.scale());
    let w0sq = w0 * w0;
    let c = a * a / ((a + 1.0) * (a + 1.0));
    Ok(if theta < w0sq {
        0.5 - 0.5 * c * theta / w0sq
    } else {
        0.5 * (w0sq / theta).powf(a) * (a * (theta / w0sq).ln() / (a + 1.0) - c + 1.0)
    })
}

/// `E M = n (n - 1) / 2 * P_e`.
pub fn expected_edges(n: u64, pareto: &ParetoParams, theta: f64) -> Result<f64> {
    Ok(pairs(n) * p_edge(pareto, theta)?)
}

/// Probability that a random centre links to both of two independent random
/// nodes: `int P_e(w)^2 f(w) dw`.
pub fn p_wedge(pareto: &ParetoParams, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let (a, w0) = (pareto.shape(), pareto.scale());
    let w0sq = w0 * w0;
    let a1sq = (a + 1.0) * (a + 1.0);
    let cubic = a * a * a / (a1sq * (a + 2.0));
    Ok(if theta < w0sq {
        let t = theta / w0sq;
        0.25 - 0.5 * a * a * t / a1sq + 0.25 * cubic * t * t
    } else {
        let r = (w0sq / theta).powf(a);
        0.25 * (r - r * r) / a1sq + 0.25 * r * (1.0 - 2.0 * a * a / a1sq + cubic)
    })
}

/// `Var(M)` of the edge count.
///
/// Edge indicators are independent unless the two pairs share a node; there
/// are `n (n-1) (n-2)` ordered pairs of distinct pairs sharing exactly one
/// node, each contributing the covariance `P_< - P_e^2`.
pub fn variance_edges(n: u64, pareto: &ParetoParams, theta: f64) -> Result<f64> {
    let pe = p_edge(pareto, theta)?;
    let pw = p_wedge(pareto, theta)?;
    let nf = n as f64;
    let wedges = if n >= 3 { nf * (nf - 1.0) * (nf - 2.0) } else { 0.0 };
    Ok(pairs(n) * pe * (1.0 - pe) + wedges * (pw - pe * pe))
}

fn feasibility(target: f64, total_pairs: f64) -> Result<()> {
    let bound = 0.5 * total_pairs;
    if !(target.is_finite() && target > 0.0 && target < bound) {
        return Err(Error::Infeasible { target, bound, pairs: total_pairs });
    }
    Ok(())
}

/// Bisection in log-space for a strictly decreasing `f` with `f(lo) >= target`.
fn solve_decreasing(f: impl Fn(f64) -> Result<f64>, target: f64, lo: f64) -> Result<f64> {
    let mut lo = lo;
    let mut hi = 2.0 * lo;
    let mut expansions = 0;
    while f(hi)? >= target {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 2000 || !hi.is_finite() {
            return Err(Error::NumericConvergence(format!("no threshold bracket for target {target:e}")));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo)?, f(hi)?);
    Ok(if (flo - target).abs() <= (fhi - target).abs() { lo } else { hi })
}

/// Threshold `theta` with `expected_edges(n, theta) = target_edges`.
///
/// Feasible targets satisfy `0 < target_edges < n (n - 1) / 4`, i.e. a target
/// edge probability in `(0, 1/2)`.
pub fn calibrate_theta(n: u64, pareto: &ParetoParams, target_edges: f64) -> Result<f64> {
    let total = pairs(n);
    feasibility(target_edges, total)?;
    let p = target_edges / total;
    let (a, w0) = (pareto.shape(), pareto.scale());
    let w0sq = w0 * w0;
    if p >= p_edge(pareto, w0sq)? {
        let theta = (1.0 - 2.0 * p) * w0sq * (a + 1.0) * (a + 1.0) / (a * a);
        return Ok(theta.clamp(0.0, w0sq));
    }
    solve_decreasing(|t| p_edge(pareto, t), p, w0sq)
}

/// `theta(n) = D n^(1/a)`.
pub fn theta_powerlaw_schedule(n: u64, coef: f64, a: f64) -> Result<f64> {
    if !(coef.is_finite() && coef > 0.0) {
        return Err(Error::Domain(format!("schedule coefficient D must be > 0, got {coef}")));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Domain(format!("Pareto shape must be > 0, got {a}")));
    }
    Ok(coef * (n as f64).powf(1.0 / a))
}

/// Exact `E M(n)` under `theta(n) = D n^(1/a)`, valid once `D n^(1/a) >= w0^2`:
///
/// `(n-1) w0^(2a) / (4 D^a) * (ln n / (a+1) - a^2/(a+1)^2 + 1 + a (ln D - 2 ln w0) / (a+1))`.
pub fn expected_edges_linlog(n: u64, coef: f64, pareto: &ParetoParams) -> Result<f64> {
    let (a, w0) = (pareto.shape(), pareto.scale());
    let theta = theta_powerlaw_schedule(n, coef, a)?;
    if theta < w0 * w0 {
        return Err(Error::Domain(format!(
            "n = {n} is below the linearithmic validity region n >= w0^(2a) / D^a = {}",
            (w0 * w0 / coef).powf(a)
        )));
    }
    let nf = n as f64;
    let a1 = a + 1.0;
    Ok((nf - 1.0) * (w0 * w0 / coef).powf(a) / 4.0
        * (nf.ln() / a1 - a * a / (a1 * a1) + 1.0 + a * (coef.ln() - 2.0 * w0.ln()) / a1))
}

/// Leading coefficient of `E M(n) ~ A n ln n` under `theta(n) = D n^(1/a)`.
pub fn linlog_leading_coefficient(coef: f64, pareto: &ParetoParams) -> f64 {
    let (a, w0) = (pareto.shape(), pareto.scale());
    (w0 * w0 / coef).powf(a) / (4.0 * (a + 1.0))
}

/// Weight at which the two branches of the directed `P_e(w)` meet: the lower
/// integration limit `max(w0, (theta / w^alpha)^(1/beta))` switches there.
pub fn directed_branch_point(pareto: &ParetoParams, theta: f64, alpha: f64, beta: f64) -> f64 {
    (theta / pareto.scale().powf(beta)).powf(1.0 / alpha)
}

/// Probability that a node of weight `w` has an arc to a random node when
/// arcs require `(w^alpha x, w'^beta x') >= theta`.
pub fn p_edge_given_weight_directed(
    w: f64,
    pareto: &ParetoParams,
    theta: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    check_theta(theta)?;
    check_weight(w, pareto)?;
    check_exponents(alpha, beta)?;
    let (a, w0) = (pareto.shape(), pareto.scale());
    let reach = w.powf(alpha) * w0.powf(beta);
    Ok(if reach > theta {
        0.5 * (1.0 - a * theta / (reach * (a + beta)))
    } else {
        0.5 * beta / (a + beta) * (reach / theta).powf(a / beta)
    })
}

/// Probability of the arc `i -> j` for two random nodes.
pub fn p_edge_directed(pareto: &ParetoParams, theta: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_theta(theta)?;
    check_exponents(alpha, beta)?;
    let (a, w0) = (pareto.shape(), pareto.scale());
    let w0ab = w0.powf(alpha + beta);
    if theta <= w0ab {
        return Ok(0.5 - 0.5 * a * a * theta / ((a + alpha) * (a + beta) * w0ab));
    }
    let s = directed_branch_point(pareto, theta, alpha, beta);
    // Below s: int_{w0}^{s} c w^(a alpha/beta - a - 1) dw.
    let g = a * (alpha - beta) / beta;
    let ln_ratio = (s / w0).ln();
    let power_integral = if g == 0.0 {
        ln_ratio
    } else {
        w0.powf(g) * (g * ln_ratio).exp_m1() / g
    };
    let low = 0.5 * beta * a / (a + beta) * w0.powf(2.0 * a) * theta.powf(-a / beta) * power_integral;
    let tail = (w0 / s).powf(a);
    let high = 0.5 * tail
        - 0.5 * a * a * theta / ((a + beta) * (a + alpha) * w0.powf(beta)) * tail * s.powf(-alpha);
    Ok(low + high)
}

/// Expected number of arcs, `n (n - 1) P_arc`.
pub fn expected_arcs(n: u64, pareto: &ParetoParams, theta: f64, alpha: f64, beta: f64) -> Result<f64> {
    Ok(2.0 * pairs(n) * p_edge_directed(pareto, theta, alpha, beta)?)
}

/// Threshold giving `target_arcs` expected arcs; feasible for targets in
/// `(0, n (n - 1) / 2)`.
pub fn calibrate_theta_directed(
    n: u64,
    pareto: &ParetoParams,
    alpha: f64,
    beta: f64,
    target_arcs: f64,
) -> Result<f64> {
    check_exponents(alpha, beta)?;
    let total = 2.0 * pairs(n);
    feasibility(target_arcs, total)?;
    let p = target_arcs / total;
    let a = pareto.shape();
    let w0ab = pareto.scale().powf(alpha + beta);
    if p >= p_edge_directed(pareto, w0ab, alpha, beta)? {
        let theta = (1.0 - 2.0 * p) * (a + alpha) * (a + beta) * w0ab / (a * a);
        return Ok(theta.clamp(0.0, w0ab));
    }
    solve_decreasing(|t| p_edge_directed(pareto, t, alpha, beta), p, w0ab)
}

/// Fraction of the sphere where `h((x, x')) >= t`.
fn link_cap_fraction(h: &LinkFn, t: f64) -> f64 {
    if t <= h.min_value() {
        1.0
    } else if t > h.max_value() {
        0.0
    } else {
        0.5 * (1.0 - h.inverse(t).unwrap_or(1.0))
    }
}

/// Link-function analogue of [`p_edge_given_weight_directed`]: arcs require
/// `w^alpha w'^beta h((x, x')) >= theta` with `h` strictly increasing.
///
/// The partner weight is integrated through its CDF, `u = (w0 / w')^a`, which
/// maps the Pareto measure to Lebesgue measure on `[0, 1]`; the threshold seen
/// by the cap is then `T u^(beta/a)` with `T = theta / (w^alpha w0^beta)`.
/// The cap fraction is 1 below `u_r` (where `T u^(beta/a) = h(-1)`), 0 above
/// `u_q` (where it reaches `h(1)`), and only the middle panel needs
/// quadrature.
pub fn p_edge_given_weight_linkfn(
    w: f64,
    pareto: &ParetoParams,
    theta: f64,
    alpha: f64,
    beta: f64,
    h: &LinkFn,
) -> Result<f64> {
    check_theta(theta)?;
    check_weight(w, pareto)?;
    check_exponents(alpha, beta)?;
    if !h.is_strictly_increasing() {
        return Err(Error::UnsupportedAnalytics(format!("link function {h} is not strictly increasing")));
    }
    if theta == 0.0 {
        return Ok(link_cap_fraction(h, 0.0));
    }
    let a = pareto.shape();
    let big_t = theta / (w.powf(alpha) * pareto.scale().powf(beta));
    let (r, q) = (h.min_value(), h.max_value());
    let crossing = |level: f64| if level > 0.0 { (level / big_t).powf(a / beta).min(1.0) } else { 0.0 };
    let (u_r, u_q) = (crossing(r), crossing(q));
    let middle = quad::integrate(
        |u| link_cap_fraction(h, big_t * u.powf(beta / a)),
        u_r,
        u_q,
        1e-10,
        1e-300,
    )?;
    Ok(u_r + middle)
}

/// Normalised discrete power law `k^(-s) / zeta(s)` on `k >= 1`.
pub fn degree_pmf_reference(k: u64, exponent: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("degree must be >= 1".into()));
    }
    if exponent.is_nan() || exponent <= 1.0 {
        return Err(Error::Domain(format!("power-law exponent must be > 1, got {exponent}")));
    }
    Ok((k as f64).powf(-exponent) / zeta::hurwitz_zeta(exponent, 1.0)?)
}

pub type TargetFn = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

/// How the threshold evolves with the node count.
#[derive(Clone)]
pub enum GrowthSchedule {
    Constant(f64),
    /// `theta(n) = D n^(1/a)`.
    PowerLaw { coef: f64 },
    /// `theta(n)` solved so that `E M(n) = R(n)`.
    CalibratedTarget(TargetFn),
}

impl fmt::Debug for GrowthSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrowthSchedule::Constant(t) => write!(f, "Constant({t})"),
            GrowthSchedule::PowerLaw { coef } => write!(f, "PowerLaw {{ coef: {coef} }}"),
            GrowthSchedule::CalibratedTarget(_) => write!(f, "CalibratedTarget(..)"),
        }
    }
}

impl GrowthSchedule {
    pub fn power_law(coef: f64) -> Result<Self> {
        if !(coef.is_finite() && coef > 0.0) {
            return Err(Error::InvalidParameter(format!("schedule coefficient D must be > 0, got {coef}")));
        }
        Ok(GrowthSchedule::PowerLaw { coef })
    }

    pub fn target(f: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        GrowthSchedule::CalibratedTarget(Arc::new(f))
    }

    /// `R(n) = c n`.
    pub fn linear_target(c: f64) -> Self {
        Self::target(move |n| c * n as f64)
    }

    pub fn theta(&self, n: u64, pareto: &ParetoParams) -> Result<f64> {
        match self {
            GrowthSchedule::Constant(t) => {
                check_theta(*t)?;
                Ok(*t)
            }
            GrowthSchedule::PowerLaw { coef } => {
                let theta = theta_powerlaw_schedule(n, *coef, pareto.shape())?;
                let w0sq = pareto.scale() * pareto.scale();
                if theta < w0sq {
                    return Err(Error::Domain(format!(
                        "n = {n} gives theta = {theta} below w0^2 = {w0sq}; the power-law schedule needs n >= {}",
                        (w0sq / coef).powf(pareto.shape()).ceil()
                    )));
                }
                Ok(theta)
            }
            GrowthSchedule::CalibratedTarget(r) => calibrate_theta(n, pareto, r(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p3() -> ParetoParams {
        ParetoParams::new(3.0, 1.0).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn edge_given_weight_values() {
        let p = p3();
        assert_eq!(p_edge_given_weight(5.0, &p, 0.0).unwrap(), 0.5);
        assert!(close(p_edge_given_weight(2.0, &p, 10.0).unwrap(), 0.001, 1e-14));
        assert!(close(p_edge_given_weight(20.0, &p, 10.0).unwrap(), 0.3125, 1e-14));
        assert!(close(p_edge_given_weight(10.0, &p, 10.0).unwrap(), 0.125, 1e-14));
        // The other branch evaluated at the boundary.
        assert!(close(0.5 * (1.0 - 3.0 * 10.0 / (10.0 * 4.0)), 0.125, 1e-15));
        assert!(p_edge_given_weight(0.5, &p, 1.0).is_err());
        assert!(p_edge_given_weight(2.0, &p, -1.0).is_err());
    }

    #[test]
    fn edge_probability_values() {
        let p = p3();
        assert_eq!(p_edge(&p, 0.0).unwrap(), 0.5);
        assert!(close(p_edge(&p, 10.0).unwrap(), 1.082_219_5e-3, 1e-7));
        assert!(close(p_edge(&p, 1.0).unwrap(), 0.21875, 1e-15));
        assert!(close(0.5 - 0.5 * 9.0 / 16.0, 0.21875, 1e-15));
        assert!(p_edge(&p, -1.0).is_err());
    }

    #[test]
    fn expected_edges_values() {
        let p = p3();
        assert_eq!(expected_edges(1, &p, 5.0).unwrap(), 0.0);
        assert_eq!(expected_edges(2, &p, 0.0).unwrap(), 0.5);
        let em = expected_edges(300_000, &p, 66.9).unwrap();
        assert!((em / 2.693e5 - 1.0).abs() < 5e-3, "{em}");
    }

    #[test]
    fn wedge_values() {
        let p = p3();
        assert_eq!(p_wedge(&p, 0.0).unwrap(), 0.25);
        assert!(close(p_wedge(&p, 0.5).unwrap(), 0.130_468_75, 1e-12));
        assert!(close(p_wedge(&p, 10.0).unwrap(), 6.873e-5, 1e-3));
    }

    #[test]
    fn variance_small_cases() {
        let p = p3();
        assert!(close(variance_edges(3, &p, 0.0).unwrap(), 0.75, 1e-15));
        for theta in [0.3, 4.0] {
            let pe = p_edge(&p, theta).unwrap();
            assert!(close(variance_edges(2, &p, theta).unwrap(), pe * (1.0 - pe), 1e-15));
        }
    }

    #[test]
    fn variance_matches_three_node_enumeration() {
        // For three nodes M = I12 + I13 + I23: three variances and six ordered
        // covariances, each between two pairs sharing one node.
        let p = p3();
        let theta = 2.5;
        let pe = p_edge(&p, theta).unwrap();
        let pw = p_wedge(&p, theta).unwrap();
        let expect = 3.0 * pe * (1.0 - pe) + 6.0 * (pw - pe * pe);
        assert!(close(variance_edges(3, &p, theta).unwrap(), expect, 1e-14));
    }

    #[test]
    fn calibration_examples() {
        let p = p3();
        let n = 100;
        let theta = calibrate_theta(n, &p, 0.25 * 4950.0).unwrap();
        assert!(close(theta, 8.0 / 9.0, 1e-14));
        assert!(close(p_edge(&p, 8.0 / 9.0).unwrap(), 0.25, 1e-14));

        let target = expected_edges(n, &p, 10.0).unwrap();
        let back = calibrate_theta(n, &p, target).unwrap();
        assert!((back - 10.0).abs() < 1e-9);

        let near_half = calibrate_theta(n, &p, 4950.0 / 2.0 - 1e-9).unwrap();
        assert!(near_half < 1e-10);

        for bad in [0.0, -1.0, 2475.0, 1e9] {
            assert!(matches!(calibrate_theta(n, &p, bad), Err(Error::Infeasible { .. })));
        }
    }

    #[test]
    fn calibration_accuracy() {
        let p = ParetoParams::new(2.2, 1.3).unwrap();
        let n = 10_000;
        for exp10 in -6..0 {
            let prob = 10f64.powi(exp10) * 4.9;
            let target = prob * pairs(n);
            let theta = calibrate_theta(n, &p, target).unwrap();
            let em = expected_edges(n, &p, theta).unwrap();
            assert!(((em - target) / target).abs() <= 1e-10, "{prob}: {em} vs {target}");
        }
    }

    #[test]
    fn powerlaw_schedule_values() {
        assert!(close(theta_powerlaw_schedule(8, 1.0, 3.0).unwrap(), 2.0, 1e-15));
        assert!(close(theta_powerlaw_schedule(10, 2.0, 1.0).unwrap(), 20.0, 1e-15));
        assert!((theta_powerlaw_schedule(300_000, 1.0, 3.0).unwrap() - 66.943).abs() < 1e-3);
        assert!(theta_powerlaw_schedule(10, 0.0, 1.0).is_err());
    }

    #[test]
    fn linlog_formula() {
        let p = p3();
        let em = expected_edges_linlog(300_000, 1.0, &p).unwrap();
        assert!((em / 2.6928e5 - 1.0).abs() < 1e-4, "{em}");
        for &(a, w0, coef) in &[(3.0, 1.0, 1.0), (2.0, 1.5, 0.7), (1.5, 0.8, 3.0), (4.0, 1.0, 0.5)] {
            let p = ParetoParams::new(a, w0).unwrap();
            for n in [1_000u64, 30_000, 1_000_000, 50_000_000] {
                let theta = theta_powerlaw_schedule(n, coef, a).unwrap();
                if theta < w0 * w0 {
                    assert!(expected_edges_linlog(n, coef, &p).is_err());
                    continue;
                }
                let exact = expected_edges_linlog(n, coef, &p).unwrap();
                let general = expected_edges(n, &p, theta).unwrap();
                assert!(close(exact, general, 1e-12), "{a} {w0} {coef} {n}: {exact} vs {general}");
            }
        }
        let n = 100_000_000u64;
        let ratio = expected_edges_linlog(n, 1.0, &p).unwrap() / (n as f64 * (n as f64).ln());
        assert!((ratio * 16.0 - 1.0).abs() < 0.15);
        assert!(close(linlog_leading_coefficient(1.0, &p), 1.0 / 16.0, 1e-15));
        assert!(expected_edges_linlog(1, 0.5, &p).is_err());
    }

    #[test]
    fn directed_weight_probability() {
        let p = p3();
        for &theta in &[0.0, 0.3, 1.0, 10.0, 250.0] {
            for &w in &[1.0, 1.7, 4.0, 10.0, 31.0] {
                let und = p_edge_given_weight(w, &p, theta).unwrap();
                let dir = p_edge_given_weight_directed(w, &p, theta, 1.0, 1.0).unwrap();
                assert!(close(dir, und, 1e-14) || (dir - und).abs() < 1e-300);
            }
        }
        let v = p_edge_given_weight_directed(2.0, &p, 10.0, 1.0, 2.0).unwrap();
        assert!((v - 0.017_889).abs() < 1e-6, "{v}");
    }

    #[test]
    fn directed_branch_continuity() {
        let p = ParetoParams::new(2.5, 1.2).unwrap();
        for &(theta, alpha, beta) in &[(10.0, 1.0, 2.0), (40.0, 2.0, 1.0), (7.0, 0.5, 1.5)] {
            let s = directed_branch_point(&p, theta, alpha, beta);
            let (a, w0) = (p.shape(), p.scale());
            let above = 0.5 * (1.0 - a * theta / (s.powf(alpha) * (a + beta) * w0.powf(beta)));
            let below = p_edge_given_weight_directed(s, &p, theta, alpha, beta).unwrap();
            assert!((above - below).abs() < 1e-12);
        }
    }

    #[test]
    fn directed_edge_probability_matches_quadrature() {
        for &(a, w0) in &[(3.0, 1.0), (2.0, 1.4)] {
            let p = ParetoParams::new(a, w0).unwrap();
            for &(alpha, beta) in &[(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (0.7, 1.3)] {
                for &theta in &[0.2, 1.0, 5.0, 80.0] {
                    let s = directed_branch_point(&p, theta, alpha, beta).max(w0);
                    let f = |u: f64| {
                        let w = p.quantile(u);
                        if !w.is_finite() {
                            return 0.5;
                        }
                        p_edge_given_weight_directed(w.max(w0), &p, theta, alpha, beta).unwrap()
                    };
                    let us = 1.0 - p.survival(s);
                    let numeric = quad::integrate_panels(f, &[0.0, us, 1.0], 1e-12, 1e-300).unwrap();
                    let closed = p_edge_directed(&p, theta, alpha, beta).unwrap();
                    assert!(close(closed, numeric, 1e-9), "{a} {alpha} {beta} {theta}: {closed} vs {numeric}");
                }
            }
            for &theta in &[0.3, 1.0, 4.0, 50.0] {
                assert!(close(p_edge_directed(&p, theta, 1.0, 1.0).unwrap(), p_edge(&p, theta).unwrap(), 1e-12));
            }
        }
    }

    #[test]
    fn directed_calibration_round_trip() {
        let p = p3();
        let n = 300_000;
        for target in [1e3, 3e5, 1e7, 2e10] {
            let theta = calibrate_theta_directed(n, &p, 1.0, 2.0, target).unwrap();
            let got = expected_arcs(n, &p, theta, 1.0, 2.0).unwrap();
            assert!(((got - target) / target).abs() < 1e-10);
        }
        assert!(calibrate_theta_directed(10, &p, 1.0, 2.0, 45.0).is_err());
    }

    #[test]
    fn linkfn_identity_reduces_to_directed() {
        let p = p3();
        for &(alpha, beta) in &[(1.0, 1.0), (1.0, 2.0), (2.0, 0.5)] {
            for &theta in &[0.0, 0.5, 3.0, 10.0, 200.0] {
                for &w in &[1.0, 2.0, 7.5, 40.0] {
                    let closed = p_edge_given_weight_directed(w, &p, theta, alpha, beta).unwrap();
                    let numeric = p_edge_given_weight_linkfn(w, &p, theta, alpha, beta, &LinkFn::Identity).unwrap();
                    assert!((closed - numeric).abs() < 1e-8, "{alpha} {beta} {theta} {w}: {closed} vs {numeric}");
                }
            }
        }
    }

    #[test]
    fn linkfn_positive_range_has_full_sphere_part() {
        // exp on [-1, 1] stays within [1/e, e]: a small enough threshold links to everything.
        let p = p3();
        let v = p_edge_given_weight_linkfn(5.0, &p, 0.1, 1.0, 1.0, &LinkFn::Exp).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v0 = p_edge_given_weight_linkfn(5.0, &p, 0.0, 1.0, 1.0, &LinkFn::Exp).unwrap();
        assert_eq!(v0, 1.0);
    }

    #[test]
    fn linkfn_vanishes_for_large_thresholds() {
        let p = p3();
        let mut last = 1.0;
        for theta in [1e1, 1e2, 1e3, 1e4, 1e6] {
            let v = p_edge_given_weight_linkfn(2.0, &p, theta, 1.0, 1.0, &LinkFn::Exp).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-12);
    }

    #[test]
    fn linkfn_rejects_even_powers() {
        let p = p3();
        assert!(matches!(
            p_edge_given_weight_linkfn(2.0, &p, 1.0, 1.0, 1.0, &LinkFn::EvenPower { m: 1 }),
            Err(Error::UnsupportedAnalytics(_))
        ));
    }

    #[test]
    fn pmf_reference() {
        let v = degree_pmf_reference(1, 2.0).unwrap();
        assert!(close(v, 6.0 / (std::f64::consts::PI * std::f64::consts::PI), 1e-14));
        assert!(degree_pmf_reference(1, 1.0).is_err());
        assert!(degree_pmf_reference(0, 2.0).is_err());
        // Head sum plus the zeta tail beyond it is exactly one.
        for s in [1.5, 2.0, 3.0] {
            let head: f64 = (1..=10_000u64).map(|k| degree_pmf_reference(k, s).unwrap()).sum();
            let tail = zeta::hurwitz_zeta(s, 10_001.0).unwrap() / zeta::hurwitz_zeta(s, 1.0).unwrap();
            assert!((head + tail - 1.0).abs() < 1e-8);
        }
        let far = degree_pmf_reference(1_000_000, 1.5).unwrap();
        assert!(far > 0.0 && far.is_finite());
    }

    #[test]
    fn theorem3_style_schedule() {
        // R(n) = n is sub-linearithmic, so theta(n) / n^(1/a) must keep growing.
        let p = p3();
        let ratios: Vec<f64> = [1_000u64, 10_000, 100_000, 1_000_000]
            .iter()
            .map(|&n| calibrate_theta(n, &p, n as f64).unwrap() / (n as f64).cbrt())
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
    }

    #[test]
    fn schedule_validity() {
        let p = p3();
        let s = GrowthSchedule::power_law(0.5).unwrap();
        assert!(s.theta(4, &p).is_err());
        assert!(s.theta(10_000, &p).is_ok());
        let t = GrowthSchedule::linear_target(5.0);
        let theta = t.theta(1000, &p).unwrap();
        assert!(close(expected_edges(1000, &p, theta).unwrap(), 5000.0, 1e-10));
        assert!(GrowthSchedule::linear_target(1e6).theta(100, &p).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_theta(a in 0.5f64..5.0, w0 in 0.3f64..3.0, t1 in 0.0f64..50.0, dt in 1e-3f64..50.0) {
            let p = ParetoParams::new(a, w0).unwrap();
            let t2 = t1 + dt;
            prop_assert!(p_edge(&p, t2).unwrap() < p_edge(&p, t1).unwrap());
            prop_assert!(p_wedge(&p, t2).unwrap() < p_wedge(&p, t1).unwrap());
            let w = w0 * 1.7;
            prop_assert!(p_edge_given_weight(w, &p, t2).unwrap() < p_edge_given_weight(w, &p, t1).unwrap());
        }

        #[test]
        fn monotone_in_weight(a in 0.5f64..5.0, theta in 0.0f64..50.0, w1 in 1.0f64..100.0, dw in 0.0f64..100.0) {
            let p = ParetoParams::new(a, 1.0).unwrap();
            prop_assert!(p_edge_given_weight(w1 + dw, &p, theta).unwrap() >= p_edge_given_weight(w1, &p, theta).unwrap());
        }

        #[test]
        fn wedge_dominates_squared_edge(a in 0.3f64..6.0, w0 in 0.2f64..4.0, theta in 0.0f64..200.0) {
            let p = ParetoParams::new(a, w0).unwrap();
            let pe = p_edge(&p, theta).unwrap();
            prop_assert!(p_wedge(&p, theta).unwrap() >= pe * pe * (1.0 - 1e-12));
        }

        #[test]
        fn probabilities_in_range(a in 0.3f64..6.0, w0 in 0.2f64..4.0, theta in 0.0f64..1e4) {
            let p = ParetoParams::new(a, w0).unwrap();
            let pe = p_edge(&p, theta).unwrap();
            prop_assert!(pe > 0.0 && pe <= 0.5);
            let pw = p_edge_given_weight(w0 * 3.0, &p, theta).unwrap();
            prop_assert!((0.0..=0.5).contains(&pw));
        }

        #[test]
        fn branches_meet(a in 0.3f64..6.0, w0 in 0.2f64..4.0, theta in 0.01f64..100.0) {
            let p = ParetoParams::new(a, w0).unwrap();
            let c = a * a / ((a + 1.0) * (a + 1.0));
            let w0sq = w0 * w0;
            let below = p_edge(&p, w0sq * (1.0 - 1e-13)).unwrap();
            prop_assert!((below - (0.5 - 0.5 * c)).abs() < 1e-12);
            prop_assert!((p_edge(&p, w0sq).unwrap() - (0.5 - 0.5 * c)).abs() < 1e-12);
            let pw_below = p_wedge(&p, w0sq * (1.0 - 1e-13)).unwrap();
            prop_assert!((pw_below - p_wedge(&p, w0sq).unwrap()).abs() < 1e-12);
            // P_e(w) at w = theta / w0 (when admissible).
            let w = theta / w0;
            if w >= w0 {
                let above = 0.5 * (1.0 - a * theta / (w * (a + 1.0) * w0));
                let below = p_edge_given_weight(w, &p, theta).unwrap();
                prop_assert!((above - below).abs() < 1e-12);
            }
        }

        #[test]
        fn calibration_inverts_p_edge(a in 0.5f64..5.0, w0 in 0.3f64..3.0, prob in 1e-6f64..0.49) {
            let p = ParetoParams::new(a, w0).unwrap();
            let n = 1000;
            let theta = calibrate_theta(n, &p, prob * pairs(n)).unwrap();
            prop_assert!(((p_edge(&p, theta).unwrap() - prob) / prob).abs() <= 1e-9);
        }
    }
}
