//! Domain types, samplers and edge predicates of the model.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

/// Pareto law with shape `a` and scale `w0`: density `a/w0 (w0/w)^(a+1)` on `w >= w0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPareto")]
pub struct ParetoParams {
    a: f64,
    w0: f64,
}

#[derive(Deserialize)]
struct RawPareto {
    a: f64,
    w0: f64,
}

impl TryFrom<RawPareto> for ParetoParams {
    type Error = Error;
    fn try_from(raw: RawPareto) -> Result<Self> {
        ParetoParams::new(raw.a, raw.w0)
    }
}

impl ParetoParams {
    pub fn new(a: f64, w0: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("Pareto shape a must be > 0, got {a}")));
        }
        if !(w0.is_finite() && w0 > 0.0) {
            return Err(Error::InvalidParameter(format!("Pareto scale w0 must be > 0, got {w0}")));
        }
        Ok(Self { a, w0 })
    }

    #[inline]
    pub fn shape(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.w0
    }

    /// Inverse CDF: `w0 (1-u)^(-1/a)` for `u` in `[0, 1)`.
    #[inline]
    pub fn quantile(&self, u: f64) -> f64 {
        self.w0 * (1.0 - u).powf(-1.0 / self.a)
    }

    /// `P(w > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= self.w0 {
            1.0
        } else {
            (self.w0 / t).powf(self.a)
        }
    }

    pub fn density(&self, w: f64) -> f64 {
        if w < self.w0 {
            0.0
        } else {
            self.a / self.w0 * (self.w0 / w).powf(self.a + 1.0)
        }
    }
}

/// Transform applied to the direction dot product in the link-function variant.
///
/// Textual form (CLI and manifests): `identity`, `exp`, `oddpow:m:c`
/// (`t^(2m+1) + c`) and `evenpow:m` (`t^(2m)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum LinkFn {
    Identity,
    Exp,
    OddPowerPlusC { m: u32, c: f64 },
    EvenPower { m: u32 },
}

impl LinkFn {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            LinkFn::Identity => t,
            LinkFn::Exp => t.exp(),
            LinkFn::OddPowerPlusC { m, c } => t.powi(2 * m as i32 + 1) + c,
            LinkFn::EvenPower { m } => t.powi(2 * m as i32),
        }
    }

    pub fn is_strictly_increasing(&self) -> bool {
        !matches!(self, LinkFn::EvenPower { .. })
    }

    /// `max h` over `[-1, 1]`.
    pub fn max_value(&self) -> f64 {
        match *self {
            LinkFn::Identity => 1.0,
            LinkFn::Exp => 1.0f64.exp(),
            LinkFn::OddPowerPlusC { c, .. } => 1.0 + c,
            LinkFn::EvenPower { .. } => 1.0,
        }
    }

    /// `min h` over `[-1, 1]`.
    pub fn min_value(&self) -> f64 {
        match *self {
            LinkFn::Identity => -1.0,
            LinkFn::Exp => (-1.0f64).exp(),
            LinkFn::OddPowerPlusC { c, .. } => c - 1.0,
            LinkFn::EvenPower { .. } => 0.0,
        }
    }

    /// Inverse on `[h(-1), h(1)]`, clamped into `[-1, 1]`. `None` for kinds
    /// that are not strictly increasing.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        let x = match *self {
            LinkFn::Identity => y,
            LinkFn::Exp => y.ln(),
            LinkFn::OddPowerPlusC { m, c } => {
                let s = y - c;
                s.signum() * s.abs().powf(1.0 / (2 * m + 1) as f64)
            }
            LinkFn::EvenPower { .. } => return None,
        };
        Some(x.clamp(-1.0, 1.0))
    }

    fn validate(&self) -> Result<()> {
        match *self {
            LinkFn::OddPowerPlusC { m, c } => {
                if m == 0 {
                    return Err(Error::InvalidParameter("oddpow exponent m must be >= 1".into()));
                }
                if !c.is_finite() {
                    return Err(Error::InvalidParameter(format!("oddpow offset must be finite, got {c}")));
                }
            }
            LinkFn::EvenPower { m: 0 } => {
                return Err(Error::InvalidParameter("evenpow exponent m must be >= 1".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for LinkFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkFn::Identity => write!(f, "identity"),
            LinkFn::Exp => write!(f, "exp"),
            LinkFn::OddPowerPlusC { m, c } => write!(f, "oddpow:{m}:{c}"),
            LinkFn::EvenPower { m } => write!(f, "evenpow:{m}"),
        }
    }
}

impl FromStr for LinkFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unrecognised link function '{s}'"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let h = match parts.as_slice() {
            ["identity"] => LinkFn::Identity,
            ["exp"] => LinkFn::Exp,
            ["oddpow", m, c] => LinkFn::OddPowerPlusC {
                m: m.parse().map_err(|_| bad())?,
                c: c.parse().map_err(|_| bad())?,
            },
            ["evenpow", m] => LinkFn::EvenPower { m: m.parse().map_err(|_| bad())? },
            _ => return Err(bad()),
        };
        h.validate()?;
        Ok(h)
    }
}

impl From<LinkFn> for String {
    fn from(h: LinkFn) -> String {
        h.to_string()
    }
}

impl TryFrom<String> for LinkFn {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Edge condition. For the directed and link-function variants the rule
/// decides the arc `source -> target`, where the source weight is raised to
/// `alpha` and the target weight to `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum EdgeRule {
    Undirected { theta: f64 },
    Directed { theta: f64, alpha: f64, beta: f64 },
    LinkFunction { theta: f64, alpha: f64, beta: f64, h: LinkFn },
}

impl EdgeRule {
    pub fn undirected(theta: f64) -> Result<Self> {
        let rule = EdgeRule::Undirected { theta };
        rule.validate()?;
        Ok(rule)
    }

    pub fn directed(theta: f64, alpha: f64, beta: f64) -> Result<Self> {
        let rule = EdgeRule::Directed { theta, alpha, beta };
        rule.validate()?;
        Ok(rule)
    }

    pub fn link_function(theta: f64, alpha: f64, beta: f64, h: LinkFn) -> Result<Self> {
        let rule = EdgeRule::LinkFunction { theta, alpha, beta, h };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        let theta = self.theta();
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::InvalidParameter(format!("theta must be finite and >= 0, got {theta}")));
        }
        if let EdgeRule::Directed { alpha, beta, .. } | EdgeRule::LinkFunction { alpha, beta, .. } = *self {
            for (name, v) in [("alpha", alpha), ("beta", beta)] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
                }
            }
        }
        if let EdgeRule::LinkFunction { h, .. } = self {
            h.validate()?;
        }
        Ok(())
    }

    #[inline]
    pub fn theta(&self) -> f64 {
        match *self {
            EdgeRule::Undirected { theta }
            | EdgeRule::Directed { theta, .. }
            | EdgeRule::LinkFunction { theta, .. } => theta,
        }
    }

    pub fn with_theta(self, theta: f64) -> Result<Self> {
        let rule = match self {
            EdgeRule::Undirected { .. } => EdgeRule::Undirected { theta },
            EdgeRule::Directed { alpha, beta, .. } => EdgeRule::Directed { theta, alpha, beta },
            EdgeRule::LinkFunction { alpha, beta, h, .. } => EdgeRule::LinkFunction { theta, alpha, beta, h },
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn is_directed(&self) -> bool {
        !matches!(self, EdgeRule::Undirected { .. })
    }

    /// `(alpha, beta)`; `(1, 1)` for the undirected rule.
    pub fn exponents(&self) -> (f64, f64) {
        match *self {
            EdgeRule::Undirected { .. } => (1.0, 1.0),
            EdgeRule::Directed { alpha, beta, .. } | EdgeRule::LinkFunction { alpha, beta, .. } => {
                (alpha, beta)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EdgeRule::Undirected { .. } => "undirected",
            EdgeRule::Directed { .. } => "directed",
            EdgeRule::LinkFunction { .. } => "linkfn",
        }
    }

    #[inline]
    pub(crate) fn source_power(&self, w: f64) -> f64 {
        match *self {
            EdgeRule::Undirected { .. } => w,
            EdgeRule::Directed { alpha, .. } | EdgeRule::LinkFunction { alpha, .. } => w.powf(alpha),
        }
    }

    #[inline]
    pub(crate) fn target_power(&self, w: f64) -> f64 {
        match *self {
            EdgeRule::Undirected { .. } => w,
            EdgeRule::Directed { beta, .. } | EdgeRule::LinkFunction { beta, .. } => w.powf(beta),
        }
    }

    /// Edge test from precomputed endpoint powers and a clamped dot product.
    #[inline]
    pub(crate) fn holds_powers(&self, source_pow: f64, target_pow: f64, dot: f64) -> bool {
        let scale = source_pow * target_pow;
        match *self {
            EdgeRule::Undirected { theta } | EdgeRule::Directed { theta, .. } => scale * dot >= theta,
            EdgeRule::LinkFunction { theta, h, .. } => scale * h.eval(dot) >= theta,
        }
    }

    #[inline]
    pub(crate) fn holds(&self, source_w: f64, target_w: f64, dot: f64) -> bool {
        self.holds_powers(self.source_power(source_w), self.target_power(target_w), dot)
    }

    /// Largest value of the transformed dot product over `[-1, 1]`.
    pub(crate) fn max_link(&self) -> f64 {
        match self {
            EdgeRule::LinkFunction { h, .. } => h.max_value(),
            _ => 1.0,
        }
    }
}

/// A node: a weight and a unit direction. The latent vector is their product.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub weight: f64,
    pub direction: Vec<f64>,
}

impl Node {
    pub fn latent(&self) -> Vec<f64> {
        self.direction.iter().map(|x| self.weight * x).collect()
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub d: usize,
    pub pareto: ParetoParams,
    pub rule: EdgeRule,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(n: usize, d: usize, pareto: ParetoParams, rule: EdgeRule, seed: u64) -> Result<Self> {
        let cfg = Self { n, d, pareto, rule, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        if self.d < 2 {
            return Err(Error::InvalidDimension(self.d));
        }
        self.rule.validate()
    }

    /// Closed forms are only available on the 2-sphere.
    pub fn require_analytic(&self) -> Result<()> {
        if self.d != 3 {
            return Err(Error::UnsupportedAnalytics(format!(
                "closed forms are derived for d = 3 only, got d = {}",
                self.d
            )));
        }
        if let EdgeRule::LinkFunction { h, .. } = self.rule {
            if !h.is_strictly_increasing() {
                return Err(Error::UnsupportedAnalytics(format!(
                    "link function {h} is not strictly increasing"
                )));
            }
        }
        Ok(())
    }

    pub fn with_n(mut self, n: usize) -> Result<Self> {
        self.n = n;
        self.validate()?;
        Ok(self)
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        self.rule = self.rule.with_theta(theta)?;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[inline]
pub fn sample_weight<R: Rng + ?Sized>(stream: &mut R, pareto: &ParetoParams) -> f64 {
    pareto.quantile(stream.random::<f64>())
}

/// Uniform point on the 2-sphere: `z ~ U[-1, 1]`, azimuth `~ U[0, 2 pi)`.
#[inline]
pub(crate) fn sample_direction3<R: Rng + ?Sized>(stream: &mut R) -> [f64; 3] {
    let z = 2.0 * stream.random::<f64>() - 1.0;
    let phi = std::f64::consts::TAU * stream.random::<f64>();
    let r = (1.0 - z * z).max(0.0).sqrt();
    let (s, c) = phi.sin_cos();
    [r * c, r * s, z]
}

/// Uniform direction on the unit sphere in `R^d`.
pub fn sample_direction<R: Rng + ?Sized>(stream: &mut R, d: usize) -> Result<Vec<f64>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if d == 3 {
        return Ok(sample_direction3(stream).to_vec());
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| stream.sample::<f64, _>(StandardNormal)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm.is_finite() && norm > 1e-150 {
            return Ok(v.into_iter().map(|x| x / norm).collect());
        }
    }
}

/// Node `id` of the model seeded by `seed`; independent of the node count.
pub fn sample_node(seed: u64, id: usize, pareto: &ParetoParams, d: usize) -> Result<Node> {
    let mut stream = rng::substream(seed, id as u64);
    let weight = sample_weight(&mut stream, pareto);
    let direction = sample_direction(&mut stream, d)?;
    Ok(Node { id, weight, direction })
}

/// Plain left-to-right dot product; all predicates go through this helper so
/// that every code path sees bit-identical values.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Dot product of unit vectors, clamped into `[-1, 1]` against rounding.
#[inline]
pub(crate) fn unit_dot(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0)
}

/// Whether the edge (or the arc `u -> v` for directed rules) exists.
pub fn edge_exists(u: &Node, v: &Node, rule: &EdgeRule) -> Result<bool> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch { left: u.dim(), right: v.dim() });
    }
    Ok(rule.holds(u.weight, v.weight, unit_dot(&u.direction, &v.direction)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn node(id: usize, weight: f64, direction: Vec<f64>) -> Node {
        Node { id, weight, direction }
    }

    fn pareto(a: f64, w0: f64) -> ParetoParams {
        ParetoParams::new(a, w0).unwrap()
    }

    #[test]
    fn quantile_endpoints() {
        assert_eq!(pareto(3.0, 2.5).quantile(0.0), 2.5);
        assert_eq!(pareto(1.0, 5.0).quantile(0.5), 10.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ParetoParams::new(0.0, 1.0).is_err());
        assert!(ParetoParams::new(1.0, -1.0).is_err());
        assert!(EdgeRule::undirected(-0.1).is_err());
        assert!(EdgeRule::directed(1.0, 0.0, 1.0).is_err());
        assert!("oddpow:0:1".parse::<LinkFn>().is_err());
        assert!("cubic".parse::<LinkFn>().is_err());
        assert!(matches!(
            sample_direction(&mut rng::stream(1), 1),
            Err(Error::InvalidDimension(1))
        ));
    }

    #[test]
    fn link_fn_text_round_trip() {
        for s in ["identity", "exp", "oddpow:2:0.5", "evenpow:1"] {
            let h: LinkFn = s.parse().unwrap();
            assert_eq!(h.to_string(), s);
        }
    }

    #[test]
    fn link_fn_inverse() {
        for h in [LinkFn::Identity, LinkFn::Exp, LinkFn::OddPowerPlusC { m: 1, c: 0.3 }] {
            for i in 0..=20 {
                let t = -1.0 + 0.1 * i as f64;
                let back = h.inverse(h.eval(t)).unwrap();
                assert!((back - t).abs() < 1e-12, "{h}: {t} -> {back}");
            }
        }
        assert!(LinkFn::EvenPower { m: 1 }.inverse(0.5).is_none());
    }

    #[test]
    fn boundary_equality_is_an_edge() {
        let rule = EdgeRule::undirected(1.0).unwrap();
        let u = node(0, 1.0, vec![0.0, 0.0, 1.0]);
        let v = node(1, 1.0, vec![0.0, 0.0, 1.0]);
        assert!(edge_exists(&u, &v, &rule).unwrap());
    }

    #[test]
    fn antipodal_nodes_never_link() {
        let rule = EdgeRule::undirected(0.5).unwrap();
        let u = node(0, 1.0, vec![1.0, 0.0, 0.0]);
        let v = node(1, 1.0, vec![-1.0, 0.0, 0.0]);
        assert!(!edge_exists(&u, &v, &rule).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let rule = EdgeRule::undirected(0.5).unwrap();
        let u = node(0, 1.0, vec![1.0, 0.0, 0.0]);
        let v = node(1, 1.0, vec![1.0, 0.0]);
        assert!(matches!(edge_exists(&u, &v, &rule), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn directed_with_unit_exponents_matches_undirected() {
        let p = pareto(3.0, 1.0);
        let und = EdgeRule::undirected(2.0).unwrap();
        let dir = EdgeRule::directed(2.0, 1.0, 1.0).unwrap();
        for i in 0..10_000 {
            let u = sample_node(11, 2 * i, &p, 3).unwrap();
            let v = sample_node(11, 2 * i + 1, &p, 3).unwrap();
            assert_eq!(edge_exists(&u, &v, &und).unwrap(), edge_exists(&u, &v, &dir).unwrap());
        }
    }

    #[test]
    fn node_is_deterministic_and_independent_of_n() {
        let p = pareto(2.0, 1.5);
        let a = sample_node(99, 17, &p, 5).unwrap();
        let b = sample_node(99, 17, &p, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.weight >= 1.5);
        assert_eq!(a.latent().len(), 5);
    }

    #[test]
    fn pareto_survival_matches_inverse_transform() {
        // Empirical P(w > w0 2^k) against (w0/t)^a, 3 binomial sigma, 10^6 draws.
        let p = pareto(3.0, 1.0);
        let n = 1_000_000;
        let mut s = rng::stream(2024);
        let draws: Vec<f64> = (0..n).map(|_| sample_weight(&mut s, &p)).collect();
        assert!(draws.iter().all(|&w| w >= 1.0));
        for k in 0..=5 {
            let t = p.scale() * 2f64.powi(k);
            let expect = p.survival(t);
            let got = draws.iter().filter(|&&w| w > t).count() as f64 / n as f64;
            let sigma = (expect * (1.0 - expect) / n as f64).sqrt().max(1.0 / n as f64);
            assert!((got - expect).abs() <= 3.0 * sigma, "t={t}: {got} vs {expect}");
        }
    }

    #[test]
    fn sphere_moments_and_caps() {
        let n = 1_000_000;
        let mut s = rng::stream(77);
        let mut sum = [0.0; 3];
        let mut cap0 = 0usize;
        let mut cap_half = 0usize;
        for _ in 0..n {
            let x = sample_direction(&mut s, 3).unwrap();
            let norm = dot(&x, &x).sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
            for k in 0..3 {
                sum[k] += x[k];
            }
            cap0 += (x[2] >= 0.0) as usize;
            cap_half += (x[2] >= 0.5) as usize;
        }
        let sigma = 1.0 / (3.0 * n as f64).sqrt();
        for m in sum {
            assert!((m / n as f64).abs() <= 3.0 * sigma);
        }
        for (count, t) in [(cap0, 0.0), (cap_half, 0.5)] {
            let expect = (1.0 - t) / 2.0;
            let sd = (expect * (1.0 - expect) / n as f64).sqrt();
            assert!((count as f64 / n as f64 - expect).abs() <= 3.0 * sd);
        }
    }

    #[test]
    fn general_dimension_directions_are_unit() {
        let mut s = rng::stream(5);
        for d in [2, 4, 7, 16] {
            for _ in 0..1000 {
                let x = sample_direction(&mut s, d).unwrap();
                assert_eq!(x.len(), d);
                assert!((dot(&x, &x).sqrt() - 1.0).abs() <= 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn undirected_predicate_is_symmetric(seed in any::<u64>(), theta in 0.0f64..20.0) {
            let p = pareto(2.0, 1.0);
            let u = sample_node(seed, 0, &p, 3).unwrap();
            let v = sample_node(seed, 1, &p, 3).unwrap();
            let rule = EdgeRule::undirected(theta).unwrap();
            prop_assert_eq!(edge_exists(&u, &v, &rule).unwrap(), edge_exists(&v, &u, &rule).unwrap());
            let dir = EdgeRule::directed(theta, 1.7, 1.7).unwrap();
            prop_assert_eq!(edge_exists(&u, &v, &dir).unwrap(), edge_exists(&v, &u, &dir).unwrap());
        }

        #[test]
        fn identity_link_equals_directed(seed in any::<u64>(), theta in 0.0f64..20.0,
                                         alpha in 0.2f64..3.0, beta in 0.2f64..3.0) {
            let p = pareto(2.5, 1.0);
            let u = sample_node(seed, 0, &p, 3).unwrap();
            let v = sample_node(seed, 1, &p, 3).unwrap();
            let dir = EdgeRule::directed(theta, alpha, beta).unwrap();
            let link = EdgeRule::link_function(theta, alpha, beta, LinkFn::Identity).unwrap();
            prop_assert_eq!(edge_exists(&u, &v, &dir).unwrap(), edge_exists(&u, &v, &link).unwrap());
        }
    }
}
