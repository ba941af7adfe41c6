//! Monte-Carlo estimators of the closed-form probabilities.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::model::{sample_direction3, sample_weight, EdgeRule, ModelConfig, ParetoParams};
use crate::rng;
use crate::{Error, Result};

const CHUNK: u64 = 1 << 16;
const MIN_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum McKind {
    /// Random pair (random source and target for directed rules).
    Edge,
    /// Undirected edge from a node of the given weight to a random node.
    EdgeGivenWeight(f64),
    /// Random centre linked to both of two random leaves.
    Wedge,
    /// Arc from a node of the given weight to a random node.
    DirectedEdgeGivenWeight(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl McEstimate {
    /// `|estimate - value|` in units of the standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.estimate == value { 0.0 } else { f64::INFINITY }
        } else {
            (self.estimate - value).abs() / self.stderr
        }
    }
}

#[inline]
fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0)
}

fn check_weight(w: f64, pareto: &ParetoParams) -> Result<()> {
    if w.is_finite() && w >= pareto.scale() {
        Ok(())
    } else {
        Err(Error::Domain(format!("weight {w} is below the Pareto scale w0 = {}", pareto.scale())))
    }
}

/// Bernoulli estimate of the probability selected by `kind` under the model of
/// `config`, with fresh nodes drawn for every trial.
pub fn mc_estimate(kind: McKind, config: &ModelConfig, trials: u64, seed: u64) -> Result<McEstimate> {
    if config.d != 3 {
        return Err(Error::InvalidDimension(config.d));
    }
    if trials < MIN_TRIALS {
        return Err(Error::InvalidParameter(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let rule = &config.rule;
    let pareto = &config.pareto;
    let undirected = matches!(rule, EdgeRule::Undirected { .. });
    match kind {
        McKind::EdgeGivenWeight(_) | McKind::Wedge if !undirected => {
            return Err(Error::UnsupportedAnalytics(format!("{kind:?} needs the undirected rule, got {}", rule.name())));
        }
        McKind::DirectedEdgeGivenWeight(_) if undirected => {
            return Err(Error::UnsupportedAnalytics("directed_edge_given_weight needs a directed rule".into()));
        }
        _ => {}
    }
    if let Some(w) = w_of(kind) {
        check_weight(w, pareto)?;
    }

    let chunks = trials.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut stream = rng::substream(seed, c);
            let len = CHUNK.min(trials - c * CHUNK);
            let mut hits = 0u64;
            for _ in 0..len {
                if trial(kind, rule, pareto, &mut stream) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let p = hits as f64 / trials as f64;
    Ok(McEstimate { estimate: p, stderr: (p * (1.0 - p) / trials as f64).sqrt(), trials })
}

fn w_of(kind: McKind) -> Option<f64> {
    match kind {
        McKind::EdgeGivenWeight(w) | McKind::DirectedEdgeGivenWeight(w) => Some(w),
        _ => None,
    }
}

#[inline]
fn trial<R: Rng + ?Sized>(kind: McKind, rule: &EdgeRule, pareto: &ParetoParams, stream: &mut R) -> bool {
    match kind {
        McKind::Edge => {
            let (w1, x1) = (sample_weight(stream, pareto), sample_direction3(stream));
            let (w2, x2) = (sample_weight(stream, pareto), sample_direction3(stream));
            rule.holds(w1, w2, dot3(&x1, &x2))
        }
        McKind::EdgeGivenWeight(w) | McKind::DirectedEdgeGivenWeight(w) => {
            let x1 = sample_direction3(stream);
            let (w2, x2) = (sample_weight(stream, pareto), sample_direction3(stream));
            rule.holds(w, w2, dot3(&x1, &x2))
        }
        McKind::Wedge => {
            let (w, x) = (sample_weight(stream, pareto), sample_direction3(stream));
            let (w1, x1) = (sample_weight(stream, pareto), sample_direction3(stream));
            let (w2, x2) = (sample_weight(stream, pareto), sample_direction3(stream));
            rule.holds(w, w1, dot3(&x, &x1)) && rule.holds(w, w2, dot3(&x, &x2))
        }
    }
}
