//! Discrete power-law fit: Hurwitz-zeta likelihood, KS distance, x_min scan
//! and the semi-parametric bootstrap.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::zeta::hurwitz_unchecked;
use crate::{Error, Result};

/// Fewest tail samples a fit is allowed to use.
pub const MIN_TAIL: usize = 50;

const ALPHA_LO: f64 = 1.0 + 1e-6;
const ALPHA_HI: f64 = 50.0;
const ALPHA_TOL: f64 = 1e-6;
/// Gaps up to this length are bridged by adding terms instead of a fresh zeta.
const ZETA_STEP_LIMIT: u64 = 16;
const SURVIVAL_TABLE: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha_hat: f64,
    pub x_min: u64,
    pub ks_stat: f64,
    pub n_tail: usize,
    /// Positive samples seen by the fit.
    pub n_samples: usize,
    /// Zero samples dropped before fitting.
    pub zero_count: usize,
    /// `1 + n / sum ln(x / (x_min - 1/2))`, for comparison only.
    pub alpha_continuous: f64,
    pub x_min_scanned: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value_stderr: Option<f64>,
}

/// Positive samples as sorted distinct values with counts and suffix sums.
struct Table {
    values: Vec<u64>,
    counts: Vec<u64>,
    /// Samples at index `>= i`.
    suffix_n: Vec<u64>,
    /// `sum count * ln(value)` over index `>= i`.
    suffix_log: Vec<f64>,
}

impl Table {
    fn new(mut positive: Vec<u64>) -> Self {
        positive.sort_unstable();
        let mut values = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        for x in positive {
            if values.last() == Some(&x) {
                *counts.last_mut().unwrap() += 1;
            } else {
                values.push(x);
                counts.push(1);
            }
        }
        let len = values.len();
        let mut suffix_n = vec![0; len + 1];
        let mut suffix_log = vec![0.0; len + 1];
        for i in (0..len).rev() {
            suffix_n[i] = suffix_n[i + 1] + counts[i];
            suffix_log[i] = suffix_log[i + 1] + counts[i] as f64 * (values[i] as f64).ln();
        }
        Table { values, counts, suffix_n, suffix_log }
    }

    fn mle(&self, i: usize, x_min: u64) -> f64 {
        let n = self.suffix_n[i] as f64;
        let s = self.suffix_log[i];
        let q = x_min as f64;
        let nll = |alpha: f64| alpha * s + n * hurwitz_unchecked(alpha, q).ln();
        golden_min(nll, ALPHA_LO, ALPHA_HI, ALPHA_TOL)
    }

    fn ks(&self, i: usize, x_min: u64, alpha: f64) -> f64 {
        let n = self.suffix_n[i] as f64;
        let z0 = hurwitz_unchecked(alpha, x_min as f64);
        // zq = zeta(alpha, q), so the fitted P(X <= q - 1) = 1 - zq / z0.
        let mut q = x_min;
        let mut zq = z0;
        let advance = |to: u64, q: &mut u64, zq: &mut f64| {
            if to - *q <= ZETA_STEP_LIMIT {
                while *q < to {
                    *zq -= (*q as f64).powf(-alpha);
                    *q += 1;
                }
            } else {
                *zq = hurwitz_unchecked(alpha, to as f64);
                *q = to;
            }
        };
        let mut cum = 0u64;
        let mut ks: f64 = 0.0;
        for j in i..self.values.len() {
            let v = self.values[j];
            advance(v, &mut q, &mut zq);
            ks = ks.max((cum as f64 / n - (1.0 - zq / z0)).abs());
            advance(v + 1, &mut q, &mut zq);
            cum += self.counts[j];
            ks = ks.max((cum as f64 / n - (1.0 - zq / z0)).abs());
        }
        ks.min(1.0)
    }

    fn continuous_alpha(&self, i: usize, x_min: u64) -> f64 {
        let n = self.suffix_n[i] as f64;
        let shift = n * (x_min as f64 - 0.5).ln();
        1.0 + n / (self.suffix_log[i] - shift)
    }

    fn first_at_least(&self, x_min: u64) -> usize {
        self.values.partition_point(|&v| v < x_min)
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

struct Fitted {
    alpha: f64,
    x_min: u64,
    ks: f64,
    index: usize,
}

fn fit_table(table: &Table, x_min: Option<u64>) -> Result<Fitted> {
    if table.values.len() < 2 {
        return Err(Error::FitDegenerate("all samples are equal".into()));
    }
    match x_min {
        Some(x_min) => {
            if x_min == 0 {
                return Err(Error::Domain("x_min must be >= 1".into()));
            }
            let i = table.first_at_least(x_min);
            let n_tail = table.suffix_n[i] as usize;
            if n_tail < MIN_TAIL {
                return Err(Error::InsufficientData { needed: MIN_TAIL, got: n_tail });
            }
            if i + 1 >= table.values.len() {
                return Err(Error::FitDegenerate(format!("every sample >= {x_min} is equal")));
            }
            let alpha = table.mle(i, x_min);
            Ok(Fitted { alpha, x_min, ks: table.ks(i, x_min, alpha), index: i })
        }
        None => {
            let mut best: Option<Fitted> = None;
            let len = table.values.len();
            let mut i = 0;
            while i + 1 < len && table.suffix_n[i] as usize >= MIN_TAIL {
                let x_min = table.values[i];
                let alpha = table.mle(i, x_min);
                let ks = table.ks(i, x_min, alpha);
                if best.as_ref().is_none_or(|b| ks < b.ks) {
                    best = Some(Fitted { alpha, x_min, ks, index: i });
                }
                i += 1;
            }
            best.ok_or(Error::InsufficientData {
                needed: MIN_TAIL,
                got: table.suffix_n[0] as usize,
            })
        }
    }
}

/// Maximum-likelihood discrete power law `P(x) = x^(-alpha) / zeta(alpha, x_min)`
/// on `x >= x_min`. Without `x_min`, every distinct sample value leaving at
/// least [`MIN_TAIL`] samples is tried and the smallest KS distance wins.
pub fn fit_powerlaw_discrete(samples: &[u64], x_min: Option<u64>) -> Result<FitResult> {
    let positive: Vec<u64> = samples.iter().copied().filter(|&x| x > 0).collect();
    let zero_count = samples.len() - positive.len();
    let n_samples = positive.len();
    let table = Table::new(positive);
    let fit = fit_table(&table, x_min)?;
    Ok(FitResult {
        alpha_hat: fit.alpha,
        x_min: fit.x_min,
        ks_stat: fit.ks,
        n_tail: table.suffix_n[fit.index] as usize,
        n_samples,
        zero_count,
        alpha_continuous: table.continuous_alpha(fit.index, fit.x_min),
        x_min_scanned: x_min.is_none(),
        p_value: None,
        p_value_stderr: None,
    })
}

/// Discrete power law on `x >= x_min`, sampled by exact inverse CDF.
#[derive(Debug, Clone)]
pub struct DiscretePowerLaw {
    alpha: f64,
    x_min: u64,
    zeta_min: f64,
    /// `survival[j] = P(X >= x_min + j)`.
    survival: Vec<f64>,
}

impl DiscretePowerLaw {
    pub fn new(alpha: f64, x_min: u64) -> Result<Self> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("power-law exponent must be > 1, got {alpha}")));
        }
        if x_min == 0 {
            return Err(Error::Domain("x_min must be >= 1".into()));
        }
        let zeta_min = hurwitz_unchecked(alpha, x_min as f64);
        let mut survival = Vec::with_capacity(SURVIVAL_TABLE + 1);
        let mut z = zeta_min;
        for j in 0..=SURVIVAL_TABLE as u64 {
            survival.push(z / zeta_min);
            z -= ((x_min + j) as f64).powf(-alpha);
        }
        Ok(DiscretePowerLaw { alpha, x_min, zeta_min, survival })
    }

    pub fn pmf(&self, x: u64) -> f64 {
        if x < self.x_min {
            0.0
        } else {
            (x as f64).powf(-self.alpha) / self.zeta_min
        }
    }

    /// `P(X >= x)`.
    pub fn survival(&self, x: u64) -> f64 {
        if x <= self.x_min {
            1.0
        } else if x - self.x_min <= SURVIVAL_TABLE as u64 {
            self.survival[(x - self.x_min) as usize]
        } else {
            hurwitz_unchecked(self.alpha, x as f64) / self.zeta_min
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, stream: &mut R) -> u64 {
        let u = 1.0 - stream.random::<f64>();
        // Smallest x with P(X >= x + 1) < u.
        let j = self.survival.partition_point(|&s| s >= u);
        if j < self.survival.len() {
            return self.x_min + j as u64 - 1;
        }
        let mut lo = self.x_min + SURVIVAL_TABLE as u64;
        let mut hi = lo.saturating_mul(2);
        const CAP: u64 = 1 << 62;
        while hi < CAP && self.survival(hi) >= u {
            lo = hi;
            hi = hi.saturating_mul(2);
        }
        if hi >= CAP {
            return CAP;
        }
        // survival(lo) >= u > survival(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.survival(mid) >= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GofResult {
    pub p_value: f64,
    pub stderr: f64,
    pub replicates: usize,
    /// Replicates whose refit succeeded; the p-value is over these.
    pub valid: usize,
}

impl FitResult {
    pub fn with_gof(mut self, gof: &GofResult) -> Self {
        self.p_value = Some(gof.p_value);
        self.p_value_stderr = Some(gof.stderr);
        self
    }
}

/// Semi-parametric bootstrap p-value of the KS statistic.
///
/// Each synthetic sample has the size of the positive data; every draw comes
/// from the fitted law with probability `n_tail / n` and otherwise uniformly
/// from the observed values below `x_min`. Synthetic data are refitted the
/// same way as the original (scanning `x_min` or not).
pub fn gof_pvalue(samples: &[u64], fit: &FitResult, n_bootstrap: usize, seed: u64) -> Result<GofResult> {
    if n_bootstrap < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 bootstrap replicates, got {n_bootstrap}")));
    }
    if fit.alpha_hat.is_nan() || fit.alpha_hat <= 1.0 || fit.x_min == 0 || !(0.0..=1.0).contains(&fit.ks_stat) {
        return Err(Error::InvalidParameter("fit result is not valid".into()));
    }
    let positive: Vec<u64> = samples.iter().copied().filter(|&x| x > 0).collect();
    let body: Vec<u64> = positive.iter().copied().filter(|&x| x < fit.x_min).collect();
    let n = positive.len();
    let n_tail = n - body.len();
    if n_tail < MIN_TAIL {
        return Err(Error::InsufficientData { needed: MIN_TAIL, got: n_tail });
    }
    let law = DiscretePowerLaw::new(fit.alpha_hat, fit.x_min)?;
    let tail_prob = n_tail as f64 / n as f64;
    let fixed = if fit.x_min_scanned { None } else { Some(fit.x_min) };

    let outcomes: Vec<Option<bool>> = (0..n_bootstrap)
        .into_par_iter()
        .map(|r| {
            let mut stream = rng::substream(seed, r as u64);
            let synthetic: Vec<u64> = (0..n)
                .map(|_| {
                    if body.is_empty() || stream.random::<f64>() < tail_prob {
                        law.sample(&mut stream)
                    } else {
                        body[stream.random_range(0..body.len())]
                    }
                })
                .collect();
            fit_table(&Table::new(synthetic), fixed).ok().map(|f| f.ks >= fit.ks_stat)
        })
        .collect();
    let valid = outcomes.iter().flatten().count();
    if valid == 0 {
        return Err(Error::FitDegenerate("no bootstrap replicate could be refitted".into()));
    }
    let exceed = outcomes.iter().flatten().filter(|&&b| b).count();
    let p = exceed as f64 / valid as f64;
    Ok(GofResult {
        p_value: p,
        stderr: (p * (1.0 - p) / valid as f64).sqrt(),
        replicates: n_bootstrap,
        valid,
    })
}
