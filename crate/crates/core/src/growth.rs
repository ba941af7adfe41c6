//! Growth sweeps, concentration ensembles and edge-count curve fits.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{self, GrowthSchedule};
use crate::generator::{generate_with, GenerateOptions};
use crate::model::{EdgeRule, ModelConfig};
use crate::statfit::csv_io;
use crate::{Error, Result};

pub const MIN_CONCENTRATION_SEEDS: usize = 20;
/// Variance ratios outside this band are flagged.
pub const RATIO_BAND: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Generated,
    Ingested,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRecord {
    pub n: u64,
    pub m: f64,
    pub em: Option<f64>,
    pub var: Option<f64>,
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSeries {
    pub records: Vec<GrowthRecord>,
    pub provenance: Provenance,
    pub seed: Option<u64>,
}

impl GrowthSeries {
    pub fn validate(&self) -> Result<()> {
        for w in self.records.windows(2) {
            if w[1].n <= w[0].n {
                return Err(Error::Validation(format!("n must be strictly increasing: {} then {}", w[0].n, w[1].n)));
            }
        }
        for r in &self.records {
            if !(r.m >= 0.0 && r.m.is_finite()) {
                return Err(Error::Validation(format!("edge count at n = {} must be >= 0, got {}", r.n, r.m)));
            }
            if let Some(em) = r.em {
                if em.is_nan() || em <= 0.0 {
                    return Err(Error::Validation(format!("expected edges at n = {} must be > 0, got {em}", r.n)));
                }
            }
        }
        Ok(())
    }

    /// `(n, m)` pairs for curve fitting.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.n as f64, r.m)).collect()
    }

    /// CSV with header `n,m` or `n,m,em,var,theta` when every record carries
    /// the analytic columns. A leading `#` comment records provenance and the
    /// logarithm convention of [`fit_growth_curve`].
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let full = self.records.iter().all(|r| r.em.is_some() && r.var.is_some() && r.theta.is_some());
        let prov = match self.provenance {
            Provenance::Generated => "generated",
            Provenance::Ingested => "ingested",
        };
        write!(out, "# provenance={prov} log=natural")?;
        if let Some(seed) = self.seed {
            write!(out, " seed={seed}")?;
        }
        writeln!(out)?;
        let mut w = csv::Writer::from_writer(out);
        if full {
            w.write_record(["n", "m", "em", "var", "theta"]).map_err(csv_io)?;
        } else {
            w.write_record(["n", "m"]).map_err(csv_io)?;
        }
        for r in &self.records {
            let mut row = vec![r.n.to_string(), r.m.to_string()];
            if full {
                row.extend([r.em, r.var, r.theta].iter().map(|v| v.unwrap().to_string()));
            }
            w.write_record(&row).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parse a series CSV (`n,m[,em,var,theta]`, header required, `#` comments
/// allowed). The result is tagged as ingested.
pub fn read_series_csv<R: Read>(input: R) -> Result<GrowthSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Err(Error::Parse { line: 1, message: "empty series file".into() }),
        Some(h) => h.map_err(|e| csv_parse(&e))?,
    };
    let line_of = |r: &csv::StringRecord| r.position().map_or(0, |p| p.line());
    let names: Vec<&str> = header.iter().collect();
    let full = match names.as_slice() {
        ["n", "m"] => false,
        ["n", "m", "em", "var", "theta"] => true,
        _ => {
            return Err(Error::Parse {
                line: line_of(&header),
                message: format!("expected header n,m[,em,var,theta], got {}", names.join(",")),
            })
        }
    };
    let mut records = Vec::new();
    for row in rows {
        let row = row.map_err(|e| csv_parse(&e))?;
        let line = line_of(&row);
        let expected = if full { 5 } else { 2 };
        if row.len() != expected {
            return Err(Error::Parse { line, message: format!("expected {expected} fields, got {}", row.len()) });
        }
        let n: u64 = row[0]
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("n is not a non-negative integer: {:?}", &row[0]) })?;
        let float = |i: usize, name: &str| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .map_err(|_| Error::Parse { line, message: format!("{name} is not a number: {:?}", &row[i]) })
        };
        let m = float(1, "m")?;
        let (em, var, theta) = if full {
            (Some(float(2, "em")?), Some(float(3, "var")?), Some(float(4, "theta")?))
        } else {
            (None, None, None)
        };
        records.push(GrowthRecord { n, m, em, var, theta });
    }
    if records.is_empty() {
        return Err(Error::Parse { line: line_of(&header) + 1, message: "series has no data rows".into() });
    }
    let series = GrowthSeries { records, provenance: Provenance::Ingested, seed: None };
    series.validate()?;
    Ok(series)
}

pub fn ingest_series(path: &std::path::Path) -> Result<GrowthSeries> {
    read_series_csv(std::fs::File::open(path)?)
}

fn csv_parse(e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse { line, message: e.to_string() }
}

/// Generate a graph for every `(n, seed)` cell at `theta(n)` and record the
/// observed edge count next to its mean and variance.
///
/// Returns one series per seed, in the order of `seeds`. Nodes are keyed by
/// id, so node `i` is the same at every `n` of a seed.
pub fn run_growth_sweep(
    schedule: &GrowthSchedule,
    ns: &[u64],
    base: &ModelConfig,
    seeds: &[u64],
    opts: &GenerateOptions,
) -> Result<Vec<GrowthSeries>> {
    if ns.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one n and one seed".into()));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sweep sizes must be strictly increasing".into()));
    }
    if !matches!(base.rule, EdgeRule::Undirected { .. }) {
        return Err(Error::UnsupportedAnalytics("growth sweeps use the undirected rule".into()));
    }
    base.require_analytic()?;
    let pareto = base.pareto;
    let plan: Vec<(u64, f64, f64, f64)> = ns
        .iter()
        .map(|&n| {
            let theta = schedule.theta(n, &pareto)?;
            let em = analytics::expected_edges(n, &pareto, theta)?;
            let var = analytics::variance_edges(n, &pareto, theta)?;
            Ok((n, theta, em, var))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..seeds.len()).flat_map(|s| (0..plan.len()).map(move |i| (s, i))).collect();
    let counts: Vec<u64> = cells
        .par_iter()
        .map(|&(s, i)| {
            let (n, theta, _, _) = plan[i];
            let config = base.with_n(n as usize)?.with_theta(theta)?.with_seed(seeds[s]);
            Ok(generate_with(&config, opts)?.edge_count() as u64)
        })
        .collect::<Result<_>>()?;

    Ok(seeds
        .iter()
        .enumerate()
        .map(|(s, &seed)| GrowthSeries {
            records: plan
                .iter()
                .enumerate()
                .map(|(i, &(n, theta, em, var))| GrowthRecord {
                    n,
                    m: counts[s * plan.len() + i] as f64,
                    em: Some(em),
                    var: Some(var),
                    theta: Some(theta),
                })
                .collect(),
            provenance: Provenance::Generated,
            seed: Some(seed),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub n: u64,
    pub seeds: usize,
    pub mean_m: f64,
    /// Unbiased sample variance of `m` over seeds.
    pub sample_var: f64,
    pub predicted_var: f64,
    pub ratio: f64,
    /// Ratio outside [`RATIO_BAND`].
    pub flagged: bool,
    pub median_rel_dev: f64,
}

/// Per-`n` ensemble statistics over series that share the same sizes.
pub fn concentration_report(ensemble: &[GrowthSeries]) -> Result<Vec<ConcentrationRow>> {
    if ensemble.len() < MIN_CONCENTRATION_SEEDS {
        return Err(Error::InsufficientData { needed: MIN_CONCENTRATION_SEEDS, got: ensemble.len() });
    }
    let first = &ensemble[0];
    for s in ensemble {
        if s.records.len() != first.records.len() || s.records.iter().zip(&first.records).any(|(a, b)| a.n != b.n) {
            return Err(Error::Validation("ensemble series must share the same sizes".into()));
        }
    }
    first
        .records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let (em, predicted_var) = match (rec.em, rec.var) {
                (Some(em), Some(v)) => (em, v),
                _ => return Err(Error::Validation(format!("record at n = {} lacks em/var", rec.n))),
            };
            let ms: Vec<f64> = ensemble.iter().map(|s| s.records[i].m).collect();
            let k = ms.len() as f64;
            let mean_m = ms.iter().sum::<f64>() / k;
            let sample_var = ms.iter().map(|m| (m - mean_m).powi(2)).sum::<f64>() / (k - 1.0);
            let ratio = sample_var / predicted_var;
            let mut dev: Vec<f64> = ms.iter().map(|m| (m - em).abs() / em).collect();
            dev.sort_by(f64::total_cmp);
            let mid = dev.len() / 2;
            let median_rel_dev = if dev.len() % 2 == 1 { dev[mid] } else { 0.5 * (dev[mid - 1] + dev[mid]) };
            Ok(ConcentrationRow {
                n: rec.n,
                seeds: ms.len(),
                mean_m,
                sample_var,
                predicted_var,
                ratio,
                flagged: !(RATIO_BAND.0..=RATIO_BAND.1).contains(&ratio),
                median_rel_dev,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    /// Coefficient of `n ln n`.
    pub c1: f64,
    /// Coefficient of `n`.
    pub c2: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    /// `c1` when the curve is written with `log10` instead: `c1 ln 10`.
    pub c1_log10: f64,
}

/// Least-squares fit of `m = c1 n ln n + c2 n`.
pub fn fit_growth_curve(points: &[(f64, f64)]) -> Result<GrowthFit> {
    if points.iter().any(|&(n, m)| !(n > 0.0 && n.is_finite() && m.is_finite())) {
        return Err(Error::InvalidParameter("growth points need n > 0 and finite m".into()));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::RankDeficient(format!("need at least 2 distinct n, got {}", distinct.len())));
    }
    let basis = |n: f64| [n * n.ln(), n];
    // Column scaling keeps the 2x2 normal equations well conditioned.
    let mut scale = [0.0f64; 2];
    for &(n, _) in points {
        let b = basis(n);
        scale[0] += b[0] * b[0];
        scale[1] += b[1] * b[1];
    }
    let scale = [scale[0].sqrt(), scale[1].sqrt()];
    if scale[0] == 0.0 {
        return Err(Error::RankDeficient("n ln n vanishes at every point".into()));
    }
    let (mut a11, mut a12, mut a22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(n, m) in points {
        let b = basis(n);
        let (x1, x2) = (b[0] / scale[0], b[1] / scale[1]);
        a11 += x1 * x1;
        a12 += x1 * x2;
        a22 += x2 * x2;
        r1 += x1 * m;
        r2 += x2 * m;
    }
    let det = a11 * a22 - a12 * a12;
    if det <= 1e-14 * a11 * a22 {
        return Err(Error::RankDeficient("n ln n and n are collinear over these sizes".into()));
    }
    let c1 = (r1 * a22 - r2 * a12) / det / scale[0];
    let c2 = (a11 * r2 - a12 * r1) / det / scale[1];
    let sse: f64 = points
        .iter()
        .map(|&(n, m)| {
            let b = basis(n);
            (m - c1 * b[0] - c2 * b[1]).powi(2)
        })
        .sum();
    Ok(GrowthFit { c1, c2, residual: (sse / points.len() as f64).sqrt(), c1_log10: c1 * std::f64::consts::LN_10 })
}
