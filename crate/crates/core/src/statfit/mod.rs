//! Degree statistics, discrete power-law fitting and Monte-Carlo oracles.

mod mc;
mod powerlaw;

use std::io::Write;

use serde::Serialize;

use crate::{Error, Result};

pub use mc::{mc_estimate, McEstimate, McKind};
pub use powerlaw::{fit_powerlaw_discrete, gof_pvalue, DiscretePowerLaw, FitResult, GofResult, MIN_TAIL};

/// Empirical CCDF over the distinct nonzero degrees.
///
/// Zero degrees are left out of the fractions (they have no place on a
/// log-log plot) and reported separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcdfSeries {
    /// `(k, fraction of nonzero degrees >= k)`, increasing in `k`.
    pub points: Vec<(u64, f64)>,
    pub zero_count: usize,
    pub nonzero_count: usize,
}

pub fn ccdf(degrees: &[u64]) -> Result<CcdfSeries> {
    if degrees.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut sorted: Vec<u64> = degrees.iter().copied().filter(|&k| k > 0).collect();
    let zero_count = degrees.len() - sorted.len();
    if sorted.is_empty() {
        return Err(Error::FitDegenerate("every degree is zero".into()));
    }
    sorted.sort_unstable();
    let total = sorted.len();
    let mut points = Vec::new();
    let mut i = 0;
    while i < total {
        let k = sorted[i];
        points.push((k, (total - i) as f64 / total as f64));
        while i < total && sorted[i] == k {
            i += 1;
        }
    }
    Ok(CcdfSeries { points, zero_count, nonzero_count: total })
}

impl CcdfSeries {
    /// Least-squares slope of `ln CCDF` against `ln k` over points with
    /// `k_lo <= k <= k_hi`.
    pub fn loglog_slope(&self, k_lo: u64, k_hi: u64) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|(k, _)| (k_lo..=k_hi).contains(k))
            .map(|&(k, f)| ((k as f64).ln(), f.ln()))
            .collect();
        if pts.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: pts.len() });
        }
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Ok(sxy / sxx)
    }

    /// Plot-ready CSV with header `k,ccdf`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "ccdf"]).map_err(csv_io)?;
        for &(k, f) in &self.points {
            w.write_record([k.to_string(), format!("{f:.17e}")]).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
