//! Error summaries in box-plot form.
//!
//! Quartiles use linear interpolation between order statistics: the p-quantile
//! of n sorted values sits at fractional rank `p·(n − 1)`. Whiskers extend
//! 1.0 × IQR beyond the quartiles; values outside them are outliers.

use std::path::Path;

use crate::error::{Error, Result};
use crate::text::fmt_f64;

pub const WHISKER_IQR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Per-point errors in µm.
    pub errors: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    /// Indices into `errors` of values beyond the whiskers.
    pub outliers: Vec<usize>,
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn report_stats(errors: &[f64]) -> Result<ErrorReport> {
    if errors.is_empty() {
        return Err(Error::Empty("error list"));
    }
    if let Some(bad) = errors.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::InvalidParameter(format!("error value {bad}")));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let whisker_low = q1 - WHISKER_IQR * iqr;
    let whisker_high = q3 + WHISKER_IQR * iqr;
    let outliers = errors
        .iter()
        .enumerate()
        .filter(|(_, &e)| e < whisker_low || e > whisker_high)
        .map(|(i, _)| i)
        .collect();
    Ok(ErrorReport {
        errors: errors.to_vec(),
        mean: errors.iter().sum::<f64>() / errors.len() as f64,
        median: quantile_sorted(&sorted, 0.5),
        q1,
        q3,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        whisker_low,
        whisker_high,
        outliers,
    })
}

impl ErrorReport {
    /// `index,e_um` rows followed by a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,e_um\n");
        for (i, e) in self.errors.iter().enumerate() {
            s.push_str(&format!("{i},{}\n", fmt_f64(*e, 6)));
        }
        s.push_str(&format!("mean,{}\n", fmt_f64(self.mean, 6)));
        s
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        crate::text::write_string(path, &self.to_csv())
    }

    /// Reads the per-point errors back from a CSV written by [`to_csv`]
    /// (summary rows are ignored).
    ///
    /// [`to_csv`]: ErrorReport::to_csv
    pub fn errors_from_csv(text: &str, path: &Path) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || n == 0 && line.starts_with("index") {
                continue;
            }
            let (idx, val) = line
                .split_once(',')
                .ok_or_else(|| Error::format(path, format!("line {}: expected 'index,e_um'", n + 1)))?;
            if idx.trim().parse::<usize>().is_err() {
                continue;
            }
            out.push(crate::text::parse_f64(val, "e_um", path)?);
        }
        Ok(out)
    }

    /// Multi-line human-readable summary.
    pub fn summary(&self) -> String {
        format!(
            "n={}\nmean_um={:.4}\nmedian_um={:.4}\nq1_um={:.4}\nq3_um={:.4}\nmin_um={:.4}\nmax_um={:.4}\nwhiskers_um=[{:.4}, {:.4}]\noutliers={:?}\n",
            self.errors.len(),
            self.mean,
            self.median,
            self.q1,
            self.q3,
            self.min,
            self.max,
            self.whisker_low,
            self.whisker_high,
            self.outliers
        )
    }
}
