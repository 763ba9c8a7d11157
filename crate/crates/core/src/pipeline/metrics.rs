use serde::Serialize;

use crate::error::{Error, Result};

/// Regression metrics on unscaled values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub r2: f64,
    pub mae: f64,
    /// Percent.
    pub mape: f64,
    pub n_records: usize,
    pub n_ils: usize,
}

impl MetricReport {
    pub fn with_ils(mut self, n_ils: usize) -> Self {
        self.n_ils = n_ils;
        self
    }

    /// Unweighted mean over folds; counts are summed.
    pub fn mean(reports: &[MetricReport]) -> Result<MetricReport> {
        if reports.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Ok(MetricReport {
            r2: avg(|r| r.r2),
            mae: avg(|r| r.mae),
            mape: avg(|r| r.mape),
            n_records: reports.iter().map(|r| r.n_records).sum(),
            n_ils: reports.iter().map(|r| r.n_ils).sum(),
        })
    }
}

/// MAE, MAPE and R² of `pred` against `target`.
///
/// Zero-variance targets and zero-valued targets are errors rather than
/// sentinel values.
pub fn metrics(pred: &[f64], target: &[f64]) -> Result<MetricReport> {
    if pred.len() != target.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if pred.iter().chain(target).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric input".into()));
    }
    if target.contains(&0.0) {
        return Err(Error::UndefinedMape);
    }
    let n = pred.len() as f64;
    let mean = target.iter().sum::<f64>() / n;
    let ss_tot: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 || target.iter().all(|&t| t == target[0]) {
        return Err(Error::UndefinedR2);
    }
    let mut abs = 0.0;
    let mut pct = 0.0;
    let mut ss_res = 0.0;
    for (&p, &t) in pred.iter().zip(target) {
        let e = p - t;
        abs += e.abs();
        pct += e.abs() / t.abs();
        ss_res += e * e;
    }
    Ok(MetricReport {
        r2: 1.0 - ss_res / ss_tot,
        mae: abs / n,
        mape: 100.0 * pct / n,
        n_records: pred.len(),
        n_ils: 0,
    })
}
