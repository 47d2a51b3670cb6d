//! Sample statistics with the `1/N` convention throughout.
//!
//! Feature importance is the Pearson correlation between an encoded feature
//! column and a one-hot output column. Columns with zero variance have no
//! defined correlation; they are flagged and reported as 0.

mod chi2;
mod importance_file;
mod mean_table;

pub use chi2::{chi_squared_rank, chi_squared_statistic, FeatureScore, DEFAULT_BINS};
pub use importance_file::{ImportanceEntry, ImportanceFile, ImportanceScope};
pub use mean_table::MeanTable;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

fn check_lengths(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(())
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation; exactly 0 for a constant column.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// `(1/N) * sum (x_i - mean x)(y_i - mean y)`.
pub fn sample_cov(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    if x.is_empty() {
        return Err(Error::Empty("covariance of empty samples"));
    }
    let (mx, my) = (mean(x), mean(y));
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(s / x.len() as f64)
}

/// Pearson correlation, `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_lengths(x, y)?;
    if x.len() < 2 {
        return Err(Error::Empty("pearson correlation needs at least two samples"));
    }
    let (sx, sy) = (std_dev(x), std_dev(y));
    if sx == 0.0 || sy == 0.0 {
        return Ok(None);
    }
    Ok(Some(sample_cov(x, y)? / (sx * sy)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    /// Reported as 0 when `undefined`.
    pub correlation: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub covariance: f64,
    pub undefined: bool,
}

/// Feature x output correlations, row-major by feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n_features: usize,
    pub n_outputs: usize,
    pub entries: Vec<CorrelationEntry>,
}

impl CorrelationReport {
    pub fn get(&self, feature: usize, output: usize) -> &CorrelationEntry {
        &self.entries[feature * self.n_outputs + output]
    }

    pub fn correlation(&self, feature: usize, output: usize) -> f64 {
        self.get(feature, output).correlation
    }

    /// The `K x C` correlation matrix, row-major.
    pub fn matrix(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.correlation).collect()
    }
}

pub fn compute_importance(ds: &Dataset) -> Result<CorrelationReport> {
    let targets: Vec<Vec<f64>> = (0..ds.n_outputs()).map(|o| ds.target_column(o)).collect();
    let sigma_y: Vec<f64> = targets.iter().map(|t| std_dev(t)).collect();
    let mut entries = Vec::with_capacity(ds.n_features() * ds.n_outputs());
    for k in 0..ds.n_features() {
        let x = ds.feature_column(k);
        let sigma_x = std_dev(&x);
        for (o, y) in targets.iter().enumerate() {
            let covariance = sample_cov(&x, y)?;
            let r = pearson(&x, y)?;
            entries.push(CorrelationEntry {
                correlation: r.unwrap_or(0.0),
                sigma_x,
                sigma_y: sigma_y[o],
                covariance,
                undefined: r.is_none(),
            });
        }
    }
    Ok(CorrelationReport {
        n_features: ds.n_features(),
        n_outputs: ds.n_outputs(),
        entries,
    })
}
