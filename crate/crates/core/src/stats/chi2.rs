use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureTransform};
use crate::error::{Error, Result};

/// Equal-frequency bins used for continuous features.
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: usize,
    pub chi_squared: f64,
}

/// Pearson's chi-squared statistic of a contingency table
/// (rows = feature bins, columns = classes). Cells whose expected count is
/// zero are skipped.
pub fn chi_squared_statistic(observed: &[Vec<f64>]) -> f64 {
    let n_cols = observed.first().map_or(0, Vec::len);
    let row_totals: Vec<f64> = observed.iter().map(|r| r.iter().sum()).collect();
    let col_totals: Vec<f64> = (0..n_cols)
        .map(|c| observed.iter().map(|r| r[c]).sum())
        .collect();
    let total: f64 = row_totals.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut chi = 0.0;
    for (r, row) in observed.iter().enumerate() {
        for (c, &obs) in row.iter().enumerate() {
            let expected = row_totals[r] * col_totals[c] / total;
            if expected > 0.0 {
                chi += (obs - expected).powi(2) / expected;
            }
        }
    }
    chi
}

/// Bin index per value; equal values always share a bin.
fn equal_frequency_bins(values: &[f64], bins: usize) -> (Vec<usize>, usize) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut cuts: Vec<f64> = (1..bins).map(|b| sorted[b * n / bins]).collect();
    cuts.dedup();
    // a cut at the minimum would leave bin 0 empty
    cuts.retain(|&c| c > sorted[0]);
    let assigned = values
        .iter()
        .map(|v| cuts.partition_point(|&c| c <= *v))
        .collect();
    (assigned, cuts.len() + 1)
}

/// Scores every encoded feature by chi-squared against the class and
/// returns them best first, ties going to the lower index. One-hot columns
/// are used as-is; continuous columns are cut into at most `bins`
/// equal-frequency bins.
pub fn chi_squared_rank(ds: &Dataset, bins: usize) -> Result<Vec<FeatureScore>> {
    if bins < 2 {
        return Err(Error::Config(format!("chi-squared needs at least 2 bins, got {bins}")));
    }
    let n_classes = ds.n_outputs();
    let mut present = vec![false; n_classes];
    for &l in ds.labels() {
        present[l] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::DegenerateClass("class".into()));
    }

    let mut scores = Vec::with_capacity(ds.n_features());
    for k in 0..ds.n_features() {
        let column = ds.feature_column(k);
        let (assigned, n_bins) = match ds.meta().features[k].transform {
            FeatureTransform::Nominal { .. } => {
                (column.iter().map(|&v| usize::from(v > 0.5)).collect(), 2)
            }
            FeatureTransform::Continuous { .. } => equal_frequency_bins(&column, bins),
        };
        let mut table = vec![vec![0.0; n_classes]; n_bins];
        for (b, &l) in assigned.iter().zip(ds.labels()) {
            table[*b][l] += 1.0;
        }
        scores.push(FeatureScore {
            feature: k,
            chi_squared: chi_squared_statistic(&table),
        });
    }
    scores.sort_by(|a, b| {
        b.chi_squared
            .total_cmp(&a.chi_squared)
            .then(a.feature.cmp(&b.feature))
    });
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfectly_separating_table() {
        // expected counts all 5: 4 * 25 / 5
        let chi = chi_squared_statistic(&[vec![10.0, 0.0], vec![0.0, 10.0]]);
        assert!((chi - 20.0).abs() < 1e-12);
    }

    #[test]
    fn independent_table_is_zero() {
        let chi = chi_squared_statistic(&[vec![3.0, 6.0], vec![5.0, 10.0]]);
        assert!(chi.abs() < 1e-12);
    }

    #[test]
    fn bins_respect_ties_and_limit() {
        let (b, n) = equal_frequency_bins(&[0.0, 0.0, 0.0, 1.0], 4);
        assert_eq!(n, 2);
        assert_eq!(b, vec![0, 0, 0, 1]);
        let vals: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let (b, n) = equal_frequency_bins(&vals, 10);
        assert_eq!(n, 10);
        for bin in 0..10 {
            assert_eq!(b.iter().filter(|&&x| x == bin).count(), 10);
        }
    }

    #[test]
    fn ranking_puts_separating_feature_first() {
        // feature 0 independent of class, feature 1 separates perfectly
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let class = usize::from(i >= 10);
            rows.push(vec![(i % 2) as f64, class as f64]);
            labels.push(class);
        }
        let ds = crate::Dataset::from_rows(&rows, &labels, 2).unwrap();
        let ranked = chi_squared_rank(&ds, DEFAULT_BINS).unwrap();
        assert_eq!(ranked[0].feature, 1);
        assert!((ranked[0].chi_squared - 20.0).abs() < 1e-12);
        assert!(ranked[1].chi_squared.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let ds = crate::Dataset::from_rows(&[vec![0.1], vec![0.2]], &[0, 0], 2).unwrap();
        assert!(chi_squared_rank(&ds, 10).is_err());
        let ds = crate::Dataset::from_rows(&[vec![0.1], vec![0.2]], &[0, 1], 2).unwrap();
        assert!(chi_squared_rank(&ds, 1).is_err());
    }
}
