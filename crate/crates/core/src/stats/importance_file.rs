use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::stats::CorrelationReport;

/// Which instances the correlations were measured on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ImportanceScope {
    Full,
    Train { seed: u64, train_fraction: f64 },
    /// Supplied from outside, e.g. by a domain expert.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub output: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub undefined: bool,
}

/// Target correlations keyed by (feature name, output label).
///
/// Pairs without an entry default to 0. When `dataset_fingerprint` is set it
/// must match the dataset the file is resolved against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_fingerprint: Option<String>,
    pub scope: ImportanceScope,
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceFile {
    pub fn from_report(ds: &Dataset, report: &CorrelationReport, scope: ImportanceScope) -> Self {
        let names = ds.feature_names();
        let mut entries = Vec::with_capacity(report.entries.len());
        for (k, name) in names.iter().enumerate() {
            for (o, label) in ds.class_labels().iter().enumerate() {
                let e = report.get(k, o);
                entries.push(ImportanceEntry {
                    feature: name.clone(),
                    output: label.clone(),
                    value: e.correlation,
                    undefined: e.undefined,
                });
            }
        }
        Self {
            dataset_fingerprint: Some(ds.fingerprint()),
            scope,
            entries,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.entries {
            if e.value.abs() > 1.0 || e.value.is_nan() {
                return Err(Error::ImportanceRange {
                    feature: e.feature.clone(),
                    output: e.output.clone(),
                    value: e.value,
                });
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("importance file serializes");
        s.push('\n');
        s
    }

    /// Resolves the entries into a row-major `K x C` matrix for `ds`.
    pub fn matrix_for(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.validate()?;
        if let Some(fp) = &self.dataset_fingerprint {
            let found = ds.fingerprint();
            if *fp != found {
                return Err(Error::Fingerprint {
                    expected: fp.clone(),
                    found,
                });
            }
        }
        let names = ds.feature_names();
        let labels = ds.class_labels();
        let mut matrix = vec![0.0; names.len() * labels.len()];
        for e in &self.entries {
            let k = names.iter().position(|n| *n == e.feature).ok_or_else(|| {
                Error::Config(format!("importance names unknown feature `{}`", e.feature))
            })?;
            let o = labels.iter().position(|l| *l == e.output).ok_or_else(|| {
                Error::Config(format!("importance names unknown output `{}`", e.output))
            })?;
            matrix[k * labels.len() + o] = e.value;
        }
        Ok(matrix)
    }
}
