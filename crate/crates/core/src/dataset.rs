//! Tabular ingestion, numeric encoding and seeded train/test splits.
//!
//! Raw CSV columns are declared either continuous or nominal by a JSON
//! schema. Encoding min-max scales continuous columns into `[0, 1]` (missing
//! values take the pre-scaling column mean) and expands nominal columns into
//! one-hot indicators, with "missing" treated as a category of its own. The
//! class column becomes a one-hot target block with one column per class.
//!
//! Every transform is recorded in [`EncodingMeta`] so that the same raw
//! table can be re-encoded bit-exactly from a saved dataset export.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Label given to the category that collects missing nominal cells.
pub const MISSING_CATEGORY: &str = "<missing>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Nominal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ColumnKind,
}

/// Class column reference, either by position or by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassColumn {
    Index(usize),
    Name(String),
}

/// Column-type declarations for a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    pub class_column: ClassColumn,
    #[serde(default = "default_true")]
    pub header: bool,
    /// Extra cell tokens treated as missing, in addition to the empty cell.
    #[serde(default)]
    pub missing_values: Vec<String>,
}

fn default_true() -> bool {
    true
}

impl Schema {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn class_index(&self) -> Result<usize> {
        let idx = match &self.class_column {
            ClassColumn::Index(i) => *i,
            ClassColumn::Name(name) => self
                .columns
                .iter()
                .position(|c| &c.name == name)
                .ok_or_else(|| Error::Schema(format!("class column `{name}` is not declared")))?,
        };
        if idx >= self.columns.len() {
            return Err(Error::Schema(format!(
                "class column index {idx} out of range for {} columns",
                self.columns.len()
            )));
        }
        Ok(idx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub kind: ColumnKind,
    /// `None` marks a missing cell.
    pub cells: Vec<Option<String>>,
}

/// Cells exactly as read, before any numeric interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<RawColumn>,
    class_column: usize,
}

impl RawTable {
    pub fn new(columns: Vec<RawColumn>, class_column: usize) -> Result<Self> {
        let first = columns
            .first()
            .ok_or(Error::Empty("raw table has no columns"))?;
        let n = first.cells.len();
        if n == 0 {
            return Err(Error::Empty("raw table has no rows"));
        }
        if let Some(bad) = columns.iter().find(|c| c.cells.len() != n) {
            return Err(Error::InvalidTable(format!(
                "column `{}` has {} cells, expected {n}",
                bad.name,
                bad.cells.len()
            )));
        }
        let class = columns.get(class_column).ok_or_else(|| {
            Error::InvalidTable(format!("class column index {class_column} out of range"))
        })?;
        if class.kind != ColumnKind::Nominal {
            return Err(Error::InvalidTable(format!(
                "class column `{}` must be nominal",
                class.name
            )));
        }
        Ok(Self {
            columns,
            class_column,
        })
    }

    pub fn columns(&self) -> &[RawColumn] {
        &self.columns
    }

    pub fn class_column(&self) -> usize {
        self.class_column
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].cells.len()
    }
}

/// Reads a CSV file according to `schema`.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Same as [`load_csv`] over any reader. Row numbers in errors are 1-based
/// file lines, the header included.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<RawTable> {
    let class_column = schema.class_index()?;
    let declared = schema.columns.len();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); declared];
    let mut first_record = true;
    for (line, record) in rdr.records().enumerate() {
        let row = line + 1;
        let record = record.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        if first_record {
            first_record = false;
            if record.len() != declared {
                return Err(Error::SchemaMismatch {
                    declared,
                    found: record.len(),
                });
            }
            if schema.header {
                continue;
            }
        }
        if record.len() != declared {
            return Err(Error::RaggedRow {
                row,
                expected: declared,
                found: record.len(),
            });
        }
        for (col, field) in record.iter().enumerate() {
            let missing = field.is_empty() || schema.missing_values.iter().any(|m| m == field);
            cells[col].push((!missing).then(|| field.to_string()));
        }
    }

    let columns = schema
        .columns
        .iter()
        .zip(cells)
        .map(|(spec, cells)| RawColumn {
            name: spec.name.clone(),
            kind: spec.kind,
            cells,
        })
        .collect();
    RawTable::new(columns, class_column)
}

/// How one encoded feature column was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureTransform {
    Continuous {
        min: f64,
        max: f64,
        /// Pre-scaling mean used to impute missing cells.
        mean: f64,
        /// `max == min`; the column encodes to all zeros.
        constant: bool,
    },
    Nominal {
        /// `None` is the missing-value category.
        category: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub source_column: usize,
    pub transform: FeatureTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingMeta {
    pub features: Vec<FeatureMeta>,
    pub class_column: usize,
    pub class_labels: Vec<String>,
}

/// Fully numeric, encoded instances with one-hot targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n_instances: usize,
    n_features: usize,
    n_outputs: usize,
    /// Row-major `n_instances x n_features`.
    features: Vec<f64>,
    /// Class index per instance; targets are its one-hot expansion.
    labels: Vec<usize>,
    meta: EncodingMeta,
}

impl Dataset {
    /// Builds a dataset from already-scaled rows, e.g. synthetic data.
    /// Every feature is recorded as a continuous `[0, 1]` column.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("dataset has no rows"));
        }
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        let k = rows[0].len();
        let mut features = Vec::with_capacity(rows.len() * k);
        for row in rows {
            if row.len() != k {
                return Err(Error::Dimension {
                    what: "feature row",
                    expected: k,
                    found: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidTable(format!(
                    "feature value {v} outside [0, 1]"
                )));
            }
            features.extend_from_slice(row);
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::IndexOutOfRange {
                index: l,
                len: n_classes,
            });
        }
        let meta = EncodingMeta {
            features: (0..k)
                .map(|j| FeatureMeta {
                    name: format!("x{j}"),
                    source_column: j,
                    transform: FeatureTransform::Continuous {
                        min: 0.0,
                        max: 1.0,
                        mean: 0.0,
                        constant: false,
                    },
                })
                .collect(),
            class_column: k,
            class_labels: (0..n_classes).map(|c| c.to_string()).collect(),
        };
        Ok(Self {
            n_instances: rows.len(),
            n_features: k,
            n_outputs: n_classes,
            features,
            labels: labels.to_vec(),
            meta,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.n_instances
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn meta(&self) -> &EncodingMeta {
        &self.meta
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.meta.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn class_labels(&self) -> &[String] {
        &self.meta.class_labels
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// One-hot target row for instance `i`.
    pub fn target(&self, i: usize) -> Vec<f64> {
        let mut t = vec![0.0; self.n_outputs];
        t[self.labels[i]] = 1.0;
        t
    }

    pub fn feature_column(&self, k: usize) -> Vec<f64> {
        (0..self.n_instances)
            .map(|i| self.features[i * self.n_features + k])
            .collect()
    }

    pub fn target_column(&self, o: usize) -> Vec<f64> {
        self.labels
            .iter()
            .map(|&l| if l == o { 1.0 } else { 0.0 })
            .collect()
    }

    /// Keeps the given feature columns, in the order given.
    pub fn select_features(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::Empty("feature selection keeps no features"));
        }
        if let Some(&k) = keep.iter().find(|&&k| k >= self.n_features) {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.n_features,
            });
        }
        let mut features = Vec::with_capacity(self.n_instances * keep.len());
        for i in 0..self.n_instances {
            let row = self.features(i);
            features.extend(keep.iter().map(|&k| row[k]));
        }
        let mut meta = self.meta.clone();
        meta.features = keep.iter().map(|&k| self.meta.features[k].clone()).collect();
        Ok(Self {
            n_instances: self.n_instances,
            n_features: keep.len(),
            n_outputs: self.n_outputs,
            features,
            labels: self.labels.clone(),
            meta,
        })
    }

    /// Rows restricted to `indices`, in the order given.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty("subset has no rows"));
        }
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_instances {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.n_instances,
                });
            }
            features.extend_from_slice(self.features(i));
            labels.push(self.labels[i]);
        }
        Ok(Self {
            n_instances: indices.len(),
            n_features: self.n_features,
            n_outputs: self.n_outputs,
            features,
            labels,
            meta: self.meta.clone(),
        })
    }

    /// SHA-256 over shape, feature bits, labels and feature names.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for dim in [self.n_instances, self.n_features, self.n_outputs] {
            h.update((dim as u64).to_le_bytes());
        }
        for v in &self.features {
            h.update(v.to_bits().to_le_bytes());
        }
        for &l in &self.labels {
            h.update((l as u64).to_le_bytes());
        }
        for f in &self.meta.features {
            h.update(f.name.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("<dataset>", e))
    }
}

fn parse_number(raw: &str, column: &str, row: usize) -> Result<f64> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::InvalidTable(format!(
            "column `{column}` row {row}: `{raw}` is not a finite number"
        ))),
    }
}

fn derive_meta(raw: &RawTable) -> Result<EncodingMeta> {
    let mut features = Vec::new();
    for (idx, col) in raw.columns().iter().enumerate() {
        if idx == raw.class_column() {
            continue;
        }
        match col.kind {
            ColumnKind::Continuous => {
                let mut values = Vec::with_capacity(col.cells.len());
                for (row, cell) in col.cells.iter().enumerate() {
                    if let Some(s) = cell {
                        values.push(parse_number(s, &col.name, row)?);
                    }
                }
                let (min, max, mean) = if values.is_empty() {
                    (0.0, 0.0, 0.0)
                } else {
                    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mean = values.iter().sum::<f64>() / values.len() as f64;
                    (min, max, mean)
                };
                features.push(FeatureMeta {
                    name: col.name.clone(),
                    source_column: idx,
                    transform: FeatureTransform::Continuous {
                        min,
                        max,
                        mean,
                        constant: max <= min,
                    },
                });
            }
            ColumnKind::Nominal => {
                let cats: BTreeSet<&str> = col.cells.iter().flatten().map(String::as_str).collect();
                let has_missing = col.cells.iter().any(Option::is_none);
                for cat in cats {
                    features.push(FeatureMeta {
                        name: format!("{}={cat}", col.name),
                        source_column: idx,
                        transform: FeatureTransform::Nominal {
                            category: Some(cat.to_string()),
                        },
                    });
                }
                if has_missing {
                    features.push(FeatureMeta {
                        name: format!("{}={MISSING_CATEGORY}", col.name),
                        source_column: idx,
                        transform: FeatureTransform::Nominal { category: None },
                    });
                }
            }
        }
    }

    let class = &raw.columns()[raw.class_column()];
    if let Some(row) = class.cells.iter().position(Option::is_none) {
        return Err(Error::InvalidTable(format!(
            "class column `{}` is missing a value at row {row}",
            class.name
        )));
    }
    let class_labels: Vec<String> = class
        .cells
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if class_labels.len() < 2 {
        return Err(Error::DegenerateClass(class.name.clone()));
    }
    Ok(EncodingMeta {
        features,
        class_column: raw.class_column(),
        class_labels,
    })
}

/// Encodes a raw table, deriving the transforms from the table itself.
pub fn encode(raw: &RawTable) -> Result<Dataset> {
    let meta = derive_meta(raw)?;
    encode_with_meta(raw, &meta)
}

/// Applies previously recorded transforms to a raw table.
pub fn encode_with_meta(raw: &RawTable, meta: &EncodingMeta) -> Result<Dataset> {
    if meta.class_column != raw.class_column() {
        return Err(Error::InvalidTable(format!(
            "metadata class column {} does not match table class column {}",
            meta.class_column,
            raw.class_column()
        )));
    }
    let n = raw.n_rows();
    let k = meta.features.len();
    let mut features = vec![0.0; n * k];
    for (j, fm) in meta.features.iter().enumerate() {
        let col = raw.columns().get(fm.source_column).ok_or(Error::IndexOutOfRange {
            index: fm.source_column,
            len: raw.columns().len(),
        })?;
        for (i, cell) in col.cells.iter().enumerate() {
            let v = match &fm.transform {
                FeatureTransform::Continuous {
                    min,
                    max,
                    mean,
                    constant,
                } => {
                    if *constant {
                        0.0
                    } else {
                        let x = match cell {
                            Some(s) => parse_number(s, &col.name, i)?,
                            None => *mean,
                        };
                        ((x - min) / (max - min)).clamp(0.0, 1.0)
                    }
                }
                FeatureTransform::Nominal { category } => {
                    if cell.as_deref() == category.as_deref() {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            features[i * k + j] = v;
        }
    }

    let class = &raw.columns()[raw.class_column()];
    let labels = class
        .cells
        .iter()
        .enumerate()
        .map(|(row, cell)| {
            let cell = cell.as_deref().unwrap_or_default();
            meta.class_labels
                .iter()
                .position(|l| l == cell)
                .ok_or_else(|| {
                    Error::InvalidTable(format!("unknown class label `{cell}` at row {row}"))
                })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset {
        n_instances: n,
        n_features: k,
        n_outputs: meta.class_labels.len(),
        features,
        labels,
        meta: meta.clone(),
    })
}

/// A seeded partition of instance indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub train_fraction: f64,
}

/// Shuffles `0..n` under `seed` and takes the first `round(fraction * n)`
/// indices as the training set.
pub fn split(n: usize, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidSplit(format!("need at least 2 instances, got {n}")));
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidSplit(format!(
            "fraction {train_fraction} of {n} instances leaves an empty train or test set"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_indices = perm.split_off(n_train);
    Ok(Split {
        train_indices: perm,
        test_indices,
        seed,
        train_fraction,
    })
}
