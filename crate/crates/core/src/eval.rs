//! Repeated-trial benchmarking: accuracy reports, chi-squared feature
//! selection for the baseline, and learning curves.
//!
//! Trial `i` uses seed `base_seed + i` for both its split and its network
//! initialization, so two methods run with the same base seed see the same
//! splits (a paired comparison).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cann::{train_cann, ImportanceSpec};
use crate::dataset::{split, Dataset};
use crate::error::{Error, Result};
use crate::network::{accuracy, train_plain, TrainConfig};
use crate::stats::{chi_squared_rank, compute_importance, DEFAULT_BINS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Plain,
    Cann { p: f64 },
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Plain => "mlp",
            Method::Cann { .. } => "cann",
        }
    }
}

/// Where the target correlations for the correlation-aided method come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ImportanceSource {
    /// A fixed `K x C` matrix, e.g. loaded from an importance file.
    Fixed(Vec<f64>),
    /// Measured once on the whole dataset, test rows included.
    Full,
    /// Measured on each trial's training rows only.
    Train,
}

impl ImportanceSource {
    pub fn label(&self) -> &'static str {
        match self {
            ImportanceSource::Fixed(_) => "fixed",
            ImportanceSource::Full => "full",
            ImportanceSource::Train => "train",
        }
    }
}

/// Everything that determines a report's numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFingerprint {
    pub dataset: String,
    pub n_features: usize,
    pub base_seed: u64,
    pub n_trials: usize,
    pub train_fraction: f64,
    pub p: Option<f64>,
    pub importance: Option<String>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub architecture: Vec<usize>,
    pub init_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub method: String,
    pub seeds: Vec<u64>,
    /// Test accuracy per trial, in percent.
    pub accuracies: Vec<f64>,
    pub train_accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (`n - 1`), 0 for a single trial.
    pub std: f64,
    pub n_trials: usize,
    pub fingerprint: ConfigFingerprint,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl TrialReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,seed,train_accuracy,test_accuracy\n");
        for (t, ((seed, train), test)) in self
            .seeds
            .iter()
            .zip(&self.train_accuracies)
            .zip(&self.accuracies)
            .enumerate()
        {
            out.push_str(&format!("{t},{seed},{train},{test}\n"));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

struct TrialOutcome {
    seed: u64,
    train: f64,
    test: f64,
}

fn run_one(
    ds: &Dataset,
    method: Method,
    importance: Option<&ImportanceSource>,
    full_importance: Option<&[f64]>,
    cfg: &TrainConfig,
    train_fraction: f64,
    seed: u64,
) -> Result<TrialOutcome> {
    let sp = split(ds.n_instances(), train_fraction, seed)?;
    let trial_cfg = TrainConfig {
        seed,
        ..cfg.clone()
    };
    let mut net = trial_cfg.init_network(ds)?;
    match method {
        Method::Plain => train_plain(&mut net, ds, &sp.train_indices, &trial_cfg)?,
        Method::Cann { p } => {
            let matrix = match importance.ok_or(Error::MissingImportance)? {
                ImportanceSource::Fixed(m) => m.clone(),
                ImportanceSource::Full => full_importance.expect("computed up front").to_vec(),
                ImportanceSource::Train => {
                    compute_importance(&ds.subset(&sp.train_indices)?)?.matrix()
                }
            };
            let spec = ImportanceSpec::build(ds, &matrix, &sp.train_indices)?;
            train_cann(&mut net, ds, &sp.train_indices, &spec, &trial_cfg, p)?;
        }
    }
    Ok(TrialOutcome {
        seed,
        train: accuracy(&net, ds, &sp.train_indices)?,
        test: accuracy(&net, ds, &sp.test_indices)?,
    })
}

/// Trains and tests `n_trials` independent networks on fresh splits.
/// `importance` is required for [`Method::Cann`] and ignored otherwise.
pub fn run_trials(
    ds: &Dataset,
    method: Method,
    importance: Option<&ImportanceSource>,
    cfg: &TrainConfig,
    n_trials: usize,
    train_fraction: f64,
) -> Result<TrialReport> {
    if n_trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    cfg.validate()?;
    let uses_importance = matches!(method, Method::Cann { .. });
    if uses_importance && importance.is_none() {
        return Err(Error::MissingImportance);
    }
    let full = match importance {
        Some(ImportanceSource::Full) if uses_importance => Some(compute_importance(ds)?.matrix()),
        _ => None,
    };
    let outcomes = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| {
            run_one(
                ds,
                method,
                importance,
                full.as_deref(),
                cfg,
                train_fraction,
                cfg.seed.wrapping_add(i),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let accuracies: Vec<f64> = outcomes.iter().map(|o| o.test).collect();
    let (mean, std) = mean_std(&accuracies);
    Ok(TrialReport {
        method: method.label().to_string(),
        seeds: outcomes.iter().map(|o| o.seed).collect(),
        train_accuracies: outcomes.iter().map(|o| o.train).collect(),
        accuracies,
        mean,
        std,
        n_trials,
        fingerprint: ConfigFingerprint {
            dataset: ds.fingerprint(),
            n_features: ds.n_features(),
            base_seed: cfg.seed,
            n_trials,
            train_fraction,
            p: match method {
                Method::Cann { p } => Some(p),
                Method::Plain => None,
            },
            importance: importance
                .filter(|_| uses_importance)
                .map(|s| s.label().to_string()),
            learning_rate: cfg.learning_rate,
            epochs: cfg.epochs,
            architecture: cfg.layer_sizes(ds.n_features(), ds.n_outputs()),
            init_range: cfg.init_range,
        },
    })
}

/// Keeps the top `round(keep_fraction * K)` features by chi-squared,
/// returned in their original column order along with their indices.
pub fn select_by_chi_squared(ds: &Dataset, keep_fraction: f64) -> Result<(Dataset, Vec<usize>)> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "keep fraction {keep_fraction} must lie in (0, 1]"
        )));
    }
    let n_keep = (keep_fraction * ds.n_features() as f64).round() as usize;
    if n_keep == 0 {
        return Err(Error::Config(format!(
            "keep fraction {keep_fraction} retains no features out of {}",
            ds.n_features()
        )));
    }
    let ranked = chi_squared_rank(ds, DEFAULT_BINS)?;
    let mut kept: Vec<usize> = ranked.iter().take(n_keep).map(|s| s.feature).collect();
    kept.sort_unstable();
    Ok((ds.select_features(&kept)?, kept))
}

/// [`run_trials`] after chi-squared feature selection on the whole dataset.
pub fn run_feature_selected_trials(
    ds: &Dataset,
    keep_fraction: f64,
    method: Method,
    importance: Option<&ImportanceSource>,
    cfg: &TrainConfig,
    n_trials: usize,
    train_fraction: f64,
) -> Result<TrialReport> {
    let (selected, kept) = select_by_chi_squared(ds, keep_fraction)?;
    let c = ds.n_outputs();
    let narrowed = match importance {
        Some(ImportanceSource::Fixed(m)) => Some(ImportanceSource::Fixed(
            kept.iter()
                .flat_map(|&k| m[k * c..(k + 1) * c].iter().copied())
                .collect(),
        )),
        other => other.cloned(),
    };
    run_trials(&selected, method, narrowed.as_ref(), cfg, n_trials, train_fraction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub method: String,
    pub train_fraction: f64,
    pub mean: f64,
    pub std: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn for_method<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a CurvePoint> + 'a {
        self.points.iter().filter(move |p| p.method == label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,train_fraction,mean_accuracy,std,n_trials\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.method, p.train_fraction, p.mean, p.std, p.n_trials
            ));
        }
        out
    }
}

/// Test accuracy against training-set fraction for each method, with
/// shared seeds across methods.
pub fn learning_curve(
    ds: &Dataset,
    methods: &[Method],
    fractions: &[f64],
    importance: Option<&ImportanceSource>,
    cfg: &TrainConfig,
    n_trials: usize,
) -> Result<LearningCurve> {
    if fractions.is_empty() {
        return Err(Error::Config("learning curve needs at least one fraction".into()));
    }
    if fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
        return Err(Error::Config(format!("fractions must lie in (0, 1): {fractions:?}")));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "fractions must be strictly increasing: {fractions:?}"
        )));
    }
    let mut points = Vec::with_capacity(methods.len() * fractions.len());
    for method in methods {
        for &fraction in fractions {
            let report = run_trials(ds, *method, importance, cfg, n_trials, fraction)?;
            points.push(CurvePoint {
                method: report.method,
                train_fraction: fraction,
                mean: report.mean,
                std: report.std,
                n_trials,
            });
        }
    }
    Ok(LearningCurve { points })
}
