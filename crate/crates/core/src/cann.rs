//! Correlation-aided training.
//!
//! The objective blends the usual squared data error with a correlation
//! error, `E = p * E_D + (1 - p) * E_c`, where
//!
//! ```text
//! E_c = 1/2 * sum_{k,o} (c_ko - cov(y_o, x_k))^2,   c_ko = sigma_y[o] * sigma_x[k] * I_ko
//! ```
//!
//! and `I` holds the target feature-output correlations. `sigma_x`,
//! `sigma_y` and the feature means are fixed by the training data, so
//! matching `c` is the same as matching `I`.
//!
//! During stochastic training the means inside `cov(y_o, x_k)` and inside
//! its derivative are read from [`MeanTable`]s that are patched one
//! instance at a time as the network's outputs change. At each epoch
//! boundary every table entry is re-synced to the current network and the
//! running means are refreshed.
//!
//! Per visited instance `d` the output delta is
//!
//! ```text
//! delta_o = [p (t_o - y_o) + (1 - p) e_o] y_o (1 - y_o),   e_o = sum_k r_ko (x_k - xbar_k)
//! ```
//!
//! with `r = c - cov`, and it is propagated to lower layers by the usual
//! recursion. Output weights replace the per-instance correlation part by
//! its memoized form, `(1 - p) y_o (1 - y_o) sum_k r_ko cov(x_k, h_j)`, which
//! is what [`OutputDeltas::correction`] carries. Summed over an epoch these
//! steps descend `p * E_D + (1 - p) * n * E_c`; [`composite_gradient`] is the
//! exact full-batch gradient of `E` for checking.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::{
    data_error, epoch_order, shuffle_rng, ForwardTrace, Gradient, Network, TrainConfig,
};
use crate::stats::{mean, sample_cov, std_dev, MeanTable};

/// Blend weight used when none is given.
pub const DEFAULT_BLEND: f64 = 0.5;

fn check_blend(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::BlendWeight(p))
    }
}

fn train_digest(train: &[usize]) -> String {
    let mut sorted = train.to_vec();
    sorted.sort_unstable();
    let mut h = Sha256::new();
    for i in sorted {
        h.update((i as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Target correlations and the constants derived from them on one
/// training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSpec {
    n_features: usize,
    n_outputs: usize,
    importance: Vec<f64>,
    targets: Vec<f64>,
    sigma_x: Vec<f64>,
    sigma_y: Vec<f64>,
    xbar: Vec<f64>,
    dataset_fingerprint: String,
    train_digest: String,
}

impl ImportanceSpec {
    /// `importance` is row-major `K x C`. Statistics are taken over the
    /// `train` rows only.
    pub fn build(ds: &Dataset, importance: &[f64], train: &[usize]) -> Result<Self> {
        let (k, c) = (ds.n_features(), ds.n_outputs());
        if importance.len() != k * c {
            return Err(Error::Dimension {
                what: "importance matrix",
                expected: k * c,
                found: importance.len(),
            });
        }
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let names = ds.feature_names();
        for (idx, &v) in importance.iter().enumerate() {
            if v.abs() > 1.0 || v.is_nan() {
                return Err(Error::ImportanceRange {
                    feature: names[idx / c].clone(),
                    output: ds.class_labels()[idx % c].clone(),
                    value: v,
                });
            }
        }
        let train_ds = ds.subset(train)?;
        let columns: Vec<Vec<f64>> = (0..k).map(|j| train_ds.feature_column(j)).collect();
        let sigma_x: Vec<f64> = columns.iter().map(|x| std_dev(x)).collect();
        let xbar: Vec<f64> = columns.iter().map(|x| mean(x)).collect();
        let sigma_y: Vec<f64> = (0..c).map(|o| std_dev(&train_ds.target_column(o))).collect();
        let mut targets = vec![0.0; k * c];
        for f in 0..k {
            for o in 0..c {
                targets[f * c + o] = sigma_y[o] * sigma_x[f] * importance[f * c + o];
            }
        }
        Ok(Self {
            n_features: k,
            n_outputs: c,
            importance: importance.to_vec(),
            targets,
            sigma_x,
            sigma_y,
            xbar,
            dataset_fingerprint: ds.fingerprint(),
            train_digest: train_digest(train),
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn importance(&self) -> &[f64] {
        &self.importance
    }

    /// The covariance targets `c`, row-major `K x C`.
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn sigma_x(&self) -> &[f64] {
        &self.sigma_x
    }

    pub fn sigma_y(&self) -> &[f64] {
        &self.sigma_y
    }

    pub fn feature_means(&self) -> &[f64] {
        &self.xbar
    }

    /// Fails unless this spec was built on `ds` restricted to `train`.
    pub fn check_matches(&self, ds: &Dataset, train: &[usize]) -> Result<()> {
        let found = ds.fingerprint();
        if found != self.dataset_fingerprint {
            return Err(Error::Fingerprint {
                expected: self.dataset_fingerprint.clone(),
                found,
            });
        }
        let found = train_digest(train);
        if found != self.train_digest {
            return Err(Error::Fingerprint {
                expected: format!("train set {}", self.train_digest),
                found: format!("train set {found}"),
            });
        }
        Ok(())
    }
}

/// `0.5 * sum (c - cov)^2` over all feature/output pairs.
pub fn correlation_error(spec: &ImportanceSpec, covariances: &[f64]) -> f64 {
    0.5 * spec
        .targets
        .iter()
        .zip(covariances)
        .map(|(c, v)| (c - v) * (c - v))
        .sum::<f64>()
}

/// Memoized means needed by the correlation term, one table entry per
/// training instance.
#[derive(Debug, Clone)]
pub struct CannState {
    p: f64,
    n_features: usize,
    n_outputs: usize,
    n_hidden: usize,
    /// Table slot of each dataset row, `usize::MAX` outside the train set.
    slot: Vec<usize>,
    output_mean: Vec<MeanTable>,
    /// `x_k * y_o`, row-major `K x C`.
    feature_output: Vec<MeanTable>,
    /// `x_k * h_j` over the last hidden layer, row-major `K x H`.
    feature_hidden: Vec<MeanTable>,
    hidden_mean: Vec<MeanTable>,
}

impl CannState {
    /// Populates every table from a forward pass over `train`.
    pub fn init(net: &Network, ds: &Dataset, train: &[usize], p: f64) -> Result<Self> {
        check_blend(p)?;
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let (k, c) = (ds.n_features(), ds.n_outputs());
        let h = net.layer_sizes()[net.layer_sizes().len() - 2];
        let n = train.len();
        let mut slot = vec![usize::MAX; ds.n_instances()];
        let mut outputs = vec![vec![0.0; n]; c];
        let mut hidden = vec![vec![0.0; n]; h];
        let mut xo = vec![vec![0.0; n]; k * c];
        let mut xh = vec![vec![0.0; n]; k * h];
        for (s, &i) in train.iter().enumerate() {
            slot[i] = s;
            let trace = net.forward(ds.features(i))?;
            let x = trace.input();
            for (o, &y) in trace.output().iter().enumerate() {
                outputs[o][s] = y;
            }
            for (j, &hj) in trace.last_hidden().iter().enumerate() {
                hidden[j][s] = hj;
            }
            for (f, &xf) in x.iter().enumerate() {
                for (o, &y) in trace.output().iter().enumerate() {
                    xo[f * c + o][s] = xf * y;
                }
                for (j, &hj) in trace.last_hidden().iter().enumerate() {
                    xh[f * h + j][s] = xf * hj;
                }
            }
        }
        let tables = |cols: Vec<Vec<f64>>| -> Result<Vec<MeanTable>> {
            cols.iter().map(|v| MeanTable::new(v)).collect()
        };
        Ok(Self {
            p,
            n_features: k,
            n_outputs: c,
            n_hidden: h,
            slot,
            output_mean: tables(outputs)?,
            feature_output: tables(xo)?,
            feature_hidden: tables(xh)?,
            hidden_mean: tables(hidden)?,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn slot_of(&self, instance: usize) -> Result<usize> {
        match self.slot.get(instance) {
            Some(&s) if s != usize::MAX => Ok(s),
            _ => Err(Error::IndexOutOfRange {
                index: instance,
                len: self.slot.len(),
            }),
        }
    }

    /// Replaces instance `instance`'s entries with the activations in `trace`.
    pub fn record(&mut self, instance: usize, trace: &ForwardTrace) -> Result<()> {
        let s = self.slot_of(instance)?;
        let (c, h) = (self.n_outputs, self.n_hidden);
        let x = trace.input();
        let y = trace.output();
        let hid = trace.last_hidden();
        for (o, &yo) in y.iter().enumerate() {
            self.output_mean[o].update(s, yo)?;
        }
        for (j, &hj) in hid.iter().enumerate() {
            self.hidden_mean[j].update(s, hj)?;
        }
        for (f, &xf) in x.iter().enumerate() {
            for (o, &yo) in y.iter().enumerate() {
                self.feature_output[f * c + o].update(s, xf * yo)?;
            }
            for (j, &hj) in hid.iter().enumerate() {
                self.feature_hidden[f * h + j].update(s, xf * hj)?;
            }
        }
        Ok(())
    }

    /// Recomputes every training instance's entries from `net`, one
    /// subtract-add update at a time.
    pub fn sync(&mut self, net: &Network, ds: &Dataset, train: &[usize]) -> Result<()> {
        for &i in train {
            let trace = net.forward(ds.features(i))?;
            self.record(i, &trace)?;
        }
        Ok(())
    }

    pub fn refresh(&mut self) {
        self.tables_mut().for_each(MeanTable::refresh);
    }

    fn tables(&self) -> impl Iterator<Item = &MeanTable> {
        self.output_mean
            .iter()
            .chain(&self.feature_output)
            .chain(&self.feature_hidden)
            .chain(&self.hidden_mean)
    }

    fn tables_mut(&mut self) -> impl Iterator<Item = &mut MeanTable> {
        self.output_mean
            .iter_mut()
            .chain(self.feature_output.iter_mut())
            .chain(self.feature_hidden.iter_mut())
            .chain(self.hidden_mean.iter_mut())
    }

    pub fn n_tables(&self) -> usize {
        self.tables().count()
    }

    /// Stored per-instance entries across all tables.
    pub fn table_entries(&self) -> usize {
        self.tables().map(MeanTable::len).sum()
    }

    /// `mean(x_k y_o) - xbar_k * mean(y_o)`, row-major `K x C`.
    pub fn covariances(&self, spec: &ImportanceSpec) -> Vec<f64> {
        let c = self.n_outputs;
        let mut cov = Vec::with_capacity(self.n_features * c);
        for f in 0..self.n_features {
            for o in 0..c {
                cov.push(
                    self.feature_output[f * c + o].mean()
                        - spec.xbar[f] * self.output_mean[o].mean(),
                );
            }
        }
        cov
    }

    /// `mean(x_k h_j) - xbar_k * mean(h_j)`, row-major `K x H`.
    pub fn hidden_covariances(&self, spec: &ImportanceSpec) -> Vec<f64> {
        let h = self.n_hidden;
        let mut cov = Vec::with_capacity(self.n_features * h);
        for f in 0..self.n_features {
            for j in 0..h {
                cov.push(
                    self.feature_hidden[f * h + j].mean()
                        - spec.xbar[f] * self.hidden_mean[j].mean(),
                );
            }
        }
        cov
    }

    pub fn correlation_error(&self, spec: &ImportanceSpec) -> f64 {
        correlation_error(spec, &self.covariances(spec))
    }
}

/// Extra terms added to the output layer's descent direction.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputCorrection {
    /// Row-major `H x C`, same layout as the output weight matrix.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputDeltas {
    /// Blended output deltas, propagated to the lower layers.
    pub deltas: Vec<f64>,
    /// `None` when `p == 1`, where the step is plain backpropagation.
    pub correction: Option<OutputCorrection>,
}

/// Output deltas for one instance under the blended objective, using the
/// memoized means in `state`.
pub fn cann_output_deltas(
    trace: &ForwardTrace,
    target: &[f64],
    state: &CannState,
    spec: &ImportanceSpec,
) -> Result<OutputDeltas> {
    let p = state.p;
    check_blend(p)?;
    let (k, c, h) = (state.n_features, state.n_outputs, state.n_hidden);
    let y = trace.output();
    if target.len() != c || y.len() != c {
        return Err(Error::Dimension {
            what: "target row",
            expected: c,
            found: target.len(),
        });
    }
    let x = trace.input();
    let residual: Vec<f64> = spec
        .targets
        .iter()
        .zip(state.covariances(spec))
        .map(|(c, v)| c - v)
        .collect();
    let signal: Vec<f64> = (0..c)
        .map(|o| (0..k).map(|f| residual[f * c + o] * (x[f] - spec.xbar[f])).sum())
        .collect();

    let deltas = y
        .iter()
        .zip(target)
        .zip(&signal)
        .map(|((y, t), e)| (p * (t - y) + (1.0 - p) * e) * y * (1.0 - y))
        .collect();

    let correction = (p < 1.0).then(|| {
        let hcov = state.hidden_covariances(spec);
        let hid = trace.last_hidden();
        let mut weights = vec![0.0; h * c];
        for j in 0..h {
            for o in 0..c {
                let memo: f64 = (0..k).map(|f| residual[f * c + o] * hcov[f * h + j]).sum();
                let slope = y[o] * (1.0 - y[o]);
                weights[j * c + o] = (1.0 - p) * slope * (memo - signal[o] * hid[j]);
            }
        }
        let biases = (0..c)
            .map(|o| -(1.0 - p) * y[o] * (1.0 - y[o]) * signal[o])
            .collect();
        OutputCorrection { weights, biases }
    });
    Ok(OutputDeltas { deltas, correction })
}

/// Covariances of the network outputs with each feature over `train`,
/// recomputed directly from a forward pass.
pub fn exact_covariances(net: &Network, ds: &Dataset, train: &[usize]) -> Result<Vec<f64>> {
    let c = ds.n_outputs();
    let mut outputs = vec![Vec::with_capacity(train.len()); c];
    for &i in train {
        for (o, y) in net.output(ds.features(i))?.into_iter().enumerate() {
            outputs[o].push(y);
        }
    }
    let train_ds = ds.subset(train)?;
    let mut cov = Vec::with_capacity(ds.n_features() * c);
    for f in 0..ds.n_features() {
        let x = train_ds.feature_column(f);
        for y in &outputs {
            cov.push(sample_cov(&x, y)?);
        }
    }
    Ok(cov)
}

pub fn exact_correlation_error(
    net: &Network,
    ds: &Dataset,
    train: &[usize],
    spec: &ImportanceSpec,
) -> Result<f64> {
    Ok(correlation_error(spec, &exact_covariances(net, ds, train)?))
}

/// `p * E_D + (1 - p) * E_c` over `train` with exact means.
pub fn composite_objective(
    net: &Network,
    ds: &Dataset,
    train: &[usize],
    spec: &ImportanceSpec,
    p: f64,
) -> Result<f64> {
    check_blend(p)?;
    let ed = data_error(net, ds, train)?;
    let ec = exact_correlation_error(net, ds, train, spec)?;
    Ok(p * ed + (1.0 - p) * ec)
}

/// Negative full-batch gradient of [`composite_objective`] with respect to
/// every weight and bias.
pub fn composite_gradient(
    net: &Network,
    ds: &Dataset,
    train: &[usize],
    spec: &ImportanceSpec,
    p: f64,
) -> Result<Gradient> {
    check_blend(p)?;
    spec.check_matches(ds, train)?;
    let c = ds.n_outputs();
    let n = train.len() as f64;
    let residual: Vec<f64> = spec
        .targets
        .iter()
        .zip(exact_covariances(net, ds, train)?)
        .map(|(c, v)| c - v)
        .collect();
    let mut total = net.zero_gradient();
    for &i in train {
        let trace = net.forward(ds.features(i))?;
        let x = trace.input();
        let t = ds.target(i);
        let deltas: Vec<f64> = (0..c)
            .map(|o| {
                let y = trace.output()[o];
                let corr: f64 = (0..ds.n_features())
                    .map(|f| residual[f * c + o] * (x[f] - spec.xbar[f]))
                    .sum::<f64>()
                    / n;
                (p * (t[o] - y) + (1.0 - p) * corr) * y * (1.0 - y)
            })
            .collect();
        total.add_assign(&net.gradient(&trace, &deltas)?);
    }
    Ok(total)
}

/// Stochastic correlation-aided training with explicit epoch control.
pub struct CannTrainer<'a> {
    net: &'a mut Network,
    ds: &'a Dataset,
    train: &'a [usize],
    spec: &'a ImportanceSpec,
    cfg: &'a TrainConfig,
    state: CannState,
    rng: rand_chacha::ChaCha8Rng,
}

impl<'a> CannTrainer<'a> {
    pub fn new(
        net: &'a mut Network,
        ds: &'a Dataset,
        train: &'a [usize],
        spec: &'a ImportanceSpec,
        cfg: &'a TrainConfig,
        p: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        check_blend(p)?;
        spec.check_matches(ds, train)?;
        if net.n_inputs() != ds.n_features() || net.n_outputs() != ds.n_outputs() {
            return Err(Error::Dimension {
                what: "network shape",
                expected: ds.n_features(),
                found: net.n_inputs(),
            });
        }
        let state = CannState::init(net, ds, train, p)?;
        Ok(Self {
            net,
            ds,
            train,
            spec,
            cfg,
            state,
            rng: shuffle_rng(cfg.seed),
        })
    }

    /// One pass over the shuffled training set. Tables are patched after
    /// each instance but not re-synced.
    pub fn run_epoch(&mut self) -> Result<()> {
        for i in epoch_order(&mut self.rng, self.train) {
            let trace = self.net.forward(self.ds.features(i))?;
            let out = cann_output_deltas(&trace, &self.ds.target(i), &self.state, self.spec)?;
            let mut grad = self.net.gradient(&trace, &out.deltas)?;
            if let Some(corr) = &out.correction {
                let last = grad.weights.len() - 1;
                grad.weights[last]
                    .iter_mut()
                    .zip(&corr.weights)
                    .for_each(|(g, d)| *g += d);
                grad.biases[last]
                    .iter_mut()
                    .zip(&corr.biases)
                    .for_each(|(g, d)| *g += d);
            }
            self.net.apply(&grad, self.cfg.learning_rate);
            self.state.record(i, &trace)?;
        }
        Ok(())
    }

    pub fn sync_tables(&mut self) -> Result<()> {
        self.state.sync(self.net, self.ds, self.train)
    }

    pub fn refresh_tables(&mut self) {
        self.state.refresh();
    }

    pub fn state(&self) -> &CannState {
        &self.state
    }

    pub fn network(&self) -> &Network {
        self.net
    }
}

pub fn train_cann(
    net: &mut Network,
    ds: &Dataset,
    train: &[usize],
    spec: &ImportanceSpec,
    cfg: &TrainConfig,
    p: f64,
) -> Result<()> {
    train_cann_with(net, ds, train, spec, cfg, p, |_, _, _| Ok(()))
}

/// Like [`train_cann`], calling `on_epoch(epoch, net, state)` after each
/// epoch's table sync and refresh.
pub fn train_cann_with<F>(
    net: &mut Network,
    ds: &Dataset,
    train: &[usize],
    spec: &ImportanceSpec,
    cfg: &TrainConfig,
    p: f64,
    mut on_epoch: F,
) -> Result<()>
where
    F: FnMut(usize, &Network, &CannState) -> Result<()>,
{
    let mut trainer = CannTrainer::new(net, ds, train, spec, cfg, p)?;
    for epoch in 0..cfg.epochs {
        trainer.run_epoch()?;
        trainer.sync_tables()?;
        trainer.refresh_tables();
        on_epoch(epoch, trainer.net, &trainer.state)?;
    }
    Ok(())
}
