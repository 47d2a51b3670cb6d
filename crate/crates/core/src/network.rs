//! Logistic feed-forward network and plain stochastic backpropagation.
//!
//! Weights between layer `l` and `l + 1` are stored row-major as an
//! `n_l x n_{l+1}` matrix, so `weights[l][i * n_{l+1} + j]` connects unit `i`
//! to unit `j`. Deltas are the negative error gradient with respect to a
//! unit's net input, and every update adds `alpha * delta * upstream`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Hidden layer width used when none is configured: `max(4, ceil((K + C) / 2))`.
pub fn default_hidden_size(n_features: usize, n_outputs: usize) -> usize {
    (n_features + n_outputs).div_ceil(2).max(4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub hidden_sizes: Vec<usize>,
    pub seed: u64,
    pub init_range: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "hidden sizes must be a non-empty list of positive widths, got {:?}",
                self.hidden_sizes
            )));
        }
        if !(self.init_range > 0.0 && self.init_range.is_finite()) {
            return Err(Error::Config(format!(
                "init range must be positive, got {}",
                self.init_range
            )));
        }
        Ok(())
    }

    pub fn layer_sizes(&self, n_features: usize, n_outputs: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden_sizes.len() + 2);
        sizes.push(n_features);
        sizes.extend_from_slice(&self.hidden_sizes);
        sizes.push(n_outputs);
        sizes
    }

    /// Freshly initialized network for `ds` under this configuration.
    pub fn init_network(&self, ds: &Dataset) -> Result<Network> {
        self.validate()?;
        Network::init(
            &self.layer_sizes(ds.n_features(), ds.n_outputs()),
            self.seed,
            self.init_range,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Activations of every layer for one input; `activations[0]` is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has an output layer")
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }

    /// Activations of the layer feeding the output layer.
    pub fn last_hidden(&self) -> &[f64] {
        &self.activations[self.activations.len() - 2]
    }
}

/// Same shapes as a network's parameters; holds a descent direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradient {
    pub fn add_assign(&mut self, other: &Gradient) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flatten()
            .chain(self.biases.iter().flatten())
            .copied()
            .collect()
    }
}

impl Network {
    pub fn init(layer_sizes: &[usize], seed: u64, init_range: f64) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(Error::Config(format!(
                "need input, at least one hidden and an output layer, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config(format!("zero-size layer in {layer_sizes:?}")));
        }
        if !(init_range >= 0.0 && init_range.is_finite()) {
            return Err(Error::Config(format!("invalid init range {init_range}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |len: usize| -> Vec<f64> {
            if init_range == 0.0 {
                vec![0.0; len]
            } else {
                (0..len)
                    .map(|_| rng.gen_range(-init_range..=init_range))
                    .collect()
            }
        };
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_sizes.windows(2) {
            weights.push(draw(pair[0] * pair[1]));
            biases.push(draw(pair[1]));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Builds a network from explicit parameters, checking every shape.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let net = Self {
            layer_sizes,
            weights,
            biases,
        };
        net.check_shapes()?;
        Ok(net)
    }

    pub fn check_shapes(&self) -> Result<()> {
        let layers = self.layer_sizes.len();
        if layers < 3 || self.weights.len() != layers - 1 || self.biases.len() != layers - 1 {
            return Err(Error::Dimension {
                what: "layer count",
                expected: layers.saturating_sub(1),
                found: self.weights.len(),
            });
        }
        for (l, pair) in self.layer_sizes.windows(2).enumerate() {
            if self.weights[l].len() != pair[0] * pair[1] {
                return Err(Error::Dimension {
                    what: "weight matrix",
                    expected: pair[0] * pair[1],
                    found: self.weights[l].len(),
                });
            }
            if self.biases[l].len() != pair[1] {
                return Err(Error::Dimension {
                    what: "bias vector",
                    expected: pair[1],
                    found: self.biases[l].len(),
                });
            }
        }
        let finite = self
            .weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("network has non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weight(&self, layer: usize, from: usize, to: usize) -> f64 {
        self.weights[layer][from * self.layer_sizes[layer + 1] + to]
    }

    pub fn weight_mut(&mut self, layer: usize, from: usize, to: usize) -> &mut f64 {
        let width = self.layer_sizes[layer + 1];
        &mut self.weights[layer][from * width + to]
    }

    pub fn bias_mut(&mut self, layer: usize, unit: usize) -> &mut f64 {
        &mut self.biases[layer][unit]
    }

    /// Total number of weights and biases.
    pub fn n_parameters(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Mutable view of parameter `index` in [`Gradient::flatten`] order.
    pub fn parameter_mut(&mut self, mut index: usize) -> &mut f64 {
        for w in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            if index < w.len() {
                return &mut w[index];
            }
            index -= w.len();
        }
        panic!("parameter index out of range");
    }

    pub fn zero_gradient(&self) -> Gradient {
        Gradient {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.n_inputs() {
            return Err(Error::Dimension {
                what: "network input",
                expected: self.n_inputs(),
                found: x.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.layer_sizes.len());
        activations.push(x.to_vec());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let below = &activations[l];
            let width = self.layer_sizes[l + 1];
            let next: Vec<f64> = (0..width)
                .map(|j| {
                    let net: f64 = below
                        .iter()
                        .enumerate()
                        .map(|(i, h)| w[i * width + j] * h)
                        .sum();
                    sigmoid(net + b[j])
                })
                .collect();
            activations.push(next);
        }
        Ok(ForwardTrace { activations })
    }

    pub fn output(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.activations.pop().unwrap())
    }

    /// Argmax of the output layer, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.output(x)?))
    }

    /// Deltas for every non-input layer, output layer last. Hidden deltas
    /// follow `delta_j = h_j (1 - h_j) * sum_p delta_p w_jp`.
    pub fn deltas(&self, trace: &ForwardTrace, output_deltas: &[f64]) -> Result<Vec<Vec<f64>>> {
        if output_deltas.len() != self.n_outputs() {
            return Err(Error::Dimension {
                what: "output deltas",
                expected: self.n_outputs(),
                found: output_deltas.len(),
            });
        }
        if trace.activations.len() != self.layer_sizes.len()
            || trace
                .activations
                .iter()
                .zip(&self.layer_sizes)
                .any(|(a, &n)| a.len() != n)
        {
            return Err(Error::Dimension {
                what: "forward trace",
                expected: self.layer_sizes.len(),
                found: trace.activations.len(),
            });
        }
        let n_layers = self.weights.len();
        let mut deltas = vec![Vec::new(); n_layers];
        deltas[n_layers - 1] = output_deltas.to_vec();
        for l in (0..n_layers - 1).rev() {
            let width = self.layer_sizes[l + 2];
            let above = &deltas[l + 1];
            let w = &self.weights[l + 1];
            let h = &trace.activations[l + 1];
            deltas[l] = h
                .iter()
                .enumerate()
                .map(|(j, &hj)| {
                    let back: f64 = above
                        .iter()
                        .enumerate()
                        .map(|(p, d)| d * w[j * width + p])
                        .sum();
                    hj * (1.0 - hj) * back
                })
                .collect();
        }
        Ok(deltas)
    }

    /// Descent direction `delta_downstream * h_upstream` for one instance.
    pub fn gradient(&self, trace: &ForwardTrace, output_deltas: &[f64]) -> Result<Gradient> {
        let deltas = self.deltas(trace, output_deltas)?;
        let mut grad = self.zero_gradient();
        for (l, d) in deltas.iter().enumerate() {
            let width = self.layer_sizes[l + 1];
            for (i, h) in trace.activations[l].iter().enumerate() {
                let row = &mut grad.weights[l][i * width..(i + 1) * width];
                row.iter_mut().zip(d).for_each(|(g, dj)| *g = dj * h);
            }
            grad.biases[l].copy_from_slice(d);
        }
        Ok(grad)
    }

    /// `params += alpha * grad`.
    pub fn apply(&mut self, grad: &Gradient, alpha: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            w.iter_mut().zip(g).for_each(|(w, g)| *w += alpha * g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grad.biases) {
            b.iter_mut().zip(g).for_each(|(b, g)| *b += alpha * g);
        }
    }

    pub fn backprop_step(
        &mut self,
        trace: &ForwardTrace,
        output_deltas: &[f64],
        alpha: f64,
    ) -> Result<()> {
        let grad = self.gradient(trace, output_deltas)?;
        self.apply(&grad, alpha);
        Ok(())
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Standard backprop output deltas `(t - y) y (1 - y)`.
pub fn plain_output_deltas(output: &[f64], target: &[f64]) -> Vec<f64> {
    output
        .iter()
        .zip(target)
        .map(|(y, t)| (t - y) * y * (1.0 - y))
        .collect()
}

/// `0.5 * sum over instances and outputs of (t - y)^2`.
pub fn data_error(net: &Network, ds: &Dataset, indices: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &i in indices {
        let y = net.output(ds.features(i))?;
        let t = ds.target(i);
        total += y.iter().zip(&t).map(|(y, t)| (t - y) * (t - y)).sum::<f64>();
    }
    Ok(0.5 * total)
}

/// Percentage of `indices` classified correctly.
pub fn accuracy(net: &Network, ds: &Dataset, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Empty("accuracy over no instances"));
    }
    let correct = indices
        .par_iter()
        .map(|&i| net.predict(ds.features(i)).map(|p| usize::from(p == ds.label(i))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(100.0 * correct as f64 / indices.len() as f64)
}

/// RNG that drives the per-epoch visiting order.
pub(crate) fn shuffle_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

pub(crate) fn epoch_order(rng: &mut ChaCha8Rng, train: &[usize]) -> Vec<usize> {
    let mut order = train.to_vec();
    order.shuffle(rng);
    order
}

/// Stochastic backpropagation on `train`, visiting instances in a fresh
/// seeded order each epoch.
pub fn train_plain(net: &mut Network, ds: &Dataset, train: &[usize], cfg: &TrainConfig) -> Result<()> {
    train_plain_with(net, ds, train, cfg, |_, _| Ok(()))
}

/// Like [`train_plain`], calling `on_epoch(epoch, net)` after every epoch.
pub fn train_plain_with<F>(
    net: &mut Network,
    ds: &Dataset,
    train: &[usize],
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<()>
where
    F: FnMut(usize, &Network) -> Result<()>,
{
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut rng = shuffle_rng(cfg.seed);
    for epoch in 0..cfg.epochs {
        for i in epoch_order(&mut rng, train) {
            let trace = net.forward(ds.features(i))?;
            let deltas = plain_output_deltas(trace.output(), &ds.target(i));
            net.backprop_step(&trace, &deltas, cfg.learning_rate)?;
        }
        on_epoch(epoch, net)?;
    }
    Ok(())
}
