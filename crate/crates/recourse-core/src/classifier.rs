//! The black-box binary classifier: a feedforward MLP with ReLU hidden
//! layers and a single sigmoid output, trained by mini-batch gradient
//! descent on binary cross-entropy.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// One dense layer: `out x in` weights plus a bias per output unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    /// Row-major weight rows, one per output unit.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

/// Feedforward binary classifier. The last layer produces a single logit;
/// hidden layers use ReLU.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_dims: Vec<usize>,
    pub layers: Vec<Layer>,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub l2_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            l2_penalty: 0.0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl MlpModel {
    /// Xavier-uniform initialization, deterministic given the seed. The
    /// dims list runs input..output; the output dimension must be 1.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidParameter(
                "need at least input and output dimensions".into(),
            ));
        }
        if *layer_dims.last().unwrap() != 1 {
            return Err(Error::InvalidParameter(format!(
                "output dimension must be 1, got {}",
                layer_dims.last().unwrap()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(layer_dims.len() - 1);
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_out)
                .map(|_| (0..fan_in).map(|_| rng.gen_range(-scale..scale)).collect())
                .collect();
            layers.push(Layer {
                weights,
                biases: vec![0.0; fan_out],
            });
        }
        Ok(MlpModel {
            layer_dims: layer_dims.to_vec(),
            layers,
        }
        .validated())
    }

    fn validated(self) -> Self {
        debug_assert_eq!(self.layers.len() + 1, self.layer_dims.len());
        self
    }

    /// Input dimension `p`.
    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Forward pass keeping every layer's activation (used by backprop).
    /// Entry 0 is the input; the last entry is the single raw logit.
    fn forward_trace(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (li, layer) in self.layers.iter().enumerate() {
            let prev = &acts[li];
            let mut out = DVector::zeros(layer.biases.len());
            for (u, row) in layer.weights.iter().enumerate() {
                let mut z = layer.biases[u];
                for (j, w) in row.iter().enumerate() {
                    z += w * prev[j];
                }
                // hidden layers are rectified, the output stays a raw logit
                out[u] = if li + 1 < self.layers.len() { z.max(0.0) } else { z };
            }
            acts.push(out);
        }
        acts
    }

    /// Raw output logit.
    pub fn logit(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.forward_trace(x).last().unwrap()[0])
    }

    /// Every layer activation for one input: entry 0 is the input itself,
    /// the last entry holds the raw logit.
    pub fn activations(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        self.check_input(x)?;
        Ok(self.forward_trace(x))
    }

    /// Sigmoid of the forward-pass logit.
    pub fn predict_proba(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }

    /// 1 iff `predict_proba(x) >= 0.5` (threshold inclusive).
    pub fn predict_label(&self, x: &DVector<f64>) -> Result<u8> {
        Ok(u8::from(self.predict_proba(x)? >= 0.5))
    }

    /// Writes the model as JSON (layer dims plus parameter arrays).
    /// Reloading reproduces predictions bit-exactly.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)
            .map_err(|e| Error::MalformedModel(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let model: MlpModel = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::MalformedModel(e.to_string()))?;
        // structural consistency between dims and parameter shapes
        if model.layers.len() + 1 != model.layer_dims.len() {
            return Err(Error::MalformedModel(format!(
                "layer_dims declares {} layers but {} are present",
                model.layer_dims.len().saturating_sub(1),
                model.layers.len()
            )));
        }
        for (li, layer) in model.layers.iter().enumerate() {
            let (fan_in, fan_out) = (model.layer_dims[li], model.layer_dims[li + 1]);
            if layer.biases.len() != fan_out
                || layer.weights.len() != fan_out
                || layer.weights.iter().any(|r| r.len() != fan_in)
            {
                return Err(Error::MalformedModel(format!(
                    "layer {li}: expected {fan_out}x{fan_in} weights"
                )));
            }
            if layer
                .weights
                .iter()
                .flatten()
                .chain(layer.biases.iter())
                .any(|v| !v.is_finite())
            {
                return Err(Error::MalformedModel(format!(
                    "layer {li}: non-finite parameter"
                )));
            }
        }
        Ok(model)
    }
}

/// Loss and analytic gradient of the (optionally L2-penalized) binary
/// cross-entropy over the given sample indices. Gradients come back in the
/// same layer/row layout as the model parameters.
pub fn loss_and_gradient(
    model: &MlpModel,
    dataset: &Dataset,
    indices: &[usize],
    l2_penalty: f64,
) -> (f64, Vec<Layer>) {
    let m = indices.len().max(1) as f64;
    let mut grads: Vec<Layer> = model
        .layers
        .iter()
        .map(|l| Layer {
            weights: l.weights.iter().map(|r| vec![0.0; r.len()]).collect(),
            biases: vec![0.0; l.biases.len()],
        })
        .collect();
    let mut loss = 0.0;
    for &i in indices {
        let x = dataset.instance(i);
        let y = f64::from(dataset.y[i]);
        let acts = model.forward_trace(&x);
        let logit = acts.last().unwrap()[0];
        // stable bce: max(z,0) - y z + ln(1 + e^{-|z|})
        loss += logit.max(0.0) - y * logit + (-logit.abs()).exp().ln_1p();

        // delta at the output: sigmoid(z) - y, then backpropagate
        let mut delta = DVector::from_element(1, sigmoid(logit) - y);
        for li in (0..model.layers.len()).rev() {
            let prev = &acts[li];
            let layer = &model.layers[li];
            for (u, row) in layer.weights.iter().enumerate() {
                let d = delta[u];
                grads[li].biases[u] += d / m;
                for (j, _) in row.iter().enumerate() {
                    grads[li].weights[u][j] += d * prev[j] / m;
                }
            }
            if li > 0 {
                let mut next_delta = DVector::zeros(layer.weights[0].len());
                for (u, row) in layer.weights.iter().enumerate() {
                    let d = delta[u];
                    for (j, w) in row.iter().enumerate() {
                        next_delta[j] += d * w;
                    }
                }
                // ReLU gate of the producing layer
                for (j, nd) in next_delta.iter_mut().enumerate() {
                    if acts[li][j] <= 0.0 {
                        *nd = 0.0;
                    }
                }
                delta = next_delta;
            }
        }
    }
    loss /= m;
    if l2_penalty > 0.0 {
        for (layer, grad) in model.layers.iter().zip(&mut grads) {
            for (row, grow) in layer.weights.iter().zip(&mut grad.weights) {
                for (w, g) in row.iter().zip(grow.iter_mut()) {
                    loss += 0.5 * l2_penalty * w * w;
                    *g += l2_penalty * w;
                }
            }
        }
    }
    (loss, grads)
}

/// Mean BCE loss over the whole dataset (no penalty term).
pub fn mean_loss(model: &MlpModel, dataset: &Dataset) -> f64 {
    let all: Vec<usize> = (0..dataset.len()).collect();
    loss_and_gradient(model, dataset, &all, 0.0).0
}

/// Trains an MLP by mini-batch gradient descent. Deterministic given the
/// seed; `epochs = 0` returns the initialized model unchanged.
pub fn train(dataset: &Dataset, layer_dims: &[usize], config: &TrainConfig) -> Result<MlpModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("cannot train on empty dataset".into()));
    }
    if config.learning_rate <= 0.0 || config.batch_size == 0 {
        return Err(Error::InvalidParameter(
            "learning_rate and batch_size must be positive".into(),
        ));
    }
    let mut model = MlpModel::init(layer_dims, config.seed)?;
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    for epoch in 0..config.epochs {
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(config.batch_size) {
            let (loss, grads) = loss_and_gradient(&model, dataset, batch, config.l2_penalty);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            for (layer, grad) in model.layers.iter_mut().zip(&grads) {
                for (row, grow) in layer.weights.iter_mut().zip(&grad.weights) {
                    for (w, g) in row.iter_mut().zip(grow) {
                        *w -= config.learning_rate * g;
                    }
                }
                for (b, g) in layer.biases.iter_mut().zip(&grad.biases) {
                    *b -= config.learning_rate * g;
                }
            }
        }
    }
    Ok(model)
}

/// Accuracy and AUC on a dataset. AUC counts tied scores as half and is
/// `None` when the dataset holds a single class.
pub fn eval(model: &MlpModel, dataset: &Dataset) -> Result<(f64, Option<f64>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("cannot evaluate on empty dataset".into()));
    }
    let n = dataset.len();
    let probs = crate::par::map_range(n, |i| {
        model
            .predict_proba(&dataset.instance(i))
            .expect("dataset dimension matches model")
    });
    let correct = probs
        .iter()
        .zip(&dataset.y)
        .filter(|(&p, &y)| u8::from(p >= 0.5) == y)
        .count();
    let accuracy = correct as f64 / n as f64;
    Ok((accuracy, auc_from_scores(&probs, &dataset.y)))
}

/// Rank-based AUC: the probability a random positive outranks a random
/// negative, ties counted 0.5. `None` if one class is absent.
pub fn auc_from_scores(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
    // average ranks over tied groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0; // 1-based
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let pos_f = pos as f64;
    Some((rank_sum_pos - pos_f * (pos_f + 1.0) / 2.0) / (pos_f * neg as f64))
}
