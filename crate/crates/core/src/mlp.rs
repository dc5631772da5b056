//! Feed-forward binary classifier: sigmoid hidden layers, input dropout,
//! two-way softmax output, summed cross-entropy loss and Adam.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::featurizer::{read_header, Dataset, FeatureVector};
use crate::rng::{self, StreamRng};
use crate::sampler::Label;

const LOG_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    /// Probability of zeroing an input coordinate during training.
    pub dropout: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            input_dim: 1,
            hidden: vec![100, 100],
            dropout: 0.2,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 128,
            epochs: 100,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.input_dim == 0 || self.hidden.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0,1), got {}", self.dropout));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("epsilon", self.epsilon),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden);
        w.push(2);
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Offset of the input-major weight block `w[i * outputs + o]`; biases follow it.
    offset: usize,
}

impl Layer {
    fn bias(&self) -> usize {
        self.offset + self.inputs * self.outputs
    }

    fn end(&self) -> usize {
        self.bias() + self.outputs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Infer,
    /// Dropout active, masks drawn from the stream keyed by this seed.
    Train(u64),
}

/// One row of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-example loss.
    pub loss: f64,
    pub accuracy: f64,
}

pub fn write_training_log<W: Write>(mut out: W, log: &[EpochStats]) -> Result<()> {
    writeln!(out, "epoch,loss,accuracy")?;
    for s in log {
        writeln!(out, "{},{},{}", s.epoch, s.loss, s.accuracy)?;
    }
    Ok(())
}

/// A labelled sparse input.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub input: Vec<(u32, f64)>,
    pub positive: bool,
}

impl Example {
    pub fn dense(values: &[f64], positive: bool) -> Self {
        Example {
            input: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32, *v))
                .collect(),
            positive,
        }
    }

    pub fn from_vector(v: &FeatureVector) -> Self {
        Example {
            input: v
                .entries()
                .iter()
                .map(|&(i, x)| (i, f64::from(x)))
                .collect(),
            positive: v.label == Label::Positive,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    config: MlpConfig,
    layers: Vec<Layer>,
    params: Vec<f64>,
    /// Free-form training-run metadata, written to the model header.
    pub metadata: BTreeMap<String, String>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softmax2(z0: f64, z1: f64) -> (f64, f64) {
    let m = z0.max(z1);
    let e0 = (z0 - m).exp();
    let e1 = (z1 - m).exp();
    let s = e0 + e1;
    (e0 / s, e1 / s)
}

/// Per-example cross-entropy for positive-class probability `p`.
pub fn example_loss(p: f64, positive: bool) -> f64 {
    let q = if positive { p } else { 1.0 - p };
    -q.max(LOG_CLAMP).ln()
}

struct Scratch {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn new(config: MlpConfig) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = rng::stream(model.config.seed, &[rng::TAG_INIT]);
        for layer in model.layers.clone() {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut model.params[layer.offset..layer.bias()] {
                *w = rng.gen_range(-limit..limit);
            }
        }
        Ok(model)
    }

    pub fn zeros(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let widths = config.widths();
        let mut layers = Vec::with_capacity(widths.len() - 1);
        let mut offset = 0;
        for pair in widths.windows(2) {
            let layer = Layer {
                inputs: pair[0],
                outputs: pair[1],
                offset,
            };
            offset = layer.end();
            layers.push(layer);
        }
        Ok(MlpModel {
            config,
            layers,
            params: vec![0.0; offset],
            metadata: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn feature_hash(&self) -> Option<&str> {
        self.metadata.get("feature_hash").map(String::as_str)
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            acts: self.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            deltas: self.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
        }
    }

    /// Forward pass over a sparse input; leaves activations in `s.acts`.
    fn forward_into(&self, input: &[(u32, f64)], s: &mut Scratch) -> f64 {
        for (li, layer) in self.layers.iter().enumerate() {
            let (prev, rest) = s.acts.split_at_mut(li);
            let out = &mut rest[0];
            out.copy_from_slice(&self.params[layer.bias()..layer.end()]);
            let w = &self.params[layer.offset..layer.bias()];
            let n = layer.outputs;
            if li == 0 {
                for &(i, v) in input {
                    let row = &w[i as usize * n..(i as usize + 1) * n];
                    for (o, wv) in out.iter_mut().zip(row) {
                        *o += v * wv;
                    }
                }
            } else {
                for (i, &a) in prev[li - 1].iter().enumerate() {
                    let row = &w[i * n..(i + 1) * n];
                    for (o, wv) in out.iter_mut().zip(row) {
                        *o += a * wv;
                    }
                }
            }
            if li + 1 < self.layers.len() {
                for o in out.iter_mut() {
                    *o = sigmoid(*o);
                }
            } else {
                let (p0, p1) = softmax2(out[0], out[1]);
                out[0] = p0;
                out[1] = p1;
            }
        }
        s.acts.last().expect("output layer")[1]
    }

    /// Backward pass for one example after `forward_into`; adds into `grad`.
    fn backward_into(
        &self,
        input: &[(u32, f64)],
        positive: bool,
        s: &mut Scratch,
        grad: &mut [f64],
    ) {
        let last = self.layers.len() - 1;
        {
            let p = &s.acts[last];
            let d = &mut s.deltas[last];
            d[0] = p[0] - if positive { 0.0 } else { 1.0 };
            d[1] = p[1] - if positive { 1.0 } else { 0.0 };
        }
        for li in (0..self.layers.len()).rev() {
            let layer = self.layers[li];
            let n = layer.outputs;
            let (lower, upper) = s.deltas.split_at_mut(li);
            let delta = &upper[0];
            for (g, d) in grad[layer.bias()..layer.end()].iter_mut().zip(delta) {
                *g += d;
            }
            let gw = &mut grad[layer.offset..layer.bias()];
            if li == 0 {
                for &(i, v) in input {
                    let row = &mut gw[i as usize * n..(i as usize + 1) * n];
                    for (g, d) in row.iter_mut().zip(delta) {
                        *g += v * d;
                    }
                }
                continue;
            }
            let a_prev = &s.acts[li - 1];
            let w = &self.params[layer.offset..layer.bias()];
            let prev_delta = &mut lower[li - 1];
            for (i, &a) in a_prev.iter().enumerate() {
                let row = &mut gw[i * n..(i + 1) * n];
                let wrow = &w[i * n..(i + 1) * n];
                let mut back = 0.0;
                for ((g, d), wv) in row.iter_mut().zip(delta).zip(wrow) {
                    *g += a * d;
                    back += wv * d;
                }
                prev_delta[i] = back * a * (1.0 - a);
            }
        }
    }

    fn check_dim(&self, input: &[(u32, f64)]) -> Result<()> {
        match input.iter().map(|&(i, _)| i as usize).max() {
            Some(i) if i >= self.config.input_dim => Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                found: i + 1,
            }),
            _ => Ok(()),
        }
    }

    fn apply_dropout(&self, input: &[(u32, f64)], rng: &mut StreamRng, out: &mut Vec<(u32, f64)>) {
        out.clear();
        let p = self.config.dropout;
        if p == 0.0 {
            out.extend_from_slice(input);
            return;
        }
        let scale = 1.0 / (1.0 - p);
        for &(i, v) in input {
            if rng.gen::<f64>() >= p {
                out.push((i, v * scale));
            }
        }
    }

    /// Positive-class probability of a sparse input.
    pub fn forward_sparse(&self, input: &[(u32, f64)], mode: Mode) -> Result<f64> {
        self.check_dim(input)?;
        let mut s = self.scratch();
        Ok(match mode {
            Mode::Infer => self.forward_into(input, &mut s),
            Mode::Train(seed) => {
                let mut rng = rng::stream(seed, &[rng::TAG_DROPOUT]);
                let mut dropped = Vec::new();
                self.apply_dropout(input, &mut rng, &mut dropped);
                self.forward_into(&dropped, &mut s)
            }
        })
    }

    pub fn forward_dense(&self, input: &[f64], mode: Mode) -> Result<f64> {
        if input.len() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                found: input.len(),
            });
        }
        self.forward_sparse(&Example::dense(input, false).input, mode)
    }

    pub fn forward(&self, v: &FeatureVector, mode: Mode) -> Result<f64> {
        if v.dim() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                found: v.dim(),
            });
        }
        self.forward_sparse(&Example::from_vector(v).input, mode)
    }

    /// Inference on a sparse f32 feature vector without dimension checks.
    pub fn predict(&self, entries: &[(u32, f32)]) -> f64 {
        let input: Vec<(u32, f64)> = entries.iter().map(|&(i, v)| (i, f64::from(v))).collect();
        let mut s = self.scratch();
        self.forward_into(&input, &mut s)
    }

    /// Both softmax outputs for a dense input.
    pub fn class_probabilities(&self, input: &[f64]) -> Result<[f64; 2]> {
        let p1 = self.forward_dense(input, Mode::Infer)?;
        let mut s = self.scratch();
        self.forward_into(&Example::dense(input, false).input, &mut s);
        let out = s.acts.last().expect("output layer");
        debug_assert_eq!(out[1], p1);
        Ok([out[0], out[1]])
    }

    /// Summed cross-entropy over `batch` in inference mode.
    pub fn loss(&self, batch: &[Example]) -> Result<f64> {
        let mut s = self.scratch();
        let mut total = 0.0;
        for ex in batch {
            self.check_dim(&ex.input)?;
            total += example_loss(self.forward_into(&ex.input, &mut s), ex.positive);
        }
        Ok(total)
    }

    /// Summed loss and its gradient with respect to every parameter (no dropout).
    pub fn loss_and_gradient(&self, batch: &[Example]) -> Result<(f64, Vec<f64>)> {
        let mut s = self.scratch();
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        for ex in batch {
            self.check_dim(&ex.input)?;
            let p = self.forward_into(&ex.input, &mut s);
            total += example_loss(p, ex.positive);
            self.backward_into(&ex.input, ex.positive, &mut s, &mut grad);
        }
        Ok((total, grad))
    }

    /// Writes a human-readable header followed by the parameters as
    /// little-endian f64.
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        let c = &self.config;
        let hidden: Vec<String> = c.hidden.iter().map(usize::to_string).collect();
        writeln!(out, "{MODEL_MAGIC}")?;
        writeln!(out, "input_dim={}", c.input_dim)?;
        writeln!(out, "hidden={}", hidden.join(","))?;
        writeln!(out, "activation=sigmoid")?;
        writeln!(out, "output=softmax2")?;
        writeln!(out, "dropout={}", c.dropout)?;
        writeln!(out, "learning_rate={}", c.learning_rate)?;
        writeln!(out, "beta1={}", c.beta1)?;
        writeln!(out, "beta2={}", c.beta2)?;
        writeln!(out, "epsilon={}", c.epsilon)?;
        writeln!(out, "batch_size={}", c.batch_size)?;
        writeln!(out, "epochs={}", c.epochs)?;
        writeln!(out, "seed={}", c.seed)?;
        for (k, v) in &self.metadata {
            writeln!(out, "meta.{k}={v}")?;
        }
        writeln!(out, "params={}", self.params.len())?;
        writeln!(out)?;
        for p in &self.params {
            out.write_all(&p.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = BufReader::new(File::open(path)?);
        let header = read_header(&mut reader, path)?;
        if header.get("__magic").map(String::as_str) != Some(MODEL_MAGIC) {
            return Err(Error::format(path, "not a model file"));
        }
        let get = |k: &str| -> Result<&str> {
            header
                .get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::format(path, format!("missing header field `{k}`")))
        };
        fn num<T: std::str::FromStr>(path: &Path, k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::format(path, format!("bad value `{v}` for `{k}`")))
        }
        let hidden_text = get("hidden")?;
        let hidden = if hidden_text.is_empty() {
            Vec::new()
        } else {
            hidden_text
                .split(',')
                .map(|w| num(path, "hidden", w))
                .collect::<Result<_>>()?
        };
        let config = MlpConfig {
            input_dim: num(path, "input_dim", get("input_dim")?)?,
            hidden,
            dropout: num(path, "dropout", get("dropout")?)?,
            learning_rate: num(path, "learning_rate", get("learning_rate")?)?,
            beta1: num(path, "beta1", get("beta1")?)?,
            beta2: num(path, "beta2", get("beta2")?)?,
            epsilon: num(path, "epsilon", get("epsilon")?)?,
            batch_size: num(path, "batch_size", get("batch_size")?)?,
            epochs: num(path, "epochs", get("epochs")?)?,
            seed: num(path, "seed", get("seed")?)?,
        };
        let mut model = MlpModel::zeros(config)?;
        let count: usize = num(path, "params", get("params")?)?;
        if count != model.params.len() {
            return Err(Error::format(
                path,
                format!(
                    "header declares {count} parameters, the architecture needs {}",
                    model.params.len()
                ),
            ));
        }
        let mut buf = [0u8; 8];
        for (i, p) in model.params.iter_mut().enumerate() {
            reader.read_exact(&mut buf).map_err(|_| {
                Error::format(
                    path,
                    format!("truncated: parameter {i} of {count} is missing"),
                )
            })?;
            *p = f64::from_le_bytes(buf);
        }
        if reader.read(&mut buf)? != 0 {
            return Err(Error::format(path, "trailing bytes after the parameters"));
        }
        model.metadata = header
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("meta.").map(|k| (k.to_owned(), v.clone())))
            .collect();
        Ok(model)
    }

    /// Loads a model for inference and checks it was trained on `feature_hash`.
    pub fn load_checked(path: impl AsRef<Path>, feature_hash: &str) -> Result<Self> {
        let model = Self::load(path)?;
        match model.feature_hash() {
            Some(h) if h == feature_hash => Ok(model),
            found => Err(Error::HashMismatch {
                expected: feature_hash.to_owned(),
                found: found.unwrap_or("<none>").to_owned(),
            }),
        }
    }
}

const MODEL_MAGIC: &str = "gaifman-mlp v1";

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, c: &MlpConfig, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            *p -= c.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + c.epsilon);
        }
    }
}

/// Trains a fresh model on `examples` with shuffled mini-batch Adam. The
/// gradient of each batch is the summed loss divided by the batch size.
pub fn train_examples(
    config: &MlpConfig,
    examples: &[Example],
) -> Result<(MlpModel, Vec<EpochStats>)> {
    let mut model = MlpModel::new(config.clone())?;
    if examples.is_empty() {
        return Err(Error::NoPositiveExamples);
    }
    for ex in examples {
        model.check_dim(&ex.input)?;
    }
    let positives = examples.iter().filter(|e| e.positive).count();
    if positives == 0 {
        return Err(Error::NoPositiveExamples);
    }
    if positives == examples.len() {
        log::warn!("training data has no negative examples");
    }
    let n = model.params.len();
    let mut adam = Adam {
        m: vec![0.0; n],
        v: vec![0.0; n],
        t: 0,
    };
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut grad = vec![0.0; n];
    let mut s = model.scratch();
    let mut dropped = Vec::new();
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng::stream(
            config.seed,
            &[rng::TAG_SHUFFLE, epoch as u64],
        ));
        let mut total = 0.0;
        let mut correct = 0usize;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut drop_rng =
                rng::stream(config.seed, &[rng::TAG_DROPOUT, epoch as u64, b as u64]);
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let ex = &examples[i];
                model.apply_dropout(&ex.input, &mut drop_rng, &mut dropped);
                let p = model.forward_into(&dropped, &mut s);
                total += example_loss(p, ex.positive);
                correct += usize::from((p >= 0.5) == ex.positive);
                model.backward_into(&dropped, ex.positive, &mut s, &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(config, &mut model.params, &grad);
            if !total.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    message: format!("non-finite loss or parameters after batch {b}"),
                });
            }
        }
        let stats = EpochStats {
            epoch,
            loss: total / examples.len() as f64,
            accuracy: correct as f64 / examples.len() as f64,
        };
        log::debug!(
            "epoch {epoch}: loss {:.6} accuracy {:.4}",
            stats.loss,
            stats.accuracy
        );
        log.push(stats);
    }
    if let Some(last) = log.last() {
        model
            .metadata
            .insert("final_loss".into(), format!("{}", last.loss));
        model
            .metadata
            .insert("final_accuracy".into(), format!("{}", last.accuracy));
    }
    model
        .metadata
        .insert("examples".into(), examples.len().to_string());
    model
        .metadata
        .insert("positives".into(), positives.to_string());
    Ok((model, log))
}

/// Trains on a featurized dataset; the model records the dataset's feature hash.
pub fn train(config: &MlpConfig, dataset: &Dataset) -> Result<(MlpModel, Vec<EpochStats>)> {
    let mut config = config.clone();
    config.input_dim = dataset.meta.dim;
    let examples: Vec<Example> = dataset.examples.iter().map(Example::from_vector).collect();
    if dataset.meta.w_neg > 0 && examples.iter().all(|e| e.positive) {
        log::warn!(
            "dataset `{}` contains only positive examples",
            dataset.meta.query
        );
    }
    let (mut model, log) = train_examples(&config, &examples)?;
    model
        .metadata
        .insert("feature_hash".into(), dataset.meta.feature_hash.clone());
    model
        .metadata
        .insert("query".into(), dataset.meta.query.clone());
    Ok((model, log))
}

/// Central finite difference of the summed loss along parameter `i`.
pub fn numeric_partial(model: &MlpModel, batch: &[Example], i: usize, h: f64) -> Result<f64> {
    let mut m = model.clone();
    let orig = m.params[i];
    m.params[i] = orig + h;
    let up = m.loss(batch)?;
    m.params[i] = orig - h;
    let down = m.loss(batch)?;
    Ok((up - down) / (2.0 * h))
}

/// Relative disagreement with a floor on the denominator so that coordinates
/// whose gradient is numerically zero compare by absolute error.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Maximum relative error between backpropagated gradients and central
/// differences with step `1e-5`, over every parameter. Dropout plays no part.
pub fn gradient_check(model: &MlpModel, batch: &[Example]) -> Result<f64> {
    let (_, grad) = model.loss_and_gradient(batch)?;
    let mut worst: f64 = 0.0;
    for (i, &g) in grad.iter().enumerate() {
        let num = numeric_partial(model, batch, i, 1e-5)?;
        worst = worst.max(relative_error(g, num));
    }
    Ok(worst)
}
