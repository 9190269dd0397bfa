//! Edge-probing classifiers over pooled span vectors.
//!
//! Two architectures: a single linear layer, and an MLP with one ReLU hidden
//! layer. Single-label tasks use softmax outputs with cross-entropy;
//! multi-label tasks use per-class sigmoids with binary cross-entropy.
//! Dropout is inverted dropout, applied to the probe input for the linear
//! probe and to the post-ReLU activations for the MLP.
//!
//! Parameters live in one flat vector, layer by layer: weights (row-major,
//! `outputs × inputs`) followed by biases. The embeddings themselves are
//! only ever read.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Labeling;
use crate::embedstore::{PooledSet, Target};
use crate::error::{Error, Result};
use crate::optim::{AdamW, AdamWConfig, LinearWarmup};
use crate::scalar::Scalar;
use crate::seed::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    Linear,
    Mlp,
}

impl std::str::FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ProbeKind::Linear),
            "mlp" => Ok(ProbeKind::Mlp),
            other => Err(Error::invalid(format!("unknown probe kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProbeKind::Linear => "linear",
            ProbeKind::Mlp => "mlp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub kind: ProbeKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub classes: usize,
    pub labeling: Labeling,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub warmup: f64,
    pub optimizer: AdamWConfig,
    pub seed: u64,
    pub replicas: usize,
}

impl ProbeConfig {
    /// Defaults: hidden 1024, dropout 0.1, 3 epochs, batch 16, lr 1e-3,
    /// warmup 0.1, 3 replicas, seed 0.
    pub fn new(kind: ProbeKind, input_dim: usize, classes: usize, labeling: Labeling) -> Self {
        ProbeConfig {
            kind,
            input_dim,
            hidden_dim: 1024,
            dropout: 0.1,
            classes,
            labeling,
            epochs: 3,
            batch_size: 16,
            learning_rate: 1e-3,
            warmup: 0.1,
            optimizer: AdamWConfig::default(),
            seed: 0,
            replicas: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m.to_string()));
        if self.input_dim == 0 || self.classes == 0 {
            return bad("probe dimensions must be positive");
        }
        if self.kind == ProbeKind::Mlp && self.hidden_dim == 0 {
            return bad("mlp hidden width must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.epochs == 0 || self.batch_size == 0 || self.replicas == 0 {
            return bad("epochs, batch size and replicas must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.warmup) {
            return bad("warmup fraction must lie in [0, 1]");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning rate must be finite and non-negative");
        }
        Ok(())
    }

    /// `(inputs, outputs)` of each layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        match self.kind {
            ProbeKind::Linear => vec![(self.input_dim, self.classes)],
            ProbeKind::Mlp => vec![
                (self.input_dim, self.hidden_dim),
                (self.hidden_dim, self.classes),
            ],
        }
    }

    pub fn num_params(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn is_multi_label(&self) -> bool {
        self.labeling == Labeling::MultiLabel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Mean batch loss of every optimizer step of the selected replica.
    pub step_losses: Vec<f64>,
    /// Dev score after each epoch of the selected replica (fraction).
    pub epoch_dev_scores: Vec<f64>,
    /// Final dev score of every replica; empty when there is no dev set.
    pub replica_dev_scores: Vec<f64>,
    pub selected_replica: usize,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel<T: Scalar> {
    pub config: ProbeConfig,
    pub params: Vec<T>,
    pub log: TrainingLog,
}

/// Flat-vector offsets of one layer.
#[derive(Debug, Clone, Copy)]
struct LayerView {
    inputs: usize,
    outputs: usize,
    w: usize,
    b: usize,
}

fn views(config: &ProbeConfig) -> Vec<LayerView> {
    let mut off = 0;
    config
        .layer_shapes()
        .into_iter()
        .map(|(inputs, outputs)| {
            let v = LayerView {
                inputs,
                outputs,
                w: off,
                b: off + inputs * outputs,
            };
            off += inputs * outputs + outputs;
            v
        })
        .collect()
}

/// `out = W x + b` for one layer.
fn affine<T: Scalar>(p: &[T], l: LayerView, x: &[T], out: &mut Vec<T>) {
    out.clear();
    for o in 0..l.outputs {
        let row = &p[l.w + o * l.inputs..l.w + (o + 1) * l.inputs];
        let mut acc = p[l.b + o];
        for (&w, &xi) in row.iter().zip(x) {
            acc += w * xi;
        }
        out.push(acc);
    }
}

pub fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum = exps.iter().copied().fold(T::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn log_sum_exp<T: Scalar>(z: &[T]) -> T {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let sum = z.iter().fold(T::zero(), |a, &v| a + (v - max).exp());
    max + sum.ln()
}

/// Numerically stable `-[y log σ(z) + (1-y) log(1-σ(z))]`.
fn bce_with_logit<T: Scalar>(z: T, y: bool) -> T {
    let pos = z.max(T::zero());
    let t = if y { z } else { T::zero() };
    pos - t + (T::one() + (-z.abs()).exp()).ln()
}

fn multi_hot<T: Scalar>(classes: &[u32], c: usize) -> Vec<bool> {
    let mut y = vec![false; c];
    for &k in classes {
        y[k as usize] = true;
    }
    let _ = T::zero();
    y
}

/// Per-example dropout mask (already scaled by 1/(1-p)), or none.
type Mask<T> = Option<Vec<T>>;

impl<T: Scalar> ProbeModel<T> {
    /// Glorot-uniform weights, zero biases, seeded by `(seed, replica)`.
    pub fn init(config: &ProbeConfig, replica: usize) -> Result<Self> {
        config.validate()?;
        let mut params = vec![T::zero(); config.num_params()];
        let mut rng = seed::stream(config.seed, domain::PROBE_INIT, &[replica as u64]);
        for l in views(config) {
            let limit = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            for w in &mut params[l.w..l.b] {
                *w = T::of(rng.random_range(-limit..limit));
            }
        }
        Ok(ProbeModel {
            config: config.clone(),
            params,
            log: TrainingLog::default(),
        })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn mask_len(&self) -> usize {
        match self.config.kind {
            ProbeKind::Linear => self.config.input_dim,
            ProbeKind::Mlp => self.config.hidden_dim,
        }
    }

    fn sample_mask(&self, rng: &mut ChaCha8Rng) -> Mask<T> {
        let p = self.config.dropout;
        if p == 0.0 {
            return None;
        }
        let keep = T::of(1.0 / (1.0 - p));
        Some(
            (0..self.mask_len())
                .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
                .collect(),
        )
    }

    /// Logits plus the intermediates backprop needs: the (masked) input of
    /// the last layer and, for the MLP, the hidden pre-activations.
    fn forward_parts(&self, x: &[T], mask: &Mask<T>) -> (Vec<T>, Vec<T>, Vec<T>) {
        let ls = views(&self.config);
        let apply = |v: &mut [T]| {
            if let Some(m) = mask {
                for (a, &k) in v.iter_mut().zip(m) {
                    *a *= k;
                }
            }
        };
        let mut logits = Vec::with_capacity(self.config.classes);
        match self.config.kind {
            ProbeKind::Linear => {
                let mut xin = x.to_vec();
                apply(&mut xin);
                affine(&self.params, ls[0], &xin, &mut logits);
                (logits, xin, Vec::new())
            }
            ProbeKind::Mlp => {
                let mut pre = Vec::with_capacity(self.config.hidden_dim);
                affine(&self.params, ls[0], x, &mut pre);
                let mut h: Vec<T> = pre.iter().map(|&v| v.max(T::zero())).collect();
                apply(&mut h);
                affine(&self.params, ls[1], &h, &mut logits);
                (logits, h, pre)
            }
        }
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("probe input".into()));
        }
        Ok(())
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        Ok(self.forward_parts(x, &None).0)
    }

    /// Class probabilities: softmax for single-label, per-class sigmoid for
    /// multi-label. Dropout is drawn from `rng` in train mode only.
    pub fn forward(&self, x: &[T], mode: Mode, rng: &mut ChaCha8Rng) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mask = match mode {
            Mode::Train => self.sample_mask(rng),
            Mode::Eval => None,
        };
        Ok(self.probabilities(&self.forward_parts(x, &mask).0))
    }

    /// Eval-mode probabilities.
    pub fn probs(&self, x: &[T]) -> Result<Vec<T>> {
        let z = self.logits(x)?;
        Ok(self.probabilities(&z))
    }

    fn probabilities(&self, z: &[T]) -> Vec<T> {
        if self.config.is_multi_label() {
            z.iter().map(|&v| sigmoid(v)).collect()
        } else {
            softmax(z)
        }
    }

    fn loss_of_logits(&self, z: &[T], target: &Target) -> T {
        match target {
            Target::Single(y) => log_sum_exp(z) - z[*y as usize],
            Target::Multi(ys) => {
                let y = multi_hot::<T>(ys, z.len());
                z.iter()
                    .zip(&y)
                    .fold(T::zero(), |a, (&zi, &yi)| a + bce_with_logit(zi, yi))
            }
        }
    }

    /// Adds this example's gradient into `grad` and returns its loss.
    fn backprop(&self, x: &[T], target: &Target, mask: &Mask<T>, grad: &mut [T]) -> T {
        let (z, last_in, pre) = self.forward_parts(x, mask);
        let loss = self.loss_of_logits(&z, target);
        let dz: Vec<T> = match target {
            Target::Single(y) => {
                let mut p = softmax(&z);
                p[*y as usize] -= T::one();
                p
            }
            Target::Multi(ys) => {
                let y = multi_hot::<T>(ys, z.len());
                z.iter()
                    .zip(&y)
                    .map(|(&zi, &yi)| sigmoid(zi) - if yi { T::one() } else { T::zero() })
                    .collect()
            }
        };
        let ls = views(&self.config);
        let out = *ls.last().unwrap();
        for (o, &d) in dz.iter().enumerate() {
            grad[out.b + o] += d;
            let row = &mut grad[out.w + o * out.inputs..out.w + (o + 1) * out.inputs];
            for (g, &a) in row.iter_mut().zip(&last_in) {
                *g += d * a;
            }
        }
        if self.config.kind == ProbeKind::Mlp {
            let hid = ls[0];
            for j in 0..hid.outputs {
                if pre[j] <= T::zero() {
                    continue;
                }
                let mut dh = T::zero();
                for (o, &d) in dz.iter().enumerate() {
                    dh += self.params[out.w + o * out.inputs + j] * d;
                }
                if let Some(m) = mask {
                    dh *= m[j];
                }
                grad[hid.b + j] += dh;
                let row = &mut grad[hid.w + j * hid.inputs..hid.w + (j + 1) * hid.inputs];
                for (g, &xi) in row.iter_mut().zip(x) {
                    *g += dh * xi;
                }
            }
        }
        loss
    }

    /// Mean loss and its gradient over a batch, dropout off.
    pub fn loss_and_grad(&self, xs: &[Vec<T>], targets: &[Target]) -> (T, Vec<T>) {
        let mut grad = vec![T::zero(); self.params.len()];
        let mut loss = T::zero();
        for (x, t) in xs.iter().zip(targets) {
            loss += self.backprop(x, t, &None, &mut grad);
        }
        let n = T::of(xs.len() as f64);
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    /// Mean batch loss, dropout off.
    pub fn loss(&self, xs: &[Vec<T>], targets: &[Target]) -> T {
        let n = T::of(xs.len() as f64);
        xs.iter()
            .zip(targets)
            .fold(T::zero(), |a, (x, t)| a + self.loss_of_logits(&self.forward_parts(x, &None).0, t))
            / n
    }

    pub fn predict_one(&self, x: &[T]) -> Result<Target> {
        Ok(decide(&self.probs(x)?, self.config.is_multi_label()))
    }

    pub fn predict(&self, set: &PooledSet) -> Result<Vec<Target>> {
        (0..set.len())
            .map(|i| self.predict_one(&to_scalar(set.row(i))))
            .collect()
    }

    /// Eval-mode probability rows for a whole set.
    pub fn predict_probs(&self, set: &PooledSet) -> Result<Vec<Vec<T>>> {
        (0..set.len()).map(|i| self.probs(&to_scalar(set.row(i)))).collect()
    }

    pub fn to_f32(&self) -> ProbeModel<f32> {
        ProbeModel {
            config: self.config.clone(),
            params: self.params.iter().map(|p| p.to_f32_lossy()).collect(),
            log: self.log.clone(),
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.params.iter().all(|p| p.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("probe parameters".into()))
        }
    }
}

pub fn to_scalar<T: Scalar>(row: &[f32]) -> Vec<T> {
    row.iter().map(|&v| T::widen(v)).collect()
}

/// Single-label: argmax, ties to the lowest class. Multi-label: every class
/// with probability above 0.5.
pub fn decide<T: Scalar>(probs: &[T], multi: bool) -> Target {
    if multi {
        let half = T::of(0.5);
        Target::Multi(
            probs
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > half)
                .map(|(k, _)| k as u32)
                .collect(),
        )
    } else {
        let mut best = 0;
        for (k, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = k;
            }
        }
        Target::Single(best as u32)
    }
}

/// Accuracy for single-label targets, micro-F1 for multi-label, as a fraction.
pub fn score(pred: &[Target], gold: &[Target]) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    let multi = gold.iter().any(|t| matches!(t, Target::Multi(_)));
    if !multi {
        let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
        return hits as f64 / gold.len() as f64;
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (p, g) in pred.iter().zip(gold) {
        let (p, g) = (p.classes(), g.classes());
        let hit = p.iter().filter(|k| g.contains(k)).count();
        tp += hit;
        fp += p.len() - hit;
        fn_ += g.len() - hit;
    }
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Index of the best score; ties go to the lowest index.
pub fn select_best(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn check_set(config: &ProbeConfig, set: &PooledSet) -> Result<()> {
    if set.dim != config.input_dim {
        return Err(Error::DimensionMismatch {
            expected: config.input_dim,
            found: set.dim,
        });
    }
    for t in &set.targets {
        let ok = match t {
            Target::Single(k) => !config.is_multi_label() && (*k as usize) < config.classes,
            Target::Multi(ks) => config.is_multi_label() && ks.iter().all(|&k| (k as usize) < config.classes),
        };
        if !ok {
            return Err(Error::invalid("target does not match the probe's label space"));
        }
    }
    Ok(())
}

/// Trains one replica for `config.epochs` passes.
pub fn train_replica<T: Scalar>(
    config: &ProbeConfig,
    replica: usize,
    train: &PooledSet,
    dev: &PooledSet,
) -> Result<ProbeModel<T>> {
    let mut model = ProbeModel::<T>::init(config, replica)?;
    check_set(config, train)?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let xs: Vec<Vec<T>> = (0..train.len()).map(|i| to_scalar(train.row(i))).collect();
    let n = train.len();
    let per_epoch = n.div_ceil(config.batch_size);
    let schedule = LinearWarmup::from_fraction(config.learning_rate, config.warmup, per_epoch * config.epochs);
    let mut opt = AdamW::<T>::new(model.params.len(), config.optimizer);
    let mut dropout_rng = seed::stream(config.seed, domain::PROBE_DROPOUT, &[replica as u64]);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![T::zero(); model.params.len()];
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        order.shuffle(&mut seed::stream(
            config.seed,
            domain::PROBE_SHUFFLE,
            &[replica as u64, epoch as u64],
        ));
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let mut loss = T::zero();
            for &i in batch {
                let mask = model.sample_mask(&mut dropout_rng);
                loss += model.backprop(&xs[i], &train.targets[i], &mask, &mut grad);
            }
            let bn = T::of(batch.len() as f64);
            loss /= bn;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            grad.iter_mut().for_each(|g| *g /= bn);
            opt.step(&mut model.params, &grad, schedule.lr(step));
            model.log.step_losses.push(loss.to_f64_lossy());
            step += 1;
        }
        if !dev.is_empty() {
            model.log.epoch_dev_scores.push(score(&model.predict(dev)?, &dev.targets));
        }
    }
    model.check_finite()?;
    model.log.selected_replica = replica;
    model.log.threads = 1;
    Ok(model)
}

/// Trains `config.replicas` seeds and keeps the one with the best final dev
/// score (ties to the lowest replica). Without dev data, replica 0 is kept.
pub fn train<T: Scalar>(config: &ProbeConfig, train: &PooledSet, dev: &PooledSet) -> Result<ProbeModel<T>> {
    config.validate()?;
    check_set(config, dev)?;
    let mut models = Vec::with_capacity(config.replicas);
    for r in 0..config.replicas {
        models.push(train_replica::<T>(config, r, train, dev)?);
    }
    let scores: Vec<f64> = if dev.is_empty() {
        Vec::new()
    } else {
        models
            .iter()
            .map(|m| m.log.epoch_dev_scores.last().copied().unwrap_or(0.0))
            .collect()
    };
    let best = if scores.is_empty() { 0 } else { select_best(&scores) };
    let mut model = models.swap_remove(best);
    model.log.replica_dev_scores = scores;
    Ok(model)
}

const MODEL_MAGIC: [u8; 8] = *b"EPMODEL\0";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    config: ProbeConfig,
    labels: Vec<String>,
    manifest_digest: String,
    selected_replica: usize,
    replica_dev_scores: Vec<f64>,
    epoch_dev_scores: Vec<f64>,
}

/// A model read back from disk along with its header metadata.
#[derive(Debug, Clone)]
pub struct SavedModel {
    pub model: ProbeModel<f32>,
    pub labels: Vec<String>,
    pub manifest_digest: String,
}

impl ProbeModel<f32> {
    /// Model file: magic, u32 version, u32 header length, JSON header
    /// (config, labels, manifest digest, selection log), u64 parameter
    /// count, little-endian f32 parameters.
    pub fn to_bytes(&self, labels: &[String], manifest_digest: &str) -> Vec<u8> {
        let header = ModelHeader {
            config: self.config.clone(),
            labels: labels.to_vec(),
            manifest_digest: manifest_digest.to_string(),
            selected_replica: self.log.selected_replica,
            replica_dev_scores: self.log.replica_dev_scores.clone(),
            epoch_dev_scores: self.log.epoch_dev_scores.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(24 + json.len() + 4 * self.params.len());
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SavedModel> {
        let truncated = |offset: usize, needed: usize| Error::Truncated {
            offset,
            needed,
            len: bytes.len(),
        };
        if bytes.len() < 16 {
            return Err(truncated(0, 16));
        }
        if bytes[..8] != MODEL_MAGIC {
            return Err(Error::BadMagic { expected: "EPMODEL" });
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let hend = 16 + hlen;
        if bytes.len() < hend + 8 {
            return Err(truncated(16, hlen + 8));
        }
        let header: ModelHeader = serde_json::from_slice(&bytes[16..hend]).map_err(|source| Error::Json {
            context: "model header".into(),
            source,
        })?;
        header.config.validate()?;
        let n = u64::from_le_bytes(bytes[hend..hend + 8].try_into().unwrap()) as usize;
        if n != header.config.num_params() {
            return Err(Error::DimensionMismatch {
                expected: header.config.num_params(),
                found: n,
            });
        }
        let body = &bytes[hend + 8..];
        if body.len() != 4 * n {
            return Err(truncated(hend + 8, 4 * n));
        }
        let params = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(SavedModel {
            model: ProbeModel {
                config: header.config,
                params,
                log: TrainingLog {
                    step_losses: Vec::new(),
                    epoch_dev_scores: header.epoch_dev_scores,
                    replica_dev_scores: header.replica_dev_scores,
                    selected_replica: header.selected_replica,
                    threads: 1,
                },
            },
            labels: header.labels,
            manifest_digest: header.manifest_digest,
        })
    }

    pub fn save(&self, path: &Path, labels: &[String], manifest_digest: &str) -> Result<()> {
        fs::write(path, self.to_bytes(labels, manifest_digest)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<SavedModel> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
