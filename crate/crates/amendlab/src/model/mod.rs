//! Amendment classifier: feature hashing over the initial EC text and
//! trial metadata, plus a regularized logistic regression trained with
//! full-batch gradient descent.
//!
//! The hash is FNV-1a (64-bit) reduced modulo 2^b, so vectors are
//! bit-identical across runs and platforms. Field names prefix every
//! feature string, keeping the four sources (ec, disease, intervention,
//! phase) in disjoint bucket families except for hash collisions.

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TrialRecord;
use crate::eval::auroc;
use crate::textprep::{normalize, tokenize_basic};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const DEFAULT_HASH_BITS: u32 = 18;
/// Appendix grid for the inverse regularization strength.
pub const C_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no feature fields selected")]
    NoFields,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("vector dimension {vector} does not match model dimension {model}")]
    DimensionMismatch { vector: usize, model: usize },
    #[error("feature/label count mismatch ({0} vs {1})")]
    CountMismatch(usize, usize),
    #[error("model file is malformed: {0}")]
    Malformed(String),
}

/// Which metadata fields join the initial EC text in the feature set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureFields {
    pub ec: bool,
    pub disease: bool,
    pub intervention: bool,
    pub phase: bool,
}

impl FeatureFields {
    pub fn all() -> Self {
        Self {
            ec: true,
            disease: true,
            intervention: true,
            phase: true,
        }
    }

    pub fn ec_only() -> Self {
        Self {
            ec: true,
            disease: false,
            intervention: false,
            phase: false,
        }
    }

    pub fn any(&self) -> bool {
        self.ec || self.disease || self.intervention || self.phase
    }
}

/// Sparse L2-normalized hashed representation of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub bits: u32,
    /// sorted (bucket, weight) pairs
    pub entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn dimension(&self) -> usize {
        1usize << self.bits
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }
}

/// FNV-1a, 64-bit.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn bucket(feature: &str, bits: u32) -> u32 {
    (fnv1a(feature.as_bytes()) & ((1u64 << bits) - 1)) as u32
}

fn accumulate(text: &str, prefix: &str, bits: u32, counts: &mut std::collections::HashMap<u32, f64>) {
    let tokens = tokenize_basic(&normalize(text)).tokens;
    for token in &tokens {
        *counts.entry(bucket(&format!("{prefix}:{token}"), bits)).or_default() += 1.0;
    }
    for pair in tokens.windows(2) {
        let feature = format!("{prefix}:{} {}", pair[0], pair[1]);
        *counts.entry(bucket(&feature, bits)).or_default() += 1.0;
    }
}

/// Hash the selected fields of one trial into an L2-normalized vector.
pub fn featurize(
    trial: &TrialRecord,
    fields: FeatureFields,
    bits: u32,
) -> Result<FeatureVector, ModelError> {
    if !fields.any() {
        return Err(ModelError::NoFields);
    }
    let mut counts = std::collections::HashMap::new();
    if fields.ec {
        if let Some(first) = trial.ec_versions.first() {
            accumulate(&first.text, "ec", bits, &mut counts);
        }
    }
    if fields.disease {
        for d in &trial.metadata.diseases {
            accumulate(d, "disease", bits, &mut counts);
        }
    }
    if fields.intervention {
        for i in &trial.metadata.interventions {
            accumulate(i, "intervention", bits, &mut counts);
        }
    }
    if fields.phase {
        let phase = trial.metadata.phase.to_string();
        *counts
            .entry(bucket(&format!("phase:{phase}"), bits))
            .or_default() += 1.0;
    }

    let mut entries: Vec<(u32, f64)> = counts.into_iter().collect();
    entries.sort_unstable_by_key(|&(k, _)| k);
    let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, v) in &mut entries {
            *v /= norm;
        }
    }
    Ok(FeatureVector { bits, entries })
}

/// Featurize a corpus slice, order-preserving.
pub fn featurize_corpus(
    trials: &[TrialRecord],
    fields: FeatureFields,
    bits: u32,
) -> Result<Vec<FeatureVector>, ModelError> {
    if !fields.any() {
        return Err(ModelError::NoFields);
    }
    #[cfg(feature = "parallel")]
    let out = trials
        .par_iter()
        .map(|t| featurize(t, fields, bits).expect("fields validated"))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let out = trials
        .iter()
        .map(|t| featurize(t, fields, bits).expect("fields validated"))
        .collect();
    Ok(out)
}

/// Sequential featurization regardless of feature flags (benchmark
/// baseline).
pub fn featurize_corpus_sequential(
    trials: &[TrialRecord],
    fields: FeatureFields,
    bits: u32,
) -> Result<Vec<FeatureVector>, ModelError> {
    trials.iter().map(|t| featurize(t, fields, bits)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub iterations: u32,
    pub final_loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LRModel {
    pub bits: u32,
    pub c: f64,
    pub bias: f64,
    pub weights: Vec<f64>,
    pub training_meta: TrainingMeta,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn dot(vector: &FeatureVector, weights: &[f64]) -> f64 {
    vector
        .entries
        .iter()
        .map(|&(k, v)| v * weights[k as usize])
        .sum()
}

/// Mean binary cross-entropy plus ridge penalty ‖w‖² / (2·C·n).
fn objective(
    vectors: &[FeatureVector],
    labels: &[u8],
    weights: &[f64],
    bias: f64,
    c: f64,
) -> f64 {
    let n = vectors.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in vectors.iter().zip(labels) {
        let z = dot(x, weights) + bias;
        // log(1 + e^z) - y·z, numerically stable
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - f64::from(y) * z;
    }
    let penalty = weights.iter().map(|w| w * w).sum::<f64>() / (2.0 * c * n);
    loss / n + penalty
}

fn gradient(
    vectors: &[FeatureVector],
    labels: &[u8],
    weights: &[f64],
    bias: f64,
    c: f64,
) -> (Vec<f64>, f64) {
    let n = vectors.len() as f64;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (x, &y) in vectors.iter().zip(labels) {
        let residual = sigmoid(dot(x, weights) + bias) - f64::from(y);
        for &(k, v) in &x.entries {
            grad_w[k as usize] += residual * v;
        }
        grad_b += residual;
    }
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + w / (c * n);
    }
    (grad_w, grad_b / n)
}

/// Training objective and its analytic gradient at an arbitrary point,
/// for external verification (finite-difference checks, loss tracking).
pub fn loss_and_gradient(
    vectors: &[FeatureVector],
    labels: &[u8],
    weights: &[f64],
    bias: f64,
    c: f64,
) -> (f64, Vec<f64>, f64) {
    let loss = objective(vectors, labels, weights, bias, c);
    let (grad_w, grad_b) = gradient(vectors, labels, weights, bias, c);
    (loss, grad_w, grad_b)
}

pub const MAX_TRAIN_ITERATIONS: u32 = 2_000;
const GRAD_TOLERANCE: f64 = 1e-6;

/// Full-batch gradient descent with backtracking line search, zero init.
/// Deterministic; `seed` is recorded for provenance only.
pub fn train_lr(
    vectors: &[FeatureVector],
    labels: &[u8],
    c: f64,
    seed: u64,
) -> Result<LRModel, ModelError> {
    if vectors.len() != labels.len() {
        return Err(ModelError::CountMismatch(vectors.len(), labels.len()));
    }
    if !labels.iter().any(|&l| l == 1) || !labels.iter().any(|&l| l == 0) {
        return Err(ModelError::SingleClass);
    }
    let dimension = vectors.first().map_or(1usize << DEFAULT_HASH_BITS, FeatureVector::dimension);
    let bits = vectors.first().map_or(DEFAULT_HASH_BITS, |v| v.bits);

    let mut weights = vec![0.0; dimension];
    let mut bias = 0.0;
    let mut loss = objective(vectors, labels, &weights, bias, c);
    let mut iterations = 0;
    // warm-start the line search from twice the last accepted step: with
    // L2-normalized features the curvature is mild and a fixed unit step
    // crawls, while doubling lets the step track the local Lipschitz bound
    let mut step_init = 1.0;

    for _ in 0..MAX_TRAIN_ITERATIONS {
        let (grad_w, grad_b) = gradient(vectors, labels, &weights, bias, c);
        let grad_inf = grad_w
            .iter()
            .chain(std::iter::once(&grad_b))
            .fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_inf < GRAD_TOLERANCE {
            break;
        }
        let grad_sq: f64 =
            grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b;

        // backtracking line search on the Armijo condition
        let mut step = step_init;
        let mut accepted = false;
        for _ in 0..60 {
            let trial_w: Vec<f64> = weights
                .iter()
                .zip(&grad_w)
                .map(|(w, g)| w - step * g)
                .collect();
            let trial_b = bias - step * grad_b;
            let trial_loss = objective(vectors, labels, &trial_w, trial_b, c);
            if trial_loss <= loss - 0.5 * step * grad_sq {
                weights = trial_w;
                bias = trial_b;
                loss = trial_loss;
                step_init = step * 2.0;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
    }

    Ok(LRModel {
        bits,
        c,
        bias,
        weights,
        training_meta: TrainingMeta {
            seed,
            iterations,
            final_loss: loss,
        },
    })
}

/// Sigmoid scores for a batch of vectors.
pub fn predict(model: &LRModel, vectors: &[FeatureVector]) -> Result<Vec<f64>, ModelError> {
    for v in vectors {
        if v.dimension() != model.weights.len() {
            return Err(ModelError::DimensionMismatch {
                vector: v.dimension(),
                model: model.weights.len(),
            });
        }
    }
    #[cfg(feature = "parallel")]
    let scores = vectors
        .par_iter()
        .map(|v| sigmoid(dot(v, &model.weights) + model.bias))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let scores = vectors
        .iter()
        .map(|v| sigmoid(dot(v, &model.weights) + model.bias))
        .collect();
    Ok(scores)
}

/// Train one model per C in `grid` and keep the one with the best
/// validation AUROC (ties break toward the earlier grid entry).
pub fn select_c(
    train_vectors: &[FeatureVector],
    train_labels: &[u8],
    val_vectors: &[FeatureVector],
    val_labels: &[u8],
    grid: &[f64],
    seed: u64,
) -> Result<(LRModel, f64), ModelError> {
    let mut best: Option<(LRModel, f64)> = None;
    for &c in grid {
        let model = train_lr(train_vectors, train_labels, c, seed)?;
        let scores = predict(&model, val_vectors)?;
        let auc = auroc(&scores, val_labels).map_err(|_| ModelError::SingleClass)?;
        if best.as_ref().is_none_or(|(_, b)| auc > *b) {
            best = Some((model, auc));
        }
    }
    best.ok_or(ModelError::SingleClass)
}

/// Versioned JSON model file with base64 little-endian f64 weights.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    b: u32,
    #[serde(rename = "C")]
    c: f64,
    bias: f64,
    weights_b64: String,
    training_meta: TrainingMeta,
}

const MODEL_FORMAT_VERSION: u32 = 1;

pub fn model_to_json(model: &LRModel) -> String {
    let mut bytes = Vec::with_capacity(model.weights.len() * 8);
    for w in &model.weights {
        bytes.extend_from_slice(&w.to_le_bytes());
    }
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        b: model.bits,
        c: model.c,
        bias: model.bias,
        weights_b64: base64::engine::general_purpose::STANDARD.encode(bytes),
        training_meta: model.training_meta.clone(),
    };
    serde_json::to_string_pretty(&file).expect("model serialization")
}

pub fn model_from_json(json: &str) -> Result<LRModel, ModelError> {
    let file: ModelFile =
        serde_json::from_str(json).map_err(|e| ModelError::Malformed(e.to_string()))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(ModelError::Malformed(format!(
            "unsupported format version {}",
            file.format_version
        )));
    }
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(&file.weights_b64)
        .map_err(|e| ModelError::Malformed(e.to_string()))?;
    if bytes.len() % 8 != 0 || bytes.len() / 8 != 1usize << file.b {
        return Err(ModelError::Malformed(format!(
            "weight payload is {} bytes, expected {}",
            bytes.len(),
            (1usize << file.b) * 8
        )));
    }
    let weights = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(LRModel {
        bits: file.b,
        c: file.c,
        bias: file.bias,
        weights,
        training_meta: file.training_meta,
    })
}
