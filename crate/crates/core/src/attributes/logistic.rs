use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AttributeError, Result};

const MAGIC: &[u8; 4] = b"RELA";
const VERSION: u32 = 1;

/// Logits beyond this magnitude are reported as exactly 0 or 1.
pub const SATURATION_LOGIT: f64 = 9.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttributeKind {
    Smile,
    LeftEye,
    RightEye,
}

impl AttributeKind {
    pub fn id(self) -> u8 {
        match self {
            AttributeKind::Smile => 0,
            AttributeKind::LeftEye => 1,
            AttributeKind::RightEye => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(AttributeKind::Smile),
            1 => Some(AttributeKind::LeftEye),
            2 => Some(AttributeKind::RightEye),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AttributeKind::Smile => "smile",
            AttributeKind::LeftEye => "left-eye",
            AttributeKind::RightEye => "right-eye",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [AttributeKind::Smile, AttributeKind::LeftEye, AttributeKind::RightEye].into_iter().find(|k| k.name() == s)
    }

    pub fn file_name(self) -> String {
        format!("{}.rela", self.name())
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub input_dim: usize,
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Probability as reported to callers: 4 decimals, clamped to exactly 0 or
/// 1 for large logits.
pub fn report_probability(logit: f64) -> f64 {
    if logit > SATURATION_LOGIT {
        1.0
    } else if logit < -SATURATION_LOGIT {
        0.0
    } else {
        (sigmoid(logit) * 1e4).round() / 1e4
    }
}

impl LogisticModel {
    pub fn zeros(input_dim: usize) -> Self {
        LogisticModel { weights: vec![0.0; input_dim], bias: 0.0, input_dim }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.input_dim {
            return Err(AttributeError::Model(format!(
                "{} weights for input_dim {}",
                self.weights.len(),
                self.input_dim
            )));
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(AttributeError::Model("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        super::features::check_dim(x, self.input_dim)?;
        Ok(self.raw_logit(x))
    }

    fn raw_logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    /// Unrounded sigmoid output.
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }

    /// Reported probability (see [`report_probability`]).
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(report_probability(self.logit(x)?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticConfig {
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
    pub epochs: usize,
    /// Step size; derived from a bound on the loss curvature when `None`.
    pub learning_rate: Option<f64>,
    /// Mini-batch size; full batch when `None`.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { l2: 1e-3, epochs: 400, learning_rate: None, batch_size: None, seed: 7 }
    }
}

fn label(y: bool) -> f64 {
    if y {
        1.0
    } else {
        0.0
    }
}

/// Mean cross-entropy plus `l2/2 * |w|^2`, with its gradient with respect
/// to the weights and the bias.
pub fn loss_and_gradient(model: &LogisticModel, samples: &[Vec<f64>], labels: &[bool], l2: f64) -> (f64, Vec<f64>, f64) {
    let idx: Vec<usize> = (0..samples.len()).collect();
    batch_loss_and_gradient(model, samples, labels, l2, &idx)
}

fn batch_loss_and_gradient(
    model: &LogisticModel,
    samples: &[Vec<f64>],
    labels: &[bool],
    l2: f64,
    idx: &[usize],
) -> (f64, Vec<f64>, f64) {
    let n = idx.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; model.input_dim];
    let mut gb = 0.0;
    for &i in idx {
        let z = model.raw_logit(&samples[i]);
        let y = label(labels[i]);
        // log(1 + e^z) - y z, computed without overflow
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        let r = sigmoid(z) - y;
        for (g, v) in gw.iter_mut().zip(&samples[i]) {
            *g += r * v;
        }
        gb += r;
    }
    loss /= n;
    gb /= n;
    let mut reg = 0.0;
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
        reg += w * w;
    }
    (loss + 0.5 * l2 * reg, gw, gb)
}

/// Gradient descent on L2-regularized cross-entropy from a zero start.
/// Returns the parameters with the lowest full training loss seen, so the
/// result never scores worse than the start.
pub fn train_logistic(samples: &[Vec<f64>], labels: &[bool], cfg: &LogisticConfig) -> Result<LogisticModel> {
    if samples.len() != labels.len() {
        return Err(AttributeError::InvalidInput(format!("{} samples but {} labels", samples.len(), labels.len())));
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(AttributeError::Training("training data must contain both classes".into()));
    }
    if !(cfg.l2 >= 0.0) || !cfg.l2.is_finite() {
        return Err(AttributeError::InvalidInput(format!("l2 must be non-negative, got {}", cfg.l2)));
    }
    let dim = samples[0].len();
    for s in samples {
        super::features::check_dim(s, dim)?;
        if s.iter().any(|v| !v.is_finite()) {
            return Err(AttributeError::InvalidInput("non-finite feature value".into()));
        }
    }
    let lr = match cfg.learning_rate {
        Some(lr) if lr > 0.0 && lr.is_finite() => lr,
        Some(lr) => return Err(AttributeError::InvalidInput(format!("learning rate must be positive, got {lr}"))),
        None => {
            let max_sq = samples.iter().map(|s| s.iter().map(|v| v * v).sum::<f64>() + 1.0).fold(0.0, f64::max);
            1.0 / (0.25 * max_sq + cfg.l2)
        }
    };
    let batch = cfg.batch_size.unwrap_or(samples.len()).clamp(1, samples.len());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = LogisticModel::zeros(dim);
    let mut best = model.clone();
    let mut best_loss = loss_and_gradient(&model, samples, labels, cfg.l2).0;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..cfg.epochs {
        if batch < samples.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let (_, gw, gb) = batch_loss_and_gradient(&model, samples, labels, cfg.l2, chunk);
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= lr * g;
            }
            model.bias -= lr * gb;
        }
        let loss = loss_and_gradient(&model, samples, labels, cfg.l2).0;
        if loss <= best_loss {
            best_loss = loss;
            best.clone_from(&model);
        }
    }
    tracing::debug!(loss = best_loss, "logistic model trained");
    Ok(best)
}

pub fn encode_attribute_model(kind: AttributeKind, model: &LogisticModel) -> Result<Vec<u8>> {
    model.validate()?;
    let mut out = Vec::with_capacity(21 + 8 * model.input_dim);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind.id());
    let dim = u32::try_from(model.input_dim).map_err(|_| AttributeError::Model("input_dim too large".into()))?;
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&model.bias.to_le_bytes());
    for w in &model.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_attribute_model(bytes: &[u8]) -> Result<(AttributeKind, LogisticModel)> {
    let bad = |m: &str| AttributeError::Model(m.to_string());
    if bytes.len() < 21 || &bytes[..4] != MAGIC {
        return Err(bad("not an attribute model file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(AttributeError::Model(format!("unsupported version {version}")));
    }
    let kind = AttributeKind::from_id(bytes[8]).ok_or_else(|| bad("unknown model id"))?;
    let dim = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    if bytes.len() != 21 + 8 * dim {
        return Err(AttributeError::Model(format!("length {} does not match input_dim {dim}", bytes.len())));
    }
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let bias = f64_at(13);
    let weights = (0..dim).map(|i| f64_at(21 + 8 * i)).collect();
    let model = LogisticModel { weights, bias, input_dim: dim };
    model.validate()?;
    Ok((kind, model))
}

pub fn save_attribute_model(path: impl AsRef<Path>, kind: AttributeKind, model: &LogisticModel) -> Result<()> {
    std::fs::write(path, encode_attribute_model(kind, model)?)?;
    Ok(())
}

pub fn load_attribute_model(path: impl AsRef<Path>) -> Result<(AttributeKind, LogisticModel)> {
    decode_attribute_model(&std::fs::read(path)?)
}
