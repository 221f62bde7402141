//! Mini-batch training of the classifier head with AdamW.

use ndarray::{Array2, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{apply_strategy, BalanceError, ResampleStrategy};
use crate::dataset::{class_counts, Label, LabeledExample};
use crate::model::{softmax2, weighted_ce_from_logits, ClassifierHead, Dense, ModelError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    Empty,
    #[error("training set has no {0:?} examples")]
    SingleClass(Label),
    #[error("example {index} has {actual} features, expected {expected}")]
    Dimension { index: usize, expected: usize, actual: usize },
    #[error("loss became non-finite in epoch {epoch} (batch {batch})")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Loss weights for the class-weight strategy; derived from the data
    /// when absent. Resampling strategies always train with (1, 1).
    pub class_weights: Option<[f64; 2]>,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-3,
            weight_decay: 0.01,
            epochs: 50,
            batch_size: 64,
            class_weights: None,
            seed: 1337,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |what: &str| Err(TrainError::Config(what.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be a nonnegative number");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight decay must be a nonnegative number");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("moment constants must satisfy 0 <= beta < 1 and epsilon > 0");
        }
        if let Some(w) = self.class_weights {
            if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad("class weights must be positive");
            }
        }
        Ok(())
    }
}

/// What happened during a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub strategy: ResampleStrategy,
    /// Class counts (C0, C1) before and after resampling.
    pub counts_before: [usize; 2],
    pub counts_after: [usize; 2],
    pub class_weights: [f64; 2],
    /// Mean training loss (dropout active) per epoch.
    pub epoch_losses: Vec<f64>,
    /// Inference-mode weighted loss of the returned head on the
    /// (resampled) training set.
    pub final_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub head: ClassifierHead,
    pub log: TrainLog,
}

/// Decoupled-weight-decay Adam.
#[derive(Debug, Clone)]
pub struct AdamW {
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    first: Vec<Dense>,
    second: Vec<Dense>,
}

impl AdamW {
    pub fn new(head: &ClassifierHead, cfg: &TrainConfig) -> Self {
        let zeros: Vec<Dense> = head
            .layers()
            .iter()
            .map(|l| Dense {
                weights: Array2::zeros(l.weights.raw_dim()),
                bias: ndarray::Array1::zeros(l.bias.raw_dim()),
            })
            .collect();
        Self {
            lr: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// `theta <- theta * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)`
    pub fn update(&mut self, head: &mut ClassifierHead, grads: &[Dense]) {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = self.lr;
        let decay = 1.0 - lr * self.weight_decay;
        let apply = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p = *p * decay - lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (((layer, g), m), v) in head
            .layers_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(apply);
            Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(apply);
        }
    }
}

fn feature_matrix(examples: &[LabeledExample], dim: usize) -> Result<Array2<f64>, TrainError> {
    let mut x = Array2::zeros((examples.len(), dim));
    for (i, (e, mut row)) in examples.iter().zip(x.rows_mut()).enumerate() {
        if e.features.dim() != dim {
            return Err(TrainError::Dimension {
                index: i,
                expected: dim,
                actual: e.features.dim(),
            });
        }
        row.assign(&ndarray::ArrayView1::from(e.features.as_slice()));
    }
    Ok(x)
}

fn check_classes(examples: &[LabeledExample]) -> Result<[usize; 2], TrainError> {
    if examples.is_empty() {
        return Err(TrainError::Empty);
    }
    let counts = class_counts(examples);
    if counts[0] == 0 {
        return Err(TrainError::SingleClass(Label::NoInteraction));
    }
    if counts[1] == 0 {
        return Err(TrainError::SingleClass(Label::Interaction));
    }
    Ok(counts)
}

/// Train the standard head (`F -> 256 -> 384 -> 192 -> 384 -> 2`) from a
/// Glorot initialization seeded by `cfg.seed`.
pub fn train(
    examples: &[LabeledExample],
    cfg: &TrainConfig,
    strategy: ResampleStrategy,
) -> Result<TrainedModel, TrainError> {
    check_classes(examples)?;
    let head = ClassifierHead::standard(examples[0].features.dim(), cfg.seed);
    train_head(head, examples, cfg, strategy)
}

/// Train an already-initialized head. The returned head is rounded to
/// single precision so that it survives a save/load unchanged.
pub fn train_head(
    mut head: ClassifierHead,
    examples: &[LabeledExample],
    cfg: &TrainConfig,
    strategy: ResampleStrategy,
) -> Result<TrainedModel, TrainError> {
    cfg.validate()?;
    let counts_before = check_classes(examples)?;
    let (data, mut class_weights) = apply_strategy(examples, strategy)?;
    if let (ResampleStrategy::ClassWeights, Some(w)) = (strategy, cfg.class_weights) {
        class_weights = w;
    }
    let counts_after = class_counts(&data);
    log::info!(
        "training on {} examples (C0={}, C1={}), weights ({:.4}, {:.4})",
        data.len(),
        counts_after[0],
        counts_after[1],
        class_weights[0],
        class_weights[1]
    );
    let x = feature_matrix(&data, head.input_dim())?;
    let labels: Vec<Label> = data.iter().map(|e| e.label).collect();

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5DEE_CE66_D1CE_5EED);
    let mut optimizer = AdamW::new(&head, cfg);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = x.select(ndarray::Axis(0), chunk);
            let batch_labels: Vec<Label> = chunk.iter().map(|&i| labels[i]).collect();
            let cache = head.forward_batch(batch.view(), Some(&mut dropout_rng))?;
            let (loss, grads) = head.backward(&cache, &batch_labels, class_weights);
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: b });
            }
            total += loss * chunk.len() as f64;
            optimizer.update(&mut head, &grads.layers);
        }
        let mean = total / data.len() as f64;
        log::debug!("epoch {}: loss {:.6}", epoch + 1, mean);
        epoch_losses.push(mean);
    }

    head.round_to_f32();
    head.check_finite()?;
    let final_loss = evaluate_loss(&head, &data, class_weights)?;
    if !final_loss.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            epoch: cfg.epochs,
            batch: 0,
        });
    }
    Ok(TrainedModel {
        head,
        log: TrainLog {
            strategy,
            counts_before,
            counts_after,
            class_weights,
            epoch_losses,
            final_loss,
        },
    })
}

/// Inference logits for every example, in order.
pub fn predict_logits(head: &ClassifierHead, examples: &[LabeledExample]) -> Result<Vec<[f64; 2]>, TrainError> {
    if examples.is_empty() {
        return Ok(Vec::new());
    }
    let x = feature_matrix(examples, head.input_dim())?;
    let cache = head.forward_batch::<ChaCha8Rng>(x.view(), None)?;
    Ok(cache.logits.rows().into_iter().map(|r| [r[0], r[1]]).collect())
}

/// `P(C1 | x)` for every example.
pub fn predict_positive(head: &ClassifierHead, examples: &[LabeledExample]) -> Result<Vec<f64>, TrainError> {
    Ok(predict_logits(head, examples)?.into_iter().map(|z| softmax2(z)[1]).collect())
}

/// Mean weighted cross-entropy at inference.
pub fn evaluate_loss(
    head: &ClassifierHead,
    examples: &[LabeledExample],
    class_weights: [f64; 2],
) -> Result<f64, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::Empty);
    }
    let logits = predict_logits(head, examples)?;
    let sum: f64 = logits
        .iter()
        .zip(examples)
        .map(|(z, e)| weighted_ce_from_logits(*z, e.label, class_weights))
        .sum();
    Ok(sum / examples.len() as f64)
}

/// Inference-mode mean weighted loss and its gradient, flattened in
/// [`ClassifierHead::parameter`] order.
pub fn loss_and_gradient(
    head: &ClassifierHead,
    examples: &[LabeledExample],
    class_weights: [f64; 2],
) -> Result<(f64, Vec<f64>), TrainError> {
    if examples.is_empty() {
        return Err(TrainError::Empty);
    }
    let x = feature_matrix(examples, head.input_dim())?;
    let labels: Vec<Label> = examples.iter().map(|e| e.label).collect();
    let cache = head.forward_batch::<ChaCha8Rng>(x.view(), None)?;
    let (loss, grads) = head.backward(&cache, &labels, class_weights);
    Ok((loss, grads.to_vec()))
}
