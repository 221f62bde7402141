//! Class-imbalance handling: balanced loss weights, SMOTE oversampling and
//! random undersampling.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{class_counts, Label, LabeledExample};
use crate::features::FeatureVector;

#[derive(Debug, Error, PartialEq)]
pub enum BalanceError {
    #[error("class {0:?} has no examples")]
    MissingClass(Label),
    #[error("SMOTE needs more than {k} minority examples, found {minority}")]
    TooFewNeighbors { k: usize, minority: usize },
    #[error("k_neighbors must be at least 1")]
    ZeroNeighbors,
}

/// How the training set is rebalanced before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResampleStrategy {
    /// Keep the data; weight the loss by inverse class frequency.
    ClassWeights,
    SmoteOversample { k_neighbors: usize, seed: u64 },
    RandomUndersample { seed: u64 },
}

/// Balanced weights `w_k = N / (2 * N_k)`.
pub fn compute_class_weights(labels: impl IntoIterator<Item = Label>) -> Result<[f64; 2], BalanceError> {
    let mut counts = [0usize; 2];
    for l in labels {
        counts[l.index()] += 1;
    }
    weights_from_counts(counts)
}

pub fn weights_from_counts(counts: [usize; 2]) -> Result<[f64; 2], BalanceError> {
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(BalanceError::MissingClass(Label::from_index(k).expect("binary")));
        }
    }
    let total = (counts[0] + counts[1]) as f64;
    Ok([total / (2.0 * counts[0] as f64), total / (2.0 * counts[1] as f64)])
}

fn minority_majority(examples: &[LabeledExample]) -> Result<(Label, Label, [usize; 2]), BalanceError> {
    let counts = class_counts(examples);
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(BalanceError::MissingClass(Label::from_index(k).expect("binary")));
        }
    }
    if counts[0] <= counts[1] {
        Ok((Label::NoInteraction, Label::Interaction, counts))
    } else {
        Ok((Label::Interaction, Label::NoInteraction, counts))
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Synthesize minority examples until both classes are the same size.
/// Each synthetic point is `x + u * (x_nn - x)` for a random minority
/// example `x`, one of its `k` nearest minority neighbours `x_nn`
/// (Euclidean, ties broken by position) and `u ~ U(0, 1)`. Synthetic
/// examples are appended after the originals.
pub fn smote_oversample(
    examples: &[LabeledExample],
    k_neighbors: usize,
    seed: u64,
) -> Result<Vec<LabeledExample>, BalanceError> {
    if k_neighbors == 0 {
        return Err(BalanceError::ZeroNeighbors);
    }
    let (minority_label, _, counts) = minority_majority(examples)?;
    let deficit = counts[1 - minority_label.index()] - counts[minority_label.index()];
    if deficit == 0 {
        return Ok(examples.to_vec());
    }
    let minority: Vec<&[f64]> = examples
        .iter()
        .filter(|e| e.label == minority_label)
        .map(|e| e.features.as_slice())
        .collect();
    if minority.len() <= k_neighbors {
        return Err(BalanceError::TooFewNeighbors {
            k: k_neighbors,
            minority: minority.len(),
        });
    }

    let neighbours: Vec<Vec<usize>> = minority
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut others: Vec<(f64, usize)> = minority
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, y)| (squared_distance(x, y), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.truncate(k_neighbors);
            others.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = examples.to_vec();
    out.reserve(deficit);
    for _ in 0..deficit {
        let base = rng.random_range(0..minority.len());
        let nn = neighbours[base][rng.random_range(0..k_neighbors)];
        let u: f64 = rng.random();
        let x = minority[base];
        let y = minority[nn];
        let values = x.iter().zip(y).map(|(a, b)| a + u * (b - a)).collect();
        out.push(LabeledExample {
            features: FeatureVector(values),
            label: minority_label,
        });
    }
    Ok(out)
}

/// Keep every minority example and a uniformly drawn, equally sized subset
/// of the majority class. Original order is preserved.
pub fn random_undersample(examples: &[LabeledExample], seed: u64) -> Result<Vec<LabeledExample>, BalanceError> {
    let (minority_label, majority_label, counts) = minority_majority(examples)?;
    let keep = counts[minority_label.index()];
    let majority_total = counts[majority_label.index()];
    if keep == majority_total {
        return Ok(examples.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; majority_total];
    for i in index::sample(&mut rng, majority_total, keep) {
        chosen[i] = true;
    }
    let mut majority_seen = 0;
    Ok(examples
        .iter()
        .filter(|e| {
            if e.label == majority_label {
                majority_seen += 1;
                chosen[majority_seen - 1]
            } else {
                true
            }
        })
        .cloned()
        .collect())
}

/// Apply a strategy, returning the training set and the loss weights to
/// use with it.
pub fn apply_strategy(
    examples: &[LabeledExample],
    strategy: ResampleStrategy,
) -> Result<(Vec<LabeledExample>, [f64; 2]), BalanceError> {
    match strategy {
        ResampleStrategy::ClassWeights => {
            let w = weights_from_counts(class_counts(examples))?;
            Ok((examples.to_vec(), w))
        }
        ResampleStrategy::SmoteOversample { k_neighbors, seed } => {
            Ok((smote_oversample(examples, k_neighbors, seed)?, [1.0, 1.0]))
        }
        ResampleStrategy::RandomUndersample { seed } => Ok((random_undersample(examples, seed)?, [1.0, 1.0])),
    }
}
