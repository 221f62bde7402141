//! Dense classification head: affine layers with ReLU on every hidden
//! layer, inverted dropout while training, and a two-logit output.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::Label;

/// Hidden layer widths of the standard head.
pub const HIDDEN_DIMS: [usize; 4] = [256, 384, 192, 384];
/// Dropout applied after each hidden layer of the standard head.
pub const DROPOUT_RATES: [f64; 4] = [0.15, 0.2, 0.25, 0.2];
pub const OUTPUT_DIM: usize = 2;

const MODEL_MAGIC: &[u8; 8] = b"EGOGATE1";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("expected {expected} input features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("parameter {0} is not finite")]
    NonFiniteParameter(usize),
    #[error("logits are not finite")]
    NonFiniteLogits,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(input: usize, output: usize) -> Self {
        Self {
            weights: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// `x . W^T + b` for a batch of row vectors.
    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.weights.t()) + &self.bias
    }
}

/// Feed-forward head `input -> hidden... -> 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    layers: Vec<Dense>,
    dropout: Vec<f64>,
}

/// Intermediate values of a batch forward pass, kept for backprop.
#[derive(Debug)]
pub struct ForwardCache {
    /// Layer inputs; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Array2<f64>>,
    /// Dropout multipliers (0 or 1/(1-p)) per hidden layer; `None` at inference.
    masks: Vec<Option<Array2<f64>>>,
    pub logits: Array2<f64>,
}

/// Gradient with the same shape as a head's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    /// Flattened in [`ClassifierHead::parameter`] order.
    pub fn to_vec(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }
}

impl ClassifierHead {
    /// All-zero head with the given layer widths (input first, 2 last) and
    /// one dropout rate per hidden layer.
    pub fn zeros(dims: &[usize], dropout: &[f64]) -> Result<Self, ModelError> {
        if dims.len() < 2 {
            return Err(ModelError::Architecture("need at least input and output widths".into()));
        }
        if dims.last() != Some(&OUTPUT_DIM) {
            return Err(ModelError::Architecture(format!(
                "output width must be {OUTPUT_DIM}, got {:?}",
                dims.last()
            )));
        }
        if dims.contains(&0) {
            return Err(ModelError::Architecture("zero-width layer".into()));
        }
        if dropout.len() != dims.len() - 2 {
            return Err(ModelError::Architecture(format!(
                "{} hidden layers but {} dropout rates",
                dims.len() - 2,
                dropout.len()
            )));
        }
        if dropout.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(ModelError::Architecture("dropout rates must lie in [0, 1)".into()));
        }
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self {
            layers,
            dropout: dropout.to_vec(),
        })
    }

    /// Glorot-uniform weights and zero biases.
    pub fn new(dims: &[usize], dropout: &[f64], seed: u64) -> Result<Self, ModelError> {
        let mut head = Self::zeros(dims, dropout)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut head.layers {
            let limit = (6.0 / (layer.input_dim() + layer.output_dim()) as f64).sqrt();
            layer.weights.mapv_inplace(|_| rng.random_range(-limit..limit));
        }
        Ok(head)
    }

    /// `input -> 256 -> 384 -> 192 -> 384 -> 2` with dropout
    /// (0.15, 0.2, 0.25, 0.2).
    pub fn standard(input_dim: usize, seed: u64) -> Self {
        let mut dims = vec![input_dim];
        dims.extend(HIDDEN_DIMS);
        dims.push(OUTPUT_DIM);
        Self::new(&dims, &DROPOUT_RATES, seed).expect("standard architecture is valid")
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(Dense::output_dim));
        dims
    }

    pub fn dropout_rates(&self) -> &[f64] {
        &self.dropout
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (l, layer) in self.layers.iter().enumerate() {
            if index < layer.param_count() {
                return (l, index);
            }
            index -= layer.param_count();
        }
        panic!("parameter index out of range");
    }

    /// Parameter by flat index: each layer's weights (row-major) then bias.
    pub fn parameter(&self, index: usize) -> f64 {
        let (l, i) = self.locate(index);
        let layer = &self.layers[l];
        match i.checked_sub(layer.weights.len()) {
            None => layer.weights.as_slice().expect("standard layout")[i],
            Some(b) => layer.bias[b],
        }
    }

    pub fn set_parameter(&mut self, index: usize, value: f64) {
        let (l, i) = self.locate(index);
        let layer = &mut self.layers[l];
        match i.checked_sub(layer.weights.len()) {
            None => layer.weights.as_slice_mut().expect("standard layout")[i] = value,
            Some(b) => layer.bias[b] = value,
        }
    }

    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn check_finite(&self) -> Result<(), ModelError> {
        match self.parameters().position(|p| !p.is_finite()) {
            Some(i) => Err(ModelError::NonFiniteParameter(i)),
            None => Ok(()),
        }
    }

    /// Round every parameter to single precision, the storage format of
    /// the model file.
    pub fn round_to_f32(&mut self) {
        for layer in &mut self.layers {
            layer.weights.mapv_inplace(|w| w as f32 as f64);
            layer.bias.mapv_inplace(|b| b as f32 as f64);
        }
    }

    /// Batch forward pass. Dropout is drawn from `rng` (row by row, layer
    /// by layer) when one is supplied.
    pub fn forward_batch<R: Rng + ?Sized>(
        &self,
        batch: ArrayView2<'_, f64>,
        mut rng: Option<&mut R>,
    ) -> Result<ForwardCache, ModelError> {
        if batch.ncols() != self.input_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim(),
                actual: batch.ncols(),
            });
        }
        let hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(hidden);
        let mut masks = Vec::with_capacity(hidden);
        let mut x = batch.to_owned();
        for (l, layer) in self.layers[..hidden].iter().enumerate() {
            let z = layer.apply(x.view());
            let mut a = z.mapv(|v| v.max(0.0));
            let mask = match rng.as_deref_mut() {
                Some(rng) if self.dropout[l] > 0.0 => {
                    let p = self.dropout[l];
                    let scale = 1.0 / (1.0 - p);
                    let mut m = Array2::zeros(a.raw_dim());
                    for v in m.iter_mut() {
                        *v = if rng.random::<f64>() < p { 0.0 } else { scale };
                    }
                    a *= &m;
                    Some(m)
                }
                _ => None,
            };
            inputs.push(x);
            pre.push(z);
            masks.push(mask);
            x = a;
        }
        let logits = self.layers[hidden].apply(x.view());
        inputs.push(x);
        Ok(ForwardCache {
            inputs,
            pre,
            masks,
            logits,
        })
    }

    /// Logits for a single feature vector. With `training` set, dropout
    /// masks are drawn from a generator seeded with `dropout_seed`.
    pub fn forward(&self, x: &[f64], training: bool, dropout_seed: u64) -> Result<[f64; 2], ModelError> {
        self.check_finite()?;
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        let cache = if training {
            let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
            self.forward_batch(batch, Some(&mut rng))?
        } else {
            self.forward_batch::<ChaCha8Rng>(batch, None)?
        };
        Ok([cache.logits[[0, 0]], cache.logits[[0, 1]]])
    }

    /// `P(C1 | x)` at inference.
    pub fn predict_positive(&self, x: &[f64]) -> Result<f64, ModelError> {
        let z = self.forward(x, false, 0)?;
        if !z.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFiniteLogits);
        }
        Ok(softmax2(z)[1])
    }

    /// Mean weighted cross-entropy of a forward pass and its gradient.
    pub fn backward(&self, cache: &ForwardCache, labels: &[Label], class_weights: [f64; 2]) -> (f64, Gradients) {
        let n = labels.len() as f64;
        let mut loss = 0.0;
        let mut delta = Array2::zeros(cache.logits.raw_dim());
        for (r, (z, y)) in cache.logits.rows().into_iter().zip(labels).enumerate() {
            let z = [z[0], z[1]];
            let w = class_weights[y.index()];
            loss += weighted_ce_from_logits(z, *y, class_weights);
            let p = softmax2(z);
            for k in 0..2 {
                let target = if k == y.index() { 1.0 } else { 0.0 };
                delta[[r, k]] = w * (p[k] - target) / n;
            }
        }
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.inputs[l];
            let g = Dense {
                weights: delta.t().dot(input),
                bias: delta.sum_axis(Axis(0)),
            };
            grads.push(g);
            if l == 0 {
                break;
            }
            let mut upstream = delta.dot(&layer.weights);
            if let Some(mask) = &cache.masks[l - 1] {
                upstream *= mask;
            }
            upstream.zip_mut_with(&cache.pre[l - 1], |d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = upstream;
        }
        grads.reverse();
        (loss / n, Gradients { layers: grads })
    }

    /// Serialize in the `EGOGATE1` container: magic, feature dim, layer
    /// widths, dropout rates, then little-endian f32 parameters layer by
    /// layer (row-major `out x in` weights followed by biases).
    pub fn write_to(&self, mut w: impl Write) -> Result<(), ModelError> {
        let dims = self.dims();
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&(self.input_dim() as u32).to_le_bytes())?;
        w.write_all(&(dims.len() as u32).to_le_bytes())?;
        for d in &dims {
            w.write_all(&(*d as u32).to_le_bytes())?;
        }
        for p in &self.dropout {
            w.write_all(&(*p as f32).to_le_bytes())?;
        }
        for p in self.parameters() {
            w.write_all(&(p as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, ModelError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(ModelError::Format("bad magic".into()));
        }
        let mut word = [0u8; 4];
        let mut read_u32 = |r: &mut dyn Read| -> Result<u32, ModelError> {
            r.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word))
        };
        let feature_dim = read_u32(&mut r)? as usize;
        let n_dims = read_u32(&mut r)? as usize;
        if !(2..=64).contains(&n_dims) {
            return Err(ModelError::Format(format!("implausible layer count {n_dims}")));
        }
        let dims = (0..n_dims)
            .map(|_| read_u32(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if dims[0] != feature_dim {
            return Err(ModelError::Format(format!(
                "feature dim {feature_dim} disagrees with input width {}",
                dims[0]
            )));
        }
        let read_f32 = |r: &mut dyn Read| -> Result<f64, ModelError> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(f64::from(f32::from_le_bytes(b)))
        };
        // Rates are stored as f32; recover the shortest decimal they encode.
        let dropout = (0..n_dims - 2)
            .map(|_| {
                read_f32(&mut r).map(|p| (p as f32).to_string().parse::<f64>().expect("float display parses"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut head = Self::zeros(&dims, &dropout)?;
        for i in 0..head.param_count() {
            let v = read_f32(&mut r)?;
            head.set_parameter(i, v);
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(ModelError::Format(format!("{} trailing bytes", rest.len())));
        }
        head.check_finite()?;
        Ok(head)
    }
}

/// Two-class softmax with max subtraction.
pub fn softmax2(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// `-w_y * log P(C_y)` evaluated through log-sum-exp, so it stays finite
/// however confident the logits are.
pub fn weighted_ce_from_logits(z: [f64; 2], y: Label, class_weights: [f64; 2]) -> f64 {
    let m = z[0].max(z[1]);
    let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
    class_weights[y.index()] * (lse - z[y.index()])
}

/// `-w_y * log P(C_y)` from probabilities. Probabilities are floored at
/// the smallest positive double.
pub fn weighted_ce_from_probs(probs: [f64; 2], y: Label, class_weights: [f64; 2]) -> f64 {
    -class_weights[y.index()] * probs[y.index()].max(f64::MIN_POSITIVE).ln()
}

/// Mean weighted cross-entropy over a batch of logits.
pub fn weighted_ce_loss(logits: &[[f64; 2]], labels: &[Label], class_weights: [f64; 2]) -> f64 {
    assert_eq!(logits.len(), labels.len(), "one label per logit pair");
    if logits.is_empty() {
        return 0.0;
    }
    logits
        .iter()
        .zip(labels)
        .map(|(z, y)| weighted_ce_from_logits(*z, *y, class_weights))
        .sum::<f64>()
        / logits.len() as f64
}
