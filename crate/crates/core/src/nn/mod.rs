//! Minimal dense network: parameters, forward pass, cross-entropy loss,
//! backpropagation and momentum SGD.
//!
//! Hidden layers use the activation stored on the [`ParamSet`]; the output
//! layer is always a softmax. Weight matrices are stored `out × in`.

mod matrix;

pub use matrix::Matrix;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Architecture of the dense network and the minimum prunable layer index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Input features, hidden widths, output classes.
    pub layer_dims: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    /// Minimum allowed starting-pruning-layer index. Layers `1..=tau` are
    /// shared intact by every sub-model.
    pub tau: usize,
}

impl ModelSpec {
    pub fn new(layer_dims: Vec<usize>, tau: usize) -> Result<Self> {
        let spec = Self {
            layer_dims,
            activation: Activation::Relu,
            tau,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 3 {
            return Err(Error::InvalidSpec(format!(
                "need at least input, one hidden and output dims, got {:?}",
                self.layer_dims
            )));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::InvalidSpec("all dims must be >= 1".into()));
        }
        let n = self.num_weight_layers();
        if self.tau < 1 || self.tau >= n {
            return Err(Error::InvalidSpec(format!(
                "tau must satisfy 1 <= tau < {n}, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    pub fn num_weight_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_dims.last().expect("validated spec")
    }

    /// Total parameter count (weights and biases) of the full network.
    pub fn num_params(&self) -> u64 {
        self.layer_dims
            .windows(2)
            .map(|w| (w[0] * w[1] + w[1]) as u64)
            .sum()
    }
}

/// One dense layer: `weights` is `out × in`, `bias` has length `out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }
}

/// Parameters of a full or width-pruned network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub activation: Activation,
}

impl ParamSet {
    pub fn new(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        let p = Self { layers, activation };
        p.validate()?;
        Ok(p)
    }

    /// All-zero parameters shaped by `spec`.
    pub fn zeros(spec: &ModelSpec) -> Self {
        let layers = spec
            .layer_dims
            .windows(2)
            .map(|w| Layer::zeros(w[1], w[0]))
            .collect();
        Self {
            layers,
            activation: spec.activation,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            activation: self.activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::ShapeMismatch("parameter set has no layers".into()));
        }
        for (k, l) in self.layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {}: bias length {} != {} rows",
                    k + 1,
                    l.bias.len(),
                    l.out_dim()
                )));
            }
            if !l.weights.is_finite() || l.bias.iter().any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch(format!(
                    "layer {}: non-finite value",
                    k + 1
                )));
            }
        }
        for (k, w) in self.layers.windows(2).enumerate() {
            if w[1].in_dim() != w[0].out_dim() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} takes {} inputs but layer {} emits {}",
                    k + 2,
                    w[1].in_dim(),
                    k + 1,
                    w[0].out_dim()
                )));
            }
        }
        Ok(())
    }

    /// `(out, in)` per layer.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| l.weights.shape()).collect()
    }

    pub fn num_params(&self) -> u64 {
        self.layers
            .iter()
            .map(|l| (l.weights.as_slice().len() + l.bias.len()) as u64)
            .sum()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_dim)
    }

    fn same_shape(&self, other: &ParamSet) -> bool {
        self.shapes() == other.shapes()
    }
}

/// Labeled samples: `features` is `B × n_features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if !features.is_finite() {
            return Err(Error::ShapeMismatch("non-finite feature value".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Batch {
        Batch {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Clipped to the shard size at training time.
    pub batch_size: usize,
    pub local_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.5,
            batch_size: 50,
            local_epochs: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // lr = 0 is accepted: it is the identity step used in tests.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidTrainConfig(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidTrainConfig(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidTrainConfig("batch_size must be >= 1".into()));
        }
        if self.local_epochs == 0 {
            return Err(Error::InvalidTrainConfig("local_epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Glorot-uniform weights in `±sqrt(6 / (in + out))`, zero biases.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Result<ParamSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::zeros(spec);
    for layer in &mut params.layers {
        let bound = (6.0 / (layer.in_dim() + layer.out_dim()) as f64).sqrt();
        for w in layer.weights.as_mut_slice() {
            *w = rng.random_range(-bound..bound);
        }
    }
    Ok(params)
}

/// Cached intermediate values of one forward pass.
struct Trace {
    /// Input to each layer (`inputs[0]` is the batch features).
    inputs: Vec<Matrix>,
    /// Pre-activation outputs of each layer.
    pre: Vec<Matrix>,
}

fn affine(layer: &Layer, input: &Matrix) -> Matrix {
    let (out_dim, batch) = (layer.out_dim(), input.rows());
    let mut z = Matrix::zeros(batch, out_dim);
    for i in 0..batch {
        let x = input.row(i);
        let zr = z.row_mut(i);
        for (o, zo) in zr.iter_mut().enumerate() {
            let w = layer.weights.row(o);
            let mut acc = layer.bias[o];
            for (a, b) in w.iter().zip(x) {
                acc += a * b;
            }
            *zo = acc;
        }
    }
    z
}

fn run_forward(params: &ParamSet, features: &Matrix) -> Result<Trace> {
    if features.cols() != params.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "features have width {} but the network expects {}",
            features.cols(),
            params.input_dim()
        )));
    }
    let n = params.layers.len();
    let mut inputs = Vec::with_capacity(n);
    let mut pre = Vec::with_capacity(n);
    let mut h = features.clone();
    for (k, layer) in params.layers.iter().enumerate() {
        let z = affine(layer, &h);
        inputs.push(h);
        h = if k + 1 < n {
            let mut a = z.clone();
            for v in a.as_mut_slice() {
                *v = params.activation.apply(*v);
            }
            a
        } else {
            Matrix::zeros(0, 0)
        };
        pre.push(z);
    }
    Ok(Trace { inputs, pre })
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Class probabilities, one row per sample.
pub fn forward(params: &ParamSet, features: &Matrix) -> Result<Matrix> {
    let trace = run_forward(params, features)?;
    Ok(softmax_rows(trace.pre.last().expect("at least one layer")))
}

fn check_labels(params: &ParamSet, batch: &Batch) -> Result<()> {
    let classes = params.classes();
    if let Some(&label) = batch.labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// Mean cross-entropy of `batch` and its gradient with respect to `params`.
pub fn loss_and_grads(params: &ParamSet, batch: &Batch) -> Result<(f64, ParamSet)> {
    if batch.is_empty() {
        return Err(Error::EmptyData("batch has no samples".into()));
    }
    check_labels(params, batch)?;
    let trace = run_forward(params, &batch.features)?;
    let b = batch.len() as f64;
    let logits = trace.pre.last().expect("at least one layer");

    let mut loss = 0.0;
    let mut delta = softmax_rows(logits);
    for (i, &y) in batch.labels.iter().enumerate() {
        loss += log_sum_exp(logits.row(i)) - logits.get(i, y);
        let row = delta.row_mut(i);
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v /= b;
        }
    }
    loss /= b;

    let mut grads = params.zeros_like();
    for k in (0..params.layers.len()).rev() {
        let layer = &params.layers[k];
        let input = &trace.inputs[k];
        let g = &mut grads.layers[k];
        for i in 0..delta.rows() {
            let d = delta.row(i);
            let x = input.row(i);
            for (o, &dv) in d.iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                g.bias[o] += dv;
                for (gw, &xv) in g.weights.row_mut(o).iter_mut().zip(x) {
                    *gw += dv * xv;
                }
            }
        }
        if k == 0 {
            break;
        }
        let prev_pre = &trace.pre[k - 1];
        let mut next = Matrix::zeros(delta.rows(), layer.in_dim());
        for i in 0..delta.rows() {
            let d = delta.row(i);
            let out = next.row_mut(i);
            for (o, &dv) in d.iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                for (acc, &w) in out.iter_mut().zip(layer.weights.row(o)) {
                    *acc += dv * w;
                }
            }
            for (acc, &z) in out.iter_mut().zip(prev_pre.row(i)) {
                *acc *= params.activation.derivative(z);
            }
        }
        delta = next;
    }
    Ok((loss, grads))
}

/// Momentum SGD over `shard` for `cfg.local_epochs` epochs.
///
/// The shard is reshuffled every epoch from `cfg.seed`; a partial final
/// batch is kept. Velocity follows `v = momentum * v + g; w -= lr * v`.
pub fn local_train(params: &ParamSet, shard: &Batch, cfg: &TrainConfig) -> Result<ParamSet> {
    if shard.is_empty() {
        return Err(Error::EmptyData("local shard is empty".into()));
    }
    cfg.validate()?;
    check_labels(params, shard)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let batch_size = cfg.batch_size.min(shard.len());
    let mut current = params.clone();
    let mut velocity = params.zeros_like();
    let mut order: Vec<usize> = (0..shard.len()).collect();

    for _ in 0..cfg.local_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let batch = shard.subset(chunk);
            let (_, grads) = loss_and_grads(&current, &batch)?;
            for ((layer, vel), g) in current
                .layers
                .iter_mut()
                .zip(velocity.layers.iter_mut())
                .zip(&grads.layers)
            {
                sgd_step(
                    layer.weights.as_mut_slice(),
                    vel.weights.as_mut_slice(),
                    g.weights.as_slice(),
                    cfg,
                );
                sgd_step(&mut layer.bias, &mut vel.bias, &g.bias, cfg);
            }
        }
    }
    debug_assert!(current.same_shape(params));
    Ok(current)
}

#[inline]
fn sgd_step(w: &mut [f64], v: &mut [f64], g: &[f64], cfg: &TrainConfig) {
    for ((w, v), g) in w.iter_mut().zip(v.iter_mut()).zip(g) {
        *v = cfg.momentum * *v + g;
        *w -= cfg.learning_rate * *v;
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn evaluate(params: &ParamSet, testset: &Batch) -> Result<f64> {
    if testset.is_empty() {
        return Err(Error::EmptyData("test set is empty".into()));
    }
    let probs = forward(params, &testset.features)?;
    let correct = testset
        .labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| argmax(probs.row(i)) == y)
        .count();
    Ok(correct as f64 / testset.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_batch(n: usize, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = i % 2;
            let c = if y == 0 { -1.5 } else { 1.5 };
            rows.push(vec![
                c + rng.random_range(-1.0..1.0),
                c + rng.random_range(-1.0..1.0),
            ]);
            labels.push(y);
        }
        Batch::new(Matrix::from_rows(&rows), labels).unwrap()
    }

    #[test]
    fn init_shapes_and_bounds() {
        let spec = ModelSpec::new(vec![2, 3, 2], 1).unwrap();
        let p = init_params(&spec, 7).unwrap();
        assert_eq!(p.shapes(), vec![(3, 2), (2, 3)]);
        assert_eq!(p.layers[0].bias.len(), 3);
        assert_eq!(p.layers[1].bias.len(), 2);
        for l in &p.layers {
            assert!(l.weights.as_slice().iter().all(|v| v.abs() < 1.1));
            assert!(l.bias.iter().all(|v| v.abs() < 1.1));
        }
        assert_eq!(p, init_params(&spec, 7).unwrap());
        assert_ne!(p, init_params(&spec, 8).unwrap());

        let spec = ModelSpec::new(vec![4, 8, 8, 4], 1).unwrap();
        let p = init_params(&spec, 1).unwrap();
        assert_eq!(p.shapes(), vec![(8, 4), (8, 8), (4, 8)]);
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::new(vec![2, 2], 1).is_err());
        assert!(ModelSpec::new(vec![2, 0, 2], 1).is_err());
        assert!(ModelSpec::new(vec![2, 3, 2], 0).is_err());
        assert!(ModelSpec::new(vec![2, 3, 2], 2).is_err());
        assert!(ModelSpec::new(vec![2, 3, 3, 2], 2).is_ok());
    }

    #[test]
    fn zero_params_give_uniform_probabilities() {
        let spec = ModelSpec::new(vec![3, 4, 5], 1).unwrap();
        let p = ParamSet::zeros(&spec);
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.5, 0.0, 9.0]]);
        let probs = forward(&p, &x).unwrap();
        for r in 0..2 {
            for &v in probs.row(r) {
                assert!((v - 0.2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_class_single_layer() {
        let p = ParamSet::new(
            vec![Layer {
                weights: Matrix::from_vec(1, 1, vec![0.0]),
                bias: vec![0.0],
            }],
            Activation::Relu,
        )
        .unwrap();
        let probs = forward(&p, &Matrix::from_vec(1, 1, vec![3.0])).unwrap();
        assert_eq!(probs.get(0, 0), 1.0);
    }

    #[test]
    fn rows_sum_to_one() {
        let spec = ModelSpec::new(vec![2, 6, 3], 1).unwrap();
        let p = init_params(&spec, 3).unwrap();
        let probs = forward(&p, &blob_batch(5, 1).features).unwrap();
        assert_eq!(probs.rows(), 5);
        for r in 0..5 {
            let s: f64 = probs.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(probs.row(r).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let spec = ModelSpec::new(vec![2, 6, 3], 1).unwrap();
        let p = init_params(&spec, 3).unwrap();
        let err = forward(&p, &Matrix::zeros(1, 3)).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
    }

    #[test]
    fn zero_params_loss_is_ln2() {
        let spec = ModelSpec::new(vec![2, 3, 2], 1).unwrap();
        let p = ParamSet::zeros(&spec);
        let (loss, grads) = loss_and_grads(&p, &blob_batch(4, 2)).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(grads.shapes(), p.shapes());
    }

    #[test]
    fn label_out_of_range() {
        let spec = ModelSpec::new(vec![2, 3, 2], 1).unwrap();
        let p = ParamSet::zeros(&spec);
        let batch = Batch::new(Matrix::zeros(1, 2), vec![2]).unwrap();
        assert_eq!(
            loss_and_grads(&p, &batch).unwrap_err(),
            Error::LabelOutOfRange {
                label: 2,
                classes: 2
            }
        );
    }

    #[test]
    fn duplicated_batch_is_mean_invariant() {
        let spec = ModelSpec::new(vec![2, 4, 3, 2], 1).unwrap();
        let p = init_params(&spec, 11).unwrap();
        let batch = blob_batch(6, 4);
        let idx: Vec<usize> = (0..6).flat_map(|i| [i, i]).collect();
        let doubled = batch.subset(&idx);
        let (l1, g1) = loss_and_grads(&p, &batch).unwrap();
        let (l2, g2) = loss_and_grads(&p, &doubled).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.layers.iter().zip(&g2.layers) {
            for (x, y) in a.weights.as_slice().iter().zip(b.weights.as_slice()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let spec = ModelSpec::new(vec![2, 8, 2], 1).unwrap();
        let p = init_params(&spec, 5).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert_eq!(local_train(&p, &blob_batch(30, 3), &cfg).unwrap(), p);
    }

    #[test]
    fn training_improves_accuracy_on_blobs() {
        let spec = ModelSpec::new(vec![2, 8, 2], 1).unwrap();
        let p = init_params(&spec, 9).unwrap();
        let shard = blob_batch(200, 10);
        let before = evaluate(&p, &shard).unwrap();
        let cfg = TrainConfig {
            seed: 3,
            ..TrainConfig::default()
        };
        let trained = local_train(&p, &shard, &cfg).unwrap();
        let after = evaluate(&trained, &shard).unwrap();
        assert!(after > before, "before {before}, after {after}");
        assert_eq!(trained, local_train(&p, &shard, &cfg).unwrap());
    }

    #[test]
    fn empty_shard_is_rejected() {
        let spec = ModelSpec::new(vec![2, 3, 2], 1).unwrap();
        let p = ParamSet::zeros(&spec);
        let empty = Batch::new(Matrix::zeros(0, 2), vec![]).unwrap();
        assert!(matches!(
            local_train(&p, &empty, &TrainConfig::default()),
            Err(Error::EmptyData(_))
        ));
        assert!(evaluate(&p, &empty).is_err());
    }

    #[test]
    fn evaluate_tie_break_and_order() {
        let spec = ModelSpec::new(vec![2, 3, 2], 1).unwrap();
        let zero = ParamSet::zeros(&spec);
        let batch = blob_batch(10, 6);
        assert_eq!(evaluate(&zero, &batch).unwrap(), 0.5);

        // Perfect separator on the sign of x0 + x1.
        let perfect = ParamSet::new(
            vec![
                Layer {
                    weights: Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]]),
                    bias: vec![0.0, 0.0],
                },
                Layer {
                    weights: Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
                    bias: vec![0.0, 0.0],
                },
            ],
            Activation::Relu,
        )
        .unwrap();
        let sep = Batch::new(
            Matrix::from_rows(
                &(0..10)
                    .map(|i| {
                        let s = if i % 2 == 0 { -1.0 } else { 1.0 };
                        vec![s * (1.0 + i as f64), s]
                    })
                    .collect::<Vec<_>>(),
            ),
            (0..10).map(|i| i % 2).collect(),
        )
        .unwrap();
        assert_eq!(evaluate(&perfect, &sep).unwrap(), 1.0);

        let p = init_params(&spec, 2).unwrap();
        let rev: Vec<usize> = (0..10).rev().collect();
        assert_eq!(
            evaluate(&p, &batch).unwrap(),
            evaluate(&p, &batch.subset(&rev)).unwrap()
        );
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
    }
}
