//! Fully connected networks trained by minibatch SGD with backprop.
//!
//! Weights of layer `l` are stored `fan_in × fan_out`, so a batch flows as
//! `A_l = f(A_{l-1} W_l + b_l)` with one sample per row.

use super::{
    Activation, EpochMetrics, ModelError, OutputHead, TrainConfig, TrainOutcome, WeightInit,
};
use crate::datasets::LabeledDataset;
use crate::linalg::{sigmoid_scalar, softmax_rows, Matrix, Rng};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
    pub output_head: OutputHead,
}

/// Parameter gradients, shaped like the model's weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "preset")]
pub enum MlpPreset {
    /// 784 → 70 → 50 → 35 → 10 classifier.
    Supervised,
    /// 784 → 128 → 32 → 128 → 784 autoencoder; the bottleneck is z².
    Autoencoder,
    /// One hidden layer autoencoder, e.g. for 10×10 Ising patterns.
    ShallowAutoencoder { n_visible: usize, n_hidden: usize },
}

impl MlpPreset {
    pub fn layer_dims(self) -> Vec<usize> {
        match self {
            MlpPreset::Supervised => vec![784, 70, 50, 35, 10],
            MlpPreset::Autoencoder => vec![784, 128, 32, 128, 784],
            MlpPreset::ShallowAutoencoder {
                n_visible,
                n_hidden,
            } => vec![n_visible, n_hidden, n_visible],
        }
    }

    pub fn output_head(self) -> OutputHead {
        match self {
            MlpPreset::Supervised => OutputHead::SoftmaxClassifier,
            _ => OutputHead::Reconstruction,
        }
    }

    pub fn build(self, activation: Activation, rng: &mut Rng) -> Result<MlpModel, ModelError> {
        self.build_with(activation, WeightInit::default(), rng)
    }

    pub fn build_with(
        self,
        activation: Activation,
        init: WeightInit,
        rng: &mut Rng,
    ) -> Result<MlpModel, ModelError> {
        let m = MlpModel::with_init(self.layer_dims(), activation, self.output_head(), init, rng)?;
        if !m.is_compressing() {
            return Err(ModelError::InvalidModel(format!(
                "preset dims {:?} are not compressing",
                m.layer_dims
            )));
        }
        Ok(m)
    }
}

/// `mlp_forward`: activations of every non-input layer, output last.
pub fn mlp_forward(m: &MlpModel, x: &Matrix) -> Result<Vec<Matrix>, ModelError> {
    m.forward(x)
}

impl MlpModel {
    /// Xavier-uniform weights `U(±sqrt(6/(fan_in+fan_out)))`, zero biases.
    pub fn new(
        layer_dims: Vec<usize>,
        activation: Activation,
        output_head: OutputHead,
        rng: &mut Rng,
    ) -> Result<MlpModel, ModelError> {
        Self::with_init(
            layer_dims,
            activation,
            output_head,
            WeightInit::XavierUniform,
            rng,
        )
    }

    /// Random weights drawn per `init`, zero biases.
    pub fn with_init(
        layer_dims: Vec<usize>,
        activation: Activation,
        output_head: OutputHead,
        init: WeightInit,
        rng: &mut Rng,
    ) -> Result<MlpModel, ModelError> {
        init.validate()?;
        let mut m = MlpModel::zeros(layer_dims, activation, output_head)?;
        for w in &mut m.weights {
            let limit = (6.0 / (w.rows() + w.cols()) as f64).sqrt();
            for v in w.as_mut_slice() {
                *v = match init {
                    WeightInit::XavierUniform => (2.0 * rng.uniform() - 1.0) * limit,
                    WeightInit::Gaussian { std } => std * rng.normal(),
                };
            }
        }
        Ok(m)
    }

    pub fn zeros(
        layer_dims: Vec<usize>,
        activation: Activation,
        output_head: OutputHead,
    ) -> Result<MlpModel, ModelError> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(ModelError::InvalidModel(format!(
                "bad layer dims {layer_dims:?}"
            )));
        }
        if output_head == OutputHead::Reconstruction && layer_dims[0] != *layer_dims.last().unwrap()
        {
            return Err(ModelError::InvalidModel(
                "reconstruction head needs output width equal to input width".into(),
            ));
        }
        let weights = layer_dims
            .windows(2)
            .map(|w| Matrix::zeros(w[0], w[1]))
            .collect();
        let biases = layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Ok(MlpModel {
            layer_dims,
            weights,
            biases,
            activation,
            output_head,
        })
    }

    /// Checks that weight and bias shapes agree with `layer_dims`.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.layer_dims.len();
        if n < 2 || self.weights.len() != n - 1 || self.biases.len() != n - 1 {
            return Err(ModelError::InvalidModel("layer count mismatch".into()));
        }
        for (l, w) in self.weights.iter().enumerate() {
            if w.shape() != (self.layer_dims[l], self.layer_dims[l + 1])
                || self.biases[l].len() != self.layer_dims[l + 1]
            {
                return Err(ModelError::InvalidModel(format!(
                    "layer {l} has wrong shape"
                )));
            }
        }
        Ok(())
    }

    /// Hidden widths shrink away from the input: strictly decreasing for a
    /// classifier, strictly decreasing to a bottleneck and mirrored for an
    /// autoencoder.
    pub fn is_compressing(&self) -> bool {
        let d = &self.layer_dims;
        match self.output_head {
            OutputHead::SoftmaxClassifier => d[..d.len() - 1].windows(2).all(|w| w[1] < w[0]),
            OutputHead::Reconstruction => {
                let n = d.len();
                let mid = n / 2;
                n % 2 == 1
                    && d[..=mid].windows(2).all(|w| w[1] < w[0])
                    && (0..n).all(|i| d[i] == d[n - 1 - i])
            }
        }
    }

    pub fn n_hidden_layers(&self) -> usize {
        self.layer_dims.len() - 2
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    fn hidden_fn(&self) -> fn(f64) -> f64 {
        match self.activation {
            Activation::Sigmoid => sigmoid_scalar,
            Activation::Relu => |v: f64| v.max(0.0),
        }
    }

    fn check_input(&self, x: &Matrix) -> Result<(), ModelError> {
        if x.cols() != self.input_dim() {
            return Err(ModelError::InputWidth {
                got: x.cols(),
                expected: self.input_dim(),
            });
        }
        Ok(())
    }

    /// Pre-activation of every layer and the activations (hidden + output).
    fn forward_full(&self, x: &Matrix) -> Result<(Vec<Matrix>, Matrix), ModelError> {
        self.check_input(x)?;
        let last = self.weights.len() - 1;
        let hidden = self.hidden_fn();
        let mut acts: Vec<Matrix> = Vec::with_capacity(self.weights.len());
        let mut out_pre = None;
        for l in 0..self.weights.len() {
            let input = if l == 0 { x } else { &acts[l - 1] };
            let mut pre = input.matmul(&self.weights[l])?;
            pre.add_row_vector(&self.biases[l])?;
            if l < last {
                acts.push(pre.map(hidden));
            } else {
                let out = match self.output_head {
                    OutputHead::SoftmaxClassifier => softmax_rows(&pre),
                    OutputHead::Reconstruction => pre.map(sigmoid_scalar),
                };
                acts.push(out);
                out_pre = Some(pre);
            }
        }
        Ok((acts, out_pre.expect("at least one layer")))
    }

    pub fn forward(&self, x: &Matrix) -> Result<Vec<Matrix>, ModelError> {
        Ok(self.forward_full(x)?.0)
    }

    /// Activations of hidden layer `index` (1-based, as in z¹, z², …).
    pub fn hidden_activations(&self, x: &Matrix, index: usize) -> Result<Matrix, ModelError> {
        if index == 0 || index > self.n_hidden_layers() {
            return Err(ModelError::InvalidModel(format!(
                "hidden layer {index} out of range 1..={}",
                self.n_hidden_layers()
            )));
        }
        let mut acts = self.forward(x)?;
        Ok(acts.swap_remove(index - 1))
    }

    /// Objective on a batch: mean cross-entropy against one-hot `target` for
    /// classifiers, `0.5 · mean over samples of Σ (x̂ - x)²` for reconstruction.
    pub fn loss(&self, x: &Matrix, target: &Matrix) -> Result<f64, ModelError> {
        let (acts, out_pre) = self.forward_full(x)?;
        self.objective(&acts[acts.len() - 1], &out_pre, target)
    }

    fn objective(
        &self,
        out: &Matrix,
        out_pre: &Matrix,
        target: &Matrix,
    ) -> Result<f64, ModelError> {
        if target.shape() != out.shape() {
            return Err(ModelError::InvalidModel(format!(
                "target shape {:?} does not match output {:?}",
                target.shape(),
                out.shape()
            )));
        }
        let b = out.rows() as f64;
        let total: f64 = match self.output_head {
            OutputHead::SoftmaxClassifier => (0..out_pre.rows())
                .map(|i| {
                    let z = out_pre.row(i);
                    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    z.iter()
                        .zip(target.row(i))
                        .map(|(zi, ti)| ti * (lse - zi))
                        .sum::<f64>()
                })
                .sum(),
            OutputHead::Reconstruction => {
                0.5 * out
                    .as_slice()
                    .iter()
                    .zip(target.as_slice())
                    .map(|(a, t)| (a - t) * (a - t))
                    .sum::<f64>()
            }
        };
        Ok(total / b)
    }

    /// Objective and its exact gradient by backpropagation.
    pub fn loss_and_gradients(
        &self,
        x: &Matrix,
        target: &Matrix,
    ) -> Result<(f64, Gradients), ModelError> {
        let (acts, out_pre) = self.forward_full(x)?;
        let n_layers = self.weights.len();
        let out = &acts[n_layers - 1];
        let loss = self.objective(out, &out_pre, target)?;
        let inv_b = 1.0 / x.rows() as f64;

        let mut delta = out.sub(target)?;
        match self.output_head {
            OutputHead::SoftmaxClassifier => delta.map_inplace(|d| d * inv_b),
            OutputHead::Reconstruction => {
                for (d, &a) in delta.as_mut_slice().iter_mut().zip(out.as_slice()) {
                    *d *= a * (1.0 - a) * inv_b;
                }
            }
        }

        let mut gw = vec![Matrix::zeros(0, 0); n_layers];
        let mut gb = vec![Vec::new(); n_layers];
        for l in (0..n_layers).rev() {
            let input = if l == 0 { x } else { &acts[l - 1] };
            gw[l] = input.t_matmul(&delta)?;
            gb[l] = delta.column_sums();
            if l > 0 {
                let mut back = delta.matmul_t(&self.weights[l])?;
                let a = &acts[l - 1];
                match self.activation {
                    Activation::Sigmoid => {
                        for (d, &v) in back.as_mut_slice().iter_mut().zip(a.as_slice()) {
                            *d *= v * (1.0 - v);
                        }
                    }
                    Activation::Relu => {
                        for (d, &v) in back.as_mut_slice().iter_mut().zip(a.as_slice()) {
                            if v <= 0.0 {
                                *d = 0.0;
                            }
                        }
                    }
                }
                delta = back;
            }
        }
        Ok((
            loss,
            Gradients {
                weights: gw,
                biases: gb,
            },
        ))
    }

    /// Plain SGD step: `θ -= lr · ∇θ`.
    pub fn apply_gradients(&mut self, g: &Gradients, lr: f64) -> Result<(), ModelError> {
        for (w, gw) in self.weights.iter_mut().zip(&g.weights) {
            w.axpy(-lr, gw)?;
        }
        for (b, gb) in self.biases.iter_mut().zip(&g.biases) {
            for (v, d) in b.iter_mut().zip(gb) {
                *v -= lr * d;
            }
        }
        Ok(())
    }

    /// Output for every row, evaluated in chunks.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        let mut acts = self.forward(x)?;
        Ok(acts.pop().expect("non-empty"))
    }

    pub fn accuracy(&self, data: &LabeledDataset) -> Result<f64, ModelError> {
        let labels = data.labels.as_ref().ok_or(ModelError::MissingLabels)?;
        if labels.is_empty() {
            return Ok(0.0);
        }
        let out = self.predict(&data.samples)?;
        let correct = out
            .row_iter()
            .zip(labels)
            .filter(|(row, &y)| argmax(row) == y)
            .count();
        Ok(correct as f64 / labels.len() as f64)
    }

    /// Mean per-element squared reconstruction error.
    pub fn reconstruction_mse(&self, x: &Matrix) -> Result<f64, ModelError> {
        let out = self.predict(x)?;
        let n = out.as_slice().len().max(1) as f64;
        Ok(out
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n)
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn one_hot_targets(data: &LabeledDataset, classes: usize) -> Result<Matrix, ModelError> {
    let labels = data.labels.as_ref().ok_or(ModelError::MissingLabels)?;
    let mut t = Matrix::zeros(labels.len(), classes);
    for (i, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(ModelError::LabelOutOfRange { label: y, classes });
        }
        t.set(i, y, 1.0);
    }
    Ok(t)
}

/// Shared minibatch loop. `evaluate` fills `train_metric`/`test_metric`.
fn sgd_loop(
    mut model: MlpModel,
    inputs: &Matrix,
    targets: &Matrix,
    cfg: &TrainConfig,
    supervised: bool,
    mut evaluate: impl FnMut(&MlpModel) -> Result<(f64, Option<f64>), ModelError>,
) -> Result<TrainOutcome<MlpModel>, ModelError> {
    cfg.validate()?;
    let n = inputs.rows();
    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut metrics = Vec::with_capacity(cfg.epochs + 1);
    let mut snapshots = Vec::new();

    let (train_metric, test_metric) = evaluate(&model)?;
    metrics.push(EpochMetrics {
        epoch: 0,
        train_loss: f64::NAN,
        train_metric,
        test_metric,
    });
    if cfg.wants_snapshot(0) {
        snapshots.push((0, model.clone()));
    }

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = inputs.select_rows(idx);
            let t = targets.select_rows(idx);
            let (loss, grads) = model.loss_and_gradients(&x, &t).map_err(|e| match e {
                ModelError::Linalg(_) => ModelError::NonFiniteLoss { epoch, batch },
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch, batch });
            }
            model.apply_gradients(&grads, cfg.learning_rate)?;
            loss_sum += loss;
            batches += 1;
        }
        let (train_metric, test_metric) = evaluate(&model)?;
        metrics.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / batches.max(1) as f64,
            train_metric,
            test_metric,
        });
        if cfg.wants_snapshot(epoch) {
            snapshots.push((epoch, model.clone()));
        }
        let reached = match (cfg.stop_at_accuracy, metrics.last()) {
            (Some(target), Some(m)) if supervised => {
                m.test_metric.unwrap_or(m.train_metric) >= target
            }
            _ => false,
        };
        if reached {
            break;
        }
    }
    Ok(TrainOutcome {
        model,
        metrics,
        snapshots,
    })
}

/// Minibatch SGD on softmax cross-entropy. Metrics are train and (optional)
/// test accuracy. With `stop_at_accuracy` set, training ends after the first
/// epoch whose test accuracy (train accuracy without test data) reaches it.
pub fn mlp_train_supervised(
    model: MlpModel,
    data: &LabeledDataset,
    test: Option<&LabeledDataset>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<MlpModel>, ModelError> {
    if model.output_head != OutputHead::SoftmaxClassifier {
        return Err(ModelError::InvalidModel(
            "supervised training needs a softmax head".into(),
        ));
    }
    model.validate()?;
    let classes = *model.layer_dims.last().unwrap();
    let targets = one_hot_targets(data, classes)?;
    if let Some(t) = test {
        one_hot_targets(t, classes)?;
    }
    sgd_loop(model, &data.samples, &targets, cfg, true, |m| {
        let train = m.accuracy(data)?;
        let test = test.map(|t| m.accuracy(t)).transpose()?;
        Ok((train, test))
    })
}

/// Minibatch SGD on squared reconstruction error. Metrics are per-element MSE.
pub fn mlp_train_autoencoder(
    model: MlpModel,
    data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<MlpModel>, ModelError> {
    if model.output_head != OutputHead::Reconstruction {
        return Err(ModelError::InvalidModel(
            "autoencoder training needs a reconstruction head".into(),
        ));
    }
    model.validate()?;
    sgd_loop(model, &data.samples, &data.samples, cfg, false, |m| {
        Ok((m.reconstruction_mse(&data.samples)?, None))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_net_hidden_is_half() {
        let m = MlpModel::zeros(
            vec![4, 3, 2, 5],
            Activation::Sigmoid,
            OutputHead::SoftmaxClassifier,
        )
        .unwrap();
        let x = Matrix::filled_with(3, 4, |i, j| (i + j) as f64);
        let acts = mlp_forward(&m, &x).unwrap();
        assert_eq!(acts.len(), 3);
        for a in &acts[..2] {
            assert!(a.as_slice().iter().all(|&v| v == 0.5));
        }
        assert!(acts[2].as_slice().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn hand_computed_single_layer() {
        let mut m = MlpModel::zeros(
            vec![2, 1, 2],
            Activation::Sigmoid,
            OutputHead::Reconstruction,
        )
        .unwrap();
        m.weights[0] = Matrix::from_rows(&[vec![1.0], vec![1.0]]);
        let z = m
            .hidden_activations(&Matrix::from_rows(&[vec![1.0, 1.0]]), 1)
            .unwrap();
        assert_eq!(z.get(0, 0), sigmoid_scalar(2.0));
    }

    #[test]
    fn input_width_checked() {
        let m =
            MlpModel::zeros(vec![3, 2, 3], Activation::Relu, OutputHead::Reconstruction).unwrap();
        assert!(matches!(
            m.forward(&Matrix::zeros(1, 4)),
            Err(ModelError::InputWidth {
                got: 4,
                expected: 3
            })
        ));
    }

    #[test]
    fn presets_are_compressing() {
        let mut rng = Rng::new(0);
        for p in [
            MlpPreset::Supervised,
            MlpPreset::Autoencoder,
            MlpPreset::ShallowAutoencoder {
                n_visible: 100,
                n_hidden: 20,
            },
        ] {
            let m = p.build(Activation::Sigmoid, &mut rng).unwrap();
            assert!(m.is_compressing());
            m.validate().unwrap();
        }
        assert_eq!(
            MlpPreset::Supervised.layer_dims(),
            vec![784, 70, 50, 35, 10]
        );
        let widening = MlpPreset::ShallowAutoencoder {
            n_visible: 4,
            n_hidden: 8,
        };
        assert!(widening.build(Activation::Sigmoid, &mut rng).is_err());
    }

    #[test]
    fn xavier_bounds() {
        let m = MlpModel::new(
            vec![30, 20, 10],
            Activation::Sigmoid,
            OutputHead::SoftmaxClassifier,
            &mut Rng::new(1),
        )
        .unwrap();
        let limit = (6.0f64 / 50.0).sqrt();
        assert!(m.weights[0].as_slice().iter().all(|v| v.abs() <= limit));
        assert!(m.biases.iter().flatten().all(|&b| b == 0.0));
    }

    #[test]
    fn missing_labels_rejected() {
        let m = MlpModel::zeros(
            vec![2, 2],
            Activation::Sigmoid,
            OutputHead::SoftmaxClassifier,
        )
        .unwrap();
        let ds = LabeledDataset::unlabeled(Matrix::zeros(3, 2));
        assert!(matches!(
            mlp_train_supervised(m, &ds, None, &TrainConfig::default()),
            Err(ModelError::MissingLabels)
        ));
    }

    #[test]
    fn divergence_reported_with_position() {
        let mut m = MlpModel::zeros(
            vec![1, 1],
            Activation::Sigmoid,
            OutputHead::SoftmaxClassifier,
        )
        .unwrap();
        m.layer_dims = vec![1, 2];
        m.weights[0] = Matrix::from_rows(&[vec![1.0, -1.0]]);
        m.biases[0] = vec![0.0, 0.0];
        let mut ds = LabeledDataset::unlabeled(Matrix::from_rows(&[vec![1e200], vec![1e200]]));
        ds.labels = Some(vec![1, 1]);
        ds.n_classes = Some(2);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 1,
            learning_rate: 1e300,
            ..Default::default()
        };
        assert!(matches!(
            mlp_train_supervised(m, &ds, None, &cfg),
            Err(ModelError::NonFiniteLoss { epoch: 1, .. })
        ));
    }

    #[test]
    fn gaussian_init_scale() {
        let mut rng = Rng::new(4);
        let m = MlpModel::with_init(
            vec![400, 300, 10],
            Activation::Sigmoid,
            OutputHead::SoftmaxClassifier,
            WeightInit::Gaussian { std: 0.01 },
            &mut rng,
        )
        .unwrap();
        let w = m.weights[0].as_slice();
        let sd = (w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64).sqrt();
        assert!((sd - 0.01).abs() < 2e-4, "{sd}");
        assert!(m.biases.iter().flatten().all(|&b| b == 0.0));
        assert!(WeightInit::Gaussian { std: f64::NAN }.validate().is_err());
    }

    #[test]
    fn stops_at_target_accuracy() {
        let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let mut ds = LabeledDataset::unlabeled(x);
        ds.labels = Some(vec![0, 1]);
        ds.n_classes = Some(2);
        let mut rng = Rng::new(1);
        let m = MlpModel::new(
            vec![2, 2],
            Activation::Sigmoid,
            OutputHead::SoftmaxClassifier,
            &mut rng,
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 500,
            batch_size: 2,
            learning_rate: 1.0,
            stop_at_accuracy: Some(1.0),
            ..Default::default()
        };
        let out = mlp_train_supervised(m, &ds, None, &cfg).unwrap();
        let last = out.metrics.last().unwrap();
        assert_eq!(last.train_metric, 1.0);
        assert!(last.epoch < 500);
        assert!(out.metrics[..out.metrics.len() - 1]
            .iter()
            .all(|e| e.train_metric < 1.0));
    }
}
