//! Bernoulli–Bernoulli restricted Boltzmann machine.
//!
//! Conditionals factorise over units:
//! `p(h_j = 1 | v) = σ(c_j + Σ_i v_i W_ij)` and
//! `p(v_i = 1 | h) = σ(b_i + Σ_j W_ij h_j)`.

use super::{EpochMetrics, ModelError, TrainConfig, TrainOutcome};
use crate::datasets::LabeledDataset;
use crate::linalg::{sigmoid_scalar, Matrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct RbmModel {
    pub n_visible: usize,
    pub n_hidden: usize,
    /// `n_visible × n_hidden`.
    pub weights: Matrix,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl RbmModel {
    /// Weights `N(0, 0.01²)`, zero biases.
    pub fn new(n_visible: usize, n_hidden: usize, rng: &mut Rng) -> Self {
        let weights = Matrix::filled_with(n_visible, n_hidden, |_, _| 0.01 * rng.normal());
        RbmModel {
            n_visible,
            n_hidden,
            weights,
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        RbmModel {
            n_visible,
            n_hidden,
            weights: Matrix::zeros(n_visible, n_hidden),
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.weights.shape() != (self.n_visible, self.n_hidden)
            || self.visible_bias.len() != self.n_visible
            || self.hidden_bias.len() != self.n_hidden
        {
            return Err(ModelError::InvalidModel(
                "RBM parameter shapes disagree".into(),
            ));
        }
        Ok(())
    }

    pub fn hidden_probabilities(&self, v: &Matrix) -> Result<Matrix, ModelError> {
        if v.cols() != self.n_visible {
            return Err(ModelError::InputWidth {
                got: v.cols(),
                expected: self.n_visible,
            });
        }
        let mut pre = v.matmul(&self.weights)?;
        pre.add_row_vector(&self.hidden_bias)?;
        pre.map_inplace(sigmoid_scalar);
        Ok(pre)
    }

    pub fn visible_probabilities(&self, h: &Matrix) -> Result<Matrix, ModelError> {
        if h.cols() != self.n_hidden {
            return Err(ModelError::InputWidth {
                got: h.cols(),
                expected: self.n_hidden,
            });
        }
        let mut pre = h.matmul_t(&self.weights)?;
        pre.add_row_vector(&self.visible_bias)?;
        pre.map_inplace(sigmoid_scalar);
        Ok(pre)
    }

    /// Mean-field reconstruction `v → p(h|v) → p(v|h)`.
    pub fn reconstruct(&self, v: &Matrix) -> Result<Matrix, ModelError> {
        self.visible_probabilities(&self.hidden_probabilities(v)?)
    }

    pub fn reconstruction_mse(&self, v: &Matrix) -> Result<f64, ModelError> {
        let r = self.reconstruct(v)?;
        let n = r.as_slice().len().max(1) as f64;
        Ok(r.as_slice()
            .iter()
            .zip(v.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n)
    }

    /// Visible free energy `F(v) = -b·v - Σ_j softplus(c_j + v·W_:j)`;
    /// lower means more probable under the model.
    pub fn free_energy(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.n_visible);
        let linear: f64 = self.visible_bias.iter().zip(v).map(|(b, x)| b * x).sum();
        let mut hidden = 0.0;
        for j in 0..self.n_hidden {
            let mut a = self.hidden_bias[j];
            for (i, &x) in v.iter().enumerate() {
                a += x * self.weights.get(i, j);
            }
            hidden += softplus(a);
        }
        -linear - hidden
    }

    /// One CD-k update on a batch; returns the per-element squared error of the
    /// first mean-field reconstruction.
    ///
    /// Hidden states are sampled (one uniform per unit, row-major) after the
    /// positive phase and between Gibbs alternations; visible units use their
    /// probabilities. Statistics use hidden probabilities on both phases.
    pub fn cd_update(
        &mut self,
        v0: &Matrix,
        k: usize,
        lr: f64,
        rng: &mut Rng,
    ) -> Result<f64, ModelError> {
        if k == 0 {
            return Err(ModelError::InvalidConfig(
                "cd_steps must be at least 1".into(),
            ));
        }
        let b = v0.rows() as f64;
        let h0 = self.hidden_probabilities(v0)?;
        let mut h_sample = bernoulli(&h0, rng);
        let mut vk = Matrix::zeros(0, 0);
        let mut hk = Matrix::zeros(0, 0);
        let mut first_recon_err = 0.0;
        for step in 1..=k {
            vk = self.visible_probabilities(&h_sample)?;
            if step == 1 {
                first_recon_err = vk
                    .as_slice()
                    .iter()
                    .zip(v0.as_slice())
                    .map(|(a, x)| (a - x) * (a - x))
                    .sum::<f64>()
                    / vk.as_slice().len().max(1) as f64;
            }
            hk = self.hidden_probabilities(&vk)?;
            if step < k {
                h_sample = bernoulli(&hk, rng);
            }
        }
        let pos = v0.t_matmul(&h0)?;
        let neg = vk.t_matmul(&hk)?;
        let mut grad = pos.sub(&neg)?;
        grad.map_inplace(|g| g / b);
        if !grad.is_finite() {
            return Err(ModelError::InvalidModel("non-finite CD update".into()));
        }
        self.weights.axpy(lr, &grad)?;
        for (bias, (p, n)) in self
            .visible_bias
            .iter_mut()
            .zip(v0.column_sums().iter().zip(vk.column_sums()))
        {
            *bias += lr * (p - n) / b;
        }
        for (bias, (p, n)) in self
            .hidden_bias
            .iter_mut()
            .zip(h0.column_sums().iter().zip(hk.column_sums()))
        {
            *bias += lr * (p - n) / b;
        }
        Ok(first_recon_err)
    }
}

fn softplus(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

fn bernoulli(p: &Matrix, rng: &mut Rng) -> Matrix {
    let mut out = p.clone();
    for v in out.as_mut_slice() {
        *v = if rng.uniform() < *v { 1.0 } else { 0.0 };
    }
    out
}

/// Probabilities `p(z|x)` and one independent Bernoulli draw per unit.
pub fn rbm_sample_hidden(
    r: &RbmModel,
    x: &Matrix,
    rng: &mut Rng,
) -> Result<(Matrix, Matrix), ModelError> {
    let p = r.hidden_probabilities(x)?;
    let s = bernoulli(&p, rng);
    Ok((p, s))
}

/// CD-k training. `train_loss` is the mean first-step reconstruction error
/// over the epoch's batches; `train_metric` is the mean-field reconstruction
/// error on the full data after the epoch.
pub fn rbm_train_cd(
    mut model: RbmModel,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<TrainOutcome<RbmModel>, ModelError> {
    cfg.validate()?;
    model.validate()?;
    if cfg.cd_steps == 0 {
        return Err(ModelError::InvalidConfig(
            "cd_steps must be at least 1".into(),
        ));
    }
    let x = &data.samples;
    if x.cols() != model.n_visible {
        return Err(ModelError::InputWidth {
            got: x.cols(),
            expected: model.n_visible,
        });
    }
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut metrics = vec![EpochMetrics {
        epoch: 0,
        train_loss: f64::NAN,
        train_metric: model.reconstruction_mse(x)?,
        test_metric: None,
    }];
    let mut snapshots = Vec::new();
    if cfg.wants_snapshot(0) {
        snapshots.push((0, model.clone()));
    }
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut err_sum = 0.0;
        let mut batches = 0usize;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let v0 = x.select_rows(idx);
            let err = model
                .cd_update(&v0, cfg.cd_steps, cfg.learning_rate, rng)
                .map_err(|_| ModelError::NonFiniteLoss { epoch, batch })?;
            err_sum += err;
            batches += 1;
        }
        metrics.push(EpochMetrics {
            epoch,
            train_loss: err_sum / batches.max(1) as f64,
            train_metric: model.reconstruction_mse(x)?,
            test_metric: None,
        });
        if cfg.wants_snapshot(epoch) {
            snapshots.push((epoch, model.clone()));
        }
    }
    Ok(TrainOutcome {
        model,
        metrics,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_probabilities_are_half() {
        let r = RbmModel::zeros(5, 3);
        let x = Matrix::filled_with(4, 5, |i, j| ((i + j) % 2) as f64);
        let (p, s) = rbm_sample_hidden(&r, &x, &mut Rng::new(0)).unwrap();
        assert!(p.as_slice().iter().all(|&v| v == 0.5));
        assert!(s.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn free_energy_of_zero_model() {
        let r = RbmModel::zeros(3, 2);
        let expected = -2.0 * 2f64.ln();
        assert!((r.free_energy(&[1.0, 0.0, 1.0]) - expected).abs() < 1e-15);
    }

    #[test]
    fn cd_steps_zero_rejected() {
        let mut r = RbmModel::zeros(2, 1);
        assert!(r
            .cd_update(&Matrix::zeros(1, 2), 0, 0.1, &mut Rng::new(0))
            .is_err());
    }

    #[test]
    fn width_mismatch() {
        let r = RbmModel::zeros(3, 2);
        assert!(matches!(
            r.hidden_probabilities(&Matrix::zeros(1, 4)),
            Err(ModelError::InputWidth {
                got: 4,
                expected: 3
            })
        ));
    }
}
