//! Central finite differences of the MLP objective, compared against the
//! backprop gradients on a random subset of coordinates. With ReLU units a
//! coordinate is skipped when its perturbation switches any unit on or off.

use critrep::linalg::{Matrix, Rng};
use critrep::models::{Activation, MlpModel, OutputHead};

const STEP: f64 = 1e-3;
/// Gradients smaller than this are compared in absolute terms: the difference
/// quotient of a loss summed over thousands of terms carries roundoff near
/// 1e-10, so relative error is meaningless for entries much below this.
const FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates dropped because a ReLU crossed its kink.
    pub skipped: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Random inputs in `[0, 1]` and matching targets: one-hot labels for a
/// classifier, the input itself for a reconstruction head.
pub fn random_batch(model: &MlpModel, rows: usize, rng: &mut Rng) -> (Matrix, Matrix) {
    let dims = &model.layer_dims;
    let x = Matrix::filled_with(rows, dims[0], |_, _| rng.uniform());
    let t = match model.output_head {
        OutputHead::SoftmaxClassifier => {
            let classes = *dims.last().unwrap();
            let mut t = Matrix::zeros(rows, classes);
            for i in 0..rows {
                t.set(i, rng.below(classes as u64) as usize, 1.0);
            }
            t
        }
        OutputHead::Reconstruction => x.clone(),
    };
    (x, t)
}

/// Which hidden ReLU units are active; empty for sigmoid networks.
fn relu_pattern(model: &MlpModel, x: &Matrix) -> Vec<bool> {
    if model.activation != Activation::Relu {
        return Vec::new();
    }
    let acts = model.forward(x).unwrap();
    acts[..acts.len() - 1]
        .iter()
        .flat_map(|a| a.as_slice().iter().map(|&v| v > 0.0))
        .collect()
}

fn loss_at(
    model: &mut MlpModel,
    x: &Matrix,
    t: &Matrix,
    read: &impl Fn(&mut MlpModel) -> &mut f64,
    v: f64,
    pattern: &[bool],
) -> Option<f64> {
    let orig = *read(model);
    *read(model) = v;
    let same = relu_pattern(model, x) == pattern;
    let loss = model.loss(x, t).unwrap();
    *read(model) = orig;
    same.then_some(loss)
}

fn central(
    model: &mut MlpModel,
    x: &Matrix,
    t: &Matrix,
    read: &impl Fn(&mut MlpModel) -> &mut f64,
    h: f64,
    pattern: &[bool],
) -> Option<f64> {
    let orig = *read(model);
    let up = loss_at(model, x, t, read, orig + h, pattern)?;
    let down = loss_at(model, x, t, read, orig - h, pattern)?;
    Some((up - down) / (2.0 * h))
}

/// Richardson-extrapolated central difference, accurate to `O(h⁴)`.
fn numeric(
    model: &mut MlpModel,
    x: &Matrix,
    t: &Matrix,
    pattern: &[bool],
    read: impl Fn(&mut MlpModel) -> &mut f64,
) -> Option<f64> {
    let coarse = central(model, x, t, &read, STEP, pattern)?;
    let fine = central(model, x, t, &read, STEP / 2.0, pattern)?;
    Some((4.0 * fine - coarse) / 3.0)
}

/// Checks `per_layer` random weights and `per_layer` random biases of every
/// layer (all of them when the layer is smaller).
pub fn check_gradients(
    model: &MlpModel,
    x: &Matrix,
    t: &Matrix,
    per_layer: usize,
    rng: &mut Rng,
) -> GradCheck {
    let (_, grads) = model.loss_and_gradients(x, t).unwrap();
    let mut m = model.clone();
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut skipped = 0;
    let pattern = relu_pattern(model, x);
    for l in 0..m.weights.len() {
        let (rows, cols) = m.weights[l].shape();
        let picks: Vec<(usize, usize)> = if rows * cols <= per_layer {
            (0..rows * cols).map(|i| (i / cols, i % cols)).collect()
        } else {
            (0..per_layer)
                .map(|_| {
                    (
                        rng.below(rows as u64) as usize,
                        rng.below(cols as u64) as usize,
                    )
                })
                .collect()
        };
        for (i, j) in picks {
            match numeric(&mut m, x, t, &pattern, |m| {
                &mut m.weights[l].as_mut_slice()[i * cols + j]
            }) {
                Some(n) => {
                    worst = worst.max(relative_error(grads.weights[l].get(i, j), n));
                    checked += 1;
                }
                None => skipped += 1,
            }
        }
        let nb = m.biases[l].len();
        let picks: Vec<usize> = if nb <= per_layer {
            (0..nb).collect()
        } else {
            (0..per_layer)
                .map(|_| rng.below(nb as u64) as usize)
                .collect()
        };
        for j in picks {
            match numeric(&mut m, x, t, &pattern, |m| &mut m.biases[l][j]) {
                Some(n) => {
                    worst = worst.max(relative_error(grads.biases[l][j], n));
                    checked += 1;
                }
                None => skipped += 1,
            }
        }
    }
    GradCheck {
        max_rel_error: worst,
        checked,
        skipped,
    }
}
