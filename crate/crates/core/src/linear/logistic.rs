//! Multinomial logistic regression trained with mini-batch SGD.
//!
//! Objective: mean cross-entropy of `softmax(Zα + b)` plus `l2·‖α‖²`; the
//! intercept `b` is not penalized. Step size at mini-batch step `t` is
//! `η₀ / (1 + t/t₀)`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LinearModel, LossKind, TrainingMeta};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub eta0: f64,
    pub t0: f64,
    pub l2: f64,
    pub seed: u64,
    pub intercept: bool,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            eta0: 0.5,
            t0: 1000.0,
            l2: 1e-5,
            seed: 0,
            intercept: true,
        }
    }
}

/// Relative slack allowed when checking that epoch objectives never rise.
const MONOTONE_TOLERANCE: f64 = 1e-3;

fn logits(alpha: ArrayView2<'_, f64>, bias: Option<&[f64]>, z: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut s = z.dot(&alpha);
    if let Some(b) = bias {
        for mut row in s.rows_mut() {
            row.iter_mut().zip(b).for_each(|(v, bi)| *v += bi);
        }
    }
    s
}

/// Turns logits into probabilities in place; returns per-row log-sum-exp.
fn softmax_rows(s: &mut Array2<f64>) -> Array1<f64> {
    let mut lse = Array1::zeros(s.nrows());
    for (mut row, l) in s.rows_mut().into_iter().zip(lse.iter_mut()) {
        let mx = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        row.mapv_inplace(|v| {
            let e = (v - mx).exp();
            sum += e;
            e
        });
        row.mapv_inplace(|v| v / sum);
        *l = mx + sum.ln();
    }
    lse
}

/// Mean cross-entropy plus `l2·‖α‖²`.
pub fn logistic_objective(
    alpha: ArrayView2<'_, f64>,
    bias: Option<&[f64]>,
    z: ArrayView2<'_, f64>,
    labels: &[usize],
    l2: f64,
) -> f64 {
    let mut s = logits(alpha, bias, z);
    let raw = s.clone();
    let lse = softmax_rows(&mut s);
    let ce: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| lse[i] - raw[[i, y]])
        .sum::<f64>()
        / labels.len() as f64;
    ce + l2 * alpha.iter().map(|a| a * a).sum::<f64>()
}

/// Gradient of [`logistic_objective`] with respect to `α` and `b`.
pub fn logistic_gradient(
    alpha: ArrayView2<'_, f64>,
    bias: Option<&[f64]>,
    z: ArrayView2<'_, f64>,
    labels: &[usize],
    l2: f64,
) -> (Array2<f64>, Vec<f64>) {
    let mut p = logits(alpha, bias, z);
    softmax_rows(&mut p);
    for (i, &y) in labels.iter().enumerate() {
        p[[i, y]] -= 1.0;
    }
    let n = labels.len() as f64;
    let mut g = z.t().dot(&p) / n;
    g.scaled_add(2.0 * l2, &alpha);
    let gb = p.sum_axis(Axis(0)).mapv(|v| v / n).to_vec();
    (g, gb)
}

/// Trains on `(feature vector, class index)` rows.
pub fn train_logistic_sgd<I>(rows: I, n_classes: usize, config: &SgdConfig) -> Result<LinearModel>
where
    I: IntoIterator<Item = (FeatureVector, usize)>,
{
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    let mut fingerprint = 0;
    for (fv, y) in rows {
        match dim {
            None => {
                dim = Some(fv.len());
                fingerprint = fv.bank_fingerprint;
            }
            Some(d) if d != fv.len() => {
                return Err(Error::invalid("feature vectors have inconsistent lengths"))
            }
            Some(_) => {}
        }
        data.extend_from_slice(&fv.values);
        labels.push(y);
    }
    let dim = dim.ok_or_else(|| Error::invalid("empty training stream"))?;
    let z = Array2::from_shape_vec((labels.len(), dim), data)
        .map_err(|e| Error::invalid(e.to_string()))?;
    let mut model = train_logistic_sgd_dense(z.view(), &labels, n_classes, config)?;
    model.feature_fingerprint = fingerprint;
    Ok(model)
}

/// Trains on a dense feature matrix with class indices in `[0, n_classes)`.
pub fn train_logistic_sgd_dense(
    z: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    config: &SgdConfig,
) -> Result<LinearModel> {
    let n = z.nrows();
    if n == 0 {
        return Err(Error::invalid("empty training stream"));
    }
    if labels.len() != n {
        return Err(Error::invalid("one label per row is required"));
    }
    if n_classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    let mut seen = vec![false; n_classes];
    labels.iter().for_each(|&y| seen[y] = true);
    if seen.iter().any(|s| !s) {
        return Err(Error::invalid("every class needs at least one example"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("features must be finite"));
    }
    if config.epochs == 0 || config.batch_size == 0 || !(config.eta0 > 0.0) || !(config.t0 > 0.0) {
        return Err(Error::invalid(
            "epochs, batch_size, eta0 and t0 must be positive",
        ));
    }
    if !(config.l2 >= 0.0) {
        return Err(Error::invalid("l2 must be non-negative"));
    }

    let m = z.ncols();
    let mut alpha = Array2::<f64>::zeros((m, n_classes));
    let mut bias = config.intercept.then(|| vec![0.0; n_classes]);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut step = 0u64;
    let mut objectives = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let zb = z.select(Axis(0), batch);
            let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (g, gb) =
                logistic_gradient(alpha.view(), bias.as_deref(), zb.view(), &yb, config.l2);
            let eta = config.eta0 / (1.0 + step as f64 / config.t0);
            alpha.scaled_add(-eta, &g);
            if let Some(b) = bias.as_mut() {
                b.iter_mut().zip(&gb).for_each(|(bi, gi)| *bi -= eta * gi);
            }
            step += 1;
        }
        let obj = logistic_objective(alpha.view(), bias.as_deref(), z, labels, config.l2);
        if !obj.is_finite() {
            return Err(Error::numerical(
                format!(
                    "SGD diverged: objective is not finite after epoch {}",
                    epoch + 1
                ),
                None,
            ));
        }
        objectives.push(obj);
    }

    let monotone = objectives
        .windows(2)
        .all(|w| w[1] <= w[0] + MONOTONE_TOLERANCE * w[0].abs());
    Ok(LinearModel {
        alpha,
        intercept: bias,
        lambda: config.l2,
        loss_kind: LossKind::MultinomialLogistic,
        classes: (0..n_classes as u32).collect(),
        feature_fingerprint: 0,
        training_meta: TrainingMeta {
            epochs: config.epochs,
            learning_rate: Some((config.eta0, config.t0)),
            batch_size: Some(config.batch_size),
            seed: Some(config.seed),
            final_objective: *objectives.last().unwrap(),
            epoch_objectives: objectives,
            objective_monotone: Some(monotone),
            residual: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_weights_give_log_t() {
        let z = array![[0.3, -1.0], [2.0, 0.5], [0.0, 0.1]];
        let alpha = Array2::zeros((2, 4));
        let obj = logistic_objective(alpha.view(), None, z.view(), &[0, 3, 1], 0.7);
        assert!((obj - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let z = array![[1.0], [2.0]];
        let cfg = SgdConfig::default();
        assert!(train_logistic_sgd_dense(z.view(), &[0, 0], 2, &cfg).is_err());
        assert!(train_logistic_sgd_dense(z.view(), &[0, 2], 2, &cfg).is_err());
        assert!(train_logistic_sgd(Vec::new(), 2, &cfg).is_err());
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(train_logistic_sgd_dense(empty.view(), &[], 2, &cfg).is_err());
    }

    #[test]
    fn divergence_names_the_epoch() {
        let z = array![[1e150, -1e150], [-1e150, 1e150]];
        let cfg = SgdConfig {
            eta0: 1e150,
            epochs: 3,
            batch_size: 1,
            ..SgdConfig::default()
        };
        match train_logistic_sgd_dense(z.view(), &[0, 1], 2, &cfg) {
            Err(Error::Numerical { message, .. }) => assert!(message.contains("epoch 1")),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn identical_runs_are_bitwise_equal() {
        let z = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
        let labels: Vec<usize> = (0..40).map(|i| i % 3).collect();
        let cfg = SgdConfig {
            epochs: 5,
            batch_size: 8,
            seed: 42,
            ..SgdConfig::default()
        };
        let a = train_logistic_sgd_dense(z.view(), &labels, 3, &cfg).unwrap();
        let b = train_logistic_sgd_dense(z.view(), &labels, 3, &cfg).unwrap();
        assert!(a
            .alpha
            .iter()
            .zip(b.alpha.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
