//! Multi-output ridge regression `α = (ZᵀZ + λI)⁻¹ZᵀY`, solved in the
//! `m × m` feature Gram form with a Cholesky factorization.
//!
//! [`GramAccumulator`] streams rows into `ZᵀZ` and `ZᵀY` so the feature
//! matrix never has to be held in memory, and one accumulation serves every
//! `λ` of a validation grid. Accumulators over disjoint row sets add.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Axis};

use super::{confusion_from_indices, LinearModel, LossKind, TrainingMeta};
use crate::error::{Error, Result};

const RESIDUAL_TARGET: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RidgeOptions {
    /// Append an unpenalized constant feature.
    pub intercept: bool,
}

/// ±1 one-vs-rest targets: `+1` in the column of each row's class.
pub fn one_vs_rest(labels: &[u32], classes: &[u32]) -> Result<Array2<f64>> {
    let mut y = Array2::from_elem((labels.len(), classes.len()), -1.0);
    for (i, l) in labels.iter().enumerate() {
        let c = classes
            .iter()
            .position(|c| c == l)
            .ok_or_else(|| Error::invalid(format!("label {l} is not among the classes")))?;
        y[[i, c]] = 1.0;
    }
    Ok(y)
}

/// Sufficient statistics of a ridge problem.
#[derive(Clone, Debug, PartialEq)]
pub struct GramAccumulator {
    gram: Array2<f64>,
    zty: Array2<f64>,
    zsum: Vec<f64>,
    ysum: Vec<f64>,
    n: usize,
}

impl GramAccumulator {
    pub fn new(m: usize, t: usize) -> Self {
        Self {
            gram: Array2::zeros((m, m)),
            zty: Array2::zeros((m, t)),
            zsum: vec![0.0; m],
            ysum: vec![0.0; t],
            n: 0,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn n_targets(&self) -> usize {
        self.zty.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    pub fn zty(&self) -> &Array2<f64> {
        &self.zty
    }

    pub fn add(&mut self, z: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<()> {
        if z.ncols() != self.feature_dim()
            || y.ncols() != self.n_targets()
            || z.nrows() != y.nrows()
        {
            return Err(Error::invalid(format!(
                "batch shapes {:?} / {:?} do not match accumulator {}x{}",
                z.dim(),
                y.dim(),
                self.feature_dim(),
                self.n_targets()
            )));
        }
        general_mat_mul(1.0, &z.t(), &z, 1.0, &mut self.gram);
        general_mat_mul(1.0, &z.t(), &y, 1.0, &mut self.zty);
        for (s, c) in self.zsum.iter_mut().zip(z.sum_axis(Axis(0))) {
            *s += c;
        }
        for (s, c) in self.ysum.iter_mut().zip(y.sum_axis(Axis(0))) {
            *s += c;
        }
        self.n += z.nrows();
        Ok(())
    }

    /// Combines statistics of a disjoint row set.
    pub fn merge(&mut self, other: &GramAccumulator) -> Result<()> {
        if other.gram.dim() != self.gram.dim() || other.zty.dim() != self.zty.dim() {
            return Err(Error::invalid("accumulator shapes differ"));
        }
        self.gram += &other.gram;
        self.zty += &other.zty;
        self.zsum
            .iter_mut()
            .zip(&other.zsum)
            .for_each(|(a, b)| *a += b);
        self.ysum
            .iter_mut()
            .zip(&other.ysum)
            .for_each(|(a, b)| *a += b);
        self.n += other.n;
        Ok(())
    }

    /// Regularized system `(A, B)`; with an intercept the last row/column
    /// belongs to the constant feature and is not penalized.
    fn system(&self, lambda: f64, intercept: bool) -> (DMatrix<f64>, DMatrix<f64>) {
        let (m, t) = (self.feature_dim(), self.n_targets());
        let k = m + intercept as usize;
        let mut a = DMatrix::<f64>::zeros(k, k);
        let mut b = DMatrix::<f64>::zeros(k, t);
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] = self.gram[[i, j]];
            }
            a[(i, i)] += lambda;
            for c in 0..t {
                b[(i, c)] = self.zty[[i, c]];
            }
        }
        if intercept {
            for i in 0..m {
                a[(i, m)] = self.zsum[i];
                a[(m, i)] = self.zsum[i];
            }
            a[(m, m)] = self.n as f64;
            for c in 0..t {
                b[(m, c)] = self.ysum[c];
            }
        }
        (a, b)
    }

    /// Solves the regularized normal equations for one `λ`.
    pub fn solve(&self, lambda: f64, opts: RidgeOptions) -> Result<LinearModel> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if self.n == 0 {
            return Err(Error::invalid("ridge regression needs at least one row"));
        }
        let (a, b) = self.system(lambda, opts.intercept);
        let chol = Cholesky::new(a.clone()).ok_or_else(|| {
            Error::numerical(
                "Cholesky factorization of the regularized Gram matrix failed",
                Some(condition_estimate(&a)),
            )
        })?;
        let mut x = chol.solve(&b);
        let b_norm = b.norm().max(f64::MIN_POSITIVE);
        let mut residual = (&a * &x - &b).norm() / b_norm;
        // Iterative refinement on the same factorization.
        for _ in 0..2 {
            if residual <= RESIDUAL_TARGET {
                break;
            }
            let r = &b - &a * &x;
            x += chol.solve(&r);
            residual = (&a * &x - &b).norm() / b_norm;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(
                "ridge solution is not finite",
                Some(condition_estimate(&a)),
            ));
        }
        let (m, t) = (self.feature_dim(), self.n_targets());
        let alpha = Array2::from_shape_fn((m, t), |(i, c)| x[(i, c)]);
        let intercept = opts.intercept.then(|| (0..t).map(|c| x[(m, c)]).collect());
        Ok(LinearModel {
            alpha,
            intercept,
            lambda,
            loss_kind: LossKind::Ridge,
            classes: (0..t as u32).collect(),
            feature_fingerprint: 0,
            training_meta: TrainingMeta {
                epochs: 1,
                residual: Some(residual),
                ..TrainingMeta::default()
            },
        })
    }
}

fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    let max = eig.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let min = eig.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    max / min
}

/// Fits ridge regression on features `z` (`N × m`) and targets `y` (`N × T`).
pub fn train_ridge(
    z: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    lambda: f64,
    opts: RidgeOptions,
) -> Result<LinearModel> {
    if z.nrows() == 0 {
        return Err(Error::invalid("ridge regression needs at least one row"));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let mut acc = GramAccumulator::new(z.ncols(), y.ncols());
    acc.add(z, y)?;
    acc.solve(lambda, opts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSelection {
    pub best_lambda: f64,
    /// Validation error per grid value, in grid order.
    pub errors: Vec<(f64, f64)>,
}

/// Picks the `λ` with the lowest validation error (first one on ties).
pub fn select_lambda(
    fit: &GramAccumulator,
    z_val: ArrayView2<'_, f64>,
    val_class_indices: &[usize],
    grid: &[f64],
    opts: RidgeOptions,
) -> Result<LambdaSelection> {
    if grid.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if z_val.nrows() == 0 || z_val.nrows() != val_class_indices.len() {
        return Err(Error::invalid("validation set is empty or mislabeled"));
    }
    let mut errors = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let model = fit.solve(lambda, opts)?;
        let pred = model.predict_indices(z_val)?;
        let e = confusion_from_indices(val_class_indices, &pred, model.n_classes());
        errors.push((lambda, e.error_rate));
    }
    let best = errors
        .iter()
        .fold(errors[0], |b, &e| if e.1 < b.1 { e } else { b });
    Ok(LambdaSelection {
        best_lambda: best.0,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, s};

    #[test]
    fn identity_system() {
        let i2: Array2<f64> = Array2::eye(2);
        let m = train_ridge(i2.view(), i2.view(), 1e-12, RidgeOptions::default()).unwrap();
        for (a, b) in m.alpha.iter().zip(i2.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        let m = train_ridge(i2.view(), i2.view(), 1.0, RidgeOptions::default()).unwrap();
        for (a, b) in m.alpha.iter().zip(i2.iter()) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
        assert!(m.training_meta.residual.unwrap() <= 1e-8);
    }

    #[test]
    fn invalid_lambda_and_shapes() {
        let z: Array2<f64> = Array2::eye(2);
        for l in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                train_ridge(z.view(), z.view(), l, RidgeOptions::default()),
                Err(Error::InvalidArgument(_))
            ));
        }
        let y = Array2::<f64>::zeros((3, 2));
        assert!(train_ridge(z.view(), y.view(), 1.0, RidgeOptions::default()).is_err());
    }

    #[test]
    fn streaming_and_merging_match_one_shot() {
        let z = array![[1.0, 2.0], [0.5, -1.0], [3.0, 0.1], [-2.0, 0.7]];
        let y = array![[1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, 1.0]];
        let mut a = GramAccumulator::new(2, 2);
        a.add(z.slice(s![..2, ..]), y.slice(s![..2, ..])).unwrap();
        let mut b = GramAccumulator::new(2, 2);
        b.add(z.slice(s![2.., ..]), y.slice(s![2.., ..])).unwrap();
        a.merge(&b).unwrap();
        let mut whole = GramAccumulator::new(2, 2);
        whole.add(z.view(), y.view()).unwrap();
        assert_eq!(a.n_rows(), 4);
        for (x, w) in a.gram().iter().zip(whole.gram().iter()) {
            assert!((x - w).abs() < 1e-12);
        }
    }

    #[test]
    fn intercept_is_unpenalized() {
        // Constant targets are fit exactly by the intercept alone.
        let z = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let y = array![[3.0], [3.0], [3.0]];
        let m = train_ridge(z.view(), y.view(), 1e3, RidgeOptions { intercept: true }).unwrap();
        let b = m.intercept.as_ref().unwrap()[0];
        assert!(b > 2.9, "intercept {b}");
        assert!(m.alpha.iter().all(|a| a.abs() < 0.05));
    }

    #[test]
    fn one_vs_rest_encoding() {
        let y = one_vs_rest(&[2, 0], &[0, 1, 2]).unwrap();
        assert_eq!(y, array![[-1.0, -1.0, 1.0], [1.0, -1.0, -1.0]]);
        assert!(one_vs_rest(&[5], &[0, 1]).is_err());
    }

    #[test]
    fn lambda_selection_records_grid() {
        let z = array![[1.0, 0.0], [0.0, 1.0], [0.9, 0.1], [0.2, 0.8]];
        let y = one_vs_rest(&[0, 1, 0, 1], &[0, 1]).unwrap();
        let mut acc = GramAccumulator::new(2, 2);
        acc.add(z.view(), y.view()).unwrap();
        let sel = select_lambda(
            &acc,
            z.view(),
            &[0, 1, 0, 1],
            &[1e-3, 1.0, 1e3],
            RidgeOptions::default(),
        )
        .unwrap();
        assert_eq!(sel.errors.len(), 3);
        assert_eq!(sel.best_lambda, 1e-3);
        assert!(
            select_lambda(&acc, z.view(), &[0, 1, 0, 1], &[], RidgeOptions::default()).is_err()
        );
    }
}
