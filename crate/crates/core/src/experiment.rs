//! End-to-end pipelines shared by the CLI and the acceptance suite: the
//! holdout-tuned ridge classifier over maxout features, the m × q sweep,
//! SGD logistic regression on synthetic blobs, distance-saturation curves
//! and the manifold ordering check.

use std::path::Path;

use ndarray::{s, Array2, ArrayView2, Axis};

use crate::bank::ProjectionBank;
use crate::data::{gen_circle, load_idx, Dataset};
use crate::embedding::{
    all_pairs, binned_curve, curve_monotonicity, distance_curve, fit_pca, saturation_point,
};
use crate::error::{Error, Result};
use crate::features::{featurize, featurize_batch};
use crate::kernel::{EstimationSettings, KernelModel};
use crate::linear::{
    confusion_from_indices, one_vs_rest, select_lambda, train_logistic_sgd_dense, Evaluation,
    GramAccumulator, LambdaSelection, LinearModel, RidgeOptions, SgdConfig,
};
use crate::stats::{mean, sample_std, spearman};

/// `{10^k : k = -6..=2}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (-6..=2).map(|k| 10f64.powi(k)).collect()
}

pub const DEFAULT_HOLDOUT_FRACTION: f64 = 1.0 / 6.0;

/// Rows featurized per streaming step.
const CHUNK_ROWS: usize = 2048;

#[derive(Clone, Debug, PartialEq)]
pub struct RidgeCellConfig {
    pub m: usize,
    pub q: usize,
    pub seed: u64,
    pub lambda_grid: Vec<f64>,
    /// Trailing fraction of the training rows held out to pick `λ`.
    pub holdout_fraction: f64,
    pub intercept: bool,
}

impl RidgeCellConfig {
    pub fn new(m: usize, q: usize, seed: u64) -> Self {
        Self {
            m,
            q,
            seed,
            lambda_grid: default_lambda_grid(),
            holdout_fraction: DEFAULT_HOLDOUT_FRACTION,
            intercept: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RidgeCellResult {
    pub m: usize,
    pub q: usize,
    pub seed: u64,
    pub best_lambda: f64,
    pub validation_errors: Vec<(f64, f64)>,
    pub evaluation: Evaluation,
}

impl RidgeCellResult {
    pub fn test_error(&self) -> f64 {
        self.evaluation.error_rate
    }
}

/// Sorted distinct labels.
pub fn class_list(labels: &[u32]) -> Vec<u32> {
    let mut c = labels.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

/// Labels of a labelled dataset; an error for unlabelled data.
pub fn labels_of(ds: &Dataset) -> Result<&[u32]> {
    ds.labels
        .as_deref()
        .ok_or_else(|| Error::invalid(format!("dataset {:?} has no labels", ds.name)))
}

fn accumulate(
    bank: &ProjectionBank,
    x: ArrayView2<'_, f64>,
    labels: &[u32],
    classes: &[u32],
    acc: &mut GramAccumulator,
) -> Result<()> {
    for start in (0..x.nrows()).step_by(CHUNK_ROWS) {
        let end = (start + CHUNK_ROWS).min(x.nrows());
        let z = featurize_batch(bank, x.slice(s![start..end, ..]))?;
        let y = one_vs_rest(&labels[start..end], classes)?;
        acc.add(z.values.view(), y.view())?;
    }
    Ok(())
}

fn predict_chunked(
    bank: &ProjectionBank,
    model: &LinearModel,
    x: ArrayView2<'_, f64>,
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(x.nrows());
    for start in (0..x.nrows()).step_by(CHUNK_ROWS) {
        let end = (start + CHUNK_ROWS).min(x.nrows());
        let z = featurize_batch(bank, x.slice(s![start..end, ..]))?;
        out.extend(model.predict_indices(z.values.view())?);
    }
    Ok(out)
}

/// A ridge model fitted on maxout features together with its bank and the
/// validation curve that chose `λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeFit {
    pub bank: ProjectionBank,
    pub model: LinearModel,
    pub selection: LambdaSelection,
}

/// Trains ridge on maxout features of `train` with `λ` chosen on the trailing
/// holdout, then refits on all training rows.
pub fn fit_ridge(train: &Dataset, cfg: &RidgeCellConfig) -> Result<RidgeFit> {
    let train_labels = labels_of(train)?;
    if !(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0) {
        return Err(Error::invalid("holdout fraction must lie in (0, 1)"));
    }
    let n = train.len();
    if n < 2 {
        return Err(Error::invalid("need at least two training rows"));
    }
    let n_hold = ((n as f64 * cfg.holdout_fraction).round() as usize).clamp(1, n - 1);
    let split = n - n_hold;
    let classes = class_list(train_labels);
    let bank = ProjectionBank::sample(cfg.m, cfg.q, train.dim(), cfg.seed)?;
    let opts = RidgeOptions {
        intercept: cfg.intercept,
    };

    let mut fit = GramAccumulator::new(cfg.m, classes.len());
    accumulate(
        &bank,
        train.x.slice(s![..split, ..]),
        &train_labels[..split],
        &classes,
        &mut fit,
    )?;

    let hold_labels = &train_labels[split..];
    let z_hold = featurize_batch(&bank, train.x.slice(s![split.., ..]))?;
    let mut hold = GramAccumulator::new(cfg.m, classes.len());
    hold.add(
        z_hold.values.view(),
        one_vs_rest(hold_labels, &classes)?.view(),
    )?;
    let hold_idx = index_of(hold_labels, &classes)?;
    let selection = select_lambda(
        &fit,
        z_hold.values.view(),
        &hold_idx,
        &cfg.lambda_grid,
        opts,
    )?;

    fit.merge(&hold)?;
    let mut model = fit.solve(selection.best_lambda, opts)?;
    model.classes = classes;
    model.feature_fingerprint = bank.fingerprint();
    Ok(RidgeFit {
        bank,
        model,
        selection,
    })
}

/// Evaluates `model` on the maxout features of a labeled dataset, streaming
/// rows through `bank`.
pub fn evaluate_dataset(
    bank: &ProjectionBank,
    model: &LinearModel,
    data: &Dataset,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    if model.feature_fingerprint != 0 && model.feature_fingerprint != bank.fingerprint() {
        return Err(Error::invalid(format!(
            "model expects bank {:016x}, got {:016x}",
            model.feature_fingerprint,
            bank.fingerprint()
        )));
    }
    let truth = model.class_indices(labels_of(data)?)?;
    let pred = predict_chunked(bank, model, data.x.view())?;
    Ok(confusion_from_indices(&truth, &pred, model.n_classes()))
}

/// [`fit_ridge`] followed by evaluation on `test`.
pub fn ridge_cell(
    train: &Dataset,
    test: &Dataset,
    cfg: &RidgeCellConfig,
) -> Result<(RidgeCellResult, LinearModel)> {
    labels_of(test)?;
    if train.dim() != test.dim() {
        return Err(Error::invalid("train and test dimensions differ"));
    }
    let fit = fit_ridge(train, cfg)?;
    let evaluation = evaluate_dataset(&fit.bank, &fit.model, test)?;
    Ok((
        RidgeCellResult {
            m: cfg.m,
            q: cfg.q,
            seed: cfg.seed,
            best_lambda: fit.selection.best_lambda,
            validation_errors: fit.selection.errors,
            evaluation,
        },
        fit.model,
    ))
}

/// Position of each label in the sorted class list.
pub fn index_of(labels: &[u32], classes: &[u32]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            classes
                .binary_search(l)
                .map_err(|_| Error::invalid(format!("label {l} is not among the classes")))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub m: usize,
    pub q: usize,
    pub runs: Vec<RidgeCellResult>,
}

impl SweepCell {
    pub fn errors(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.test_error()).collect()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.errors())
    }

    /// Sample (n − 1) standard deviation; zero for a single seed.
    pub fn std(&self) -> f64 {
        sample_std(&self.errors())
    }
}

/// Ridge cells over the `ms × qs` grid, each averaged over `seeds`, in
/// `(m, q)` order.
pub fn sweep(
    train: &Dataset,
    test: &Dataset,
    ms: &[usize],
    qs: &[usize],
    seeds: &[u64],
    template: &RidgeCellConfig,
) -> Result<Vec<SweepCell>> {
    if seeds.is_empty() {
        return Err(Error::invalid("seed list is empty"));
    }
    let mut cells = Vec::new();
    for &m in ms {
        for &q in qs {
            let mut runs = Vec::with_capacity(seeds.len());
            for &seed in seeds {
                let cfg = RidgeCellConfig {
                    m,
                    q,
                    seed,
                    ..template.clone()
                };
                runs.push(ridge_cell(train, test, &cfg)?.0);
            }
            cells.push(SweepCell { m, q, runs });
        }
    }
    Ok(cells)
}

/// Loads the four standard MNIST IDX files from `dir`.
pub fn load_mnist(dir: impl AsRef<Path>) -> Result<(Dataset, Dataset)> {
    let dir = dir.as_ref();
    let mut train = load_idx(
        dir.join("train-images-idx3-ubyte"),
        dir.join("train-labels-idx1-ubyte"),
    )?;
    train.name = "mnist-train".into();
    let mut test = load_idx(
        dir.join("t10k-images-idx3-ubyte"),
        dir.join("t10k-labels-idx1-ubyte"),
    )?;
    test.name = "mnist-test".into();
    Ok((train, test))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlobComparison {
    pub logistic: Evaluation,
    pub ridge: Evaluation,
    /// Mean test cross-entropy of the logistic model.
    pub logistic_test_loss: f64,
    pub logistic_model: LinearModel,
}

/// SGD multinomial logistic and holdout-tuned ridge on the same maxout
/// features of `train`, both evaluated on `test`.
pub fn blob_comparison(
    train: &Dataset,
    test: &Dataset,
    m: usize,
    q: usize,
    seed: u64,
    sgd: &SgdConfig,
) -> Result<BlobComparison> {
    let (ridge, _) = ridge_cell(train, test, &RidgeCellConfig::new(m, q, seed))?;
    let classes = class_list(labels_of(train)?);
    let bank = ProjectionBank::sample(m, q, train.dim(), seed)?;
    let z = featurize_batch(&bank, train.x.view())?;
    let y = index_of(labels_of(train)?, &classes)?;
    let mut model = train_logistic_sgd_dense(z.values.view(), &y, classes.len(), sgd)?;
    model.classes = classes.clone();
    model.feature_fingerprint = bank.fingerprint();
    let zt = featurize_batch(&bank, test.x.view())?;
    let yt = index_of(labels_of(test)?, &classes)?;
    let pred = model.predict_indices(zt.values.view())?;
    let logistic = confusion_from_indices(&yt, &pred, classes.len());
    let logistic_test_loss = crate::linear::logistic_objective(
        model.alpha.view(),
        model.intercept.as_deref(),
        zt.values.view(),
        &yt,
        0.0,
    );
    Ok(BlobComparison {
        logistic,
        ridge: ridge.evaluation,
        logistic_test_loss,
        logistic_model: model,
    })
}

/// One row of a distance-saturation curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveRow {
    pub orig_dist: f64,
    pub embed_dist: f64,
    /// `embed_dist / σ(q)`.
    pub normalized_dist: f64,
    pub q: usize,
    pub m: usize,
    pub seed: u64,
}

/// All-pairs distance curve of `n_points` circle points (generated with
/// `seed`) through a bank drawn with the same seed.
pub fn circle_distance_curve(
    n_points: usize,
    q: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<CurveRow>> {
    let circle = gen_circle(n_points, seed)?;
    let bank = ProjectionBank::sample(m, q, 2, seed)?;
    let sigma = KernelModel::new(q, &EstimationSettings::default())?
        .sigma2
        .sqrt();
    let rows = distance_curve(&bank, circle.x.view(), &all_pairs(n_points))?;
    Ok(rows
        .into_iter()
        .map(|(o, e)| CurveRow {
            orig_dist: o,
            embed_dist: e,
            normalized_dist: e / sigma,
            q,
            m,
            seed,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaturationSummary {
    pub q: usize,
    /// Pooled `(bin center, mean normalized distance)` over all seeds.
    pub curve: Vec<(f64, f64)>,
    /// Spearman correlation between bin centers and bin means.
    pub monotonicity: f64,
    /// Original distance where the curve first reaches the given fraction
    /// of its last-bin plateau.
    pub saturation: Option<f64>,
}

/// Pools σ-normalized circle curves over `seeds` into `bins` bins on
/// `[0, 2]` and locates the `fraction`-of-plateau point.
pub fn saturation_summary(
    n_points: usize,
    q: usize,
    m: usize,
    seeds: &[u64],
    bins: usize,
    fraction: f64,
) -> Result<SaturationSummary> {
    if bins == 0 {
        return Err(Error::invalid("need at least one bin"));
    }
    let mut pooled = Vec::new();
    for &seed in seeds {
        pooled.extend(
            circle_distance_curve(n_points, q, m, seed)?
                .into_iter()
                .map(|r| (r.orig_dist, r.normalized_dist)),
        );
    }
    let curve = binned_curve(&pooled, bins, 2.0);
    Ok(SaturationSummary {
        q,
        monotonicity: curve_monotonicity(&curve),
        saturation: saturation_point(&curve, fraction),
        curve,
    })
}

/// 2-D maxout-PCA embedding of `x` through a fresh `(m, q, seed)` bank.
pub fn maxout_embedding(
    x: ArrayView2<'_, f64>,
    m: usize,
    q: usize,
    k: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    let bank = ProjectionBank::sample(m, q, x.ncols(), seed)?;
    let z = featurize_batch(&bank, x)?;
    let pca = fit_pca(z.values.view(), k)?;
    pca.transform_batch(z.values.view())
}

/// How well the order of 2-D points along a curve follows `labels`: the
/// polar angle of each point about the centroid, unwrapped at the widest
/// angular gap, rank-correlated with the labels. Returns |Spearman|.
pub fn curve_ordering(points: ArrayView2<'_, f64>, labels: &[f64]) -> Result<f64> {
    if points.ncols() != 2 || points.nrows() != labels.len() || points.nrows() < 3 {
        return Err(Error::invalid(
            "need at least three 2-D points with one label each",
        ));
    }
    let c = points.mean_axis(Axis(0)).expect("nonempty");
    let angles: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|r| (r[1] - c[1]).atan2(r[0] - c[0]))
        .collect();
    let mut sorted = angles.clone();
    sorted.sort_by(f64::total_cmp);
    let tau = std::f64::consts::TAU;
    let (mut cut, mut widest) = (sorted[0], sorted[0] + tau - sorted[sorted.len() - 1]);
    for w in sorted.windows(2) {
        if w[1] - w[0] > widest {
            widest = w[1] - w[0];
            cut = w[1];
        }
    }
    let unwrapped: Vec<f64> = angles
        .iter()
        .map(|&a| if a < cut { a + tau } else { a })
        .collect();
    Ok(spearman(&unwrapped, labels).abs())
}

/// RMS over `pairs` × `seeds` of `⟨Φ(x), Φ(z)⟩ − reference(x, z)` for one
/// unit count `m`.
pub fn kernel_rms_error(
    pairs: &[(Vec<f64>, Vec<f64>)],
    reference: &[f64],
    m: usize,
    q: usize,
    seeds: &[u64],
) -> Result<f64> {
    if pairs.is_empty() || seeds.is_empty() || pairs.len() != reference.len() {
        return Err(Error::invalid(
            "need pairs, one reference value each, and seeds",
        ));
    }
    let d = pairs[0].0.len();
    let mut sum = 0.0;
    for &seed in seeds {
        let bank = ProjectionBank::sample(m, q, d, seed)?;
        for ((x, z), k) in pairs.iter().zip(reference) {
            let e = featurize(&bank, x)?.dot(&featurize(&bank, z)?) - k;
            sum += e * e;
        }
    }
    Ok((sum / (pairs.len() * seeds.len()) as f64).sqrt())
}
