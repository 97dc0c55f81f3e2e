//! Linear predictors `f(x) = αᵀ·Φ(x) + b` in feature space.

mod logistic;
mod ridge;

pub use logistic::{
    logistic_gradient, logistic_objective, train_logistic_sgd, train_logistic_sgd_dense, SgdConfig,
};
pub use ridge::{
    one_vs_rest, select_lambda, train_ridge, GramAccumulator, LambdaSelection, RidgeOptions,
};

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use ndarray::{Array2, ArrayView2};

use crate::binio::{checked_len, write_f64s, OffsetReader};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MAXOUTLM";
const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Ridge,
    MultinomialLogistic,
}

impl LossKind {
    fn code(self) -> u8 {
        match self {
            LossKind::Ridge => 0,
            LossKind::MultinomialLogistic => 1,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(LossKind::Ridge),
            1 => Some(LossKind::MultinomialLogistic),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Ridge => "ridge",
            LossKind::MultinomialLogistic => "multinomial_logistic",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingMeta {
    pub epochs: usize,
    /// `(eta0, t0)` of the step-decay schedule, for SGD-trained models.
    pub learning_rate: Option<(f64, f64)>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub epoch_objectives: Vec<f64>,
    pub final_objective: f64,
    /// Whether the per-epoch objective was non-increasing within tolerance.
    pub objective_monotone: Option<bool>,
    /// Relative residual of the normal equations, for ridge models.
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    /// `m × T` weights.
    pub alpha: Array2<f64>,
    /// Unpenalized per-class offsets.
    pub intercept: Option<Vec<f64>>,
    pub lambda: f64,
    pub loss_kind: LossKind,
    pub classes: Vec<u32>,
    /// Fingerprint of the bank whose features the model expects; zero when
    /// unspecified.
    pub feature_fingerprint: u64,
    pub training_meta: TrainingMeta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub scores: Vec<f64>,
    /// Position of the winning class in `classes`.
    pub index: usize,
    pub label: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub error_rate: f64,
    /// `confusion[[true, predicted]]`, indexed by class position.
    pub confusion: Array2<u64>,
    pub total: usize,
}

impl Evaluation {
    pub fn to_csv(&self, classes: &[u32]) -> String {
        let mut s = String::from("true\\pred");
        for c in classes {
            s.push_str(&format!(",{c}"));
        }
        s.push('\n');
        for (i, row) in self.confusion.rows().into_iter().enumerate() {
            s.push_str(&classes[i].to_string());
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// First index of the largest score.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl LinearModel {
    pub fn feature_dim(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.alpha.ncols()
    }

    /// Scores `αᵀ·φ (+ b)` and the arg-max class, ties to the smallest index.
    pub fn predict(&self, phi: &[f64]) -> Result<Prediction> {
        if phi.len() != self.feature_dim() {
            return Err(Error::invalid(format!(
                "feature vector has length {}, model expects {}",
                phi.len(),
                self.feature_dim()
            )));
        }
        let mut scores = self
            .intercept
            .clone()
            .unwrap_or_else(|| vec![0.0; self.n_classes()]);
        for (p, row) in phi.iter().zip(self.alpha.rows()) {
            for (s, a) in scores.iter_mut().zip(row) {
                *s += p * a;
            }
        }
        let index = argmax(&scores);
        Ok(Prediction {
            label: self.classes[index],
            index,
            scores,
        })
    }

    /// Score matrix `N × T` for a batch of feature rows.
    pub fn scores(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.feature_dim() {
            return Err(Error::invalid(format!(
                "features have {} columns, model expects {}",
                z.ncols(),
                self.feature_dim()
            )));
        }
        let mut s = z.dot(&self.alpha);
        if let Some(b) = &self.intercept {
            for mut row in s.rows_mut() {
                for (v, bi) in row.iter_mut().zip(b) {
                    *v += bi;
                }
            }
        }
        Ok(s)
    }

    /// Predicted class positions for a batch.
    pub fn predict_indices(&self, z: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let s = self.scores(z)?;
        Ok(s.rows()
            .into_iter()
            .map(|r| argmax(r.as_slice().expect("row-major scores")))
            .collect())
    }

    /// Error rate and confusion matrix against true class labels.
    pub fn evaluate(&self, z: ArrayView2<'_, f64>, labels: &[u32]) -> Result<Evaluation> {
        if z.nrows() == 0 || z.nrows() != labels.len() {
            return Err(Error::invalid(format!(
                "need a nonempty test set with one label per row, got {} rows and {} labels",
                z.nrows(),
                labels.len()
            )));
        }
        let truth = self.class_indices(labels)?;
        let pred = self.predict_indices(z)?;
        Ok(confusion_from_indices(&truth, &pred, self.n_classes()))
    }

    /// Maps class labels to their positions in `classes`.
    pub fn class_indices(&self, labels: &[u32]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.classes
                    .iter()
                    .position(|c| c == l)
                    .ok_or_else(|| Error::invalid(format!("label {l} is not a model class")))
            })
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let (m, t) = self.alpha.dim();
        w.write_all(MAGIC)?;
        w.write_u16::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u8(self.loss_kind.code())?;
        w.write_u64::<LittleEndian>(m as u64)?;
        w.write_u64::<LittleEndian>(t as u64)?;
        w.write_f64::<LittleEndian>(self.lambda)?;
        for c in &self.classes {
            w.write_u32::<LittleEndian>(*c)?;
        }
        let alpha = self.alpha.as_standard_layout();
        write_f64s(&mut w, alpha.as_slice().expect("standard layout"))?;
        match &self.intercept {
            Some(b) => {
                w.write_u8(1)?;
                write_f64s(&mut w, b)?;
            }
            None => w.write_u8(0)?,
        }
        w.write_u64::<LittleEndian>(self.feature_fingerprint)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = OffsetReader::new(r);
        r.expect_magic(MAGIC)?;
        r.expect_version(FORMAT_VERSION)?;
        let at = r.offset();
        let loss_kind = LossKind::from_code(r.u8("loss_kind")?)
            .ok_or_else(|| Error::format(at, "unknown loss kind"))?;
        let at = r.offset();
        let m = r.u64("m")?;
        let t = r.u64("T")?;
        let len = checked_len(&[m, t], at)?;
        let lambda = r.f64("lambda")?;
        let classes = (0..t)
            .map(|_| r.u32("class label"))
            .collect::<Result<Vec<_>>>()?;
        let alpha_at = r.offset();
        let alpha = Array2::from_shape_vec((m as usize, t as usize), r.f64_vec(len, "alpha")?)
            .map_err(|e| Error::format(alpha_at, e.to_string()))?;
        let at = r.offset();
        let intercept = match r.u8("intercept flag")? {
            0 => None,
            1 => Some(r.f64_vec(t as usize, "intercept")?),
            _ => return Err(Error::format(at, "bad intercept flag")),
        };
        let feature_fingerprint = r.u64("fingerprint")?;
        r.expect_end()?;
        if alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(alpha_at, "non-finite weight"));
        }
        Ok(Self {
            alpha,
            intercept,
            lambda,
            loss_kind,
            classes,
            feature_fingerprint,
            training_meta: TrainingMeta::default(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Builds an [`Evaluation`] from true and predicted class positions.
pub fn confusion_from_indices(truth: &[usize], pred: &[usize], n_classes: usize) -> Evaluation {
    let mut confusion = Array2::<u64>::zeros((n_classes, n_classes));
    let mut wrong = 0usize;
    for (&t, &p) in truth.iter().zip(pred) {
        confusion[[t, p]] += 1;
        wrong += (t != p) as usize;
    }
    Evaluation {
        error_rate: wrong as f64 / truth.len() as f64,
        confusion,
        total: truth.len(),
    }
}
