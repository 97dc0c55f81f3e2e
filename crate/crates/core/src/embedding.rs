//! PCA in maxout feature space and pairwise-distance curves.
//!
//! The covariance eigenproblem is solved exactly, on whichever of the
//! `m × m` covariance or the `N × N` centered Gram matrix is smaller; both
//! share their nonzero spectrum.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::bank::ProjectionBank;
use crate::error::{Error, Result};
use crate::features::featurize_batch;
use crate::stats::spearman;

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `k × m`, orthonormal rows in descending eigenvalue order.
    pub components: Array2<f64>,
    /// Sample-covariance eigenvalues (`n - 1` denominator), non-increasing.
    pub eigenvalues: Array1<f64>,
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Top-`k` principal components of the rows of `z`.
pub fn fit_pca(z: ArrayView2<'_, f64>, k: usize) -> Result<PcaModel> {
    let (n, m) = z.dim();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least two rows"));
    }
    if k == 0 || k > n.min(m) {
        return Err(Error::invalid(format!(
            "k must lie in [1, {}], got {k}",
            n.min(m)
        )));
    }
    let mean = z.mean_axis(Axis(0)).expect("nonempty");
    let centered = &z - &mean;
    let denom = (n - 1) as f64;

    let (values, vectors): (Vec<f64>, Array2<f64>) = if m <= n {
        let cov = centered.t().dot(&centered) / denom;
        let eig = SymmetricEigen::new(to_dmatrix(&cov));
        let order = descending(eig.eigenvalues.as_slice());
        let values = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = Array2::from_shape_fn((k, m), |(r, c)| eig.eigenvectors[(c, order[r])]);
        (values, vecs)
    } else {
        // Dual route: eigenvectors u of C·Cᵀ/(n-1) map to Cᵀu/sqrt((n-1)·λ).
        let gram = centered.dot(&centered.t()) / denom;
        let eig = SymmetricEigen::new(to_dmatrix(&gram));
        let order = descending(eig.eigenvalues.as_slice());
        let mut vecs = Array2::zeros((k, m));
        let mut values = Vec::with_capacity(k);
        for (r, &i) in order[..k].iter().enumerate() {
            let lambda = eig.eigenvalues[i];
            values.push(lambda);
            let u = Array1::from_shape_fn(n, |t| eig.eigenvectors[(t, i)]);
            let v = centered.t().dot(&u);
            let norm = v.dot(&v).sqrt();
            if norm > 1e-12 * (1.0 + lambda.abs()).sqrt() {
                vecs.row_mut(r).assign(&(v / norm));
            }
        }
        // Components for a vanishing spectrum are completed to an
        // orthonormal set.
        complete_orthonormal(&mut vecs);
        (values, vecs)
    };

    let mut components = vectors;
    for mut row in components.rows_mut() {
        let (mut best, mut sign) = (0.0, 1.0);
        for &v in row.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        row.mapv_inplace(|v| v * sign);
    }
    let eigenvalues = Array1::from(values.iter().map(|v| v.max(0.0)).collect::<Vec<_>>());
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
    })
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// Gram–Schmidt fill-in for zero rows.
fn complete_orthonormal(vecs: &mut Array2<f64>) {
    let (k, m) = vecs.dim();
    let mut basis = 0;
    for r in 0..k {
        if vecs.row(r).dot(&vecs.row(r)) > 0.5 {
            continue;
        }
        while basis < m {
            let mut v = Array1::<f64>::zeros(m);
            v[basis] = 1.0;
            basis += 1;
            for o in 0..k {
                if o == r || vecs.row(o).dot(&vecs.row(o)) < 0.5 {
                    continue;
                }
                let p = vecs.row(o).dot(&v);
                v.scaled_add(-p, &vecs.row(o));
            }
            let norm = v.dot(&v).sqrt();
            if norm > 1e-6 {
                vecs.row_mut(r).assign(&(v / norm));
                break;
            }
        }
    }
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    /// `components · (φ - mean)`.
    pub fn transform(&self, phi: &[f64]) -> Result<Array1<f64>> {
        if phi.len() != self.mean.len() {
            return Err(Error::invalid(format!(
                "vector has length {}, model expects {}",
                phi.len(),
                self.mean.len()
            )));
        }
        let centered = Array1::from(phi.to_vec()) - &self.mean;
        Ok(self.components.dot(&centered))
    }

    pub fn transform_batch(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.mean.len() {
            return Err(Error::invalid("column count does not match the model"));
        }
        Ok((&z - &self.mean).dot(&self.components.t()))
    }
}

/// `(‖x_i - x_j‖, ‖Φ(x_i) - Φ(x_j)‖)` for each requested pair of unit rows.
pub fn distance_curve(
    bank: &ProjectionBank,
    x: ArrayView2<'_, f64>,
    pairs: &[(usize, usize)],
) -> Result<Vec<(f64, f64)>> {
    for (i, row) in x.rows().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "row {i} has norm {norm}; distance curves need unit-sphere inputs"
            )));
        }
    }
    if let Some(&(i, j)) = pairs
        .iter()
        .find(|&&(i, j)| i >= x.nrows() || j >= x.nrows())
    {
        return Err(Error::invalid(format!("pair ({i}, {j}) out of range")));
    }
    let phi = featurize_batch(bank, x)?.values;
    let dist = |a: ArrayView2<'_, f64>, i: usize, j: usize| {
        a.row(i)
            .iter()
            .zip(a.row(j))
            .map(|(u, v)| (u - v).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    Ok(pairs
        .iter()
        .map(|&(i, j)| (dist(x, i, j), dist(phi.view(), i, j)))
        .collect())
}

/// All unordered pairs `i < j` of `n` points.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// Mean embedded distance per equal-width bin of original distance on
/// `[0, max_distance]`. Empty bins are dropped; returns `(center, mean)`.
pub fn binned_curve(rows: &[(f64, f64)], bins: usize, max_distance: f64) -> Vec<(f64, f64)> {
    let width = max_distance / bins as f64;
    let mut sums = vec![(0.0, 0usize); bins];
    for &(o, e) in rows {
        let b = ((o / width) as usize).min(bins - 1);
        sums[b].0 += e;
        sums[b].1 += 1;
    }
    sums.iter()
        .enumerate()
        .filter(|(_, s)| s.1 > 0)
        .map(|(b, s)| ((b as f64 + 0.5) * width, s.0 / s.1 as f64))
        .collect()
}

/// Original distance at which a binned curve first reaches `fraction` of its
/// plateau (the mean of the last bin), linearly interpolated between bins.
pub fn saturation_point(curve: &[(f64, f64)], fraction: f64) -> Option<f64> {
    let plateau = curve.last()?.1;
    let target = fraction * plateau;
    let mut prev: Option<(f64, f64)> = None;
    for &(c, v) in curve {
        if v >= target {
            return Some(match prev {
                Some((pc, pv)) if v > pv => pc + (target - pv) / (v - pv) * (c - pc),
                _ => c,
            });
        }
        prev = Some((c, v));
    }
    None
}

/// Spearman correlation between bin centers and bin means.
pub fn curve_monotonicity(curve: &[(f64, f64)]) -> f64 {
    let (c, v): (Vec<f64>, Vec<f64>) = curve.iter().copied().unzip();
    spearman(&c, &v)
}
