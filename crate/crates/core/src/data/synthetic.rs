//! Deterministic synthetic datasets.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Normalization};
use crate::error::{Error, Result};

/// `n` points drawn uniformly on the unit circle.
pub fn gen_circle(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("circle needs at least one point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    for mut row in x.rows_mut() {
        let theta = rng.random_range(0.0..2.0 * PI);
        row[0] = theta.cos();
        row[1] = theta.sin();
    }
    Dataset::new(x, None, "circle", Normalization::UnitSphere)
}

/// `T` isotropic unit-variance Gaussian classes in `d` dimensions whose
/// centers are pairwise `separation` apart (`separation/√2` along the first
/// `T` axes). Rows are shuffled; labels are class indices.
pub fn gen_blobs(
    n_per_class: usize,
    classes: usize,
    d: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 || classes == 0 || d == 0 {
        return Err(Error::invalid("blob sizes must be positive"));
    }
    if classes > d {
        return Err(Error::invalid(format!(
            "{classes} equidistant centers need d >= {classes}, got d = {d}"
        )));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(Error::invalid("separation must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_per_class * classes;
    let mut labels: Vec<u32> = (0..n).map(|i| (i / n_per_class) as u32).collect();
    labels.shuffle(&mut rng);
    let offset = separation / std::f64::consts::SQRT_2;
    let mut x = Array2::zeros((n, d));
    for (mut row, &c) in x.rows_mut().into_iter().zip(&labels) {
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        row[c as usize] += offset;
    }
    Dataset::new(x, Some(labels), "blobs", Normalization::None)
}

/// Unit-normalized `side × side` images of an elongated Gaussian blob
/// rotated through `n_angles` increasing angles spanning 135°. Labels are
/// the angle order; the seed jitters angles and adds faint pixel noise.
pub fn gen_rotation_manifold(n_angles: usize, side: usize, seed: u64) -> Result<Dataset> {
    if n_angles < 2 || side < 4 {
        return Err(Error::invalid("need at least 2 angles and side >= 4"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = 0.75 * PI;
    let step = span / (n_angles - 1) as f64;
    let c = (side as f64 - 1.0) / 2.0;
    let (s_major, s_minor) = (side as f64 / 4.0, side as f64 / 12.0);
    let mut x = Array2::zeros((n_angles, side * side));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        let theta = i as f64 * step + rng.random_range(-0.2..0.2) * step;
        let (s, co) = theta.sin_cos();
        for py in 0..side {
            for px in 0..side {
                let (dx, dy) = (px as f64 - c, py as f64 - c);
                let u = co * dx + s * dy;
                let v = -s * dx + co * dy;
                let val = (-0.5 * ((u / s_major).powi(2) + (v / s_minor).powi(2))).exp();
                let noise: f64 = rng.sample(StandardNormal);
                row[py * side + px] = val + 1e-3 * noise;
            }
        }
        let n = row.dot(&row).sqrt();
        row.mapv_inplace(|v| v / n);
    }
    let labels = (0..n_angles as u32).collect();
    Dataset::new(
        x,
        Some(labels),
        "rotation_manifold",
        Normalization::UnitSphere,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_rows_unit_and_deterministic() {
        let a = gen_circle(100, 3).unwrap();
        assert!(a
            .x
            .rows()
            .into_iter()
            .all(|r| (r.dot(&r).sqrt() - 1.0).abs() < 1e-12));
        assert_eq!(a, gen_circle(100, 3).unwrap());
        assert_ne!(a, gen_circle(100, 4).unwrap());
        assert!(gen_circle(0, 1).is_err());
    }

    #[test]
    fn circle_mean_concentrates() {
        let d = gen_circle(100_000, 1).unwrap();
        let mean = d.x.mean_axis(ndarray::Axis(0)).unwrap();
        assert!(mean.dot(&mean).sqrt() <= 0.02);
    }

    #[test]
    fn blobs_shape_and_centers() {
        let d = gen_blobs(200, 3, 5, 10.0, 1).unwrap();
        assert_eq!(d.x.dim(), (600, 5));
        let labels = d.labels.as_ref().unwrap();
        for c in 0..3u32 {
            assert_eq!(labels.iter().filter(|&&l| l == c).count(), 200);
        }
        assert!(gen_blobs(10, 6, 5, 1.0, 1).is_err());
        assert!(gen_blobs(10, 2, 5, -1.0, 1).is_err());
    }

    #[test]
    fn zero_separation_centers_coincide() {
        let d = gen_blobs(5000, 3, 4, 0.0, 2).unwrap();
        let labels = d.labels.as_ref().unwrap();
        for c in 0..3u32 {
            let rows: Vec<usize> = (0..d.len()).filter(|&i| labels[i] == c).collect();
            let mean =
                d.x.select(ndarray::Axis(0), &rows)
                    .mean_axis(ndarray::Axis(0))
                    .unwrap();
            assert!(mean.iter().all(|v| v.abs() < 0.06), "{mean}");
        }
    }

    #[test]
    fn rotation_manifold_unit_rows() {
        let d = gen_rotation_manifold(33, 16, 0).unwrap();
        assert_eq!(d.x.dim(), (33, 256));
        assert!(d
            .x
            .rows()
            .into_iter()
            .all(|r| (r.dot(&r).sqrt() - 1.0).abs() < 1e-12));
        assert_eq!(d, gen_rotation_manifold(33, 16, 0).unwrap());
    }
}
