//! The maxout feature map `Φ(x) = (h_1(x), …, h_m(x)) / sqrt(m)` with
//! `h_ℓ(x) = max_j <w_j^ℓ, x>`.
//!
//! Every inner product goes through [`dots`], whose per-pair summation order
//! does not depend on how many rows or projections are processed together.
//! The blocked batch path is therefore bitwise identical to calling
//! [`featurize`] row by row, on any thread count.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::bank::ProjectionBank;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub bank_fingerprint: u64,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Row-major `N × m` matrix of feature vectors from a single bank.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub bank_fingerprint: u64,
}

impl FeatureMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> FeatureVector {
        FeatureVector {
            values: self.values.row(i).to_vec(),
            bank_fingerprint: self.bank_fingerprint,
        }
    }
}

const LANES: usize = 4;

/// Inner products of `W` projection vectors with `R` rows.
///
/// Each pair is summed in `LANES` interleaved partial sums followed by a
/// fixed reduction and a sequential tail, independently of `W` and `R`.
#[inline(always)]
fn dots<const W: usize, const R: usize>(ws: [&[f64]; W], rows: [&[f64]; R]) -> [[f64; R]; W] {
    let n = ws[0].len();
    let body = n - n % LANES;
    let mut acc = [[[0.0f64; LANES]; R]; W];
    let mut i = 0;
    while i < body {
        for (wi, w) in ws.iter().enumerate() {
            let wc: &[f64; LANES] = w[i..i + LANES].try_into().unwrap();
            for (r, x) in rows.iter().enumerate() {
                let xc: &[f64; LANES] = x[i..i + LANES].try_into().unwrap();
                for k in 0..LANES {
                    acc[wi][r][k] += wc[k] * xc[k];
                }
            }
        }
        i += LANES;
    }
    let mut out = [[0.0; R]; W];
    for wi in 0..W {
        for r in 0..R {
            let a = &acc[wi][r];
            let mut s = (a[0] + a[1]) + (a[2] + a[3]);
            for t in body..n {
                s += ws[wi][t] * rows[r][t];
            }
            out[wi][r] = s;
        }
    }
    out
}

/// `<w, x>` with the same summation order as the batched kernel.
#[inline]
pub(crate) fn project(w: &[f64], x: &[f64]) -> f64 {
    dots::<1, 1>([w], [x])[0][0]
}

/// Maximum and (first) argmax of the raw projections of one unit.
#[inline]
pub(crate) fn unit_max(unit: &[f64], d: usize, x: &[f64]) -> (f64, usize) {
    let mut best = project(&unit[..d], x);
    let mut arg = 0;
    for (j, w) in unit.chunks_exact(d).enumerate().skip(1) {
        let v = project(w, x);
        if v > best {
            best = v;
            arg = j;
        }
    }
    (best, arg)
}

pub(crate) fn check_input(bank: &ProjectionBank, x: &[f64]) -> Result<()> {
    if x.len() != bank.d() {
        return Err(Error::invalid(format!(
            "input has dimension {}, bank expects {}",
            x.len(),
            bank.d()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("input contains non-finite values"));
    }
    Ok(())
}

/// Computes `Φ(x)`.
pub fn featurize(bank: &ProjectionBank, x: &[f64]) -> Result<FeatureVector> {
    check_input(bank, x)?;
    let scale = (bank.m() as f64).sqrt();
    let values = (0..bank.m())
        .map(|l| unit_max(bank.unit(l), bank.d(), x).0 / scale)
        .collect();
    Ok(FeatureVector {
        values,
        bank_fingerprint: bank.fingerprint(),
    })
}

const ROW_BLOCK: usize = 64;
/// Target size in doubles of the projection block kept hot while a row block
/// sweeps over it.
const WEIGHT_BLOCK_DOUBLES: usize = 1 << 15;

/// Computes `Φ` for every row of `x`.
pub fn featurize_batch(bank: &ProjectionBank, x: ArrayView2<'_, f64>) -> Result<FeatureMatrix> {
    if x.ncols() != bank.d() {
        return Err(Error::invalid(format!(
            "input has {} columns, bank expects {}",
            x.ncols(),
            bank.d()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("input contains non-finite values"));
    }
    let x = x.as_standard_layout();
    let (n, d, m) = (x.nrows(), bank.d(), bank.m());
    let mut out = Array2::<f64>::zeros((n, m));
    if n == 0 {
        return Ok(FeatureMatrix {
            values: out,
            bank_fingerprint: bank.fingerprint(),
        });
    }
    let xs = x.as_slice().expect("standard layout");
    let scale = (m as f64).sqrt();
    out.as_slice_mut()
        .expect("fresh array is contiguous")
        .par_chunks_mut(ROW_BLOCK * m)
        .enumerate()
        .for_each(|(b, dst)| {
            let r0 = b * ROW_BLOCK;
            let rows: Vec<&[f64]> = (0..dst.len() / m)
                .map(|r| &xs[(r0 + r) * d..(r0 + r + 1) * d])
                .collect();
            project_block(bank, &rows, dst);
            for v in dst.iter_mut() {
                *v /= scale;
            }
        });
    Ok(FeatureMatrix {
        values: out,
        bank_fingerprint: bank.fingerprint(),
    })
}

/// Writes the raw unit maxima of `rows` into `dst` (row-major, `rows × m`).
fn project_block(bank: &ProjectionBank, rows: &[&[f64]], dst: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the required CPU feature was detected at runtime.
            unsafe { project_block_avx2(bank, rows, dst) };
            return;
        }
    }
    project_block_body(bank, rows, dst);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn project_block_avx2(bank: &ProjectionBank, rows: &[&[f64]], dst: &mut [f64]) {
    project_block_body(bank, rows, dst)
}

#[inline(always)]
fn project_block_body(bank: &ProjectionBank, rows: &[&[f64]], dst: &mut [f64]) {
    let (m, q, d) = (bank.m(), bank.q(), bank.d());
    let units_per_block = (WEIGHT_BLOCK_DOUBLES / (q * d)).max(1);
    let mut u0 = 0;
    while u0 < m {
        let u1 = (u0 + units_per_block).min(m);
        let mut r = 0;
        while r + 4 <= rows.len() {
            let quad = [rows[r], rows[r + 1], rows[r + 2], rows[r + 3]];
            for l in u0..u1 {
                let best = unit_max_rows(bank.unit(l), d, quad);
                for (k, v) in best.into_iter().enumerate() {
                    dst[(r + k) * m + l] = v;
                }
            }
            r += 4;
        }
        while r < rows.len() {
            for l in u0..u1 {
                dst[r * m + l] = unit_max_rows(bank.unit(l), d, [rows[r]])[0];
            }
            r += 1;
        }
        u0 = u1;
    }
}

#[inline(always)]
fn unit_max_rows<const R: usize>(unit: &[f64], d: usize, rows: [&[f64]; R]) -> [f64; R] {
    let q = unit.len() / d;
    let mut best = [f64::NEG_INFINITY; R];
    let mut j = 0;
    while j + 2 <= q {
        let v = dots::<2, R>(
            [&unit[j * d..(j + 1) * d], &unit[(j + 1) * d..(j + 2) * d]],
            rows,
        );
        for r in 0..R {
            // Strict comparison keeps the first maximizer, as in `unit_max`.
            if j == 0 || v[0][r] > best[r] {
                best[r] = v[0][r];
            }
            if v[1][r] > best[r] {
                best[r] = v[1][r];
            }
        }
        j += 2;
    }
    if j < q {
        let v = dots::<1, R>([&unit[j * d..(j + 1) * d]], rows);
        for r in 0..R {
            if j == 0 || v[0][r] > best[r] {
                best[r] = v[0][r];
            }
        }
    }
    best
}
