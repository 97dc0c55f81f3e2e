//! Collision probability `κ_q(ρ)`: the chance that two inputs with cosine
//! similarity `ρ` share the argmax of the same `q` Gaussian projections.
//!
//! By rotation invariance the pair of projections of one Gaussian vector is
//! `(g, ρ·g + sqrt(1 - ρ²)·h)` with `g, h` independent standard normals, so
//! the estimate only needs `2q` scalar draws per sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KappaEstimate {
    pub estimate: f64,
    /// Binomial standard error `sqrt(p(1-p)/n)`.
    pub stderr: f64,
    pub samples: usize,
}

pub(crate) fn check_rho(rho: f64) -> Result<f64> {
    if !rho.is_finite() || rho.abs() > 1.0 + 1e-12 {
        return Err(Error::invalid(format!(
            "rho must lie in [-1, 1], got {rho}"
        )));
    }
    Ok(rho.clamp(-1.0, 1.0))
}

const CHUNK: usize = 1 << 16;

/// Monte-Carlo estimate of `κ_q(ρ)`.
///
/// Samples are drawn in fixed chunks of 65 536, chunk `c` on ChaCha stream
/// `c`, so the estimate is reproducible from `seed` on any thread count and
/// two calls with the same seed share their random numbers.
pub fn kappa_mc(q: usize, rho: f64, n_samples: usize, seed: u64) -> Result<KappaEstimate> {
    if q == 0 {
        return Err(Error::invalid("pool size q must be at least 1"));
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be positive"));
    }
    let rho = check_rho(rho)?;
    if rho == 1.0 || q == 1 {
        return Ok(KappaEstimate {
            estimate: 1.0,
            stderr: 0.0,
            samples: n_samples,
        });
    }
    let s = (1.0 - rho * rho).sqrt();
    let hits: u64 = (0..n_samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(n_samples - c * CHUNK);
            let mut hits = 0u64;
            for _ in 0..n {
                let (mut bx, mut ax) = (f64::NEG_INFINITY, 0usize);
                let (mut bz, mut az) = (f64::NEG_INFINITY, 0usize);
                for j in 0..q {
                    let g: f64 = rng.sample(StandardNormal);
                    let h: f64 = rng.sample(StandardNormal);
                    let v = rho * g + s * h;
                    if g > bx {
                        bx = g;
                        ax = j;
                    }
                    if v > bz {
                        bz = v;
                        az = j;
                    }
                }
                hits += (ax == az) as u64;
            }
            hits
        })
        .sum();
    let p = hits as f64 / n_samples as f64;
    Ok(KappaEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / n_samples as f64).sqrt(),
        samples: n_samples,
    })
}

/// Exact `κ_2(ρ) = 1 - arccos(ρ)/π`: with two projections the argmax agrees
/// exactly when both inputs fall on the same side of the hyperplane
/// orthogonal to `w_1 - w_2`.
pub fn kappa_closed_form_q2(rho: f64) -> Result<f64> {
    let rho = check_rho(rho)?;
    Ok(1.0 - rho.acos() / std::f64::consts::PI)
}
