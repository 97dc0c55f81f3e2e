//! Moments of the maximum of `q` i.i.d. standard normals.
//!
//! The maximum `M_q` has density `q·φ(t)·Φ(t)^{q-1}`; its moments are
//! integrated with Gauss–Legendre on a truncated interval. When the
//! quadrature does not reproduce the density's unit mass the computation
//! falls back to Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Absolute accuracy the moment computations aim for.
pub const ACCURACY_TARGET: f64 = 1e-4;
/// Largest tolerated deviation of the quadrature mass from one before
/// falling back to Monte Carlo.
const MASS_TOLERANCE: f64 = 1e-8;

/// Monte-Carlo configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McSettings {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EstimationSettings {
    Quadrature {
        nodes: usize,
        lower: f64,
        upper: f64,
        fallback: McSettings,
    },
    MonteCarlo(McSettings),
}

impl Default for EstimationSettings {
    fn default() -> Self {
        EstimationSettings::Quadrature {
            nodes: 200,
            lower: -12.0,
            upper: 12.0,
            fallback: McSettings {
                samples: 10_000_000,
                seed: 0,
            },
        }
    }
}

/// How a set of moments was obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum EstimationMeta {
    /// `q = 1`: moments of a standard normal, exact.
    Exact,
    Quadrature {
        nodes: usize,
        lower: f64,
        upper: f64,
        mass_error: f64,
        accuracy_target: f64,
    },
    MonteCarlo {
        samples: usize,
        seed: u64,
        /// Set when Monte Carlo replaced a failed quadrature.
        fallback: bool,
        accuracy_target: f64,
    },
}

/// `E[M_q^2]`, `E[φ_1(M_q)]`, `E[φ_2(M_q)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxMoments {
    pub sigma2: f64,
    pub h1: f64,
    pub h2: f64,
    pub meta: EstimationMeta,
}

/// Unit-norm probabilists' Hermite polynomial `He_i / sqrt(i!)`, `i ∈ {1, 2}`.
pub fn normalized_hermite(i: usize, t: f64) -> Result<f64> {
    match i {
        1 => Ok(t),
        2 => Ok((t * t - 1.0) / std::f64::consts::SQRT_2),
        _ => Err(Error::invalid(format!(
            "normalized Hermite polynomial of order {i} is not supported"
        ))),
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

fn check_q(q: usize) -> Result<()> {
    if q == 0 {
        return Err(Error::invalid("pool size q must be at least 1"));
    }
    if q > i32::MAX as usize {
        return Err(Error::invalid("pool size q is too large"));
    }
    Ok(())
}

/// Integrates `[1, t, t^2]` against the density of `M_q`.
fn quadrature_raw_moments(q: usize, nodes: usize, lower: f64, upper: f64) -> [f64; 3] {
    let (xs, ws) = gauss_legendre(nodes);
    let half = 0.5 * (upper - lower);
    let mid = 0.5 * (upper + lower);
    let mut acc = [0.0; 3];
    for (x, w) in xs.iter().zip(&ws) {
        let t = mid + half * x;
        let dens = q as f64 * normal_pdf(t) * normal_cdf(t).powi(q as i32 - 1);
        let wd = w * half * dens;
        acc[0] += wd;
        acc[1] += wd * t;
        acc[2] += wd * t * t;
    }
    acc
}

const MC_CHUNK: usize = 1 << 16;

/// Monte-Carlo `[E M, E M^2]` over fixed chunks, each with its own stream,
/// so the result does not depend on the thread count.
fn mc_raw_moments(q: usize, mc: McSettings) -> [f64; 2] {
    let chunks = mc.samples.div_ceil(MC_CHUNK);
    let sums = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
            rng.set_stream(c as u64);
            let n = MC_CHUNK.min(mc.samples - c * MC_CHUNK);
            let mut s = [0.0; 2];
            for _ in 0..n {
                let mut best = f64::NEG_INFINITY;
                for _ in 0..q {
                    let g: f64 = rng.sample(StandardNormal);
                    best = best.max(g);
                }
                s[0] += best;
                s[1] += best * best;
            }
            s
        })
        .collect::<Vec<_>>();
    let n = mc.samples as f64;
    let s = sums
        .iter()
        .fold([0.0; 2], |a, b| [a[0] + b[0], a[1] + b[1]]);
    [s[0] / n, s[1] / n]
}

/// Computes `σ²(q)`, `h_1(q)` and `h_2(q)` together.
pub fn max_moments(q: usize, settings: &EstimationSettings) -> Result<MaxMoments> {
    check_q(q)?;
    if q == 1 {
        return Ok(MaxMoments {
            sigma2: 1.0,
            h1: 0.0,
            h2: 0.0,
            meta: EstimationMeta::Exact,
        });
    }
    let from_mc = |mc: McSettings, fallback: bool| -> Result<MaxMoments> {
        if mc.samples == 0 {
            return Err(Error::invalid("Monte-Carlo sample count must be positive"));
        }
        let [m1, m2] = mc_raw_moments(q, mc);
        Ok(MaxMoments {
            sigma2: m2,
            h1: m1,
            h2: (m2 - 1.0) / std::f64::consts::SQRT_2,
            meta: EstimationMeta::MonteCarlo {
                samples: mc.samples,
                seed: mc.seed,
                fallback,
                accuracy_target: ACCURACY_TARGET,
            },
        })
    };
    match *settings {
        EstimationSettings::MonteCarlo(mc) => from_mc(mc, false),
        EstimationSettings::Quadrature {
            nodes,
            lower,
            upper,
            fallback,
        } => {
            if nodes == 0 || !(lower < upper) {
                return Err(Error::invalid(
                    "quadrature needs nodes > 0 and lower < upper",
                ));
            }
            let [mass, m1, m2] = quadrature_raw_moments(q, nodes, lower, upper);
            let mass_error = (mass - 1.0).abs();
            if !(mass_error <= MASS_TOLERANCE) {
                return from_mc(fallback, true);
            }
            Ok(MaxMoments {
                sigma2: m2,
                h1: m1,
                h2: (m2 - mass) / std::f64::consts::SQRT_2,
                meta: EstimationMeta::Quadrature {
                    nodes,
                    lower,
                    upper,
                    mass_error,
                    accuracy_target: ACCURACY_TARGET,
                },
            })
        }
    }
}

/// `σ²(q) = E[(max_j g_j)^2]`.
pub fn sigma2(q: usize, settings: &EstimationSettings) -> Result<f64> {
    Ok(max_moments(q, settings)?.sigma2)
}

/// `h_i(q) = E[φ_i(max_j g_j)]` for `i ∈ {1, 2}`.
pub fn hermite_moment(i: usize, q: usize, settings: &EstimationSettings) -> Result<f64> {
    normalized_hermite(i, 0.0)?;
    let mm = max_moments(q, settings)?;
    Ok(if i == 1 { mm.h1 } else { mm.h2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let int = |p: fn(f64) -> f64| x.iter().zip(&w).map(|(x, w)| w * p(*x)).sum::<f64>();
        assert!((int(|_| 1.0) - 2.0).abs() < 1e-14);
        assert!((int(|t| t.powi(12)) - 2.0 / 13.0).abs() < 1e-14);
        assert!(int(|t| t.powi(13)).abs() < 1e-14);
        let (x, w) = gauss_legendre(200);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn hermite_order_checked() {
        assert!(normalized_hermite(3, 0.0).is_err());
        assert!(hermite_moment(0, 2, &EstimationSettings::default()).is_err());
        assert_eq!(normalized_hermite(2, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn single_gaussian_moments_exact() {
        let s = EstimationSettings::default();
        assert_eq!(sigma2(1, &s).unwrap(), 1.0);
        assert_eq!(hermite_moment(1, 1, &s).unwrap(), 0.0);
        assert_eq!(hermite_moment(2, 1, &s).unwrap(), 0.0);
        assert!(sigma2(0, &s).is_err());
    }

    #[test]
    fn quadrature_matches_classical_values() {
        let s = EstimationSettings::default();
        // max² + min² = g1² + g2² and max², min² are equidistributed.
        assert!((sigma2(2, &s).unwrap() - 1.0).abs() < 1e-10);
        // E max(g1, g2) = 1/sqrt(pi).
        let h1 = hermite_moment(1, 2, &s).unwrap();
        assert!((h1 - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-10);
        // E max of three = 3 / (2 sqrt(pi)).
        let h1 = hermite_moment(1, 3, &s).unwrap();
        assert!((h1 - 1.5 / std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn monte_carlo_settings_and_fallback() {
        let mc = McSettings {
            samples: 200_000,
            seed: 3,
        };
        let m = max_moments(2, &EstimationSettings::MonteCarlo(mc)).unwrap();
        assert!((m.sigma2 - 1.0).abs() < 0.02);
        assert!(matches!(
            m.meta,
            EstimationMeta::MonteCarlo {
                fallback: false,
                ..
            }
        ));
        // Interval too narrow for unit mass: falls back.
        let narrow = EstimationSettings::Quadrature {
            nodes: 50,
            lower: -1.0,
            upper: 1.0,
            fallback: mc,
        };
        let m = max_moments(4, &narrow).unwrap();
        assert!(matches!(
            m.meta,
            EstimationMeta::MonteCarlo { fallback: true, .. }
        ));
    }
}
