//! The expected maxout kernel `K(x, z) = σ²(q)·<x, z>·κ_q(x, z)`.
//!
//! `κ_q` is available three ways: the first three terms of its power series
//! in `ρ`, a Monte-Carlo collision estimate, and for `q = 2` the exact
//! arccos form.

mod collision;
mod moments;

pub use collision::{kappa_closed_form_q2, kappa_mc, KappaEstimate};
pub use moments::{
    gauss_legendre, hermite_moment, max_moments, normalized_hermite, sigma2, EstimationMeta,
    EstimationSettings, MaxMoments, McSettings, ACCURACY_TARGET,
};

use crate::error::{Error, Result};
use collision::check_rho;

/// Series evaluation is flagged outside `|ρ| <= SERIES_TRUSTED_RHO`.
pub const SERIES_TRUSTED_RHO: f64 = 0.5;

/// First three coefficients of `κ_q(ρ) = Σ a_i ρ^i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesCoefficients {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl SeriesCoefficients {
    fn from_moments(q: usize, h1: f64, h2: f64) -> Self {
        let qf = q as f64;
        let a0 = 1.0 / qf;
        let a1 = if q >= 2 { h1 * h1 / (qf - 1.0) } else { 0.0 };
        // The two-projection kernel has no quadratic term.
        let a2 = if q >= 3 {
            qf * h2 * h2 / ((qf - 1.0) * (qf - 2.0))
        } else {
            0.0
        };
        Self { a0, a1, a2 }
    }

    pub fn eval(&self, rho: f64) -> f64 {
        self.a0 + rho * (self.a1 + rho * self.a2)
    }
}

/// Computes `(a0, a1, a2)` for pool size `q`.
pub fn series_coefficients(q: usize, settings: &EstimationSettings) -> Result<SeriesCoefficients> {
    let mm = max_moments(q, settings)?;
    Ok(SeriesCoefficients::from_moments(q, mm.h1, mm.h2))
}

/// Pool size together with its cached moments and series coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelModel {
    pub q: usize,
    pub sigma2: f64,
    pub h1: f64,
    pub h2: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub estimation_meta: EstimationMeta,
}

/// Route used to evaluate `κ_q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelMethod {
    Series,
    MonteCarlo { samples: usize, seed: u64 },
    ClosedFormQ2,
}

impl KernelMethod {
    pub fn name(&self) -> &'static str {
        match self {
            KernelMethod::Series => "series",
            KernelMethod::MonteCarlo { .. } => "mc",
            KernelMethod::ClosedFormQ2 => "closed_form_q2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelEvaluation {
    pub value: f64,
    pub method: KernelMethod,
    pub rho: f64,
    pub kappa: f64,
    /// Standard error of `kappa` for the Monte-Carlo route.
    pub kappa_stderr: Option<f64>,
    /// Set when the truncated series was evaluated beyond
    /// [`SERIES_TRUSTED_RHO`].
    pub series_out_of_range: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl KernelModel {
    pub fn new(q: usize, settings: &EstimationSettings) -> Result<Self> {
        let mm = max_moments(q, settings)?;
        let c = SeriesCoefficients::from_moments(q, mm.h1, mm.h2);
        Ok(Self {
            q,
            sigma2: mm.sigma2,
            h1: mm.h1,
            h2: mm.h2,
            a0: c.a0,
            a1: c.a1,
            a2: c.a2,
            estimation_meta: mm.meta,
        })
    }

    pub fn coefficients(&self) -> SeriesCoefficients {
        SeriesCoefficients {
            a0: self.a0,
            a1: self.a1,
            a2: self.a2,
        }
    }

    /// Truncated series `a0 + a1·ρ + a2·ρ²`.
    pub fn kappa_series(&self, rho: f64) -> Result<f64> {
        Ok(self.coefficients().eval(check_rho(rho)?))
    }

    /// `K(x, z)` via the chosen route for `κ_q`.
    pub fn expected_kernel(
        &self,
        x: &[f64],
        z: &[f64],
        method: KernelMethod,
    ) -> Result<KernelEvaluation> {
        if x.len() != z.len() {
            return Err(Error::invalid(format!(
                "dimension mismatch: {} vs {}",
                x.len(),
                z.len()
            )));
        }
        if x.iter().chain(z).any(|v| !v.is_finite()) {
            return Err(Error::invalid("inputs must be finite"));
        }
        let inner = dot(x, z);
        let norms = dot(x, x).sqrt() * dot(z, z).sqrt();
        let rho = if norms > 0.0 {
            let r = (inner / norms).clamp(-1.0, 1.0);
            // Snap rounding noise so identical or antipodal inputs hit the
            // exact anchors.
            if 1.0 - r.abs() <= 4.0 * f64::EPSILON {
                r.signum()
            } else {
                r
            }
        } else {
            0.0
        };
        let mut series_out_of_range = false;
        let mut kappa_stderr = None;
        let kappa = match method {
            KernelMethod::Series => {
                if norms == 0.0 {
                    return Err(Error::invalid(
                        "series evaluation needs nonzero norms to form rho",
                    ));
                }
                series_out_of_range = rho.abs() > SERIES_TRUSTED_RHO;
                self.coefficients().eval(rho)
            }
            KernelMethod::MonteCarlo { samples, seed } => {
                let k = kappa_mc(self.q, rho, samples, seed)?;
                kappa_stderr = Some(k.stderr);
                k.estimate
            }
            KernelMethod::ClosedFormQ2 => {
                if self.q != 2 {
                    return Err(Error::invalid(format!(
                        "closed form is only defined for q = 2, model has q = {}",
                        self.q
                    )));
                }
                kappa_closed_form_q2(rho)?
            }
        };
        Ok(KernelEvaluation {
            value: self.sigma2 * inner * kappa,
            method,
            rho,
            kappa,
            kappa_stderr,
            series_out_of_range,
        })
    }

    /// Expected squared embedded distance `σ²(q)·(2 - 2ρ·κ_q(ρ))` between unit
    /// vectors with cosine similarity `ρ`, with `κ_q` from Monte Carlo.
    pub fn expected_distance2(&self, rho: f64, mc: McSettings) -> Result<f64> {
        let k = kappa_mc(self.q, rho, mc.samples, mc.seed)?;
        let rho = check_rho(rho)?;
        Ok(self.sigma2 * (2.0 - 2.0 * rho * k.estimate))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn model(q: usize) -> KernelModel {
        KernelModel::new(q, &EstimationSettings::default()).unwrap()
    }

    #[test]
    fn coefficients_for_small_pools() {
        let c = series_coefficients(1, &EstimationSettings::default()).unwrap();
        assert_eq!((c.a0, c.a1, c.a2), (1.0, 0.0, 0.0));
        let c = series_coefficients(2, &EstimationSettings::default()).unwrap();
        assert_eq!(c.a0, 0.5);
        assert!((c.a1 - 1.0 / PI).abs() < 1e-10);
        assert_eq!(c.a2, 0.0);
        assert!(series_coefficients(0, &EstimationSettings::default()).is_err());
    }

    #[test]
    fn coefficients_nonnegative_and_bounded() {
        for q in 1..=64 {
            let m = model(q);
            assert_eq!(m.a0, 1.0 / q as f64);
            assert!(m.a0 >= 0.0 && m.a1 >= 0.0 && m.a2 >= 0.0);
            assert!(m.a0 + m.a1 + m.a2 <= 1.0 + 1e-6, "q={q}");
        }
    }

    #[test]
    fn sigma2_nondecreasing_in_q() {
        let s: Vec<f64> = (1..=64).map(|q| model(q).sigma2).collect();
        assert!(s.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{s:?}");
        // q = 16 lies strictly between 1 and 16 and above q = 8.
        assert!(s[15] > 1.0 && s[15] < 16.0 && s[15] > s[7]);
    }

    #[test]
    fn expected_kernel_examples() {
        let m2 = model(2);
        let x = [1.0, 0.0];
        let z = [0.5, 3f64.sqrt() / 2.0];
        let v = m2
            .expected_kernel(&x, &z, KernelMethod::ClosedFormQ2)
            .unwrap();
        assert!((v.value - 1.0 / 3.0).abs() < 1e-9, "{}", v.value);

        let m4 = model(4);
        let same = m4
            .expected_kernel(
                &z,
                &z,
                KernelMethod::MonteCarlo {
                    samples: 10,
                    seed: 1,
                },
            )
            .unwrap();
        assert_eq!(same.rho, 1.0);
        assert_eq!(same.kappa, 1.0);
        assert!((same.value - m4.sigma2).abs() < 1e-12);

        let orth = [0.0, 1.0];
        for method in [
            KernelMethod::Series,
            KernelMethod::MonteCarlo {
                samples: 1000,
                seed: 1,
            },
        ] {
            assert_eq!(m4.expected_kernel(&x, &orth, method).unwrap().value, 0.0);
        }
        assert_eq!(
            m2.expected_kernel(&x, &orth, KernelMethod::ClosedFormQ2)
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn expected_kernel_errors_and_flags() {
        let m4 = model(4);
        assert!(m4
            .expected_kernel(&[1.0], &[1.0], KernelMethod::ClosedFormQ2)
            .is_err());
        assert!(m4
            .expected_kernel(&[0.0, 0.0], &[1.0, 0.0], KernelMethod::Series)
            .is_err());
        assert!(m4
            .expected_kernel(&[1.0, 0.0], &[1.0], KernelMethod::Series)
            .is_err());
        let v = m4
            .expected_kernel(&[1.0, 0.0], &[0.9, 0.1], KernelMethod::Series)
            .unwrap();
        assert!(v.series_out_of_range);
        let v = m4
            .expected_kernel(&[1.0, 0.0], &[0.1, 0.9], KernelMethod::Series)
            .unwrap();
        assert!(!v.series_out_of_range);
    }

    #[test]
    fn expected_distance_anchors() {
        let mc = McSettings {
            samples: 100_000,
            seed: 2,
        };
        for q in [2, 8] {
            let m = model(q);
            assert_eq!(m.expected_distance2(1.0, mc).unwrap(), 0.0);
            assert!((m.expected_distance2(-1.0, mc).unwrap() - 2.0 * m.sigma2).abs() < 1e-12);
            assert!((m.expected_distance2(0.0, mc).unwrap() - 2.0 * m.sigma2).abs() < 1e-12);
        }
    }
}
