use maxout_core::bank::ProjectionBank;
use maxout_core::featurize;
use maxout_core::kernel::{
    kappa_closed_form_q2, kappa_mc, series_coefficients, sigma2, EstimationSettings, KernelMethod,
    KernelModel, McSettings,
};
use maxout_core::stats::{mean, sample_std};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn settings() -> EstimationSettings {
    EstimationSettings::default()
}

/// Direct simulation of the maximum of `q` standard normals: returns the
/// sample means of `M`, `M²` and `(M² - 1)/√2` with the standard error of `M²`.
fn max_moment_oracle(q: usize, n: usize, seed: u64) -> (f64, f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let mut m = f64::NEG_INFINITY;
        for _ in 0..q {
            m = m.max(rng.sample::<f64, _>(StandardNormal));
        }
        s1 += m;
        s2 += m * m;
        s4 += m * m * m * m;
    }
    let n = n as f64;
    let (e1, e2) = (s1 / n, s2 / n);
    let se2 = ((s4 / n - e2 * e2) / n).sqrt();
    (e1, e2, (e2 - 1.0) / std::f64::consts::SQRT_2, se2)
}

#[test]
fn quadrature_moments_match_simulation() {
    for q in [2usize, 4, 16] {
        let m = KernelModel::new(q, &settings()).unwrap();
        let (h1, s2, h2, se) = max_moment_oracle(q, 2_000_000, q as u64);
        assert!(
            (m.sigma2 - s2).abs() <= 5.0 * se,
            "q={q}: σ² {} vs {s2}",
            m.sigma2
        );
        assert!((m.h1 - h1).abs() <= 5e-3, "q={q}: h1 {} vs {h1}", m.h1);
        assert!((m.h2 - h2).abs() <= 5.0 * se, "q={q}: h2 {} vs {h2}", m.h2);
    }
}

#[test]
fn q4_coefficients_regression() {
    let c = series_coefficients(4, &settings()).unwrap();
    assert_eq!(c.a0, 0.25);
    // Independent check by simulation, then pinned regression values.
    let (h1, _, h2, _) = max_moment_oracle(4, 4_000_000, 44);
    let a1 = h1 * h1 / 3.0;
    let a2 = 4.0 * h2 * h2 / 6.0;
    assert!((c.a1 - a1).abs() < 3e-3, "{} vs {a1}", c.a1);
    assert!((c.a2 - a2).abs() < 3e-3, "{} vs {a2}", c.a2);
    assert!((c.a1 - 0.353_204_552_849).abs() < 1e-9, "{}", c.a1);
    assert!((c.a2 - 0.101_321_183_642).abs() < 1e-9, "{}", c.a2);
}

#[test]
fn sigma2_of_sixteen_lies_between_one_and_sixteen() {
    let s16 = sigma2(16, &settings()).unwrap();
    let s8 = sigma2(8, &settings()).unwrap();
    assert!(s16 > 1.0 && s16 < 16.0 && s16 > s8);
}

#[test]
fn series_agrees_with_simulation_near_zero() {
    for q in [2usize, 4, 8] {
        let model = KernelModel::new(q, &settings()).unwrap();
        for (i, rho) in [-0.2, -0.1, 0.0, 0.05, 0.1, 0.2].into_iter().enumerate() {
            let k = kappa_mc(q, rho, 1_000_000, 10 * q as u64 + i as u64).unwrap();
            let s = model.kappa_series(rho).unwrap();
            let tol = 3.0 * k.stderr + rho.abs().powi(3);
            assert!(
                (s - k.estimate).abs() <= tol,
                "q={q} ρ={rho}: {s} vs {}",
                k.estimate
            );
        }
    }
}

#[test]
fn two_projection_collision_matches_arccos_law() {
    for i in 0..=20 {
        let rho = -1.0 + 0.1 * i as f64;
        let k = kappa_mc(2, rho, 1_000_000, 7 + i).unwrap();
        let exact = kappa_closed_form_q2(rho).unwrap();
        assert!((k.estimate - exact).abs() <= 4.0 * k.stderr, "ρ={rho}");
    }
}

#[test]
fn collision_locality_tightens_with_pool_size() {
    let ks: Vec<f64> = [2usize, 4, 8, 16, 32]
        .iter()
        .map(|&q| kappa_mc(q, 0.5, 1_000_000, 5).unwrap().estimate)
        .collect();
    assert!(ks.windows(2).all(|w| w[1] < w[0]), "{ks:?}");
}

#[test]
fn antipodal_and_coincident_anchors_sum_to_one() {
    for q in [2usize, 3, 5, 9] {
        let plus = kappa_mc(q, 1.0, 1000, 1).unwrap().estimate;
        let minus = kappa_mc(q, -1.0, 100_000, 1).unwrap().estimate;
        assert_eq!(plus + minus, 1.0);
    }
}

#[test]
fn slope_at_origin_tracks_first_coefficient() {
    let delta = 0.05;
    for q in [2usize, 4, 8] {
        let a1 = KernelModel::new(q, &settings()).unwrap().a1;
        // Common random numbers on both sides of zero.
        let up = kappa_mc(q, delta, 10_000_000, 99).unwrap().estimate;
        let down = kappa_mc(q, -delta, 10_000_000, 99).unwrap().estimate;
        let slope = (up - down) / (2.0 * delta);
        assert!(
            (slope - a1).abs() <= 0.25 * a1,
            "q={q}: slope {slope} vs a1 {a1}"
        );
    }
}

#[test]
fn kernel_values_are_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for q in [1usize, 2, 4, 8] {
        let model = KernelModel::new(q, &settings()).unwrap();
        for t in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
            let z: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            for method in [
                KernelMethod::Series,
                KernelMethod::MonteCarlo {
                    samples: 20_000,
                    seed: t,
                },
            ] {
                let e = model.expected_kernel(&x, &z, method).unwrap();
                assert!((0.0..=1.0).contains(&e.kappa));
                assert!(e.value.abs() <= model.sigma2 * nx * nz * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn distance_anchors() {
    let model = KernelModel::new(8, &settings()).unwrap();
    let mc = McSettings {
        samples: 10_000,
        seed: 1,
    };
    assert_eq!(model.expected_distance2(1.0, mc).unwrap(), 0.0);
    assert_eq!(
        model.expected_distance2(-1.0, mc).unwrap(),
        2.0 * model.sigma2
    );
    assert_eq!(
        model.expected_distance2(0.0, mc).unwrap(),
        2.0 * model.sigma2
    );
}

/// Direct simulation of `E[h(x) h(z)]` for unit vectors with cosine `rho`.
fn unit_kernel_oracle(q: usize, rho: f64, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = (1.0 - rho * rho).sqrt();
    let vals: Vec<f64> = (0..n)
        .map(|_| {
            let (mut a, mut b) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for _ in 0..q {
                let g: f64 = rng.sample(StandardNormal);
                let h: f64 = rng.sample(StandardNormal);
                a = a.max(g);
                b = b.max(rho * g + c * h);
            }
            a * b
        })
        .collect();
    (mean(&vals), sample_std(&vals) / (n as f64).sqrt())
}

#[test]
fn empirical_kernel_converges_to_the_expected_product() {
    let (q, rho) = (4, 0.3_f64);
    let x = [1.0, 0.0, 0.0];
    let z = [rho, (1.0 - rho * rho).sqrt(), 0.0];
    let (k, k_se) = unit_kernel_oracle(q, rho, 1_000_000, 5);
    let seeds: Vec<u64> = (1..=20).collect();
    let mut rms = Vec::new();
    let mut last = (0.0, 0.0);
    for m in [100usize, 1_000, 10_000] {
        let vals: Vec<f64> = seeds
            .iter()
            .map(|&s| {
                let bank = ProjectionBank::sample(m, q, 3, s).unwrap();
                featurize(&bank, &x)
                    .unwrap()
                    .dot(&featurize(&bank, &z).unwrap())
            })
            .collect();
        rms.push((vals.iter().map(|v| (v - k).powi(2)).sum::<f64>() / vals.len() as f64).sqrt());
        last = (mean(&vals), sample_std(&vals) / (vals.len() as f64).sqrt());
    }
    assert!(rms.windows(2).all(|w| w[1] < w[0]), "{rms:?}");
    let (avg, se) = last;
    assert!((avg - k).abs() <= 10.0 * (se + k_se), "{avg} vs {k}");
}
