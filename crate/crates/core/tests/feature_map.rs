use maxout_core::bank::ProjectionBank;
use maxout_core::kernel::kappa_mc;
use maxout_core::{featurize, featurize_batch, hamming_distance, hash_code};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn positive_homogeneity(x in vec_strategy(7), c in 0.0f64..=10.0, seed in 0u64..1000) {
        let bank = ProjectionBank::sample(16, 3, 7, seed).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let a = featurize(&bank, &scaled).unwrap();
        let b = featurize(&bank, &x).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            prop_assert!((u - c * v).abs() <= 1e-12 * (1.0 + (c * v).abs()));
        }
    }

    #[test]
    fn hash_is_scale_invariant(x in vec_strategy(5), c in 1e-3f64..=10.0, seed in 0u64..1000) {
        let bank = ProjectionBank::sample(32, 4, 5, seed).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let a = hash_code(&bank, &x).unwrap();
        let b = hash_code(&bank, &scaled).unwrap();
        // A rescaling can only flip an argmax whose two leaders agree to
        // rounding; generic inputs keep every index.
        let flips = a.indices.iter().zip(&b.indices).filter(|(u, v)| u != v).count();
        prop_assert_eq!(flips, 0);
    }

    #[test]
    fn hash_and_features_agree_exactly(x in vec_strategy(6), seed in 0u64..1000, q in 1usize..6) {
        let m = 20;
        let bank = ProjectionBank::sample(m, q, 6, seed).unwrap();
        let phi = featurize(&bank, &x).unwrap();
        let code = hash_code(&bank, &x).unwrap();
        let scale = (m as f64).sqrt();
        for l in 0..m {
            // ⟨w, x⟩ for the selected projection, through a one-projection
            // bank so the summation order is the library's own.
            let w = bank.projection(l, code.indices[l] as usize).to_vec();
            let single = ProjectionBank::from_weights(1, 1, 6, w).unwrap();
            let direct = featurize(&single, &x).unwrap().values[0];
            prop_assert_eq!(phi.values[l].to_bits(), (direct / scale).to_bits());
            for j in 0..q {
                let other: f64 = bank.projection(l, j).iter().zip(&x).map(|(a, b)| a * b).sum();
                prop_assert!(other <= direct + 1e-12 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn single_projection_map_is_additive(x in vec_strategy(4), z in vec_strategy(4), seed in 0u64..1000) {
        let bank = ProjectionBank::sample(10, 1, 4, seed).unwrap();
        let sum: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
        let lhs = featurize(&bank, &sum).unwrap();
        let fx = featurize(&bank, &x).unwrap();
        let fz = featurize(&bank, &z).unwrap();
        for l in 0..10 {
            prop_assert!((lhs.values[l] - fx.values[l] - fz.values[l]).abs() <= 1e-12);
        }
    }
}

#[test]
fn batch_of_hundred_rows_matches_loop_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Array2::from_shape_fn((100, 33), |_| rng.sample::<f64, _>(StandardNormal));
    let bank = ProjectionBank::sample(71, 5, 33, 2).unwrap();
    let batch = featurize_batch(&bank, x.view()).unwrap();
    for (i, row) in x.rows().into_iter().enumerate() {
        let single = featurize(&bank, row.as_slice().unwrap()).unwrap();
        assert_eq!(batch.row(i), single);
    }
}

#[test]
fn hamming_distance_tracks_collision_probability() {
    let m = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (q, theta) in [(2usize, 0.4f64), (4, 1.0), (8, 2.0)] {
        let bank = ProjectionBank::sample(m, q, 3, 40 + q as u64).unwrap();
        // Random rotation of the planar pair (1, 0, 0), (cos θ, sin θ, 0).
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let x = [phase.cos(), phase.sin(), 0.0];
        let z = [(phase + theta).cos(), (phase + theta).sin(), 0.0];
        let h = hamming_distance(
            &hash_code(&bank, &x).unwrap(),
            &hash_code(&bank, &z).unwrap(),
        )
        .unwrap();
        let k = kappa_mc(q, theta.cos(), 2_000_000, 1).unwrap();
        let tol = 3.0 * (0.25 / m as f64).sqrt() + 3.0 * k.stderr;
        assert!(
            (h - (1.0 - k.estimate)).abs() <= tol,
            "q={q}: {h} vs {}",
            1.0 - k.estimate
        );
    }
}

#[test]
fn features_respect_cauchy_schwarz_on_the_sphere() {
    let bank = ProjectionBank::sample(200, 6, 9, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let bound: Vec<f64> = (0..200)
        .map(|l| {
            (0..6)
                .map(|j| {
                    bank.projection(l, j)
                        .iter()
                        .map(|v| v * v)
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    for _ in 0..50 {
        let v: Vec<f64> = (0..9).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let x: Vec<f64> = v.iter().map(|a| a / n).collect();
        let phi = featurize(&bank, &x).unwrap();
        for (l, val) in phi.values.iter().enumerate() {
            assert!((val * (200f64).sqrt()).abs() <= bound[l] + 1e-12);
        }
    }
}

#[test]
fn bank_roundtrip_through_a_file() {
    let bank = ProjectionBank::sample(5, 3, 4, 99).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.bin");
    bank.save(&path).unwrap();
    let back = ProjectionBank::load(&path).unwrap();
    assert_eq!(back, bank);
    assert_eq!(back.fingerprint(), bank.fingerprint());
}
