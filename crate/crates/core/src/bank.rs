//! Gaussian projection banks.
//!
//! A bank holds the `m × q × d` tensor of projection vectors `w_j^ℓ`, stored
//! unit-major: unit `ℓ` occupies a contiguous `q × d` block and each
//! projection is a contiguous run of `d` coordinates.
//!
//! Entries come from ChaCha8 keyed by the seed, with one stream per
//! `(unit, projection)` pair. Any projection can be regenerated in isolation
//! and the tensor does not depend on generation order, thread count or on
//! `m` and `q` themselves: unit `ℓ`, projection `j` is the same vector in
//! every bank drawn with the same seed and `d`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::binio::{checked_len, write_f64s, write_string, OffsetReader};
use crate::error::{Error, Result};

/// Name of the generator used by [`ProjectionBank::sample`].
pub const GENERATOR_ID: &str = "chacha8-stream-ziggurat-v1";
/// Generator id recorded for banks built from caller-supplied weights.
pub const EXPLICIT_GENERATOR_ID: &str = "explicit";

const MAGIC: &[u8; 8] = b"MAXOUTRF";
const FORMAT_VERSION: u16 = 1;
/// Upper bound on the number of stored doubles (2^34, 128 GiB).
const MAX_ENTRIES: usize = 1 << 34;

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionBank {
    m: usize,
    q: usize,
    d: usize,
    seed: u64,
    generator_id: String,
    weights: Vec<f64>,
    fingerprint: u64,
}

fn validate_dims(m: usize, q: usize, d: usize) -> Result<usize> {
    if m == 0 || q == 0 || d == 0 {
        return Err(Error::invalid(format!(
            "bank dimensions must be positive, got m={m}, q={q}, d={d}"
        )));
    }
    if m > u32::MAX as usize || q > u32::MAX as usize {
        return Err(Error::invalid("m and q must fit in 32 bits"));
    }
    m.checked_mul(q)
        .and_then(|v| v.checked_mul(d))
        .filter(|&n| n <= MAX_ENTRIES)
        .ok_or_else(|| Error::invalid(format!("bank of size {m}x{q}x{d} is too large")))
}

/// Stream for one projection vector; independent of m and q.
fn projection_rng(seed: u64, unit: usize, proj: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(b"maxoutrf");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(((unit as u64) << 32) | proj as u64);
    rng
}

impl ProjectionBank {
    /// Draws a bank of i.i.d. standard normal projections.
    pub fn sample(m: usize, q: usize, d: usize, seed: u64) -> Result<Self> {
        let len = validate_dims(m, q, d)?;
        let mut weights = vec![0.0; len];
        weights.par_chunks_mut(d).enumerate().for_each(|(idx, w)| {
            let mut rng = projection_rng(seed, idx / q, idx % q);
            for v in w.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        });
        Ok(Self::assemble(
            m,
            q,
            d,
            seed,
            GENERATOR_ID.to_string(),
            weights,
        ))
    }

    /// Builds a bank from an explicit unit-major weight tensor.
    pub fn from_weights(m: usize, q: usize, d: usize, weights: Vec<f64>) -> Result<Self> {
        let len = validate_dims(m, q, d)?;
        if weights.len() != len {
            return Err(Error::invalid(format!(
                "expected {len} weights for {m}x{q}x{d}, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("bank weights must be finite"));
        }
        Ok(Self::assemble(
            m,
            q,
            d,
            0,
            EXPLICIT_GENERATOR_ID.to_string(),
            weights,
        ))
    }

    fn assemble(
        m: usize,
        q: usize,
        d: usize,
        seed: u64,
        generator_id: String,
        weights: Vec<f64>,
    ) -> Self {
        let fingerprint = fingerprint(m, q, d, seed, &generator_id, &weights);
        Self {
            m,
            q,
            d,
            seed,
            generator_id,
            weights,
            fingerprint,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn generator_id(&self) -> &str {
        &self.generator_id
    }

    /// Hash of the bank's identity and contents, carried by every feature
    /// vector and hash code it produces.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// The whole tensor in unit-major order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The `q × d` block of unit `unit`.
    pub fn unit(&self, unit: usize) -> &[f64] {
        let s = self.q * self.d;
        &self.weights[unit * s..(unit + 1) * s]
    }

    /// Projection vector `w_proj^unit`.
    pub fn projection(&self, unit: usize, proj: usize) -> &[f64] {
        let start = (unit * self.q + proj) * self.d;
        &self.weights[start..start + self.d]
    }

    /// Regenerates a single projection vector of a sampled bank without
    /// materializing the rest of the tensor.
    pub fn regenerate_projection(seed: u64, d: usize, unit: usize, proj: usize) -> Vec<f64> {
        let mut rng = projection_rng(seed, unit, proj);
        (0..d).map(|_| rng.sample(StandardNormal)).collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u16::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u64::<LittleEndian>(self.m as u64)?;
        w.write_u64::<LittleEndian>(self.q as u64)?;
        w.write_u64::<LittleEndian>(self.d as u64)?;
        w.write_u64::<LittleEndian>(self.seed)?;
        write_string(&mut w, &self.generator_id)?;
        write_f64s(&mut w, &self.weights)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = OffsetReader::new(r);
        r.expect_magic(MAGIC)?;
        r.expect_version(FORMAT_VERSION)?;
        let dims_at = r.offset();
        let m = r.u64("m")?;
        let q = r.u64("q")?;
        let d = r.u64("d")?;
        let seed = r.u64("seed")?;
        let generator_id = r.string("generator_id")?;
        let len = checked_len(&[m, q, d], dims_at)?;
        let (m, q, d) = (m as usize, q as usize, d as usize);
        validate_dims(m, q, d).map_err(|e| Error::format(dims_at, e.to_string()))?;
        let weights_at = r.offset();
        let weights = r.f64_vec(len, "weights")?;
        r.expect_end()?;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::format(weights_at, "non-finite weight"));
        }
        Ok(Self::assemble(m, q, d, seed, generator_id, weights))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Convenience wrapper around [`ProjectionBank::sample`].
pub fn sample_bank(m: usize, q: usize, d: usize, seed: u64) -> Result<ProjectionBank> {
    ProjectionBank::sample(m, q, d, seed)
}

fn fingerprint(m: usize, q: usize, d: usize, seed: u64, gen: &str, weights: &[f64]) -> u64 {
    let mut h = Sha256::new();
    for v in [m as u64, q as u64, d as u64, seed] {
        h.update(v.to_le_bytes());
    }
    h.update(gen.as_bytes());
    for w in weights {
        h.update(w.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
