//! q-ary locality-sensitive hash codes: the per-unit argmax indices of the
//! same projections used by the feature map.

use crate::bank::ProjectionBank;
use crate::error::{Error, Result};
use crate::features::{check_input, unit_max};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HashCode {
    /// Zero-based argmax index per unit, each in `[0, q)`.
    pub indices: Vec<u32>,
    pub bank_fingerprint: u64,
}

impl HashCode {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Computes `C(x)`. Ties resolve to the smallest index.
pub fn hash_code(bank: &ProjectionBank, x: &[f64]) -> Result<HashCode> {
    check_input(bank, x)?;
    let indices = (0..bank.m())
        .map(|l| unit_max(bank.unit(l), bank.d(), x).1 as u32)
        .collect();
    Ok(HashCode {
        indices,
        bank_fingerprint: bank.fingerprint(),
    })
}

/// Normalized Hamming distance between two codes from the same bank.
pub fn hamming_distance(a: &HashCode, b: &HashCode) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "code lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.bank_fingerprint != b.bank_fingerprint {
        return Err(Error::invalid("codes come from different banks"));
    }
    if a.is_empty() {
        return Err(Error::invalid("empty codes"));
    }
    let diff = a
        .indices
        .iter()
        .zip(&b.indices)
        .filter(|(x, y)| x != y)
        .count();
    Ok(diff as f64 / a.len() as f64)
}
