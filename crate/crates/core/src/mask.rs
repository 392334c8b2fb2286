//! Binary sample-selection masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary mask over the sample columns of a score matrix. A mask used for a
/// k-subset search holds exactly k set bits; `assert_cardinality` checks that
/// at API boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mask {
    bits: Vec<bool>,
}

impl Mask {
    pub fn zeros(len: usize) -> Self {
        Mask { bits: vec![false; len] }
    }

    /// Mask with the given column indices set.
    pub fn from_indices(len: usize, indices: &[usize]) -> Result<Self> {
        let mut bits = vec![false; len];
        for &i in indices {
            if i >= len {
                return Err(Error::IndexOutOfRange { what: "mask", index: i, len });
            }
            if bits[i] {
                return Err(Error::DuplicateId { kind: "mask index", id: i.to_string() });
            }
            bits[i] = true;
        }
        Ok(Mask { bits })
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Mask { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Indices of set bits, ascending.
    pub fn ones(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).collect()
    }

    /// Indices of clear bits, ascending.
    pub fn zeros_of(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| !self.bits[i]).collect()
    }

    pub fn assert_cardinality(&self, k: usize) -> Result<()> {
        let got = self.count_ones();
        if got != k {
            return Err(Error::Degenerate(format!(
                "mask has {got} set bits, expected {k}"
            )));
        }
        Ok(())
    }
}
