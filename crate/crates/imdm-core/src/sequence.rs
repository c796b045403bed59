//! Token sequences and their partially-masked latent counterparts.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::vocab::Vocabulary;

/// Clean data sequence: length-L list of data token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sequence {
    pub tokens: Vec<u32>,
}

impl Sequence {
    pub fn new(tokens: Vec<u32>, vocab: &Vocabulary) -> Result<Self> {
        for (i, &t) in tokens.iter().enumerate() {
            if !vocab.contains_data(t) {
                return Err(invalid(format!(
                    "token {t} at position {i} outside vocabulary of {}",
                    vocab.n_data()
                )));
            }
        }
        Ok(Sequence { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Per-position latent state: a carried-over data token or a mask.
///
/// For IMDM the continuous noise attached to a masked position lives in the
/// companion [`NoiseAssignment`], not here; mask identity is the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentToken {
    Data(u32),
    Masked,
}

impl LatentToken {
    pub fn is_masked(&self) -> bool {
        matches!(self, LatentToken::Masked)
    }
}

/// Sequence of latent states at some diffusion time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentSequence {
    pub states: Vec<LatentToken>,
}

impl LatentSequence {
    pub fn fully_masked(len: usize) -> Self {
        LatentSequence {
            states: vec![LatentToken::Masked; len],
        }
    }

    pub fn from_clean(seq: &Sequence) -> Self {
        LatentSequence {
            states: seq.tokens.iter().map(|&t| LatentToken::Data(t)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn masked_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_masked())
            .map(|(i, _)| i)
    }

    pub fn fully_unmasked(&self) -> bool {
        self.states.iter().all(|s| !s.is_masked())
    }

    /// Convert to a clean sequence; errors if any position is still masked.
    pub fn to_sequence(&self) -> Result<Sequence> {
        let mut tokens = Vec::with_capacity(self.states.len());
        for (i, s) in self.states.iter().enumerate() {
            match s {
                LatentToken::Data(t) => tokens.push(*t),
                LatentToken::Masked => {
                    return Err(invalid(format!("position {i} still masked")))
                }
            }
        }
        Ok(Sequence { tokens })
    }
}

/// Continuous noise vectors for masked positions; `None` where unmasked
/// (and everywhere for MDM, which carries no noise).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseAssignment {
    pub eps: Vec<Option<Vec<f64>>>,
}

impl NoiseAssignment {
    /// No noise anywhere (the MDM case).
    pub fn none(len: usize) -> Self {
        NoiseAssignment {
            eps: vec![None; len],
        }
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    /// Check the "noise present exactly at masked positions" invariant.
    pub fn matches_mask(&self, z: &LatentSequence) -> bool {
        self.eps.len() == z.len()
            && self
                .eps
                .iter()
                .zip(z.states.iter())
                .all(|(e, s)| e.is_some() == s.is_masked())
    }
}
