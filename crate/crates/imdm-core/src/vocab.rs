//! Token vocabulary with an optional absorbing mask token.

use alloc::format;

use crate::error::{invalid, Result};

/// Data vocabulary of `n_data` tokens (ids `0..n_data`). When the mask token
/// is present it sits at index `n_data`, disjoint from every data id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocabulary {
    n_data: usize,
    has_mask_token: bool,
}

impl Vocabulary {
    pub fn new(n_data: usize, has_mask_token: bool) -> Result<Self> {
        if n_data < 2 {
            return Err(invalid(format!("vocabulary needs >= 2 data tokens, got {n_data}")));
        }
        Ok(Vocabulary {
            n_data,
            has_mask_token,
        })
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn has_mask_token(&self) -> bool {
        self.has_mask_token
    }

    pub fn mask_index(&self) -> Option<usize> {
        self.has_mask_token.then_some(self.n_data)
    }

    /// Number of states including the mask token if present.
    pub fn extended_size(&self) -> usize {
        self.n_data + usize::from(self.has_mask_token)
    }

    pub fn contains_data(&self, id: u32) -> bool {
        (id as usize) < self.n_data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_index_is_disjoint_from_data() {
        let v = Vocabulary::new(4, true).unwrap();
        let m = v.mask_index().unwrap();
        assert_eq!(m, 4);
        assert!(!v.contains_data(m as u32));
        assert_eq!(v.extended_size(), 5);
    }

    #[test]
    fn rejects_tiny_vocab() {
        assert!(Vocabulary::new(1, false).is_err());
    }
}
