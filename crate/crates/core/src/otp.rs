//! Shared-seed batch selection.
//!
//! Every party derives the same row indices from the seed issued at setup, so
//! batch membership is agreed without the aggregator being able to predict it.

use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SEED_LEN: usize = 32;

#[derive(Clone, PartialEq, Eq)]
pub struct OtpChain {
    seed: [u8; SEED_LEN],
}

impl core::fmt::Debug for OtpChain {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("OtpChain(..)")
    }
}

impl OtpChain {
    pub fn new(seed: [u8; SEED_LEN]) -> Self {
        Self { seed }
    }

    /// `H(seed || epoch || b_idx || counter)` as a big-endian u64.
    fn draw(&self, epoch: u32, b_idx: u32, counter: u64) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed);
        h.update(epoch.to_be_bytes());
        h.update(b_idx.to_be_bytes());
        h.update(counter.to_be_bytes());
        let digest = h.finalize();
        u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    /// `s` distinct row indices in `[0, rows)` for batch `(epoch, b_idx)`.
    pub fn select_batch(&self, epoch: u32, b_idx: u32, s: usize, rows: usize) -> Result<Vec<usize>> {
        if s > rows {
            return Err(Error::Batch { needed: s, available: rows });
        }
        let n = rows as u64;
        // reject draws from the incomplete final block so `mod n` is unbiased
        let limit = u64::MAX - (u64::MAX % n);
        let mut taken = alloc::vec![false; rows];
        let mut out = Vec::with_capacity(s);
        let mut counter = 0u64;
        while out.len() < s {
            let v = self.draw(epoch, b_idx, counter);
            counter += 1;
            if v >= limit {
                continue;
            }
            let idx = (v % n) as usize;
            if !taken[idx] {
                taken[idx] = true;
                out.push(idx);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(tag: u8) -> OtpChain {
        OtpChain::new([tag; SEED_LEN])
    }

    #[test]
    fn parties_agree() {
        let a = chain(1);
        let b = chain(1);
        assert_eq!(a.select_batch(3, 7, 16, 288).unwrap(), b.select_batch(3, 7, 16, 288).unwrap());
    }

    #[test]
    fn components_change_the_batch() {
        let c = chain(2);
        let base = c.select_batch(0, 0, 16, 288).unwrap();
        assert_ne!(base, c.select_batch(0, 1, 16, 288).unwrap());
        assert_ne!(base, c.select_batch(1, 0, 16, 288).unwrap());
        assert_ne!(base, chain(3).select_batch(0, 0, 16, 288).unwrap());
    }

    #[test]
    fn full_draw_is_a_permutation() {
        let mut rows = chain(4).select_batch(0, 0, 50, 50).unwrap();
        rows.sort_unstable();
        assert_eq!(rows, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn oversized_batch_rejected() {
        assert_eq!(chain(5).select_batch(0, 0, 11, 10), Err(Error::Batch { needed: 11, available: 10 }));
    }

    #[test]
    fn draws_are_distinct() {
        let rows = chain(6).select_batch(9, 9, 64, 70).unwrap();
        let mut sorted = rows.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), rows.len());
        assert!(rows.iter().all(|&r| r < 70));
    }
}
