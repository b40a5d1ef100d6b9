//! Fixed-point codec between real model quantities and signed plaintext integers.

use crate::error::{Error, Result};

/// Scale `sigma` and magnitude bound `beta` for fixed-point encoding.
///
/// Encoded values are `round(x * sigma)`, so a product of two encoded factors
/// carries scale `sigma^2` and must be decoded with depth 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointCodec {
    scale: i64,
    bound: f64,
}

impl FixedPointCodec {
    pub fn new(scale: i64, bound: f64) -> Result<Self> {
        if scale < 1 {
            return Err(Error::Config("codec scale must be positive".into()));
        }
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::Config("codec bound must be positive and finite".into()));
        }
        let max = bound * scale as f64;
        if max >= (1u64 << 52) as f64 {
            return Err(Error::Config("codec range exceeds exact f64 integers".into()));
        }
        Ok(Self { scale, bound })
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Largest encoded magnitude, `ceil(beta * sigma)`.
    pub fn max_encoded(&self) -> u64 {
        libm::ceil(self.bound * self.scale as f64) as u64
    }

    /// `round(x * sigma)`, rounding half away from zero.
    pub fn encode(&self, x: f64) -> Result<i64> {
        if !x.is_finite() || libm::fabs(x) > self.bound {
            return Err(Error::Overflow { value: x, bound: self.bound });
        }
        Ok(libm::round(x * self.scale as f64) as i64)
    }

    pub fn encode_all(&self, xs: &[f64]) -> Result<alloc::vec::Vec<i64>> {
        xs.iter().map(|&x| self.encode(x)).collect()
    }

    /// `k / sigma^depth`.
    pub fn decode(&self, k: i64, depth: u32) -> f64 {
        let mut denom = 1.0;
        for _ in 0..depth {
            denom *= self.scale as f64;
        }
        k as f64 / denom
    }

    /// Bound on a feature-dimension sum of `n` encoded partial values.
    pub fn feature_dim_bound(&self, n: usize) -> u128 {
        n as u128 * self.max_encoded() as u128
    }

    /// Bound on a sample-dimension sum of `s` products of two encoded factors.
    pub fn sample_dim_bound(&self, s: usize) -> u128 {
        let m = self.max_encoded() as u128;
        s as u128 * m * m
    }

    /// Dlog bound covering both aggregation phases for batch size `s` and `n` parties.
    pub fn dlog_bound_for(&self, s: usize, n: usize) -> u128 {
        self.feature_dim_bound(n).max(self.sample_dim_bound(s))
    }
}
