//! Word-sized Montgomery arithmetic, primality testing and uniform sampling.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand_core::RngCore;

/// Montgomery multiplication modulo an odd 64-bit modulus, with `R = 2^64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Mont64 {
    modulus: u64,
    neg_inv: u64,
    r2: u64,
    one: u64,
}

impl Mont64 {
    pub(crate) fn new(modulus: u64) -> Self {
        debug_assert!(modulus & 1 == 1 && modulus > 1);
        // Newton iteration doubles the number of correct low bits each round.
        let mut inv = modulus;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(modulus.wrapping_mul(inv)));
        }
        let m = modulus as u128;
        let r = (1u128 << 64) % m;
        let r2 = (r * r) % m;
        Self { modulus, neg_inv: inv.wrapping_neg(), r2: r2 as u64, one: r as u64 }
    }

    #[inline]
    pub(crate) fn one(&self) -> u64 {
        self.one
    }

    #[inline]
    fn reduce(&self, t: u128) -> u64 {
        let m = (t as u64).wrapping_mul(self.neg_inv);
        let (sum, carry) = t.overflowing_add(m as u128 * self.modulus as u128);
        let hi = (sum >> 64) as u64;
        if carry || hi >= self.modulus {
            hi.wrapping_sub(self.modulus)
        } else {
            hi
        }
    }

    #[inline]
    pub(crate) fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce(a as u128 * b as u128)
    }

    #[inline]
    pub(crate) fn to_mont(self, a: u64) -> u64 {
        self.mul(a % self.modulus, self.r2)
    }

    #[inline]
    #[allow(clippy::wrong_self_convention)]
    pub(crate) fn from_mont(self, a: u64) -> u64 {
        self.reduce(a as u128)
    }

    /// `base^exp` with both base and result in Montgomery form.
    pub(crate) fn pow(&self, base: u64, mut exp: u64) -> u64 {
        let mut acc = self.one;
        let mut b = base;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }
}

const SMALL_PRIMES: [u64; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233, 239,
    241, 251,
];

/// Deterministic Miller-Rabin for 64-bit integers.
pub(crate) fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in SMALL_PRIMES.iter() {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mont = Mont64::new(n);
    let d_full = n - 1;
    let shift = d_full.trailing_zeros();
    let d = d_full >> shift;
    let minus_one = mont.to_mont(n - 1);
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = mont.pow(mont.to_mont(a), d);
        if x == mont.one() || x == minus_one {
            continue;
        }
        for _ in 1..shift {
            x = mont.mul(x, x);
            if x == minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Probabilistic Miller-Rabin with random bases; exact for values below 2^64.
pub(crate) fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    for &p in SMALL_PRIMES.iter() {
        if (n % p).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n_minus_one = n - &one;
    let shift = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> shift;
    let two = BigUint::from(2u8);
    let upper = n - 3u8;
    'witness: for _ in 0..rounds {
        let a = random_below(&upper, rng) + &two;
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..shift {
            x = (&x * &x) % n;
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Uniform integer in `[0, bound)` by rejection sampling over `bits(bound)` random bits.
pub(crate) fn random_below<R: RngCore + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    assert!(!bound.is_zero(), "empty sampling range");
    let bits = bound.bits();
    let bytes = bits.div_ceil(8) as usize;
    let excess = (bytes as u64) * 8 - bits;
    let mut buf = alloc::vec![0u8; bytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= 0xffu8 >> excess;
        let candidate = BigUint::from_bytes_be(&buf);
        if &candidate < bound {
            return candidate;
        }
    }
}

/// Random integer with exactly `bits` bits (top bit set).
pub(crate) fn random_bits<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    let bytes = bits.div_ceil(8) as usize;
    let excess = (bytes as u64) * 8 - bits;
    let mut buf = alloc::vec![0u8; bytes];
    rng.fill_bytes(&mut buf);
    buf[0] &= 0xffu8 >> excess;
    let mut n = BigUint::from_bytes_be(&buf);
    n.set_bit(bits - 1, true);
    n
}

/// `a mod m` for a signed machine integer.
pub(crate) fn signed_mod(a: i64, m: &BigUint) -> BigUint {
    let magnitude = BigUint::from(a.unsigned_abs()) % m;
    if a < 0 && !magnitude.is_zero() {
        m - magnitude
    } else {
        magnitude
    }
}

/// Signed inner product reduced into `[0, m)`.
pub(crate) fn inner_mod(coeffs: &[i64], scalars: &[BigUint], m: &BigUint) -> BigUint {
    let mut pos = BigUint::zero();
    let mut neg = BigUint::zero();
    for (c, s) in coeffs.iter().zip(scalars) {
        let term = BigUint::from(c.unsigned_abs()) * s;
        if *c < 0 {
            neg += term;
        } else {
            pos += term;
        }
    }
    let pos = pos.mod_floor(m);
    let neg = neg.mod_floor(m);
    if pos >= neg {
        pos - neg
    } else {
        m - (neg - pos)
    }
}
