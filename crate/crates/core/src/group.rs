//! Prime-order subgroups of `Z_p^*`.
//!
//! Groups up to 64 bits run on Montgomery word arithmetic; larger groups fall
//! back to `num-bigint`. Elements always cross the public API as
//! [`GroupElement`], so callers never see which backend is active.

use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use crate::arith::{self, Mont64};
use crate::error::{Error, Result};

/// Smallest modulus size accepted by [`GroupContext::generate`].
pub const MIN_GROUP_BITS: u32 = 32;
/// Modulus size used by the protocol test suites.
pub const TEST_GROUP_BITS: u32 = 64;
/// Modulus size of the production profile.
pub const PRODUCTION_GROUP_BITS: u32 = 2048;

/// Moduli at least this large use a 256-bit Schnorr subgroup instead of a safe prime.
const SCHNORR_THRESHOLD_BITS: u32 = 1024;
const SCHNORR_ORDER_BITS: u64 = 256;
const MAX_PRIME_CANDIDATES: usize = 4_000_000;
const MR_ROUNDS: usize = 32;

/// An element of the prime-order subgroup, stored canonically in `[0, p)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GroupElement(pub(crate) BigUint);

impl GroupElement {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn to_bytes_be(&self, width: usize) -> Vec<u8> {
        let raw = self.0.to_bytes_be();
        let mut out = alloc::vec![0u8; width.saturating_sub(raw.len())];
        out.extend_from_slice(&raw);
        out
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({:x})", self.0)
    }
}

/// Group parameters `(p, q, g)`: `q` prime, `q | p - 1`, `g` of order `q`.
#[derive(Clone)]
pub struct GroupContext {
    p: BigUint,
    q: BigUint,
    g: BigUint,
    word: Option<Word>,
}

#[derive(Clone, Copy)]
struct Word {
    mont: Mont64,
    q: u64,
    g: u64,
}

impl fmt::Debug for GroupContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupContext")
            .field("p", &format_args!("{:x}", self.p))
            .field("q", &format_args!("{:x}", self.q))
            .field("g", &format_args!("{:x}", self.g))
            .finish()
    }
}

impl PartialEq for GroupContext {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.q == other.q && self.g == other.g
    }
}

impl Eq for GroupContext {}

impl GroupContext {
    /// Validates explicit parameters.
    pub fn new(p: BigUint, q: BigUint, g: BigUint) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
        if !arith::is_probable_prime(&p, MR_ROUNDS, &mut rng) {
            return Err(Error::InvalidGroup("modulus is not prime"));
        }
        if !arith::is_probable_prime(&q, MR_ROUNDS, &mut rng) {
            return Err(Error::InvalidGroup("subgroup order is not prime"));
        }
        if !((&p - 1u8) % &q).is_zero() {
            return Err(Error::InvalidGroup("q does not divide p - 1"));
        }
        if g.is_zero() || g >= p || g.is_one() {
            return Err(Error::InvalidGroup("generator out of range or trivial"));
        }
        if !g.modpow(&q, &p).is_one() {
            return Err(Error::InvalidGroup("generator order is not q"));
        }
        Ok(Self::assemble(p, q, g))
    }

    fn assemble(p: BigUint, q: BigUint, g: BigUint) -> Self {
        let word = p.to_u64().map(|pw| {
            let mont = Mont64::new(pw);
            Word {
                mont,
                q: q.to_u64().expect("q < p fits a word"),
                g: mont.to_mont(g.to_u64().expect("g < p fits a word")),
            }
        });
        Self { p, q, g, word }
    }

    /// Generates a fresh group whose modulus has exactly `bits` bits.
    ///
    /// Moduli below 1024 bits are safe primes `p = 2q + 1`; larger moduli use a
    /// 256-bit prime-order Schnorr subgroup, which keeps generation tractable.
    pub fn generate<R: RngCore + ?Sized>(bits: u32, rng: &mut R) -> Result<Self> {
        if bits < MIN_GROUP_BITS {
            return Err(Error::GroupGeneration("modulus must have at least 32 bits"));
        }
        let (p, q) = if bits >= SCHNORR_THRESHOLD_BITS { schnorr_prime(bits, rng)? } else { safe_prime(bits, rng)? };
        let cofactor = (&p - 1u8) / &q;
        let two = BigUint::from(2u8);
        let span = &p - 3u8;
        for _ in 0..1024 {
            let h = arith::random_below(&span, rng) + &two;
            let g = h.modpow(&cofactor, &p);
            if !g.is_one() {
                return Ok(Self::assemble(p, q, g));
            }
        }
        Err(Error::GroupGeneration("no generator found"))
    }

    /// Deterministic generation: the same `(bits, seed)` always yields the same group.
    pub fn from_seed(bits: u32, seed: &[u8]) -> Result<Self> {
        let mut rng = seeded_rng(b"fedv/group", seed);
        Self::generate(bits, &mut rng)
    }

    pub fn modulus(&self) -> &BigUint {
        &self.p
    }

    pub fn order(&self) -> &BigUint {
        &self.q
    }

    pub fn generator(&self) -> GroupElement {
        GroupElement(self.g.clone())
    }

    pub fn bits(&self) -> u64 {
        self.p.bits()
    }

    /// Byte width of a serialized element.
    pub fn element_width(&self) -> usize {
        self.p.bits().div_ceil(8) as usize
    }

    /// Byte width of a serialized exponent.
    pub fn scalar_width(&self) -> usize {
        self.q.bits().div_ceil(8) as usize
    }

    /// Largest dlog bound this group can disambiguate: `|f| < q/2`.
    pub fn max_dlog_bound(&self) -> u128 {
        let half: BigUint = (&self.q - 1u8) >> 1u32;
        half.to_u128().unwrap_or(u128::MAX)
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(BigUint::one())
    }

    /// Reconstructs an element from its canonical value, checking subgroup membership.
    pub fn element(&self, value: BigUint) -> Result<GroupElement> {
        if value.is_zero() || value >= self.p || !value.modpow(&self.q, &self.p).is_one() {
            return Err(Error::Wire("value is not a subgroup element"));
        }
        Ok(GroupElement(value))
    }

    pub fn is_element(&self, a: &GroupElement) -> bool {
        !a.0.is_zero() && a.0 < self.p && a.0.modpow(&self.q, &self.p).is_one()
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        match &self.word {
            Some(w) => {
                let m = &w.mont;
                let r = m.mul(m.to_mont(word(a)), m.to_mont(word(b)));
                GroupElement(BigUint::from(m.from_mont(r)))
            }
            None => GroupElement((&a.0 * &b.0) % &self.p),
        }
    }

    pub fn inv(&self, a: &GroupElement) -> GroupElement {
        // a^(q-1) = a^-1 inside the order-q subgroup
        self.pow(a, &(&self.q - 1u8))
    }

    pub fn pow(&self, base: &GroupElement, exp: &BigUint) -> GroupElement {
        match &self.word {
            Some(w) => {
                let e = (exp % &self.q).to_u64().expect("reduced exponent fits a word");
                let m = &w.mont;
                GroupElement(BigUint::from(m.from_mont(m.pow(m.to_mont(word(base)), e))))
            }
            None => GroupElement(base.0.modpow(&(exp % &self.q), &self.p)),
        }
    }

    pub fn pow_signed(&self, base: &GroupElement, exp: i64) -> GroupElement {
        self.pow(base, &self.exponent(exp))
    }

    pub fn g_pow(&self, exp: &BigUint) -> GroupElement {
        match &self.word {
            Some(w) => {
                let e = (exp % &self.q).to_u64().expect("reduced exponent fits a word");
                GroupElement(BigUint::from(w.mont.from_mont(w.mont.pow(w.g, e))))
            }
            None => GroupElement(self.g.modpow(&(exp % &self.q), &self.p)),
        }
    }

    pub fn g_pow_signed(&self, exp: i64) -> GroupElement {
        self.g_pow(&self.exponent(exp))
    }

    /// Signed integer mapped into the exponent ring `Z_q`.
    pub fn exponent(&self, value: i64) -> BigUint {
        arith::signed_mod(value, &self.q)
    }

    /// Uniform exponent in `[0, q)`.
    pub fn random_exponent<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        arith::random_below(&self.q, rng)
    }

    /// `prod bases[i]^exps[i]` for signed small exponents.
    ///
    /// Positive and negative terms are accumulated separately so only one
    /// inversion is paid regardless of how many exponents are negative.
    pub fn multi_pow_signed(&self, bases: &[GroupElement], exps: &[i64]) -> GroupElement {
        debug_assert_eq!(bases.len(), exps.len());
        match &self.word {
            Some(w) => {
                let m = &w.mont;
                let mut pos = m.one();
                let mut neg = m.one();
                let mut any_neg = false;
                for (b, &e) in bases.iter().zip(exps) {
                    if e == 0 {
                        continue;
                    }
                    let t = m.pow(m.to_mont(word(b)), e.unsigned_abs());
                    if e < 0 {
                        neg = m.mul(neg, t);
                        any_neg = true;
                    } else {
                        pos = m.mul(pos, t);
                    }
                }
                if any_neg {
                    let inv = m.pow(neg, w.q - 1);
                    pos = m.mul(pos, inv);
                }
                GroupElement(BigUint::from(m.from_mont(pos)))
            }
            None => {
                let mut pos = BigUint::one();
                let mut neg = BigUint::one();
                for (b, &e) in bases.iter().zip(exps) {
                    if e == 0 {
                        continue;
                    }
                    let t = b.0.modpow(&BigUint::from(e.unsigned_abs()), &self.p);
                    if e < 0 {
                        neg = (neg * t) % &self.p;
                    } else {
                        pos = (pos * t) % &self.p;
                    }
                }
                if !neg.is_one() {
                    let inv = neg.modpow(&(&self.q - 1u8), &self.p);
                    pos = (pos * inv) % &self.p;
                }
                GroupElement(pos)
            }
        }
    }

    pub(crate) fn word_mont(&self) -> Option<(Mont64, u64)> {
        self.word.map(|w| (w.mont, w.g))
    }
}

fn word(a: &GroupElement) -> u64 {
    a.0.to_u64().expect("word-backend element exceeds 64 bits")
}

/// Deterministic generation entry point.
pub fn group_gen(bits: u32, seed: &[u8]) -> Result<GroupContext> {
    GroupContext::from_seed(bits, seed)
}

pub(crate) fn seeded_rng(domain: &[u8], seed: &[u8]) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update((domain.len() as u32).to_be_bytes());
    h.update(domain);
    h.update(seed);
    ChaCha20Rng::from_seed(h.finalize().into())
}

fn sieve_passes(n: &BigUint) -> bool {
    const SIEVE: [u32; 25] =
        [3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101];
    SIEVE.iter().all(|&p| {
        let r = (n % p).to_u32().unwrap_or(0);
        r != 0 || n == &BigUint::from(p)
    })
}

fn safe_prime<R: RngCore + ?Sized>(bits: u32, rng: &mut R) -> Result<(BigUint, BigUint)> {
    let q_bits = u64::from(bits - 1);
    for _ in 0..MAX_PRIME_CANDIDATES {
        let mut q = arith::random_bits(q_bits, rng);
        q.set_bit(0, true);
        let p: BigUint = (&q << 1u32) + 1u8;
        if p.bits() != u64::from(bits) || !sieve_passes(&q) || !sieve_passes(&p) {
            continue;
        }
        if arith::is_probable_prime(&q, MR_ROUNDS, rng) && arith::is_probable_prime(&p, MR_ROUNDS, rng) {
            return Ok((p, q));
        }
    }
    Err(Error::GroupGeneration("safe prime search exhausted its attempt budget"))
}

fn schnorr_prime<R: RngCore + ?Sized>(bits: u32, rng: &mut R) -> Result<(BigUint, BigUint)> {
    let q = loop {
        let mut q = arith::random_bits(SCHNORR_ORDER_BITS, rng);
        q.set_bit(0, true);
        if sieve_passes(&q) && arith::is_probable_prime(&q, MR_ROUNDS, rng) {
            break q;
        }
    };
    let low = (BigUint::one() << (bits - 1)) / &q + 1u8;
    let span = (BigUint::one() << bits) / &q - &low;
    for _ in 0..MAX_PRIME_CANDIDATES {
        let mut k = arith::random_below(&span, rng) + &low;
        k.set_bit(0, false);
        let p: BigUint = &k * &q + 1u8;
        if p.bits() != u64::from(bits) || !sieve_passes(&p) {
            continue;
        }
        if arith::is_probable_prime(&p, MR_ROUNDS, rng) {
            return Ok((p, q));
        }
    }
    Err(Error::GroupGeneration("Schnorr prime search exhausted its attempt budget"))
}
