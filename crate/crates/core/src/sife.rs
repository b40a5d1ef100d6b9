//! Single-input inner-product functional encryption over a DDH group.
//!
//! Setup publishes `h_i = g^{s_i}`; a key for `y` is the scalar `<y, s>`;
//! a ciphertext of `x` is `(g^r, h_i^r g^{x_i})`. Decryption recovers
//! `g^{<x, y>}` and takes a bounded discrete log.

use alloc::vec::Vec;

use num_bigint::BigUint;
use rand_core::{CryptoRng, RngCore};

use crate::arith;
use crate::dlog::{dlog, DlogTable};
use crate::error::{Error, Result};
use crate::group::{GroupContext, GroupElement};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SifePublicKey {
    pub h: Vec<GroupElement>,
}

impl SifePublicKey {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

#[derive(Clone)]
pub struct SifeMasterKey {
    s: Vec<BigUint>,
    public: SifePublicKey,
}

impl core::fmt::Debug for SifeMasterKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SifeMasterKey").field("len", &self.s.len()).finish_non_exhaustive()
    }
}

impl SifeMasterKey {
    pub fn public_key(&self) -> &SifePublicKey {
        &self.public
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    #[cfg(test)]
    pub(crate) fn secret(&self) -> &[BigUint] {
        &self.s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SifeCiphertext {
    pub ct0: GroupElement,
    pub cts: Vec<GroupElement>,
}

/// `dk_y = <y, s> mod q`, carried together with `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SifeDerivedKey {
    pub dk: BigUint,
    pub y: Vec<i64>,
}

pub fn setup<R: CryptoRng + RngCore + ?Sized>(ctx: &GroupContext, len: usize, rng: &mut R) -> Result<SifeMasterKey> {
    if len == 0 {
        return Err(Error::Dimension { expected: 1, actual: 0 });
    }
    let s: Vec<BigUint> = (0..len).map(|_| ctx.random_exponent(rng)).collect();
    let h = s.iter().map(|si| ctx.g_pow(si)).collect();
    Ok(SifeMasterKey { s, public: SifePublicKey { h } })
}

pub fn derive_key(ctx: &GroupContext, msk: &SifeMasterKey, y: &[i64]) -> Result<SifeDerivedKey> {
    if y.len() != msk.s.len() {
        return Err(Error::Dimension { expected: msk.s.len(), actual: y.len() });
    }
    Ok(SifeDerivedKey { dk: arith::inner_mod(y, &msk.s, ctx.order()), y: y.to_vec() })
}

pub fn encrypt<R: CryptoRng + RngCore + ?Sized>(
    ctx: &GroupContext,
    pk: &SifePublicKey,
    x: &[i64],
    rng: &mut R,
) -> Result<SifeCiphertext> {
    if x.len() != pk.h.len() {
        return Err(Error::Dimension { expected: pk.h.len(), actual: x.len() });
    }
    let r = ctx.random_exponent(rng);
    let ct0 = ctx.g_pow(&r);
    let cts = pk.h.iter().zip(x).map(|(h, &xi)| ctx.mul(&ctx.pow(h, &r), &ctx.g_pow_signed(xi))).collect();
    Ok(SifeCiphertext { ct0, cts })
}

/// `g^{<x, y>}` without the discrete log.
pub fn decrypt_element(ctx: &GroupContext, ct: &SifeCiphertext, key: &SifeDerivedKey) -> Result<GroupElement> {
    if key.y.len() != ct.cts.len() {
        return Err(Error::Dimension { expected: ct.cts.len(), actual: key.y.len() });
    }
    let num = ctx.multi_pow_signed(&ct.cts, &key.y);
    let den = ctx.pow(&ct.ct0, &key.dk);
    Ok(ctx.mul(&num, &ctx.inv(&den)))
}

/// Recovers `<x, y>`, which must satisfy `|<x, y>| <= bound`.
pub fn decrypt(
    ctx: &GroupContext,
    ct: &SifeCiphertext,
    key: &SifeDerivedKey,
    table: &DlogTable,
    bound: u64,
) -> Result<i64> {
    dlog(ctx, table, &decrypt_element(ctx, ct, key)?, bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::fixture;
    use num_traits::Zero;
    use proptest::prelude::*;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn setup_shapes_and_public_consistency() {
        let (ctx, _) = fixture();
        let one = setup(ctx, 1, &mut rng(1)).unwrap();
        assert_eq!((one.len(), one.public_key().len()), (1, 1));
        let eight = setup(ctx, 8, &mut rng(2)).unwrap();
        for (h, s) in eight.public_key().h.iter().zip(eight.secret()) {
            assert_eq!(h, &ctx.g_pow(s));
        }
        let again = setup(ctx, 8, &mut rng(3)).unwrap();
        assert_ne!(eight.secret(), again.secret());
        assert!(setup(ctx, 0, &mut rng(4)).is_err());
    }

    #[test]
    fn derived_key_examples() {
        let (ctx, _) = fixture();
        let msk = setup(ctx, 4, &mut rng(5)).unwrap();
        assert!(derive_key(ctx, &msk, &[0; 4]).unwrap().dk.is_zero());
        assert_eq!(derive_key(ctx, &msk, &[1, 0, 0, 0]).unwrap().dk, msk.secret()[0]);
        // independent oracle: accumulate sum y_i s_i in Z_q with explicit negation
        let y = [7i64, -3, 0, 12];
        let q = ctx.order();
        let mut acc = BigUint::zero();
        for (yi, si) in y.iter().zip(msk.secret()) {
            let term = (BigUint::from(yi.unsigned_abs()) * si) % q;
            acc = if *yi < 0 { (acc + q - term) % q } else { (acc + term) % q };
        }
        assert_eq!(derive_key(ctx, &msk, &y).unwrap().dk, acc);
        assert_eq!(derive_key(ctx, &msk, &[1, 2]), Err(Error::Dimension { expected: 4, actual: 2 }));
    }

    #[test]
    fn encryption_is_randomized() {
        let (ctx, _) = fixture();
        let msk = setup(ctx, 3, &mut rng(6)).unwrap();
        let mut r = rng(7);
        let a = encrypt(ctx, msk.public_key(), &[1, 2, 3], &mut r).unwrap();
        let b = encrypt(ctx, msk.public_key(), &[1, 2, 3], &mut r).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.cts.len() + 1, 4);
        let zero = encrypt(ctx, msk.public_key(), &[0, 0, 0], &mut r).unwrap();
        // a zero plaintext leaves only the h_i^r masks, which any key cancels
        let key = derive_key(ctx, &msk, &[1, -1, 5]).unwrap();
        assert_eq!(decrypt_element(ctx, &zero, &key).unwrap(), ctx.identity());
        assert!(encrypt(ctx, msk.public_key(), &[1], &mut r).is_err());
    }

    #[test]
    fn decrypt_examples() {
        let (ctx, table) = fixture();
        let mut r = rng(8);
        let msk = setup(ctx, 3, &mut r).unwrap();
        let ct = encrypt(ctx, msk.public_key(), &[1, 2, 3], &mut r).unwrap();
        let key = derive_key(ctx, &msk, &[1, 1, 1]).unwrap();
        assert_eq!(decrypt(ctx, &ct, &key, table, 100).unwrap(), 6);
        let key = derive_key(ctx, &msk, &[0, 0, 0]).unwrap();
        assert_eq!(decrypt(ctx, &ct, &key, table, 100).unwrap(), 0);

        let msk = setup(ctx, 2, &mut r).unwrap();
        let ct = encrypt(ctx, msk.public_key(), &[-2, 5], &mut r).unwrap();
        let key = derive_key(ctx, &msk, &[3, 1]).unwrap();
        assert_eq!(decrypt(ctx, &ct, &key, table, 100).unwrap(), -1);
    }

    #[test]
    fn overflow_surfaces_as_dlog_error() {
        let (ctx, table) = fixture();
        let mut r = rng(9);
        let msk = setup(ctx, 1, &mut r).unwrap();
        let ct = encrypt(ctx, msk.public_key(), &[1_000], &mut r).unwrap();
        let key = derive_key(ctx, &msk, &[1_000]).unwrap();
        assert_eq!(decrypt(ctx, &ct, &key, table, 999_999), Err(Error::DlogOutOfBound { bound: 999_999 }));
    }

    fn vectors() -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
        (1usize..=16).prop_flat_map(|n| {
            (proptest::collection::vec(-1024i64..=1024, n), proptest::collection::vec(-1024i64..=1024, n))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn correctness((x, y) in vectors(), seed in any::<u64>()) {
            let (ctx, table) = fixture();
            let mut r = rng(seed);
            let msk = setup(ctx, x.len(), &mut r).unwrap();
            let ct = encrypt(ctx, msk.public_key(), &x, &mut r).unwrap();
            let key = derive_key(ctx, &msk, &y).unwrap();
            let expect: i64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            prop_assert_eq!(decrypt(ctx, &ct, &key, table, 1 << 25).unwrap(), expect);
        }

        #[test]
        fn linear_in_key_vector((x, y1) in vectors(), seed in any::<u64>()) {
            let (ctx, table) = fixture();
            let mut r = rng(seed);
            let y2: Vec<i64> = y1.iter().map(|v| (v * 7 + 3) % 1000).collect();
            let sum: Vec<i64> = y1.iter().zip(&y2).map(|(a, b)| a + b).collect();
            let msk = setup(ctx, x.len(), &mut r).unwrap();
            let ct = encrypt(ctx, msk.public_key(), &x, &mut r).unwrap();
            let dec = |y: &[i64]| decrypt(ctx, &ct, &derive_key(ctx, &msk, y).unwrap(), table, 1 << 26).unwrap();
            prop_assert_eq!(dec(&y1) + dec(&y2), dec(&sum));
        }
    }
}
