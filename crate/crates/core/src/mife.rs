//! Multi-input inner-product functional encryption for `n` slots.
//!
//! Setup draws `a = (1, a)`, per-slot matrices `W_i` (`len_i x 2`) and pads
//! `u_i`. Slot `i` encrypts `x_i` as `t_i = g^{a r}`, `c_i = g^{x_i + u_i + W_i a r}`.
//! A key for `y = (y_1 | ... | y_n)` is `d_i = y_i^T W_i` plus `z = sum y_i^T u_i`.
//! Slots are numbered from 1.

use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::Zero;
use rand_core::{CryptoRng, RngCore};

use crate::arith;
use crate::dlog::{dlog, DlogTable};
use crate::error::{Error, Result};
use crate::group::{GroupContext, GroupElement};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MifePublicKey {
    /// `(g, g^a)`.
    pub ga: [GroupElement; 2],
    /// `g^{W_i a}` per slot.
    pub gwa: Vec<Vec<GroupElement>>,
}

impl MifePublicKey {
    pub fn slots(&self) -> usize {
        self.gwa.len()
    }

    pub fn slot_lengths(&self) -> Vec<usize> {
        self.gwa.iter().map(Vec::len).collect()
    }
}

#[derive(Clone)]
pub struct MifeMasterKey {
    a: BigUint,
    w: Vec<Vec<[BigUint; 2]>>,
    u: Vec<Vec<BigUint>>,
    public: MifePublicKey,
}

impl core::fmt::Debug for MifeMasterKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("MifeMasterKey").field("lengths", &self.public.slot_lengths()).finish_non_exhaustive()
    }
}

/// Key material handed to the party owning one slot.
#[derive(Clone, PartialEq, Eq)]
pub struct MifePartyKey {
    pub slot: usize,
    pub ga: [GroupElement; 2],
    wa: Vec<BigUint>,
    u: Vec<BigUint>,
}

impl core::fmt::Debug for MifePartyKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("MifePartyKey").field("slot", &self.slot).field("len", &self.u.len()).finish_non_exhaustive()
    }
}

impl MifePartyKey {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub(crate) fn from_parts(slot: usize, ga: [GroupElement; 2], wa: Vec<BigUint>, u: Vec<BigUint>) -> Self {
        Self { slot, ga, wa, u }
    }

    pub(crate) fn parts(&self) -> (&[BigUint], &[BigUint]) {
        (&self.wa, &self.u)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MifeCiphertext {
    pub slot: usize,
    pub t: [GroupElement; 2],
    pub c: Vec<GroupElement>,
}

impl MifeCiphertext {
    /// Identity-element placeholder for an absent slot. Only valid under a
    /// key whose weights for that slot are all zero.
    pub fn dummy(ctx: &GroupContext, slot: usize, len: usize) -> Self {
        Self { slot, t: [ctx.identity(), ctx.identity()], c: alloc::vec![ctx.identity(); len] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MifeDerivedKey {
    pub d: Vec<[BigUint; 2]>,
    pub z: BigUint,
    pub y: Vec<i64>,
    pub lengths: Vec<usize>,
}

impl MifeDerivedKey {
    /// The weights for slot `slot` (1-based).
    pub fn slot_weights(&self, slot: usize) -> &[i64] {
        let start: usize = self.lengths[..slot - 1].iter().sum();
        &self.y[start..start + self.lengths[slot - 1]]
    }
}

pub fn setup<R: CryptoRng + RngCore + ?Sized>(
    ctx: &GroupContext,
    lengths: &[usize],
    rng: &mut R,
) -> Result<MifeMasterKey> {
    if lengths.is_empty() {
        return Err(Error::Dimension { expected: 1, actual: 0 });
    }
    if let Some(pos) = lengths.iter().position(|&l| l == 0) {
        return Err(Error::UnknownSlot(pos + 1));
    }
    let q = ctx.order();
    let a = ctx.random_exponent(rng);
    let mut w = Vec::with_capacity(lengths.len());
    let mut u = Vec::with_capacity(lengths.len());
    let mut gwa = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let wi: Vec<[BigUint; 2]> = (0..len).map(|_| [ctx.random_exponent(rng), ctx.random_exponent(rng)]).collect();
        let ui: Vec<BigUint> = (0..len).map(|_| ctx.random_exponent(rng)).collect();
        gwa.push(wi.iter().map(|row| ctx.g_pow(&row_dot_a(row, &a, q))).collect());
        w.push(wi);
        u.push(ui);
    }
    let ga = [ctx.generator(), ctx.g_pow(&a)];
    Ok(MifeMasterKey { a, w, u, public: MifePublicKey { ga, gwa } })
}

fn row_dot_a(row: &[BigUint; 2], a: &BigUint, q: &BigUint) -> BigUint {
    (&row[0] + &row[1] * a) % q
}

impl MifeMasterKey {
    pub fn public_key(&self) -> &MifePublicKey {
        &self.public
    }

    pub fn slots(&self) -> usize {
        self.w.len()
    }

    pub fn slot_lengths(&self) -> Vec<usize> {
        self.public.slot_lengths()
    }

    #[cfg(test)]
    pub(crate) fn pads(&self, slot: usize) -> &[BigUint] {
        &self.u[slot - 1]
    }

    #[cfg(test)]
    pub(crate) fn matrix(&self, slot: usize) -> &[[BigUint; 2]] {
        &self.w[slot - 1]
    }
}

/// Looks up the key for `slot` in `1..=n`; repeated calls return the same key.
pub fn skdist(ctx: &GroupContext, msk: &MifeMasterKey, slot: usize) -> Result<MifePartyKey> {
    if slot == 0 || slot > msk.w.len() {
        return Err(Error::UnknownSlot(slot));
    }
    let q = ctx.order();
    let wa = msk.w[slot - 1].iter().map(|row| row_dot_a(row, &msk.a, q)).collect();
    Ok(MifePartyKey { slot, ga: msk.public.ga.clone(), wa, u: msk.u[slot - 1].clone() })
}

pub fn derive_key(ctx: &GroupContext, msk: &MifeMasterKey, y: &[i64]) -> Result<MifeDerivedKey> {
    let lengths = msk.slot_lengths();
    let total: usize = lengths.iter().sum();
    if y.len() != total {
        return Err(Error::Dimension { expected: total, actual: y.len() });
    }
    let q = ctx.order();
    let mut d = Vec::with_capacity(lengths.len());
    let mut z_parts = Vec::with_capacity(total);
    let mut offset = 0;
    for (wi, ui) in msk.w.iter().zip(&msk.u) {
        let yi = &y[offset..offset + wi.len()];
        let col0: Vec<BigUint> = wi.iter().map(|row| row[0].clone()).collect();
        let col1: Vec<BigUint> = wi.iter().map(|row| row[1].clone()).collect();
        d.push([arith::inner_mod(yi, &col0, q), arith::inner_mod(yi, &col1, q)]);
        z_parts.push(arith::inner_mod(yi, ui, q));
        offset += wi.len();
    }
    let z = z_parts.into_iter().fold(BigUint::zero(), |acc, v| (acc + v) % q);
    Ok(MifeDerivedKey { d, z, y: y.to_vec(), lengths })
}

pub fn encrypt<R: CryptoRng + RngCore + ?Sized>(
    ctx: &GroupContext,
    key: &MifePartyKey,
    x: &[i64],
    rng: &mut R,
) -> Result<MifeCiphertext> {
    if x.len() != key.u.len() {
        return Err(Error::Dimension { expected: key.u.len(), actual: x.len() });
    }
    let q = ctx.order();
    let r = ctx.random_exponent(rng);
    let t = [ctx.pow(&key.ga[0], &r), ctx.pow(&key.ga[1], &r)];
    let c = x
        .iter()
        .zip(key.u.iter().zip(&key.wa))
        .map(|(&xi, (ui, wai))| ctx.g_pow(&((ctx.exponent(xi) + ui + wai * &r) % q)))
        .collect();
    Ok(MifeCiphertext { slot: key.slot, t, c })
}

/// `g^{<x, y>}` without the discrete log.
///
/// `cts[i]` holds the ciphertext of slot `i + 1`. A missing slot is replaced
/// by [`MifeCiphertext::dummy`] when all of its weights are zero.
pub fn decrypt_element(
    ctx: &GroupContext,
    cts: &[Option<MifeCiphertext>],
    key: &MifeDerivedKey,
) -> Result<GroupElement> {
    if cts.len() != key.lengths.len() {
        return Err(Error::Dimension { expected: key.lengths.len(), actual: cts.len() });
    }
    let mut num = ctx.identity();
    let mut den = ctx.g_pow(&key.z);
    for (i, entry) in cts.iter().enumerate() {
        let slot = i + 1;
        let weights = key.slot_weights(slot);
        let ct = match entry {
            Some(ct) => ct,
            None if weights.iter().all(|&w| w == 0) => continue,
            None => return Err(Error::MissingSlot(slot)),
        };
        if ct.slot != slot {
            return Err(Error::UnknownSlot(ct.slot));
        }
        if ct.c.len() != weights.len() {
            return Err(Error::Dimension { expected: weights.len(), actual: ct.c.len() });
        }
        num = ctx.mul(&num, &ctx.multi_pow_signed(&ct.c, weights));
        let [d0, d1] = &key.d[i];
        den = ctx.mul(&den, &ctx.mul(&ctx.pow(&ct.t[0], d0), &ctx.pow(&ct.t[1], d1)));
    }
    Ok(ctx.mul(&num, &ctx.inv(&den)))
}

/// Recovers the concatenated inner product, which must satisfy `|<x, y>| <= bound`.
pub fn decrypt(
    ctx: &GroupContext,
    cts: &[Option<MifeCiphertext>],
    key: &MifeDerivedKey,
    table: &DlogTable,
    bound: u64,
) -> Result<i64> {
    dlog(ctx, table, &decrypt_element(ctx, cts, key)?, bound)
}
