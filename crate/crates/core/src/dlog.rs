//! Bounded discrete logarithms: a precomputed hash table of `g^e` for
//! `|e| <= T`, and a baby-step giant-step fallback that reuses the table as
//! its baby steps when the exponent lies outside it.

use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::group::{GroupContext, GroupElement};

/// Packed slots never exceed this half-width (offsets must fit 31 bits).
pub const MAX_TABLE_HALF_WIDTH: u64 = (1 << 30) - 1;

const HASH_MUL: u64 = 0x9e37_79b9_7f4a_7c15;

/// Precomputed map `g^e -> e` for every `e` in `[-T, T]`.
///
/// Each slot packs a 32-bit fingerprint of the element with the exponent
/// offset, so a table with `2T + 1` entries costs 16 bytes per entry at load
/// one half. Fingerprint hits are confirmed by exponentiation before being
/// reported.
pub struct DlogTable {
    half_width: u64,
    slots: Vec<u64>,
    shift: u32,
    modulus: BigUint,
    generator: BigUint,
}

impl core::fmt::Debug for DlogTable {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("DlogTable").field("half_width", &self.half_width).field("slots", &self.slots.len()).finish()
    }
}

/// Outcome of a single table probe, with the number of slots inspected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub exponent: Option<i64>,
    pub slots_inspected: usize,
}

impl DlogTable {
    /// Builds the table for `|e| <= half_width`.
    pub fn build(ctx: &GroupContext, half_width: u64) -> Result<Self> {
        let mut table = Self::empty(ctx, half_width)?;
        let t = half_width as i64;
        match ctx.word_mont() {
            Some((m, g)) => {
                let mut cur = m.pow(g, ctx_q_word(ctx) - half_width % ctx_q_word(ctx));
                for e in -t..=t {
                    table.insert(m.from_mont(cur), e);
                    cur = m.mul(cur, g);
                }
            }
            None => {
                let mut cur = ctx.g_pow_signed(-t);
                let g = ctx.generator();
                for e in -t..=t {
                    table.insert_big(&cur, e);
                    cur = ctx.mul(&cur, &g);
                }
            }
        }
        Ok(table)
    }

    /// Rebuilds a table from persisted `(element, exponent)` records.
    pub fn from_records<I>(ctx: &GroupContext, half_width: u64, records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BigUint, i64)>,
    {
        let mut table = Self::empty(ctx, half_width)?;
        let mut count = 0u64;
        for (value, e) in records {
            if e.unsigned_abs() > half_width {
                return Err(Error::Wire("dlog record exponent outside table range"));
            }
            // Spot-check a sparse subset; every hit is re-verified on lookup anyway.
            if count.is_multiple_of(65_537) && ctx.g_pow_signed(e).value() != &value {
                return Err(Error::Wire("dlog record does not match the group"));
            }
            match ctx.word_mont() {
                Some(_) => {
                    let v = value.to_u64().ok_or(Error::Wire("dlog record element too wide"))?;
                    table.insert(v, e);
                }
                None => table.insert_big(&GroupElement(value), e),
            }
            count += 1;
        }
        if count != 2 * half_width + 1 {
            return Err(Error::Wire("dlog record count does not match the table range"));
        }
        Ok(table)
    }

    fn empty(ctx: &GroupContext, half_width: u64) -> Result<Self> {
        if half_width > MAX_TABLE_HALF_WIDTH {
            return Err(Error::Config(alloc::format!(
                "dlog table half-width {half_width} exceeds {MAX_TABLE_HALF_WIDTH}"
            )));
        }
        if u128::from(half_width) > ctx.max_dlog_bound() {
            return Err(Error::BoundTooLarge { bound: u128::from(half_width) });
        }
        let entries = 2 * half_width + 1;
        let capacity = (entries + entries / 2).next_power_of_two().max(16);
        Ok(Self {
            half_width,
            slots: alloc::vec![0u64; capacity as usize],
            shift: 64 - capacity.trailing_zeros(),
            modulus: ctx.modulus().clone(),
            generator: ctx.generator().value().clone(),
        })
    }

    /// Largest `|e|` stored.
    pub fn bound(&self) -> u64 {
        self.half_width
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn generator(&self) -> &BigUint {
        &self.generator
    }

    /// Heap footprint of the slot array in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.slots.len() * core::mem::size_of::<u64>()
    }

    /// Every stored pair, regenerated in exponent order.
    pub fn records<'a>(&'a self, ctx: &'a GroupContext) -> impl Iterator<Item = (BigUint, i64)> + 'a {
        let t = self.half_width as i64;
        let g = ctx.generator();
        let mut cur = ctx.g_pow_signed(-t);
        (-t..=t).map(move |e| {
            let out = (cur.value().clone(), e);
            cur = ctx.mul(&cur, &g);
            out
        })
    }

    #[inline]
    fn locate(&self, key: u64) -> (usize, u32) {
        let h = key.wrapping_mul(HASH_MUL);
        ((h >> self.shift) as usize, (h as u32) | 1)
    }

    // `key` is the element's canonical low word.
    fn insert(&mut self, key: u64, e: i64) {
        let (mut idx, fp) = self.locate(key);
        let mask = self.slots.len() - 1;
        let packed = (u64::from(fp) << 32) | ((e + self.half_width as i64) as u64 + 1);
        while self.slots[idx] != 0 {
            idx = (idx + 1) & mask;
        }
        self.slots[idx] = packed;
    }

    fn insert_big(&mut self, a: &GroupElement, e: i64) {
        self.insert(low_word(a.value()), e);
    }

    /// Candidate exponents whose fingerprint matches `key`.
    #[inline]
    fn probe_key(&self, key: u64, mut confirm: impl FnMut(i64) -> bool) -> Probe {
        let (mut idx, fp) = self.locate(key);
        let mask = self.slots.len() - 1;
        let mut inspected = 0;
        loop {
            let slot = self.slots[idx];
            inspected += 1;
            if slot == 0 {
                return Probe { exponent: None, slots_inspected: inspected };
            }
            if (slot >> 32) as u32 == fp {
                let e = (slot & 0xffff_ffff) as i64 - 1 - self.half_width as i64;
                if confirm(e) {
                    return Probe { exponent: Some(e), slots_inspected: inspected };
                }
            }
            idx = (idx + 1) & mask;
        }
    }

    /// O(1) table lookup of `h`.
    pub fn lookup(&self, ctx: &GroupContext, h: &GroupElement) -> Option<i64> {
        self.probe(ctx, h).exponent
    }

    /// Table lookup reporting how many slots were inspected.
    pub fn probe(&self, ctx: &GroupContext, h: &GroupElement) -> Probe {
        match ctx.word_mont() {
            Some((m, g)) => {
                let v = h.value().to_u64().unwrap_or(0);
                let hm = m.to_mont(v);
                let q = ctx_q_word(ctx);
                self.probe_key(v, |e| m.pow(g, exponent_word(e, q)) == hm)
            }
            None => self.probe_key(low_word(h.value()), |e| &ctx.g_pow_signed(e) == h),
        }
    }

    fn matches(&self, ctx: &GroupContext) -> bool {
        ctx.modulus() == &self.modulus && ctx.generator().value() == &self.generator
    }
}

fn low_word(v: &BigUint) -> u64 {
    v.iter_u64_digits().next().unwrap_or(0)
}

fn ctx_q_word(ctx: &GroupContext) -> u64 {
    ctx.order().to_u64().expect("word backend order fits 64 bits")
}

#[inline]
fn exponent_word(e: i64, q: u64) -> u64 {
    if e >= 0 {
        e as u64 % q
    } else {
        q - (e.unsigned_abs() % q)
    }
}

/// Recovers `f` with `h = g^f` and `|f| <= bound`.
///
/// The table answers directly when `|f| <= T`; otherwise giant steps of
/// `g^(2T+1)` walk outward from zero in both directions until the table hits
/// or the bound is exhausted.
pub fn dlog(ctx: &GroupContext, table: &DlogTable, h: &GroupElement, bound: u64) -> Result<i64> {
    if !table.matches(ctx) {
        return Err(Error::InvalidGroup("dlog table built for a different group"));
    }
    if u128::from(bound) > ctx.max_dlog_bound() {
        return Err(Error::BoundTooLarge { bound: u128::from(bound) });
    }
    let out_of_bound = Error::DlogOutOfBound { bound };
    if let Some(e) = table.lookup(ctx, h) {
        return if e.unsigned_abs() <= bound { Ok(e) } else { Err(out_of_bound) };
    }
    let step = 2 * table.half_width + 1;
    let max_steps = if bound <= table.half_width { 0 } else { (bound - table.half_width).div_ceil(step) };
    let q = ctx.order().to_i128();
    // Candidates are only defined mod q; report the symmetric representative.
    let finish = |f: i128| -> Option<i64> {
        let r = match q {
            Some(q) => {
                let r = f.rem_euclid(q);
                if r > q / 2 {
                    r - q
                } else {
                    r
                }
            }
            None => f,
        };
        (r.unsigned_abs() <= u128::from(bound)).then_some(r as i64)
    };
    match ctx.word_mont() {
        Some((m, g)) => {
            let q = ctx_q_word(ctx);
            let giant = m.pow(g, step % q);
            let giant_inv = m.pow(giant, q - 1);
            let hm = m.to_mont(h.value().to_u64().unwrap_or(0));
            let mut down = hm;
            let mut up = hm;
            for j in 1..=max_steps {
                down = m.mul(down, giant_inv);
                up = m.mul(up, giant);
                let shift = i128::from(j) * i128::from(step);
                let target_down = m.from_mont(down);
                let probe = table.probe_key(target_down, |e| m.pow(g, exponent_word(e, q)) == down);
                if let Some(e) = probe.exponent {
                    return finish(shift + i128::from(e)).ok_or(out_of_bound);
                }
                let target_up = m.from_mont(up);
                let probe = table.probe_key(target_up, |e| m.pow(g, exponent_word(e, q)) == up);
                if let Some(e) = probe.exponent {
                    return finish(-shift + i128::from(e)).ok_or(out_of_bound);
                }
            }
        }
        None => {
            let giant = ctx.g_pow(&BigUint::from(step));
            let giant_inv = ctx.inv(&giant);
            let mut down = h.clone();
            let mut up = h.clone();
            for j in 1..=max_steps {
                down = ctx.mul(&down, &giant_inv);
                up = ctx.mul(&up, &giant);
                let shift = i128::from(j) * i128::from(step);
                if let Some(e) = table.lookup(ctx, &down) {
                    return finish(shift + i128::from(e)).ok_or(out_of_bound);
                }
                if let Some(e) = table.lookup(ctx, &up) {
                    return finish(-shift + i128::from(e)).ok_or(out_of_bound);
                }
            }
        }
    }
    Err(out_of_bound)
}

/// Classic baby-step giant-step over `[-bound, bound]` with its own baby-step
/// list, independent of any [`DlogTable`].
pub fn bsgs(ctx: &GroupContext, h: &GroupElement, bound: u64) -> Result<i64> {
    if u128::from(bound) > ctx.max_dlog_bound() {
        return Err(Error::BoundTooLarge { bound: u128::from(bound) });
    }
    let span = 2 * u128::from(bound) + 1;
    let m = isqrt_ceil(span) as u64;
    let g = ctx.generator();
    let mut baby = Vec::with_capacity(m as usize);
    let mut cur = ctx.identity();
    for j in 0..m {
        baby.push((cur.value().clone(), j));
        cur = ctx.mul(&cur, &g);
    }
    baby.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    // shift into [0, 2 * bound]
    let mut gamma = ctx.mul(h, &ctx.g_pow(&BigUint::from(bound)));
    let giant_inv = ctx.inv(&ctx.g_pow(&BigUint::from(m)));
    let giants = (span as u64).div_ceil(m);
    for i in 0..giants {
        if let Ok(pos) = baby.binary_search_by(|probe| probe.0.cmp(gamma.value())) {
            let shifted = u128::from(i) * u128::from(m) + u128::from(baby[pos].1);
            if shifted < span {
                return Ok((shifted as i128 - i128::from(bound)) as i64);
            }
        }
        gamma = ctx.mul(&gamma, &giant_inv);
    }
    Err(Error::DlogOutOfBound { bound })
}

fn isqrt_ceil(n: u128) -> u128 {
    let mut r = libm::sqrt(n as f64) as u128;
    while r * r > n {
        r -= 1;
    }
    while r * r < n {
        r += 1;
    }
    r.max(1)
}
