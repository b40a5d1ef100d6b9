//! Crypto microbenchmarks: exponentiation, both FE schemes and dlog recovery.

use std::time::Instant;

use fedv_core::dlog::{self, DlogTable};
use fedv_core::group::{group_gen, GroupContext};
use fedv_core::{mife, sife};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchLine {
    pub name: String,
    pub iterations: u32,
    pub mean_us: f64,
    pub max_us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchParams {
    pub group_bits: u32,
    pub vector_len: usize,
    pub parties: usize,
    pub table_half_width: u64,
    pub fallback_bound: u64,
    pub iterations: u32,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            group_bits: 64,
            vector_len: 32,
            parties: 3,
            table_half_width: 1 << 16,
            fallback_bound: 1 << 20,
            iterations: 50,
        }
    }
}

fn time<T>(name: &str, iterations: u32, mut f: impl FnMut(u32) -> Result<T>) -> Result<BenchLine> {
    let mut total = 0.0;
    let mut max: f64 = 0.0;
    for i in 0..iterations {
        let t = Instant::now();
        std::hint::black_box(f(i)?);
        let us = t.elapsed().as_secs_f64() * 1e6;
        total += us;
        max = max.max(us);
    }
    Ok(BenchLine { name: name.into(), iterations, mean_us: total / f64::from(iterations.max(1)), max_us: max })
}

pub fn run(p: &BenchParams) -> Result<Vec<BenchLine>> {
    let ctx: GroupContext = group_gen(p.group_bits, b"fedv bench")?;
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let table = DlogTable::build(&ctx, p.table_half_width)?;
    let it = p.iterations;
    let mut lines = Vec::new();

    let e = ctx.random_exponent(&mut rng);
    lines.push(time("group_pow", it, |_| Ok(ctx.g_pow(&e)))?);

    let msk = sife::setup(&ctx, p.vector_len, &mut rng)?;
    let x: Vec<i64> = (0..p.vector_len).map(|_| rng.gen_range(-1000..=1000)).collect();
    let y: Vec<i64> = (0..p.vector_len).map(|_| rng.gen_range(-1000..=1000)).collect();
    let key = sife::derive_key(&ctx, &msk, &y)?;
    let ct = sife::encrypt(&ctx, msk.public_key(), &x, &mut rng)?;
    let bound = 1000 * 1000 * p.vector_len as u64;
    lines.push(time("sife_encrypt", it, |_| Ok(sife::encrypt(&ctx, msk.public_key(), &x, &mut rng)?))?);
    lines.push(time("sife_decrypt", it, |_| Ok(sife::decrypt(&ctx, &ct, &key, &table, bound)?))?);

    let lengths = vec![1; p.parties];
    let mmsk = mife::setup(&ctx, &lengths, &mut rng)?;
    let keys = (1..=p.parties).map(|i| mife::skdist(&ctx, &mmsk, i)).collect::<fedv_core::Result<Vec<_>>>()?;
    let dk = mife::derive_key(&ctx, &mmsk, &vec![1; p.parties])?;
    let cts = keys
        .iter()
        .map(|k| mife::encrypt(&ctx, k, &[rng.gen_range(-1000..=1000)], &mut rng).map(Some))
        .collect::<fedv_core::Result<Vec<_>>>()?;
    lines.push(time("mife_encrypt", it, |_| Ok(mife::encrypt(&ctx, &keys[0], &[5], &mut rng)?))?);
    lines.push(time("mife_decrypt", it, |_| Ok(mife::decrypt(&ctx, &cts, &dk, &table, 1000 * p.parties as u64)?))?);

    let inside: Vec<_> = (0..it)
        .map(|_| ctx.g_pow_signed(rng.gen_range(-(p.table_half_width as i64)..=p.table_half_width as i64)))
        .collect();
    lines.push(time("dlog_table_hit", it, |i| Ok(dlog::dlog(&ctx, &table, &inside[i as usize], p.table_half_width)?))?);
    let outside: Vec<_> = (0..it)
        .map(|_| ctx.g_pow_signed(rng.gen_range(-(p.fallback_bound as i64)..=p.fallback_bound as i64)))
        .collect();
    lines
        .push(time("dlog_giant_steps", it, |i| Ok(dlog::dlog(&ctx, &table, &outside[i as usize], p.fallback_bound)?))?);
    lines.push(time("bsgs_standalone", it.min(10), |i| Ok(dlog::bsgs(&ctx, &outside[i as usize], p.fallback_bound)?))?);
    Ok(lines)
}
