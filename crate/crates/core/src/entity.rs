//! Record alignment across parties from Bloom-filter identifier encodings.
//!
//! Each party encodes identifier bigrams into a keyed CLK; the aggregator
//! compares CLKs with the Dice coefficient, matches greedily and sends each
//! party a map from local rows to aligned global rows.

use alloc::string::String;
use alloc::vec::Vec;

use hmac::{Hmac, Mac};
use sha2::Sha256;

use crate::error::{Error, Result};

pub const DEFAULT_CLK_BITS: usize = 1024;
pub const DEFAULT_HASHES: usize = 2;
pub const DEFAULT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clk {
    words: Vec<u64>,
    len: usize,
}

impl Clk {
    pub fn zeros(len: usize) -> Self {
        Self { words: alloc::vec![0; len.div_ceil(64)], len }
    }

    pub fn from_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Wire("CLK byte length does not match bit length"));
        }
        let mut clk = Self::zeros(len);
        for (i, b) in bytes.iter().enumerate() {
            clk.words[i / 8] |= u64::from(*b) << (8 * (i % 8));
        }
        if clk.words.last().is_some_and(|w| !len.is_multiple_of(64) && w >> (len % 64) != 0) {
            return Err(Error::Wire("CLK has bits beyond its length"));
        }
        Ok(clk)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        (0..self.len.div_ceil(8)).map(|i| (self.words[i / 8] >> (8 * (i % 8))) as u8).collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }
}

fn bigrams(field: &str) -> Vec<[char; 2]> {
    let padded: Vec<char> =
        core::iter::once(' ').chain(field.chars().flat_map(char::to_lowercase)).chain(core::iter::once(' ')).collect();
    padded.windows(2).map(|w| [w[0], w[1]]).collect()
}

/// Encodes identifier fields into an `len`-bit CLK with `hashes` keyed hash functions.
///
/// Bit positions use double hashing, `h1 + i * h2 mod len`, with `h1` and `h2`
/// taken from one HMAC-SHA256 of the field index and bigram.
pub fn build_clk(fields: &[&str], len: usize, hashes: usize, key: &[u8]) -> Result<Clk> {
    if len == 0 || hashes == 0 {
        return Err(Error::Resolution("CLK length and hash count must be positive"));
    }
    if fields.iter().all(|f| f.trim().is_empty()) {
        return Err(Error::Resolution("empty identifier"));
    }
    let mut clk = Clk::zeros(len);
    let mut buf = [0u8; 8];
    for (fi, field) in fields.iter().enumerate() {
        for gram in bigrams(field) {
            let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("HMAC accepts any key length");
            mac.update(&(fi as u32).to_be_bytes());
            mac.update(gram[0].encode_utf8(&mut buf).as_bytes());
            mac.update(gram[1].encode_utf8(&mut buf).as_bytes());
            let digest = mac.finalize().into_bytes();
            let h1 = u64::from_be_bytes(digest[..8].try_into().expect("32-byte digest"));
            let h2 = u64::from_be_bytes(digest[8..16].try_into().expect("32-byte digest"));
            for i in 0..hashes as u64 {
                clk.set((h1.wrapping_add(i.wrapping_mul(h2)) % len as u64) as usize);
            }
        }
    }
    Ok(clk)
}

/// `2 |a & b| / (|a| + |b|)`; two empty filters score 0.
pub fn dice(a: &Clk, b: &Clk) -> Result<f64> {
    if a.len != b.len {
        return Err(Error::Dimension { expected: a.len, actual: b.len });
    }
    let both: u32 = a.words.iter().zip(&b.words).map(|(x, y)| (x & y).count_ones()).sum();
    let total = a.count_ones() + b.count_ones();
    if total == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * f64::from(both) / f64::from(total))
}

/// For each party, local row index to aligned global row, `None` if unmatched.
pub type Permutation = Vec<Option<usize>>;

/// Greedy best-first matching of two CLK lists above `threshold`.
///
/// Candidate pairs are taken in order of descending score, ties broken by the
/// lowest reference index and then the lowest candidate index.
fn greedy_pairs(reference: &[Clk], other: &[Clk], threshold: f64) -> Result<Vec<Option<usize>>> {
    let mut pairs = Vec::new();
    for (a, ca) in reference.iter().enumerate() {
        for (b, cb) in other.iter().enumerate() {
            let score = dice(ca, cb)?;
            if score >= threshold {
                pairs.push((score, a, b));
            }
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut ref_to_other = alloc::vec![None; reference.len()];
    let mut used = alloc::vec![false; other.len()];
    for (_, a, b) in pairs {
        if ref_to_other[a].is_none() && !used[b] {
            ref_to_other[a] = Some(b);
            used[b] = true;
        }
    }
    Ok(ref_to_other)
}

/// Aligns all parties against party 0. Global rows are the reference rows
/// matched in every party, numbered in reference order.
pub fn match_and_permute(clks: &[Vec<Clk>], threshold: f64) -> Result<Vec<Permutation>> {
    if clks.len() < 2 {
        return Err(Error::Resolution("at least two parties must submit CLKs"));
    }
    let reference = &clks[0];
    let links = clks[1..].iter().map(|other| greedy_pairs(reference, other, threshold)).collect::<Result<Vec<_>>>()?;
    assemble(reference.len(), clks.iter().map(Vec::len), &links)
}

fn assemble(
    reference_len: usize,
    lengths: impl Iterator<Item = usize>,
    links: &[Vec<Option<usize>>],
) -> Result<Vec<Permutation>> {
    let mut perms: Vec<Permutation> = lengths.map(|l| alloc::vec![None; l]).collect();
    let mut next = 0;
    for a in 0..reference_len {
        if links.iter().all(|l| l[a].is_some()) {
            perms[0][a] = Some(next);
            for (i, l) in links.iter().enumerate() {
                perms[i + 1][l[a].expect("checked above")] = Some(next);
            }
            next += 1;
        }
    }
    if next == 0 {
        return Err(Error::Resolution("no records common to all parties"));
    }
    Ok(perms)
}

/// Alignment by exact identifier equality, with the same global numbering as
/// [`match_and_permute`]. Duplicate identifiers match their first occurrence.
pub fn exact_join(ids: &[Vec<String>]) -> Result<Vec<Permutation>> {
    if ids.len() < 2 {
        return Err(Error::Resolution("at least two parties must submit identifiers"));
    }
    let links: Vec<Vec<Option<usize>>> = ids[1..]
        .iter()
        .map(|other| {
            let mut used = alloc::vec![false; other.len()];
            ids[0]
                .iter()
                .map(|id| {
                    let b = other.iter().enumerate().position(|(b, o)| !used[b] && o == id)?;
                    used[b] = true;
                    Some(b)
                })
                .collect()
        })
        .collect();
    assemble(ids[0].len(), ids.iter().map(Vec::len), &links)
}

/// Number of aligned rows.
pub fn aligned_rows(perm: &Permutation) -> usize {
    perm.iter().flatten().count()
}

/// Reorders `rows` so that aligned global row `g` comes at position `g`; unmatched rows are dropped.
pub fn apply_permutation<T: Clone>(rows: &[T], perm: &Permutation) -> Result<Vec<T>> {
    if rows.len() != perm.len() {
        return Err(Error::Dimension { expected: perm.len(), actual: rows.len() });
    }
    let n = aligned_rows(perm);
    let mut out: Vec<Option<T>> = alloc::vec![None; n];
    for (row, target) in rows.iter().zip(perm) {
        if let Some(g) = *target {
            if g >= n || out[g].is_some() {
                return Err(Error::Resolution("permutation is not injective"));
            }
            out[g] = Some(row.clone());
        }
    }
    Ok(out.into_iter().map(|r| r.expect("every global row is filled")).collect())
}
