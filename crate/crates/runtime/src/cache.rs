//! On-disk cache of dlog tables keyed by `(p, g, T)`.
//!
//! Layout: magic, format version, `T`, length-prefixed `p` and `g`, record
//! count, then one record per stored exponent: length-prefixed big-endian
//! element bytes followed by the exponent as a signed 64-bit integer.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use fedv_core::dlog::DlogTable;
use fedv_core::group::GroupContext;
use num_bigint::BigUint;
use sha2::{Digest, Sha256};

use crate::error::{IoContext, Result, RuntimeError};

pub const CACHE_ENV: &str = "FEDV_DLOG_CACHE";
const MAGIC: &[u8; 6] = b"FVDLOG";
const VERSION: u32 = 1;

pub fn cache_file(dir: &Path, ctx: &GroupContext, half_width: u64) -> PathBuf {
    let mut h = Sha256::new();
    h.update(ctx.modulus().to_bytes_be());
    h.update([0]);
    h.update(ctx.generator().value().to_bytes_be());
    h.update(half_width.to_be_bytes());
    dir.join(format!("dlog-{}-{half_width}.bin", &hex::encode(h.finalize())[..16]))
}

fn put_bytes(w: &mut impl Write, b: &[u8]) -> std::io::Result<()> {
    w.write_all(&(b.len() as u32).to_be_bytes())?;
    w.write_all(b)
}

pub fn save(path: &Path, ctx: &GroupContext, table: &DlogTable) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp).at(&tmp)?);
        let io = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            w.write_all(MAGIC)?;
            w.write_all(&VERSION.to_be_bytes())?;
            w.write_all(&table.bound().to_be_bytes())?;
            put_bytes(w, &ctx.modulus().to_bytes_be())?;
            put_bytes(w, &ctx.generator().value().to_bytes_be())?;
            w.write_all(&(2 * table.bound() + 1).to_be_bytes())?;
            for (element, e) in table.records(ctx) {
                let bytes = element.to_bytes_be();
                w.write_all(&(bytes.len() as u16).to_be_bytes())?;
                w.write_all(&bytes)?;
                w.write_all(&e.to_be_bytes())?;
            }
            w.flush()
        };
        io(&mut w).at(&tmp)?;
    }
    std::fs::rename(&tmp, path).at(path)
}

fn read_array<const N: usize>(r: &mut impl Read) -> std::io::Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_vec(r: &mut impl Read, len: usize) -> std::io::Result<Vec<u8>> {
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn load(path: &Path, ctx: &GroupContext, half_width: u64) -> Result<DlogTable> {
    let mut r = BufReader::new(File::open(path).at(path)?);
    let bad = |m: &str| RuntimeError::Cache(format!("{}: {m}", path.display()));
    if &read_array::<6>(&mut r).at(path)? != MAGIC {
        return Err(bad("not a dlog table"));
    }
    if u32::from_be_bytes(read_array(&mut r).at(path)?) != VERSION {
        return Err(bad("unsupported version"));
    }
    if u64::from_be_bytes(read_array(&mut r).at(path)?) != half_width {
        return Err(bad("bound mismatch"));
    }
    for expected in [ctx.modulus().clone(), ctx.generator().value().clone()] {
        let len = u32::from_be_bytes(read_array(&mut r).at(path)?) as usize;
        if len > 4096 || BigUint::from_bytes_be(&read_vec(&mut r, len).at(path)?) != expected {
            return Err(bad("group mismatch"));
        }
    }
    let count = u64::from_be_bytes(read_array(&mut r).at(path)?);
    if count != 2 * half_width + 1 {
        return Err(bad("record count mismatch"));
    }
    let mut failure = None;
    let records = (0..count).map_while(|_| {
        let rec = (|| -> std::io::Result<(BigUint, i64)> {
            let len = u16::from_be_bytes(read_array(&mut r)?) as usize;
            let element = BigUint::from_bytes_be(&read_vec(&mut r, len)?);
            Ok((element, i64::from_be_bytes(read_array(&mut r)?)))
        })();
        rec.map_err(|e| failure = Some(e)).ok()
    });
    let table = DlogTable::from_records(ctx, half_width, records);
    if let Some(e) = failure {
        return Err(RuntimeError::Io { path: path.into(), source: e });
    }
    Ok(table?)
}

/// Loads the table from `dir` when cached, otherwise builds and stores it.
/// Without a directory the table is simply built.
pub fn table(ctx: &GroupContext, half_width: u64, dir: Option<&Path>) -> Result<DlogTable> {
    let Some(dir) = dir else { return Ok(DlogTable::build(ctx, half_width)?) };
    let path = cache_file(dir, ctx, half_width);
    if path.exists() {
        return load(&path, ctx, half_width);
    }
    let table = DlogTable::build(ctx, half_width)?;
    std::fs::create_dir_all(dir).at(dir)?;
    save(&path, ctx, &table)?;
    Ok(table)
}

pub fn env_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fedv_core::dlog;
    use fedv_core::group::group_gen;

    #[test]
    fn roundtrip_through_disk() {
        let ctx = group_gen(64, b"cache test").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let built = table(&ctx, 1 << 10, Some(dir.path())).unwrap();
        let path = cache_file(dir.path(), &ctx, 1 << 10);
        assert!(path.exists());
        let loaded = table(&ctx, 1 << 10, Some(dir.path())).unwrap();
        assert_eq!(loaded.bound(), built.bound());
        for e in [-1024i64, -3, 0, 7, 1024, 5000] {
            assert_eq!(dlog::dlog(&ctx, &loaded, &ctx.g_pow_signed(e), 10_000).unwrap(), e);
        }
        assert!(load(&path, &ctx, 1 << 9).is_err());
        let other = group_gen(64, b"other").unwrap();
        assert!(load(&path, &other, 1 << 10).is_err());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let ctx = group_gen(64, b"cache test").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        save(&path, &ctx, &DlogTable::build(&ctx, 64).unwrap()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(load(&path, &ctx, 64).is_err());
    }
}
