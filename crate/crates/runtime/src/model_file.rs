//! Plain-text model file: a short header followed by one weight per line.
//!
//! ```text
//! # fedv model
//! kind = logistic
//! d = 35
//! sigma = 1000000
//! 0.125
//! ...
//! ```

use std::path::Path;

use fedv_core::models::ModelKind;

use crate::error::{IoContext, Result, RuntimeError};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub kind: ModelKind,
    pub sigma: i64,
    pub weights: Vec<f64>,
}

pub fn render(kind: ModelKind, sigma: i64, weights: &[f64]) -> String {
    let mut out = format!("# fedv model\nkind = {}\nd = {}\nsigma = {sigma}\n", kind.name(), weights.len());
    for w in weights {
        out.push_str(&format!("{w:e}\n"));
    }
    out
}

pub fn write(path: &Path, kind: ModelKind, sigma: i64, weights: &[f64]) -> Result<()> {
    std::fs::write(path, render(kind, sigma, weights)).at(path)
}

pub fn parse(text: &str) -> Result<ModelFile> {
    let bad = |m: &str| RuntimeError::Data(format!("model file: {m}"));
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("# fedv model") {
        return Err(bad("missing header"));
    }
    let mut field = |name: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad("truncated header"))?;
        match line.split_once('=') {
            Some((k, v)) if k.trim() == name => Ok(v.trim().to_owned()),
            _ => Err(bad(&format!("expected `{name} = ...`"))),
        }
    };
    let kind: ModelKind = field("kind")?.parse()?;
    let d: usize = field("d")?.parse().map_err(|_| bad("bad dimension"))?;
    let sigma: i64 = field("sigma")?.parse().map_err(|_| bad("bad sigma"))?;
    let weights = lines.map(|l| l.parse::<f64>().map_err(|_| bad("bad weight"))).collect::<Result<Vec<f64>>>()?;
    if weights.len() != d {
        return Err(bad(&format!("header says {d} weights, found {}", weights.len())));
    }
    Ok(ModelFile { kind, sigma, weights })
}

pub fn read(path: &Path) -> Result<ModelFile> {
    parse(&std::fs::read_to_string(path).at(path)?)
}
