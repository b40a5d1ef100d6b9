//! CSV ingestion, label conversion, train/test split and vertical partitioning.

use std::collections::BTreeSet;
use std::path::Path;

use fedv_core::models::ModelKind;
use fedv_core::party::PartyShard;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::DataConfig;
use crate::error::{Result, RuntimeError};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub ids: Vec<String>,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.features.len()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            features: rows.iter().map(|&r| self.features[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

/// Raw table: feature columns parsed, labels kept as text.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub ids: Vec<String>,
}

pub fn read_csv(path: &Path, label_column: Option<&str>, id_column: Option<&str>) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if headers.len() < 2 {
        return Err(RuntimeError::Data(format!("{}: need a label and at least one feature column", path.display())));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| RuntimeError::Data(format!("{}: no column named `{name}`", path.display())))
    };
    let label = match label_column {
        Some(name) => find(name)?,
        None => headers.len() - 1,
    };
    let id = id_column.map(find).transpose()?;
    if id == Some(label) {
        return Err(RuntimeError::Data("label and id columns coincide".into()));
    }
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != label && Some(c) != id).collect();
    if feature_cols.is_empty() {
        return Err(RuntimeError::Data(format!("{}: no feature columns", path.display())));
    }

    let mut table = RawTable {
        feature_names: feature_cols.iter().map(|&c| headers[c].clone()).collect(),
        features: Vec::new(),
        labels: Vec::new(),
        ids: Vec::new(),
    };
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(RuntimeError::Data(format!("row {}: expected {} fields", row + 1, headers.len())));
        }
        let values = feature_cols
            .iter()
            .map(|&c| {
                record[c].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    RuntimeError::Data(format!("row {}: column `{}` is not a number", row + 1, headers[c]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        table.features.push(values);
        table.labels.push(record[label].to_owned());
        table.ids.push(match id {
            Some(c) => record[c].to_owned(),
            None => format!("row-{row}"),
        });
    }
    if table.features.is_empty() {
        return Err(RuntimeError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(table)
}

/// Scales every column to `[0, 1]`; constant columns become 0.
pub fn min_max_normalize(features: &mut [Vec<f64>]) {
    let Some(d) = features.first().map(Vec::len) else { return };
    for j in 0..d {
        let (lo, hi) =
            features.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])));
        let span = hi - lo;
        for r in features.iter_mut() {
            r[j] = if span > 0.0 { (r[j] - lo) / span } else { 0.0 };
        }
    }
}

/// Maps text labels onto the model's convention.
///
/// Classifiers use one-vs-rest: `positive` (or, when absent, the largest
/// value of a numeric label column, else the lexicographically first label)
/// becomes the positive class.
pub fn encode_labels(raw: &[String], kind: ModelKind, positive: Option<&str>) -> Result<Vec<f64>> {
    let Some((neg, pos)) = kind.classes() else {
        return raw
            .iter()
            .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| RuntimeError::Data("regression labels must be numeric".into()));
    };
    let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
    let positive = match positive {
        Some(p) if distinct.contains(p) => p.to_owned(),
        Some(p) => return Err(RuntimeError::Data(format!("positive label `{p}` does not occur"))),
        None => {
            let numeric: Option<Vec<(f64, &str)>> =
                distinct.iter().map(|s| s.parse::<f64>().ok().map(|v| (v, *s))).collect();
            match numeric {
                Some(v) => v.into_iter().max_by(|a, b| a.0.total_cmp(&b.0)).map(|(_, s)| s.to_owned()),
                None => distinct.first().map(|s| (*s).to_owned()),
            }
            .ok_or_else(|| RuntimeError::Data("no labels".into()))?
        }
    };
    Ok(raw.iter().map(|v| if *v == positive { pos } else { neg }).collect())
}

/// Reads, normalizes, labels and splits a dataset. Rows are shuffled with
/// `shuffle_seed` before the first `train_rows` become the training set.
pub fn ingest_csv(cfg: &DataConfig, kind: ModelKind, shuffle_seed: u64) -> Result<Split> {
    let mut raw = read_csv(&cfg.path, cfg.label_column.as_deref(), cfg.id_column.as_deref())?;
    min_max_normalize(&mut raw.features);
    let labels = encode_labels(&raw.labels, kind, cfg.positive_label.as_deref())?;
    let all = Dataset { feature_names: raw.feature_names, features: raw.features, labels, ids: raw.ids };
    if cfg.train_rows == 0 || cfg.train_rows + cfg.test_rows > all.rows() {
        return Err(RuntimeError::Data(format!(
            "split {}+{} does not fit {} rows",
            cfg.train_rows,
            cfg.test_rows,
            all.rows()
        )));
    }
    let mut order: Vec<usize> = (0..all.rows()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
    Ok(Split {
        train: all.select(&order[..cfg.train_rows]),
        test: all.select(&order[cfg.train_rows..cfg.train_rows + cfg.test_rows]),
    })
}

/// Attribute counts per party: equal shares, remainder to the earlier parties.
pub fn share_sizes(d: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 || d < n {
        return Err(RuntimeError::Data(format!("cannot split {d} attributes across {n} parties")));
    }
    Ok((0..n).map(|i| d / n + usize::from(i < d % n)).collect())
}

/// Splits attributes contiguously across `n` parties. The active party also
/// receives the labels and a leading constant bias column, so the model
/// dimension is `d + 1`.
pub fn partition_vertical(ds: &Dataset, n: usize, active: usize) -> Result<Vec<PartyShard>> {
    if active >= n {
        return Err(RuntimeError::Data("active party index out of range".into()));
    }
    let sizes = share_sizes(ds.dim(), n)?;
    let mut shards = Vec::with_capacity(n);
    let (mut attr, mut global) = (0, 0);
    for (i, &size) in sizes.iter().enumerate() {
        let bias = i == active;
        let width = size + usize::from(bias);
        let cols = attr..attr + size;
        let features = ds
            .features
            .iter()
            .map(|r| {
                let mut row = Vec::with_capacity(width);
                if bias {
                    row.push(1.0);
                }
                row.extend_from_slice(&r[cols.clone()]);
                row
            })
            .collect();
        shards.push(PartyShard {
            party: i,
            range: global..global + width,
            features,
            labels: bias.then(|| ds.labels.clone()),
            ids: ds.ids.clone(),
        });
        attr += size;
        global += width;
    }
    Ok(shards)
}

/// Row-wise concatenation of aligned shards: the design matrix the model sees.
pub fn assemble(shards: &[PartyShard]) -> Vec<Vec<f64>> {
    let rows = shards.first().map_or(0, PartyShard::rows);
    (0..rows).map(|r| shards.iter().flat_map(|s| s.features[r].iter().copied()).collect()).collect()
}

pub fn design_matrix(ds: &Dataset, n: usize, active: usize) -> Result<Vec<Vec<f64>>> {
    Ok(assemble(&partition_vertical(ds, n, active)?))
}
