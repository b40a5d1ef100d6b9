//! Experiment driver: federated runs, the centralized baseline, and replay
//! verification of a finished run.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use fedv_core::dlog::DlogTable;
use fedv_core::federation::{BatchRecord, Clock, Federation, FederationConfig, IterationRecord, TimingRecord};
use fedv_core::group::{group_gen, GroupContext};
use fedv_core::models::{self, Evaluation, ModelKind};
use fedv_core::otp::OtpChain;
use fedv_core::party::{ClkParams, PartyShard};
use fedv_core::transport::{FixedLatency, SilencedFraction};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cache;
use crate::config::RunConfig;
use crate::dataset::{self, Split};
use crate::error::{IoContext, Result, RuntimeError};
use crate::model_file;

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const BATCHES_FILE: &str = "batches.jsonl";
pub const MODEL_FILE: &str = "model.txt";
pub const CONFIG_FILE: &str = "config.toml";

struct WallClock(Instant);

impl Clock for WallClock {
    fn now_ns(&self) -> u64 {
        self.0.elapsed().as_nanos() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub samples: usize,
    pub accuracy: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub mse: f64,
}

impl From<&Evaluation> for EvalSummary {
    fn from(e: &Evaluation) -> Self {
        let c = e.confusion.unwrap_or_default();
        Self { samples: e.samples, accuracy: e.accuracy, tp: c.tp, fp: c.fp, tn: c.tn, fn_: c.fn_, mse: e.mse }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: u32,
    pub applied: u32,
    pub skipped: u32,
    pub secure_loss: Option<f64>,
    pub train_objective: f64,
    pub test: EvalSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: String,
    pub parties: usize,
    pub dim: usize,
    pub train_rows: usize,
    pub weights: Vec<f64>,
    pub curve: Vec<EpochSummary>,
    pub test: EvalSummary,
    pub crypto_party_messages: u64,
    pub p2p_messages: u64,
    pub total_messages: u64,
    pub total_bytes: u64,
    pub applied_batches: u32,
    pub skipped_batches: u32,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub model: String,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub losses: Vec<f64>,
    pub test: EvalSummary,
    pub curve: Vec<EvalSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub batches: usize,
    pub checked: usize,
    pub skipped: usize,
    pub max_abs_deviation: f64,
    /// Deviation scaled by the codec resolution `1/sigma`.
    pub max_deviation_in_ulps: f64,
}

#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum MetricLine<'a> {
    Setup { parties: usize, dim: usize, messages: u64, bytes: u64 },
    Alignment { rows: usize, messages: u64, bytes: u64 },
    Iteration(IterationLine),
    Epoch(&'a EpochSummary),
    Traffic { phase: &'static str, channel: &'static str, message: &'static str, messages: u64, bytes: u64 },
    Summary { crypto_party_messages: u64, p2p_messages: u64, messages: u64, bytes: u64, test_accuracy: Option<f64> },
}

#[derive(Debug, Serialize)]
struct IterationLine {
    epoch: u32,
    b_idx: u32,
    phase: &'static str,
    outcome: &'static str,
    live: usize,
    crypto_party_messages: u64,
    control_messages: u64,
    p2p_messages: u64,
    tpa_messages: u64,
    bytes: u64,
    late_replies: u64,
    sim_elapsed_us: u64,
}

impl From<&IterationRecord> for IterationLine {
    fn from(r: &IterationRecord) -> Self {
        Self {
            epoch: r.epoch,
            b_idx: r.b_idx,
            phase: r.phase.name(),
            outcome: r.outcome,
            live: r.live,
            crypto_party_messages: r.crypto_party_messages,
            control_messages: r.control_messages,
            p2p_messages: r.p2p_messages,
            tpa_messages: r.tpa_messages,
            bytes: r.bytes,
            late_replies: r.late_replies,
            sim_elapsed_us: r.sim_elapsed_us,
        }
    }
}

#[derive(Debug, Serialize)]
struct TimingLine {
    epoch: u32,
    b_idx: u32,
    party_ms: f64,
    key_ms: f64,
    feature_dim_ms: f64,
    sample_dim_ms: f64,
    total_ms: f64,
}

impl From<&TimingRecord> for TimingLine {
    fn from(t: &TimingRecord) -> Self {
        let ms = |ns: u64| ns as f64 / 1e6;
        Self {
            epoch: t.epoch,
            b_idx: t.b_idx,
            party_ms: ms(t.party_ns),
            key_ms: ms(t.key_ns),
            feature_dim_ms: ms(t.feature_dim_ns),
            sample_dim_ms: ms(t.sample_dim_ns),
            total_ms: ms(t.total_ns),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BatchLine {
    epoch: u32,
    b_idx: u32,
    live: Vec<bool>,
    weights: Vec<f64>,
    gradient: Option<Vec<f64>>,
}

impl From<&BatchRecord> for BatchLine {
    fn from(b: &BatchRecord) -> Self {
        Self {
            epoch: b.epoch,
            b_idx: b.b_idx,
            live: b.live.clone(),
            weights: b.weights.clone(),
            gradient: b.gradient.clone(),
        }
    }
}

fn write_jsonl<T: Serialize>(path: &Path, lines: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).at(path)?);
    for line in lines {
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").at(path)?;
    }
    w.flush().at(path)
}

/// Group and dlog table for a config; the table comes from the disk cache when
/// the cache directory variable is set.
pub fn crypto_setup(cfg: &RunConfig) -> Result<(GroupContext, Arc<DlogTable>)> {
    let ctx = group_gen(cfg.crypto.group_bits, cfg.seeds.group.as_bytes())?;
    let table = cache::table(&ctx, cfg.crypto.table_half_width, cache::env_dir().as_deref())?;
    Ok((ctx, Arc::new(table)))
}

pub fn load_split(cfg: &RunConfig) -> Result<Split> {
    dataset::ingest_csv(&cfg.data, cfg.kind()?, cfg.seeds.shuffle)
}

fn federation_config(cfg: &RunConfig) -> Result<FederationConfig> {
    Ok(FederationConfig {
        kind: cfg.kind()?,
        codec: cfg.codec()?,
        threshold: cfg.federation.threshold,
        batch_size: cfg.model.batch_size,
        lambda: cfg.model.lambda,
        reply_timeout_us: cfg.federation.reply_timeout_us,
        binary_fusion: cfg.federation.binary_fusion,
        batch_seed: Some(cfg.seeds.otp_seed()),
    })
}

fn evaluate(kind: ModelKind, x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<EvalSummary> {
    if x.is_empty() {
        return Ok(EvalSummary { samples: 0, accuracy: None, tp: 0, fp: 0, tn: 0, fn_: 0, mse: 0.0 });
    }
    Ok(EvalSummary::from(&models::evaluate(kind, x, y, w)?))
}

/// Shuffles the rows of every party except party 0, which is the alignment reference.
fn scramble(shards: &mut [PartyShard], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for s in shards.iter_mut().skip(1) {
        let mut order: Vec<usize> = (0..s.rows()).collect();
        order.shuffle(&mut rng);
        s.features = order.iter().map(|&r| s.features[r].clone()).collect();
        s.ids = order.iter().map(|&r| s.ids[r].clone()).collect();
        if let Some(y) = &s.labels {
            s.labels = Some(order.iter().map(|&r| y[r]).collect());
        }
    }
}

/// Executes a full run: setup, optional alignment, training with per-epoch
/// evaluation on the test split. Writes the metrics, timings, batch log,
/// model and config into `out` when given.
pub fn run_experiment(cfg: &RunConfig, out: Option<&Path>) -> Result<RunReport> {
    let started = Instant::now();
    let kind = cfg.kind()?;
    let params = cfg.train_params()?;
    let split = load_split(cfg)?;
    let n = cfg.federation.parties;
    let active = cfg.federation.active;
    let x_train = dataset::design_matrix(&split.train, n, active)?;
    let x_test = dataset::design_matrix(&split.test, n, active)?;
    let dim = x_train.first().map_or(0, Vec::len);

    let (ctx, table) = crypto_setup(cfg)?;
    let mut shards = dataset::partition_vertical(&split.train, n, active)?;
    let resolve = cfg.resolution.enabled;
    if resolve {
        if active != 0 {
            return Err(RuntimeError::Config(
                "entity resolution uses the active party as reference; set active = 0".into(),
            ));
        }
        if cfg.resolution.shuffle_passive {
            scramble(&mut shards, cfg.seeds.shuffle);
        }
    }
    let mut fed = Federation::new(ctx, table, federation_config(cfg)?, shards, &cfg.seeds.crypto_seed(), !resolve)?
        .with_clock(Box::new(WallClock(Instant::now())));
    if cfg.federation.latency_us > 0 {
        fed = fed.with_latency(Box::new(FixedLatency(cfg.federation.latency_us)));
    }
    if let Some(d) = &cfg.federation.dropout {
        fed = fed.with_participation(Box::new(SilencedFraction {
            parties: d.parties.clone(),
            fraction: d.fraction,
            seed: d.seed,
        }));
    }
    let setup = fed.meter().total();

    let mut alignment = None;
    if resolve {
        let before = fed.meter().total();
        let r = &cfg.resolution;
        let rows =
            fed.align(&ClkParams { bits: r.clk_bits, hashes: r.hashes, key: r.key.as_bytes().to_vec() }, r.threshold)?;
        if rows != split.train.rows() {
            return Err(RuntimeError::Data(format!("alignment kept {rows} of {} rows", split.train.rows())));
        }
        alignment = Some((rows, fed.meter().total().minus(before)));
    }

    let mut curve = Vec::new();
    let mut eval_error = None;
    let outcome = fed.train(&params, cfg.model.secure_loss, |epoch, w| {
        let summary = (|| -> Result<EpochSummary> {
            Ok(EpochSummary {
                epoch,
                applied: 0,
                skipped: 0,
                secure_loss: None,
                train_objective: models::objective(kind, &x_train, &split.train.labels, w, params.lambda)?,
                test: evaluate(kind, &x_test, &split.test.labels, w)?,
            })
        })();
        match summary {
            Ok(s) => curve.push(s),
            Err(e) => eval_error = eval_error.take().or(Some(e)),
        }
    })?;
    if let Some(e) = eval_error {
        return Err(e);
    }
    for ((c, stats), loss) in curve.iter_mut().zip(&outcome.stats).zip(&outcome.losses) {
        c.applied = stats.applied;
        c.skipped = stats.skipped;
        c.secure_loss = *loss;
    }

    let meter = fed.meter();
    let test = evaluate(kind, &x_test, &split.test.labels, &outcome.weights)?;
    let report = RunReport {
        model: kind.name().into(),
        parties: n,
        dim,
        train_rows: split.train.rows(),
        weights: outcome.weights.clone(),
        test,
        crypto_party_messages: meter.crypto_party_messages().messages,
        p2p_messages: meter.by_channel(fedv_core::transport::Channel::PartyParty).messages,
        total_messages: meter.total().messages,
        total_bytes: meter.total().bytes,
        applied_batches: outcome.stats.iter().map(|s| s.applied).sum(),
        skipped_batches: outcome.stats.iter().map(|s| s.skipped).sum(),
        curve,
        wall_seconds: started.elapsed().as_secs_f64(),
    };

    if let Some(dir) = out {
        std::fs::create_dir_all(dir).at(dir)?;
        let mut lines = vec![MetricLine::Setup { parties: n, dim, messages: setup.messages, bytes: setup.bytes }];
        if let Some((rows, t)) = alignment {
            lines.push(MetricLine::Alignment { rows, messages: t.messages, bytes: t.bytes });
        }
        let mut records = fed.records().iter().peekable();
        for epoch in &report.curve {
            while let Some(r) = records.next_if(|r| r.epoch <= epoch.epoch) {
                lines.push(MetricLine::Iteration(r.into()));
            }
            lines.push(MetricLine::Epoch(epoch));
        }
        lines.extend(records.map(|r| MetricLine::Iteration(r.into())));
        for (phase, channel, kind, t) in meter.entries() {
            lines.push(MetricLine::Traffic {
                phase: phase.name(),
                channel: channel.name(),
                message: kind.name(),
                messages: t.messages,
                bytes: t.bytes,
            });
        }
        lines.push(MetricLine::Summary {
            crypto_party_messages: report.crypto_party_messages,
            p2p_messages: report.p2p_messages,
            messages: report.total_messages,
            bytes: report.total_bytes,
            test_accuracy: report.test.accuracy,
        });
        write_jsonl(&dir.join(METRICS_FILE), lines)?;
        write_jsonl(&dir.join(TIMINGS_FILE), fed.timings().iter().map(TimingLine::from))?;
        write_jsonl(&dir.join(BATCHES_FILE), fed.batch_log().iter().map(BatchLine::from))?;
        model_file::write(&dir.join(MODEL_FILE), kind, cfg.crypto.sigma, &outcome.weights)?;
        let mut saved = cfg.clone();
        saved.data.path = std::fs::canonicalize(&cfg.data.path).at(&cfg.data.path)?;
        let config_path = dir.join(CONFIG_FILE);
        std::fs::write(&config_path, saved.to_toml()).at(&config_path)?;
    }
    Ok(report)
}

/// Centralized plaintext training with the same data, seeds and batches.
pub fn run_oracle(cfg: &RunConfig) -> Result<OracleReport> {
    let kind = cfg.kind()?;
    let params = cfg.train_params()?;
    let split = load_split(cfg)?;
    let n = cfg.federation.parties;
    let active = cfg.federation.active;
    let x_train = dataset::design_matrix(&split.train, n, active)?;
    let x_test = dataset::design_matrix(&split.test, n, active)?;
    let otp = OtpChain::new(cfg.seeds.otp_seed());
    let out = models::centralized_train(kind, &x_train, &split.train.labels, &params, &otp)?;
    let curve =
        out.history.iter().map(|w| evaluate(kind, &x_test, &split.test.labels, w)).collect::<Result<Vec<_>>>()?;
    Ok(OracleReport {
        model: kind.name().into(),
        dim: x_train.first().map_or(0, Vec::len),
        test: evaluate(kind, &x_test, &split.test.labels, &out.weights)?,
        weights: out.weights,
        losses: out.losses,
        curve,
    })
}

/// Replays every logged batch of a run through the plaintext gradient oracle,
/// with absent parties' features zeroed, and reports the largest deviation.
pub fn verify(run_dir: &Path) -> Result<VerifyReport> {
    let cfg = RunConfig::load(&run_dir.join(CONFIG_FILE))?;
    let kind = cfg.kind()?;
    let split = load_split(&cfg)?;
    let shards = dataset::partition_vertical(&split.train, cfg.federation.parties, cfg.federation.active)?;
    let x = dataset::assemble(&shards);
    let y = &split.train.labels;
    let otp = OtpChain::new(cfg.seeds.otp_seed());
    let s = cfg.model.batch_size;

    let path: PathBuf = run_dir.join(BATCHES_FILE);
    let reader = BufReader::new(File::open(&path).at(&path)?);
    let mut report =
        VerifyReport { batches: 0, checked: 0, skipped: 0, max_abs_deviation: 0.0, max_deviation_in_ulps: 0.0 };
    for line in reader.lines() {
        let line = line.at(&path)?;
        if line.trim().is_empty() {
            continue;
        }
        let b: BatchLine = serde_json::from_str(&line)?;
        report.batches += 1;
        let Some(g) = b.gradient else {
            report.skipped += 1;
            continue;
        };
        let rows = otp.select_batch(b.epoch, b.b_idx, s, x.len())?;
        let bx: Vec<Vec<f64>> = rows
            .iter()
            .map(|&r| {
                let mut row = x[r].clone();
                for (shard, &live) in shards.iter().zip(&b.live) {
                    if !live {
                        row[shard.range.clone()].iter_mut().for_each(|v| *v = 0.0);
                    }
                }
                row
            })
            .collect();
        let by: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        let oracle = models::oracle_gradient(kind, &bx, &by, &b.weights, cfg.model.lambda)?;
        if oracle.len() != g.len() {
            return Err(RuntimeError::Data("logged gradient has the wrong dimension".into()));
        }
        let dev = g.iter().zip(&oracle).map(|(a, o)| (a - o).abs()).fold(0.0, f64::max);
        report.max_abs_deviation = report.max_abs_deviation.max(dev);
        report.checked += 1;
    }
    report.max_deviation_in_ulps = report.max_abs_deviation * cfg.crypto.sigma as f64;
    Ok(report)
}
