//! Run configuration, read from a TOML file with one table per concern.

use std::path::{Path, PathBuf};

use fedv_core::encoding::FixedPointCodec;
use fedv_core::entity::{DEFAULT_CLK_BITS, DEFAULT_HASHES, DEFAULT_THRESHOLD};
use fedv_core::models::{ModelKind, TrainParams, UpdateRule};
use fedv_core::otp::SEED_LEN;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{IoContext, Result, RuntimeError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub federation: FederationSection,
    pub model: ModelSection,
    #[serde(default)]
    pub crypto: CryptoSection,
    #[serde(default)]
    pub resolution: ResolutionSection,
    #[serde(default)]
    pub seeds: Seeds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// CSV with a header row. Relative paths resolve against the config file.
    pub path: PathBuf,
    /// Defaults to the last column.
    #[serde(default)]
    pub label_column: Option<String>,
    /// Record identifier column used for entity resolution; row numbers otherwise.
    #[serde(default)]
    pub id_column: Option<String>,
    /// Classification only: the label mapped to the positive class.
    #[serde(default)]
    pub positive_label: Option<String>,
    pub train_rows: usize,
    pub test_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationSection {
    pub parties: usize,
    pub active: usize,
    pub threshold: usize,
    pub reply_timeout_us: u64,
    pub latency_us: u64,
    pub binary_fusion: bool,
    pub dropout: Option<DropoutSection>,
}

impl Default for FederationSection {
    fn default() -> Self {
        Self {
            parties: 2,
            active: 0,
            threshold: 1,
            reply_timeout_us: 1_000_000,
            latency_us: 0,
            binary_fusion: true,
            dropout: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropoutSection {
    pub parties: Vec<usize>,
    pub fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: String,
    pub alpha: f64,
    #[serde(default)]
    pub lambda: f64,
    pub batch_size: usize,
    /// Defaults to `train_rows / batch_size`.
    #[serde(default)]
    pub batches_per_epoch: Option<u32>,
    pub epochs: u32,
    #[serde(default = "default_update")]
    pub update: String,
    #[serde(default = "yes")]
    pub secure_loss: bool,
}

fn default_update() -> String {
    "per_epoch".into()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CryptoSection {
    pub group_bits: u32,
    pub sigma: i64,
    pub beta: f64,
    pub table_half_width: u64,
}

impl Default for CryptoSection {
    fn default() -> Self {
        Self { group_bits: 64, sigma: 1_000, beta: 100.0, table_half_width: 1 << 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolutionSection {
    /// Align rows with CLK matching before training.
    pub enabled: bool,
    pub clk_bits: usize,
    pub hashes: usize,
    pub threshold: f64,
    pub key: String,
    /// Simulation aid: shuffle each passive party's rows before alignment.
    pub shuffle_passive: bool,
}

impl Default for ResolutionSection {
    fn default() -> Self {
        Self {
            enabled: false,
            clk_bits: DEFAULT_CLK_BITS,
            hashes: DEFAULT_HASHES,
            threshold: DEFAULT_THRESHOLD,
            key: "fedv-clk".into(),
            shuffle_passive: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub group: String,
    pub crypto: u64,
    pub otp: u64,
    pub shuffle: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { group: "fedv-group".into(), crypto: 1, otp: 2, shuffle: 3 }
    }
}

impl Seeds {
    pub fn otp_seed(&self) -> [u8; SEED_LEN] {
        let mut h = Sha256::new();
        h.update(b"fedv/otp-seed");
        h.update(self.otp.to_be_bytes());
        h.finalize().into()
    }

    pub fn crypto_seed(&self) -> [u8; 8] {
        self.crypto.to_be_bytes()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        let mut cfg: RunConfig = toml::from_str(&text)?;
        if cfg.data.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.data.path = dir.join(&cfg.data.path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn kind(&self) -> Result<ModelKind> {
        Ok(self.model.kind.parse()?)
    }

    pub fn update_rule(&self) -> Result<UpdateRule> {
        Ok(self.model.update.parse()?)
    }

    pub fn codec(&self) -> Result<FixedPointCodec> {
        Ok(FixedPointCodec::new(self.crypto.sigma, self.crypto.beta)?)
    }

    pub fn train_params(&self) -> Result<TrainParams> {
        let batches = match self.model.batches_per_epoch {
            Some(b) => b,
            None => u32::try_from(self.data.train_rows / self.model.batch_size.max(1))
                .map_err(|_| RuntimeError::Config("too many batches per epoch".into()))?,
        };
        let params = TrainParams {
            alpha: self.model.alpha,
            lambda: self.model.lambda,
            batch_size: self.model.batch_size,
            batches_per_epoch: batches,
            epochs: self.model.epochs,
            update: self.update_rule()?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.kind()?;
        self.codec()?;
        self.train_params()?;
        let f = &self.federation;
        if f.parties < 2 {
            return Err(RuntimeError::Config("at least two parties are required".into()));
        }
        if f.active >= f.parties {
            return Err(RuntimeError::Config("active party index out of range".into()));
        }
        if f.threshold == 0 || f.threshold > f.parties {
            return Err(RuntimeError::Config("threshold must lie in 1..=parties".into()));
        }
        if self.model.batch_size > self.data.train_rows {
            return Err(RuntimeError::Config("batch size exceeds the training rows".into()));
        }
        if let Some(d) = &f.dropout {
            if !(0.0..=1.0).contains(&d.fraction) || d.parties.iter().any(|&p| p >= f.parties) {
                return Err(RuntimeError::Config("dropout parties or fraction out of range".into()));
            }
        }
        Ok(())
    }
}
