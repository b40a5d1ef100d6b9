//! Trusted key authority: setup, key distribution and the inference
//! prevention module (IPM) that gates every functional key request.
//!
//! The authority only ever sees setup parameters and key requests; its API
//! has no entry point that accepts ciphertexts or training data.

use alloc::string::String;
use alloc::vec::Vec;

use rand_core::{CryptoRng, RngCore};

use crate::error::{Error, Result};
use crate::group::GroupContext;
use crate::mife::{self, MifeDerivedKey, MifeMasterKey, MifePartyKey, MifePublicKey};
use crate::otp::SEED_LEN;
use crate::sife::{self, SifeDerivedKey, SifeMasterKey, SifePublicKey};

/// Reason attached to every rejected key request.
pub const EXPLOITED_VECTOR: &str = "exploited vector";

/// `n` registered parties, at least `t + 1` of which must be aggregated, batch size `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IpmPolicy {
    pub n: usize,
    pub t: usize,
    pub s: usize,
    /// Also require fusion weights in `{0, 1}`.
    pub binary_fusion: bool,
}

impl IpmPolicy {
    pub fn new(n: usize, t: usize, s: usize) -> Result<Self> {
        if n == 0 || t == 0 || t > n {
            return Err(Error::Config(alloc::format!("need 1 <= t <= n, got t = {t}, n = {n}")));
        }
        if s == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(Self { n, t, s, binary_fusion: true })
    }

    /// Whether `live` responding parties are enough for an aggregation.
    pub fn quorum(&self, live: usize) -> bool {
        live > self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// MIFE over parties (fusion vector `v`).
    FeatureDim,
    /// SIFE over batch samples (vector `u`).
    SampleDim,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyRequest {
    pub scheme: Scheme,
    pub vector: Vec<i64>,
}

impl KeyRequest {
    pub fn feature_dim(v: Vec<i64>) -> Self {
        Self { scheme: Scheme::FeatureDim, vector: v }
    }

    pub fn sample_dim(u: Vec<i64>) -> Self {
        Self { scheme: Scheme::SampleDim, vector: u }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FunctionalKey {
    Mife(MifeDerivedKey),
    Sife(SifeDerivedKey),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyResponse {
    Granted(FunctionalKey),
    Rejected(String),
}

impl KeyResponse {
    pub fn into_result(self) -> Result<FunctionalKey> {
        match self {
            KeyResponse::Granted(k) => Ok(k),
            KeyResponse::Rejected(reason) => Err(Error::Rejected(reason)),
        }
    }
}

/// Accepts feature-dimension requests iff `|v| = n` and `sum(v) > t`, and
/// sample-dimension requests iff `|u| = s`.
pub fn ipm_check(policy: &IpmPolicy, req: &KeyRequest) -> Result<()> {
    let ok = match req.scheme {
        Scheme::FeatureDim => {
            let sum: i128 = req.vector.iter().map(|&v| i128::from(v)).sum();
            req.vector.len() == policy.n
                && sum > policy.t as i128
                && (!policy.binary_fusion || req.vector.iter().all(|&v| v == 0 || v == 1))
        }
        Scheme::SampleDim => req.vector.len() == policy.s,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Rejected(EXPLOITED_VECTOR.into()))
    }
}

/// What a party receives at setup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartyBundle {
    pub party: usize,
    pub mife: MifePartyKey,
    pub sife: SifePublicKey,
    pub seed: [u8; SEED_LEN],
}

/// What the aggregator receives at setup: public parameters only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatorBundle {
    pub mife: MifePublicKey,
    pub sife: SifePublicKey,
    pub policy: IpmPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEntry {
    pub request: KeyRequest,
    pub granted: bool,
}

pub struct Tpa {
    ctx: GroupContext,
    policy: IpmPolicy,
    mife: MifeMasterKey,
    sife: SifeMasterKey,
    seed: [u8; SEED_LEN],
    audit: Vec<AuditEntry>,
}

impl core::fmt::Debug for Tpa {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Tpa").field("policy", &self.policy).field("issued", &self.audit.len()).finish_non_exhaustive()
    }
}

impl Tpa {
    /// Sets up MIFE with one scalar slot per party and SIFE over `s`-length
    /// sample vectors, and draws the shared batch-selection seed.
    pub fn setup<R: CryptoRng + RngCore + ?Sized>(
        ctx: &GroupContext,
        policy: IpmPolicy,
        rng: &mut R,
    ) -> Result<(Self, Vec<PartyBundle>, AggregatorBundle)> {
        let mut seed = [0u8; SEED_LEN];
        rng.fill_bytes(&mut seed);
        Self::setup_with_batch_seed(ctx, policy, rng, seed)
    }

    /// As [`Tpa::setup`], issuing a caller-chosen batch-selection seed.
    pub fn setup_with_batch_seed<R: CryptoRng + RngCore + ?Sized>(
        ctx: &GroupContext,
        policy: IpmPolicy,
        rng: &mut R,
        seed: [u8; SEED_LEN],
    ) -> Result<(Self, Vec<PartyBundle>, AggregatorBundle)> {
        if policy.n < 2 {
            return Err(Error::Config("a federation needs at least two parties".into()));
        }
        let mife = mife::setup(ctx, &alloc::vec![1; policy.n], rng)?;
        let sife = sife::setup(ctx, policy.s, rng)?;
        let parties = (0..policy.n)
            .map(|i| {
                Ok(PartyBundle {
                    party: i,
                    mife: mife::skdist(ctx, &mife, i + 1)?,
                    sife: sife.public_key().clone(),
                    seed,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let aggregator = AggregatorBundle { mife: mife.public_key().clone(), sife: sife.public_key().clone(), policy };
        Ok((Self { ctx: ctx.clone(), policy, mife, sife, seed, audit: Vec::new() }, parties, aggregator))
    }

    pub fn policy(&self) -> &IpmPolicy {
        &self.policy
    }

    /// Runs the IPM and, on acceptance, derives the functional key.
    pub fn query_key_service(&mut self, req: &KeyRequest) -> KeyResponse {
        let response = match ipm_check(&self.policy, req) {
            Err(Error::Rejected(reason)) => KeyResponse::Rejected(reason),
            Err(other) => KeyResponse::Rejected(alloc::format!("{other}")),
            Ok(()) => {
                let key = match req.scheme {
                    Scheme::FeatureDim => mife::derive_key(&self.ctx, &self.mife, &req.vector).map(FunctionalKey::Mife),
                    Scheme::SampleDim => sife::derive_key(&self.ctx, &self.sife, &req.vector).map(FunctionalKey::Sife),
                };
                match key {
                    Ok(k) => KeyResponse::Granted(k),
                    Err(e) => KeyResponse::Rejected(alloc::format!("{e}")),
                }
            }
        };
        self.audit.push(AuditEntry { request: req.clone(), granted: matches!(response, KeyResponse::Granted(_)) });
        response
    }

    /// The batch-selection seed handed to every party, kept for plaintext replay.
    pub fn batch_seed(&self) -> &[u8; SEED_LEN] {
        &self.seed
    }

    pub fn audit_log(&self) -> &[AuditEntry] {
        &self.audit
    }

    /// Message handler for the authority endpoint: key requests only.
    pub fn handle(&mut self, msg: &crate::wire::Message) -> Result<crate::wire::Message> {
        match msg {
            crate::wire::Message::KeyRequest(req) => Ok(crate::wire::Message::KeyResponse(self.query_key_service(req))),
            other => Err(Error::Protocol(alloc::format!("authority does not accept {} messages", other.kind().name()))),
        }
    }
}
