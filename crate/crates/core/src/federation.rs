//! A complete federation run over the in-process network: setup, entity
//! alignment, secure gradient batches, secure loss and training.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::Range;

use crate::aggregator::{Aggregator, BatchOutcome};
use crate::dlog::DlogTable;
use crate::encoding::FixedPointCodec;
use crate::entity;
use crate::error::{Error, Result};
use crate::group::{seeded_rng, GroupContext};
use crate::models::{self, EpochStats, ModelKind, TrainParams};
use crate::party::{ClkParams, PartyAgent, PartyShard};
use crate::tpa::{FunctionalKey, IpmPolicy, KeyRequest, KeyResponse, Tpa};
use crate::transport::{Channel, Endpoint, LatencyModel, LocalNetwork, Meter, Participation, Phase, Traffic};
use crate::wire::{Alignment, BatchQuery, ClkSubmission, Message, MessageKind, PartyReply, QueryKind};

/// Batch index reserved for loss evaluation so its rows differ from training batches.
pub const LOSS_BATCH: u32 = u32::MAX;

/// Wall-clock source for timing records. The core crate has no clock.
pub trait Clock {
    fn now_ns(&self) -> u64;
}

pub struct NullClock;

impl Clock for NullClock {
    fn now_ns(&self) -> u64 {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    pub kind: ModelKind,
    pub codec: FixedPointCodec,
    /// Threshold `t`: a feature-dimension key needs more than `t` live parties.
    pub threshold: usize,
    pub batch_size: usize,
    pub lambda: f64,
    /// Simulated time the aggregator waits for replies, in microseconds.
    pub reply_timeout_us: u64,
    pub binary_fusion: bool,
    /// Batch-selection seed the authority hands out; drawn at setup when absent.
    pub batch_seed: Option<[u8; crate::otp::SEED_LEN]>,
}

/// Deterministic per-batch metrics derived from the meter and simulated time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationRecord {
    pub epoch: u32,
    pub b_idx: u32,
    pub phase: Phase,
    pub outcome: &'static str,
    pub live: usize,
    pub crypto_party_messages: u64,
    pub control_messages: u64,
    pub p2p_messages: u64,
    pub tpa_messages: u64,
    pub bytes: u64,
    pub late_replies: u64,
    pub sim_elapsed_us: u64,
}

/// Wall-clock split of one batch; zero everywhere under [`NullClock`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TimingRecord {
    pub epoch: u32,
    pub b_idx: u32,
    pub party_ns: u64,
    pub key_ns: u64,
    pub feature_dim_ns: u64,
    pub sample_dim_ns: u64,
    pub total_ns: u64,
}

/// Inputs and result of one gradient batch, enough to replay it in plaintext.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    pub epoch: u32,
    pub b_idx: u32,
    pub weights: Vec<f64>,
    pub live: Vec<bool>,
    pub gradient: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedOutcome {
    pub weights: Vec<f64>,
    pub history: Vec<Vec<f64>>,
    /// Secure batch loss after each epoch, if requested and not skipped.
    pub losses: Vec<Option<f64>>,
    pub stats: Vec<EpochStats>,
}

pub struct Federation {
    net: LocalNetwork,
    tpa: Tpa,
    aggregator: Aggregator,
    parties: Vec<PartyAgent>,
    participation: Box<dyn Participation>,
    clock: Box<dyn Clock>,
    config: FederationConfig,
    records: Vec<IterationRecord>,
    timings: Vec<TimingRecord>,
    batches: Vec<BatchRecord>,
    late: u64,
}

impl core::fmt::Debug for Federation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Federation")
            .field("aggregator", &self.aggregator)
            .field("parties", &self.parties.len())
            .field("net", &self.net)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Copy)]
struct Snapshot {
    crypto: Traffic,
    control: Traffic,
    p2p: Traffic,
    tpa: Traffic,
    total: Traffic,
    time: u64,
    late: u64,
}

fn snapshot(meter: &Meter, time: u64, late: u64) -> Snapshot {
    Snapshot {
        crypto: meter.crypto_party_messages(),
        control: meter.sum(|_, c, k| c == Channel::PartyAggregator && k != MessageKind::Reply),
        p2p: meter.by_channel(Channel::PartyParty),
        tpa: meter.by_channel(Channel::AggregatorTpa),
        total: meter.total(),
        time,
        late,
    }
}

impl Federation {
    /// Runs authority setup and distributes every bundle over the network.
    ///
    /// Exactly one shard carries labels. `aligned` states whether the shards
    /// already share a row order; otherwise call [`Federation::align`].
    pub fn new(
        ctx: GroupContext,
        table: Arc<DlogTable>,
        config: FederationConfig,
        shards: Vec<PartyShard>,
        seed: &[u8],
        aligned: bool,
    ) -> Result<Self> {
        let n = shards.len();
        let mut policy = IpmPolicy::new(n, config.threshold, config.batch_size)?;
        policy.binary_fusion = config.binary_fusion;
        let active: Vec<usize> = shards.iter().filter(|s| s.labels.is_some()).map(|s| s.party).collect();
        let [active] = active[..] else {
            return Err(Error::Config("exactly one party must hold labels".into()));
        };
        let ranges: Vec<Range<usize>> = shards.iter().map(|s| s.range.clone()).collect();
        for (i, s) in shards.iter().enumerate() {
            if s.party != i {
                return Err(Error::Config("shards must be ordered by party index".into()));
            }
        }

        let mut rng = seeded_rng(b"fedv/tpa", seed);
        let (tpa, bundles, agg_bundle) = match config.batch_seed {
            Some(b) => Tpa::setup_with_batch_seed(&ctx, policy, &mut rng, b)?,
            None => Tpa::setup(&ctx, policy, &mut rng)?,
        };

        let mut net = LocalNetwork::new(ctx.clone(), n);
        net.set_phase(Phase::Setup);
        for (i, b) in bundles.into_iter().enumerate() {
            net.send(Endpoint::Tpa, Endpoint::Party(i), &Message::PartySetup(b))?;
        }
        net.send(Endpoint::Tpa, Endpoint::Aggregator, &Message::AggregatorSetup(agg_bundle))?;

        let mut parties = Vec::with_capacity(n);
        for (i, shard) in shards.into_iter().enumerate() {
            let bundle = match net.receive(Endpoint::Party(i), u64::MAX)?.pop() {
                Some((Endpoint::Tpa, Message::PartySetup(b))) => b,
                _ => return Err(Error::Protocol("party did not receive its setup bundle".into())),
            };
            let mut party_seed = [0u8; 32];
            rand_core::RngCore::fill_bytes(
                &mut seeded_rng(b"fedv/party", &[seed, &(i as u64).to_be_bytes()].concat()),
                &mut party_seed,
            );
            parties.push(PartyAgent::new(ctx.clone(), config.codec, config.kind, shard, bundle, party_seed, aligned)?);
        }
        let agg_bundle = match net.receive(Endpoint::Aggregator, u64::MAX)?.pop() {
            Some((Endpoint::Tpa, Message::AggregatorSetup(b))) => b,
            _ => return Err(Error::Protocol("aggregator did not receive its setup bundle".into())),
        };
        let aggregator =
            Aggregator::new(ctx, config.codec, config.kind, agg_bundle, table, ranges, active, config.lambda)?;
        Ok(Self {
            net,
            tpa,
            aggregator,
            parties,
            participation: Box::new(crate::transport::AlwaysOn),
            clock: Box::new(NullClock),
            config,
            records: Vec::new(),
            timings: Vec::new(),
            batches: Vec::new(),
            late: 0,
        })
    }

    pub fn with_participation(mut self, participation: Box<dyn Participation>) -> Self {
        self.participation = participation;
        self
    }

    pub fn with_latency(mut self, latency: Box<dyn LatencyModel>) -> Self {
        self.net.set_latency(latency);
        self
    }

    pub fn with_clock(mut self, clock: Box<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &FederationConfig {
        &self.config
    }

    pub fn dimension(&self) -> usize {
        self.aggregator.dimension()
    }

    pub fn meter(&self) -> &Meter {
        self.net.meter()
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn timings(&self) -> &[TimingRecord] {
        &self.timings
    }

    pub fn batch_log(&self) -> &[BatchRecord] {
        &self.batches
    }

    pub fn tpa(&self) -> &Tpa {
        &self.tpa
    }

    pub fn aggregator(&self) -> &Aggregator {
        &self.aggregator
    }

    pub fn sim_time_us(&self) -> u64 {
        self.net.now()
    }

    /// Privacy-preserving entity resolution: parties send CLKs to the
    /// aggregator, which matches them and returns one permutation per party.
    /// Returns the number of aligned rows.
    pub fn align(&mut self, params: &ClkParams, threshold: f64) -> Result<usize> {
        self.net.set_phase(Phase::Alignment);
        for (i, p) in self.parties.iter().enumerate() {
            let clks = p.submit_clks(params)?;
            self.net.send(
                Endpoint::Party(i),
                Endpoint::Aggregator,
                &Message::Clks(ClkSubmission { party: i as u32, clks }),
            )?;
        }
        let mut submitted: Vec<Option<Vec<entity::Clk>>> = alloc::vec![None; self.parties.len()];
        for (from, msg) in self.net.receive(Endpoint::Aggregator, u64::MAX)? {
            match (from, msg) {
                (Endpoint::Party(i), Message::Clks(c)) if c.party as usize == i => submitted[i] = Some(c.clks),
                _ => self.late += 1,
            }
        }
        let clks: Vec<Vec<entity::Clk>> = submitted
            .into_iter()
            .map(|c| c.ok_or(Error::Resolution("a party did not submit CLKs")))
            .collect::<Result<_>>()?;
        let perms = entity::match_and_permute(&clks, threshold)?;
        let rows = perms.first().map_or(0, entity::aligned_rows);
        for (i, permutation) in perms.into_iter().enumerate() {
            let msg = Message::Alignment(Alignment { party: i as u32, permutation });
            self.net.send(Endpoint::Aggregator, Endpoint::Party(i), &msg)?;
        }
        for i in 0..self.parties.len() {
            for (_, msg) in self.net.receive(Endpoint::Party(i), u64::MAX)? {
                self.parties[i].handle(&msg)?;
            }
        }
        if self.parties.iter().any(|p| p.rows() != rows) {
            return Err(Error::Resolution("parties disagree on the aligned row count"));
        }
        Ok(rows)
    }

    /// Sends one query per party and collects the replies that arrive before
    /// the timeout. Silenced parties never answer; replies tagged for another
    /// batch are dropped.
    fn collect(
        &mut self,
        kind: QueryKind,
        epoch: u32,
        b_idx: u32,
        w: &[f64],
    ) -> Result<(Vec<Option<PartyReply>>, u64)> {
        let partials = self.aggregator.partial_weights(w)?;
        let start = self.net.now();
        for (i, weights) in partials.into_iter().enumerate() {
            let q = BatchQuery {
                kind,
                epoch,
                b_idx,
                s: self.config.batch_size as u32,
                mode: self.config.kind.mode(),
                weights,
            };
            self.net.send(Endpoint::Aggregator, Endpoint::Party(i), &Message::Query(q))?;
        }
        let t0 = self.clock.now_ns();
        // every party drains its queue even if another one failed
        let mut failure = None;
        for i in 0..self.parties.len() {
            let Some(at) = self.net.next_arrival(Endpoint::Party(i)) else { continue };
            for (_, msg) in self.net.receive(Endpoint::Party(i), at)? {
                if !self.participation.responds(epoch, b_idx, i) {
                    continue;
                }
                match self.parties[i].handle(&msg) {
                    Ok(Some(reply)) => self.net.send(Endpoint::Party(i), Endpoint::Aggregator, &reply)?,
                    Ok(None) => {}
                    Err(e) => failure = failure.or(Some(e)),
                }
            }
        }
        if let Some(e) = failure {
            return Err(e);
        }
        let party_ns = self.clock.now_ns().saturating_sub(t0);

        let deadline = start.saturating_add(self.config.reply_timeout_us);
        let mut replies: Vec<Option<PartyReply>> = alloc::vec![None; self.parties.len()];
        for (from, msg) in self.net.receive(Endpoint::Aggregator, deadline)? {
            match (from, msg) {
                (Endpoint::Party(i), Message::Reply(r))
                    if r.party as usize == i && r.epoch == epoch && r.b_idx == b_idx && replies[i].is_none() =>
                {
                    replies[i] = Some(r)
                }
                _ => self.late += 1,
            }
        }
        if replies.iter().any(Option::is_none) {
            self.net.advance_to(deadline);
        }
        self.aggregator.validate_replies(&replies, kind, epoch, b_idx)?;
        Ok((replies, party_ns))
    }

    /// One authority round trip over the aggregator link.
    fn request_key(&mut self, req: KeyRequest) -> Result<FunctionalKey> {
        self.net.send(Endpoint::Aggregator, Endpoint::Tpa, &Message::KeyRequest(req))?;
        let at = self.net.next_arrival(Endpoint::Tpa).ok_or_else(|| Error::Protocol("key request lost".into()))?;
        for (_, msg) in self.net.receive(Endpoint::Tpa, at)? {
            let response = self.tpa.handle(&msg)?;
            self.net.send(Endpoint::Tpa, Endpoint::Aggregator, &response)?;
        }
        loop {
            let at =
                self.net.next_arrival(Endpoint::Aggregator).ok_or_else(|| Error::Protocol("no key response".into()))?;
            let mut found = None;
            for (from, msg) in self.net.receive(Endpoint::Aggregator, at)? {
                match (from, msg) {
                    (Endpoint::Tpa, Message::KeyResponse(r)) => found = Some(r),
                    _ => self.late += 1,
                }
            }
            if let Some(r) = found {
                return match r {
                    KeyResponse::Granted(k) => Ok(k),
                    KeyResponse::Rejected(reason) => Err(Error::Rejected(reason)),
                };
            }
        }
    }

    fn feature_dim_key(&mut self, v: Vec<i64>) -> Result<crate::mife::MifeDerivedKey> {
        match self.request_key(KeyRequest::feature_dim(v))? {
            FunctionalKey::Mife(k) => Ok(k),
            FunctionalKey::Sife(_) => Err(Error::KeyMismatch),
        }
    }

    fn finish(&mut self, epoch: u32, b_idx: u32, phase: Phase, outcome: &'static str, live: usize, before: Snapshot) {
        let after = snapshot(self.net.meter(), self.net.now(), self.late);
        self.records.push(IterationRecord {
            epoch,
            b_idx,
            phase,
            outcome,
            live,
            crypto_party_messages: after.crypto.minus(before.crypto).messages,
            control_messages: after.control.minus(before.control).messages,
            p2p_messages: after.p2p.minus(before.p2p).messages,
            tpa_messages: after.tpa.minus(before.tpa).messages,
            bytes: after.total.minus(before.total).bytes,
            late_replies: after.late - before.late,
            sim_elapsed_us: after.time - before.time,
        });
    }

    /// Secure gradient for batch `(epoch, b_idx)` at weights `w`.
    pub fn fedv_secgrad(&mut self, epoch: u32, b_idx: u32, w: &[f64]) -> Result<BatchOutcome> {
        self.net.set_phase(Phase::Gradient);
        let before = snapshot(self.net.meter(), self.net.now(), self.late);
        let t_start = self.clock.now_ns();
        let (replies, party_ns) = self.collect(QueryKind::Gradient, epoch, b_idx, w)?;
        let live_mask: Vec<bool> = replies.iter().map(Option::is_some).collect();
        let live = replies.iter().flatten().count();

        if let Some(reason) = self.aggregator.precheck(&replies) {
            self.finish(epoch, b_idx, Phase::Gradient, reason.name(), live, before);
            self.batches.push(BatchRecord { epoch, b_idx, weights: w.to_vec(), live: live_mask, gradient: None });
            return Ok(BatchOutcome::Skipped(reason));
        }

        let t = self.clock.now_ns();
        let mife_key = self.feature_dim_key(Aggregator::fusion_vector(&replies))?;
        let mut key_ns = self.clock.now_ns().saturating_sub(t);

        let t = self.clock.now_ns();
        let fd = self.aggregator.feature_dim(&replies, &mife_key)?;
        let u = self.aggregator.residuals(&fd, &replies)?;
        let feature_dim_ns = self.clock.now_ns().saturating_sub(t);

        let t = self.clock.now_ns();
        let sife_key = match self.request_key(KeyRequest::sample_dim(u.clone()))? {
            FunctionalKey::Sife(k) => k,
            FunctionalKey::Mife(_) => return Err(Error::KeyMismatch),
        };
        key_ns += self.clock.now_ns().saturating_sub(t);

        let t = self.clock.now_ns();
        let grad = self.aggregator.sample_dim(&replies, &u, &sife_key, w)?;
        let sample_dim_ns = self.clock.now_ns().saturating_sub(t);

        self.finish(epoch, b_idx, Phase::Gradient, "applied", live, before);
        self.timings.push(TimingRecord {
            epoch,
            b_idx,
            party_ns,
            key_ns,
            feature_dim_ns,
            sample_dim_ns,
            total_ns: self.clock.now_ns().saturating_sub(t_start),
        });
        self.batches.push(BatchRecord {
            epoch,
            b_idx,
            weights: w.to_vec(),
            live: live_mask,
            gradient: Some(grad.clone()),
        });
        Ok(BatchOutcome::Gradient(grad))
    }

    /// Mean of the secure gradients of `batches` batches, skipping unusable ones.
    pub fn fedv_secgrad_epoch(&mut self, epoch: u32, batches: u32, w: &[f64]) -> Result<Option<Vec<f64>>> {
        let mut sum = alloc::vec![0.0; w.len()];
        let mut used = 0u32;
        for b in 0..batches {
            if let BatchOutcome::Gradient(g) = self.fedv_secgrad(epoch, b, w)? {
                sum.iter_mut().zip(&g).for_each(|(s, gj)| *s += gj);
                used += 1;
            }
        }
        Ok((used > 0).then(|| sum.iter().map(|s| s / f64::from(used)).collect()))
    }

    /// Unregularized loss on the reserved loss batch of `epoch`, from
    /// feature-dimension decryption only.
    pub fn secure_loss(&mut self, epoch: u32, w: &[f64]) -> Result<Option<f64>> {
        self.net.set_phase(Phase::Loss);
        let before = snapshot(self.net.meter(), self.net.now(), self.late);
        let (replies, _) = self.collect(QueryKind::Loss, epoch, LOSS_BATCH, w)?;
        let live = replies.iter().flatten().count();
        if let Some(reason) = self.aggregator.precheck(&replies) {
            self.finish(epoch, LOSS_BATCH, Phase::Loss, reason.name(), live, before);
            return Ok(None);
        }
        let key = self.feature_dim_key(Aggregator::fusion_vector(&replies))?;
        let fd = self.aggregator.feature_dim(&replies, &key)?;
        let loss = self.aggregator.batch_loss(&fd, &replies)?;
        self.finish(epoch, LOSS_BATCH, Phase::Loss, "applied", live, before);
        Ok(Some(loss))
    }

    /// Mini-batch training from `w = 0`. `on_epoch` sees the weights after each epoch.
    pub fn train(
        &mut self,
        params: &TrainParams,
        with_loss: bool,
        mut on_epoch: impl FnMut(u32, &[f64]),
    ) -> Result<FederatedOutcome> {
        params.validate()?;
        if params.batch_size != self.config.batch_size {
            return Err(Error::Config("batch size differs from the key setup".into()));
        }
        if (params.lambda - self.config.lambda).abs() > 0.0 {
            return Err(Error::Config("regularization differs from the federation config".into()));
        }
        let mut w = alloc::vec![0.0; self.dimension()];
        let mut out =
            FederatedOutcome { weights: Vec::new(), history: Vec::new(), losses: Vec::new(), stats: Vec::new() };
        for epoch in 0..params.epochs {
            let stats = models::run_epoch(&mut w, params, epoch, |w, b| match self.fedv_secgrad(epoch, b, w)? {
                BatchOutcome::Gradient(g) => Ok(Some(g)),
                BatchOutcome::Skipped(_) => Ok(None),
            })?;
            let loss = if with_loss { self.secure_loss(epoch, &w)? } else { None };
            on_epoch(epoch, &w);
            out.stats.push(stats);
            out.losses.push(loss);
            out.history.push(w.clone());
        }
        out.weights = w;
        Ok(out)
    }
}
