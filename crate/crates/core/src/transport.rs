//! In-process message transport with topology enforcement and metering.
//!
//! Every message is serialized on send and decoded on delivery, so metered
//! byte counts are real wire sizes. Time is simulated in microseconds; the
//! latency hook defaults to zero.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::group::GroupContext;
use crate::wire::{Message, MessageKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Tpa,
    Aggregator,
    Party(usize),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tpa => f.write_str("tpa"),
            Endpoint::Aggregator => f.write_str("aggregator"),
            Endpoint::Party(i) => write!(f, "party{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    PartyAggregator,
    PartyParty,
    AggregatorTpa,
    TpaParty,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::PartyAggregator => "party_aggregator",
            Channel::PartyParty => "party_party",
            Channel::AggregatorTpa => "aggregator_tpa",
            Channel::TpaParty => "tpa_party",
        }
    }
}

/// Which part of a run a message belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Setup,
    Alignment,
    Gradient,
    Loss,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Setup => "setup",
            Phase::Alignment => "alignment",
            Phase::Gradient => "gradient",
            Phase::Loss => "loss",
        }
    }
}

/// Only these links exist. Parties never talk to each other, and the
/// authority only ever sends to parties (setup bundles).
pub fn channel(from: Endpoint, to: Endpoint) -> Result<Channel> {
    let ch = match (from, to) {
        (Endpoint::Party(_), Endpoint::Aggregator) | (Endpoint::Aggregator, Endpoint::Party(_)) => {
            Channel::PartyAggregator
        }
        (Endpoint::Aggregator, Endpoint::Tpa) | (Endpoint::Tpa, Endpoint::Aggregator) => Channel::AggregatorTpa,
        (Endpoint::Tpa, Endpoint::Party(_)) => Channel::TpaParty,
        _ => return Err(Error::Topology { from: from.to_string(), to: to.to_string() }),
    };
    Ok(ch)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Traffic {
    pub messages: u64,
    pub bytes: u64,
}

impl Traffic {
    fn add(&mut self, bytes: usize) {
        self.messages += 1;
        self.bytes += bytes as u64;
    }

    pub fn minus(self, earlier: Traffic) -> Traffic {
        Traffic { messages: self.messages - earlier.messages, bytes: self.bytes - earlier.bytes }
    }
}

/// Counts of every delivered message by phase, channel and kind.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Meter {
    counts: BTreeMap<(Phase, Channel, MessageKind), Traffic>,
}

impl Meter {
    pub fn record(&mut self, phase: Phase, channel: Channel, kind: MessageKind, bytes: usize) {
        self.counts.entry((phase, channel, kind)).or_default().add(bytes);
    }

    pub fn total(&self) -> Traffic {
        self.sum(|_, _, _| true)
    }

    pub fn by_phase(&self, phase: Phase) -> Traffic {
        self.sum(|p, _, _| p == phase)
    }

    pub fn by_channel(&self, channel: Channel) -> Traffic {
        self.sum(|_, c, _| c == channel)
    }

    /// Ciphertext-carrying party messages: replies sent to the aggregator.
    pub fn crypto_party_messages(&self) -> Traffic {
        self.sum(|_, c, k| c == Channel::PartyAggregator && k == MessageKind::Reply)
    }

    pub fn sum(&self, mut keep: impl FnMut(Phase, Channel, MessageKind) -> bool) -> Traffic {
        let mut t = Traffic::default();
        for (&(p, c, k), v) in &self.counts {
            if keep(p, c, k) {
                t.messages += v.messages;
                t.bytes += v.bytes;
            }
        }
        t
    }

    pub fn entries(&self) -> impl Iterator<Item = (Phase, Channel, MessageKind, Traffic)> + '_ {
        self.counts.iter().map(|(&(p, c, k), &t)| (p, c, k, t))
    }
}

/// Simulated one-way delay of a link, in microseconds.
pub trait LatencyModel {
    fn latency_us(&self, from: Endpoint, to: Endpoint) -> u64;
}

pub struct ZeroLatency;

impl LatencyModel for ZeroLatency {
    fn latency_us(&self, _: Endpoint, _: Endpoint) -> u64 {
        0
    }
}

/// Same delay on every link.
pub struct FixedLatency(pub u64);

impl LatencyModel for FixedLatency {
    fn latency_us(&self, _: Endpoint, _: Endpoint) -> u64 {
        self.0
    }
}

/// Decides whether a party answers a given batch.
pub trait Participation {
    fn responds(&self, epoch: u32, b_idx: u32, party: usize) -> bool;
}

pub struct AlwaysOn;

impl Participation for AlwaysOn {
    fn responds(&self, _: u32, _: u32, _: usize) -> bool {
        true
    }
}

/// Silences each listed party on a pseudo-random `fraction` of batches.
#[derive(Debug, Clone, PartialEq)]
pub struct SilencedFraction {
    pub parties: Vec<usize>,
    pub fraction: f64,
    pub seed: u64,
}

impl Participation for SilencedFraction {
    fn responds(&self, epoch: u32, b_idx: u32, party: usize) -> bool {
        if !self.parties.contains(&party) {
            return true;
        }
        let mut h = Sha256::new();
        h.update(b"fedv/dropout");
        h.update(self.seed.to_be_bytes());
        h.update(epoch.to_be_bytes());
        h.update(b_idx.to_be_bytes());
        h.update((party as u64).to_be_bytes());
        let v = u64::from_be_bytes(h.finalize()[..8].try_into().expect("digest has 32 bytes"));
        (v >> 11) as f64 / (1u64 << 53) as f64 >= self.fraction
    }
}

struct Envelope {
    from: Endpoint,
    to: Endpoint,
    deliver_at: u64,
    seq: u64,
    bytes: Vec<u8>,
}

pub struct LocalNetwork {
    ctx: GroupContext,
    parties: usize,
    now: u64,
    seq: u64,
    phase: Phase,
    queue: VecDeque<Envelope>,
    latency: Box<dyn LatencyModel>,
    meter: Meter,
}

impl fmt::Debug for LocalNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalNetwork")
            .field("parties", &self.parties)
            .field("now", &self.now)
            .field("queued", &self.queue.len())
            .finish_non_exhaustive()
    }
}

impl LocalNetwork {
    pub fn new(ctx: GroupContext, parties: usize) -> Self {
        Self {
            ctx,
            parties,
            now: 0,
            seq: 0,
            phase: Phase::Setup,
            queue: VecDeque::new(),
            latency: Box::new(ZeroLatency),
            meter: Meter::default(),
        }
    }

    pub fn with_latency(mut self, latency: Box<dyn LatencyModel>) -> Self {
        self.latency = latency;
        self
    }

    pub fn set_latency(&mut self, latency: Box<dyn LatencyModel>) {
        self.latency = latency;
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn advance_to(&mut self, t: u64) {
        self.now = self.now.max(t);
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn meter(&self) -> &Meter {
        &self.meter
    }

    fn check_endpoint(&self, e: Endpoint) -> Result<()> {
        match e {
            Endpoint::Party(i) if i >= self.parties => {
                Err(Error::Topology { from: e.to_string(), to: "network".into() })
            }
            _ => Ok(()),
        }
    }

    /// Serializes and queues `msg`; it becomes deliverable after the link latency.
    pub fn send(&mut self, from: Endpoint, to: Endpoint, msg: &Message) -> Result<()> {
        self.check_endpoint(from)?;
        self.check_endpoint(to)?;
        let ch = channel(from, to)?;
        let bytes = msg.encode(&self.ctx);
        self.meter.record(self.phase, ch, msg.kind(), bytes.len());
        let deliver_at = self.now + self.latency.latency_us(from, to);
        self.seq += 1;
        self.queue.push_back(Envelope { from, to, deliver_at, seq: self.seq, bytes });
        Ok(())
    }

    /// Delivers every message for `to` that arrives by `deadline`, in arrival order.
    pub fn receive(&mut self, to: Endpoint, deadline: u64) -> Result<Vec<(Endpoint, Message)>> {
        let mut ready = Vec::new();
        let mut rest = VecDeque::with_capacity(self.queue.len());
        for env in self.queue.drain(..) {
            if env.to == to && env.deliver_at <= deadline {
                ready.push(env);
            } else {
                rest.push_back(env);
            }
        }
        self.queue = rest;
        ready.sort_by_key(|e| (e.deliver_at, e.seq));
        if let Some(last) = ready.last() {
            self.now = self.now.max(last.deliver_at);
        }
        ready.into_iter().map(|e| Ok((e.from, Message::decode(&self.ctx, &e.bytes)?))).collect()
    }

    /// Earliest pending arrival for `to`, if any.
    pub fn next_arrival(&self, to: Endpoint) -> Option<u64> {
        self.queue.iter().filter(|e| e.to == to).map(|e| e.deliver_at).min()
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }
}
