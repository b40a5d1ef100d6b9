//! Versioned binary encoding of every protocol message.
//!
//! Frame: `b"FV"`, version byte, message tag, body. Integers are big-endian;
//! group elements and exponents are fixed-width big-endian at the byte widths
//! of the group's modulus and order. Decoding checks subgroup membership of
//! every element and range of every exponent.

use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigUint;

use crate::entity::{Clk, Permutation};
use crate::error::{Error, Result};
use crate::group::{GroupContext, GroupElement};
use crate::mife::{MifeCiphertext, MifeDerivedKey, MifePartyKey, MifePublicKey};
use crate::models::Mode;
use crate::otp::SEED_LEN;
use crate::sife::{SifeCiphertext, SifeDerivedKey, SifePublicKey};
use crate::tpa::{AggregatorBundle, FunctionalKey, IpmPolicy, KeyRequest, KeyResponse, PartyBundle, Scheme};

pub const MAGIC: [u8; 2] = *b"FV";
pub const WIRE_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryKind {
    Gradient,
    Loss,
}

/// Aggregator to party: partial weights plus the batch to process.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchQuery {
    pub kind: QueryKind,
    pub epoch: u32,
    pub b_idx: u32,
    pub s: u32,
    pub mode: Mode,
    pub weights: Vec<f64>,
}

/// Party to aggregator. Carries no plaintext feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct PartyReply {
    pub party: u32,
    pub epoch: u32,
    pub b_idx: u32,
    pub mode: Mode,
    /// One single-slot MIFE ciphertext per batch sample.
    pub feature_dim: Vec<MifeCiphertext>,
    /// One SIFE ciphertext per owned feature column; empty for loss queries.
    pub sample_dim: Vec<SifeCiphertext>,
    /// Plaintext labels, active party in nonlinear mode only.
    pub labels: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClkSubmission {
    pub party: u32,
    pub clks: Vec<Clk>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub party: u32,
    pub permutation: Permutation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    PartySetup(PartyBundle),
    AggregatorSetup(AggregatorBundle),
    Query(BatchQuery),
    Reply(PartyReply),
    KeyRequest(KeyRequest),
    KeyResponse(KeyResponse),
    Clks(ClkSubmission),
    Alignment(Alignment),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    PartySetup,
    AggregatorSetup,
    Query,
    Reply,
    KeyRequest,
    KeyResponse,
    Clks,
    Alignment,
}

impl MessageKind {
    fn tag(self) -> u8 {
        match self {
            MessageKind::PartySetup => 1,
            MessageKind::AggregatorSetup => 2,
            MessageKind::Query => 3,
            MessageKind::Reply => 4,
            MessageKind::KeyRequest => 5,
            MessageKind::KeyResponse => 6,
            MessageKind::Clks => 7,
            MessageKind::Alignment => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::PartySetup => "party_setup",
            MessageKind::AggregatorSetup => "aggregator_setup",
            MessageKind::Query => "query",
            MessageKind::Reply => "reply",
            MessageKind::KeyRequest => "key_request",
            MessageKind::KeyResponse => "key_response",
            MessageKind::Clks => "clks",
            MessageKind::Alignment => "alignment",
        }
    }
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::PartySetup(_) => MessageKind::PartySetup,
            Message::AggregatorSetup(_) => MessageKind::AggregatorSetup,
            Message::Query(_) => MessageKind::Query,
            Message::Reply(_) => MessageKind::Reply,
            Message::KeyRequest(_) => MessageKind::KeyRequest,
            Message::KeyResponse(_) => MessageKind::KeyResponse,
            Message::Clks(_) => MessageKind::Clks,
            Message::Alignment(_) => MessageKind::Alignment,
        }
    }

    pub fn encode(&self, ctx: &GroupContext) -> Vec<u8> {
        let mut w = Writer { out: Vec::new(), ew: ctx.element_width(), sw: ctx.scalar_width() };
        w.out.extend_from_slice(&MAGIC);
        w.u8(WIRE_VERSION);
        w.u8(self.kind().tag());
        match self {
            Message::PartySetup(b) => {
                w.u32(b.party as u32);
                w.u32(b.mife.slot as u32);
                w.element(&b.mife.ga[0]);
                w.element(&b.mife.ga[1]);
                let (wa, u) = b.mife.parts();
                w.scalars(wa);
                w.scalars(u);
                w.elements(&b.sife.h);
                w.out.extend_from_slice(&b.seed);
            }
            Message::AggregatorSetup(b) => {
                w.element(&b.mife.ga[0]);
                w.element(&b.mife.ga[1]);
                w.u32(b.mife.gwa.len() as u32);
                for slot in &b.mife.gwa {
                    w.elements(slot);
                }
                w.elements(&b.sife.h);
                w.u32(b.policy.n as u32);
                w.u32(b.policy.t as u32);
                w.u32(b.policy.s as u32);
                w.u8(u8::from(b.policy.binary_fusion));
            }
            Message::Query(q) => {
                w.u8(match q.kind {
                    QueryKind::Gradient => 0,
                    QueryKind::Loss => 1,
                });
                w.u32(q.epoch);
                w.u32(q.b_idx);
                w.u32(q.s);
                w.mode(q.mode);
                w.f64s(&q.weights);
            }
            Message::Reply(r) => {
                w.u32(r.party);
                w.u32(r.epoch);
                w.u32(r.b_idx);
                w.mode(r.mode);
                w.u32(r.feature_dim.len() as u32);
                for ct in &r.feature_dim {
                    w.u32(ct.slot as u32);
                    w.element(&ct.t[0]);
                    w.element(&ct.t[1]);
                    w.elements(&ct.c);
                }
                w.u32(r.sample_dim.len() as u32);
                for ct in &r.sample_dim {
                    w.element(&ct.ct0);
                    w.elements(&ct.cts);
                }
                match &r.labels {
                    None => w.u8(0),
                    Some(y) => {
                        w.u8(1);
                        w.f64s(y);
                    }
                }
            }
            Message::KeyRequest(req) => {
                w.scheme(req.scheme);
                w.i64s(&req.vector);
            }
            Message::KeyResponse(resp) => match resp {
                KeyResponse::Rejected(reason) => {
                    w.u8(0);
                    w.u32(reason.len() as u32);
                    w.out.extend_from_slice(reason.as_bytes());
                }
                KeyResponse::Granted(FunctionalKey::Mife(k)) => {
                    w.u8(1);
                    w.u32(k.d.len() as u32);
                    for [d0, d1] in &k.d {
                        w.scalar(d0);
                        w.scalar(d1);
                    }
                    w.scalar(&k.z);
                    w.i64s(&k.y);
                    w.u32(k.lengths.len() as u32);
                    for &l in &k.lengths {
                        w.u32(l as u32);
                    }
                }
                KeyResponse::Granted(FunctionalKey::Sife(k)) => {
                    w.u8(2);
                    w.scalar(&k.dk);
                    w.i64s(&k.y);
                }
            },
            Message::Clks(c) => {
                w.u32(c.party);
                let len = c.clks.first().map_or(0, Clk::len);
                w.u32(len as u32);
                w.u32(c.clks.len() as u32);
                for clk in &c.clks {
                    w.out.extend_from_slice(&clk.to_bytes());
                }
            }
            Message::Alignment(a) => {
                w.u32(a.party);
                w.u32(a.permutation.len() as u32);
                for entry in &a.permutation {
                    w.u32(entry.map_or(u32::MAX, |g| g as u32));
                }
            }
        }
        w.out
    }

    pub fn decode(ctx: &GroupContext, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0, ctx };
        if r.take(2)? != MAGIC {
            return Err(Error::Wire("bad magic"));
        }
        if r.u8()? != WIRE_VERSION {
            return Err(Error::Wire("unsupported wire version"));
        }
        let msg = match r.u8()? {
            1 => {
                let party = r.u32()? as usize;
                let slot = r.u32()? as usize;
                let ga = [r.element()?, r.element()?];
                let wa = r.scalars()?;
                let u = r.scalars()?;
                if wa.len() != u.len() {
                    return Err(Error::Wire("MIFE key parts differ in length"));
                }
                let h = r.elements()?;
                let seed: [u8; SEED_LEN] = r.take(SEED_LEN)?.try_into().expect("length checked");
                Message::PartySetup(PartyBundle {
                    party,
                    mife: MifePartyKey::from_parts(slot, ga, wa, u),
                    sife: SifePublicKey { h },
                    seed,
                })
            }
            2 => {
                let ga = [r.element()?, r.element()?];
                let slots = r.count()?;
                let gwa = (0..slots).map(|_| r.elements()).collect::<Result<Vec<_>>>()?;
                let h = r.elements()?;
                let (n, t, s) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
                let mut policy = IpmPolicy::new(n, t, s).map_err(|_| Error::Wire("invalid policy"))?;
                policy.binary_fusion = r.bool()?;
                Message::AggregatorSetup(AggregatorBundle {
                    mife: MifePublicKey { ga, gwa },
                    sife: SifePublicKey { h },
                    policy,
                })
            }
            3 => {
                let kind = match r.u8()? {
                    0 => QueryKind::Gradient,
                    1 => QueryKind::Loss,
                    _ => return Err(Error::Wire("unknown query kind")),
                };
                Message::Query(BatchQuery {
                    kind,
                    epoch: r.u32()?,
                    b_idx: r.u32()?,
                    s: r.u32()?,
                    mode: r.mode()?,
                    weights: r.f64s()?,
                })
            }
            4 => {
                let party = r.u32()?;
                let epoch = r.u32()?;
                let b_idx = r.u32()?;
                let mode = r.mode()?;
                let nf = r.count()?;
                let mut feature_dim = Vec::with_capacity(nf);
                for _ in 0..nf {
                    let slot = r.u32()? as usize;
                    let t = [r.element()?, r.element()?];
                    feature_dim.push(MifeCiphertext { slot, t, c: r.elements()? });
                }
                let ns = r.count()?;
                let mut sample_dim = Vec::with_capacity(ns);
                for _ in 0..ns {
                    let ct0 = r.element()?;
                    sample_dim.push(SifeCiphertext { ct0, cts: r.elements()? });
                }
                let labels = if r.bool()? { Some(r.f64s()?) } else { None };
                Message::Reply(PartyReply { party, epoch, b_idx, mode, feature_dim, sample_dim, labels })
            }
            5 => {
                let scheme = r.scheme()?;
                Message::KeyRequest(KeyRequest { scheme, vector: r.i64s()? })
            }
            6 => match r.u8()? {
                0 => {
                    let len = r.count()?;
                    let reason =
                        String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Wire("reason is not UTF-8"))?;
                    Message::KeyResponse(KeyResponse::Rejected(reason))
                }
                1 => {
                    let nd = r.count()?;
                    let d = (0..nd).map(|_| Ok([r.scalar()?, r.scalar()?])).collect::<Result<Vec<_>>>()?;
                    let z = r.scalar()?;
                    let y = r.i64s()?;
                    let nl = r.count()?;
                    let lengths = (0..nl).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
                    if lengths.len() != d.len() || lengths.iter().sum::<usize>() != y.len() {
                        return Err(Error::Wire("MIFE key shape is inconsistent"));
                    }
                    Message::KeyResponse(KeyResponse::Granted(FunctionalKey::Mife(MifeDerivedKey { d, z, y, lengths })))
                }
                2 => {
                    let dk = r.scalar()?;
                    Message::KeyResponse(KeyResponse::Granted(FunctionalKey::Sife(SifeDerivedKey { dk, y: r.i64s()? })))
                }
                _ => return Err(Error::Wire("unknown key response")),
            },
            7 => {
                let party = r.u32()?;
                let len = r.u32()? as usize;
                let count = r.count()?;
                let clks = (0..count)
                    .map(|_| {
                        let bytes = r.take(len.div_ceil(8))?;
                        Clk::from_bytes(len, bytes)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Message::Clks(ClkSubmission { party, clks })
            }
            8 => {
                let party = r.u32()?;
                let len = r.count()?;
                let permutation = (0..len)
                    .map(|_| r.u32().map(|v| if v == u32::MAX { None } else { Some(v as usize) }))
                    .collect::<Result<Vec<_>>>()?;
                Message::Alignment(Alignment { party, permutation })
            }
            _ => return Err(Error::Wire("unknown message tag")),
        };
        if r.pos != bytes.len() {
            return Err(Error::Wire("trailing bytes"));
        }
        Ok(msg)
    }
}

struct Writer {
    out: Vec<u8>,
    ew: usize,
    sw: usize,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.out.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.out.extend_from_slice(&v.to_be_bytes());
    }

    fn mode(&mut self, m: Mode) {
        self.u8(match m {
            Mode::Linear => 0,
            Mode::Nonlinear => 1,
        });
    }

    fn scheme(&mut self, s: Scheme) {
        self.u8(match s {
            Scheme::FeatureDim => 0,
            Scheme::SampleDim => 1,
        });
    }

    fn f64s(&mut self, vs: &[f64]) {
        self.u32(vs.len() as u32);
        for v in vs {
            self.out.extend_from_slice(&v.to_bits().to_be_bytes());
        }
    }

    fn i64s(&mut self, vs: &[i64]) {
        self.u32(vs.len() as u32);
        for v in vs {
            self.out.extend_from_slice(&v.to_be_bytes());
        }
    }

    fn element(&mut self, e: &GroupElement) {
        self.out.extend_from_slice(&e.to_bytes_be(self.ew));
    }

    fn elements(&mut self, es: &[GroupElement]) {
        self.u32(es.len() as u32);
        for e in es {
            self.element(e);
        }
    }

    fn scalar(&mut self, s: &BigUint) {
        let raw = s.to_bytes_be();
        self.out.resize(self.out.len() + self.sw.saturating_sub(raw.len()), 0);
        self.out.extend_from_slice(&raw);
    }

    fn scalars(&mut self, ss: &[BigUint]) {
        self.u32(ss.len() as u32);
        for s in ss {
            self.scalar(s);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    ctx: &'a GroupContext,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(Error::Wire("truncated message"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(Error::Wire("invalid flag")),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    /// A length prefix, sanity-checked against the bytes that remain.
    fn count(&mut self) -> Result<usize> {
        let n = self.u32()? as usize;
        if n > self.buf.len() - self.pos {
            return Err(Error::Wire("length prefix exceeds message"));
        }
        Ok(n)
    }

    fn mode(&mut self) -> Result<Mode> {
        match self.u8()? {
            0 => Ok(Mode::Linear),
            1 => Ok(Mode::Nonlinear),
            _ => Err(Error::Wire("unknown mode")),
        }
    }

    fn scheme(&mut self) -> Result<Scheme> {
        match self.u8()? {
            0 => Ok(Scheme::FeatureDim),
            1 => Ok(Scheme::SampleDim),
            _ => Err(Error::Wire("unknown scheme")),
        }
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.count()?;
        (0..n).map(|_| Ok(f64::from_bits(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes"))))).collect()
    }

    fn i64s(&mut self) -> Result<Vec<i64>> {
        let n = self.count()?;
        (0..n).map(|_| Ok(i64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))).collect()
    }

    fn element(&mut self) -> Result<GroupElement> {
        let bytes = self.take(self.ctx.element_width())?;
        self.ctx.element(BigUint::from_bytes_be(bytes))
    }

    fn elements(&mut self) -> Result<Vec<GroupElement>> {
        let n = self.count()?;
        (0..n).map(|_| self.element()).collect()
    }

    fn scalar(&mut self) -> Result<BigUint> {
        let v = BigUint::from_bytes_be(self.take(self.ctx.scalar_width())?);
        if &v >= self.ctx.order() {
            return Err(Error::Wire("exponent out of range"));
        }
        Ok(v)
    }

    fn scalars(&mut self) -> Result<Vec<BigUint>> {
        let n = self.count()?;
        (0..n).map(|_| self.scalar()).collect()
    }
}
