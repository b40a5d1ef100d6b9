//! Party-side protocol.
//!
//! A party holds one vertical slice of the data. For each query it selects
//! the agreed batch from the shared seed, encrypts its per-sample partial
//! model under its MIFE slot and each owned feature column under SIFE.

use alloc::vec::Vec;
use core::ops::Range;

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;

use crate::encoding::FixedPointCodec;
use crate::entity::{self, Clk, Permutation};
use crate::error::{Error, Result};
use crate::group::GroupContext;
use crate::mife;
use crate::models::{dot, Mode, ModelKind};
use crate::otp::OtpChain;
use crate::sife;
use crate::tpa::PartyBundle;
use crate::wire::{BatchQuery, Message, PartyReply, QueryKind};

/// One party's vertical slice.
#[derive(Debug, Clone, PartialEq)]
pub struct PartyShard {
    pub party: usize,
    /// Global feature indices owned by this party.
    pub range: Range<usize>,
    /// Rows in local order until aligned, then in aligned global order.
    pub features: Vec<Vec<f64>>,
    /// Present for the active party only.
    pub labels: Option<Vec<f64>>,
    /// Record identifiers used for entity resolution.
    pub ids: Vec<alloc::string::String>,
}

impl PartyShard {
    pub fn validate(&self) -> Result<()> {
        let width = self.range.len();
        if width == 0 {
            return Err(Error::Config(alloc::format!("party {} owns no features", self.party)));
        }
        if let Some(row) = self.features.iter().find(|r| r.len() != width) {
            return Err(Error::Dimension { expected: width, actual: row.len() });
        }
        if let Some(y) = &self.labels {
            if y.len() != self.features.len() {
                return Err(Error::Dimension { expected: self.features.len(), actual: y.len() });
            }
        }
        if !self.ids.is_empty() && self.ids.len() != self.features.len() {
            return Err(Error::Dimension { expected: self.features.len(), actual: self.ids.len() });
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.features.len()
    }
}

/// CLK parameters shared by all parties of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClkParams {
    pub bits: usize,
    pub hashes: usize,
    pub key: Vec<u8>,
}

pub struct PartyAgent {
    ctx: GroupContext,
    codec: FixedPointCodec,
    kind: ModelKind,
    shard: PartyShard,
    bundle: PartyBundle,
    otp: OtpChain,
    weights: Option<Vec<f64>>,
    aligned: bool,
    rng: ChaCha20Rng,
}

impl core::fmt::Debug for PartyAgent {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("PartyAgent")
            .field("party", &self.shard.party)
            .field("range", &self.shard.range)
            .field("active", &self.is_active())
            .finish_non_exhaustive()
    }
}

impl PartyAgent {
    /// `aligned` states whether the shard rows are already in global order.
    pub fn new(
        ctx: GroupContext,
        codec: FixedPointCodec,
        kind: ModelKind,
        shard: PartyShard,
        bundle: PartyBundle,
        rng_seed: [u8; 32],
        aligned: bool,
    ) -> Result<Self> {
        shard.validate()?;
        if bundle.party != shard.party || bundle.mife.slot != shard.party + 1 {
            return Err(Error::Config(alloc::format!("key bundle does not belong to party {}", shard.party)));
        }
        if let Some(y) = &shard.labels {
            for &v in y {
                kind.check_label(v)?;
            }
        }
        let otp = OtpChain::new(bundle.seed);
        Ok(Self { ctx, codec, kind, shard, bundle, otp, weights: None, aligned, rng: ChaCha20Rng::from_seed(rng_seed) })
    }

    pub fn party(&self) -> usize {
        self.shard.party
    }

    pub fn is_active(&self) -> bool {
        self.shard.labels.is_some()
    }

    pub fn range(&self) -> Range<usize> {
        self.shard.range.clone()
    }

    pub fn rows(&self) -> usize {
        self.shard.rows()
    }

    pub fn submit_clks(&self, params: &ClkParams) -> Result<Vec<Clk>> {
        if self.shard.ids.len() != self.shard.rows() {
            return Err(Error::Resolution("party has no identifier column"));
        }
        self.shard
            .ids
            .iter()
            .map(|id| entity::build_clk(&[id.as_str()], params.bits, params.hashes, &params.key))
            .collect()
    }

    /// Reorders rows into the aligned index space; unmatched rows are dropped.
    pub fn apply_alignment(&mut self, perm: &Permutation) -> Result<()> {
        self.shard.features = entity::apply_permutation(&self.shard.features, perm)?;
        if let Some(y) = &self.shard.labels {
            self.shard.labels = Some(entity::apply_permutation(y, perm)?);
        }
        if !self.shard.ids.is_empty() {
            self.shard.ids = entity::apply_permutation(&self.shard.ids, perm)?;
        }
        self.aligned = true;
        Ok(())
    }

    /// Stores this party's slice of the model. The width must match the owned range.
    pub fn receive_partial_weights(&mut self, w: &[f64]) -> Result<()> {
        if w.len() != self.shard.range.len() {
            return Err(Error::Dimension { expected: self.shard.range.len(), actual: w.len() });
        }
        self.weights = Some(w.to_vec());
        Ok(())
    }

    /// The agreed batch rows for `(epoch, b_idx)`.
    pub fn select_batch(&self, epoch: u32, b_idx: u32, s: usize) -> Result<Vec<usize>> {
        self.otp.select_batch(epoch, b_idx, s, self.shard.rows())
    }

    /// Plaintext scalars this party encrypts under MIFE for the given rows.
    fn feature_dim_values(&self, rows: &[usize], mode: Mode) -> Result<Vec<f64>> {
        let w = self.weights.as_ref().ok_or_else(|| Error::Protocol("no partial weights received".into()))?;
        rows.iter()
            .map(|&r| {
                let partial = dot(w, &self.shard.features[r]);
                Ok(match (mode, self.kind.linear_fold()) {
                    (Mode::Linear, Some((slope, intercept))) => match &self.shard.labels {
                        Some(y) => slope * partial - y[r] + intercept,
                        None => slope * partial,
                    },
                    (Mode::Linear, None) => return Err(Error::Protocol("model has no linear mode".into())),
                    (Mode::Nonlinear, _) => partial,
                })
            })
            .collect()
    }

    /// Message handler for the party endpoint.
    pub fn handle(&mut self, msg: &Message) -> Result<Option<Message>> {
        match msg {
            Message::Query(q) => self.query_party(q).map(|r| Some(Message::Reply(r))),
            Message::Alignment(a) if a.party as usize == self.shard.party => {
                self.apply_alignment(&a.permutation).map(|()| None)
            }
            other => Err(Error::Protocol(alloc::format!("party does not accept {} messages", other.kind().name()))),
        }
    }

    /// Answers a gradient or loss query for one batch.
    pub fn query_party(&mut self, query: &BatchQuery) -> Result<PartyReply> {
        if !self.aligned {
            return Err(Error::Protocol("rows are not aligned yet".into()));
        }
        if query.mode != self.kind.mode() {
            return Err(Error::Protocol("query mode does not match the model".into()));
        }
        if query.s as usize != self.bundle.sife.len() {
            return Err(Error::Dimension { expected: self.bundle.sife.len(), actual: query.s as usize });
        }
        self.receive_partial_weights(&query.weights)?;
        let rows = self.select_batch(query.epoch, query.b_idx, query.s as usize)?;

        let values = self.feature_dim_values(&rows, query.mode)?;
        let mut feature_dim = Vec::with_capacity(rows.len());
        for v in values {
            let x = self.codec.encode(v)?;
            feature_dim.push(mife::encrypt(&self.ctx, &self.bundle.mife, &[x], &mut self.rng)?);
        }

        let mut sample_dim = Vec::new();
        if query.kind == QueryKind::Gradient {
            sample_dim.reserve(self.shard.range.len());
            for j in 0..self.shard.range.len() {
                let column: Vec<i64> =
                    rows.iter().map(|&r| self.codec.encode(self.shard.features[r][j])).collect::<Result<_>>()?;
                sample_dim.push(sife::encrypt(&self.ctx, &self.bundle.sife, &column, &mut self.rng)?);
            }
        }

        let labels = match (query.mode, &self.shard.labels) {
            (Mode::Nonlinear, Some(y)) => Some(rows.iter().map(|&r| y[r]).collect()),
            _ => None,
        };
        Ok(PartyReply {
            party: self.shard.party as u32,
            epoch: query.epoch,
            b_idx: query.b_idx,
            mode: query.mode,
            feature_dim,
            sample_dim,
            labels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mife::MifeCiphertext;
    use crate::testutil::fixture;
    use crate::tpa::{FunctionalKey, IpmPolicy, KeyRequest, Tpa};
    use crate::wire::Message;
    use alloc::string::ToString;
    use alloc::vec;

    struct Setup {
        tpa: Tpa,
        parties: Vec<PartyAgent>,
    }

    fn shard(party: usize, range: Range<usize>, rows: &[Vec<f64>], labels: Option<Vec<f64>>) -> PartyShard {
        let ids = (0..rows.len()).map(|i| alloc::format!("id-{i}")).collect();
        PartyShard { party, range, features: rows.to_vec(), labels, ids }
    }

    fn setup(kind: ModelKind, s: usize) -> Setup {
        let (ctx, _) = fixture();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (tpa, bundles, _) = Tpa::setup(ctx, IpmPolicy::new(2, 1, s).unwrap(), &mut rng).unwrap();
        let codec = FixedPointCodec::new(1000, 10.0).unwrap();
        let a: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, 0.1 * i as f64]).collect();
        let b: Vec<Vec<f64>> = (0..6).map(|i| vec![0.5 - 0.05 * i as f64, 0.2, 0.3]).collect();
        let y = vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let shards = [shard(0, 0..2, &a, Some(y)), shard(1, 2..5, &b, None)];
        let parties = shards
            .into_iter()
            .zip(bundles)
            .enumerate()
            .map(|(i, (sh, bundle))| {
                PartyAgent::new(ctx.clone(), codec, kind, sh, bundle, [i as u8; 32], true).unwrap()
            })
            .collect();
        Setup { tpa, parties }
    }

    fn query(kind: QueryKind, mode: Mode, s: u32, weights: Vec<f64>) -> BatchQuery {
        BatchQuery { kind, epoch: 1, b_idx: 2, s, mode, weights }
    }

    fn decrypt_sum(tpa: &mut Tpa, replies: &[PartyReply], k: usize) -> i64 {
        let (ctx, table) = fixture();
        let key = match tpa.query_key_service(&KeyRequest::feature_dim(vec![1, 1])).into_result().unwrap() {
            FunctionalKey::Mife(k) => k,
            _ => unreachable!(),
        };
        let cts: Vec<Option<MifeCiphertext>> = replies.iter().map(|r| Some(r.feature_dim[k].clone())).collect();
        mife::decrypt(ctx, &cts, &key, table, 1 << 30).unwrap()
    }

    #[test]
    fn passive_zero_weights_encrypt_zero_and_active_folds_labels() {
        let mut st = setup(ModelKind::LinearRegression, 4);
        let rows = st.parties[0].select_batch(1, 2, 4).unwrap();
        let replies: Vec<PartyReply> = (0..2)
            .map(|i| {
                let width = st.parties[i].range().len();
                st.parties[i].query_party(&query(QueryKind::Gradient, Mode::Linear, 4, vec![0.0; width])).unwrap()
            })
            .collect();
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        for (k, &r) in rows.iter().enumerate() {
            assert_eq!(decrypt_sum(&mut st.tpa, &replies, k), -1000 * y[r] as i64);
        }
        assert!(replies.iter().all(|r| r.labels.is_none()));
    }

    #[test]
    fn feature_dim_sum_matches_oracle() {
        let mut st = setup(ModelKind::LogisticTaylor, 3);
        let w = [0.4, -1.2, 0.7, 2.0, -0.3];
        let rows = st.parties[0].select_batch(1, 2, 3).unwrap();
        let replies: Vec<PartyReply> = (0..2)
            .map(|i| {
                let r = st.parties[i].range();
                st.parties[i].query_party(&query(QueryKind::Gradient, Mode::Linear, 3, w[r].to_vec())).unwrap()
            })
            .collect();
        let a: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, 0.1 * i as f64]).collect();
        let b: Vec<Vec<f64>> = (0..6).map(|i| vec![0.5 - 0.05 * i as f64, 0.2, 0.3]).collect();
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        for (k, &r) in rows.iter().enumerate() {
            let full: Vec<f64> = a[r].iter().chain(&b[r]).copied().collect();
            let expect = 0.25 * dot(&w, &full) - y[r] + 0.5;
            let got = decrypt_sum(&mut st.tpa, &replies, k) as f64 / 1000.0;
            assert!((got - expect).abs() <= 1e-3, "{got} vs {expect}");
        }
    }

    #[test]
    fn reply_shapes_and_label_disclosure() {
        let mut st = setup(ModelKind::Logistic, 2);
        let grad = st.parties[1].query_party(&query(QueryKind::Gradient, Mode::Nonlinear, 2, vec![0.0; 3])).unwrap();
        assert_eq!((grad.feature_dim.len(), grad.sample_dim.len()), (2, 3));
        assert!(grad.labels.is_none());
        let active = st.parties[0].query_party(&query(QueryKind::Gradient, Mode::Nonlinear, 2, vec![0.0; 2])).unwrap();
        assert_eq!(active.labels.as_ref().map(Vec::len), Some(2));
        let loss = st.parties[1].query_party(&query(QueryKind::Loss, Mode::Nonlinear, 2, vec![0.0; 3])).unwrap();
        assert!(loss.sample_dim.is_empty());
        assert_eq!((loss.epoch, loss.b_idx), (1, 2));
    }

    #[test]
    fn no_feature_value_leaves_the_party() {
        let (ctx, _) = fixture();
        let mut st = setup(ModelKind::LinearRegression, 6);
        let reply = st.parties[1].query_party(&query(QueryKind::Gradient, Mode::Linear, 6, vec![0.3; 3])).unwrap();
        let bytes = Message::Reply(reply).encode(ctx);
        let b: Vec<Vec<f64>> = (0..6).map(|i| vec![0.5 - 0.05 * i as f64, 0.2, 0.3]).collect();
        for v in b.iter().flatten().filter(|v| **v != 0.0) {
            let pattern = v.to_bits().to_be_bytes();
            assert!(!bytes.windows(8).any(|w| w == pattern), "feature {v} found in reply");
        }
    }

    #[test]
    fn weight_slices_are_checked() {
        let mut st = setup(ModelKind::LinearRegression, 2);
        assert!(st.parties[0].receive_partial_weights(&[1.0, 2.0]).is_ok());
        assert_eq!(st.parties[0].receive_partial_weights(&[1.0]), Err(Error::Dimension { expected: 2, actual: 1 }));
        assert!(st.parties[1].query_party(&query(QueryKind::Gradient, Mode::Linear, 2, vec![0.0; 2])).is_err());
        assert!(st.parties[1].query_party(&query(QueryKind::Gradient, Mode::Nonlinear, 2, vec![0.0; 3])).is_err());
        assert!(st.parties[1].query_party(&query(QueryKind::Gradient, Mode::Linear, 3, vec![0.0; 3])).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let mut st = setup(ModelKind::LinearRegression, 2);
        let r = st.parties[1].query_party(&query(QueryKind::Gradient, Mode::Linear, 2, vec![100.0; 3]));
        assert!(matches!(r, Err(Error::Overflow { .. })));
    }

    #[test]
    fn alignment_reorders_rows() {
        let mut st = setup(ModelKind::LinearRegression, 2);
        let p = &mut st.parties[1];
        let perm = vec![Some(2), None, Some(0), Some(1), None, None];
        let before = p.shard.features.clone();
        p.apply_alignment(&perm).unwrap();
        assert_eq!(p.shard.features, vec![before[2].clone(), before[3].clone(), before[0].clone()]);
        assert_eq!(p.shard.ids, vec!["id-2".to_string(), "id-3".to_string(), "id-0".to_string()]);
        assert_eq!(p.rows(), 3);
    }
}
