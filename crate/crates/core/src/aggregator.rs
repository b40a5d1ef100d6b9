//! Aggregator-side computation: fusion vectors, feature-dimension and
//! sample-dimension decryption, residual evaluation and loss.
//!
//! The aggregator only holds public parameters and functional keys issued by
//! the authority, so everything it learns is a sum over parties or samples.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::Range;

use crate::dlog::DlogTable;
use crate::encoding::FixedPointCodec;
use crate::error::{Error, Result};
use crate::group::GroupContext;
use crate::mife::{self, MifeCiphertext, MifeDerivedKey};
use crate::models::{self, Mode, ModelKind};
use crate::sife::{self, SifeDerivedKey};
use crate::tpa::AggregatorBundle;
use crate::wire::{PartyReply, QueryKind};

pub use crate::models::update_weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// `live <= t`: the authority would refuse the fusion vector.
    Quorum { live: usize, threshold: usize },
    /// The label holder did not answer.
    ActiveAbsent,
}

impl SkipReason {
    pub fn name(self) -> &'static str {
        match self {
            SkipReason::Quorum { .. } => "skipped_quorum",
            SkipReason::ActiveAbsent => "skipped_active_absent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BatchOutcome {
    Gradient(Vec<f64>),
    Skipped(SkipReason),
}

pub struct Aggregator {
    ctx: GroupContext,
    codec: FixedPointCodec,
    kind: ModelKind,
    bundle: AggregatorBundle,
    table: Arc<DlogTable>,
    ranges: Vec<Range<usize>>,
    active: usize,
    lambda: f64,
}

impl core::fmt::Debug for Aggregator {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Aggregator")
            .field("kind", &self.kind)
            .field("ranges", &self.ranges)
            .field("active", &self.active)
            .finish_non_exhaustive()
    }
}

impl Aggregator {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ctx: GroupContext,
        codec: FixedPointCodec,
        kind: ModelKind,
        bundle: AggregatorBundle,
        table: Arc<DlogTable>,
        ranges: Vec<Range<usize>>,
        active: usize,
        lambda: f64,
    ) -> Result<Self> {
        let n = bundle.policy.n;
        if ranges.len() != n {
            return Err(Error::Dimension { expected: n, actual: ranges.len() });
        }
        let mut next = 0;
        for r in &ranges {
            if r.start != next || r.is_empty() {
                return Err(Error::Config("feature ranges must partition 0..d contiguously".into()));
            }
            next = r.end;
        }
        if active >= n {
            return Err(Error::Config("active party index out of range".into()));
        }
        if table.modulus() != ctx.modulus() || table.generator() != ctx.generator().value() {
            return Err(Error::Config("dlog table belongs to a different group".into()));
        }
        let bound = codec.dlog_bound_for(bundle.policy.s, n);
        if bound > ctx.max_dlog_bound() {
            return Err(Error::BoundTooLarge { bound });
        }
        Ok(Self { ctx, codec, kind, bundle, table, ranges, active, lambda })
    }

    pub fn parties(&self) -> usize {
        self.ranges.len()
    }

    pub fn dimension(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn batch_size(&self) -> usize {
        self.bundle.policy.s
    }

    pub fn policy(&self) -> &crate::tpa::IpmPolicy {
        &self.bundle.policy
    }

    pub fn active(&self) -> usize {
        self.active
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Splits `w` by feature ownership; each party only ever sees its slice.
    pub fn partial_weights(&self, w: &[f64]) -> Result<Vec<Vec<f64>>> {
        if w.len() != self.dimension() {
            return Err(Error::Dimension { expected: self.dimension(), actual: w.len() });
        }
        Ok(self.ranges.iter().map(|r| w[r.clone()].to_vec()).collect())
    }

    /// All ones, with zeros for parties that did not reply.
    pub fn fusion_vector(replies: &[Option<PartyReply>]) -> Vec<i64> {
        replies.iter().map(|r| i64::from(r.is_some())).collect()
    }

    /// Reasons to skip the batch before asking for any key.
    pub fn precheck(&self, replies: &[Option<PartyReply>]) -> Option<SkipReason> {
        if replies.get(self.active).is_none_or(Option::is_none) {
            return Some(SkipReason::ActiveAbsent);
        }
        let live = replies.iter().flatten().count();
        if !self.bundle.policy.quorum(live) {
            return Some(SkipReason::Quorum { live, threshold: self.bundle.policy.t });
        }
        None
    }

    /// Checks shapes and tags of the replies for batch `(epoch, b_idx)`.
    pub fn validate_replies(
        &self,
        replies: &[Option<PartyReply>],
        query: QueryKind,
        epoch: u32,
        b_idx: u32,
    ) -> Result<()> {
        if replies.len() != self.parties() {
            return Err(Error::Dimension { expected: self.parties(), actual: replies.len() });
        }
        let s = self.batch_size();
        for (i, reply) in replies.iter().enumerate() {
            let Some(r) = reply else { continue };
            if r.party as usize != i || r.epoch != epoch || r.b_idx != b_idx || r.mode != self.kind.mode() {
                return Err(Error::Protocol(alloc::format!("reply header from party {i} does not match the batch")));
            }
            if r.feature_dim.len() != s || r.feature_dim.iter().any(|ct| ct.slot != i + 1 || ct.c.len() != 1) {
                return Err(Error::Protocol(alloc::format!("malformed feature-dimension payload from party {i}")));
            }
            let expect_cols = if query == QueryKind::Gradient { self.ranges[i].len() } else { 0 };
            if r.sample_dim.len() != expect_cols || r.sample_dim.iter().any(|ct| ct.cts.len() != s) {
                return Err(Error::Protocol(alloc::format!("malformed sample-dimension payload from party {i}")));
            }
            let wants_labels = i == self.active && self.kind.mode() == Mode::Nonlinear;
            match &r.labels {
                Some(y) if wants_labels && y.len() == s => {}
                None if !wants_labels => {}
                _ => return Err(Error::Protocol(alloc::format!("unexpected label payload from party {i}"))),
            }
        }
        Ok(())
    }

    /// Per-sample MIFE decryption: sum over live parties of their encoded scalars.
    pub fn feature_dim(&self, replies: &[Option<PartyReply>], key: &MifeDerivedKey) -> Result<Vec<i64>> {
        let bound = u64::try_from(self.codec.feature_dim_bound(self.parties()))
            .map_err(|_| Error::BoundTooLarge { bound: self.codec.feature_dim_bound(self.parties()) })?;
        (0..self.batch_size())
            .map(|k| {
                let cts: Vec<Option<MifeCiphertext>> =
                    replies.iter().map(|r| r.as_ref().map(|r| r.feature_dim[k].clone())).collect();
                mife::decrypt(&self.ctx, &cts, key, &self.table, bound)
            })
            .collect()
    }

    fn labels<'a>(&self, replies: &'a [Option<PartyReply>]) -> Option<&'a [f64]> {
        replies.get(self.active)?.as_ref()?.labels.as_deref()
    }

    /// Encoded residuals `u` for the sample-dimension key.
    ///
    /// Linear mode: the decrypted sums already are residuals. Nonlinear mode:
    /// decode `z`, evaluate the model residual against the labels, re-encode.
    pub fn residuals(&self, feature_dim: &[i64], replies: &[Option<PartyReply>]) -> Result<Vec<i64>> {
        match self.kind.mode() {
            Mode::Linear => {
                let max = self.codec.max_encoded();
                for &u in feature_dim {
                    if u.unsigned_abs() > max {
                        return Err(Error::Overflow { value: self.codec.decode(u, 1), bound: self.codec.bound() });
                    }
                }
                Ok(feature_dim.to_vec())
            }
            Mode::Nonlinear => {
                let y = self.labels(replies).ok_or_else(|| Error::Protocol("labels missing".into()))?;
                let z: Vec<f64> = feature_dim.iter().map(|&v| self.codec.decode(v, 1)).collect();
                let u = models::compute_u(self.kind, &z, y)?;
                self.codec.encode_all(&u)
            }
        }
    }

    /// Per-column SIFE decryption, assembled into the full gradient
    /// `(1/s) sum_k u_k x_k + lambda w`. Columns of absent parties contribute
    /// only the regularization term.
    pub fn sample_dim(
        &self,
        replies: &[Option<PartyReply>],
        u: &[i64],
        key: &SifeDerivedKey,
        w: &[f64],
    ) -> Result<Vec<f64>> {
        if key.y != u {
            return Err(Error::KeyMismatch);
        }
        let s = self.batch_size() as f64;
        let l1: u128 = u.iter().map(|v| u128::from(v.unsigned_abs())).sum();
        let bound =
            self.codec.sample_dim_bound(self.batch_size()).min(l1 * u128::from(self.codec.max_encoded())).max(1);
        let bound = u64::try_from(bound).map_err(|_| Error::BoundTooLarge { bound })?;
        let mut grad: Vec<f64> = w.iter().map(|wj| self.lambda * wj).collect();
        for (reply, range) in replies.iter().zip(&self.ranges) {
            let Some(r) = reply else { continue };
            for (j, ct) in range.clone().zip(&r.sample_dim) {
                let v = sife::decrypt(&self.ctx, ct, key, &self.table, bound)?;
                grad[j] += self.codec.decode(v, 2) / s;
            }
        }
        Ok(grad)
    }

    /// Unregularized batch loss from the feature-dimension outputs.
    pub fn batch_loss(&self, feature_dim: &[i64], replies: &[Option<PartyReply>]) -> Result<f64> {
        let values: Vec<f64> = feature_dim.iter().map(|&v| self.codec.decode(v, 1)).collect();
        models::loss_from_feature_dim(self.kind, &values, self.labels(replies))
    }
}
