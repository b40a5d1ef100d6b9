//! Model mathematics and plaintext reference training.
//!
//! All models are generalized linear: the prediction depends on `z = w^T x`,
//! and every gradient has the form `(1/s) sum_k u_k x_k + lambda w` for a
//! per-sample residual `u_k`. The secure protocol reproduces exactly that sum.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::otp::OtpChain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    LinearRegression,
    Logistic,
    LogisticTaylor,
    SvmSquaredHinge,
}

/// How residuals reach the aggregator.
///
/// In linear mode the active party folds labels into its ciphertext and the
/// feature-dimension sum already is the residual; in nonlinear mode the
/// aggregator receives `z` and plaintext labels and evaluates the residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Linear,
    Nonlinear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] =
        [ModelKind::LinearRegression, ModelKind::Logistic, ModelKind::LogisticTaylor, ModelKind::SvmSquaredHinge];

    pub fn mode(self) -> Mode {
        match self {
            ModelKind::LinearRegression | ModelKind::LogisticTaylor => Mode::Linear,
            ModelKind::Logistic | ModelKind::SvmSquaredHinge => Mode::Nonlinear,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LinearRegression => "linear_regression",
            ModelKind::Logistic => "logistic",
            ModelKind::LogisticTaylor => "logistic_taylor",
            ModelKind::SvmSquaredHinge => "linear_svm_sq_hinge",
        }
    }

    pub fn is_classifier(self) -> bool {
        self != ModelKind::LinearRegression
    }

    /// `(slope, intercept)` of the linear-mode residual `u = slope * z - y + intercept`.
    pub fn linear_fold(self) -> Option<(f64, f64)> {
        match self {
            ModelKind::LinearRegression => Some((1.0, 0.0)),
            ModelKind::LogisticTaylor => Some((0.25, 0.5)),
            _ => None,
        }
    }

    /// Labels of the negative and positive class, or `None` for regression.
    pub fn classes(self) -> Option<(f64, f64)> {
        match self {
            ModelKind::LinearRegression => None,
            ModelKind::Logistic | ModelKind::LogisticTaylor => Some((0.0, 1.0)),
            ModelKind::SvmSquaredHinge => Some((-1.0, 1.0)),
        }
    }

    pub fn check_label(self, y: f64) -> Result<()> {
        let ok = match self.classes() {
            None => y.is_finite(),
            Some((neg, pos)) => y == neg || y == pos,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Label(y))
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_regression" | "linear" => Ok(ModelKind::LinearRegression),
            "logistic" => Ok(ModelKind::Logistic),
            "logistic_taylor" | "taylor" => Ok(ModelKind::LogisticTaylor),
            "linear_svm_sq_hinge" | "svm" => Ok(ModelKind::SvmSquaredHinge),
            other => Err(Error::Config(alloc::format!("unknown model kind `{other}`"))),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

/// Per-sample residual `u` such that the loss gradient is `u * x`.
pub fn residual(kind: ModelKind, z: f64, y: f64) -> f64 {
    match kind {
        ModelKind::LinearRegression => z - y,
        ModelKind::Logistic => sigmoid(z) - y,
        ModelKind::LogisticTaylor => 0.25 * z - y + 0.5,
        ModelKind::SvmSquaredHinge => -2.0 * y * (1.0 - y * z).max(0.0),
    }
}

pub fn compute_u(kind: ModelKind, z: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if z.len() != y.len() {
        return Err(Error::Dimension { expected: z.len(), actual: y.len() });
    }
    z.iter()
        .zip(y)
        .map(|(&zk, &yk)| {
            kind.check_label(yk)?;
            Ok(residual(kind, zk, yk))
        })
        .collect()
}

/// Per-sample loss whose derivative in `z` is [`residual`].
pub fn sample_loss(kind: ModelKind, z: f64, y: f64) -> f64 {
    match kind {
        ModelKind::LinearRegression => 0.5 * (z - y) * (z - y),
        ModelKind::Logistic => softplus(z) - y * z,
        ModelKind::LogisticTaylor => core::f64::consts::LN_2 + (0.5 - y) * z + z * z / 8.0,
        ModelKind::SvmSquaredHinge => {
            let m = (1.0 - y * z).max(0.0);
            m * m
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_shapes(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), actual: y.len() });
    }
    if x.is_empty() {
        return Err(Error::Dimension { expected: 1, actual: 0 });
    }
    for row in x {
        if row.len() != w.len() {
            return Err(Error::Dimension { expected: w.len(), actual: row.len() });
        }
    }
    Ok(())
}

/// Mean loss over the rows of `x`, without regularization.
pub fn oracle_loss(kind: ModelKind, x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<f64> {
    check_shapes(x, y, w)?;
    let mut total = 0.0;
    for (row, &yk) in x.iter().zip(y) {
        kind.check_label(yk)?;
        total += sample_loss(kind, dot(w, row), yk);
    }
    Ok(total / x.len() as f64)
}

/// [`oracle_loss`] plus `lambda/2 * |w|^2`.
pub fn objective(kind: ModelKind, x: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> Result<f64> {
    Ok(oracle_loss(kind, x, y, w)? + 0.5 * lambda * dot(w, w))
}

/// `(1/s) sum_k u_k x_k + lambda w`.
pub fn oracle_gradient(kind: ModelKind, x: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_shapes(x, y, w)?;
    let s = x.len() as f64;
    let mut g: Vec<f64> = w.iter().map(|wj| lambda * wj).collect();
    for (row, &yk) in x.iter().zip(y) {
        kind.check_label(yk)?;
        let u = residual(kind, dot(w, row), yk) / s;
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += u * xj;
        }
    }
    Ok(g)
}

/// Batch loss from feature-dimension outputs alone.
///
/// Linear mode supplies the residuals `u`; nonlinear mode supplies `z` and labels.
pub fn loss_from_feature_dim(kind: ModelKind, values: &[f64], labels: Option<&[f64]>) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Dimension { expected: 1, actual: 0 });
    }
    let s = values.len() as f64;
    let total: f64 = match (kind, labels) {
        (ModelKind::LinearRegression, _) => values.iter().map(|u| 0.5 * u * u).sum(),
        // ln2 + (1/2 - y) z + z^2/8 = ln2 + 2u^2 - 1/2 for y in {0, 1}
        (ModelKind::LogisticTaylor, _) => values.iter().map(|u| core::f64::consts::LN_2 + 2.0 * u * u - 0.5).sum(),
        (_, Some(y)) => {
            if y.len() != values.len() {
                return Err(Error::Dimension { expected: values.len(), actual: y.len() });
            }
            let mut acc = 0.0;
            for (&z, &yk) in values.iter().zip(y) {
                kind.check_label(yk)?;
                acc += sample_loss(kind, z, yk);
            }
            acc
        }
        (_, None) => return Err(Error::Protocol("nonlinear loss needs labels".into())),
    };
    Ok(total / s)
}

pub fn predict(kind: ModelKind, z: f64) -> f64 {
    match kind.classes() {
        None => z,
        Some((neg, pos)) => {
            if z >= 0.0 {
                pos
            } else {
                neg
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub samples: usize,
    pub accuracy: Option<f64>,
    pub confusion: Option<Confusion>,
    pub mse: f64,
}

pub fn evaluate(kind: ModelKind, x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<Evaluation> {
    check_shapes(x, y, w)?;
    let mut confusion = Confusion::default();
    let mut se = 0.0;
    for (row, &yk) in x.iter().zip(y) {
        let z = dot(w, row);
        se += (z - yk) * (z - yk);
        if let Some((_, pos)) = kind.classes() {
            kind.check_label(yk)?;
            match (predict(kind, z) == pos, yk == pos) {
                (true, true) => confusion.tp += 1,
                (true, false) => confusion.fp += 1,
                (false, false) => confusion.tn += 1,
                (false, true) => confusion.fn_ += 1,
            }
        }
    }
    let n = x.len();
    let (accuracy, confusion) = if kind.is_classifier() {
        (Some((confusion.tp + confusion.tn) as f64 / n as f64), Some(confusion))
    } else {
        (None, None)
    };
    Ok(Evaluation { samples: n, accuracy, confusion, mse: se / n as f64 })
}

/// `w - alpha * g`.
pub fn update_weights(w: &[f64], g: &[f64], alpha: f64) -> Vec<f64> {
    w.iter().zip(g).map(|(wj, gj)| wj - alpha * gj).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// One step per batch.
    PerBatch,
    /// One step per epoch from the mean of the epoch's batch gradients.
    PerEpoch,
}

impl FromStr for UpdateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_batch" => Ok(UpdateRule::PerBatch),
            "per_epoch" => Ok(UpdateRule::PerEpoch),
            other => Err(Error::Config(alloc::format!("unknown update rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub alpha: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub batches_per_epoch: u32,
    pub epochs: u32,
    pub update: UpdateRule,
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("regularization must be non-negative".into()));
        }
        if self.batch_size == 0 || self.batches_per_epoch == 0 {
            return Err(Error::Config("batch size and batches per epoch must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EpochStats {
    pub applied: u32,
    pub skipped: u32,
}

/// Runs one epoch. `batch_gradient(w, b_idx)` returns `None` for a skipped batch.
///
/// Skipped batches are excluded from the per-epoch mean; an epoch with no
/// usable batch leaves `w` unchanged.
pub fn run_epoch<F>(w: &mut Vec<f64>, params: &TrainParams, epoch: u32, mut batch_gradient: F) -> Result<EpochStats>
where
    F: FnMut(&[f64], u32) -> Result<Option<Vec<f64>>>,
{
    let mut stats = EpochStats::default();
    let mut sum = alloc::vec![0.0; w.len()];
    for b in 0..params.batches_per_epoch {
        match batch_gradient(w, b)? {
            None => stats.skipped += 1,
            Some(g) => {
                if g.len() != w.len() {
                    return Err(Error::Dimension { expected: w.len(), actual: g.len() });
                }
                stats.applied += 1;
                match params.update {
                    UpdateRule::PerBatch => *w = update_weights(w, &g, params.alpha),
                    UpdateRule::PerEpoch => sum.iter_mut().zip(&g).for_each(|(s, gj)| *s += gj),
                }
            }
        }
    }
    if params.update == UpdateRule::PerEpoch && stats.applied > 0 {
        let mean: Vec<f64> = sum.iter().map(|s| s / f64::from(stats.applied)).collect();
        *w = update_weights(w, &mean, params.alpha);
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { epoch });
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub weights: Vec<f64>,
    /// Weights after each epoch.
    pub history: Vec<Vec<f64>>,
    /// Unregularized loss over the full training set after each epoch.
    pub losses: Vec<f64>,
}

/// Plaintext mini-batch SGD from `w = 0`, drawing batches exactly as the parties do.
pub fn centralized_train(
    kind: ModelKind,
    x: &[Vec<f64>],
    y: &[f64],
    params: &TrainParams,
    otp: &OtpChain,
) -> Result<TrainOutcome> {
    params.validate()?;
    let d = x.first().map(Vec::len).ok_or(Error::Dimension { expected: 1, actual: 0 })?;
    let mut w = alloc::vec![0.0; d];
    check_shapes(x, y, &w)?;
    let mut history = Vec::with_capacity(params.epochs as usize);
    let mut losses = Vec::with_capacity(params.epochs as usize);
    for epoch in 0..params.epochs {
        run_epoch(&mut w, params, epoch, |w, b| {
            let rows = otp.select_batch(epoch, b, params.batch_size, x.len())?;
            let bx: Vec<Vec<f64>> = rows.iter().map(|&r| x[r].clone()).collect();
            let by: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
            oracle_gradient(kind, &bx, &by, w, params.lambda).map(Some)
        })?;
        let loss = oracle_loss(kind, x, y, &w)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(w.clone());
        losses.push(loss);
    }
    Ok(TrainOutcome { weights: w, history, losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand_chacha::ChaCha20Rng;
    use rand_core::{RngCore, SeedableRng};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn residual_examples() {
        assert!(close(compute_u(ModelKind::Logistic, &[0.0], &[0.0]).unwrap()[0], 0.5));
        assert!(close(compute_u(ModelKind::LogisticTaylor, &[0.0], &[1.0]).unwrap()[0], -0.5));
        assert!(close(compute_u(ModelKind::SvmSquaredHinge, &[2.0], &[1.0]).unwrap()[0], 0.0));
        assert!(close(compute_u(ModelKind::SvmSquaredHinge, &[0.0], &[1.0]).unwrap()[0], -2.0));
        assert_eq!(compute_u(ModelKind::SvmSquaredHinge, &[0.0], &[0.0]), Err(Error::Label(0.0)));
        assert_eq!(compute_u(ModelKind::Logistic, &[0.0], &[-1.0]), Err(Error::Label(-1.0)));
    }

    #[test]
    fn gradient_examples() {
        let x = vec![vec![2.0, 0.0]];
        let g = oracle_gradient(ModelKind::LinearRegression, &x, &[1.0], &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(g, vec![-2.0, 0.0]);
        let g = oracle_gradient(ModelKind::LogisticTaylor, &x, &[1.0], &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(g, vec![-1.0, 0.0]);
        let g = oracle_gradient(ModelKind::LinearRegression, &x, &[0.0], &[1.0, 3.0], 0.5).unwrap();
        // residual 2, gradient 2 * (2, 0) + 0.5 * (1, 3)
        assert_eq!(g, vec![4.5, 1.5]);
        assert!(oracle_gradient(ModelKind::Logistic, &x, &[1.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn loss_examples() {
        let l = oracle_loss(ModelKind::Logistic, &[vec![1.0]], &[1.0], &[0.0]).unwrap();
        assert!(close(l, core::f64::consts::LN_2));
        let x = vec![vec![1.0, 2.0], vec![0.5, -1.0]];
        let w = [2.0, 1.0];
        let y: Vec<f64> = x.iter().map(|r| dot(&w, r)).collect();
        assert_eq!(oracle_loss(ModelKind::LinearRegression, &x, &y, &w).unwrap(), 0.0);
        let l = oracle_loss(ModelKind::SvmSquaredHinge, &x, &[1.0, -1.0], &[1.0, 1.0]).unwrap();
        // margins: 3 and 0.5 -> only the second contributes (1 - 0.5)^2
        assert!(close(l, 0.125));
        let sep = oracle_loss(ModelKind::SvmSquaredHinge, &x, &[1.0, 1.0], &[2.0, 0.0]).unwrap();
        assert_eq!(sep, 0.0);
    }

    #[test]
    fn feature_dim_loss_matches_oracle() {
        let x = vec![vec![0.3, 1.0], vec![0.9, -0.4], vec![-0.2, 0.7]];
        let y = [1.0, 0.0, 1.0];
        let w = [0.8, -1.3];
        let z: Vec<f64> = x.iter().map(|r| dot(&w, r)).collect();
        for kind in [ModelKind::LinearRegression, ModelKind::LogisticTaylor] {
            let u = compute_u(kind, &z, &y).unwrap();
            let a = loss_from_feature_dim(kind, &u, None).unwrap();
            let b = oracle_loss(kind, &x, &y, &w).unwrap();
            assert!((a - b).abs() < 1e-12, "{kind}");
        }
        let a = loss_from_feature_dim(ModelKind::Logistic, &z, Some(&y)).unwrap();
        assert!((a - oracle_loss(ModelKind::Logistic, &x, &y, &w).unwrap()).abs() < 1e-12);
        assert!(loss_from_feature_dim(ModelKind::Logistic, &z, None).is_err());
        let l = loss_from_feature_dim(ModelKind::Logistic, &[0.0], Some(&[1.0])).unwrap();
        assert!(close(l, core::f64::consts::LN_2));
    }

    #[test]
    fn taylor_is_linear_pipeline_on_shifted_residual() {
        // slope * z - y + intercept with the fold constants is the Taylor residual
        let (slope, intercept) = ModelKind::LogisticTaylor.linear_fold().unwrap();
        for (z, y) in [(0.3, 1.0), (-2.0, 0.0), (5.0, 1.0)] {
            assert!(close(slope * z - y + intercept, residual(ModelKind::LogisticTaylor, z, y)));
        }
        let (slope, intercept) = ModelKind::LinearRegression.linear_fold().unwrap();
        assert!(close(slope * 1.5 - 0.5 + intercept, 1.0));
        assert_eq!(ModelKind::Logistic.linear_fold(), None);
    }

    #[test]
    fn update_rule_examples() {
        assert_eq!(update_weights(&[1.0, 2.0], &[0.0, 0.0], 0.3), vec![1.0, 2.0]);
        assert_eq!(update_weights(&[0.0, 0.0], &[1.0, -1.0], 1.0), vec![-1.0, 1.0]);
        let half = update_weights(&update_weights(&[1.0], &[4.0], 0.25), &[4.0], 0.25);
        assert_eq!(half, update_weights(&[1.0], &[4.0], 0.5));
    }

    fn separable() -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let t = i as f64 / 40.0;
            x.push(vec![1.0, t, 1.0 - t]);
            y.push(if t > 0.5 { 1.0 } else { 0.0 });
        }
        (x, y)
    }

    fn params(epochs: u32) -> TrainParams {
        TrainParams {
            alpha: 2.0,
            lambda: 0.0,
            batch_size: 8,
            batches_per_epoch: 5,
            epochs,
            update: UpdateRule::PerBatch,
        }
    }

    #[test]
    fn centralized_training_examples() {
        let (x, y) = separable();
        let otp = OtpChain::new([9; 32]);
        let out = centralized_train(ModelKind::Logistic, &x, &y, &params(300), &otp).unwrap();
        let eval = evaluate(ModelKind::Logistic, &x, &y, &out.weights).unwrap();
        assert_eq!(eval.accuracy, Some(1.0));
        let again = centralized_train(ModelKind::Logistic, &x, &y, &params(300), &otp).unwrap();
        assert_eq!(out, again);
        let none = centralized_train(ModelKind::Logistic, &x, &y, &params(0), &otp).unwrap();
        assert_eq!(none.weights, vec![0.0; 3]);

        let svm_y: Vec<f64> = y.iter().map(|v| 2.0 * v - 1.0).collect();
        let out = centralized_train(ModelKind::SvmSquaredHinge, &x, &svm_y, &params(300), &otp).unwrap();
        assert_eq!(evaluate(ModelKind::SvmSquaredHinge, &x, &svm_y, &out.weights).unwrap().accuracy, Some(1.0));
    }

    #[test]
    fn divergence_detected() {
        let x = vec![vec![100.0], vec![-100.0]];
        let y = [1e6, -1e6];
        let otp = OtpChain::new([1; 32]);
        let p = TrainParams { alpha: 10.0, ..params(500) };
        let p = TrainParams { batch_size: 2, ..p };
        assert!(matches!(
            centralized_train(ModelKind::LinearRegression, &x, &y, &p, &otp),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn per_epoch_mean_skips_missing_batches() {
        let p = TrainParams {
            alpha: 1.0,
            lambda: 0.0,
            batch_size: 1,
            batches_per_epoch: 3,
            epochs: 1,
            update: UpdateRule::PerEpoch,
        };
        let mut w = vec![0.0];
        let stats =
            run_epoch(&mut w, &p, 0, |_, b| Ok(if b == 1 { None } else { Some(vec![f64::from(b) + 1.0]) })).unwrap();
        assert_eq!(stats, EpochStats { applied: 2, skipped: 1 });
        // mean of 1 and 3
        assert_eq!(w, vec![-2.0]);
    }

    #[test]
    fn confusion_counts() {
        let x = vec![vec![1.0], vec![-1.0], vec![2.0], vec![-3.0]];
        let y = [1.0, 1.0, 0.0, 0.0];
        let e = evaluate(ModelKind::Logistic, &x, &y, &[1.0]).unwrap();
        assert_eq!(e.confusion, Some(Confusion { tp: 1, fp: 1, tn: 1, fn_: 1 }));
        assert_eq!(e.accuracy, Some(0.5));
    }

    fn random_instance(rng: &mut ChaCha20Rng, kind: ModelKind) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let s = 1 + (unit() * 6.0) as usize;
        let d = 1 + (unit() * 5.0) as usize;
        let x: Vec<Vec<f64>> = (0..s).map(|_| (0..d).map(|_| unit() * 2.0 - 1.0).collect()).collect();
        let w: Vec<f64> = (0..d).map(|_| unit() * 2.0 - 1.0).collect();
        let y = (0..s)
            .map(|_| match kind.classes() {
                None => unit() * 4.0 - 2.0,
                Some((neg, pos)) => {
                    if unit() < 0.5 {
                        neg
                    } else {
                        pos
                    }
                }
            })
            .collect();
        (x, y, w)
    }

    /// Central differences of the regularized objective against the analytic gradient.
    fn finite_difference_agrees(kind: ModelKind, x: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> bool {
        let g = oracle_gradient(kind, x, y, w, lambda).unwrap();
        let h = 1e-6;
        g.iter().enumerate().all(|(j, &gj)| {
            let mut plus = w.to_vec();
            let mut minus = w.to_vec();
            plus[j] += h;
            minus[j] -= h;
            let fd = (objective(kind, x, y, &plus, lambda).unwrap() - objective(kind, x, y, &minus, lambda).unwrap())
                / (2.0 * h);
            (fd - gj).abs() <= 1e-5 * gj.abs().max(1.0)
        })
    }

    fn away_from_kink(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> bool {
        x.iter().zip(y).all(|(r, yk)| (1.0 - yk * dot(w, r)).abs() > 1e-3)
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(seed in any::<u64>(), lambda in 0.0f64..0.5) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            for kind in ModelKind::ALL {
                let (x, y, w) = random_instance(&mut rng, kind);
                if kind == ModelKind::SvmSquaredHinge && !away_from_kink(&x, &y, &w) {
                    continue;
                }
                prop_assert!(finite_difference_agrees(kind, &x, &y, &w, lambda), "{}", kind);
            }
        }

        #[test]
        fn residual_sum_reproduces_gradient(seed in any::<u64>()) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            for kind in ModelKind::ALL {
                let (x, y, w) = random_instance(&mut rng, kind);
                let z: Vec<f64> = x.iter().map(|r| dot(&w, r)).collect();
                let u = compute_u(kind, &z, &y).unwrap();
                let s = x.len() as f64;
                let g = oracle_gradient(kind, &x, &y, &w, 0.1).unwrap();
                for j in 0..w.len() {
                    let via_u: f64 = u.iter().zip(&x).map(|(uk, r)| uk * r[j]).sum::<f64>() / s + 0.1 * w[j];
                    prop_assert!((via_u - g[j]).abs() < 1e-12);
                }
            }
        }
    }
}
