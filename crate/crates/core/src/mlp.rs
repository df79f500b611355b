//! From-scratch multilayer perceptron (default 15-10-1): tanh hidden
//! layer, logistic output, binary cross-entropy, full-batch resilient
//! backpropagation with per-weight adaptive steps, early stopping and a
//! hard wall-clock training budget. Retrained from scratch per window.

use std::io::{Read, Write};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch;
use crate::features::LabeledSample;
use crate::metrics::ConfusionCounts;

/// Clamp applied to predictions inside the loss so it stays finite.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub input_dim: usize,
    pub hidden: usize,
    /// Flat parameters: w1 (input x hidden, row-major by input), b1
    /// (hidden), w2 (hidden), b2 (1).
    pub params: Vec<f64>,
}

impl MlpModel {
    pub fn param_count(input_dim: usize, hidden: usize) -> usize {
        input_dim * hidden + hidden + hidden + 1
    }

    fn w1(&self, i: usize, j: usize) -> f64 {
        self.params[i * self.hidden + j]
    }

    fn b1(&self, j: usize) -> f64 {
        self.params[self.input_dim * self.hidden + j]
    }

    fn w2(&self, j: usize) -> f64 {
        self.params[self.input_dim * self.hidden + self.hidden + j]
    }

    fn b2(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    /// Hidden activations for one input.
    fn hidden_out(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim);
        (0..self.hidden)
            .map(|j| {
                let mut z = self.b1(j);
                for (i, xi) in x.iter().enumerate() {
                    z += xi * self.w1(i, j);
                }
                z.tanh()
            })
            .collect()
    }

    /// Posterior score in (0,1).
    pub fn forward(&self, x: &[f64]) -> f64 {
        let h = self.hidden_out(x);
        let mut z = self.b2();
        for (j, hj) in h.iter().enumerate() {
            z += hj * self.w2(j);
        }
        sigmoid(z)
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Weights drawn uniform in [-0.5, 0.5]; deterministic per seed.
pub fn init_network(input_dim: usize, hidden: usize, seed: u64) -> MlpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = (0..MlpModel::param_count(input_dim, hidden))
        .map(|_| rng.random_range(-0.5..0.5))
        .collect();
    MlpModel { input_dim, hidden, params }
}

fn loss_chunk(model: &MlpModel, xs: &[Vec<f64>], ys: &[f64], range: std::ops::Range<usize>) -> f64 {
    let mut sum = 0.0;
    for i in range {
        let p = model.forward(&xs[i]).clamp(PROB_EPS, 1.0 - PROB_EPS);
        sum -= ys[i] * p.ln() + (1.0 - ys[i]) * (1.0 - p).ln();
    }
    sum
}

/// Summed binary cross-entropy with clamped predictions.
pub fn cross_entropy(model: &MlpModel, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    batch::chunked_fold(xs.len(), |r| loss_chunk(model, xs, ys, r), |a, b| a + b, 0.0)
}

/// Sequential variant with identical chunking (bit-identical result);
/// used by the benchmark suite.
pub fn cross_entropy_seq(model: &MlpModel, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    batch::chunked_fold_seq(xs.len(), |r| loss_chunk(model, xs, ys, r), |a, b| a + b, 0.0)
}

fn gradient_chunk(
    model: &MlpModel,
    xs: &[Vec<f64>],
    ys: &[f64],
    range: std::ops::Range<usize>,
) -> Vec<f64> {
    let n_params = model.params.len();
    let (input_dim, hidden) = (model.input_dim, model.hidden);
    let mut g = vec![0.0; n_params];
    for i in range {
        let x = &xs[i];
        let h = model.hidden_out(x);
        let mut z = model.b2();
        for (j, hj) in h.iter().enumerate() {
            z += hj * model.w2(j);
        }
        let p = sigmoid(z);
        let dz = p - ys[i]; // d(sum CE)/dz for sigmoid + CE
        for (j, hj) in h.iter().enumerate() {
            g[input_dim * hidden + hidden + j] += dz * hj;
            let dpre = dz * model.w2(j) * (1.0 - hj * hj);
            g[input_dim * hidden + j] += dpre;
            for (i2, xi) in x.iter().enumerate() {
                g[i2 * hidden + j] += dpre * xi;
            }
        }
        g[n_params - 1] += dz;
    }
    g
}

fn add_grads(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    for (ai, bi) in a.iter_mut().zip(&b) {
        *ai += bi;
    }
    a
}

/// Analytic gradient of the summed cross-entropy over the batch, flat and
/// aligned with `model.params`.
pub fn gradient(model: &MlpModel, xs: &[Vec<f64>], ys: &[f64]) -> Vec<f64> {
    let n_params = model.params.len();
    batch::chunked_fold(
        xs.len(),
        |r| gradient_chunk(model, xs, ys, r),
        add_grads,
        vec![0.0; n_params],
    )
}

/// Sequential variant with identical chunking (bit-identical result);
/// used by the benchmark suite.
pub fn gradient_seq(model: &MlpModel, xs: &[Vec<f64>], ys: &[f64]) -> Vec<f64> {
    let n_params = model.params.len();
    batch::chunked_fold_seq(
        xs.len(),
        |r| gradient_chunk(model, xs, ys, r),
        add_grads,
        vec![0.0; n_params],
    )
}

#[derive(Debug, Clone)]
pub struct RpropConfig {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta0: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl Default for RpropConfig {
    fn default() -> Self {
        RpropConfig {
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta0: 0.1,
            delta_min: 1e-6,
            delta_max: 50.0,
        }
    }
}

/// Per-weight adaptive step state.
#[derive(Debug, Clone)]
pub struct RpropState {
    pub delta: Vec<f64>,
    prev_grad: Vec<f64>,
    prev_step: Vec<f64>,
}

impl RpropState {
    pub fn new(n_params: usize, cfg: &RpropConfig) -> Self {
        RpropState {
            delta: vec![cfg.delta0; n_params],
            prev_grad: vec![0.0; n_params],
            prev_step: vec![0.0; n_params],
        }
    }
}

/// One resilient-backpropagation update. Sign agreement grows the step,
/// disagreement shrinks it, reverts the previous update and clears the
/// stored gradient so the next epoch moves fresh.
pub fn rprop_step(params: &mut [f64], grad: &[f64], state: &mut RpropState, cfg: &RpropConfig) {
    for k in 0..params.len() {
        let sign_product = grad[k] * state.prev_grad[k];
        if sign_product > 0.0 {
            state.delta[k] = (state.delta[k] * cfg.eta_plus).min(cfg.delta_max);
            let step = -grad[k].signum() * state.delta[k];
            params[k] += step;
            state.prev_step[k] = step;
            state.prev_grad[k] = grad[k];
        } else if sign_product < 0.0 {
            state.delta[k] = (state.delta[k] * cfg.eta_minus).max(cfg.delta_min);
            params[k] -= state.prev_step[k];
            state.prev_step[k] = 0.0;
            state.prev_grad[k] = 0.0;
        } else {
            let step = if grad[k] == 0.0 { 0.0 } else { -grad[k].signum() * state.delta[k] };
            params[k] += step;
            state.prev_step[k] = step;
            state.prev_grad[k] = grad[k];
        }
    }
}

/// Which error curve drives early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EarlyStopSignal {
    /// Held-out validation fold (default).
    #[default]
    Validation,
    /// Literal training-error mode.
    Train,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Hard wall-clock budget for one training run, in seconds.
    pub max_seconds: f64,
    /// Stop after this many consecutive error increases.
    pub patience: u32,
    pub folds: usize,
    pub rprop: RpropConfig,
    pub max_epochs: usize,
    pub seed: u64,
    pub hidden: usize,
    pub early_stop_on: EarlyStopSignal,
    /// Rotate every fold through the test position and report metrics for
    /// each rotation.
    pub cv_full: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_seconds: 10.0,
            patience: 2,
            folds: 5,
            rprop: RpropConfig::default(),
            max_epochs: 200,
            seed: 0,
            hidden: 10,
            early_stop_on: EarlyStopSignal::Validation,
            cv_full: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    EarlyStop,
    TimeBudget,
    MaxEpochs,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::EarlyStop => "early_stop",
            StopReason::TimeBudget => "time_budget",
            StopReason::MaxEpochs => "max_epochs",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: usize,
    /// Mean training cross-entropy per sample at the returned weights.
    pub final_train_error: f64,
    /// Mean validation cross-entropy per epoch.
    pub validation_curve: Vec<f64>,
    pub stop_reason: StopReason,
    /// Confusion counts on the held-out test fold, one entry per rotation
    /// (a single entry unless `cv_full`).
    pub fold_tests: Vec<ConfusionCounts>,
    pub train_ms: u64,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("insufficient samples: {n_pos} positive / {n_neg} negative (need >= {min} each)")]
    Degenerate { n_pos: usize, n_neg: usize, min: usize },
    #[error("non-finite loss at epoch {epoch}")]
    Numeric { epoch: usize },
}

/// Tracks consecutive error increases; stops after `patience` in a row
/// and remembers the best epoch seen.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: u32,
    increases_in_row: u32,
    best_error: f64,
    pub best_epoch: usize,
    last_error: f64,
    epoch: usize,
}

impl EarlyStopper {
    pub fn new(patience: u32) -> Self {
        EarlyStopper {
            patience,
            increases_in_row: 0,
            best_error: f64::INFINITY,
            best_epoch: 0,
            last_error: f64::INFINITY,
            epoch: 0,
        }
    }

    /// Feed one epoch's error; true means stop now.
    pub fn observe(&mut self, error: f64) -> bool {
        self.epoch += 1;
        if error > self.last_error {
            self.increases_in_row += 1;
        } else {
            self.increases_in_row = 0;
        }
        if error < self.best_error {
            self.best_error = error;
            self.best_epoch = self.epoch;
        }
        self.last_error = error;
        self.increases_in_row >= self.patience
    }
}

/// Stratified, group-aware fold assignment: all samples sharing a record
/// id land in the same fold, so oversampled duplicates never straddle the
/// train/validation/test split.
fn assign_folds(samples: &[LabeledSample], folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut fold_of = vec![0usize; samples.len()];
    for label in [1u8, 0u8] {
        let mut groups: Vec<&str> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for s in samples {
            if s.label == label && seen.insert(s.record_id.as_str()) {
                groups.push(s.record_id.as_str());
            }
        }
        groups.sort_unstable();
        groups.shuffle(rng);
        let fold_by_group: std::collections::HashMap<&str, usize> = groups
            .iter()
            .enumerate()
            .map(|(i, id)| (*id, i % folds))
            .collect();
        for (i, s) in samples.iter().enumerate() {
            if s.label == label {
                fold_of[i] = fold_by_group[s.record_id.as_str()];
            }
        }
    }
    fold_of
}

struct FoldData {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

fn split_rotation(
    samples: &[LabeledSample],
    fold_of: &[usize],
    folds: usize,
    rotation: usize,
) -> (FoldData, FoldData, FoldData) {
    let test_fold = rotation % folds;
    let val_fold = (rotation + 1) % folds;
    let mut train = FoldData { xs: Vec::new(), ys: Vec::new() };
    let mut val = FoldData { xs: Vec::new(), ys: Vec::new() };
    let mut test = FoldData { xs: Vec::new(), ys: Vec::new() };
    for (s, &f) in samples.iter().zip(fold_of) {
        let dst = if f == test_fold {
            &mut test
        } else if f == val_fold {
            &mut val
        } else {
            &mut train
        };
        dst.xs.push(s.features.clone());
        dst.ys.push(s.label as f64);
    }
    (train, val, test)
}

fn confusion_at_half(model: &MlpModel, data: &FoldData) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (x, y) in data.xs.iter().zip(&data.ys) {
        let predicted = model.forward(x) >= 0.5;
        let actual = *y >= 0.5;
        match (predicted, actual) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// Train a fresh network on balanced samples (post-oversampling): 5
/// stratified folds, fold `r` = test, fold `r+1` = validation for early
/// stopping, the rest = training; full-batch RPROP on summed binary
/// cross-entropy.
pub fn train(
    samples: &[LabeledSample],
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainReport), TrainError> {
    let started = Instant::now();
    let n_pos = samples.iter().filter(|s| s.label == 1).count();
    let n_neg = samples.len() - n_pos;
    const MIN_PER_CLASS: usize = 10;
    if n_pos < MIN_PER_CLASS || n_neg < MIN_PER_CLASS {
        return Err(TrainError::Degenerate { n_pos, n_neg, min: MIN_PER_CLASS });
    }
    let input_dim = samples[0].features.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fold_of = assign_folds(samples, cfg.folds, &mut rng);

    let rotations = if cfg.cv_full { cfg.folds } else { 1 };
    let mut fold_tests = Vec::with_capacity(rotations);
    let mut primary: Option<(MlpModel, usize, f64, Vec<f64>, StopReason)> = None;

    for rotation in 0..rotations {
        let (train_data, val_data, test_data) =
            split_rotation(samples, &fold_of, cfg.folds, rotation);
        let mut model = init_network(input_dim, cfg.hidden, cfg.seed.wrapping_add(rotation as u64));
        let mut state = RpropState::new(model.params.len(), &cfg.rprop);
        let mut stopper = EarlyStopper::new(cfg.patience);
        let mut best_params = model.params.clone();
        let mut best_val = f64::INFINITY;
        let mut validation_curve = Vec::new();
        let mut stop_reason = StopReason::MaxEpochs;
        let mut epochs = 0;

        for epoch in 1..=cfg.max_epochs {
            let grad = gradient(&model, &train_data.xs, &train_data.ys);
            rprop_step(&mut model.params, &grad, &mut state, &cfg.rprop);
            epochs = epoch;

            let train_err = cross_entropy(&model, &train_data.xs, &train_data.ys)
                / train_data.xs.len().max(1) as f64;
            let val_err = if val_data.xs.is_empty() {
                train_err
            } else {
                cross_entropy(&model, &val_data.xs, &val_data.ys) / val_data.xs.len() as f64
            };
            if !train_err.is_finite() || !val_err.is_finite() {
                return Err(TrainError::Numeric { epoch });
            }
            validation_curve.push(val_err);
            if val_err < best_val {
                best_val = val_err;
                best_params.copy_from_slice(&model.params);
            }
            let monitored = match cfg.early_stop_on {
                EarlyStopSignal::Validation => val_err,
                EarlyStopSignal::Train => train_err,
            };
            if stopper.observe(monitored) {
                stop_reason = StopReason::EarlyStop;
                model.params.copy_from_slice(&best_params);
                break;
            }
            if started.elapsed().as_secs_f64() > cfg.max_seconds {
                stop_reason = StopReason::TimeBudget;
                break;
            }
        }

        fold_tests.push(confusion_at_half(&model, &test_data));
        if rotation == 0 {
            let final_train_error = cross_entropy(&model, &train_data.xs, &train_data.ys)
                / train_data.xs.len().max(1) as f64;
            primary = Some((model, epochs, final_train_error, validation_curve, stop_reason));
        }
    }

    let (model, epochs, final_train_error, validation_curve, stop_reason) =
        primary.expect("at least one rotation");
    Ok((
        model,
        TrainReport {
            epochs,
            final_train_error,
            validation_curve,
            stop_reason,
            fold_tests,
            train_ms: started.elapsed().as_millis() as u64,
        },
    ))
}

/// Versioned JSON model dump: `{version, input_dim, hidden, w1, b1, w2,
/// b2}` with `w1` row-major by input.
#[derive(Serialize, Deserialize)]
struct ModelDump {
    version: u32,
    input_dim: usize,
    hidden: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

pub fn dump_model<W: Write>(model: &MlpModel, w: W) -> std::io::Result<()> {
    let nw1 = model.input_dim * model.hidden;
    let dump = ModelDump {
        version: 1,
        input_dim: model.input_dim,
        hidden: model.hidden,
        w1: model.params[..nw1].to_vec(),
        b1: model.params[nw1..nw1 + model.hidden].to_vec(),
        w2: model.params[nw1 + model.hidden..nw1 + 2 * model.hidden].to_vec(),
        b2: model.params[model.params.len() - 1],
    };
    serde_json::to_writer(w, &dump).map_err(std::io::Error::other)
}

pub fn load_model<R: Read>(r: R) -> std::io::Result<MlpModel> {
    let dump: ModelDump = serde_json::from_reader(r)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    if dump.version != 1 {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unsupported model version {}", dump.version),
        ));
    }
    let mut params = dump.w1;
    params.extend(dump.b1);
    params.extend(dump.w2);
    params.push(dump.b2);
    if params.len() != MlpModel::param_count(dump.input_dim, dump.hidden) {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "parameter count does not match dimensions",
        ));
    }
    Ok(MlpModel { input_dim: dump.input_dim, hidden: dump.hidden, params })
}
