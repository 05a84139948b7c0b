//! Training loop with early stopping, evaluation, model comparison, and the
//! cross-battery hold-out protocol.
//!
//! Each optimizer step combines two gradient sources:
//! - the data term over one shuffled mini-batch of windows;
//! - when λ > 0, the diffusion term over one contiguous run of windows
//!   drawn from a single source trace, so consecutive predictions form a
//!   temperature sequence and the stencil never crosses trace boundaries.
//!
//! The plain-LSTM baseline is the identical code path with λ = 0, which the
//! optimizer sees as a bit-identical gradient stream; batch evaluation runs
//! in parallel with per-sample gradients reduced in index order, so results
//! do not depend on thread count.

mod metrics;

pub use metrics::{compare_models, ComparisonRow, ComparisonTable, MetricsReport, ScenarioMetrics};

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::{Trace, WindowedDataset, FEATURE_COUNT, TEMPERATURE_CHANNEL};
use crate::mat::Mat;
use crate::neural::{
    adam_step, backward_sequence, forward_sequence, mlp_backward, mlp_forward, AdamState,
    Checkpoint, LstmParams, MlpParams, ModelParams, NeuralError,
};
use crate::physics::{physics_loss, physics_loss_grad, PhysicsConfig};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training or validation split is empty")]
    EmptySplit,
    #[error("loss diverged to a non-finite value at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("held-out scenario '{id}' appears in the training data")]
    ScenarioLeakage { id: String },
    #[error("comparison needs at least 2 reports, found {found}")]
    NotEnoughReports { found: usize },
    #[error("dataset normalization differs from the checkpoint's")]
    NormalizationMismatch,
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Physics(#[from] crate::physics::PhysicsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which architecture to train. `Lstm` is the physics-free baseline: the
/// same recurrent model trained with λ forced to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    PiLstm,
    Lstm,
    Mlp,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::PiLstm => "pi-lstm",
            ModelKind::Lstm => "lstm",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "pi-lstm" => Some(ModelKind::PiLstm),
            "lstm" => Some(ModelKind::Lstm),
            "mlp" => Some(ModelKind::Mlp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model_kind: ModelKind,
    pub epochs_max: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub patience: usize,
    pub seed: u64,
    pub lambda_weight: f64,
    pub alpha_diff: f64,
    pub hidden_size: usize,
    pub mlp_hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model_kind: ModelKind::PiLstm,
            epochs_max: 500,
            batch_size: 32,
            lr: 1e-4,
            patience: 20,
            seed: 0,
            lambda_weight: 0.1,
            alpha_diff: 0.1,
            hidden_size: 32,
            mlp_hidden: vec![64, 64],
        }
    }
}

impl TrainConfig {
    /// λ actually applied: baselines train physics-free.
    pub fn effective_lambda(&self) -> f64 {
        match self.model_kind {
            ModelKind::PiLstm => self.lambda_weight,
            ModelKind::Lstm | ModelKind::Mlp => 0.0,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub data_loss: f64,
    pub phys_loss: f64,
    pub total: f64,
    pub val_total: f64,
    pub lambda: f64,
    pub alpha: f64,
}

pub fn write_training_log(records: &[EpochRecord], path: &Path) -> Result<(), TrainError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "epoch,data_loss,phys_loss,total,lambda,alpha,val_total")?;
    for r in records {
        writeln!(
            out,
            "{},{:.12},{:.12},{:.12},{},{},{:.12}",
            r.epoch, r.data_loss, r.phys_loss, r.total, r.lambda, r.alpha, r.val_total
        )?;
    }
    out.flush()?;
    Ok(())
}

enum TrainModel {
    Lstm(LstmParams<f64>),
    Mlp(MlpParams<f64>),
}

impl TrainModel {
    fn init(cfg: &TrainConfig, n: usize, d: usize, rng: &mut impl Rng) -> Self {
        match cfg.model_kind {
            ModelKind::PiLstm | ModelKind::Lstm => {
                TrainModel::Lstm(LstmParams::init(d, cfg.hidden_size, rng))
            }
            ModelKind::Mlp => TrainModel::Mlp(MlpParams::init(n * d, &cfg.mlp_hidden, rng)),
        }
    }

    fn num_params(&self) -> usize {
        match self {
            TrainModel::Lstm(p) => p.num_params(),
            TrainModel::Mlp(p) => p.num_params(),
        }
    }

    fn to_flat(&self) -> Vec<f64> {
        match self {
            TrainModel::Lstm(p) => p.to_flat(),
            TrainModel::Mlp(p) => p.to_flat(),
        }
    }

    fn load_flat(&mut self, flat: &[f64]) -> Result<(), NeuralError> {
        match self {
            TrainModel::Lstm(p) => p.load_flat(flat),
            TrainModel::Mlp(p) => p.load_flat(flat),
        }
    }

    fn predict(&self, window: &Mat<f64>) -> Result<f64, NeuralError> {
        match self {
            TrainModel::Lstm(p) => Ok(forward_sequence(window, p)?.0),
            TrainModel::Mlp(p) => Ok(mlp_forward(window.as_slice(), p)?.0),
        }
    }

    /// Forward + backward for one window; returns the prediction and the
    /// flat gradient of `upstream_scale * prediction` (the caller folds the
    /// loss derivative into the scale).
    fn sample_gradient(
        &self,
        window: &Mat<f64>,
        target: f64,
        inv_batch: f64,
    ) -> Result<(f64, Vec<f64>), NeuralError> {
        match self {
            TrainModel::Lstm(p) => {
                let (pred, tape) = forward_sequence(window, p)?;
                let mut grads = LstmParams::zeros(p.d, p.h);
                backward_sequence(&tape, 2.0 * (pred - target) * inv_batch, p, &mut grads)?;
                Ok((pred, grads.to_flat()))
            }
            TrainModel::Mlp(p) => {
                let (pred, tape) = mlp_forward(window.as_slice(), p)?;
                let mut grads = MlpParams::zeros(p.input_dim, &hidden_widths(p));
                mlp_backward(&tape, 2.0 * (pred - target) * inv_batch, p, &mut grads)?;
                Ok((pred, grads.to_flat()))
            }
        }
    }

    /// Gradient of `λ · physics_loss` over one contiguous window run.
    fn physics_gradient(
        &self,
        windows: &[&Mat<f64>],
        lambda: f64,
        cfg: &PhysicsConfig<f64>,
    ) -> Result<(f64, Vec<f64>), NeuralError> {
        let (preds, tapes): (Vec<f64>, Vec<_>) = match self {
            TrainModel::Lstm(p) => {
                let results: Vec<_> = windows
                    .par_iter()
                    .map(|w| forward_sequence(w, p))
                    .collect::<Result<_, _>>()?;
                results.into_iter().unzip()
            }
            TrainModel::Mlp(_) => {
                // physics regularization is specific to the recurrent model
                return Ok((0.0, vec![0.0; self.num_params()]));
            }
        };
        let loss = physics_loss(&preds, cfg).map_err(|e| {
            NeuralError::ShapeMismatch(format!("physics chunk too short: {e}"))
        })?;
        let dloss = physics_loss_grad(&preds, cfg)
            .map_err(|e| NeuralError::ShapeMismatch(format!("physics chunk too short: {e}")))?;

        let TrainModel::Lstm(p) = self else { unreachable!() };
        let partials: Vec<Vec<f64>> = tapes
            .par_iter()
            .zip(&dloss)
            .map(|(tape, d)| {
                let mut grads = LstmParams::zeros(p.d, p.h);
                backward_sequence(tape, lambda * d, p, &mut grads)?;
                Ok::<_, NeuralError>(grads.to_flat())
            })
            .collect::<Result<_, _>>()?;
        let mut acc = vec![0.0; self.num_params()];
        for partial in &partials {
            add_assign(&mut acc, partial);
        }
        Ok((loss, acc))
    }

    fn into_model_params(self) -> ModelParams {
        match self {
            TrainModel::Lstm(p) => ModelParams::Lstm(p),
            TrainModel::Mlp(p) => ModelParams::Mlp(p),
        }
    }
}

fn hidden_widths(p: &MlpParams<f64>) -> Vec<usize> {
    let w = p.widths();
    w[..w.len() - 1].to_vec()
}

fn add_assign(acc: &mut [f64], other: &[f64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += *b;
    }
}

/// Contiguous runs of window samples per scenario (consecutive start
/// indices), each at least 3 long; these are the physics sequences.
fn physics_runs(ds: &WindowedDataset) -> Vec<(usize, Vec<usize>)> {
    let mut runs = Vec::new();
    for (scenario, samples) in ds.samples_by_scenario().into_iter().enumerate() {
        let mut sorted = samples;
        sorted.sort_by_key(|&i| ds.sample_start[i]);
        let mut run: Vec<usize> = Vec::new();
        for &i in &sorted {
            if let Some(&last) = run.last() {
                if ds.sample_start[i] == ds.sample_start[last] + 1 {
                    run.push(i);
                    continue;
                }
                if run.len() >= 3 {
                    runs.push((scenario, std::mem::take(&mut run)));
                } else {
                    run.clear();
                }
            }
            run.push(i);
        }
        if run.len() >= 3 {
            runs.push((scenario, run));
        }
    }
    runs
}

/// Mean physics loss of the model's consecutive single-step predictions,
/// averaged over the dataset's per-trace sequences.
fn dataset_physics_loss(
    model: &TrainModel,
    ds: &WindowedDataset,
    predictions: &[f64],
    alpha: f64,
) -> f64 {
    let _ = model;
    let runs = physics_runs(ds);
    if runs.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (scenario, run) in &runs {
        let dt = ds.scenario_dt_s[*scenario];
        if !dt.is_finite() {
            continue;
        }
        let seq: Vec<f64> = run.iter().map(|&i| predictions[i]).collect();
        let cfg = PhysicsConfig { alpha_diff: alpha, dt_s: dt, lambda_weight: 0.0 };
        if let Ok(loss) = physics_loss(&seq, &cfg) {
            total += loss;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

fn batch_predictions(model: &TrainModel, ds: &WindowedDataset) -> Result<Vec<f64>, TrainError> {
    let preds: Vec<f64> = ds
        .windows
        .par_iter()
        .map(|w| model.predict(w))
        .collect::<Result<_, _>>()?;
    Ok(preds)
}

fn mse(predictions: &[f64], targets: &[f64]) -> f64 {
    predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / predictions.len() as f64
}

/// Trains per the configuration and returns the best-validation checkpoint
/// with the per-epoch loss log. Deterministic under a fixed seed.
pub fn train(
    train_set: &WindowedDataset,
    val_set: &WindowedDataset,
    cfg: &TrainConfig,
) -> Result<(Checkpoint, Vec<EpochRecord>), TrainError> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    if train_set.d != FEATURE_COUNT || val_set.d != train_set.d || val_set.n != train_set.n {
        return Err(TrainError::ShapeMismatch(format!(
            "train {}x{} vs val {}x{}",
            train_set.n, train_set.d, val_set.n, val_set.d
        )));
    }
    let lambda = cfg.effective_lambda();

    // Independent deterministic streams: init, shuffling, chunk choice.
    let mut rng_init = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rng_shuffle = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5348_5546_464c_4531);
    let mut rng_chunk = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4348_554e_4b53_4531);

    let mut model = TrainModel::init(cfg, train_set.n, train_set.d, &mut rng_init);
    let mut adam = AdamState::new(model.num_params(), cfg.lr);

    let runs = physics_runs(train_set);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut best_val = f64::INFINITY;
    let mut best_flat = model.to_flat();
    let mut best_epoch = 0usize;
    let mut stale = 0usize;
    let mut log = Vec::new();

    for epoch in 0..cfg.epochs_max {
        order.shuffle(&mut rng_shuffle);
        let mut epoch_data = 0.0;
        let mut epoch_phys = 0.0;
        let mut n_batches = 0usize;
        let mut n_chunks = 0usize;

        for batch in order.chunks(cfg.batch_size) {
            let inv_batch = 1.0 / batch.len() as f64;
            let results: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .map(|&i| model.sample_gradient(&train_set.windows[i], train_set.targets[i], inv_batch))
                .collect::<Result<_, _>>()?;

            let mut grad = vec![0.0; model.num_params()];
            let mut batch_loss = 0.0;
            // index-ordered reduction keeps the sum thread-count independent
            for ((pred, partial), &i) in results.iter().zip(batch) {
                add_assign(&mut grad, partial);
                let err = pred - train_set.targets[i];
                batch_loss += err * err * inv_batch;
            }
            epoch_data += batch_loss;
            n_batches += 1;

            if lambda > 0.0 && !runs.is_empty() {
                let (scenario, run) = &runs[rng_chunk.gen_range(0..runs.len())];
                let span = run.len().min(cfg.batch_size.max(3));
                let start = rng_chunk.gen_range(0..=run.len() - span);
                let chunk = &run[start..start + span];
                let windows: Vec<&Mat<f64>> =
                    chunk.iter().map(|&i| &train_set.windows[i]).collect();
                let phys_cfg = PhysicsConfig {
                    alpha_diff: cfg.alpha_diff,
                    dt_s: train_set.scenario_dt_s[*scenario],
                    lambda_weight: lambda,
                };
                let (phys, phys_grad) = model.physics_gradient(&windows, lambda, &phys_cfg)?;
                add_assign(&mut grad, &phys_grad);
                epoch_phys += phys;
                n_chunks += 1;
            }

            let mut flat = model.to_flat();
            adam_step(&mut flat, &grad, &mut adam)?;
            model.load_flat(&flat)?;
        }

        let data_loss = epoch_data / n_batches as f64;
        let phys_loss = if n_chunks > 0 { epoch_phys / n_chunks as f64 } else { 0.0 };
        let total = data_loss + lambda * phys_loss;

        // validation: full data MSE plus λ times per-trace physics loss
        let val_preds = batch_predictions(&model, val_set)?;
        let val_data = mse(&val_preds, &val_set.targets);
        let val_phys = if lambda > 0.0 {
            dataset_physics_loss(&model, val_set, &val_preds, cfg.alpha_diff)
        } else {
            0.0
        };
        let val_total = val_data + lambda * val_phys;

        if !total.is_finite() || !val_total.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }

        log.push(EpochRecord {
            epoch,
            data_loss,
            phys_loss,
            total,
            val_total,
            lambda,
            alpha: cfg.alpha_diff,
        });

        if val_total < best_val {
            best_val = val_total;
            best_flat = model.to_flat();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let _ = best_epoch;

    model.load_flat(&best_flat)?;
    let ckpt = Checkpoint {
        model: model.into_model_params(),
        window_n: train_set.n,
        feature_dim: train_set.d,
        target_channel: train_set.target_channel,
        norm: train_set.params.clone(),
    };
    Ok((ckpt, log))
}

/// Per-sample predictions of a checkpoint over a dataset, denormalized to
/// °C alongside the denormalized targets.
pub fn predictions_c(
    ckpt: &Checkpoint,
    ds: &WindowedDataset,
) -> Result<(Vec<f64>, Vec<f64>), TrainError> {
    if ds.params != ckpt.norm {
        return Err(TrainError::NormalizationMismatch);
    }
    if ds.n != ckpt.window_n || ds.d != ckpt.feature_dim {
        return Err(TrainError::ShapeMismatch(format!(
            "dataset windows {}x{} vs checkpoint {}x{}",
            ds.n, ds.d, ckpt.window_n, ckpt.feature_dim
        )));
    }
    let channel = ckpt.target_channel;
    let preds: Vec<f64> = ds
        .windows
        .par_iter()
        .map(|w| ckpt.predict(w))
        .collect::<Result<_, _>>()?;
    let preds_c: Vec<f64> = preds.iter().map(|&p| ckpt.norm.denormalize_value(channel, p)).collect();
    let targets_c: Vec<f64> =
        ds.targets.iter().map(|&t| ckpt.norm.denormalize_value(channel, t)).collect();
    Ok((preds_c, targets_c))
}

/// Evaluates a checkpoint on a test set: all four metrics on denormalized
/// temperatures, with a per-scenario breakdown.
pub fn evaluate(ckpt: &Checkpoint, test_set: &WindowedDataset) -> Result<MetricsReport, TrainError> {
    if test_set.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let (preds_c, targets_c) = predictions_c(ckpt, test_set)?;
    let all = metrics::compute_metrics(&preds_c, &targets_c)?;

    let mut per_scenario = Vec::new();
    for (scenario, samples) in test_set.samples_by_scenario().into_iter().enumerate() {
        if samples.is_empty() {
            continue;
        }
        let p: Vec<f64> = samples.iter().map(|&i| preds_c[i]).collect();
        let t: Vec<f64> = samples.iter().map(|&i| targets_c[i]).collect();
        let m = metrics::compute_metrics(&p, &t)?;
        per_scenario.push(ScenarioMetrics {
            scenario: test_set.scenarios[scenario].clone(),
            mae_c: m.mae,
            rmse_c: m.rmse,
            r2: m.r2,
            n_samples: samples.len(),
        });
    }

    Ok(MetricsReport {
        mae_c: all.mae,
        rmse_c: all.rmse,
        mape_pct: all.mape_pct,
        r2: all.r2,
        degenerate_targets: all.r2.is_none(),
        mape_excluded: all.mape_excluded,
        n_samples: test_set.len(),
        per_scenario,
    })
}

/// Mean physics loss of a checkpoint's consecutive predictions over each
/// trace in the dataset (normalized units).
pub fn prediction_physics_loss(
    ckpt: &Checkpoint,
    ds: &WindowedDataset,
    alpha: f64,
) -> Result<f64, TrainError> {
    let preds: Vec<f64> = ds
        .windows
        .par_iter()
        .map(|w| ckpt.predict(w))
        .collect::<Result<_, _>>()?;
    let runs = physics_runs(ds);
    let mut total = 0.0;
    let mut count = 0usize;
    for (scenario, run) in &runs {
        let dt = ds.scenario_dt_s[*scenario];
        if !dt.is_finite() {
            continue;
        }
        let seq: Vec<f64> = run.iter().map(|&i| preds[i]).collect();
        let cfg = PhysicsConfig { alpha_diff: alpha, dt_s: dt, lambda_weight: 0.0 };
        total += physics_loss(&seq, &cfg)?;
        count += 1;
    }
    if count == 0 {
        return Err(TrainError::ShapeMismatch("no physics sequences in dataset".into()));
    }
    Ok(total / count as f64)
}

/// Errors if any held-out scenario id leaked into the dataset.
pub fn verify_no_leakage(ds: &WindowedDataset, holdout_ids: &[String]) -> Result<(), TrainError> {
    for id in holdout_ids {
        if ds.scenarios.contains(id) {
            return Err(TrainError::ScenarioLeakage { id: id.clone() });
        }
    }
    Ok(())
}

/// Windowing plus split parameters for a full experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub window_n: usize,
    /// Fraction of the non-held-out scenarios used for training (the rest
    /// validate); grouped by scenario.
    pub train_frac: f64,
    pub split_seed: u64,
    /// Explicit validation scenarios; overrides the seeded split when set.
    pub val_ids: Option<Vec<String>>,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            window_n: 50,
            train_frac: 0.8,
            split_seed: 0,
            val_ids: None,
            train: TrainConfig::default(),
        }
    }
}

/// Result of one hold-out experiment.
pub struct HeldOutEval {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochRecord>,
    pub per_battery: Vec<(String, MetricsReport)>,
    pub train_scenarios: Vec<String>,
    pub val_scenarios: Vec<String>,
}

/// Builds train/val/test datasets with the named scenarios held out
/// entirely, normalization fitted on the training scenarios only.
pub fn prepare_holdout(
    traces: &[(String, Trace)],
    holdout_ids: &[String],
    window_n: usize,
    train_frac: f64,
    split_seed: u64,
    val_override: Option<&[String]>,
) -> Result<(WindowedDataset, WindowedDataset, Vec<(String, WindowedDataset)>), TrainError> {
    let mut remaining: Vec<String> = traces
        .iter()
        .map(|(id, _)| id.clone())
        .filter(|id| !holdout_ids.contains(id))
        .collect();
    if remaining.len() < 2 || holdout_ids.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    remaining.sort();
    let (train_ids, val_ids): (Vec<String>, Vec<String>) = match val_override {
        Some(val) => {
            for id in val {
                if holdout_ids.contains(id) {
                    return Err(TrainError::ScenarioLeakage { id: id.clone() });
                }
            }
            let train: Vec<String> =
                remaining.iter().filter(|id| !val.contains(id)).cloned().collect();
            if train.is_empty() || val.is_empty() {
                return Err(TrainError::EmptySplit);
            }
            (train, val.to_vec())
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
            remaining.shuffle(&mut rng);
            let n_train = ((remaining.len() as f64) * train_frac).round() as usize;
            let n_train = n_train.clamp(1, remaining.len() - 1);
            let val = remaining.split_off(n_train);
            (remaining, val)
        }
    };
    let (train_ids, val_ids) = (train_ids.as_slice(), val_ids.as_slice());

    let pick = |ids: &[String]| -> Vec<(String, Trace)> {
        traces.iter().filter(|(id, _)| ids.contains(id)).cloned().collect()
    };
    let train_traces = pick(train_ids);
    let val_traces = pick(val_ids);

    let fit_input: Vec<Trace> = train_traces.iter().map(|(_, t)| t.clone()).collect();
    let params = crate::data::fit_normalization(&fit_input)?;

    let train_ds =
        WindowedDataset::from_traces(&train_traces, &params, window_n, TEMPERATURE_CHANNEL)?;
    let val_ds = WindowedDataset::from_traces(&val_traces, &params, window_n, TEMPERATURE_CHANNEL)?;

    let mut held = Vec::new();
    for id in holdout_ids {
        let entry = traces
            .iter()
            .find(|(tid, _)| tid == id)
            .ok_or_else(|| TrainError::ShapeMismatch(format!("held-out id '{id}' not found")))?;
        let ds = WindowedDataset::from_traces(
            std::slice::from_ref(entry),
            &params,
            window_n,
            TEMPERATURE_CHANNEL,
        )?;
        held.push((id.clone(), ds));
    }

    verify_no_leakage(&train_ds, holdout_ids)?;
    verify_no_leakage(&val_ds, holdout_ids)?;
    Ok((train_ds, val_ds, held))
}

/// The cross-battery protocol: train on all scenarios except the held-out
/// ids, then evaluate per held-out battery.
pub fn held_out_eval(
    traces: &[(String, Trace)],
    holdout_ids: &[String],
    cfg: &ExperimentConfig,
) -> Result<HeldOutEval, TrainError> {
    let (train_ds, val_ds, held) = prepare_holdout(
        traces,
        holdout_ids,
        cfg.window_n,
        cfg.train_frac,
        cfg.split_seed,
        cfg.val_ids.as_deref(),
    )?;
    let (ckpt, log) = train(&train_ds, &val_ds, &cfg.train)?;
    let mut per_battery = Vec::new();
    for (id, ds) in &held {
        per_battery.push((id.clone(), evaluate(&ckpt, ds)?));
    }
    Ok(HeldOutEval {
        checkpoint: ckpt,
        log,
        per_battery,
        train_scenarios: train_ds.scenarios.clone(),
        val_scenarios: val_ds.scenarios.clone(),
    })
}
