//! Mini-batch training: MSE objective, Adam updates, gradient clipping,
//! chronological validation split, and early stopping.
//!
//! Parallelism never changes results: every batch is cut into fixed-size
//! chunks whose boundaries do not depend on the worker count, chunks are
//! evaluated on independent tapes, and the partial gradients are reduced in
//! chunk order. Two runs with the same seed are bit-identical whether they
//! use one thread or many.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::WindowSet;
use crate::model::ModelParams;
use crate::tape::{Tape, Var};
use crate::tensor::{Tensor, TensorError};

/// Samples per parallel work unit. Fixed so that reduction order, and
/// therefore floating-point output, is independent of the thread count.
pub(crate) const GRAD_CHUNK: usize = 16;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error(
        "cannot split {per_turbine} origins per turbine into non-empty train \
         and validation parts at fraction {val_fraction}"
    )]
    SplitTooSmall { per_turbine: usize, val_fraction: f64 },
    #[error("non-finite gradient in parameter {name}")]
    NonFiniteGradient { name: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("writing training log: {0}")]
    Log(#[from] std::io::Error),
}

/// Knobs for the training loop, with conservative defaults. None of them
/// change the model architecture, only how it is fitted.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many epochs without validation improvement.
    pub patience: usize,
    /// Trailing fraction of each turbine's origins held out for validation.
    pub val_fraction: f64,
    /// Global-norm gradient clip bound.
    pub clip_norm: f64,
    pub seed: u64,
    /// Zero the embedding gradient every step, pinning whatever values the
    /// initial model carried (used by the shared-identity ablation).
    pub freeze_embedding: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 200,
            patience: 10,
            val_fraction: 0.1,
            clip_norm: 5.0,
            seed: 0,
            freeze_embedding: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |msg: String| Err(TrainError::BadConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return fail(format!("val_fraction must be in (0, 1), got {}", self.val_fraction));
        }
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return fail(format!("clip_norm must be positive, got {}", self.clip_norm));
        }
        if self.patience < 1 {
            return fail("patience must be at least 1".into());
        }
        Ok(())
    }
}

/// Mean squared error across horizons, as a differentiable tape node.
pub fn mse_on_tape(
    tape: &mut Tape,
    forecasts: &[Var],
    targets: &[f64],
) -> Result<Var, TensorError> {
    if forecasts.len() != targets.len() {
        return Err(TensorError::DimMismatch {
            op: "loss",
            left: vec![forecasts.len()],
            right: vec![targets.len()],
        });
    }
    let yhat = tape.concat(forecasts)?;
    let y = tape.leaf(Tensor::vector(targets)?);
    let d = tape.sub(yhat, y)?;
    let sq = tape.mul(d, d)?;
    Ok(tape.mean(sq))
}

/// Scale gradients so their global L2 norm is at most `max_norm`. Returns
/// the pre-clip norm. A no-op (bitwise) when already within the bound.
pub fn clip_global_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let sq_sum: f64 = grads
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .sum();
    let norm = sq_sum.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads {
            for v in g {
                *v *= scale;
            }
        }
    }
    norm
}

/// Adam accumulators, one pair of moment vectors per parameter tensor.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        let sizes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
        Self::from_sizes(&sizes)
    }

    pub fn from_sizes(sizes: &[usize]) -> Self {
        Self {
            step: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update over named tensors. Errors, naming the
    /// tensor, on any non-finite gradient.
    pub fn step_tensors(
        &mut self,
        params: &mut [(String, &mut Tensor)],
        grads: &[Vec<f64>],
        lr: f64,
    ) -> Result<(), TrainError> {
        assert_eq!(params.len(), grads.len(), "one gradient per tensor");
        for ((name, _), g) in params.iter().zip(grads) {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(TrainError::NonFiniteGradient { name: name.clone() });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let corr1 = 1.0 - ADAM_BETA1.powi(t);
        let corr2 = 1.0 - ADAM_BETA2.powi(t);
        let lr_t = lr * corr2.sqrt() / corr1;
        for (((_, tensor), g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(&mut self.second))
        {
            for (i, p) in tensor.data_mut().iter_mut().enumerate() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                *p -= lr_t * m[i] / (v[i].sqrt() + ADAM_EPS);
            }
        }
        Ok(())
    }

    /// [`Self::step_tensors`] over a whole model.
    pub fn step_model(
        &mut self,
        params: &mut ModelParams,
        grads: &[Vec<f64>],
        lr: f64,
    ) -> Result<(), TrainError> {
        let mut named = params.tensors_mut();
        self.step_tensors(&mut named, grads, lr)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopReason {
    /// Ran every configured epoch.
    Completed,
    /// Validation stopped improving for `patience` epochs.
    EarlyStopped { at_epoch: usize },
    /// A loss or gradient went non-finite; the best earlier parameters were
    /// kept.
    Diverged { at_epoch: usize, detail: String },
}

#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub wall_seconds: f64,
}

/// Result of a training run: the best-validation parameters plus the full
/// epoch log.
#[derive(Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub stop: StopReason,
    pub log: Vec<EpochRecord>,
    pub best_val_mse: Option<f64>,
    pub best_epoch: Option<usize>,
}

/// First validation origin offset within each turbine's origin range.
pub(crate) fn split_origin(per_turbine: usize, val_fraction: f64) -> usize {
    (per_turbine as f64 * (1.0 - val_fraction)).floor() as usize
}

fn zero_grads(params: &ModelParams) -> Vec<Vec<f64>> {
    params.tensors().iter().map(|(_, t)| vec![0.0; t.len()]).collect()
}

/// Sum of per-sample losses and gradients over `indices`, reduced in fixed
/// chunk order.
fn batch_gradients(
    windows: &WindowSet,
    params: &ModelParams,
    indices: &[usize],
) -> Result<(Vec<Vec<f64>>, f64), TensorError> {
    let chunk_results: Result<Vec<(Vec<Vec<f64>>, f64)>, TensorError> = indices
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut acc = zero_grads(params);
            let mut loss_sum = 0.0;
            for &idx in chunk {
                let sample = windows.get(idx);
                let mut tape = Tape::new();
                let bound = params.bind(&mut tape);
                let outs = bound.forward(&mut tape, &sample)?;
                let loss = mse_on_tape(&mut tape, &outs, &sample.targets)?;
                loss_sum += tape.value(loss).item();
                tape.backward(loss)?;
                for (slot, &var) in acc.iter_mut().zip(bound.param_vars()) {
                    tape.add_grad_into(var, slot);
                }
            }
            Ok((acc, loss_sum))
        })
        .collect();
    let mut total = zero_grads(params);
    let mut loss_total = 0.0;
    for (acc, loss_sum) in chunk_results? {
        for (slot, part) in total.iter_mut().zip(acc) {
            for (s, p) in slot.iter_mut().zip(part) {
                *s += p;
            }
        }
        loss_total += loss_sum;
    }
    Ok((total, loss_total))
}

/// Mean per-sample loss over `indices` without touching gradients.
fn mean_loss(
    windows: &WindowSet,
    params: &ModelParams,
    indices: &[usize],
) -> Result<f64, TensorError> {
    let sums: Result<Vec<f64>, TensorError> = indices
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut loss_sum = 0.0;
            for &idx in chunk {
                let sample = windows.get(idx);
                let mut tape = Tape::new();
                let bound = params.bind(&mut tape);
                let outs = bound.forward(&mut tape, &sample)?;
                let loss = mse_on_tape(&mut tape, &outs, &sample.targets)?;
                loss_sum += tape.value(loss).item();
            }
            Ok(loss_sum)
        })
        .collect();
    let total: f64 = sums?.into_iter().sum();
    Ok(total / indices.len() as f64)
}

/// Run the training loop. Writes one CSV row per epoch to `log` when given
/// (`epoch,train_mse,val_mse,wall_seconds`).
///
/// The validation split is chronological within every turbine: the last
/// `val_fraction` of forecast origins are held out, so every validation
/// origin is later than every training origin.
pub fn train(
    windows: &WindowSet,
    init: ModelParams,
    cfg: &TrainConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    assert_eq!(
        windows.input_rows(),
        init.hyper.window_rows(),
        "window channels match the model"
    );
    assert_eq!(windows.spec().m, init.hyper.m, "window length matches the model");
    assert_eq!(
        windows.spec().tau_max,
        init.hyper.tau_max,
        "horizon count matches the model"
    );

    let per_turbine = windows.per_turbine();
    let split = split_origin(per_turbine, cfg.val_fraction);
    if split == 0 || split >= per_turbine {
        return Err(TrainError::SplitTooSmall {
            per_turbine,
            val_fraction: cfg.val_fraction,
        });
    }
    let n_turbines = windows.len() / per_turbine;
    let mut train_idx: Vec<usize> = Vec::with_capacity(n_turbines * split);
    let mut val_idx: Vec<usize> = Vec::with_capacity(n_turbines * (per_turbine - split));
    for turbine in 0..n_turbines {
        let base = turbine * per_turbine;
        train_idx.extend(base..base + split);
        val_idx.extend(base + split..base + per_turbine);
    }

    if let Some(w) = log.as_deref_mut() {
        writeln!(w, "epoch,train_mse,val_mse,wall_seconds")?;
    }

    let mut params = init;
    let mut opt = OptimizerState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let embedding_slot = params.embedding_tensor_index();

    let mut records: Vec<EpochRecord> = Vec::new();
    let mut best: Option<(ModelParams, f64, usize)> = None;
    let mut since_best = 0usize;
    let mut stop = StopReason::Completed;

    'epochs: for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        train_idx.shuffle(&mut rng);
        let mut train_loss_sum = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let (mut grads, loss_sum) = batch_gradients(windows, &params, batch)?;
            train_loss_sum += loss_sum;
            let scale = 1.0 / batch.len() as f64;
            for g in &mut grads {
                for v in g {
                    *v *= scale;
                }
            }
            if cfg.freeze_embedding {
                grads[embedding_slot].fill(0.0);
            }
            clip_global_norm(&mut grads, cfg.clip_norm);
            if let Err(TrainError::NonFiniteGradient { name }) =
                opt.step_model(&mut params, &grads, cfg.learning_rate)
            {
                stop = StopReason::Diverged {
                    at_epoch: epoch,
                    detail: format!("non-finite gradient in {name}"),
                };
                break 'epochs;
            }
        }
        let train_mse = train_loss_sum / train_idx.len() as f64;
        let val_mse = mean_loss(windows, &params, &val_idx)?;
        let record = EpochRecord {
            epoch,
            train_mse,
            val_mse,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        if let Some(w) = log.as_deref_mut() {
            writeln!(
                w,
                "{},{},{},{:.3}",
                record.epoch, record.train_mse, record.val_mse, record.wall_seconds
            )?;
            w.flush()?;
        }
        records.push(record);

        if !val_mse.is_finite() || !train_mse.is_finite() {
            stop = StopReason::Diverged {
                at_epoch: epoch,
                detail: format!("train mse {train_mse}, validation mse {val_mse}"),
            };
            break;
        }
        let improved = best.as_ref().map_or(true, |(_, b, _)| val_mse < *b);
        if improved {
            best = Some((params.clone(), val_mse, epoch));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stop = StopReason::EarlyStopped { at_epoch: epoch };
                break;
            }
        }
    }

    let (final_params, best_val_mse, best_epoch) = match best {
        Some((p, v, e)) => (p, Some(v), Some(e)),
        None => (params, None, None),
    };
    Ok(TrainOutcome {
        params: final_params,
        stop,
        log: records,
        best_val_mse,
        best_epoch,
    })
}
