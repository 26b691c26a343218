//! Reference forecasters: persistence, a capacity-matched MLP, and the
//! vanilla-RNN variant of the main model.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{aggregate, evaluate, evaluate_mlp, EvalReport};
use super::EvalError;
use crate::data::{Normalizer, SeriesTable, WindowSample, WindowSet, WindowSpec};
use crate::graph::NeighborIndex;
use crate::model::{CellKind, HyperParams, ModelParams};
use crate::tape::{Tape, Var};
use crate::tensor::{Tensor, TensorError};
use crate::train::{
    clip_global_norm, split_origin, train, EpochRecord, OptimizerState, TrainConfig, TrainError,
    GRAD_CHUNK,
};

/// Persistence baseline: repeat the last observed target at every horizon.
/// It has no parameters and never sees training data; the same test table
/// always yields the same report.
pub fn persistence(
    table: &SeriesTable,
    norm: &Normalizer,
    m: usize,
    tau_max: usize,
) -> Result<EvalReport, EvalError> {
    let neighbors = NeighborIndex::self_only(table.n_turbines());
    let spec = WindowSpec {
        m,
        tau_max,
        power_history: false,
        southern: false,
    };
    let windows = WindowSet::new(table, &neighbors, norm, spec)?;
    aggregate(&windows, norm, |sample| {
        Ok(vec![sample.y_current; tau_max])
    })
}

/// Feed-forward baseline: the flattened k x m speed window through one tanh
/// hidden layer to all horizons at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub m: usize,
    pub k: usize,
    pub tau_max: usize,
    pub hidden: usize,
    w1: Tensor,
    b1: Tensor,
    w2: Tensor,
    b2: Tensor,
}

/// Hidden width whose parameter count best matches `target_params`, never
/// below 1. Total parameters are `hidden * (k*m + 1 + tau_max) + tau_max`.
pub fn mlp_hidden_for_budget(m: usize, k: usize, tau_max: usize, target_params: usize) -> usize {
    let per_unit = (k * m + 1 + tau_max) as f64;
    let spare = target_params.saturating_sub(tau_max) as f64;
    ((spare / per_unit).round() as usize).max(1)
}

struct BoundMlp {
    w1: Var,
    b1: Var,
    w2: Var,
    b2: Var,
}

impl MlpParams {
    pub fn init(m: usize, k: usize, tau_max: usize, hidden: usize, seed: u64) -> Self {
        assert!(hidden >= 1, "hidden width must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize, cols: usize, scale: f64| -> Tensor {
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
            if cols == 1 {
                Tensor::from_vec(vec![rows], data).unwrap()
            } else {
                Tensor::from_vec(vec![rows, cols], data).unwrap()
            }
        };
        let in_dim = k * m;
        let w1 = draw(hidden, in_dim, 1.0 / (in_dim as f64).sqrt());
        let w2 = draw(tau_max, hidden, 1.0 / (hidden as f64).sqrt());
        Self {
            m,
            k,
            tau_max,
            hidden,
            w1,
            b1: Tensor::zeros(vec![hidden]),
            w2,
            b2: Tensor::zeros(vec![tau_max]),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("mlp.w1".to_string(), &mut self.w1),
            ("mlp.b1".to_string(), &mut self.b1),
            ("mlp.w2".to_string(), &mut self.w2),
            ("mlp.b2".to_string(), &mut self.b2),
        ]
    }

    fn sizes(&self) -> Vec<usize> {
        vec![self.w1.len(), self.b1.len(), self.w2.len(), self.b2.len()]
    }

    fn bind(&self, tape: &mut Tape) -> BoundMlp {
        BoundMlp {
            w1: tape.leaf(self.w1.clone()),
            b1: tape.leaf(self.b1.clone()),
            w2: tape.leaf(self.w2.clone()),
            b2: tape.leaf(self.b2.clone()),
        }
    }

    /// Flattened speed rows of a sample, the first `k*m` values of its input
    /// matrix.
    fn flat_input(&self, sample: &WindowSample) -> Result<Tensor, TensorError> {
        Tensor::vector(&sample.input.data()[..self.k * self.m])
    }

    /// Normalized forecasts for horizons 1..=tau_max.
    pub fn predict(&self, sample: &WindowSample) -> Result<Vec<f64>, TensorError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let x = tape.leaf(self.flat_input(sample)?);
        let out = bound.forward(&mut tape, x)?;
        Ok(tape.value(out).data().to_vec())
    }
}

impl BoundMlp {
    fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var, TensorError> {
        let a = tape.matmul(self.w1, x)?;
        let a = tape.add(a, self.b1)?;
        let h = tape.tanh(a);
        let o = tape.matmul(self.w2, h)?;
        tape.add(o, self.b2)
    }

    fn vars(&self) -> [Var; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }
}

fn mse_vec(tape: &mut Tape, out: Var, targets: &[f64]) -> Result<Var, TensorError> {
    let y = tape.leaf(Tensor::vector(targets)?);
    let d = tape.sub(out, y)?;
    let sq = tape.mul(d, d)?;
    Ok(tape.mean(sq))
}

fn mlp_batch_gradients(
    windows: &WindowSet,
    mlp: &MlpParams,
    indices: &[usize],
) -> Result<(Vec<Vec<f64>>, f64), TensorError> {
    let sizes = mlp.sizes();
    let parts: Result<Vec<(Vec<Vec<f64>>, f64)>, TensorError> = indices
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut acc: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
            let mut loss_sum = 0.0;
            for &idx in chunk {
                let sample = windows.get(idx);
                let mut tape = Tape::new();
                let bound = mlp.bind(&mut tape);
                let x = tape.leaf(mlp.flat_input(&sample)?);
                let out = bound.forward(&mut tape, x)?;
                let loss = mse_vec(&mut tape, out, &sample.targets)?;
                loss_sum += tape.value(loss).item();
                tape.backward(loss)?;
                for (slot, &var) in acc.iter_mut().zip(bound.vars().iter()) {
                    tape.add_grad_into(var, slot);
                }
            }
            Ok((acc, loss_sum))
        })
        .collect();
    let mut total: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
    let mut loss_total = 0.0;
    for (acc, loss_sum) in parts? {
        for (slot, part) in total.iter_mut().zip(acc) {
            for (s, p) in slot.iter_mut().zip(part) {
                *s += p;
            }
        }
        loss_total += loss_sum;
    }
    Ok((total, loss_total))
}

fn mlp_mean_loss(
    windows: &WindowSet,
    mlp: &MlpParams,
    indices: &[usize],
) -> Result<f64, TensorError> {
    let sums: Result<Vec<f64>, TensorError> = indices
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut loss_sum = 0.0;
            for &idx in chunk {
                let sample = windows.get(idx);
                let preds = mlp.predict(&sample)?;
                let mse = preds
                    .iter()
                    .zip(&sample.targets)
                    .map(|(p, t)| (p - t) * (p - t))
                    .sum::<f64>()
                    / preds.len() as f64;
                loss_sum += mse;
            }
            Ok(loss_sum)
        })
        .collect();
    Ok(sums?.into_iter().sum::<f64>() / indices.len() as f64)
}

/// Train the MLP baseline with the same schedule as the main model: Adam,
/// global-norm clipping, chronological validation split, early stopping,
/// best-validation retention.
///
/// `hidden` overrides the width; `None` sizes it to `target_params` so the
/// baseline's capacity matches the model it is compared against.
pub fn train_mlp(
    table: &SeriesTable,
    neighbors: &NeighborIndex,
    norm: &Normalizer,
    m: usize,
    tau_max: usize,
    hidden: Option<usize>,
    target_params: usize,
    cfg: &TrainConfig,
) -> Result<(MlpParams, Vec<EpochRecord>), EvalError> {
    cfg.validate()?;
    let hidden = match hidden {
        Some(0) => return Err(EvalError::ZeroHiddenWidth),
        Some(w) => w,
        None => mlp_hidden_for_budget(m, neighbors.k(), tau_max, target_params),
    };
    let spec = WindowSpec {
        m,
        tau_max,
        power_history: false,
        southern: false,
    };
    let windows = WindowSet::new(table, neighbors, norm, spec)?;
    let per_turbine = windows.per_turbine();
    let split = split_origin(per_turbine, cfg.val_fraction);
    if split == 0 || split >= per_turbine {
        return Err(TrainError::SplitTooSmall {
            per_turbine,
            val_fraction: cfg.val_fraction,
        }
        .into());
    }
    let n_turbines = windows.len() / per_turbine;
    let mut train_idx: Vec<usize> = Vec::new();
    let mut val_idx: Vec<usize> = Vec::new();
    for turbine in 0..n_turbines {
        let base = turbine * per_turbine;
        train_idx.extend(base..base + split);
        val_idx.extend(base + split..base + per_turbine);
    }

    let mut mlp = MlpParams::init(m, neighbors.k(), tau_max, hidden, cfg.seed);
    let mut opt = OptimizerState::from_sizes(&mlp.sizes());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = Vec::new();
    let mut best: Option<(MlpParams, f64)> = None;
    let mut since_best = 0usize;

    'epochs: for epoch in 1..=cfg.epochs {
        let started = std::time::Instant::now();
        train_idx.shuffle(&mut rng);
        let mut train_loss_sum = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let (mut grads, loss_sum) = mlp_batch_gradients(&windows, &mlp, batch)?;
            train_loss_sum += loss_sum;
            let scale = 1.0 / batch.len() as f64;
            for g in &mut grads {
                for v in g {
                    *v *= scale;
                }
            }
            clip_global_norm(&mut grads, cfg.clip_norm);
            let mut named = mlp.tensors_mut();
            if opt.step_tensors(&mut named, &grads, cfg.learning_rate).is_err() {
                break 'epochs;
            }
        }
        let train_mse = train_loss_sum / train_idx.len() as f64;
        let val_mse = mlp_mean_loss(&windows, &mlp, &val_idx)?;
        log.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
        if !val_mse.is_finite() || !train_mse.is_finite() {
            break;
        }
        let improved = best.as_ref().map_or(true, |(_, b)| val_mse < *b);
        if improved {
            best = Some((mlp.clone(), val_mse));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let final_mlp = best.map(|(p, _)| p).unwrap_or(mlp);
    Ok((final_mlp, log))
}

/// Train the MLP baseline and evaluate it on a held-out table.
#[allow(clippy::too_many_arguments)]
pub fn mlp_baseline(
    train_table: &SeriesTable,
    test_table: &SeriesTable,
    neighbors: &NeighborIndex,
    norm: &Normalizer,
    m: usize,
    tau_max: usize,
    hidden: Option<usize>,
    target_params: usize,
    cfg: &TrainConfig,
) -> Result<(MlpParams, EvalReport), EvalError> {
    let (mlp, _) = train_mlp(
        train_table,
        neighbors,
        norm,
        m,
        tau_max,
        hidden,
        target_params,
        cfg,
    )?;
    let report = evaluate_mlp(&mlp, test_table, neighbors, norm)?;
    Ok((mlp, report))
}

/// Train the vanilla-RNN variant of the main architecture (same
/// encoder-decoder harness and training loop, tanh cell instead of GRU) and
/// evaluate it on a held-out table.
pub fn rnn_baseline(
    train_table: &SeriesTable,
    test_table: &SeriesTable,
    neighbors: &NeighborIndex,
    norm: &Normalizer,
    hyper: HyperParams,
    cfg: &TrainConfig,
) -> Result<(ModelParams, EvalReport), EvalError> {
    let windows = WindowSet::new(train_table, neighbors, norm, hyper.window_spec())?;
    let init = ModelParams::init(hyper, CellKind::Rnn, cfg.seed);
    let outcome = train(&windows, init, cfg, None)?;
    let report = evaluate(&outcome.params, test_table, neighbors, norm)?;
    Ok((outcome.params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_farm, SynthConfig, TargetKind};
    use crate::graph::build_knn;
    use chrono::NaiveDate;

    fn hourly_timestamps(n: usize) -> Vec<chrono::NaiveDateTime> {
        let start = NaiveDate::from_ymd_opt(2020, 3, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        (0..n)
            .map(|i| start + chrono::Duration::hours(i as i64))
            .collect()
    }

    #[test]
    fn persistence_is_exact_on_constant_power() {
        let n = 16;
        let speed: Vec<f64> = (0..n).map(|i| 6.0 + (i % 5) as f64 * 0.5).collect();
        let power = vec![900.0; n];
        let table = SeriesTable::new(
            vec!["t0".to_string()],
            hourly_timestamps(n),
            vec![speed],
            Some(vec![power]),
        )
        .unwrap();
        let norm = Normalizer::fit(&table, TargetKind::Power).unwrap();
        let report = persistence(&table, &norm, 3, 4).unwrap();
        assert!(report.metrics.mae.iter().all(|&v| v == 0.0));
        assert!(report.metrics.rmse_raw.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn persistence_on_saw_tooth_has_h1_error_equal_to_amplitude() {
        let n = 12;
        let amplitude = 512.0;
        let speed: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 5.0 } else { 9.0 }).collect();
        let power: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { 800.0 } else { 800.0 + amplitude })
            .collect();
        let table = SeriesTable::new(
            vec!["t0".to_string()],
            hourly_timestamps(n),
            vec![speed],
            Some(vec![power]),
        )
        .unwrap();
        let norm = Normalizer::fit(&table, TargetKind::Power).unwrap();
        let report = persistence(&table, &norm, 2, 2).unwrap();
        assert_eq!(report.metrics.mae_raw[0], amplitude);
        assert_eq!(report.metrics.mae_raw[1], 0.0, "period 2 repeats at h=2");
        assert_eq!(report.metrics.rmse_raw[0], amplitude);
    }

    #[test]
    fn persistence_never_trains() {
        let (_, table) = synth_farm(&SynthConfig {
            n_turbines: 3,
            days: 3,
            seed: 21,
            ..Default::default()
        })
        .unwrap();
        let norm = Normalizer::fit(&table, TargetKind::Power).unwrap();
        let a = persistence(&table, &norm, 4, 3).unwrap();
        let b = persistence(&table, &norm, 4, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hidden_width_tracks_parameter_budget() {
        let m = 12;
        let k = 3;
        let tau = 6;
        let target = 5000;
        let hidden = mlp_hidden_for_budget(m, k, tau, target);
        let mlp = MlpParams::init(m, k, tau, hidden, 0);
        assert_eq!(mlp.parameter_count(), hidden * (k * m + 1 + tau) + tau);
        let per_unit = k * m + 1 + tau;
        assert!(
            mlp.parameter_count().abs_diff(target) <= per_unit,
            "count {} should be within one unit of {target}",
            mlp.parameter_count()
        );
        assert_eq!(mlp_hidden_for_budget(4, 1, 2, 0), 1, "never below one unit");
    }

    #[test]
    fn zero_hidden_width_is_rejected() {
        let (layout, table) = synth_farm(&SynthConfig {
            n_turbines: 3,
            days: 3,
            seed: 22,
            ..Default::default()
        })
        .unwrap();
        let neighbors = build_knn(&layout, 2).unwrap();
        let norm = Normalizer::fit(&table, TargetKind::Power).unwrap();
        let err = train_mlp(
            &table,
            &neighbors,
            &norm,
            4,
            2,
            Some(0),
            1000,
            &TrainConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::ZeroHiddenWidth));
    }

    #[test]
    fn zero_weight_mlp_predicts_zero() {
        let (layout, table) = synth_farm(&SynthConfig {
            n_turbines: 2,
            days: 2,
            seed: 23,
            ..Default::default()
        })
        .unwrap();
        let neighbors = build_knn(&layout, 2).unwrap();
        let norm = Normalizer::fit(&table, TargetKind::Power).unwrap();
        let spec = WindowSpec {
            m: 4,
            tau_max: 3,
            power_history: false,
            southern: false,
        };
        let windows = WindowSet::new(&table, &neighbors, &norm, spec).unwrap();
        let mut mlp = MlpParams::init(4, 2, 3, 5, 0);
        for (_, t) in mlp.tensors_mut() {
            let zero = Tensor::zeros(t.shape().to_vec());
            *t = zero;
        }
        let preds = mlp.predict(&windows.get(0)).unwrap();
        assert_eq!(preds, vec![0.0; 3]);
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let (layout, table) = synth_farm(&SynthConfig {
            n_turbines: 2,
            days: 2,
            seed: 24,
            ..Default::default()
        })
        .unwrap();
        let neighbors = build_knn(&layout, 2).unwrap();
        let norm = Normalizer::fit(&table, TargetKind::Power).unwrap();
        let spec = WindowSpec {
            m: 4,
            tau_max: 2,
            power_history: false,
            southern: false,
        };
        let windows = WindowSet::new(&table, &neighbors, &norm, spec).unwrap();
        let mlp = MlpParams::init(4, 2, 2, 3, 9);
        let (grads, _) = mlp_batch_gradients(&windows, &mlp, &[0, 3]).unwrap();

        let loss_at = |m: &MlpParams| -> f64 {
            [0usize, 3]
                .iter()
                .map(|&idx| {
                    let s = windows.get(idx);
                    let preds = m.predict(&s).unwrap();
                    preds
                        .iter()
                        .zip(&s.targets)
                        .map(|(p, t)| (p - t) * (p - t))
                        .sum::<f64>()
                        / preds.len() as f64
                })
                .sum()
        };
        let eps = 1e-5;
        for slot in 0..4 {
            let n = mlp.sizes()[slot];
            for i in 0..n {
                let mut plus = mlp.clone();
                plus.tensors_mut()[slot].1.data_mut()[i] += eps;
                let mut minus = mlp.clone();
                minus.tensors_mut()[slot].1.data_mut()[i] -= eps;
                let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * eps);
                let an = grads[slot][i];
                let ok = (an - fd).abs() <= 1e-8 || (an - fd).abs() / fd.abs().max(1e-12) < 1e-4;
                assert!(ok, "slot {slot} idx {i}: analytic {an} vs fd {fd}");
            }
        }
    }

    #[test]
    fn mlp_training_reduces_loss() {
        let (layout, table) = synth_farm(&SynthConfig {
            n_turbines: 3,
            days: 8,
            seed: 25,
            ..Default::default()
        })
        .unwrap();
        let neighbors = build_knn(&layout, 3).unwrap();
        let norm = Normalizer::fit(&table, TargetKind::Power).unwrap();
        let cfg = TrainConfig {
            epochs: 4,
            learning_rate: 3e-3,
            batch_size: 64,
            seed: 25,
            ..Default::default()
        };
        let (_, log) = train_mlp(&table, &neighbors, &norm, 8, 4, None, 3000, &cfg).unwrap();
        assert_eq!(log.len(), 4);
        assert!(log.last().unwrap().train_mse < log.first().unwrap().train_mse);
    }

    #[test]
    fn rnn_baseline_runs_end_to_end() {
        let (layout, table) = synth_farm(&SynthConfig {
            n_turbines: 3,
            days: 6,
            seed: 26,
            ..Default::default()
        })
        .unwrap();
        let neighbors = build_knn(&layout, 2).unwrap();
        let norm = Normalizer::fit(&table, TargetKind::Power).unwrap();
        let hyper = HyperParams {
            m: 6,
            k: 2,
            hidden: 6,
            embed_dim: 3,
            mlp_hidden: 4,
            tau_max: 3,
            n_turbines: 3,
            power_history: false,
            embed_encoder: false,
            southern: false,
        };
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 64,
            seed: 26,
            ..Default::default()
        };
        let (params, report) = rnn_baseline(&table, &table, &neighbors, &norm, hyper, &cfg).unwrap();
        assert_eq!(params.cell_kind(), CellKind::Rnn);
        assert_eq!(report.metrics.tau_max(), 3);
        assert!(report.metrics.mae.iter().all(|v| v.is_finite()));
    }
}
