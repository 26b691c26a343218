//! Rolling-origin metric aggregation and the Table-style CSV writer.

use std::io::Write;

use rayon::prelude::*;

use super::baselines::MlpParams;
use super::EvalError;
use crate::data::{Normalizer, SeriesTable, WindowSample, WindowSet};
use crate::graph::NeighborIndex;
use crate::model::ModelParams;
use crate::tape::Tape;
use crate::tensor::TensorError;

/// Samples per parallel work unit; fixed so reductions are order-stable.
const EVAL_CHUNK: usize = 64;

/// Per-horizon error summary. `mae`/`rmse` are in normalized units
/// (capacity-normalized power, or z-scored speed in speed mode); the `_raw`
/// twins are in the original units.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonMetrics {
    pub mae: Vec<f64>,
    pub rmse: Vec<f64>,
    pub mae_raw: Vec<f64>,
    pub rmse_raw: Vec<f64>,
    pub counts: Vec<usize>,
}

impl HorizonMetrics {
    pub fn tau_max(&self) -> usize {
        self.mae.len()
    }
}

/// Full evaluation output: horizon metrics plus a per-turbine normalized MAE
/// averaged over every origin and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metrics: HorizonMetrics,
    pub per_turbine_mae: Vec<f64>,
}

struct Accum {
    abs_n: Vec<f64>,
    sq_n: Vec<f64>,
    abs_r: Vec<f64>,
    sq_r: Vec<f64>,
    counts: Vec<usize>,
    turbine_abs: Vec<f64>,
    turbine_counts: Vec<usize>,
}

impl Accum {
    fn new(tau_max: usize, n_turbines: usize) -> Self {
        Self {
            abs_n: vec![0.0; tau_max],
            sq_n: vec![0.0; tau_max],
            abs_r: vec![0.0; tau_max],
            sq_r: vec![0.0; tau_max],
            counts: vec![0; tau_max],
            turbine_abs: vec![0.0; n_turbines],
            turbine_counts: vec![0; n_turbines],
        }
    }

    fn record(&mut self, norm: &Normalizer, sample: &WindowSample, predictions: &[f64]) {
        for (h, (&pred, &actual)) in predictions.iter().zip(&sample.targets).enumerate() {
            let e_n = pred - actual;
            let e_r = norm.denorm_target(sample.turbine, pred)
                - norm.denorm_target(sample.turbine, actual);
            self.abs_n[h] += e_n.abs();
            self.sq_n[h] += e_n * e_n;
            self.abs_r[h] += e_r.abs();
            self.sq_r[h] += e_r * e_r;
            self.counts[h] += 1;
            self.turbine_abs[sample.turbine] += e_n.abs();
            self.turbine_counts[sample.turbine] += 1;
        }
    }

    fn merge(&mut self, other: Accum) {
        let pairs = [
            (&mut self.abs_n, other.abs_n),
            (&mut self.sq_n, other.sq_n),
            (&mut self.abs_r, other.abs_r),
            (&mut self.sq_r, other.sq_r),
            (&mut self.turbine_abs, other.turbine_abs),
        ];
        for (mine, theirs) in pairs {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        for (a, b) in self.turbine_counts.iter_mut().zip(other.turbine_counts) {
            *a += b;
        }
    }

    fn finish(self) -> EvalReport {
        let mean = |sums: &[f64]| -> Vec<f64> {
            sums.iter()
                .zip(&self.counts)
                .map(|(&s, &c)| s / c as f64)
                .collect()
        };
        let root_mean = |sums: &[f64]| -> Vec<f64> {
            sums.iter()
                .zip(&self.counts)
                .map(|(&s, &c)| (s / c as f64).sqrt())
                .collect()
        };
        let per_turbine_mae = self
            .turbine_abs
            .iter()
            .zip(&self.turbine_counts)
            .map(|(&s, &c)| s / c as f64)
            .collect();
        EvalReport {
            metrics: HorizonMetrics {
                mae: mean(&self.abs_n),
                rmse: root_mean(&self.sq_n),
                mae_raw: mean(&self.abs_r),
                rmse_raw: root_mean(&self.sq_r),
                counts: self.counts,
            },
            per_turbine_mae,
        }
    }
}

/// Roll a forecaster over every admissible (turbine, origin) pair and
/// aggregate errors. `predict` returns normalized forecasts for horizons
/// 1..=tau_max.
pub(crate) fn aggregate<F>(
    windows: &WindowSet,
    norm: &Normalizer,
    predict: F,
) -> Result<EvalReport, EvalError>
where
    F: Fn(&WindowSample) -> Result<Vec<f64>, TensorError> + Sync,
{
    let tau_max = windows.spec().tau_max;
    let n_turbines = windows.len() / windows.per_turbine();
    let indices: Vec<usize> = (0..windows.len()).collect();
    let parts: Result<Vec<Accum>, TensorError> = indices
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let mut acc = Accum::new(tau_max, n_turbines);
            for &idx in chunk {
                let sample = windows.get(idx);
                let predictions = predict(&sample)?;
                assert_eq!(predictions.len(), tau_max, "one prediction per horizon");
                acc.record(norm, &sample, &predictions);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Accum::new(tau_max, n_turbines);
    for part in parts? {
        total.merge(part);
    }
    Ok(total.finish())
}

/// Evaluate a trained model over a test table with stride-1 rolling origins.
pub fn evaluate(
    params: &ModelParams,
    table: &SeriesTable,
    neighbors: &NeighborIndex,
    norm: &Normalizer,
) -> Result<EvalReport, EvalError> {
    let windows = WindowSet::new(table, neighbors, norm, params.hyper.window_spec())?;
    aggregate(&windows, norm, |sample| {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let outs = bound.forward(&mut tape, sample)?;
        Ok(outs.iter().map(|&v| tape.value(v).item()).collect())
    })
}

/// Evaluate a trained MLP baseline over a test table.
pub fn evaluate_mlp(
    mlp: &MlpParams,
    table: &SeriesTable,
    neighbors: &NeighborIndex,
    norm: &Normalizer,
) -> Result<EvalReport, EvalError> {
    let spec = crate::data::WindowSpec {
        m: mlp.m,
        tau_max: mlp.tau_max,
        power_history: false,
        southern: false,
    };
    let windows = WindowSet::new(table, neighbors, norm, spec)?;
    aggregate(&windows, norm, |sample| mlp.predict(sample))
}

/// Which of the two error statistics a CSV should carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Mae,
    Rmse,
}

/// Write one row per method with columns `h1..h{tau_max}`. Values use the
/// shortest round-trip float formatting, so files are byte-stable.
pub fn write_metrics_csv<W: Write>(
    mut w: W,
    rows: &[(String, &HorizonMetrics)],
    kind: MetricKind,
    normalized: bool,
) -> Result<(), EvalError> {
    let tau_max = rows.first().map_or(0, |(_, m)| m.tau_max());
    write!(w, "method")?;
    for h in 1..=tau_max {
        write!(w, ",h{h}")?;
    }
    writeln!(w)?;
    for (method, metrics) in rows {
        let values = match (kind, normalized) {
            (MetricKind::Mae, true) => &metrics.mae,
            (MetricKind::Mae, false) => &metrics.mae_raw,
            (MetricKind::Rmse, true) => &metrics.rmse,
            (MetricKind::Rmse, false) => &metrics.rmse_raw,
        };
        write!(w, "{method}")?;
        for v in values {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_farm, SynthConfig, TargetKind};
    use crate::graph::build_knn;
    use crate::model::{CellKind, HyperParams};
    use crate::train::mse_on_tape;
    use proptest::prelude::*;

    struct Fixture {
        table: SeriesTable,
        neighbors: NeighborIndex,
        norm: Normalizer,
    }

    fn fixture(seed: u64, n_turbines: usize, days: usize, k: usize) -> Fixture {
        let (layout, table) = synth_farm(&SynthConfig {
            n_turbines,
            days,
            seed,
            ..Default::default()
        })
        .unwrap();
        let neighbors = build_knn(&layout, k).unwrap();
        let norm = Normalizer::fit(&table, TargetKind::Power).unwrap();
        Fixture {
            table,
            neighbors,
            norm,
        }
    }

    fn windows<'a>(f: &'a Fixture, m: usize, tau_max: usize) -> WindowSet<'a> {
        let spec = crate::data::WindowSpec {
            m,
            tau_max,
            power_history: false,
            southern: false,
        };
        WindowSet::new(&f.table, &f.neighbors, &f.norm, spec).unwrap()
    }

    #[test]
    fn perfect_forecaster_scores_zero() {
        let f = fixture(1, 3, 3, 2);
        let w = windows(&f, 6, 4);
        let report = aggregate(&w, &f.norm, |s| Ok(s.targets.clone())).unwrap();
        for h in 0..4 {
            assert_eq!(report.metrics.mae[h], 0.0);
            assert_eq!(report.metrics.rmse[h], 0.0);
            assert_eq!(report.metrics.mae_raw[h], 0.0);
        }
        assert!(report.per_turbine_mae.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn counts_are_equal_across_horizons() {
        let f = fixture(2, 3, 4, 2);
        let w = windows(&f, 8, 5);
        let report = aggregate(&w, &f.norm, |s| Ok(s.targets.clone())).unwrap();
        let expected = w.len();
        assert!(report.metrics.counts.iter().all(|&c| c == expected));
    }

    #[test]
    fn constant_zero_forecaster_scores_mean_absolute_target() {
        let f = fixture(3, 2, 3, 2);
        let w = windows(&f, 6, 3);
        let report = aggregate(&w, &f.norm, |_| Ok(vec![0.0; 3])).unwrap();
        for h in 0..3 {
            let mut sum = 0.0;
            for idx in 0..w.len() {
                sum += w.get(idx).targets[h].abs();
            }
            let want = sum / w.len() as f64;
            assert!((report.metrics.mae[h] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_matches_scalar_loop() {
        let f = fixture(4, 3, 3, 3);
        let w = windows(&f, 5, 4);
        let predict = |s: &WindowSample| -> Vec<f64> {
            (1..=4)
                .map(|h| (3.0 * s.y_current + h as f64).sin())
                .collect()
        };
        let report = aggregate(&w, &f.norm, |s| Ok(predict(s))).unwrap();

        let tau = 4;
        let mut abs_n = vec![0.0; tau];
        let mut sq_n = vec![0.0; tau];
        let mut abs_r = vec![0.0; tau];
        let mut sq_r = vec![0.0; tau];
        for idx in 0..w.len() {
            let s = w.get(idx);
            let preds = predict(&s);
            for h in 0..tau {
                let e = preds[h] - s.targets[h];
                abs_n[h] += e.abs();
                sq_n[h] += e * e;
                let er = f.norm.denorm_target(s.turbine, preds[h])
                    - f.norm.denorm_target(s.turbine, s.targets[h]);
                abs_r[h] += er.abs();
                sq_r[h] += er * er;
            }
        }
        let n = w.len() as f64;
        for h in 0..tau {
            assert!((report.metrics.mae[h] - abs_n[h] / n).abs() < 1e-12);
            assert!((report.metrics.rmse[h] - (sq_n[h] / n).sqrt()).abs() < 1e-12);
            assert!((report.metrics.mae_raw[h] - abs_r[h] / n).abs() < 1e-9);
            assert!((report.metrics.rmse_raw[h] - (sq_r[h] / n).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn evaluate_agrees_with_training_loss() {
        let f = fixture(5, 3, 4, 2);
        let hyper = HyperParams {
            m: 6,
            k: 2,
            hidden: 5,
            embed_dim: 3,
            mlp_hidden: 4,
            tau_max: 3,
            n_turbines: 3,
            power_history: false,
            embed_encoder: false,
            southern: false,
        };
        let params = ModelParams::init(hyper.clone(), CellKind::Gru, 5);
        let report = evaluate(&params, &f.table, &f.neighbors, &f.norm).unwrap();
        let mean_sq: f64 = report
            .metrics
            .rmse
            .iter()
            .map(|r| r * r)
            .sum::<f64>()
            / hyper.tau_max as f64;

        let w = WindowSet::new(&f.table, &f.neighbors, &f.norm, hyper.window_spec()).unwrap();
        let mut loss_sum = 0.0;
        for idx in 0..w.len() {
            let s = w.get(idx);
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let outs = bound.forward(&mut tape, &s).unwrap();
            let loss = mse_on_tape(&mut tape, &outs, &s.targets).unwrap();
            loss_sum += tape.value(loss).item();
        }
        let mean_loss = loss_sum / w.len() as f64;
        assert!(
            (mean_sq - mean_loss).abs() < 1e-10,
            "evaluate {mean_sq} vs loss {mean_loss}"
        );
    }

    #[test]
    fn per_turbine_mae_separates_turbines() {
        let f = fixture(6, 2, 3, 1);
        let w = windows(&f, 6, 2);
        let report = aggregate(&w, &f.norm, |s| {
            if s.turbine == 0 {
                Ok(s.targets.clone())
            } else {
                Ok(s.targets.iter().map(|t| t + 0.25).collect())
            }
        })
        .unwrap();
        assert_eq!(report.per_turbine_mae.len(), 2);
        assert_eq!(report.per_turbine_mae[0], 0.0);
        assert!((report.per_turbine_mae[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn metrics_csv_layout_is_table_shaped() {
        let metrics = HorizonMetrics {
            mae: vec![0.125, 0.25],
            rmse: vec![0.5, 0.75],
            mae_raw: vec![250.0, 500.0],
            rmse_raw: vec![1000.0, 1500.0],
            counts: vec![10, 10],
        };
        let mut buf = Vec::new();
        write_metrics_csv(
            &mut buf,
            &[("ours".to_string(), &metrics), ("per".to_string(), &metrics)],
            MetricKind::Mae,
            true,
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "method,h1,h2\nours,0.125,0.25\nper,0.125,0.25\n");

        let mut buf = Vec::new();
        write_metrics_csv(
            &mut buf,
            &[("ours".to_string(), &metrics)],
            MetricKind::Rmse,
            false,
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "method,h1,h2\nours,1000,1500\n");
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(offsets in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let f = fixture(7, 2, 3, 2);
            let w = windows(&f, 6, 3);
            let report = aggregate(&w, &f.norm, |s| {
                Ok(s.targets.iter().zip(&offsets).map(|(t, o)| t + o * (1.0 + t)).collect())
            }).unwrap();
            for h in 0..3 {
                prop_assert!(report.metrics.rmse[h] >= report.metrics.mae[h] - 1e-12);
                prop_assert!(report.metrics.rmse_raw[h] >= report.metrics.mae_raw[h] - 1e-9);
                prop_assert!(report.metrics.mae[h] >= 0.0);
            }
        }
    }
}
