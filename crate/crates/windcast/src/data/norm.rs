//! Per-turbine scaling fitted on training data and frozen into checkpoints.

use serde::{Deserialize, Serialize};

use super::{DataError, SeriesTable};

/// What the model predicts and how it is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Power scaled by each turbine's observed maximum (a rated-power proxy),
    /// so targets live in [0, 1].
    Power,
    /// Wind speed itself, standardized per turbine (speed-forecast mode).
    Speed,
}

/// Per-turbine z-score parameters for speed inputs plus the target scaling.
///
/// Fitted once on the training slice; forecasting and evaluation reuse the
/// stored statistics so no information flows backward from test data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    target: TargetKind,
    speed_mean: Vec<f64>,
    speed_std: Vec<f64>,
    power_max: Vec<f64>,
}

impl Normalizer {
    /// Compute statistics from a table. Requires non-constant speed per
    /// turbine, and strictly positive maximum power when `target` is power.
    pub fn fit(table: &SeriesTable, target: TargetKind) -> Result<Self, DataError> {
        let n = table.n_turbines();
        let t_len = table.t_len() as f64;
        let mut speed_mean = Vec::with_capacity(n);
        let mut speed_std = Vec::with_capacity(n);
        let mut power_max = Vec::with_capacity(n);
        for i in 0..n {
            let row = table.speed(i);
            let mean = row.iter().sum::<f64>() / t_len;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / t_len;
            let std = var.sqrt();
            if std <= 0.0 {
                return Err(DataError::ConstantSeries {
                    id: table.turbine_ids()[i].clone(),
                });
            }
            speed_mean.push(mean);
            speed_std.push(std);
            match target {
                TargetKind::Power => {
                    let p = table.power(i).ok_or(DataError::NoPowerColumn)?;
                    let max = p.iter().cloned().fold(0.0, f64::max);
                    if max <= 0.0 {
                        return Err(DataError::ZeroPowerMax {
                            id: table.turbine_ids()[i].clone(),
                        });
                    }
                    power_max.push(max);
                }
                TargetKind::Speed => power_max.push(f64::NAN),
            }
        }
        if target == TargetKind::Speed {
            power_max.clear();
        }
        Ok(Self {
            target,
            speed_mean,
            speed_std,
            power_max,
        })
    }

    pub fn target(&self) -> TargetKind {
        self.target
    }

    pub fn n_turbines(&self) -> usize {
        self.speed_mean.len()
    }

    pub fn norm_speed(&self, turbine: usize, raw: f64) -> f64 {
        (raw - self.speed_mean[turbine]) / self.speed_std[turbine]
    }

    pub fn denorm_speed(&self, turbine: usize, z: f64) -> f64 {
        z * self.speed_std[turbine] + self.speed_mean[turbine]
    }

    /// Scale a raw target (power or speed, per [`TargetKind`]) into model units.
    pub fn norm_target(&self, turbine: usize, raw: f64) -> f64 {
        match self.target {
            TargetKind::Power => raw / self.power_max[turbine],
            TargetKind::Speed => self.norm_speed(turbine, raw),
        }
    }

    /// Map a model-unit target back to raw units.
    pub fn denorm_target(&self, turbine: usize, y: f64) -> f64 {
        match self.target {
            TargetKind::Power => y * self.power_max[turbine],
            TargetKind::Speed => self.denorm_speed(turbine, y),
        }
    }

    /// Raw target series for a turbine straight from a table.
    pub fn raw_target<'t>(
        &self,
        table: &'t SeriesTable,
        turbine: usize,
    ) -> Result<&'t [f64], DataError> {
        match self.target {
            TargetKind::Power => table.power(turbine).ok_or(DataError::NoPowerColumn),
            TargetKind::Speed => Ok(table.speed(turbine)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDateTime;
    use proptest::prelude::*;

    fn table(speed: Vec<Vec<f64>>, power: Option<Vec<Vec<f64>>>) -> SeriesTable {
        let n = speed.len();
        let t_len = speed[0].len();
        let start: NaiveDateTime = "2020-01-01T00:00:00".parse().unwrap();
        let timestamps = (0..t_len)
            .map(|h| start + chrono::Duration::hours(h as i64))
            .collect();
        let ids = (0..n).map(|i| format!("T{i}")).collect();
        SeriesTable::new(ids, timestamps, speed, power).unwrap()
    }

    #[test]
    fn z_score_statistics_are_per_turbine() {
        let t = table(
            vec![vec![2.0, 4.0, 6.0], vec![10.0, 10.0, 13.0]],
            Some(vec![vec![0.0, 50.0, 100.0], vec![0.0, 10.0, 20.0]]),
        );
        let norm = Normalizer::fit(&t, TargetKind::Power).unwrap();
        assert_eq!(norm.norm_speed(0, 4.0), 0.0);
        let std0 = (8.0f64 / 3.0).sqrt();
        assert!((norm.norm_speed(0, 6.0) - 2.0 / std0).abs() < 1e-12);
        assert_eq!(norm.norm_target(0, 50.0), 0.5);
        assert_eq!(norm.norm_target(1, 10.0), 0.5);
    }

    #[test]
    fn constant_speed_is_rejected() {
        let t = table(
            vec![vec![5.0, 5.0, 5.0]],
            Some(vec![vec![1.0, 2.0, 3.0]]),
        );
        let err = Normalizer::fit(&t, TargetKind::Power).unwrap_err();
        assert!(matches!(err, DataError::ConstantSeries { .. }));
    }

    #[test]
    fn all_zero_power_is_rejected() {
        let t = table(vec![vec![5.0, 6.0, 7.0]], Some(vec![vec![0.0, 0.0, 0.0]]));
        assert!(matches!(
            Normalizer::fit(&t, TargetKind::Power),
            Err(DataError::ZeroPowerMax { .. })
        ));
    }

    #[test]
    fn speed_target_without_power_column() {
        let t = table(vec![vec![5.0, 6.0, 7.0]], None);
        let norm = Normalizer::fit(&t, TargetKind::Speed).unwrap();
        assert_eq!(norm.norm_target(0, 6.0), 0.0);
        assert!(matches!(
            Normalizer::fit(&t, TargetKind::Power),
            Err(DataError::NoPowerColumn)
        ));
    }

    proptest! {
        #[test]
        fn round_trip_identity(
            mean in 2.0f64..15.0,
            spread in 0.5f64..2.0,
            raw in 0.0f64..30.0,
            pmax in 0.5f64..3000.0,
            p in 0.0f64..3000.0,
        ) {
            let t = table(
                vec![vec![mean - spread, mean, mean + spread]],
                Some(vec![vec![0.0, pmax / 2.0, pmax]]),
            );
            let norm = Normalizer::fit(&t, TargetKind::Power).unwrap();
            let z = norm.norm_speed(0, raw);
            prop_assert!((norm.denorm_speed(0, z) - raw).abs() < 1e-12 * raw.abs().max(1.0));
            let y = norm.norm_target(0, p);
            prop_assert!((norm.denorm_target(0, y) - p).abs() < 1e-12 * p.abs().max(1.0));
        }
    }
}
