//! Synthetic wind-farm generator for desk-scale experiments.
//!
//! Real SCADA archives are proprietary, so every experiment in this crate can
//! run against generated data with the same statistical skeleton: a shared
//! regional wind signal with AR(1) persistence plus diurnal and seasonal
//! cycles, a spatially correlated local perturbation whose correlation decays
//! with inter-turbine distance, independent measurement noise, and a distinct
//! logistic power curve per turbine. Everything is a pure function of the
//! seed.

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DataError, SeriesTable};
use crate::graph::FarmLayout;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_turbines: usize,
    pub days: usize,
    pub seed: u64,
    pub start: NaiveDateTime,
    /// Long-run mean wind speed in m/s.
    pub mean_speed: f64,
    /// AR(1) coefficient shared by the regional signal and the spatial
    /// perturbation; the lag-1 autocorrelation of generated speed approaches
    /// this value when the cycles and noise are turned off.
    pub ar_coeff: f64,
    /// Innovation std of the farm-wide AR(1) signal.
    pub shared_std: f64,
    /// Amplitude of the 24 h cycle.
    pub diurnal_amp: f64,
    /// Amplitude of the yearly cycle.
    pub seasonal_amp: f64,
    /// Innovation std of the per-turbine spatially correlated perturbation.
    pub spatial_std: f64,
    /// e-folding distance (meters) of the spatial correlation;
    /// `f64::INFINITY` makes the perturbation identical across turbines.
    pub spatial_corr_length: f64,
    /// Std of i.i.d. per-turbine measurement noise.
    pub noise_level: f64,
    /// Grid pitch of the jittered turbine layout, meters.
    pub grid_spacing: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_turbines: 20,
            days: 120,
            seed: 0,
            start: "2020-01-01T00:00:00".parse().expect("valid timestamp"),
            mean_speed: 8.0,
            ar_coeff: 0.8,
            shared_std: 0.8,
            diurnal_amp: 1.2,
            seasonal_amp: 1.0,
            spatial_std: 0.5,
            spatial_corr_length: 1_500.0,
            noise_level: 0.4,
            grid_spacing: 500.0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), DataError> {
        let fail = |msg: String| Err(DataError::InvalidSynthConfig(msg));
        if self.n_turbines < 1 {
            return fail("n_turbines must be at least 1".into());
        }
        if self.days < 2 {
            return fail("days must be at least 2".into());
        }
        if !(0.0..1.0).contains(&self.ar_coeff) {
            return fail(format!("ar_coeff must be in [0, 1), got {}", self.ar_coeff));
        }
        for (name, v) in [
            ("mean_speed", self.mean_speed),
            ("shared_std", self.shared_std),
            ("diurnal_amp", self.diurnal_amp),
            ("seasonal_amp", self.seasonal_amp),
            ("spatial_std", self.spatial_std),
            ("noise_level", self.noise_level),
        ] {
            if !v.is_finite() || v < 0.0 {
                return fail(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.grid_spacing > 0.0 && self.grid_spacing.is_finite()) {
            return fail(format!("grid_spacing must be positive, got {}", self.grid_spacing));
        }
        if !(self.spatial_corr_length > 0.0) {
            return fail(format!(
                "spatial_corr_length must be positive (infinity allowed), got {}",
                self.spatial_corr_length
            ));
        }
        Ok(())
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// A tiny ridge is added beforehand so nearly singular correlation matrices
/// (turbines much closer than the correlation length) stay factorable.
fn cholesky(mut c: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = c.len();
    for (i, row) in c.iter_mut().enumerate() {
        row[i] += 1e-10;
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = c[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                assert!(sum > 0.0, "correlation matrix must be positive definite");
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    l
}

/// Generate a layout and a complete hourly series table from a seed.
pub fn synth_farm(cfg: &SynthConfig) -> Result<(FarmLayout, SeriesTable), DataError> {
    cfg.validate()?;
    let n = cfg.n_turbines;
    let t_len = cfg.days * 24;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Jittered grid layout.
    let cols = (n as f64).sqrt().ceil() as usize;
    let mut ids = Vec::with_capacity(n);
    let mut coords = Vec::with_capacity(n);
    for i in 0..n {
        let jx: f64 = rng.gen_range(-0.2..0.2) * cfg.grid_spacing;
        let jy: f64 = rng.gen_range(-0.2..0.2) * cfg.grid_spacing;
        ids.push(format!("T{i:03}"));
        coords.push((
            (i % cols) as f64 * cfg.grid_spacing + jx,
            (i / cols) as f64 * cfg.grid_spacing + jy,
        ));
    }
    let layout = FarmLayout::new(ids.clone(), coords)?;

    // Distinct logistic power curve per turbine: rated power (kW), midpoint
    // speed, and steepness.
    let curves: Vec<(f64, f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.gen_range(1_500.0..3_500.0),
                rng.gen_range(7.0..11.0),
                rng.gen_range(0.6..1.2),
            )
        })
        .collect();

    let finite_corr = cfg.spatial_corr_length.is_finite();
    let chol = finite_corr.then(|| {
        let corr: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let (xi, yi) = layout.coords()[i];
                        let (xj, yj) = layout.coords()[j];
                        let d = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                        (-d / cfg.spatial_corr_length).exp()
                    })
                    .collect()
            })
            .collect();
        cholesky(corr)
    });

    // Draw one correlated perturbation vector; with infinite correlation
    // length every turbine shares a single draw exactly.
    let draw_spatial = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        match &chol {
            Some(l) => {
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                (0..n)
                    .map(|i| (0..=i).map(|j| l[i][j] * z[j]).sum::<f64>() * cfg.spatial_std)
                    .collect()
            }
            None => {
                let z: f64 = rng.sample(StandardNormal);
                vec![z * cfg.spatial_std; n]
            }
        }
    };

    // Stationary AR(1) starts: scale the first draw to the marginal std so
    // autocorrelation statistics hold from the first hour.
    let stationary = 1.0 / (1.0 - cfg.ar_coeff * cfg.ar_coeff).sqrt();
    let eps0: f64 = rng.sample(StandardNormal);
    let mut shared = eps0 * cfg.shared_std * stationary;
    let mut spatial: Vec<f64> = draw_spatial(&mut rng)
        .into_iter()
        .map(|v| v * stationary)
        .collect();

    let timestamps: Vec<NaiveDateTime> = (0..t_len)
        .map(|h| cfg.start + Duration::hours(h as i64))
        .collect();
    let mut speed = vec![Vec::with_capacity(t_len); n];
    let mut power = vec![Vec::with_capacity(t_len); n];
    for (t, ts) in timestamps.iter().enumerate() {
        if t > 0 {
            let eps: f64 = rng.sample(StandardNormal);
            shared = cfg.ar_coeff * shared + eps * cfg.shared_std;
            let eta = draw_spatial(&mut rng);
            for (v, e) in spatial.iter_mut().zip(eta) {
                *v = cfg.ar_coeff * *v + e;
            }
        }
        let hour_angle = std::f64::consts::TAU * ts.hour() as f64 / 24.0;
        let doy_angle = std::f64::consts::TAU * (ts.ordinal() - 1) as f64 / 365.0;
        let base = cfg.mean_speed
            + shared
            + cfg.diurnal_amp * hour_angle.sin()
            + cfg.seasonal_amp * doy_angle.sin();
        for i in 0..n {
            let w: f64 = rng.sample(StandardNormal);
            let s = (base + spatial[i] + w * cfg.noise_level).max(0.0);
            let (rated, mid, slope) = curves[i];
            let p = (rated * crate::tape::sigmoid(slope * (s - mid))).clamp(0.0, rated);
            speed[i].push(s);
            power[i].push(p);
        }
    }

    let table = SeriesTable::new(ids, timestamps, speed, Some(power))?;
    Ok((layout, table))
}
