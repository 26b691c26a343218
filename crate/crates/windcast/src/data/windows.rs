//! Sliding-window training samples assembled on demand.

use super::{time_features, DataError, Normalizer, SeriesTable, TargetKind, TIME_FEATURE_DIM};
use crate::graph::NeighborIndex;
use crate::tensor::Tensor;

/// Window geometry and input-channel options.
#[derive(Debug, Clone, Copy)]
pub struct WindowSpec {
    /// Encoder history length in hours.
    pub m: usize,
    /// Number of forecast horizons (decoder steps).
    pub tau_max: usize,
    /// Also feed the neighbours' power history as input channels.
    pub power_history: bool,
    /// Southern-hemisphere season mapping for calendar features.
    pub southern: bool,
}

/// One training sample: an input window ending at origin `t`, the current
/// target value, and the `tau_max` future targets.
#[derive(Debug, Clone)]
pub struct WindowSample {
    pub turbine: usize,
    /// Time index of the window's last column within the source table.
    pub origin: usize,
    /// Input matrix, one row per channel, one column per history hour.
    /// Rows: k neighbour speeds (self first), then optionally k neighbour
    /// powers, then the 8 calendar features.
    pub input: Tensor,
    /// Normalized target at the origin hour (the decoder's first input).
    pub y_current: f64,
    /// Normalized targets at t+1 ..= t+tau_max.
    pub targets: Vec<f64>,
    /// Calendar features at each forecast hour t+1 ..= t+tau_max.
    pub future_features: Vec<[f64; TIME_FEATURE_DIM]>,
}

/// Lazily indexed view of every valid window in a table.
///
/// Samples are ordered turbine-major, then by origin hour, so sample index
/// `i * per_turbine + s` is turbine `i` at origin `m - 1 + s`. Nothing is
/// materialized until [`WindowSet::get`] is called.
#[derive(Debug)]
pub struct WindowSet<'a> {
    table: &'a SeriesTable,
    nbr: &'a NeighborIndex,
    norm: &'a Normalizer,
    spec: WindowSpec,
    features: Vec<[f64; TIME_FEATURE_DIM]>,
    per_turbine: usize,
}

impl<'a> WindowSet<'a> {
    pub fn new(
        table: &'a SeriesTable,
        nbr: &'a NeighborIndex,
        norm: &'a Normalizer,
        spec: WindowSpec,
    ) -> Result<Self, DataError> {
        assert!(spec.m >= 1 && spec.tau_max >= 1, "window sizes are positive");
        assert_eq!(nbr.len(), table.n_turbines(), "index matches table");
        assert_eq!(norm.n_turbines(), table.n_turbines(), "normalizer matches table");
        let needed = spec.m + spec.tau_max;
        if table.t_len() < needed {
            return Err(DataError::TooShort {
                t_len: table.t_len(),
                needed,
            });
        }
        if norm.target() == TargetKind::Power && !table.has_power() {
            return Err(DataError::NoPowerColumn);
        }
        if spec.power_history && (norm.target() != TargetKind::Power || !table.has_power()) {
            return Err(DataError::PowerHistoryUnavailable);
        }
        let features = table
            .timestamps()
            .iter()
            .map(|&ts| time_features(ts, spec.southern))
            .collect();
        Ok(Self {
            table,
            nbr,
            norm,
            spec,
            features,
            per_turbine: table.t_len() - spec.m - spec.tau_max + 1,
        })
    }

    pub fn len(&self) -> usize {
        self.table.n_turbines() * self.per_turbine
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn per_turbine(&self) -> usize {
        self.per_turbine
    }

    pub fn spec(&self) -> &WindowSpec {
        &self.spec
    }

    /// Number of rows in each sample's input matrix.
    pub fn input_rows(&self) -> usize {
        let speed_rows = self.nbr.k();
        let power_rows = if self.spec.power_history {
            self.nbr.k()
        } else {
            0
        };
        speed_rows + power_rows + TIME_FEATURE_DIM
    }

    /// (turbine, origin hour) addressed by a flat sample index.
    pub fn origin_of(&self, idx: usize) -> (usize, usize) {
        let turbine = idx / self.per_turbine;
        let t = self.spec.m - 1 + idx % self.per_turbine;
        (turbine, t)
    }

    pub fn get(&self, idx: usize) -> WindowSample {
        assert!(idx < self.len(), "sample index in range");
        let (turbine, origin) = self.origin_of(idx);
        self.sample_at(turbine, origin)
    }

    /// Build the sample for one turbine at one origin hour.
    pub fn sample_at(&self, turbine: usize, origin: usize) -> WindowSample {
        let (m, tau) = (self.spec.m, self.spec.tau_max);
        assert!(origin + 1 >= m && origin + tau < self.table.t_len());
        let window = origin + 1 - m..origin + 1;
        let rows = self.input_rows();
        let mut input = Vec::with_capacity(rows * m);
        for &j in self.nbr.neighbors(turbine) {
            let speeds = &self.table.speed(j)[window.clone()];
            input.extend(speeds.iter().map(|&v| self.norm.norm_speed(j, v)));
        }
        if self.spec.power_history {
            for &j in self.nbr.neighbors(turbine) {
                let powers = &self.table.power(j).expect("validated in new")[window.clone()];
                input.extend(powers.iter().map(|&v| self.norm.norm_target(j, v)));
            }
        }
        for f in 0..TIME_FEATURE_DIM {
            input.extend(window.clone().map(|t| self.features[t][f]));
        }

        let raw = self
            .norm
            .raw_target(self.table, turbine)
            .expect("validated in new");
        let y_current = self.norm.norm_target(turbine, raw[origin]);
        let targets = (1..=tau)
            .map(|h| self.norm.norm_target(turbine, raw[origin + h]))
            .collect();
        let future_features = (1..=tau).map(|h| self.features[origin + h]).collect();

        WindowSample {
            turbine,
            origin,
            input: Tensor::unchecked(vec![rows, m], input),
            y_current,
            targets,
            future_features,
        }
    }
}

/// Build the model input for a pure forecast issued at `origin`, with no
/// future targets attached.
///
/// Unlike [`WindowSet`], this never touches rows after the origin: future
/// calendar features come from extending the hourly grid, so the origin may
/// be the very last row of the table and later rows (if present) cannot
/// influence the result. The returned sample has an empty `targets` vector.
pub fn forecast_input(
    table: &SeriesTable,
    nbr: &NeighborIndex,
    norm: &Normalizer,
    spec: WindowSpec,
    turbine: usize,
    origin: usize,
) -> Result<WindowSample, DataError> {
    assert!(spec.m >= 1 && spec.tau_max >= 1, "window sizes are positive");
    assert_eq!(nbr.len(), table.n_turbines(), "index matches table");
    assert_eq!(norm.n_turbines(), table.n_turbines(), "normalizer matches table");
    assert!(origin < table.t_len(), "origin inside the table");
    if origin + 1 < spec.m {
        return Err(DataError::TooShort {
            t_len: origin + 1,
            needed: spec.m,
        });
    }
    if norm.target() == TargetKind::Power && !table.has_power() {
        return Err(DataError::NoPowerColumn);
    }
    if spec.power_history && (norm.target() != TargetKind::Power || !table.has_power()) {
        return Err(DataError::PowerHistoryUnavailable);
    }

    let m = spec.m;
    let window = origin + 1 - m..origin + 1;
    let rows = nbr.k() * if spec.power_history { 2 } else { 1 } + TIME_FEATURE_DIM;
    let mut input = Vec::with_capacity(rows * m);
    for &j in nbr.neighbors(turbine) {
        let speeds = &table.speed(j)[window.clone()];
        input.extend(speeds.iter().map(|&v| norm.norm_speed(j, v)));
    }
    if spec.power_history {
        for &j in nbr.neighbors(turbine) {
            let powers = &table.power(j).expect("checked above")[window.clone()];
            input.extend(powers.iter().map(|&v| norm.norm_target(j, v)));
        }
    }
    let window_features: Vec<[f64; TIME_FEATURE_DIM]> = window
        .clone()
        .map(|t| time_features(table.timestamps()[t], spec.southern))
        .collect();
    for f in 0..TIME_FEATURE_DIM {
        input.extend(window_features.iter().map(|feat| feat[f]));
    }

    let raw = norm.raw_target(table, turbine).expect("checked above");
    let y_current = norm.norm_target(turbine, raw[origin]);
    let origin_ts = table.timestamps()[origin];
    let future_features = (1..=spec.tau_max)
        .map(|h| {
            let ts = origin_ts + chrono::Duration::hours(h as i64);
            time_features(ts, spec.southern)
        })
        .collect();

    Ok(WindowSample {
        turbine,
        origin,
        input: Tensor::unchecked(vec![rows, m], input),
        y_current,
        targets: Vec::new(),
        future_features,
    })
}
