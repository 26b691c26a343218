//! Data layer: series ingestion, calendar features, normalization, sliding
//! windows, and the synthetic farm generator.

mod features;
mod norm;
mod series;
mod synth;
mod windows;

pub use features::{time_features, TIME_FEATURE_DIM};
pub use norm::{Normalizer, TargetKind};
pub use series::{ingest, ingest_segments, SeriesTable};
pub(crate) use series::parse_timestamp;
pub use synth::{synth_farm, SynthConfig};
pub use windows::{forecast_input, WindowSample, WindowSet, WindowSpec};

use chrono::NaiveDateTime;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("series csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("series csv {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse timestamp {value:?} (expected ISO-8601, e.g. 2020-01-01T06:00:00)")]
    BadTimestamp { value: String },
    #[error("timestamp {ts} is not on the hourly grid anchored at {anchor}")]
    OffGridTimestamp {
        ts: NaiveDateTime,
        anchor: NaiveDateTime,
    },
    #[error("timestamps not in increasing order: {next} follows {prev}")]
    NonMonotoneTimestamps {
        prev: NaiveDateTime,
        next: NaiveDateTime,
    },
    #[error("duplicate row for turbine {id:?} at {ts}")]
    DuplicateRow { id: String, ts: NaiveDateTime },
    #[error("unknown turbine id {id:?} (not in layout)")]
    UnknownTurbine { id: String },
    #[error(
        "gap of {hours} hours from {start} to {end} exceeds the 3-hour \
         interpolation limit; pass --allow-split to use the longest contiguous segment"
    )]
    GapTooLong {
        start: NaiveDateTime,
        end: NaiveDateTime,
        hours: usize,
    },
    #[error("turbine {id:?} at {ts}: speed given but power missing while the power column is in use")]
    MissingPower { id: String, ts: NaiveDateTime },
    #[error("turbine {id:?} at {ts}: negative {what} {value}")]
    NegativeValue {
        what: &'static str,
        id: String,
        ts: NaiveDateTime,
        value: f64,
    },
    #[error("turbine {id:?} at {ts}: non-finite {what}")]
    NonFiniteValue {
        what: &'static str,
        id: String,
        ts: NaiveDateTime,
    },
    #[error("series is empty")]
    EmptySeries,
    #[error("turbine {id:?} has constant wind speed; cannot standardize")]
    ConstantSeries { id: String },
    #[error("turbine {id:?} has zero maximum power; cannot scale targets")]
    ZeroPowerMax { id: String },
    #[error("series has {t_len} timestamps but windows need at least {needed} (m + max horizon)")]
    TooShort { t_len: usize, needed: usize },
    #[error("series has no power column but the power target was requested")]
    NoPowerColumn,
    #[error("power-history input channels require the power target and a power column")]
    PowerHistoryUnavailable,
    #[error("invalid synthetic-farm config: {0}")]
    InvalidSynthConfig(String),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}
