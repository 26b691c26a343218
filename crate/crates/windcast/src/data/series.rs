//! Dense hourly series tables and CSV ingestion.

use std::collections::HashMap;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use serde::Deserialize;

use super::DataError;
use crate::graph::FarmLayout;

/// How many consecutive missing hours may be bridged by linear interpolation.
const MAX_INTERP_HOURS: usize = 3;

/// Gap-free hourly wind-speed (and optionally power) matrix for one farm.
///
/// Rows are turbines in layout order; columns are consecutive hours. The
/// `power` matrix is absent when the source had no power column
/// (speed-forecast mode).
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    turbine_ids: Vec<String>,
    timestamps: Vec<NaiveDateTime>,
    speed: Vec<Vec<f64>>,
    power: Option<Vec<Vec<f64>>>,
}

pub(crate) fn parse_timestamp(s: &str) -> Result<NaiveDateTime, DataError> {
    s.parse::<NaiveDateTime>()
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .map_err(|_| DataError::BadTimestamp {
            value: s.to_string(),
        })
}

fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:%M:%S").to_string()
}

impl SeriesTable {
    pub fn new(
        turbine_ids: Vec<String>,
        timestamps: Vec<NaiveDateTime>,
        speed: Vec<Vec<f64>>,
        power: Option<Vec<Vec<f64>>>,
    ) -> Result<Self, DataError> {
        if timestamps.is_empty() || turbine_ids.is_empty() {
            return Err(DataError::EmptySeries);
        }
        for pair in timestamps.windows(2) {
            if pair[1] - pair[0] != Duration::hours(1) {
                return Err(DataError::NonMonotoneTimestamps {
                    prev: pair[0],
                    next: pair[1],
                });
            }
        }
        let t_len = timestamps.len();
        assert_eq!(speed.len(), turbine_ids.len(), "one speed row per turbine");
        let check_matrix = |matrix: &[Vec<f64>], what: &'static str| {
            for (i, row) in matrix.iter().enumerate() {
                assert_eq!(row.len(), t_len, "row length matches timestamps");
                for (t, &v) in row.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(DataError::NonFiniteValue {
                            what,
                            id: turbine_ids[i].clone(),
                            ts: timestamps[t],
                        });
                    }
                    if v < 0.0 {
                        return Err(DataError::NegativeValue {
                            what,
                            id: turbine_ids[i].clone(),
                            ts: timestamps[t],
                            value: v,
                        });
                    }
                }
            }
            Ok(())
        };
        check_matrix(&speed, "speed")?;
        if let Some(p) = &power {
            assert_eq!(p.len(), turbine_ids.len(), "one power row per turbine");
            check_matrix(p, "power")?;
        }
        Ok(Self {
            turbine_ids,
            timestamps,
            speed,
            power,
        })
    }

    pub fn n_turbines(&self) -> usize {
        self.turbine_ids.len()
    }

    pub fn t_len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn turbine_ids(&self) -> &[String] {
        &self.turbine_ids
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn speed(&self, turbine: usize) -> &[f64] {
        &self.speed[turbine]
    }

    pub fn power(&self, turbine: usize) -> Option<&[f64]> {
        self.power.as_ref().map(|p| p[turbine].as_slice())
    }

    pub fn has_power(&self) -> bool {
        self.power.is_some()
    }

    /// Restrict to timestamps in the half-open range `[start, end)`. `None`
    /// leaves that side unbounded.
    pub fn slice_time(
        &self,
        start: Option<NaiveDateTime>,
        end: Option<NaiveDateTime>,
    ) -> Result<SeriesTable, DataError> {
        let lo = match start {
            Some(s) => self.timestamps.partition_point(|&t| t < s),
            None => 0,
        };
        let hi = match end {
            Some(e) => self.timestamps.partition_point(|&t| t < e),
            None => self.timestamps.len(),
        };
        if lo >= hi {
            return Err(DataError::EmptySeries);
        }
        let slice_rows =
            |m: &Vec<Vec<f64>>| m.iter().map(|row| row[lo..hi].to_vec()).collect();
        Ok(SeriesTable {
            turbine_ids: self.turbine_ids.clone(),
            timestamps: self.timestamps[lo..hi].to_vec(),
            speed: slice_rows(&self.speed),
            power: self.power.as_ref().map(slice_rows),
        })
    }

    /// Write as long-format CSV (`timestamp,turbine_id,speed[,power]`), rows
    /// ordered by timestamp then turbine.
    pub fn to_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut writer = csv::Writer::from_path(path)?;
        if self.power.is_some() {
            writer.write_record(["timestamp", "turbine_id", "speed", "power"])?;
        } else {
            writer.write_record(["timestamp", "turbine_id", "speed"])?;
        }
        for (t, &ts) in self.timestamps.iter().enumerate() {
            let stamp = format_timestamp(ts);
            for (i, id) in self.turbine_ids.iter().enumerate() {
                let speed = self.speed[i][t].to_string();
                match &self.power {
                    Some(p) => writer.write_record([
                        stamp.as_str(),
                        id,
                        speed.as_str(),
                        p[i][t].to_string().as_str(),
                    ])?,
                    None => writer.write_record([stamp.as_str(), id, speed.as_str()])?,
                }
            }
        }
        writer.flush().map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    timestamp: String,
    turbine_id: String,
    speed: f64,
    power: Option<f64>,
}

/// Read a long-format series CSV into dense contiguous segments.
///
/// Missing (timestamp, turbine) cells of up to three consecutive hours are
/// filled by linear interpolation. Longer interior gaps split the series;
/// without `allow_split` the first such gap is an error. Leading or trailing
/// missing runs trim the usable range. Every returned segment is dense and
/// hourly.
pub fn ingest_segments(
    path: &Path,
    layout: &FarmLayout,
    allow_split: bool,
) -> Result<Vec<SeriesTable>, DataError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => DataError::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e.to_string()),
        },
        _ => DataError::Csv(e),
    })?;
    let has_power_column = reader
        .headers()?
        .iter()
        .any(|h| h.trim() == "power");

    let index_of: HashMap<&str, usize> = layout
        .turbine_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    struct Cell {
        turbine: usize,
        hour: i64,
        speed: f64,
        power: Option<f64>,
    }

    let mut cells: Vec<Cell> = Vec::new();
    let mut prev_ts: Option<NaiveDateTime> = None;
    let mut anchor: Option<NaiveDateTime> = None;
    for row in reader.deserialize() {
        let row: SeriesRow = row?;
        let ts = parse_timestamp(&row.timestamp)?;
        if let Some(prev) = prev_ts {
            if ts < prev {
                return Err(DataError::NonMonotoneTimestamps { prev, next: ts });
            }
        }
        prev_ts = Some(ts);
        let anchor_ts = *anchor.get_or_insert(ts);
        let offset = (ts - anchor_ts).num_seconds();
        if offset % 3600 != 0 {
            return Err(DataError::OffGridTimestamp {
                ts,
                anchor: anchor_ts,
            });
        }
        let turbine =
            *index_of
                .get(row.turbine_id.as_str())
                .ok_or_else(|| DataError::UnknownTurbine {
                    id: row.turbine_id.clone(),
                })?;
        let check = |what: &'static str, v: f64| {
            if !v.is_finite() {
                Err(DataError::NonFiniteValue {
                    what,
                    id: row.turbine_id.clone(),
                    ts,
                })
            } else if v < 0.0 {
                Err(DataError::NegativeValue {
                    what,
                    id: row.turbine_id.clone(),
                    ts,
                    value: v,
                })
            } else {
                Ok(())
            }
        };
        check("speed", row.speed)?;
        if has_power_column {
            match row.power {
                Some(p) => check("power", p)?,
                None => {
                    return Err(DataError::MissingPower {
                        id: row.turbine_id.clone(),
                        ts,
                    })
                }
            }
        }
        cells.push(Cell {
            turbine,
            hour: offset / 3600,
            speed: row.speed,
            power: row.power.filter(|_| has_power_column),
        });
    }

    let anchor = anchor.ok_or(DataError::EmptySeries)?;
    let t_len = cells.iter().map(|c| c.hour).max().unwrap() as usize + 1;
    let n = layout.len();
    let ts_at = |hour: usize| anchor + Duration::hours(hour as i64);

    let mut speed = vec![vec![f64::NAN; t_len]; n];
    let mut power = has_power_column.then(|| vec![vec![f64::NAN; t_len]; n]);
    for cell in &cells {
        let slot = &mut speed[cell.turbine][cell.hour as usize];
        if !slot.is_nan() {
            return Err(DataError::DuplicateRow {
                id: layout.turbine_ids()[cell.turbine].clone(),
                ts: ts_at(cell.hour as usize),
            });
        }
        *slot = cell.speed;
        if let Some(p) = &mut power {
            p[cell.turbine][cell.hour as usize] = cell.power.unwrap();
        }
    }

    // Fill short interior runs; mark long or edge runs unusable farm-wide.
    let mut usable = vec![true; t_len];
    let mut long_gaps: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        let mut t = 0;
        while t < t_len {
            if !speed[i][t].is_nan() {
                t += 1;
                continue;
            }
            let run_start = t;
            while t < t_len && speed[i][t].is_nan() {
                t += 1;
            }
            let run_end = t;
            let interior = run_start > 0 && run_end < t_len;
            if interior && run_end - run_start <= MAX_INTERP_HOURS {
                interpolate_run(&mut speed[i], run_start, run_end);
                if let Some(p) = &mut power {
                    interpolate_run(&mut p[i], run_start, run_end);
                }
            } else {
                if interior {
                    long_gaps.push((run_start, run_end));
                }
                usable[run_start..run_end].fill(false);
            }
        }
    }

    if let Some(&(gs, ge)) = long_gaps.first() {
        if !allow_split {
            return Err(DataError::GapTooLong {
                start: ts_at(gs),
                end: ts_at(ge - 1),
                hours: ge - gs,
            });
        }
    }

    // Cut the usable timeline into maximal contiguous segments.
    let mut segments = Vec::new();
    let mut t = 0;
    while t < t_len {
        if !usable[t] {
            t += 1;
            continue;
        }
        let seg_start = t;
        while t < t_len && usable[t] {
            t += 1;
        }
        let seg_end = t;
        let timestamps = (seg_start..seg_end).map(ts_at).collect();
        let take = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            m.iter().map(|row| row[seg_start..seg_end].to_vec()).collect()
        };
        segments.push(SeriesTable::new(
            layout.turbine_ids().to_vec(),
            timestamps,
            take(&speed),
            power.as_ref().map(take),
        )?);
    }
    if segments.is_empty() {
        return Err(DataError::EmptySeries);
    }
    Ok(segments)
}

fn interpolate_run(row: &mut [f64], start: usize, end: usize) {
    let left = row[start - 1];
    let right = row[end];
    let span = (end - start + 1) as f64;
    for (step, slot) in row[start..end].iter_mut().enumerate() {
        let frac = (step + 1) as f64 / span;
        *slot = left + (right - left) * frac;
    }
}

/// [`ingest_segments`], then keep the longest segment (earliest on ties).
pub fn ingest(
    path: &Path,
    layout: &FarmLayout,
    allow_split: bool,
) -> Result<SeriesTable, DataError> {
    let segments = ingest_segments(path, layout, allow_split)?;
    let mut best: Option<SeriesTable> = None;
    for segment in segments {
        let longer = best.as_ref().map_or(true, |b| segment.t_len() > b.t_len());
        if longer {
            best = Some(segment);
        }
    }
    Ok(best.expect("ingest_segments never returns an empty list"))
}
