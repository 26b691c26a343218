//! Calendar features appended to every model input step.

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};

/// Length of the per-timestamp feature vector.
pub const TIME_FEATURE_DIM: usize = 8;

/// Encode a timestamp as an 8-dim vector: sin/cos of hour-of-day, sin/cos of
/// day-of-year, and a one-hot over the four seasons.
///
/// Hour and day-of-year use periodic sin/cos pairs so hour 23 sits next to
/// hour 0. Seasons are meteorological quarters; positions are
/// [winter, spring, summer, autumn], with `southern` shifting the mapping by
/// half a year (December is summer south of the equator).
pub fn time_features(ts: NaiveDateTime, southern: bool) -> [f64; TIME_FEATURE_DIM] {
    use std::f64::consts::TAU;

    let hour = ts.hour() as f64 + ts.minute() as f64 / 60.0;
    let hour_angle = TAU * hour / 24.0;

    let days_in_year = NaiveDate::from_ymd_opt(ts.year(), 12, 31)
        .expect("dec 31 exists in every year")
        .ordinal() as f64;
    let doy_angle = TAU * (ts.ordinal() - 1) as f64 / days_in_year;

    // Quarter by month: DJF=0, MAM=1, JJA=2, SON=3.
    let quarter = match ts.month() {
        12 | 1 | 2 => 0,
        3 | 4 | 5 => 1,
        6 | 7 | 8 => 2,
        _ => 3,
    };
    let season = if southern { (quarter + 2) % 4 } else { quarter };

    let mut out = [0.0; TIME_FEATURE_DIM];
    out[0] = hour_angle.sin();
    out[1] = hour_angle.cos();
    out[2] = doy_angle.sin();
    out[3] = doy_angle.cos();
    out[4 + season] = 1.0;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> NaiveDateTime {
        s.parse().unwrap()
    }

    #[test]
    fn midnight_january_first() {
        let f = time_features(ts("2020-01-01T00:00:00"), false);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 1.0);
        assert_eq!(f[2], 0.0);
        assert_eq!(f[3], 1.0);
        assert_eq!(&f[4..8], &[1.0, 0.0, 0.0, 0.0], "winter one-hot");
    }

    #[test]
    fn six_am_is_quarter_turn() {
        let f = time_features(ts("2020-05-10T06:00:00"), false);
        assert!((f[0] - 1.0).abs() < 1e-12);
        assert!(f[1].abs() < 1e-12);
    }

    #[test]
    fn solstices_are_half_a_period_apart() {
        let june = time_features(ts("2019-06-21T12:00:00"), false);
        let dec = time_features(ts("2019-12-21T12:00:00"), false);
        // Day-of-year phases differ by almost exactly half a year, so the
        // sin/cos pair is approximately negated.
        assert!((june[2] + dec[2]).abs() < 0.05, "{} vs {}", june[2], dec[2]);
        assert!((june[3] + dec[3]).abs() < 0.05, "{} vs {}", june[3], dec[3]);
    }

    #[test]
    fn unit_circle_and_one_hot_invariants() {
        for s in [
            "2019-02-28T23:00:00",
            "2020-02-29T13:00:00",
            "2020-07-04T05:00:00",
            "2021-11-30T17:00:00",
        ] {
            for southern in [false, true] {
                let f = time_features(ts(s), southern);
                assert!((f[0] * f[0] + f[1] * f[1] - 1.0).abs() < 1e-12);
                assert!((f[2] * f[2] + f[3] * f[3] - 1.0).abs() < 1e-12);
                assert_eq!(f[4..8].iter().sum::<f64>(), 1.0);
                assert!(f[4..8].iter().all(|&v| v == 0.0 || v == 1.0));
            }
        }
    }

    #[test]
    fn hemisphere_flag_swaps_summer_and_winter()  {
        let july = ts("2020-07-15T12:00:00");
        let north = time_features(july, false);
        let south = time_features(july, true);
        assert_eq!(&north[4..8], &[0.0, 0.0, 1.0, 0.0], "JJA is northern summer");
        assert_eq!(&south[4..8], &[1.0, 0.0, 0.0, 0.0], "JJA is southern winter");
    }
}
