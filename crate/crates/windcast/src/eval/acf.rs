//! Sample autocorrelation with white-noise confidence bands, the standard
//! diagnostic for how far ahead a series stays predictable.

use std::io::Write;

use super::EvalError;

/// Two-sided 95% critical value of the standard normal.
pub const Z95: f64 = 1.959963984540054;
/// Two-sided 99% critical value of the standard normal.
pub const Z99: f64 = 2.5758293035489004;

/// Autocorrelations `r[lag]` for lags `0..=max_lag` plus the +/- band
/// half-widths under the white-noise null.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfResult {
    pub r: Vec<f64>,
    pub ci95: f64,
    pub ci99: f64,
}

/// Sample autocorrelation function with the full-sample mean and variance in
/// the denominator, so every value lies in [-1, 1]. Bands are
/// `z_{alpha/2} / sqrt(T)`.
pub fn acf(series: &[f64], max_lag: usize) -> Result<AcfResult, EvalError> {
    let t_len = series.len();
    if t_len <= max_lag + 1 {
        return Err(EvalError::TooShortForLag {
            len: t_len,
            needed: max_lag + 1,
        });
    }
    let mean = series.iter().sum::<f64>() / t_len as f64;
    let denom: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
    if denom <= 0.0 {
        return Err(EvalError::ConstantSeries);
    }
    let r = (0..=max_lag)
        .map(|lag| {
            let num: f64 = series[..t_len - lag]
                .iter()
                .zip(&series[lag..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum();
            num / denom
        })
        .collect();
    let root_t = (t_len as f64).sqrt();
    Ok(AcfResult {
        r,
        ci95: Z95 / root_t,
        ci99: Z99 / root_t,
    })
}

/// Plot-ready CSV: `lag,r,ci95,ci99`, one row per lag.
pub fn write_acf_csv<W: Write>(mut w: W, acf: &AcfResult) -> Result<(), EvalError> {
    writeln!(w, "lag,r,ci95,ci99")?;
    for (lag, r) in acf.r.iter().enumerate() {
        writeln!(w, "{lag},{r},{},{}", acf.ci95, acf.ci99)?;
    }
    Ok(())
}
