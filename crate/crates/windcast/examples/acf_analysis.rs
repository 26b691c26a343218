//! Autocorrelation analysis of hourly wind speed: estimate the ACF for one
//! turbine, compare against the white-noise confidence bands, and show how
//! an AR(1) process with a known coefficient decays geometrically.
//!
//! Run with: cargo run --example acf_analysis

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use windcast::data::{synth_farm, SynthConfig};
use windcast::eval::acf;

fn bar(r: f64) -> String {
    let width = (r.abs() * 40.0).round() as usize;
    "#".repeat(width)
}

fn main() {
    let (_, table) = synth_farm(&SynthConfig {
        n_turbines: 4,
        days: 90,
        seed: 9,
        ..Default::default()
    })
    .unwrap();

    let series = table.speed(0);
    let result = acf(series, 36).unwrap();
    println!(
        "wind speed ACF for {} ({} hourly samples, 95% band +/-{:.4}):",
        table.turbine_ids()[0],
        series.len(),
        result.ci95
    );
    for lag in (0..=36).step_by(3) {
        let r = result.r[lag];
        let mark = if r.abs() > result.ci95 { "*" } else { " " };
        println!("lag {lag:>2}: {r:>7.4} {mark} {}", bar(r));
    }
    println!("(* = outside the 95% white-noise band)");

    // AR(1) with phi = 0.8: the theoretical ACF is 0.8^lag.
    let phi = 0.8_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x = 0.0;
    let ar: Vec<f64> = (0..10_000)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            x = phi * x + e;
            x
        })
        .collect();
    let ar_acf = acf(&ar, 5).unwrap();
    println!("\nAR(1) with phi = {phi}: estimated vs theoretical");
    for lag in 1..=5 {
        println!(
            "lag {lag}: {:>7.4} vs {:>7.4}",
            ar_acf.r[lag],
            phi.powi(lag as i32)
        );
    }
}
