//! Generate a synthetic wind farm and look at what makes it realistic:
//! autocorrelated speeds, diurnal structure, and spatially correlated noise.
//!
//! Run with: cargo run --example synthetic_farm

use windcast::data::{synth_farm, SynthConfig};
use windcast::eval::acf;

fn main() {
    let cfg = SynthConfig {
        n_turbines: 8,
        days: 30,
        seed: 42,
        ..Default::default()
    };
    let (layout, table) = synth_farm(&cfg).unwrap();

    println!(
        "farm: {} turbines, {} hourly rows starting {}",
        table.n_turbines(),
        table.t_len(),
        table.timestamps()[0]
    );

    println!("\nturbine   mean speed   max power");
    for i in 0..table.n_turbines() {
        let speed = table.speed(i);
        let mean = speed.iter().sum::<f64>() / speed.len() as f64;
        let power = table.power(i).unwrap();
        let max = power.iter().cloned().fold(0.0, f64::max);
        println!(
            "{:>7}   {:>10.2}   {:>9.0}",
            table.turbine_ids()[i],
            mean,
            max
        );
    }

    // Wind speed is persistent: the autocorrelation should decay slowly, the
    // reason short-horizon forecasting works at all.
    let result = acf(table.speed(0), 6).unwrap();
    println!("\nspeed autocorrelation, turbine {}:", table.turbine_ids()[0]);
    for (lag, r) in result.r.iter().enumerate() {
        println!("  lag {lag}: {r:+.3}");
    }

    // Nearby turbines see similar wind. Correlate deviations between the
    // first turbine and every other, against distance.
    let (x0, y0) = layout.coords()[0];
    let base = deviations(table.speed(0));
    println!("\ndistance from {} vs speed correlation:", layout.turbine_ids()[0]);
    for i in 1..layout.len() {
        let (x, y) = layout.coords()[i];
        let dist = ((x - x0).powi(2) + (y - y0).powi(2)).sqrt();
        let r = pearson(&base, &deviations(table.speed(i)));
        println!("  {:>6.0} m   r = {r:+.3}", dist);
    }
}

fn deviations(series: &[f64]) -> Vec<f64> {
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    series.iter().map(|v| v - mean).collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    dot / (na * nb)
}
