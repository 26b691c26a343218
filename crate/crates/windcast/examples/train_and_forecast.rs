//! End-to-end at desk scale: synthesize a farm, train the GRU
//! encoder-decoder for a few epochs, and issue a 6-hour forecast from the
//! last observed hour.
//!
//! Run with: cargo run --example train_and_forecast

use windcast::data::{forecast_input, synth_farm, Normalizer, SynthConfig, TargetKind, WindowSet};
use windcast::graph::build_knn;
use windcast::model::{CellKind, HyperParams, ModelParams};
use windcast::tape::Tape;
use windcast::train::{train, TrainConfig};

fn main() {
    let (layout, table) = synth_farm(&SynthConfig {
        n_turbines: 6,
        days: 20,
        seed: 11,
        ..Default::default()
    })
    .unwrap();

    let hyper = HyperParams {
        m: 24,
        k: 4,
        hidden: 16,
        embed_dim: 6,
        mlp_hidden: 12,
        tau_max: 6,
        n_turbines: layout.len(),
        power_history: false,
        embed_encoder: false,
        southern: false,
    };
    let nbr = build_knn(&layout, hyper.k).unwrap();
    let norm = Normalizer::fit(&table, TargetKind::Power).unwrap();
    let windows = WindowSet::new(&table, &nbr, &norm, hyper.window_spec()).unwrap();
    println!(
        "{} training windows, {} model parameters",
        windows.len(),
        ModelParams::init(hyper.clone(), CellKind::Gru, 11).parameter_count()
    );

    let cfg = TrainConfig {
        epochs: 6,
        batch_size: 128,
        learning_rate: 3e-3,
        seed: 11,
        ..Default::default()
    };
    let init = ModelParams::init(hyper.clone(), CellKind::Gru, cfg.seed);
    let outcome = train(&windows, init, &cfg, None).unwrap();
    for record in &outcome.log {
        println!(
            "epoch {:>2}: train mse {:.5}, val mse {:.5}  ({:.1} s)",
            record.epoch, record.train_mse, record.val_mse, record.wall_seconds
        );
    }

    let origin = table.t_len() - 1;
    println!(
        "\nforecast issued at {} (raw power units):",
        table.timestamps()[origin]
    );
    println!("turbine      h+1      h+2      h+3      h+4      h+5      h+6");
    for turbine in 0..layout.len() {
        let sample = forecast_input(
            &table,
            &nbr,
            &norm,
            hyper.window_spec(),
            turbine,
            origin,
        )
        .unwrap();
        let mut tape = Tape::new();
        let bound = outcome.params.bind(&mut tape);
        let outs = bound.forward(&mut tape, &sample).unwrap();
        let row: Vec<String> = outs
            .iter()
            .map(|&v| format!("{:>8.0}", norm.denorm_target(turbine, tape.value(v).item())))
            .collect();
        println!("{:>7}  {}", layout.turbine_ids()[turbine], row.join(" "));
    }
}
