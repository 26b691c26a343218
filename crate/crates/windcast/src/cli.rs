//! Command-line pipeline: synthesize, graph, train, forecast, evaluate,
//! baseline, acf.
//!
//! Every subcommand reads its inputs, writes its artifacts into `--out`, and
//! drops a `manifest.json` beside them recording the resolved settings, the
//! seed, and input digests. No subcommand modifies an input file, and no
//! environment variable is consulted. Exit codes: 0 success, 2 usage error,
//! 1 runtime error.

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDateTime;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checkpoint::Checkpoint;
use crate::config::Settings;
use crate::data::{
    forecast_input, ingest, parse_timestamp, Normalizer, SeriesTable, SynthConfig, TargetKind,
    WindowSet,
};
use crate::eval::{
    acf, evaluate, mlp_baseline, persistence, rnn_baseline, write_acf_csv, write_metrics_csv,
    EvalReport, HorizonMetrics, MetricKind,
};
use crate::graph::{build_knn, FarmLayout, NeighborIndex};
use crate::manifest::RunManifest;
use crate::model::{CellKind, ModelParams};
use crate::tape::Tape;
use crate::util::atomic_write;

type DynError = Box<dyn Error>;

#[derive(Parser)]
#[command(
    name = "windcast",
    version,
    about = "Turbine-level wind power forecasting with spatial context",
    propagate_version = true
)]
struct Cli {
    /// Worker threads (0 = one per core). Results are byte-identical for
    /// every value.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic farm: layout.csv and series.csv.
    Synth(SynthArgs),
    /// Build the k-nearest-neighbour table for a layout: neighbors.csv.
    Graph(GraphArgs),
    /// Train the forecaster: checkpoint.json and train_log.csv.
    Train(TrainArgs),
    /// Forecast every horizon for every turbine at one origin: forecast.csv.
    Forecast(ForecastArgs),
    /// Rolling-origin evaluation of a checkpoint plus the persistence
    /// reference: metrics_{mae,rmse}[_raw].csv.
    Evaluate(EvaluateArgs),
    /// Train and evaluate one baseline (per, mlp, rnn) on a split series.
    Baseline(BaselineArgs),
    /// Autocorrelation of one turbine's wind speed: acf.csv.
    Acf(AcfArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of turbines.
    #[arg(long, default_value_t = 20)]
    turbines: usize,
    /// Days of hourly data.
    #[arg(long, default_value_t = 120)]
    days: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// First timestamp, ISO-8601.
    #[arg(long, default_value = "2020-01-01T00:00:00")]
    start: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    /// Farm layout CSV (turbine_id,x,y).
    #[arg(long)]
    layout: PathBuf,
    /// Neighbours per turbine, including the turbine itself.
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Treat layout coordinates as latitude/longitude degrees.
    #[arg(long)]
    latlon: bool,
    #[arg(long)]
    out: PathBuf,
}

/// Model and training knobs shared by `train` and `baseline`. Values come
/// from defaults, then the config file, then these flags; flags win.
#[derive(Args)]
struct SettingsArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Forecast target.
    #[arg(long, value_enum)]
    target: Option<TargetArg>,
    /// History window length in hours.
    #[arg(long)]
    m: Option<usize>,
    /// Neighbours per turbine, including self.
    #[arg(long)]
    k: Option<usize>,
    /// Recurrent state width.
    #[arg(long)]
    hidden: Option<usize>,
    /// Turbine embedding dimension.
    #[arg(long)]
    embed_dim: Option<usize>,
    /// Forecast head hidden width.
    #[arg(long)]
    mlp_hidden: Option<usize>,
    /// Number of forecast horizons.
    #[arg(long)]
    tau_max: Option<usize>,
    /// Feed neighbour power history as extra input channels.
    #[arg(long)]
    power_history: Option<bool>,
    /// Append the turbine embedding to encoder inputs.
    #[arg(long)]
    embed_encoder: Option<bool>,
    /// Southern-hemisphere season mapping.
    #[arg(long)]
    southern: Option<bool>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Early-stop patience in epochs.
    #[arg(long)]
    patience: Option<usize>,
    /// Chronological validation fraction.
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Global gradient-norm clip bound.
    #[arg(long)]
    clip_norm: Option<f64>,
    /// Keep turbine embeddings fixed at their initial values.
    #[arg(long)]
    freeze_embedding: Option<bool>,
    /// MLP baseline hidden width (default: sized to the main model).
    #[arg(long)]
    mlp_baseline_hidden: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Power,
    Speed,
}

#[derive(Args)]
struct TrainArgs {
    /// Hourly series CSV (timestamp,turbine_id,speed[,power]).
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    latlon: bool,
    /// On gaps longer than 3 hours, use the longest contiguous segment
    /// instead of failing.
    #[arg(long)]
    allow_split: bool,
    /// Train only on rows strictly before this timestamp.
    #[arg(long)]
    train_end: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    settings: SettingsArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ForecastArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    latlon: bool,
    #[arg(long)]
    allow_split: bool,
    /// Forecast origin timestamp (default: the last row of the series).
    /// Only data at or before the origin is read.
    #[arg(long)]
    origin: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    latlon: bool,
    #[arg(long)]
    allow_split: bool,
    /// Evaluate rows at or after this timestamp.
    #[arg(long)]
    start: Option<String>,
    /// Evaluate rows strictly before this timestamp.
    #[arg(long)]
    end: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMethod {
    /// Persistence: repeat the last observation.
    Per,
    /// Capacity-matched feed-forward network.
    Mlp,
    /// Vanilla-RNN variant of the main model.
    Rnn,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    method: BaselineMethod,
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    latlon: bool,
    #[arg(long)]
    allow_split: bool,
    /// Train on rows before this timestamp, evaluate on the rest.
    #[arg(long)]
    split: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    settings: SettingsArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AcfArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    latlon: bool,
    #[arg(long)]
    allow_split: bool,
    /// Turbine id (default: the first in the layout).
    #[arg(long)]
    turbine: Option<String>,
    #[arg(long, default_value_t = 48)]
    max_lag: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Parse arguments from the process environment and run. Returns the process
/// exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Also handles --help/--version, which exit 0.
        Err(e) => e.exit(),
    };
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<(), DynError> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Graph(args) => cmd_graph(args),
        Command::Train(args) => cmd_train(args),
        Command::Forecast(args) => cmd_forecast(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Acf(args) => cmd_acf(args),
    }
}

fn ensure_out_dir(dir: &Path) -> Result<(), DynError> {
    fs::create_dir_all(dir)
        .map_err(|e| format!("cannot create output directory {}: {e}", dir.display()).into())
}

fn parse_ts_flag(value: &str, flag: &str) -> Result<NaiveDateTime, DynError> {
    parse_timestamp(value).map_err(|_| {
        format!("--{flag}: cannot parse timestamp {value:?} (expected ISO-8601, e.g. 2020-01-01T06:00:00)").into()
    })
}

fn resolve_settings(args: &SettingsArgs) -> Result<Settings, DynError> {
    let mut s = Settings::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        s.apply_file(&text)?;
    }
    if let Some(t) = args.target {
        s.target = match t {
            TargetArg::Power => TargetKind::Power,
            TargetArg::Speed => TargetKind::Speed,
        };
    }
    macro_rules! take {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field { s.$field = v; })*
        };
    }
    take!(
        m, k, hidden, embed_dim, mlp_hidden, tau_max, power_history, embed_encoder, southern,
        learning_rate, batch_size, epochs, patience, val_fraction, clip_norm, freeze_embedding
    );
    if let Some(w) = args.mlp_baseline_hidden {
        s.mlp_baseline_hidden = Some(w);
    }
    s.validate()?;
    Ok(s)
}

fn finish_manifest(
    mut manifest: RunManifest,
    inputs: &[&Path],
    started: Instant,
    out: &Path,
) -> Result<(), DynError> {
    for path in inputs {
        manifest.record_input(path)?;
    }
    manifest.wall_ms = started.elapsed().as_millis();
    manifest.write(out)?;
    Ok(())
}

fn write_metric_tables(
    out: &Path,
    rows: &[(String, &HorizonMetrics)],
) -> Result<(), DynError> {
    let files = [
        ("metrics_mae.csv", MetricKind::Mae, true),
        ("metrics_rmse.csv", MetricKind::Rmse, true),
        ("metrics_mae_raw.csv", MetricKind::Mae, false),
        ("metrics_rmse_raw.csv", MetricKind::Rmse, false),
    ];
    for (name, kind, normalized) in files {
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, rows, kind, normalized)?;
        atomic_write(&out.join(name), &buf)?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), DynError> {
    let started = Instant::now();
    ensure_out_dir(&args.out)?;
    let start = parse_ts_flag(&args.start, "start")?;
    let cfg = SynthConfig {
        n_turbines: args.turbines,
        days: args.days,
        seed: args.seed,
        start,
        ..Default::default()
    };
    let (layout, table) = crate::data::synth_farm(&cfg)?;
    layout.to_csv(&args.out.join("layout.csv"))?;
    table.to_csv(&args.out.join("series.csv"))?;

    let mut manifest = RunManifest::new("synth", args.seed);
    manifest.setting("turbines", args.turbines);
    manifest.setting("days", args.days);
    manifest.setting("start", start);
    finish_manifest(manifest, &[], started, &args.out)?;
    println!(
        "synthesized {} turbines x {} hours into {}",
        args.turbines,
        table.t_len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_graph(args: GraphArgs) -> Result<(), DynError> {
    let started = Instant::now();
    ensure_out_dir(&args.out)?;
    let layout = FarmLayout::from_csv(&args.layout, args.latlon)?;
    let nbr = build_knn(&layout, args.k)?;
    nbr.to_csv(&layout, &args.out.join("neighbors.csv"))?;

    let mut manifest = RunManifest::new("graph", 0);
    manifest.setting("k", args.k);
    manifest.setting("latlon", args.latlon);
    manifest.setting("graph_digest", nbr.digest(&layout));
    finish_manifest(manifest, &[&args.layout], started, &args.out)?;
    println!(
        "built {}-nearest-neighbour table for {} turbines into {}",
        args.k,
        layout.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), DynError> {
    let started = Instant::now();
    ensure_out_dir(&args.out)?;
    let settings = resolve_settings(&args.settings)?;
    let layout = FarmLayout::from_csv(&args.layout, args.latlon)?;
    let mut table = ingest(&args.series, &layout, args.allow_split)?;
    if let Some(end) = &args.train_end {
        let end = parse_ts_flag(end, "train-end")?;
        table = table.slice_time(None, Some(end))?;
    }
    let nbr = build_knn(&layout, settings.k)?;
    let norm = Normalizer::fit(&table, settings.target)?;
    let hyper = settings.hyper_for(layout.len());
    let windows = WindowSet::new(&table, &nbr, &norm, hyper.window_spec())?;
    let init = ModelParams::init(hyper, CellKind::Gru, args.seed);
    let cfg = settings.train_config(args.seed);

    let mut log = fs::File::create(args.out.join("train_log.csv"))?;
    let outcome = crate::train::train(&windows, init, &cfg, Some(&mut log))?;
    drop(log);

    if let crate::train::StopReason::Diverged { at_epoch, detail } = &outcome.stop {
        eprintln!(
            "warning: training diverged at epoch {at_epoch} ({detail}); \
             keeping the best earlier parameters"
        );
    }
    let checkpoint = Checkpoint::new(outcome.params, norm, nbr.digest(&layout));
    checkpoint.save(&args.out.join("checkpoint.json"))?;

    let mut manifest = RunManifest::new("train", args.seed);
    for (key, value) in settings.snapshot() {
        manifest.setting(&key, value);
    }
    manifest.setting("allow_split", args.allow_split);
    if let Some(end) = &args.train_end {
        manifest.setting("train_end", end);
    }
    let mut inputs: Vec<&Path> = vec![&args.series, &args.layout];
    if let Some(cfg_path) = &args.settings.config {
        inputs.push(cfg_path);
    }
    finish_manifest(manifest, &inputs, started, &args.out)?;

    match (outcome.best_epoch, outcome.best_val_mse) {
        (Some(epoch), Some(val)) => println!(
            "trained {} epochs; best validation mse {val:.6} at epoch {epoch}; \
             checkpoint in {}",
            outcome.log.len(),
            args.out.display()
        ),
        _ => println!(
            "initialized model saved without training (epochs = {}); checkpoint in {}",
            outcome.log.len(),
            args.out.display()
        ),
    }
    Ok(())
}

/// Load a checkpoint and rebuild the neighbour graph it expects, refusing
/// layouts whose digest differs from the one recorded at training time.
fn load_checkpoint_for_farm(
    checkpoint: &Path,
    layout_path: &Path,
    latlon: bool,
) -> Result<(Checkpoint, FarmLayout, NeighborIndex), DynError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let layout = FarmLayout::from_csv(layout_path, latlon)?;
    let nbr = build_knn(&layout, ckpt.params.hyper.k)?;
    ckpt.verify_graph(&nbr.digest(&layout))?;
    Ok((ckpt, layout, nbr))
}

fn cmd_forecast(args: ForecastArgs) -> Result<(), DynError> {
    let started = Instant::now();
    ensure_out_dir(&args.out)?;
    let (ckpt, layout, nbr) = load_checkpoint_for_farm(&args.checkpoint, &args.layout, args.latlon)?;
    let table = ingest(&args.series, &layout, args.allow_split)?;
    let origin_ts = match &args.origin {
        Some(text) => parse_ts_flag(text, "origin")?,
        None => *table.timestamps().last().expect("table is never empty"),
    };
    let origin = table
        .timestamps()
        .iter()
        .position(|&t| t == origin_ts)
        .ok_or_else(|| format!("origin timestamp {origin_ts} is not in the series"))?;

    let spec = ckpt.params.hyper.window_spec();
    let tau_max = spec.tau_max;
    let mut buf = Vec::new();
    {
        use std::io::Write;
        write!(buf, "turbine_id")?;
        for h in 1..=tau_max {
            write!(buf, ",h{h}")?;
        }
        writeln!(buf)?;
        for turbine in 0..layout.len() {
            let sample = forecast_input(&table, &nbr, &ckpt.normalizer, spec, turbine, origin)?;
            let mut tape = Tape::new();
            let bound = ckpt.params.bind(&mut tape);
            let outs = bound.forward(&mut tape, &sample)?;
            write!(buf, "{}", layout.turbine_ids()[turbine])?;
            for &var in &outs {
                let raw = ckpt
                    .normalizer
                    .denorm_target(turbine, tape.value(var).item());
                write!(buf, ",{raw}")?;
            }
            writeln!(buf)?;
        }
    }
    atomic_write(&args.out.join("forecast.csv"), &buf)?;

    let mut manifest = RunManifest::new("forecast", 0);
    manifest.setting("origin", origin_ts);
    manifest.setting("graph_digest", ckpt.graph_digest.clone());
    finish_manifest(
        manifest,
        &[&args.checkpoint, &args.series, &args.layout],
        started,
        &args.out,
    )?;
    println!(
        "forecast {} horizons for {} turbines at {origin_ts} into {}",
        tau_max,
        layout.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), DynError> {
    let started = Instant::now();
    ensure_out_dir(&args.out)?;
    let (ckpt, layout, nbr) = load_checkpoint_for_farm(&args.checkpoint, &args.layout, args.latlon)?;
    let mut table = ingest(&args.series, &layout, args.allow_split)?;
    let start = args
        .start
        .as_deref()
        .map(|s| parse_ts_flag(s, "start"))
        .transpose()?;
    let end = args
        .end
        .as_deref()
        .map(|s| parse_ts_flag(s, "end"))
        .transpose()?;
    if start.is_some() || end.is_some() {
        table = table.slice_time(start, end)?;
    }

    let ours = evaluate(&ckpt.params, &table, &nbr, &ckpt.normalizer)?;
    let per = persistence(
        &table,
        &ckpt.normalizer,
        ckpt.params.hyper.m,
        ckpt.params.hyper.tau_max,
    )?;
    write_metric_tables(
        &args.out,
        &[
            ("ours".to_string(), &ours.metrics),
            ("per".to_string(), &per.metrics),
        ],
    )?;

    let mut manifest = RunManifest::new("evaluate", 0);
    manifest.setting("graph_digest", ckpt.graph_digest.clone());
    if let Some(s) = start {
        manifest.setting("start", s);
    }
    if let Some(e) = end {
        manifest.setting("end", e);
    }
    finish_manifest(
        manifest,
        &[&args.checkpoint, &args.series, &args.layout],
        started,
        &args.out,
    )?;

    let tau = ours.metrics.tau_max();
    println!(
        "evaluated {} origins per horizon; normalized MAE h1 {:.4} -> h{tau} {:.4} \
         (persistence {:.4} -> {:.4}); tables in {}",
        ours.metrics.counts[0],
        ours.metrics.mae[0],
        ours.metrics.mae[tau - 1],
        per.metrics.mae[0],
        per.metrics.mae[tau - 1],
        args.out.display()
    );
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<(), DynError> {
    let started = Instant::now();
    ensure_out_dir(&args.out)?;
    let settings = resolve_settings(&args.settings)?;
    let layout = FarmLayout::from_csv(&args.layout, args.latlon)?;
    let table = ingest(&args.series, &layout, args.allow_split)?;
    let split = parse_ts_flag(&args.split, "split")?;
    let train_table = table.slice_time(None, Some(split))?;
    let test_table = table.slice_time(Some(split), None)?;
    let nbr = build_knn(&layout, settings.k)?;
    let norm = Normalizer::fit(&train_table, settings.target)?;
    let cfg = settings.train_config(args.seed);

    let (name, report): (&str, EvalReport) = match args.method {
        BaselineMethod::Per => (
            "per",
            persistence(&test_table, &norm, settings.m, settings.tau_max)?,
        ),
        BaselineMethod::Mlp => {
            let budget = ModelParams::init(
                settings.hyper_for(layout.len()),
                CellKind::Gru,
                args.seed,
            )
            .parameter_count();
            let (_, report) = mlp_baseline(
                &train_table,
                &test_table,
                &nbr,
                &norm,
                settings.m,
                settings.tau_max,
                settings.mlp_baseline_hidden,
                budget,
                &cfg,
            )?;
            ("mlp", report)
        }
        BaselineMethod::Rnn => {
            let (_, report) = rnn_baseline(
                &train_table,
                &test_table,
                &nbr,
                &norm,
                settings.hyper_for(layout.len()),
                &cfg,
            )?;
            ("rnn", report)
        }
    };
    write_metric_tables(&args.out, &[(name.to_string(), &report.metrics)])?;

    let mut manifest = RunManifest::new("baseline", args.seed);
    for (key, value) in settings.snapshot() {
        manifest.setting(&key, value);
    }
    manifest.setting("method", name);
    manifest.setting("split", split);
    let mut inputs: Vec<&Path> = vec![&args.series, &args.layout];
    if let Some(cfg_path) = &args.settings.config {
        inputs.push(cfg_path);
    }
    finish_manifest(manifest, &inputs, started, &args.out)?;

    let tau = report.metrics.tau_max();
    println!(
        "{name} baseline: normalized MAE h1 {:.4} -> h{tau} {:.4}; tables in {}",
        report.metrics.mae[0],
        report.metrics.mae[tau - 1],
        args.out.display()
    );
    Ok(())
}

fn cmd_acf(args: AcfArgs) -> Result<(), DynError> {
    let started = Instant::now();
    ensure_out_dir(&args.out)?;
    let layout = FarmLayout::from_csv(&args.layout, args.latlon)?;
    let table: SeriesTable = ingest(&args.series, &layout, args.allow_split)?;
    let turbine = match &args.turbine {
        Some(id) => layout
            .index_of(id)
            .ok_or_else(|| format!("turbine {id:?} is not in the layout"))?,
        None => 0,
    };
    let result = acf(table.speed(turbine), args.max_lag)?;
    let mut buf = Vec::new();
    write_acf_csv(&mut buf, &result)?;
    atomic_write(&args.out.join("acf.csv"), &buf)?;

    let mut manifest = RunManifest::new("acf", 0);
    manifest.setting("turbine", &layout.turbine_ids()[turbine]);
    manifest.setting("max_lag", args.max_lag);
    finish_manifest(manifest, &[&args.series, &args.layout], started, &args.out)?;
    println!(
        "acf over {} lags for turbine {} into {}",
        args.max_lag,
        layout.turbine_ids()[turbine],
        args.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn settings_flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("exp.cfg");
        fs::write(&cfg_path, "m = 24\nhidden = 16\n").unwrap();
        let args = SettingsArgs {
            config: Some(cfg_path),
            target: None,
            m: Some(12),
            k: None,
            hidden: None,
            embed_dim: None,
            mlp_hidden: None,
            tau_max: None,
            power_history: None,
            embed_encoder: None,
            southern: None,
            learning_rate: None,
            batch_size: None,
            epochs: None,
            patience: None,
            val_fraction: None,
            clip_norm: None,
            freeze_embedding: None,
            mlp_baseline_hidden: None,
        };
        let s = resolve_settings(&args).unwrap();
        assert_eq!(s.m, 12, "flag beats file");
        assert_eq!(s.hidden, 16, "file beats default");
        assert_eq!(s.k, 6, "default otherwise");
    }
}
