use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use flowcast::dataset::{ColumnRef, LoadOptions};
use flowcast::evalkit::{parse_methods, PlotKind, PlotSource};
use flowcast::synth::ChannelSpec;
use flowcast::tuner::{
    grid_search, lstm_trainer, manual_run_prepared, prepare, tune_periods, Fitted, PreparedSeries,
    Selection, TunedResult,
};
use flowcast::{
    compare, cycle, describe_layout, emit_plot_data, gen_periodic, load_csv, rmse, GridAxis,
    ModelBundle, RawSeries, SynthSpec, WindowMode, WindowSpec,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "flowcast", version, about = "Period-tuned LSTM forecasting for multivariate series")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic periodic series with known structure.
    Synth(SynthArgs),
    /// Report the candidate periods of the target column.
    AnalyzePeriod {
        #[command(flatten)]
        common: Common,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select covariates and write the windowed supervised table.
    Transform {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        window: Window,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one LSTM at a fixed window size.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        window: Window,
        #[command(flatten)]
        training: Training,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long)]
        out_report: Option<PathBuf>,
    },
    /// Train one LSTM per detected period and keep the best.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mode: Option<WindowMode>,
        #[command(flatten)]
        training: Training,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long)]
        out_trace: PathBuf,
    },
    /// Apply a saved model to a series.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// CSV of (row, actual, predicted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate several methods and report their test RMSE.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mode: Option<WindowMode>,
        #[command(flatten)]
        training: Training,
        /// Comma-separated: persistence, random-forest, lstm-plain, lstm-tuned.
        #[arg(long, default_value = "persistence,random-forest,lstm-plain,lstm-tuned")]
        methods: String,
        #[arg(long)]
        out_report: PathBuf,
    },
    /// Write the CSV data behind the standard plots.
    EmitPlots {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mode: Option<WindowMode>,
        #[command(flatten)]
        training: Training,
        /// Window size for the grid sweeps; the tuned window when absent.
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated plot kinds; all when absent.
        #[arg(long)]
        kinds: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    input: PathBuf,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Target column name or 0-based index.
    #[arg(long)]
    target: Option<String>,
    /// Override any configuration key, e.g. `--set lstm.epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct Window {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    mode: Option<WindowMode>,
}

#[derive(Debug, Args)]
struct Training {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seq_len: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth JSON; defaults to the output path with a `.truth.json` suffix.
    #[arg(long)]
    out_truth: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    rows: usize,
    #[arg(long, default_value_t = 20.0)]
    period: f64,
    #[arg(long, default_value_t = 5)]
    distractors: usize,
    /// Noise σ of every column.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Target lag in samples; a quarter period when absent.
    #[arg(long)]
    lag: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Common {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut config = RunConfig::load(self.config.as_deref(), &self.set)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(target) = &self.target {
            config.target_column = Some(target.parse().expect("infallible"));
        }
        Ok(config)
    }

    fn load(&self, config: &RunConfig) -> Result<RawSeries, CliError> {
        Ok(load_csv(&self.input, &config.load_options())?)
    }
}

impl Window {
    fn apply(&self, config: &mut RunConfig) {
        if let Some(n) = self.n {
            config.window.n = Some(n);
        }
        if let Some(mode) = self.mode {
            config.window.mode = mode;
        }
    }
}

impl Training {
    fn apply(&self, config: &mut RunConfig) {
        let l = &mut config.lstm;
        if let Some(v) = self.epochs {
            l.epochs = v;
        }
        if let Some(v) = self.hidden {
            l.hidden_dim = v;
        }
        if let Some(v) = self.seq_len {
            l.seq_len = v;
        }
        if let Some(v) = self.learning_rate {
            l.learning_rate = v;
        }
    }
}

fn apply_mode(mode: Option<WindowMode>, config: &mut RunConfig) {
    if let Some(mode) = mode {
        config.window.mode = mode;
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string()))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn print(value: Value) {
    println!("{value}");
}

fn selection_json(selection: &Selection, series: &RawSeries) -> Value {
    let names = series.column_names();
    json!({
        "selected": selection.column_names[..selection.column_names.len() - 1],
        "cumulative_weight": selection.features.cumulative_weight,
        "importances": selection.ranking.entries.iter()
            .map(|e| json!({ "column": names[e.column], "weight": e.weight }))
            .collect::<Vec<_>>(),
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(args) => synth(&args),
        Command::AnalyzePeriod { common, out } => analyze_period(&common, out.as_deref()),
        Command::Transform {
            common,
            window,
            out,
        } => {
            let mut config = common.config()?;
            window.apply(&mut config);
            transform(&common, &config, &out)
        }
        Command::Train {
            common,
            window,
            training,
            out_model,
            out_report,
        } => {
            let mut config = common.config()?;
            window.apply(&mut config);
            training.apply(&mut config);
            train(&common, &config, &out_model, out_report.as_deref())
        }
        Command::Tune {
            common,
            mode,
            training,
            out_model,
            out_trace,
        } => {
            let mut config = common.config()?;
            apply_mode(mode, &mut config);
            training.apply(&mut config);
            tune(&common, &config, &out_model, &out_trace)
        }
        Command::Predict {
            model,
            input,
            config,
            set,
            out,
        } => {
            let config = RunConfig::load(config.as_deref(), &set)?;
            predict(&model, &input, &config, out.as_deref())
        }
        Command::Compare {
            common,
            mode,
            training,
            methods,
            out_report,
        } => {
            let mut config = common.config()?;
            apply_mode(mode, &mut config);
            training.apply(&mut config);
            let series = common.load(&config)?;
            let methods = parse_methods(&methods)?;
            let report = compare(&series, &methods, &config.pipeline(), config.seed)?;
            write_json(&out_report, &report)?;
            print(json!({
                "methods": report.methods.iter()
                    .map(|m| json!({ "name": m.name, "rmse": m.rmse }))
                    .collect::<Vec<_>>(),
                "improvement_pct": report.improvement_pct,
            }));
            Ok(())
        }
        Command::EmitPlots {
            common,
            mode,
            training,
            n,
            kinds,
            out_dir,
        } => {
            let mut config = common.config()?;
            apply_mode(mode, &mut config);
            training.apply(&mut config);
            let kinds = match kinds {
                Some(list) => list
                    .split(',')
                    .map(|k| k.trim().parse())
                    .collect::<flowcast::Result<Vec<PlotKind>>>()?,
                None => PlotKind::ALL.to_vec(),
            };
            emit_plots(&common, &config, n, &kinds, &out_dir)
        }
    }
}

fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = SynthSpec {
        rows: args.rows,
        informative: vec![ChannelSpec::sine(args.period, args.noise)],
        distractors: args.distractors,
        distractor_noise: args.noise,
        target_weights: vec![1.0],
        lag: args.lag.unwrap_or((args.period / 4.0) as usize),
        target_noise: args.noise,
        seed: args.seed,
    };
    let (series, truth) = gen_periodic(&spec)?;
    series.write_csv(&args.out)?;
    let truth_path = args.out_truth.clone().unwrap_or_else(|| {
        let mut name = args.out.file_stem().unwrap_or_default().to_os_string();
        name.push(".truth.json");
        args.out.with_file_name(name)
    });
    write_json(&truth_path, &json!({ "spec": spec, "truth": truth }))?;
    print(json!({
        "rows": series.rows(),
        "columns": series.cols(),
        "half_period": truth.half_period,
        "truth": truth_path,
    }));
    Ok(())
}

fn analyze_period(common: &Common, out: Option<&Path>) -> Result<(), CliError> {
    let config = common.config()?;
    let series = common.load(&config)?;
    let set = cycle(&series.target())?;
    let histogram: serde_json::Map<String, Value> = set
        .histogram()
        .into_iter()
        .map(|(len, count)| (len.to_string(), json!(count)))
        .collect();
    let report = json!({
        "target": series.target_name(),
        "periods": set.periods,
        "runs": set.run_lengths.len(),
        "run_length_histogram": histogram,
    });
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    print(report);
    Ok(())
}

fn prepared(series: &RawSeries, config: &RunConfig) -> Result<PreparedSeries, CliError> {
    let pipeline = config.pipeline();
    Ok(prepare(
        series,
        &pipeline.forest,
        pipeline.importance_threshold,
        config.seed,
    )?)
}

fn transform(common: &Common, config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let spec = config.window_spec()?;
    let series = common.load(config)?;
    let prepared = prepared(&series, config)?;
    let set = prepared.window(spec)?;
    let mut header = describe_layout(&set);
    header.push(format!("{}@t", series.target_name()));
    let mut text = header.join(",");
    text.push('\n');
    for (row, y) in set.x.row_iter().zip(&set.y) {
        for v in row {
            text.push_str(&v.to_string());
            text.push(',');
        }
        text.push_str(&y.to_string());
        text.push('\n');
    }
    std::fs::write(out, text)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", out.display())))?;
    print(json!({
        "rows": set.len(),
        "features": set.n_features(),
        "n": spec.n,
        "mode": spec.mode,
        "selection": selection_json(&prepared.selection, &series),
    }));
    Ok(())
}

fn train(
    common: &Common,
    config: &RunConfig,
    out_model: &Path,
    out_report: Option<&Path>,
) -> Result<(), CliError> {
    let spec = config.window_spec()?;
    let series = common.load(config)?;
    let prepared = prepared(&series, config)?;
    let fitted = manual_run_prepared(&prepared, spec.n, &config.pipeline(), config.seed)?;
    ModelBundle::new(fitted.trained.clone(), &prepared.selection, spec).save(out_model)?;
    let trained = &fitted.trained;
    let report = json!({
        "n": spec.n,
        "mode": spec.mode,
        "seed": config.seed,
        "test_rmse": trained.test_rmse,
        "train_rows": fitted.holdout.train.len(),
        "test_rows": fitted.holdout.test.len(),
        "train_loss_curve": trained.train_loss_curve,
        "test_loss_curve": trained.test_loss_curve,
        "selection": selection_json(&prepared.selection, &series),
    });
    if let Some(path) = out_report {
        write_json(path, &report)?;
    }
    print(json!({ "n": spec.n, "test_rmse": trained.test_rmse }));
    Ok(())
}

fn tune_series(series: &RawSeries, config: &RunConfig) -> Result<TunedResult<Fitted>, CliError> {
    let prepared = prepared(series, config)?;
    let periods = cycle(&prepared.target)?;
    let trainer = lstm_trainer(&config.pipeline(), config.seed);
    Ok(tune_periods(&prepared, periods, config.window.mode, &trainer)?)
}

fn trace_json(tuned: &TunedResult<Fitted>, series: &RawSeries, seed: u64) -> Value {
    json!({
        "seed": seed,
        "mode": tuned.mode,
        "target": series.target_name(),
        "selection": selection_json(&tuned.selection, series),
        "periods": tuned.periods.periods,
        "candidates": tuned.trace,
        "best_n": tuned.best_n,
        "best_rmse": tuned.best_rmse,
    })
}

fn tune(common: &Common, config: &RunConfig, out_model: &Path, out_trace: &Path) -> Result<(), CliError> {
    let series = common.load(config)?;
    let tuned = tune_series(&series, config)?;
    let window = WindowSpec {
        n: tuned.best_n,
        mode: tuned.mode,
    };
    ModelBundle::new(tuned.best.trained.clone(), &tuned.selection, window).save(out_model)?;
    write_json(out_trace, &trace_json(&tuned, &series, config.seed))?;
    // timings go to stdout only, so the written files stay reproducible
    print(json!({
        "best_n": tuned.best_n,
        "best_rmse": tuned.best_rmse,
        "wall_ms": tuned.trace.iter()
            .map(|e| json!({ "n": e.n, "ms": e.wall_ms }))
            .collect::<Vec<_>>(),
    }));
    Ok(())
}

fn predict(model: &Path, input: &Path, config: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let bundle = ModelBundle::load(model)?;
    let options = LoadOptions {
        target: ColumnRef::Name(bundle.target.clone()),
        timestamp_columns: config.timestamp_columns.clone(),
    };
    let series = load_csv(input, &options)?;
    let (set, predictions) = bundle.predict(&series)?;
    if let Some(path) = out {
        let mut text = String::from("row,actual,predicted\n");
        for ((row, actual), p) in set.target_rows.iter().zip(&set.y).zip(&predictions) {
            text.push_str(&format!("{row},{actual},{p}\n"));
        }
        std::fs::write(path, text)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    }
    print(json!({
        "rows": predictions.len(),
        "window": bundle.window,
        "rmse": rmse(&predictions, &set.y)?,
    }));
    Ok(())
}

fn emit_plots(
    common: &Common,
    config: &RunConfig,
    n: Option<usize>,
    kinds: &[PlotKind],
    out_dir: &Path,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", out_dir.display())))?;
    let series = common.load(config)?;
    let pipeline = config.pipeline();

    let needs_tuning = n.is_none()
        || kinds.iter().any(|k| {
            matches!(k, PlotKind::RmseVsN | PlotKind::LossCurves | PlotKind::PredVsActual)
        });
    let tuned = if needs_tuning {
        Some(tune_series(&series, config)?)
    } else {
        None
    };
    let grid_n = n.or(tuned.as_ref().map(|t| t.best_n)).expect("tuned when n is absent");

    let mut written = serde_json::Map::new();
    for &kind in kinds {
        let path = out_dir.join(format!("{kind}.csv"));
        let rows = match kind {
            PlotKind::RmseVsN | PlotKind::LossCurves | PlotKind::PredVsActual => {
                let tuned = tuned.as_ref().expect("tuned for these kinds");
                emit_plot_data(&PlotSource::Tuned(tuned), kind, &path)?
            }
            PlotKind::RmseVsHidden | PlotKind::RmseVsIterations => {
                let (axis, values) = if kind == PlotKind::RmseVsHidden {
                    (GridAxis::Hidden, &config.grid.hidden)
                } else {
                    (GridAxis::Epochs, &config.grid.epochs)
                };
                let prepared = prepared(&series, config)?;
                let rows = grid_search(&prepared, grid_n, &pipeline, config.seed, axis, values)?;
                emit_plot_data(&PlotSource::Grid(&rows), kind, &path)?
            }
            PlotKind::MethodComparison => {
                let report = compare(&series, &flowcast::Method::ALL, &pipeline, config.seed)?;
                emit_plot_data(&PlotSource::Comparison(&report), kind, &path)?
            }
        };
        written.insert(kind.to_string(), json!(rows));
    }
    print(Value::Object(written));
    Ok(())
}
