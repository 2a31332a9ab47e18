use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sparsecast::data::{self, gen_seasonal, gen_synthetic, ColumnSpec, RunConfig, SeasonalSpec};
use sparsecast::eval::{self, AnovaDesign, EvalWindow, Factor, ScoreRecord};
use sparsecast::models::{self, iets_lite_fit, iets_lite_forecast, isq_forecast, SMOOTHING_GRID};
use sparsecast::nn::{self, Checkpoint};
use sparsecast::seed::{self, streams};
use sparsecast::{
    Dataset, DistParams, Error, Freq, HeadKind, HsnbParams, Metric, ModelKind, ModelSpec, NegBinParams, Result,
    SeriesLayout, TrainConfig, TweedieParams,
};

use crate::output::{check_writable, write_atomic, write_with};

#[derive(Debug, Parser)]
#[command(name = "sparsecast", version, about = "Probabilistic forecasting of intermittent time series")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with a JSON sidecar of its true parameters.
    Gen(GenArgs),
    /// Train a global model and write checkpoints plus training logs.
    Train(TrainArgs),
    /// Write quantile forecasts for every series.
    Forecast(ForecastArgs),
    /// Score a forecast file against the dataset.
    Evaluate(EvaluateArgs),
    /// Fit the ANOVA comparison over a score table.
    Compare(CompareArgs),
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Forecast(a) => cmd_forecast(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

/// Dataset location and geometry, optionally seeded from a JSON run
/// configuration that individual flags override.
#[derive(Debug, Args)]
struct DataArgs {
    /// Long-format CSV with columns id,t,value.
    #[arg(long)]
    data: PathBuf,
    /// JSON run configuration (freq, horizon, context, train_end, batch_size, seed).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    freq: Option<Freq>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    context: Option<usize>,
    /// Last in-sample index T; defaults to series length minus horizon.
    #[arg(long)]
    train_end: Option<usize>,
}

impl DataArgs {
    fn run_config(&self) -> Result<Option<RunConfig>> {
        self.config.as_deref().map(RunConfig::load).transpose()
    }

    /// Resolves the run configuration, falling back to `defaults` for
    /// horizon and context when neither flags nor the config set them.
    fn resolve(&self, defaults: (Option<usize>, Option<usize>)) -> Result<RunConfig> {
        let file = self.run_config()?;
        let horizon = self
            .horizon
            .or(file.as_ref().map(|c| c.horizon))
            .or(defaults.0)
            .ok_or_else(|| Error::Config("--horizon is required".into()))?;
        let context = self
            .context
            .or(file.as_ref().map(|c| c.context))
            .or(defaults.1)
            .unwrap_or(horizon);
        Ok(RunConfig {
            freq: self.freq.or(file.as_ref().map(|c| c.freq)).unwrap_or_default(),
            horizon,
            context,
            train_end: self.train_end.or(file.as_ref().and_then(|c| c.train_end)),
            batch_size: file.as_ref().map_or(64, |c| c.batch_size),
            seed: file.as_ref().map_or(1, |c| c.seed),
        })
    }

    fn load(&self, cfg: &RunConfig) -> Result<Dataset> {
        let file = File::open(&self.data).map_err(|e| Error::Io {
            path: self.data.clone(),
            source: e,
        })?;
        let series = data::read_series(BufReader::new(file), &ColumnSpec::default())?;
        let len = series
            .first()
            .map(|s| s.len())
            .ok_or_else(|| Error::Schema(format!("{} contains no series", self.data.display())))?;
        let layout = cfg.layout(len)?;
        Dataset::new(series, layout)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum GenKind {
    Negbin,
    Hsnb,
    Tweedie,
    /// Seasonal occurrence probability with shifted negative binomial sizes.
    Seasonal,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Negative binomial shape (negbin, hsnb size).
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Negative binomial success probability (negbin, hsnb size).
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Occurrence probability (hsnb).
    #[arg(long, default_value_t = 0.5)]
    pi: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    phi: f64,
    #[arg(long, default_value_t = 1.5)]
    rho: f64,
    /// Number of series.
    #[arg(long)]
    n: usize,
    /// Length of every series.
    #[arg(long)]
    len: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Serialize)]
struct Sidecar {
    kind: GenKind,
    /// Generating parameters exactly as given on the command line.
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seasonal: Option<SeasonalSpec>,
    n: usize,
    len: usize,
    seed: u64,
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    if a.len < 3 {
        return Err(Error::Config("--len must be at least 3".into()));
    }
    let sidecar = sidecar_path(&a.out);
    check_writable(&a.out, a.force)?;
    check_writable(&sidecar, a.force)?;
    let layout = SeriesLayout::new(Freq::default(), 1, 1, a.len - 1)?;
    let (ds, params, seasonal) = match a.kind {
        GenKind::Seasonal => {
            let spec = SeasonalSpec::default();
            (gen_seasonal(&spec, a.n, layout, a.seed)?, None, Some(spec))
        }
        kind => {
            let (params, raw) = match kind {
                GenKind::Negbin => (
                    DistParams::NegBin(NegBinParams::new(a.r, a.p)?),
                    serde_json::json!({ "r": a.r, "p": a.p }),
                ),
                GenKind::Hsnb => (
                    DistParams::Hsnb(HsnbParams::new(a.pi, a.r, a.p)?),
                    serde_json::json!({ "pi": a.pi, "r": a.r, "p": a.p }),
                ),
                _ => (
                    DistParams::Tweedie(TweedieParams::new(a.mu, a.phi, a.rho)?),
                    serde_json::json!({ "mu": a.mu, "phi": a.phi, "rho": a.rho }),
                ),
            };
            (gen_synthetic(&params, a.n, layout, a.seed)?, Some(raw), None)
        }
    };
    let meta = Sidecar {
        kind: a.kind,
        params,
        seasonal,
        n: a.n,
        len: a.len,
        seed: a.seed,
    };
    write_with(&a.out, true, |buf| data::write_csv(buf, ds.series()))?;
    let mut json = serde_json::to_vec_pretty(&meta)?;
    json.push(b'\n');
    write_atomic(&sidecar, &json)?;
    eprintln!("wrote {} series of length {} to {}", a.n, a.len, a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: ModelKind,
    #[arg(long)]
    head: Option<HeadKind>,
    /// D-Linear moving-average kernel (odd); defaults to 25 clamped to 2c−1.
    #[arg(long)]
    kernel: Option<usize>,
    /// First seed; run k uses seed + k − 1.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    runs: u64,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = TrainConfig::default().batches_per_epoch)]
    batches_per_epoch: usize,
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    max_epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    patience: usize,
    #[arg(long, default_value_t = TrainConfig::default().lr)]
    lr: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    #[arg(long, default_value_t = 10.0)]
    clip_norm: f64,
    /// Output directory for `<model>-<head>-run<seed>.ckpt` and `.log.csv`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

fn checkpoint_name(model: ModelKind, head: HeadKind, seed: u64) -> String {
    format!("{model}-{head}-run{seed}")
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    check_kind_and_head(a.model, a.head)?;
    if !a.model.is_global() {
        return Err(Error::Config(format!(
            "`{}` is a local model and is fit at forecast time; train accepts fnn or dlinear",
            a.model
        )));
    }
    let cfg = a.data.resolve((None, None))?;
    let spec = ModelSpec {
        kind: a.model,
        head: a.head,
        context: cfg.context,
        horizon: cfg.horizon,
        kernel: a.kernel,
    };
    spec.validate()?;
    let ds = a.data.load(&cfg)?;
    let head = spec.head.expect("validated");
    let first_seed = a.seed.unwrap_or(cfg.seed);
    if a.runs == 0 {
        return Err(Error::Config("--runs must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..a.runs).map(|k| first_seed + k).collect();
    let paths: Vec<(PathBuf, PathBuf)> = seeds
        .iter()
        .map(|&s| {
            let stem = checkpoint_name(a.model, head, s);
            (a.out.join(format!("{stem}.ckpt")), a.out.join(format!("{stem}.log.csv")))
        })
        .collect();
    for (ck, log) in &paths {
        check_writable(ck, a.force)?;
        check_writable(log, a.force)?;
    }
    for (&s, (ck_path, log_path)) in seeds.iter().zip(&paths) {
        let tc = TrainConfig {
            batch_size: a.batch_size.unwrap_or(cfg.batch_size),
            batches_per_epoch: a.batches_per_epoch,
            max_epochs: a.max_epochs,
            patience: a.patience,
            lr: a.lr,
            seed: s,
            clip_norm: (a.clip_norm > 0.0).then_some(a.clip_norm),
        };
        let (ck, log) = models::train_global(&spec, &ds, &tc)?;
        write_atomic(ck_path, &ck.to_bytes())?;
        let mut buf = Vec::new();
        nn::write_log(&mut buf, &log)?;
        write_atomic(log_path, &buf)?;
        eprintln!(
            "seed {s}: {} epochs, best epoch {} (validation NLL {:.6}) -> {}",
            log.len() - 1,
            ck.best_epoch,
            log[ck.best_epoch].val_nll,
            ck_path.display()
        );
    }
    Ok(())
}

/// Head/model compatibility, checked before any data is read.
fn check_kind_and_head(kind: ModelKind, head: Option<HeadKind>) -> Result<()> {
    ModelSpec {
        kind,
        head,
        context: 1,
        horizon: 1,
        kernel: None,
    }
    .validate()
}

#[derive(Debug, Args)]
struct ForecastArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Checkpoint of a trained global model.
    #[arg(long, conflicts_with = "model")]
    checkpoint: Option<PathBuf>,
    /// Local model to fit per series (isq or iets).
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    head: Option<HeadKind>,
    /// Simulated paths per series for iETS-lite.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

fn cmd_forecast(a: ForecastArgs) -> Result<()> {
    check_writable(&a.out, a.force)?;
    let forecasts = match (&a.checkpoint, a.model) {
        (Some(path), _) => {
            let file = File::open(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let ck = Checkpoint::read_from(BufReader::new(file))?;
            let net = &ck.network;
            if let Some(h) = a.head.filter(|&h| h != net.head()) {
                return Err(Error::Config(format!("checkpoint has a {} head, not {h}", net.head())));
            }
            let cfg = a.data.resolve((Some(net.horizon()), Some(net.context())))?;
            if cfg.horizon != net.horizon() || cfg.context != net.context() {
                return Err(Error::Config(format!(
                    "checkpoint expects context {} and horizon {}, got context {} and horizon {}",
                    net.context(),
                    net.horizon(),
                    cfg.context,
                    cfg.horizon
                )));
            }
            let ds = a.data.load(&cfg)?;
            let fc = models::global_forecast(&ck, &ds)?;
            let padded = fc.iter().filter(|f| f.padded).count();
            if padded > 0 {
                eprintln!("{padded} series shorter than the context were zero-padded");
            }
            fc
        }
        (None, Some(kind)) => {
            check_kind_and_head(kind, a.head)?;
            if kind.is_global() {
                return Err(Error::Config(format!("`{kind}` forecasts need --checkpoint")));
            }
            let cfg = a.data.resolve((None, None))?;
            let ds = a.data.load(&cfg)?;
            let split = ds.split();
            let root = a.seed.unwrap_or(cfg.seed);
            ds.series()
                .iter()
                .enumerate()
                .map(|(i, ts)| match kind {
                    ModelKind::Isq => Ok(isq_forecast(ts, &split)),
                    _ => {
                        let state = iets_lite_fit(ts, &split, &SMOOTHING_GRID);
                        let stream = seed::derive(seed::derive(root, streams::FORECAST), streams::SERIES_BASE + i as u64);
                        iets_lite_forecast(&state, ds.horizon(), a.samples, stream)
                    }
                })
                .collect::<Result<Vec<_>>>()?
        }
        (None, None) => return Err(Error::Config("pass --checkpoint or --model".into())),
    };
    write_with(&a.out, true, |buf| models::write_forecasts(buf, &forecasts))?;
    eprintln!("wrote forecasts for {} series to {}", forecasts.len(), a.out.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WindowArg {
    Test,
    InSample,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    forecast: PathBuf,
    /// Dataset label written into the score table.
    #[arg(long, default_value = "data")]
    dataset: String,
    /// Model label written into the score table.
    #[arg(long)]
    model: String,
    /// Head label; empty for local models.
    #[arg(long, default_value = "")]
    head: String,
    #[arg(long, default_value_t = 1)]
    run: u64,
    /// Observations the forecast is scored against.
    #[arg(long, value_enum, default_value_t = WindowArg::Test)]
    window: WindowArg,
    #[arg(long)]
    out: PathBuf,
    /// Also write one row of scores per series; flagged scores are empty.
    #[arg(long)]
    per_series: Option<PathBuf>,
    /// Append rows to an existing score table.
    #[arg(long, conflicts_with = "force")]
    append: bool,
    #[arg(long)]
    force: bool,
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    if !a.append {
        check_writable(&a.out, a.force)?;
    }
    if let Some(path) = &a.per_series {
        check_writable(path, a.force)?;
    }
    let cfg = a.data.resolve((None, None))?;
    let ds = a.data.load(&cfg)?;
    let file = File::open(&a.forecast).map_err(|e| Error::Io {
        path: a.forecast.clone(),
        source: e,
    })?;
    let forecasts = models::read_forecasts(BufReader::new(file))?;
    let window = match a.window {
        WindowArg::Test => EvalWindow::Test,
        WindowArg::InSample => EvalWindow::InSample,
    };
    let per_series = eval::score_forecasts(&ds, &forecasts, window)?;
    let records = eval::score_records(&per_series, &a.dataset, &a.model, &a.head, a.run)?;
    if let Some(path) = &a.per_series {
        write_with(path, true, |buf| eval::write_series_scores(buf, &ds, &per_series))?;
    }

    let mut rows: Vec<ScoreRecord> = Vec::new();
    if a.append && a.out.exists() {
        let file = File::open(&a.out).map_err(|e| Error::Io {
            path: a.out.clone(),
            source: e,
        })?;
        rows = eval::read_scores(BufReader::new(file))?;
    }
    rows.extend(records.iter().cloned());
    write_with(&a.out, true, |buf| eval::write_scores(buf, &rows, true))?;
    for r in &records {
        println!("{:<8} {:>10.6}  flagged {}", r.metric.name(), r.value, r.flagged);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DesignArg {
    /// Models against a reference model plus metric offsets.
    Models,
    /// Heads against a reference head, one offset per metric.
    Heads,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, value_enum, default_value_t = DesignArg::Models)]
    design: DesignArg,
    /// Reference model (models design) or head (heads design).
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    reference_metric: Option<Metric>,
    /// Also write the coefficients as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    if let Some(out) = &a.out {
        check_writable(out, a.force)?;
    }
    let file = File::open(&a.scores).map_err(|e| Error::Io {
        path: a.scores.clone(),
        source: e,
    })?;
    let records = eval::read_scores(BufReader::new(file))?;
    let design = match a.design {
        DesignArg::Models => AnovaDesign::Additive {
            factor: Factor::Model,
            reference_level: a.reference.unwrap_or_else(|| "dlinear".into()),
            reference_metric: a.reference_metric.unwrap_or(Metric::Sql50),
        },
        DesignArg::Heads => AnovaDesign::HeadByMetric {
            reference_head: a.reference.unwrap_or_else(|| "negbin".into()),
            reference_metric: a.reference_metric.unwrap_or(Metric::Rmsse),
        },
    };
    let result = eval::anova(&records, &design)?;
    print!("{}", result.to_table());
    if let Some(out) = &a.out {
        write_with(out, true, |buf| result.write_csv(buf))?;
    }
    Ok(())
}
