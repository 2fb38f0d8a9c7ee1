//! Command-line front end. `run` parses arguments, executes one subcommand
//! and returns the process exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::features::write_features_csv;
use crate::hmm::{HmmBank, TemplateMode};
use crate::ingest::{load_quotes, write_quotes, SplitConfig};
use crate::learners::{LearnerKind, LearnerSpec, Task};
use crate::metrics::RandomBenchmark;
use crate::pipeline::{
    make_report, qlearn_decisions, run_generalized, template_usage, train_bank, train_specific, Corpus,
    GeneralizedReport, ModelBundle, RunConfig, TOOL_VERSION,
};
use crate::preprocess::OutlierMethod;
use crate::report::{to_report_json, write_plot_csv, BacktestReport};
use crate::seed::derive_seed;
use crate::synthgen::{generate_corpus, GenConfig};

#[derive(Debug, Parser)]
#[command(name = "farecast", version, about = "Buy/wait decisions for airline ticket price series")]
pub struct Cli {
    /// Root seed; every random choice is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic quote corpus.
    GenData(GenDataArgs),
    /// Cross-validate a hyperparameter grid.
    Tune(TuneArgs),
    /// Fit a model and save it, optionally with an HMM bank and a blend.
    Train(TrainArgs),
    /// Simulate purchases on the test split.
    Backtest(BacktestArgs),
    /// Tabular Q-learning baseline.
    Qlearn(QlearnArgs),
    /// Transfer a frozen model to routes without history.
    Generalize(GeneralizeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OutlierArg {
    None,
    Kmeans,
    Em,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Twelve generalized routes instead of the eight specific ones.
    #[arg(long)]
    pub generalized: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub quotes: PathBuf,
    /// JSON with train_start, train_end, test_start, test_end.
    #[arg(long)]
    pub split_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[arg(long, default_value = "adaboost_cart")]
    pub model: String,
    #[arg(long, default_value = "classification")]
    pub task: String,
    #[arg(long, value_enum)]
    pub outlier_removal: Option<OutlierArg>,
    #[arg(long, value_enum)]
    pub oversample: Option<Toggle>,
    /// Write the training feature rows as CSV.
    #[arg(long)]
    pub dump_features: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub learn: LearnArgs,
    /// CV table CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub learn: LearnArgs,
    #[arg(long)]
    pub save_model: PathBuf,
    /// Directory for the per-route HMM templates.
    #[arg(long)]
    pub save_bank: Option<PathBuf>,
    /// Also fit a uniform blend of the chosen learner and save it here.
    #[arg(long)]
    pub save_blend: Option<PathBuf>,
    /// Training summary JSON (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-route table as CSV.
    #[arg(long)]
    pub report_csv: Option<PathBuf>,
    /// Per-quote decisions as CSV, for plotting.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
    /// Estimate the random benchmark from N sampled purchases per series.
    #[arg(long, value_name = "N")]
    pub simulate_random: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub learn: LearnArgs,
    /// Use a saved model instead of training one.
    #[arg(long)]
    pub load_model: Option<PathBuf>,
    #[arg(long)]
    pub save_model: Option<PathBuf>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct QlearnArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Save the per-route Q-tables as JSON.
    #[arg(long)]
    pub save_table: Option<PathBuf>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct GeneralizeArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub frozen_model: PathBuf,
    #[arg(long)]
    pub gen_quotes: PathBuf,
    /// Uniform-blend model for the comparison column.
    #[arg(long)]
    pub blend_model: Option<PathBuf>,
    /// Pick one template per series from the whole series (looks ahead).
    #[arg(long)]
    pub per_series: bool,
    #[command(flatten)]
    pub report: ReportArgs,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Failures print a JSON error record on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 }
                }
                kind => {
                    let tag = match kind {
                        ErrorKind::InvalidSubcommand => "UnknownCommand",
                        _ => "UsageError",
                    };
                    print_error(tag, &e.to_string());
                    2
                }
            };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            print_error(e.kind(), &e.to_string());
            1
        }
    }
}

fn print_error(kind: &str, message: &str) {
    let record = json!({"error": kind, "message": message.trim()});
    let _ = writeln!(std::io::stderr(), "{record}");
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::InvalidConfig("--jobs must be at least 1".into()));
        }
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::GenData(a) => gen_data(cli.seed, a),
        Command::Tune(a) => {
            resolve(&mut cfg, cli.seed, Some(&a.data), Some(&a.learn), None)?;
            tune(cli, &cfg, a)
        }
        Command::Train(a) => {
            resolve(&mut cfg, cli.seed, Some(&a.data), Some(&a.learn), None)?;
            train(cli, &cfg, a)
        }
        Command::Backtest(a) => {
            resolve(&mut cfg, cli.seed, Some(&a.data), Some(&a.learn), Some(&a.report))?;
            backtest(cli, &cfg, a)
        }
        Command::Qlearn(a) => {
            if let Some(e) = a.episodes {
                cfg.qlearn.episodes = e;
            }
            if let Some(g) = a.gamma {
                cfg.qlearn.gamma = g;
            }
            if let Some(al) = a.alpha {
                cfg.qlearn.alpha = al;
            }
            resolve(&mut cfg, cli.seed, Some(&a.data), None, Some(&a.report))?;
            qlearn(cli, &cfg, a)
        }
        Command::Generalize(a) => {
            if a.per_series {
                cfg.template_mode = TemplateMode::PerSeries;
            }
            resolve(&mut cfg, cli.seed, None, None, Some(&a.report))?;
            generalize(cli, &cfg, a)
        }
    }
}

/// Folds command-line overrides into the configuration and validates it.
fn resolve(cfg: &mut RunConfig, seed: u64, data: Option<&DataArgs>, learn: Option<&LearnArgs>, report: Option<&ReportArgs>) -> Result<()> {
    if let Some(p) = data.and_then(|d| d.split_config.as_ref()) {
        cfg.split = SplitConfig::load(p)?;
    }
    if let Some(l) = learn {
        match l.outlier_removal {
            Some(OutlierArg::None) => cfg.preprocessing.outlier_removal = None,
            Some(OutlierArg::Kmeans) => cfg.preprocessing.outlier_removal = Some(OutlierMethod::Kmeans),
            Some(OutlierArg::Em) => cfg.preprocessing.outlier_removal = Some(OutlierMethod::Em),
            None => {}
        }
        if let Some(t) = l.oversample {
            cfg.preprocessing.oversample = matches!(t, Toggle::On);
        }
    }
    if let Some(draws) = report.and_then(|r| r.simulate_random) {
        if draws == 0 {
            return Err(Error::InvalidConfig("--simulate-random needs at least one draw".into()));
        }
        cfg.random_benchmark = RandomBenchmark::Simulated {
            draws,
            seed: derive_seed(seed, &["random"]),
        };
    }
    cfg.validate()
}

fn learner(l: &LearnArgs) -> Result<(LearnerKind, Task)> {
    let kind: LearnerKind = l.model.parse()?;
    let task: Task = l.task.parse()?;
    if !kind.supports(task) {
        return Err(Error::IncompatibleSpec(format!("{kind} does not support {}", l.task)));
    }
    Ok((kind, task))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// The configuration block embedded in every report.
fn resolved(cfg: &RunConfig, seed: u64, extra: Value) -> Value {
    json!({"seed": seed, "run": cfg, "args": extra})
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn load_corpus(data: &DataArgs, cfg: &RunConfig) -> Result<Corpus> {
    let corpus = Corpus::load(&data.quotes, &cfg.split)?;
    info!(
        "{} train and {} test series ({} outside both windows)",
        corpus.train.len(),
        corpus.test.len(),
        corpus.dropped
    );
    Ok(corpus)
}

fn dump_features(corpus: &Corpus, path: Option<&PathBuf>) -> Result<()> {
    if let Some(p) = path {
        write_features_csv(create(p)?, &corpus.train_dataset()?.rows)?;
    }
    Ok(())
}

fn gen_data(seed: u64, a: &GenDataArgs) -> Result<()> {
    let cfg = if a.generalized {
        GenConfig::default_generalized(seed)
    } else {
        GenConfig::default_specific(seed)
    };
    let quotes = generate_corpus(&cfg)?;
    info!("writing {} quotes to {}", quotes.len(), a.out.display());
    write_quotes(create(&a.out)?, &quotes)
}

fn tune(cli: &Cli, cfg: &RunConfig, a: &TuneArgs) -> Result<()> {
    let (kind, task) = learner(&a.learn)?;
    let corpus = load_corpus(&a.data, cfg)?;
    dump_features(&corpus, a.learn.dump_features.as_ref())?;
    let grid = cfg.grid(kind, task);
    let (best, table) = crate::tuning::grid_search(
        &grid,
        &corpus.train_dataset()?,
        &cfg.preprocessing,
        cfg.folds,
        derive_seed(cli.seed, &["tune"]),
    )?;
    info!("best cell: {}", best.label());
    match &a.out {
        Some(p) => table.write_csv(create(p)?),
        None => table.write_csv(std::io::stdout().lock()),
    }
}

fn train(cli: &Cli, cfg: &RunConfig, a: &TrainArgs) -> Result<()> {
    let (kind, task) = learner(&a.learn)?;
    let corpus = load_corpus(&a.data, cfg)?;
    dump_features(&corpus, a.learn.dump_features.as_ref())?;
    let out = train_specific(&corpus, &cfg.grid(kind, task), cfg, cli.seed)?;
    out.bundle.save(&a.save_model)?;

    let mut blend_label = Value::Null;
    if let Some(p) = &a.save_blend {
        let base = match out.bundle.model.spec.kind {
            LearnerKind::UniformBlend => out.bundle.model.spec.clone(),
            _ => LearnerSpec::new(LearnerKind::UniformBlend, task).with_base(out.bundle.model.spec.clone()),
        };
        let blend = train_specific(&corpus, &[base], cfg, derive_seed(cli.seed, &["blend"]))?;
        blend.bundle.save(p)?;
        blend_label = json!(blend.bundle.model.spec.label());
    }
    if let Some(dir) = &a.save_bank {
        train_bank(&corpus, cfg)?.save_dir(dir)?;
    }

    let summary = json!({
        "command": "train",
        "tool_version": TOOL_VERSION,
        "seed": cli.seed,
        "config": resolved(cfg, cli.seed, json!({
            "quotes": path_str(&a.data.quotes),
            "model": kind,
            "task": task,
        })),
        "model": out.bundle.model.spec.label(),
        "spec": out.bundle.model.spec,
        "fit": out.bundle.model.summary,
        "preprocessing": out.prep,
        "train_rows": out.train_rows,
        "cv": out.cv,
        "blend": blend_label,
    });
    write_text(a.out.as_deref(), &to_report_json(&summary)?)
}

fn emit_report(report: &BacktestReport, r: &ReportArgs, series: &[crate::model::PriceSeries], decisions: &[crate::policy::PurchaseDecision], column: &str) -> Result<()> {
    write_text(r.out.as_deref(), &report.to_json()?)?;
    if let Some(p) = &r.report_csv {
        report.write_table_csv(create(p)?, column)?;
    }
    if let Some(p) = &r.plot_data {
        write_plot_csv(create(p)?, series, decisions)?;
    }
    Ok(())
}

fn backtest(cli: &Cli, cfg: &RunConfig, a: &BacktestArgs) -> Result<()> {
    let corpus = load_corpus(&a.data, cfg)?;
    dump_features(&corpus, a.learn.dump_features.as_ref())?;
    let mut args = json!({"quotes": path_str(&a.data.quotes)});
    let (bundle, details) = match &a.load_model {
        Some(p) => {
            args["load_model"] = json!(path_str(p));
            let bundle = ModelBundle::load(p)?;
            let details = json!({"model": bundle.model.spec.label(), "spec": bundle.model.spec, "loaded": true});
            (bundle, details)
        }
        None => {
            let (kind, task) = learner(&a.learn)?;
            args["model"] = json!(kind);
            args["task"] = json!(task);
            let out = train_specific(&corpus, &cfg.grid(kind, task), cfg, cli.seed)?;
            let details = json!({
                "model": out.bundle.model.spec.label(),
                "spec": out.bundle.model.spec,
                "loaded": false,
                "preprocessing": out.prep,
                "train_rows": out.train_rows,
                "cv": out.cv,
            });
            (out.bundle, details)
        }
    };
    if let Some(p) = &a.save_model {
        bundle.save(p)?;
    }
    let mut details = details;
    details["train_series"] = json!(corpus.train.len());
    details["test_series"] = json!(corpus.test.len());
    details["dropped_series"] = json!(corpus.dropped);

    let decisions = bundle.decide(&corpus.test)?;
    let column = format!("{} (%)", bundle.model.spec.kind);
    let report = make_report(
        "backtest",
        resolved(cfg, cli.seed, args),
        cli.seed,
        details,
        &decisions,
        &corpus.test,
        cfg.random_benchmark,
    )?;
    emit_report(&report, &a.report, &corpus.test, &decisions, &column)
}

fn qlearn(cli: &Cli, cfg: &RunConfig, a: &QlearnArgs) -> Result<()> {
    let corpus = load_corpus(&a.data, cfg)?;
    let (bank, decisions) = qlearn_decisions(&corpus, cfg, cli.seed)?;
    if let Some(p) = &a.save_table {
        serde_json::to_writer(create(p)?, &bank)?;
    }
    let details = json!({
        "train_series": corpus.train.len(),
        "test_series": corpus.test.len(),
        "dropped_series": corpus.dropped,
        "tables": bank.tables.len(),
    });
    let report = make_report(
        "qlearn",
        resolved(cfg, cli.seed, json!({"quotes": path_str(&a.data.quotes)})),
        cli.seed,
        details,
        &decisions,
        &corpus.test,
        cfg.random_benchmark,
    )?;
    emit_report(&report, &a.report, &corpus.test, &decisions, "q_learning (%)")
}

fn generalize(cli: &Cli, cfg: &RunConfig, a: &GeneralizeArgs) -> Result<()> {
    let bank = HmmBank::load_dir(&a.bank)?;
    let frozen = ModelBundle::load(&a.frozen_model)?;
    let blend = a.blend_model.as_ref().map(ModelBundle::load).transpose()?;
    let series = load_quotes(&a.gen_quotes)?;
    let run = run_generalized(&bank, &frozen, blend.as_ref(), &series, cfg.template_mode)?;

    let mut args = json!({
        "bank": path_str(&a.bank),
        "frozen_model": path_str(&a.frozen_model),
        "gen_quotes": path_str(&a.gen_quotes),
    });
    if let Some(p) = &a.blend_model {
        args["blend_model"] = json!(path_str(p));
    }
    let config = resolved(cfg, cli.seed, args);
    let hmm_decisions: Vec<_> = run.hmm.iter().map(|g| g.decision.clone()).collect();
    let hmm = make_report(
        "generalize",
        config.clone(),
        cli.seed,
        json!({"templates": template_usage(&run.hmm, &bank)}),
        &hmm_decisions,
        &series,
        cfg.random_benchmark,
    )?;
    let uniform = run
        .uniform
        .as_ref()
        .map(|d| make_report("generalize", config.clone(), cli.seed, Value::Null, d, &series, cfg.random_benchmark))
        .transpose()?;
    let report = GeneralizedReport {
        command: "generalize".into(),
        tool_version: TOOL_VERSION.into(),
        seed: cli.seed,
        config,
        details: json!({
            "frozen_model": frozen.model.spec.label(),
            "bank_templates": bank.models.len(),
            "series": series.len(),
            "template_mode": cfg.template_mode,
        }),
        hmm,
        uniform,
    };
    write_text(a.report.out.as_deref(), &report.to_json()?)?;
    if let Some(p) = &a.report.report_csv {
        report.write_table_csv(create(p)?)?;
    }
    if let Some(p) = &a.report.plot_data {
        write_plot_csv(create(p)?, &series, &hmm_decisions)?;
    }
    Ok(())
}
