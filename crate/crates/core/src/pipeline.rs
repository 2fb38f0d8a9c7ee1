//! End-to-end orchestration shared by the CLI, the FFI layer and tests.

use std::collections::BTreeMap;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::features::{build_dataset, extract_rows, FeatureContext, RouteIndex};
use crate::hmm::{generalized_blend, generalized_predict, GeneralizedDecision, HmmBank, HmmParams, TemplateMode};
use crate::ingest::{split, SplitConfig};
use crate::learners::{fit, LearnerKind, LearnerSpec, Task, TrainedModel};
use crate::matrix::{feature_matrix, Target};
use crate::metrics::{aggregate, evaluate, RandomBenchmark};
use crate::model::{Dataset, DatasetRole, PriceSeries};
use crate::policy::{decide_classification, decide_regression, PurchaseDecision};
use crate::preprocess::{PrepSummary, Preprocessing};
use crate::qlearn::{QBank, QParams};
use crate::report::{BacktestReport, DecisionRecord};
use crate::seed::derive_seed;
use crate::tuning::{default_grid, grid_search, CvTable, DEFAULT_FOLDS};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a run can be configured with; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub split: SplitConfig,
    pub folds: usize,
    pub preprocessing: Preprocessing,
    /// Hyperparameter grid overrides by learner kind. Blend entries apply to
    /// the base learner.
    pub grids: BTreeMap<LearnerKind, Vec<BTreeMap<String, f64>>>,
    pub hmm: HmmParams,
    pub template_mode: TemplateMode,
    pub qlearn: QParams,
    pub random_benchmark: RandomBenchmark,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            split: SplitConfig::default(),
            folds: DEFAULT_FOLDS,
            preprocessing: Preprocessing::default(),
            grids: BTreeMap::new(),
            hmm: HmmParams::default(),
            template_mode: TemplateMode::default(),
            qlearn: QParams::default(),
            random_benchmark: RandomBenchmark::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_reader(std::fs::File::open(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.qlearn.validate()?;
        if self.folds < 2 {
            return Err(Error::InvalidConfig("need at least 2 folds".into()));
        }
        if self.hmm.n_states == 0 {
            return Err(Error::InvalidConfig("HMM needs at least one state".into()));
        }
        Ok(())
    }

    /// The grid searched for a learner kind.
    pub fn grid(&self, kind: LearnerKind, task: Task) -> Vec<LearnerSpec> {
        let lookup = if kind == LearnerKind::UniformBlend { LearnerKind::AdaboostCart } else { kind };
        match self.grids.get(&lookup) {
            Some(cells) if !cells.is_empty() => cells
                .iter()
                .map(|hp| {
                    let cell = LearnerSpec {
                        kind: lookup,
                        task,
                        hyperparams: hp.clone(),
                        base: None,
                    };
                    if kind == LearnerKind::UniformBlend {
                        LearnerSpec::new(kind, task).with_base(cell)
                    } else {
                        cell
                    }
                })
                .collect(),
            _ => default_grid(kind, task),
        }
    }
}

/// A quote corpus split into train and test series.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub train: Vec<PriceSeries>,
    pub test: Vec<PriceSeries>,
    pub dropped: usize,
    pub context: FeatureContext,
    pub routes: RouteIndex,
}

impl Corpus {
    pub fn new(series: Vec<PriceSeries>, cfg: &SplitConfig) -> Result<Self> {
        let context = FeatureContext::from_series(&series)?;
        let s = split(series, cfg)?;
        if s.train.is_empty() || s.test.is_empty() {
            return Err(Error::InvalidConfig("split leaves the train or test set empty".into()));
        }
        let routes = RouteIndex::from_series(&s.train)?;
        Ok(Corpus {
            train: s.train,
            test: s.test,
            dropped: s.dropped,
            context,
            routes,
        })
    }

    pub fn load(path: impl AsRef<Path>, cfg: &SplitConfig) -> Result<Self> {
        Self::new(crate::ingest::load_quotes(path)?, cfg)
    }

    pub fn train_dataset(&self) -> Result<Dataset> {
        build_dataset(&self.train, Some(&self.routes), &self.context, DatasetRole::Train)
    }

    pub fn test_dataset(&self) -> Result<Dataset> {
        build_dataset(&self.test, Some(&self.routes), &self.context, DatasetRole::Test)
    }
}

/// A fitted model with the feature layout it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub model: TrainedModel,
    pub feature_context: FeatureContext,
    pub routes: RouteIndex,
    pub seed: u64,
}

pub const BUNDLE_FORMAT: &str = "farecast-model-bundle";
pub const BUNDLE_VERSION: u32 = 1;

impl ModelBundle {
    pub fn new(model: TrainedModel, feature_context: FeatureContext, routes: RouteIndex, seed: u64) -> Self {
        ModelBundle {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            model,
            feature_context,
            routes,
            seed,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let b: ModelBundle = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        if b.format != BUNDLE_FORMAT || b.version != BUNDLE_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported model file {} v{}", b.format, b.version)));
        }
        Ok(b)
    }

    /// One purchase decision per series under the policy matching the task.
    pub fn decide(&self, series: &[PriceSeries]) -> Result<Vec<PurchaseDecision>> {
        use rayon::prelude::*;
        series
            .par_iter()
            .map(|s| {
                let idx = self.routes.index_of(s.route_id()).ok_or_else(|| {
                    Error::InvalidConfig(format!("route {} was not seen in training", s.route_id()))
                })?;
                let rows = extract_rows(s, Some(idx), &self.feature_context)?;
                let pred = self.model.predict(&feature_matrix(&rows))?;
                match self.model.task() {
                    Task::Classification => decide_classification(s, pred.labels().expect("classifier")),
                    Task::Regression => decide_regression(s, pred.values().expect("regressor")),
                }
            })
            .collect()
    }
}

pub fn target_of(task: Task) -> Target {
    match task {
        Task::Classification => Target::Class,
        Task::Regression => Target::MinPrice,
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub cv: Option<CvTable>,
    pub prep: PrepSummary,
    pub train_rows: usize,
}

/// Tunes over `grid` when it has several cells, then fits the winner on
/// the preprocessed full training set.
pub fn train_specific(corpus: &Corpus, grid: &[LearnerSpec], cfg: &RunConfig, seed: u64) -> Result<TrainOutcome> {
    let first = grid.first().ok_or_else(|| Error::InvalidConfig("empty hyperparameter grid".into()))?;
    let task = first.task;
    let train = corpus.train_dataset()?;
    let (spec, cv) = if grid.len() > 1 {
        let (best, table) = grid_search(grid, &train, &cfg.preprocessing, cfg.folds, derive_seed(seed, &["tune"]))?;
        (best, Some(table))
    } else {
        (first.clone(), None)
    };
    let (prepared, prep) = cfg
        .preprocessing
        .apply(&train, task == Task::Classification, derive_seed(seed, &["prep"]))?;
    info!(
        "fitting {} on {} rows ({} after preprocessing)",
        spec.label(),
        train.len(),
        prepared.len()
    );
    let model = fit(&spec, &prepared.design(target_of(task)), derive_seed(seed, &["fit"]))?;
    Ok(TrainOutcome {
        bundle: ModelBundle::new(model, corpus.context, corpus.routes.clone(), seed),
        cv,
        prep,
        train_rows: train.len(),
    })
}

/// Assembles a report from decisions over the given series.
pub fn make_report(
    command: &str,
    config: Value,
    seed: u64,
    details: Value,
    decisions: &[PurchaseDecision],
    series: &[PriceSeries],
    benchmark: RandomBenchmark,
) -> Result<BacktestReport> {
    let routes = evaluate(decisions, series, benchmark)?;
    let aggregate = aggregate(&routes);
    let mut records: Vec<DecisionRecord> = decisions.iter().map(DecisionRecord::from).collect();
    records.sort_by(|a, b| (&a.route_id, a.departure_date).cmp(&(&b.route_id, b.departure_date)));
    Ok(BacktestReport {
        command: command.into(),
        tool_version: TOOL_VERSION.into(),
        seed,
        config,
        details,
        routes,
        aggregate,
        decisions: records,
    })
}

/// The HMM bank of a corpus's specific routes.
pub fn train_bank(corpus: &Corpus, cfg: &RunConfig) -> Result<HmmBank> {
    HmmBank::train(&corpus.train, &corpus.routes, cfg.hmm)
}

/// Per-route Q-learning on the train split, decided on the test split.
pub fn qlearn_decisions(corpus: &Corpus, cfg: &RunConfig, seed: u64) -> Result<(QBank, Vec<PurchaseDecision>)> {
    let bank = QBank::train(&corpus.train, cfg.qlearn, derive_seed(seed, &["qlearn"]))?;
    let decisions = corpus.test.iter().map(|s| bank.decide(s)).collect::<Result<_>>()?;
    Ok((bank, decisions))
}

/// Both generalized variants on a set of routes without history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedReport {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: Value,
    pub details: Value,
    pub hmm: BacktestReport,
    pub uniform: Option<BacktestReport>,
}

impl GeneralizedReport {
    pub fn to_json(&self) -> Result<String> {
        crate::report::to_report_json(self)
    }

    /// Columns: route, optimal, random purchase, uniform, HMM (normalized %).
    pub fn write_table_csv<W: std::io::Write>(&self, sink: W) -> Result<()> {
        use crate::report::sig6_string;
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["route", "optimal", "random_purchase", "uniform", "hmm"])?;
        let fmt = |v: Option<f64>| v.map(sig6_string).unwrap_or_else(|| "undefined".into());
        for (i, m) in self.hmm.routes.iter().enumerate() {
            let uni = self.uniform.as_ref().and_then(|u| u.routes.get(i)).and_then(|u| u.normalized_performance_pct);
            w.write_record([
                m.route_id.clone(),
                "100".into(),
                "0".into(),
                if self.uniform.is_some() { fmt(uni) } else { String::new() },
                fmt(m.normalized_performance_pct),
            ])?;
        }
        let agg = |r: Option<&BacktestReport>, f: fn(&crate::metrics::Aggregate) -> f64| r.map(|r| sig6_string(f(&r.aggregate))).unwrap_or_default();
        w.write_record([
            "Mean Perf.".into(),
            "100".into(),
            "0".into(),
            agg(self.uniform.as_ref(), |a| a.mean_performance),
            agg(Some(&self.hmm), |a| a.mean_performance),
        ])?;
        w.write_record([
            "Variance".into(),
            "0".into(),
            "0".into(),
            agg(self.uniform.as_ref(), |a| a.variance),
            agg(Some(&self.hmm), |a| a.variance),
        ])?;
        w.flush()?;
        Ok(())
    }
}

pub struct GeneralizedRun {
    pub hmm: Vec<GeneralizedDecision>,
    pub uniform: Option<Vec<PurchaseDecision>>,
}

/// Runs the HMM variant and, when a blend is given, the uniform variant.
pub fn run_generalized(
    bank: &HmmBank,
    frozen: &ModelBundle,
    blend: Option<&ModelBundle>,
    gen_series: &[PriceSeries],
    mode: TemplateMode,
) -> Result<GeneralizedRun> {
    let hmm = generalized_predict(bank, &frozen.model, gen_series, &frozen.feature_context, mode)?;
    let uniform = blend
        .map(|b| generalized_blend(&b.model, gen_series, &b.feature_context))
        .transpose()?;
    Ok(GeneralizedRun { hmm, uniform })
}

/// Template usage counts per generalized route, for report details.
pub fn template_usage(run: &[GeneralizedDecision], bank: &HmmBank) -> Value {
    let mut usage: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for g in run {
        let entry = usage.entry(g.decision.key.route_id.clone()).or_default();
        for &t in &g.templates {
            *entry.entry(bank.models[t].route_id.clone()).or_default() += 1;
        }
    }
    json!(usage)
}
