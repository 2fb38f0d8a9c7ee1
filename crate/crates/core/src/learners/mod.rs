//! The model zoo behind one fit/predict interface.

mod boost;
mod forest;
mod knn;
mod linear;
mod logistic;
mod mlp;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Design, Matrix};
use crate::model::{one_hot, NUM_ROUTES};
use crate::seed::derive_seed;

pub use boost::{weighted_median, AdaBoostClassifier, AdaBoostRegressor, BoostRound};
pub use forest::{ForestParams, RandomForest};
pub use knn::Knn;
pub use linear::LeastSquares;
pub use logistic::{sigmoid, Logistic, LogisticParams};
pub use mlp::{Mlp, MlpNet, MlpParams, Output};
pub use tree::{Criterion, Node, Presorted, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    LeastSquares,
    Logistic,
    Mlp3,
    Cart,
    AdaboostCart,
    RandomForest,
    Knn,
    UniformBlend,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 8] = [
        LearnerKind::LeastSquares,
        LearnerKind::Logistic,
        LearnerKind::Mlp3,
        LearnerKind::Cart,
        LearnerKind::AdaboostCart,
        LearnerKind::RandomForest,
        LearnerKind::Knn,
        LearnerKind::UniformBlend,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::LeastSquares => "least_squares",
            LearnerKind::Logistic => "logistic",
            LearnerKind::Mlp3 => "mlp3",
            LearnerKind::Cart => "cart",
            LearnerKind::AdaboostCart => "adaboost_cart",
            LearnerKind::RandomForest => "random_forest",
            LearnerKind::Knn => "knn",
            LearnerKind::UniformBlend => "uniform_blend",
        }
    }

    pub fn supports(self, task: Task) -> bool {
        match self {
            LearnerKind::LeastSquares => task == Task::Regression,
            LearnerKind::Logistic => task == Task::Classification,
            _ => true,
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            _ => Err(Error::InvalidConfig(format!("unknown task {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub task: Task,
    #[serde(default)]
    pub hyperparams: BTreeMap<String, f64>,
    /// Member learner for `uniform_blend`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<LearnerSpec>>,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind, task: Task) -> Self {
        LearnerSpec {
            kind,
            task,
            hyperparams: BTreeMap::new(),
            base: None,
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.hyperparams.insert(name.to_string(), value);
        self
    }

    pub fn with_base(mut self, base: LearnerSpec) -> Self {
        self.base = Some(Box::new(base));
        self
    }

    pub fn param(&self, name: &str, default: f64) -> f64 {
        self.hyperparams.get(name).copied().unwrap_or(default)
    }

    fn usize_param(&self, name: &str, default: usize) -> usize {
        let v = self.param(name, default as f64);
        if v.is_finite() && v >= 0.0 {
            v.round() as usize
        } else {
            default
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kind.supports(self.task) {
            return Err(Error::IncompatibleSpec(format!(
                "{} does not support {:?}",
                self.kind, self.task
            )));
        }
        if self.kind == LearnerKind::UniformBlend {
            let base = self
                .base
                .as_deref()
                .ok_or_else(|| Error::IncompatibleSpec("uniform_blend needs a base learner".into()))?;
            if base.kind == LearnerKind::UniformBlend || base.task != self.task {
                return Err(Error::IncompatibleSpec("invalid uniform_blend base".into()));
            }
            base.validate()?;
        }
        Ok(())
    }

    /// Short human-readable label, e.g. `adaboost_cart(rounds=100,weak_depth=2)`.
    pub fn label(&self) -> String {
        let params: Vec<String> = self
            .hyperparams
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let mut s = format!("{}({})", self.kind, params.join(","));
        if let Some(base) = &self.base {
            s.push_str(&format!("[{}]", base.label()));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelParams {
    LeastSquares(LeastSquares),
    Logistic(Logistic),
    Mlp(Mlp),
    Cart(Tree),
    AdaBoostClassifier(AdaBoostClassifier),
    AdaBoostRegressor(AdaBoostRegressor),
    RandomForest(RandomForest),
    Knn(Knn),
    Blend {
        members: Vec<TrainedModel>,
        dummy_columns: Vec<usize>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    /// Final training loss: cross-entropy, squared error, RMSE or error rate.
    pub training_loss: Option<f64>,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boost_rounds: Vec<BoostRound>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: LearnerSpec,
    pub n_features: usize,
    pub parameters: ModelParams,
    pub summary: FitSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Regression(Vec<f64>),
    Classification { labels: Vec<u8>, scores: Vec<f64> },
}

impl Predictions {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Regression(v) => v.len(),
            Predictions::Classification { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> Option<&[u8]> {
        match self {
            Predictions::Classification { labels, .. } => Some(labels),
            Predictions::Regression(_) => None,
        }
    }

    pub fn values(&self) -> Option<&[f64]> {
        match self {
            Predictions::Regression(v) => Some(v),
            Predictions::Classification { .. } => None,
        }
    }
}

fn error_rate(labels: &[u8], y: &[f64]) -> f64 {
    let wrong = labels.iter().zip(y).filter(|(l, t)| f64::from(**l) != **t).count();
    wrong as f64 / y.len().max(1) as f64
}

/// Fits a learner; deterministic for a given spec, data and seed.
pub fn fit(spec: &LearnerSpec, train: &Design, seed: u64) -> Result<TrainedModel> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let x = &train.x;
    let y = &train.y;
    let classification = spec.task == Task::Classification;
    let mut summary = FitSummary::default();

    let parameters = match spec.kind {
        LearnerKind::LeastSquares => {
            let (m, rmse) = LeastSquares::fit(x, y)?;
            summary.training_loss = Some(rmse);
            ModelParams::LeastSquares(m)
        }
        LearnerKind::Logistic => {
            let params = LogisticParams {
                max_epochs: spec.usize_param("max_epochs", 500),
                grad_tol: spec.param("grad_tol", 1e-6),
                initial_step: spec.param("initial_step", 1.0),
            };
            let (m, trace) = Logistic::fit(x, y, params)?;
            summary.iterations = trace.len() - 1;
            summary.training_loss = trace.last().copied();
            summary.loss_trace = trace;
            ModelParams::Logistic(m)
        }
        LearnerKind::Mlp3 => {
            let params = MlpParams {
                hidden: spec.usize_param("hidden", 16),
                learning_rate: spec.param("learning_rate", 0.01),
                epochs: spec.usize_param("epochs", 30),
                batch_size: spec.usize_param("batch_size", 32),
            };
            let output = if classification { Output::Sigmoid } else { Output::Linear };
            let (m, trace) = Mlp::fit(x, y, output, params, derive_seed(seed, &["mlp3"]))?;
            summary.iterations = trace.len();
            summary.training_loss = trace.last().copied();
            summary.loss_trace = trace;
            ModelParams::Mlp(m)
        }
        LearnerKind::Cart => {
            let params = TreeParams {
                criterion: if classification { Criterion::Gini } else { Criterion::Variance },
                max_depth: spec.usize_param("max_depth", 8),
                min_leaf: spec.usize_param("min_leaf", 1),
                max_features: None,
            };
            let tree = Tree::fit(x, y, &vec![1.0; x.rows()], &Presorted::new(x), params, None);
            summary.iterations = tree.nodes().len();
            ModelParams::Cart(tree)
        }
        LearnerKind::AdaboostCart => {
            let rounds = spec.usize_param("rounds", 100);
            let depth = spec.usize_param("weak_depth", 1);
            let min_leaf = spec.usize_param("min_leaf", 1);
            if classification {
                let (m, history) = AdaBoostClassifier::fit(x, y, rounds, depth, min_leaf);
                summary.iterations = m.rounds();
                summary.training_loss = history.last().map(|r| r.train_error);
                summary.boost_rounds = history;
                ModelParams::AdaBoostClassifier(m)
            } else {
                let (m, losses) = AdaBoostRegressor::fit(x, y, rounds, depth, min_leaf);
                summary.iterations = m.rounds();
                summary.loss_trace = losses;
                summary.notes.push("regression boosting: weighted-median combination, linear loss".into());
                ModelParams::AdaBoostRegressor(m)
            }
        }
        LearnerKind::RandomForest => {
            let d = x.cols();
            let default_features = if classification {
                ((d as f64).sqrt().floor() as usize).max(1)
            } else {
                (d / 3).max(1)
            };
            // max_features = 0 disables subsampling.
            let max_features = match spec.usize_param("max_features", default_features) {
                0 => None,
                m => Some(m),
            };
            let params = ForestParams {
                trees: spec.usize_param("trees", 100),
                max_depth: spec.usize_param("max_depth", 64),
                min_leaf: spec.usize_param("min_leaf", 1),
                max_features,
                bootstrap: spec.param("bootstrap", 1.0) != 0.0,
            };
            let criterion = if classification { Criterion::Gini } else { Criterion::Variance };
            let forest = RandomForest::fit(x, y, criterion, params, derive_seed(seed, &["forest"]));
            summary.iterations = forest.trees().len();
            ModelParams::RandomForest(forest)
        }
        LearnerKind::Knn => {
            let k = spec.usize_param("k", 5);
            ModelParams::Knn(Knn::fit(x, y, &train.categorical, k)?)
        }
        LearnerKind::UniformBlend => {
            let base = spec.base.as_deref().expect("validated");
            let members = (0..NUM_ROUTES)
                .into_par_iter()
                .map(|g| {
                    let idx: Vec<usize> = (0..train.len()).filter(|&i| train.groups[i] == Some(g)).collect();
                    if idx.is_empty() {
                        return Err(Error::IncompatibleSpec(format!("route group {g} has no training rows")));
                    }
                    fit(base, &train.subset(&idx), derive_seed(seed, &["member", &g.to_string()]))
                })
                .collect::<Result<Vec<_>>>()?;
            let dummy_columns: Vec<usize> = (0..x.cols()).filter(|&j| train.categorical[j]).collect();
            if dummy_columns.len() != NUM_ROUTES {
                return Err(Error::IncompatibleSpec(
                    "uniform_blend needs the flight dummy columns".into(),
                ));
            }
            ModelParams::Blend {
                members,
                dummy_columns,
            }
        }
    };

    let mut model = TrainedModel {
        spec: spec.clone(),
        n_features: x.cols(),
        parameters,
        summary,
    };
    if model.summary.training_loss.is_none() {
        let pred = model.predict(x)?;
        model.summary.training_loss = Some(match &pred {
            Predictions::Classification { labels, .. } => error_rate(labels, y),
            Predictions::Regression(v) => {
                (v.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64).sqrt()
            }
        });
    }
    Ok(model)
}

fn with_route(row: &[f64], dummy_columns: &[usize], route: usize) -> Vec<f64> {
    let mut r = row.to_vec();
    for (&c, d) in dummy_columns.iter().zip(one_hot(route)) {
        r[c] = f64::from(d);
    }
    r
}

impl TrainedModel {
    pub fn task(&self) -> Task {
        self.spec.task
    }

    /// Raw per-row outputs: (value, score). Value is the label for classifiers.
    fn predict_one(&self, row: &[f64], buf: &mut Vec<f64>) -> (f64, f64) {
        let classify = |score: f64| (f64::from(u8::from(score > 0.5)), score);
        match &self.parameters {
            ModelParams::LeastSquares(m) => {
                let v = m.predict_row(row, buf);
                (v, v)
            }
            ModelParams::Logistic(m) => classify(m.score_row(row, buf)),
            ModelParams::Mlp(m) => {
                let v = m.predict_row(row, buf);
                match self.spec.task {
                    Task::Classification => classify(v),
                    Task::Regression => (v, v),
                }
            }
            ModelParams::Cart(t) => {
                let v = t.predict_row(row);
                match self.spec.task {
                    Task::Classification => classify(v),
                    Task::Regression => (v, v),
                }
            }
            ModelParams::AdaBoostClassifier(m) => {
                let (label, score) = m.predict_row(row);
                (f64::from(label), score)
            }
            ModelParams::AdaBoostRegressor(m) => {
                let v = m.predict_row(row);
                (v, v)
            }
            ModelParams::RandomForest(f) => f.predict_row(row),
            ModelParams::Knn(m) => {
                let v = m.mean_target(row, buf);
                match self.spec.task {
                    Task::Classification => classify(v),
                    Task::Regression => (v, v),
                }
            }
            ModelParams::Blend {
                members,
                dummy_columns,
            } => {
                let outs: Vec<(f64, f64)> = members
                    .iter()
                    .enumerate()
                    .map(|(g, m)| m.predict_one(&with_route(row, dummy_columns, g), buf))
                    .collect();
                match self.spec.task {
                    Task::Classification => {
                        let votes = outs.iter().filter(|o| o.0 > 0.5).count();
                        (f64::from(u8::from(2 * votes > members.len())), votes as f64 / members.len() as f64)
                    }
                    Task::Regression => {
                        let m = outs.iter().map(|o| o.0).sum::<f64>() / outs.len() as f64;
                        (m, m)
                    }
                }
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Predictions> {
        if x.cols() != self.n_features {
            return Err(Error::FeatureMismatch {
                expected: self.n_features,
                got: x.cols(),
            });
        }
        let outs: Vec<(f64, f64)> = (0..x.rows())
            .into_par_iter()
            .map_init(Vec::new, |buf, i| self.predict_one(x.row(i), buf))
            .collect();
        Ok(match self.spec.task {
            Task::Regression => Predictions::Regression(outs.into_iter().map(|o| o.0).collect()),
            Task::Classification => {
                let (labels, scores) = outs.into_iter().map(|(v, s)| (u8::from(v > 0.5), s)).unzip();
                Predictions::Classification { labels, scores }
            }
        })
    }

    /// Members of a uniform blend, if this is one.
    pub fn blend_members(&self) -> Option<&[TrainedModel]> {
        match &self.parameters {
            ModelParams::Blend { members, .. } => Some(members),
            _ => None,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let doc = ModelDocumentRef {
            format: MODEL_FORMAT,
            version: MODEL_VERSION,
            model: self,
        };
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, &doc)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::from_document(serde_json::from_reader(file)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(json)?)
    }

    fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model document {} v{}",
                doc.format, doc.version
            )));
        }
        Ok(doc.model)
    }
}

pub const MODEL_FORMAT: &str = "farecast-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize)]
struct ModelDocumentRef<'a> {
    format: &'a str,
    version: u32,
    model: &'a TrainedModel,
}

#[derive(Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    model: TrainedModel,
}

/// Majority vote of exactly eight classifiers; a 4–4 tie means wait.
pub fn blend_predict(members: &[TrainedModel], x: &Matrix) -> Result<Vec<u8>> {
    if members.len() != NUM_ROUTES {
        return Err(Error::WrongMemberCount(members.len()));
    }
    let mut votes = vec![0usize; x.rows()];
    for m in members {
        if m.task() != Task::Classification {
            return Err(Error::IncompatibleSpec("blend members must be classifiers".into()));
        }
        let labels = match m.predict(x)? {
            Predictions::Classification { labels, .. } => labels,
            Predictions::Regression(_) => unreachable!("classification task"),
        };
        for (v, l) in votes.iter_mut().zip(labels) {
            *v += usize::from(l);
        }
    }
    Ok(votes.into_iter().map(|v| u8::from(v > NUM_ROUTES / 2)).collect())
}

/// As [`blend_predict`], with each member seeing its own route's dummies.
pub fn blend_predict_own_route(members: &[TrainedModel], x: &Matrix, dummy_columns: &[usize]) -> Result<Vec<u8>> {
    if members.len() != NUM_ROUTES {
        return Err(Error::WrongMemberCount(members.len()));
    }
    let mut votes = vec![0usize; x.rows()];
    for (g, m) in members.iter().enumerate() {
        let mut xg = x.clone();
        for i in 0..xg.rows() {
            let r = with_route(xg.row(i), dummy_columns, g);
            xg.row_mut(i).copy_from_slice(&r);
        }
        let labels = m
            .predict(&xg)?
            .labels()
            .ok_or_else(|| Error::IncompatibleSpec("blend members must be classifiers".into()))?
            .to_vec();
        for (v, l) in votes.iter_mut().zip(labels) {
            *v += usize::from(l);
        }
    }
    Ok(votes.into_iter().map(|v| u8::from(v > NUM_ROUTES / 2)).collect())
}
