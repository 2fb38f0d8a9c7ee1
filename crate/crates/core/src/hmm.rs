//! Gaussian HMM route templates and their use on routes without history.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use chrono::NaiveDate;
use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_rows, FeatureContext, RouteIndex};
use crate::learners::TrainedModel;
use crate::matrix::feature_matrix;
use crate::model::{cmp_f64, PriceSeries, SeriesKey, NUM_ROUTES};
use crate::policy::{decide_classification, PurchaseDecision};

pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmmParams {
    pub n_states: usize,
    pub max_iter: usize,
    /// Baum-Welch stops once the log-likelihood gain drops below this.
    pub tol: f64,
}

impl Default for HmmParams {
    fn default() -> Self {
        HmmParams {
            n_states: 4,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    pub route_index: usize,
    pub route_id: String,
    /// Route training-mean price used to normalize observations.
    pub price_scale: f64,
    pub initial: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

fn ln_gauss(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean).powi(2) / var)
}

/// Per-step emission likelihoods rescaled by their maximum; returns the
/// log of the scale so callers can restore exact values.
fn scaled_emissions(m: &HmmModel, x: f64, out: &mut [f64]) -> f64 {
    for (k, o) in out.iter_mut().enumerate() {
        *o = ln_gauss(x, m.means[k], m.variances[k]);
    }
    let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.iter_mut().for_each(|o| *o = (*o - top).exp());
    top
}

struct Posterior {
    loglik: f64,
    gamma: Vec<Vec<f64>>,
    /// Summed over time.
    xi: Vec<Vec<f64>>,
}

impl HmmModel {
    pub fn new(
        route_index: usize,
        route_id: impl Into<String>,
        price_scale: f64,
        initial: Vec<f64>,
        transition: Vec<Vec<f64>>,
        means: Vec<f64>,
        variances: Vec<f64>,
    ) -> Result<Self> {
        let m = HmmModel {
            route_index,
            route_id: route_id.into(),
            price_scale,
            initial,
            transition,
            means,
            variances,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_states();
        let stochastic = |row: &[f64]| row.len() == k && row.iter().all(|p| *p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if k == 0
            || !stochastic(&self.initial)
            || self.transition.len() != k
            || !self.transition.iter().all(|r| stochastic(r))
            || self.variances.len() != k
            || self.variances.iter().any(|v| v.is_nan() || *v < VARIANCE_FLOOR)
        {
            return Err(Error::InvalidConfig(format!("malformed HMM for route {}", self.route_id)));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.means.len()
    }

    /// Forward-algorithm log-likelihood, with per-step scaling.
    pub fn log_likelihood(&self, obs: &[f64]) -> f64 {
        let k = self.n_states();
        let mut b = vec![0.0; k];
        let mut alpha = vec![0.0; k];
        let mut next = vec![0.0; k];
        let mut ll = 0.0;
        for (t, &x) in obs.iter().enumerate() {
            ll += scaled_emissions(self, x, &mut b);
            if t == 0 {
                for j in 0..k {
                    next[j] = self.initial[j] * b[j];
                }
            } else {
                for j in 0..k {
                    next[j] = (0..k).map(|i| alpha[i] * self.transition[i][j]).sum::<f64>() * b[j];
                }
            }
            let c: f64 = next.iter().sum();
            if c <= 0.0 {
                return f64::NEG_INFINITY;
            }
            ll += c.ln();
            for j in 0..k {
                alpha[j] = next[j] / c;
            }
        }
        ll
    }

    fn posterior(&self, obs: &[f64]) -> Posterior {
        let k = self.n_states();
        let n = obs.len();
        let mut b = vec![vec![0.0; k]; n];
        let mut alpha = vec![vec![0.0; k]; n];
        let mut scale = vec![0.0; n];
        let mut loglik = 0.0;
        for t in 0..n {
            loglik += scaled_emissions(self, obs[t], &mut b[t]);
            for j in 0..k {
                alpha[t][j] = if t == 0 {
                    self.initial[j]
                } else {
                    (0..k).map(|i| alpha[t - 1][i] * self.transition[i][j]).sum()
                } * b[t][j];
            }
            scale[t] = alpha[t].iter().sum();
            loglik += scale[t].ln();
            let c = scale[t];
            alpha[t].iter_mut().for_each(|a| *a /= c);
        }

        let mut beta = vec![vec![1.0; k]; n];
        for t in (0..n.saturating_sub(1)).rev() {
            for i in 0..k {
                beta[t][i] = (0..k)
                    .map(|j| self.transition[i][j] * b[t + 1][j] * beta[t + 1][j])
                    .sum::<f64>()
                    / scale[t + 1];
            }
        }

        let gamma: Vec<Vec<f64>> = (0..n)
            .map(|t| {
                let g: Vec<f64> = (0..k).map(|i| alpha[t][i] * beta[t][i]).collect();
                let z: f64 = g.iter().sum();
                g.into_iter().map(|v| v / z).collect()
            })
            .collect();
        let mut xi = vec![vec![0.0; k]; k];
        for t in 0..n.saturating_sub(1) {
            for i in 0..k {
                for j in 0..k {
                    xi[i][j] += alpha[t][i] * self.transition[i][j] * b[t + 1][j] * beta[t + 1][j] / scale[t + 1];
                }
            }
        }
        Posterior { loglik, gamma, xi }
    }

    /// Draws a sequence from the model.
    pub fn sample(&self, len: usize, rng: &mut impl Rng) -> Vec<f64> {
        let pick = |p: &[f64], rng: &mut dyn rand::RngCore| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, v) in p.iter().enumerate() {
                acc += v;
                if u < acc {
                    return i;
                }
            }
            p.len() - 1
        };
        let mut out = Vec::with_capacity(len);
        let mut state = pick(&self.initial, rng);
        for t in 0..len {
            if t > 0 {
                state = pick(&self.transition[state], rng);
            }
            let d = Normal::new(self.means[state], self.variances[state].sqrt()).expect("valid variance");
            out.push(d.sample(rng));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmFit {
    pub model: HmmModel,
    /// Log-likelihood of each evaluated parameter set, in order.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    /// All observations were identical and a single state was returned.
    pub degenerate: bool,
}

/// 1-D Lloyd iterations from quantile starts; ties go to the lower cluster.
fn kmeans_1d(values: &[f64], k: usize) -> (Vec<f64>, Vec<usize>) {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| cmp_f64(*a, *b));
    let mut centers: Vec<f64> = (0..k)
        .map(|i| sorted[((2 * i + 1) * sorted.len() / (2 * k)).min(sorted.len() - 1)])
        .collect();
    let mut assign = vec![0; values.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (a, &x) in assign.iter_mut().zip(values) {
            let mut best = 0;
            for c in 1..k {
                if (x - centers[c]).abs() < (x - centers[best]).abs() {
                    best = c;
                }
            }
            changed |= *a != best;
            *a = best;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<f64> = values.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(x, _)| *x).collect();
            if !members.is_empty() {
                *center = members.iter().sum::<f64>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    (centers, assign)
}

/// Baum-Welch over several sequences of already-normalized observations.
pub fn hmm_fit(
    sequences: &[Vec<f64>],
    params: HmmParams,
    route_index: usize,
    route_id: &str,
    price_scale: f64,
) -> Result<HmmFit> {
    let pooled: Vec<f64> = sequences.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return Err(Error::EmptySeries);
    }
    if params.n_states == 0 {
        return Err(Error::InvalidConfig("HMM needs at least one state".into()));
    }
    let n = pooled.len() as f64;
    let mean = pooled.iter().sum::<f64>() / n;
    let pooled_var = pooled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;

    if pooled.iter().all(|&x| x == pooled[0]) {
        warn!("route {route_id}: constant observations, using a single-state template");
        let model = HmmModel::new(route_index, route_id, price_scale, vec![1.0], vec![vec![1.0]], vec![pooled[0]], vec![VARIANCE_FLOOR])?;
        let ll = sequences.iter().map(|s| model.log_likelihood(s)).sum();
        return Ok(HmmFit {
            model,
            loglik_trace: vec![ll],
            converged: true,
            degenerate: true,
        });
    }

    let k = params.n_states;
    let (centers, assign) = kmeans_1d(&pooled, k);
    let variances = (0..k)
        .map(|c| {
            let members: Vec<f64> = pooled.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(x, _)| *x).collect();
            if members.len() < 2 {
                return pooled_var.max(VARIANCE_FLOOR);
            }
            let v = members.iter().map(|x| (x - centers[c]).powi(2)).sum::<f64>() / members.len() as f64;
            v.max(VARIANCE_FLOOR)
        })
        .collect();
    let mut model = HmmModel {
        route_index,
        route_id: route_id.to_string(),
        price_scale,
        initial: vec![1.0 / k as f64; k],
        transition: vec![vec![1.0 / k as f64; k]; k],
        means: centers,
        variances,
    };

    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..params.max_iter.max(1) {
        let posts: Vec<Posterior> = sequences
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| model.posterior(s))
            .collect();
        let ll: f64 = posts.iter().map(|p| p.loglik).sum();
        if let Some(&prev) = trace.last() {
            if ll - prev < params.tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        model = m_step(&model, sequences, &posts);
    }
    if !converged {
        trace.push(sequences.iter().map(|s| model.log_likelihood(s)).sum());
    }
    Ok(HmmFit {
        model,
        loglik_trace: trace,
        converged,
        degenerate: false,
    })
}

fn m_step(old: &HmmModel, sequences: &[Vec<f64>], posts: &[Posterior]) -> HmmModel {
    let k = old.n_states();
    let mut initial = vec![0.0; k];
    let mut trans = vec![vec![0.0; k]; k];
    let mut weight = vec![0.0; k];
    let mut first = vec![0.0; k];
    let mut second = vec![0.0; k];
    for (obs, p) in sequences.iter().filter(|s| !s.is_empty()).zip(posts) {
        for i in 0..k {
            initial[i] += p.gamma[0][i];
            for (t, x) in trans[i].iter_mut().zip(&p.xi[i]) {
                *t += x;
            }
        }
        for (g, &x) in p.gamma.iter().zip(obs) {
            for i in 0..k {
                weight[i] += g[i];
                first[i] += g[i] * x;
            }
        }
    }
    let means: Vec<f64> = (0..k)
        .map(|i| if weight[i] > 0.0 { first[i] / weight[i] } else { old.means[i] })
        .collect();
    for (obs, p) in sequences.iter().filter(|s| !s.is_empty()).zip(posts) {
        for (g, &x) in p.gamma.iter().zip(obs) {
            for i in 0..k {
                second[i] += g[i] * (x - means[i]).powi(2);
            }
        }
    }
    let z: f64 = initial.iter().sum();
    initial.iter_mut().for_each(|v| *v /= z);
    for (i, row) in trans.iter_mut().enumerate() {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.clone_from(&old.transition[i]);
        }
    }
    let variances = (0..k)
        .map(|i| if weight[i] > 0.0 { (second[i] / weight[i]).max(VARIANCE_FLOOR) } else { old.variances[i] })
        .collect();
    HmmModel {
        initial,
        transition: trans,
        means,
        variances,
        ..old.clone()
    }
}

fn route_mean(series: &[&PriceSeries]) -> f64 {
    let (sum, count) = series
        .iter()
        .flat_map(|s| s.prices())
        .fold((0i64, 0usize), |(s, c), p| (s + p.milli(), c + 1));
    sum as f64 / count as f64 / 1000.0
}

/// Eight route templates, one per dummy position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmBank {
    pub params: HmmParams,
    pub models: Vec<HmmModel>,
}

impl HmmBank {
    /// Fits every route's template on its training series, normalized by
    /// the route's training-mean price.
    pub fn train(train: &[PriceSeries], routes: &RouteIndex, params: HmmParams) -> Result<Self> {
        let fits: Vec<HmmFit> = routes
            .routes()
            .par_iter()
            .enumerate()
            .map(|(idx, route)| {
                let series: Vec<&PriceSeries> = train.iter().filter(|s| s.route_id() == route).collect();
                if series.is_empty() {
                    return Err(Error::InvalidConfig(format!("no training series for route {route}")));
                }
                let scale = route_mean(&series);
                let seqs: Vec<Vec<f64>> = series
                    .iter()
                    .map(|s| s.prices().map(|p| p.as_f64() / scale).collect())
                    .collect();
                hmm_fit(&seqs, params, idx, route, scale)
            })
            .collect::<Result<_>>()?;
        Ok(HmmBank {
            params,
            models: fits.into_iter().map(|f| f.model).collect(),
        })
    }

    /// Writes one JSON document per template into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for m in &self.models {
            let path = dir.join(format!("template_{}.json", m.route_index));
            serde_json::to_writer_pretty(std::io::BufWriter::new(std::fs::File::create(path)?), m)?;
        }
        std::fs::write(dir.join("params.json"), serde_json::to_string_pretty(&self.params)?)?;
        Ok(())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let params = match std::fs::read_to_string(dir.join("params.json")) {
            Ok(s) => serde_json::from_str(&s)?,
            Err(_) => HmmParams::default(),
        };
        let mut models = Vec::new();
        for i in 0..NUM_ROUTES {
            let path = dir.join(format!("template_{i}.json"));
            if !path.exists() {
                break;
            }
            let m: HmmModel = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
            m.validate()?;
            models.push(m);
        }
        if models.is_empty() {
            return Err(Error::InvalidConfig(format!("no templates in {}", dir.display())));
        }
        Ok(HmmBank { params, models })
    }
}

/// Maximum-likelihood template; ties go to the lowest index.
pub fn classify_sequence(bank: &[HmmModel], obs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_ll = f64::NEG_INFINITY;
    for (i, m) in bank.iter().enumerate() {
        let ll = m.log_likelihood(obs);
        if ll > best_ll {
            best = i;
            best_ll = ll;
        }
    }
    best
}

/// A generalized series' observations up to one cutoff, normalized by the
/// running route mean at that cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceSequence {
    pub key: SeriesKey,
    pub first_observed_date: NaiveDate,
    pub cutoff_query_date: NaiveDate,
    pub observations: Vec<f64>,
}

/// Mean of every quote of a route observed on or before a date.
struct RunningMean {
    dates: Vec<NaiveDate>,
    /// Cumulative (sum in milli-EUR, count) through each date.
    totals: Vec<(i64, usize)>,
}

impl RunningMean {
    fn new<'a>(series: impl IntoIterator<Item = &'a PriceSeries>) -> Self {
        let mut by_date: BTreeMap<NaiveDate, (i64, usize)> = BTreeMap::new();
        for s in series {
            for q in s.quotes() {
                let e = by_date.entry(q.query_date).or_default();
                e.0 += q.price.milli();
                e.1 += 1;
            }
        }
        let mut acc = (0, 0);
        let (dates, totals) = by_date
            .into_iter()
            .map(|(d, (s, c))| {
                acc = (acc.0 + s, acc.1 + c);
                (d, acc)
            })
            .unzip();
        RunningMean { dates, totals }
    }

    fn at(&self, date: NaiveDate) -> f64 {
        let i = self.dates.partition_point(|d| *d <= date);
        let (sum, count) = self.totals[i.max(1) - 1];
        sum as f64 / count as f64 / 1000.0
    }
}

fn equivalence(s: &PriceSeries, upto: usize, mean: &RunningMean) -> EquivalenceSequence {
    let cutoff = s.quotes()[upto].query_date;
    let scale = mean.at(cutoff);
    EquivalenceSequence {
        key: s.key().clone(),
        first_observed_date: s.first_query_date(),
        cutoff_query_date: cutoff,
        observations: s.quotes()[..=upto].iter().map(|q| q.price.as_f64() / scale).collect(),
    }
}

/// Every row's equivalence sequence for the series of one generalized route.
pub fn equivalence_sequences(route_series: &[PriceSeries]) -> Vec<Vec<EquivalenceSequence>> {
    let mean = RunningMean::new(route_series);
    route_series
        .iter()
        .map(|s| (0..s.len()).map(|t| equivalence(s, t, &mean)).collect())
        .collect()
}

/// When the template is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateMode {
    /// Re-classified at every row from the observations up to that row.
    #[default]
    PerRow,
    /// Classified once from the whole series. Looks ahead; comparison only.
    PerSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedDecision {
    pub decision: PurchaseDecision,
    /// Template chosen for each row.
    pub templates: Vec<usize>,
}

/// Classifies each row to a template, sets its dummies, and lets the frozen
/// classifier decide.
pub fn generalized_predict(
    bank: &HmmBank,
    frozen: &TrainedModel,
    gen_series: &[PriceSeries],
    ctx: &FeatureContext,
    mode: TemplateMode,
) -> Result<Vec<GeneralizedDecision>> {
    if frozen.task() != crate::learners::Task::Classification {
        return Err(Error::IncompatibleSpec("the frozen model must be a classifier".into()));
    }
    let mut by_route: BTreeMap<&str, Vec<&PriceSeries>> = BTreeMap::new();
    for s in gen_series {
        by_route.entry(s.route_id()).or_default().push(s);
    }
    let means: BTreeMap<&str, RunningMean> = by_route
        .iter()
        .map(|(r, ss)| (*r, RunningMean::new(ss.iter().copied())))
        .collect();

    gen_series
        .par_iter()
        .map(|s| {
            let mean = &means[s.route_id()];
            let templates: Vec<usize> = match mode {
                TemplateMode::PerRow => (0..s.len())
                    .map(|t| classify_sequence(&bank.models, &equivalence(s, t, mean).observations))
                    .collect(),
                TemplateMode::PerSeries => {
                    let idx = classify_sequence(&bank.models, &equivalence(s, s.len() - 1, mean).observations);
                    vec![idx; s.len()]
                }
            };
            let mut rows = extract_rows(s, None, ctx)?;
            for (row, &t) in rows.iter_mut().zip(&templates) {
                row.set_route(bank.models[t].route_index);
            }
            let pred = frozen.predict(&feature_matrix(&rows))?;
            let labels = pred.labels().expect("classifier");
            Ok(GeneralizedDecision {
                decision: decide_classification(s, labels)?,
                templates,
            })
        })
        .collect()
}

/// The uniform-blending alternative: every member votes with its own route's
/// dummies, whatever the row carried.
pub fn generalized_blend(blend: &TrainedModel, gen_series: &[PriceSeries], ctx: &FeatureContext) -> Result<Vec<PurchaseDecision>> {
    if blend.blend_members().is_none() || blend.task() != crate::learners::Task::Classification {
        return Err(Error::IncompatibleSpec("expected a uniform_blend classifier".into()));
    }
    gen_series
        .par_iter()
        .map(|s| {
            let rows = extract_rows(s, None, ctx)?;
            let pred = blend.predict(&feature_matrix(&rows))?;
            decide_classification(s, pred.labels().expect("classifier"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state() -> HmmModel {
        HmmModel::new(
            0,
            "R1",
            1.0,
            vec![0.6, 0.4],
            vec![vec![0.7, 0.3], vec![0.2, 0.8]],
            vec![0.0, 2.0],
            vec![1.0, 0.5],
        )
        .unwrap()
    }

    /// Sum over every state path, in plain probability space.
    fn brute_force(m: &HmmModel, obs: &[f64]) -> f64 {
        let k = m.n_states();
        let paths = k.pow(obs.len() as u32);
        let mut total = 0.0;
        for code in 0..paths {
            let mut c = code;
            let mut p = 1.0;
            let mut prev = 0;
            for (t, &x) in obs.iter().enumerate() {
                let s = c % k;
                c /= k;
                p *= if t == 0 { m.initial[s] } else { m.transition[prev][s] };
                p *= ln_gauss(x, m.means[s], m.variances[s]).exp();
                prev = s;
            }
            total += p;
        }
        total.ln()
    }

    #[test]
    fn single_state_log_density() {
        let m = HmmModel::new(0, "R1", 1.0, vec![1.0], vec![vec![1.0]], vec![0.0], vec![1.0]).unwrap();
        assert!((m.log_likelihood(&[0.0]) + 0.5 * (2.0 * PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn forward_matches_path_enumeration() {
        let m = two_state();
        let obs = [0.3, 1.9, -0.4];
        assert!((m.log_likelihood(&obs) - brute_force(&m, &obs)).abs() < 1e-9);
    }

    #[test]
    fn long_sequences_do_not_underflow() {
        let m = two_state();
        let obs: Vec<f64> = (0..200).map(|i| if i % 7 < 3 { 40.0 } else { -30.0 }).collect();
        assert!(m.log_likelihood(&obs).is_finite());
    }

    #[test]
    fn baum_welch_recovers_separated_states() {
        let gen = HmmModel::new(
            0,
            "R1",
            1.0,
            vec![0.5, 0.5],
            vec![vec![0.95, 0.05], vec![0.05, 0.95]],
            vec![0.0, 10.0],
            vec![0.01, 0.01],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let seqs: Vec<Vec<f64>> = (0..20).map(|_| gen.sample(50, &mut rng)).collect();
        let fit = hmm_fit(&seqs, HmmParams { n_states: 2, ..HmmParams::default() }, 0, "R1", 1.0).unwrap();
        let mut means = fit.model.means.clone();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(means[0].abs() < 0.5 && (means[1] - 10.0).abs() < 0.5, "{means:?}");
        assert!(fit.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-8));
        let again = hmm_fit(&seqs, HmmParams { n_states: 2, ..HmmParams::default() }, 0, "R1", 1.0).unwrap();
        assert_eq!(fit, again);
    }

    #[test]
    fn constant_route_is_degenerate() {
        let fit = hmm_fit(&[vec![0.8; 10], vec![0.8; 5]], HmmParams::default(), 2, "R3", 1.0).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.model.n_states(), 1);
        assert_eq!(fit.model.means[0], 0.8);
    }

    #[test]
    fn identical_bank_ties_to_first() {
        let bank = vec![two_state(); 8];
        assert_eq!(classify_sequence(&bank, &[0.1, 0.2]), 0);
    }
}
