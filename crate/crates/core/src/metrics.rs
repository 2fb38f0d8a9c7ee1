//! Benchmark prices, per-route performance and cross-route aggregation.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Price, PriceSeries, SeriesKey};
use crate::policy::PurchaseDecision;
use crate::seed::derive_seed;

/// Expected price of buying on a uniformly random quoted day.
pub fn random_purchase_price(s: &PriceSeries) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySeries);
    }
    let total: i64 = s.prices().map(Price::milli).sum();
    Ok(total as f64 / s.len() as f64 / 1000.0)
}

/// Sampled variant: mean price over `draws` uniformly random purchase days.
pub fn simulate_random_price(s: &PriceSeries, draws: usize, rng: &mut impl Rng) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySeries);
    }
    let draws = draws.max(1);
    let total: i64 = (0..draws)
        .map(|_| s.quotes()[rng.random_range(0..s.len())].price.milli())
        .sum();
    Ok(total as f64 / draws as f64 / 1000.0)
}

pub fn optimal_price(s: &PriceSeries) -> Result<Price> {
    s.prices().min().ok_or(Error::EmptySeries)
}

/// How the random-purchase benchmark is computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RandomBenchmark {
    #[default]
    Expectation,
    Simulated { draws: usize, seed: u64 },
}

impl RandomBenchmark {
    fn price(self, s: &PriceSeries) -> Result<f64> {
        match self {
            RandomBenchmark::Expectation => random_purchase_price(s),
            RandomBenchmark::Simulated { draws, seed } => {
                let key = s.key().to_string();
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["random", &key]));
                simulate_random_price(s, draws, &mut rng)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestMetrics {
    pub route_id: String,
    pub series: usize,
    pub forced_buys: usize,
    pub random_purchase_price: f64,
    pub optimal_price: f64,
    pub predicted_price: f64,
    pub performance_pct: f64,
    pub optimal_performance_pct: f64,
    /// `None` when the route's prices are constant and the policy missed
    /// the optimum, which leaves the ratio undefined.
    pub normalized_performance_pct: Option<f64>,
}

impl BacktestMetrics {
    /// Applies the performance formulas to route-level prices.
    pub fn from_prices(route_id: &str, random: f64, optimal: f64, predicted: f64) -> Self {
        let performance = (random - predicted) / random * 100.0;
        let optimal_perf = (random - optimal) / random * 100.0;
        let normalized = if optimal_perf != 0.0 {
            Some(performance / optimal_perf * 100.0)
        } else if predicted == optimal {
            Some(100.0)
        } else {
            None
        };
        BacktestMetrics {
            route_id: route_id.to_string(),
            series: 0,
            forced_buys: 0,
            random_purchase_price: random,
            optimal_price: optimal,
            predicted_price: predicted,
            performance_pct: performance,
            optimal_performance_pct: optimal_perf,
            normalized_performance_pct: normalized,
        }
    }

    pub fn normalized_undefined(&self) -> bool {
        self.normalized_performance_pct.is_none()
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

/// Route-level metrics: prices are averaged over the route's series first.
pub fn route_metrics(
    route_id: &str,
    decisions: &[PurchaseDecision],
    series: &BTreeMap<SeriesKey, &PriceSeries>,
    benchmark: RandomBenchmark,
) -> Result<BacktestMetrics> {
    if decisions.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut random = Vec::with_capacity(decisions.len());
    let mut optimal = Vec::with_capacity(decisions.len());
    for d in decisions {
        let s = series
            .get(&d.key)
            .ok_or_else(|| Error::InvalidConfig(format!("no series for decision {}", d.key)))?;
        random.push(benchmark.price(s)?);
        optimal.push(optimal_price(s)?.as_f64());
    }
    let predicted = mean(decisions.iter().map(|d| d.paid_price.as_f64()));
    let mut m = BacktestMetrics::from_prices(
        route_id,
        mean(random.into_iter()),
        mean(optimal.into_iter()),
        predicted,
    );
    m.series = decisions.len();
    m.forced_buys = decisions.iter().filter(|d| d.forced).count();
    Ok(m)
}

/// Groups decisions by route (sorted by route id) and scores each route.
pub fn evaluate(
    decisions: &[PurchaseDecision],
    series: &[PriceSeries],
    benchmark: RandomBenchmark,
) -> Result<Vec<BacktestMetrics>> {
    let by_key: BTreeMap<SeriesKey, &PriceSeries> = series.iter().map(|s| (s.key().clone(), s)).collect();
    let mut by_route: BTreeMap<&str, Vec<PurchaseDecision>> = BTreeMap::new();
    for d in decisions {
        by_route.entry(d.key.route_id.as_str()).or_default().push(d.clone());
    }
    by_route
        .into_iter()
        .map(|(route, mut ds)| {
            ds.sort_by(|a, b| a.key.cmp(&b.key));
            route_metrics(route, &ds, &by_key, benchmark)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_performance: f64,
    /// Population variance.
    pub variance: f64,
    pub routes: usize,
    /// Routes left out because their normalized performance is undefined.
    pub undefined_routes: usize,
}

/// Mean and population variance of normalized performance across routes.
pub fn aggregate(per_route: &[BacktestMetrics]) -> Aggregate {
    let values: Vec<f64> = per_route.iter().filter_map(|m| m.normalized_performance_pct).collect();
    let n = values.len();
    let (mean_performance, variance) = if n == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let m = values.iter().sum::<f64>() / n as f64;
        (m, values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64)
    };
    Aggregate {
        mean_performance,
        variance,
        routes: n,
        undefined_routes: per_route.len() - n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Quote;
    use chrono::NaiveDate;

    fn series(prices: &[f64]) -> PriceSeries {
        let dep = NaiveDate::from_ymd_opt(2016, 2, 1).unwrap();
        let quotes = prices
            .iter()
            .enumerate()
            .map(|(i, &p)| Quote::new("R1", dep, dep - chrono::Days::new(30 - i as u64), Price::from_f64(p)))
            .collect();
        PriceSeries::from_quotes(quotes).unwrap()
    }

    #[test]
    fn benchmark_prices() {
        let s = series(&[50.0, 40.0, 40.0, 60.0]);
        assert_eq!(random_purchase_price(&s).unwrap(), 47.5);
        assert_eq!(optimal_price(&s).unwrap(), Price::from_f64(40.0));
        assert_eq!(random_purchase_price(&series(&[30.0])).unwrap(), 30.0);
        assert_eq!(random_purchase_price(&series(&[20.0; 3])).unwrap(), 20.0);
    }

    #[test]
    fn simulated_random_converges() {
        let s = series(&[50.0, 40.0, 40.0, 60.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = simulate_random_price(&s, 200_000, &mut rng).unwrap();
        assert!((v - 47.5).abs() < 0.1);
    }

    #[test]
    fn performance_formulas() {
        let m = BacktestMetrics::from_prices("R1", 47.5, 40.0, 40.0);
        assert!((m.performance_pct - 15.789_473_684).abs() < 1e-6);
        assert!((m.normalized_performance_pct.unwrap() - 100.0).abs() < 1e-12);

        let m = BacktestMetrics::from_prices("R1", 47.5, 40.0, 47.5);
        assert_eq!(m.performance_pct, 0.0);
        assert_eq!(m.normalized_performance_pct, Some(0.0));

        let m = BacktestMetrics::from_prices("R1", 47.5, 40.0, 44.0);
        assert!((m.normalized_performance_pct.unwrap() - 46.666_666_667).abs() < 1e-6);
    }

    #[test]
    fn constant_route_normalization() {
        assert_eq!(BacktestMetrics::from_prices("R1", 20.0, 20.0, 20.0).normalized_performance_pct, Some(100.0));
        assert!(BacktestMetrics::from_prices("R1", 20.0, 20.0, 25.0).normalized_undefined());
    }

    #[test]
    fn aggregate_uses_population_variance() {
        let a = aggregate(&[
            BacktestMetrics::from_prices("R1", 100.0, 50.0, 80.0),
            BacktestMetrics::from_prices("R2", 100.0, 50.0, 70.0),
        ]);
        assert!((a.mean_performance - 50.0).abs() < 1e-12);
        assert!((a.variance - 100.0).abs() < 1e-9);
        let flat = aggregate(&vec![BacktestMetrics::from_prices("R1", 100.0, 50.0, 75.0); 8]);
        assert_eq!((flat.mean_performance, flat.variance), (50.0, 0.0));
    }
}
