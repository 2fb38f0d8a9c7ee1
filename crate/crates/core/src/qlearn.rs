//! Tabular Q-learning baseline over days-to-departure states.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Price, PriceSeries};
use crate::policy::PurchaseDecision;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QParams {
    pub episodes: usize,
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for QParams {
    fn default() -> Self {
        QParams {
            episodes: 200,
            gamma: 1.0,
            alpha: 0.1,
        }
    }
}

impl QParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig("gamma and alpha must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Q-values indexed by days to departure. `None` marks a pair never updated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub params: QParams,
    /// Prices are divided by this before becoming rewards.
    pub price_scale: f64,
    pub buy: Vec<Option<f64>>,
    pub wait: Vec<Option<f64>>,
}

impl QTable {
    fn with_states(params: QParams, price_scale: f64, states: usize) -> Self {
        QTable {
            params,
            price_scale,
            buy: vec![None; states],
            wait: vec![None; states],
        }
    }

    pub fn max_state(&self) -> usize {
        self.buy.len().saturating_sub(1)
    }

    pub fn q_buy(&self, state: i64) -> Option<f64> {
        usize::try_from(state).ok().and_then(|s| self.buy.get(s).copied().flatten())
    }

    pub fn q_wait(&self, state: i64) -> Option<f64> {
        usize::try_from(state).ok().and_then(|s| self.wait.get(s).copied().flatten())
    }

    fn reward(&self, price: Price) -> f64 {
        -price.as_f64() / self.price_scale
    }

    fn update(slot: &mut Option<f64>, alpha: f64, target: f64) {
        *slot = Some(match *slot {
            Some(q) => (1.0 - alpha) * q + alpha * target,
            None => target,
        });
    }

    /// One reverse-order pass over a series.
    fn sweep(&mut self, s: &PriceSeries) {
        let QParams { gamma, alpha, .. } = self.params;
        let quotes = s.quotes();
        let last = quotes.len() - 1;
        for i in (0..quotes.len()).rev() {
            let state = quotes[i].days_to_departure() as usize;
            let r = self.reward(quotes[i].price);
            Self::update(&mut self.buy[state], alpha, r);
            if i < last {
                let next = quotes[i + 1].days_to_departure() as usize;
                // The final quote of a series must be bought.
                let mut best = self.buy[next].expect("updated earlier in this sweep");
                if i + 1 < last {
                    if let Some(w) = self.wait[next] {
                        best = best.max(w);
                    }
                }
                Self::update(&mut self.wait[state], alpha, gamma * best);
            }
        }
    }

    /// Greedy action at a state; ties buy, unseen buys wait.
    pub fn prefers_buy(&self, state: i64) -> bool {
        match (self.q_buy(state), self.q_wait(state)) {
            (Some(b), Some(w)) => b >= w,
            (Some(_), None) => true,
            (None, _) => false,
        }
    }
}

/// Trains one table on one route's series. Each episode visits every series
/// once, in a seeded order, sweeping each from its last quote backwards.
pub fn q_train(train: &[PriceSeries], params: QParams, seed: u64) -> Result<QTable> {
    params.validate()?;
    if train.is_empty() || train.iter().any(|s| s.is_empty()) {
        return Err(Error::EmptySeries);
    }
    let count: usize = train.iter().map(|s| s.len()).sum();
    let total: i64 = train.iter().flat_map(|s| s.prices()).map(Price::milli).sum();
    let scale = total as f64 / count as f64 / 1000.0;
    let states = train
        .iter()
        .map(|s| s.quotes()[0].days_to_departure() as usize + 1)
        .max()
        .unwrap_or(1);

    let mut table = QTable::with_states(params, scale, states);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..params.episodes.max(1) {
        order.shuffle(&mut rng);
        for &k in &order {
            table.sweep(&train[k]);
        }
    }
    Ok(table)
}

/// Walks forward and buys at the first state where buying is greedy,
/// or at the final quote.
pub fn q_policy(table: &QTable, s: &PriceSeries) -> Result<PurchaseDecision> {
    let quotes = s.quotes();
    if quotes.is_empty() {
        return Err(Error::EmptySeries);
    }
    let last = quotes.len() - 1;
    let hit = quotes.iter().position(|q| table.prefers_buy(q.days_to_departure()));
    let (i, forced) = match hit {
        Some(i) => (i, false),
        None => (last, true),
    };
    Ok(PurchaseDecision {
        key: s.key().clone(),
        buy_query_date: quotes[i].query_date,
        paid_price: quotes[i].price,
        forced,
    })
}

/// One table per route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QBank {
    pub tables: BTreeMap<String, QTable>,
}

impl QBank {
    pub fn train(train: &[PriceSeries], params: QParams, seed: u64) -> Result<Self> {
        let mut by_route: BTreeMap<&str, Vec<PriceSeries>> = BTreeMap::new();
        for s in train {
            by_route.entry(s.route_id()).or_default().push(s.clone());
        }
        let tables = by_route
            .into_iter()
            .map(|(route, series)| {
                let table = q_train(&series, params, derive_seed(seed, &["qlearn", route]))?;
                Ok((route.to_string(), table))
            })
            .collect::<Result<_>>()?;
        Ok(QBank { tables })
    }

    pub fn decide(&self, s: &PriceSeries) -> Result<PurchaseDecision> {
        let table = self
            .tables
            .get(s.route_id())
            .ok_or_else(|| Error::InvalidConfig(format!("no Q-table for route {}", s.route_id())))?;
        q_policy(table, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Quote;
    use chrono::NaiveDate;

    fn series(prices: &[f64]) -> PriceSeries {
        let dep = NaiveDate::from_ymd_opt(2016, 2, 1).unwrap();
        let n = prices.len();
        let quotes = prices
            .iter()
            .enumerate()
            .map(|(i, &p)| Quote::new("R1", dep, dep - chrono::Days::new((n - 1 - i) as u64), Price::from_f64(p)))
            .collect();
        PriceSeries::from_quotes(quotes).unwrap()
    }

    #[test]
    fn three_day_example() {
        let s = series(&[30.0, 20.0, 40.0]);
        let params = QParams {
            episodes: 50,
            gamma: 1.0,
            alpha: 0.5,
        };
        let t = q_train(std::slice::from_ref(&s), params, 0).unwrap();
        let c = t.price_scale;
        assert!((t.q_buy(0).unwrap() + 40.0 / c).abs() < 1e-9);
        assert!((t.q_buy(1).unwrap() + 20.0 / c).abs() < 1e-9);
        assert!((t.q_wait(1).unwrap() + 40.0 / c).abs() < 1e-9);
        let d = q_policy(&t, &s).unwrap();
        assert_eq!(d.paid_price, Price::from_f64(20.0));
        assert!(!d.forced);
    }

    #[test]
    fn constant_prices_buy_first_day() {
        let s = series(&[25.0; 6]);
        let t = q_train(std::slice::from_ref(&s), QParams::default(), 3).unwrap();
        let d = q_policy(&t, &s).unwrap();
        assert_eq!(d.buy_query_date, s.first_query_date());
    }

    #[test]
    fn all_wait_table_forces_last_quote() {
        let s = series(&[10.0, 20.0, 30.0]);
        let mut t = QTable::with_states(QParams::default(), 1.0, 3);
        t.wait = vec![Some(0.0); 3];
        let d = q_policy(&t, &s).unwrap();
        assert!(d.forced);
        assert_eq!(d.paid_price, Price::from_f64(30.0));
        let one = series(&[12.0]);
        assert_eq!(q_policy(&t, &one).unwrap().paid_price, Price::from_f64(12.0));
    }
}
