//! Turning per-row predictions into one purchase per series.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Price, PriceSeries, SeriesKey};

/// Purchases are never planned later than this many days before departure.
pub const LAST_BUY_DAYS: i64 = 7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurchaseDecision {
    pub key: SeriesKey,
    pub buy_query_date: NaiveDate,
    pub paid_price: Price,
    /// Set when no buy signal fired and the fallback chose the day.
    pub forced: bool,
}

impl PurchaseDecision {
    fn at(s: &PriceSeries, i: usize, forced: bool) -> Self {
        let q = &s.quotes()[i];
        PurchaseDecision {
            key: s.key().clone(),
            buy_query_date: q.query_date,
            paid_price: q.price,
            forced,
        }
    }
}

/// Latest quote at least a week out, or the earliest quote if there is none.
pub fn fallback_index(s: &PriceSeries) -> usize {
    s.quotes()
        .iter()
        .rposition(|q| q.days_to_departure() >= LAST_BUY_DAYS)
        .unwrap_or(0)
}

fn check(s: &PriceSeries, n: usize) -> Result<()> {
    if s.is_empty() {
        return Err(Error::EmptySeries);
    }
    if n != s.len() {
        return Err(Error::Misaligned {
            expected: s.len(),
            got: n,
        });
    }
    Ok(())
}

/// Buys at the first quote priced strictly below its predicted series
/// minimum, while at least a week remains.
pub fn decide_regression(s: &PriceSeries, predicted_min: &[f64]) -> Result<PurchaseDecision> {
    check(s, predicted_min.len())?;
    let hit = s
        .quotes()
        .iter()
        .zip(predicted_min)
        .position(|(q, &p)| q.price.as_f64() < p && q.days_to_departure() >= LAST_BUY_DAYS);
    Ok(match hit {
        Some(i) => PurchaseDecision::at(s, i, false),
        None => PurchaseDecision::at(s, fallback_index(s), true),
    })
}

/// Buys at the earliest quote predicted as buy.
pub fn decide_classification(s: &PriceSeries, predicted_class: &[u8]) -> Result<PurchaseDecision> {
    check(s, predicted_class.len())?;
    Ok(match predicted_class.iter().position(|&c| c == 1) {
        Some(i) => PurchaseDecision::at(s, i, false),
        None => PurchaseDecision::at(s, fallback_index(s), true),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Quote;

    fn series(prices: &[f64], last_d2d: i64) -> PriceSeries {
        let dep = NaiveDate::from_ymd_opt(2016, 2, 1).unwrap();
        let n = prices.len() as i64;
        let quotes = prices
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let d2d = last_d2d + n - 1 - i as i64;
                Quote::new("R1", dep, dep - chrono::Days::new(d2d as u64), Price::from_f64(p))
            })
            .collect();
        PriceSeries::from_quotes(quotes).unwrap()
    }

    #[test]
    fn regression_buys_at_first_strict_crossing() {
        let s = series(&[50.0, 48.0, 43.0, 44.0], 20);
        let d = decide_regression(&s, &[45.0; 4]).unwrap();
        assert_eq!(d.paid_price, Price::from_f64(43.0));
        assert_eq!(d.buy_query_date, s.quotes()[2].query_date);
        assert!(!d.forced);
    }

    #[test]
    fn regression_falls_back_to_a_week_out() {
        let prices: Vec<f64> = (0..31).map(|i| 100.0 + f64::from(i)).collect();
        let s = series(&prices, 0);
        let d = decide_regression(&s, &[10.0; 31]).unwrap();
        assert!(d.forced);
        assert_eq!((s.departure_date() - d.buy_query_date).num_days(), 7);
    }

    #[test]
    fn regression_ignores_crossings_inside_the_last_week() {
        let s = series(&[50.0, 50.0, 10.0], 5);
        let d = decide_regression(&s, &[20.0; 3]).unwrap();
        assert!(d.forced);
        assert_eq!(d.buy_query_date, s.quotes()[0].query_date);
    }

    #[test]
    fn short_series_buys_earliest() {
        let s = series(&[30.0], 3);
        let d = decide_regression(&s, &[10.0]).unwrap();
        assert!(d.forced);
        assert_eq!(d.paid_price, Price::from_f64(30.0));
    }

    #[test]
    fn classification_buys_earliest_positive() {
        let s = series(&[50.0, 48.0, 43.0, 44.0, 60.0], 10);
        let d = decide_classification(&s, &[0, 0, 1, 1, 0]).unwrap();
        assert_eq!(d.paid_price, Price::from_f64(43.0));
        let all_wait = decide_classification(&s, &[0; 5]).unwrap();
        assert!(all_wait.forced);
        assert_eq!((s.departure_date() - all_wait.buy_query_date).num_days(), 10);
    }

    #[test]
    fn oracle_labels_attain_minimum() {
        let s = series(&[50.0, 40.0, 40.0, 60.0], 10);
        let d = decide_classification(&s, &[0, 1, 1, 0]).unwrap();
        assert_eq!(d.buy_query_date, s.quotes()[1].query_date);
        assert_eq!(d.paid_price, s.min_price());
    }

    #[test]
    fn misaligned_predictions_are_rejected() {
        let s = series(&[50.0, 40.0], 10);
        assert!(matches!(decide_classification(&s, &[0]), Err(Error::Misaligned { .. })));
    }
}
