//! Shared domain vocabulary: quotes, price series, feature rows and datasets.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of specific routes; also the length of the flight dummy vector.
pub const NUM_ROUTES: usize = 8;

/// Number of continuous features following the dummies in [`FeatureRow::features`].
pub const NUM_CONTINUOUS: usize = 5;

/// Total width of the feature vector.
pub const NUM_FEATURES: usize = NUM_ROUTES + NUM_CONTINUOUS;

/// A currency amount in EUR held as an exact count of thousandths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Price(i64);

impl Price {
    pub const fn from_milli(milli: i64) -> Self {
        Price(milli)
    }

    pub const fn milli(self) -> i64 {
        self.0
    }

    /// Rounds a floating amount to the nearest thousandth.
    pub fn from_f64(value: f64) -> Self {
        Price((value * 1000.0).round() as i64)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:03}", abs / 1000, abs % 1000)
    }
}

impl FromStr for Price {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, f),
            None => (body, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(format!("invalid price {s:?}"));
        }
        if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit())
        {
            return Err(format!("invalid price {s:?}"));
        }
        if frac.len() > 3 {
            return Err(format!("price {s:?} has more than 3 decimals"));
        }
        let whole: i64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| format!("price {s:?} out of range"))?
        };
        let mut milli_frac = 0i64;
        for (i, c) in frac.chars().enumerate() {
            milli_frac += (c as i64 - '0' as i64) * 10i64.pow(2 - i as u32);
        }
        let milli = whole
            .checked_mul(1000)
            .and_then(|w| w.checked_add(milli_frac))
            .ok_or_else(|| format!("price {s:?} out of range"))?;
        Ok(Price(if negative { -milli } else { milli }))
    }
}

impl Serialize for Price {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One observed fare.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quote {
    pub route_id: String,
    pub departure_date: NaiveDate,
    pub query_date: NaiveDate,
    pub price: Price,
}

impl Quote {
    pub fn new(
        route_id: impl Into<String>,
        departure_date: NaiveDate,
        query_date: NaiveDate,
        price: Price,
    ) -> Self {
        Quote {
            route_id: route_id.into(),
            departure_date,
            query_date,
            price,
        }
    }

    pub fn key(&self) -> SeriesKey {
        SeriesKey {
            route_id: self.route_id.clone(),
            departure_date: self.departure_date,
        }
    }

    pub fn days_to_departure(&self) -> i64 {
        (self.departure_date - self.query_date).num_days()
    }
}

/// Returns the quote unchanged when its invariants hold.
pub fn validate_quote(q: Quote) -> Result<Quote> {
    if q.price.milli() <= 0 {
        return Err(Error::NonPositivePrice(q.price.to_string()));
    }
    if q.query_date > q.departure_date {
        return Err(Error::QueryAfterDeparture {
            query: q.query_date,
            departure: q.departure_date,
        });
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeriesKey {
    pub route_id: String,
    pub departure_date: NaiveDate,
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.route_id, self.departure_date)
    }
}

/// All quotes of one (route, departure date), ordered by query date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    key: SeriesKey,
    quotes: Vec<Quote>,
}

impl PriceSeries {
    /// Builds a series from an unordered set of quotes sharing one key.
    pub fn from_quotes(mut quotes: Vec<Quote>) -> Result<Self> {
        let key = quotes.first().ok_or(Error::EmptySeries)?.key();
        for q in &quotes {
            if q.route_id != key.route_id || q.departure_date != key.departure_date {
                return Err(Error::MixedSeries(key.clone(), q.key()));
            }
        }
        quotes.sort_by_key(|q| q.query_date);
        for pair in quotes.windows(2) {
            if pair[0].query_date == pair[1].query_date {
                return Err(Error::DuplicateQuote {
                    key,
                    query_date: pair[0].query_date,
                });
            }
        }
        Ok(PriceSeries { key, quotes })
    }

    pub fn key(&self) -> &SeriesKey {
        &self.key
    }

    pub fn route_id(&self) -> &str {
        &self.key.route_id
    }

    pub fn departure_date(&self) -> NaiveDate {
        self.key.departure_date
    }

    pub fn first_query_date(&self) -> NaiveDate {
        self.quotes[0].query_date
    }

    pub fn quotes(&self) -> &[Quote] {
        &self.quotes
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    pub fn prices(&self) -> impl Iterator<Item = Price> + '_ {
        self.quotes.iter().map(|q| q.price)
    }

    pub fn min_price(&self) -> Price {
        self.prices().min().expect("series is non-empty")
    }
}

/// Feature vector for one query day of one series, with both labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub key: SeriesKey,
    pub query_date: NaiveDate,
    pub flight_dummies: [u8; NUM_ROUTES],
    pub min_price_so_far: Price,
    pub max_price_so_far: Price,
    pub query_to_departure: i64,
    pub days_to_departure: i64,
    pub current_price: Price,
    pub label_class: u8,
    pub label_reg: Price,
}

impl FeatureRow {
    /// Dummies first, then min/max so far, query-to-departure, days-to-departure, current price.
    pub fn features(&self) -> [f64; NUM_FEATURES] {
        let mut out = [0.0; NUM_FEATURES];
        for (slot, d) in out.iter_mut().zip(self.flight_dummies) {
            *slot = f64::from(d);
        }
        out[NUM_ROUTES..].copy_from_slice(&self.continuous());
        out
    }

    pub fn continuous(&self) -> [f64; NUM_CONTINUOUS] {
        [
            self.min_price_so_far.as_f64(),
            self.max_price_so_far.as_f64(),
            self.query_to_departure as f64,
            self.days_to_departure as f64,
            self.current_price.as_f64(),
        ]
    }

    pub fn set_route(&mut self, route_index: usize) {
        self.flight_dummies = one_hot(route_index);
    }

    pub fn route_index(&self) -> Option<usize> {
        let mut hit = None;
        for (i, &d) in self.flight_dummies.iter().enumerate() {
            if d == 1 {
                if hit.is_some() {
                    return None;
                }
                hit = Some(i);
            }
        }
        hit
    }
}

pub fn one_hot(route_index: usize) -> [u8; NUM_ROUTES] {
    assert!(route_index < NUM_ROUTES, "route index {route_index} out of range");
    let mut d = [0; NUM_ROUTES];
    d[route_index] = 1;
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    Train,
    Test,
    Generalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<FeatureRow>,
    pub role: DatasetRole,
}

impl Dataset {
    pub fn new(rows: Vec<FeatureRow>, role: DatasetRole) -> Self {
        Dataset { rows, role }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// (buy, wait) row counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let buy = self.rows.iter().filter(|r| r.label_class == 1).count();
        (buy, self.rows.len() - buy)
    }
}

/// Total order on `f64` used wherever ties must break deterministically.
pub(crate) fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn validate_quote_cases() {
        let ok = Quote::new("R1", d("2016-01-13"), d("2015-12-01"), "49.99".parse().unwrap());
        assert_eq!(validate_quote(ok.clone()).unwrap(), ok);

        let late = Quote::new("R1", d("2016-01-13"), d("2016-02-01"), "49.99".parse().unwrap());
        assert!(matches!(
            validate_quote(late),
            Err(Error::QueryAfterDeparture { .. })
        ));

        let free = Quote::new("R1", d("2016-01-13"), d("2015-12-01"), "0.00".parse().unwrap());
        assert!(matches!(validate_quote(free), Err(Error::NonPositivePrice(_))));
    }

    #[test]
    fn price_parsing() {
        assert_eq!("28.768".parse::<Price>().unwrap().milli(), 28_768);
        assert_eq!("49.99".parse::<Price>().unwrap().to_string(), "49.990");
        assert_eq!("50".parse::<Price>().unwrap().to_string(), "50.000");
        assert_eq!("-1.5".parse::<Price>().unwrap().milli(), -1500);
        assert!("1.2345".parse::<Price>().is_err());
        assert!("abc".parse::<Price>().is_err());
        assert!(".".parse::<Price>().is_err());
    }

    #[test]
    fn series_sorts_and_rejects_duplicates() {
        let q = |day: &str, p: i64| Quote::new("R1", d("2016-01-13"), d(day), Price::from_milli(p));
        let s = PriceSeries::from_quotes(vec![q("2015-12-03", 3), q("2015-12-01", 1), q("2015-12-02", 2)])
            .unwrap();
        assert_eq!(s.first_query_date(), d("2015-12-01"));
        assert_eq!(s.prices().map(Price::milli).collect::<Vec<_>>(), vec![1, 2, 3]);

        let dup = PriceSeries::from_quotes(vec![q("2015-12-01", 1), q("2015-12-01", 2)]);
        assert!(matches!(dup, Err(Error::DuplicateQuote { .. })));
        assert!(matches!(PriceSeries::from_quotes(vec![]), Err(Error::EmptySeries)));
    }

    #[test]
    fn one_hot_route_index() {
        assert_eq!(one_hot(1), [0, 1, 0, 0, 0, 0, 0, 0]);
    }
}
