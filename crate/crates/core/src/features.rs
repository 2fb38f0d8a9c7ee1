//! Feature extraction and labelling for price series.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{one_hot, Dataset, DatasetRole, FeatureRow, PriceSeries, NUM_ROUTES};

/// Corpus-level reference for the query-to-departure feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureContext {
    pub corpus_first_query: NaiveDate,
}

impl FeatureContext {
    pub fn from_series<'a>(series: impl IntoIterator<Item = &'a PriceSeries>) -> Result<Self> {
        let corpus_first_query = series
            .into_iter()
            .map(PriceSeries::first_query_date)
            .min()
            .ok_or(Error::EmptyDataset)?;
        Ok(FeatureContext { corpus_first_query })
    }
}

/// Maps specific route ids onto dummy positions, in sorted id order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteIndex {
    routes: Vec<String>,
}

impl RouteIndex {
    pub fn from_series<'a>(series: impl IntoIterator<Item = &'a PriceSeries>) -> Result<Self> {
        let mut routes: Vec<String> = series.into_iter().map(|s| s.route_id().to_string()).collect();
        routes.sort();
        routes.dedup();
        Self::new(routes)
    }

    pub fn new(routes: Vec<String>) -> Result<Self> {
        if routes.is_empty() || routes.len() > NUM_ROUTES {
            return Err(Error::InvalidConfig(format!(
                "expected 1..={NUM_ROUTES} specific routes, found {}",
                routes.len()
            )));
        }
        Ok(RouteIndex { routes })
    }

    pub fn index_of(&self, route_id: &str) -> Option<usize> {
        self.routes.iter().position(|r| r == route_id)
    }

    pub fn route(&self, index: usize) -> Option<&str> {
        self.routes.get(index).map(String::as_str)
    }

    pub fn routes(&self) -> &[String] {
        &self.routes
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }
}

/// One feature row per quote. Labels are left at placeholder values until
/// [`label_rows`] runs; dummies stay zero when `route_index` is `None`.
pub fn extract_rows(
    s: &PriceSeries,
    route_index: Option<usize>,
    ctx: &FeatureContext,
) -> Result<Vec<FeatureRow>> {
    let first = s.quotes().first().ok_or(Error::EmptySeries)?;
    let dummies = route_index.map(one_hot).unwrap_or([0; NUM_ROUTES]);
    let query_to_departure = (s.departure_date() - ctx.corpus_first_query).num_days();

    let mut running_min = first.price;
    let mut running_max = first.price;
    Ok(s.quotes()
        .iter()
        .map(|q| {
            running_min = running_min.min(q.price);
            running_max = running_max.max(q.price);
            FeatureRow {
                key: s.key().clone(),
                query_date: q.query_date,
                flight_dummies: dummies,
                min_price_so_far: running_min,
                max_price_so_far: running_max,
                query_to_departure,
                days_to_departure: q.days_to_departure(),
                current_price: q.price,
                label_class: 0,
                label_reg: q.price,
            }
        })
        .collect())
}

/// Sets the regression label to the whole-series minimum and marks every row
/// attaining it as buy.
pub fn label_rows(mut rows: Vec<FeatureRow>, s: &PriceSeries) -> Vec<FeatureRow> {
    let min = s.min_price();
    for row in &mut rows {
        row.label_reg = min;
        row.label_class = u8::from(row.current_price == min);
    }
    rows
}

/// Extracts and labels every series; dummies come from `routes` when given.
pub fn build_dataset(
    series: &[PriceSeries],
    routes: Option<&RouteIndex>,
    ctx: &FeatureContext,
    role: DatasetRole,
) -> Result<Dataset> {
    let mut rows = Vec::new();
    for s in series {
        let idx = match routes {
            Some(r) => Some(r.index_of(s.route_id()).ok_or_else(|| {
                Error::InvalidConfig(format!("route {} is not a specific route", s.route_id()))
            })?),
            None => None,
        };
        rows.extend(label_rows(extract_rows(s, idx, ctx)?, s));
    }
    Ok(Dataset::new(rows, role))
}

/// Per-series row ranges, keyed by series, in dataset order.
pub fn series_ranges(rows: &[FeatureRow]) -> BTreeMap<crate::model::SeriesKey, std::ops::Range<usize>> {
    let mut out: BTreeMap<_, std::ops::Range<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        out.entry(r.key.clone())
            .and_modify(|range| range.end = i + 1)
            .or_insert(i..i + 1);
    }
    out
}

/// Writes rows as CSV in field order, dummies expanded to `f1..f8`.
pub fn write_features_csv<W: Write>(sink: W, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["route_id".to_string(), "departure_date".into(), "query_date".into()];
    header.extend((1..=NUM_ROUTES).map(|i| format!("f{i}")));
    header.extend(
        [
            "min_price_so_far",
            "max_price_so_far",
            "query_to_departure",
            "days_to_departure",
            "current_price",
            "label_class",
            "label_reg",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.key.route_id.clone(),
            r.key.departure_date.to_string(),
            r.query_date.to_string(),
        ];
        rec.extend(r.flight_dummies.iter().map(u8::to_string));
        rec.extend([
            r.min_price_so_far.to_string(),
            r.max_price_so_far.to_string(),
            r.query_to_departure.to_string(),
            r.days_to_departure.to_string(),
            r.current_price.to_string(),
            r.label_class.to_string(),
            r.label_reg.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Price, Quote};
    use chrono::Duration;

    fn series(dep: NaiveDate, start: NaiveDate, prices: &[i64]) -> PriceSeries {
        PriceSeries::from_quotes(
            prices
                .iter()
                .enumerate()
                .map(|(i, &p)| Quote::new("R1", dep, start + Duration::days(i as i64), Price::from_milli(p * 1000)))
                .collect(),
        )
        .unwrap()
    }

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn running_extrema() {
        let start = date("2015-11-09");
        let s = series(start + Duration::days(30), start, &[50, 40, 45]);
        let ctx = FeatureContext { corpus_first_query: start };
        let rows = extract_rows(&s, Some(0), &ctx).unwrap();
        let mins: Vec<i64> = rows.iter().map(|r| r.min_price_so_far.milli() / 1000).collect();
        let maxs: Vec<i64> = rows.iter().map(|r| r.max_price_so_far.milli() / 1000).collect();
        assert_eq!(mins, vec![50, 40, 40]);
        assert_eq!(maxs, vec![50, 50, 50]);
        assert!(rows.iter().all(|r| r.flight_dummies.iter().map(|&d| u32::from(d)).sum::<u32>() == 1));
    }

    #[test]
    fn date_features() {
        let start = date("2015-11-09");
        let dep = start + Duration::days(30);
        let s = series(dep, start + Duration::days(28), &[10]);
        let ctx = FeatureContext { corpus_first_query: start };
        let row = &extract_rows(&s, None, &ctx).unwrap()[0];
        assert_eq!(row.days_to_departure, 2);
        assert_eq!(row.query_to_departure, 30);
        assert_eq!(row.flight_dummies, [0; NUM_ROUTES]);
    }

    #[test]
    fn query_to_departure_by_calendar_enumeration() {
        // Count calendar days one at a time from 2015-11-09 up to 2016-01-13.
        let start = date("2015-11-09");
        let dep = date("2016-01-13");
        let mut day = start;
        let mut count = 0;
        while day < dep {
            day = day.succ_opt().unwrap();
            count += 1;
        }
        assert_eq!(count, 65);

        let s = series(dep, start, &[10]);
        let ctx = FeatureContext { corpus_first_query: start };
        assert_eq!(extract_rows(&s, Some(0), &ctx).unwrap()[0].query_to_departure, count);
    }

    fn labels(prices: &[i64]) -> (Vec<u8>, Vec<i64>) {
        let start = date("2015-11-09");
        let s = series(start + Duration::days(100), start, prices);
        let ctx = FeatureContext { corpus_first_query: start };
        let rows = label_rows(extract_rows(&s, Some(0), &ctx).unwrap(), &s);
        (
            rows.iter().map(|r| r.label_class).collect(),
            rows.iter().map(|r| r.label_reg.milli() / 1000).collect(),
        )
    }

    #[test]
    fn label_examples() {
        assert_eq!(labels(&[50, 40, 40, 60]), (vec![0, 1, 1, 0], vec![40; 4]));
        assert_eq!(labels(&[30]), (vec![1], vec![30]));
        assert_eq!(labels(&[10, 20, 30]).0, vec![1, 0, 0]);
    }

    #[test]
    fn route_index_sorted() {
        let idx = RouteIndex::new(vec!["R1".into(), "R2".into()]).unwrap();
        assert_eq!(idx.index_of("R2"), Some(1));
        assert!(RouteIndex::new((0..9).map(|i| format!("R{i}")).collect()).is_err());
    }
}
