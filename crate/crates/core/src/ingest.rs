//! Quote CSV parsing and departure-window splitting.
//!
//! The CSV schema is `route_id,departure_date,query_date,price` with a header
//! row, ISO dates and a decimal price carrying at most three fractional digits.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_quote, Price, PriceSeries, Quote, SeriesKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestMode {
    /// First bad row aborts the load.
    Strict,
    /// Bad rows are collected in [`LoadedQuotes::rejected`].
    Lenient,
}

#[derive(Debug)]
pub struct RejectedRow {
    pub line: u64,
    pub error: Error,
}

#[derive(Debug)]
pub struct LoadedQuotes {
    pub series: Vec<PriceSeries>,
    pub parsed_rows: usize,
    pub rejected: Vec<RejectedRow>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    route_id: String,
    departure_date: String,
    query_date: String,
    price: String,
}

fn parse_date(field: &str, value: &str, line: u64) -> Result<NaiveDate> {
    value.trim().parse().map_err(|e| Error::Parse {
        line,
        message: format!("{field} {value:?}: {e}"),
    })
}

fn parse_row(row: CsvRow, line: u64) -> Result<Quote> {
    let route_id = row.route_id.trim().to_string();
    if route_id.is_empty() {
        return Err(Error::Parse {
            line,
            message: "empty route_id".into(),
        });
    }
    let price: Price = row
        .price
        .parse()
        .map_err(|message| Error::Parse { line, message })?;
    let q = Quote::new(
        route_id,
        parse_date("departure_date", &row.departure_date, line)?,
        parse_date("query_date", &row.query_date, line)?,
        price,
    );
    validate_quote(q)
}

/// Reads quotes from any CSV source and groups them into series ordered by key.
pub fn read_quotes<R: Read>(source: R, mode: IngestMode) -> Result<LoadedQuotes> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let expected = ["route_id", "departure_date", "query_date", "price"];
    if headers.len() != expected.len() || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }

    let mut groups: BTreeMap<SeriesKey, BTreeMap<NaiveDate, Quote>> = BTreeMap::new();
    let mut parsed_rows = 0usize;
    let mut rejected = Vec::new();

    for record in reader.deserialize::<CsvRow>() {
        parsed_rows += 1;
        let line = parsed_rows as u64 + 1;
        let outcome = record
            .map_err(|e| Error::Parse {
                line: e.position().map_or(line, |p| p.line()),
                message: e.to_string(),
            })
            .and_then(|row| parse_row(row, line))
            .and_then(|q| {
                use std::collections::btree_map::Entry;
                match groups.entry(q.key()).or_default().entry(q.query_date) {
                    Entry::Occupied(_) => Err(Error::DuplicateQuote {
                        key: q.key(),
                        query_date: q.query_date,
                    }),
                    Entry::Vacant(v) => {
                        v.insert(q);
                        Ok(())
                    }
                }
            });
        if let Err(error) = outcome {
            match mode {
                IngestMode::Strict => return Err(error),
                IngestMode::Lenient => rejected.push(RejectedRow { line, error }),
            }
        }
    }

    let series = groups
        .into_values()
        .map(|quotes| PriceSeries::from_quotes(quotes.into_values().collect()))
        .collect::<Result<Vec<_>>>()?;

    Ok(LoadedQuotes {
        series,
        parsed_rows,
        rejected,
    })
}

/// Loads a quote file strictly: any malformed, invalid or duplicated row is an error.
pub fn load_quotes(path: impl AsRef<Path>) -> Result<Vec<PriceSeries>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    Ok(read_quotes(std::io::BufReader::new(file), IngestMode::Strict)?.series)
}

/// Groups in-memory quotes into series ordered by key.
pub fn group_series(quotes: impl IntoIterator<Item = Quote>) -> Result<Vec<PriceSeries>> {
    let mut groups: BTreeMap<SeriesKey, Vec<Quote>> = BTreeMap::new();
    for q in quotes {
        groups.entry(q.key()).or_default().push(q);
    }
    groups.into_values().map(PriceSeries::from_quotes).collect()
}

/// Writes quotes in the ingest schema.
pub fn write_quotes<'a, W: Write>(sink: W, quotes: impl IntoIterator<Item = &'a Quote>) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["route_id", "departure_date", "query_date", "price"])?;
    for q in quotes {
        writer.write_record([
            q.route_id.as_str(),
            &q.departure_date.to_string(),
            &q.query_date.to_string(),
            &q.price.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Departure-date windows for the train and test sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
        SplitConfig {
            train_start: d(2015, 11, 9),
            train_end: d(2016, 1, 15),
            test_start: d(2016, 1, 16),
            test_end: d(2016, 2, 20),
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_start > self.train_end || self.test_start > self.test_end {
            return Err(Error::InvalidConfig("split window is empty".into()));
        }
        if self.train_end >= self.test_start {
            return Err(Error::InvalidConfig(
                "train window must end before the test window starts".into(),
            ));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: SplitConfig = serde_json::from_reader(std::fs::File::open(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn in_train(&self, departure: NaiveDate) -> bool {
        (self.train_start..=self.train_end).contains(&departure)
    }

    pub fn in_test(&self, departure: NaiveDate) -> bool {
        (self.test_start..=self.test_end).contains(&departure)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Split {
    pub train: Vec<PriceSeries>,
    pub test: Vec<PriceSeries>,
    pub dropped: usize,
}

/// Assigns whole series to train or test by departure date.
pub fn split(series: Vec<PriceSeries>, cfg: &SplitConfig) -> Result<Split> {
    cfg.validate()?;
    let mut out = Split::default();
    for s in series {
        if cfg.in_train(s.departure_date()) {
            out.train.push(s);
        } else if cfg.in_test(s.departure_date()) {
            out.test.push(s);
        } else {
            out.dropped += 1;
        }
    }
    if out.dropped > 0 {
        warn!("{} series fall outside both split windows and were dropped", out.dropped);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "route_id,departure_date,query_date,price\n";

    #[test]
    fn groups_rows_into_one_series() {
        let csv = format!(
            "{HEADER}R1,2016-01-13,2015-11-11,45.000\nR1,2016-01-13,2015-11-09,49.990\nR1,2016-01-13,2015-11-10,47.5\n"
        );
        let loaded = read_quotes(csv.as_bytes(), IngestMode::Strict).unwrap();
        assert_eq!(loaded.series.len(), 1);
        assert_eq!(loaded.series[0].len(), 3);
        assert_eq!(loaded.series[0].quotes()[0].price.to_string(), "49.990");
    }

    #[test]
    fn duplicate_is_an_error() {
        let csv = format!("{HEADER}R1,2016-01-13,2015-12-01,49.99\nR1,2016-01-13,2015-12-01,39.99\n");
        assert!(matches!(
            read_quotes(csv.as_bytes(), IngestMode::Strict),
            Err(Error::DuplicateQuote { .. })
        ));
    }

    #[test]
    fn parse_error_reports_line() {
        let csv = format!("{HEADER}R1,2016-01-13,2015-12-01,49.99\nR1,2016-13-13,2015-12-01,1\n");
        match read_quotes(csv.as_bytes(), IngestMode::Strict) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lenient_mode_conserves_rows() {
        let csv = format!(
            "{HEADER}R1,2016-01-13,2015-12-01,49.99\nR1,2016-01-13,2015-12-01,39.99\nR1,2016-01-13,2016-02-01,10\nR2,2016-01-13,2015-12-01,0\nR2,2016-01-14,2015-12-01,20\n"
        );
        let loaded = read_quotes(csv.as_bytes(), IngestMode::Lenient).unwrap();
        let kept: usize = loaded.series.iter().map(PriceSeries::len).sum();
        assert_eq!(loaded.parsed_rows, 5);
        assert_eq!(kept + loaded.rejected.len(), loaded.parsed_rows);
        assert_eq!(loaded.rejected.len(), 3);
    }

    #[test]
    fn bad_header_rejected() {
        let csv = "route,departure,query,price\nR1,2016-01-13,2015-12-01,49.99\n";
        assert!(read_quotes(csv.as_bytes(), IngestMode::Strict).is_err());
    }

    #[test]
    fn split_by_departure_window() {
        let cfg = SplitConfig::default();
        let series = |dep: &str| {
            let dep: NaiveDate = dep.parse().unwrap();
            PriceSeries::from_quotes(vec![Quote::new(
                "R1",
                dep,
                "2015-11-09".parse().unwrap(),
                Price::from_milli(10_000),
            )])
            .unwrap()
        };
        let out = split(
            vec![series("2016-01-15"), series("2016-01-16"), series("2016-03-01")],
            &cfg,
        )
        .unwrap();
        assert_eq!(out.train.len(), 1);
        assert_eq!(out.train[0].departure_date().to_string(), "2016-01-15");
        assert_eq!(out.test.len(), 1);
        assert_eq!(out.test[0].departure_date().to_string(), "2016-01-16");
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn split_config_validation() {
        let mut cfg = SplitConfig::default();
        cfg.test_start = cfg.train_end;
        assert!(cfg.validate().is_err());
    }
}
