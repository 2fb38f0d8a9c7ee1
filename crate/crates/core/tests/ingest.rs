use chrono::{Days, NaiveDate};
use farecast::ingest::{group_series, read_quotes, split, write_quotes, IngestMode, SplitConfig};
use farecast::model::{Price, Quote};
use farecast::Error;
use proptest::prelude::*;

const HEADER: &str = "route_id,departure_date,query_date,price\n";

fn quote_strategy() -> impl Strategy<Value = Quote> {
    ("R[1-8]", 0u64..60, 0u64..90, 1i64..5_000_000).prop_map(|(route, dep, back, milli)| {
        let dep = NaiveDate::from_ymd_opt(2016, 1, 1).unwrap() + Days::new(dep);
        Quote::new(route, dep, dep - Days::new(back), Price::from_milli(milli))
    })
}

proptest! {
    #[test]
    fn csv_round_trip(quotes in prop::collection::vec(quote_strategy(), 1..80)) {
        // Keep the first quote per (series, query date).
        let mut seen = std::collections::BTreeSet::new();
        let quotes: Vec<Quote> = quotes
            .into_iter()
            .filter(|q| seen.insert((q.key(), q.query_date)))
            .collect();
        let mut buf = Vec::new();
        write_quotes(&mut buf, &quotes).unwrap();
        let loaded = read_quotes(buf.as_slice(), IngestMode::Strict).unwrap();
        prop_assert_eq!(loaded.parsed_rows, quotes.len());
        prop_assert_eq!(loaded.series, group_series(quotes).unwrap());
    }

    #[test]
    fn price_text_round_trips(milli in 1i64..i64::MAX / 2) {
        let p = Price::from_milli(milli);
        prop_assert_eq!(p.to_string().parse::<Price>().unwrap(), p);
    }
}

#[test]
fn strict_and_lenient_modes() {
    let csv = format!(
        "{HEADER}R1,2016-01-13,2015-11-09,49.990\nR1,2016-01-13,2015-11-10,-1\nR1,2016-01-13,2016-01-14,30\nR1,2016-01-13,2015-11-09,50\nR1,2016-01-13,2015-11-11,1.2345\n"
    );
    assert!(matches!(
        read_quotes(csv.as_bytes(), IngestMode::Strict),
        Err(Error::NonPositivePrice(_))
    ));
    let lenient = read_quotes(csv.as_bytes(), IngestMode::Lenient).unwrap();
    let kinds: Vec<_> = lenient.rejected.iter().map(|r| (r.line, r.error.kind())).collect();
    assert_eq!(
        kinds,
        vec![(3, "NonPositivePrice"), (4, "QueryAfterDeparture"), (5, "DuplicateQuote"), (6, "ParseError")]
    );
    assert_eq!(lenient.series.len(), 1);
    assert_eq!(lenient.series[0].len(), 1);
}

#[test]
fn header_is_required() {
    let err = read_quotes("a,b,c,d\n".as_bytes(), IngestMode::Lenient).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }));
}

#[test]
fn split_by_departure_window() {
    let cfg = SplitConfig::default();
    let q = |dep: &str| {
        let dep: NaiveDate = dep.parse().unwrap();
        Quote::new("R1", dep, dep - Days::new(3), Price::from_milli(10_000))
    };
    let series = group_series([q("2015-12-01"), q("2016-01-15"), q("2016-01-16"), q("2016-03-01")]).unwrap();
    let s = split(series, &cfg).unwrap();
    assert_eq!((s.train.len(), s.test.len(), s.dropped), (2, 1, 1));

    let bad = SplitConfig {
        train_end: cfg.test_start,
        ..cfg
    };
    assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
}
