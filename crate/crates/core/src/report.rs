//! Report documents and their JSON/CSV renderings. Every float is written
//! with six significant digits.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use crate::error::Result;
use crate::metrics::{Aggregate, BacktestMetrics};
use crate::model::PriceSeries;
use crate::policy::PurchaseDecision;

/// Rounds to six significant digits.
pub fn sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// Six significant digits, without exponent notation for ordinary
/// magnitudes.
pub fn sig6_string(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let r = sig6(x);
    if r == 0.0 {
        return "0".into();
    }
    let mag = r.abs().log10().floor() as i32;
    if (-5..15).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        let s = format!("{r:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{r:.5e}")
    }
}

/// Rewrites every float in a JSON tree to six significant digits; NaN and
/// infinities become null.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            *v = serde_json::Number::from_f64(sig6(x)).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Serializes any value as pretty JSON with rounded floats.
pub fn to_report_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn ser_date<S: Serializer>(d: &NaiveDate, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub series: String,
    pub route_id: String,
    #[serde(serialize_with = "ser_date")]
    pub departure_date: NaiveDate,
    #[serde(serialize_with = "ser_date")]
    pub buy_query_date: NaiveDate,
    pub paid_price: String,
    pub forced: bool,
}

impl From<&PurchaseDecision> for DecisionRecord {
    fn from(d: &PurchaseDecision) -> Self {
        DecisionRecord {
            series: d.key.to_string(),
            route_id: d.key.route_id.clone(),
            departure_date: d.key.departure_date,
            buy_query_date: d.buy_query_date,
            paid_price: d.paid_price.to_string(),
            forced: d.forced,
        }
    }
}

/// Per-route metrics plus the aggregate, with everything needed to rerun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    /// Fully resolved configuration of the run.
    pub config: Value,
    /// Run facts: data sizes, chosen hyperparameters, preprocessing counts.
    pub details: Value,
    pub routes: Vec<BacktestMetrics>,
    pub aggregate: Aggregate,
    pub decisions: Vec<DecisionRecord>,
}

impl BacktestReport {
    pub fn to_json(&self) -> Result<String> {
        to_report_json(self)
    }

    /// One row per route and the two summary rows of the paper's tables.
    pub fn write_table_csv<W: Write>(&self, sink: W, column: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "route",
            "random_purchase_price",
            "optimal_price",
            "predicted_price",
            "performance_pct",
            "optimal_performance_pct",
            column,
        ])?;
        for m in &self.routes {
            w.write_record([
                m.route_id.clone(),
                sig6_string(m.random_purchase_price),
                sig6_string(m.optimal_price),
                sig6_string(m.predicted_price),
                sig6_string(m.performance_pct),
                sig6_string(m.optimal_performance_pct),
                m.normalized_performance_pct.map(sig6_string).unwrap_or_else(|| "undefined".into()),
            ])?;
        }
        let blank = || String::new();
        for (name, v) in [("Mean Perf.", self.aggregate.mean_performance), ("Variance", self.aggregate.variance)] {
            w.write_record([name.to_string(), blank(), blank(), blank(), blank(), blank(), sig6_string(v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-quote rows (series, query date, price, whether bought there) for plotting.
pub fn write_plot_csv<W: Write>(sink: W, series: &[PriceSeries], decisions: &[PurchaseDecision]) -> Result<()> {
    let bought: std::collections::HashMap<_, _> = decisions.iter().map(|d| (&d.key, d.buy_query_date)).collect();
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["route_id", "departure_date", "query_date", "days_to_departure", "price", "decision"])?;
    for s in series {
        let buy = bought.get(s.key());
        for q in s.quotes() {
            let decision = match buy {
                Some(&d) if d == q.query_date => "buy",
                Some(&d) if q.query_date < d => "wait",
                Some(_) => "after",
                None => "",
            };
            w.write_record([
                q.route_id.clone(),
                q.departure_date.to_string(),
                q.query_date.to_string(),
                q.days_to_departure().to_string(),
                q.price.to_string(),
                decision.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6_string(15.789_473_684), "15.7895");
        assert_eq!(sig6_string(46.666_666_7), "46.6667");
        assert_eq!(sig6_string(100.0), "100");
        assert_eq!(sig6_string(0.000_123_456_78), "0.000123457");
        assert_eq!(sig6_string(-21.02), "-21.02");
        assert_eq!(sig6(47.5), 47.5);
    }

    #[test]
    fn json_floats_are_rounded() {
        let mut v = serde_json::json!({"a": 1.234_567_89, "b": [2.0, 3], "c": "x"});
        round_json(&mut v);
        assert_eq!(v.to_string(), r#"{"a":1.23457,"b":[2.0,3],"c":"x"}"#);
    }
}
