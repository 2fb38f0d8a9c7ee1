use chrono::{Days, NaiveDate};
use farecast::model::{Price, PriceSeries, Quote};
use farecast::qlearn::{q_policy, q_train, QBank, QParams};

fn series(route: &str, dep_offset: u64, prices: &[f64]) -> PriceSeries {
    let dep = NaiveDate::from_ymd_opt(2016, 2, 1).unwrap() + Days::new(dep_offset);
    let n = prices.len() as u64;
    let quotes = prices
        .iter()
        .enumerate()
        .map(|(i, &p)| Quote::new(route, dep, dep - Days::new(n - 1 - i as u64), Price::from_f64(p)))
        .collect();
    PriceSeries::from_quotes(quotes).unwrap()
}

/// Deterministic backward induction over the same states, with alpha = 1.
fn expected_buy_state(prices: &[f64]) -> usize {
    let n = prices.len();
    let mut value_next = -prices[n - 1];
    let mut buy_at = n - 1;
    for i in (0..n - 1).rev() {
        let buy = -prices[i];
        if buy >= value_next {
            buy_at = i;
        }
        value_next = buy.max(value_next);
    }
    buy_at
}

#[test]
fn greedy_policy_with_full_step_matches_backward_induction() {
    let params = QParams {
        episodes: 3,
        gamma: 1.0,
        alpha: 1.0,
    };
    for prices in [vec![30.0, 20.0, 40.0], vec![10.0, 20.0, 5.0, 50.0], vec![9.0, 8.0, 7.0, 6.0], vec![4.0, 4.0, 4.0]] {
        let s = series("R1", 0, &prices);
        let t = q_train(std::slice::from_ref(&s), params, 0).unwrap();
        let d = q_policy(&t, &s).unwrap();
        let want = expected_buy_state(&prices);
        assert_eq!(d.paid_price, Price::from_f64(prices[want]), "{prices:?}");
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let s = series("R1", 0, &[1.0, 2.0]);
    for (gamma, alpha) in [(0.0, 0.5), (1.5, 0.5), (1.0, 0.0), (1.0, f64::NAN)] {
        assert!(q_train(std::slice::from_ref(&s), QParams { episodes: 1, gamma, alpha }, 0).is_err());
    }
    assert!(q_train(&[], QParams::default(), 0).is_err());
}

#[test]
fn bank_round_trips_and_rejects_unknown_routes() {
    let train = vec![
        series("R1", 0, &[30.0, 20.0, 40.0, 45.0]),
        series("R1", 2, &[28.0, 22.0, 41.0, 40.0]),
        series("R2", 0, &[70.0, 75.0, 60.0, 90.0]),
    ];
    let bank = QBank::train(&train, QParams::default(), 11).unwrap();
    assert_eq!(bank.tables.keys().collect::<Vec<_>>(), ["R1", "R2"]);
    let json = serde_json::to_string(&bank).unwrap();
    let back: QBank = serde_json::from_str(&json).unwrap();
    assert_eq!(back, bank);
    assert_eq!(QBank::train(&train, QParams::default(), 11).unwrap(), bank);
    for s in &train {
        assert_eq!(back.decide(s).unwrap(), bank.decide(s).unwrap());
    }
    assert!(bank.decide(&series("R9", 0, &[1.0, 2.0])).is_err());
}
