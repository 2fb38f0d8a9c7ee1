use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use farecast::features::extract_rows;
use farecast::hmm::HmmParams;
use farecast::learners::{LearnerKind, LearnerSpec, Task};
use farecast::matrix::feature_matrix;
use farecast::model::PriceSeries;
use farecast::pipeline::{train_bank, train_specific, Corpus, ModelBundle, RunConfig};
use farecast::synthgen::{generate_corpus, GenConfig};
use farecast_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = fc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Copies a library series into an FFI handle.
fn handle(s: &PriceSeries) -> *mut FcSeries {
    let mut h = ptr::null_mut();
    let route = c(s.route_id());
    let dep = c(&s.departure_date().to_string());
    unsafe {
        assert_eq!(fc_series_new(route.as_ptr(), dep.as_ptr(), &mut h), FcStatus::Ok);
        // Reverse order: the handle sorts on use.
        for q in s.quotes().iter().rev() {
            let d = c(&q.query_date.to_string());
            assert_eq!(fc_series_push(h, d.as_ptr(), q.price.as_f64()), FcStatus::Ok);
        }
    }
    h
}

fn small_corpus() -> Corpus {
    let mut cfg = GenConfig::default_specific(11);
    cfg.departures = 40;
    let series = farecast::ingest::group_series(generate_corpus(&cfg).unwrap()).unwrap();
    Corpus::new(series, &RunConfig::default().split).unwrap()
}

#[test]
fn version_matches_the_library() {
    let v = unsafe { CStr::from_ptr(fc_version()) };
    assert_eq!(v.to_str().unwrap(), farecast::pipeline::TOOL_VERSION);
}

#[test]
fn series_metrics() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(fc_series_new(c("R1").as_ptr(), c("2016-02-05").as_ptr(), &mut s), FcStatus::Ok);
        for (day, p) in [("2016-02-01", 50.0), ("2016-02-02", 40.0), ("2016-02-03", 40.0), ("2016-02-04", 60.0)] {
            assert_eq!(fc_series_push(s, c(day).as_ptr(), p), FcStatus::Ok);
        }
        assert_eq!(fc_series_len(s), 4);
        let (mut rnd, mut opt, mut norm) = (0.0, 0.0, 0.0);
        assert_eq!(fc_random_purchase_price(s, &mut rnd), FcStatus::Ok);
        assert_eq!(fc_optimal_price(s, &mut opt), FcStatus::Ok);
        assert_eq!((rnd, opt), (47.5, 40.0));
        assert_eq!(fc_normalized_performance(rnd, opt, opt, &mut norm), FcStatus::Ok);
        assert!((norm - 100.0).abs() < 1e-12);
        assert_eq!(fc_normalized_performance(rnd, opt, rnd, &mut norm), FcStatus::Ok);
        assert!(norm.abs() < 1e-12);
        fc_series_free(s);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut s = ptr::null_mut();
    let mut x = 0.0;
    unsafe {
        assert_eq!(fc_series_new(ptr::null(), c("2016-02-05").as_ptr(), &mut s), FcStatus::NullArgument);
        assert!(last_error().contains("route_id"));
        assert_eq!(fc_series_new(c("R1").as_ptr(), c("05/02/2016").as_ptr(), &mut s), FcStatus::ParseError);
        assert_eq!(fc_series_new(c("R1").as_ptr(), c("2016-02-05").as_ptr(), &mut s), FcStatus::Ok);
        assert_eq!(fc_random_purchase_price(s, &mut x), FcStatus::EmptySeries);
        assert_eq!(fc_series_push(s, c("2016-02-01").as_ptr(), 0.0), FcStatus::NonPositivePrice);
        assert_eq!(fc_series_push(s, c("2016-02-06").as_ptr(), 10.0), FcStatus::QueryAfterDeparture);
        assert_eq!(fc_series_push(s, c("2016-02-01").as_ptr(), 10.0), FcStatus::Ok);
        assert_eq!(fc_series_push(s, c("2016-02-01").as_ptr(), 11.0), FcStatus::DuplicateQuote);
        assert_eq!(fc_series_len(s), 1);
        assert_eq!(fc_normalized_performance(10.0, 10.0, 12.0, &mut x), FcStatus::UndefinedMetric);
        assert_eq!(fc_normalized_performance(10.0, 10.0, 10.0, &mut x), FcStatus::Ok);
        assert_eq!(x, 100.0);
        assert_eq!(fc_model_load(c("/nonexistent/model.json").as_ptr(), &mut ptr::null_mut()), FcStatus::Io);
        assert_eq!(fc_hmm_bank_load(c("/nonexistent").as_ptr(), &mut ptr::null_mut()), FcStatus::InvalidConfig);
        fc_series_free(s);
        fc_series_free(ptr::null_mut());
        fc_model_free(ptr::null_mut());
        fc_hmm_bank_free(ptr::null_mut());
    }
}

#[test]
fn model_and_bank_round_trip() {
    let corpus = small_corpus();
    let cfg = RunConfig {
        hmm: HmmParams {
            max_iter: 20,
            ..HmmParams::default()
        },
        ..RunConfig::default()
    };
    let spec = LearnerSpec::new(LearnerKind::Cart, Task::Classification).with("max_depth", 6.0);
    let bundle = train_specific(&corpus, &[spec], &cfg, 5).unwrap().bundle;
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    bundle.save(&model_path).unwrap();
    let bank = train_bank(&corpus, &cfg).unwrap();
    bank.save_dir(dir.path().join("bank")).unwrap();

    let path = |p: &Path| c(p.to_str().unwrap());
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(fc_model_load(path(&model_path).as_ptr(), &mut m), FcStatus::Ok);
        assert_eq!(fc_model_n_features(m), bundle.model.n_features);

        let expected = ModelBundle::load(&model_path).unwrap().decide(&corpus.test).unwrap();
        for (s, want) in corpus.test.iter().zip(&expected) {
            let h = handle(s);
            let mut d = FcDecision { index: 0, paid_price: 0.0, forced: false };
            assert_eq!(fc_model_decide(m, h, &mut d), FcStatus::Ok);
            assert_eq!(s.quotes()[d.index].query_date, want.buy_query_date);
            assert_eq!(d.paid_price, want.paid_price.as_f64());
            assert_eq!(d.forced, want.forced);
            fc_series_free(h);
        }

        let s = &corpus.test[0];
        let rows = extract_rows(s, corpus.routes.index_of(s.route_id()), &corpus.context).unwrap();
        let x = feature_matrix(&rows);
        let flat: Vec<f64> = x.iter_rows().flatten().copied().collect();
        let mut out = vec![-1.0; x.rows()];
        assert_eq!(fc_model_predict(m, flat.as_ptr(), x.rows(), x.cols(), out.as_mut_ptr()), FcStatus::Ok);
        let want: Vec<f64> = bundle.model.predict(&x).unwrap().labels().unwrap().iter().map(|&l| f64::from(l)).collect();
        assert_eq!(out, want);
        assert_eq!(
            fc_model_predict(m, flat.as_ptr(), 1, x.cols() - 1, out.as_mut_ptr()),
            FcStatus::FeatureMismatch
        );
        fc_model_free(m);

        let mut b = ptr::null_mut();
        assert_eq!(fc_hmm_bank_load(path(&dir.path().join("bank")).as_ptr(), &mut b), FcStatus::Ok);
        assert_eq!(fc_hmm_bank_len(b), 8);
        let obs = [0.9, 1.0, 1.1, 1.2, 1.0];
        let mut ll = 0.0;
        assert_eq!(fc_hmm_loglik(b, 2, obs.as_ptr(), obs.len(), &mut ll), FcStatus::Ok);
        assert_eq!(ll, bank.models[2].log_likelihood(&obs));
        assert_eq!(fc_hmm_loglik(b, 8, obs.as_ptr(), obs.len(), &mut ll), FcStatus::IndexOutOfRange);
        let mut k = usize::MAX;
        assert_eq!(fc_hmm_classify(b, obs.as_ptr(), obs.len(), &mut k), FcStatus::Ok);
        assert_eq!(k, farecast::hmm::classify_sequence(&bank.models, &obs));
        fc_hmm_bank_free(b);
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/farecast.h")).unwrap();
    for f in ["fc_model_load", "fc_model_decide", "fc_hmm_loglik", "fc_last_error", "FC_STATUS_FEATURE_MISMATCH"] {
        assert!(header.contains(f), "{f} missing from header");
    }
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = std::process::Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Wextra", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(dir.join("tests/header_check.c"))
        .status();
    match status {
        Ok(s) => assert!(s.success(), "{cc} rejected the header"),
        Err(e) => eprintln!("skipping C compile check, {cc} unavailable: {e}"),
    }
}
