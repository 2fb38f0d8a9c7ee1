//! C ABI over the farecast library.
//!
//! Every fallible call returns an [`FcStatus`]; on failure the message is
//! available from [`fc_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. Dates are
//! `YYYY-MM-DD` strings and prices are EUR.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chrono::NaiveDate;
use farecast::hmm::{classify_sequence, HmmBank};
use farecast::learners::Predictions;
use farecast::matrix::Matrix;
use farecast::metrics::{optimal_price, random_purchase_price, BacktestMetrics};
use farecast::model::{validate_quote, Price, PriceSeries, Quote};
use farecast::pipeline::{ModelBundle, TOOL_VERSION};
use farecast::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcStatus {
    Ok = 0,
    NullArgument,
    InvalidUtf8,
    Panic,
    NonPositivePrice,
    QueryAfterDeparture,
    ParseError,
    DuplicateQuote,
    MixedSeries,
    EmptySeries,
    SingleClassDataset,
    EmptyDataset,
    IncompatibleSpec,
    FeatureMismatch,
    WrongMemberCount,
    TooFewSeries,
    AllCellsFailed,
    InvalidConfig,
    Misaligned,
    Io,
    Json,
    Csv,
    /// The normalized performance is undefined for these prices.
    UndefinedMetric,
    IndexOutOfRange,
}

impl From<&Error> for FcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NonPositivePrice(_) => FcStatus::NonPositivePrice,
            Error::QueryAfterDeparture { .. } => FcStatus::QueryAfterDeparture,
            Error::Parse { .. } => FcStatus::ParseError,
            Error::DuplicateQuote { .. } => FcStatus::DuplicateQuote,
            Error::MixedSeries(..) => FcStatus::MixedSeries,
            Error::EmptySeries => FcStatus::EmptySeries,
            Error::SingleClassDataset => FcStatus::SingleClassDataset,
            Error::EmptyDataset => FcStatus::EmptyDataset,
            Error::IncompatibleSpec(_) => FcStatus::IncompatibleSpec,
            Error::FeatureMismatch { .. } => FcStatus::FeatureMismatch,
            Error::WrongMemberCount(_) => FcStatus::WrongMemberCount,
            Error::TooFewSeries { .. } => FcStatus::TooFewSeries,
            Error::AllCellsFailed => FcStatus::AllCellsFailed,
            Error::InvalidConfig(_) => FcStatus::InvalidConfig,
            Error::Misaligned { .. } => FcStatus::Misaligned,
            Error::Io(_) => FcStatus::Io,
            Error::Json(_) => FcStatus::Json,
            Error::Csv(_) => FcStatus::Csv,
        }
    }
}

/// A purchase decision for one series.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcDecision {
    /// Position of the bought quote in query-date order.
    pub index: usize,
    pub paid_price: f64,
    /// True when no buy signal fired and the fallback rule chose the quote.
    pub forced: bool,
}

/// A trained model with its feature layout.
pub struct FcModel {
    bundle: ModelBundle,
}

/// A bank of per-route HMM templates.
pub struct FcHmmBank {
    bank: HmmBank,
}

/// Quotes of one route and departure date, filled one query date at a time.
pub struct FcSeries {
    route_id: String,
    departure_date: NaiveDate,
    quotes: Vec<Quote>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(FcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(FcStatus::from(&e), e.to_string())
    }
}

type FfiResult<T> = Result<T, Fail>;

/// Runs `f`, recording failures and containing panics.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> FcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FcStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside farecast".into());
            FcStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(FcStatus::NullArgument, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(FcStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn date_arg(p: *const c_char, what: &str) -> FfiResult<NaiveDate> {
    let s = str_arg(p, what)?;
    s.parse().map_err(|e| Fail(FcStatus::ParseError, format!("{what} {s:?}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn series_of(s: &FcSeries) -> FfiResult<PriceSeries> {
    Ok(PriceSeries::from_quotes(s.quotes.clone())?)
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fc_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    debug_assert_eq!(&VERSION[..VERSION.len() - 1], TOOL_VERSION);
    VERSION.as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Starts an empty series.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_series_new(
    route_id: *const c_char,
    departure_date: *const c_char,
    out: *mut *mut FcSeries,
) -> FcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let route_id = str_arg(route_id, "route_id")?.trim().to_string();
        if route_id.is_empty() {
            return Err(Fail(FcStatus::ParseError, "empty route_id".into()));
        }
        let departure_date = date_arg(departure_date, "departure_date")?;
        *out = Box::into_raw(Box::new(FcSeries {
            route_id,
            departure_date,
            quotes: Vec::new(),
        }));
        Ok(())
    })
}

/// Appends one quote. Quotes may arrive in any order.
///
/// # Safety
/// `series` must come from `fc_series_new`; `query_date` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fc_series_push(series: *mut FcSeries, query_date: *const c_char, price: f64) -> FcStatus {
    guard(|| {
        let s = out_arg(series, "series")?;
        let query_date = date_arg(query_date, "query_date")?;
        if !price.is_finite() {
            return Err(Fail(FcStatus::NonPositivePrice, format!("price {price} is not finite")));
        }
        let q = validate_quote(Quote::new(s.route_id.clone(), s.departure_date, query_date, Price::from_f64(price)))?;
        if s.quotes.iter().any(|o| o.query_date == q.query_date) {
            return Err(Error::DuplicateQuote {
                key: q.key(),
                query_date,
            }
            .into());
        }
        s.quotes.push(q);
        Ok(())
    })
}

/// Number of quotes pushed so far; 0 for NULL.
///
/// # Safety
/// `series` must be NULL or come from `fc_series_new`.
#[no_mangle]
pub unsafe extern "C" fn fc_series_len(series: *const FcSeries) -> usize {
    series.as_ref().map_or(0, |s| s.quotes.len())
}

/// # Safety
/// `series` must be NULL or come from `fc_series_new`, and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fc_series_free(series: *mut FcSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Expected price of a uniformly random purchase day.
///
/// # Safety
/// `series` must come from `fc_series_new`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_random_purchase_price(series: *const FcSeries, out: *mut f64) -> FcStatus {
    guard(|| {
        let s = series_of(ref_arg(series, "series")?)?;
        *out_arg(out, "out")? = random_purchase_price(&s)?;
        Ok(())
    })
}

/// Lowest price of the series.
///
/// # Safety
/// `series` must come from `fc_series_new`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_optimal_price(series: *const FcSeries, out: *mut f64) -> FcStatus {
    guard(|| {
        let s = series_of(ref_arg(series, "series")?)?;
        *out_arg(out, "out")? = optimal_price(&s)?.as_f64();
        Ok(())
    })
}

/// Normalized performance in percent from route-level mean prices.
/// Returns `FC_STATUS_UNDEFINED_METRIC` for a constant-price route whose
/// predicted price misses the optimum.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_normalized_performance(random: f64, optimal: f64, predicted: f64, out: *mut f64) -> FcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if random.is_nan() || random <= 0.0 {
            return Err(Fail(FcStatus::NonPositivePrice, format!("random purchase price {random}")));
        }
        match BacktestMetrics::from_prices("", random, optimal, predicted).normalized_performance_pct {
            Some(v) => {
                *out = v;
                Ok(())
            }
            None => Err(Fail(FcStatus::UndefinedMetric, "optimal performance is zero".into())),
        }
    })
}

/// Loads a model bundle written by `farecast train --save-model`.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_model_load(path: *const c_char, out: *mut *mut FcModel) -> FcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let bundle = ModelBundle::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(FcModel { bundle }));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or come from `fc_model_load`, and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fc_model_free(model: *mut FcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Feature columns the model expects; 0 for NULL.
///
/// # Safety
/// `model` must be NULL or come from `fc_model_load`.
#[no_mangle]
pub unsafe extern "C" fn fc_model_n_features(model: *const FcModel) -> usize {
    model.as_ref().map_or(0, |m| m.bundle.model.n_features)
}

/// Predicts `rows` row-major feature rows. Classifiers write 0/1 labels,
/// regressors the predicted minimum price.
///
/// # Safety
/// `features` must hold `rows * cols` values and `out` room for `rows`.
#[no_mangle]
pub unsafe extern "C" fn fc_model_predict(
    model: *const FcModel,
    features: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> FcStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Fail(FcStatus::InvalidConfig, "rows * cols overflows".into()))?;
        let x = slice_arg(features, len, "features")?;
        if rows > 0 && out.is_null() {
            return Err(null("out"));
        }
        let matrix = Matrix::new(rows, cols, x.to_vec())?;
        let values: Vec<f64> = match m.bundle.model.predict(&matrix)? {
            Predictions::Classification { labels, .. } => labels.into_iter().map(f64::from).collect(),
            Predictions::Regression(v) => v,
        };
        if rows > 0 {
            std::slice::from_raw_parts_mut(out, rows).copy_from_slice(&values);
        }
        Ok(())
    })
}

/// Runs the model over a series of a training route and applies the
/// purchase policy.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_model_decide(model: *const FcModel, series: *const FcSeries, out: *mut FcDecision) -> FcStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let s = series_of(ref_arg(series, "series")?)?;
        let out = out_arg(out, "out")?;
        let d = m.bundle.decide(std::slice::from_ref(&s))?.remove(0);
        let index = s
            .quotes()
            .iter()
            .position(|q| q.query_date == d.buy_query_date)
            .expect("decision lies inside its series");
        *out = FcDecision {
            index,
            paid_price: d.paid_price.as_f64(),
            forced: d.forced,
        };
        Ok(())
    })
}

/// Loads a template directory written by `farecast train --save-bank`.
///
/// # Safety
/// `dir` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_hmm_bank_load(dir: *const c_char, out: *mut *mut FcHmmBank) -> FcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let bank = HmmBank::load_dir(str_arg(dir, "dir")?)?;
        *out = Box::into_raw(Box::new(FcHmmBank { bank }));
        Ok(())
    })
}

/// # Safety
/// `bank` must be NULL or come from `fc_hmm_bank_load`, and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fc_hmm_bank_free(bank: *mut FcHmmBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

/// Number of templates; 0 for NULL.
///
/// # Safety
/// `bank` must be NULL or come from `fc_hmm_bank_load`.
#[no_mangle]
pub unsafe extern "C" fn fc_hmm_bank_len(bank: *const FcHmmBank) -> usize {
    bank.as_ref().map_or(0, |b| b.bank.models.len())
}

/// Forward log-likelihood of `obs` under one template. Observations are
/// prices divided by the template's price scale.
///
/// # Safety
/// `obs` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_hmm_loglik(
    bank: *const FcHmmBank,
    template: usize,
    obs: *const f64,
    len: usize,
    out: *mut f64,
) -> FcStatus {
    guard(|| {
        let b = ref_arg(bank, "bank")?;
        let obs = slice_arg(obs, len, "obs")?;
        let out = out_arg(out, "out")?;
        let m = b.bank.models.get(template).ok_or_else(|| {
            Fail(FcStatus::IndexOutOfRange, format!("template {template} of {}", b.bank.models.len()))
        })?;
        *out = m.log_likelihood(obs);
        Ok(())
    })
}

/// Index of the template most likely to have produced `obs`.
///
/// # Safety
/// `obs` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_hmm_classify(bank: *const FcHmmBank, obs: *const f64, len: usize, out: *mut usize) -> FcStatus {
    guard(|| {
        let b = ref_arg(bank, "bank")?;
        let obs = slice_arg(obs, len, "obs")?;
        *out_arg(out, "out")? = classify_sequence(&b.bank.models, obs);
        Ok(())
    })
}
