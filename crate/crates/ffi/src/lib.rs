//! C ABI over `levybound`.
//!
//! Every fallible call returns an [`LbStatus`] and writes its result through
//! an out-pointer. On failure the message is kept per thread and can be
//! fetched with [`lb_last_error_message`]. Strings handed out by the library
//! must be released with [`lb_string_free`], series with [`lb_series_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use levybound::moment::{moment_bound, series_power, series_product, MomentSeries};
use levybound::rational::{ln_rational, parse_rational, to_ratio_string};
use levybound::scenario::{accumulation_scenario, Scenario};
use levybound::sim::{confidence_interval, simulate_paths, SimConfig};
use levybound::tail::{epsilon_for_probability, optimize_k, tail_bound_at, TailBoundResult};
use levybound::{Error, FilterSpec};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    /// Outside the hypotheses the bounds rely on.
    Refused = 4,
    /// Over a resource or enumeration cap.
    CapExceeded = 5,
    /// Numerical failure: non-finite value, no convergence, unstable filter.
    Computation = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

/// Scenario text encoding accepted by [`lb_series_from_scenario`].
#[repr(u32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbScenarioFormat {
    Json = 0,
    Toml = 1,
}

/// Opaque truncated moment series.
pub struct LbSeries {
    inner: MomentSeries,
}

/// Tail bound at one order `k`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbTailBound {
    pub k: usize,
    pub epsilon: f64,
    /// May underflow to zero; `log10_probability` stays exact.
    pub probability: f64,
    pub log10_probability: f64,
    pub log10_moment: f64,
    pub levy: bool,
}

impl From<&TailBoundResult> for LbTailBound {
    fn from(r: &TailBoundResult) -> Self {
        Self {
            k: r.k_used,
            epsilon: r.epsilon,
            probability: r.probability,
            log10_probability: r.log10_probability,
            log10_moment: r.log10_moment(),
            levy: r.levy_factor_applied,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LbStatus {
    match e {
        Error::Parse(_) | Error::Serialization(_) => LbStatus::Parse,
        Error::Refused(_) => LbStatus::Refused,
        Error::CapExceeded { .. } | Error::CompositionCap { .. } => LbStatus::CapExceeded,
        Error::NonFinite(_) | Error::NoConvergence(_) | Error::NotBiboStable(_) | Error::OrderMismatch { .. } => {
            LbStatus::Computation
        }
        _ => LbStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LbStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LbStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            LbStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            LbStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Core(Error::Parse(format!("{what} is not UTF-8"))))
}

unsafe fn series_arg<'a>(p: *const LbSeries, what: &'static str) -> Result<&'a MomentSeries, Failure> {
    p.as_ref().map(|s| &s.inner).ok_or(Failure::Null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

fn boxed(inner: MomentSeries) -> *mut LbSeries {
    Box::into_raw(Box::new(LbSeries { inner }))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn lb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The caller owns
/// the copy and frees it with [`lb_string_free`].
#[no_mangle]
pub extern "C" fn lb_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn lb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Series of `n` iterations with `m` uniform errors of half-width `u` each,
/// truncated at `order`. `u` accepts `2^-24`, `1/3` or a decimal.
///
/// # Safety
/// `u` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lb_series_accumulation(
    n: u64,
    m: u64,
    u: *const c_char,
    order: usize,
    out: *mut *mut LbSeries,
) -> LbStatus {
    guard(|| {
        let u = parse_rational(str_arg(u, "u")?)?;
        let series = accumulation_scenario(n, m, &u)?.series(order)?;
        write(out, boxed(series), "out")
    })
}

/// Series of a scenario given as JSON or TOML text; `format` is an [`LbScenarioFormat`].
///
/// # Safety
/// `text` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lb_series_from_scenario(
    text: *const c_char,
    format: u32,
    order: usize,
    out: *mut *mut LbSeries,
) -> LbStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let scenario = match format {
            f if f == LbScenarioFormat::Json as u32 => Scenario::from_json(text)?,
            f if f == LbScenarioFormat::Toml as u32 => Scenario::from_text(text)?,
            f => return Err(Error::InvalidConfig(format!("unknown scenario format {f}")).into()),
        };
        write(out, boxed(scenario.series(order)?), "out")
    })
}

/// Series of the sum of `n` independent copies.
///
/// # Safety
/// `a` must be a live series and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lb_series_power(a: *const LbSeries, n: u64, out: *mut *mut LbSeries) -> LbStatus {
    guard(|| {
        let a = series_arg(a, "a")?;
        write(out, boxed(series_power(a, n)), "out")
    })
}

/// Series of the sum of two independent families. Orders must match.
///
/// # Safety
/// `a` and `b` must be live series and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lb_series_product(
    a: *const LbSeries,
    b: *const LbSeries,
    out: *mut *mut LbSeries,
) -> LbStatus {
    guard(|| {
        let product = series_product(series_arg(a, "a")?, series_arg(b, "b")?)?;
        write(out, boxed(product), "out")
    })
}

/// # Safety
/// `s` must be null or a series from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn lb_series_free(s: *mut LbSeries) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Truncation order, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live series.
#[no_mangle]
pub unsafe extern "C" fn lb_series_order(s: *const LbSeries) -> usize {
    s.as_ref().map_or(0, |s| s.inner.order())
}

/// Exact bound on `E(S^2k)` as a reduced fraction `"p/q"`.
///
/// # Safety
/// `s` must be a live series and `out` writable; free the string with [`lb_string_free`].
#[no_mangle]
pub unsafe extern "C" fn lb_series_moment_bound(s: *const LbSeries, k: usize, out: *mut *mut c_char) -> LbStatus {
    guard(|| {
        let m = moment_bound(series_arg(s, "s")?, k)?;
        write(out, into_c_string(to_ratio_string(&m)), "out")
    })
}

/// `log10` of the bound on `E(S^2k)`; finite even when the value overflows a double.
///
/// # Safety
/// `s` must be a live series and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lb_series_moment_log10(s: *const LbSeries, k: usize, out: *mut f64) -> LbStatus {
    guard(|| {
        let m = moment_bound(series_arg(s, "s")?, k)?;
        write(out, ln_rational(&m) / std::f64::consts::LN_10, "out")
    })
}

/// Threshold exceeded with probability at most `probability` at fixed `k`.
/// With `levy` the bound covers the running maximum.
///
/// # Safety
/// `s` must be a live series and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lb_epsilon_for_probability(
    s: *const LbSeries,
    k: usize,
    probability: f64,
    levy: bool,
    out: *mut f64,
) -> LbStatus {
    guard(|| {
        let eps = epsilon_for_probability(series_arg(s, "s")?, k, probability, levy)?;
        write(out, eps, "out")
    })
}

/// Smallest threshold over `k` in `1..=k_max`.
///
/// # Safety
/// `s` must be a live series and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lb_optimize_k(
    s: *const LbSeries,
    probability: f64,
    levy: bool,
    k_max: usize,
    out: *mut LbTailBound,
) -> LbStatus {
    guard(|| {
        if k_max == 0 {
            return Err(Error::NonPositive { what: "k_max", value: "0".into() }.into());
        }
        let r = optimize_k(series_arg(s, "s")?, probability, levy, k_max)?;
        write(out, LbTailBound::from(&r), "out")
    })
}

/// Probability bound for exceeding `epsilon` at fixed `k`.
///
/// # Safety
/// `s` must be a live series and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lb_tail_bound(
    s: *const LbSeries,
    k: usize,
    epsilon: f64,
    levy: bool,
    out: *mut LbTailBound,
) -> LbStatus {
    guard(|| {
        let r = tail_bound_at(series_arg(s, "s")?, k, epsilon, levy)?;
        write(out, LbTailBound::from(&r), "out")
    })
}

/// Closed-form bound on the summed impulse response of
/// `y_i = d_i - b1 y_{i-1} - b2 y_{i-2}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lb_filter_bibo_bound(b1: f64, b2: f64, out: *mut f64) -> LbStatus {
    guard(|| write(out, FilterSpec::new(b1, b2)?.bibo_bound()?, "out"))
}

/// `sum |y_i|` of the impulse response to within `tol`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lb_filter_coefficient_sum(b1: f64, b2: f64, tol: f64, out: *mut f64) -> LbStatus {
    guard(|| write(out, FilterSpec::new(b1, b2)?.exact_coefficient_sum(tol)?, "out"))
}

/// Two-sided Clopper-Pearson interval.
///
/// # Safety
/// `lo` and `hi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lb_clopper_pearson(
    successes: u64,
    trials: u64,
    level: f64,
    lo: *mut f64,
    hi: *mut f64,
) -> LbStatus {
    guard(|| {
        if trials == 0 || successes > trials {
            return Err(Error::InvalidConfig(format!("need 0 <= successes <= trials, trials >= 1; got {successes}/{trials}")).into());
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidConfig(format!("level {level} not in (0, 1)")).into());
        }
        let (l, h) = confidence_interval(successes, trials, level);
        write(lo, l, "lo")?;
        write(hi, h, "hi")
    })
}

/// Monte Carlo run from a JSON simulation config; writes the JSON report.
///
/// # Safety
/// `config_json` must be a valid C string and `out` writable; free the
/// string with [`lb_string_free`].
#[no_mangle]
pub unsafe extern "C" fn lb_simulate_json(config_json: *const c_char, out: *mut *mut c_char) -> LbStatus {
    guard(|| {
        let text = str_arg(config_json, "config_json")?;
        let config: SimConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let report = simulate_paths(&config)?;
        write(out, into_c_string(report.to_json()?), "out")
    })
}
