//! C ABI over the `tiadc` simulator.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every fallible call returns a
//! [`TiadcStatus`] and, on failure, leaves a message retrievable with
//! [`tiadc_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tiadc::cli::{self, RunConfig, Scenario, ScenarioResult};
use tiadc::ddsm::{generate_shaping_sequence, DdsmSpec};
use tiadc::scramble::solve_probabilities;
use tiadc::timing::ChannelTiming;
use tiadc::Error;

/// Status codes. The non-zero values used by the command-line tool keep
/// the same meaning here.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiadcStatus {
    Ok = 0,
    Io = 1,
    InvalidConfig = 2,
    Infeasible = 3,
    NullPointer = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiadcScenario {
    Ideal = 0,
    Uncorrected = 1,
    Scramble = 2,
    Shape = 3,
}

impl From<TiadcScenario> for Scenario {
    fn from(s: TiadcScenario) -> Self {
        match s {
            TiadcScenario::Ideal => Scenario::Ideal,
            TiadcScenario::Uncorrected => Scenario::Uncorrected,
            TiadcScenario::Scramble => Scenario::Scramble,
            TiadcScenario::Shape => Scenario::Shape,
        }
    }
}

/// Shaping modulator parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TiadcDdsmParams {
    pub order: u32,
    pub levels: u32,
    pub step: f64,
    pub input_bits: u32,
    pub dither: bool,
}

impl From<TiadcDdsmParams> for DdsmSpec {
    fn from(p: TiadcDdsmParams) -> Self {
        DdsmSpec {
            order: p.order,
            levels: p.levels,
            step: p.step,
            input_bits: p.input_bits,
            dither: p.dither,
        }
    }
}

/// Opaque run configuration.
pub struct TiadcConfig {
    inner: RunConfig,
}

/// Opaque result of one scenario.
pub struct TiadcResult {
    inner: ScenarioResult,
    metrics_json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> TiadcStatus {
    match cli::exit_code(err) {
        1 => TiadcStatus::Io,
        3 => TiadcStatus::Infeasible,
        _ => TiadcStatus::InvalidConfig,
    }
}

fn fail(err: Error) -> TiadcStatus {
    set_error(err.to_string());
    status_of(&err)
}

/// Runs `f`, converting panics into [`TiadcStatus::Panic`].
fn guard(f: impl FnOnce() -> TiadcStatus) -> TiadcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            TiadcStatus::Panic
        }
    }
}

/// Message for the most recent failure on this thread, or null. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn tiadc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tiadc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Built-in default configuration. Never null.
#[no_mangle]
pub extern "C" fn tiadc_config_default() -> *mut TiadcConfig {
    Box::into_raw(Box::new(TiadcConfig {
        inner: RunConfig::default(),
    }))
}

/// Parses and validates a TOML configuration.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tiadc_config_from_toml(
    text: *const c_char,
    out: *mut *mut TiadcConfig,
) -> TiadcStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            set_error("null pointer");
            return TiadcStatus::NullPointer;
        }
        // SAFETY: checked non-null; caller guarantees NUL termination.
        let text = match unsafe { CStr::from_ptr(text) }.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("configuration is not UTF-8");
                return TiadcStatus::InvalidConfig;
            }
        };
        match RunConfig::from_toml(text) {
            Ok(inner) => {
                // SAFETY: checked non-null.
                unsafe { *out = Box::into_raw(Box::new(TiadcConfig { inner })) };
                TiadcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `config` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tiadc_config_free(config: *mut TiadcConfig) {
    if !config.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(config) });
    }
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tiadc_config_set_seed(config: *mut TiadcConfig, seed: u64) -> TiadcStatus {
    guard(|| {
        // SAFETY: caller guarantees a live handle or null.
        let Some(c) = (unsafe { config.as_mut() }) else {
            return TiadcStatus::NullPointer;
        };
        let mut next = c.inner.clone();
        next.seed = seed;
        match next.validate() {
            Ok(()) => {
                c.inner = next;
                TiadcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tiadc_config_set_samples(
    config: *mut TiadcConfig,
    samples: usize,
) -> TiadcStatus {
    guard(|| {
        // SAFETY: caller guarantees a live handle or null.
        let Some(c) = (unsafe { config.as_mut() }) else {
            return TiadcStatus::NullPointer;
        };
        let mut next = c.inner.clone();
        next.samples = samples;
        match next.validate() {
            Ok(()) => {
                c.inner = next;
                TiadcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// SHA-256 of the canonical configuration as 64 hex digits plus NUL.
/// `buf` must hold at least 65 bytes.
///
/// # Safety
/// `config` must be a live handle and `buf` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tiadc_config_hash(
    config: *const TiadcConfig,
    buf: *mut c_char,
    len: usize,
) -> TiadcStatus {
    guard(|| {
        // SAFETY: caller guarantees a live handle or null.
        let Some(c) = (unsafe { config.as_ref() }) else {
            return TiadcStatus::NullPointer;
        };
        if buf.is_null() {
            return TiadcStatus::NullPointer;
        }
        let hash = c.inner.hash();
        if len < hash.len() + 1 {
            set_error(format!("buffer needs {} bytes", hash.len() + 1));
            return TiadcStatus::BufferTooSmall;
        }
        // SAFETY: `buf` holds at least hash.len() + 1 bytes.
        unsafe {
            ptr::copy_nonoverlapping(hash.as_ptr().cast(), buf, hash.len());
            *buf.add(hash.len()) = 0;
        }
        TiadcStatus::Ok
    })
}

/// Simulates and measures one scenario.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tiadc_run(
    config: *const TiadcConfig,
    scenario: TiadcScenario,
    out: *mut *mut TiadcResult,
) -> TiadcStatus {
    guard(|| {
        // SAFETY: caller guarantees a live handle or null.
        let Some(c) = (unsafe { config.as_ref() }) else {
            return TiadcStatus::NullPointer;
        };
        if out.is_null() {
            return TiadcStatus::NullPointer;
        }
        match cli::run_scenario(&c.inner, scenario.into()) {
            Ok(inner) => {
                let json = cli::metrics_json(std::slice::from_ref(&inner.metrics));
                let metrics_json = CString::new(json).unwrap_or_default();
                // SAFETY: checked non-null.
                unsafe {
                    *out = Box::into_raw(Box::new(TiadcResult {
                        inner,
                        metrics_json,
                    }))
                };
                TiadcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `result` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tiadc_result_free(result: *mut TiadcResult) {
    if !result.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(result) });
    }
}

/// Measured SFDR in dB.
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tiadc_result_sfdr_measured(
    result: *const TiadcResult,
    out: *mut f64,
) -> TiadcStatus {
    // SAFETY: caller guarantees validity or null.
    match unsafe { (result.as_ref(), out.as_mut()) } {
        (Some(r), Some(o)) => {
            *o = r.inner.metrics.sfdr_db_measured;
            TiadcStatus::Ok
        }
        _ => TiadcStatus::NullPointer,
    }
}

/// Closed-form SFDR in dB; `+INFINITY` when the residual vanishes.
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tiadc_result_sfdr_predicted(
    result: *const TiadcResult,
    out: *mut f64,
) -> TiadcStatus {
    // SAFETY: caller guarantees validity or null.
    match unsafe { (result.as_ref(), out.as_mut()) } {
        (Some(r), Some(o)) => {
            *o = r.inner.metrics.sfdr_db_predicted.unwrap_or(f64::INFINITY);
            TiadcStatus::Ok
        }
        _ => TiadcStatus::NullPointer,
    }
}

/// Number of spectrum bins.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tiadc_result_spectrum_len(result: *const TiadcResult) -> usize {
    // SAFETY: caller guarantees validity or null.
    unsafe { result.as_ref() }.map_or(0, |r| r.inner.spectrum.power.len())
}

/// Copies bin frequencies (cycles/sample) and PSD (dB) into caller buffers
/// of `len` elements each. Either buffer may be null to skip it.
///
/// # Safety
/// `result` must be a live handle; non-null buffers must be valid for `len`
/// elements.
#[no_mangle]
pub unsafe extern "C" fn tiadc_result_spectrum(
    result: *const TiadcResult,
    freqs: *mut f64,
    psd_db: *mut f64,
    len: usize,
) -> TiadcStatus {
    guard(|| {
        // SAFETY: caller guarantees validity or null.
        let Some(r) = (unsafe { result.as_ref() }) else {
            return TiadcStatus::NullPointer;
        };
        let spectrum = &r.inner.spectrum;
        let n = spectrum.power.len();
        if len < n {
            set_error(format!("buffers need {n} elements"));
            return TiadcStatus::BufferTooSmall;
        }
        if !freqs.is_null() {
            // SAFETY: valid for `len >= n` elements.
            unsafe { ptr::copy_nonoverlapping(spectrum.freqs.as_ptr(), freqs, n) };
        }
        if !psd_db.is_null() {
            let db = spectrum.psd_db();
            // SAFETY: valid for `len >= n` elements.
            unsafe { ptr::copy_nonoverlapping(db.as_ptr(), psd_db, n) };
        }
        TiadcStatus::Ok
    })
}

/// Metrics as a JSON array with one object, owned by the result handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tiadc_result_metrics_json(result: *const TiadcResult) -> *const c_char {
    // SAFETY: caller guarantees validity or null.
    unsafe { result.as_ref() }.map_or(ptr::null(), |r| r.metrics_json.as_ptr())
}

/// Edge probabilities `[p(-1), p(0), p(+1)]` for normalized skew `alpha`
/// and second moment `g_squared`.
///
/// # Safety
/// `out` must be valid for 3 elements.
#[no_mangle]
pub unsafe extern "C" fn tiadc_solve_probabilities(
    alpha: f64,
    g_squared: f64,
    out: *mut f64,
) -> TiadcStatus {
    guard(|| {
        if out.is_null() {
            return TiadcStatus::NullPointer;
        }
        match solve_probabilities(alpha, g_squared) {
            Ok(p) => {
                let v = [p.p_minus1(), p.p_zero(), p.p_plus1()];
                // SAFETY: valid for 3 elements.
                unsafe { ptr::copy_nonoverlapping(v.as_ptr(), out, 3) };
                TiadcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Default shaping modulator parameters.
#[no_mangle]
pub extern "C" fn tiadc_ddsm_default_params() -> TiadcDdsmParams {
    let s = DdsmSpec::default();
    TiadcDdsmParams {
        order: s.order,
        levels: s.levels,
        step: s.step,
        input_bits: s.input_bits,
        dither: s.dither,
    }
}

/// Edge offsets for a channel with skew `tau` and edge step `delta`.
///
/// # Safety
/// `out` must be valid for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn tiadc_ddsm_sequence(
    tau: f64,
    delta: f64,
    params: TiadcDdsmParams,
    seed: u64,
    stream_id: u64,
    out: *mut f64,
    len: usize,
) -> TiadcStatus {
    guard(|| {
        if out.is_null() && len > 0 {
            return TiadcStatus::NullPointer;
        }
        let run = ChannelTiming::new(0, tau, delta)
            .and_then(|ch| generate_shaping_sequence(&ch, &params.into(), len, seed, stream_id));
        match run {
            Ok(seq) => {
                if len > 0 {
                    // SAFETY: valid for `len` elements.
                    unsafe { ptr::copy_nonoverlapping(seq.as_ptr(), out, len) };
                }
                TiadcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
