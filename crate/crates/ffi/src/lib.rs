//! C ABI over the `finkey` engine.
//!
//! Evaluators, results and sweeps are opaque heap handles owned by the
//! caller and released with the matching `*_free`. Every fallible call
//! returns a [`FinkeyStatus`]; on failure a message is kept per thread and
//! read back with [`finkey_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use finkey::channel::GlobalParams;
use finkey::concentration;
use finkey::npp::{NppEvaluator, NppParams};
use finkey::optimizer::{self, SearchSpace, SweepRequest};
use finkey::scs::{ScsEvaluator, ScsOptions, ScsParams};
use finkey::{definetti, report};
use finkey::{BudgetSplit, Error, GMode, KeyRateResult, LogEps, Mode, Protocol};

/// Outcome of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinkeyStatus {
    Ok = 0,
    NullPointer = 1,
    /// An argument is outside its mathematical domain.
    Domain = 2,
    Config = 3,
    DegenerateChannel = 4,
    InfiniteIntensity = 5,
    BudgetUnachievable = 6,
    InvalidArgument = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinkeyProtocol {
    Scs = 0,
    Npp = 1,
}

pub const FINKEY_CLAMP_PROBABILITY_CAP: u16 = 1 << 0;
pub const FINKEY_CLAMP_PHASE_ERRORS_CAPPED: u16 = 1 << 1;
pub const FINKEY_CLAMP_PHASE_ERROR_RATE_HALF: u16 = 1 << 2;
pub const FINKEY_CLAMP_BIT_ERROR_RATE_HALF: u16 = 1 << 3;
pub const FINKEY_CLAMP_KEY_FLOOR: u16 = 1 << 4;
pub const FINKEY_CLAMP_DECOY_FLOOR: u16 = 1 << 5;
pub const FINKEY_CLAMP_DECOY_CAP: u16 = 1 << 6;
pub const FINKEY_CLAMP_CORRECT_CAPPED: u16 = 1 << 7;
pub const FINKEY_CLAMP_NO_EVENTS: u16 = 1 << 8;

/// Analysis mode: finite key with the exact or bounded de Finetti
/// penalty, or the infinite-key limit.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinkeyMode {
    Exact = 0,
    PaperBound = 1,
    Asymptotic = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinkeyBound {
    ObservationUpper = 0,
    ObservationLower = 1,
    ExpectationUpper = 2,
    ExpectationLower = 3,
}

/// Device and channel description.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinkeyDevice {
    /// Dark-count probability per detector per pulse.
    pub p_d: f64,
    /// Misalignment error.
    pub e_d: f64,
    pub eta_d: f64,
    /// Error-correction inefficiency.
    pub f: f64,
    /// Fibre loss in dB/km.
    pub alpha_f: f64,
    pub eps_tot: f64,
    pub n_pulses: u64,
    pub distance_km: f64,
}

/// Protocol parameters. `nu` and `p0` are read for NPP only; `c0` for SCS
/// only, where NaN selects the default.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinkeyParams {
    pub mu: f64,
    pub nu: f64,
    pub p: f64,
    pub p0: f64,
    pub c0: f64,
}

enum Engine {
    Scs(ScsEvaluator),
    Npp(NppEvaluator),
}

/// Evaluator bound to one device, pulse count, distance and mode.
pub struct FinkeyEvaluator {
    engine: Engine,
}

/// One key-rate evaluation.
pub struct FinkeyResult {
    inner: KeyRateResult,
}

/// Optimized rows of a sweep, in distance order then pulse-count order,
/// with the asymptotic row last at each distance when requested.
pub struct FinkeySweep {
    rows: Vec<FinkeyResult>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FinkeyStatus {
    match e {
        Error::Domain { .. } => FinkeyStatus::Domain,
        Error::Config { .. } => FinkeyStatus::Config,
        Error::DegenerateChannel(_) => FinkeyStatus::DegenerateChannel,
        Error::InfiniteIntensity { .. } => FinkeyStatus::InfiniteIntensity,
        Error::BudgetUnachievable { .. } => FinkeyStatus::BudgetUnachievable,
    }
}

#[derive(Debug)]
struct Fail(FinkeyStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FinkeyStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, turning errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FinkeyStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FinkeyStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            FinkeyStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null(what))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn global(d: &FinkeyDevice) -> Result<GlobalParams, Fail> {
    let g = GlobalParams {
        p_d: d.p_d,
        e_d: d.e_d,
        eta_d: d.eta_d,
        f: d.f,
        alpha_f: d.alpha_f,
        eps_tot: LogEps::from_eps(d.eps_tot)?,
        n_pulses: d.n_pulses,
        distance_km: d.distance_km,
    };
    g.validate()?;
    Ok(g)
}

fn to_mode(m: FinkeyMode) -> Mode {
    match m {
        FinkeyMode::Exact => Mode::Finite(GMode::Exact),
        FinkeyMode::PaperBound => Mode::Finite(GMode::PaperBound),
        FinkeyMode::Asymptotic => Mode::Asymptotic,
    }
}

fn protocol(p: FinkeyProtocol) -> Protocol {
    match p {
        FinkeyProtocol::Scs => Protocol::Scs,
        FinkeyProtocol::Npp => Protocol::Npp,
    }
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn finkey_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn finkey_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reference device (dark counts 1e-9, misalignment 4%, detector efficiency
/// 30%, f = 1.1, 0.2 dB/km, eps_tot = 1e-10).
#[no_mangle]
pub extern "C" fn finkey_device_default(n_pulses: u64, distance_km: f64) -> FinkeyDevice {
    let g = GlobalParams::table1(n_pulses, distance_km);
    FinkeyDevice {
        p_d: g.p_d,
        e_d: g.e_d,
        eta_d: g.eta_d,
        f: g.f,
        alpha_f: g.alpha_f,
        eps_tot: g.eps_tot.to_linear_lossy(),
        n_pulses,
        distance_km,
    }
}

/// # Safety
/// `device` must point to a valid `FinkeyDevice`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn finkey_evaluator_new(
    proto: FinkeyProtocol,
    device: *const FinkeyDevice,
    mode: FinkeyMode,
    out: *mut *mut FinkeyEvaluator,
) -> FinkeyStatus {
    guard(|| {
        let g = global(get(device, "device")?)?;
        let engine = match proto {
            FinkeyProtocol::Scs => {
                Engine::Scs(ScsEvaluator::new(&g, to_mode(mode), ScsOptions::default())?)
            }
            FinkeyProtocol::Npp => Engine::Npp(NppEvaluator::new(
                &g,
                to_mode(mode),
                BudgetSplit::default_for(Protocol::Npp),
            )?),
        };
        put(
            out,
            Box::into_raw(Box::new(FinkeyEvaluator { engine })),
            "out",
        )
    })
}

/// # Safety
/// `ev` must come from [`finkey_evaluator_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn finkey_evaluator_free(ev: *mut FinkeyEvaluator) {
    if !ev.is_null() {
        drop(Box::from_raw(ev));
    }
}

/// # Safety
/// `ev` and `params` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn finkey_evaluate(
    ev: *const FinkeyEvaluator,
    params: *const FinkeyParams,
    out: *mut *mut FinkeyResult,
) -> FinkeyStatus {
    guard(|| {
        let ev = get(ev, "evaluator")?;
        let p = get(params, "params")?;
        let inner = match &ev.engine {
            Engine::Scs(e) => e.evaluate(&ScsParams {
                mu: p.mu,
                p: p.p,
                c0: (!p.c0.is_nan()).then_some(p.c0),
            })?,
            Engine::Npp(e) => e.evaluate(&NppParams {
                mu: p.mu,
                nu: p.nu,
                p: p.p,
                p0: p.p0,
            })?,
        };
        put(out, Box::into_raw(Box::new(FinkeyResult { inner })), "out")
    })
}

/// # Safety
/// `r` must come from [`finkey_evaluate`]; results borrowed from a sweep
/// are freed with the sweep instead.
#[no_mangle]
pub unsafe extern "C" fn finkey_result_free(r: *mut FinkeyResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Secret key bits per pulse. NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn finkey_result_rate(r: *const FinkeyResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |x| x.inner.rate)
}

/// Key length in bits, floored at zero. NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn finkey_result_key_bits(r: *const FinkeyResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |x| x.inner.l_bits)
}

/// Key length before flooring. NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn finkey_result_raw_bits(r: *const FinkeyResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |x| x.inner.raw_bits)
}

/// Phase-error count bound (SCS) or phase-correct count bound (NPP). NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn finkey_result_estimate(r: *const FinkeyResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |x| x.inner.estimate)
}

/// Distance of the evaluated point in km. NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn finkey_result_distance_km(r: *const FinkeyResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |x| x.inner.distance_km)
}

/// Bitwise OR of the clamps applied. Zero for a null handle.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn finkey_result_clamps(r: *const FinkeyResult) -> u16 {
    r.as_ref()
        .map_or(0, |x| x.inner.clamps.iter().fold(0, |m, c| m | c.bit()))
}

/// Looks up a named term of the key-length decomposition such as
/// `phase_entropy` or `ec_leak`.
///
/// # Safety
/// `r` must be a live result, `name` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn finkey_result_term(
    r: *const FinkeyResult,
    name: *const c_char,
    out: *mut f64,
) -> FinkeyStatus {
    guard(|| {
        let r = get(r, "result")?;
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Fail(FinkeyStatus::InvalidArgument, "name is not UTF-8".into()))?;
        let v = r.inner.term(name).ok_or_else(|| {
            Fail(
                FinkeyStatus::InvalidArgument,
                format!("no term named `{name}`"),
            )
        })?;
        put(out, v, "out")
    })
}

/// Optimizes every `(distance, pulse count)` cell with the default search
/// space, plus an asymptotic row per distance when `asymptotic` is set.
///
/// # Safety
/// `device` must be valid, the arrays must hold the given number of
/// elements and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn finkey_sweep(
    proto: FinkeyProtocol,
    device: *const FinkeyDevice,
    mode: FinkeyMode,
    distances_km: *const f64,
    n_distances: usize,
    n_pulses: *const u64,
    n_counts: usize,
    asymptotic: bool,
    out: *mut *mut FinkeySweep,
) -> FinkeyStatus {
    guard(|| {
        let template = get(device, "device")?;
        let g_mode = match mode {
            FinkeyMode::PaperBound => GMode::PaperBound,
            FinkeyMode::Exact => GMode::Exact,
            FinkeyMode::Asymptotic => {
                return Err(Fail(
                    FinkeyStatus::InvalidArgument,
                    "sweep mode must be finite; request asymptotic rows with the flag".into(),
                ))
            }
        };
        let req = SweepRequest {
            protocol: protocol(proto),
            template: global(&FinkeyDevice {
                n_pulses: template.n_pulses.max(1),
                ..*template
            })?,
            distances: slice(distances_km, n_distances, "distances_km")?.to_vec(),
            n_values: slice(n_pulses, n_counts, "n_pulses")?.to_vec(),
            g_mode,
            asymptotic,
            space: SearchSpace::default(),
            scs: ScsOptions::default(),
        };
        let rows = optimizer::sweep(&req)?
            .into_iter()
            .map(|inner| FinkeyResult { inner })
            .collect();
        put(out, Box::into_raw(Box::new(FinkeySweep { rows })), "out")
    })
}

/// # Safety
/// `s` must be null or a live sweep handle.
#[no_mangle]
pub unsafe extern "C" fn finkey_sweep_len(s: *const FinkeySweep) -> usize {
    s.as_ref().map_or(0, |s| s.rows.len())
}

/// Borrowed row `i`, or null when out of range. Do not free it.
///
/// # Safety
/// `s` must be null or a live sweep handle.
#[no_mangle]
pub unsafe extern "C" fn finkey_sweep_get(s: *const FinkeySweep, i: usize) -> *const FinkeyResult {
    s.as_ref()
        .and_then(|s| s.rows.get(i))
        .map_or(ptr::null(), |r| r as *const FinkeyResult)
}

/// Writes the sweep as CSV, same layout as the command-line tool.
///
/// # Safety
/// `s` must be a live sweep and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn finkey_sweep_write_csv(
    s: *const FinkeySweep,
    path: *const c_char,
) -> FinkeyStatus {
    guard(|| {
        let s = get(s, "sweep")?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(FinkeyStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let file = std::fs::File::create(path)
            .map_err(|e| Fail(FinkeyStatus::Io, format!("{path}: {e}")))?;
        let rows: Vec<KeyRateResult> = s.rows.iter().map(|r| r.inner.clone()).collect();
        report::write_csv(std::io::BufWriter::new(file), &rows)
            .map_err(|e| Fail(FinkeyStatus::Io, e.to_string()))
    })
}

/// # Safety
/// `s` must come from [`finkey_sweep`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn finkey_sweep_free(s: *mut FinkeySweep) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Natural log of the de Finetti factor `g(N, x)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn finkey_ln_g(
    n: u64,
    x: u64,
    mode: FinkeyMode,
    out: *mut f64,
) -> FinkeyStatus {
    guard(|| {
        let g_mode = match mode {
            FinkeyMode::PaperBound => GMode::PaperBound,
            _ => GMode::Exact,
        };
        put(out, definetti::ln_penalty(n, x, g_mode)?, "out")
    })
}

/// Chernoff bound of `value` at failure probability `exp(-t)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn finkey_chernoff(
    bound: FinkeyBound,
    value: f64,
    t: f64,
    out: *mut f64,
) -> FinkeyStatus {
    guard(|| {
        let c = concentration::ChernoffInput::new(value, LogEps::new(t)?)?;
        let v = match bound {
            FinkeyBound::ObservationUpper => c.observation_upper(),
            FinkeyBound::ObservationLower => c.observation_lower(),
            FinkeyBound::ExpectationUpper => c.expectation_upper(),
            FinkeyBound::ExpectationLower => c.expectation_lower(),
        };
        put(out, v, "out")
    })
}
