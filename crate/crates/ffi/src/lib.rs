//! C ABI for the perfect-sampling library.
//!
//! Models and random number generators are opaque handles created by the
//! `ps_*_new` functions and released by the matching `ps_*_free`. Every
//! fallible call returns a [`PsStatus`]; on failure the message is available
//! from [`ps_last_error`] on the same thread. Permutations are arrays of
//! labels `1..=n`, front of the list first.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use perfect_sampling::analytics::{fmmr_runtime_law, id_runtime_law, rev_runtime_law};
use perfect_sampling::mtf::incremental_sampler;
use perfect_sampling::{
    cftp, fmmr, Coupling, Error, MtfModel, OrderedChain, Permutation, SamplerConfig, ThreeStateModel, WeightVector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    Unsupported = 4,
    Timeout = 5,
    Budget = 6,
    Internal = 7,
    Panic = 8,
}

/// Opaque move-to-front model.
pub struct PsMtfModel {
    model: MtfModel,
}

/// Opaque seeded random number generator (ChaCha8).
pub struct PsRng {
    rng: ChaCha8Rng,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PsStatus {
    match err {
        Error::InvalidInput(_) | Error::DegenerateState(_) | Error::Imputation(_) => PsStatus::InvalidInput,
        Error::DimensionMismatch { .. } => PsStatus::DimensionMismatch,
        Error::Unsupported(_) => PsStatus::Unsupported,
        Error::Timeout { .. } => PsStatus::Timeout,
        Error::Budget { .. } => PsStatus::Budget,
        _ => PsStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (PsStatus, String)>) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside perfect-sampling".into());
            PsStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (PsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PsStatus, String) {
    (PsStatus::NullPointer, format!("{what} is null"))
}

fn config(max_window: u64, doubling: bool) -> SamplerConfig {
    if doubling {
        SamplerConfig::doubling(max_window)
    } else {
        SamplerConfig::vanilla(max_window)
    }
}

unsafe fn read_perm(labels: *const u32, n: usize) -> Result<Permutation, (PsStatus, String)> {
    if labels.is_null() {
        return Err(null("permutation"));
    }
    let v = std::slice::from_raw_parts(labels, n).to_vec();
    Permutation::new(v).map_err(lib_err)
}

unsafe fn write_perm(z: &Permutation, out: *mut u32) {
    ptr::copy_nonoverlapping(z.labels().as_ptr(), out, z.len());
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New generator seeded from `seed`. Free with [`ps_rng_free`].
#[no_mangle]
pub extern "C" fn ps_rng_new(seed: u64) -> *mut PsRng {
    Box::into_raw(Box::new(PsRng { rng: ChaCha8Rng::seed_from_u64(seed) }))
}

/// # Safety
/// `rng` must come from [`ps_rng_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_rng_free(rng: *mut PsRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Builds a move-to-front model from `n` positive, non-increasing weights,
/// normalized internally. On success `*out` owns the model.
///
/// # Safety
/// `weights` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_mtf_new(weights: *const f64, n: usize, out: *mut *mut PsMtfModel) -> PsStatus {
    guard(|| {
        if weights.is_null() {
            return Err(null("weights"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let raw = std::slice::from_raw_parts(weights, n).to_vec();
        let w = WeightVector::from_unnormalized(raw).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(PsMtfModel { model: MtfModel::new(w) }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`ps_mtf_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_mtf_free(model: *mut PsMtfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of records `n`, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_mtf_len(model: *const PsMtfModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.n())
}

/// One CFTP run with the monotone coupling. Writes `n` labels to
/// `out_perm` and the coalescence window to `out_window` if non-null.
///
/// # Safety
/// Handles must be live; `out_perm` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn ps_mtf_cftp(
    model: *const PsMtfModel,
    rng: *mut PsRng,
    max_window: u64,
    doubling: bool,
    out_perm: *mut u32,
    out_window: *mut u64,
) -> PsStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.model;
        let r = &mut rng.as_mut().ok_or_else(|| null("rng"))?.rng;
        if out_perm.is_null() {
            return Err(null("out_perm"));
        }
        let rec = cftp(m, &Coupling::monotone(m), &config(max_window, doubling), r).map_err(lib_err)?;
        write_perm(&rec.output, out_perm);
        if let Some(w) = out_window.as_mut() {
            *w = rec.window;
        }
        Ok(())
    })
}

/// One FMMR run from `start` (`n` labels), or from the reversal when
/// `start` is null.
///
/// # Safety
/// Handles must be live; `start` must be null or hold `n` values;
/// `out_perm` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn ps_mtf_fmmr(
    model: *const PsMtfModel,
    rng: *mut PsRng,
    start: *const u32,
    max_window: u64,
    doubling: bool,
    out_perm: *mut u32,
    out_window: *mut u64,
) -> PsStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.model;
        let r = &mut rng.as_mut().ok_or_else(|| null("rng"))?.rng;
        if out_perm.is_null() {
            return Err(null("out_perm"));
        }
        let z0 = if start.is_null() { m.top() } else { read_perm(start, m.n())? };
        let rec = fmmr(m, &Coupling::monotone(m), &z0, &config(max_window, doubling), r).map_err(lib_err)?;
        write_perm(&rec.output, out_perm);
        if let Some(w) = out_window.as_mut() {
            *w = rec.window;
        }
        Ok(())
    })
}

/// One draw from the incremental exact sampler.
///
/// # Safety
/// Handles must be live; `out_perm` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn ps_mtf_incremental(model: *const PsMtfModel, rng: *mut PsRng, out_perm: *mut u32) -> PsStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.model;
        let r = &mut rng.as_mut().ok_or_else(|| null("rng"))?.rng;
        if out_perm.is_null() {
            return Err(null("out_perm"));
        }
        write_perm(&incremental_sampler(m.weights(), r), out_perm);
        Ok(())
    })
}

/// Stationary probability of the permutation `perm` (`n` labels).
///
/// # Safety
/// `model` must be live; `perm` must hold `n` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ps_mtf_stationary_prob(model: *const PsMtfModel, perm: *const u32, out: *mut f64) -> PsStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.model;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let z = read_perm(perm, m.n())?;
        *out = m.stationary_prob(&z).map_err(lib_err)?;
        Ok(())
    })
}

/// Exact mean FMMR windows from the reversal (`out_rev`) and the identity
/// (`out_id`). Either output may be null.
///
/// # Safety
/// `model` must be live.
#[no_mangle]
pub unsafe extern "C" fn ps_mtf_runtime_means(
    model: *const PsMtfModel,
    out_rev: *mut f64,
    out_id: *mut f64,
) -> PsStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.model;
        if let Some(o) = out_rev.as_mut() {
            *o = rev_runtime_law(m.weights()).mean();
        }
        if let Some(o) = out_id.as_mut() {
            *o = id_runtime_law(m.weights()).mean();
        }
        Ok(())
    })
}

/// Exact mean FMMR window from `start` (`n` labels).
///
/// # Safety
/// `model` must be live; `start` must hold `n` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ps_mtf_fmmr_mean(model: *const PsMtfModel, start: *const u32, out: *mut f64) -> PsStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.model;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let z = read_perm(start, m.n())?;
        *out = fmmr_runtime_law(m.weights(), &z).map_err(lib_err)?.mean();
        Ok(())
    })
}

/// One run of CFTP (`use_fmmr == false`) or FMMR from `start` on the
/// three-state chain with parameter `epsilon`.
///
/// # Safety
/// `rng` must be live; `out_state` writable; `out_window` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ps_three_state_sample(
    epsilon: f64,
    use_fmmr: bool,
    start: u8,
    rng: *mut PsRng,
    max_window: u64,
    out_state: *mut u8,
    out_window: *mut u64,
) -> PsStatus {
    guard(|| {
        let r = &mut rng.as_mut().ok_or_else(|| null("rng"))?.rng;
        let out_state = out_state.as_mut().ok_or_else(|| null("out_state"))?;
        let model = ThreeStateModel::new(epsilon).map_err(lib_err)?;
        let coupling = Coupling::all_states(&model).map_err(lib_err)?;
        let cfg = SamplerConfig::vanilla(max_window);
        let rec = if use_fmmr { fmmr(&model, &coupling, &start, &cfg, r) } else { cftp(&model, &coupling, &cfg, r) }
            .map_err(lib_err)?;
        *out_state = rec.output;
        if let Some(w) = out_window.as_mut() {
            *w = rec.window;
        }
        Ok(())
    })
}
