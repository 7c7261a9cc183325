// Copyright 2026 The ionspam Authors
// SPDX-License-Identifier: Apache-2.0

//! C ABI over the `ionspam` library.
//!
//! Every fallible function returns an [`IonspamStatus`]; on failure the
//! message is available from [`ionspam_last_error`] on the same thread.
//! Species and detector parameters live behind opaque handles that the
//! caller releases with the matching `_free` function. Panics never cross
//! the boundary; they surface as `IONSPAM_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use ionspam::config::ProtocolKind;
use ionspam::detection::{classify_bayes, classify_threshold, decay_probability, DetectionConfig, Readout, ShelvingConfig, ShotRecord, TruthState};
use ionspam::experiment::build_protocol;
use ionspam::pumpsim::{run_prep, PopulationVector, PulseParams, StateSpace};
use ionspam::ratemodel::prep_error_steady_state;
use ionspam::species::{builtin_species, find_species, SpeciesParams};
use ionspam::stats::wilson_interval;
use ionspam::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IonspamStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownSpecies = 3,
    ModelUndefined = 4,
    BufferTooSmall = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IonspamProtocol {
    Maop = 0,
    Nbop = 1,
    Polarization = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IonspamReadout {
    Bright = 0,
    Dark = 1,
}

/// Opaque species parameters.
pub struct IonspamSpecies(SpeciesParams);

/// Opaque detection parameters.
pub struct IonspamDetector(DetectionConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> IonspamStatus {
    match err {
        Error::UnknownSpecies(_) => IonspamStatus::UnknownSpecies,
        Error::ModelUndefined(_) | Error::NonFinite { .. } | Error::InconsistentBudget { .. } => {
            IonspamStatus::ModelUndefined
        }
        Error::Io(_) | Error::Archive { .. } => IonspamStatus::Internal,
        _ => IonspamStatus::InvalidArgument,
    }
}

/// Runs `body`, converting errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), (IonspamStatus, String)>) -> IonspamStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => IonspamStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            IonspamStatus::Internal
        }
    }
}

fn lib_err(err: Error) -> (IonspamStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (IonspamStatus, String) {
    (IonspamStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn as_ref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, (IonspamStatus, String)> {
    // SAFETY: caller guarantees a non-null `ptr` is valid for reads.
    unsafe { ptr.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn write<T>(ptr: *mut T, value: T, what: &str) -> Result<(), (IonspamStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and, per the caller's contract, valid for writes.
    unsafe { ptr.write(value) };
    Ok(())
}

unsafe fn counts_record(counts: *const u32, len: usize) -> Result<ShotRecord, (IonspamStatus, String)> {
    if counts.is_null() && len > 0 {
        return Err(null("counts"));
    }
    let slice = if len == 0 {
        &[][..]
    } else {
        // SAFETY: non-null and valid for `len` reads per the caller's contract.
        unsafe { std::slice::from_raw_parts(counts, len) }
    };
    Ok(ShotRecord {
        shot: 0,
        truth: TruthState::PreparedZero,
        segment_counts: slice.to_vec(),
        truth_decay_time_us: None,
    })
}

fn readout(r: Readout) -> IonspamReadout {
    match r {
        Readout::Bright => IonspamReadout::Bright,
        Readout::Dark => IonspamReadout::Dark,
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ionspam_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Looks up a built-in species by name, e.g. "137Ba+".
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionspam_species_builtin(
    name: *const c_char,
    out: *mut *mut IonspamSpecies,
) -> IonspamStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        // SAFETY: non-null and NUL-terminated per the contract.
        let name = unsafe { CStr::from_ptr(name) }
            .to_str()
            .map_err(|_| (IonspamStatus::InvalidArgument, "name is not UTF-8".to_string()))?;
        let table = builtin_species();
        let species = find_species(&table, name).map_err(lib_err)?.clone();
        let handle = Box::into_raw(Box::new(IonspamSpecies(species)));
        // SAFETY: `out` checked inside `write`.
        unsafe { write(out, handle, "out") }.inspect_err(|_| {
            // SAFETY: `handle` came from Box::into_raw above and was not shared.
            drop(unsafe { Box::from_raw(handle) });
        })
    })
}

/// # Safety
/// `species` must come from `ionspam_species_builtin` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn ionspam_species_free(species: *mut IonspamSpecies) {
    if !species.is_null() {
        // SAFETY: produced by Box::into_raw and freed once per the contract.
        drop(unsafe { Box::from_raw(species) });
    }
}

/// Steady-state preparation error from the closed-form rate model.
///
/// # Safety
/// `species` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionspam_species_prep_error(
    species: *const IonspamSpecies,
    out: *mut f64,
) -> IonspamStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let s = unsafe { as_ref(species, "species") }?;
        let eps = prep_error_steady_state(&s.0).map_err(lib_err)?;
        // SAFETY: forwarded caller contract.
        unsafe { write(out, eps, "out") }
    })
}

/// Preparation error after the preamble and each of `cycles` cycles.
/// `out_errors` needs room for `cycles + 1` values; `written` receives the
/// count. `flush_cycles` applies to NBOP only. With `ideal`, pulses are
/// perfect and no leak is applied.
///
/// # Safety
/// `species` must be a live handle; `out_errors` must be writable for
/// `capacity` values and `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionspam_simulate_prep(
    species: *const IonspamSpecies,
    protocol: IonspamProtocol,
    cycles: u32,
    flush_cycles: u32,
    ideal: bool,
    out_errors: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> IonspamStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let s = &unsafe { as_ref(species, "species") }?.0;
        let kind = match protocol {
            IonspamProtocol::Maop => ProtocolKind::Maop,
            IonspamProtocol::Nbop => ProtocolKind::Nbop,
            IonspamProtocol::Polarization => ProtocolKind::Polarization,
        };
        if flush_cycles > cycles && kind == ProtocolKind::Nbop {
            return Err((IonspamStatus::InvalidArgument, "flush_cycles exceeds cycles".into()));
        }
        let pulses = if ideal { PulseParams::ideal() } else { PulseParams::default() };
        let proto = build_protocol(kind, cycles, Some(flush_cycles), &pulses, s);
        let space = Arc::new(StateSpace::for_species(s).map_err(lib_err)?);
        let init = PopulationVector::uniform_ground(space).map_err(lib_err)?;
        let series = run_prep(&proto, s, &init).map_err(lib_err)?;
        // SAFETY: forwarded caller contract.
        unsafe { write(written, series.len(), "written") }?;
        if series.len() > capacity {
            return Err((
                IonspamStatus::BufferTooSmall,
                format!("need {} values, have {capacity}", series.len()),
            ));
        }
        if out_errors.is_null() {
            return Err(null("out_errors"));
        }
        for (i, point) in series.iter().enumerate() {
            // SAFETY: i < series.len() <= capacity.
            unsafe { out_errors.add(i).write(point.prep_error) };
        }
        Ok(())
    })
}

/// Wilson score interval for `errors` of `n` at quantile `z`.
///
/// # Safety
/// `low` and `high` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionspam_wilson_interval(
    errors: u64,
    n: u64,
    z: f64,
    low: *mut f64,
    high: *mut f64,
) -> IonspamStatus {
    guard(|| {
        let (lo, hi) = wilson_interval(errors, n, z).map_err(lib_err)?;
        // SAFETY: forwarded caller contract.
        unsafe { write(low, lo, "low") }?;
        // SAFETY: forwarded caller contract.
        unsafe { write(high, hi, "high") }
    })
}

/// Probability that a shelved ion decays within `duration_us`.
#[no_mangle]
pub extern "C" fn ionspam_decay_probability(duration_us: f64, lifetime_s: f64) -> f64 {
    decay_probability(duration_us, lifetime_s)
}

/// Probability that |0> survives three shelving pulses unshelved.
#[no_mangle]
pub extern "C" fn ionspam_cabinet_residual(f1: f64, f2: f64, f3: f64) -> f64 {
    ShelvingConfig {
        pulse_fidelities: [f1, f2, f3],
        ..ShelvingConfig::default()
    }
    .residual_unshelved()
}

/// Detector with the default ten 35 µs segments and rates.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionspam_detector_new(out: *mut *mut IonspamDetector) -> IonspamStatus {
    guard(|| {
        let handle = Box::into_raw(Box::new(IonspamDetector(DetectionConfig::default())));
        // SAFETY: `out` checked inside `write`.
        unsafe { write(out, handle, "out") }.inspect_err(|_| {
            // SAFETY: `handle` came from Box::into_raw above and was not shared.
            drop(unsafe { Box::from_raw(handle) });
        })
    })
}

/// # Safety
/// `detector` must come from `ionspam_detector_new` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn ionspam_detector_free(detector: *mut IonspamDetector) {
    if !detector.is_null() {
        // SAFETY: produced by Box::into_raw and freed once per the contract.
        drop(unsafe { Box::from_raw(detector) });
    }
}

/// Sets count rates in counts per µs. Leaves the detector unchanged on error.
///
/// # Safety
/// `detector` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ionspam_detector_set_rates(
    detector: *mut IonspamDetector,
    bright_rate_per_us: f64,
    dark_rate_per_us: f64,
) -> IonspamStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let d = unsafe { detector.as_mut() }.ok_or_else(|| null("detector"))?;
        let next = DetectionConfig {
            bright_rate_per_us,
            dark_rate_per_us,
            ..d.0
        };
        next.validate().map_err(lib_err)?;
        d.0 = next;
        Ok(())
    })
}

/// Threshold in use: bright iff total counts exceed it.
///
/// # Safety
/// `detector` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionspam_detector_threshold(
    detector: *const IonspamDetector,
    out: *mut u32,
) -> IonspamStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let d = unsafe { as_ref(detector, "detector") }?;
        // SAFETY: forwarded caller contract.
        unsafe { write(out, d.0.threshold(), "out") }
    })
}

/// Threshold discrimination of `len` segment counts.
///
/// # Safety
/// `detector` must be a live handle; `counts` must be readable for `len`
/// values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionspam_classify_threshold(
    detector: *const IonspamDetector,
    counts: *const u32,
    len: usize,
    out: *mut IonspamReadout,
) -> IonspamStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let d = unsafe { as_ref(detector, "detector") }?;
        // SAFETY: forwarded caller contract.
        let record = unsafe { counts_record(counts, len) }?;
        let label = readout(classify_threshold(&record, d.0.threshold()));
        // SAFETY: forwarded caller contract.
        unsafe { write(out, label, "out") }
    })
}

/// Sequential Bayesian discrimination. `segments_used` and
/// `posterior_bright` may be NULL.
///
/// # Safety
/// `detector` must be a live handle; `counts` must be readable for `len`
/// values; `out` must be writable; the optional outputs must be writable
/// when non-NULL.
#[no_mangle]
pub unsafe extern "C" fn ionspam_classify_bayes(
    detector: *const IonspamDetector,
    counts: *const u32,
    len: usize,
    out: *mut IonspamReadout,
    segments_used: *mut usize,
    posterior_bright: *mut f64,
) -> IonspamStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let d = unsafe { as_ref(detector, "detector") }?;
        // SAFETY: forwarded caller contract.
        let record = unsafe { counts_record(counts, len) }?;
        let outcome = classify_bayes(&record, &d.0);
        // SAFETY: forwarded caller contract.
        unsafe { write(out, readout(outcome.label), "out") }?;
        if !segments_used.is_null() {
            // SAFETY: non-null and writable per the contract.
            unsafe { segments_used.write(outcome.segments_used) };
        }
        if !posterior_bright.is_null() {
            // SAFETY: non-null and writable per the contract.
            unsafe { posterior_bright.write(outcome.posterior.bright) };
        }
        Ok(())
    })
}
