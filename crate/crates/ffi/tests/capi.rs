// Copyright 2026 The ionspam Authors
// SPDX-License-Identifier: Apache-2.0

use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ionspam_ffi::*;

fn species(name: &str) -> *mut IonspamSpecies {
    let name = CString::new(name).unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { ionspam_species_builtin(name.as_ptr(), &mut handle) };
    assert_eq!(status, IonspamStatus::Ok);
    handle
}

#[test]
fn prep_error_through_handle() {
    let ba = species("137Ba+");
    let mut eps = 0.0;
    assert_eq!(unsafe { ionspam_species_prep_error(ba, &mut eps) }, IonspamStatus::Ok);
    assert!((eps - 1.1e-5).abs() < 0.05e-5, "{eps}");
    unsafe { ionspam_species_free(ba) };
}

#[test]
fn unknown_species_sets_last_error() {
    let name = CString::new("40Ca+").unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { ionspam_species_builtin(name.as_ptr(), &mut handle) };
    assert_eq!(status, IonspamStatus::UnknownSpecies);
    assert!(handle.is_null());
    let msg = unsafe { CStr::from_ptr(ionspam_last_error()) }.to_str().unwrap();
    assert!(msg.contains("40Ca+"), "{msg}");
}

#[test]
fn null_arguments_are_rejected() {
    let mut out = 0.0;
    assert_eq!(unsafe { ionspam_species_prep_error(ptr::null(), &mut out) }, IonspamStatus::NullPointer);
    assert_eq!(
        unsafe { ionspam_species_builtin(ptr::null(), ptr::null_mut()) },
        IonspamStatus::NullPointer
    );
    unsafe { ionspam_species_free(ptr::null_mut()) };
    unsafe { ionspam_detector_free(ptr::null_mut()) };
}

#[test]
fn ideal_prep_contracts_by_two_thirds() {
    let ba = species("137Ba+");
    let mut buf = [0.0f64; 11];
    let mut written = 0usize;
    let status = unsafe {
        ionspam_simulate_prep(ba, IonspamProtocol::Nbop, 10, 10, true, buf.as_mut_ptr(), buf.len(), &mut written)
    };
    assert_eq!(status, IonspamStatus::Ok);
    assert_eq!(written, 11);
    for w in buf.windows(2) {
        assert!((w[1] / w[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    let mut small = [0.0f64; 3];
    let status = unsafe {
        ionspam_simulate_prep(ba, IonspamProtocol::Maop, 10, 0, true, small.as_mut_ptr(), small.len(), &mut written)
    };
    assert_eq!(status, IonspamStatus::BufferTooSmall);
    assert_eq!(written, 11);
    unsafe { ionspam_species_free(ba) };
}

#[test]
fn scalar_helpers() {
    let (mut lo, mut hi) = (1.0, 0.0);
    assert_eq!(unsafe { ionspam_wilson_interval(0, 1_000_000, 1.0, &mut lo, &mut hi) }, IonspamStatus::Ok);
    assert_eq!(lo, 0.0);
    assert!((hi - 1.0 / 1_000_001.0).abs() < 1e-15);
    assert_eq!(unsafe { ionspam_wilson_interval(1, 0, 1.0, &mut lo, &mut hi) }, IonspamStatus::InvalidArgument);
    assert!((ionspam_decay_probability(350.0, 30.1) - 1.1628e-5).abs() < 1e-9);
    assert!((ionspam_cabinet_residual(0.99, 0.99, 0.99) - 1e-6).abs() < 1e-18);
}

#[test]
fn detector_classifies() {
    let mut det = ptr::null_mut();
    assert_eq!(unsafe { ionspam_detector_new(&mut det) }, IonspamStatus::Ok);
    let mut threshold = 0;
    assert_eq!(unsafe { ionspam_detector_threshold(det, &mut threshold) }, IonspamStatus::Ok);
    assert_eq!(threshold, 7);

    let dark = [0u32; 10];
    let late_decay = [0, 0, 0, 0, 0, 20, 20, 20, 20, 20u32];
    let mut label = IonspamReadout::Bright;
    let mut used = 0usize;
    let mut post = 0.5;
    let status = unsafe { ionspam_classify_bayes(det, dark.as_ptr(), 10, &mut label, &mut used, &mut post) };
    assert_eq!(status, IonspamStatus::Ok);
    assert_eq!(label, IonspamReadout::Dark);
    assert!(used < 10 && post < 1e-6);

    assert_eq!(unsafe { ionspam_classify_threshold(det, late_decay.as_ptr(), 10, &mut label) }, IonspamStatus::Ok);
    assert_eq!(label, IonspamReadout::Bright);
    let status =
        unsafe { ionspam_classify_bayes(det, late_decay.as_ptr(), 10, &mut label, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(status, IonspamStatus::Ok);
    assert_eq!(label, IonspamReadout::Dark);

    // Invalid rates leave the detector untouched.
    assert_eq!(unsafe { ionspam_detector_set_rates(det, 0.0, 1.0) }, IonspamStatus::InvalidArgument);
    assert_eq!(unsafe { ionspam_detector_threshold(det, &mut threshold) }, IonspamStatus::Ok);
    assert_eq!(threshold, 7);
    unsafe { ionspam_detector_free(det) };
}

/// Compiles a small C program against the generated header and the static
/// library, when a C compiler is present.
#[test]
fn header_compiles_and_links_from_c() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<this test> → target/<profile>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libionspam_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg(crate_dir.join("tests/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
