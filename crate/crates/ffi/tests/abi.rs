#![allow(clippy::excessive_precision)]

use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use finkey_ffi::*;

fn last_error() -> String {
    let p = finkey_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn evaluate_and_read_back() {
    let dev = finkey_device_default(10_000_000_000_000, 30.0);
    let mut ev = ptr::null_mut();
    unsafe {
        assert_eq!(
            finkey_evaluator_new(FinkeyProtocol::Scs, &dev, FinkeyMode::Exact, &mut ev),
            FinkeyStatus::Ok
        );
        let params = FinkeyParams {
            mu: 0.01966,
            nu: f64::NAN,
            p: 0.235,
            p0: f64::NAN,
            c0: f64::NAN,
        };
        let mut r = ptr::null_mut();
        assert_eq!(finkey_evaluate(ev, &params, &mut r), FinkeyStatus::Ok);
        let raw = finkey_result_raw_bits(r);
        assert!((raw - 980782596.97534165).abs() < 1e-6 * raw);
        assert_eq!(finkey_result_key_bits(r), raw);
        assert_eq!(finkey_result_rate(r), raw / 1e13);
        assert_eq!(finkey_result_distance_km(r), 30.0);
        let name = CString::new("phase_entropy").unwrap();
        let mut v = 0.0;
        assert_eq!(
            finkey_result_term(r, name.as_ptr(), &mut v),
            FinkeyStatus::Ok
        );
        assert!(v > 0.0);
        finkey_result_free(r);
        finkey_evaluator_free(ev);
    }
}

#[test]
fn npp_and_asymptotic() {
    let dev = finkey_device_default(1, 50.0);
    let mut ev = ptr::null_mut();
    unsafe {
        assert_eq!(
            finkey_evaluator_new(FinkeyProtocol::Npp, &dev, FinkeyMode::Asymptotic, &mut ev),
            FinkeyStatus::Ok
        );
        let params = FinkeyParams {
            mu: 0.05,
            nu: 1e-3,
            p: 0.3,
            p0: 0.5,
            c0: f64::NAN,
        };
        let mut r = ptr::null_mut();
        assert_eq!(finkey_evaluate(ev, &params, &mut r), FinkeyStatus::Ok);
        assert!(finkey_result_estimate(r) > 0.0);
        finkey_result_free(r);
        finkey_evaluator_free(ev);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut dev = finkey_device_default(1_000, 10.0);
    dev.eps_tot = 2.0;
    let mut ev = ptr::null_mut();
    unsafe {
        let s = finkey_evaluator_new(FinkeyProtocol::Scs, &dev, FinkeyMode::Exact, &mut ev);
        assert_eq!(s, FinkeyStatus::Domain);
        assert!(ev.is_null());
        assert!(last_error().contains("eps"), "{}", last_error());

        let s = finkey_evaluator_new(FinkeyProtocol::Scs, ptr::null(), FinkeyMode::Exact, &mut ev);
        assert_eq!(s, FinkeyStatus::NullPointer);

        let mut out = 0.0;
        assert_eq!(
            finkey_ln_g(10, 1, FinkeyMode::Exact, &mut out),
            FinkeyStatus::Domain
        );
        assert_eq!(
            finkey_chernoff(FinkeyBound::ObservationUpper, -1.0, 1.0, &mut out),
            FinkeyStatus::Domain
        );
        assert_eq!(
            finkey_chernoff(FinkeyBound::ObservationUpper, 1.0, 1.0, ptr::null_mut()),
            FinkeyStatus::NullPointer
        );

        // Null handles are tolerated by the getters and free functions.
        assert!(finkey_result_rate(ptr::null()).is_nan());
        assert_eq!(finkey_result_clamps(ptr::null()), 0);
        assert_eq!(finkey_sweep_len(ptr::null()), 0);
        finkey_result_free(ptr::null_mut());
        finkey_evaluator_free(ptr::null_mut());
        finkey_sweep_free(ptr::null_mut());
    }
}

#[test]
fn chernoff_and_penalty() {
    let mut up = 0.0;
    let mut back = 0.0;
    unsafe {
        assert_eq!(
            finkey_chernoff(FinkeyBound::ObservationUpper, 100.0, 3.0, &mut up),
            FinkeyStatus::Ok
        );
        assert_eq!(
            finkey_chernoff(FinkeyBound::ExpectationLower, up, 3.0, &mut back),
            FinkeyStatus::Ok
        );
        assert!((back - 100.0).abs() < 1e-9);
        let (mut exact, mut bound) = (0.0, 0.0);
        finkey_ln_g(1_000_000_000_000, 64, FinkeyMode::Exact, &mut exact);
        finkey_ln_g(1_000_000_000_000, 64, FinkeyMode::PaperBound, &mut bound);
        assert!((exact - 1539.745).abs() < 1e-3 && exact < bound);
    }
}

#[test]
fn sweep_rows_and_csv() {
    let dev = finkey_device_default(1, 0.0);
    let distances = [0.0, 100.0];
    let counts = [1_000_000_000_000u64, 100_000_000_000_000];
    let mut s = ptr::null_mut();
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("rows.csv").to_str().unwrap()).unwrap();
    unsafe {
        let status = finkey_sweep(
            FinkeyProtocol::Scs,
            &dev,
            FinkeyMode::Exact,
            distances.as_ptr(),
            2,
            counts.as_ptr(),
            2,
            true,
            &mut s,
        );
        assert_eq!(status, FinkeyStatus::Ok);
        assert_eq!(finkey_sweep_len(s), 6);
        for cell in 0..2 {
            let rates: Vec<f64> = (0..3)
                .map(|i| finkey_result_rate(finkey_sweep_get(s, cell * 3 + i)))
                .collect();
            assert!(rates[0] <= rates[1] && rates[1] <= rates[2], "{rates:?}");
        }
        assert!(finkey_sweep_get(s, 6).is_null());
        assert_eq!(finkey_sweep_write_csv(s, path.as_ptr()), FinkeyStatus::Ok);
        finkey_sweep_free(s);

        let mut s = ptr::null_mut();
        let status = finkey_sweep(
            FinkeyProtocol::Scs,
            &dev,
            FinkeyMode::Asymptotic,
            distances.as_ptr(),
            2,
            ptr::null(),
            0,
            true,
            &mut s,
        );
        assert_eq!(status, FinkeyStatus::InvalidArgument);
    }
    let text = std::fs::read_to_string(dir.path().join("rows.csv")).unwrap();
    assert_eq!(text.lines().count(), 7);
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

/// Compiles a small C program against the generated header and the static
/// library, then runs it.
#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libfinkey_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let out = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Wextra", "-Werror", "-o"])
        .arg(&exe)
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = dir.path().join("c.csv");
    let run = Command::new(&exe).arg(&csv).output().unwrap();
    assert!(
        run.status.success(),
        "{}{}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("ok"));
    assert!(std::fs::read_to_string(csv)
        .unwrap()
        .starts_with("protocol,"));
}
