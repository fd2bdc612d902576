use std::ffi::{CStr, CString};
use std::ptr;

use gammamix_ffi::*;

fn last_error() -> String {
    let p = gm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn exponential() -> *mut GmModel {
    let mut m = ptr::null_mut();
    let status = unsafe { gm_model_new(1, &1.0, &1.0, &0.0, &1.0, &mut m) };
    assert_eq!(status, GmStatus::Ok);
    m
}

#[test]
fn model_round_trips_through_a_file() {
    let (tau, alpha, c, lambda) = ([0.1, 0.9], [67.1, 19.2], [-0.20, -0.25], [109.0, 45.8]);
    let mut m = ptr::null_mut();
    let status =
        unsafe { gm_model_new(2, tau.as_ptr(), alpha.as_ptr(), c.as_ptr(), lambda.as_ptr(), &mut m) };
    assert_eq!(status, GmStatus::Ok);
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { gm_model_save(m, path.as_ptr()) }, GmStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { gm_model_load(path.as_ptr(), &mut loaded) }, GmStatus::Ok);
    let mut n = 0;
    assert_eq!(unsafe { gm_model_n_states(loaded, &mut n) }, GmStatus::Ok);
    assert_eq!(n, 2);
    // States come back in ascending order of their means: 0.169 then 0.416.
    for (i, j) in [(0, 1), (1, 0)] {
        let mut got = [0.0; 4];
        let [a, b, cc, d] = &mut got;
        assert_eq!(unsafe { gm_model_component(loaded, i, a, b, cc, d) }, GmStatus::Ok);
        assert_eq!(got, [tau[j], alpha[j], c[j], lambda[j]]);
    }
    let (mut a, mut b, mut cc, mut d) = (0.0, 0.0, 0.0, 0.0);
    assert_eq!(unsafe { gm_model_component(loaded, 2, &mut a, &mut b, &mut cc, &mut d) }, GmStatus::Input);
    unsafe {
        gm_model_free(m);
        gm_model_free(loaded);
    }
}

#[test]
fn exponential_model_has_known_tails() {
    let m = exponential();
    let mut v = 0.0;
    assert_eq!(unsafe { gm_model_sf(m, 1.0, &mut v) }, GmStatus::Ok);
    assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    assert_eq!(unsafe { gm_model_cdf(m, 1.0, &mut v) }, GmStatus::Ok);
    assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    assert_eq!(unsafe { gm_model_log_pdf(m, -0.1, &mut v) }, GmStatus::Ok);
    assert_eq!(v, f64::NEG_INFINITY);
    assert_eq!(unsafe { gm_p_value(m, -1.0, &mut v) }, GmStatus::Ok);
    assert_eq!(v, 1.0);
    assert_eq!(unsafe { gm_p_value(m, f64::NAN, &mut v) }, GmStatus::Input);
    assert!(last_error().contains("NaN"));
    unsafe { gm_model_free(m) };
}

#[test]
fn fit_recovers_a_sampled_gamma() {
    let mut truth = ptr::null_mut();
    assert_eq!(unsafe { gm_model_new(1, &1.0, &13.3, &-0.28, &35.5, &mut truth) }, GmStatus::Ok);
    let mut xs = vec![0.0; 50_000];
    assert_eq!(unsafe { gm_model_sample(truth, xs.len(), 3, xs.as_mut_ptr()) }, GmStatus::Ok);
    let opts = gm_fit_options_default(1);
    let (mut fitted, mut ll) = (ptr::null_mut(), 0.0);
    assert_eq!(unsafe { gm_fit(xs.as_ptr(), xs.len(), &opts, &mut fitted, &mut ll) }, GmStatus::Ok);
    assert!(ll.is_finite());
    let (mut tau, mut alpha, mut c, mut lambda) = (0.0, 0.0, 0.0, 0.0);
    assert_eq!(unsafe { gm_model_component(fitted, 0, &mut tau, &mut alpha, &mut c, &mut lambda) }, GmStatus::Ok);
    assert!((alpha / 13.3 - 1.0).abs() < 0.15 && (c + 0.28).abs() < 0.05, "{alpha} {c}");
    unsafe {
        gm_model_free(truth);
        gm_model_free(fitted);
    }
}

#[test]
fn fit_reports_too_few_samples_and_bounds() {
    let opts = gm_fit_options_default(2);
    let mut m = ptr::null_mut();
    let xs = [0.1, 0.2, 0.3];
    assert_eq!(unsafe { gm_fit(xs.as_ptr(), 3, &opts, &mut m, ptr::null_mut()) }, GmStatus::TooFewSamples);
    assert!(m.is_null());
    let xs = vec![1.5; 40];
    assert_eq!(unsafe { gm_fit(xs.as_ptr(), xs.len(), &opts, &mut m, ptr::null_mut()) }, GmStatus::Input);
}

#[test]
fn null_pointers_are_rejected() {
    let mut v = 0.0;
    assert_eq!(unsafe { gm_model_sf(ptr::null(), 0.0, &mut v) }, GmStatus::NullPointer);
    assert_eq!(last_error(), "model is null");
    let m = exponential();
    assert_eq!(unsafe { gm_model_sf(m, 0.0, ptr::null_mut()) }, GmStatus::NullPointer);
    assert_eq!(unsafe { gm_model_sample(m, 3, 1, ptr::null_mut()) }, GmStatus::NullPointer);
    assert_eq!(unsafe { gm_model_sample(m, 0, 1, ptr::null_mut()) }, GmStatus::Ok);
    assert_eq!(unsafe { gm_model_load(ptr::null(), ptr::null_mut()) }, GmStatus::NullPointer);
    unsafe {
        gm_model_free(m);
        gm_model_free(ptr::null_mut());
    }
}

#[test]
fn missing_model_file_is_an_io_error() {
    let path = CString::new("/nonexistent/model.json").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { gm_model_load(path.as_ptr(), &mut m) }, GmStatus::Io);
}

#[test]
fn fisher_combination_of_one_p_value_is_identity() {
    let (mut stat, mut p, mut clamped) = (0.0, 0.0, true);
    assert_eq!(unsafe { gm_combine_p_values(&0.05, 1, &mut stat, &mut p, &mut clamped) }, GmStatus::Ok);
    assert!((p - 0.05).abs() < 1e-12);
    assert!(!clamped);
    assert_eq!(unsafe { gm_combine_p_values(&1.5, 1, &mut stat, &mut p, &mut clamped) }, GmStatus::Domain);
}

#[test]
fn simulate_fills_caller_buffers() {
    let opts = gm_simulate_options_default(6, 0.9, 2);
    let mut n = 0;
    assert_eq!(unsafe { gm_simulate_len(&opts, &mut n) }, GmStatus::Ok);
    assert_eq!(n, 64);
    let (mut sims, mut levels) = (vec![0.0; n], vec![0u32; n]);
    let mut written = 0;
    let status = unsafe { gm_simulate(&opts, sims.as_mut_ptr(), levels.as_mut_ptr(), n, &mut written) };
    assert_eq!(status, GmStatus::Ok);
    assert_eq!(written, 64);
    assert_eq!(sims[0], 1.0);
    assert_eq!(levels[0], 0);
    assert_eq!(levels[63], 6);
    let status = unsafe { gm_simulate(&opts, sims.as_mut_ptr(), ptr::null_mut(), 10, &mut written) };
    assert_eq!(status, GmStatus::BufferTooSmall);
    assert_eq!(written, 64);

    let mut big = gm_simulate_options_default(40, 0.9, 2);
    big.dim = 8;
    assert_eq!(unsafe { gm_simulate_len(&big, &mut n) }, GmStatus::Size);
}

#[test]
fn special_functions_match_known_values() {
    let mut v = 0.0;
    assert_eq!(unsafe { gm_log_gamma(5.0, &mut v) }, GmStatus::Ok);
    assert!((v - 24f64.ln()).abs() < 1e-14);
    assert_eq!(unsafe { gm_digamma(1.0, &mut v) }, GmStatus::Ok);
    assert!((v + 0.5772156649015329).abs() < 1e-12);
    assert_eq!(unsafe { gm_trigamma(1.0, &mut v) }, GmStatus::Ok);
    assert!((v - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
    assert_eq!(unsafe { gm_gamma_p(1.0, 1.0, &mut v) }, GmStatus::Ok);
    assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    assert_eq!(unsafe { gm_inv_gamma_p(2.0, 0.5, &mut v) }, GmStatus::Ok);
    assert!((v - 1.678346990016661).abs() < 1e-10);
    assert_eq!(unsafe { gm_log_gamma(0.0, &mut v) }, GmStatus::Domain);
    assert!(last_error().contains("domain"));
}
