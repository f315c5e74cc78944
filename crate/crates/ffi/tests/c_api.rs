use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use cbi2::model::{conditional_variance, ModelParams};
use cbi2::Vec2;
use cbi2_ffi::*;

const DIAG: [f64; 8] = [1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0];

fn last_error() -> String {
    unsafe { CStr::from_ptr(cbi2_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn model(theta: &[f64; 8]) -> *mut Cbi2Model {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { cbi2_model_new(theta.as_ptr(), &mut m) },
        Cbi2Status::Ok
    );
    m
}

#[test]
fn moments_match_the_library() {
    let theta = [1.0, 0.6, 1.0, 0.2, 0.3, 0.8, 0.5, 0.7];
    let m = model(&theta);
    let x = [0.7, 1.4];
    let mut var = [0.0; 4];
    let mut kappa = 0.0;
    unsafe {
        assert_eq!(
            cbi2_model_conditional_variance(m, x.as_ptr(), 1.0, var.as_mut_ptr()),
            Cbi2Status::Ok
        );
        assert_eq!(cbi2_model_kappa(m, &mut kappa), Cbi2Status::Ok);
    }
    let p = ModelParams::from_theta(theta).unwrap();
    let v = conditional_variance(&p, Vec2::new(0.7, 1.4), 1.0).unwrap();
    assert_eq!(var, [v.m11, v.m12, v.m21, v.m22]);
    assert_eq!(kappa, p.kappa());

    // scalar CIR mean with a = b = 1: x e^{-t} + 1 - e^{-t}
    let d = model(&DIAG);
    let mut mean = [0.0; 2];
    let mut lap = 0.0;
    unsafe {
        assert_eq!(
            cbi2_model_conditional_mean(d, x.as_ptr(), 2.0, mean.as_mut_ptr()),
            Cbi2Status::Ok
        );
        // stationary law of each coordinate is Gamma(2, rate 2): E e^{-λX} = (1 + λ/2)^{-2}
        assert_eq!(
            cbi2_model_stationary_laplace(d, [1.0, 0.0].as_ptr(), &mut lap),
            Cbi2Status::Ok
        );
        cbi2_model_free(m);
        cbi2_model_free(d);
    }
    let e = (-2.0f64).exp();
    assert!((mean[0] - (0.7 * e + 1.0 - e)).abs() < 1e-12);
    assert!((lap - 1.0 / 2.25).abs() < 1e-6);
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut m = ptr::null_mut();
    let bad = [1.0, 1.0, -1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
    assert_eq!(
        unsafe { cbi2_model_new(bad.as_ptr(), &mut m) },
        Cbi2Status::InvalidParameter
    );
    assert!(m.is_null());
    assert!(last_error().contains("b11"), "{}", last_error());

    assert_eq!(
        unsafe { cbi2_model_new(ptr::null(), &mut m) },
        Cbi2Status::NullPointer
    );
    assert_eq!(
        unsafe { cbi2_model_kappa(ptr::null(), &mut 0.0) },
        Cbi2Status::NullPointer
    );

    let d = model(&DIAG);
    assert_eq!(last_error(), "");
    let mut out = ptr::null_mut();
    let flat = [1.0; 20];
    unsafe {
        assert_eq!(
            cbi2_series_from_array(1.0, flat.as_ptr(), 10, &mut out),
            Cbi2Status::Ok
        );
        let mut est = ptr::null_mut();
        assert_eq!(
            cbi2_estimate(out, Cbi2Weight::Constant, true, &mut est),
            Cbi2Status::Singular
        );
        assert!(est.is_null());
        let neg = [1.0, -1.0, 1.0, 1.0];
        let mut s2 = ptr::null_mut();
        assert_eq!(
            cbi2_series_from_array(1.0, neg.as_ptr(), 2, &mut s2),
            Cbi2Status::Parse
        );
        cbi2_series_free(out);
        cbi2_model_free(d);
        // freeing null is a no-op
        cbi2_model_free(ptr::null_mut());
        cbi2_series_free(ptr::null_mut());
        cbi2_estimate_free(ptr::null_mut());
    }
}

#[test]
fn simulate_estimate_round_trip() {
    let m = model(&DIAG);
    let mut opts = std::mem::MaybeUninit::<Cbi2SimOptions>::uninit();
    let mut series = ptr::null_mut();
    let mut est = ptr::null_mut();
    unsafe {
        assert_eq!(
            cbi2_sim_options_default(m, 3000, 42, opts.as_mut_ptr()),
            Cbi2Status::Ok
        );
        let opts = opts.assume_init();
        assert_eq!(opts.sampler, Cbi2Sampler::ExactDiagonal);
        assert_eq!(opts.delta, 1.0);
        assert_eq!(cbi2_simulate(m, &opts, &mut series), Cbi2Status::Ok);
        assert_eq!(cbi2_series_len(series), 3001);
        assert_eq!(cbi2_series_delta(series), 1.0);

        let mut buf = vec![0.0; 2 * 3001];
        assert_eq!(
            cbi2_series_copy(series, buf.as_mut_ptr(), 10),
            Cbi2Status::InvalidParameter
        );
        assert_eq!(
            cbi2_series_copy(series, buf.as_mut_ptr(), buf.len()),
            Cbi2Status::Ok
        );
        assert!(buf.iter().all(|v| *v >= 0.0));

        assert_eq!(
            cbi2_estimate(series, Cbi2Weight::InverseNorm, true, &mut est),
            Cbi2Status::Ok
        );
        assert!(cbi2_estimate_admissible(est));
        let mut theta = [0.0; 8];
        let mut cov = [0.0; 64];
        let (mut rho, mut gamma) = ([0.0; 2], [0.0; 4]);
        assert_eq!(cbi2_estimate_theta(est, theta.as_mut_ptr()), Cbi2Status::Ok);
        assert_eq!(
            cbi2_estimate_covariance(est, cov.as_mut_ptr()),
            Cbi2Status::Ok
        );
        assert_eq!(
            cbi2_estimate_regression(est, rho.as_mut_ptr(), gamma.as_mut_ptr()),
            Cbi2Status::Ok
        );
        for i in 0..8 {
            let se = cov[9 * i].sqrt();
            assert!(
                (theta[i] - DIAG[i]).abs() < 5.0 * se + 1e-9,
                "param {i}: {} ± {se}",
                theta[i]
            );
            for j in 0..8 {
                assert_eq!(cov[8 * i + j], cov[8 * j + i]);
            }
        }
        assert!((gamma[0] - (-1.0f64).exp()).abs() < 0.05);

        // rebuild the series from the copied buffer: identical fit
        let mut again = ptr::null_mut();
        let mut est2 = ptr::null_mut();
        assert_eq!(
            cbi2_series_from_array(1.0, buf.as_ptr(), 3001, &mut again),
            Cbi2Status::Ok
        );
        assert_eq!(
            cbi2_estimate(again, Cbi2Weight::InverseNorm, false, &mut est2),
            Cbi2Status::Ok
        );
        let mut theta2 = [0.0; 8];
        cbi2_estimate_theta(est2, theta2.as_mut_ptr());
        assert_eq!(theta, theta2);
        assert_eq!(
            cbi2_estimate_covariance(est2, cov.as_mut_ptr()),
            Cbi2Status::Unavailable
        );

        cbi2_estimate_free(est2);
        cbi2_series_free(again);
        cbi2_estimate_free(est);
        cbi2_series_free(series);
        cbi2_model_free(m);
    }
}

#[test]
fn csv_and_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = CString::new(dir.path().join("s.csv").to_str().unwrap()).unwrap();
    let report = CString::new(dir.path().join("r.txt").to_str().unwrap()).unwrap();
    let m = model(&DIAG);
    unsafe {
        let mut opts = std::mem::zeroed::<Cbi2SimOptions>();
        cbi2_sim_options_default(m, 200, 1, &mut opts);
        let mut s = ptr::null_mut();
        cbi2_simulate(m, &opts, &mut s);
        assert_eq!(cbi2_series_write_csv(s, csv.as_ptr()), Cbi2Status::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(
            cbi2_series_read_csv(csv.as_ptr(), &mut back),
            Cbi2Status::Ok
        );
        assert_eq!(cbi2_series_len(back), 201);
        let mut est = ptr::null_mut();
        assert_eq!(
            cbi2_estimate(back, Cbi2Weight::Constant, true, &mut est),
            Cbi2Status::Ok
        );
        assert_eq!(
            cbi2_estimate_write_report(est, report.as_ptr()),
            Cbi2Status::Ok
        );
        let missing = CString::new("/nonexistent/dir/x.csv").unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(
            cbi2_series_read_csv(missing.as_ptr(), &mut none),
            Cbi2Status::Io
        );
        cbi2_estimate_free(est);
        cbi2_series_free(back);
        cbi2_series_free(s);
        cbi2_model_free(m);
    }
    let text = std::fs::read_to_string(dir.path().join("r.txt")).unwrap();
    assert!(text.starts_with("rho1 = "));
    assert!(text.contains("cov_88 = "));
}

fn header() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cbi2.h")).unwrap()
}

#[test]
fn header_declares_every_exported_function() {
    let src =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let h = header();
    let exported: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 20);
    for name in exported {
        assert!(
            h.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
    for t in [
        "typedef struct Cbi2Model Cbi2Model;",
        "CBI2_STATUS_OK = 0",
        "CBI2_WEIGHT_INVERSE_NORM",
    ] {
        assert!(h.contains(t), "{t}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(out) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("use.c");
    std::fs::write(
        &c,
        "#include \"cbi2.h\"\nint main(void) {\n  Cbi2Model *m = 0;\n  double t[8] = {1,1,1,0,0,1,1,1};\n  \
         return cbi2_model_new(t, &m) == CBI2_STATUS_OK ? 0 : 1;\n}\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("include"))
        .arg(&c)
        .status()
        .unwrap();
    assert!(status.success());
}
