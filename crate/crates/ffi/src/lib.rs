//! C ABI for `cbi2`.
//!
//! Objects are opaque handles created by `cbi2_*_new`/`cbi2_simulate`/
//! `cbi2_estimate` and released with the matching `*_free`. Every fallible
//! function returns a [`Cbi2Status`]; on failure the message is available
//! from [`cbi2_last_error`] on the same thread. Matrices are passed
//! row-major, series as interleaved `x1, x2` pairs.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use cbi2::estimate::{estimate, EstimateOptions, EstimateReport, WeightFn};
use cbi2::model::{
    conditional_mean, conditional_variance, stationary_laplace, transition_laplace, ModelParams,
};
use cbi2::simulate::{ObservationSeries, Sampler, SimConfig};
use cbi2::{Error, Mat2, Vec2};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cbi2Status {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Singular = 3,
    NonAdmissible = 4,
    IllConditioned = 5,
    Numeric = 6,
    Parse = 7,
    Io = 8,
    Config = 9,
    Unavailable = 10,
    Panic = 11,
}

/// Path generator for [`cbi2_simulate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cbi2Sampler {
    Euler = 0,
    ExactDiagonal = 1,
}

/// Observation weight for [`cbi2_estimate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cbi2Weight {
    Constant = 0,
    InverseNorm = 1,
}

/// Simulation settings; fill with [`cbi2_sim_options_default`] first.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cbi2SimOptions {
    pub n_obs: usize,
    pub delta: f64,
    pub euler_dt: f64,
    pub burn_in: f64,
    pub x0: [f64; 2],
    pub seed: u64,
    pub sampler: Cbi2Sampler,
}

pub struct Cbi2Model(ModelParams);
pub struct Cbi2Series(ObservationSeries);
pub struct Cbi2Estimate(EstimateReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> Cbi2Status {
    match e {
        Error::Singular { .. } | Error::SingularDesign(_) | Error::SingularV { .. } => {
            Cbi2Status::Singular
        }
        Error::NonAdmissibleGamma(_)
        | Error::NonErgodic { .. }
        | Error::NonPositiveSpectrum { .. } => Cbi2Status::NonAdmissible,
        Error::IllConditioned { .. } => Cbi2Status::IllConditioned,
        Error::SeriesDiverges { .. } | Error::Overflow | Error::StepTooLarge { .. } => {
            Cbi2Status::Numeric
        }
        Error::InvalidParameter(_) | Error::NotDiagonal { .. } => Cbi2Status::InvalidParameter,
        Error::Parse(_) | Error::ConfigParse(_) => Cbi2Status::Parse,
        Error::Io(_) => Cbi2Status::Io,
        Error::Config(_) => Cbi2Status::Config,
    }
}

fn fail(status: Cbi2Status, msg: &str) -> Cbi2Status {
    set_last_error(msg);
    status
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), Cbi2Status>) -> Cbi2Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            Cbi2Status::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(Cbi2Status::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, Cbi2Status>;
}

impl<T> OrStatus<T> for cbi2::Result<T> {
    fn or_status(self) -> Result<T, Cbi2Status> {
        self.map_err(|e| fail(status_of(&e), &e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Cbi2Status> {
    p.as_ref()
        .ok_or_else(|| fail(Cbi2Status::NullPointer, &format!("{name} is null")))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Cbi2Status> {
    if p.is_null() {
        return Err(fail(Cbi2Status::NullPointer, &format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Cbi2Status> {
    if p.is_null() {
        return Err(fail(Cbi2Status::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(Cbi2Status::Parse, "path is not valid UTF-8"))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Cbi2Status> {
    if out.is_null() {
        return Err(fail(
            Cbi2Status::NullPointer,
            "output handle pointer is null",
        ));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn mat_row_major(m: &Mat2) -> [f64; 4] {
    [m.m11, m.m12, m.m21, m.m22]
}

/// Message of the last failed call on this thread (empty after a success).
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn cbi2_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Validated model from `theta = (a1, a2, b11, b12, b21, b22, sigma1, sigma2)`.
///
/// # Safety
/// `theta` must point to 8 doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbi2_model_new(theta: *const f64, out: *mut *mut Cbi2Model) -> Cbi2Status {
    guard(|| {
        if theta.is_null() {
            return Err(fail(Cbi2Status::NullPointer, "theta is null"));
        }
        let mut t = [0.0; 8];
        t.copy_from_slice(std::slice::from_raw_parts(theta, 8));
        let p = ModelParams::from_theta(t).or_status()?;
        store(out, Cbi2Model(p))
    })
}

/// # Safety
/// `model` must come from [`cbi2_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cbi2_model_free(model: *mut Cbi2Model) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// `kappa = b12 b21 / (b11 b22)`; the model is ergodic when it is below 1.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbi2_model_kappa(model: *const Cbi2Model, out: *mut f64) -> Cbi2Status {
    guard(|| {
        let m = deref(model, "model")?;
        out_slice(out, 1, "out")?[0] = m.0.kappa();
        Ok(())
    })
}

/// `E[X_t | X_0 = x]` into `out[2]`.
///
/// # Safety
/// Pointers must be valid; `x` and `out` hold 2 doubles.
#[no_mangle]
pub unsafe extern "C" fn cbi2_model_conditional_mean(
    model: *const Cbi2Model,
    x: *const f64,
    t: f64,
    out: *mut f64,
) -> Cbi2Status {
    guard(|| {
        let m = deref(model, "model")?;
        let x = deref(x as *const [f64; 2], "x")?;
        let v = conditional_mean(&m.0, Vec2::from(*x), t).or_status()?;
        out_slice(out, 2, "out")?.copy_from_slice(&v.to_array());
        Ok(())
    })
}

/// `Cov[X_delta | X_0 = x]` into `out[4]`, row-major.
///
/// # Safety
/// Pointers must be valid; `x` holds 2 doubles, `out` 4.
#[no_mangle]
pub unsafe extern "C" fn cbi2_model_conditional_variance(
    model: *const Cbi2Model,
    x: *const f64,
    delta: f64,
    out: *mut f64,
) -> Cbi2Status {
    guard(|| {
        let m = deref(model, "model")?;
        let x = deref(x as *const [f64; 2], "x")?;
        let v = conditional_variance(&m.0, Vec2::from(*x), delta).or_status()?;
        out_slice(out, 4, "out")?.copy_from_slice(&mat_row_major(&v));
        Ok(())
    })
}

/// `E[exp(-<lambda, X_t>) | X_0 = x]`.
///
/// # Safety
/// Pointers must be valid; `x` and `lambda` hold 2 doubles.
#[no_mangle]
pub unsafe extern "C" fn cbi2_model_transition_laplace(
    model: *const Cbi2Model,
    x: *const f64,
    lambda: *const f64,
    t: f64,
    out: *mut f64,
) -> Cbi2Status {
    guard(|| {
        let m = deref(model, "model")?;
        let x = deref(x as *const [f64; 2], "x")?;
        let l = deref(lambda as *const [f64; 2], "lambda")?;
        let dt = (t / 200.0).clamp(1e-4, 0.01);
        let v = transition_laplace(&m.0, Vec2::from(*x), Vec2::from(*l), t, dt).or_status()?;
        out_slice(out, 1, "out")?[0] = v;
        Ok(())
    })
}

/// Laplace transform of the stationary law (ergodic models only).
///
/// # Safety
/// Pointers must be valid; `lambda` holds 2 doubles.
#[no_mangle]
pub unsafe extern "C" fn cbi2_model_stationary_laplace(
    model: *const Cbi2Model,
    lambda: *const f64,
    out: *mut f64,
) -> Cbi2Status {
    guard(|| {
        let m = deref(model, "model")?;
        let l = deref(lambda as *const [f64; 2], "lambda")?;
        out_slice(out, 1, "out")?[0] = stationary_laplace(&m.0, Vec2::from(*l)).or_status()?;
        Ok(())
    })
}

/// Defaults for `model`: `delta = 1`, `euler_dt = 1e-3`, burn-in
/// `50 / xi_min`, `x0` at the long-run mean, exact sampler when the model is
/// diagonal.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbi2_sim_options_default(
    model: *const Cbi2Model,
    n_obs: usize,
    seed: u64,
    out: *mut Cbi2SimOptions,
) -> Cbi2Status {
    guard(|| {
        let m = deref(model, "model")?;
        if out.is_null() {
            return Err(fail(Cbi2Status::NullPointer, "out is null"));
        }
        let c = SimConfig::new(m.0, n_obs, seed);
        *out = Cbi2SimOptions {
            n_obs,
            delta: c.delta,
            euler_dt: c.euler_dt,
            burn_in: c.burn_in,
            x0: c.x0.to_array(),
            seed,
            sampler: if m.0.is_diagonal() {
                Cbi2Sampler::ExactDiagonal
            } else {
                Cbi2Sampler::Euler
            },
        };
        Ok(())
    })
}

/// Simulates `n_obs + 1` observations.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbi2_simulate(
    model: *const Cbi2Model,
    options: *const Cbi2SimOptions,
    out: *mut *mut Cbi2Series,
) -> Cbi2Status {
    guard(|| {
        let m = deref(model, "model")?;
        let o = deref(options, "options")?;
        let cfg = SimConfig {
            params: m.0,
            euler_dt: o.euler_dt,
            delta: o.delta,
            n_obs: o.n_obs,
            burn_in: o.burn_in,
            x0: Vec2::from(o.x0),
            seed: o.seed,
        };
        let sampler = match o.sampler {
            Cbi2Sampler::Euler => Sampler::Euler,
            Cbi2Sampler::ExactDiagonal => Sampler::ExactDiagonal,
        };
        let s = sampler.simulate(&cfg).or_status()?;
        store(out, Cbi2Series(s))
    })
}

/// Series from `n_points` interleaved `(x1, x2)` pairs spaced `delta` apart.
///
/// # Safety
/// `xy` must hold `2 * n_points` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbi2_series_from_array(
    delta: f64,
    xy: *const f64,
    n_points: usize,
    out: *mut *mut Cbi2Series,
) -> Cbi2Status {
    guard(|| {
        if xy.is_null() {
            return Err(fail(Cbi2Status::NullPointer, "xy is null"));
        }
        let raw = std::slice::from_raw_parts(xy, 2 * n_points);
        let obs = raw.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect();
        let s = ObservationSeries::external(delta, obs).or_status()?;
        store(out, Cbi2Series(s))
    })
}

/// Reads a `t,x1,x2` CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbi2_series_read_csv(
    path: *const c_char,
    out: *mut *mut Cbi2Series,
) -> Cbi2Status {
    guard(|| {
        let p = path_arg(path)?;
        let s = ObservationSeries::read_csv(&p).or_status()?;
        store(out, Cbi2Series(s))
    })
}

/// # Safety
/// `series` must be valid; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cbi2_series_write_csv(
    series: *const Cbi2Series,
    path: *const c_char,
) -> Cbi2Status {
    guard(|| {
        let s = deref(series, "series")?;
        let p = path_arg(path)?;
        s.0.write_csv(&p).or_status()
    })
}

/// Number of observations (`n + 1`); 0 for a null handle.
///
/// # Safety
/// `series` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn cbi2_series_len(series: *const Cbi2Series) -> usize {
    series.as_ref().map_or(0, |s| s.0.obs.len())
}

/// Observation spacing; NaN for a null handle.
///
/// # Safety
/// `series` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn cbi2_series_delta(series: *const Cbi2Series) -> f64 {
    series.as_ref().map_or(f64::NAN, |s| s.0.delta)
}

/// Copies observations into `out` as interleaved pairs; `capacity` is the
/// number of doubles available and must be at least `2 * cbi2_series_len`.
///
/// # Safety
/// `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn cbi2_series_copy(
    series: *const Cbi2Series,
    out: *mut f64,
    capacity: usize,
) -> Cbi2Status {
    guard(|| {
        let s = deref(series, "series")?;
        let need = 2 * s.0.obs.len();
        if capacity < need {
            return Err(fail(
                Cbi2Status::InvalidParameter,
                &format!("buffer holds {capacity} doubles, need {need}"),
            ));
        }
        let buf = out_slice(out, need, "out")?;
        for (c, x) in buf.chunks_exact_mut(2).zip(&s.0.obs) {
            c.copy_from_slice(&x.to_array());
        }
        Ok(())
    })
}

/// # Safety
/// `series` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cbi2_series_free(series: *mut Cbi2Series) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Fits drift, diffusion and (if requested) the sandwich covariance. A
/// non-admissible drift is not an error here: check
/// [`cbi2_estimate_admissible`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbi2_estimate(
    series: *const Cbi2Series,
    weight: Cbi2Weight,
    with_covariance: bool,
    out: *mut *mut Cbi2Estimate,
) -> Cbi2Status {
    guard(|| {
        let s = deref(series, "series")?;
        let g = match weight {
            Cbi2Weight::Constant => WeightFn::Constant,
            Cbi2Weight::InverseNorm => WeightFn::InverseNorm,
        };
        let opts = EstimateOptions {
            with_covariance,
            ..EstimateOptions::default()
        };
        let rep = estimate(&s.0, &g, opts).or_status()?;
        store(out, Cbi2Estimate(rep))
    })
}

/// # Safety
/// `est` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn cbi2_estimate_admissible(est: *const Cbi2Estimate) -> bool {
    est.as_ref().is_some_and(|e| e.0.drift.admissible)
}

/// `rho[2]` and `gamma[4]` (row-major) of the one-step regression.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbi2_estimate_regression(
    est: *const Cbi2Estimate,
    rho: *mut f64,
    gamma: *mut f64,
) -> Cbi2Status {
    guard(|| {
        let e = deref(est, "estimate")?;
        out_slice(rho, 2, "rho")?.copy_from_slice(&e.0.drift.rho_hat.to_array());
        out_slice(gamma, 4, "gamma")?.copy_from_slice(&mat_row_major(&e.0.drift.gamma_hat));
        Ok(())
    })
}

/// `theta_hat[8]` in `(a1, a2, b11, b12, b21, b22, sigma1, sigma2)` order.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbi2_estimate_theta(
    est: *const Cbi2Estimate,
    out: *mut f64,
) -> Cbi2Status {
    guard(|| {
        let e = deref(est, "estimate")?;
        let t =
            e.0.theta_hat()
                .ok_or_else(|| fail(Cbi2Status::NonAdmissible, "drift estimate not admissible"))?;
        out_slice(out, 8, "out")?.copy_from_slice(&t);
        Ok(())
    })
}

/// Unclamped `(sigma1^2, sigma2^2)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbi2_estimate_sigma_sq_raw(
    est: *const Cbi2Estimate,
    out: *mut f64,
) -> Cbi2Status {
    guard(|| {
        let e = deref(est, "estimate")?;
        let d =
            e.0.diffusion
                .ok_or_else(|| fail(Cbi2Status::NonAdmissible, "no diffusion estimate"))?;
        out_slice(out, 2, "out")?.copy_from_slice(&[d.sigma1_sq_raw, d.sigma2_sq_raw]);
        Ok(())
    })
}

/// 8x8 covariance of `theta_hat`, row-major, into `out[64]`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbi2_estimate_covariance(
    est: *const Cbi2Estimate,
    out: *mut f64,
) -> Cbi2Status {
    guard(|| {
        let e = deref(est, "estimate")?;
        let c =
            e.0.covariance
                .as_ref()
                .ok_or_else(|| fail(Cbi2Status::Unavailable, "covariance was not computed"))?;
        let buf = out_slice(out, 64, "out")?;
        for i in 0..8 {
            for j in 0..8 {
                buf[8 * i + j] = c.cov_hat[(i, j)];
            }
        }
        Ok(())
    })
}

/// Writes the `name = value` report.
///
/// # Safety
/// `est` must be valid; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cbi2_estimate_write_report(
    est: *const Cbi2Estimate,
    path: *const c_char,
) -> Cbi2Status {
    guard(|| {
        let e = deref(est, "estimate")?;
        let p = path_arg(path)?;
        std::fs::write(&p, e.0.to_key_value())
            .map_err(|err| fail(Cbi2Status::Io, &format!("{}: {err}", p.display())))
    })
}

/// # Safety
/// `est` must come from [`cbi2_estimate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cbi2_estimate_free(est: *mut Cbi2Estimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}
