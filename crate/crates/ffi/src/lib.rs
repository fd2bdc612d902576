//! C ABI over the `gammamix` library.
//!
//! Every function returns a [`GmStatus`] and writes results through out
//! pointers. On failure the message of the last error on the calling thread is
//! available from [`gm_last_error`]. Models are opaque [`GmModel`] handles that
//! the caller releases with [`gm_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gammamix::em::{fit, FitConfig, ScoreSample, ShiftUpdate};
use gammamix::hierarchy::{simulate, HierarchyConfig, Query};
use gammamix::io::ModelFile;
use gammamix::significance::{combine_p_values, p_value};
use gammamix::{special, Error, GammaMixture, ShiftedGamma};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    Input = 2,
    Domain = 3,
    Parse = 4,
    Io = 5,
    Fit = 6,
    TooFewSamples = 7,
    Size = 8,
    Assignment = 9,
    /// The output buffer is smaller than the result.
    BufferTooSmall = 10,
    /// A Rust panic was caught at the boundary.
    Panic = 11,
}

impl From<&Error> for GmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => GmStatus::Domain,
            Error::Fit(_) => GmStatus::Fit,
            Error::Input(_) => GmStatus::Input,
            Error::TooFewSamples { .. } => GmStatus::TooFewSamples,
            Error::Size(_) => GmStatus::Size,
            Error::Assignment(_) => GmStatus::Assignment,
            Error::Parse(_) => GmStatus::Parse,
            Error::Io(_) => GmStatus::Io,
        }
    }
}

/// A fitted or constructed mixture.
pub struct GmModel {
    inner: GammaMixture,
}

/// Options for [`gm_fit`]; start from [`gm_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GmFitOptions {
    pub n_states: usize,
    pub max_iters: usize,
    pub rel_ll_tol: f64,
    pub warm_start: bool,
    /// Require samples in [-1, 1].
    pub cosine_bounds: bool,
    /// Use the profile shift update instead of the score root.
    pub profile_shift: bool,
}

/// Options for [`gm_simulate`]; start from [`gm_simulate_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GmSimulateOptions {
    pub depth: usize,
    pub ratio: f64,
    pub degree: usize,
    pub dim: usize,
    pub seed: u64,
    /// Compare with the root instead of the first leaf.
    pub root_query: bool,
    pub drop_self: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(GmStatus);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        set_last_error(e.to_string());
        Failure(GmStatus::from(&e))
    }
}

fn fail<T>(status: GmStatus, msg: &str) -> Result<T, Failure> {
    set_last_error(msg.to_string());
    Err(Failure(status))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GmStatus::Ok,
        Ok(Err(Failure(s))) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            GmStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    match p.as_mut() {
        Some(r) => Ok(r),
        None => fail(GmStatus::NullPointer, &format!("{name} is null")),
    }
}

unsafe fn arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => fail(GmStatus::NullPointer, &format!("{name} is null")),
    }
}

unsafe fn model<'a>(m: *const GmModel) -> Result<&'a GammaMixture, Failure> {
    Ok(&arg(m, "model")?.inner)
}

unsafe fn slice<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(GmStatus::NullPointer, &format!("{name} is null"));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return fail(GmStatus::NullPointer, "path is null");
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => fail(GmStatus::Input, "path is not valid UTF-8"),
    }
}

fn boxed(m: GammaMixture) -> *mut GmModel {
    Box::into_raw(Box::new(GmModel { inner: m }))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a mixture from `n` components given as parallel arrays.
///
/// # Safety
/// Each array must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_model_new(
    n: usize,
    tau: *const f64,
    alpha: *const f64,
    c: *const f64,
    lambda: *const f64,
    out_model: *mut *mut GmModel,
) -> GmStatus {
    guard(|| {
        let dst = out(out_model, "out_model")?;
        let (tau, alpha) = (slice(tau, n, "tau")?, slice(alpha, n, "alpha")?);
        let (c, lambda) = (slice(c, n, "c")?, slice(lambda, n, "lambda")?);
        let components = (0..n)
            .map(|i| ShiftedGamma::new(alpha[i], c[i], lambda[i]))
            .collect::<gammamix::Result<Vec<_>>>()?;
        *dst = boxed(GammaMixture::new(components, tau.to_vec())?);
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gm_model_free(m: *mut GmModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Reads a model file.
///
/// # Safety
/// `file` must be a nul-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_model_load(file: *const c_char, out_model: *mut *mut GmModel) -> GmStatus {
    guard(|| {
        let dst = out(out_model, "out_model")?;
        *dst = boxed(ModelFile::load(path(file)?)?.to_mixture()?);
        Ok(())
    })
}

/// Writes a model file.
///
/// # Safety
/// `m` must be a live handle and `file` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gm_model_save(m: *const GmModel, file: *const c_char) -> GmStatus {
    guard(|| {
        ModelFile::from_mixture(model(m)?)?.save(path(file)?)?;
        Ok(())
    })
}

/// # Safety
/// `m` must be a live handle; `out_n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_model_n_states(m: *const GmModel, out_n: *mut usize) -> GmStatus {
    guard(|| {
        *out(out_n, "out_n")? = model(m)?.n_states();
        Ok(())
    })
}

/// Parameters of state `i`, states in ascending order of their means.
///
/// # Safety
/// `m` must be a live handle; all out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_model_component(
    m: *const GmModel,
    i: usize,
    tau: *mut f64,
    alpha: *mut f64,
    c: *mut f64,
    lambda: *mut f64,
) -> GmStatus {
    guard(|| {
        let m = model(m)?;
        if i >= m.n_states() {
            return fail(GmStatus::Input, &format!("state {i} of a {}-state model", m.n_states()));
        }
        let g = m.components()[i];
        *out(tau, "tau")? = m.weights()[i];
        *out(alpha, "alpha")? = g.alpha();
        *out(c, "c")? = g.shift();
        *out(lambda, "lambda")? = g.lambda();
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn gm_fit_options_default(n_states: usize) -> GmFitOptions {
    let cfg = FitConfig::new(n_states);
    GmFitOptions {
        n_states,
        max_iters: cfg.max_iters,
        rel_ll_tol: cfg.rel_ll_tol,
        warm_start: cfg.warm_start,
        cosine_bounds: true,
        profile_shift: false,
    }
}

/// Fits a mixture to `n` samples. `out_log_likelihood` may be null.
///
/// # Safety
/// `xs` must hold `n` doubles; `opts` and `out_model` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gm_fit(
    xs: *const f64,
    n: usize,
    opts: *const GmFitOptions,
    out_model: *mut *mut GmModel,
    out_log_likelihood: *mut f64,
) -> GmStatus {
    guard(|| {
        let dst = out(out_model, "out_model")?;
        let opts = *arg(opts, "opts")?;
        let values = slice(xs, n, "xs")?.to_vec();
        let data = if opts.cosine_bounds { ScoreSample::cosine(values) } else { ScoreSample::new(values) }?;
        let mut cfg = FitConfig::new(opts.n_states);
        cfg.max_iters = opts.max_iters;
        cfg.rel_ll_tol = opts.rel_ll_tol;
        cfg.warm_start = opts.warm_start;
        if opts.profile_shift {
            cfg.shift_update = ShiftUpdate::Profile;
        }
        let report = fit(&data, &cfg)?;
        if let Some(ll) = out_log_likelihood.as_mut() {
            *ll = report.log_likelihood;
        }
        *dst = boxed(report.model);
        Ok(())
    })
}

// Runs `f` under the guard and stores its value in `out_value`.
unsafe fn eval(out_value: *mut f64, f: impl FnOnce() -> Result<f64, Failure>) -> GmStatus {
    guard(|| {
        let dst = out(out_value, "out_value")?;
        *dst = f()?;
        Ok(())
    })
}

/// Log density; `-inf` below every shift.
///
/// # Safety
/// `m` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_model_log_pdf(m: *const GmModel, x: f64, out_value: *mut f64) -> GmStatus {
    eval(out_value, || Ok(model(m)?.log_pdf(x)))
}

/// # Safety
/// `m` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_model_cdf(m: *const GmModel, x: f64, out_value: *mut f64) -> GmStatus {
    eval(out_value, || Ok(model(m)?.cdf(x)?))
}

/// # Safety
/// `m` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_model_sf(m: *const GmModel, x: f64, out_value: *mut f64) -> GmStatus {
    eval(out_value, || Ok(model(m)?.sf(x)?))
}

/// Right-tail p-value of similarity `x` under null `m`.
///
/// # Safety
/// `m` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_p_value(m: *const GmModel, x: f64, out_value: *mut f64) -> GmStatus {
    eval(out_value, || Ok(p_value(model(m)?, x)?))
}

/// Draws `n` samples into `buf`.
///
/// # Safety
/// `m` must be a live handle and `buf` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn gm_model_sample(m: *const GmModel, n: usize, seed: u64, buf: *mut f64) -> GmStatus {
    guard(|| {
        let draws = model(m)?.sample(n, seed);
        if n > 0 {
            if buf.is_null() {
                return fail(GmStatus::NullPointer, "buf is null");
            }
            std::slice::from_raw_parts_mut(buf, n).copy_from_slice(&draws);
        }
        Ok(())
    })
}

/// Fisher combination of `n` p-values. `out_clamped` may be null.
///
/// # Safety
/// `ps` must hold `n` doubles; `out_stat` and `out_p` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_combine_p_values(
    ps: *const f64,
    n: usize,
    out_stat: *mut f64,
    out_p: *mut f64,
    out_clamped: *mut bool,
) -> GmStatus {
    guard(|| {
        let (stat, p) = (out(out_stat, "out_stat")?, out(out_p, "out_p")?);
        let f = combine_p_values(slice(ps, n, "ps")?)?;
        *stat = f.stat;
        *p = f.p_value;
        if let Some(c) = out_clamped.as_mut() {
            *c = f.clamped;
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn gm_simulate_options_default(depth: usize, ratio: f64, degree: usize) -> GmSimulateOptions {
    let cfg = HierarchyConfig::new(depth, ratio, degree);
    GmSimulateOptions {
        depth,
        ratio,
        degree,
        dim: cfg.dim,
        seed: cfg.seed,
        root_query: false,
        drop_self: false,
    }
}

fn hierarchy_config(o: &GmSimulateOptions) -> HierarchyConfig {
    let mut cfg = HierarchyConfig::new(o.depth, o.ratio, o.degree);
    cfg.dim = o.dim;
    cfg.seed = o.seed;
    cfg.query = if o.root_query { Query::Root } else { Query::FirstLeaf };
    cfg.drop_self = o.drop_self;
    cfg
}

/// Number of similarities [`gm_simulate`] will write.
///
/// # Safety
/// `opts` must be valid; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_simulate_len(opts: *const GmSimulateOptions, out_len: *mut usize) -> GmStatus {
    guard(|| {
        let dst = out(out_len, "out_len")?;
        let o = *arg(opts, "opts")?;
        let leaves = hierarchy_config(&o).n_leaves()?;
        *dst = if o.drop_self && !o.root_query { leaves - 1 } else { leaves };
        Ok(())
    })
}

/// Simulates a hierarchy and writes similarities and common-ancestor levels.
/// `levels` may be null. Fails with `BufferTooSmall` when `cap` is short.
///
/// # Safety
/// `sims` (and `levels`, if given) must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn gm_simulate(
    opts: *const GmSimulateOptions,
    sims: *mut f64,
    levels: *mut u32,
    cap: usize,
    out_len: *mut usize,
) -> GmStatus {
    guard(|| {
        let len = out(out_len, "out_len")?;
        let o = *arg(opts, "opts")?;
        let ls = simulate(&hierarchy_config(&o))?;
        *len = ls.sims.len();
        if ls.sims.len() > cap {
            return fail(GmStatus::BufferTooSmall, &format!("need {} elements, buffer holds {cap}", ls.sims.len()));
        }
        if sims.is_null() {
            return fail(GmStatus::NullPointer, "sims is null");
        }
        std::slice::from_raw_parts_mut(sims, ls.sims.len()).copy_from_slice(&ls.sims);
        if !levels.is_null() {
            std::slice::from_raw_parts_mut(levels, ls.levels.len()).copy_from_slice(&ls.levels);
        }
        Ok(())
    })
}

/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_log_gamma(a: f64, out_value: *mut f64) -> GmStatus {
    eval(out_value, || Ok(special::log_gamma(a)?))
}

/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_digamma(a: f64, out_value: *mut f64) -> GmStatus {
    eval(out_value, || Ok(special::digamma(a)?))
}

/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_trigamma(a: f64, out_value: *mut f64) -> GmStatus {
    eval(out_value, || Ok(special::trigamma(a)?))
}

/// Regularized lower incomplete gamma `P(a, x)`.
///
/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_gamma_p(a: f64, x: f64, out_value: *mut f64) -> GmStatus {
    eval(out_value, || Ok(special::gamma_p(a, x)?))
}

/// `x` with `P(a, x) = p`.
///
/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_inv_gamma_p(a: f64, p: f64, out_value: *mut f64) -> GmStatus {
    eval(out_value, || Ok(special::inv_gamma_p(a, p)?))
}
