//! C interface to the refraction solver.
//!
//! Every function returns an [`RfStatus`]; on failure a message is available
//! from [`rf_last_error`] on the same thread. Handles are opaque and must be
//! released with their `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use refraction::config::RunConfig;
use refraction::model::{CoefficientSpec, ModelSpec};
use refraction::optimizer::{solve, OptimizerError, Regime, Solution};
use refraction::simulate::{simulate_refraction, SimConfig};
use refraction::specfun;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidModel = 3,
    Numerical = 4,
    OutOfDomain = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RfRegime {
    #[default]
    BarrierZero = 0,
    BarrierPositive = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfSpecial {
    /// `M(a, b; z)`
    KummerM = 0,
    /// `U(a, b; z)`
    TricomiU = 1,
    /// `D_{-a}(z)`; `b` is ignored.
    ParabolicD = 2,
}

/// A validated run configuration.
pub struct RfConfig {
    inner: RunConfig,
}

/// A solved problem.
pub struct RfSolution {
    inner: Solution,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RfEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub absorbed_fraction: f64,
    pub mean_absorption_time: f64,
    pub n_paths: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RfBarrier {
    pub regime: RfRegime,
    pub b_star: f64,
    pub b_hat: f64,
    /// 1 if every diagnostic met its threshold.
    pub diagnostics_pass: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(RfStatus, String);

impl From<OptimizerError> for Fail {
    fn from(e: OptimizerError) -> Self {
        let status = match e {
            OptimizerError::Model(_) => RfStatus::InvalidModel,
            OptimizerError::BarrierOutOfRange { .. } => RfStatus::OutOfDomain,
            _ => RfStatus::Numerical,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RfStatus::NullPointer, format!("{what} is null"))
}

/// Run `f`, record any failure, and map it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RfStatus::Ok
        }
        Ok(Err(Fail(s, m))) => {
            set_error(&m);
            s
        }
        Err(p) => {
            let m = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(&format!("panic: {}", m.unwrap_or_default()));
            RfStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn rf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a TOML run configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_config_from_toml(toml: *const c_char, out: *mut *mut RfConfig) -> RfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|e| Fail(RfStatus::InvalidArgument, e.to_string()))?;
        let inner = RunConfig::from_toml(text).map_err(|e| Fail(RfStatus::InvalidModel, e.to_string()))?;
        *out = Box::into_raw(Box::new(RfConfig { inner }));
        Ok(())
    })
}

/// A configuration with drift `mu0 + mu1 x`, constant diffusion `sigma`,
/// bound `f0 + f1 x` and discount rate `q`; everything else at defaults.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_config_affine(
    mu0: f64,
    mu1: f64,
    sigma: f64,
    f0: f64,
    f1: f64,
    q: f64,
    out: *mut *mut RfConfig,
) -> RfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let spec = ModelSpec::affine((mu0, mu1), CoefficientSpec::Constant { s0: sigma }, (f0, f1), q);
        refraction::model::validate_model(&spec).map_err(|e| Fail(RfStatus::InvalidModel, e.to_string()))?;
        *out = Box::into_raw(Box::new(RfConfig { inner: RunConfig::new(spec) }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from `rf_config_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rf_config_free(cfg: *mut RfConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Solve for `b*` and the value function.
///
/// # Safety
/// `cfg` must be a live configuration handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_solve(cfg: *const RfConfig, out: *mut *mut RfSolution) -> RfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let inner = solve(&cfg.inner.model, &cfg.inner.numerics)?;
        *out = Box::into_raw(Box::new(RfSolution { inner }));
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a handle from `rf_solve` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rf_solution_free(sol: *mut RfSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Regime, `b*`, `b̂` and whether the diagnostics passed their default
/// thresholds.
///
/// # Safety
/// `sol` must be a live solution handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_solution_barrier(sol: *const RfSolution, out: *mut RfBarrier) -> RfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let s = &sol.as_ref().ok_or_else(|| null("sol"))?.inner;
        let t = refraction::optimizer::Thresholds::default();
        *out = RfBarrier {
            regime: match s.regime {
                Regime::BarrierZero => RfRegime::BarrierZero,
                Regime::BarrierPositive => RfRegime::BarrierPositive,
            },
            b_star: s.b_star,
            b_hat: s.b_hat,
            diagnostics_pass: s.diagnostics.pass(s.regime, &t) as i32,
        };
        Ok(())
    })
}

/// `V(x), V'(x), V''(x)` into `out[0..3]`, for `x` in `[0, x_hi]`.
///
/// # Safety
/// `sol` must be a live solution handle and `out` must point to three doubles.
#[no_mangle]
pub unsafe extern "C" fn rf_solution_value(sol: *const RfSolution, x: f64, out: *mut f64) -> RfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = &sol.as_ref().ok_or_else(|| null("sol"))?.inner;
        let (lo, hi) = s.value.domain();
        let r = s.value.try_eval(x).ok_or_else(|| Fail(RfStatus::OutOfDomain, format!("x = {x} outside [{lo}, {hi}]")))?;
        ptr::copy_nonoverlapping(r.as_ptr(), out, 3);
        Ok(())
    })
}

/// `J_b(x)`, the value of the refraction strategy at barrier `b`.
///
/// # Safety
/// `sol` must be a live solution handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_solution_performance(sol: *const RfSolution, b: f64, x: f64, out: *mut f64) -> RfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let s = &sol.as_ref().ok_or_else(|| null("sol"))?.inner;
        if !(x >= 0.0 && x <= s.x_hi()) {
            return Err(Fail(RfStatus::OutOfDomain, format!("x = {x} outside [0, {}]", s.x_hi())));
        }
        *out = s.performance_at(b, x)?;
        Ok(())
    })
}

/// Monte Carlo estimate of `J_b(x0)`, Brownian-bridge absorption at 0.
///
/// # Safety
/// `sol` must be a live solution handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_simulate(
    sol: *const RfSolution,
    b: f64,
    x0: f64,
    n_paths: u64,
    dt: f64,
    seed: u64,
    out: *mut RfEstimate,
) -> RfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let s = &sol.as_ref().ok_or_else(|| null("sol"))?.inner;
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Fail(RfStatus::InvalidArgument, format!("barrier {b} must be finite and nonnegative")));
        }
        let cfg = SimConfig { dt, n_paths: n_paths as usize, seed, x0, ..Default::default() };
        let e = simulate_refraction(&s.model, b, &cfg).map_err(|e| Fail(RfStatus::InvalidArgument, e.to_string()))?;
        *out = RfEstimate {
            mean: e.mean,
            std_error: e.std_error,
            absorbed_fraction: e.absorbed_fraction,
            mean_absorption_time: e.mean_absorption_time,
            n_paths: e.n_paths as u64,
        };
        Ok(())
    })
}

/// Evaluate the special function `which` (an [`RfSpecial`] value);
/// `abs_error` may be null.
///
/// # Safety
/// `value` must be a valid pointer; `abs_error` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn rf_special(which: i32, a: f64, b: f64, z: f64, value: *mut f64, abs_error: *mut f64) -> RfStatus {
    guard(|| {
        let value = out_ref(value, "value")?;
        let tol = 1e-12;
        let r = match which {
            w if w == RfSpecial::KummerM as i32 => specfun::kummer_m(a, b, z, tol),
            w if w == RfSpecial::TricomiU as i32 => specfun::tricomi_u(a, b, z, tol),
            w if w == RfSpecial::ParabolicD as i32 => specfun::parabolic_cylinder_d(a, z, tol),
            _ => return Err(Fail(RfStatus::InvalidArgument, format!("unknown special function {which}"))),
        }
        .map_err(|e| {
            let s = match e {
                specfun::SpecFunError::ParameterPole { .. } | specfun::SpecFunError::UnsupportedRegime { .. } => RfStatus::InvalidArgument,
                _ => RfStatus::Numerical,
            };
            Fail(s, e.to_string())
        })?;
        *value = r.value;
        if let Some(err) = abs_error.as_mut() {
            *err = r.abs_error_estimate;
        }
        Ok(())
    })
}
