//! C ABI over `dam-control`.
//!
//! Every entry point returns a [`DamStatus`]; results go through out-pointers.
//! On failure the message for the calling thread is available from
//! [`dam_last_error_message`]. Handles are opaque and must be released with
//! the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dam_control::asympt::RegimeParams;
use dam_control::control::{self, Regime};
use dam_control::costs::CostModel;
use dam_control::dists::DistributionSpec;
use dam_control::exact::{self, DamModelParams};
use dam_control::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DamStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    BufferTooSmall = 3,
    Domain = 10,
    Regime = 11,
    Convergence = 12,
    Existence = 13,
    Overflow = 14,
    Index = 15,
    Config = 16,
    Ambiguity = 17,
    Bracket = 18,
    Io = 19,
    Panic = 99,
}

impl From<&Error> for DamStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => DamStatus::Domain,
            Error::Regime(_) => DamStatus::Regime,
            Error::Convergence(_) => DamStatus::Convergence,
            Error::Existence(_) => DamStatus::Existence,
            Error::Overflow(_) => DamStatus::Overflow,
            Error::Index { .. } => DamStatus::Index,
            Error::Config(_) => DamStatus::Config,
            Error::Ambiguity(_) => DamStatus::Ambiguity,
            Error::Bracket(_) => DamStatus::Bracket,
            Error::Io { .. } => DamStatus::Io,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DamRegimeKind {
    Balanced = 0,
    Upper = 1,
    Lower = 2,
}

/// Optimal control as plain data. `c` is zero for the balanced regime.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamSolution {
    pub regime: DamRegimeKind,
    pub c: f64,
    pub objective: f64,
    pub balanced_value: f64,
}

/// Finite-L model: arrival rate, two service laws, levels and penalties.
pub struct DamModel(DamModelParams);

/// Parameters of the heavy-traffic functionals.
pub struct DamRegimeParams(RegimeParams);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

struct Failure(DamStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(DamStatus::from(&e), e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DamStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DamStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DamStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(DamStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    non_null(p, what)?;
    CStr::from_ptr(p).to_str().map_err(|_| Failure(DamStatus::InvalidString, format!("{what} is not UTF-8")))
}

unsafe fn parse<T: std::str::FromStr<Err = Error>>(p: *const c_char, what: &str) -> Result<T, Failure> {
    Ok(text(p, what)?.parse::<T>()?)
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dam_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dam_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a model. Service laws use the textual form `exp:2`, `erlang:3,1.5`,
/// `hyperexp:0.3|0.7;1|4` or `det:0.5`.
///
/// # Safety
/// `b1` and `b2` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dam_model_new(
    lambda: f64,
    b1: *const c_char,
    b2: *const c_char,
    levels: usize,
    j1: f64,
    j2: f64,
    out: *mut *mut DamModel,
) -> DamStatus {
    guard(|| {
        non_null(out, "out")?;
        let b1: DistributionSpec = parse(b1, "b1")?;
        let b2: DistributionSpec = parse(b2, "b2")?;
        let model = DamModelParams::new(lambda, b1, b2, levels, j1, j2)?;
        *out = Box::into_raw(Box::new(DamModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`dam_model_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn dam_model_free(model: *mut DamModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `rho1` and `rho2` writable.
#[no_mangle]
pub unsafe extern "C" fn dam_model_intensities(model: *const DamModel, rho1: *mut f64, rho2: *mut f64) -> DamStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(rho1, "rho1")?;
        non_null(rho2, "rho2")?;
        *rho1 = (*model).0.rho1();
        *rho2 = (*model).0.rho2();
        Ok(())
    })
}

/// Stationary quantities. `q` receives `L` values and `q_len` must be at
/// least `L`; pass a null `q` to skip it.
///
/// # Safety
/// Scalar out-pointers must be writable; `q`, if not null, must hold `q_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dam_model_stationary(
    model: *const DamModel,
    p1: *mut f64,
    p2: *mut f64,
    defect: *mut f64,
    q: *mut f64,
    q_len: usize,
) -> DamStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(p1, "p1")?;
        non_null(p2, "p2")?;
        non_null(defect, "defect")?;
        let levels = (*model).0.levels();
        if !q.is_null() && q_len < levels {
            return Err(Failure(DamStatus::BufferTooSmall, format!("q needs {levels} slots, got {q_len}")));
        }
        let st = exact::stationary(&(*model).0)?;
        *p1 = st.p1;
        *p2 = st.p2;
        *defect = st.defect;
        if !q.is_null() {
            std::slice::from_raw_parts_mut(q, levels).copy_from_slice(&st.q);
        }
        Ok(())
    })
}

/// Exact long-run cost rate under the given cost model (`constant:1`,
/// `linear:2,1`, `table:2|1.5|1,stretch`).
///
/// # Safety
/// `model` must be live, `costs` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dam_model_objective(model: *const DamModel, costs: *const c_char, out: *mut f64) -> DamStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let costs: CostModel = parse(costs, "costs")?;
        *out = exact::objective_exact(&(*model).0, &costs)?;
        Ok(())
    })
}

/// # Safety
/// `costs` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dam_regime_new(
    j1: f64,
    j2: f64,
    rho2: f64,
    rho12: f64,
    costs: *const c_char,
    out: *mut *mut DamRegimeParams,
) -> DamStatus {
    guard(|| {
        non_null(out, "out")?;
        let costs: CostModel = parse(costs, "costs")?;
        let params = RegimeParams::new(j1, j2, rho2, rho12, costs)?;
        *out = Box::into_raw(Box::new(DamRegimeParams(params)));
        Ok(())
    })
}

/// # Safety
/// `params` must come from [`dam_regime_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn dam_regime_free(params: *mut DamRegimeParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// # Safety
/// `params` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dam_regime_balanced_limit(params: *const DamRegimeParams, out: *mut f64) -> DamStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        *out = (*params).0.balanced_limit();
        Ok(())
    })
}

/// # Safety
/// `params` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dam_regime_j_upper(params: *const DamRegimeParams, c: f64, out: *mut f64) -> DamStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        *out = (*params).0.j_upper(c)?;
        Ok(())
    })
}

/// # Safety
/// `params` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dam_regime_j_lower(params: *const DamRegimeParams, c: f64, out: *mut f64) -> DamStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        *out = (*params).0.j_lower(c)?;
        Ok(())
    })
}

/// Optimal regime. Non-positive `c_max` or `tol` select the library defaults.
///
/// # Safety
/// `params` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dam_solve(
    params: *const DamRegimeParams,
    c_max: f64,
    tol: f64,
    out: *mut DamSolution,
) -> DamStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        let (c_max, tol) = defaults(c_max, tol);
        let sol = control::solve(&(*params).0, c_max, tol)?;
        let regime = match sol.regime {
            Regime::Balanced => DamRegimeKind::Balanced,
            Regime::Upper(_) => DamRegimeKind::Upper,
            Regime::Lower(_) => DamRegimeKind::Lower,
        };
        *out = DamSolution { regime, c: sol.regime.c(), objective: sol.objective, balanced_value: sol.balanced_value };
        Ok(())
    })
}

/// Smallest `j2` (other parameters fixed) for which the upper regime is no
/// longer optimal.
///
/// # Safety
/// `params` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dam_threshold_j2(params: *const DamRegimeParams, c_max: f64, tol: f64, out: *mut f64) -> DamStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        let (c_max, tol) = defaults(c_max, tol);
        *out = control::threshold_j2(&(*params).0, c_max, tol)?;
        Ok(())
    })
}

fn defaults(c_max: f64, tol: f64) -> (f64, f64) {
    let c_max = if c_max > 0.0 { c_max } else { control::DEFAULT_C_MAX };
    let tol = if tol > 0.0 { tol } else { control::DEFAULT_TOL };
    (c_max, tol)
}
