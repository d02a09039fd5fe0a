//! C ABI for the menulab core: opaque handles, status codes, and a
//! last-error message channel. The header is generated by cbindgen into
//! `include/menulab.h` at build time.
//!
//! Ownership rules: every `*_new`/`*_from_json`/`solve` function returns an
//! owned handle that must be released with the matching `*_free`; strings
//! returned by this library are released with `menulab_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, c_uint, CStr, CString};
use std::path::Path;
use std::ptr;

use menulab::baselines;
use menulab::cli;
use menulab::distributions::{check_condition, fosd_dominates, Density1D, ProductDistribution};
use menulab::error::Error;
use menulab::lp_solver::{discretize, solve_optimal};
use menulab::mechanism::GridMechanism;
use menulab::menu_analysis::{check_menu_monotonicity, count_menu_items, extract_menu};
use menulab::numerics::{QuadratureSpec, ToleranceConfig};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MenulabStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidInput = 2,
    SolverFailure = 3,
    PreconditionFailed = 4,
    ValidationFailed = 5,
}

/// Opaque marginal density handle.
#[repr(C)]
pub struct MenulabDensity {
    _unused: [u8; 0],
}

/// Opaque product-distribution handle.
#[repr(C)]
pub struct MenulabProduct {
    _unused: [u8; 0],
}

/// Opaque solved-mechanism handle.
#[repr(C)]
pub struct MenulabMechanism {
    _unused: [u8; 0],
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let cstring = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn status_of(err: &Error) -> MenulabStatus {
    match err {
        Error::Config { .. } | Error::Invalid { .. } | Error::OutOfDomain { .. } => {
            MenulabStatus::InvalidInput
        }
        Error::Precondition(_) => MenulabStatus::PreconditionFailed,
        Error::Validation(_) => MenulabStatus::ValidationFailed,
        _ => MenulabStatus::SolverFailure,
    }
}

fn fail(err: Error) -> MenulabStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn tol() -> ToleranceConfig {
    ToleranceConfig::default()
}

unsafe fn density_ref<'a>(handle: *const MenulabDensity) -> Option<&'a Density1D> {
    (handle as *const Density1D).as_ref()
}

unsafe fn product_ref<'a>(handle: *const MenulabProduct) -> Option<&'a ProductDistribution> {
    (handle as *const ProductDistribution).as_ref()
}

struct SolvedMechanism {
    gm: GridMechanism,
}

unsafe fn mechanism_ref<'a>(handle: *const MenulabMechanism) -> Option<&'a SolvedMechanism> {
    (handle as *const SolvedMechanism).as_ref()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn menulab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Returns the last error message raised on this thread, or NULL. The caller
/// frees the string with `menulab_string_free`.
#[no_mangle]
pub extern "C" fn menulab_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Frees a string allocated by this library. NULL is accepted.
///
/// # Safety
/// `s` must have been returned by a menulab function and not freed before.
#[no_mangle]
pub unsafe extern "C" fn menulab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a density from a JSON spec like
/// `{"kind":"power","a":2.0,"b":-2.0,"support":[1,2]}`.
/// Returns NULL on failure (see `menulab_last_error`).
///
/// # Safety
/// `json` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn menulab_density_from_json(json: *const c_char) -> *mut MenulabDensity {
    if json.is_null() {
        set_error("json argument is NULL".into());
        return ptr::null_mut();
    }
    let Ok(text) = CStr::from_ptr(json).to_str() else {
        set_error("json argument is not valid UTF-8".into());
        return ptr::null_mut();
    };
    let spec: cli::DensitySpec = match serde_json::from_str(text) {
        Ok(spec) => spec,
        Err(e) => {
            set_error(format!("density spec parse error: {e}"));
            return ptr::null_mut();
        }
    };
    match spec.build() {
        Ok(density) => Box::into_raw(Box::new(density)) as *mut MenulabDensity,
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `handle` must come from `menulab_density_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn menulab_density_free(handle: *mut MenulabDensity) {
    if !handle.is_null() {
        drop(Box::from_raw(handle as *mut Density1D));
    }
}

/// Power rate `x f'(x) / f(x)` at an interior point of the support.
///
/// # Safety
/// `density` must be a live density handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn menulab_density_power_rate(
    density: *const MenulabDensity,
    x: c_double,
    out: *mut c_double,
) -> MenulabStatus {
    let (Some(d), Some(out)) = (density_ref(density), out.as_mut()) else {
        return MenulabStatus::NullArgument;
    };
    match d.power_rate(x) {
        Ok(v) => {
            *out = v;
            MenulabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Cumulative distribution function at `x` (clamped to `[0, 1]`).
///
/// # Safety
/// `density` must be a live density handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn menulab_density_cdf(
    density: *const MenulabDensity,
    x: c_double,
    out: *mut c_double,
) -> MenulabStatus {
    let (Some(d), Some(out)) = (density_ref(density), out.as_mut()) else {
        return MenulabStatus::NullArgument;
    };
    *out = d.cdf(x);
    MenulabStatus::Ok
}

/// Builds an independent product distribution; the input densities are
/// copied and stay owned by the caller.
///
/// # Safety
/// Both arguments must be live density handles.
#[no_mangle]
pub unsafe extern "C" fn menulab_product_new(
    dx: *const MenulabDensity,
    dy: *const MenulabDensity,
) -> *mut MenulabProduct {
    let (Some(dx), Some(dy)) = (density_ref(dx), density_ref(dy)) else {
        set_error("density argument is NULL".into());
        return ptr::null_mut();
    };
    match ProductDistribution::new(dx.clone(), dy.clone()) {
        Ok(product) => Box::into_raw(Box::new(product)) as *mut MenulabProduct,
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `handle` must come from `menulab_product_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn menulab_product_free(handle: *mut MenulabProduct) {
    if !handle.is_null() {
        drop(Box::from_raw(handle as *mut ProductDistribution));
    }
}

/// The field `3 f1 f2 + x f1' f2 + y f2' f1` at an interior point.
///
/// # Safety
/// `product` must be a live product handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn menulab_product_delta(
    product: *const MenulabProduct,
    x: c_double,
    y: c_double,
    out: *mut c_double,
) -> MenulabStatus {
    let (Some(d), Some(out)) = (product_ref(product), out.as_mut()) else {
        return MenulabStatus::NullArgument;
    };
    match d.delta(x, y) {
        Ok(v) => {
            *out = v;
            MenulabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Grid-certified check of power-rate condition `id` (1..=5); writes whether
/// it holds and the worst margin.
///
/// # Safety
/// `product` must be a live product handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn menulab_check_condition(
    product: *const MenulabProduct,
    id: c_uint,
    grid_n: c_uint,
    out_holds: *mut c_int,
    out_margin: *mut c_double,
) -> MenulabStatus {
    let (Some(d), Some(out_holds), Some(out_margin)) = (
        product_ref(product),
        out_holds.as_mut(),
        out_margin.as_mut(),
    ) else {
        return MenulabStatus::NullArgument;
    };
    if !(1..=5).contains(&id) || grid_n < 16 {
        set_error("condition id must be 1..=5 and grid_n >= 16".into());
        return MenulabStatus::InvalidInput;
    }
    match check_condition(d, id as u8, grid_n as usize, &tol()) {
        Ok(report) => {
            *out_holds = report.holds as c_int;
            *out_margin = report.worst_margin;
            MenulabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// First-order stochastic dominance of `g` over `f` on a shared grid.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn menulab_fosd_dominates(
    g: *const MenulabDensity,
    f: *const MenulabDensity,
    grid_n: c_uint,
    out: *mut c_int,
) -> MenulabStatus {
    let (Some(g), Some(f), Some(out)) = (density_ref(g), density_ref(f), out.as_mut()) else {
        return MenulabStatus::NullArgument;
    };
    *out = fosd_dominates(g, f, grid_n.max(2) as usize, &tol()) as c_int;
    MenulabStatus::Ok
}

/// Solves the optimal-mechanism LP on an `n x n` midpoint discretization.
/// Returns NULL on failure.
///
/// # Safety
/// `product` must be a live product handle.
#[no_mangle]
pub unsafe extern "C" fn menulab_solve_optimal(
    product: *const MenulabProduct,
    n: c_uint,
    unit_demand: c_int,
) -> *mut MenulabMechanism {
    let Some(d) = product_ref(product) else {
        set_error("product argument is NULL".into());
        return ptr::null_mut();
    };
    if n < 2 {
        set_error("grid resolution must be at least 2".into());
        return ptr::null_mut();
    }
    let solved = discretize(d, n as usize).and_then(|inst| solve_optimal(&inst, unit_demand != 0));
    match solved {
        Ok(gm) => Box::into_raw(Box::new(SolvedMechanism { gm })) as *mut MenulabMechanism,
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `handle` must come from `menulab_solve_optimal` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn menulab_mechanism_free(handle: *mut MenulabMechanism) {
    if !handle.is_null() {
        drop(Box::from_raw(handle as *mut SolvedMechanism));
    }
}

/// Expected revenue of the solved mechanism on its instance.
///
/// # Safety
/// `mechanism` must be a live mechanism handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn menulab_mechanism_revenue(
    mechanism: *const MenulabMechanism,
    out: *mut c_double,
) -> MenulabStatus {
    let (Some(m), Some(out)) = (mechanism_ref(mechanism), out.as_mut()) else {
        return MenulabStatus::NullArgument;
    };
    *out = m.gm.expected_revenue();
    MenulabStatus::Ok
}

/// Extracted menu as CSV text (`q1,q2,t` rows, 12 significant digits). The
/// caller frees the string with `menulab_string_free`.
///
/// # Safety
/// `mechanism` must be a live mechanism handle.
#[no_mangle]
pub unsafe extern "C" fn menulab_mechanism_menu_csv(
    mechanism: *const MenulabMechanism,
    cluster_tol: c_double,
) -> *mut c_char {
    let Some(m) = mechanism_ref(mechanism) else {
        set_error("mechanism argument is NULL".into());
        return ptr::null_mut();
    };
    let menu = extract_menu(&m.gm, cluster_tol.max(1e-12));
    CString::new(menu.to_csv()).map_or(ptr::null_mut(), CString::into_raw)
}

/// Whether the extracted menu is monotone (payments strictly increasing,
/// allocations weakly increasing).
///
/// # Safety
/// `mechanism` must be a live mechanism handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn menulab_mechanism_menu_monotone(
    mechanism: *const MenulabMechanism,
    cluster_tol: c_double,
    out: *mut c_int,
) -> MenulabStatus {
    let (Some(m), Some(out)) = (mechanism_ref(mechanism), out.as_mut()) else {
        return MenulabStatus::NullArgument;
    };
    let menu = extract_menu(&m.gm, cluster_tol.max(1e-12));
    let (holds, _) = check_menu_monotonicity(&menu, &tol());
    *out = holds as c_int;
    MenulabStatus::Ok
}

/// Raw (1e-9 deduplicated) and clustered menu-item counts.
///
/// # Safety
/// `mechanism` must be a live mechanism handle; out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn menulab_mechanism_count_items(
    mechanism: *const MenulabMechanism,
    cluster_tol: c_double,
    out_raw: *mut c_uint,
    out_clustered: *mut c_uint,
) -> MenulabStatus {
    let (Some(m), Some(out_raw), Some(out_clustered)) = (
        mechanism_ref(mechanism),
        out_raw.as_mut(),
        out_clustered.as_mut(),
    ) else {
        return MenulabStatus::NullArgument;
    };
    let (raw, clustered) = count_menu_items(&m.gm, cluster_tol.max(1e-12));
    *out_raw = raw as c_uint;
    *out_clustered = clustered as c_uint;
    MenulabStatus::Ok
}

/// Separate-sale revenue (one posted price per item).
///
/// # Safety
/// `product` must be a live product handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn menulab_separate_revenue(
    product: *const MenulabProduct,
    out: *mut c_double,
) -> MenulabStatus {
    let (Some(d), Some(out)) = (product_ref(product), out.as_mut()) else {
        return MenulabStatus::NullArgument;
    };
    *out = baselines::separate_sale(d);
    MenulabStatus::Ok
}

/// Optimal bundle price and its revenue.
///
/// # Safety
/// `product` must be a live product handle; out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn menulab_bundle_revenue(
    product: *const MenulabProduct,
    out_price: *mut c_double,
    out_revenue: *mut c_double,
) -> MenulabStatus {
    let (Some(d), Some(out_price), Some(out_revenue)) = (
        product_ref(product),
        out_price.as_mut(),
        out_revenue.as_mut(),
    ) else {
        return MenulabStatus::NullArgument;
    };
    match baselines::bundle_sale(d, &QuadratureSpec::default()) {
        Ok((p, r)) => {
            *out_price = p;
            *out_revenue = r;
            MenulabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Runs a scenario config file end to end. Returns the CLI exit code:
/// 0 success, 1 an asserted check failed, 2 config error, 3 solver error.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn menulab_run_config(path: *const c_char) -> c_int {
    if path.is_null() {
        set_error("path argument is NULL".into());
        return 2;
    }
    let Ok(text) = CStr::from_ptr(path).to_str() else {
        set_error("path is not valid UTF-8".into());
        return 2;
    };
    match cli::run(Path::new(text)) {
        Ok(report) if report.all_passed() => 0,
        Ok(_) => 1,
        Err(e) => {
            let code = match e {
                Error::Config { .. } | Error::Invalid { .. } | Error::Io(_) => 2,
                _ => 3,
            };
            set_error(e.to_string());
            code
        }
    }
}
