//! C ABI over `elastica-core`.
//!
//! Every fallible function returns an [`ElasticaStatus`]; on failure the
//! message is kept per thread and can be copied out with
//! [`elastica_last_error_message`]. Objects are handed out as opaque pointers
//! and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use elastica_core::energy::{DiscreteEnergy, EnergyBreakdown, PhysicalParams, QuarticBump, RegularizationParams};
use elastica_core::grid::{PeriodicGrid, PolygonalCurve};
use elastica_core::obstacles::Obstacle;
use elastica_core::optimizer::{minimize_bfgs, MinimizeOptions, MinimizeResult};
use elastica_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElasticaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LengthMismatch = 3,
    NonFinite = 4,
    Io = 5,
    /// The Rust side panicked; the handle involved should not be reused.
    Panic = 6,
}

/// A periodic polygonal curve.
pub struct ElasticaCurve(PolygonalCurve);

/// The discrete energy on a fixed grid and obstacle.
pub struct ElasticaEnergy(DiscreteEnergy);

/// Outcome of [`elastica_minimize`].
pub struct ElasticaResult(MinimizeResult);

/// Energy terms; `total = bending + tension - adhesion + penalty`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ElasticaBreakdown {
    pub bending: f64,
    pub tension: f64,
    pub adhesion: f64,
    pub penalty: f64,
    pub total: f64,
}

impl From<EnergyBreakdown> for ElasticaBreakdown {
    fn from(b: EnergyBreakdown) -> Self {
        Self {
            bending: b.bending,
            tension: b.tension,
            adhesion: b.adhesion,
            penalty: b.penalty,
            total: b.total,
        }
    }
}

/// Model parameters. `c` is the full bending modulus.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticaParams {
    pub c: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub delta: f64,
    pub rho: f64,
}

/// Stopping rule for [`elastica_minimize`]. Zero fields take the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ElasticaOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ElasticaSummary {
    pub energy: ElasticaBreakdown,
    pub iterations: usize,
    pub final_criterion: f64,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: ElasticaStatus, msg: impl Into<String>) -> ElasticaStatus {
    set_error(msg.into());
    status
}

fn status_of(err: &Error) -> ElasticaStatus {
    match err {
        Error::LengthMismatch { .. } => ElasticaStatus::LengthMismatch,
        Error::NonFinite { .. } => ElasticaStatus::NonFinite,
        Error::Io { .. } | Error::Csv { .. } | Error::Json(_) => ElasticaStatus::Io,
        _ => ElasticaStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), ElasticaStatus>>(f: F) -> ElasticaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ElasticaStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(ElasticaStatus::Panic, msg)
        }
    }
}

fn core<T>(r: elastica_core::Result<T>) -> Result<T, ElasticaStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, ElasticaStatus> {
    p.as_ref().ok_or_else(|| fail(ElasticaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), ElasticaStatus> {
    if out.is_null() {
        return Err(fail(ElasticaStatus::NullPointer, "output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn check_grid(energy: &DiscreteEnergy, curve: &PolygonalCurve) -> Result<(), ElasticaStatus> {
    if energy.grid() != curve.grid() {
        return Err(fail(
            ElasticaStatus::LengthMismatch,
            format!("curve has {} nodes but the energy expects {}", curve.len(), energy.grid().len()),
        ));
    }
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn elastica_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static version string of the library.
#[no_mangle]
pub extern "C" fn elastica_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a curve from `n` nodal values over the uniform periodic grid.
///
/// # Safety
/// `values` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn elastica_curve_new(values: *const f64, n: usize, out: *mut *mut ElasticaCurve) -> ElasticaStatus {
    guard(|| {
        if values.is_null() {
            return Err(fail(ElasticaStatus::NullPointer, "values is null"));
        }
        let v = std::slice::from_raw_parts(values, n).to_vec();
        let curve = core(PolygonalCurve::from_values(v))?;
        write_out(out, ElasticaCurve(curve))
    })
}

/// # Safety
/// `curve` must be null or a pointer from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn elastica_curve_free(curve: *mut ElasticaCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Number of nodes, or 0 for a null curve.
///
/// # Safety
/// `curve` must be null or a live curve handle.
#[no_mangle]
pub unsafe extern "C" fn elastica_curve_len(curve: *const ElasticaCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.0.len())
}

/// Copies the nodal values into `out`, which must hold exactly the curve length.
///
/// # Safety
/// `curve` must be a live handle and `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn elastica_curve_values(curve: *const ElasticaCurve, out: *mut f64, n: usize) -> ElasticaStatus {
    guard(|| {
        let curve = borrow(curve, "curve")?;
        if out.is_null() {
            return Err(fail(ElasticaStatus::NullPointer, "out is null"));
        }
        if n != curve.0.len() {
            return Err(fail(
                ElasticaStatus::LengthMismatch,
                format!("buffer holds {n} values, curve has {}", curve.0.len()),
            ));
        }
        ptr::copy_nonoverlapping(curve.0.values().as_ptr(), out, n);
        Ok(())
    })
}

/// Builds the energy for `n` nodes and the obstacle named by `obstacle`
/// (`sin24`, `peak`, `peak(eps=..)`, `flat(c=..)` or `csv:<path>`).
///
/// # Safety
/// `obstacle` must be a NUL-terminated string, `params` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn elastica_energy_new(
    obstacle: *const c_char,
    n: usize,
    params: *const ElasticaParams,
    out: *mut *mut ElasticaEnergy,
) -> ElasticaStatus {
    guard(|| {
        if obstacle.is_null() {
            return Err(fail(ElasticaStatus::NullPointer, "obstacle is null"));
        }
        let name = CStr::from_ptr(obstacle)
            .to_str()
            .map_err(|_| fail(ElasticaStatus::InvalidArgument, "obstacle name is not UTF-8"))?;
        let p = *borrow(params, "params")?;
        let obstacle = core(Obstacle::from_name(name))?;
        let grid = core(PeriodicGrid::new(n))?;
        let physical = core(PhysicalParams::new(p.c, p.sigma, p.gamma))?;
        let reg = core(RegularizationParams::new(p.delta, p.rho))?;
        let energy = DiscreteEnergy::new(grid, &obstacle, physical, reg, Arc::new(QuarticBump));
        write_out(out, ElasticaEnergy(energy))
    })
}

/// # Safety
/// `energy` must be null or a pointer from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn elastica_energy_free(energy: *mut ElasticaEnergy) {
    if !energy.is_null() {
        drop(Box::from_raw(energy));
    }
}

/// Obstacle values at the grid nodes.
///
/// # Safety
/// `energy` must be a live handle and `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn elastica_energy_obstacle(energy: *const ElasticaEnergy, out: *mut f64, n: usize) -> ElasticaStatus {
    guard(|| {
        let energy = borrow(energy, "energy")?;
        let psi = energy.0.psi();
        if out.is_null() {
            return Err(fail(ElasticaStatus::NullPointer, "out is null"));
        }
        if n != psi.len() {
            return Err(fail(
                ElasticaStatus::LengthMismatch,
                format!("buffer holds {n} values, grid has {}", psi.len()),
            ));
        }
        ptr::copy_nonoverlapping(psi.as_ptr(), out, n);
        Ok(())
    })
}

/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn elastica_energy_breakdown(
    energy: *const ElasticaEnergy,
    curve: *const ElasticaCurve,
    out: *mut ElasticaBreakdown,
) -> ElasticaStatus {
    guard(|| {
        let energy = borrow(energy, "energy")?;
        let curve = borrow(curve, "curve")?;
        check_grid(&energy.0, &curve.0)?;
        if out.is_null() {
            return Err(fail(ElasticaStatus::NullPointer, "out is null"));
        }
        *out = energy.0.breakdown(curve.0.values()).into();
        Ok(())
    })
}

/// Gradient of the total energy with respect to the nodal values.
///
/// # Safety
/// Both handles must be live and `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn elastica_energy_gradient(
    energy: *const ElasticaEnergy,
    curve: *const ElasticaCurve,
    out: *mut f64,
    n: usize,
) -> ElasticaStatus {
    guard(|| {
        let energy = borrow(energy, "energy")?;
        let curve = borrow(curve, "curve")?;
        check_grid(&energy.0, &curve.0)?;
        if out.is_null() {
            return Err(fail(ElasticaStatus::NullPointer, "out is null"));
        }
        if n != curve.0.len() {
            return Err(fail(
                ElasticaStatus::LengthMismatch,
                format!("buffer holds {n} values, curve has {}", curve.0.len()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(out, n);
        energy.0.value_and_gradient(curve.0.values(), out);
        Ok(())
    })
}

/// Minimizes from `initial`. A run that stops without meeting the tolerance
/// still returns `ELASTICA_STATUS_OK`; check `converged` in the summary.
///
/// # Safety
/// Handles must be live, `options` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn elastica_minimize(
    energy: *const ElasticaEnergy,
    initial: *const ElasticaCurve,
    options: *const ElasticaOptions,
    out: *mut *mut ElasticaResult,
) -> ElasticaStatus {
    guard(|| {
        let energy = borrow(energy, "energy")?;
        let initial = borrow(initial, "initial")?;
        check_grid(&energy.0, &initial.0)?;
        let mut opts = MinimizeOptions::default();
        if let Some(o) = options.as_ref() {
            if o.tolerance != 0.0 {
                opts.tolerance = o.tolerance;
            }
            if o.max_iterations != 0 {
                opts.max_iterations = o.max_iterations;
            }
        }
        let result = core(minimize_bfgs(&initial.0, &energy.0, &opts))?;
        write_out(out, ElasticaResult(result))
    })
}

/// # Safety
/// `result` must be null or a pointer from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn elastica_result_free(result: *mut ElasticaResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn elastica_result_summary(result: *const ElasticaResult, out: *mut ElasticaSummary) -> ElasticaStatus {
    guard(|| {
        let r = &borrow(result, "result")?.0;
        if out.is_null() {
            return Err(fail(ElasticaStatus::NullPointer, "out is null"));
        }
        *out = ElasticaSummary {
            energy: r.breakdown.into(),
            iterations: r.iterations,
            final_criterion: r.final_criterion,
            converged: r.converged,
        };
        Ok(())
    })
}

/// A new curve handle holding the minimizer; free it separately.
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn elastica_result_curve(result: *const ElasticaResult, out: *mut *mut ElasticaCurve) -> ElasticaStatus {
    guard(|| {
        let r = borrow(result, "result")?;
        write_out(out, ElasticaCurve(r.0.curve.clone()))
    })
}
