//! C ABI for the drro synthesis library.
//!
//! Objects cross the boundary as opaque handles that the caller owns and
//! releases with the matching `*_free` function. Every entry point returns a
//! [`DrroStatus`]; on failure a description is available from
//! [`drro_last_error`] on the same thread. Matrices are dense, row-major
//! `double` arrays. Panics never unwind into the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use drro::drro::{synthesize_with, SynthesisConfig, SynthesisResult};
use drro::eval::{approximate_and_realize, ApproximationConfig};
use drro::linalg::Mat;
use drro::realize::{h2_controller, RealizedController};
use drro::sysmodel::{riccati, RiccatiData, StateSpaceModel};
use drro::{benchmarks, io, Error, ErrorClass};

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrroStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Malformed input: dimensions, strings, files or configuration.
    InvalidArgument = 2,
    /// A numerical failure in the library.
    Numerical = 3,
    /// An iterative solver stopped before converging. Synthesis still
    /// returns its handle in this case.
    NonConvergence = 4,
    /// The output buffer is too small; the required length was written back.
    BufferTooSmall = 5,
    /// An internal invariant failed.
    Internal = 6,
}

/// A plant together with its Riccati solution.
pub struct DrroModel {
    model: StateSpaceModel,
    ricc: RiccatiData,
}

/// A finished (or stopped) worst-case spectrum synthesis.
pub struct DrroSynthesis {
    result: SynthesisResult,
}

/// A finite-dimensional controller `xi+ = F xi + G w, u = H xi + J w`.
pub struct DrroController {
    ctrl: RealizedController,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DrroSynthesisInfo {
    pub radius: f64,
    pub regret: f64,
    pub gamma_star: f64,
    pub iterations: usize,
    pub grid: usize,
    pub converged: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DrroControllerDims {
    pub states: usize,
    pub inputs: usize,
    pub outputs: usize,
    /// Trailing states that replicate the negated plant state.
    pub replica_states: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Status(DrroStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn status_of(e: &Error) -> DrroStatus {
    match e.class() {
        ErrorClass::Config => DrroStatus::InvalidArgument,
        ErrorClass::Numerical => DrroStatus::Numerical,
        ErrorClass::NonConvergence => DrroStatus::NonConvergence,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DrroStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DrroStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            DrroStatus::Internal
        }
    }
}

fn null(name: &str) -> Failure {
    Failure::Status(DrroStatus::NullPointer, format!("{name} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn string<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(DrroStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn matrix(p: *const f64, rows: usize, cols: usize, name: &str) -> Result<Mat, Failure> {
    if rows * cols == 0 {
        return Ok(Mat::zeros(rows, cols));
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(Mat::from_row_slice(rows, cols, std::slice::from_raw_parts(p, rows * cols)))
}

/// Copies `values` into a caller buffer of `len` entries, reporting the
/// required length through `needed` when it is not null.
unsafe fn copy_out(values: &[f64], out: *mut f64, len: usize, needed: *mut usize) -> Result<(), Failure> {
    if let Some(n) = needed.as_mut() {
        *n = values.len();
    }
    if len < values.len() {
        return Err(Failure::Status(
            DrroStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} required", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    std::slice::from_raw_parts_mut(out, values.len()).copy_from_slice(values);
    Ok(())
}

fn row_major(m: &Mat) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn into_handle(model: StateSpaceModel) -> Result<*mut DrroModel, Failure> {
    let ricc = riccati(&model)?;
    Ok(Box::into_raw(Box::new(DrroModel { model, ricc })))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn drro_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn drro_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a plant from row-major `A` (d_x x d_x), `B_u` (d_x x d_u),
/// `B_w` (d_x x d_w) and `C` (d_s x d_x).
///
/// # Safety
/// Each matrix pointer must reference at least rows * cols readable doubles.
#[no_mangle]
pub unsafe extern "C" fn drro_model_new(
    a: *const f64,
    b_u: *const f64,
    b_w: *const f64,
    c: *const f64,
    d_x: usize,
    d_u: usize,
    d_w: usize,
    d_s: usize,
    out: *mut *mut DrroModel,
) -> DrroStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = StateSpaceModel::new(
            matrix(a, d_x, d_x, "a")?,
            matrix(b_u, d_x, d_u, "b_u")?,
            matrix(b_w, d_x, d_w, "b_w")?,
            matrix(c, d_s, d_x, "c")?,
        )?;
        *out = into_handle(model)?;
        Ok(())
    })
}

/// Loads a plant from a TOML matrix document.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn drro_model_read(path: *const c_char, out: *mut *mut DrroModel) -> DrroStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = into_handle(io::read_model(Path::new(string(path, "path")?))?)?;
        Ok(())
    })
}

/// Loads a bundled benchmark plant: "ac15", "he3", "rea4" or "scalar".
///
/// # Safety
/// `name` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn drro_model_builtin(name: *const c_char, out: *mut *mut DrroModel) -> DrroStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let name = string(name, "name")?;
        let model = benchmarks::by_name(name)
            .map_err(|e| Failure::Status(DrroStatus::InvalidArgument, e.to_string()))?;
        *out = into_handle(model)?;
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; dimension pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn drro_model_dims(
    model: *const DrroModel,
    d_x: *mut usize,
    d_u: *mut usize,
    d_w: *mut usize,
    d_s: *mut usize,
) -> DrroStatus {
    guard(|| {
        let m = &borrow(model, "model")?.model;
        for (p, v) in [(d_x, m.d_x()), (d_u, m.d_u()), (d_w, m.b_w.ncols()), (d_s, m.d_s())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn drro_model_free(model: *mut DrroModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Solves for the worst-case disturbance spectrum at `radius`.
///
/// `grid` (a power of two), `tol` and `max_iter` fall back to the library
/// defaults when zero. A run that stops at `max_iter` returns
/// `NonConvergence` and still hands back its result.
///
/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn drro_synthesize(
    model: *const DrroModel,
    radius: f64,
    grid: usize,
    tol: f64,
    max_iter: usize,
    out: *mut *mut DrroSynthesis,
) -> DrroStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let out = out_ptr(out, "out")?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Failure::Status(DrroStatus::InvalidArgument, format!("radius must be positive, got {radius}")));
        }
        let defaults = SynthesisConfig::default();
        let cfg = SynthesisConfig {
            grid: if grid == 0 { defaults.grid } else { grid },
            tol: if tol > 0.0 { tol } else { defaults.tol },
            max_iter: if max_iter == 0 { defaults.max_iter } else { max_iter },
        };
        let result = synthesize_with(&m.ricc, radius, &cfg)?;
        let (converged, iterations) = (result.converged, result.iterations);
        *out = Box::into_raw(Box::new(DrroSynthesis { result }));
        if !converged {
            return Err(Error::SolverNonConvergent { stage: "Frank-Wolfe", iterations }.into());
        }
        Ok(())
    })
}

/// # Safety
/// `synthesis` must come from this library; `info` must be writable.
#[no_mangle]
pub unsafe extern "C" fn drro_synthesis_info(
    synthesis: *const DrroSynthesis,
    info: *mut DrroSynthesisInfo,
) -> DrroStatus {
    guard(|| {
        let r = &borrow(synthesis, "synthesis")?.result;
        *out_ptr(info, "info")? = DrroSynthesisInfo {
            radius: r.radius,
            regret: r.regret,
            gamma_star: r.param.level,
            iterations: r.iterations,
            grid: r.m.grid().len(),
            converged: r.converged,
        };
        Ok(())
    })
}

/// Copies the worst-case spectrum samples at `exp(i 2 pi k / N)`.
///
/// # Safety
/// `out` must hold `len` doubles; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn drro_synthesis_spectrum(
    synthesis: *const DrroSynthesis,
    out: *mut f64,
    len: usize,
    needed: *mut usize,
) -> DrroStatus {
    guard(|| copy_out(borrow(synthesis, "synthesis")?.result.m.values(), out, len, needed))
}

/// # Safety
/// `synthesis` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn drro_synthesis_free(synthesis: *mut DrroSynthesis) {
    if !synthesis.is_null() {
        drop(Box::from_raw(synthesis));
    }
}

/// Fits a rational spectrum of `degree` to a synthesis and realizes the
/// controller. `lp_grid` falls back to the library default when zero.
///
/// # Safety
/// Handles must come from this library and belong together; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn drro_controller_realize(
    model: *const DrroModel,
    synthesis: *const DrroSynthesis,
    degree: usize,
    lp_grid: usize,
    out: *mut *mut DrroController,
) -> DrroStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let s = borrow(synthesis, "synthesis")?;
        let out = out_ptr(out, "out")?;
        let defaults = ApproximationConfig::default();
        let cfg = ApproximationConfig {
            degree,
            lp_grid: if lp_grid == 0 { defaults.lp_grid } else { lp_grid },
            ..defaults
        };
        let rc = approximate_and_realize(&m.ricc, &s.result, &cfg)?;
        *out = Box::into_raw(Box::new(DrroController { ctrl: rc.controller }));
        Ok(())
    })
}

/// The H2 (LQR with disturbance feedforward) controller of a plant.
///
/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn drro_controller_h2(model: *const DrroModel, out: *mut *mut DrroController) -> DrroStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(DrroController { ctrl: h2_controller(&m.ricc)? }));
        Ok(())
    })
}

/// # Safety
/// `controller` must come from this library; `dims` must be writable.
#[no_mangle]
pub unsafe extern "C" fn drro_controller_dims(
    controller: *const DrroController,
    dims: *mut DrroControllerDims,
) -> DrroStatus {
    guard(|| {
        let c = &borrow(controller, "controller")?.ctrl;
        *out_ptr(dims, "dims")? = DrroControllerDims {
            states: c.f.nrows(),
            inputs: c.g.ncols(),
            outputs: c.h.nrows(),
            replica_states: c.replica_states,
        };
        Ok(())
    })
}

/// Copies one realization matrix, selected by `which` ('F', 'G', 'H' or
/// 'J'), in row-major order.
///
/// # Safety
/// `out` must hold `len` doubles; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn drro_controller_matrix(
    controller: *const DrroController,
    which: c_char,
    out: *mut f64,
    len: usize,
    needed: *mut usize,
) -> DrroStatus {
    guard(|| {
        let c = &borrow(controller, "controller")?.ctrl;
        let m = match which as u8 {
            b'F' => &c.f,
            b'G' => &c.g,
            b'H' => &c.h,
            b'J' => &c.j,
            other => {
                return Err(Failure::Status(
                    DrroStatus::InvalidArgument,
                    format!("unknown matrix {:?}", other as char),
                ))
            }
        };
        copy_out(&row_major(m), out, len, needed)
    })
}

/// Spectral radius of the closed loop formed with `model`; `stable` is set
/// when it is below one.
///
/// # Safety
/// Handles must come from this library; `radius` must be writable and
/// `stable` may be null.
#[no_mangle]
pub unsafe extern "C" fn drro_controller_closed_loop(
    model: *const DrroModel,
    controller: *const DrroController,
    radius: *mut f64,
    stable: *mut bool,
) -> DrroStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let c = &borrow(controller, "controller")?.ctrl;
        let radius = out_ptr(radius, "radius")?;
        let report = c.closed_loop_check(&m.model)?;
        *radius = report.radius;
        if let Some(s) = stable.as_mut() {
            *s = report.stable;
        }
        Ok(())
    })
}

/// Worst-case expected regret of a controller over the Wasserstein ball of
/// `radius`, evaluated on a frequency grid of `grid` points (power of two).
///
/// # Safety
/// Handles must come from this library; `regret` must be writable.
#[no_mangle]
pub unsafe extern "C" fn drro_controller_regret(
    model: *const DrroModel,
    controller: *const DrroController,
    radius: f64,
    grid: usize,
    regret: *mut f64,
) -> DrroStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let c = &borrow(controller, "controller")?.ctrl;
        let regret = out_ptr(regret, "regret")?;
        let grid = drro::spectral::FrequencyGrid::new(grid)?;
        *regret = drro::drro::controller_regret(&m.ricc, grid, radius, |z| c.transfer(z))?.0;
        Ok(())
    })
}

/// Writes a controller as a TOML matrix document.
///
/// # Safety
/// `controller` must come from this library; `path` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn drro_controller_write(controller: *const DrroController, path: *const c_char) -> DrroStatus {
    guard(|| {
        let c = &borrow(controller, "controller")?.ctrl;
        io::controller_document(c, "controller").write(Path::new(string(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `controller` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn drro_controller_free(controller: *mut DrroController) {
    if !controller.is_null() {
        drop(Box::from_raw(controller));
    }
}
