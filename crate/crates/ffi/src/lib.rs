//! C ABI over the trained generator and the forward solvers.
//!
//! Every entry point returns a [`CwganStatus`]; on failure the message is
//! available from [`cwgan_last_error`] on the same thread. Generators are
//! opaque handles created by [`cwgan_generator_load`] and released with
//! [`cwgan_generator_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cwgan::cli::{load_model, LoadedModel};
use cwgan::pde::{heat_forward_fd, steady_conduction_fem, Field, Grid2D, HeatConfig};
use cwgan::posterior::posterior_stats;
use cwgan::rng::stream;
use cwgan::Error;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CwganStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Io = 4,
    Numerical = 5,
    Panic = 6,
}

/// A loaded generator with its parameters and grid.
pub struct CwganGenerator {
    model: LoadedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CwganStatus {
    match e {
        Error::Shape { .. } | Error::NonScalarOutput(_) => CwganStatus::Shape,
        Error::NonFinite(_) | Error::NoConvergence { .. } => CwganStatus::Numerical,
        Error::Path { .. } | Error::Io(_) | Error::Format { .. } | Error::Record { .. } | Error::Json(_) => {
            CwganStatus::Io
        }
        _ => CwganStatus::InvalidArgument,
    }
}

fn fail(e: anyhow::Error) -> CwganStatus {
    set_error(&format!("{e:#}"));
    e.downcast_ref::<Error>().map_or(CwganStatus::Io, status_of)
}

fn guard(f: impl FnOnce() -> Result<(), CwganStatus>) -> CwganStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CwganStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            CwganStatus::Panic
        }
    }
}

fn null(what: &str) -> CwganStatus {
    set_error(&format!("{what} is null"));
    CwganStatus::NullPointer
}

fn invalid(msg: String) -> CwganStatus {
    set_error(&msg);
    CwganStatus::InvalidArgument
}

/// `len` doubles at `p`, copied.
///
/// # Safety
/// `p` must point to `len` readable doubles when non-null.
unsafe fn read(p: *const f64, len: usize, what: &str) -> Result<Vec<f64>, CwganStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) }.to_vec())
}

/// # Safety
/// `p` must point to `values.len()` writable doubles when non-null.
unsafe fn write(p: *mut f64, values: &[f64], what: &str) -> Result<(), CwganStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { ptr::copy_nonoverlapping(values.as_ptr(), p, values.len()) };
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cwgan_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cwgan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint written by `cwgan train` (the `.cwpm` file with its
/// `.json` sidecar) and stores a new handle in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cwgan_generator_load(path: *const c_char, out: *mut *mut CwganGenerator) -> CwganStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| invalid("path is not UTF-8".into()))?;
        let model = load_model(Path::new(path)).map_err(fail)?;
        unsafe { *out = Box::into_raw(Box::new(CwganGenerator { model })) };
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `gen` must come from [`cwgan_generator_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cwgan_generator_free(gen: *mut CwganGenerator) {
    if !gen.is_null() {
        drop(unsafe { Box::from_raw(gen) });
    }
}

/// Grid rows, columns and latent dimension of a loaded generator.
///
/// # Safety
/// `gen` must be a live handle; the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn cwgan_generator_dims(
    gen: *const CwganGenerator,
    height: *mut usize,
    width: *mut usize,
    latent_dim: *mut usize,
) -> CwganStatus {
    guard(|| {
        let g = unsafe { gen.as_ref() }.ok_or_else(|| null("generator"))?;
        if height.is_null() || width.is_null() || latent_dim.is_null() {
            return Err(null("output"));
        }
        unsafe {
            *height = g.model.grid.n2;
            *width = g.model.grid.n1;
            *latent_dim = g.model.meta.config.train.latent_dim;
        }
        Ok(())
    })
}

/// Pixel-wise posterior mean and SD of `draws` generator samples for the
/// measurement `y` (`len = height * width`, row-major). Results go to
/// `mean` and `sd`, each `len` doubles. Matches `cwgan infer` with the same
/// seed and index 0.
///
/// # Safety
/// `gen` must be a live handle, `y` readable and the outputs writable for
/// `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cwgan_posterior_stats(
    gen: *const CwganGenerator,
    y: *const f64,
    len: usize,
    draws: usize,
    seed: u64,
    mean: *mut f64,
    sd: *mut f64,
) -> CwganStatus {
    guard(|| {
        let g = unsafe { gen.as_ref() }.ok_or_else(|| null("generator"))?;
        let grid = g.model.grid;
        if len != grid.len() {
            set_error(&format!("measurement has {len} values, the generator grid {}x{}", grid.n2, grid.n1));
            return Err(CwganStatus::Shape);
        }
        let y = Field::new(grid, unsafe { read(y, len, "y") }?).map_err(|e| fail(e.into()))?;
        let mut rng = stream(seed, "infer", 0);
        let s = posterior_stats(&g.model.generator, &g.model.params, &y, draws, &mut rng).map_err(|e| fail(e.into()))?;
        unsafe {
            write(mean, &s.mean, "mean")?;
            write(sd, &s.sd, "sd")
        }
    })
}

/// Implicit-Euler heat solve on `[0, 2 pi]^2` with `n x n` nodes and zero
/// boundary values: `u0` in, `u(T)` out, both `n * n` doubles.
///
/// # Safety
/// `u0` readable and `out` writable for `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn cwgan_heat_forward(
    u0: *const f64,
    n: usize,
    kappa: f64,
    t_final: f64,
    steps: usize,
    out: *mut f64,
) -> CwganStatus {
    guard(|| {
        let grid = Grid2D::heat(n).map_err(|e| fail(e.into()))?;
        let u0 = Field::new(grid, unsafe { read(u0, grid.len(), "u0") }?).map_err(|e| fail(e.into()))?;
        let cfg = HeatConfig { kappa, t_final, steps, source: 0.0 };
        cfg.validate().map_err(|e| fail(e.into()))?;
        let u = heat_forward_fd(&u0, &cfg).map_err(|e| fail(e.into()))?;
        unsafe { write(out, &u.values, "out") }
    })
}

/// Steady conduction `-div(kappa grad u) = source` on the unit square with
/// `n x n` nodes and zero boundary values, by linear finite elements.
///
/// # Safety
/// `kappa` readable and `out` writable for `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn cwgan_conduction_fem(kappa: *const f64, n: usize, source: f64, out: *mut f64) -> CwganStatus {
    guard(|| {
        let grid = Grid2D::unit(n).map_err(|e| fail(e.into()))?;
        let k = Field::new(grid, unsafe { read(kappa, grid.len(), "kappa") }?).map_err(|e| fail(e.into()))?;
        let u = steady_conduction_fem(&k, source).map_err(|e| fail(e.into()))?;
        unsafe { write(out, &u.values, "out") }
    })
}
