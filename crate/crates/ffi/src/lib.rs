//! C ABI over the `splinempm` solver.
//!
//! Simulations are opaque handles created from a named scene or a TOML scene
//! description and released with [`smpm_simulation_free`]. Every fallible
//! entry point returns an [`SmpmStatus`]; on failure the message is available
//! from [`smpm_last_error_message`] on the same thread until the next call.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use splinempm::fbar::ProjectionMode;
use splinempm::io::{parse_config, write_snapshot};
use splinempm::scenes::{evaluate_metrics, scene_by_name, SceneConfig};
use splinempm::solver::{run, SimState};
use splinempm::tensor::hydrostatic;
use splinempm::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmpmStatus {
    Ok = 0,
    /// Invalid scene, configuration or override.
    Config = 1,
    /// Fatal numerics during stepping; the simulation should be discarded.
    Numeric = 2,
    NullPointer = 3,
    /// Bad argument such as a short buffer or non-UTF-8 string.
    InvalidArgument = 4,
    Io = 5,
    /// Internal panic caught at the boundary.
    Panic = 6,
}

/// Projection selector for [`smpm_simulation_from_scene`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmpmProjection {
    /// The scene's default.
    Default = -1,
    Off = 0,
    Constants = 1,
    Pminus1 = 2,
}

/// Opaque simulation handle.
pub struct SmpmSimulation {
    config: SceneConfig,
    state: SimState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SmpmStatus {
    match err {
        Error::Io { .. } => SmpmStatus::Io,
        Error::Config { .. } | Error::Syntax { .. } | Error::Snapshot(_) => SmpmStatus::Config,
        Error::OutsideKnotSpan { .. }
        | Error::OutOfDomain { .. }
        | Error::Numeric { .. }
        | Error::ReturnMapping { .. } => SmpmStatus::Numeric,
    }
}

struct Failure(SmpmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SmpmStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SmpmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SmpmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            SmpmStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(SmpmStatus::InvalidArgument, format!("`{what}` is not valid UTF-8")))
}

unsafe fn sim_ref<'a>(sim: *const SmpmSimulation) -> Result<&'a SmpmSimulation, Failure> {
    sim.as_ref().ok_or_else(|| null("sim"))
}

unsafe fn sim_mut<'a>(sim: *mut SmpmSimulation) -> Result<&'a mut SmpmSimulation, Failure> {
    sim.as_mut().ok_or_else(|| null("sim"))
}

unsafe fn out_buffer<'a>(buf: *mut f64, len: usize, needed: usize) -> Result<&'a mut [f64], Failure> {
    if needed > len {
        return Err(Failure(
            SmpmStatus::InvalidArgument,
            format!("buffer holds {len} values, {needed} required"),
        ));
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    Ok(std::slice::from_raw_parts_mut(buf, needed))
}

unsafe fn publish(config: SceneConfig, out: *mut *mut SmpmSimulation) -> Result<(), Failure> {
    let state = config.build()?;
    *out = Box::into_raw(Box::new(SmpmSimulation { config, state }));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn smpm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn smpm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Builds a named benchmark scene. `level` 0 and `degree` 0 select the
/// scene defaults.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn smpm_simulation_from_scene(
    name: *const c_char,
    level: u32,
    degree: u32,
    projection: SmpmProjection,
    out: *mut *mut SmpmSimulation,
) -> SmpmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = read_str(name, "name")?;
        let mode = match projection {
            SmpmProjection::Default => None,
            SmpmProjection::Off => Some(ProjectionMode::Off),
            SmpmProjection::Constants => Some(ProjectionMode::Constants),
            SmpmProjection::Pminus1 => Some(ProjectionMode::Pminus1),
        };
        let level = (level != 0).then_some(level);
        let degree = (degree != 0).then_some(degree as usize);
        publish(scene_by_name(name, level, degree, mode)?, out)
    })
}

/// Builds a simulation from a TOML scene description.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn smpm_simulation_from_config(text: *const c_char, out: *mut *mut SmpmSimulation) -> SmpmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        publish(parse_config(read_str(text, "text")?)?, out)
    })
}

/// Releases a handle. Null is accepted.
///
/// # Safety
/// `sim` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn smpm_simulation_free(sim: *mut SmpmSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances `steps` explicit steps with the scene's time step.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn smpm_simulation_step(sim: *mut SmpmSimulation, steps: u64) -> SmpmStatus {
    guard(|| {
        let s = sim_mut(sim)?;
        for _ in 0..steps {
            s.state.step(&s.config.time)?;
        }
        Ok(())
    })
}

/// Runs to the scene's end time.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn smpm_simulation_run(sim: *mut SmpmSimulation) -> SmpmStatus {
    guard(|| {
        let s = sim_mut(sim)?;
        run(&mut s.state, &s.config.time, &mut [])?;
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn smpm_simulation_particle_count(sim: *const SmpmSimulation, out: *mut usize) -> SmpmStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = s.state.particles.len();
        Ok(())
    })
}

/// Simulated time and completed step count. Either output may be null.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn smpm_simulation_time(
    sim: *const SmpmSimulation,
    time: *mut f64,
    steps: *mut u64,
) -> SmpmStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        if let Some(t) = time.as_mut() {
            *t = s.state.time();
        }
        if let Some(n) = steps.as_mut() {
            *n = s.state.step_count();
        }
        Ok(())
    })
}

/// Copies particle positions as `x0 y0 z0 x1 ...` into `buf` of `len` doubles.
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn smpm_simulation_positions(
    sim: *const SmpmSimulation,
    buf: *mut f64,
    len: usize,
) -> SmpmStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let out = out_buffer(buf, len, 3 * s.state.particles.len())?;
        for (chunk, mp) in out.chunks_exact_mut(3).zip(&s.state.particles) {
            chunk.copy_from_slice(mp.position.as_slice());
        }
        Ok(())
    })
}

/// Copies the particle hydrostatic stress `tr(σ)/3`, one per particle.
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn smpm_simulation_hydrostatic_stress(
    sim: *const SmpmSimulation,
    buf: *mut f64,
    len: usize,
) -> SmpmStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let out = out_buffer(buf, len, s.state.particles.len())?;
        for (o, mp) in out.iter_mut().zip(&s.state.particles) {
            *o = hydrostatic(&mp.stress);
        }
        Ok(())
    })
}

/// Number of scalar metrics the scene reports.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn smpm_simulation_metric_count(sim: *const SmpmSimulation, out: *mut usize) -> SmpmStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = s.config.metric_names().len();
        Ok(())
    })
}

/// Name of metric `index` as a NUL-terminated string written to `buf`.
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn smpm_simulation_metric_name(
    sim: *const SmpmSimulation,
    index: usize,
    buf: *mut c_char,
    len: usize,
) -> SmpmStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let names = s.config.metric_names();
        let name = names.get(index).ok_or_else(|| {
            Failure(
                SmpmStatus::InvalidArgument,
                format!("metric index {index} out of range ({} metrics)", names.len()),
            )
        })?;
        if name.len() + 1 > len {
            return Err(Failure(
                SmpmStatus::InvalidArgument,
                format!("buffer holds {len} bytes, {} required", name.len() + 1),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let out = std::slice::from_raw_parts_mut(buf.cast::<u8>(), name.len() + 1);
        out[..name.len()].copy_from_slice(name.as_bytes());
        out[name.len()] = 0;
        Ok(())
    })
}

/// Evaluates the scene metrics on the current state.
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn smpm_simulation_metrics(sim: *const SmpmSimulation, buf: *mut f64, len: usize) -> SmpmStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let values = evaluate_metrics(&s.config, &s.state);
        out_buffer(buf, len, values.len())?.copy_from_slice(&values);
        Ok(())
    })
}

/// Writes a particle snapshot CSV to `path`.
///
/// # Safety
/// `sim` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn smpm_simulation_write_snapshot(sim: *const SmpmSimulation, path: *const c_char) -> SmpmStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let path = read_str(path, "path")?;
        write_snapshot(&s.state.particles, Path::new(path))?;
        Ok(())
    })
}
