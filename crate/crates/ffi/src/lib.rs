//! C ABI over `rdw-core`.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free`. Every fallible call returns an [`RdwStatus`]; on failure
//! [`rdw_last_error`] describes the cause for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rdw_core::dataset::SampleWindow;
use rdw_core::experiment::{self, ExperimentConfig};
use rdw_core::rdw::SimulationOutput;
use rdw_core::rnn::Checkpoint;
use rdw_core::trainer::{Predictor, RnnPredictor};
use rdw_core::{Error, Vec2};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    OutOfRange = 3,
    Domain = 4,
    Config = 5,
    Validation = 6,
    Invariant = 7,
    Io = 8,
    Serde = 9,
    Panic = 10,
}

/// One simulated tick of one user.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RdwFrame {
    pub tick: usize,
    pub user: usize,
    pub physical_x: f64,
    pub physical_y: f64,
    pub physical_heading: f64,
    pub virtual_x: f64,
    pub virtual_y: f64,
    pub virtual_heading: f64,
    /// 1 when the user was reset on this tick.
    pub reset: u8,
}

/// Finished simulation run.
pub struct RdwSimulation {
    out: SimulationOutput,
}

/// Trained predictor loaded from a checkpoint.
pub struct RdwModel {
    inner: RnnPredictor,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RdwStatus {
    match e {
        Error::Domain(_) => RdwStatus::Domain,
        Error::Config(_) => RdwStatus::Config,
        Error::Validation(_) => RdwStatus::Validation,
        Error::Invariant(_) => RdwStatus::Invariant,
        Error::Io { .. } => RdwStatus::Io,
        Error::Serde(_) => RdwStatus::Serde,
    }
}

struct Fail(RdwStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RdwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RdwStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside rdw".into());
            RdwStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(RdwStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RdwStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rdw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rdw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Runs a simulation described by a TOML config (null for defaults).
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn rdw_simulation_run(config_toml: *const c_char, out: *mut *mut RdwSimulation) -> RdwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg: ExperimentConfig = if config_toml.is_null() {
            ExperimentConfig::default()
        } else {
            let text = str_arg(config_toml, "config_toml")?;
            ExperimentConfig::from_toml(text)?
        };
        cfg.validate()?;
        let sim = experiment::run_simulation(&cfg, cfg.sim.users)?;
        *out = Box::into_raw(Box::new(RdwSimulation { out: sim }));
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a handle from [`rdw_simulation_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rdw_simulation_free(sim: *mut RdwSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Number of frames (ticks times users); 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdw_simulation_frame_count(sim: *const RdwSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.out.frames.len())
}

/// Number of resets over all users; 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdw_simulation_reset_count(sim: *const RdwSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.out.resets.len())
}

/// Copies frame `index` (tick-major order) into `frame`.
///
/// # Safety
/// `sim` must be a live handle and `frame` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rdw_simulation_frame(sim: *const RdwSimulation, index: usize, frame: *mut RdwFrame) -> RdwStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        if frame.is_null() {
            return Err(null("frame"));
        }
        let f = s.out.frames.get(index).ok_or_else(|| {
            Fail(RdwStatus::OutOfRange, format!("frame {index} of {}", s.out.frames.len()))
        })?;
        *frame = RdwFrame {
            tick: f.tick,
            user: f.user,
            physical_x: f.physical.position.x,
            physical_y: f.physical.position.y,
            physical_heading: f.physical.heading,
            virtual_x: f.virtual_pose.position.x,
            virtual_y: f.virtual_pose.position.y,
            virtual_heading: f.virtual_pose.heading,
            reset: f.reset as u8,
        };
        Ok(())
    })
}

/// Loads a checkpoint written by `rdw train` or `rdw compare`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rdw_model_load(path: *const c_char, out: *mut *mut RdwModel) -> RdwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let ck = Checkpoint::load(Path::new(path))?;
        let inner = RnnPredictor::from_checkpoint(ck)?;
        *out = Box::into_raw(Box::new(RdwModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`rdw_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rdw_model_free(model: *mut RdwModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Features per input step: 2 for physical-only models, 4 with virtual
/// positions; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdw_model_input_dim(model: *const RdwModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.spec.input_dim)
}

/// Predicts the next physical position from `steps` rows of `dim` features
/// (row-major, raw room meters).
///
/// # Safety
/// `model` must be a live handle, `inputs` must hold `steps * dim` values and
/// `out_x`/`out_y` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rdw_model_predict(
    model: *const RdwModel,
    inputs: *const f64,
    steps: usize,
    dim: usize,
    out_x: *mut f64,
    out_y: *mut f64,
) -> RdwStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if inputs.is_null() || out_x.is_null() || out_y.is_null() {
            return Err(null("inputs/out_x/out_y"));
        }
        let want = m.inner.spec.input_dim;
        if dim != want || steps == 0 {
            return Err(Fail(
                RdwStatus::Config,
                format!("model takes {want} features per step and at least one step (got {dim} x {steps})"),
            ));
        }
        let flat = std::slice::from_raw_parts(inputs, steps * dim);
        let window = SampleWindow {
            inputs: flat.chunks(dim).map(<[f64]>::to_vec).collect(),
            target: Vec2::new(0.0, 0.0),
            user: 0,
            t: steps - 1,
            target_tick: steps,
        };
        let p = m.inner.predict(&window)?;
        *out_x = p.x;
        *out_y = p.y;
        Ok(())
    })
}
