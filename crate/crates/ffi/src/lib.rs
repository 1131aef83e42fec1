//! C ABI over the simulator and trained policies.
//!
//! Handles are opaque and owned by the caller once created; release them with
//! the matching `*_free` function. Every fallible call returns a
//! [`UsskillStatus`]; on failure, [`usskill_last_error_message`] describes the
//! most recent error on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use usskill::geometry::{Action, ProbeFrame, Quaternion};
use usskill::io::{load_checkpoint, RunConfig};
use usskill::policy::PolicyParams;
use usskill::sim::{Image, Observation, Oracle, SimState, Simulator, Wrench};
use usskill::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UsskillStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    DegenerateQuaternion = 4,
    ConfigMismatch = 5,
    Io = 6,
    Corrupt = 7,
    ChecksumMismatch = 8,
    Diverged = 9,
    Panic = 10,
}

/// Probe pose: position in meters and unit quaternion `(w, x, y, z)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsskillFrame {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
}

/// Translation increment and componentwise quaternion increment `(w, x, y, z)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsskillAction {
    pub dp: [f64; 3],
    pub d_o: [f64; 4],
}

/// Opaque simulator handle.
pub struct UsskillSimulator {
    sim: Simulator,
    oracle: Oracle,
}

/// Opaque trained-policy handle.
pub struct UsskillPolicy {
    params: PolicyParams,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> UsskillStatus {
    match e {
        Error::ShapeMismatch(_) => UsskillStatus::ShapeMismatch,
        Error::DegenerateQuaternion { .. } => UsskillStatus::DegenerateQuaternion,
        Error::ConfigMismatch(_) => UsskillStatus::ConfigMismatch,
        Error::Io(_) => UsskillStatus::Io,
        Error::Corrupt(_) => UsskillStatus::Corrupt,
        Error::ChecksumMismatch { .. } => UsskillStatus::ChecksumMismatch,
        Error::DivergenceDetected { .. } | Error::EpisodeDiverged { .. } => UsskillStatus::Diverged,
        Error::InvalidConfig(_) | Error::EmptyDataset | Error::SingleClassDataset => UsskillStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> UsskillStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UsskillStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            UsskillStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            UsskillStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            UsskillStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn path_arg(p: *const c_char, what: &'static str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

fn frame_in(f: &UsskillFrame) -> ProbeFrame {
    ProbeFrame::new(f.position, Quaternion::from_array(f.orientation))
}

fn frame_out(f: &ProbeFrame) -> UsskillFrame {
    UsskillFrame { position: f.position, orientation: f.orientation.to_array() }
}

fn action_out(a: &Action) -> UsskillAction {
    UsskillAction { dp: a.dp, d_o: a.d_o }
}

fn boxed_sim(cfg: &RunConfig) -> Result<*mut UsskillSimulator, Fail> {
    let sim = Simulator::new(cfg.phantom.clone(), cfg.sim.clone())?;
    Ok(Box::into_raw(Box::new(UsskillSimulator { sim, oracle: cfg.oracle })))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn usskill_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len` bytes) and returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn usskill_last_error_message(buf: *mut c_char, len: usize) -> usize {
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

/// Creates a simulator with the default phantom, environment and guide.
///
/// # Safety
/// `out` must be null or valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn usskill_simulator_new(out: *mut *mut UsskillSimulator) -> UsskillStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = boxed_sim(&RunConfig::default())?;
        Ok(())
    })
}

/// Creates a simulator from a run configuration file.
///
/// # Safety
/// `config_path` must be null or a NUL-terminated string; `out` must be null
/// or valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn usskill_simulator_from_config(
    config_path: *const c_char,
    out: *mut *mut UsskillSimulator,
) -> UsskillStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let cfg = RunConfig::load(&path_arg(config_path, "config_path")?)?;
        cfg.validate()?;
        *out = boxed_sim(&cfg)?;
        Ok(())
    })
}

/// Releases a simulator. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from `usskill_simulator_new*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn usskill_simulator_free(sim: *mut UsskillSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Image dimensions rendered by this simulator.
///
/// # Safety
/// `sim` must be a live handle; `height` and `width` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn usskill_simulator_image_size(
    sim: *const UsskillSimulator,
    height: *mut usize,
    width: *mut usize,
) -> UsskillStatus {
    guard(|| {
        let s = deref(sim, "sim")?;
        *deref_mut(height, "height")? = s.sim.config.image_height;
        *deref_mut(width, "width")? = s.sim.config.image_width;
        Ok(())
    })
}

/// Draws a start pose from the annulus around the target.
///
/// # Safety
/// `sim` must be a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn usskill_simulator_sample_start(
    sim: *const UsskillSimulator,
    seed: u64,
    out: *mut UsskillFrame,
) -> UsskillStatus {
    guard(|| {
        let s = deref(sim, "sim")?;
        let f = s.sim.sample_start(&mut ChaCha8Rng::seed_from_u64(seed));
        *deref_mut(out, "out")? = frame_out(&f);
        Ok(())
    })
}

/// Applies one capped, clamped action to `frame`.
///
/// # Safety
/// `sim` must be a live handle; `frame`, `action` and `out` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn usskill_simulator_step(
    sim: *const UsskillSimulator,
    frame: *const UsskillFrame,
    action: *const UsskillAction,
    out: *mut UsskillFrame,
) -> UsskillStatus {
    guard(|| {
        let s = deref(sim, "sim")?;
        let f = frame_in(deref(frame, "frame")?);
        let a = deref(action, "action")?;
        let next = s.sim.transition(&f, &Action { dp: a.dp, d_o: a.d_o })?;
        *deref_mut(out, "out")? = frame_out(&next);
        Ok(())
    })
}

/// Renders the image, contact wrench and ground-truth label at `frame`.
/// `image` receives `height * width` row-major intensities; `wrench` receives
/// force then torque.
///
/// # Safety
/// `sim` must be a live handle; `image` must be valid for `image_len` floats,
/// `wrench` for 6 doubles and `label` for one byte.
#[no_mangle]
pub unsafe extern "C" fn usskill_simulator_observe(
    sim: *const UsskillSimulator,
    frame: *const UsskillFrame,
    image: *mut f32,
    image_len: usize,
    wrench: *mut f64,
    label: *mut u8,
) -> UsskillStatus {
    guard(|| {
        let s = deref(sim, "sim")?;
        let f = frame_in(deref(frame, "frame")?);
        let need = s.sim.config.image_height * s.sim.config.image_width;
        if image.is_null() {
            return Err(Fail::Null("image"));
        }
        if image_len != need {
            return Err(Fail::Lib(Error::ShapeMismatch(format!("image buffer holds {image_len} pixels, need {need}"))));
        }
        if wrench.is_null() {
            return Err(Fail::Null("wrench"));
        }
        let label = deref_mut(label, "label")?;
        let obs = s.sim.observe(&f);
        ptr::copy_nonoverlapping(obs.image.pixels.as_ptr(), image, need);
        ptr::copy_nonoverlapping(obs.wrench.to_array().as_ptr(), wrench, 6);
        *label = s.sim.ground_truth_label(&f);
        Ok(())
    })
}

/// The scripted guide's action at `frame` (zero once the state is acceptable).
///
/// # Safety
/// `sim` must be a live handle; `frame` and `out` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn usskill_oracle_action(
    sim: *const UsskillSimulator,
    frame: *const UsskillFrame,
    out: *mut UsskillAction,
) -> UsskillStatus {
    guard(|| {
        let s = deref(sim, "sim")?;
        let state = SimState::new(frame_in(deref(frame, "frame")?));
        *deref_mut(out, "out")? = action_out(&s.oracle.action(&s.sim, &state));
        Ok(())
    })
}

/// Loads a checkpoint. The architecture comes from `config_path`, or the
/// default one when it is null; a mismatch is `USSKILL_STATUS_CONFIG_MISMATCH`.
///
/// # Safety
/// `checkpoint_path` must be a NUL-terminated string, `config_path` null or
/// NUL-terminated, and `out` null or valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn usskill_policy_load(
    checkpoint_path: *const c_char,
    config_path: *const c_char,
    out: *mut *mut UsskillPolicy,
) -> UsskillStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let ckpt = path_arg(checkpoint_path, "checkpoint_path")?;
        let cfg = if config_path.is_null() {
            RunConfig::default()
        } else {
            RunConfig::load(&path_arg(config_path, "config_path")?)?
        };
        let params = load_checkpoint(&ckpt, &cfg.arch)?;
        *out = Box::into_raw(Box::new(UsskillPolicy { params }));
        Ok(())
    })
}

/// Releases a policy. Null is ignored.
///
/// # Safety
/// `policy` must be null or a handle from `usskill_policy_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn usskill_policy_free(policy: *mut UsskillPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Predicts the next action and the state quality from one observation.
/// The policy does not read the probe position, so none is passed.
///
/// # Safety
/// `policy` must be a live handle; `image` must be valid for `image_len`
/// floats, `orientation` for 4 doubles, `wrench` for 6 doubles; `action` and
/// `confidence` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn usskill_policy_act(
    policy: *const UsskillPolicy,
    image: *const f32,
    image_len: usize,
    orientation: *const f64,
    wrench: *const f64,
    action: *mut UsskillAction,
    confidence: *mut f64,
) -> UsskillStatus {
    guard(|| {
        let p = &deref(policy, "policy")?.params;
        let (h, w) = (p.arch.image_height, p.arch.image_width);
        if image.is_null() || orientation.is_null() || wrench.is_null() {
            return Err(Fail::Null("image, orientation or wrench"));
        }
        if image_len != h * w {
            return Err(Fail::Lib(Error::ShapeMismatch(format!("image buffer holds {image_len} pixels, need {}", h * w))));
        }
        let o = std::slice::from_raw_parts(orientation, 4);
        let obs = Observation {
            image: Image { height: h, width: w, pixels: std::slice::from_raw_parts(image, image_len).to_vec() },
            position: [0.0; 3],
            orientation: Quaternion::new(o[0], o[1], o[2], o[3]),
            wrench: Wrench::from_slice(std::slice::from_raw_parts(wrench, 6)),
        };
        let (a, q) = p.act_and_quality(&obs)?;
        *deref_mut(action, "action")? = action_out(&a);
        *deref_mut(confidence, "confidence")? = q.value();
        Ok(())
    })
}
