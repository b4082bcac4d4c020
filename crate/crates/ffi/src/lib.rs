//! C ABI for the tracker.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns a [`GfsStatus`];
//! on failure [`gfs_last_error`] describes the problem. Panics never cross
//! the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use gfs_dcf::config::{read_tracker_config, set_tracker_key};
use gfs_dcf::image::Image;
use gfs_dcf::tensor::RealTensor3;
use gfs_dcf::tracker::{detect, init, learn, BoundingBox, Frame, TrackState, TrackerConfig};
use gfs_dcf::Error;

/// Result of a library call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfsStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad frame data, box, value text or shape.
    InvalidArgument = 2,
    /// Unknown key or out-of-range setting.
    Config = 3,
    Io = 4,
    /// The solver objective kept rising.
    Divergence = 5,
    /// A singular or non-finite computation.
    Numeric = 6,
    /// An internal panic was caught.
    Internal = 7,
}

/// Axis-aligned box, top-left corner and size in 0-indexed pixels.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfsBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// One video frame.
///
/// `pixels` holds `width * height * channels` interleaved bytes with 1 (gray)
/// or 3 (RGB) channels. `features` is optional (NULL when unused) and holds
/// `feature_channels` planes of `feature_side * feature_side` row-major values.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GfsFrame {
    pub pixels: *const u8,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub features: *const f64,
    pub feature_side: usize,
    pub feature_channels: usize,
}

/// Tracker settings.
pub struct GfsConfig {
    inner: TrackerConfig,
}

/// A running tracker.
pub struct GfsTracker {
    state: TrackState,
}

struct Failure {
    status: GfsStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Config(_) => GfsStatus::Config,
            Error::Io { .. } | Error::Decode { .. } | Error::Format(_) => GfsStatus::Io,
            Error::Divergence { .. } => GfsStatus::Divergence,
            Error::NumericInput { .. } | Error::Symmetry { .. } | Error::Singular { .. } => GfsStatus::Numeric,
            _ => GfsStatus::InvalidArgument,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn fail(status: GfsStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn record(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GfsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GfsStatus::Ok,
        Ok(Err(failure)) => {
            record(&failure.message);
            failure.status
        }
        Err(_) => {
            record("internal panic");
            GfsStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(GfsStatus::NullPointer, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GfsStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(GfsStatus::NullPointer, format!("{name} is NULL")))
}

unsafe fn mut_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(GfsStatus::NullPointer, format!("{name} is NULL")))
}

unsafe fn to_frame(f: &GfsFrame) -> Result<Frame, Failure> {
    if f.pixels.is_null() {
        return Err(fail(GfsStatus::NullPointer, "frame pixels are NULL"));
    }
    let len = f
        .width
        .checked_mul(f.height)
        .and_then(|v| v.checked_mul(f.channels))
        .ok_or_else(|| fail(GfsStatus::InvalidArgument, "frame size overflows"))?;
    let image = Image::new(f.width, f.height, f.channels, slice::from_raw_parts(f.pixels, len).to_vec())?;
    let features = if f.features.is_null() {
        None
    } else {
        let len = f
            .feature_side
            .checked_mul(f.feature_side)
            .and_then(|v| v.checked_mul(f.feature_channels))
            .ok_or_else(|| fail(GfsStatus::InvalidArgument, "feature size overflows"))?;
        let data = slice::from_raw_parts(f.features, len).to_vec();
        Some(RealTensor3::from_vec(f.feature_side, f.feature_channels, data)?)
    };
    Ok(Frame { image, features })
}

fn to_box(b: BoundingBox) -> GfsBox {
    GfsBox {
        x: b.x,
        y: b.y,
        w: b.w,
        h: b.h,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gfs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gfs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// New configuration holding the default settings. Never NULL.
#[no_mangle]
pub extern "C" fn gfs_config_new() -> *mut GfsConfig {
    Box::into_raw(Box::new(GfsConfig {
        inner: TrackerConfig::default(),
    }))
}

/// # Safety
/// `config` is NULL or a handle from [`gfs_config_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gfs_config_free(config: *mut GfsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Sets one key using the configuration-file key names and value syntax.
/// The key `preset` resets every setting to a named preset.
///
/// # Safety
/// `config` is a live handle; `key` and `value` are NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn gfs_config_set(config: *mut GfsConfig, key: *const c_char, value: *const c_char) -> GfsStatus {
    guard(|| {
        let cfg = mut_arg(config, "config")?;
        let key = str_arg(key, "key")?;
        let value = str_arg(value, "value")?;
        let mut updated = cfg.inner.clone();
        set_tracker_key(&mut updated, key.trim(), value.trim())?;
        cfg.inner = updated;
        Ok(())
    })
}

/// Replaces the settings with those of a `key = value` file.
///
/// # Safety
/// `config` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gfs_config_load(config: *mut GfsConfig, path: *const c_char) -> GfsStatus {
    guard(|| {
        let cfg = mut_arg(config, "config")?;
        cfg.inner = read_tracker_config(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Checks the settings as a whole; [`gfs_tracker_new`] does the same.
///
/// # Safety
/// `config` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn gfs_config_validate(config: *const GfsConfig) -> GfsStatus {
    guard(|| Ok(ref_arg(config, "config")?.inner.validate()?))
}

/// Starts tracking `init_box` in the first frame. On success `*out` receives
/// a new handle; it is left untouched on failure. The config is copied.
///
/// # Safety
/// `config` and `frame` point to valid values, `frame` describes readable
/// buffers of the stated sizes, and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gfs_tracker_new(
    config: *const GfsConfig,
    frame: *const GfsFrame,
    init_box: GfsBox,
    out: *mut *mut GfsTracker,
) -> GfsStatus {
    guard(|| {
        let cfg = ref_arg(config, "config")?;
        let frame = to_frame(ref_arg(frame, "frame")?)?;
        let out = mut_arg(out, "out")?;
        let bbox = BoundingBox::new(init_box.x, init_box.y, init_box.w, init_box.h);
        let state = init(&frame, bbox, &cfg.inner)?;
        *out = Box::into_raw(Box::new(GfsTracker { state }));
        Ok(())
    })
}

/// Locates the target in the next frame, writes the box to `*out_box` and
/// updates the model. After a failure the tracker keeps its previous model
/// but its box may have moved.
///
/// # Safety
/// `tracker` is a live handle, `frame` as for [`gfs_tracker_new`], and
/// `out_box` is writable.
#[no_mangle]
pub unsafe extern "C" fn gfs_tracker_update(
    tracker: *mut GfsTracker,
    frame: *const GfsFrame,
    out_box: *mut GfsBox,
) -> GfsStatus {
    guard(|| {
        let t = mut_arg(tracker, "tracker")?;
        let frame = to_frame(ref_arg(frame, "frame")?)?;
        let out_box = mut_arg(out_box, "out_box")?;
        let (bbox, _) = detect(&mut t.state, &frame)?;
        learn(&mut t.state, &frame)?;
        *out_box = to_box(bbox);
        Ok(())
    })
}

/// Current box.
///
/// # Safety
/// `tracker` is a live handle and `out_box` is writable.
#[no_mangle]
pub unsafe extern "C" fn gfs_tracker_box(tracker: *const GfsTracker, out_box: *mut GfsBox) -> GfsStatus {
    guard(|| {
        let t = ref_arg(tracker, "tracker")?;
        *mut_arg(out_box, "out_box")? = to_box(t.state.bbox);
        Ok(())
    })
}

/// Number of frames learned so far, 0 for NULL.
///
/// # Safety
/// `tracker` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gfs_tracker_frames(tracker: *const GfsTracker) -> usize {
    tracker.as_ref().map_or(0, |t| t.state.frame_index)
}

/// Side of the filter grid and number of kept channels of the last learned
/// filter. Either output pointer may be NULL.
///
/// # Safety
/// `tracker` is a live handle; non-NULL outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn gfs_tracker_selection(
    tracker: *const GfsTracker,
    out_side: *mut usize,
    out_kept_channels: *mut usize,
) -> GfsStatus {
    guard(|| {
        let t = ref_arg(tracker, "tracker")?;
        if let Some(side) = out_side.as_mut() {
            *side = t.state.grid().side();
        }
        if let Some(kept) = out_kept_channels.as_mut() {
            *kept = t.state.last_mask.kept_channels().len();
        }
        Ok(())
    })
}

/// # Safety
/// `tracker` is NULL or a handle from [`gfs_tracker_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gfs_tracker_free(tracker: *mut GfsTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(gfs_last_error()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn version_is_the_package_version() {
        let v = unsafe { CStr::from_ptr(gfs_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn config_errors_are_reported() {
        let cfg = gfs_config_new();
        unsafe {
            assert_eq!(gfs_config_set(cfg, c"alpha".as_ptr(), c"0.3".as_ptr()), GfsStatus::Ok);
            assert_eq!((*cfg).inner.alpha, 0.3);
            assert_eq!(gfs_config_set(cfg, c"alpah".as_ptr(), c"0.3".as_ptr()), GfsStatus::Config);
            assert!(last_error().contains("alpah"));
            assert_eq!(gfs_config_set(cfg, c"alpha".as_ptr(), ptr::null()), GfsStatus::NullPointer);
            assert_eq!(gfs_config_set(cfg, c"scale_factors".as_ptr(), c"0.9".as_ptr()), GfsStatus::Ok);
            assert_eq!(gfs_config_validate(cfg), GfsStatus::Config);
            gfs_config_free(cfg);
        }
    }

    #[test]
    fn null_handles_are_rejected() {
        unsafe {
            let mut b = GfsBox {
                x: 0.0,
                y: 0.0,
                w: 0.0,
                h: 0.0,
            };
            assert_eq!(gfs_tracker_box(ptr::null(), &mut b), GfsStatus::NullPointer);
            assert_eq!(gfs_tracker_frames(ptr::null()), 0);
            gfs_tracker_free(ptr::null_mut());
            gfs_config_free(ptr::null_mut());
        }
    }

    #[test]
    fn interior_nul_does_not_lose_the_message() {
        record("a\0b");
        assert_eq!(last_error(), "a b");
    }
}
