//! C ABI over the lane pipeline and the run metrics.
//!
//! Every fallible function returns an [`LsStatus`]. On failure the message
//! is kept per thread and can be read with [`ls_last_error`]. Handles are
//! opaque and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use lanesim::config::AppConfig;
use lanesim::imaging::Frame;
use lanesim::pipeline::Pipeline;
use lanesim::telemetry::{import_csv, normalized_rmse, pearson, rmse, summarize};
use lanesim::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Singular = 4,
    Parse = 5,
    Inference = 6,
    Io = 7,
    /// A statistic is undefined for the input, e.g. correlation of a
    /// constant series.
    Undefined = 8,
    Panic = 9,
}

impl From<&Error> for LsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidInput(_) => LsStatus::InvalidInput,
            Error::Config(_) | Error::Json(_) => LsStatus::Config,
            Error::Singular(_) | Error::PointAtInfinity => LsStatus::Singular,
            Error::UndefinedCorrelation(_) => LsStatus::Undefined,
            Error::Parse { .. } => LsStatus::Parse,
            Error::Inference(_) => LsStatus::Inference,
            Error::Io { .. } => LsStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(LsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(LsStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(LsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            LsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(LsStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ls_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// A configured perception and control chain with its own controller state.
pub struct LsPipeline {
    inner: Pipeline,
}

/// Lane measurement and steering command for one frame.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LsFrameResult {
    pub valid: bool,
    /// Near band found both lines but the far band did not.
    pub degraded: bool,
    pub lane_lost: bool,
    /// Bird's-eye columns of the near-band lines, -1 when not found.
    pub left_x: i64,
    pub right_x: i64,
    /// NaN when `valid` is false.
    pub offset_px: f64,
    pub curvature: f64,
    pub raw_deg: f64,
    pub smoothed_deg: f64,
    pub coverage: f64,
}

/// Creates a pipeline from an application config in JSON. NULL or `"{}"`
/// selects the defaults. The thresholds come from the config's active
/// illumination preset.
///
/// # Safety
/// `config_json` must be NULL or a NUL-terminated string; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ls_pipeline_new(config_json: *const c_char, out: *mut *mut LsPipeline) -> LsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let cfg = if config_json.is_null() {
            AppConfig::default()
        } else {
            AppConfig::from_json(str_arg(config_json, "config_json")?)?
        };
        cfg.validate()?;
        let inner = Pipeline::new(cfg.pipeline_config())?;
        *out = Box::into_raw(Box::new(LsPipeline { inner }));
        Ok(())
    })
}

/// Releases a pipeline. NULL is ignored.
///
/// # Safety
/// `p` must be NULL or a handle from [`ls_pipeline_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_pipeline_free(p: *mut LsPipeline) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Expected input frame size.
///
/// # Safety
/// `p` must be a live handle; `width` and `height` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ls_pipeline_frame_size(
    p: *const LsPipeline,
    width: *mut usize,
    height: *mut usize,
) -> LsStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("pipeline"))?;
        let cfg = p.inner.config();
        *out_arg(width, "width")? = cfg.frame_width;
        *out_arg(height, "height")? = cfg.frame_height;
        Ok(())
    })
}

/// Forgets the controller history.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_pipeline_reset(p: *mut LsPipeline) -> LsStatus {
    guard(|| {
        p.as_mut().ok_or_else(|| null("pipeline"))?.inner.reset();
        Ok(())
    })
}

/// Runs one interleaved RGB8 frame (`width * height * 3` bytes, row-major)
/// through the pipeline.
///
/// # Safety
/// `p` must be a live handle, `rgb` must point to `len` readable bytes and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ls_pipeline_process_rgb(
    p: *mut LsPipeline,
    rgb: *const u8,
    len: usize,
    width: usize,
    height: usize,
    out: *mut LsFrameResult,
) -> LsStatus {
    guard(|| {
        let p = p.as_mut().ok_or_else(|| null("pipeline"))?;
        let out = out_arg(out, "out")?;
        let data = slice_arg(rgb, len, "rgb")?;
        let frame = Frame::from_rgb8(width, height, data.to_vec())?;
        let r = p.inner.process(&frame)?;
        let col = |v: Option<usize>| v.map_or(-1, |x| x as i64);
        *out = LsFrameResult {
            valid: r.estimate.valid,
            degraded: r.estimate.degraded,
            lane_lost: r.command.lane_lost,
            left_x: col(r.estimate.left_x),
            right_x: col(r.estimate.right_x),
            offset_px: r.estimate.offset_px,
            curvature: r.estimate.curvature,
            raw_deg: r.command.raw_deg,
            smoothed_deg: r.command.smoothed_deg,
            coverage: r.estimate.coverage,
        };
        Ok(())
    })
}

/// Root mean square of `n` values.
///
/// # Safety
/// `series` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ls_rmse(series: *const f64, n: usize, out: *mut f64) -> LsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = rmse(slice_arg(series, n, "series")?)?;
        Ok(())
    })
}

/// RMSE in pixels as a percentage of the image width.
#[no_mangle]
pub extern "C" fn ls_normalized_rmse(rmse_px: f64, image_width_px: usize) -> f64 {
    normalized_rmse(rmse_px, image_width_px)
}

/// Sample Pearson correlation of two length-`n` series. Returns
/// `Undefined` for fewer than two samples or a constant series.
///
/// # Safety
/// `x` and `y` must each point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ls_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> LsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = pearson(slice_arg(x, n, "x")?, slice_arg(y, n, "y")?)?;
        Ok(())
    })
}

/// Tracking summary of a run log.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LsMetrics {
    pub sample_count: u64,
    pub lane_valid_count: u64,
    pub offset_rmse_px: f64,
    pub normalized_rmse_pct: f64,
    /// NaN when the correlation is undefined.
    pub curvature_steering_r: f64,
    pub correlation_samples: u64,
    pub jitter_deg: f64,
    pub mean_proc_ms: f64,
    pub mean_fps: f64,
    pub class_events: u64,
}

/// Parses a run-log CSV and summarizes it.
///
/// # Safety
/// `csv` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ls_metrics_from_csv(csv: *const c_char, out: *mut LsMetrics) -> LsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let log = import_csv(str_arg(csv, "csv")?)?;
        let m = summarize(&log, log.meta.image_width)?;
        *out = LsMetrics {
            sample_count: m.sample_count as u64,
            lane_valid_count: m.lane_valid_count as u64,
            offset_rmse_px: m.offset_rmse_px,
            normalized_rmse_pct: m.normalized_rmse_pct,
            curvature_steering_r: m.curvature_steering_r.unwrap_or(f64::NAN),
            correlation_samples: m.correlation_samples as u64,
            jitter_deg: m.jitter_deg,
            mean_proc_ms: m.mean_proc_ms,
            mean_fps: m.mean_fps,
            class_events: m.class_events as u64,
        };
        Ok(())
    })
}
