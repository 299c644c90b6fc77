//! C ABI for embedding the trained classifier in non-Rust pipelines:
//! opaque handles, integer status codes, and a thread-local error string.
//!
//! All functions are safe to call from any thread as long as a given
//! handle is used from one thread at a time.

use gntm_core::data::CLASS_NAMES;
use gntm_core::model::{argmax, forward};
use gntm_core::training::Checkpoint;
use gntm_core::Tensor;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GntmStatus {
    GntmOk = 0,
    /// A required pointer argument was null.
    GntmNullPointer = 1,
    /// A string argument was not valid UTF-8.
    GntmInvalidUtf8 = 2,
    /// File could not be read.
    GntmIoError = 3,
    /// File exists but is not a valid checkpoint.
    GntmFormatError = 4,
    /// Buffer length does not match the model's dimensions.
    GntmShapeError = 5,
    /// Any other failure; details via gntm_last_error().
    GntmRuntimeError = 6,
    /// Detector warm-up: fewer records than the window size so far.
    GntmNeedMoreData = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let clean = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

/// Message for the most recent error on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gntm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gntm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// A loaded checkpoint: weights plus normalization statistics.
pub struct GntmModel {
    checkpoint: Checkpoint,
}

/// Rolling-window detector bound to a model.
pub struct GntmDetector {
    checkpoint: Checkpoint,
    buffer: Vec<f64>,
}

fn clone_checkpoint(c: &Checkpoint) -> Checkpoint {
    Checkpoint {
        config: c.config,
        params: c.params.clone(),
        norm: c.norm.clone(),
        meta: c.meta,
    }
}

/// Loads a checkpoint file written by the trainer. On success `*out`
/// receives a handle that must be released with gntm_model_free().
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gntm_model_load(
    path: *const c_char,
    out: *mut *mut GntmModel,
) -> GntmStatus {
    if path.is_null() || out.is_null() {
        set_error("null pointer argument");
        return GntmStatus::GntmNullPointer;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(p) => p,
        Err(_) => {
            set_error("path is not valid UTF-8");
            return GntmStatus::GntmInvalidUtf8;
        }
    };
    match Checkpoint::load(Path::new(path)) {
        Ok(checkpoint) => {
            *out = Box::into_raw(Box::new(GntmModel { checkpoint }));
            GntmStatus::GntmOk
        }
        Err(e) => {
            set_error(&e.to_string());
            match e {
                gntm_core::Error::Io(_) => GntmStatus::GntmIoError,
                gntm_core::Error::Format(_) => GntmStatus::GntmFormatError,
                _ => GntmStatus::GntmRuntimeError,
            }
        }
    }
}

/// Releases a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be a handle from gntm_model_load(), not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gntm_model_free(model: *mut GntmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of input features per record; 0 on null.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gntm_model_features(model: *const GntmModel) -> u32 {
    model
        .as_ref()
        .map(|m| m.checkpoint.config.input_features as u32)
        .unwrap_or(0)
}

/// Records per classification window; 0 on null.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gntm_model_window(model: *const GntmModel) -> u32 {
    model
        .as_ref()
        .map(|m| m.checkpoint.config.window as u32)
        .unwrap_or(0)
}

fn classify(
    checkpoint: &Checkpoint,
    normalized: Vec<f64>,
    probs_out: *mut f64,
    class_out: *mut u32,
) -> GntmStatus {
    let window = checkpoint.config.window;
    let features = checkpoint.config.input_features;
    let tensor = match Tensor::new(vec![window, features], normalized) {
        Ok(t) => t,
        Err(e) => {
            set_error(&e.to_string());
            return GntmStatus::GntmShapeError;
        }
    };
    match forward(&checkpoint.params, &tensor) {
        Ok((probs, _)) => {
            unsafe {
                for (i, &p) in probs.iter().enumerate() {
                    *probs_out.add(i) = p;
                }
                *class_out = argmax(&probs) as u32;
            }
            GntmStatus::GntmOk
        }
        Err(e) => {
            set_error(&e.to_string());
            GntmStatus::GntmRuntimeError
        }
    }
}

/// Classifies one raw (unnormalized) window of `window * features` values
/// in row-major record order. Writes 3 class probabilities (Normal, DoS,
/// DDoS) to `probs_out` and the argmax class to `class_out`.
///
/// # Safety
/// `values` must hold `len` readable doubles; `probs_out` must have room
/// for 3 doubles; `class_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gntm_model_classify(
    model: *const GntmModel,
    values: *const f64,
    len: usize,
    probs_out: *mut f64,
    class_out: *mut u32,
) -> GntmStatus {
    let Some(model) = model.as_ref() else {
        set_error("null model handle");
        return GntmStatus::GntmNullPointer;
    };
    if values.is_null() || probs_out.is_null() || class_out.is_null() {
        set_error("null pointer argument");
        return GntmStatus::GntmNullPointer;
    }
    let c = &model.checkpoint;
    let expected = c.config.window * c.config.input_features;
    if len != expected {
        set_error(&format!("expected {expected} values, got {len}"));
        return GntmStatus::GntmShapeError;
    }
    let raw = std::slice::from_raw_parts(values, len);
    let normalized: Vec<f64> = raw
        .iter()
        .enumerate()
        .map(|(i, &v)| c.norm.normalize_value(i % c.config.input_features, v))
        .collect();
    classify(c, normalized, probs_out, class_out)
}

/// Name of a class id as a static string, or null when out of range.
#[no_mangle]
pub extern "C" fn gntm_class_name(class: u32) -> *const c_char {
    // Static NUL-terminated copies of the canonical class names.
    const NAMES: [&str; 3] = ["Normal\0", "DoS\0", "DDoS\0"];
    debug_assert_eq!(CLASS_NAMES.len(), NAMES.len());
    NAMES
        .get(class as usize)
        .map(|n| n.as_ptr() as *const c_char)
        .unwrap_or(std::ptr::null())
}

/// Creates a streaming detector bound to the model's weights. The model
/// handle may be freed independently afterwards.
///
/// # Safety
/// `model` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gntm_detector_new(
    model: *const GntmModel,
    out: *mut *mut GntmDetector,
) -> GntmStatus {
    let Some(model) = model.as_ref() else {
        set_error("null model handle");
        return GntmStatus::GntmNullPointer;
    };
    if out.is_null() {
        set_error("null out pointer");
        return GntmStatus::GntmNullPointer;
    }
    *out = Box::into_raw(Box::new(GntmDetector {
        checkpoint: clone_checkpoint(&model.checkpoint),
        buffer: Vec::new(),
    }));
    GntmStatus::GntmOk
}

/// Pushes one raw record of `len == features` values. Returns
/// GntmNeedMoreData until the rolling window is full; afterwards every
/// push classifies the window ending at this record.
///
/// # Safety
/// Pointer arguments as in gntm_model_classify().
#[no_mangle]
pub unsafe extern "C" fn gntm_detector_push(
    detector: *mut GntmDetector,
    record: *const f64,
    len: usize,
    probs_out: *mut f64,
    class_out: *mut u32,
) -> GntmStatus {
    let Some(det) = detector.as_mut() else {
        set_error("null detector handle");
        return GntmStatus::GntmNullPointer;
    };
    if record.is_null() || probs_out.is_null() || class_out.is_null() {
        set_error("null pointer argument");
        return GntmStatus::GntmNullPointer;
    }
    let c = &det.checkpoint;
    let features = c.config.input_features;
    if len != features {
        set_error(&format!("expected {features} features, got {len}"));
        return GntmStatus::GntmShapeError;
    }
    let raw = std::slice::from_raw_parts(record, len);
    det.buffer
        .extend(raw.iter().enumerate().map(|(i, &v)| c.norm.normalize_value(i, v)));
    let span = c.config.window * features;
    if det.buffer.len() > span {
        det.buffer.drain(..features);
    }
    if det.buffer.len() < span {
        return GntmStatus::GntmNeedMoreData;
    }
    let window = det.buffer.clone();
    classify(&det.checkpoint, window, probs_out, class_out)
}

/// Releases a detector handle. Null is a no-op.
///
/// # Safety
/// `detector` must be a handle from gntm_detector_new(), not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gntm_detector_free(detector: *mut GntmDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}
