//! C ABI for the qrnn-cti classifier.
//!
//! Every fallible function returns a [`QctiStatus`]. On failure the message
//! is kept per thread and can be read with [`qcti_last_error_message`] until
//! the next failing call on that thread. Models are opaque handles created by
//! `qcti_model_new` / `qcti_model_load` and released with `qcti_model_free`.
//!
//! Feature buffers are row-major `double` arrays of `rows * n_features`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use qrnn_cti::data::Dataset;
use qrnn_cti::model::{build_baseline, load_checkpoint, save_checkpoint, BaselineKind, Model, ModelConfig};
use qrnn_cti::train::{train, TrainConfig};
use qrnn_cti::{Error, ErrorCategory, Tensor};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QctiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 10,
    Data = 11,
    Numeric = 12,
    Format = 13,
    Io = 14,
    Panic = 99,
}

/// Opaque model handle.
pub struct QctiModel {
    model: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: QctiStatus, msg: impl Into<String>) -> QctiStatus {
    set_error(msg.into());
    status
}

fn from_error(err: Error) -> QctiStatus {
    let status = match err.category() {
        ErrorCategory::Config => QctiStatus::Config,
        ErrorCategory::Data => QctiStatus::Data,
        ErrorCategory::Numeric => QctiStatus::Numeric,
        ErrorCategory::Format => QctiStatus::Format,
        ErrorCategory::Io => QctiStatus::Io,
    };
    fail(status, err.to_string())
}

fn guard(f: impl FnOnce() -> QctiStatus) -> QctiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(QctiStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, QctiStatus> {
    if p.is_null() {
        return Err(fail(QctiStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(QctiStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn model_ref<'a>(m: *mut QctiModel) -> Result<&'a mut QctiModel, QctiStatus> {
    m.as_mut()
        .ok_or_else(|| fail(QctiStatus::NullPointer, "model handle is null"))
}

unsafe fn input(m: &QctiModel, x: *const f64, rows: usize) -> Result<Tensor, QctiStatus> {
    if x.is_null() {
        return Err(fail(QctiStatus::NullPointer, "feature buffer is null"));
    }
    if rows == 0 {
        return Err(fail(QctiStatus::InvalidArgument, "rows must be at least 1"));
    }
    let f = m.model.config().n_features;
    let data = std::slice::from_raw_parts(x, rows * f).to_vec();
    Tensor::new(vec![rows, f], data).map_err(from_error)
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qcti_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qcti_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Build a freshly initialized model. `kind` is one of mlp, cnn, gru, lstm,
/// hybrid_lstm, hybrid_qrnn.
///
/// # Safety
/// `kind` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qcti_model_new(
    kind: *const c_char,
    n_features: usize,
    n_classes: usize,
    seed: u64,
    out: *mut *mut QctiModel,
) -> QctiStatus {
    guard(|| {
        if out.is_null() {
            return fail(QctiStatus::NullPointer, "out is null");
        }
        let kind = try_status!(c_str(kind, "kind"));
        let kind: BaselineKind = try_status!(kind.parse().map_err(from_error));
        let mut cfg = ModelConfig::new(n_features, n_classes);
        cfg.seed = seed;
        let model = try_status!(build_baseline(kind, &cfg).map_err(from_error));
        *out = Box::into_raw(Box::new(QctiModel { model }));
        QctiStatus::Ok
    })
}

/// Load a checkpoint file.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qcti_model_load(path: *const c_char, out: *mut *mut QctiModel) -> QctiStatus {
    guard(|| {
        if out.is_null() {
            return fail(QctiStatus::NullPointer, "out is null");
        }
        let path = try_status!(c_str(path, "path"));
        let model = try_status!(load_checkpoint(path).map_err(from_error));
        *out = Box::into_raw(Box::new(QctiModel { model }));
        QctiStatus::Ok
    })
}

/// Write a checkpoint file.
///
/// # Safety
/// `model` must come from this library and `path` be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn qcti_model_save(model: *mut QctiModel, path: *const c_char) -> QctiStatus {
    guard(|| {
        let m = try_status!(model_ref(model));
        let path = try_status!(c_str(path, "path"));
        try_status!(save_checkpoint(&m.model, path).map_err(from_error));
        QctiStatus::Ok
    })
}

/// Release a model. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qcti_model_free(model: *mut QctiModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input width of the model, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn qcti_model_n_features(model: *const QctiModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.config().n_features)
}

/// Number of output classes, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn qcti_model_n_classes(model: *const QctiModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.config().n_classes)
}

/// Number of trainable scalars, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn qcti_model_param_count(model: *const QctiModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.param_count())
}

/// Class probabilities for `rows` samples. `out` receives `rows * n_classes`
/// values; `out_len` is its capacity.
///
/// # Safety
/// `x` must hold `rows * n_features` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qcti_model_predict_proba(
    model: *mut QctiModel,
    x: *const f64,
    rows: usize,
    out: *mut f64,
    out_len: usize,
) -> QctiStatus {
    guard(|| {
        let m = try_status!(model_ref(model));
        if out.is_null() {
            return fail(QctiStatus::NullPointer, "out is null");
        }
        let need = rows * m.model.config().n_classes;
        if out_len < need {
            return fail(
                QctiStatus::InvalidArgument,
                format!("output buffer holds {out_len} values, need {need}"),
            );
        }
        let x = try_status!(input(m, x, rows));
        let probs = try_status!(m.model.predict_proba(&x, 256).map_err(from_error));
        std::slice::from_raw_parts_mut(out, need).copy_from_slice(probs.data());
        QctiStatus::Ok
    })
}

/// Predicted class index for `rows` samples into `out[0..rows]`.
///
/// # Safety
/// `x` must hold `rows * n_features` doubles and `out` `out_len` entries.
#[no_mangle]
pub unsafe extern "C" fn qcti_model_predict(
    model: *mut QctiModel,
    x: *const f64,
    rows: usize,
    out: *mut usize,
    out_len: usize,
) -> QctiStatus {
    guard(|| {
        let m = try_status!(model_ref(model));
        if out.is_null() {
            return fail(QctiStatus::NullPointer, "out is null");
        }
        if out_len < rows {
            return fail(
                QctiStatus::InvalidArgument,
                format!("output buffer holds {out_len} values, need {rows}"),
            );
        }
        let x = try_status!(input(m, x, rows));
        let pred = try_status!(m.model.predict(&x).map_err(from_error));
        std::slice::from_raw_parts_mut(out, rows).copy_from_slice(&pred);
        QctiStatus::Ok
    })
}

/// Train on a dataset file written by `preprocess` with Adam.
///
/// # Safety
/// `model` must come from this library and `dataset_path` be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn qcti_model_train(
    model: *mut QctiModel,
    dataset_path: *const c_char,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
) -> QctiStatus {
    guard(|| {
        let m = try_status!(model_ref(model));
        let path = PathBuf::from(try_status!(c_str(dataset_path, "dataset_path")));
        let ds = try_status!(Dataset::load(&path).map_err(from_error));
        let cfg = TrainConfig {
            epochs,
            batch_size,
            learning_rate,
            seed,
            ..Default::default()
        };
        try_status!(train(&mut m.model, &ds, &cfg).map_err(from_error));
        QctiStatus::Ok
    })
}
