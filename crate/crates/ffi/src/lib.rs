//! C interface to trained checkpoints and the AUC metric.
//!
//! Every fallible call returns an [`IcuStatus`]; on failure a message is kept
//! per thread and can be read with [`icu_last_error`]. Models are opaque
//! handles owned by the caller and released with [`icu_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use icu_adapt::data::{impute_grid, RawGrid, ScalingStats};
use icu_adapt::eval::auc;
use icu_adapt::model::{Checkpoint, CnnLstm};
use icu_adapt::nn::ParamStore;
use icu_adapt::{Error, Tensor};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcuStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad arguments, missing checkpoint file, or configuration.
    Usage = 2,
    /// Unreadable or malformed checkpoint, or undefined metric.
    Data = 3,
    Internal = 4,
    Panic = 5,
}

/// A loaded checkpoint.
pub struct IcuModel {
    net: CnnLstm,
    params: ParamStore,
    scaling: ScalingStats,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> IcuStatus {
    match e.exit_code() {
        2 => IcuStatus::Usage,
        3 => IcuStatus::Data,
        _ => IcuStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (IcuStatus, String)>) -> IcuStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IcuStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside icu_adapt");
            IcuStatus::Panic
        }
    }
}

fn lift<T>(r: icu_adapt::Result<T>) -> Result<T, (IcuStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (IcuStatus, String) {
    (IcuStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn icu_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a checkpoint file and stores a new handle in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn icu_model_load(path: *const c_char, out: *mut *mut IcuModel) -> IcuStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (IcuStatus::Usage, "path is not valid UTF-8".to_string()))?;
        let ck = lift(Checkpoint::load(Path::new(path)))?;
        let net = lift(ck.network())?;
        let scaling = ck
            .scaling
            .clone()
            .unwrap_or_else(|| ScalingStats::identity(ck.config.n_features));
        *out = Box::into_raw(Box::new(IcuModel {
            net,
            params: ck.params,
            scaling,
        }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`icu_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn icu_model_free(model: *mut IcuModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of input channels the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn icu_model_n_features(model: *const IcuModel) -> usize {
    model.as_ref().map_or(0, |m| m.net.config().n_features)
}

unsafe fn predict_with(
    model: *const IcuModel,
    values: *const f64,
    n_hours: usize,
    n_features: usize,
    out_risk: *mut f64,
    prepare: impl FnOnce(&IcuModel, &[f64]) -> Result<Tensor, (IcuStatus, String)>,
) -> IcuStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if values.is_null() {
            return Err(null("values"));
        }
        if out_risk.is_null() {
            return Err(null("out_risk"));
        }
        let expected = m.net.config().n_features;
        if n_features != expected || n_hours == 0 {
            return Err((
                IcuStatus::Usage,
                format!("input is {n_hours}x{n_features}, model expects Tx{expected} with T > 0"),
            ));
        }
        let data = std::slice::from_raw_parts(values, n_hours * n_features);
        let x = prepare(m, data)?;
        let risks = lift(m.net.risks(&m.params, &x))?;
        std::slice::from_raw_parts_mut(out_risk, n_hours).copy_from_slice(&risks);
        Ok(())
    })
}

/// Hourly risks for a preprocessed row-major `n_hours x n_features` matrix
/// (filled and scaled to [0, 1]). Writes `n_hours` values to `out_risk`.
///
/// # Safety
/// `values` must hold `n_hours * n_features` doubles and `out_risk` room for
/// `n_hours`.
#[no_mangle]
pub unsafe extern "C" fn icu_model_predict(
    model: *const IcuModel,
    values: *const f64,
    n_hours: usize,
    n_features: usize,
    out_risk: *mut f64,
) -> IcuStatus {
    predict_with(model, values, n_hours, n_features, out_risk, |_, data| {
        lift(Tensor::from_vec(&[n_hours, n_features], data.to_vec()))
    })
}

/// Like [`icu_model_predict`] but on raw hourly measurements, NaN marking a
/// missing cell. Filling and scaling use the checkpoint's statistics.
///
/// # Safety
/// Same as [`icu_model_predict`].
#[no_mangle]
pub unsafe extern "C" fn icu_model_predict_raw(
    model: *const IcuModel,
    values: *const f64,
    n_hours: usize,
    n_features: usize,
    out_risk: *mut f64,
) -> IcuStatus {
    predict_with(model, values, n_hours, n_features, out_risk, |m, data| {
        let mut grid = RawGrid::empty(n_hours, n_features);
        for (cell, &v) in grid.cells.iter_mut().zip(data) {
            *cell = (!v.is_nan()).then_some(v);
        }
        lift(impute_grid(&grid, &m.scaling))
    })
}

/// Area under the ROC curve of `scores` against `labels` (nonzero = positive).
///
/// # Safety
/// `scores` and `labels` must each hold `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn icu_auc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> IcuStatus {
    guard(|| {
        if scores.is_null() || labels.is_null() || out.is_null() {
            return Err(null("scores, labels or out"));
        }
        let s = std::slice::from_raw_parts(scores, n);
        let l: Vec<bool> = std::slice::from_raw_parts(labels, n)
            .iter()
            .map(|&b| b != 0)
            .collect();
        *out = lift(auc(s, &l))?;
        Ok(())
    })
}
