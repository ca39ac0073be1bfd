//! C ABI over the concept-lens toolkit.
//!
//! Objects cross the boundary as opaque handles created by `*_load` and
//! released by the matching `*_free`. Every fallible call returns a
//! [`ClStatus`]; on failure a message for the calling thread is available
//! from [`cl_last_error_message`]. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use concept_lens::cav::ConceptSubspace;
use concept_lens::metrics::{plcc, srcc, PairedScores};
use concept_lens::{
    predict_hybrid, predict_interpretable, project, Error, HybridModel, InterpretableModel,
};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    ConceptMismatch = 6,
    UndefinedCorrelation = 7,
    InvalidArgument = 8,
    Panic = 99,
}

/// The three parts of a prediction. For interpretable-only models
/// `residual_term` is 0 and `hybrid == interpretable`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClPrediction {
    pub interpretable: f64,
    pub residual_term: f64,
    pub hybrid: f64,
}

/// Opaque concept subspace (a loaded CAV store).
pub struct ClSubspace {
    inner: ConceptSubspace,
    names: Vec<CString>,
}

enum ModelKind {
    Interpretable(InterpretableModel),
    Hybrid(HybridModel),
}

/// Opaque interpretable or hybrid model.
pub struct ClModel {
    kind: ModelKind,
}

impl ClModel {
    fn interpretable(&self) -> &InterpretableModel {
        match &self.kind {
            ModelKind::Interpretable(m) => m,
            ModelKind::Hybrid(h) => &h.interpretable,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> ClStatus {
    match err {
        Error::Io { .. } => ClStatus::Io,
        Error::Json(_) | Error::Csv(_) | Error::Manifest { .. } | Error::PayloadSize { .. } => {
            ClStatus::Parse
        }
        Error::DimensionMismatch { .. } => ClStatus::DimensionMismatch,
        Error::ConceptMismatch { .. } => ClStatus::ConceptMismatch,
        Error::UndefinedCorrelation(_) => ClStatus::UndefinedCorrelation,
        _ => ClStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic for [`cl_last_error_message`].
fn guard(f: impl FnOnce() -> Result<(), (ClStatus, String)>) -> ClStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ClStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ClStatus::Panic
        }
    }
}

fn lift(err: Error) -> (ClStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (ClStatus, String) {
    (ClStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a str, (ClStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map_err(|_| (ClStatus::InvalidUtf8, "path is not valid UTF-8".into()))
}

unsafe fn slice_arg<'a, T>(
    data: *const T,
    len: usize,
    what: &str,
) -> Result<&'a [T], (ClStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(data, len))
}

/// Message describing the last failure on this thread, or NULL after a
/// successful call. The pointer stays valid until the next call into this
/// library from the same thread.
#[no_mangle]
pub extern "C" fn cl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a CAV store written by `concept-lens learn-cavs`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cl_subspace_load(
    path: *const c_char,
    out: *mut *mut ClSubspace,
) -> ClStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path)?;
        let inner = ConceptSubspace::load(path).map_err(lift)?;
        let names = inner
            .names()
            .into_iter()
            .map(|n| {
                CString::new(n).map_err(|_| {
                    (
                        ClStatus::InvalidArgument,
                        "concept name contains NUL".into(),
                    )
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        *out = Box::into_raw(Box::new(ClSubspace { inner, names }));
        Ok(())
    })
}

/// Releases a subspace. NULL is ignored.
///
/// # Safety
/// `subspace` must come from [`cl_subspace_load`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn cl_subspace_free(subspace: *mut ClSubspace) {
    if !subspace.is_null() {
        drop(Box::from_raw(subspace));
    }
}

/// Embedding dimension, or 0 for NULL.
///
/// # Safety
/// `subspace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cl_subspace_dim(subspace: *const ClSubspace) -> usize {
    subspace.as_ref().map_or(0, |s| s.inner.dim())
}

/// Number of concepts, or 0 for NULL.
///
/// # Safety
/// `subspace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cl_subspace_len(subspace: *const ClSubspace) -> usize {
    subspace.as_ref().map_or(0, |s| s.inner.len())
}

/// Name of concept `index`, owned by the handle; NULL when out of range.
///
/// # Safety
/// `subspace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cl_subspace_concept_name(
    subspace: *const ClSubspace,
    index: usize,
) -> *const c_char {
    subspace
        .as_ref()
        .and_then(|s| s.names.get(index))
        .map_or(ptr::null(), |n| n.as_ptr())
}

/// Projects one embedding of `len` floats onto every concept axis, writing
/// `cl_subspace_len` values to `out`.
///
/// # Safety
/// `embedding` must point to `len` floats and `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cl_project(
    subspace: *const ClSubspace,
    embedding: *const f32,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> ClStatus {
    guard(|| {
        let s = subspace.as_ref().ok_or_else(|| null("subspace"))?;
        let e = slice_arg(embedding, len, "embedding")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len != s.inner.len() {
            return Err((
                ClStatus::InvalidArgument,
                format!(
                    "output holds {out_len} values but there are {} concepts",
                    s.inner.len()
                ),
            ));
        }
        let p = project(e, &s.inner).map_err(lift)?;
        slice::from_raw_parts_mut(out, out_len).copy_from_slice(&p.values);
        Ok(())
    })
}

/// Loads an interpretable (`fit`) or hybrid (`fit-residual`) model file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cl_model_load(path: *const c_char, out: *mut *mut ClModel) -> ClStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path)?;
        let text =
            std::fs::read_to_string(path).map_err(|e| (ClStatus::Io, format!("{path}: {e}")))?;
        let hybrid = text.contains("\"residual_weights\"");
        let kind = if hybrid {
            ModelKind::Hybrid(HybridModel::from_json(&text).map_err(lift)?)
        } else {
            ModelKind::Interpretable(InterpretableModel::from_json(&text).map_err(lift)?)
        };
        *out = Box::into_raw(Box::new(ClModel { kind }));
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from [`cl_model_load`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn cl_model_free(model: *mut ClModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// 1 when the model carries a residual corrector, else 0.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cl_model_is_hybrid(model: *const ClModel) -> i32 {
    model
        .as_ref()
        .map_or(0, |m| i32::from(matches!(m.kind, ModelKind::Hybrid(_))))
}

/// Bias of the interpretable part (NaN for NULL).
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cl_model_bias(model: *const ClModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.interpretable().bias)
}

/// Copies the concept weights into `out`, which must hold exactly as many
/// values as the model has concepts.
///
/// # Safety
/// `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cl_model_weights(
    model: *const ClModel,
    out: *mut f64,
    out_len: usize,
) -> ClStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let w = &m.interpretable().weights;
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len != w.len() {
            return Err((
                ClStatus::InvalidArgument,
                format!(
                    "output holds {out_len} values but the model has {} weights",
                    w.len()
                ),
            ));
        }
        slice::from_raw_parts_mut(out, out_len).copy_from_slice(w);
        Ok(())
    })
}

/// Scores one embedding. The subspace may list more concepts than the model;
/// the model's concepts are looked up by name.
///
/// # Safety
/// `embedding` must point to `len` floats and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cl_model_predict(
    model: *const ClModel,
    subspace: *const ClSubspace,
    embedding: *const f32,
    len: usize,
    out: *mut ClPrediction,
) -> ClStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let s = subspace.as_ref().ok_or_else(|| null("subspace"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let e = slice_arg(embedding, len, "embedding")?;
        let interp = m.interpretable();
        let aligned;
        let sub = if s.inner.names() == interp.concept_names {
            &s.inner
        } else {
            aligned = s.inner.select(&interp.concept_names).map_err(lift)?;
            &aligned
        };
        *out = match &m.kind {
            ModelKind::Hybrid(h) => {
                let p = predict_hybrid(h, e, sub).map_err(lift)?;
                ClPrediction {
                    interpretable: p.interpretable,
                    residual_term: p.residual_term,
                    hybrid: p.hybrid,
                }
            }
            ModelKind::Interpretable(im) => {
                let v = predict_interpretable(im, &project(e, sub).map_err(lift)?).map_err(lift)?;
                ClPrediction {
                    interpretable: v,
                    residual_term: 0.0,
                    hybrid: v,
                }
            }
        };
        Ok(())
    })
}

unsafe fn correlation(
    truth: *const f64,
    pred: *const f64,
    n: usize,
    out: *mut f64,
    f: fn(&PairedScores) -> concept_lens::Result<f64>,
) -> ClStatus {
    guard(|| {
        let t = slice_arg(truth, n, "truth")?;
        let p = slice_arg(pred, n, "pred")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let pairs = PairedScores::new(t.to_vec(), p.to_vec()).map_err(lift)?;
        *out = f(&pairs).map_err(lift)?;
        Ok(())
    })
}

/// Spearman rank correlation of two arrays of `n` doubles.
///
/// # Safety
/// `truth` and `pred` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cl_srcc(
    truth: *const f64,
    pred: *const f64,
    n: usize,
    out: *mut f64,
) -> ClStatus {
    correlation(truth, pred, n, out, srcc)
}

/// Pearson linear correlation of two arrays of `n` doubles.
///
/// # Safety
/// `truth` and `pred` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cl_plcc(
    truth: *const f64,
    pred: *const f64,
    n: usize,
    out: *mut f64,
) -> ClStatus {
    correlation(truth, pred, n, out, plcc)
}
