//! C ABI over the lsca retrieval library.
//!
//! Handles are opaque pointers created by `lsca_model_load` and released
//! by `lsca_model_free`. Every fallible call returns an `LscaStatus`;
//! on failure a thread-local message is readable through
//! `lsca_last_error` until the next call on the same thread. Buffer
//! functions take the caller's capacity and fail with
//! `LSCA_STATUS_BUFFER_TOO_SMALL` rather than write out of bounds.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use libc::{c_char, size_t};

use lsca::container::{self, FittedModel};
use lsca::corpus::Preprocessor;
use lsca::embed::Method;
use lsca::retrieval::{rank_indices, score, Metric};
use lsca::weighting::{apply_weighting, fit_weighting, SchemeTag};
use lsca::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LscaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// File could not be read or written.
    Io = 3,
    /// File exists but is not a valid container.
    Corrupt = 4,
    /// Invalid argument or query (unknown terms, bad metric id, ...).
    Invalid = 5,
    /// Numerical factorization failed.
    Numeric = 6,
    /// Output buffer capacity is below the required length.
    BufferTooSmall = 7,
    /// Internal panic was caught at the boundary.
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(sanitized).unwrap());
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::default());
}

fn status_of(e: &Error) -> LscaStatus {
    match e.kind() {
        "io" => LscaStatus::Io,
        "container" => LscaStatus::Corrupt,
        "svd" => LscaStatus::Numeric,
        _ => LscaStatus::Invalid,
    }
}

fn fail(e: &Error) -> LscaStatus {
    set_error(&e.to_string());
    status_of(e)
}

fn guard(f: impl FnOnce() -> LscaStatus) -> LscaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            LscaStatus::Panic
        }
    }
}

/// An opaque loaded model: the embedding, its weighting, labels and the
/// preprocessing pipeline for incoming query text.
pub struct LscaModel {
    model: FittedModel,
    preprocessor: Preprocessor,
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lsca_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failure on this thread. Valid until the next
/// library call on the same thread; empty string when no error occurred.
#[no_mangle]
pub extern "C" fn lsca_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, LscaStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(LscaStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        LscaStatus::Utf8
    })
}

fn metric_arg(metric: i32) -> Result<Metric, LscaStatus> {
    match metric {
        0 => Ok(Metric::Euclidean),
        1 => Ok(Metric::Dot),
        2 => Ok(Metric::Cosine),
        other => {
            set_error(&format!(
                "bad metric id {other} (0 = euclidean, 1 = dot, 2 = cosine)"
            ));
            Err(LscaStatus::Invalid)
        }
    }
}

fn method_arg(method: i32) -> Result<Method, LscaStatus> {
    match method {
        0 => Ok(Method::Lsa),
        1 => Ok(Method::Ca),
        other => {
            set_error(&format!("bad method id {other} (0 = lsa, 1 = ca)"));
            Err(LscaStatus::Invalid)
        }
    }
}

fn scheme_arg(scheme: i32) -> Result<SchemeTag, LscaStatus> {
    match scheme {
        0 => Ok(SchemeTag::Raw),
        1 => Ok(SchemeTag::NRowL1),
        2 => Ok(SchemeTag::NRowL2),
        3 => Ok(SchemeTag::Tfidf),
        other => {
            set_error(&format!(
                "bad scheme id {other} (0 = raw, 1 = nrowl1, 2 = nrowl2, 3 = tfidf)"
            ));
            Err(LscaStatus::Invalid)
        }
    }
}

/// Load a fitted model container from `path` into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
/// The returned handle must be released with `lsca_model_free`.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_load(
    path: *const c_char,
    out: *mut *mut LscaModel,
) -> LscaStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output handle");
            return LscaStatus::NullArgument;
        }
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let model = match container::load_model(path) {
            Ok(m) => m,
            Err(e) => return fail(&e),
        };
        let preprocessor = match Preprocessor::new(model.preprocess.clone()) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        clear_error();
        *out = Box::into_raw(Box::new(LscaModel {
            model,
            preprocessor,
        }));
        LscaStatus::Ok
    })
}

/// Fit a model from an ingested matrix container and write it to
/// `model_out`. `method`: 0 = lsa, 1 = ca. `scheme`: 0 = raw,
/// 1 = nrowl1, 2 = nrowl2, 3 = tfidf.
///
/// # Safety
/// `matrix_path` and `model_out` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn lsca_fit(
    matrix_path: *const c_char,
    method: i32,
    scheme: i32,
    k: size_t,
    alpha: f64,
    model_out: *const c_char,
) -> LscaStatus {
    guard(|| {
        let matrix_path = match str_arg(matrix_path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let model_out = match str_arg(model_out) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let method = match method_arg(method) {
            Ok(m) => m,
            Err(s) => return s,
        };
        let scheme = match scheme_arg(scheme) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let run = || -> Result<(), Error> {
            let (matrix, preprocess) = container::load_matrix(matrix_path)?;
            let fitted = fit_weighting(&matrix, scheme)?;
            let weighted = apply_weighting(&fitted, &matrix)?;
            let embedding = match method {
                Method::Lsa => lsca::embed::fit_lsa(&weighted, k)?,
                Method::Ca => lsca::embed::fit_ca(&weighted, k)?,
            }
            .set_alpha(alpha);
            let model = FittedModel {
                embedding,
                weighting: fitted,
                doc_ids: matrix.doc_ids().to_vec(),
                categories: matrix.categories().to_vec(),
                vocabulary: matrix.vocabulary().clone(),
                preprocess,
            };
            container::save_model(model_out, &model)
        };
        match run() {
            Ok(()) => {
                clear_error();
                LscaStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a handle. Passing null is a no-op.
///
/// # Safety
/// `m` must be a handle from `lsca_model_load`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_free(m: *mut LscaModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of documents, or 0 for a null handle.
///
/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_docs(m: *const LscaModel) -> size_t {
    m.as_ref().map_or(0, |h| h.model.embedding.n_docs())
}

/// Vocabulary size, or 0 for a null handle.
///
/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_terms(m: *const LscaModel) -> size_t {
    m.as_ref().map_or(0, |h| h.model.embedding.n_terms())
}

/// Retained dimensions, or 0 for a null handle.
///
/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_k(m: *const LscaModel) -> size_t {
    m.as_ref().map_or(0, |h| h.model.embedding.k())
}

/// The exponent applied to the singular values; NaN for a null handle.
///
/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_alpha(m: *const LscaModel) -> f64 {
    m.as_ref().map_or(f64::NAN, |h| h.model.embedding.alpha())
}

/// 0 = lsa, 1 = ca; -1 for a null handle.
///
/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_method(m: *const LscaModel) -> i32 {
    m.as_ref().map_or(-1, |h| match h.model.embedding.method() {
        Method::Lsa => 0,
        Method::Ca => 1,
    })
}

/// 0 = raw, 1 = nrowl1, 2 = nrowl2, 3 = tfidf; -1 for a null handle.
///
/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_scheme(m: *const LscaModel) -> i32 {
    m.as_ref().map_or(-1, |h| match h.model.embedding.scheme() {
        SchemeTag::Raw => 0,
        SchemeTag::NRowL1 => 1,
        SchemeTag::NRowL2 => 2,
        SchemeTag::Tfidf => 3,
    })
}

/// Change the exponent under which coordinates and projections are
/// produced.
///
/// # Safety
/// `m` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_set_alpha(m: *mut LscaModel, alpha: f64) -> LscaStatus {
    guard(|| {
        let Some(h) = m.as_mut() else {
            set_error("null model handle");
            return LscaStatus::NullArgument;
        };
        h.model.embedding = h.model.embedding.set_alpha(alpha);
        clear_error();
        LscaStatus::Ok
    })
}

unsafe fn fill(out: *mut f64, cap: size_t, data: &[f64]) -> LscaStatus {
    if out.is_null() {
        set_error("null output buffer");
        return LscaStatus::NullArgument;
    }
    if cap < data.len() {
        set_error(&format!("buffer holds {cap} values, need {}", data.len()));
        return LscaStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
    clear_error();
    LscaStatus::Ok
}

/// Copy the singular values into `out` (capacity `len`, needs `k`).
///
/// # Safety
/// `m` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_sigma(
    m: *const LscaModel,
    out: *mut f64,
    len: size_t,
) -> LscaStatus {
    guard(|| {
        let Some(h) = m.as_ref() else {
            set_error("null model handle");
            return LscaStatus::NullArgument;
        };
        fill(out, len, h.model.embedding.sigma().as_slice().unwrap())
    })
}

/// Copy document coordinates at the current exponent, row-major
/// `docs x k`, into `out` (capacity `len` doubles).
///
/// # Safety
/// `m` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_doc_coordinates(
    m: *const LscaModel,
    out: *mut f64,
    len: size_t,
) -> LscaStatus {
    guard(|| {
        let Some(h) = m.as_ref() else {
            set_error("null model handle");
            return LscaStatus::NullArgument;
        };
        let pts = h.model.embedding.doc_coordinates().points;
        fill(out, len, pts.as_slice().unwrap())
    })
}

/// Copy term coordinates at the current exponent, row-major `terms x k`,
/// into `out` (capacity `len` doubles).
///
/// # Safety
/// `m` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_term_coordinates(
    m: *const LscaModel,
    out: *mut f64,
    len: size_t,
) -> LscaStatus {
    guard(|| {
        let Some(h) = m.as_ref() else {
            set_error("null model handle");
            return LscaStatus::NullArgument;
        };
        let pts = h.model.embedding.term_coordinates().points;
        fill(out, len, pts.as_slice().unwrap())
    })
}

fn project(h: &LscaModel, text: &str) -> Result<Vec<f64>, Error> {
    let tokens = h.preprocessor.process_text(text);
    let (cols, vals) = h.model.count_row(&tokens);
    if cols.is_empty() {
        return Err(Error::InvalidInput(
            "query has no terms in the model vocabulary".into(),
        ));
    }
    let weighted = h.model.weighting.weigh_row(&cols, &vals)?;
    let point = h.model.embedding.project_query(&cols, &weighted)?;
    Ok(point.to_vec())
}

/// Preprocess `text` with the model's pipeline, weigh it with the fitted
/// scheme and fold it into the document space at the current exponent.
/// Writes `k` doubles.
///
/// # Safety
/// `m` must be a live handle; `text` a NUL-terminated string; `out` must
/// hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_project_text(
    m: *const LscaModel,
    text: *const c_char,
    out: *mut f64,
    len: size_t,
) -> LscaStatus {
    guard(|| {
        let Some(h) = m.as_ref() else {
            set_error("null model handle");
            return LscaStatus::NullArgument;
        };
        let text = match str_arg(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match project(h, text) {
            Ok(point) => fill(out, len, &point),
            Err(e) => fail(&e),
        }
    })
}

/// Rank every document against `text`. `metric`: 0 = euclidean distance
/// (ascending), 1 = dot product, 2 = cosine (both descending). Writes the
/// document indices in rank order to `indices` and the matching scores to
/// `scores`; both buffers need capacity for all documents.
///
/// # Safety
/// `m` must be a live handle; `text` a NUL-terminated string; `indices`
/// and `scores` must each hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_query_text(
    m: *const LscaModel,
    text: *const c_char,
    metric: i32,
    indices: *mut size_t,
    scores: *mut f64,
    len: size_t,
) -> LscaStatus {
    guard(|| {
        let Some(h) = m.as_ref() else {
            set_error("null model handle");
            return LscaStatus::NullArgument;
        };
        let text = match str_arg(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let metric = match metric_arg(metric) {
            Ok(mt) => mt,
            Err(s) => return s,
        };
        if indices.is_null() || scores.is_null() {
            set_error("null output buffer");
            return LscaStatus::NullArgument;
        }
        let n = h.model.embedding.n_docs();
        if len < n {
            set_error(&format!("buffers hold {len} entries, need {n}"));
            return LscaStatus::BufferTooSmall;
        }
        let point = match project(h, text) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        let docs = h.model.embedding.doc_coordinates().points;
        let all = match score(
            ndarray::aview1(&point),
            docs.view(),
            metric,
        ) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        let order = rank_indices(&all, metric);
        for (pos, &doc) in order.iter().enumerate() {
            *indices.add(pos) = doc;
            *scores.add(pos) = all[doc];
        }
        clear_error();
        LscaStatus::Ok
    })
}

/// Copy the NUL-terminated id of document `index` into `buf`. On
/// `LSCA_STATUS_BUFFER_TOO_SMALL`, `*needed` (when non-null) receives the
/// required capacity including the terminator.
///
/// # Safety
/// `m` must be a live handle; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn lsca_model_doc_id(
    m: *const LscaModel,
    index: size_t,
    buf: *mut c_char,
    cap: size_t,
    needed: *mut size_t,
) -> LscaStatus {
    guard(|| {
        let Some(h) = m.as_ref() else {
            set_error("null model handle");
            return LscaStatus::NullArgument;
        };
        let Some(id) = h.model.doc_ids.get(index) else {
            set_error(&format!(
                "document index {index} out of range 0..{}",
                h.model.doc_ids.len()
            ));
            return LscaStatus::Invalid;
        };
        let bytes = id.as_bytes();
        let want = bytes.len() + 1;
        if !needed.is_null() {
            *needed = want;
        }
        if buf.is_null() {
            set_error("null output buffer");
            return LscaStatus::NullArgument;
        }
        if cap < want {
            set_error(&format!("buffer holds {cap} bytes, need {want}"));
            return LscaStatus::BufferTooSmall;
        }
        std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
        *buf.add(bytes.len()) = 0;
        clear_error();
        LscaStatus::Ok
    })
}
