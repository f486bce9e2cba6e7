//! C ABI over the mlscope engine.
//!
//! Conventions:
//! - every fallible function returns an [`MlsStatus`]; on failure
//!   [`mls_last_error`] describes the most recent error on the calling thread
//! - handles are opaque and freed with their matching `*_free`
//! - strings returned through `char **` are NUL-terminated UTF-8 owned by the
//!   caller and released with [`mls_string_free`]
//! - input strings are NUL-terminated UTF-8; a NULL token means "default state"

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mlscope::analytics::{find_duplicates, AnalyticsError};
use mlscope::model::{confusion_matrix, ModelError};
use mlscope::payload::{resolve_state, view_json};
use mlscope::state::{StateDoc, StateError};
use mlscope::table::{ingest_table, load_table, EmbeddingMatrix, KindHints, MetadataTable, TableError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidTable = 4,
    InvalidEmbeddings = 5,
    MalformedToken = 6,
    InvalidState = 7,
    InvalidArgument = 8,
    Analysis = 9,
    Panic = 99,
}

/// Opaque metadata table.
pub struct MlsTable {
    inner: MetadataTable,
}

/// Opaque embedding matrix.
pub struct MlsEmbeddings {
    inner: EmbeddingMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(MlsStatus, String);

impl From<TableError> for Failure {
    fn from(e: TableError) -> Self {
        let status = match e {
            TableError::Io(_) => MlsStatus::Io,
            TableError::SizeMismatch { .. }
            | TableError::NonFinite { .. }
            | TableError::ZeroDimension
            | TableError::RowCountMismatch { .. }
            | TableError::ChecksumMismatch { .. }
            | TableError::BadMeta { .. } => MlsStatus::InvalidEmbeddings,
            _ => MlsStatus::InvalidTable,
        };
        Failure(status, e.to_string())
    }
}

impl From<StateError> for Failure {
    fn from(e: StateError) -> Self {
        let status = match e {
            StateError::MalformedToken(_) => MlsStatus::MalformedToken,
            StateError::InvalidState(_) => MlsStatus::InvalidState,
        };
        Failure(status, e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure(MlsStatus::InvalidArgument, e.to_string())
    }
}

impl From<AnalyticsError> for Failure {
    fn from(e: AnalyticsError) -> Self {
        Failure(MlsStatus::Analysis, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MlsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MlsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MlsStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be NULL or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(MlsStatus::NullPointer, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MlsStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(MlsStatus::NullPointer, "output pointer is NULL".into()));
    }
    let c = CString::new(s).map_err(|_| Failure(MlsStatus::InvalidUtf8, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn check_out<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure(MlsStatus::NullPointer, "output pointer is NULL".into()))
    } else {
        Ok(())
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mls_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn mls_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a CSV table. Column kinds come from the `<stem>.schema.json`
/// sidecar when present.
///
/// # Safety
/// `path` must be a valid string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mls_table_load(path: *const c_char, out: *mut *mut MlsTable) -> MlsStatus {
    guard(|| {
        check_out(out)?;
        let path = str_arg(path, "path")?;
        let table = load_table(Path::new(path), &KindHints::new())?;
        *out = Box::into_raw(Box::new(MlsTable { inner: table }));
        Ok(())
    })
}

/// Parses CSV bytes. `hints_json` is NULL or a JSON object mapping column
/// names to kinds, e.g. `{"label":"label","pred":"prediction"}`.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mls_table_from_csv(
    data: *const u8,
    len: usize,
    hints_json: *const c_char,
    out: *mut *mut MlsTable,
) -> MlsStatus {
    guard(|| {
        check_out(out)?;
        if data.is_null() {
            return Err(Failure(MlsStatus::NullPointer, "data is NULL".into()));
        }
        let bytes = std::slice::from_raw_parts(data, len);
        let hints: KindHints = match opt_str_arg(hints_json, "hints_json")? {
            Some(text) => serde_json::from_str(text)
                .map_err(|e| Failure(MlsStatus::InvalidArgument, format!("hints_json: {e}")))?,
            None => KindHints::new(),
        };
        let table = ingest_table(bytes, &hints)?;
        *out = Box::into_raw(Box::new(MlsTable { inner: table }));
        Ok(())
    })
}

/// # Safety
/// `table` must be NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn mls_table_row_count(table: *const MlsTable) -> usize {
    table.as_ref().map_or(0, |t| t.inner.row_count())
}

/// # Safety
/// `table` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mls_table_free(table: *mut MlsTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Loads raw f32 embeddings with their `.meta` sidecar.
///
/// # Safety
/// `path` must be a valid string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mls_embeddings_load(path: *const c_char, out: *mut *mut MlsEmbeddings) -> MlsStatus {
    guard(|| {
        check_out(out)?;
        let path = str_arg(path, "path")?;
        let (m, _) = EmbeddingMatrix::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(MlsEmbeddings { inner: m }));
        Ok(())
    })
}

/// Copies an `n` x `d` row-major matrix.
///
/// # Safety
/// `values` must point to `n * d` readable floats; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mls_embeddings_from_f32(
    values: *const f32,
    n: usize,
    d: usize,
    out: *mut *mut MlsEmbeddings,
) -> MlsStatus {
    guard(|| {
        check_out(out)?;
        if values.is_null() {
            return Err(Failure(MlsStatus::NullPointer, "values is NULL".into()));
        }
        let len = n
            .checked_mul(d)
            .ok_or_else(|| Failure(MlsStatus::InvalidArgument, "n * d overflows".into()))?;
        let m = EmbeddingMatrix::new(n, d, std::slice::from_raw_parts(values, len).to_vec())?;
        *out = Box::into_raw(Box::new(MlsEmbeddings { inner: m }));
        Ok(())
    })
}

/// # Safety
/// `emb` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mls_embeddings_free(emb: *mut MlsEmbeddings) {
    if !emb.is_null() {
        drop(Box::from_raw(emb));
    }
}

/// Derived view JSON for a state token (NULL for the default state). Same
/// bytes as the service's `/api/view`.
///
/// # Safety
/// `table` must be a live handle; `token` NULL or a valid string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mls_view_json(table: *const MlsTable, token: *const c_char, out: *mut *mut c_char) -> MlsStatus {
    guard(|| {
        let t = table
            .as_ref()
            .ok_or_else(|| Failure(MlsStatus::NullPointer, "table is NULL".into()))?;
        let token = opt_str_arg(token, "token")?;
        let state = resolve_state(token, &StateDoc::default(), t.inner.schema())?;
        write_string(out, view_json(&t.inner, &state)?)
    })
}

/// Confusion matrix JSON `{classes, counts, total}` over the whole table.
///
/// # Safety
/// `table` must be a live handle; `label`/`pred` valid strings; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mls_confusion_json(
    table: *const MlsTable,
    label: *const c_char,
    pred: *const c_char,
    out: *mut *mut c_char,
) -> MlsStatus {
    guard(|| {
        let t = table
            .as_ref()
            .ok_or_else(|| Failure(MlsStatus::NullPointer, "table is NULL".into()))?;
        let m = confusion_matrix::<&str>(&t.inner, str_arg(label, "label")?, str_arg(pred, "pred")?, None)?;
        write_string(out, serde_json::to_string(&m).expect("matrix serializes"))
    })
}

/// Duplicate groups JSON `{groups, params}`; rows of `emb` align with the
/// table's rows.
///
/// # Safety
/// `table` and `emb` must be live handles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mls_duplicates_json(
    table: *const MlsTable,
    emb: *const MlsEmbeddings,
    k: usize,
    tau: f64,
    out: *mut *mut c_char,
) -> MlsStatus {
    guard(|| {
        let t = table
            .as_ref()
            .ok_or_else(|| Failure(MlsStatus::NullPointer, "table is NULL".into()))?;
        let e = emb
            .as_ref()
            .ok_or_else(|| Failure(MlsStatus::NullPointer, "embeddings is NULL".into()))?;
        e.inner.check_alignment(&t.inner, None)?;
        let groups = find_duplicates(&e.inner, t.inner.ids(), k, tau)?;
        write_string(out, serde_json::to_string(&groups).expect("groups serialize"))
    })
}
