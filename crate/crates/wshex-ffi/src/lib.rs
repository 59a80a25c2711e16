//! C ABI over the wshex toolkit.
//!
//! The surface follows the usual conventions for embedding:
//!
//! - schemas, graphs and validators are opaque handles created and
//!   destroyed here, never dereferenced by the caller;
//! - every fallible call returns a [`WshexStatus`] and, on failure,
//!   leaves a message for [`wshex_last_error`] on the calling thread;
//! - strings handed out through out-parameters are NUL-terminated,
//!   owned by the caller and released with [`wshex_string_free`];
//! - out-parameters are written only on `WSHEX_STATUS_OK` (handles are
//!   nulled first, so a caller that forgets to check still holds no
//!   dangling pointer).
//!
//! The committed `include/wshex.h` is generated from this file with
//! cbindgen; a test keeps the two in sync.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fmt::Display;
use std::io::Cursor;
use std::panic::{catch_unwind, AssertUnwindSafe};

use wshex::ast::{Schema, ShapeLabel};
use wshex::convert::{convert, parse_shexc_subset};
use wshex::dump::{load_graph, IngestOptions};
use wshex::model::{EntityId, WikibaseGraph};
use wshex::parser::{parse_schema, render_schema, ParseDiagnostic};
use wshex::validator::{Outcome, Validator, ValidatorOptions};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WshexStatus {
    /// The call succeeded; out-parameters are populated.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument,
    /// A string argument was not valid UTF-8.
    InvalidUtf8,
    /// The schema text did not parse; see `wshex_last_error`.
    ParseError,
    /// The schema parsed but cannot be compiled for validation.
    CompileError,
    /// The requested shape is not defined by the schema.
    UnknownShape,
    /// The entity id is not of the `Q<number>`/`P<number>` form.
    InvalidEntityId,
    /// The dump text could not be ingested; see `wshex_last_error`.
    IngestError,
    /// A bug: the library panicked and the panic was contained.
    InternalError,
}

/// Verdict of a single conformance check.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WshexVerdict {
    Conforming = 0,
    NonConforming,
    /// The step budget cut evaluation short; not a conformance verdict.
    EngineLimit,
}

/// A parsed schema (opaque).
pub struct WshexSchema {
    schema: Schema,
}

/// A loaded entity graph (opaque).
pub struct WshexGraph {
    graph: WikibaseGraph,
}

/// A compiled validator bound to one schema (opaque).
pub struct WshexValidator {
    validator: Validator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Display) {
    let text = message.to_string().replace('\0', "\u{fffd}");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(CString::new(text).expect("NULs replaced"));
    });
}

fn set_parse_errors(diagnostics: &[ParseDiagnostic]) {
    let joined = diagnostics
        .iter()
        .map(|d| format!("{}: {}", d.position, d.message))
        .collect::<Vec<_>>()
        .join("\n");
    set_error(joined);
}

/// Catch panics so they surface as a status instead of unwinding (and
/// aborting) across the C boundary.
fn guarded(body: impl FnOnce() -> WshexStatus) -> WshexStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic; this is a bug in the wshex library");
            WshexStatus::InternalError
        }
    }
}

/// Read a required UTF-8 string argument.
///
/// # Safety
/// `ptr` must be null or a NUL-terminated string valid for reads.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, WshexStatus> {
    if ptr.is_null() {
        set_error(format!("{what} must not be null"));
        return Err(WshexStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{what} must be valid UTF-8"));
        WshexStatus::InvalidUtf8
    })
}

fn required_out<T>(ptr: *mut T, what: &str) -> Result<(), WshexStatus> {
    if ptr.is_null() {
        set_error(format!("{what} must not be null"));
        return Err(WshexStatus::NullArgument);
    }
    Ok(())
}

fn export_string(text: String) -> *mut c_char {
    CString::new(text.replace('\0', "\u{fffd}")).expect("NULs replaced").into_raw()
}

/// The library version as a static string; never freed.
#[no_mangle]
pub extern "C" fn wshex_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The message of the most recent failing call on this thread, or null
/// if no call has failed yet. The pointer stays valid until the next
/// failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn wshex_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(message) => message.as_ptr(),
        None => std::ptr::null(),
    })
}

/// Release a string returned through an out-parameter. Null is a no-op.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn wshex_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse WShEx compact syntax into a schema handle.
///
/// # Safety
/// `text` must be null or NUL-terminated; `out` must be null or valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn wshex_schema_parse(
    text: *const c_char,
    out: *mut *mut WshexSchema,
) -> WshexStatus {
    guarded(|| {
        if let Err(status) = required_out(out, "out") {
            return status;
        }
        *out = std::ptr::null_mut();
        let text = match required_str(text, "text") {
            Ok(text) => text,
            Err(status) => return status,
        };
        match parse_schema(text) {
            Ok(schema) => {
                *out = Box::into_raw(Box::new(WshexSchema { schema }));
                WshexStatus::Ok
            }
            Err(diagnostics) => {
                set_parse_errors(&diagnostics);
                WshexStatus::ParseError
            }
        }
    })
}

/// Destroy a schema handle. Null is a no-op.
///
/// # Safety
/// `schema` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wshex_schema_free(schema: *mut WshexSchema) {
    if !schema.is_null() {
        drop(Box::from_raw(schema));
    }
}

/// Number of shapes the schema defines; 0 for a null handle.
///
/// # Safety
/// `schema` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wshex_schema_shape_count(schema: *const WshexSchema) -> usize {
    if schema.is_null() {
        return 0;
    }
    (*schema).schema.len()
}

/// Render the schema back to compact syntax.
///
/// # Safety
/// `schema` must be a live handle; `out` must be null or valid for
/// writes. The returned string is released with `wshex_string_free`.
#[no_mangle]
pub unsafe extern "C" fn wshex_schema_render(
    schema: *const WshexSchema,
    out: *mut *mut c_char,
) -> WshexStatus {
    guarded(|| {
        if let Err(status) = required_out(out, "out") {
            return status;
        }
        *out = std::ptr::null_mut();
        if schema.is_null() {
            set_error("schema must not be null");
            return WshexStatus::NullArgument;
        }
        *out = export_string(render_schema(&(*schema).schema));
        WshexStatus::Ok
    })
}

/// Load a Wikibase JSON entity-document dump (one document per line,
/// with or without the `[` / `]` frame) into a graph handle.
///
/// # Safety
/// `text` must be null or NUL-terminated; `out` must be null or valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn wshex_graph_parse_dump(
    text: *const c_char,
    out: *mut *mut WshexGraph,
) -> WshexStatus {
    guarded(|| {
        if let Err(status) = required_out(out, "out") {
            return status;
        }
        *out = std::ptr::null_mut();
        let text = match required_str(text, "text") {
            Ok(text) => text,
            Err(status) => return status,
        };
        match load_graph(Cursor::new(text), &IngestOptions::default()) {
            Ok((graph, _stats)) => {
                *out = Box::into_raw(Box::new(WshexGraph { graph }));
                WshexStatus::Ok
            }
            Err(error) => {
                set_error(error);
                WshexStatus::IngestError
            }
        }
    })
}

/// Destroy a graph handle. Null is a no-op.
///
/// # Safety
/// `graph` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wshex_graph_free(graph: *mut WshexGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of items the graph knows (as subject or value); 0 for a null
/// handle.
///
/// # Safety
/// `graph` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wshex_graph_item_count(graph: *const WshexGraph) -> usize {
    if graph.is_null() {
        return 0;
    }
    (*graph).graph.item_count()
}

/// Compile a validator for the schema. `step_budget` of 0 selects the
/// default budget; `pedantic` switches qualifier conjunction to the
/// literal (non-partitioning) reading.
///
/// # Safety
/// `schema` must be a live handle; `out` must be null or valid for
/// writes. The validator does not borrow the schema handle — the
/// schema may be freed first.
#[no_mangle]
pub unsafe extern "C" fn wshex_validator_new(
    schema: *const WshexSchema,
    pedantic: bool,
    step_budget: u64,
    out: *mut *mut WshexValidator,
) -> WshexStatus {
    guarded(|| {
        if let Err(status) = required_out(out, "out") {
            return status;
        }
        *out = std::ptr::null_mut();
        if schema.is_null() {
            set_error("schema must not be null");
            return WshexStatus::NullArgument;
        }
        let mut options = ValidatorOptions { pedantic, ..Default::default() };
        if step_budget > 0 {
            options.step_budget = step_budget;
        }
        match Validator::new(&(*schema).schema, options) {
            Ok(validator) => {
                *out = Box::into_raw(Box::new(WshexValidator { validator }));
                WshexStatus::Ok
            }
            Err(error) => {
                set_error(error);
                WshexStatus::CompileError
            }
        }
    })
}

/// Destroy a validator handle. Null is a no-op.
///
/// # Safety
/// `validator` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wshex_validator_free(validator: *mut WshexValidator) {
    if !validator.is_null() {
        drop(Box::from_raw(validator));
    }
}

/// Check one entity of the graph against one shape of the validator's
/// schema. `entity` is an id like `"Q42"`; `shape` is a label name as
/// written in the schema, without the angle brackets.
///
/// # Safety
/// `validator` and `graph` must be live handles; `entity` and `shape`
/// must be null or NUL-terminated; `verdict_out` must be null or valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn wshex_validator_check(
    validator: *const WshexValidator,
    graph: *const WshexGraph,
    entity: *const c_char,
    shape: *const c_char,
    verdict_out: *mut WshexVerdict,
) -> WshexStatus {
    guarded(|| {
        if let Err(status) = required_out(verdict_out, "verdict_out") {
            return status;
        }
        if validator.is_null() || graph.is_null() {
            set_error("validator and graph must not be null");
            return WshexStatus::NullArgument;
        }
        let entity = match required_str(entity, "entity") {
            Ok(text) => text,
            Err(status) => return status,
        };
        let shape = match required_str(shape, "shape") {
            Ok(text) => text,
            Err(status) => return status,
        };
        let node: EntityId = match entity.parse() {
            Ok(node) => node,
            Err(error) => {
                set_error(error);
                return WshexStatus::InvalidEntityId;
            }
        };
        if shape.is_empty() {
            set_error("shape name must not be empty");
            return WshexStatus::UnknownShape;
        }
        match (*validator).validator.conforms(&(*graph).graph, node, &ShapeLabel::new(shape)) {
            Ok(outcome) => {
                *verdict_out = match outcome {
                    Outcome::Conforming => WshexVerdict::Conforming,
                    Outcome::NonConforming => WshexVerdict::NonConforming,
                    Outcome::EngineLimit => WshexVerdict::EngineLimit,
                };
                WshexStatus::Ok
            }
            Err(error) => {
                set_error(error);
                WshexStatus::UnknownShape
            }
        }
    })
}

/// Convert a ShEx entity schema written against the wdt:/p:/ps:/pq:
/// reification pattern into WShEx compact syntax.
///
/// On success `schema_out` receives the converted schema text. If
/// `diagnostics_out` is non-null it receives the conversion notes and
/// rejected constructs, one per line (empty string when there are
/// none); rejections do not fail the call.
///
/// # Safety
/// `text` must be null or NUL-terminated; `schema_out` must be null or
/// valid for writes; `diagnostics_out` may be null. Returned strings
/// are released with `wshex_string_free`.
#[no_mangle]
pub unsafe extern "C" fn wshex_convert_entity_schema(
    text: *const c_char,
    schema_out: *mut *mut c_char,
    diagnostics_out: *mut *mut c_char,
) -> WshexStatus {
    guarded(|| {
        if let Err(status) = required_out(schema_out, "schema_out") {
            return status;
        }
        *schema_out = std::ptr::null_mut();
        if !diagnostics_out.is_null() {
            *diagnostics_out = std::ptr::null_mut();
        }
        let text = match required_str(text, "text") {
            Ok(text) => text,
            Err(status) => return status,
        };
        let subset = match parse_shexc_subset(text) {
            Ok(subset) => subset,
            Err(diagnostics) => {
                set_parse_errors(&diagnostics);
                return WshexStatus::ParseError;
            }
        };
        let report = convert(&subset);
        let mut diagnostics: Vec<String> =
            report.notes.iter().map(|n| format!("note: {n}")).collect();
        diagnostics.extend(report.rejected.iter().map(|r| format!("rejected: {r}")));
        *schema_out = export_string(render_schema(&report.converted));
        if !diagnostics_out.is_null() {
            *diagnostics_out = export_string(diagnostics.join("\n"));
        }
        WshexStatus::Ok
    })
}
