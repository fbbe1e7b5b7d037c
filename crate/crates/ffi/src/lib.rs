//! C ABI over the ctr-nli core.
//!
//! Every fallible function returns a [`CtrNliStatus`]. On failure a message is
//! kept in thread-local storage and can be read with [`ctr_nli_last_error`].
//! Strings handed out by this library must be released with
//! [`ctr_nli_string_free`]; handles with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ctr_nli::augment::negate_statement;
use ctr_nli::corpus::{parse_split, EvidenceBundle, Label};
use ctr_nli::inference::{extract_label, parse_predictions, LabelLexicon};
use ctr_nli::metrics::full_evaluate;
use ctr_nli::prompt::{compose, PartLibrary, PromptCombo};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtrNliStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    DataError = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtrNliLabel {
    Entailment = 0,
    Contradiction = 1,
}

impl From<Label> for CtrNliLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Entailment => CtrNliLabel::Entailment,
            Label::Contradiction => CtrNliLabel::Contradiction,
        }
    }
}

/// Opaque prompt part library.
pub struct CtrNliLibrary(PartLibrary);

/// Opaque label lexicon.
pub struct CtrNliLexicon(LabelLexicon);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(CtrNliStatus, String);

impl Failure {
    fn invalid(msg: impl ToString) -> Self {
        Failure(CtrNliStatus::InvalidArgument, msg.to_string())
    }

    fn data(msg: impl ToString) -> Self {
        Failure(CtrNliStatus::DataError, msg.to_string())
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CtrNliStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtrNliStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            CtrNliStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(CtrNliStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CtrNliStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(CtrNliStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure::data("output contains a NUL byte"))?;
    write_out(out, c.into_raw(), "out")
}

unsafe fn library<'a>(lib: *const CtrNliLibrary) -> Result<&'a PartLibrary, Failure> {
    lib.as_ref()
        .map(|l| &l.0)
        .ok_or_else(|| Failure(CtrNliStatus::NullPointer, "library is null".into()))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ctr_nli_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ctr_nli_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Static version string.
#[no_mangle]
pub extern "C" fn ctr_nli_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The bundled part library. Never null.
#[no_mangle]
pub extern "C" fn ctr_nli_library_default() -> *mut CtrNliLibrary {
    Box::into_raw(Box::new(CtrNliLibrary(PartLibrary::default_library())))
}

/// Parses a part library from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctr_nli_library_from_json(json: *const c_char, out: *mut *mut CtrNliLibrary) -> CtrNliStatus {
    guard(|| {
        let lib = PartLibrary::from_json(read_str(json, "json")?).map_err(Failure::invalid)?;
        write_out(out, Box::into_raw(Box::new(CtrNliLibrary(lib))), "out")
    })
}

/// # Safety
/// `lib` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ctr_nli_library_free(lib: *mut CtrNliLibrary) {
    if !lib.is_null() {
        drop(Box::from_raw(lib));
    }
}

/// The default lexicon. Never null.
#[no_mangle]
pub extern "C" fn ctr_nli_lexicon_default() -> *mut CtrNliLexicon {
    Box::into_raw(Box::new(CtrNliLexicon(LabelLexicon::default())))
}

/// Builds a lexicon from whitespace-separated token lists. `default_label` is
/// a `CtrNliLabel` value.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctr_nli_lexicon_new(
    entail_tokens: *const c_char,
    contra_tokens: *const c_char,
    default_label: i32,
    out: *mut *mut CtrNliLexicon,
) -> CtrNliStatus {
    guard(|| {
        let split = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
        let entail = split(read_str(entail_tokens, "entail_tokens")?);
        let contra = split(read_str(contra_tokens, "contra_tokens")?);
        let default = match default_label {
            0 => Label::Entailment,
            1 => Label::Contradiction,
            other => return Err(Failure::invalid(format!("unknown label value {other}"))),
        };
        let lexicon = LabelLexicon::new(entail, contra, default).map_err(Failure::invalid)?;
        write_out(out, Box::into_raw(Box::new(CtrNliLexicon(lexicon))), "out")
    })
}

/// # Safety
/// `lexicon` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ctr_nli_lexicon_free(lexicon: *mut CtrNliLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Writes the wrapped instruction text for `combo` (e.g. "t4.c1.s5.o4"),
/// with its evidence and statement slots unresolved.
///
/// # Safety
/// `lib` must be a live handle; `combo` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctr_nli_compose(
    lib: *const CtrNliLibrary,
    combo: *const c_char,
    out: *mut *mut c_char,
) -> CtrNliStatus {
    guard(|| {
        let lib = library(lib)?;
        let combo: PromptCombo = read_str(combo, "combo")?.parse().map_err(Failure::invalid)?;
        let skeleton = compose(combo, lib).map_err(Failure::invalid)?;
        write_string(out, skeleton.wrapper().wrap(skeleton.text()))
    })
}

/// Renders a full prompt. `secondary` may be null for single-trial statements.
///
/// # Safety
/// `lib` must be a live handle; strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctr_nli_render(
    lib: *const CtrNliLibrary,
    combo: *const c_char,
    primary: *const c_char,
    secondary: *const c_char,
    statement: *const c_char,
    out: *mut *mut c_char,
) -> CtrNliStatus {
    guard(|| {
        let lib = library(lib)?;
        let combo: PromptCombo = read_str(combo, "combo")?.parse().map_err(Failure::invalid)?;
        let evidence = EvidenceBundle {
            primary: read_str(primary, "primary")?.to_string(),
            secondary: if secondary.is_null() {
                None
            } else {
                Some(read_str(secondary, "secondary")?.to_string())
            },
        };
        let skeleton = compose(combo, lib).map_err(Failure::invalid)?;
        let text = skeleton
            .render(&evidence, read_str(statement, "statement")?)
            .map_err(Failure::invalid)?;
        write_string(out, text)
    })
}

/// Maps a generation to a label. A null `lexicon` uses the default one.
///
/// # Safety
/// `lexicon` must be null or a live handle; `text` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctr_nli_extract_label(
    lexicon: *const CtrNliLexicon,
    text: *const c_char,
    out: *mut CtrNliLabel,
) -> CtrNliStatus {
    guard(|| {
        let text = read_str(text, "text")?;
        let label = match lexicon.as_ref() {
            Some(l) => extract_label(text, &l.0),
            None => extract_label(text, &LabelLexicon::default()),
        };
        write_out(out, label.into(), "out")
    })
}

/// Negates a statement. `low_confidence` may be null.
///
/// # Safety
/// `text` must be NUL-terminated; `out` writable; `low_confidence` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ctr_nli_negate(
    text: *const c_char,
    out: *mut *mut c_char,
    low_confidence: *mut bool,
) -> CtrNliStatus {
    guard(|| {
        let n = negate_statement(read_str(text, "text")?).map_err(Failure::data)?;
        if !low_confidence.is_null() {
            low_confidence.write(n.low_confidence);
        }
        write_string(out, n.text)
    })
}

/// Scores a predictions JSON object against a split JSON document and writes
/// the evaluation report as JSON.
///
/// # Safety
/// Strings must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctr_nli_evaluate_json(
    predictions_json: *const c_char,
    split_json: *const c_char,
    out: *mut *mut c_char,
) -> CtrNliStatus {
    guard(|| {
        let preds = parse_predictions(read_str(predictions_json, "predictions_json")?).map_err(Failure::data)?;
        let split =
            parse_split(read_str(split_json, "split_json")?, "split", Path::new("<memory>")).map_err(Failure::data)?;
        let report = full_evaluate(&preds, &split).map_err(Failure::data)?;
        write_string(out, report.to_json().to_string())
    })
}
