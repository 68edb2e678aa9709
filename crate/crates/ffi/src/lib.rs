//! C ABI for the cardgauge documentation-quality metrics.
//!
//! Conventions: handles are opaque pointers freed by the matching `_free`
//! function; strings returned as `char*` are UTF-8, NUL-terminated, and
//! freed with [`cg_string_free`]; functions returning pointers yield NULL
//! on failure and functions returning [`CgStatus`] report it directly. The
//! most recent failure message per thread is available via
//! [`cg_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use cardgauge::histogram::WordHistogram;
use cardgauge::mdparse::{export_tree, heading_paths, parse_toc, ExportFormat, TocTree};
use cardgauge::report::score_card;
use cardgauge::simmetrics::{
    compare_histograms, gld, nld_ratio, nld_sorted, nlss, CompareConfig, MatchThresholds,
};
use cardgauge::textprep::{load_stop_words, tokenize, FilterConfig, StopWordSource};

/// Result codes for fallible calls.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    EmptyInput = 3,
    Io = 4,
    Parse = 5,
    InvalidArgument = 6,
    Internal = 7,
}

/// Opaque heading-tree handle.
pub struct CgToc(TocTree);

/// Opaque word-histogram handle.
pub struct CgHistogram(WordHistogram);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).ok();
    });
}

fn status_of(err: &cardgauge::Error) -> CgStatus {
    use cardgauge::Error as E;
    match err {
        E::Io { .. } => CgStatus::Io,
        E::EmptyInput(_) => CgStatus::EmptyInput,
        E::MalformedLine { .. } | E::MalformedPage { .. } => CgStatus::Parse,
        E::UnknownFormat(_) | E::InvalidArgument(_) | E::Config(_) => CgStatus::InvalidArgument,
        _ => CgStatus::Internal,
    }
}

fn fail(err: &cardgauge::Error) -> CgStatus {
    set_error(err.to_string());
    status_of(err)
}

/// # Safety
/// `ptr` must be NULL or a NUL-terminated string valid for the call.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, CgStatus> {
    if ptr.is_null() {
        set_error(format!("{what} is NULL"));
        return Err(CgStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        CgStatus::InvalidUtf8
    })
}

fn export_string(s: String) -> *mut c_char {
    match CString::new(s) {
        Ok(c) => c.into_raw(),
        Err(_) => {
            set_error("output contained an interior NUL byte");
            std::ptr::null_mut()
        }
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn cg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn cg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer previously returned by a `cg_` function
/// that allocates a string, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses Markdown into a heading tree. Never fails on content; returns
/// NULL only for NULL/invalid-UTF-8 input.
///
/// # Safety
/// `markdown` must be NULL or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cg_toc_parse(markdown: *const c_char) -> *mut CgToc {
    match required_str(markdown, "markdown") {
        Ok(text) => Box::into_raw(Box::new(CgToc(parse_toc(text)))),
        Err(_) => std::ptr::null_mut(),
    }
}

/// # Safety
/// `toc` must be NULL or a pointer from [`cg_toc_parse`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cg_toc_free(toc: *mut CgToc) {
    if !toc.is_null() {
        drop(Box::from_raw(toc));
    }
}

/// Number of headings in the tree (root excluded); -1 if `toc` is NULL.
///
/// # Safety
/// `toc` must be NULL or a live pointer from [`cg_toc_parse`].
#[no_mangle]
pub unsafe extern "C" fn cg_toc_heading_count(toc: *const CgToc) -> i64 {
    match toc.as_ref() {
        Some(toc) => toc.0.heading_count() as i64,
        None => {
            set_error("toc is NULL");
            -1
        }
    }
}

/// Serializes the tree; `format` is `"dot"` or `"json"`.
///
/// # Safety
/// `toc` must be a live pointer from [`cg_toc_parse`]; `format` a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cg_toc_export(toc: *const CgToc, format: *const c_char) -> *mut c_char {
    let Some(toc) = toc.as_ref() else {
        set_error("toc is NULL");
        return std::ptr::null_mut();
    };
    let Ok(format) = required_str(format, "format") else {
        return std::ptr::null_mut();
    };
    let format = match ExportFormat::parse(format) {
        Ok(f) => f,
        Err(e) => {
            fail(&e);
            return std::ptr::null_mut();
        }
    };
    match export_tree(&toc.0, format) {
        Ok(text) => export_string(text),
        Err(e) => {
            fail(&e);
            std::ptr::null_mut()
        }
    }
}

/// Heading paths of the tree as a JSON array of strings, document order.
///
/// # Safety
/// `toc` must be a live pointer from [`cg_toc_parse`].
#[no_mangle]
pub unsafe extern "C" fn cg_toc_heading_paths_json(toc: *const CgToc) -> *mut c_char {
    let Some(toc) = toc.as_ref() else {
        set_error("toc is NULL");
        return std::ptr::null_mut();
    };
    let paths: Vec<String> = heading_paths(&toc.0).into_iter().map(|p| p.text).collect();
    match serde_json::to_string(&paths) {
        Ok(json) => export_string(json),
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Generalized Levenshtein distance (insertion 1, deletion 1,
/// substitution 2) between two UTF-8 strings.
///
/// # Safety
/// `a`, `b` must be valid NUL-terminated strings; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cg_gld(a: *const c_char, b: *const c_char, out: *mut u64) -> CgStatus {
    if out.is_null() {
        set_error("out is NULL");
        return CgStatus::NullArgument;
    }
    let (a, b) = match (required_str(a, "a"), required_str(b, "b")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    *out = gld(a, b);
    CgStatus::Ok
}

/// NLSS score of a card heading path against a template heading path.
///
/// # Safety
/// As [`cg_gld`].
#[no_mangle]
pub unsafe extern "C" fn cg_nlss(
    hf_path: *const c_char,
    zd_path: *const c_char,
    out_score: *mut f64,
) -> CgStatus {
    if out_score.is_null() {
        set_error("out_score is NULL");
        return CgStatus::NullArgument;
    }
    let (hf, zd) = match (required_str(hf_path, "hf_path"), required_str(zd_path, "zd_path")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    match nlss(hf, zd) {
        Ok((score, _)) => {
            *out_score = score;
            CgStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// # Safety
/// As [`cg_gld`].
#[no_mangle]
pub unsafe extern "C" fn cg_nld_ratio(
    a: *const c_char,
    b: *const c_char,
    out_score: *mut f64,
) -> CgStatus {
    if out_score.is_null() {
        set_error("out_score is NULL");
        return CgStatus::NullArgument;
    }
    let (a, b) = match (required_str(a, "a"), required_str(b, "b")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    match nld_ratio(a, b) {
        Ok(score) => {
            *out_score = score;
            CgStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Token-sorted variant of [`cg_nld_ratio`].
///
/// # Safety
/// As [`cg_gld`].
#[no_mangle]
pub unsafe extern "C" fn cg_nld_sorted(
    a: *const c_char,
    b: *const c_char,
    out_score: *mut f64,
) -> CgStatus {
    if out_score.is_null() {
        set_error("out_score is NULL");
        return CgStatus::NullArgument;
    }
    let (a, b) = match (required_str(a, "a"), required_str(b, "b")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    match nld_sorted(a, b) {
        Ok(score) => {
            *out_score = score;
            CgStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

unsafe fn filter_config(
    stop_words_path: *const c_char,
    max_x_occurrences: usize,
    lowercase: bool,
) -> Result<FilterConfig, CgStatus> {
    let source = if stop_words_path.is_null() {
        StopWordSource::Builtin
    } else {
        let path = required_str(stop_words_path, "stop_words_path")?;
        StopWordSource::parse(path)
    };
    let stop_words = load_stop_words(&source).map_err(|e| fail(&e))?;
    Ok(FilterConfig {
        stop_words,
        max_x_occurrences,
        lowercase,
        strip_markdown: true,
    })
}

/// Runs the token filtering pipeline; returns a JSON array of tokens.
/// `stop_words_path` NULL selects the builtin stop-word list.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `stop_words_path` NULL or
/// likewise valid.
#[no_mangle]
pub unsafe extern "C" fn cg_tokenize_json(
    text: *const c_char,
    stop_words_path: *const c_char,
    max_x_occurrences: usize,
    lowercase: bool,
) -> *mut c_char {
    let Ok(text) = required_str(text, "text") else {
        return std::ptr::null_mut();
    };
    let cfg = match filter_config(stop_words_path, max_x_occurrences, lowercase) {
        Ok(cfg) => cfg,
        Err(_) => return std::ptr::null_mut(),
    };
    let tokens = tokenize(text, &cfg);
    match serde_json::to_string(&tokens) {
        Ok(json) => export_string(json),
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Builds a histogram over the filtered tokens of `text`.
///
/// # Safety
/// As [`cg_tokenize_json`].
#[no_mangle]
pub unsafe extern "C" fn cg_histogram_from_text(
    text: *const c_char,
    stop_words_path: *const c_char,
    max_x_occurrences: usize,
    lowercase: bool,
) -> *mut CgHistogram {
    let Ok(text) = required_str(text, "text") else {
        return std::ptr::null_mut();
    };
    let cfg = match filter_config(stop_words_path, max_x_occurrences, lowercase) {
        Ok(cfg) => cfg,
        Err(_) => return std::ptr::null_mut(),
    };
    let hist = WordHistogram::from_tokens(tokenize(text, &cfg), "ffi");
    Box::into_raw(Box::new(CgHistogram(hist)))
}

/// Loads a TSV histogram file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cg_histogram_load(path: *const c_char) -> *mut CgHistogram {
    let Ok(path) = required_str(path, "path") else {
        return std::ptr::null_mut();
    };
    match WordHistogram::load(Path::new(path)) {
        Ok(hist) => Box::into_raw(Box::new(CgHistogram(hist))),
        Err(e) => {
            fail(&e);
            std::ptr::null_mut()
        }
    }
}

/// Saves a histogram as deterministic TSV.
///
/// # Safety
/// `hist` must be a live histogram handle; `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn cg_histogram_save(
    hist: *const CgHistogram,
    path: *const c_char,
) -> CgStatus {
    let Some(hist) = hist.as_ref() else {
        set_error("hist is NULL");
        return CgStatus::NullArgument;
    };
    let path = match required_str(path, "path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    match hist.0.save(Path::new(path)) {
        Ok(()) => CgStatus::Ok,
        Err(e) => fail(&e),
    }
}

/// Pointwise sum of two histograms as a new handle.
///
/// # Safety
/// Both arguments must be live histogram handles.
#[no_mangle]
pub unsafe extern "C" fn cg_histogram_merge(
    a: *const CgHistogram,
    b: *const CgHistogram,
) -> *mut CgHistogram {
    match (a.as_ref(), b.as_ref()) {
        (Some(a), Some(b)) => {
            let merged = WordHistogram::merge([&a.0, &b.0]);
            Box::into_raw(Box::new(CgHistogram(merged)))
        }
        _ => {
            set_error("histogram handle is NULL");
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `hist` must be NULL or a live histogram handle.
#[no_mangle]
pub unsafe extern "C" fn cg_histogram_total(hist: *const CgHistogram) -> u64 {
    hist.as_ref().map(|h| h.0.total()).unwrap_or(0)
}

/// # Safety
/// `hist` must be NULL or a live histogram handle.
#[no_mangle]
pub unsafe extern "C" fn cg_histogram_vocabulary_size(hist: *const CgHistogram) -> u64 {
    hist.as_ref().map(|h| h.0.vocabulary_size() as u64).unwrap_or(0)
}

/// Occurrence count of one word.
///
/// # Safety
/// `hist` must be NULL or a live handle; `word` a valid string.
#[no_mangle]
pub unsafe extern "C" fn cg_histogram_count(
    hist: *const CgHistogram,
    word: *const c_char,
) -> u64 {
    let Some(hist) = hist.as_ref() else { return 0 };
    match required_str(word, "word") {
        Ok(word) => hist.0.count(word),
        Err(_) => 0,
    }
}

/// # Safety
/// `hist` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cg_histogram_free(hist: *mut CgHistogram) {
    if !hist.is_null() {
        drop(Box::from_raw(hist));
    }
}

/// Compares two histograms; returns the comparison summary as JSON
/// (common-word counts, intersection, cosine, both KL directions).
///
/// # Safety
/// Both arguments must be live histogram handles.
#[no_mangle]
pub unsafe extern "C" fn cg_compare_histograms_json(
    left: *const CgHistogram,
    right: *const CgHistogram,
) -> *mut c_char {
    let (Some(left), Some(right)) = (left.as_ref(), right.as_ref()) else {
        set_error("histogram handle is NULL");
        return std::ptr::null_mut();
    };
    match compare_histograms(&left.0, &right.0, &CompareConfig::default()) {
        Ok(cmp) => match serde_json::to_string(&cmp) {
            Ok(json) => export_string(json),
            Err(e) => {
                set_error(e.to_string());
                std::ptr::null_mut()
            }
        },
        Err(e) => {
            fail(&e);
            std::ptr::null_mut()
        }
    }
}

/// Scores a card against a template (both as Markdown) using the builtin
/// stop-word list; returns the score breakdown as JSON.
///
/// # Safety
/// `card_markdown` and `template_markdown` must be valid NUL-terminated
/// strings.
#[no_mangle]
pub unsafe extern "C" fn cg_score_card_json(
    card_markdown: *const c_char,
    template_markdown: *const c_char,
    nlss_threshold: f64,
    nld_threshold: f64,
) -> *mut c_char {
    let (Ok(card), Ok(template)) = (
        required_str(card_markdown, "card_markdown"),
        required_str(template_markdown, "template_markdown"),
    ) else {
        return std::ptr::null_mut();
    };
    let cfg = match filter_config(std::ptr::null(), 2, true) {
        Ok(cfg) => cfg,
        Err(_) => return std::ptr::null_mut(),
    };
    let card_paths = heading_paths(&parse_toc(card));
    let card_hist = WordHistogram::from_tokens(tokenize(card, &cfg), "card");
    let zd_paths = heading_paths(&parse_toc(template));
    let zd_hist = WordHistogram::from_tokens(tokenize(template, &cfg), "template");
    let score = score_card(
        "card",
        &card_paths,
        &card_hist,
        &zd_paths,
        &zd_hist,
        &MatchThresholds {
            nlss_match: nlss_threshold,
            nld_match: nld_threshold,
        },
    );
    match serde_json::to_string(&score) {
        Ok(json) => export_string(json),
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn take_string(ptr: *mut c_char) -> String {
        assert!(!ptr.is_null());
        let s = CStr::from_ptr(ptr).to_str().unwrap().to_string();
        cg_string_free(ptr);
        s
    }

    #[test]
    fn toc_round_trip_through_ffi() {
        unsafe {
            let md = cstr("# A\n## B\n");
            let toc = cg_toc_parse(md.as_ptr());
            assert!(!toc.is_null());
            assert_eq!(cg_toc_heading_count(toc), 2);
            let fmt = cstr("json");
            let json = take_string(cg_toc_export(toc, fmt.as_ptr()));
            assert!(json.contains("\"heading_text\":\"A\""));
            let paths = take_string(cg_toc_heading_paths_json(toc));
            assert_eq!(paths, r#"["A","A B"]"#);
            cg_toc_free(toc);
        }
    }

    #[test]
    fn metric_calls() {
        unsafe {
            let a = cstr("kitten");
            let b = cstr("sitting");
            let mut d = 0u64;
            assert_eq!(cg_gld(a.as_ptr(), b.as_ptr(), &mut d), CgStatus::Ok);
            assert_eq!(d, 5);
            let mut score = 0.0f64;
            assert_eq!(
                cg_nld_ratio(a.as_ptr(), b.as_ptr(), &mut score),
                CgStatus::Ok
            );
            assert!((score - 100.0 * (1.0 - 5.0 / 13.0)).abs() < 1e-9);
            let hf = cstr("Evaluation Metric");
            let zd = cstr("Evaluation Metric");
            assert_eq!(cg_nlss(hf.as_ptr(), zd.as_ptr(), &mut score), CgStatus::Ok);
            assert_eq!(score, 100.0);
            let x = cstr("use out-of-scope");
            let y = cstr("out-of-scope use");
            assert_eq!(
                cg_nld_sorted(x.as_ptr(), y.as_ptr(), &mut score),
                CgStatus::Ok
            );
            assert_eq!(score, 100.0);
        }
    }

    #[test]
    fn null_arguments_are_reported() {
        unsafe {
            let mut d = 0u64;
            let a = cstr("x");
            assert_eq!(
                cg_gld(std::ptr::null(), a.as_ptr(), &mut d),
                CgStatus::NullArgument
            );
            let msg = cg_last_error_message();
            assert!(!msg.is_null());
            assert!(CStr::from_ptr(msg).to_str().unwrap().contains("NULL"));
            assert!(cg_toc_parse(std::ptr::null()).is_null());
        }
    }

    #[test]
    fn empty_path_is_empty_input() {
        unsafe {
            let empty = cstr("");
            let zd = cstr("Something");
            let mut score = 0.0;
            assert_eq!(
                cg_nlss(empty.as_ptr(), zd.as_ptr(), &mut score),
                CgStatus::EmptyInput
            );
        }
    }

    #[test]
    fn histogram_lifecycle() {
        unsafe {
            let text = cstr("The model uses data and the model trains");
            let h = cg_histogram_from_text(text.as_ptr(), std::ptr::null(), 2, true);
            assert!(!h.is_null());
            let word = cstr("model");
            assert_eq!(cg_histogram_count(h, word.as_ptr()), 2);
            assert!(cg_histogram_total(h) >= 4);

            let merged = cg_histogram_merge(h, h);
            assert_eq!(cg_histogram_count(merged, word.as_ptr()), 4);

            let dir = std::env::temp_dir().join("cardgauge_ffi_test.tsv");
            let path = cstr(dir.to_str().unwrap());
            assert_eq!(cg_histogram_save(merged, path.as_ptr()), CgStatus::Ok);
            let loaded = cg_histogram_load(path.as_ptr());
            assert_eq!(cg_histogram_count(loaded, word.as_ptr()), 4);
            let _ = std::fs::remove_file(&dir);

            let json = take_string(cg_compare_histograms_json(h, loaded));
            assert!(json.contains("\"cosine_similarity\""));

            cg_histogram_free(h);
            cg_histogram_free(merged);
            cg_histogram_free(loaded);
        }
    }

    #[test]
    fn score_card_json_shape() {
        unsafe {
            let card = cstr("# Model Report\n## Evaluation\nalpha beta\n");
            let template = cstr("# Template\n## Evaluation\nalpha gamma\n");
            let json = take_string(cg_score_card_json(card.as_ptr(), template.as_ptr(), 25.0, 50.0));
            assert!(json.contains("\"composite\""));
            assert!(json.contains("\"nlss_matches\""));
        }
    }
}
