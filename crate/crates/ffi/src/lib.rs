//! C ABI over the magnitude engine.
//!
//! Models and run results are opaque handles owned by the caller and
//! released with their `_free` function. Every fallible call returns a
//! [`MagStatus`]; the message of the last failure on the calling thread is
//! available from [`mag_last_error_message`]. Strings handed out by this
//! library must be released with [`mag_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use magnitude::data::{DataResolver, FsResolver, InlineOnly};
use magnitude::dsl::{parse_model_syntax, serialize_model};
use magnitude::graph::enumerate_feedback_loops;
use magnitude::model::Model;
use magnitude::sim::{
    all_scenarios, compare_runs, resolve_scenario, run, run_scenarios, Indicator, RunResult,
    Scenario, SimError,
};
use magnitude::validate::{model_fingerprint, validate_model};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Run = 5,
    NotFound = 6,
    Io = 7,
    Panic = 8,
}

/// A parsed model together with the directory its data files are read from.
pub struct MagModel {
    model: Model,
    base_dir: Option<PathBuf>,
}

/// The time series of one simulation run.
pub struct MagRunResult {
    result: RunResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Fail(MagStatus, String);

impl Fail {
    fn new(status: MagStatus, msg: impl Into<String>) -> Self {
        Fail(status, msg.into())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MagStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MagStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MagStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::new(MagStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::new(MagStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail::new(MagStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail::new(MagStatus::NullPointer, format!("{what} is null")))
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    *out_ptr(out, "out")? = to_c(s);
    Ok(())
}

fn json_arg<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, Fail> {
    serde_json::from_str(text).map_err(|e| Fail::new(MagStatus::Parse, format!("{what}: {e}")))
}

fn sim_fail(e: SimError) -> Fail {
    let status = match &e {
        SimError::InvalidModel(_) | SimError::Scenario(_) => MagStatus::Validation,
        SimError::Data { source, .. } if source.code() == magnitude::diagnostics::E_IO => {
            MagStatus::Io
        }
        _ => MagStatus::Run,
    };
    Fail::new(status, format!("{}: {e}", e.code()))
}

impl MagModel {
    fn resolver(&self) -> Box<dyn DataResolver> {
        match &self.base_dir {
            Some(dir) => Box::new(FsResolver::new(dir.clone())),
            None => Box::new(InlineOnly),
        }
    }
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn mag_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the last failed call on this thread, or an empty
/// string. Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn mag_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mag_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn parse_into(text: &str, base_dir: Option<PathBuf>, out: &mut *mut MagModel) -> Result<(), Fail> {
    let (model, diags, _) = parse_model_syntax(text);
    let model = model.ok_or_else(|| {
        let msgs: Vec<String> = diags
            .iter()
            .filter(|d| d.is_error())
            .map(|d| d.to_string())
            .collect();
        Fail::new(MagStatus::Parse, msgs.join("\n"))
    })?;
    *out = Box::into_raw(Box::new(MagModel { model, base_dir }));
    Ok(())
}

/// Parse `.mag` text. `base_dir` (nullable) is where data files are read
/// from; without it only inline series can be used. Syntax errors give
/// `Parse`; the model is not validated here.
///
/// # Safety
/// Pointers must be valid NUL-terminated strings or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn mag_model_parse(
    text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut MagModel,
) -> MagStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let base_dir = opt_str_arg(base_dir, "base_dir")?.map(PathBuf::from);
        parse_into(text, base_dir, out_ptr(out, "out")?)
    })
}

/// Read and parse a `.mag` file; data paths resolve against its directory.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mag_model_parse_file(
    path: *const c_char,
    out: *mut *mut MagModel,
) -> MagStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let out = out_ptr(out, "out")?;
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Fail::new(MagStatus::Io, format!("{}: {e}", path.display())))?;
        let dir = path
            .parent()
            .map_or_else(|| PathBuf::from("."), |p| p.to_path_buf());
        parse_into(&text, Some(dir), out)
    })
}

/// # Safety
/// `model` must come from `mag_model_parse*` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mag_model_free(model: *mut MagModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// SHA-256 fingerprint of the model as 64 hex characters.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mag_model_fingerprint(
    model: *const MagModel,
    out: *mut *mut c_char,
) -> MagStatus {
    guard(|| {
        let m = handle(model, "model")?;
        put_string(out, model_fingerprint(&m.model))
    })
}

/// Diagnostics as `{"diagnostics": [...]}`. Succeeds even when the model
/// has errors; inspect the severities.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mag_model_validate_json(
    model: *const MagModel,
    out: *mut *mut c_char,
) -> MagStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let diags = validate_model(&m.model);
        put_string(out, serde_json::json!({ "diagnostics": diags }).to_string())
    })
}

/// Canonical `.mag` text of the model.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mag_model_serialize(
    model: *const MagModel,
    out: *mut *mut c_char,
) -> MagStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let text = serialize_model(&m.model)
            .map_err(|e| Fail::new(MagStatus::Validation, e.to_string()))?;
        put_string(out, text)
    })
}

/// Feedback loops of the influence diagram as JSON. Zero limits select
/// the defaults.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mag_model_loops_json(
    model: *const MagModel,
    max_len: usize,
    max_count: usize,
    out: *mut *mut c_char,
) -> MagStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let max_len = if max_len == 0 {
            magnitude::graph::DEFAULT_MAX_LOOP_LEN
        } else {
            max_len
        };
        let max_count = if max_count == 0 {
            magnitude::graph::DEFAULT_MAX_LOOPS
        } else {
            max_count
        };
        put_string(
            out,
            enumerate_feedback_loops(&m.model, max_len, max_count).to_json(),
        )
    })
}

/// Simulate one scenario. `scenario` names a scenario declared in the model
/// (null means `baseline`); `scenario_json`, when not null, supplies the
/// scenario inline and takes precedence.
///
/// # Safety
/// Pointers must be valid or null where allowed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mag_run(
    model: *const MagModel,
    scenario: *const c_char,
    scenario_json: *const c_char,
    out: *mut *mut MagRunResult,
) -> MagStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let name = opt_str_arg(scenario, "scenario")?.unwrap_or(Scenario::BASELINE);
        let inline = opt_str_arg(scenario_json, "scenario_json")?;
        let out = out_ptr(out, "out")?;
        let scenario = match inline {
            Some(text) => json_arg::<Scenario>(text, "scenario_json")?,
            None => resolve_scenario(&m.model, name)
                .map_err(|d| Fail::new(MagStatus::NotFound, d.to_string()))?,
        };
        let result = run(&m.model, &scenario, m.resolver().as_ref()).map_err(sim_fail)?;
        *out = Box::into_raw(Box::new(MagRunResult { result }));
        Ok(())
    })
}

/// # Safety
/// `result` must come from `mag_run` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mag_run_result_free(result: *mut MagRunResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of grid points (steps + 1) of every series.
///
/// # Safety
/// `result` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn mag_run_result_len(result: *const MagRunResult) -> usize {
    result.as_ref().map_or(0, |r| r.result.times.len())
}

/// Copy series `id` into `buf`, which holds `cap` values. `written`
/// receives the series length; `buf` may be null to query it.
///
/// # Safety
/// `buf` must hold `cap` doubles when not null.
#[no_mangle]
pub unsafe extern "C" fn mag_run_result_series(
    result: *const MagRunResult,
    id: *const c_char,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> MagStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let id = str_arg(id, "id")?;
        let written = out_ptr(written, "written")?;
        let series = if id == "t" {
            &r.result.times[..]
        } else {
            r.result
                .series(id)
                .ok_or_else(|| Fail::new(MagStatus::NotFound, format!("no series `{id}`")))?
        };
        *written = series.len();
        if !buf.is_null() {
            let n = series.len().min(cap);
            ptr::copy_nonoverlapping(series.as_ptr(), buf, n);
        }
        Ok(())
    })
}

/// CSV export: `t` then one column per series.
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mag_run_result_to_csv(
    result: *const MagRunResult,
    out: *mut *mut c_char,
) -> MagStatus {
    guard(|| put_string(out, handle(result, "result")?.result.to_csv()))
}

/// JSON export of the whole run.
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mag_run_result_to_json(
    result: *const MagRunResult,
    out: *mut *mut c_char,
) -> MagStatus {
    guard(|| put_string(out, handle(result, "result")?.result.to_json()))
}

/// Run scenarios and compare their indicators with `baseline`.
/// `scenarios_json` is a JSON array of scenario names (null runs the
/// baseline and every declared scenario); `indicators_json` a JSON array of indicators (null
/// uses the model's own).
///
/// # Safety
/// Pointers must be valid or null where allowed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mag_compare_json(
    model: *const MagModel,
    baseline: *const c_char,
    scenarios_json: *const c_char,
    indicators_json: *const c_char,
    out: *mut *mut c_char,
) -> MagStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let baseline = opt_str_arg(baseline, "baseline")?.unwrap_or(Scenario::BASELINE);
        let scenarios: Vec<Scenario> = match opt_str_arg(scenarios_json, "scenarios_json")? {
            Some(text) => {
                let names: Vec<String> = json_arg(text, "scenarios_json")?;
                names
                    .iter()
                    .map(|n| {
                        resolve_scenario(&m.model, n)
                            .map_err(|d| Fail::new(MagStatus::NotFound, d.to_string()))
                    })
                    .collect::<Result<_, _>>()?
            }
            None => all_scenarios(&m.model),
        };
        let indicators: Vec<Indicator> = match opt_str_arg(indicators_json, "indicators_json")? {
            Some(text) => json_arg(text, "indicators_json")?,
            None => m.model.indicators.clone(),
        };
        let resolver = m.resolver();
        let runs = run_scenarios(&m.model, &scenarios, resolver.as_ref())
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(sim_fail)?;
        let table = compare_runs(&runs, baseline, &indicators)
            .map_err(|e| Fail::new(MagStatus::Validation, format!("{}: {e}", e.code())))?;
        put_string(out, table.to_json())
    })
}
