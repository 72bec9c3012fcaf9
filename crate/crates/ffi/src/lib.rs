//! C ABI for the evsim drivetrain simulator.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free` function. Every fallible call returns an
//! [`EvsimStatus`]; on failure [`evsim_last_error`] describes the cause on
//! the calling thread. No call unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use evsim::cli::run_metrics;
use evsim::config::{parse_config, read_config, ConfigDoc};
use evsim::engine::{export_log, run_scenario, ScenarioConfig, SimLog, SimRecord};
use evsim::error::SimError;

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvsimStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidString = 2,
    /// The configuration was rejected.
    Config = 3,
    /// An input was outside the domain of an operation.
    Domain = 4,
    /// The run diverged, hit a boost pole or drained the battery.
    Numerical = 5,
    Io = 6,
    /// A file was malformed.
    Format = 7,
    /// An index was past the end of a log.
    OutOfRange = 8,
    /// An internal invariant failed.
    Panic = 9,
}

impl From<&SimError> for EvsimStatus {
    fn from(e: &SimError) -> Self {
        match e {
            SimError::Domain(_) | SimError::LowSpeed(_) => EvsimStatus::Domain,
            SimError::Saturation { .. } | SimError::Singularity(_) | SimError::NumericalBlowup { .. } => {
                EvsimStatus::Numerical
            }
            SimError::Format { .. } => EvsimStatus::Format,
            SimError::Config(_) => EvsimStatus::Config,
            SimError::Io { .. } => EvsimStatus::Io,
        }
    }
}

/// A scenario configuration being assembled.
pub struct EvsimConfig {
    doc: ConfigDoc,
    /// Directory that a relative cycle path is resolved against.
    base_dir: PathBuf,
}

/// The log of a finished run.
pub struct EvsimLog {
    scenario: ScenarioConfig,
    log: SimLog,
}

/// One logged time step.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvsimRecord {
    pub t: f64,
    pub reference: f64,
    pub speed_rpm: f64,
    pub v_kmph: f64,
    pub torque_nm: f64,
    pub load_nm: f64,
    pub theta_r: f64,
    pub soc: f64,
    pub v_batt: f64,
    pub v_dclink: f64,
    pub u_cmd: f64,
    pub sigma: f64,
    pub p_tract_w: f64,
}

impl From<&SimRecord> for EvsimRecord {
    fn from(r: &SimRecord) -> Self {
        Self {
            t: r.t,
            reference: r.reference,
            speed_rpm: r.speed_rpm,
            v_kmph: r.v_kmph,
            torque_nm: r.torque_nm,
            load_nm: r.load_nm,
            theta_r: r.theta_r,
            soc: r.soc,
            v_batt: r.v_batt,
            v_dclink: r.v_dclink,
            u_cmd: r.u_cmd,
            sigma: r.sigma,
            p_tract_w: r.p_tract_w,
        }
    }
}

/// Tracking figures of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvsimMetrics {
    pub rmse: f64,
    /// False when the signal never stayed inside the band.
    pub settled: bool,
    /// Settling time in seconds; NaN when not settled.
    pub settling_time_s: f64,
    pub steady_state_value: f64,
    pub overshoot_pct: f64,
}

/// Whole-run figures tracked at every step.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvsimSummary {
    pub steps: usize,
    pub max_current_imbalance: f64,
    pub tractive_energy_j: f64,
    pub final_soc: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let text = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

struct Failure(EvsimStatus, String);

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure(EvsimStatus::from(&e), e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> EvsimStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            EvsimStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal error".to_string());
            set_last_error(format!("internal error: {msg}"));
            EvsimStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(EvsimStatus::NullArgument, format!("{name} is null"))
}

/// # Safety
/// `p` must be null or point to a nul-terminated string.
unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(EvsimStatus::InvalidString, format!("{name} is not valid UTF-8")))
}

/// # Safety
/// `p` must be null or point to a live value of `T`.
unsafe fn read_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

/// # Safety
/// `p` must be null or writable for one `T`.
unsafe fn write_out<T>(p: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    p.write(value);
    Ok(())
}

/// Message for the most recent failed call on this thread, or null after a
/// success. The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn evsim_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn evsim_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains a nul byte"),
    };
    VERSION.as_ptr()
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn evsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// New configuration holding the defaults.
///
/// # Safety
/// `out` must be writable for one pointer.
#[no_mangle]
pub unsafe extern "C" fn evsim_config_new(out: *mut *mut EvsimConfig) -> EvsimStatus {
    guard(|| {
        let cfg = EvsimConfig { doc: ConfigDoc::default(), base_dir: PathBuf::from(".") };
        write_out(out, Box::into_raw(Box::new(cfg)), "out")
    })
}

/// Configuration parsed from TOML text. A relative `scenario.cycle` is
/// resolved against `base_dir`, or the working directory when it is null.
///
/// # Safety
/// `text` must be a nul-terminated string, `base_dir` null or one, and
/// `out` writable for one pointer.
#[no_mangle]
pub unsafe extern "C" fn evsim_config_from_str(
    text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut EvsimConfig,
) -> EvsimStatus {
    guard(|| {
        let text = read_str(text, "text")?;
        let base_dir =
            if base_dir.is_null() { PathBuf::from(".") } else { PathBuf::from(read_str(base_dir, "base_dir")?) };
        let doc = parse_config(text)?;
        write_out(out, Box::into_raw(Box::new(EvsimConfig { doc, base_dir })), "out")
    })
}

/// Configuration read from a TOML file; a relative cycle path is resolved
/// against the file's directory.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` writable for one pointer.
#[no_mangle]
pub unsafe extern "C" fn evsim_config_from_file(path: *const c_char, out: *mut *mut EvsimConfig) -> EvsimStatus {
    guard(|| {
        let path = Path::new(read_str(path, "path")?);
        let doc = read_config(path)?;
        let base_dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        write_out(out, Box::into_raw(Box::new(EvsimConfig { doc, base_dir })), "out")
    })
}

/// Apply one `key=value` assignment, e.g. `"controller.kind=pid"`.
///
/// # Safety
/// `cfg` must be a live configuration and `assignment` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn evsim_config_set(cfg: *mut EvsimConfig, assignment: *const c_char) -> EvsimStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let assignment = read_str(assignment, "assignment")?;
        cfg.doc.apply_override(assignment)?;
        Ok(())
    })
}

/// The configuration as TOML text; release it with [`evsim_string_free`].
///
/// # Safety
/// `cfg` must be a live configuration and `out` writable for one pointer.
#[no_mangle]
pub unsafe extern "C" fn evsim_config_render(cfg: *const EvsimConfig, out: *mut *mut c_char) -> EvsimStatus {
    guard(|| {
        let cfg = read_ref(cfg, "cfg")?;
        let text = CString::new(cfg.doc.render()).map_err(|e| Failure(EvsimStatus::Panic, e.to_string()))?;
        write_out(out, text.into_raw(), "out")
    })
}

/// Release a configuration. Null is ignored.
///
/// # Safety
/// `cfg` must be null or a configuration from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn evsim_config_free(cfg: *mut EvsimConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Validate the configuration, run it and return the log.
///
/// # Safety
/// `cfg` must be a live configuration and `out` writable for one pointer.
#[no_mangle]
pub unsafe extern "C" fn evsim_run(cfg: *const EvsimConfig, out: *mut *mut EvsimLog) -> EvsimStatus {
    guard(|| {
        let cfg = read_ref(cfg, "cfg")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let scenario = cfg.doc.clone().resolve(&cfg.base_dir)?;
        let log = run_scenario(&scenario)?;
        write_out(out, Box::into_raw(Box::new(EvsimLog { scenario, log })), "out")
    })
}

/// Number of logged records; 0 for a null log.
///
/// # Safety
/// `log` must be null or a live log.
#[no_mangle]
pub unsafe extern "C" fn evsim_log_len(log: *const EvsimLog) -> usize {
    log.as_ref().map_or(0, |l| l.log.records.len())
}

/// Copy record `index` into `out`.
///
/// # Safety
/// `log` must be a live log and `out` writable for one record.
#[no_mangle]
pub unsafe extern "C" fn evsim_log_record(log: *const EvsimLog, index: usize, out: *mut EvsimRecord) -> EvsimStatus {
    guard(|| {
        let log = read_ref(log, "log")?;
        let record = log.log.records.get(index).ok_or_else(|| {
            Failure(EvsimStatus::OutOfRange, format!("index {index} past {} records", log.log.records.len()))
        })?;
        write_out(out, EvsimRecord::from(record), "out")
    })
}

/// Tracking metrics of the run, scored as the `run` command scores them.
///
/// # Safety
/// `log` must be a live log and `out` writable for one value.
#[no_mangle]
pub unsafe extern "C" fn evsim_log_metrics(log: *const EvsimLog, out: *mut EvsimMetrics) -> EvsimStatus {
    guard(|| {
        let log = read_ref(log, "log")?;
        let m = run_metrics(&log.scenario, &log.log)?;
        let metrics = EvsimMetrics {
            rmse: m.rmse,
            settled: m.settling_time_s.is_some(),
            settling_time_s: m.settling_time_s.unwrap_or(f64::NAN),
            steady_state_value: m.steady_state_value,
            overshoot_pct: m.overshoot_pct,
        };
        write_out(out, metrics, "out")
    })
}

/// Whole-run figures.
///
/// # Safety
/// `log` must be a live log and `out` writable for one value.
#[no_mangle]
pub unsafe extern "C" fn evsim_log_summary(log: *const EvsimLog, out: *mut EvsimSummary) -> EvsimStatus {
    guard(|| {
        let s = read_ref(log, "log")?.log.summary;
        let summary = EvsimSummary {
            steps: s.steps,
            max_current_imbalance: s.max_current_imbalance,
            tractive_energy_j: s.tractive_energy_j,
            final_soc: s.final_soc,
        };
        write_out(out, summary, "out")
    })
}

/// Write the log as CSV.
///
/// # Safety
/// `log` must be a live log and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn evsim_log_write_csv(log: *const EvsimLog, path: *const c_char) -> EvsimStatus {
    guard(|| {
        let log = read_ref(log, "log")?;
        let path = read_str(path, "path")?;
        export_log(&log.log, Path::new(path))?;
        Ok(())
    })
}

/// Release a log. Null is ignored.
///
/// # Safety
/// `log` must be null or a log from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn evsim_log_free(log: *mut EvsimLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_status() {
        assert_eq!(EvsimStatus::from(&SimError::domain("x")), EvsimStatus::Domain);
        assert_eq!(EvsimStatus::from(&SimError::config("x")), EvsimStatus::Config);
        assert_eq!(EvsimStatus::from(&SimError::Singularity(0.5)), EvsimStatus::Numerical);
        assert_eq!(EvsimStatus::from(&SimError::Saturation { it: 1.0, q: 1.0 }), EvsimStatus::Numerical);
        assert_eq!(
            EvsimStatus::from(&SimError::NumericalBlowup { t: 0.0, detail: String::new() }),
            EvsimStatus::Numerical
        );
        assert_eq!(EvsimStatus::from(&SimError::Format { line: 1, msg: String::new() }), EvsimStatus::Format);
        let io = SimError::io("p", std::io::Error::other("x"));
        assert_eq!(EvsimStatus::from(&io), EvsimStatus::Io);
    }

    #[test]
    fn panic_becomes_status() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, EvsimStatus::Panic);
        let msg = unsafe { CStr::from_ptr(evsim_last_error()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
    }

    #[test]
    fn success_clears_error() {
        guard(|| Err(Failure(EvsimStatus::Domain, "bad".into())));
        assert!(!evsim_last_error().is_null());
        guard(|| Ok(()));
        assert!(evsim_last_error().is_null());
    }

    #[test]
    fn interior_nul_is_replaced() {
        set_last_error("a\0b".into());
        let msg = unsafe { CStr::from_ptr(evsim_last_error()) }.to_str().unwrap();
        assert_eq!(msg, "a b");
    }
}
