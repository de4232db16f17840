//! C ABI over `ewqof-core`.
//!
//! Configurations and reports are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! an [`EwqofStatus`]; on failure a description is available from
//! [`ewqof_last_error_message`] on the same thread. Panics never cross the
//! boundary and are reported as [`EwqofStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ewqof_core::config::SimConfig;
use ewqof_core::engine::{run, SimError};
use ewqof_core::metrics::{
    beta_ewqof, beta_maxqof, parent_score, select_parent, EstimatorParams, LinkStats, NodeId, ParentView, Qof,
    QofHistory, Strategy, SwapDecision,
};
use ewqof_core::report::MetricsReport;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwqofStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Parse = 4,
    Topology = 5,
    FormationTimeout = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwqofStrategy {
    Ewqof = 0,
    MaxQof = 1,
}

impl From<EwqofStrategy> for Strategy {
    fn from(s: EwqofStrategy) -> Strategy {
        match s {
            EwqofStrategy::Ewqof => Strategy::Ewqof,
            EwqofStrategy::MaxQof => Strategy::MaxQof,
        }
    }
}

/// Opaque simulation configuration.
pub struct EwqofConfig(SimConfig);

/// Opaque result of one run.
pub struct EwqofReport(MetricsReport);

/// A child's view of one candidate parent.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EwqofParentView {
    pub parent_id: u32,
    pub rank: u32,
    /// Advertised queue occupancy in [0, 1].
    pub advertised_qof: f64,
    pub advertised_beta: f64,
    /// Transmissions attempted over the link.
    pub tnop: u64,
    /// Successful transmissions, at most `tnop`.
    pub tnopss: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EwqofEstimatorParams {
    pub alpha: f64,
    pub theta_th: f64,
    pub delta_th: f64,
    pub eta: f64,
    pub etx_worst: f64,
}

impl From<EwqofEstimatorParams> for EstimatorParams {
    fn from(p: EwqofEstimatorParams) -> EstimatorParams {
        EstimatorParams {
            alpha: p.alpha,
            theta_th: p.theta_th,
            delta_th: p.delta_th,
            eta: p.eta,
            etx_worst: p.etx_worst,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: EwqofStatus, msg: impl Into<String>) -> EwqofStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> EwqofStatus) -> EwqofStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(EwqofStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ewqof_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// A configuration holding the reference defaults.
#[no_mangle]
pub extern "C" fn ewqof_config_default() -> *mut EwqofConfig {
    Box::into_raw(Box::new(EwqofConfig(SimConfig::default())))
}

/// Parses a TOML configuration; absent keys take their defaults.
///
/// # Safety
/// `toml` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ewqof_config_from_toml(toml: *const c_char, out: *mut *mut EwqofConfig) -> EwqofStatus {
    guard(|| {
        if toml.is_null() || out.is_null() {
            return fail(EwqofStatus::NullPointer, "null argument");
        }
        let text = match CStr::from_ptr(toml).to_str() {
            Ok(t) => t,
            Err(e) => return fail(EwqofStatus::InvalidArgument, format!("configuration is not UTF-8: {e}")),
        };
        match SimConfig::from_toml_str(text) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(EwqofConfig(c)));
                EwqofStatus::Ok
            }
            Err(e) => fail(EwqofStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `config` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ewqof_config_free(config: *mut EwqofConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

unsafe fn with_config(config: *mut EwqofConfig, f: impl FnOnce(&mut SimConfig)) -> EwqofStatus {
    match config.as_mut() {
        Some(c) => {
            f(&mut c.0);
            EwqofStatus::Ok
        }
        None => fail(EwqofStatus::NullPointer, "null configuration"),
    }
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewqof_config_set_node_count(config: *mut EwqofConfig, node_count: usize) -> EwqofStatus {
    with_config(config, |c| c.node_count = node_count)
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewqof_config_set_strategy(config: *mut EwqofConfig, strategy: EwqofStrategy) -> EwqofStatus {
    with_config(config, |c| c.strategy = strategy.into())
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewqof_config_set_duration_slotframes(
    config: *mut EwqofConfig,
    slotframes: u64,
) -> EwqofStatus {
    with_config(config, |c| c.duration_slotframes = slotframes)
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewqof_config_set_history(config: *mut EwqofConfig, k: usize) -> EwqofStatus {
    with_config(config, |c| c.k = k)
}

/// Sets the estimator thresholds in one call.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ewqof_config_set_estimator(
    config: *mut EwqofConfig,
    params: EwqofEstimatorParams,
) -> EwqofStatus {
    with_config(config, |c| {
        c.alpha = params.alpha;
        c.theta_th = params.theta_th;
        c.delta_th = params.delta_th;
        c.eta = params.eta;
        c.etx_worst = params.etx_worst;
    })
}

/// Returns `InvalidConfig` with every violation in the error message.
///
/// # Safety
/// `config` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ewqof_config_validate(config: *const EwqofConfig) -> EwqofStatus {
    guard(|| match config.as_ref() {
        None => fail(EwqofStatus::NullPointer, "null configuration"),
        Some(c) => {
            let v = c.0.validate();
            if v.is_valid() {
                EwqofStatus::Ok
            } else {
                fail(EwqofStatus::InvalidConfig, v.to_string())
            }
        }
    })
}

/// Runs one simulation with `seed` and stores a new report in `out`.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ewqof_run(config: *const EwqofConfig, seed: u64, out: *mut *mut EwqofReport) -> EwqofStatus {
    guard(|| {
        let (Some(c), false) = (config.as_ref(), out.is_null()) else {
            return fail(EwqofStatus::NullPointer, "null argument");
        };
        match run(&c.0, seed) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(EwqofReport(r)));
                EwqofStatus::Ok
            }
            Err(e) => {
                let status = match e {
                    SimError::InvalidConfig(_) => EwqofStatus::InvalidConfig,
                    SimError::Topology { .. } => EwqofStatus::Topology,
                    SimError::FormationTimeout { .. } => EwqofStatus::FormationTimeout,
                };
                fail(status, e.to_string())
            }
        }
    })
}

/// # Safety
/// `report` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ewqof_report_free(report: *mut EwqofReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Packet delivery ratio; NaN for a null handle.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ewqof_report_pdr(report: *const EwqofReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.pdr)
}

/// Delivered payload bits per second; NaN for a null handle.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ewqof_report_throughput_bps(report: *const EwqofReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.throughput_bps)
}

/// Mean per-node energy in mJ; NaN for a null handle.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ewqof_report_avg_energy_mj(report: *const EwqofReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.avg_energy_mj)
}

/// Parent changes during measurement.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ewqof_report_total_swaps(report: *const EwqofReport) -> u64 {
    report.as_ref().map_or(0, |r| r.0.total_swaps)
}

/// Packets generated during measurement.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ewqof_report_generated(report: *const EwqofReport) -> u64 {
    report.as_ref().map_or(0, |r| r.0.generated)
}

/// Packets that reached the root.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ewqof_report_delivered(report: *const EwqofReport) -> u64 {
    report.as_ref().map_or(0, |r| r.0.delivered)
}

/// Nodes in the run, root included.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ewqof_report_node_count(report: *const EwqofReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.node_count)
}

/// Full report as JSON; release with [`ewqof_string_free`]. Null on error.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ewqof_report_to_json(report: *const EwqofReport) -> *mut c_char {
    match report.as_ref() {
        None => {
            set_error("null report");
            ptr::null_mut()
        }
        Some(r) => CString::new(r.0.to_json()).map_or(ptr::null_mut(), CString::into_raw),
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ewqof_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn ewqof_estimator_params_default() -> EwqofEstimatorParams {
    let p = EstimatorParams::default();
    EwqofEstimatorParams {
        alpha: p.alpha,
        theta_th: p.theta_th,
        delta_th: p.delta_th,
        eta: p.eta,
        etx_worst: p.etx_worst,
    }
}

unsafe fn history(values: *const f64, len: usize, k: usize) -> Result<QofHistory, EwqofStatus> {
    if values.is_null() && len > 0 {
        return Err(fail(EwqofStatus::NullPointer, "null samples"));
    }
    let slice = if len == 0 { &[][..] } else { std::slice::from_raw_parts(values, len) };
    QofHistory::from_values(k, slice).map_err(|e| fail(EwqofStatus::InvalidArgument, e.to_string()))
}

unsafe fn estimate(
    values: *const f64,
    len: usize,
    k: usize,
    out: *mut f64,
    f: impl FnOnce(&QofHistory) -> Result<f64, ewqof_core::metrics::MetricError>,
) -> EwqofStatus {
    guard(|| {
        if out.is_null() {
            return fail(EwqofStatus::NullPointer, "null output");
        }
        let h = match history(values, len, k) {
            Ok(h) => h,
            Err(s) => return s,
        };
        match f(&h) {
            Ok(b) => {
                *out = b;
                EwqofStatus::Ok
            }
            Err(e) => fail(EwqofStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Exponentially weighted congestion level of the last `k` of `len`
/// samples, oldest first.
///
/// # Safety
/// `values` must point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ewqof_beta_ewqof(
    values: *const f64,
    len: usize,
    k: usize,
    alpha: f64,
    out: *mut f64,
) -> EwqofStatus {
    if !(alpha > 0.0 && alpha < 1.0) {
        return fail(EwqofStatus::InvalidArgument, format!("alpha must lie in (0, 1), got {alpha}"));
    }
    estimate(values, len, k, out, |h| beta_ewqof(h, alpha))
}

/// Largest of the last `k` of `len` samples.
///
/// # Safety
/// `values` must point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ewqof_beta_maxqof(values: *const f64, len: usize, k: usize, out: *mut f64) -> EwqofStatus {
    estimate(values, len, k, out, beta_maxqof)
}

fn to_view(v: &EwqofParentView) -> Result<ParentView, EwqofStatus> {
    let qof = Qof::new(v.advertised_qof).map_err(|e| fail(EwqofStatus::InvalidArgument, e.to_string()))?;
    let link = LinkStats::new(v.tnop, v.tnopss).map_err(|e| fail(EwqofStatus::InvalidArgument, e.to_string()))?;
    Ok(ParentView {
        parent_id: NodeId(v.parent_id),
        rank: v.rank,
        advertised_qof: qof,
        advertised_beta: v.advertised_beta,
        link,
    })
}

/// `rank + ETX + eta * QOF` of one candidate.
///
/// # Safety
/// `view` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ewqof_parent_score(
    view: *const EwqofParentView,
    eta: f64,
    etx_worst: f64,
    out: *mut f64,
) -> EwqofStatus {
    guard(|| {
        let (Some(v), false) = (view.as_ref(), out.is_null()) else {
            return fail(EwqofStatus::NullPointer, "null argument");
        };
        match to_view(v) {
            Ok(v) => {
                *out = parent_score(&v, eta, etx_worst);
                EwqofStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Runs parent selection. On success `*swap` tells whether to leave
/// `current`, and `*new_parent` holds the chosen id when it does.
///
/// # Safety
/// `current`, `swap` and `new_parent` must be valid; `candidates` must point
/// to `count` views.
#[no_mangle]
pub unsafe extern "C" fn ewqof_select_parent(
    current: *const EwqofParentView,
    candidates: *const EwqofParentView,
    count: usize,
    params: EwqofEstimatorParams,
    swap: *mut bool,
    new_parent: *mut u32,
) -> EwqofStatus {
    guard(|| {
        let Some(cur) = current.as_ref() else {
            return fail(EwqofStatus::NullPointer, "null current parent");
        };
        if swap.is_null() || new_parent.is_null() || (candidates.is_null() && count > 0) {
            return fail(EwqofStatus::NullPointer, "null argument");
        }
        let params: EstimatorParams = params.into();
        if let Err(e) = params.validate() {
            return fail(EwqofStatus::InvalidArgument, e.to_string());
        }
        let raw = if count == 0 { &[][..] } else { std::slice::from_raw_parts(candidates, count) };
        let cur = match to_view(cur) {
            Ok(v) => v,
            Err(s) => return s,
        };
        let cands = match raw.iter().map(to_view).collect::<Result<Vec<_>, _>>() {
            Ok(c) => c,
            Err(s) => return s,
        };
        match select_parent(&cur, &cands, &params) {
            SwapDecision::Keep => *swap = false,
            SwapDecision::SwapTo(id) => {
                *swap = true;
                *new_parent = id.0;
            }
        }
        EwqofStatus::Ok
    })
}
