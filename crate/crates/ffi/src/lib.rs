//! C ABI for the aerofed simulator.
//!
//! Every fallible call returns an [`AerofedStatus`]; on anything but
//! `AEROFED_STATUS_OK` the calling thread's message is available from
//! [`aerofed_last_error`]. Handles are opaque and owned by the caller once
//! created; release them with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use aerofed::afl::{aggregate, Submission};
use aerofed::experiment::{self, compute_metrics, DetectionMetrics, ExperimentConfig};
use aerofed::gan::{anomaly_score, classify, load_checkpoint, GanNets, ScorerConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AerofedStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Shape = 4,
    Numeric = 5,
    Format = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Detection metrics with anomalous as the positive class.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AerofedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_count: u64,
    pub tn: u64,
}

impl From<DetectionMetrics> for AerofedMetrics {
    fn from(m: DetectionMetrics) -> Self {
        AerofedMetrics {
            precision: m.precision,
            recall: m.recall,
            accuracy: m.accuracy,
            f1: m.f1,
            tp: m.counts.tp as u64,
            fp: m.counts.fp as u64,
            fn_count: m.counts.fn_ as u64,
            tn: m.counts.tn as u64,
        }
    }
}

/// Experiment configuration handle.
pub struct AerofedConfig(ExperimentConfig);

/// A loaded GAN checkpoint plus its scorer settings and threshold.
pub struct AerofedDetector {
    nets: GanNets,
    scorer: ScorerConfig,
}

struct Failure {
    status: AerofedStatus,
    message: String,
}

impl From<aerofed::Error> for Failure {
    fn from(e: aerofed::Error) -> Self {
        use aerofed::Error as E;
        let status = match &e {
            E::Config(_) => AerofedStatus::Config,
            E::Shape { .. } => AerofedStatus::Shape,
            E::Numeric { .. } => AerofedStatus::Numeric,
            E::Format(_) => AerofedStatus::Format,
            E::Io(_) => AerofedStatus::Io,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn fail(status: AerofedStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AerofedStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            AerofedStatus::Ok
        }
        Ok(Err(e)) => {
            set_last_error(&e.message);
            e.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(&format!("internal panic: {msg}"));
            AerofedStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(AerofedStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(AerofedStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(AerofedStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(AerofedStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(AerofedStatus::NullPointer, format!("{what} is null")))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn aerofed_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a configuration holding the defaults.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn aerofed_config_new(out: *mut *mut AerofedConfig) -> AerofedStatus {
    guard(|| {
        let slot = out.as_mut().ok_or_else(|| fail(AerofedStatus::NullPointer, "out is null"))?;
        *slot = Box::into_raw(Box::new(AerofedConfig(ExperimentConfig::default())));
        Ok(())
    })
}

/// Reads a `key = value` configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as for [`aerofed_config_new`].
#[no_mangle]
pub unsafe extern "C" fn aerofed_config_load(path: *const c_char, out: *mut *mut AerofedConfig) -> AerofedStatus {
    guard(|| {
        let slot = out.as_mut().ok_or_else(|| fail(AerofedStatus::NullPointer, "out is null"))?;
        let cfg = ExperimentConfig::load(Path::new(text(path, "path")?))?;
        *slot = Box::into_raw(Box::new(AerofedConfig(cfg)));
        Ok(())
    })
}

/// Sets one dotted key, e.g. `gan.K` or `run.method`.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn aerofed_config_set(
    cfg: *mut AerofedConfig,
    key: *const c_char,
    value: *const c_char,
) -> AerofedStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| fail(AerofedStatus::NullPointer, "cfg is null"))?;
        cfg.0.set(text(key, "key")?, text(value, "value")?)?;
        Ok(())
    })
}

/// Copies the value of `key` into `buf` including the terminating NUL.
/// `needed` (optional) receives the required buffer size; a short buffer
/// yields `AEROFED_STATUS_BUFFER_TOO_SMALL` and leaves `buf` untouched.
///
/// # Safety
/// `cfg` must come from this library; `buf` must hold `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn aerofed_config_get(
    cfg: *const AerofedConfig,
    key: *const c_char,
    buf: *mut c_char,
    buf_len: usize,
    needed: *mut usize,
) -> AerofedStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let key = text(key, "key")?;
        let value = cfg
            .0
            .get(key)
            .ok_or_else(|| fail(AerofedStatus::Config, format!("unknown key '{key}'")))?;
        let bytes = value.as_bytes();
        if let Some(n) = needed.as_mut() {
            *n = bytes.len() + 1;
        }
        if buf_len < bytes.len() + 1 {
            return Err(fail(
                AerofedStatus::BufferTooSmall,
                format!("'{key}' needs {} bytes", bytes.len() + 1),
            ));
        }
        let dst = output(buf as *mut u8, buf_len, "buf")?;
        dst[..bytes.len()].copy_from_slice(bytes);
        dst[bytes.len()] = 0;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn aerofed_config_free(cfg: *mut AerofedConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs one experiment into `out_dir` and reports the final detection
/// metrics. `metrics` may be null.
///
/// # Safety
/// `cfg` must come from this library; `out_dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn aerofed_run(
    cfg: *const AerofedConfig,
    out_dir: *const c_char,
    metrics: *mut AerofedMetrics,
) -> AerofedStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let dir = Path::new(text(out_dir, "out_dir")?);
        let outcome = experiment::run(&cfg.0, dir)?;
        experiment::plots::emit_plot_data(dir)?;
        if let Some(m) = metrics.as_mut() {
            *m = outcome.metrics.into();
        }
        Ok(())
    })
}

/// Precision, recall, accuracy and F1 from 0/1 labels and predictions
/// (non-zero = anomalous).
///
/// # Safety
/// `labels` and `predictions` must each hold `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aerofed_compute_metrics(
    labels: *const u8,
    predictions: *const u8,
    len: usize,
    out: *mut AerofedMetrics,
) -> AerofedStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| fail(AerofedStatus::NullPointer, "out is null"))?;
        let y: Vec<bool> = input(labels, len, "labels")?.iter().map(|&b| b != 0).collect();
        let p: Vec<bool> = input(predictions, len, "predictions")?.iter().map(|&b| b != 0).collect();
        *out = compute_metrics(&y, &p)?.into();
        Ok(())
    })
}

/// Shard-size-weighted mean of `n_members` parameter vectors of length
/// `len`, stored row after row in `params`. Members with shard size 0 are
/// ignored; if every size is 0 the call fails with `AEROFED_STATUS_CONFIG`.
///
/// # Safety
/// `params` must hold `n_members * len` values, `shard_sizes` `n_members`
/// values, and `out` room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn aerofed_aggregate(
    params: *const f64,
    shard_sizes: *const u64,
    n_members: usize,
    len: usize,
    out: *mut f64,
) -> AerofedStatus {
    guard(|| {
        let total = n_members
            .checked_mul(len)
            .ok_or_else(|| fail(AerofedStatus::Shape, "n_members * len overflows"))?;
        let flat = input(params, total, "params")?;
        let sizes = input(shard_sizes, n_members, "shard_sizes")?;
        let subs: Vec<Submission> = (0..n_members)
            .map(|i| Submission {
                uav: i,
                gen: flat[i * len..(i + 1) * len].to_vec().into(),
                disc: Vec::new().into(),
                shard_size: sizes[i] as usize,
            })
            .collect();
        let (mean, _) = aggregate(&subs)?
            .ok_or_else(|| fail(AerofedStatus::Config, "no member with a non-empty shard"))?;
        output(out, len, "out")?.copy_from_slice(&mean);
        Ok(())
    })
}

/// Loads `<dir>/<stem>.{gen.bin,disc.bin,sidecar}` as written by a run,
/// e.g. stem `final.global` under a run's `checkpoints/`.
///
/// # Safety
/// `dir` and `stem` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aerofed_detector_load(
    dir: *const c_char,
    stem: *const c_char,
    out: *mut *mut AerofedDetector,
) -> AerofedStatus {
    guard(|| {
        let slot = out.as_mut().ok_or_else(|| fail(AerofedStatus::NullPointer, "out is null"))?;
        let (nets, scorer) = load_checkpoint(Path::new(text(dir, "dir")?), text(stem, "stem")?)?;
        *slot = Box::into_raw(Box::new(AerofedDetector { nets, scorer }));
        Ok(())
    })
}

/// # Safety
/// `det` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn aerofed_detector_free(det: *mut AerofedDetector) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}

/// Number of features each row must have; 0 for a null handle.
///
/// # Safety
/// `det` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn aerofed_detector_features(det: *const AerofedDetector) -> usize {
    det.as_ref().map_or(0, |d| d.nets.data_dim())
}

/// Calibrated threshold stored with the checkpoint; NaN for a null handle.
///
/// # Safety
/// `det` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn aerofed_detector_threshold(det: *const AerofedDetector) -> f64 {
    det.as_ref().map_or(f64::NAN, |d| d.scorer.threshold)
}

unsafe fn score_rows<'a>(
    det: *const AerofedDetector,
    rows: *const f64,
    n_rows: usize,
    n_features: usize,
) -> Result<(&'a AerofedDetector, Vec<f64>), Failure> {
    let det: &'a AerofedDetector = handle(det, "det")?;
    if n_features != det.nets.data_dim() {
        return Err(fail(
            AerofedStatus::Shape,
            format!("detector expects {} features, got {n_features}", det.nets.data_dim()),
        ));
    }
    let total = n_rows
        .checked_mul(n_features)
        .ok_or_else(|| fail(AerofedStatus::Shape, "n_rows * n_features overflows"))?;
    let flat = input(rows, total, "rows")?;
    let scores = flat
        .chunks(n_features.max(1))
        .take(n_rows)
        .map(|x| anomaly_score(x, &det.nets, &det.scorer))
        .collect::<aerofed::Result<Vec<f64>>>()?;
    Ok((det, scores))
}

/// Anomaly score for each of `n_rows` normalized rows (higher = more anomalous).
///
/// # Safety
/// `rows` must hold `n_rows * n_features` values and `scores` `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn aerofed_detector_score(
    det: *const AerofedDetector,
    rows: *const f64,
    n_rows: usize,
    n_features: usize,
    scores: *mut f64,
) -> AerofedStatus {
    guard(|| {
        let (_, s) = score_rows(det, rows, n_rows, n_features)?;
        output(scores, n_rows, "scores")?.copy_from_slice(&s);
        Ok(())
    })
}

/// Writes 1 for rows scoring strictly above the stored threshold, else 0.
///
/// # Safety
/// As for [`aerofed_detector_score`], with `flags` holding `n_rows` bytes.
#[no_mangle]
pub unsafe extern "C" fn aerofed_detector_classify(
    det: *const AerofedDetector,
    rows: *const f64,
    n_rows: usize,
    n_features: usize,
    flags: *mut u8,
) -> AerofedStatus {
    guard(|| {
        let (det, s) = score_rows(det, rows, n_rows, n_features)?;
        let out = output(flags, n_rows, "flags")?;
        for (o, v) in out.iter_mut().zip(s) {
            *o = u8::from(classify(v, det.scorer.threshold));
        }
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aerofed_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

