//! C ABI over `tsaga-core`.
//!
//! Every function returns a [`TsagaStatus`]. On failure the message is kept in
//! a thread-local slot readable with [`tsaga_last_error`]. Handles are opaque
//! and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::slice;

use tsaga_core::channel::MacObservation;
use tsaga_core::harness::{emit_outputs, run_experiment, ExperimentConfig};
use tsaga_core::tsaga::{denoise_bg, TemporalRecovery, TrackerConfig, Variant};
use tsaga_core::{ChainParams, Error, SensingOperator};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TsagaStatus {
    Ok = 0,
    NullPointer = 1,
    DimensionMismatch = 2,
    InvalidParameter = 3,
    NonFinite = 4,
    Io = 5,
    Config = 6,
    Diverged = 7,
    Data = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TsagaVariant {
    TsaGa = 0,
    NoSupport = 1,
    NoAmplitude = 2,
    Memoryless = 3,
}

impl From<TsagaVariant> for Variant {
    fn from(v: TsagaVariant) -> Self {
        match v {
            TsagaVariant::TsaGa => Variant::TsaGa,
            TsagaVariant::NoSupport => Variant::NoSupport,
            TsagaVariant::NoAmplitude => Variant::NoAmplitude,
            TsagaVariant::Memoryless => Variant::Memoryless,
        }
    }
}

/// Markov prior parameters, field for field as in the core library.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TsagaChainParams {
    pub lambda: f64,
    pub gamma: f64,
    pub p01: f64,
    pub p10: f64,
    pub beta: f64,
    pub xi: f64,
    pub epsilon: f64,
}

impl From<TsagaChainParams> for ChainParams {
    fn from(p: TsagaChainParams) -> Self {
        ChainParams {
            lambda: p.lambda,
            gamma: p.gamma,
            p01: p.p01,
            p10: p.p10,
            beta: p.beta,
            xi: p.xi,
            epsilon: p.epsilon,
        }
    }
}

impl From<ChainParams> for TsagaChainParams {
    fn from(p: ChainParams) -> Self {
        TsagaChainParams {
            lambda: p.lambda,
            gamma: p.gamma,
            p01: p.p01,
            p10: p.p10,
            beta: p.beta,
            xi: p.xi,
            epsilon: p.epsilon,
        }
    }
}

/// Per-round recovery summary.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TsagaRecoveryInfo {
    pub v_post: f64,
    pub iterations: usize,
    pub diverged: bool,
    pub em_ran: bool,
}

/// Opaque partial-DCT sensing operator.
pub struct TsagaOperator(SensingOperator);

/// Opaque multi-round recovery engine.
pub struct TsagaTracker(TemporalRecovery);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| {
        let mut v = msg.into_bytes();
        v.retain(|b| *b != 0);
        v.push(0);
        *e.borrow_mut() = v;
    });
}

fn status_of(e: &Error) -> TsagaStatus {
    match e {
        Error::DimensionMismatch { .. } => TsagaStatus::DimensionMismatch,
        Error::InvalidParameter(_) => TsagaStatus::InvalidParameter,
        Error::NonFinite(_) => TsagaStatus::NonFinite,
        Error::Io { .. } => TsagaStatus::Io,
        Error::Config(_) => TsagaStatus::Config,
        Error::Diverged { .. } => TsagaStatus::Diverged,
        Error::Idx { .. } | Error::Partition(_) | Error::Csv(_) | Error::Json(_) => TsagaStatus::Data,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (TsagaStatus, String)>) -> TsagaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TsagaStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside tsaga".into());
            TsagaStatus::Panic
        }
    }
}

fn lift(e: Error) -> (TsagaStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (TsagaStatus, String) {
    (TsagaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], (TsagaStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], (TsagaStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

fn check(expected: usize, actual: usize) -> Result<(), (TsagaStatus, String)> {
    if expected == actual {
        Ok(())
    } else {
        Err(lift(Error::DimensionMismatch { expected, actual }))
    }
}

unsafe fn path_arg(ptr: *const c_char, what: &str) -> Result<PathBuf, (TsagaStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| (TsagaStatus::InvalidParameter, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tsaga_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let body = msg.len().saturating_sub(1);
        if !buf.is_null() && len > 0 {
            let n = body.min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        body
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tsaga_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Stationary parameters: `p10` and `xi` are derived from the others.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tsaga_chain_params_stationary(
    lambda: f64,
    gamma: f64,
    p01: f64,
    beta: f64,
    epsilon: f64,
    out: *mut TsagaChainParams,
) -> TsagaStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ChainParams::stationary(lambda, gamma, p01, beta, epsilon).map_err(lift)?.into();
        Ok(())
    })
}

/// Scalar Bernoulli-Gaussian MMSE denoiser.
///
/// # Safety
/// `mean` and `var` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tsaga_denoise_bg(
    z: f64,
    tau: f64,
    pi: f64,
    m: f64,
    phi: f64,
    mean: *mut f64,
    var: *mut f64,
) -> TsagaStatus {
    guard(|| {
        let mean = mean.as_mut().ok_or_else(|| null("mean"))?;
        let var = var.as_mut().ok_or_else(|| null("var"))?;
        if !(tau > 0.0) || !(0.0..=1.0).contains(&pi) || !(phi >= 0.0) {
            return Err((TsagaStatus::InvalidParameter, "need tau > 0, pi in [0, 1], phi >= 0".into()));
        }
        let (a, b) = denoise_bg(z, tau, pi, m, phi);
        *mean = a;
        *var = b;
        Ok(())
    })
}

/// Builds the operator used for round `round` of a run seeded with `seed`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tsaga_operator_new(
    n: usize,
    s: usize,
    seed: u64,
    round: u64,
    out: *mut *mut TsagaOperator,
) -> TsagaStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let op = SensingOperator::for_round(n, s, seed, round).map_err(lift)?;
        *out = Box::into_raw(Box::new(TsagaOperator(op)));
        Ok(())
    })
}

/// # Safety
/// `op` must be null or a handle from [`tsaga_operator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tsaga_operator_free(op: *mut TsagaOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// `y = A x` with `x` of length `n` and `y` of length `s`.
///
/// # Safety
/// Pointers must reference arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn tsaga_operator_forward(
    op: *const TsagaOperator,
    x: *const f64,
    n: usize,
    y: *mut f64,
    s: usize,
) -> TsagaStatus {
    guard(|| {
        let op = &op.as_ref().ok_or_else(|| null("op"))?.0;
        check(op.n(), n)?;
        check(op.s(), s)?;
        let r = op.forward(input(x, n, "x")?).map_err(lift)?;
        output(y, s, "y")?.copy_from_slice(&r);
        Ok(())
    })
}

/// `x = Aᵀ y`.
///
/// # Safety
/// Pointers must reference arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn tsaga_operator_adjoint(
    op: *const TsagaOperator,
    y: *const f64,
    s: usize,
    x: *mut f64,
    n: usize,
) -> TsagaStatus {
    guard(|| {
        let op = &op.as_ref().ok_or_else(|| null("op"))?.0;
        check(op.n(), n)?;
        check(op.s(), s)?;
        let r = op.adjoint(input(y, s, "y")?).map_err(lift)?;
        output(x, n, "x")?.copy_from_slice(&r);
        Ok(())
    })
}

/// Recovery engine over signals of length `n` with default tracking
/// settings (parameter learning on).
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsaga_tracker_new(
    n: usize,
    params: *const TsagaChainParams,
    variant: TsagaVariant,
    out: *mut *mut TsagaTracker,
) -> TsagaStatus {
    guard(|| {
        let params = *params.as_ref().ok_or_else(|| null("params"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let t = TemporalRecovery::new(n, params.into(), variant.into(), TrackerConfig::default()).map_err(lift)?;
        *out = Box::into_raw(Box::new(TsagaTracker(t)));
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle from [`tsaga_tracker_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tsaga_tracker_free(t: *mut TsagaTracker) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Recovers the next round's signal from `y = A x + noise` and advances the
/// engine. `info` may be null.
///
/// # Safety
/// Pointers must reference arrays of the stated lengths.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn tsaga_tracker_recover(
    t: *mut TsagaTracker,
    op: *const TsagaOperator,
    y: *const f64,
    s: usize,
    sigma2: f64,
    x_hat: *mut f64,
    n: usize,
    info: *mut TsagaRecoveryInfo,
) -> TsagaStatus {
    guard(|| {
        let t = &mut t.as_mut().ok_or_else(|| null("tracker"))?.0;
        let op = &op.as_ref().ok_or_else(|| null("op"))?.0;
        check(op.s(), s)?;
        check(op.n(), n)?;
        let obs = MacObservation {
            y: input(y, s, "y")?.to_vec(),
            sigma2,
            round: t.rounds_done() + 1,
        };
        let out = output(x_hat, n, "x_hat")?;
        let o = t.recover(&obs, op, None).map_err(lift)?;
        out.copy_from_slice(&o.result.x_hat);
        if let Some(info) = info.as_mut() {
            *info = TsagaRecoveryInfo {
                v_post: o.result.v_post,
                iterations: o.result.iterations_run,
                diverged: o.result.flags.diverged,
                em_ran: o.em_ran,
            };
        }
        Ok(())
    })
}

/// Current parameter estimates.
///
/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsaga_tracker_params(t: *const TsagaTracker, out: *mut TsagaChainParams) -> TsagaStatus {
    guard(|| {
        let t = &t.as_ref().ok_or_else(|| null("tracker"))?.0;
        *out.as_mut().ok_or_else(|| null("out"))? = (*t.params()).into();
        Ok(())
    })
}

/// Runs the experiment described by the TOML file at `config_path` and
/// writes its outputs to `out_dir` (or the configured directory when null).
/// Returns `TSAGA_STATUS_DIVERGED` if any round was flagged.
///
/// # Safety
/// Strings must be NUL-terminated or null (`out_dir` only).
#[no_mangle]
pub unsafe extern "C" fn tsaga_run_experiment(config_path: *const c_char, out_dir: *const c_char) -> TsagaStatus {
    guard(|| {
        let path = path_arg(config_path, "config_path")?;
        let mut cfg = ExperimentConfig::load(&path).map_err(lift)?;
        if !out_dir.is_null() {
            cfg.out_dir = path_arg(out_dir, "out_dir")?;
        }
        let out = run_experiment(&cfg).map_err(lift)?;
        emit_outputs(&out, &cfg.out_dir).map_err(lift)?;
        if out.has_divergence() {
            return Err((
                TsagaStatus::Diverged,
                out.aborted.clone().unwrap_or_else(|| "recovery diverged in at least one round".into()),
            ));
        }
        Ok(())
    })
}
