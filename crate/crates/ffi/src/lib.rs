//! C ABI over `qdecode`.
//!
//! Every fallible function returns a [`QdStatus`] and writes results through
//! out-pointers. On failure the thread's last error message is available from
//! [`qd_last_error_message`]. Objects are opaque handles created by
//! `qd_*_new`-style functions and released with the matching `qd_*_free`.
//! Panics never cross the boundary; they surface as `QD_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use qdecode::beam::{optimize_fsplit, BeamConfig, BeamMode};
use qdecode::closed_form::{m_auto_ln, rt2_full, TruncatedIntegralSpec};
use qdecode::decoder::{enumerate_paths, Dfa, TokenTable};
use qdecode::powerlaw::PowerLawSpec;
use qdecode::quantum::{
    default_rounds, prepare_advice, quantum_beam_decode, quantum_search_decode, AdviceState,
    Engine, SearchOutcome,
};
use qdecode::rankfreq::{fit_powerlaw, rank_frequency, FrameDump};
use qdecode::runtime::{rt1, speedup_exponent, RuntimeQuery};
use qdecode::QdError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument is outside the function's domain.
    Domain = 2,
    /// The request has no solution (e.g. an unreachable retained mass).
    Infeasible = 3,
    /// A resource budget (enumeration size, precision) was exceeded.
    Budget = 4,
    /// Input data could not be parsed or validated.
    Input = 5,
    /// Reading or writing a file failed.
    Io = 6,
    /// A string argument was not valid UTF-8.
    InvalidString = 7,
    /// An internal panic was caught at the boundary.
    Panic = 8,
}

/// Which amplitude-amplification engine a simulation uses.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdEngine {
    Dense = 0,
    Subspace = 1,
}

/// How a beam is specified in [`qd_beam_evaluate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdBeamMode {
    /// Probability cutoff p0.
    Cutoff = 0,
    /// Splitting exponent f_split.
    Split = 1,
    /// Retained fraction g.
    Fraction = 2,
    /// Capped width; the parameter is log10 of the maximum hypothesis count.
    Capped = 3,
    /// Constant retained mass C0 with optimized splitting exponent.
    Constant = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QdRt2 {
    pub log10_rt: f64,
    pub rt_prime: f64,
    pub log10_total: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QdFsplit {
    pub f_split: f64,
    pub mass: f64,
    pub rounds: u64,
    pub rounds_inverse_sqrt: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QdBeamResult {
    pub f_split: f64,
    pub log10_n_hyp: f64,
    pub log10_runtime: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QdSearchOutcome {
    /// Index of the returned hypothesis, or -1 if nothing was found.
    pub best_index: i64,
    pub best_score: f64,
    pub oracle_queries: u64,
    pub queries_to_best: u64,
    pub rounds: u32,
    pub success: bool,
    pub amplification_rounds: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QdFit {
    pub a: f64,
    pub b: f64,
    pub stderr_a: f64,
    pub stderr_b: f64,
    pub r2: f64,
    pub rank_lo: usize,
    pub rank_hi: usize,
}

/// Opaque power-law distribution.
pub struct QdPowerLaw(PowerLawSpec);

/// Opaque advice state over decoder hypotheses.
pub struct QdAdvice(AdviceState);

/// Opaque per-frame probability dump.
pub struct QdFrameDump(FrameDump);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Utf8,
    Lib(QdError),
}

impl From<QdError> for Failure {
    fn from(e: QdError) -> Self {
        Failure::Lib(e)
    }
}

fn status_of(e: &QdError) -> QdStatus {
    match e {
        QdError::Domain(_) | QdError::SingularExponent { .. } | QdError::OracleRefused(_) => {
            QdStatus::Domain
        }
        QdError::Infeasible(_)
        | QdError::EmptyBeam
        | QdError::EmptyLanguage { .. }
        | QdError::DeadPrefix => QdStatus::Infeasible,
        QdError::EnumerationOverflow { .. } | QdError::PrecisionExhausted { .. } => {
            QdStatus::Budget
        }
        QdError::Input { .. } => QdStatus::Input,
        QdError::Io(_) => QdStatus::Io,
    }
}

/// Run `body`, translating errors and panics into a status code.
fn guard<F>(body: F) -> QdStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QdStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            QdStatus::NullPointer
        }
        Ok(Err(Failure::Utf8)) => {
            set_error("string argument is not valid UTF-8".into());
            QdStatus::InvalidString
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            QdStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn engine(e: QdEngine) -> Engine {
    match e {
        QdEngine::Dense => Engine::Dense,
        QdEngine::Subspace => Engine::Subspace,
    }
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next `qd_*` call on the same thread.
#[no_mangle]
pub extern "C" fn qd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Speedup exponent `f(R, k)` of the expected runtime `R^(n f)`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn qd_speedup_exponent(r: u64, k: f64, out_f: *mut f64) -> QdStatus {
    guard(|| {
        *out(out_f, "out_f")? = speedup_exponent(r, k)?;
        Ok(())
    })
}

/// `log10` of the expected most-likely-parse runtime `(H_R(k/2)^2 / H_R(k))^n`.
///
/// # Safety
/// `out_log10` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn qd_rt1_log10(r: u64, k: f64, n: u32, out_log10: *mut f64) -> QdStatus {
    guard(|| {
        let q = RuntimeQuery::new(r, k, n)?;
        *out(out_log10, "out_log10")? = rt1(&q).log10();
        Ok(())
    })
}

/// Natural log of the truncated integral `M(R, k1, k2, c, n)` with the
/// threshold given as `ln c`. `k2 = 1` is handled by its limit.
///
/// # Safety
/// `out_ln` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn qd_m_closed_ln(
    r: u64,
    k1: f64,
    k2: f64,
    ln_c: f64,
    n: u32,
    out_ln: *mut f64,
) -> QdStatus {
    guard(|| {
        let spec = TruncatedIntegralSpec::from_ln_c(r, k1, k2, ln_c, n)?;
        *out(out_ln, "out_ln")? = m_auto_ln(&spec)?.ln();
        Ok(())
    })
}

/// Refined runtime bound split into the amplification term and the
/// low-probability remainder.
///
/// # Safety
/// `out_rt2` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn qd_rt2(r: u64, k: f64, n: u32, out_rt2: *mut QdRt2) -> QdStatus {
    guard(|| {
        let v = rt2_full(r, k, n)?;
        *out(out_rt2, "out_rt2")? = QdRt2 {
            log10_rt: v.rt.log10(),
            rt_prime: v.rt_prime,
            log10_total: v.total.log10(),
        };
        Ok(())
    })
}

/// Smallest splitting exponent retaining at least `c0` of the probability mass.
///
/// # Safety
/// `out_fsplit` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn qd_optimize_fsplit(
    r: u64,
    k: f64,
    n: u32,
    c0: f64,
    out_fsplit: *mut QdFsplit,
) -> QdStatus {
    guard(|| {
        let s = optimize_fsplit(r, k, n, c0)?;
        *out(out_fsplit, "out_fsplit")? = QdFsplit {
            f_split: s.f_split,
            mass: s.mass,
            rounds: s.rounds,
            rounds_inverse_sqrt: s.rounds_inverse_sqrt,
        };
        Ok(())
    })
}

/// Retained hypotheses and runtime bound of one beam configuration.
///
/// # Safety
/// `out_result` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn qd_beam_evaluate(
    r: u64,
    k: f64,
    n: u32,
    mode: QdBeamMode,
    param: f64,
    out_result: *mut QdBeamResult,
) -> QdStatus {
    guard(|| {
        let mode = match mode {
            QdBeamMode::Cutoff => BeamMode::Cutoff(param),
            QdBeamMode::Split => BeamMode::Split(param),
            QdBeamMode::Fraction => BeamMode::Fraction(param),
            QdBeamMode::Capped => BeamMode::Capped(param),
            QdBeamMode::Constant => BeamMode::Constant(param),
        };
        let row = BeamConfig { r, k, n, mode }.evaluate()?;
        *out(out_result, "out_result")? = QdBeamResult {
            f_split: row.f_split,
            log10_n_hyp: row.log10_n_hyp,
            log10_runtime: row.log10_runtime,
        };
        Ok(())
    })
}

/// Create `PowerLaw_R(k)`.
///
/// # Safety
/// `out_handle` must be null or writable; release the handle with
/// [`qd_power_law_free`].
#[no_mangle]
pub unsafe extern "C" fn qd_power_law_new(
    r: u64,
    k: f64,
    out_handle: *mut *mut QdPowerLaw,
) -> QdStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        *slot = Box::into_raw(Box::new(QdPowerLaw(PowerLawSpec::new(r, k)?)));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a pointer from [`qd_power_law_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qd_power_law_free(handle: *mut QdPowerLaw) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Probability of a one-based rank.
///
/// # Safety
/// `handle` must be a live power-law handle; `out_p` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn qd_power_law_pmf(
    handle: *const QdPowerLaw,
    rank: u64,
    out_p: *mut f64,
) -> QdStatus {
    guard(|| {
        let h = handle_ref(handle)?;
        *out(out_p, "out_p")? = h.0.pmf(rank)?;
        Ok(())
    })
}

unsafe fn handle_ref<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    handle(p, "handle")
}

/// Draw `count` one-based ranks into `out_ranks`, reproducibly for `seed`.
///
/// # Safety
/// `handle` must be a live power-law handle; `out_ranks` must have room for
/// `count` values.
#[no_mangle]
pub unsafe extern "C" fn qd_power_law_sample(
    handle: *const QdPowerLaw,
    seed: u64,
    count: usize,
    out_ranks: *mut u64,
) -> QdStatus {
    guard(|| {
        let h = handle_ref(handle)?;
        if count == 0 {
            return Ok(());
        }
        if out_ranks.is_null() {
            return Err(Failure::Null("out_ranks"));
        }
        let dst = std::slice::from_raw_parts_mut(out_ranks, count);
        dst.copy_from_slice(&h.0.sample(seed, count));
        Ok(())
    })
}

/// Advice state from explicit probabilities (summing to one) and scores.
///
/// # Safety
/// `probs` and `scores` must point to `len` values each; `out_handle` must be
/// null or writable. Release with [`qd_advice_free`].
#[no_mangle]
pub unsafe extern "C" fn qd_advice_from_parts(
    probs: *const f64,
    scores: *const f64,
    len: usize,
    out_handle: *mut *mut QdAdvice,
) -> QdStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        let p = slice(probs, len, "probs")?.to_vec();
        let s = slice(scores, len, "scores")?.to_vec();
        *slot = Box::into_raw(Box::new(QdAdvice(AdviceState::from_parts(p, s)?)));
        Ok(())
    })
}

/// Advice state over all `R^n` paths of a power-law decoder, scored by path
/// probability (most-likely-parse search).
///
/// # Safety
/// `out_handle` must be null or writable. Release with [`qd_advice_free`].
#[no_mangle]
pub unsafe extern "C" fn qd_advice_power_law_tree(
    r: usize,
    k: f64,
    n: usize,
    out_handle: *mut *mut QdAdvice,
) -> QdStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        let table = TokenTable::power_law(r, k, n)?;
        let dist = enumerate_paths(&Dfa::full(r), &table)?;
        *slot = Box::into_raw(Box::new(QdAdvice(prepare_advice(&dist, |e| e.ln_prob))));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a pointer from a `qd_advice_*` constructor not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn qd_advice_free(handle: *mut QdAdvice) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of hypotheses and the overlap `|⟨x|μ⟩|` of the best-scored one.
///
/// # Safety
/// `handle` must be a live advice handle; out-pointers null or writable.
#[no_mangle]
pub unsafe extern "C" fn qd_advice_info(
    handle: *const QdAdvice,
    out_len: *mut usize,
    out_overlap: *mut f64,
) -> QdStatus {
    guard(|| {
        let h = handle_ref(handle)?;
        *out(out_len, "out_len")? = h.0.len();
        *out(out_overlap, "out_overlap")? = h.0.overlap(h.0.best_scored());
        Ok(())
    })
}

fn outcome(o: SearchOutcome) -> QdSearchOutcome {
    QdSearchOutcome {
        best_index: o.best_index.map_or(-1, |i| i as i64),
        best_score: o.best_score,
        oracle_queries: o.oracle_queries,
        queries_to_best: o.queries_to_best,
        rounds: o.rounds,
        success: o.success,
        amplification_rounds: o.amplification_rounds,
    }
}

/// Quantum maximum finding with the advice state. `rounds = 0` selects the
/// default `⌈log2 N⌉ + 3`.
///
/// # Safety
/// `handle` must be a live advice handle; `out_outcome` null or writable.
#[no_mangle]
pub unsafe extern "C" fn qd_search_decode(
    handle: *const QdAdvice,
    rounds: u32,
    seed: u64,
    eng: QdEngine,
    out_outcome: *mut QdSearchOutcome,
) -> QdStatus {
    guard(|| {
        let h = handle_ref(handle)?;
        let rounds = if rounds == 0 {
            default_rounds(h.0.len())
        } else {
            rounds
        };
        *out(out_outcome, "out_outcome")? =
            outcome(quantum_search_decode(&h.0, rounds, seed, engine(eng))?);
        Ok(())
    })
}

/// Beam decoding: prune to probabilities `≥ p0`, amplify, then search.
/// `rounds = 0` selects the default for the retained set.
///
/// # Safety
/// `handle` must be a live advice handle; `out_outcome` null or writable.
#[no_mangle]
pub unsafe extern "C" fn qd_beam_decode(
    handle: *const QdAdvice,
    p0: f64,
    rounds: u32,
    seed: u64,
    eng: QdEngine,
    out_outcome: *mut QdSearchOutcome,
) -> QdStatus {
    guard(|| {
        let h = handle_ref(handle)?;
        let rounds = (rounds > 0).then_some(rounds);
        *out(out_outcome, "out_outcome")? =
            outcome(quantum_beam_decode(&h.0, p0, rounds, seed, engine(eng))?);
        Ok(())
    })
}

/// Read a frame dump (`.json` or CSV). Frames renormalized with a warning are
/// counted in `out_warnings`.
///
/// # Safety
/// `path` must be a NUL-terminated string; out-pointers null or writable.
/// Release with [`qd_frame_dump_free`].
#[no_mangle]
pub unsafe extern "C" fn qd_frame_dump_ingest(
    path: *const c_char,
    out_handle: *mut *mut QdFrameDump,
    out_warnings: *mut usize,
) -> QdStatus {
    guard(|| {
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| Failure::Utf8)?;
        let slot = out(out_handle, "out_handle")?;
        let warnings = out(out_warnings, "out_warnings")?;
        let ing = FrameDump::ingest(Path::new(path))?;
        *warnings = ing.warnings;
        *slot = Box::into_raw(Box::new(QdFrameDump(ing.dump)));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a pointer from [`qd_frame_dump_ingest`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qd_frame_dump_free(handle: *mut QdFrameDump) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of frames and of symbols per frame.
///
/// # Safety
/// `handle` must be a live dump handle; out-pointers null or writable.
#[no_mangle]
pub unsafe extern "C" fn qd_frame_dump_dims(
    handle: *const QdFrameDump,
    out_frames: *mut usize,
    out_symbols: *mut usize,
) -> QdStatus {
    guard(|| {
        let h = handle_ref(handle)?;
        *out(out_frames, "out_frames")? = h.0.len();
        *out(out_symbols, "out_symbols")? = h.0.symbols().len();
        Ok(())
    })
}

/// Mean probability by rank; `len` must equal the symbol count.
///
/// # Safety
/// `handle` must be a live dump handle; `out_profile` must have room for `len`.
#[no_mangle]
pub unsafe extern "C" fn qd_rank_frequency(
    handle: *const QdFrameDump,
    out_profile: *mut f64,
    len: usize,
) -> QdStatus {
    guard(|| {
        let h = handle_ref(handle)?;
        let prof = rank_frequency(&h.0);
        if len != prof.len() {
            return Err(Failure::Lib(QdError::Domain(format!(
                "profile buffer holds {len} values, dump has {} symbols",
                prof.len()
            ))));
        }
        if out_profile.is_null() {
            return Err(Failure::Null("out_profile"));
        }
        std::slice::from_raw_parts_mut(out_profile, len).copy_from_slice(&prof);
        Ok(())
    })
}

/// Log-log least-squares fit `a·r^(-b)` over the inclusive one-based ranks
/// `[rank_lo, rank_hi]` of a rank profile.
///
/// # Safety
/// `profile` must point to `len` values; `out_fit` null or writable.
#[no_mangle]
pub unsafe extern "C" fn qd_fit_powerlaw(
    profile: *const f64,
    len: usize,
    rank_lo: usize,
    rank_hi: usize,
    out_fit: *mut QdFit,
) -> QdStatus {
    guard(|| {
        let prof = slice(profile, len, "profile")?;
        let f = fit_powerlaw(prof, [rank_lo, rank_hi])?;
        *out(out_fit, "out_fit")? = QdFit {
            a: f.a,
            b: f.b,
            stderr_a: f.stderr_a,
            stderr_b: f.stderr_b,
            r2: f.r2,
            rank_lo: f.rank_range[0],
            rank_hi: f.rank_range[1],
        };
        Ok(())
    })
}
