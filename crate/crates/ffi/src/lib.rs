//! C ABI over `insdiff`.
//!
//! Every call returns an [`InsdiffStatus`]. On failure a description is kept
//! per thread and read with [`insdiff_last_error`]. Sequences cross the
//! boundary as NUL-terminated symbol strings in the model's alphabet;
//! outputs go to caller-owned buffers whose capacity is passed alongside.
//! Positions are 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use insdiff::align::count_alignments;
use insdiff::denoiser::Checkpoint;
use insdiff::objective::target_distribution;
use insdiff::sampler::{generate, shrink, ShrinkMode};
use insdiff::scorer::{score_deletion_set, score_single_deletions};
use insdiff::seqcore::Sequence;
use insdiff::Error;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsdiffStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Output buffer too small; nothing was written.
    BufferTooSmall = 3,
    Io = 4,
    Parse = 5,
    /// Arguments outside the operation's domain.
    InvalidArgument = 6,
    Checkpoint = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

/// Deletion strategy for [`insdiff_shrink`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsdiffShrinkMode {
    Sample = 0,
    Greedy = 1,
}

/// A loaded checkpoint. Opaque to C.
pub struct InsdiffModel {
    ck: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(InsdiffStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => InsdiffStatus::Io,
            Error::Parse(_) | Error::UnknownSymbol { .. } | Error::Json(_) => InsdiffStatus::Parse,
            Error::Checkpoint(_) => InsdiffStatus::Checkpoint,
            _ => InsdiffStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> InsdiffStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => InsdiffStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            InsdiffStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(InsdiffStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(InsdiffStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn model_arg<'a>(p: *const InsdiffModel) -> Result<&'a InsdiffModel, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(InsdiffStatus::NullPointer, "model is null".into()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(InsdiffStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn write_f64s(values: &[f64], out: *mut f64, capacity: usize) -> Result<(), Failure> {
    non_null(out, "output buffer")?;
    if values.len() > capacity {
        return Err(Failure(
            InsdiffStatus::BufferTooSmall,
            format!("need {} values, buffer holds {capacity}", values.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn write_str(text: &str, out: *mut c_char, capacity: usize) -> Result<(), Failure> {
    non_null(out, "output buffer")?;
    if text.len() + 1 > capacity {
        return Err(Failure(
            InsdiffStatus::BufferTooSmall,
            format!("need {} bytes including NUL, buffer holds {capacity}", text.len() + 1),
        ));
    }
    std::ptr::copy_nonoverlapping(text.as_ptr(), out as *mut u8, text.len());
    *out.add(text.len()) = 0;
    Ok(())
}

impl InsdiffModel {
    fn encode(&self, text: &str) -> Result<Sequence, Failure> {
        Ok(self.ck.alphabet.encode(text)?)
    }
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn insdiff_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn insdiff_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Loads a checkpoint. On success `*out` owns a handle to release with
/// [`insdiff_model_free`].
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn insdiff_model_load(
    path: *const c_char,
    out: *mut *mut InsdiffModel,
) -> InsdiffStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        non_null(out, "out")?;
        let ck = Checkpoint::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(InsdiffModel { ck }));
        Ok(())
    })
}

/// Releases a handle from [`insdiff_model_load`]. Null is ignored.
///
/// # Safety
/// `model` must come from [`insdiff_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn insdiff_model_free(model: *mut InsdiffModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes the model's alphabet symbols (NUL-terminated) into `out`.
///
/// # Safety
/// `model` must be a live handle; `out` must hold `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn insdiff_model_alphabet(
    model: *const InsdiffModel,
    out: *mut c_char,
    capacity: usize,
) -> InsdiffStatus {
    guard(|| {
        let model = model_arg(model)?;
        write_str(&model.ck.alphabet.as_string(), out, capacity)
    })
}

/// `log q(x without position i | x, M = 1)` for every position `i`;
/// writes `strlen(seq)` values.
///
/// # Safety
/// `model` must be a live handle, `seq` a NUL-terminated string and `out`
/// must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn insdiff_score(
    model: *const InsdiffModel,
    seq: *const c_char,
    out: *mut f64,
    capacity: usize,
) -> InsdiffStatus {
    guard(|| {
        let model = model_arg(model)?;
        let x = model.encode(str_arg(seq, "seq")?)?;
        let table = score_single_deletions(&x, &model.ck.model)?;
        let values: Vec<f64> = table.records.iter().map(|r| r.log_prob).collect();
        write_f64s(&values, out, capacity)
    })
}

/// Log-probability of deleting exactly `positions` from `seq`. Exact for
/// at most `max_exact` positions, otherwise a `n_mc`-order Monte-Carlo
/// estimate; `*exact` reports which.
///
/// # Safety
/// Pointers must be valid; `positions` must hold `n_positions` entries.
#[no_mangle]
pub unsafe extern "C" fn insdiff_score_set(
    model: *const InsdiffModel,
    seq: *const c_char,
    positions: *const usize,
    n_positions: usize,
    max_exact: usize,
    n_mc: usize,
    seed: u64,
    out_log_prob: *mut f64,
    out_exact: *mut bool,
) -> InsdiffStatus {
    guard(|| {
        let model = model_arg(model)?;
        let x = model.encode(str_arg(seq, "seq")?)?;
        non_null(positions, "positions")?;
        non_null(out_log_prob, "out_log_prob")?;
        non_null(out_exact, "out_exact")?;
        let set = std::slice::from_raw_parts(positions, n_positions);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = score_deletion_set(&x, set, &model.ck.model, max_exact, n_mc, &mut rng)?;
        *out_log_prob = s.log_prob;
        *out_exact = s.exact;
        Ok(())
    })
}

/// Deletes `m` letters from `seq`, conditioning on the remaining budget at
/// every step; the NUL-terminated result goes to `out`.
///
/// # Safety
/// Pointers must be valid; `out` must hold `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn insdiff_shrink(
    model: *const InsdiffModel,
    seq: *const c_char,
    m: usize,
    mode: InsdiffShrinkMode,
    seed: u64,
    out: *mut c_char,
    capacity: usize,
) -> InsdiffStatus {
    guard(|| {
        let model = model_arg(model)?;
        let x = model.encode(str_arg(seq, "seq")?)?;
        let mode = match mode {
            InsdiffShrinkMode::Sample => ShrinkMode::Sample,
            InsdiffShrinkMode::Greedy => ShrinkMode::Greedy,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (y, _) = shrink(&x, m, &model.ck.model, mode, Some(model.ck.window), &mut rng)?;
        write_str(&model.ck.alphabet.decode(&y), out, capacity)
    })
}

/// Samples one sequence of `length` letters with `correctors` corrector
/// rounds per deletion.
///
/// # Safety
/// `model` must be a live handle; `out` must hold `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn insdiff_generate(
    model: *const InsdiffModel,
    length: usize,
    correctors: usize,
    seed: u64,
    out: *mut c_char,
    capacity: usize,
) -> InsdiffStatus {
    guard(|| {
        let model = model_arg(model)?;
        let ck = &model.ck;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = generate(length, &ck.model, &ck.schedule, &ck.pi, correctors, Some(ck.window), &mut rng)?;
        write_str(&ck.alphabet.decode(&g.sequence), out, capacity)
    })
}

/// Natural log of the number of ways `x0` embeds in `xt` as a subsequence
/// (`-inf` when it does not). Compares raw bytes, so no alphabet is needed.
///
/// # Safety
/// `x0` and `xt` must be NUL-terminated strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn insdiff_count_alignments_ln(
    x0: *const c_char,
    xt: *const c_char,
    out: *mut f64,
) -> InsdiffStatus {
    guard(|| {
        let x0 = str_arg(x0, "x0")?;
        let xt = str_arg(xt, "xt")?;
        non_null(out, "out")?;
        *out = count_alignments(x0.as_bytes(), xt.as_bytes()).ln();
        Ok(())
    })
}

/// Exact posterior over which letter of `xt` was inserted last given the
/// clean `x0`; writes `strlen(xt)` probabilities.
///
/// # Safety
/// `x0` and `xt` must be NUL-terminated strings; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn insdiff_target_distribution(
    x0: *const c_char,
    xt: *const c_char,
    out: *mut f64,
    capacity: usize,
) -> InsdiffStatus {
    guard(|| {
        let x0 = Sequence::from_letters(str_arg(x0, "x0")?.as_bytes().to_vec());
        let xt = Sequence::from_letters(str_arg(xt, "xt")?.as_bytes().to_vec());
        let d = target_distribution(&x0, &xt)?;
        write_f64s(&d.probs(), out, capacity)
    })
}
