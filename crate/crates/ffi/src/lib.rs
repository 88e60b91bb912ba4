//! C interface to clonebo.
//!
//! Objects cross the boundary as opaque handles that the caller frees with the
//! matching `*_free` function. Every fallible call returns a [`ClbStatus`];
//! on failure a message for the calling thread is available from
//! [`clb_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::Arc;

use clonebo::likelihood::{log_marginal_likelihood, LikelihoodParams};
use clonebo::posterior::{sample_fitness_posterior, FitnessSample};
use clonebo::rng::rng_from;
use clonebo::seq_model::{CloneLm, CloneModel, Sequence, Token};
use clonebo::smc::{ConditioningSet, SmcConfig};
use clonebo::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Parse = 4,
    InvalidSequence = 5,
    LengthMismatch = 6,
    InsufficientData = 7,
    Numerical = 8,
    Io = 9,
    Panic = 10,
    Other = 11,
}

/// A clone model.
pub struct ClbModel {
    inner: Arc<CloneModel>,
}

/// A fitness function drawn from the posterior.
pub struct ClbFitness {
    inner: FitnessSample<CloneModel>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> ClbStatus {
    match err {
        Error::Config { .. } => ClbStatus::Config,
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) | Error::MalformedInput(_) => {
            ClbStatus::Parse
        }
        Error::InvalidSequence(_) => ClbStatus::InvalidSequence,
        Error::LengthMismatch { .. } => ClbStatus::LengthMismatch,
        Error::InsufficientData { .. } => ClbStatus::InsufficientData,
        Error::DegenerateContext | Error::DegenerateWeights => ClbStatus::Numerical,
        Error::Io(_) | Error::WouldOverwrite(_) => ClbStatus::Io,
        _ => ClbStatus::Other,
    }
}

struct Fail(ClbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ClbStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ClbStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ClbStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(ClbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice_or_empty<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn tokens(p: *const u16, len: usize, what: &str) -> Result<Sequence, Fail> {
    Ok(Sequence::new(
        slice_or_empty::<Token>(p, len, what)?.to_vec(),
    ))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn clb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn clb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model from the JSON text written by `clonebo fit-model`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn clb_model_from_json(
    json: *const c_char,
    out: *mut *mut ClbModel,
) -> ClbStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(ClbStatus::InvalidUtf8, e.to_string()))?;
        let model = CloneModel::from_json(text)?;
        *out = Box::into_raw(Box::new(ClbModel {
            inner: Arc::new(model),
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`clb_model_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn clb_model_free(model: *mut ClbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of letters; tokens are `0..size`.
///
/// # Safety
/// `model` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn clb_model_alphabet_size(model: *const ClbModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.alphabet().size())
}

/// `log p(x | x0)` for one new member after the seed.
///
/// # Safety
/// `model` must be live; `x0` and `x` must hold `x0_len` and `x_len` tokens.
#[no_mangle]
pub unsafe extern "C" fn clb_model_sequence_logprob(
    model: *const ClbModel,
    x0: *const u16,
    x0_len: usize,
    x: *const u16,
    x_len: usize,
    out: *mut f64,
) -> ClbStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x0 = tokens(x0, x0_len, "x0")?;
        let x = tokens(x, x_len, "x")?;
        let mut state = m.inner.empty_state();
        m.inner.extend_with(&mut state, &x0)?;
        *out = m.inner.sequence_logprob_from(&state, &x)?;
        Ok(())
    })
}

/// Closed-form `log p(Y | F)` (up to a constant) with noise scale
/// `sigma_tilde / sqrt(n_cond_max)`.
///
/// # Safety
/// `f` and `y` must each hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clb_log_marginal_likelihood(
    f: *const f64,
    y: *const f64,
    n: usize,
    sigma_tilde: f64,
    n_cond_max: usize,
    out: *mut f64,
) -> ClbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let f = slice_or_empty(f, n, "f")?;
        let y = slice_or_empty(y, n, "y")?;
        let params = LikelihoodParams {
            sigma_tilde,
            n_cond_max,
            ..LikelihoodParams::default()
        };
        *out = log_marginal_likelihood(f, y, &params)?;
        Ok(())
    })
}

/// Draws a fitness function from the posterior given measured sequences.
///
/// The `n_cond` measured sequences are packed back to back in `cond_tokens`
/// with lengths in `cond_lens`; `values` holds their normalized measurements.
///
/// # Safety
/// All arrays must hold the stated number of elements; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn clb_sample_posterior_fitness(
    model: *const ClbModel,
    x0: *const u16,
    x0_len: usize,
    cond_tokens: *const u16,
    cond_lens: *const usize,
    values: *const f64,
    n_cond: usize,
    particles: usize,
    members: usize,
    sigma_tilde: f64,
    seed: u64,
    out: *mut *mut ClbFitness,
) -> ClbStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x0 = tokens(x0, x0_len, "x0")?;
        let lens = slice_or_empty(cond_lens, n_cond, "cond_lens")?;
        let total: usize = lens.iter().sum();
        let flat = slice_or_empty(cond_tokens, total, "cond_tokens")?;
        let mut seqs = Vec::with_capacity(n_cond);
        let mut at = 0;
        for &l in lens {
            seqs.push(Sequence::new(flat[at..at + l].to_vec()));
            at += l;
        }
        let values = slice_or_empty(values, n_cond, "values")?.to_vec();
        let cond = ConditioningSet::new(seqs, values)?;
        let config = SmcConfig {
            particles,
            members,
            ..SmcConfig::default()
        };
        let params = LikelihoodParams {
            sigma_tilde,
            n_cond_max: n_cond.max(1),
            ..LikelihoodParams::default()
        };
        let mut rng = rng_from(seed, &[]);
        let f =
            sample_fitness_posterior(Arc::clone(&m.inner), &x0, &cond, &config, &params, &mut rng)?;
        *out = Box::into_raw(Box::new(ClbFitness { inner: f }));
        Ok(())
    })
}

/// Evaluates the sampled fitness at `x`.
///
/// # Safety
/// `fitness` must be live; `x` must hold `len` tokens; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clb_fitness_eval(
    fitness: *const ClbFitness,
    x: *const u16,
    len: usize,
    out: *mut f64,
) -> ClbStatus {
    guard(|| {
        let f = fitness.as_ref().ok_or_else(|| null("fitness"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f.inner.eval(&tokens(x, len, "x")?)?;
        Ok(())
    })
}

/// Number of sampled clone members behind this fitness.
///
/// # Safety
/// `fitness` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn clb_fitness_members(fitness: *const ClbFitness) -> usize {
    fitness
        .as_ref()
        .map_or(0, |f| f.inner.clone_stream().members.len())
}

/// # Safety
/// `fitness` must come from [`clb_sample_posterior_fitness`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn clb_fitness_free(fitness: *mut ClbFitness) {
    if !fitness.is_null() {
        drop(Box::from_raw(fitness));
    }
}
