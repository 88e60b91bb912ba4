//! Fitness functions read off sampled clones.
//!
//! A sampled clone `X_0:M` defines `F(X) = log p(X | X_0:M)`: the model's
//! probability that `X` would be the next member. Sampling the clone and then
//! querying the predictive integrates over the latent family without ever
//! representing it.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::likelihood::LikelihoodParams;
use crate::numerics::kl_divergence_log;
use crate::seq_model::{sample_clone, CloneLm, CloneStream, LatentClone, Sequence};
use crate::smc::{sample_posterior_clone, ConditioningSet, SmcConfig, SmcDiagnostics};

/// A queryable fitness function backed by one sampled clone.
///
/// Evaluations are memoized; the cache is shared behind a mutex so a sample
/// can be queried from several threads.
pub struct FitnessSample<M: CloneLm> {
    model: Arc<M>,
    clone: CloneStream,
    context: M::State,
    cache: Mutex<HashMap<Sequence, f64>>,
    diagnostics: Option<SmcDiagnostics>,
}

impl<M: CloneLm> std::fmt::Debug for FitnessSample<M> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FitnessSample")
            .field("clone", &self.clone)
            .finish_non_exhaustive()
    }
}

impl<M: CloneLm> FitnessSample<M> {
    pub fn new(model: Arc<M>, clone: CloneStream) -> Result<Self> {
        let context = model.stream_state(&clone)?;
        Ok(FitnessSample {
            model,
            clone,
            context,
            cache: Mutex::new(HashMap::new()),
            diagnostics: None,
        })
    }

    pub fn clone_stream(&self) -> &CloneStream {
        &self.clone
    }

    pub fn model(&self) -> &Arc<M> {
        &self.model
    }

    /// SMC diagnostics when the clone came from the posterior sampler.
    pub fn diagnostics(&self) -> Option<&SmcDiagnostics> {
        self.diagnostics.as_ref()
    }

    /// `F(X) = log p(X | clone)`.
    pub fn eval(&self, x: &Sequence) -> Result<f64> {
        if let Some(&v) = self.cache.lock().expect("fitness cache poisoned").get(x) {
            return Ok(v);
        }
        let v = self.eval_uncached(x)?;
        self.cache
            .lock()
            .expect("fitness cache poisoned")
            .insert(x.clone(), v);
        Ok(v)
    }

    /// Evaluation that bypasses the cache.
    pub fn eval_uncached(&self, x: &Sequence) -> Result<f64> {
        self.model.validate_sequence(x)?;
        self.model.sequence_logprob_from(&self.context, x)
    }

    pub fn eval_many(&self, xs: &[Sequence]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.eval(x)).collect()
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("fitness cache poisoned").len()
    }
}

/// Fitness drawn from the prior: an unconditioned clone of `members` members.
pub fn sample_fitness_prior<M: CloneLm, R: RngCore + ?Sized>(
    model: Arc<M>,
    x0: &Sequence,
    members: usize,
    rng: &mut R,
) -> Result<FitnessSample<M>> {
    let sampled = sample_clone(model.as_ref(), x0, members, rng, None)?;
    FitnessSample::new(model, sampled.clone)
}

/// Fitness drawn from the approximate posterior given measurements.
pub fn sample_fitness_posterior<M: CloneLm, R: RngCore + ?Sized>(
    model: Arc<M>,
    x0: &Sequence,
    cond: &ConditioningSet,
    config: &SmcConfig,
    params: &LikelihoodParams,
    rng: &mut R,
) -> Result<FitnessSample<M>> {
    let (clone, diag) = sample_posterior_clone(model.as_ref(), x0, cond, config, params, rng)?;
    let mut sample = FitnessSample::new(model, clone)?;
    sample.diagnostics = Some(diag);
    Ok(sample)
}

/// Mean per-position `KL(large || small)` between next-token predictives for
/// a fresh member, walking the first `n_positions` tokens of `eval` followed
/// by its separator.
pub fn predictive_kl<M: CloneLm + ?Sized>(
    model: &M,
    small: &CloneStream,
    large: &CloneStream,
    eval: &Sequence,
    n_positions: usize,
) -> Result<f64> {
    if small.seed != large.seed {
        return Err(Error::MalformedInput("contexts must share the seed".into()));
    }
    model.validate_sequence(eval)?;
    let mut s = model.stream_state(small)?;
    let mut l = model.stream_state(large)?;
    let n = n_positions.min(eval.len() + 1);
    if n == 0 {
        return Ok(0.0);
    }
    let sep = model.alphabet().separator();
    let mut total = 0.0;
    for pos in 0..n {
        let ps = model.log_probs(&s);
        let pl = model.log_probs(&l);
        total += kl_divergence_log(&pl, &ps);
        let t = eval.get(pos).copied().unwrap_or(sep);
        model.push(&mut s, t)?;
        model.push(&mut l, t)?;
    }
    Ok(total / n as f64)
}

/// Mean per-position `KL(latent || predictive)` of the model's next-member
/// predictive given `context`, for a fixed-length model whose letters are
/// independent across positions given the latent.
pub fn latent_kl<M: CloneLm + ?Sized>(
    model: &M,
    latent: &LatentClone,
    context: &CloneStream,
) -> Result<f64> {
    let len = latent.length();
    if model.fixed_length() != Some(len) {
        return Err(Error::LengthMismatch {
            expected: model.fixed_length().unwrap_or(0),
            got: len,
        });
    }
    if len == 0 {
        return Ok(0.0);
    }
    let mut state = model.stream_state(context)?;
    let a = model.alphabet().size();
    let along = latent.argmax();
    let mut total = 0.0;
    for (pos, row) in latent.probs.iter().enumerate() {
        let lp = model.log_probs(&state);
        let truth: Vec<f64> = row.iter().map(|p| p.ln()).collect();
        total += kl_divergence_log(&truth, &lp[..a]);
        model.push(&mut state, along[pos])?;
    }
    Ok(total / len as f64)
}
