//! Twisted sequential Monte Carlo over clone members.
//!
//! Target: `p(X_1:M | X0) p(Y | F^M)` with `F^M_n = log p(Xhat_n | X_0:M)`.
//! Members are generated letter by letter. At each letter the proposal
//! reweights the model's next-token distribution by the measurement
//! likelihood evaluated at the running fitness estimate
//! `F^(M+1, :l)_n = F^M_n + sum of per-letter contributions`, where a letter's
//! contribution is how much appending `Xhat_n` to the family raises that
//! letter's log-probability. Importance weights correct for the proposal,
//! particles are resampled when the effective sample size drops below
//! `sqrt(D)`, and each completed member is corrected with the exactly
//! recomputed fitness.

mod diagnostics;
mod enumerate;
mod resample;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use diagnostics::{write_trace_csv, SmcDiagnostics, TraceRow};
pub use enumerate::{enumerate_posterior_exact, ExactPosterior, ENUMERATION_LIMIT};
pub use resample::{
    ess, maybe_resample, resample_indices, ResampleCheck, ResamplingScheme, Weighted,
};

use crate::error::{Error, Result};
use crate::likelihood::{LikelihoodKernel, LikelihoodParams};
use crate::numerics::{log_sum_exp, normalize_log_weights, sample_index, sample_log_index};
use crate::rng::rng_from;
use crate::seq_model::{check_max_len, sample_clone, CloneLm, CloneStream, Sequence, Token};

/// Particle counts at or above this advance on the rayon pool.
const PARALLEL_PARTICLES: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmcConfig {
    /// Number of particles `D`.
    pub particles: usize,
    /// Members `M` to generate after the seed.
    pub members: usize,
    /// Letter cap per member; defaults to twice the seed length.
    pub max_len: Option<usize>,
    pub resampling: ResamplingScheme,
}

impl Default for SmcConfig {
    fn default() -> Self {
        SmcConfig {
            particles: 4,
            members: 6,
            max_len: None,
            resampling: ResamplingScheme::Multinomial,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::config("smc.particles", "need at least one particle"));
        }
        if self.members == 0 {
            return Err(Error::config("smc.members", "need at least one member"));
        }
        Ok(())
    }
}

/// Measured sequences and their normalized values.
///
/// Entries are stored in a canonical order so that results do not depend on
/// the order in which measurements were supplied.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConditioningSet {
    sequences: Vec<Sequence>,
    values: Vec<f64>,
}

impl ConditioningSet {
    pub fn new(sequences: Vec<Sequence>, values: Vec<f64>) -> Result<Self> {
        if sequences.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: sequences.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedInput(
                "measurement values must be finite".into(),
            ));
        }
        let mut pairs: Vec<(Sequence, f64)> = sequences.into_iter().zip(values).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let (sequences, values) = pairs.into_iter().unzip();
        Ok(ConditioningSet { sequences, values })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One in-progress clone with its importance weight and cached contexts.
#[derive(Clone, Debug)]
pub struct Particle<S> {
    /// Model state for `X_0:M` plus the current partial member.
    base: S,
    /// Same context with `Xhat_n` inserted before the partial member.
    appended: Vec<S>,
    log_weight: f64,
    /// `F^M_n` for the completed members.
    base_fitness: Vec<f64>,
    /// Running `F^(M+1, :l)_n`.
    partial_fitness: Vec<f64>,
    /// `log p(Y | partial_fitness)`, zero when there are fewer than two measurements.
    log_lik: f64,
    members: Vec<Sequence>,
    current: Vec<Token>,
    member_done: bool,
    truncated: usize,
}

impl<S: Clone> Weighted for Particle<S> {
    fn log_weight(&self) -> f64 {
        self.log_weight
    }

    fn set_log_weight(&mut self, w: f64) {
        self.log_weight = w;
    }
}

impl<S> Particle<S> {
    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    pub fn base_fitness(&self) -> &[f64] {
        &self.base_fitness
    }

    pub fn partial_fitness(&self) -> &[f64] {
        &self.partial_fitness
    }

    pub fn log_lik(&self) -> f64 {
        self.log_lik
    }

    pub fn members_done(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[Sequence] {
        &self.members
    }

    pub fn current_letters(&self) -> &[Token] {
        &self.current
    }

    pub fn is_member_done(&self) -> bool {
        self.member_done
    }
}

/// A completed particle.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedClone {
    pub clone: CloneStream,
    pub log_weight: f64,
    /// `F^M_n` of the completed clone.
    pub fitness: Vec<f64>,
    /// `log p(Y | F^M)`.
    pub log_lik: f64,
}

impl Weighted for WeightedClone {
    fn log_weight(&self) -> f64 {
        self.log_weight
    }

    fn set_log_weight(&mut self, w: f64) {
        self.log_weight = w;
    }
}

/// Weighted particle population after a full run.
#[derive(Clone, Debug)]
pub struct SmcRun {
    pub particles: Vec<WeightedClone>,
    pub diagnostics: SmcDiagnostics,
}

impl SmcRun {
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        let lw: Vec<f64> = self.particles.iter().map(|p| p.log_weight).collect();
        normalize_log_weights(&lw).ok_or(Error::DegenerateWeights)
    }

    /// Draws one particle with probability proportional to its weight.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&WeightedClone> {
        let w = self.normalized_weights()?;
        Ok(&self.particles[sample_index(&w, rng)])
    }
}

struct Twist {
    log_probs: Vec<f64>,
    bias: Vec<f64>,
    log_z: f64,
}

/// Letter-level twisted SMC sampler for one seed and conditioning set.
pub struct TwistedSmc<'a, M: CloneLm> {
    model: &'a M,
    x0: Sequence,
    cond: &'a ConditioningSet,
    kernel: Option<LikelihoodKernel>,
    config: SmcConfig,
    max_len: usize,
}

impl<'a, M: CloneLm> TwistedSmc<'a, M> {
    pub fn new(
        model: &'a M,
        x0: &Sequence,
        cond: &'a ConditioningSet,
        config: &SmcConfig,
        params: &LikelihoodParams,
    ) -> Result<Self> {
        config.validate()?;
        params.validate()?;
        model.validate_sequence(x0)?;
        for s in cond.sequences() {
            model.validate_sequence(s)?;
        }
        let max_len = config.max_len.unwrap_or(2 * x0.len());
        check_max_len(model, max_len)?;
        let kernel = if cond.len() >= 2 {
            Some(LikelihoodKernel::new(cond.values(), params)?)
        } else {
            None
        };
        Ok(TwistedSmc {
            model,
            x0: x0.clone(),
            cond,
            kernel,
            config: config.clone(),
            max_len,
        })
    }

    pub fn config(&self) -> &SmcConfig {
        &self.config
    }

    fn log_lik(&self, f: &[f64]) -> f64 {
        self.kernel.as_ref().map_or(0.0, |k| k.log_lik(f))
    }

    /// Rebuilds the appended contexts from the base state (which must sit at a
    /// member boundary) and returns the exact `F_n = log p(Xhat_n | clone)`.
    fn refresh_contexts(&self, base: &M::State) -> Result<(Vec<M::State>, Vec<f64>)> {
        let mut states = Vec::with_capacity(self.cond.len());
        let mut fitness = Vec::with_capacity(self.cond.len());
        for x in self.cond.sequences() {
            let mut s = base.clone();
            fitness.push(self.model.extend_with(&mut s, x)?);
            states.push(s);
        }
        Ok((states, fitness))
    }

    /// Particle holding only the seed, with `F^0` computed.
    pub fn initial_particle(&self) -> Result<Particle<M::State>> {
        let mut base = self.model.empty_state();
        self.model.extend_with(&mut base, &self.x0)?;
        let (appended, fitness) = self.refresh_contexts(&base)?;
        let log_lik = self.log_lik(&fitness);
        Ok(Particle {
            base,
            appended,
            log_weight: 0.0,
            partial_fitness: fitness.clone(),
            base_fitness: fitness,
            log_lik,
            members: Vec::new(),
            current: Vec::new(),
            member_done: false,
            truncated: 0,
        })
    }

    /// Per-measurement contributions `F^(M+1,(l))_n` for every candidate next
    /// token, as an `N x (A+1)` matrix. Impossible tokens and finished members
    /// contribute zero.
    pub fn letter_twist_contributions(&self, particle: &Particle<M::State>) -> Vec<Vec<f64>> {
        let vocab = self.model.alphabet().vocab_size();
        if particle.member_done {
            return vec![vec![0.0; vocab]; self.cond.len()];
        }
        let base = self.model.log_probs(&particle.base);
        let mut buf = vec![0.0; vocab];
        particle
            .appended
            .iter()
            .map(|s| {
                self.model.log_probs_into(s, &mut buf);
                base.iter()
                    .zip(&buf)
                    .map(|(&lp, &lq)| {
                        if lp == f64::NEG_INFINITY {
                            0.0
                        } else {
                            lq - lp
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Twisted log-probs, the bias `log p(Y | F + c_x)` per token and the
    /// log normalizer.
    fn twist(&self, particle: &Particle<M::State>, contributions: &[Vec<f64>]) -> Result<Twist> {
        let base = self.model.log_probs(&particle.base);
        let Some(kernel) = &self.kernel else {
            if base.iter().all(|&lp| lp == f64::NEG_INFINITY) {
                return Err(Error::DegenerateContext);
            }
            return Ok(Twist {
                bias: vec![0.0; base.len()],
                log_probs: base,
                log_z: 0.0,
            });
        };
        let mut f = particle.partial_fitness.clone();
        let mut bias = vec![f64::NEG_INFINITY; base.len()];
        let mut tilted = vec![f64::NEG_INFINITY; base.len()];
        for (x, &lp) in base.iter().enumerate() {
            if lp == f64::NEG_INFINITY {
                continue;
            }
            for (n, fi) in f.iter_mut().enumerate() {
                *fi = particle.partial_fitness[n] + contributions[n][x];
            }
            if f.iter().all(|v| v.is_finite()) {
                bias[x] = kernel.log_lik(&f);
                tilted[x] = lp + bias[x];
            }
        }
        let log_z = log_sum_exp(&tilted);
        if !log_z.is_finite() {
            return Err(Error::DegenerateContext);
        }
        tilted.iter_mut().for_each(|t| *t -= log_z);
        Ok(Twist {
            log_probs: tilted,
            bias,
            log_z,
        })
    }

    /// Next-token proposal: `p(x | ctx) p(Y | F^(:l) + c_x)`, normalized.
    pub fn twisted_next_letter_distribution(
        &self,
        particle: &Particle<M::State>,
    ) -> Result<Vec<f64>> {
        let c = self.letter_twist_contributions(particle);
        let twist = self.twist(particle, &c)?;
        Ok(twist.log_probs.into_iter().map(f64::exp).collect())
    }

    fn push_token(&self, particle: &mut Particle<M::State>, token: Token) -> Result<()> {
        self.model.push(&mut particle.base, token)?;
        for s in &mut particle.appended {
            self.model.push(s, token)?;
        }
        if token == self.model.alphabet().separator() {
            particle.member_done = true;
        } else {
            particle.current.push(token);
        }
        Ok(())
    }

    /// Extends one particle by a single token and returns its log-weight
    /// increment. Finished members are left untouched.
    pub fn advance<R: Rng + ?Sized>(
        &self,
        particle: &mut Particle<M::State>,
        rng: &mut R,
    ) -> Result<f64> {
        if particle.member_done {
            return Ok(0.0);
        }
        let sep = self.model.alphabet().separator();
        let contributions = self.letter_twist_contributions(particle);
        let forced = self.model.fixed_length().is_none() && particle.current.len() >= self.max_len;
        let (token, increment, new_log_lik) = if forced {
            particle.truncated += 1;
            let lp = self.model.log_probs(&particle.base)[sep as usize];
            let f: Vec<f64> = particle
                .partial_fitness
                .iter()
                .zip(&contributions)
                .map(|(fi, c)| fi + c[sep as usize])
                .collect();
            let ll = self.log_lik(&f);
            (sep, lp + ll - particle.log_lik, ll)
        } else {
            let Twist {
                log_probs,
                bias,
                log_z,
            } = self.twist(particle, &contributions)?;
            let token = sample_log_index(&log_probs, rng).ok_or(Error::DegenerateContext)?;
            // log p(x) - log q(x) + log p(Y|F^(:l+1)) - log p(Y|F^(:l)) = log Z - log p(Y|F^(:l))
            let increment = if self.kernel.is_some() {
                log_z - particle.log_lik
            } else {
                0.0
            };
            (token as Token, increment, bias[token])
        };
        for (fi, c) in particle.partial_fitness.iter_mut().zip(&contributions) {
            *fi += c[token as usize];
        }
        particle.log_lik = new_log_lik;
        particle.log_weight += increment;
        self.push_token(particle, token)?;
        Ok(increment)
    }

    /// Closes the member just terminated by a separator: recomputes the exact
    /// fitness under the completed clone, multiplies the weight by
    /// `p(Y | F) / p(Y | F~)` and rebuilds the cached contexts. Returns the
    /// log multiplier.
    pub fn end_of_member_correction(&self, particle: &mut Particle<M::State>) -> Result<f64> {
        if !particle.member_done {
            return Err(Error::MalformedInput(
                "member correction before the member is complete".into(),
            ));
        }
        particle
            .members
            .push(Sequence::new(std::mem::take(&mut particle.current)));
        let (appended, exact) = self.refresh_contexts(&particle.base)?;
        let exact_ll = self.log_lik(&exact);
        let multiplier = if self.kernel.is_some() {
            exact_ll - particle.log_lik
        } else {
            0.0
        };
        particle.log_weight += multiplier;
        particle.appended = appended;
        particle.partial_fitness = exact.clone();
        particle.base_fitness = exact;
        particle.log_lik = exact_ll;
        particle.member_done = false;
        Ok(multiplier)
    }

    /// One lockstep letter across all particles, with per-particle RNG streams
    /// derived from `(seed, member, letter, particle)`.
    pub fn smc_step(
        &self,
        particles: &mut [Particle<M::State>],
        seed: u64,
        member: usize,
        letter: usize,
    ) -> Result<Vec<f64>> {
        let step = |(d, p): (usize, &mut Particle<M::State>)| -> Result<f64> {
            let mut rng = rng_from(seed, &[member as u64, letter as u64, d as u64]);
            self.advance(p, &mut rng)
        };
        if particles.len() >= PARALLEL_PARTICLES {
            particles.par_iter_mut().enumerate().map(step).collect()
        } else {
            particles.iter_mut().enumerate().map(step).collect()
        }
    }

    fn check_resample(
        &self,
        particles: &mut Vec<Particle<M::State>>,
        seed: u64,
        member: usize,
        letter: Option<usize>,
        diag: &mut SmcDiagnostics,
    ) -> Result<()> {
        let log_weights: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
        let log_liks: Vec<f64> = particles.iter().map(|p| p.log_lik).collect();
        let tag = letter.map_or(u64::MAX, |l| l as u64);
        let mut rng = rng_from(seed, &[member as u64, tag, u64::MAX]);
        let check = maybe_resample(particles, self.config.resampling, &mut rng)?;
        if check.resampled {
            diag.resample_events += 1;
        }
        diag.trace.push(TraceRow {
            member,
            letter,
            ess: check.ess,
            resampled: check.resampled,
            log_weights,
            log_liks,
        });
        Ok(())
    }

    /// Runs the sampler to completion and returns the weighted population.
    pub fn run<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<SmcRun> {
        let seed = rng.next_u64();
        let d = self.config.particles;
        let init = self.initial_particle()?;
        let mut particles = vec![init; d];
        let mut diag = SmcDiagnostics::default();
        for member in 0..self.config.members {
            let mut letter = 0;
            while particles.iter().any(|p| !p.member_done) {
                self.smc_step(&mut particles, seed, member, letter)?;
                self.check_resample(&mut particles, seed, member, Some(letter), &mut diag)?;
                letter += 1;
            }
            let mut multipliers = Vec::with_capacity(d);
            for p in &mut particles {
                multipliers.push(self.end_of_member_correction(p)?);
            }
            diag.correction_log_multipliers.push(multipliers);
            self.check_resample(&mut particles, seed, member, None, &mut diag)?;
        }
        diag.truncations = particles.iter().map(|p| p.truncated).sum();
        let particles = particles
            .into_iter()
            .map(|p| WeightedClone {
                clone: CloneStream {
                    seed: self.x0.clone(),
                    members: p.members,
                },
                log_weight: p.log_weight,
                fitness: p.base_fitness,
                log_lik: p.log_lik,
            })
            .collect();
        Ok(SmcRun {
            particles,
            diagnostics: diag,
        })
    }
}

/// Samples one clone from the approximate posterior with twisted SMC.
pub fn sample_posterior_clone<M: CloneLm, R: RngCore + ?Sized>(
    model: &M,
    x0: &Sequence,
    cond: &ConditioningSet,
    config: &SmcConfig,
    params: &LikelihoodParams,
    rng: &mut R,
) -> Result<(CloneStream, SmcDiagnostics)> {
    let run = TwistedSmc::new(model, x0, cond, config, params)?.run(rng)?;
    let chosen = run.draw(rng)?;
    let mut diag = run.diagnostics.clone();
    diag.final_log_lik = chosen.log_lik;
    Ok((chosen.clone.clone(), diag))
}

/// Baseline: `particles` clones from the prior, weighted by `p(Y | F^M)`.
pub fn importance_sample_prior<M: CloneLm, R: RngCore + ?Sized>(
    model: &M,
    x0: &Sequence,
    cond: &ConditioningSet,
    config: &SmcConfig,
    params: &LikelihoodParams,
    rng: &mut R,
) -> Result<SmcRun> {
    config.validate()?;
    let kernel = if cond.len() >= 2 {
        Some(LikelihoodKernel::new(cond.values(), params)?)
    } else {
        None
    };
    let seed = rng.next_u64();
    let mut particles = Vec::with_capacity(config.particles);
    let mut truncations = 0;
    for d in 0..config.particles {
        let mut r = rng_from(seed, &[d as u64]);
        let sampled = sample_clone(model, x0, config.members, &mut r, config.max_len)?;
        truncations += sampled.truncated;
        let state = model.stream_state(&sampled.clone)?;
        let fitness = cond
            .sequences()
            .iter()
            .map(|x| model.sequence_logprob_from(&state, x))
            .collect::<Result<Vec<f64>>>()?;
        let log_lik = kernel.as_ref().map_or(0.0, |k| k.log_lik(&fitness));
        particles.push(WeightedClone {
            clone: sampled.clone,
            log_weight: log_lik,
            fitness,
            log_lik,
        });
    }
    Ok(SmcRun {
        particles,
        diagnostics: SmcDiagnostics {
            truncations,
            ..Default::default()
        },
    })
}
