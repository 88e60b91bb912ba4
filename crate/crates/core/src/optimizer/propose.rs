use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pool::MeasurementPool;
use crate::error::{Error, Result};
use crate::likelihood::LikelihoodParams;
use crate::posterior::{sample_fitness_posterior, FitnessSample};
use crate::seq_model::{CloneLm, Sequence, Token};
use crate::smc::{ConditioningSet, SmcConfig};

/// Candidate draws a mutation-based proposer attempts before giving up.
pub const RETRY_CAP: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneticParams {
    pub tournament_size: usize,
    pub mutation_prob: f64,
}

impl Default for GeneticParams {
    fn default() -> Self {
        GeneticParams {
            tournament_size: 2,
            mutation_prob: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    /// Seeds are drawn from the `top_k` best measurements.
    pub top_k: usize,
    /// Hill-climb rounds per seed.
    pub max_substitutions: usize,
    /// Largest conditioning subset; also tempers the likelihood scale.
    pub n_cond_max: usize,
    pub budget: usize,
    pub smc: SmcConfig,
    pub likelihood: LikelihoodParams,
    /// Positions that may be substituted; all positions when absent.
    pub mask: Option<Vec<usize>>,
    pub genetic: GeneticParams,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            top_k: 4,
            max_substitutions: 3,
            n_cond_max: 75,
            budget: 50,
            smc: SmcConfig::default(),
            likelihood: LikelihoodParams::default(),
            mask: None,
            genetic: GeneticParams::default(),
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::config("bo.top_k", "must be at least 1"));
        }
        if self.max_substitutions == 0 {
            return Err(Error::config("bo.max_substitutions", "must be at least 1"));
        }
        if self.n_cond_max == 0 {
            return Err(Error::config("bo.n_cond_max", "must be at least 1"));
        }
        if self.genetic.tournament_size == 0 {
            return Err(Error::config(
                "bo.genetic.tournament_size",
                "must be at least 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.genetic.mutation_prob) {
            return Err(Error::config(
                "bo.genetic.mutation_prob",
                "must lie in [0, 1]",
            ));
        }
        if let Some(mask) = &self.mask {
            if mask.is_empty() {
                return Err(Error::config("bo.mask", "must allow at least one position"));
            }
        }
        self.smc.validate()?;
        self.likelihood_params().validate()
    }

    /// Likelihood parameters with the scale tempered by `n_cond_max`.
    pub fn likelihood_params(&self) -> LikelihoodParams {
        LikelihoodParams {
            n_cond_max: self.n_cond_max,
            ..self.likelihood.clone()
        }
    }

    /// Mutable positions of a sequence of length `len`.
    pub fn positions(&self, len: usize) -> Vec<usize> {
        match &self.mask {
            Some(mask) => mask.iter().copied().filter(|&p| p < len).collect(),
            None => (0..len).collect(),
        }
    }
}

/// A proposed sequence and where it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub sequence: Sequence,
    /// Pool index of the sequence it was derived from.
    pub seed_index: usize,
    /// Predicted fitness under the sampled `F` (Thompson only).
    pub predicted: Option<f64>,
    /// `F` at the seed (Thompson only).
    pub seed_fitness: Option<f64>,
    /// Whether the unmeasured-neighbor fallback was used.
    pub fallback: bool,
}

/// Top `n_cond_max` pool entries by `log p(Xhat_n | X0)`, earlier entries
/// first on ties. A measured copy of `X0` is always kept.
pub fn select_conditioning_subset<M: CloneLm + ?Sized>(
    model: &M,
    x0: &Sequence,
    pool: &MeasurementPool,
    n_cond_max: usize,
) -> Result<ConditioningSet> {
    if pool.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let entries = pool.entries();
    let chosen: Vec<usize> = if entries.len() <= n_cond_max {
        (0..entries.len()).collect()
    } else {
        let mut context = model.empty_state();
        model.extend_with(&mut context, x0)?;
        let scores = entries
            .iter()
            .map(|e| model.sequence_logprob_from(&context, &e.sequence))
            .collect::<Result<Vec<f64>>>()?;
        let mut idx: Vec<usize> = (0..entries.len()).collect();
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        idx.truncate(n_cond_max);
        if let Some(x0_idx) = entries.iter().position(|e| &e.sequence == x0) {
            if !idx.contains(&x0_idx) {
                idx.pop();
                idx.push(x0_idx);
            }
        }
        idx.sort_unstable();
        idx
    };
    ConditioningSet::new(
        chosen
            .iter()
            .map(|&i| entries[i].sequence.clone())
            .collect(),
        chosen.iter().map(|&i| entries[i].y_norm).collect(),
    )
}

fn neighbors(x: &Sequence, positions: &[usize], alphabet_size: usize) -> Vec<Sequence> {
    let mut out = Vec::with_capacity(positions.len() * alphabet_size.saturating_sub(1));
    for &p in positions {
        for a in 0..alphabet_size as Token {
            if a != x[p] {
                out.push(x.with_substitution(p, a));
            }
        }
    }
    out
}

fn eval_all<M: CloneLm>(f: &FitnessSample<M>, xs: &[Sequence]) -> Result<Vec<f64>> {
    xs.par_iter().map(|x| f.eval(x)).collect()
}

/// Greedy ascent of `F` from `seed`: every round moves to the best single
/// substitution if it strictly improves. Returns every visited point with its
/// fitness, the seed first.
pub fn hill_climb<M: CloneLm>(
    f: &FitnessSample<M>,
    seed: &Sequence,
    positions: &[usize],
    rounds: usize,
) -> Result<Vec<(Sequence, f64)>> {
    let a = f.model().alphabet().size();
    let mut current = seed.clone();
    let mut current_f = f.eval(seed)?;
    let mut path = vec![(current.clone(), current_f)];
    for _ in 0..rounds {
        let cands = neighbors(&current, positions, a);
        let vals = eval_all(f, &cands)?;
        let mut best: Option<usize> = None;
        for (i, &v) in vals.iter().enumerate() {
            if v > current_f && best.is_none_or(|b| v > vals[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        current = cands[b].clone();
        current_f = vals[b];
        path.push((current.clone(), current_f));
    }
    Ok(path)
}

/// Thompson-sampling proposal: sample `F` from the posterior given a seed
/// drawn from the top measurements, hill-climb it from every top seed, and
/// return the best unmeasured point found.
pub fn propose_thompson<M: CloneLm, R: RngCore + ?Sized>(
    model: &Arc<M>,
    pool: &MeasurementPool,
    config: &BoConfig,
    rng: &mut R,
) -> Result<Proposal> {
    if pool.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let top = pool.top_k(config.top_k);
    let x0_idx = *top.choose(rng).expect("pool is non-empty");
    let x0 = &pool.entries()[x0_idx].sequence;
    let cond = select_conditioning_subset(model.as_ref(), x0, pool, config.n_cond_max)?;
    let fitness = sample_fitness_posterior(
        Arc::clone(model),
        x0,
        &cond,
        &config.smc,
        &config.likelihood_params(),
        rng,
    )?;

    let mut best: Option<Proposal> = None;
    for &si in &top {
        let seed = &pool.entries()[si].sequence;
        let positions = config.positions(seed.len());
        let path = hill_climb(&fitness, seed, &positions, config.max_substitutions)?;
        let seed_f = path[0].1;
        for (x, v) in path {
            if pool.contains(&x) {
                continue;
            }
            if best
                .as_ref()
                .is_none_or(|b| v > b.predicted.unwrap_or(f64::NEG_INFINITY))
            {
                best = Some(Proposal {
                    sequence: x,
                    seed_index: si,
                    predicted: Some(v),
                    seed_fitness: Some(seed_f),
                    fallback: false,
                });
            }
        }
    }
    if let Some(p) = best {
        return Ok(p);
    }

    let si = top[0];
    let seed = &pool.entries()[si].sequence;
    let seed_f = fitness.eval(seed)?;
    let cands: Vec<Sequence> =
        neighbors(seed, &config.positions(seed.len()), model.alphabet().size())
            .into_iter()
            .filter(|x| !pool.contains(x))
            .collect();
    let vals = eval_all(&fitness, &cands)?;
    let mut pick: Option<usize> = None;
    for (i, &v) in vals.iter().enumerate() {
        if pick.is_none_or(|b| v > vals[b]) {
            pick = Some(i);
        }
    }
    let b = pick.ok_or_else(|| {
        Error::ExhaustedSearch("every reachable candidate is already measured".into())
    })?;
    Ok(Proposal {
        sequence: cands[b].clone(),
        seed_index: si,
        predicted: Some(vals[b]),
        seed_fitness: Some(seed_f),
        fallback: true,
    })
}

fn random_substitution<R: Rng + ?Sized>(
    x: &Sequence,
    positions: &[usize],
    alphabet_size: usize,
    rng: &mut R,
) -> Result<Sequence> {
    if positions.is_empty() || alphabet_size < 2 {
        return Err(Error::ExhaustedSearch("no substitution is possible".into()));
    }
    let p = *positions.choose(rng).expect("positions non-empty");
    let mut a = rng.random_range(0..alphabet_size as Token - 1);
    if a >= x[p] {
        a += 1;
    }
    Ok(x.with_substitution(p, a))
}

/// One random substitution of a uniformly chosen top-K sequence.
pub fn propose_greedy<R: Rng + ?Sized>(
    pool: &MeasurementPool,
    alphabet_size: usize,
    config: &BoConfig,
    rng: &mut R,
) -> Result<Proposal> {
    if pool.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let top = pool.top_k(config.top_k);
    for _ in 0..RETRY_CAP {
        let si = *top.choose(rng).expect("pool is non-empty");
        let seed = &pool.entries()[si].sequence;
        let x = random_substitution(seed, &config.positions(seed.len()), alphabet_size, rng)?;
        if !pool.contains(&x) {
            return Ok(Proposal {
                sequence: x,
                seed_index: si,
                predicted: None,
                seed_fitness: None,
                fallback: false,
            });
        }
    }
    Err(Error::ExhaustedSearch(format!(
        "no unmeasured candidate after {RETRY_CAP} draws"
    )))
}

fn tournament<R: Rng + ?Sized>(pool: &MeasurementPool, size: usize, rng: &mut R) -> usize {
    let n = pool.len();
    let mut best = rng.random_range(0..n);
    for _ in 1..size {
        let c = rng.random_range(0..n);
        if pool.entries()[c].y_norm > pool.entries()[best].y_norm {
            best = c;
        }
    }
    best
}

/// Tournament selection, uniform crossover and an optional point mutation.
/// With fewer than two measurements this reduces to [`propose_greedy`].
pub fn propose_genetic<R: Rng + ?Sized>(
    pool: &MeasurementPool,
    alphabet_size: usize,
    config: &BoConfig,
    rng: &mut R,
) -> Result<Proposal> {
    if pool.len() < 2 {
        return propose_greedy(pool, alphabet_size, config, rng);
    }
    let g = &config.genetic;
    for _ in 0..RETRY_CAP {
        let pa = tournament(pool, g.tournament_size, rng);
        let pb = tournament(pool, g.tournament_size, rng);
        let a = &pool.entries()[pa].sequence;
        let b = &pool.entries()[pb].sequence;
        let mut child: Vec<Token> = if a.len() == b.len() {
            a.iter()
                .zip(b.iter())
                .map(|(&x, &y)| if rng.random_bool(0.5) { x } else { y })
                .collect()
        } else {
            a.to_vec()
        };
        let positions = config.positions(child.len());
        if rng.random_bool(g.mutation_prob) {
            child = random_substitution(&Sequence::new(child), &positions, alphabet_size, rng)?.0;
        }
        let child = Sequence::new(child);
        if !pool.contains(&child) {
            return Ok(Proposal {
                sequence: child,
                seed_index: pa,
                predicted: None,
                seed_fitness: None,
                fallback: false,
            });
        }
    }
    Err(Error::ExhaustedSearch(format!(
        "no unmeasured candidate after {RETRY_CAP} draws"
    )))
}
