use std::sync::Arc;
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::oracle::Oracle;
use super::pool::MeasurementPool;
use super::propose::{propose_genetic, propose_greedy, propose_thompson, BoConfig, Proposal};
use crate::error::{Error, Result};
use crate::seq_model::{CloneLm, Sequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(rename = "clonebo")]
    CloneBo,
    Greedy,
    Genetic,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::CloneBo, Method::Greedy, Method::Genetic];

    pub fn name(self) -> &'static str {
        match self {
            Method::CloneBo => "clonebo",
            Method::Greedy => "greedy",
            Method::Genetic => "genetic",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clonebo" => Ok(Method::CloneBo),
            "greedy" => Ok(Method::Greedy),
            "genetic" => Ok(Method::Genetic),
            other => Err(Error::config("method", format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step index.
    pub step: usize,
    pub method: Method,
    pub sequence: Sequence,
    pub y: f64,
    pub best_so_far: f64,
    /// The pool sequence the proposal was derived from.
    pub seed: Sequence,
    /// Whether the seed was among the top-K at proposal time.
    pub seed_in_top_k: bool,
    pub predicted: Option<f64>,
    pub seed_fitness: Option<f64>,
    pub fallback: bool,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub method: Method,
    /// Best raw value in the initial pool.
    pub initial_best: f64,
    pub records: Vec<StepRecord>,
    /// Why the loop stopped before the budget, if it did.
    pub stopped: Option<String>,
}

impl Trajectory {
    /// Best-so-far after each step, with the initial best at index 0.
    pub fn best_curve(&self) -> Vec<f64> {
        std::iter::once(self.initial_best)
            .chain(self.records.iter().map(|r| r.best_so_far))
            .collect()
    }

    pub fn final_best(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_best, |r| r.best_so_far)
    }
}

/// Options that affect only what is recorded.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Record wall-clock time per step. Off by default so that outputs are
    /// reproducible byte for byte.
    pub record_timing: bool,
}

/// Propose, measure, append, for `config.budget` steps.
pub fn run_bo<M: CloneLm, O: Oracle + ?Sized, R: RngCore + ?Sized>(
    model: &Arc<M>,
    oracle: &O,
    initial: MeasurementPool,
    method: Method,
    config: &BoConfig,
    options: RunOptions,
    rng: &mut R,
) -> Result<Trajectory> {
    config.validate()?;
    if config.budget == 0 {
        return Err(Error::config("bo.budget", "must be at least 1"));
    }
    let mut pool = initial;
    let alphabet_size = model.alphabet().size();
    let initial_best = pool.best_y();
    let mut best = initial_best;
    let mut records = Vec::with_capacity(config.budget);
    let mut stopped = None;
    let start = Instant::now();
    for step in 1..=config.budget {
        let top = pool.top_k(config.top_k);
        let proposal: Result<Proposal> = match method {
            Method::CloneBo => propose_thompson(model, &pool, config, rng),
            Method::Greedy => propose_greedy(&pool, alphabet_size, config, rng),
            Method::Genetic => propose_genetic(&pool, alphabet_size, config, rng),
        };
        let proposal = match proposal {
            Ok(p) => p,
            Err(Error::ExhaustedSearch(why)) => {
                stopped = Some(format!("step {step}: {why}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let y = oracle.evaluate(&proposal.sequence)?;
        best = best.max(y);
        let seed = pool.entries()[proposal.seed_index].sequence.clone();
        pool.add(proposal.sequence.clone(), y)?;
        records.push(StepRecord {
            step,
            method,
            sequence: proposal.sequence,
            y,
            best_so_far: best,
            seed,
            seed_in_top_k: top.contains(&proposal.seed_index),
            predicted: proposal.predicted,
            seed_fitness: proposal.seed_fitness,
            fallback: proposal.fallback,
            elapsed_ms: if options.record_timing {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
        });
    }
    Ok(Trajectory {
        method,
        initial_best,
        records,
        stopped,
    })
}
