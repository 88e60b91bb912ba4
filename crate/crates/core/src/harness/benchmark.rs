use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{InitialPoolSpec, OracleSpec, RunConfig};
use super::io::{atomic_write, format_trajectory_csv, read_pool_csv, TrajectoryRow};
use crate::error::{Error, Result};
use crate::numerics::mean_var;
use crate::optimizer::{
    run_bo, LatentCloneOracle, MeasurementPool, Method, Oracle, RunOptions, TableOracle, Trajectory,
};
use crate::rng::rng_from;
use crate::seq_model::{sample_latent, CloneModel};

const STREAM_LATENT: u64 = 0;
const STREAM_POOL: u64 = 1;
const STREAM_METHOD: u64 = 2;

fn method_id(m: Method) -> u64 {
    match m {
        Method::CloneBo => 0,
        Method::Greedy => 1,
        Method::Genetic => 2,
    }
}

/// Per-step statistics of best-so-far for one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub replicates: usize,
    /// Index 0 is the initial pool; index `t` is after `t` proposals.
    pub mean: Vec<f64>,
    /// Population standard deviation across replicates.
    pub std: Vec<f64>,
    pub final_mean: f64,
    pub final_std: f64,
    /// Mean of the last recorded `elapsed_ms` per replicate (0 unless timing is on).
    pub mean_runtime_ms: f64,
    /// Replicates that stopped before the budget.
    pub stopped_early: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub methods: Vec<MethodSummary>,
}

impl BenchmarkSummary {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

/// Per-step mean and standard deviation of best-so-far for each method.
/// Shorter trajectories are right-padded with their last value.
pub fn aggregate(trajectories: &[Trajectory]) -> Result<BenchmarkSummary> {
    if trajectories.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut by_method: BTreeMap<Method, Vec<&Trajectory>> = BTreeMap::new();
    for t in trajectories {
        by_method.entry(t.method).or_default().push(t);
    }
    let methods = by_method
        .into_iter()
        .map(|(method, trajs)| {
            let curves: Vec<Vec<f64>> = trajs.iter().map(|t| t.best_curve()).collect();
            let steps = curves.iter().map(Vec::len).max().unwrap_or(0);
            let mut mean = Vec::with_capacity(steps);
            let mut std = Vec::with_capacity(steps);
            for s in 0..steps {
                let col: Vec<f64> = curves
                    .iter()
                    .map(|c| {
                        c.get(s)
                            .copied()
                            .unwrap_or(*c.last().expect("curve is non-empty"))
                    })
                    .collect();
                let (m, v) = mean_var(&col);
                mean.push(m);
                std.push(v.sqrt());
            }
            let runtimes: Vec<f64> = trajs
                .iter()
                .map(|t| t.records.last().map_or(0.0, |r| r.elapsed_ms))
                .collect();
            MethodSummary {
                method,
                replicates: trajs.len(),
                final_mean: *mean.last().expect("at least one step"),
                final_std: *std.last().expect("at least one step"),
                mean,
                std,
                mean_runtime_ms: mean_var(&runtimes).0,
                stopped_early: trajs.iter().filter(|t| t.stopped.is_some()).count(),
            }
        })
        .collect();
    Ok(BenchmarkSummary { methods })
}

/// Tidy `step,method,mean,std` rows for plotting.
pub fn format_plot_csv(summary: &BenchmarkSummary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "method", "mean", "std"])?;
    for m in &summary.methods {
        for (s, (mean, std)) in m.mean.iter().zip(&m.std).enumerate() {
            w.write_record([
                s.to_string(),
                m.method.name().to_string(),
                format!("{mean:?}"),
                format!("{std:?}"),
            ])?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// One replicate's trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub trajectories: Vec<Trajectory>,
}

/// Runs every configured method on replicate `r`. All methods share the
/// replicate's oracle and initial pool.
pub fn run_replicate(
    cfg: &RunConfig,
    model: &Arc<CloneModel>,
    methods: &[Method],
    replicate: usize,
) -> Result<ReplicateResult> {
    let r = replicate as u64;
    let (oracle, pool): (Box<dyn Oracle>, MeasurementPool) = match &cfg.oracle {
        OracleSpec::Latent { .. } => {
            let prior = cfg.latent_prior(model)?;
            let latent = sample_latent(
                &prior,
                &cfg.alphabet,
                &mut rng_from(cfg.seed, &[r, STREAM_LATENT]),
            )?;
            let oracle = LatentCloneOracle::new(latent);
            let raw = match &cfg.initial_pool {
                InitialPoolSpec::LatentSample { size } => {
                    let mut rng = rng_from(cfg.seed, &[r, STREAM_POOL]);
                    (0..*size)
                        .map(|_| {
                            let x = oracle.latent.sample(&mut rng);
                            let y = oracle.evaluate(&x)?;
                            Ok((x, y))
                        })
                        .collect::<Result<Vec<_>>>()?
                }
                InitialPoolSpec::File { path } => read_pool_csv(path, &cfg.alphabet)?,
            };
            (Box::new(oracle), MeasurementPool::new(raw)?)
        }
        OracleSpec::Table { path } => {
            let oracle = TableOracle::from_csv(path, &cfg.alphabet)?;
            let raw = match &cfg.initial_pool {
                InitialPoolSpec::File { path } => read_pool_csv(path, &cfg.alphabet)?,
                InitialPoolSpec::LatentSample { .. } => {
                    return Err(Error::config(
                        "initial_pool",
                        "a table oracle needs an initial pool file",
                    ))
                }
            };
            (Box::new(oracle), MeasurementPool::new(raw)?)
        }
    };
    let options = RunOptions {
        record_timing: cfg.record_timing,
    };
    let trajectories = methods
        .iter()
        .map(|&m| {
            let mut rng = rng_from(cfg.seed, &[r, STREAM_METHOD, method_id(m)]);
            run_bo(
                model,
                oracle.as_ref(),
                pool.clone(),
                m,
                &cfg.bo,
                options,
                &mut rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicateResult {
        replicate,
        trajectories,
    })
}

/// Runs all replicates (concurrently) and aggregates them.
pub fn run_benchmark(cfg: &RunConfig) -> Result<(Vec<ReplicateResult>, BenchmarkSummary)> {
    cfg.validate()?;
    let model = Arc::new(cfg.build_model()?);
    let results = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, &model, &cfg.methods, r))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<Trajectory> = results
        .iter()
        .flat_map(|r| r.trajectories.iter().cloned())
        .collect();
    let summary = aggregate(&all)?;
    Ok((results, summary))
}

pub fn trajectory_path(dir: &Path, method: Method, replicate: usize) -> PathBuf {
    dir.join("trajectories")
        .join(format!("{}_r{replicate:03}.csv", method.name()))
}

/// Writes one trajectory as CSV plus a JSON sidecar with per-step metadata.
pub fn write_trajectory(
    cfg: &RunConfig,
    path: &Path,
    traj: &Trajectory,
    replicate: usize,
) -> Result<()> {
    let rows: Vec<TrajectoryRow> = traj
        .records
        .iter()
        .map(|r| TrajectoryRow::from_record(r, replicate))
        .collect();
    atomic_write(
        path,
        format_trajectory_csv(&rows, &cfg.alphabet)?.as_bytes(),
    )?;
    let mut meta = serde_json::to_string_pretty(traj)?;
    meta.push('\n');
    atomic_write(&path.with_extension("json"), meta.as_bytes())
}

/// Writes trajectories, `summary.json` and `plot.csv` under `dir`.
pub fn write_benchmark(
    cfg: &RunConfig,
    dir: &Path,
    results: &[ReplicateResult],
    summary: &BenchmarkSummary,
) -> Result<()> {
    results.par_iter().try_for_each(|res| {
        res.trajectories.iter().try_for_each(|t| {
            write_trajectory(
                cfg,
                &trajectory_path(dir, t.method, res.replicate),
                t,
                res.replicate,
            )
        })
    })?;
    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    atomic_write(&dir.join("summary.json"), json.as_bytes())?;
    atomic_write(&dir.join("plot.csv"), format_plot_csv(summary)?.as_bytes())
}
