//! Bayesian optimization over measured sequences.
//!
//! [`run_bo`] alternates proposing a sequence, measuring it with an
//! [`Oracle`] and adding it to a [`MeasurementPool`]. CloneBO proposals come
//! from Thompson sampling a fitness function from the clone posterior; the
//! greedy and genetic proposers are mutation baselines.

mod oracle;
mod pool;
mod propose;
mod run;

pub use oracle::{synthetic_oracle, LatentCloneOracle, Oracle, TableOracle};
pub use pool::{Measurement, MeasurementPool};
pub use propose::{
    hill_climb, propose_genetic, propose_greedy, propose_thompson, select_conditioning_subset,
    BoConfig, GeneticParams, Proposal, RETRY_CAP,
};
pub use run::{run_bo, Method, RunOptions, StepRecord, Trajectory};
