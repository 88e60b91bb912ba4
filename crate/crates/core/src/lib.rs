//! Clone-informed Bayesian optimization of discrete sequences.
//!
//! The crate is organised around an autoregressive model over *clonal
//! families* (a seed sequence followed by related members). Conditioning such a
//! model on lab measurements is done with a letter-level twisted sequential
//! Monte Carlo sampler; each sampled family defines a fitness landscape that a
//! Thompson-sampling loop hill-climbs to propose the next sequence to measure.
//!
//! Module map:
//!
//! - [`seq_model`]: alphabets, sequences, clone streams and the two concrete
//!   clone models (exact Dirichlet-categorical and a trainable order-k Markov
//!   model), plus synthetic family generation.
//! - [`likelihood`]: the marginal measurement likelihood with an improper
//!   prior on scale and offset, and a quadrature oracle for it.
//! - [`smc`]: twisted SMC over clone members and an exhaustive posterior for
//!   small instances.
//! - [`posterior`]: fitness functions extracted from sampled clones and
//!   convergence diagnostics.
//! - [`optimizer`]: measurement pools, proposal rules and the BO loop.
//! - [`harness`]: configuration, file formats, benchmarking and the CLI.

pub mod error;
pub mod harness;
pub mod likelihood;
pub mod numerics;
pub mod optimizer;
pub mod posterior;
pub mod rng;
pub mod seq_model;
pub mod smc;

pub use error::{Error, Result};
