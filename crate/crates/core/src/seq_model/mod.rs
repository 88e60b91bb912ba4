//! Sequences, clone streams and autoregressive clone models.

mod alphabet;
mod conjugate;
mod markov;
mod model;
mod synthetic;

pub use alphabet::{Alphabet, CloneStream, Sequence, Token, AMINO_ACIDS};
pub use conjugate::{ConjugateModel, ConjugateModelParams, ConjugateState};
pub use markov::{fit_markov, MarkovModel, MarkovState, MAX_ORDER};
pub(crate) use model::check_max_len;
pub use model::{
    perplexity, sample_clone, CloneLm, CloneModel, CloneModelState, SampledClone,
    MODEL_FORMAT_VERSION,
};
pub use synthetic::{gen_synthetic_families, sample_latent, LatentClone, SyntheticCorpus};
