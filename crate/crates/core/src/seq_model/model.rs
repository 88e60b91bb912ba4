use rand::Rng;
use serde::{Deserialize, Serialize};

use super::alphabet::{Alphabet, CloneStream, Sequence, Token};
use super::conjugate::{ConjugateModel, ConjugateState};
use super::markov::{MarkovModel, MarkovState};
use crate::error::{Error, Result};
use crate::numerics::sample_log_index;

/// An autoregressive model over flat-encoded clone streams.
///
/// Implementations expose an incremental state so that callers can cache a
/// context and extend it token by token. The provided methods derive every
/// higher-level query (prefix scoring, sequence log-probabilities, ancestral
/// sampling) from `push` and `log_probs_into`.
pub trait CloneLm: Send + Sync {
    type State: Clone + Send + Sync;

    fn alphabet(&self) -> &Alphabet;

    /// `Some(L)` when every sequence has exactly `L` letters.
    fn fixed_length(&self) -> Option<usize>;

    /// State for the empty context.
    fn empty_state(&self) -> Self::State;

    /// Appends one token. Fails if the result is not a valid stream prefix.
    fn push(&self, state: &mut Self::State, token: Token) -> Result<()>;

    /// Writes next-token log-probabilities (letters, then separator) into `out`.
    fn log_probs_into(&self, state: &Self::State, out: &mut [f64]);

    /// Letters already emitted in the in-progress sequence.
    fn position(&self, state: &Self::State) -> usize;

    fn log_probs(&self, state: &Self::State) -> Vec<f64> {
        let mut out = vec![0.0; self.alphabet().vocab_size()];
        self.log_probs_into(state, &mut out);
        out
    }

    fn state_for(&self, context: &[Token]) -> Result<Self::State> {
        let mut state = self.empty_state();
        for &t in context {
            self.push(&mut state, t)?;
        }
        Ok(state)
    }

    fn stream_state(&self, stream: &CloneStream) -> Result<Self::State> {
        self.state_for(&stream.encode(self.alphabet()))
    }

    fn next_token_logprobs(&self, context: &[Token]) -> Result<Vec<f64>> {
        Ok(self.log_probs(&self.state_for(context)?))
    }

    fn validate_sequence(&self, x: &Sequence) -> Result<()> {
        self.alphabet().validate(x)?;
        match self.fixed_length() {
            Some(len) if len != x.len() => Err(Error::LengthMismatch {
                expected: len,
                got: x.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Pushes `x` and its terminating separator, returning the summed
    /// log-probability of those tokens.
    fn extend_with(&self, state: &mut Self::State, x: &Sequence) -> Result<f64> {
        if self.position(state) != 0 {
            return Err(Error::MalformedInput(
                "context ends inside a sequence".into(),
            ));
        }
        self.validate_sequence(x)?;
        let mut buf = vec![0.0; self.alphabet().vocab_size()];
        let mut total = 0.0;
        for &t in x
            .iter()
            .chain(std::iter::once(&self.alphabet().separator()))
        {
            self.log_probs_into(state, &mut buf);
            total += buf[t as usize];
            self.push(state, t)?;
        }
        Ok(total)
    }

    /// `log p(x | context)` where `x` is scored as the next complete member.
    fn sequence_logprob_from(&self, state: &Self::State, x: &Sequence) -> Result<f64> {
        let mut s = state.clone();
        self.extend_with(&mut s, x)
    }

    fn sequence_logprob(&self, context: &[Token], x: &Sequence) -> Result<f64> {
        self.sequence_logprob_from(&self.state_for(context)?, x)
    }
}

/// A clone drawn by ancestral sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledClone {
    pub clone: CloneStream,
    /// Members cut off at `max_len` before a separator was emitted.
    pub truncated: usize,
}

/// Draws `members` new sequences after `x0` from the model's predictive.
///
/// `max_len` defaults to twice the seed length. Variable-length members that
/// reach it are terminated and counted in [`SampledClone::truncated`].
pub fn sample_clone<M: CloneLm + ?Sized, R: Rng + ?Sized>(
    model: &M,
    x0: &Sequence,
    members: usize,
    rng: &mut R,
    max_len: Option<usize>,
) -> Result<SampledClone> {
    model.validate_sequence(x0)?;
    let max_len = max_len.unwrap_or(2 * x0.len());
    check_max_len(model, max_len)?;
    let sep = model.alphabet().separator();
    let mut state = model.empty_state();
    model.extend_with(&mut state, x0)?;
    let mut clone = CloneStream::new(x0.clone());
    let mut truncated = 0;
    let mut buf = vec![0.0; model.alphabet().vocab_size()];
    for _ in 0..members {
        let mut letters = Vec::new();
        loop {
            if model.fixed_length().is_none() && letters.len() >= max_len {
                model.push(&mut state, sep)?;
                truncated += 1;
                break;
            }
            model.log_probs_into(&state, &mut buf);
            let t = sample_log_index(&buf, rng).ok_or(Error::DegenerateContext)? as Token;
            model.push(&mut state, t)?;
            if t == sep {
                break;
            }
            letters.push(t);
        }
        clone.members.push(Sequence::new(letters));
    }
    Ok(SampledClone { clone, truncated })
}

pub(crate) fn check_max_len<M: CloneLm + ?Sized>(model: &M, max_len: usize) -> Result<()> {
    if max_len == 0 {
        return Err(Error::config("max_len", "must be positive"));
    }
    if let Some(len) = model.fixed_length() {
        if max_len < len {
            return Err(Error::config(
                "max_len",
                format!("{max_len} is shorter than the model's sequence length {len}"),
            ));
        }
    }
    Ok(())
}

/// Per-token perplexity of flat-encoded streams (seed tokens included).
pub fn perplexity<M: CloneLm + ?Sized>(model: &M, streams: &[CloneStream]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    let mut buf = vec![0.0; model.alphabet().vocab_size()];
    for stream in streams {
        let mut state = model.empty_state();
        for t in stream.encode(model.alphabet()) {
            model.log_probs_into(&state, &mut buf);
            total += buf[t as usize];
            count += 1;
            model.push(&mut state, t)?;
        }
    }
    if count == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok((-total / count as f64).exp())
}

/// The concrete model kinds, dispatched at run time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CloneModel {
    ExactConjugate(ConjugateModel),
    Markov(MarkovModel),
}

#[derive(Clone, Debug)]
pub enum CloneModelState {
    Conjugate(ConjugateState),
    Markov(MarkovState),
}

impl CloneLm for CloneModel {
    type State = CloneModelState;

    fn alphabet(&self) -> &Alphabet {
        match self {
            CloneModel::ExactConjugate(m) => m.alphabet(),
            CloneModel::Markov(m) => m.alphabet(),
        }
    }

    fn fixed_length(&self) -> Option<usize> {
        match self {
            CloneModel::ExactConjugate(m) => m.fixed_length(),
            CloneModel::Markov(m) => m.fixed_length(),
        }
    }

    fn empty_state(&self) -> CloneModelState {
        match self {
            CloneModel::ExactConjugate(m) => CloneModelState::Conjugate(m.empty_state()),
            CloneModel::Markov(m) => CloneModelState::Markov(m.empty_state()),
        }
    }

    fn push(&self, state: &mut CloneModelState, token: Token) -> Result<()> {
        match (self, state) {
            (CloneModel::ExactConjugate(m), CloneModelState::Conjugate(s)) => m.push(s, token),
            (CloneModel::Markov(m), CloneModelState::Markov(s)) => m.push(s, token),
            _ => unreachable!("state from a different model kind"),
        }
    }

    fn log_probs_into(&self, state: &CloneModelState, out: &mut [f64]) {
        match (self, state) {
            (CloneModel::ExactConjugate(m), CloneModelState::Conjugate(s)) => {
                m.log_probs_into(s, out)
            }
            (CloneModel::Markov(m), CloneModelState::Markov(s)) => m.log_probs_into(s, out),
            _ => unreachable!("state from a different model kind"),
        }
    }

    fn position(&self, state: &CloneModelState) -> usize {
        match (self, state) {
            (CloneModel::ExactConjugate(m), CloneModelState::Conjugate(s)) => m.position(s),
            (CloneModel::Markov(m), CloneModelState::Markov(s)) => m.position(s),
            _ => unreachable!("state from a different model kind"),
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: CloneModel,
}

impl CloneModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            CloneModel::ExactConjugate(_) => "exact-conjugate",
            CloneModel::Markov(_) => "markov",
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::config(
                "format_version",
                format!(
                    "unsupported model format {} (expected {MODEL_FORMAT_VERSION})",
                    file.format_version
                ),
            ));
        }
        file.model.validate()?;
        Ok(file.model)
    }

    fn validate(&self) -> Result<()> {
        match self {
            CloneModel::ExactConjugate(m) => m.params().validate(m.alphabet()),
            CloneModel::Markov(m) => m.validate(),
        }
    }
}
