use serde::{Deserialize, Serialize};

use super::alphabet::{Alphabet, Token};
use super::model::CloneLm;
use crate::error::{Error, Result};

/// Per-position Dirichlet concentrations for a fixed-length model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugateModelParams {
    pub length: usize,
    /// `alpha[position][letter]`.
    pub alpha: Vec<Vec<f64>>,
}

impl ConjugateModelParams {
    /// The same concentration vector at every position.
    pub fn shared(length: usize, alpha: Vec<f64>) -> Self {
        ConjugateModelParams {
            length,
            alpha: vec![alpha; length],
        }
    }

    pub fn uniform(length: usize, alphabet_size: usize, concentration: f64) -> Self {
        Self::shared(length, vec![concentration; alphabet_size])
    }

    pub fn validate(&self, alphabet: &Alphabet) -> Result<()> {
        if self.length == 0 {
            return Err(Error::config("length", "must be positive"));
        }
        if self.alpha.len() != self.length {
            return Err(Error::config(
                "alpha",
                format!("expected {} rows, got {}", self.length, self.alpha.len()),
            ));
        }
        for (pos, row) in self.alpha.iter().enumerate() {
            if row.len() != alphabet.size() {
                return Err(Error::config(
                    "alpha",
                    format!(
                        "row {pos} has {} entries, expected {}",
                        row.len(),
                        alphabet.size()
                    ),
                ));
            }
            if row.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                return Err(Error::config(
                    "alpha",
                    format!("row {pos} has a non-positive entry"),
                ));
            }
        }
        Ok(())
    }
}

/// Exchangeable clone model: each position of each member is an iid draw from
/// a latent categorical with a Dirichlet prior. Predictives are closed-form
/// Dirichlet-categorical updates from the letters of completed sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConjugateRepr", into = "ConjugateRepr")]
pub struct ConjugateModel {
    alphabet: Alphabet,
    params: ConjugateModelParams,
    alpha_sum: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConjugateRepr {
    alphabet: Alphabet,
    #[serde(flatten)]
    params: ConjugateModelParams,
}

impl TryFrom<ConjugateRepr> for ConjugateModel {
    type Error = Error;

    fn try_from(r: ConjugateRepr) -> Result<Self> {
        ConjugateModel::new(r.alphabet, r.params)
    }
}

impl From<ConjugateModel> for ConjugateRepr {
    fn from(m: ConjugateModel) -> Self {
        ConjugateRepr {
            alphabet: m.alphabet,
            params: m.params,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConjugateState {
    /// Letter counts of completed sequences, `counts[pos * A + letter]`.
    counts: Vec<u32>,
    completed: u32,
    partial: Vec<Token>,
}

impl ConjugateModel {
    pub fn new(alphabet: Alphabet, params: ConjugateModelParams) -> Result<Self> {
        params.validate(&alphabet)?;
        let alpha_sum = params.alpha.iter().map(|r| r.iter().sum()).collect();
        Ok(ConjugateModel {
            alphabet,
            params,
            alpha_sum,
        })
    }

    pub fn params(&self) -> &ConjugateModelParams {
        &self.params
    }

    pub fn length(&self) -> usize {
        self.params.length
    }

    /// Letter counts at `pos` over completed sequences in `state`.
    pub fn counts_at<'a>(&self, state: &'a ConjugateState, pos: usize) -> &'a [u32] {
        let a = self.alphabet.size();
        &state.counts[pos * a..(pos + 1) * a]
    }

    pub fn completed(&self, state: &ConjugateState) -> u32 {
        state.completed
    }
}

impl CloneLm for ConjugateModel {
    type State = ConjugateState;

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn fixed_length(&self) -> Option<usize> {
        Some(self.params.length)
    }

    fn empty_state(&self) -> ConjugateState {
        ConjugateState {
            counts: vec![0; self.params.length * self.alphabet.size()],
            completed: 0,
            partial: Vec::with_capacity(self.params.length),
        }
    }

    fn push(&self, state: &mut ConjugateState, token: Token) -> Result<()> {
        let a = self.alphabet.size();
        let len = self.params.length;
        let pos = state.partial.len();
        if token as usize > a {
            return Err(Error::MalformedInput(format!(
                "token {token} outside vocabulary"
            )));
        }
        if token as usize == a {
            if pos != len {
                return Err(Error::MalformedInput(format!(
                    "separator after {pos} letters; sequences have length {len}"
                )));
            }
            for (p, &t) in state.partial.iter().enumerate() {
                state.counts[p * a + t as usize] += 1;
            }
            state.completed += 1;
            state.partial.clear();
        } else {
            if pos == len {
                return Err(Error::MalformedInput(format!(
                    "letter past the end of a length-{len} sequence"
                )));
            }
            state.partial.push(token);
        }
        Ok(())
    }

    fn log_probs_into(&self, state: &ConjugateState, out: &mut [f64]) {
        let a = self.alphabet.size();
        let pos = state.partial.len();
        if pos < self.params.length {
            let denom = (state.completed as f64 + self.alpha_sum[pos]).ln();
            let alpha = &self.params.alpha[pos];
            let counts = &state.counts[pos * a..(pos + 1) * a];
            for x in 0..a {
                out[x] = (counts[x] as f64 + alpha[x]).ln() - denom;
            }
            out[a] = f64::NEG_INFINITY;
        } else {
            out[..a].fill(f64::NEG_INFINITY);
            out[a] = 0.0;
        }
    }

    fn position(&self, state: &ConjugateState) -> usize {
        state.partial.len()
    }
}
