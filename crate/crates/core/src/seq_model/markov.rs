use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::alphabet::{Alphabet, CloneStream, Token};
use super::model::CloneLm;
use crate::error::{Error, Result};

/// Largest supported context order.
pub const MAX_ORDER: usize = 8;

/// Order-k token model over flat clone streams with additive smoothing.
///
/// Contexts are the previous `k` tokens of the stream; the stream start is
/// treated as preceded by separators. A separator is never emitted at the
/// first position of a sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarkovRepr", into = "MarkovRepr")]
pub struct MarkovModel {
    alphabet: Alphabet,
    order: usize,
    smoothing: f64,
    table: HashMap<u64, ContextCounts>,
    modulus: u64,
}

#[derive(Clone, Debug, PartialEq)]
struct ContextCounts {
    counts: Vec<f64>,
    total: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarkovRepr {
    alphabet: Alphabet,
    order: usize,
    smoothing: f64,
    contexts: Vec<ContextEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextEntry {
    context: Vec<Token>,
    counts: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MarkovState {
    key: u64,
    pos: usize,
}

impl MarkovModel {
    /// An untrained model (uniform predictive).
    pub fn empty(alphabet: Alphabet, order: usize, smoothing: f64) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::config(
                "order",
                format!("order {order} exceeds the maximum {MAX_ORDER}"),
            ));
        }
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(Error::config(
                "smoothing",
                "must be a positive finite number",
            ));
        }
        let modulus = (alphabet.vocab_size() as u64)
            .checked_pow(order as u32)
            .filter(|m| *m < (1 << 62))
            .ok_or_else(|| Error::config("order", "context space too large"))?;
        Ok(MarkovModel {
            alphabet,
            order,
            smoothing,
            table: HashMap::new(),
            modulus,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    fn start_key(&self) -> u64 {
        let v = self.alphabet.vocab_size() as u64;
        let sep = self.alphabet.separator() as u64;
        (0..self.order).fold(0, |k, _| k * v + sep)
    }

    fn advance_key(&self, key: u64, token: Token) -> u64 {
        if self.order == 0 {
            0
        } else {
            (key * self.alphabet.vocab_size() as u64 + token as u64) % self.modulus
        }
    }

    fn key_tokens(&self, mut key: u64) -> Vec<Token> {
        let v = self.alphabet.vocab_size() as u64;
        let mut out = vec![0; self.order];
        for slot in out.iter_mut().rev() {
            *slot = (key % v) as Token;
            key /= v;
        }
        out
    }

    /// Adds the transitions of one flat-encoded stream to the count table.
    pub fn observe(&mut self, stream: &CloneStream) -> Result<()> {
        for s in stream.sequences() {
            self.alphabet.validate(s)?;
        }
        let vocab = self.alphabet.vocab_size();
        let mut key = self.start_key();
        for t in stream.encode(&self.alphabet) {
            let entry = self.table.entry(key).or_insert_with(|| ContextCounts {
                counts: vec![0.0; vocab],
                total: 0.0,
            });
            entry.counts[t as usize] += 1.0;
            entry.total += 1.0;
            key = self.advance_key(key, t);
        }
        Ok(())
    }

    /// Sets the count row of a context directly (used to build generators).
    pub fn set_counts(&mut self, context: &[Token], counts: Vec<f64>) -> Result<()> {
        if context.len() != self.order || counts.len() != self.alphabet.vocab_size() {
            return Err(Error::MalformedInput(
                "context or count row has the wrong size".into(),
            ));
        }
        if context
            .iter()
            .any(|&t| t as usize >= self.alphabet.vocab_size())
            || counts.iter().any(|&c| !(c >= 0.0 && c.is_finite()))
        {
            return Err(Error::MalformedInput(
                "invalid context token or count".into(),
            ));
        }
        let key = context.iter().fold(0, |k, &t| self.advance_key(k, t));
        let key = if self.order == 0 { 0 } else { key };
        let total = counts.iter().sum();
        self.table.insert(key, ContextCounts { counts, total });
        Ok(())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(Error::config(
                "smoothing",
                "must be a positive finite number",
            ));
        }
        Ok(())
    }
}

/// Trains an order-`order` model on the flat encodings of `corpus`.
pub fn fit_markov(
    corpus: &[CloneStream],
    alphabet: &Alphabet,
    order: usize,
    smoothing: f64,
) -> Result<MarkovModel> {
    if corpus.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut model = MarkovModel::empty(alphabet.clone(), order, smoothing)?;
    for stream in corpus {
        model.observe(stream)?;
    }
    Ok(model)
}

impl CloneLm for MarkovModel {
    type State = MarkovState;

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn fixed_length(&self) -> Option<usize> {
        None
    }

    fn empty_state(&self) -> MarkovState {
        MarkovState {
            key: self.start_key(),
            pos: 0,
        }
    }

    fn push(&self, state: &mut MarkovState, token: Token) -> Result<()> {
        let sep = self.alphabet.separator();
        if token > sep {
            return Err(Error::MalformedInput(format!(
                "token {token} outside vocabulary"
            )));
        }
        if token == sep {
            if state.pos == 0 {
                return Err(Error::MalformedInput("empty sequence in stream".into()));
            }
            state.pos = 0;
        } else {
            state.pos += 1;
        }
        state.key = self.advance_key(state.key, token);
        Ok(())
    }

    fn log_probs_into(&self, state: &MarkovState, out: &mut [f64]) {
        let a = self.alphabet.size();
        let lambda = self.smoothing;
        let row = self.table.get(&state.key);
        let count = |x: usize| row.map_or(0.0, |r| r.counts[x]);
        let total = row.map_or(0.0, |r| r.total);
        if state.pos == 0 {
            let denom = (total - count(a) + lambda * a as f64).ln();
            for (x, o) in out[..a].iter_mut().enumerate() {
                *o = (count(x) + lambda).ln() - denom;
            }
            out[a] = f64::NEG_INFINITY;
        } else {
            let denom = (total + lambda * (a + 1) as f64).ln();
            for (x, o) in out[..=a].iter_mut().enumerate() {
                *o = (count(x) + lambda).ln() - denom;
            }
        }
    }

    fn position(&self, state: &MarkovState) -> usize {
        state.pos
    }
}

impl TryFrom<MarkovRepr> for MarkovModel {
    type Error = Error;

    fn try_from(r: MarkovRepr) -> Result<Self> {
        let mut m = MarkovModel::empty(r.alphabet, r.order, r.smoothing)?;
        for e in r.contexts {
            m.set_counts(&e.context, e.counts)?;
        }
        Ok(m)
    }
}

impl From<MarkovModel> for MarkovRepr {
    fn from(m: MarkovModel) -> Self {
        let mut keys: Vec<u64> = m.table.keys().copied().collect();
        keys.sort_unstable();
        let contexts = keys
            .into_iter()
            .map(|k| ContextEntry {
                context: m.key_tokens(k),
                counts: m.table[&k].counts.clone(),
            })
            .collect();
        MarkovRepr {
            alphabet: m.alphabet,
            order: m.order,
            smoothing: m.smoothing,
            contexts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::log_sum_exp;
    use crate::seq_model::Sequence;

    fn alternating(len: usize) -> CloneStream {
        let seed = Sequence::new((0..len).map(|i| (i % 2) as Token).collect());
        CloneStream::new(seed)
    }

    #[test]
    fn alternation_learned_as_smoothing_vanishes() {
        let a = Alphabet::new(3).unwrap();
        let corpus = vec![alternating(2000)];
        let mut prev = 0.0;
        for lambda in [1.0, 1e-2, 1e-4, 1e-6] {
            let m = fit_markov(&corpus, &a, 1, lambda).unwrap();
            let p = m.next_token_logprobs(&[1, 0]).unwrap()[1].exp();
            assert!(p > prev);
            prev = p;
        }
        assert!(prev > 1.0 - 1e-8);
    }

    #[test]
    fn heavy_smoothing_is_uniform() {
        let a = Alphabet::new(3).unwrap();
        let m = fit_markov(&[alternating(100)], &a, 1, 1e9).unwrap();
        let lp = m.next_token_logprobs(&[0, 1]).unwrap();
        for p in lp {
            assert!((p.exp() - 0.25).abs() < 1e-3);
        }
        // first letter of a sequence: separator masked, letters uniform
        let lp = m.next_token_logprobs(&[]).unwrap();
        for p in &lp[..3] {
            assert!((p.exp() - 1.0 / 3.0).abs() < 1e-3);
        }
    }

    #[test]
    fn normalized_everywhere() {
        let a = Alphabet::new(4).unwrap();
        let m = fit_markov(&[alternating(30)], &a, 2, 0.1).unwrap();
        for ctx in [vec![], vec![0], vec![0, 1, 4], vec![3, 3, 3]] {
            let lp = m.next_token_logprobs(&ctx).unwrap();
            assert!(log_sum_exp(&lp).abs() < 1e-12);
        }
    }

    #[test]
    fn order_bound_enforced() {
        let a = Alphabet::new(4).unwrap();
        assert!(matches!(
            fit_markov(&[alternating(4)], &a, MAX_ORDER + 1, 1.0),
            Err(Error::Config { .. })
        ));
        assert!(fit_markov(&[], &a, 1, 1.0).is_err());
        assert!(fit_markov(&[alternating(4)], &a, 1, 0.0).is_err());
    }

    #[test]
    fn empty_sequence_is_malformed() {
        let m = MarkovModel::empty(Alphabet::new(2).unwrap(), 1, 1.0).unwrap();
        assert!(m.next_token_logprobs(&[2]).is_err());
        assert!(m.next_token_logprobs(&[0, 2, 2]).is_err());
    }

    #[test]
    fn order_zero_ignores_context() {
        let a = Alphabet::new(2).unwrap();
        let m = fit_markov(&[alternating(10)], &a, 0, 1.0).unwrap();
        assert_eq!(
            m.next_token_logprobs(&[0, 1]).unwrap(),
            m.next_token_logprobs(&[1, 1, 0]).unwrap()
        );
    }
}
