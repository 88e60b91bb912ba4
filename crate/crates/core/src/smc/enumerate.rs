use crate::error::{Error, Result};
use crate::likelihood::{LikelihoodKernel, LikelihoodParams};
use crate::numerics::log_sum_exp;
use crate::seq_model::{CloneLm, Sequence, Token};

use super::ConditioningSet;

/// Largest number of clone configurations the exact enumerator will visit.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// Normalized posterior over every member tuple of a small fixed-length model.
///
/// Configurations are indexed big-endian: member 1 is the most significant
/// digit, and within a member the first letter is most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactPosterior {
    pub members: usize,
    pub length: usize,
    pub alphabet_size: usize,
    /// Normalized log-probabilities, one per configuration.
    pub log_probs: Vec<f64>,
    /// `log sum p(X_1:M | X0) p(Y | F^M)`.
    pub log_normalizer: f64,
}

impl ExactPosterior {
    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn index_of(&self, members: &[Sequence]) -> Result<usize> {
        if members.len() != self.members {
            return Err(Error::LengthMismatch {
                expected: self.members,
                got: members.len(),
            });
        }
        let mut idx = 0usize;
        for m in members {
            if m.len() != self.length {
                return Err(Error::LengthMismatch {
                    expected: self.length,
                    got: m.len(),
                });
            }
            for &t in m.iter() {
                if t as usize >= self.alphabet_size {
                    return Err(Error::InvalidSequence(format!(
                        "token {t} outside alphabet"
                    )));
                }
                idx = idx * self.alphabet_size + t as usize;
            }
        }
        Ok(idx)
    }

    pub fn configuration(&self, mut index: usize) -> Vec<Sequence> {
        let mut digits = vec![0 as Token; self.members * self.length];
        for d in digits.iter_mut().rev() {
            *d = (index % self.alphabet_size) as Token;
            index /= self.alphabet_size;
        }
        digits
            .chunks(self.length.max(1))
            .take(self.members)
            .map(|c| Sequence::new(c.to_vec()))
            .collect()
    }

    /// Total variation distance to another distribution over the same index.
    pub fn tv(&self, other: &[f64]) -> Result<f64> {
        if other.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(0.5
            * self
                .log_probs
                .iter()
                .zip(other)
                .map(|(l, q)| (l.exp() - q).abs())
                .sum::<f64>())
    }
}

/// Exact posterior `p(X_1:M | X0, Y)` by enumeration. Only models with a
/// fixed sequence length are supported.
pub fn enumerate_posterior_exact<M: CloneLm>(
    model: &M,
    x0: &Sequence,
    cond: &ConditioningSet,
    members: usize,
    params: &LikelihoodParams,
) -> Result<ExactPosterior> {
    let length = model.fixed_length().ok_or_else(|| {
        Error::MalformedInput("exact enumeration needs a fixed-length model".into())
    })?;
    let a = model.alphabet().size();
    let size = (a as f64).powf((length * members) as f64);
    if size > ENUMERATION_LIMIT as f64 {
        return Err(Error::StateSpaceTooLarge {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    let kernel = if cond.len() >= 2 {
        Some(LikelihoodKernel::new(cond.values(), params)?)
    } else {
        None
    };
    let mut state = model.empty_state();
    model.extend_with(&mut state, x0)?;
    let mut out = Vec::with_capacity(size as usize);
    let mut walker = Walker {
        model,
        cond,
        kernel: kernel.as_ref(),
        length,
        members,
        out: &mut out,
    };
    walker.visit(state, 0, 0, 0.0)?;
    let log_normalizer = log_sum_exp(&out);
    if !log_normalizer.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    out.iter_mut().for_each(|l| *l -= log_normalizer);
    Ok(ExactPosterior {
        members,
        length,
        alphabet_size: a,
        log_probs: out,
        log_normalizer,
    })
}

struct Walker<'a, M: CloneLm> {
    model: &'a M,
    cond: &'a ConditioningSet,
    kernel: Option<&'a LikelihoodKernel>,
    length: usize,
    members: usize,
    out: &'a mut Vec<f64>,
}

impl<M: CloneLm> Walker<'_, M> {
    fn visit(&mut self, state: M::State, member: usize, letter: usize, lp: f64) -> Result<()> {
        if member == self.members {
            let f = self
                .cond
                .sequences()
                .iter()
                .map(|x| self.model.sequence_logprob_from(&state, x))
                .collect::<Result<Vec<f64>>>()?;
            let ll = self.kernel.map_or(0.0, |k| k.log_lik(&f));
            self.out.push(lp + ll);
            return Ok(());
        }
        let probs = self.model.log_probs(&state);
        if letter == self.length {
            let sep = self.model.alphabet().separator();
            let mut next = state;
            self.model.push(&mut next, sep)?;
            return self.visit(next, member + 1, 0, lp + probs[sep as usize]);
        }
        for (t, &p) in probs.iter().take(self.model.alphabet().size()).enumerate() {
            let mut next = state.clone();
            self.model.push(&mut next, t as Token)?;
            self.visit(next, member, letter + 1, lp + p)?;
        }
        Ok(())
    }
}
