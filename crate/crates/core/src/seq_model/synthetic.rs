use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::alphabet::{Alphabet, CloneStream, Sequence, Token};
use super::conjugate::ConjugateModelParams;
use crate::error::{Error, Result};
use crate::numerics::sample_index;

/// A hidden per-position categorical distribution (the latent clone).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentClone {
    /// `probs[position][letter]`, each row summing to one.
    pub probs: Vec<Vec<f64>>,
}

impl LatentClone {
    pub fn length(&self) -> usize {
        self.probs.len()
    }

    /// Exact `log p(x | latent)`.
    pub fn log_prob(&self, x: &Sequence) -> Result<f64> {
        if x.len() != self.length() {
            return Err(Error::LengthMismatch {
                expected: self.length(),
                got: x.len(),
            });
        }
        let mut total = 0.0;
        for (row, &t) in self.probs.iter().zip(x.iter()) {
            let p = *row
                .get(t as usize)
                .ok_or_else(|| Error::InvalidSequence(format!("token {t} outside alphabet")))?;
            total += p.ln();
        }
        Ok(total)
    }

    /// The most likely sequence (first letter wins ties).
    pub fn argmax(&self) -> Sequence {
        let tokens = self
            .probs
            .iter()
            .map(|row| {
                let mut best = 0;
                for (i, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = i;
                    }
                }
                best as Token
            })
            .collect();
        Sequence::new(tokens)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Sequence {
        Sequence::new(
            self.probs
                .iter()
                .map(|row| sample_index(row, rng) as Token)
                .collect(),
        )
    }
}

fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let mut draws: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            Gamma::new(a, 1.0)
                .expect("validated concentration")
                .sample(rng)
        })
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.iter_mut().for_each(|d| *d /= total);
    } else {
        // every gamma draw underflowed; fall back to a one-hot proportional to alpha
        let hot = sample_index(alpha, rng);
        draws
            .iter_mut()
            .enumerate()
            .for_each(|(i, d)| *d = (i == hot) as u8 as f64);
    }
    draws
}

/// Draws a latent clone from the per-position Dirichlet prior.
pub fn sample_latent<R: Rng + ?Sized>(
    params: &ConjugateModelParams,
    alphabet: &Alphabet,
    rng: &mut R,
) -> Result<LatentClone> {
    params.validate(alphabet)?;
    Ok(LatentClone {
        probs: params
            .alpha
            .iter()
            .map(|a| sample_dirichlet(a, rng))
            .collect(),
    })
}

/// Synthetic corpus of clonal families together with their hidden latents.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub families: Vec<CloneStream>,
    pub latents: Vec<LatentClone>,
}

/// For each family draws a latent from the Dirichlet prior, then the seed and
/// `members_per_family` members iid from that latent.
pub fn gen_synthetic_families<R: Rng + ?Sized>(
    params: &ConjugateModelParams,
    alphabet: &Alphabet,
    n_families: usize,
    members_per_family: usize,
    rng: &mut R,
) -> Result<SyntheticCorpus> {
    params.validate(alphabet)?;
    let mut families = Vec::with_capacity(n_families);
    let mut latents = Vec::with_capacity(n_families);
    for _ in 0..n_families {
        let latent = sample_latent(params, alphabet, rng)?;
        let mut stream = CloneStream::new(latent.sample(rng));
        for _ in 0..members_per_family {
            stream.members.push(latent.sample(rng));
        }
        families.push(stream);
        latents.push(latent);
    }
    Ok(SyntheticCorpus { families, latents })
}
