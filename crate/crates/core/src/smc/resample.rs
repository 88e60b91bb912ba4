use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{normalize_log_weights, sample_index};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplingScheme {
    /// Independent categorical draws with the normalized weights.
    #[default]
    Multinomial,
    /// One uniform offset, evenly spaced pointers (lower variance).
    Systematic,
}

/// Effective sample size `1 / sum(w^2)` of normalized weights.
pub fn ess(normalized: &[f64]) -> Result<f64> {
    let sum_sq: f64 = normalized.iter().map(|w| w * w).sum();
    if sum_sq.is_nan() || sum_sq <= 0.0 || !sum_sq.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    Ok((1.0 / sum_sq).clamp(1.0, normalized.len() as f64))
}

/// Ancestor indices for `weights.len()` offspring.
pub fn resample_indices<R: Rng + ?Sized>(
    weights: &[f64],
    scheme: ResamplingScheme,
    rng: &mut R,
) -> Vec<usize> {
    let d = weights.len();
    match scheme {
        ResamplingScheme::Multinomial => (0..d).map(|_| sample_index(weights, rng)).collect(),
        ResamplingScheme::Systematic => {
            let total: f64 = weights.iter().sum();
            let step = total / d as f64;
            let mut u = rng.random::<f64>() * step;
            let mut out = Vec::with_capacity(d);
            let mut cum = 0.0;
            let mut i = 0;
            for _ in 0..d {
                while i + 1 < d && cum + weights[i] <= u {
                    cum += weights[i];
                    i += 1;
                }
                out.push(i);
                u += step;
            }
            out
        }
    }
}

/// Anything carrying an importance log-weight.
pub trait Weighted: Clone {
    fn log_weight(&self) -> f64;
    fn set_log_weight(&mut self, w: f64);
}

/// Outcome of a resampling check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResampleCheck {
    pub ess: f64,
    pub resampled: bool,
}

/// Resamples when `ESS < sqrt(D)`; afterwards every log-weight is `-ln D`.
pub fn maybe_resample<P: Weighted, R: Rng + ?Sized>(
    particles: &mut Vec<P>,
    scheme: ResamplingScheme,
    rng: &mut R,
) -> Result<ResampleCheck> {
    let log_w: Vec<f64> = particles.iter().map(Weighted::log_weight).collect();
    let weights = normalize_log_weights(&log_w).ok_or(Error::DegenerateWeights)?;
    let d = particles.len();
    let ess = ess(&weights)?;
    if ess >= (d as f64).sqrt() {
        return Ok(ResampleCheck {
            ess,
            resampled: false,
        });
    }
    let idx = resample_indices(&weights, scheme, rng);
    let reset = -(d as f64).ln();
    let mut next: Vec<P> = idx.into_iter().map(|i| particles[i].clone()).collect();
    next.iter_mut().for_each(|p| p.set_log_weight(reset));
    *particles = next;
    Ok(ResampleCheck {
        ess,
        resampled: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[derive(Clone, Debug, PartialEq)]
    struct W(f64, usize);

    impl Weighted for W {
        fn log_weight(&self) -> f64 {
            self.0
        }
        fn set_log_weight(&mut self, w: f64) {
            self.0 = w;
        }
    }

    #[test]
    fn ess_examples() {
        assert!((ess(&[0.25; 4]).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(ess(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert!((ess(&[0.5, 0.5, 0.0, 0.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(ess(&[0.0, 0.0]), Err(Error::DegenerateWeights)));
    }

    #[test]
    fn uniform_weights_do_not_resample() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for d in 2..10 {
            let mut ps: Vec<W> = (0..d).map(|i| W(0.3, i)).collect();
            let before = ps.clone();
            let check = maybe_resample(&mut ps, ResamplingScheme::Multinomial, &mut rng).unwrap();
            assert!(!check.resampled);
            assert_eq!(ps, before);
        }
    }

    #[test]
    fn collapsed_weights_resample_and_reset() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let eps: f64 = 1e-4;
        let mut ps = vec![
            W((1.0 - 3.0 * eps).ln(), 0),
            W(eps.ln(), 1),
            W(eps.ln(), 2),
            W(eps.ln(), 3),
        ];
        let check = maybe_resample(&mut ps, ResamplingScheme::Multinomial, &mut rng).unwrap();
        assert!(check.resampled);
        assert!(check.ess < 2.0);
        for p in &ps {
            assert_eq!(p.0, -(4f64.ln()));
        }
    }

    #[test]
    fn all_zero_weights_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ps = vec![W(f64::NEG_INFINITY, 0); 3];
        assert!(matches!(
            maybe_resample(&mut ps, ResamplingScheme::Systematic, &mut rng),
            Err(Error::DegenerateWeights)
        ));
    }

    #[test]
    fn systematic_counts_are_near_expected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = [0.1, 0.2, 0.3, 0.4];
        for _ in 0..100 {
            let idx = resample_indices(&w, ResamplingScheme::Systematic, &mut rng);
            for (i, &wi) in w.iter().enumerate() {
                let c = idx.iter().filter(|&&j| j == i).count() as f64;
                assert!((c - 4.0 * wi).abs() < 1.0 + 1e-12);
            }
        }
    }
}
