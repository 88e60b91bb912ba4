//! Marginal likelihood of measurements given fitness values.
//!
//! Measurements are modelled as `Y = T F + C + noise` with independent
//! Gaussian noise of scale `sigma`, a flat prior on the offset `C` and a flat
//! prior on the positive scale `T`. Integrating both out leaves
//!
//! ```text
//! log p(Y | F) = -1/2 log Var(F) + R^2/2 + log Phi(R) + const,
//! R = sqrt(N) Cov(F, Y) / (sigma Std(F)),
//! ```
//!
//! with population (1/N) moments. The constant is fixed to zero; only
//! differences across `F` are meaningful.

mod kernel;
mod oracle;

use serde::{Deserialize, Serialize};

pub use kernel::half_r2_log_phi;
pub use oracle::{numeric_integration_oracle, OracleResult, QuadratureSettings};

use crate::error::{Error, Result};

/// Noise model settings. The effective noise scale is
/// `sigma_tilde / sqrt(n_cond_max)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LikelihoodParams {
    pub sigma_tilde: f64,
    pub n_cond_max: usize,
    pub var_floor: f64,
}

impl Default for LikelihoodParams {
    fn default() -> Self {
        LikelihoodParams {
            sigma_tilde: 0.25,
            n_cond_max: 75,
            var_floor: 1e-12,
        }
    }
}

impl LikelihoodParams {
    /// Parameters with the given effective `sigma` (no tempering).
    pub fn with_sigma(sigma: f64) -> Self {
        LikelihoodParams {
            sigma_tilde: sigma,
            n_cond_max: 1,
            ..Default::default()
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_tilde / (self.n_cond_max as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_tilde.is_nan() || self.sigma_tilde <= 0.0 {
            return Err(Error::config("likelihood.sigma_tilde", "must be positive"));
        }
        if self.n_cond_max == 0 {
            return Err(Error::config("likelihood.n_cond_max", "must be positive"));
        }
        if self.var_floor.is_nan() || self.var_floor <= 0.0 {
            return Err(Error::config("likelihood.var_floor", "must be positive"));
        }
        Ok(())
    }
}

fn check_inputs(f: &[f64], y: &[f64]) -> Result<()> {
    if f.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            got: f.len(),
        });
    }
    if f.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: f.len(),
        });
    }
    Ok(())
}

/// Likelihood evaluator with the measurements pre-centred, for repeated
/// evaluation against many fitness vectors.
#[derive(Clone, Debug)]
pub struct LikelihoodKernel {
    y_centered: Vec<f64>,
    sigma: f64,
    var_floor: f64,
}

impl LikelihoodKernel {
    pub fn new(y: &[f64], params: &LikelihoodParams) -> Result<Self> {
        params.validate()?;
        if y.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: y.len(),
            });
        }
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        Ok(LikelihoodKernel {
            y_centered: y.iter().map(|v| v - mean).collect(),
            sigma: params.sigma(),
            var_floor: params.var_floor,
        })
    }

    pub fn len(&self) -> usize {
        self.y_centered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_centered.is_empty()
    }

    /// `(Var(F), R)` with the floor rule applied to `R`.
    fn var_and_score(&self, f: &[f64]) -> (f64, f64) {
        let n = f.len() as f64;
        let mean = f.iter().sum::<f64>() / n;
        let mut var = 0.0;
        let mut cov = 0.0;
        for (fi, yi) in f.iter().zip(&self.y_centered) {
            let d = fi - mean;
            var += d * d;
            cov += d * yi;
        }
        var /= n;
        cov /= n;
        let r = if var < self.var_floor {
            0.0
        } else {
            n.sqrt() * cov / (self.sigma * var.sqrt())
        };
        (var, r)
    }

    pub fn score(&self, f: &[f64]) -> f64 {
        self.var_and_score(f).1
    }

    /// `log p(Y | F)` up to the additive constant. `f` must have the kernel's length.
    pub fn log_lik(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.y_centered.len());
        let (var, r) = self.var_and_score(f);
        if !var.is_finite() {
            return f64::NEG_INFINITY;
        }
        -0.5 * var.max(self.var_floor).ln() + half_r2_log_phi(r)
    }
}

/// `R = sqrt(N) Cov(F, Y) / (sigma Std(F))`, zero when `Var(F) < var_floor`.
pub fn correlation_score(f: &[f64], y: &[f64], sigma: f64, var_floor: f64) -> Result<f64> {
    check_inputs(f, y)?;
    let params = LikelihoodParams {
        sigma_tilde: sigma,
        n_cond_max: 1,
        var_floor,
    };
    Ok(LikelihoodKernel::new(y, &params)?.score(f))
}

/// `log p(Y | F)` with the additive constant set to zero.
pub fn log_marginal_likelihood(f: &[f64], y: &[f64], params: &LikelihoodParams) -> Result<f64> {
    check_inputs(f, y)?;
    Ok(LikelihoodKernel::new(y, params)?.log_lik(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn score_examples() {
        let r = correlation_score(&[0.0, 1.0], &[0.0, 1.0], 1.0, 1e-12).unwrap();
        assert!((r - 0.5f64.sqrt()).abs() < 1e-12);
        let r = correlation_score(&[0.0, 1.0], &[1.0, 0.0], 1.0, 1e-12).unwrap();
        assert!((r + 0.5f64.sqrt()).abs() < 1e-12);
        let r = correlation_score(&[0.0, 1.0, 3.0], &[2.0, 2.0, 2.0], 1.0, 1e-12).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            correlation_score(&[1.0], &[1.0], 1.0, 1e-12),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            log_marginal_likelihood(&[], &[], &LikelihoodParams::default()),
            Err(Error::InsufficientData { .. })
        ));
        assert!(
            log_marginal_likelihood(&[1.0, 2.0], &[1.0], &LikelihoodParams::default()).is_err()
        );
    }

    #[test]
    fn flat_fitness_is_floored() {
        let p = LikelihoodParams::with_sigma(1.0);
        let v = log_marginal_likelihood(&[2.0, 2.0, 2.0], &[0.0, 1.0, 2.0], &p).unwrap();
        assert!(v.is_finite());
        assert!((v - (-0.5 * 1e-12f64.ln() + 0.5f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn default_sigma_is_tempered() {
        let p = LikelihoodParams::default();
        assert!((p.sigma() - 0.25 / 75f64.sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn increasing_in_agreement(
            t in 0.0f64..0.95,
            sigma in 0.1f64..3.0,
        ) {
            // Var(F) fixed at 1; correlation with Y grows with t
            let y = [1.0, -1.0, 1.0, -1.0];
            let z = [1.0, 1.0, -1.0, -1.0];
            let f = |t: f64| -> Vec<f64> {
                let c = (1.0 - t * t).sqrt();
                y.iter().zip(&z).map(|(a, b)| t * a + c * b).collect()
            };
            let p = LikelihoodParams::with_sigma(sigma);
            let lo = log_marginal_likelihood(&f(t), &y, &p).unwrap();
            let hi = log_marginal_likelihood(&f(t + 0.04), &y, &p).unwrap();
            prop_assert!(hi > lo);
        }
    }
}
