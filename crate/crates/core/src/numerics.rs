//! Small log-space helpers shared by the samplers.

use rand::Rng;

/// `log(sum(exp(xs)))`, returning `-inf` for an empty slice or all `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Normalizes log-weights into probabilities. Returns `None` when every entry
/// is `-inf` (or the input is empty).
pub fn normalize_log_weights(log_w: &[f64]) -> Option<Vec<f64>> {
    let lse = log_sum_exp(log_w);
    if !lse.is_finite() {
        return None;
    }
    Some(log_w.iter().map(|&w| (w - lse).exp()).collect())
}

/// Draws an index from unnormalized probabilities. Zero-mass entries are never
/// returned.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            if u < p {
                return i;
            }
            u -= p;
            last_positive = i;
        }
    }
    last_positive
}

/// Draws an index from log-probabilities (need not be normalized).
pub fn sample_log_index<R: Rng + ?Sized>(log_probs: &[f64], rng: &mut R) -> Option<usize> {
    let probs = normalize_log_weights(log_probs)?;
    Some(sample_index(&probs, rng))
}

/// Population mean and variance (1/N normalization).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Pearson correlation; zero when either input is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, vx) = mean_var(xs);
    let (my, vy) = mean_var(ys);
    if !(vx > 0.0 && vy > 0.0) {
        return 0.0;
    }
    let cov = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.len() as f64;
    cov / (vx * vy).sqrt()
}

/// `KL(p || q)` for log-probability vectors over the same support.
pub fn kl_divergence_log(log_p: &[f64], log_q: &[f64]) -> f64 {
    log_p
        .iter()
        .zip(log_q)
        .filter(|(lp, _)| **lp > f64::NEG_INFINITY)
        .map(|(&lp, &lq)| lp.exp() * (lp - lq))
        .sum::<f64>()
        .max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn sample_index_skips_zero_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let i = sample_index(&[0.0, 1.0, 0.0, 2.0, 0.0], &mut rng);
            assert!(i == 1 || i == 3);
        }
    }

    #[test]
    fn kl_is_zero_for_identical() {
        let p = [0.2f64.ln(), 0.3f64.ln(), 0.5f64.ln()];
        assert_eq!(kl_divergence_log(&p, &p), 0.0);
    }
}
