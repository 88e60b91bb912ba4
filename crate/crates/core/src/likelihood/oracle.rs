//! Brute-force reference for the marginal likelihood.
//!
//! Integrates the Gaussian measurement density over the slope `beta >= 0`
//! (flat prior) and the offset `m ~ N(0, tau^2)` with nested adaptive
//! Simpson rules. Differences across fitness vectors converge to the
//! closed form as `tau` grows.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Both integrands are log-concave; tails below `mode - TAIL_DROP` in log
/// space are discarded.
const TAIL_DROP: f64 = 46.0;
const GOLDEN: f64 = 1.618_033_988_749_895;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    /// Simpson intervals per dimension at the first level (even).
    pub initial_intervals: usize,
    /// Number of interval doublings after the first level.
    pub max_refinements: usize,
    /// Convergence threshold on the change of the log-integral between levels.
    pub tol: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            initial_intervals: 16,
            max_refinements: 6,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub log_value: f64,
    pub converged: bool,
    pub intervals: usize,
    /// Absolute change of the log-integral at the last refinement.
    pub last_change: f64,
}

fn bracket_mode(logf: &dyn Fn(f64) -> f64, lower: Option<f64>) -> (f64, f64) {
    let mut a = lower.unwrap_or(-1.0);
    let mut b = a + 1.0;
    let (mut fa, mut fb) = (logf(a), logf(b));
    if fb < fa {
        if let Some(l) = lower {
            return (l, b);
        }
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLDEN * (b - a);
    let mut fc = logf(c);
    while fc > fb {
        a = b;
        b = c;
        fb = fc;
        c = b + GOLDEN * (b - a);
        fc = logf(c);
    }
    if a < c {
        (a, c)
    } else {
        (c, a)
    }
}

fn golden_max(logf: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv = 1.0 / GOLDEN;
    let mut x1 = b - inv * (b - a);
    let mut x2 = a + inv * (b - a);
    let (mut f1, mut f2) = (logf(x1), logf(x2));
    for _ in 0..300 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv * (b - a);
            f2 = logf(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv * (b - a);
            f1 = logf(x1);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Point on the `dir` side of `mode` where `logf` falls to `target`.
fn find_drop(
    logf: &dyn Fn(f64) -> f64,
    mode: f64,
    target: f64,
    dir: f64,
    lower: Option<f64>,
) -> f64 {
    let mut w = 1e-9 * (1.0 + mode.abs());
    let mut inner = mode;
    loop {
        let x = mode + dir * w;
        if let Some(l) = lower {
            if x <= l {
                return l;
            }
        }
        if logf(x) <= target {
            break;
        }
        inner = x;
        w *= 2.0;
    }
    let mut outer = mode + dir * w;
    for _ in 0..200 {
        let mid = 0.5 * (inner + outer);
        if mid == inner || mid == outer {
            break;
        }
        if logf(mid) > target {
            inner = mid;
        } else {
            outer = mid;
        }
    }
    outer
}

/// `log ∫ exp(logf)` over `[lower, ∞)` (or the real line) for log-concave `logf`.
fn log_integrate(logf: &dyn Fn(f64) -> f64, lower: Option<f64>, intervals: usize) -> f64 {
    let (a, b) = bracket_mode(logf, lower);
    let (mode, fmax) = golden_max(logf, a, b);
    let target = fmax - TAIL_DROP;
    let hi = find_drop(logf, mode, target, 1.0, None);
    let lo = find_drop(logf, mode, target, -1.0, lower);
    let n = intervals + intervals % 2;
    let h = (hi - lo) / n as f64;
    let mut sum = 0.0;
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * (logf(lo + i as f64 * h) - fmax).exp();
    }
    fmax + (sum * h / 3.0).ln()
}

/// `log ∫_0^∞ ∫ N(Y; beta F + m 1, sigma^2 I) N(m; 0, tau^2) dm dbeta`.
pub fn numeric_integration_oracle(
    f: &[f64],
    y: &[f64],
    sigma: f64,
    tau: f64,
    settings: &QuadratureSettings,
) -> Result<OracleResult> {
    if f.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            got: f.len(),
        });
    }
    if f.len() < 2 || f.len() > 10 {
        return Err(Error::config(
            "oracle.n",
            "quadrature oracle supports 2 to 10 points",
        ));
    }
    if !(sigma > 0.0 && tau > 0.0) {
        return Err(Error::config(
            "oracle.sigma",
            "sigma and tau must be positive",
        ));
    }
    let n = f.len() as f64;
    let log_norm = -0.5 * n * (2.0 * PI * sigma * sigma).ln() - 0.5 * (2.0 * PI * tau * tau).ln();
    let log_joint = |beta: f64, m: f64| -> f64 {
        let sq: f64 = f
            .iter()
            .zip(y)
            .map(|(fi, yi)| {
                let r = yi - beta * fi - m;
                r * r
            })
            .sum();
        log_norm - sq / (2.0 * sigma * sigma) - m * m / (2.0 * tau * tau)
    };
    let level = |intervals: usize| -> f64 {
        let outer = |beta: f64| log_integrate(&|m| log_joint(beta, m), None, intervals);
        log_integrate(&outer, Some(0.0), intervals)
    };

    let mut intervals = settings.initial_intervals.max(2);
    let mut prev = level(intervals);
    let mut change = f64::INFINITY;
    for _ in 0..settings.max_refinements {
        intervals *= 2;
        let next = level(intervals);
        change = (next - prev).abs();
        prev = next;
        if change < settings.tol {
            break;
        }
    }
    Ok(OracleResult {
        log_value: prev,
        converged: change < settings.tol,
        intervals,
        last_change: change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_integral_exact() {
        // ∫ exp(-(x-3)^2 / (2 * 0.01)) dx = sqrt(2 pi 0.01)
        let logf = |x: f64| -(x - 3.0) * (x - 3.0) / 0.02;
        let v = log_integrate(&logf, None, 64);
        assert!((v - (2.0 * PI * 0.01f64).sqrt().ln()).abs() < 1e-10);
    }

    #[test]
    fn half_line_boundary_mode() {
        // ∫_0^∞ exp(-5x) dx = 1/5
        let v = log_integrate(&|x: f64| -5.0 * x, Some(0.0), 4096);
        assert!((v - 0.2f64.ln()).abs() < 1e-8, "{v}");
    }

    #[test]
    fn rejects_bad_sizes() {
        let s = QuadratureSettings::default();
        assert!(numeric_integration_oracle(&[1.0], &[1.0], 1.0, 1e3, &s).is_err());
        assert!(numeric_integration_oracle(&[1.0; 11], &[1.0; 11], 1.0, 1e3, &s).is_err());
        assert!(numeric_integration_oracle(&[1.0, 2.0], &[1.0, 3.0], 0.0, 1e3, &s).is_err());
    }
}
