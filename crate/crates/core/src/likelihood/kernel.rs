//! `g(R) = R^2/2 + log Phi(R)` without overflow or cancellation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Scaled complementary error function `exp(z^2) erfc(z)` for `z >= 0`.
fn erfcx_nonneg(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < 12.0 {
        return (z * z).exp() * libm::erfc(z);
    }
    // asymptotic series; at z >= 12 the terms shrink by at least 1/288 per step
    let inv2z2 = 1.0 / (2.0 * z * z);
    let mut term: f64 = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term.abs() > 1e-18 {
        term *= -(2.0 * k - 1.0) * inv2z2;
        sum += term;
        k += 1.0;
    }
    sum / (z * PI.sqrt())
}

/// `R^2/2 + log Phi(R)` with `Phi` the standard normal CDF.
///
/// For negative `R` the Gaussian factor is absorbed into a scaled `erfc`, so
/// the result stays finite and accurate down to very negative arguments.
pub fn half_r2_log_phi(r: f64) -> f64 {
    if r.is_nan() {
        return f64::NAN;
    }
    if r >= 0.0 {
        0.5 * r * r + (-0.5 * libm::erfc(r * FRAC_1_SQRT_2)).ln_1p()
    } else {
        (0.5 * erfcx_nonneg(-r * FRAC_1_SQRT_2)).ln()
    }
}
