//! Normal distribution helpers shared by the transform and statistics code.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

/// Standard normal cdf.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    0.398_942_280_401_432_7 * (-0.5 * x * x).exp()
}

/// Standard normal quantile `Φ⁻¹(p)` for `p` in (0, 1).
///
/// Starts from the inverse complementary error function and polishes with
/// one Halley step against the accurate cdf.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    // work on the smaller tail for accuracy
    let (x, flip) = if x > 0.0 { (-x, true) } else { (x, false) };
    let target = if flip { 1.0 - p } else { p };
    let err = normal_cdf(x) - target;
    let pdf = normal_pdf(x);
    let x = if pdf > 0.0 {
        let u = err / pdf;
        x - u / (1.0 + 0.5 * x * u)
    } else {
        x
    };
    if flip {
        -x
    } else {
        x
    }
}
