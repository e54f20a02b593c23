//! Standard normal density, distribution and tail helpers.

use libm::erfc;
use statrs::function::erf::erfc_inv;

pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal distribution function.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `P(Z >= x)`, accurate far into the tail.
#[inline]
pub fn tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Quantile function.
pub fn quantile(p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Antiderivative of the distribution function: `G(x) = x Phi(x) + phi(x)`.
///
/// For negative `x` the tail form `phi(x) - |x| Phi(-|x|)` is used so the
/// result stays accurate where `G` is tiny.
#[inline]
pub fn cdf_antiderivative(x: f64) -> f64 {
    if x < 0.0 {
        pdf(x) + x * tail(-x)
    } else {
        x * cdf(x) + pdf(x)
    }
}

/// `Phi(u)(1 - Phi(u))`, the variance of the indicator `1{Z >= u}`.
pub fn indicator_variance(u: f64) -> f64 {
    let t = tail(u);
    t * (1.0 - t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_values() {
        assert_relative_eq!(pdf(0.0), 0.398_942_280_401_432_7, max_relative = 1e-15);
        assert_relative_eq!(cdf(1.0), 0.841_344_746_068_542_9, max_relative = 1e-14);
        assert_relative_eq!(tail(2.0), 0.022_750_131_948_179_2, max_relative = 1e-13);
        assert_relative_eq!(tail(8.0), 6.220_960_574_271_784e-16, max_relative = 1e-12);
        assert_relative_eq!(quantile(0.975), 1.959_963_984_540_054, max_relative = 1e-12);
    }

    #[test]
    fn antiderivative_matches_numeric_derivative() {
        for &x in &[-6.0, -1.5, 0.0, 0.7, 3.0] {
            let h = 1e-5;
            let d = (cdf_antiderivative(x + h) - cdf_antiderivative(x - h)) / (2.0 * h);
            assert_relative_eq!(d, cdf(x), max_relative = 1e-8, epsilon = 1e-12);
        }
    }
}
