//! Exact Wasserstein-1 distance between an empirical law and `N(0, sigma^2)`.

use crate::error::{Error, Result};
use crate::normal;

/// `int |F_n(x) - Phi(x/sigma)| dx`, integrated in closed form on each
/// segment between order statistics and split where the two CDFs cross.
pub fn wasserstein1_to_gaussian(samples: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
    }
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    // int_a^b Phi(t/sigma) dt
    let g = |z: f64| sigma * normal::cdf_antiderivative(z / sigma);
    let mass = |a: f64, b: f64| g(b) - g(a);

    let mut total = g(x[0]) + g(-x[n - 1]);
    for k in 1..n {
        let (a, b) = (x[k - 1], x[k]);
        if b == a {
            continue;
        }
        let p = k as f64 / n as f64;
        let c = sigma * normal::quantile(p);
        total += if c <= a {
            mass(a, b) - p * (b - a)
        } else if c >= b {
            p * (b - a) - mass(a, b)
        } else {
            (p * (c - a) - mass(a, c)) + (mass(c, b) - p * (b - c))
        };
    }
    Ok(total)
}
