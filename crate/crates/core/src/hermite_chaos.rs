//! Probabilists' Hermite polynomials, the chaos coefficients of the level
//! indicator `1{X >= u}`, Mehler covariances and the combinatorial bounds
//! that drive the fixed-level rate.
//!
//! The workhorse is the normalised function
//! `hs_n(x) = exp(-x^2/4) He_n(x) / sqrt(n!)`, obtained from the recurrence
//! `hs_{n+1} = (x hs_n - sqrt(n) hs_{n-1}) / sqrt(n+1)`. It is bounded by
//! Cramér's constant for every `n` and `x`, so every chaos quantity is formed
//! from it rather than from raw polynomials and factorials.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::normal;
use crate::quadrature::golden_max;

/// Cramér's inequality: `|hs_n(x)| <= CRAMER_BOUND` for all `n`, `x`.
pub const CRAMER_BOUND: f64 = 1.086_435;

/// Coefficients up to this order are evaluated directly; above it in logs.
pub const LOG_DOMAIN_THRESHOLD: usize = 30;

/// Order cap for the adaptive chaos series.
pub const DEFAULT_MAX_ORDER: usize = 1 << 24;

const RESCALE: f64 = 1e150;

/// `He_n(x)` by the three-term recurrence. Overflows for large `n |x|`;
/// use [`hermite_scaled`] there.
pub fn hermite(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, x);
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Iterator over `hs_0(x), hs_1(x), ...`.
///
/// The recurrence runs on a rescaled pair; the dropped magnitude and the
/// `exp(-x^2/4)` factor live in a separate logarithm.
#[derive(Debug, Clone)]
pub struct ScaledHermite {
    x: f64,
    n: usize,
    prev: f64,
    cur: f64,
    ln_scale: f64,
}

impl ScaledHermite {
    pub fn new(x: f64) -> Self {
        ScaledHermite {
            x,
            n: 0,
            prev: 0.0,
            cur: 1.0,
            ln_scale: -0.25 * x * x,
        }
    }

    /// `(sign, ln|hs_n|)` of the current order.
    fn current_ln(&self) -> (f64, f64) {
        if self.cur == 0.0 {
            (0.0, f64::NEG_INFINITY)
        } else {
            (self.cur.signum(), self.cur.abs().ln() + self.ln_scale)
        }
    }

    fn advance(&mut self) {
        let k = self.n as f64;
        let next = (self.x * self.cur - k.sqrt() * self.prev) / (k + 1.0).sqrt();
        self.prev = self.cur;
        self.cur = next;
        self.n += 1;
        if self.cur.abs() > RESCALE {
            self.prev /= RESCALE;
            self.cur /= RESCALE;
            self.ln_scale += RESCALE.ln();
        }
    }

    /// Advance to order `n` and return `(sign, ln|hs_n(x)|)`.
    pub fn ln_at(mut self, n: usize) -> (f64, f64) {
        while self.n < n {
            self.advance();
        }
        self.current_ln()
    }
}

impl Iterator for ScaledHermite {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let (sign, ln_abs) = self.current_ln();
        self.advance();
        Some(sign * ln_abs.exp())
    }
}

/// `exp(-x^2/4) He_n(x) / sqrt(n!)`, finite for any order and argument.
pub fn hermite_scaled(n: usize, x: f64) -> f64 {
    let (sign, ln_abs) = ScaledHermite::new(x).ln_at(n);
    sign * ln_abs.exp()
}

/// Weight of the level-`u` indicator on the `n`-th chaos.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaosCoefficient {
    pub n: usize,
    pub u: f64,
    /// `phi(u) He_{n-1}(u) / n!`
    pub value: f64,
}

pub fn chaos_coefficient(n: usize, u: f64) -> Result<ChaosCoefficient> {
    if n == 0 {
        return Err(Error::InvalidArgument("chaos order must be >= 1".into()));
    }
    let value = if n <= LOG_DOMAIN_THRESHOLD {
        let factorial: f64 = (1..=n).map(|k| k as f64).product();
        normal::pdf(u) * hermite(n - 1, u) / factorial
    } else {
        let (sign, ln_hs) = ScaledHermite::new(u).ln_at(n - 1);
        let ln_abs = normal::ln_pdf(u) + 0.25 * u * u + ln_hs + 0.5 * ln_factorial(n as u64 - 1)
            - ln_factorial(n as u64);
        sign * ln_abs.exp()
    };
    Ok(ChaosCoefficient { n, u, value })
}

/// `n! c_n(u)^2` for `n = 1, 2, ...`, i.e. `phi(u) hs_{n-1}(u)^2 / (sqrt(2 pi) n)`.
pub fn chaos_energies(u: f64) -> impl Iterator<Item = (usize, f64)> {
    let weight = normal::pdf(u) * normal::FRAC_1_SQRT_2PI;
    ScaledHermite::new(u)
        .enumerate()
        .map(move |(m, hs)| (m + 1, weight * hs * hs / (m + 1) as f64))
}

/// Smooth asymptotic of `sum_{n > order} n! c_n(u)^2`.
///
/// Averaged over consecutive orders `hs_m(u)^2 ~ 1/sqrt(2 pi (m - u^2/4))`,
/// so the tail behaves like `phi(u)/(2 pi) * int_X^inf dx / (x sqrt(x - c))`
/// with `c = 1 + u^2/4` and `X = order + 1/2`. What is left after adding it
/// decays like `order^{-3/2}`.
pub fn indicator_tail_estimate(u: f64, order: usize) -> Option<f64> {
    let c = 1.0 + 0.25 * u * u;
    let x = order as f64 + 0.5;
    (x > 2.0 * c).then(|| {
        normal::pdf(u) / (2.0 * std::f64::consts::PI) * 2.0 / c.sqrt()
            * (c / (x - c)).sqrt().atan()
    })
}

/// `sum_{n>=1} n! c_n(u)^2`, which equals `Phi_bar(u)(1 - Phi_bar(u))`.
///
/// The terms decay only like `n^{-3/2}`, so partial sums are completed with
/// [`indicator_tail_estimate`] and accepted once two completed sums at
/// orders `N` and `2N` agree to `tol / 4`.
pub fn indicator_variance_series(u: f64, tol: f64) -> Result<f64> {
    indicator_variance_series_with(u, tol, DEFAULT_MAX_ORDER)
}

pub fn indicator_variance_series_with(u: f64, tol: f64, max_order: usize) -> Result<f64> {
    if !(tol > 0.0) || !u.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need finite u and tol > 0, got u={u}, tol={tol}"
        )));
    }
    let mut sum = 0.0;
    let mut checkpoint = 256;
    let mut previous: Option<f64> = None;
    for (n, term) in chaos_energies(u).take(max_order) {
        sum += term;
        if n == checkpoint {
            checkpoint *= 2;
            let Some(tail) = indicator_tail_estimate(u, n) else {
                continue;
            };
            let completed = sum + tail;
            if let Some(p) = previous {
                if (completed - p).abs() < 0.25 * tol {
                    return Ok(completed);
                }
            }
            previous = Some(completed);
        }
    }
    Err(Error::ToleranceUnreachable { tol, max_order })
}

/// `sum_{n>=1} n! c_n(u)^2 rho^n`, the chaos form of
/// `Cov(1{X >= u}, 1{Y >= u})` for standard Gaussians with correlation `rho`.
///
/// For `|rho| < 1` the series is cut once Cramér's bound on the remaining
/// geometric tail falls below `tol`; `rho = 1` is the indicator variance.
pub fn chaos_covariance_series(u: f64, rho: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    if !(rho.abs() <= 1.0) {
        return Err(Error::Domain(format!("correlation {rho} outside [-1, 1]")));
    }
    if rho == 1.0 {
        return indicator_variance_series(u, tol);
    }
    if rho == -1.0 {
        return Err(Error::Domain(
            "the chaos series is only conditionally convergent at rho = -1".into(),
        ));
    }
    let weight = normal::pdf(u) * normal::FRAC_1_SQRT_2PI;
    let a = rho.abs();
    let mut power = 1.0;
    let mut sum = 0.0;
    for (n, term) in chaos_energies(u).take(DEFAULT_MAX_ORDER) {
        power *= rho;
        sum += term * power;
        let tail = weight * CRAMER_BOUND * CRAMER_BOUND * power.abs() * a
            / ((n + 1) as f64 * (1.0 - a));
        if tail < tol {
            return Ok(sum);
        }
    }
    Err(Error::ToleranceUnreachable {
        tol,
        max_order: DEFAULT_MAX_ORDER,
    })
}

/// `E[He_n(X) He_n(Y)] = n! rho^n`.
pub fn mehler_covariance(n: usize, rho: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("order must be >= 1".into()));
    }
    if !(rho.abs() <= 1.0) {
        return Err(Error::Domain(format!("correlation {rho} outside [-1, 1]")));
    }
    let ln_abs = ln_factorial(n as u64) + n as f64 * rho.abs().ln();
    let sign = if rho < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    if rho == 0.0 {
        return Ok(0.0);
    }
    Ok(sign * ln_abs.exp())
}

fn binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Exact check of `sum_r C(p-1,r)^2 C(2p-2-2r, p-1-r) <= 9^{p-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCertificate {
    pub p: u64,
    pub lhs: BigRational,
    pub rhs: BigInt,
    pub holds: bool,
}

pub fn chaos_variance_inequality(p: u64) -> Result<InequalityCertificate> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("p must be >= 2, got {p}")));
    }
    let lhs: BigUint = (0..=p - 2)
        .map(|r| {
            let b = binomial(p - 1, r);
            &b * &b * binomial(2 * (p - 1 - r), p - 1 - r)
        })
        .fold(BigUint::zero(), |acc, x| acc + x);
    let rhs = BigInt::from(9u32).pow((p - 1) as u32);
    let lhs = BigRational::from_integer(BigInt::from(lhs));
    let holds = lhs <= BigRational::from_integer(rhs.clone());
    Ok(InequalityCertificate { p, lhs, rhs, holds })
}

/// Value of the `Var ||D F_n||^2` bound; `value` is `inf` when it overflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MalliavinBound {
    pub value: f64,
    pub ln_value: f64,
    pub overflow: bool,
}

/// `(n^4 / T^d) sum_{r=0}^{n-2} (r!)^2 C(n-1,r)^4 (2n-2-2r)! * rho_l1^3`.
pub fn malliavin_derivative_variance_bound(
    n: usize,
    t: f64,
    d: usize,
    rho_l1: f64,
) -> Result<MalliavinBound> {
    if n < 2 || !(t > 0.0) || d == 0 || !(rho_l1 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need n >= 2, T > 0, d >= 1, rho_l1 > 0 (got n={n}, T={t}, d={d}, l1={rho_l1})"
        )));
    }
    let lf = |k: usize| ln_factorial(k as u64);
    let logs: Vec<f64> = (0..=n - 2)
        .map(|r| {
            let ln_binom = lf(n - 1) - lf(r) - lf(n - 1 - r);
            2.0 * lf(r) + 4.0 * ln_binom + lf(2 * n - 2 - 2 * r)
        })
        .collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = peak + logs.iter().map(|l| (l - peak).exp()).sum::<f64>().ln();
    let ln_value = 4.0 * (n as f64).ln() - d as f64 * t.ln() + lse + 3.0 * rho_l1.ln();
    let value = ln_value.exp();
    Ok(MalliavinBound {
        value,
        ln_value,
        overflow: value.is_infinite(),
    })
}

/// Largest `C_u` making `exp(-u^2/4)|He_n(u)| <= C_u (n/e)^{n/2}` hold for `n <= n_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct En1Constant {
    pub u: f64,
    pub c_u: f64,
    pub argmax_n: usize,
}

pub fn en1_constant(u: f64, n_max: usize) -> En1Constant {
    let mut best = (f64::NEG_INFINITY, 0);
    let mut it = ScaledHermite::new(u);
    for n in 0..=n_max {
        let (_, ln_hs) = it.current_ln();
        let nf = n as f64;
        let ln_power = if n == 0 { 0.0 } else { 0.5 * nf * (nf.ln() - 1.0) };
        let v = ln_hs + 0.5 * ln_factorial(n as u64) - ln_power;
        if v > best.0 {
            best = (v, n);
        }
        it.advance();
    }
    En1Constant {
        u,
        c_u: best.0.exp(),
        argmax_n: best.1,
    }
}

/// `max_x |hs_n(x)|` together with the maximiser `x >= 0`.
///
/// A grid finer than a quarter of the local oscillation period covers
/// `[0, 2 sqrt(n) + 8]`; the best grid point is then refined by golden section.
pub fn scaled_hermite_peak(n: usize) -> (f64, f64) {
    let edge = 2.0 * (n as f64).sqrt() + 8.0;
    let step = (0.25 * std::f64::consts::PI / ((n + 1) as f64).sqrt()).min(0.05);
    let steps = (edge / step).ceil() as usize;
    let f = |x: f64| hermite_scaled(n, x).abs();
    let (mut best_x, mut best) = (0.0, f(0.0));
    for i in 1..=steps {
        let x = i as f64 * step;
        let v = f(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let (x, v) = golden_max(f, (best_x - step).max(0.0), best_x + step, 1e-10);
    if v > best {
        (x, v)
    } else {
        (best_x, best)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct En3Point {
    pub n: usize,
    pub x_max: f64,
    /// `max_x exp(-x^2/4)|He_n(x)| / (sqrt(n!) n^{-1/12})`
    pub ratio: f64,
}

/// Orders `n_max, n_max/2, n_max/4, ...` down to 8, ascending.
pub fn en3_schedule(n_max: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(n_max), |&n| Some(n / 2))
        .take_while(|&n| n >= 8)
        .collect();
    out.reverse();
    out
}

pub fn en3_ratio_trace(n_max: usize) -> Vec<En3Point> {
    en3_schedule(n_max)
        .into_iter()
        .map(|n| {
            let (x_max, peak) = scaled_hermite_peak(n);
            En3Point {
                n,
                x_max,
                ratio: peak * (n as f64).powf(1.0 / 12.0),
            }
        })
        .collect()
}

/// Measured stand-ins for the three Hermite constants used in the proofs.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteBoundScan {
    /// `max phi(u)|He_n(u)|/sqrt(n!)` over the scanned `(u, n)`.
    pub k_hat: f64,
    pub k_hat_at: (f64, usize),
    pub en1_constants: Vec<En1Constant>,
    pub en3_ratio_trace: Vec<En3Point>,
}

pub fn hermite_bound_scan(u_grid: &[f64], n_max: usize) -> Result<HermiteBoundScan> {
    if n_max < 100 {
        return Err(Error::InvalidArgument(format!("n_max must be >= 100, got {n_max}")));
    }
    if u_grid.is_empty() {
        return Err(Error::InvalidArgument("empty u grid".into()));
    }
    let mut k_hat = f64::NEG_INFINITY;
    let mut k_hat_at = (u_grid[0], 0);
    for &u in u_grid {
        // phi(u)|He_n(u)|/sqrt(n!) = phi(0) exp(-u^2/4) |hs_n(u)|
        let prefactor = normal::FRAC_1_SQRT_2PI * (-0.25 * u * u).exp();
        for (n, hs) in ScaledHermite::new(u).take(n_max + 1).enumerate() {
            let v = prefactor * hs.abs();
            if v > k_hat {
                k_hat = v;
                k_hat_at = (u, n);
            }
        }
    }
    Ok(HermiteBoundScan {
        k_hat,
        k_hat_at,
        en1_constants: u_grid.iter().map(|&u| en1_constant(u, n_max)).collect(),
        en3_ratio_trace: en3_ratio_trace(n_max),
    })
}
