//! Explicit Wasserstein rate bounds for the normalised sojourn time.
//!
//! The proofs only say "const" in several places. Every such constant is
//! instantiated here from a named ingredient and returned in
//! [`RateBound::constants_profile`], so nothing numeric is hidden. The
//! bounds are shapes: they are not claimed to be sharp.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::hermite_chaos::{en1_constant, hermite_bound_scan, ScaledHermite};
use crate::normal;
use crate::variance_theory::{berman_constant, berman_exponent};

/// Highest Hermite order scanned when measuring the Hermite constants.
pub const HERMITE_SCAN_ORDER: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fixed,
    Moving,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Fixed => "fixed",
            Mode::Moving => "moving",
        })
    }
}

/// Where a constant in the profile comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Scanned numerically (Hermite maxima, tail ladder).
    Measured,
    /// A closed-form property of the model or of the Gaussian law.
    ClosedForm,
    /// Assembled from other entries of the profile.
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateBound {
    pub t: f64,
    pub u: f64,
    pub mode: Mode,
    pub n_trunc: usize,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub d3: Option<f64>,
    pub term_body: Option<f64>,
    pub term_tail: Option<f64>,
    pub total: f64,
    pub constants_profile: BTreeMap<String, ProfileEntry>,
}

impl RateBound {
    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants_profile.get(name).map(|e| e.value)
    }
}

#[derive(Default)]
struct Profile(BTreeMap<String, ProfileEntry>);

impl Profile {
    fn put(&mut self, name: &str, value: f64, provenance: Provenance) -> f64 {
        self.0.insert(name.to_string(), ProfileEntry { value, provenance });
        value
    }
}

/// `N_T = max(2, round(log(T) / 4))`.
pub fn truncation_fixed(t: f64) -> Result<usize> {
    if !(t > 1.0) || !t.is_finite() {
        return Err(Error::Precondition(format!("window must exceed 1, got {t}")));
    }
    Ok(((t.ln() / 4.0).round() as usize).max(2))
}

/// `N_T` with `3^{N_T} = T^{d/2 - beta}`, rounded, clamped below at 2.
pub fn truncation_moving(t: f64, d: usize, beta: f64) -> Result<usize> {
    if !(t > 1.0) || !t.is_finite() {
        return Err(Error::Precondition(format!("window must exceed 1, got {t}")));
    }
    let half_d = 0.5 * d as f64;
    if !(beta > 0.0 && beta < half_d) {
        return Err(Error::Precondition(format!("beta must lie in (0, {half_d}), got {beta}")));
    }
    Ok((((half_d - beta) * t.ln() / 3f64.ln()).round() as usize).max(2))
}

/// Whether `u_T = c (log T)^gamma` satisfies `(log T)^{-1/6} u_T^{(2+alpha)/alpha} -> 0`.
///
/// The boundary case does not converge to zero and is classified as `false`.
pub fn corollary_condition(gamma: f64, alpha: f64) -> bool {
    gamma * (2.0 + alpha) / alpha < 1.0 / 6.0
}

struct HermiteConstants {
    /// sup over `(u, n)` of `phi(u)|He_n(u)|/sqrt(n!)`.
    k_en2: f64,
    /// sup over the order ladder of `max_x |hs_n(x)| n^{1/12}`.
    c_en3: f64,
}

fn hermite_constants() -> &'static HermiteConstants {
    static CELL: OnceLock<HermiteConstants> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid: Vec<f64> = (0..=64).map(|i| -8.0 + 0.25 * i as f64).collect();
        let scan = hermite_bound_scan(&grid, HERMITE_SCAN_ORDER).expect("static scan arguments");
        let c_en3 = scan
            .en3_ratio_trace
            .iter()
            .map(|p| p.ratio)
            .fold(0.0, f64::max);
        HermiteConstants {
            k_en2: scan.k_hat,
            c_en3,
        }
    })
}

fn tail_constant(model: &CovarianceModel) -> Result<f64> {
    let audit = model.tail_audit()?;
    if !audit.passes {
        return Err(Error::Precondition(format!(
            "tail decay audit failed: tail(a) log(a) still growing at a = {}",
            audit.points.last().map_or(f64::NAN, |p| p.a)
        )));
    }
    Ok(audit.c_tail)
}

/// `sqrt(l1^3) K^2 (1/2 + 2/(sqrt 3 - 1)^2)`: the diagonal sum is at most
/// `3^N / 2` and the off-diagonal one at most `2 (3^{N/2}/(sqrt 3 - 1))^2`.
fn k2_constant(l1: f64, k_en2: f64) -> f64 {
    let r = 3f64.sqrt() - 1.0;
    l1.powf(1.5) * k_en2 * k_en2 * (0.5 + 2.0 / (r * r))
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n as u64) - ln_factorial(k as u64) - ln_factorial((n - k) as u64)
}

/// `ln sum_r (r!)^2 C(p-1,r)^2 C(q-1,r)^2 (p+q-2-2r)!`, skipping the `r` that
/// would pair the two chaoses into a constant.
fn ln_contraction_sum(p: usize, q: usize) -> f64 {
    let logs: Vec<f64> = (0..p.min(q))
        .filter(|&r| p + q - 2 - 2 * r > 0)
        .map(|r| {
            2.0 * ln_factorial(r as u64)
                + 2.0 * ln_binomial(p - 1, r)
                + 2.0 * ln_binomial(q - 1, r)
                + ln_factorial((p + q - 2 - 2 * r) as u64)
        })
        .collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    peak + logs.iter().map(|l| (l - peak).exp()).sum::<f64>().ln()
}

/// The `d2` bracket before the contraction sums are bounded by powers of 9,
/// using the true `phi(u)|He_{p-1}(u)|` values. Always below `K2 3^N / sqrt(T^d)`.
pub fn d2_explicit(model: &CovarianceModel, u: f64, t: f64, n_trunc: usize) -> Result<f64> {
    if n_trunc < 2 {
        return Err(Error::InvalidArgument(format!("truncation must be >= 2, got {n_trunc}")));
    }
    let l1 = model.l1_norm()?;
    // ln(phi(u)|He_{p-1}(u)|) for p = 1..=N
    let mut ln_coef = vec![f64::NEG_INFINITY; n_trunc + 1];
    let mut it = ScaledHermite::new(u);
    for (p, slot) in ln_coef.iter_mut().enumerate().skip(1) {
        let hs = it.next().expect("infinite iterator");
        *slot = normal::ln_pdf(u)
            + 0.25 * u * u
            + hs.abs().ln()
            + 0.5 * ln_factorial(p as u64 - 1);
    }
    let lf = |k: usize| ln_factorial(k as u64);
    let mut sum = 0.0;
    for p in 2..=n_trunc {
        for q in 2..=n_trunc {
            let weight = if p == q {
                p as f64
            } else {
                (1.0 / p as f64 + 1.0 / q as f64) * (p * q) as f64
            };
            let ln_term =
                ln_coef[p] + ln_coef[q] - lf(p) - lf(q) + 0.5 * ln_contraction_sum(p, q);
            sum += weight * ln_term.exp();
        }
    }
    Ok(l1.powf(1.5) * sum / t.powf(0.5 * model.dim() as f64))
}

/// Fixed-level bound `d1 + d2 + d3` on `d_W((S_T - T^d Phi_bar(u))/sqrt(T^d), N(0, sigma^2))`.
pub fn fixed_level_bound(model: &CovarianceModel, u: f64, t: f64) -> Result<RateBound> {
    if !u.is_finite() {
        return Err(Error::InvalidArgument(format!("level must be finite, got {u}")));
    }
    let n = truncation_fixed(t)?;
    let d = model.dim() as f64;
    let hc = hermite_constants();
    let mut prof = Profile::default();

    let l1 = prof.put("l1_norm", model.l1_norm()?, Provenance::ClosedForm);
    let c_u = prof.put(
        "C_u",
        en1_constant(u, HERMITE_SCAN_ORDER).c_u,
        Provenance::Measured,
    );
    let k_en2 = prof.put("K_hermite", hc.k_en2, Provenance::Measured);
    let c_tail = prof.put("c_tail", tail_constant(model)?, Provenance::Measured);
    let v = prof.put(
        "indicator_variance",
        normal::indicator_variance(u),
        Provenance::ClosedForm,
    );

    // sum_{n>N} n^{-3/2} <= 2 N^{-1/2}
    let k1 = prof.put(
        "K1",
        c_u * normal::pdf(u).sqrt() * l1.sqrt() * 2f64.sqrt(),
        Provenance::Derived,
    );
    let k2 = prof.put("K2", k2_constant(l1, k_en2), Provenance::Derived);
    let k3_trunc = prof.put("K3_trunc", k1, Provenance::Derived);
    let k3_window = prof.put("K3_window", (l1 * v).sqrt(), Provenance::Derived);
    let k3_tail = prof.put("K3_tail", (2.0 * v * c_tail).sqrt(), Provenance::Derived);
    // W1 between centred Gaussians is sqrt(2/pi)|s1 - s2| <= sqrt(2/pi) sqrt|s1^2 - s2^2|.
    let k3 = prof.put(
        "K3",
        (2.0 / PI).sqrt() * k3_trunc.max(k3_window).max(k3_tail),
        Provenance::Derived,
    );

    let nf = n as f64;
    let d1 = k1 * nf.powf(-0.25);
    let d2 = k2 * 3f64.powi(n as i32) / t.powf(0.5 * d);
    let d3 = k3 * (nf.powf(-0.25) + t.powf(-0.25) + t.ln().powf(-0.5));
    prof.put("d2_explicit", d2_explicit(model, u, t, n)?, Provenance::Derived);

    Ok(RateBound {
        t,
        u,
        mode: Mode::Fixed,
        n_trunc: n,
        d1: Some(d1),
        d2: Some(d2),
        d3: Some(d3),
        term_body: None,
        term_tail: None,
        total: d1 + d2 + d3,
        constants_profile: prof.0,
    })
}

/// Moving-level bound `C_beta (term_body + term_tail)` on
/// `d_W((S_T - E S_T)/sqrt(Var S_T), N(0, 1))`.
///
/// `term_body` uses the exponent `1 + 2d/alpha`; the one-dimensional form
/// `(2 + alpha)/alpha` is evaluated alongside as `term_body_one_dimensional`.
pub fn moving_level_bound(model: &CovarianceModel, u: f64, t: f64, beta: f64) -> Result<RateBound> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::Precondition(format!("moving level must be > 0, got {u}")));
    }
    let d = model.dim();
    let n = truncation_moving(t, d, beta)?;
    let hc = hermite_constants();
    let exponent = berman_exponent(model)?;
    let mut prof = Profile::default();

    let l1 = prof.put("l1_norm", model.l1_norm()?, Provenance::ClosedForm);
    let k_b = prof.put("K_berman", berman_constant(model)?, Provenance::Measured);
    let c3 = prof.put("c_hermite_sup", hc.c_en3, Provenance::Measured);
    let k_en2 = prof.put("K_hermite", hc.k_en2, Provenance::Measured);
    prof.put("beta", beta, Provenance::ClosedForm);
    prof.put("exponent_general", exponent.general, Provenance::ClosedForm);
    prof.put("exponent_one_dimensional", exponent.one_dimensional, Provenance::ClosedForm);

    // phi(u) He_{n-1}(u)^2/n! <= phi(0) c3^2 n^{-7/6}, sum_{n>N} n^{-7/6} <= 6 N^{-1/6},
    // and N = (d/2 - beta) log T / log 3.
    let rate = (0.5 * d as f64 - beta) / 3f64.ln();
    let c_body = prof.put(
        "C_body",
        (normal::pdf(0.0) * 6.0 * c3 * c3 * l1 / k_b).sqrt() * rate.powf(-1.0 / 12.0),
        Provenance::Derived,
    );
    let c_tail = prof.put(
        "C_tail",
        k2_constant(l1, k_en2) / (2.0 * k_b).sqrt(),
        Provenance::Derived,
    );
    let c_beta = prof.put("C_beta", c_body.max(c_tail), Provenance::Derived);

    let log_t = t.ln();
    let term_body = (u.powf(exponent.general) / log_t.powf(1.0 / 6.0)).sqrt();
    prof.put(
        "term_body_one_dimensional",
        (u.powf(exponent.one_dimensional) / log_t.powf(1.0 / 6.0)).sqrt(),
        Provenance::Derived,
    );
    // 1 / (T^beta phi(u) u) in logs: phi(u) underflows long before the ratio does.
    let term_tail = (-(beta * log_t + normal::ln_pdf(u) + u.ln())).exp();

    Ok(RateBound {
        t,
        u,
        mode: Mode::Moving,
        n_trunc: n,
        d1: None,
        d2: None,
        d3: None,
        term_body: Some(term_body),
        term_tail: Some(term_tail),
        total: c_beta * (term_body + term_tail),
        constants_profile: prof.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp1() -> CovarianceModel {
        CovarianceModel::powered_exponential(1.0, 1.0, 1).unwrap()
    }

    fn gauss() -> CovarianceModel {
        CovarianceModel::powered_exponential(2.0, 1.0, 1).unwrap()
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncation_fixed(8f64.exp()).unwrap(), 2);
        assert_eq!(truncation_fixed(40f64.exp()).unwrap(), 10);
        assert_eq!(truncation_fixed(2.0).unwrap(), 2);
        assert!(truncation_fixed(1.0).is_err());
        assert_eq!(truncation_moving(3f64.powi(40), 1, 0.25).unwrap(), 10);
        assert_eq!(truncation_moving(3f64.powi(20), 2, 0.5).unwrap(), 10);
        assert!(matches!(truncation_moving(100.0, 1, 0.6), Err(Error::Precondition(_))));
        assert!(truncation_moving(100.0, 1, 0.0).is_err());
    }

    #[test]
    fn corollary_examples() {
        assert!(corollary_condition(0.01, 2.0));
        assert!(!corollary_condition(1.0, 2.0));
        assert!(!corollary_condition(1.0 / 12.0, 2.0));
    }

    const LADDER: [f64; 4] = [8.0, 16.0, 32.0, 64.0];

    #[test]
    fn fixed_total_nonincreasing_and_rate_shaped() {
        let bounds: Vec<RateBound> = LADDER
            .iter()
            .map(|&l| fixed_level_bound(&exp1(), 0.0, l.exp()).unwrap())
            .collect();
        for w in bounds.windows(2) {
            assert!(w[1].total <= w[0].total, "{} > {}", w[1].total, w[0].total);
        }
        let scaled: Vec<f64> = bounds.iter().map(|b| b.total * b.t.ln().powf(0.25)).collect();
        let max = scaled.iter().copied().fold(0.0, f64::max);
        assert!(max.is_finite() && scaled.last().unwrap() <= &max);
        for b in &bounds {
            let sum = b.d1.unwrap() + b.d2.unwrap() + b.d3.unwrap();
            assert_eq!(b.total, sum);
        }
    }

    #[test]
    fn d2_over_d1_decreases() {
        let ratios: Vec<f64> = LADDER
            .iter()
            .map(|&l| {
                let b = fixed_level_bound(&exp1(), 0.5, l.exp()).unwrap();
                b.d2.unwrap() / b.d1.unwrap()
            })
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    }

    #[test]
    fn explicit_bracket_is_dominated() {
        for &u in &[0.0, 1.0, 2.5] {
            for &l in &LADDER {
                let b = fixed_level_bound(&gauss(), u, l.exp()).unwrap();
                let explicit = b.constant("d2_explicit").unwrap();
                assert!(explicit >= 0.0 && explicit <= b.d2.unwrap(), "u={u} l={l}: {explicit}");
            }
        }
    }

    #[test]
    fn fixed_bound_is_even_in_u() {
        for &u in &[0.5, 1.0, 2.0] {
            let a = fixed_level_bound(&exp1(), u, 1e4).unwrap();
            let b = fixed_level_bound(&exp1(), -u, 1e4).unwrap();
            assert_eq!(a.total, b.total);
        }
    }

    #[test]
    fn profile_lists_every_constant() {
        let b = fixed_level_bound(&exp1(), 0.0, 1e3).unwrap();
        for key in ["C_u", "K_hermite", "c_tail", "K1", "K2", "K3", "l1_norm"] {
            let v = b.constant(key).unwrap_or_else(|| panic!("missing {key}"));
            assert!(v.is_finite() && v > 0.0, "{key} = {v}");
        }
        assert!((b.constant("K_hermite").unwrap() - normal::pdf(0.0)).abs() < 1e-12);
        let m = moving_level_bound(&exp1(), 3.0, 1e3, 0.25).unwrap();
        for key in ["C_body", "C_tail", "C_beta", "K_berman", "c_hermite_sup"] {
            assert!(m.constant(key).unwrap() > 0.0, "{key}");
        }
    }

    #[test]
    fn moving_examples() {
        // u_T = (log T)^{0.01}: vanishing along the ladder.
        let totals: Vec<f64> = [1e3, 1e6, 1e12, 1e24]
            .iter()
            .map(|&t: &f64| {
                let u = t.ln().powf(0.01);
                moving_level_bound(&gauss(), u, t, 0.25).unwrap().total
            })
            .collect();
        assert!(totals.windows(2).all(|w| w[1] < w[0]), "{totals:?}");
        // u_T = sqrt(2 beta log T): T^beta phi(u_T) is constant, the tail term only
        // decays like 1/u_T and the body term grows, so the bound does not vanish.
        let bounds: Vec<RateBound> = [1e3, 1e6, 1e12, 1e24]
            .iter()
            .map(|&t: &f64| moving_level_bound(&gauss(), (0.5 * t.ln()).sqrt(), t, 0.25).unwrap())
            .collect();
        for b in &bounds {
            let scaled = b.term_tail.unwrap() * b.u;
            assert!((scaled - (2.0 * PI).sqrt()).abs() < 1e-9, "{scaled}");
        }
        assert!(bounds.windows(2).all(|w| w[1].total > w[0].total));
        // Pole at u -> 0.
        let near = moving_level_bound(&gauss(), 1e-8, 1e3, 0.25).unwrap();
        assert!(near.term_tail.unwrap() > 1e6);
        assert!(moving_level_bound(&gauss(), 0.0, 1e3, 0.25).is_err());
    }

    #[test]
    fn moving_reports_both_exponents() {
        let m2 = CovarianceModel::powered_exponential(1.0, 1.0, 2).unwrap();
        let b = moving_level_bound(&m2, 3.0, 1e4, 0.5).unwrap();
        assert_eq!(b.constant("exponent_general"), Some(5.0));
        assert_eq!(b.constant("exponent_one_dimensional"), Some(3.0));
        assert!(b.constant("term_body_one_dimensional").unwrap() < b.term_body.unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn moving_total_increases_in_level(u in 1.0f64..4.9, du in 0.01f64..0.1) {
            let a = moving_level_bound(&exp1(), u, 500.0, 0.25).unwrap();
            let b = moving_level_bound(&exp1(), u + du, 500.0, 0.25).unwrap();
            prop_assert!(b.total > a.total);
        }

        #[test]
        fn fixed_fields_finite_and_positive(u in -4.0f64..4.0, lt in 1.0f64..60.0) {
            let b = fixed_level_bound(&exp1(), u, lt.exp()).unwrap();
            for x in [b.d1.unwrap(), b.d2.unwrap(), b.d3.unwrap(), b.total] {
                prop_assert!(x.is_finite() && x > 0.0);
            }
        }
    }
}
