//! Exact and asymptotic variance of the sojourn time.
//!
//! Everything here reduces to the covariance of two level indicators,
//! `int_0^rho phi(u, u, y) dy`, integrated against the window weight
//! `prod_j (T - |t_j|)`. The inner integral is taken in `y = sin(theta)` so
//! the `1/sqrt(1 - y^2)` endpoint singularity disappears.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::hermite_chaos::{chaos_energies, indicator_tail_estimate};
use crate::normal;
use crate::quadrature::{bisect, integrate, integrate_to_infinity, Tolerance};

/// Inner (`y`) integral tolerance.
pub const INNER_REL_TOL: f64 = 1e-10;
/// Outer (`t`) integral tolerance.
pub const OUTER_REL_TOL: f64 = 1e-9;
/// Default `delta` for the localisation box: `1 - rho < 0.5` on `[-eps, eps]^d`.
pub const DEFAULT_LOCALISATION_DELTA: f64 = 0.5;

/// Density of `(X, Y)` with unit variances and correlation `y`, at `(u, u)`.
pub fn bivariate_density(u: f64, y: f64) -> Result<f64> {
    if !(y.abs() < 1.0) {
        return Err(Error::Domain(format!("correlation {y} must satisfy |y| < 1")));
    }
    Ok((-u * u / (1.0 + y)).exp() / (2.0 * PI * (1.0 - y * y).sqrt()))
}

#[inline]
fn indicator_covariance(u: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    let u2 = u * u;
    integrate(
        |theta: f64| {
            let s = 1.0 + theta.sin();
            if s <= 0.0 {
                0.0
            } else {
                (-u2 / s).exp()
            }
        },
        0.0,
        rho.clamp(-1.0, 1.0).asin(),
        &[],
        Tolerance::relative(INNER_REL_TOL).with_abs(1e-300),
    )
    .value
        / (2.0 * PI)
}

/// `Cov(1{X >= u}, 1{Y >= u}) = int_0^rho phi(u, u, y) dy`.
pub fn covariance_of_indicators(u: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::Domain(format!("correlation {rho} outside [-1, 1]")));
    }
    Ok(indicator_covariance(u, rho))
}

fn radial_measure(d: usize, r: f64) -> f64 {
    if d == 1 {
        2.0
    } else {
        2.0 * PI * r
    }
}

/// Break points resolving both the model scale and the high-level scale
/// `u^{-2/alpha}` where the indicator covariance concentrates.
fn breaks_for(model: &CovarianceModel, u: f64) -> Vec<f64> {
    let s = model.scale();
    let mut b: Vec<f64> = [1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0, 3.0, 10.0, 30.0, 100.0]
        .iter()
        .map(|k| k * s)
        .collect();
    if u.abs() > 1.0 {
        let alpha = match *model {
            CovarianceModel::PoweredExponential { alpha, .. } => alpha,
            CovarianceModel::Cauchy { .. } => 2.0,
        };
        let w = s * u.abs().powf(-2.0 / alpha);
        b.extend([0.1 * w, w, 3.0 * w, 10.0 * w]);
    }
    b.sort_by(f64::total_cmp);
    b
}

/// Both routes to the fixed-level limit variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSquared {
    /// `sum_n phi(u)^2 He_{n-1}(u)^2 / n! * int rho^n`
    pub series: f64,
    /// `int_{R^d} Cov(1{X(0) >= u}, 1{X(t) >= u}) dt`
    pub integral: f64,
    pub terms: usize,
}

fn sigma_squared_series(model: &CovarianceModel, u: f64, tol: f64) -> Result<(f64, usize)> {
    let decay = match *model {
        CovarianceModel::PoweredExponential { alpha, d, .. } => d as f64 / alpha,
        CovarianceModel::Cauchy { d, .. } => d as f64 / 2.0,
    };
    let max_order = 1usize << 22;
    let mut sum = 0.0;
    let mut checkpoint = 64;
    let mut previous: Option<f64> = None;
    for (n, energy) in chaos_energies(u).take(max_order) {
        let power = model.rho_power_integral(n as u32)?;
        sum += energy * power;
        if n == checkpoint {
            checkpoint *= 2;
            // int rho^n ~ I_N (N/n)^decay, so the tail weight gains n^{-decay}.
            let Some(energy_tail) = indicator_tail_estimate(u, n) else {
                continue;
            };
            let x = n as f64 + 0.5;
            let scale = (0.5 / (0.5 + decay)) * (n as f64 / x).powf(decay);
            let completed = sum + energy_tail * power * scale;
            if let Some(p) = previous {
                if (completed - p).abs() < 0.25 * tol {
                    return Ok((completed, n));
                }
            }
            previous = Some(completed);
        }
    }
    Err(Error::ToleranceUnreachable { tol, max_order })
}

fn sigma_squared_integral(model: &CovarianceModel, u: f64, tol: f64) -> Result<f64> {
    let d = model.dim();
    integrate_to_infinity(
        |r| radial_measure(d, r) * indicator_covariance(u, model.rho_radial(r)),
        0.0,
        model.scale(),
        &breaks_for(model, u),
        Tolerance::relative(1e-11).with_abs(1e-3 * tol),
    )
    .checked()
}

/// Both routes to `sigma^2(u)` without the agreement check.
pub fn sigma_squared_routes(model: &CovarianceModel, u: f64, tol: f64) -> Result<SigmaSquared> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    let (series, terms) = sigma_squared_series(model, u, tol)?;
    let integral = sigma_squared_integral(model, u, tol)?;
    Ok(SigmaSquared {
        series,
        integral,
        terms,
    })
}

/// Limit variance of `(S_T - T^d Phi_bar(u)) / sqrt(T^d)`.
///
/// The chaos series is cross-checked against direct quadrature of the
/// indicator covariance; disagreement beyond `10 tol` is an error.
pub fn sigma_squared(model: &CovarianceModel, u: f64, tol: f64) -> Result<f64> {
    let r = sigma_squared_routes(model, u, tol)?;
    let allowed = 10.0 * tol;
    if (r.series - r.integral).abs() > allowed {
        return Err(Error::CrossValidation {
            series: r.series,
            integral: r.integral,
            allowed,
        });
    }
    Ok(r.series)
}

/// `int_{[lo,hi]} (T - t) Cov(rho(t)) dt` for one axis.
fn weighted_1d(model: &CovarianceModel, u: f64, t: f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    integrate(
        |x| (t - x) * indicator_covariance(u, model.rho_radial(x)),
        lo,
        hi,
        &breaks_for(model, u),
        Tolerance::relative(tol).with_abs(1e-300),
    )
    .checked()
}

/// `int_{[x0,x1] x [y0,y1]} (T - x)(T - y) Cov(rho(|t|)) dt` in the positive quadrant.
#[allow(clippy::too_many_arguments)]
fn weighted_2d(
    model: &CovarianceModel,
    u: f64,
    t: f64,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    tol: f64,
) -> Result<f64> {
    let breaks = breaks_for(model, u);
    let inner_tol = Tolerance::relative(0.1 * tol).with_abs(1e-300);
    integrate(
        |x| {
            (t - x)
                * integrate(
                    |y| (t - y) * indicator_covariance(u, model.rho_radial(x.hypot(y))),
                    y0,
                    y1,
                    &breaks,
                    inner_tol,
                )
                .value
        },
        x0,
        x1,
        &breaks,
        Tolerance::relative(tol).with_abs(1e-300),
    )
    .checked()
}

fn check_window(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("T must be > 0, got {t}")))
    }
}

/// `Var(S_T) = int_{[-T,T]^d} prod_j (T - |t_j|) int_0^{rho(t)} phi(u,u,y) dy dt`.
pub fn var_sojourn_exact(model: &CovarianceModel, t: f64, u: f64) -> Result<f64> {
    check_window(t)?;
    match model.dim() {
        1 => Ok(2.0 * weighted_1d(model, u, t, 0.0, t, OUTER_REL_TOL)?),
        _ => Ok(4.0 * weighted_2d(model, u, t, (0.0, t), (0.0, t), 1e-7)?),
    }
}

/// Weighted variance integral over `[-eps,eps]^d` and over its complement in `[-T,T]^d`.
fn localisation_split(model: &CovarianceModel, u: f64, t: f64, eps: f64) -> Result<(f64, f64)> {
    match model.dim() {
        1 => Ok((
            2.0 * weighted_1d(model, u, t, 0.0, eps, OUTER_REL_TOL)?,
            2.0 * weighted_1d(model, u, t, eps, t, OUTER_REL_TOL)?,
        )),
        _ => {
            let tol = 1e-7;
            let inside = 4.0 * weighted_2d(model, u, t, (0.0, eps), (0.0, eps), tol)?;
            let outside = 4.0
                * (weighted_2d(model, u, t, (eps, t), (0.0, t), tol)?
                    + weighted_2d(model, u, t, (0.0, eps), (eps, t), tol)?);
            Ok((inside, outside))
        }
    }
}

/// Ratio of the weighted variance integral away from the origin to the one
/// over `[-eps, eps]^d`; it vanishes only as the level grows.
pub fn berman_localization_ratio(
    model: &CovarianceModel,
    u: f64,
    t: f64,
    eps: f64,
) -> Result<f64> {
    check_window(t)?;
    if !(eps > 0.0 && eps < t) {
        return Err(Error::InvalidArgument(format!("need 0 < eps < T, got eps={eps}, T={t}")));
    }
    let (inside, outside) = localisation_split(model, u, t, eps)?;
    if inside <= f64::MIN_POSITIVE {
        return Ok(f64::INFINITY);
    }
    Ok(outside / inside)
}

/// Largest `eps` with `1 - rho < delta` on the whole box `[-eps, eps]^d`.
pub fn localization_eps(model: &CovarianceModel, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::EpsSearch(delta));
    }
    // Box corners sit at radius eps * sqrt(d); 1 - rho is radially increasing.
    let mut hi = model.scale();
    while model.one_minus_rho_radial(hi) < delta {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::EpsSearch(delta));
        }
    }
    let r = bisect(|r| model.one_minus_rho_radial(r) - delta, 0.0, hi, 200);
    let eps = r * (1.0 - 1e-9) / (model.dim() as f64).sqrt();
    if eps > 0.0 && model.one_minus_rho_radial(eps * (model.dim() as f64).sqrt()) < delta {
        Ok(eps)
    } else {
        Err(Error::EpsSearch(delta))
    }
}

/// Unweighted localised variance `int_{[-eps,eps]^d} int_0^{rho(t)} phi(u,u,y) dy dt`.
pub fn localized_variance(model: &CovarianceModel, u: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be > 0, got {eps}")));
    }
    let breaks = breaks_for(model, u);
    let tol = Tolerance::relative(1e-10).with_abs(1e-300);
    let cov = |r: f64| indicator_covariance(u, model.rho_radial(r));
    match model.dim() {
        1 => Ok(2.0 * integrate(cov, 0.0, eps, &breaks, tol).checked()?),
        _ => Ok(4.0
            * integrate(
                |x| integrate(|y| cov(x.hypot(y)), 0.0, eps, &breaks, tol).value,
                0.0,
                eps,
                &breaks,
                tol,
            )
            .checked()?),
    }
}

/// Exponent of `u` in the high-level variance asymptotics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BermanExponent {
    /// `1 + 2d/alpha`, from the change of variables `t = z u^{-2/alpha}` in `R^d`.
    pub general: f64,
    /// `(2 + alpha)/alpha`, which coincides with `general` only for `d = 1`.
    pub one_dimensional: f64,
    pub differs: bool,
}

pub fn berman_exponent(model: &CovarianceModel) -> Result<BermanExponent> {
    let le = model.local_exponent()?;
    let general = 1.0 + 2.0 * model.dim() as f64 / le.alpha;
    let one_dimensional = (2.0 + le.alpha) / le.alpha;
    Ok(BermanExponent {
        general,
        one_dimensional,
        differs: (general - one_dimensional).abs() > 1e-12,
    })
}

// (alpha bits, C bits, d) -> K
type BermanCache = Mutex<HashMap<(u64, u64, usize), f64>>;

fn berman_cache() -> &'static BermanCache {
    static CACHE: OnceLock<BermanCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `2 int_{R^d} Phi_bar(sqrt(C |z|^alpha / 2)) dz` by radial quadrature.
fn berman_constant_quadrature(alpha: f64, c: f64, d: usize) -> Result<f64> {
    // Substitute w = sqrt(c r^alpha / 2): r = (2 w^2 / c)^{1/alpha} is smooth in w.
    let base = (2.0 / c).powf(1.0 / alpha);
    let e = integrate_to_infinity(
        |w: f64| {
            let r = base * w.powf(2.0 / alpha);
            let dr = base * (2.0 / alpha) * w.powf(2.0 / alpha - 1.0);
            radial_measure(d, r) * dr * normal::tail(w)
        },
        0.0,
        1.0,
        &[0.5, 1.0, 2.0, 4.0, 8.0],
        Tolerance::relative(1e-13),
    );
    Ok(2.0 * e.checked()?)
}

/// Constant `K` of `B(u) ~ K phi(u) u^{-(1 + 2d/alpha)}`, computed once per
/// `(alpha, C, d)` and cached.
pub fn berman_constant(model: &CovarianceModel) -> Result<f64> {
    let le = model.local_exponent()?;
    let d = model.dim();
    let key = (le.alpha.to_bits(), le.c.to_bits(), d);
    if let Some(&k) = berman_cache().lock().expect("cache poisoned").get(&key) {
        return Ok(k);
    }
    let k = berman_constant_quadrature(le.alpha, le.c, d)?;
    berman_cache().lock().expect("cache poisoned").insert(key, k);
    Ok(k)
}

/// High-level variance per unit volume: `K phi(u) u^{-(1 + 2d/alpha)}`.
pub fn berman_b_asymptotic(model: &CovarianceModel, u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::InvalidArgument(format!("level must be > 0, got {u}")));
    }
    let exponent = berman_exponent(model)?.general;
    Ok(berman_constant(model)? * normal::pdf(u) * u.powf(-exponent))
}

/// `B_numeric(u) exp(u^2 theta / 2)`, which stays bounded away from zero for
/// every `theta > 1`.
pub fn berman_lower_bound_audit(model: &CovarianceModel, u: f64, theta: f64) -> Result<f64> {
    if !(theta > 1.0) {
        return Err(Error::Precondition(format!("theta must exceed 1, got {theta}")));
    }
    let eps = localization_eps(model, DEFAULT_LOCALISATION_DELTA)?;
    let b = localized_variance(model, u, eps)?;
    Ok((b.ln() + 0.5 * u * u * theta).exp())
}

/// Upper and lower envelopes of the localised variance for a given `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BermanSandwich {
    pub upper: f64,
    pub lower: f64,
    pub eps: f64,
    /// The localised variance over the same box, for comparison.
    pub b_numeric: f64,
}

pub fn berman_two_sided_bounds(model: &CovarianceModel, u: f64, delta: f64) -> Result<BermanSandwich> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must be in (0, 1), got {delta}")));
    }
    if !(u > 0.0) {
        return Err(Error::InvalidArgument(format!("level must be > 0, got {u}")));
    }
    let eps = localization_eps(model, delta)?;
    let breaks = breaks_for(model, u);
    let tol = Tolerance::relative(1e-10).with_abs(1e-300);
    let box_integral = |denominator: f64| -> Result<f64> {
        let g = |r: f64| normal::tail(u * (model.one_minus_rho_radial(r) / denominator).sqrt());
        match model.dim() {
            1 => Ok(2.0 * integrate(g, 0.0, eps, &breaks, tol).checked()?),
            _ => Ok(4.0
                * integrate(
                    |x| integrate(|y| g(x.hypot(y)), 0.0, eps, &breaks, tol).value,
                    0.0,
                    eps,
                    &breaks,
                    tol,
                )
                .checked()?),
        }
    };
    let lead = normal::pdf(u) / u;
    let upper = 2.0 * (2.0 / (2.0 - delta)).sqrt() * lead * box_integral(2.0)?;
    let lower = (2.0 * (2.0 - delta)).sqrt() * lead * box_integral(2.0 - delta)?;
    Ok(BermanSandwich {
        upper,
        lower,
        eps,
        b_numeric: localized_variance(model, u, eps)?,
    })
}

/// Exact, series and asymptotic views of `Var(S_T)` side by side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceBreakdown {
    pub t: f64,
    pub u: f64,
    pub exact: f64,
    /// `sigma^2(u)`, present for fixed-level use.
    pub series_sigma2: Option<f64>,
    /// `T^d B_asym(u)`; absent for `u <= 0`.
    pub asymptotic: Option<f64>,
    pub ratio: Option<f64>,
}

pub fn variance_breakdown(
    model: &CovarianceModel,
    t: f64,
    u: f64,
    with_sigma2: bool,
) -> Result<VarianceBreakdown> {
    let exact = var_sojourn_exact(model, t, u)?;
    let series_sigma2 = if with_sigma2 {
        Some(sigma_squared(model, u, 1e-8)?)
    } else {
        None
    };
    let asymptotic = if u > 0.0 {
        Some(t.powi(model.dim() as i32) * berman_b_asymptotic(model, u)?)
    } else {
        None
    };
    Ok(VarianceBreakdown {
        t,
        u,
        exact,
        series_sigma2,
        asymptotic,
        ratio: asymptotic.map(|a| exact / a),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite_chaos::chaos_covariance_series;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn exp1() -> CovarianceModel {
        CovarianceModel::powered_exponential(1.0, 1.0, 1).unwrap()
    }

    #[test]
    fn density_examples() {
        assert_relative_eq!(bivariate_density(0.0, 0.0).unwrap(), 1.0 / (2.0 * PI), max_relative = 1e-15);
        assert_relative_eq!(
            bivariate_density(1.0, 0.0).unwrap(),
            (-1f64).exp() / (2.0 * PI),
            max_relative = 1e-15
        );
        assert_relative_eq!(bivariate_density(0.0, 0.6).unwrap(), 1.0 / (2.0 * PI * 0.8), max_relative = 1e-15);
        assert!(bivariate_density(0.0, 1.0).is_err());
    }

    #[test]
    fn arcsine_law_at_level_zero() {
        for i in 0..=19 {
            let rho = -0.9 + i as f64 * 0.1;
            let rho = if i == 19 { 0.99 } else { rho };
            let got = covariance_of_indicators(0.0, rho).unwrap();
            assert!((got - rho.asin() / (2.0 * PI)).abs() < 1e-10, "rho={rho}");
        }
        assert!((covariance_of_indicators(0.0, 1.0).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(covariance_of_indicators(3.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn matches_chaos_series() {
        for &u in &[0.0, 1.0, 2.0] {
            for &rho in &[0.1, 0.5, 0.9] {
                let q = covariance_of_indicators(u, rho).unwrap();
                let s = chaos_covariance_series(u, rho, 1e-12).unwrap();
                assert!((q - s).abs() < 1e-8, "u={u} rho={rho}: {q} vs {s}");
            }
        }
    }

    #[test]
    fn sigma_squared_closed_case() {
        let r = sigma_squared_routes(&exp1(), 0.0, 1e-9).unwrap();
        assert!((r.series - LN_2 / 2.0).abs() < 1e-7, "{}", r.series);
        assert!((r.integral - LN_2 / 2.0).abs() < 1e-7, "{}", r.integral);
        assert!((sigma_squared(&exp1(), 0.0, 1e-8).unwrap() - LN_2 / 2.0).abs() < 1e-6);
    }

    #[test]
    fn sigma_squared_vanishes_at_high_level() {
        assert!(sigma_squared(&exp1(), 8.0, 1e-10).unwrap() < 1e-6);
    }

    #[test]
    fn sigma_squared_first_term_at_zero() {
        // phi(0)^2 int rho is the n = 1 term; the rest are non-negative.
        let m = CovarianceModel::cauchy(1.0, 1.0, 1).unwrap();
        let first = normal::pdf(0.0).powi(2) * m.l1_norm().unwrap();
        assert_relative_eq!(first, 0.159_154_9 * PI, max_relative = 1e-6);
        assert!(sigma_squared(&m, 0.0, 1e-8).unwrap() > first);
    }

    #[test]
    fn sigma_squared_routes_agree_for_both_families() {
        let models = [
            exp1(),
            CovarianceModel::powered_exponential(1.5, 0.7, 1).unwrap(),
            CovarianceModel::cauchy(1.0, 1.0, 1).unwrap(),
            CovarianceModel::cauchy(2.0, 1.0, 2).unwrap(),
            CovarianceModel::powered_exponential(2.0, 1.0, 2).unwrap(),
        ];
        for m in models {
            for u in [0.0, 1.0] {
                let r = sigma_squared_routes(&m, u, 1e-9).unwrap();
                assert_relative_eq!(r.series, r.integral, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn exact_variance_small_window() {
        assert!(var_sojourn_exact(&exp1(), 1e-3, 0.0).unwrap() < 1e-6);
    }

    #[test]
    fn exact_variance_approaches_sigma_squared() {
        let v = var_sojourn_exact(&exp1(), 200.0, 0.0).unwrap() / 200.0;
        assert!((v / (LN_2 / 2.0) - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn exact_variance_monotone() {
        let m = exp1();
        let ladder = [1.0, 2.0, 4.0, 8.0, 16.0];
        let v: Vec<f64> = ladder.iter().map(|&t| var_sojourn_exact(&m, t, 0.5).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
        // Per unit volume it creeps up towards sigma^2.
        let per: Vec<f64> = ladder.iter().zip(&v).map(|(t, v)| v / t).collect();
        assert!(per.windows(2).all(|w| w[1] >= w[0]));
        assert!(*per.last().unwrap() <= sigma_squared(&m, 0.5, 1e-9).unwrap());
    }

    #[test]
    fn exact_variance_two_dimensional_matches_per_volume_limit() {
        let m = CovarianceModel::powered_exponential(2.0, 1.0, 2).unwrap();
        let t = 12.0;
        let v = var_sojourn_exact(&m, t, 0.0).unwrap() / (t * t);
        let s = sigma_squared(&m, 0.0, 1e-8).unwrap();
        assert!(v < s && v > 0.8 * s, "{v} vs {s}");
    }

    #[test]
    fn localisation_needs_high_level() {
        let m = exp1();
        let r0 = berman_localization_ratio(&m, 0.0, 10.0, 1.0).unwrap();
        assert!(r0 > 0.1, "{r0}");
        let r: Vec<f64> = [2.0, 3.0, 4.0, 5.0]
            .iter()
            .map(|&u| berman_localization_ratio(&m, u, 50.0, 1.0).unwrap())
            .collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
        assert!(r[3] < 0.05);
    }

    #[test]
    fn localisation_eps_box() {
        let eps = localization_eps(&exp1(), 0.5).unwrap();
        assert_relative_eq!(eps, LN_2, max_relative = 1e-8);
        let m2 = CovarianceModel::powered_exponential(1.0, 1.0, 2).unwrap();
        let eps2 = localization_eps(&m2, 0.5).unwrap();
        assert_relative_eq!(eps2 * 2f64.sqrt(), LN_2, max_relative = 1e-8);
        assert!(localization_eps(&exp1(), 1.5).is_err());
    }

    #[test]
    fn berman_constant_closed_forms() {
        // alpha = 2, C = 1, d = 1: 2 int Phi_bar(|z|/sqrt 2) dz = 4/sqrt(pi).
        let g = CovarianceModel::powered_exponential(2.0, 1.0, 1).unwrap();
        assert_relative_eq!(berman_constant(&g).unwrap(), 4.0 / PI.sqrt(), max_relative = 1e-10);
        // alpha = 1, C = 1, d = 1: 16 int_0^inf x Phi_bar(x) dx = 4.
        assert_relative_eq!(berman_constant(&exp1()).unwrap(), 4.0, max_relative = 1e-10);
        // Doubling C at alpha = 2 divides the constant by sqrt 2.
        let g2 = CovarianceModel::powered_exponential(2.0, 2f64.powf(-0.5), 1).unwrap();
        assert_relative_eq!(
            berman_constant(&g2).unwrap(),
            4.0 / PI.sqrt() / 2f64.sqrt(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn berman_exponent_flags_higher_dimensions() {
        let e = berman_exponent(&exp1()).unwrap();
        assert_eq!((e.general, e.one_dimensional, e.differs), (3.0, 3.0, false));
        let e2 = berman_exponent(&CovarianceModel::powered_exponential(1.0, 1.0, 2).unwrap()).unwrap();
        assert_eq!((e2.general, e2.one_dimensional, e2.differs), (5.0, 3.0, true));
    }

    #[test]
    fn asymptotic_matches_exact_at_high_level() {
        let v = var_sojourn_exact(&exp1(), 200.0, 4.0).unwrap();
        let ratio = v / (200.0 * berman_b_asymptotic(&exp1(), 4.0).unwrap());
        assert!((0.85..=1.15).contains(&ratio), "{ratio}");
    }

    #[test]
    fn lower_bound_audit() {
        let m = exp1();
        let seq: Vec<f64> = [3.0, 4.0, 5.0]
            .iter()
            .map(|&u| berman_lower_bound_audit(&m, u, 1.2).unwrap())
            .collect();
        let floor = seq.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(floor > 0.3 * seq[0], "{seq:?}");
        assert!(matches!(
            berman_lower_bound_audit(&m, 4.0, 0.9),
            Err(Error::Precondition(_))
        ));
        let a = berman_lower_bound_audit(&m, 3.0, 5.0).unwrap();
        let b = berman_lower_bound_audit(&m, 3.0, 50.0).unwrap();
        assert!(b > 1e10 * a);
    }

    #[test]
    fn sandwich_orders_and_tightens() {
        let m = exp1();
        let mut ratios = Vec::new();
        for delta in [0.5, 0.2, 0.05] {
            let s = berman_two_sided_bounds(&m, 5.0, delta).unwrap();
            assert!(s.lower <= s.upper);
            ratios.push(s.upper / s.lower);
        }
        assert!(ratios.windows(2).all(|w| w[1] < w[0]) && ratios[2] < 1.1, "{ratios:?}");
        let s = berman_two_sided_bounds(&m, 4.0, 0.5).unwrap();
        assert!(s.b_numeric >= 0.9 * s.lower && s.b_numeric <= 1.1 * s.upper);
    }

    #[test]
    fn sandwich_scales_like_phi() {
        // d/du log(bound) = -u - (1 + 2/alpha)/u + ..., within 10% of -u for alpha = 2.
        let g = CovarianceModel::powered_exponential(2.0, 1.0, 1).unwrap();
        let h = 1e-3;
        let f = |u: f64| berman_two_sided_bounds(&g, u, 0.2).unwrap();
        let (a, b) = (f(5.0 - h), f(5.0 + h));
        for (x, y) in [(a.upper, b.upper), (a.lower, b.lower)] {
            let slope = (y.ln() - x.ln()) / (2.0 * h);
            assert!((slope / -5.0 - 1.0).abs() < 0.1, "{slope}");
        }
    }
}
