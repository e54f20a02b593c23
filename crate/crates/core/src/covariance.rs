//! Stationary, isotropic, unit-variance covariance families.
//!
//! Both families are positive definite in every dimension by construction,
//! so nothing user-supplied can silently break the sampler.

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta as beta_fn, beta_reg};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity, Tolerance};

/// Default relative tolerance for covariance quadratures.
pub const QUAD_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelSpec {
    PoweredExponential { alpha: f64, scale: f64, d: usize },
    Cauchy { beta: f64, scale: f64, d: usize },
}

/// A covariance function `rho(t)` with `rho(0) = 1`.
///
/// JSON form: `{"kind": "powered_exponential", "alpha": 1.0, "scale": 1.0, "d": 1}`
/// or `{"kind": "cauchy", "beta": 1.0, "scale": 1.0, "d": 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub enum CovarianceModel {
    /// `exp(-(|t|/scale)^alpha)`, `alpha` in `(0, 2]`.
    PoweredExponential { alpha: f64, scale: f64, d: usize },
    /// `(1 + |t/scale|^2)^{-beta}`, `beta > d/2`.
    Cauchy { beta: f64, scale: f64, d: usize },
}

impl TryFrom<ModelSpec> for CovarianceModel {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        match spec {
            ModelSpec::PoweredExponential { alpha, scale, d } => {
                CovarianceModel::powered_exponential(alpha, scale, d)
            }
            ModelSpec::Cauchy { beta, scale, d } => CovarianceModel::cauchy(beta, scale, d),
        }
    }
}

impl From<CovarianceModel> for ModelSpec {
    fn from(m: CovarianceModel) -> Self {
        match m {
            CovarianceModel::PoweredExponential { alpha, scale, d } => {
                ModelSpec::PoweredExponential { alpha, scale, d }
            }
            CovarianceModel::Cauchy { beta, scale, d } => ModelSpec::Cauchy { beta, scale, d },
        }
    }
}

/// `int |rho|` outside `[-a, a]^d`, with the `tail * log(a)` witness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailL1 {
    pub a: f64,
    pub tail: f64,
    pub log_ratio: f64,
}

/// `1 - rho(t) ~ c |t|^alpha` near the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalExponent {
    pub alpha: f64,
    pub c: f64,
    pub fitted_slope: f64,
}

/// Audit of the logarithmic tail-decay condition on a geometric `a` ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct TailAudit {
    pub points: Vec<TailL1>,
    /// Largest `tail(a) log(a)` seen on the ladder.
    pub c_tail: f64,
    /// The witness ratio is no longer growing at the end of the ladder.
    pub passes: bool,
}

fn check_dim(d: usize) -> Result<()> {
    if d == 1 || d == 2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dimension must be 1 or 2, got {d}")))
    }
}

impl CovarianceModel {
    pub fn powered_exponential(alpha: f64, scale: f64, d: usize) -> Result<Self> {
        check_dim(d)?;
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidArgument(format!("alpha must be in (0, 2], got {alpha}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be > 0, got {scale}")));
        }
        Ok(CovarianceModel::PoweredExponential { alpha, scale, d })
    }

    /// Rejects `beta <= d/2` with [`Error::Divergent`]: `rho` is then not integrable.
    pub fn cauchy(beta: f64, scale: f64, d: usize) -> Result<Self> {
        check_dim(d)?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be > 0, got {scale}")));
        }
        if !(beta.is_finite()) || beta <= 0.5 * d as f64 {
            return Err(Error::Divergent(format!(
                "cauchy covariance needs beta > d/2 = {}, got {beta}",
                0.5 * d as f64
            )));
        }
        Ok(CovarianceModel::Cauchy { beta, scale, d })
    }

    pub fn dim(&self) -> usize {
        match *self {
            CovarianceModel::PoweredExponential { d, .. } | CovarianceModel::Cauchy { d, .. } => d,
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            CovarianceModel::PoweredExponential { scale, .. }
            | CovarianceModel::Cauchy { scale, .. } => scale,
        }
    }

    /// Covariance as a function of the lag norm.
    #[inline]
    pub fn rho_radial(&self, r: f64) -> f64 {
        match *self {
            CovarianceModel::PoweredExponential { alpha, scale, .. } => {
                (-(r.abs() / scale).powf(alpha)).exp()
            }
            CovarianceModel::Cauchy { beta, scale, .. } => {
                let x = r / scale;
                (1.0 + x * x).powf(-beta)
            }
        }
    }

    /// `1 - rho(r)` without cancellation at small lags.
    pub fn one_minus_rho_radial(&self, r: f64) -> f64 {
        match *self {
            CovarianceModel::PoweredExponential { alpha, scale, .. } => {
                -(-(r.abs() / scale).powf(alpha)).exp_m1()
            }
            CovarianceModel::Cauchy { beta, scale, .. } => {
                let x = r / scale;
                -(-beta * (x * x).ln_1p()).exp_m1()
            }
        }
    }

    pub fn rho(&self, t: &[f64]) -> f64 {
        debug_assert_eq!(t.len(), self.dim());
        self.rho_radial(t.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    /// Lag norm at which `rho` falls to `level` in `(0, 1)`.
    pub fn radius_at(&self, level: f64) -> f64 {
        assert!(level > 0.0 && level < 1.0, "level must be in (0, 1), got {level}");
        match *self {
            CovarianceModel::PoweredExponential { alpha, scale, .. } => {
                scale * (-level.ln()).powf(1.0 / alpha)
            }
            CovarianceModel::Cauchy { beta, scale, .. } => {
                scale * (level.powf(-1.0 / beta) - 1.0).sqrt()
            }
        }
    }

    /// Grid spacing resolving the local-exponent region: `1 - rho(h) = 0.01`.
    pub fn default_spacing(&self) -> f64 {
        self.radius_at(0.99)
    }

    /// `int_{R^d} |rho(t)| dt`.
    pub fn l1_norm(&self) -> Result<f64> {
        self.rho_power_integral(1)
    }

    /// `int_{R^d} rho(t)^n dt` in closed form: both families are closed under
    /// powers (`alpha`-family with scale `s n^{-1/alpha}`, Cauchy with `n beta`).
    pub fn rho_power_integral(&self, n: u32) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidArgument("power must be >= 1".into()));
        }
        let nf = n as f64;
        Ok(match *self {
            CovarianceModel::PoweredExponential { alpha, scale, d } => {
                let s = scale * nf.powf(-1.0 / alpha);
                match d {
                    1 => 2.0 * s * gamma(1.0 + 1.0 / alpha),
                    _ => std::f64::consts::PI * s * s * gamma(1.0 + 2.0 / alpha),
                }
            }
            CovarianceModel::Cauchy { beta, scale, d } => {
                let b = nf * beta;
                match d {
                    1 => scale * beta_fn_half(b),
                    _ => std::f64::consts::PI * scale * scale / (b - 1.0),
                }
            }
        })
    }

    fn radial_breaks(&self) -> Vec<f64> {
        let s = self.scale();
        [1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0].iter().map(|k| k * s).collect()
    }

    /// `int_{R^d} rho^n` by radial quadrature; independent of the closed forms.
    pub fn rho_power_integral_quadrature(&self, n: u32, rel_tol: f64) -> Result<f64> {
        let d = self.dim();
        let breaks = self.radial_breaks();
        let e = integrate_to_infinity(
            |r| {
                let v = self.rho_radial(r).powi(n as i32);
                if d == 1 {
                    2.0 * v
                } else {
                    2.0 * std::f64::consts::PI * r * v
                }
            },
            0.0,
            self.scale(),
            &breaks,
            Tolerance::relative(rel_tol),
        );
        e.checked()
    }

    /// `int_{[-a,a]^d} |rho|` by quadrature.
    pub fn box_l1(&self, a: f64) -> Result<f64> {
        if !(a > 0.0) {
            return Err(Error::InvalidArgument(format!("a must be > 0, got {a}")));
        }
        let tol = Tolerance::relative(1e-12);
        let breaks = self.radial_breaks();
        match self.dim() {
            1 => Ok(2.0 * integrate(|t| self.rho_radial(t), 0.0, a, &breaks, tol).checked()?),
            _ => {
                // Eight octants of the square: 0 <= y <= x <= a.
                let inner = |x: f64| {
                    integrate(|y| self.rho_radial(x.hypot(y)), 0.0, x, &[], tol).value
                };
                Ok(8.0 * integrate(inner, 0.0, a, &breaks, tol).checked()?)
            }
        }
    }

    /// `int_{R^d \ [-a,a]^d} |rho|`.
    pub fn tail_l1(&self, a: f64) -> Result<TailL1> {
        if !(a > 0.0) {
            return Err(Error::InvalidArgument(format!("a must be > 0, got {a}")));
        }
        let tail = match *self {
            CovarianceModel::PoweredExponential { alpha, scale, d: 1 } => {
                let x = (a / scale).powf(alpha);
                2.0 * scale / alpha * gamma(1.0 / alpha) * gamma_ur(1.0 / alpha, x)
            }
            CovarianceModel::Cauchy { beta, scale, d: 1 } => {
                // int_a^inf (1 + t^2/s^2)^{-beta} dt = (s/2) B(beta-1/2, 1/2) I_x(beta-1/2, 1/2)
                let x = 1.0 / (1.0 + (a / scale).powi(2));
                scale * beta_fn(beta - 0.5, 0.5) * beta_reg(beta - 0.5, 0.5, x)
            }
            _ => {
                let tol = Tolerance::relative(1e-11);
                let inner = |x: f64| {
                    integrate(|y| self.rho_radial(x.hypot(y)), 0.0, x, &[], tol).value
                };
                let breaks: Vec<f64> = self.radial_breaks().into_iter().map(|b| a + b).collect();
                8.0 * integrate_to_infinity(inner, a, a.max(self.scale()), &breaks, tol)
                    .checked()?
            }
        };
        Ok(TailL1 {
            a,
            tail,
            log_ratio: tail * a.ln(),
        })
    }

    pub fn tail_audit(&self) -> Result<TailAudit> {
        let points = (1..=4)
            .map(|k| self.tail_l1(self.scale() * 10f64.powi(k)))
            .collect::<Result<Vec<_>>>()?;
        let c_tail = points.iter().map(|p| p.log_ratio).fold(0.0, f64::max);
        let (last, head) = points.split_last().expect("non-empty ladder");
        let head_max = head.iter().map(|p| p.log_ratio).fold(0.0, f64::max);
        Ok(TailAudit {
            c_tail,
            passes: last.log_ratio.is_finite() && last.log_ratio <= head_max,
            points,
        })
    }

    /// Closed-form `(alpha, C)` cross-checked by a log–log fit of `1 - rho`.
    ///
    /// The fit window ends where `(r/scale)^alpha` reaches `2e-3` (or at
    /// `1e-2 scale`), so higher-order terms cannot bend the slope by more than
    /// the `1e-3` tolerance.
    pub fn local_exponent(&self) -> Result<LocalExponent> {
        let (alpha, c) = match *self {
            CovarianceModel::PoweredExponential { alpha, scale, .. } => {
                (alpha, scale.powf(-alpha))
            }
            CovarianceModel::Cauchy { beta, scale, .. } => (2.0, beta / (scale * scale)),
        };
        let hi = self.scale() * 1e-2f64.min(2e-3f64.powf(1.0 / alpha));
        let lo = hi * 1e-2;
        let pts: Vec<(f64, f64)> = (0..41)
            .map(|i| {
                let r = lo * (hi / lo).powf(i as f64 / 40.0);
                (r.ln(), self.one_minus_rho_radial(r).ln())
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        if (slope - alpha).abs() > 1e-3 {
            return Err(Error::FitMismatch {
                fitted: slope,
                expected: alpha,
            });
        }
        Ok(LocalExponent {
            alpha,
            c,
            fitted_slope: slope,
        })
    }
}

/// `int_R (1 + t^2)^{-b} dt = sqrt(pi) Gamma(b - 1/2) / Gamma(b)`.
fn beta_fn_half(b: f64) -> f64 {
    beta_fn(b - 0.5, 0.5)
}
