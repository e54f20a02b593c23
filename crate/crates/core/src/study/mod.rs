//! Monte Carlo studies of the sojourn-time CLT.
//!
//! Each window size gets its own stream family `derive_seed(seed, index)`;
//! replicate `i` always reads stream `i`, and every reduction runs
//! sequentially over the gathered replicates, so a report does not depend
//! on the worker count.

pub mod config;
pub mod exec;
pub mod report;
pub mod sojourn;
pub mod wasserstein;

pub use config::{ExperimentConfig, GridConfig, USchedule};
pub use exec::Execution;
pub use report::{emit_report, read_report_csv, ConvergenceReport, ReportFormat, ReportRow};
pub use sojourn::{normalize, sojourn_from_values, sojourn_time, SojournStatistic, TheoryContext};
pub use wasserstein::wasserstein1_to_gaussian;

use crate::error::Result;
use crate::field_sampler::{derive_seed, FieldSampler};
use crate::normal;
use crate::stein_bounds::{corollary_condition, fixed_level_bound, moving_level_bound, Mode};
use crate::variance_theory::{berman_b_asymptotic, sigma_squared, var_sojourn_exact};

/// Absolute tolerance for the limiting variance used as the W1 target.
pub const SIGMA2_TOL: f64 = 1e-9;

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Raw sojourn times of `config.replicates` fields on a window of edge `t`.
pub fn simulate_sojourns(
    config: &ExperimentConfig,
    ladder_index: usize,
    t: f64,
    u: f64,
    exec: &Execution,
) -> Result<(f64, Vec<f64>)> {
    let grid = config.grid_for(t)?;
    let sampler = FieldSampler::cached(&config.model, &grid)?;
    let seed = derive_seed(config.seed, ladder_index as u64);
    let raws = exec.map(config.replicates as u64, |i| {
        sampler.with_sample(seed, i, |v| sojourn_from_values(v, &grid, u))
    })?;
    Ok((grid.t_grid(), raws))
}

struct Target {
    u: f64,
    /// Variance of the normalised statistic under the limit law.
    limit_var: f64,
    ctx: TheoryContext,
}

fn blank_row(t: f64, u: f64, replicates: usize, status: String) -> ReportRow {
    ReportRow {
        t,
        u_eff: u,
        replicates,
        w1_emp: None,
        w1_stderr_proxy: None,
        sigma2_or_var: None,
        mean_raw: None,
        expected_mean: None,
        mean_se: None,
        mean_check: None,
        var_normalized: None,
        var_check: None,
        bound_total: None,
        n_trunc: None,
        d1: None,
        d2: None,
        d3: None,
        term_body: None,
        term_tail: None,
        var_ratio: None,
        corollary_condition: None,
        status,
    }
}

/// Monte Carlo part of a row: W1, half-sample spread, mean and variance checks.
fn empirical_row(
    config: &ExperimentConfig,
    mode: Mode,
    t_grid: f64,
    raws: &[f64],
    target: &Target,
) -> Result<ReportRow> {
    let r = raws.len();
    let z: Vec<f64> = raws
        .iter()
        .map(|&s| normalize(s, t_grid, target.u, mode, &target.ctx).map(|x| x.centered_normalized))
        .collect::<Result<_>>()?;
    let sigma = target.limit_var.sqrt();
    let w1 = wasserstein1_to_gaussian(&z, sigma)?;
    let (a, b) = z.split_at(r / 2);
    let spread = 0.5 * (wasserstein1_to_gaussian(a, sigma)? - wasserstein1_to_gaussian(b, sigma)?).abs();

    let (mean_raw, var_raw) = mean_and_var(raws);
    let expected = t_grid.powi(config.model.dim() as i32) * normal::tail(target.u);
    let mean_se = (var_raw / r as f64).sqrt();
    let (mean_z, var_z) = mean_and_var(&z);
    // SE of a sample variance from the fourth central moment; rare
    // excursions make the statistic far from Gaussian in moving mode.
    let m4 = z.iter().map(|x| (x - mean_z).powi(4)).sum::<f64>() / r as f64;
    let var_se = ((m4 - var_z * var_z).max(0.0) / r as f64).sqrt();

    let mut row = blank_row(t_grid, target.u, r, "ok".into());
    row.w1_emp = Some(w1);
    row.w1_stderr_proxy = Some(spread);
    row.mean_raw = Some(mean_raw);
    row.expected_mean = Some(expected);
    row.mean_se = Some(mean_se);
    row.mean_check = Some((mean_raw - expected).abs() <= 3.0 * mean_se);
    row.var_normalized = Some(var_z);
    row.var_check = Some((var_z - target.limit_var).abs() <= 3.0 * var_se);
    Ok(row)
}

fn note(row: &mut ReportRow, msg: String) {
    if row.status == "ok" {
        row.status = msg;
    } else {
        row.status = format!("{}; {msg}", row.status);
    }
}

fn fixed_row(config: &ExperimentConfig, idx: usize, t: f64, sigma2: f64, exec: &Execution) -> Result<ReportRow> {
    let u = config.u.expect("validated");
    let (t_grid, raws) = simulate_sojourns(config, idx, t, u, exec)?;
    let target = Target {
        u,
        limit_var: sigma2,
        ctx: TheoryContext { d: config.model.dim(), variance: None },
    };
    let mut row = empirical_row(config, Mode::Fixed, t_grid, &raws, &target)?;
    row.sigma2_or_var = Some(sigma2);
    match fixed_level_bound(&config.model, u, t_grid) {
        Ok(b) => {
            row.bound_total = Some(b.total);
            row.n_trunc = Some(b.n_trunc);
            (row.d1, row.d2, row.d3) = (b.d1, b.d2, b.d3);
        }
        Err(e) => note(&mut row, format!("bound unavailable: {e}")),
    }
    if row.mean_check == Some(false) {
        note(&mut row, "mean check failed".into());
    }
    Ok(row)
}

fn moving_row(config: &ExperimentConfig, idx: usize, t: f64, corollary: bool, exec: &Execution) -> Result<ReportRow> {
    let schedule = config.u_schedule.expect("validated");
    let beta = config.beta.expect("validated");
    let grid = config.grid_for(t)?;
    let t_grid = grid.t_grid();
    let u = schedule.level(t_grid);
    let var = var_sojourn_exact(&config.model, t_grid, u)?;
    let (_, raws) = simulate_sojourns(config, idx, t, u, exec)?;
    let target = Target {
        u,
        limit_var: 1.0,
        ctx: TheoryContext { d: config.model.dim(), variance: Some(var) },
    };
    let mut row = empirical_row(config, Mode::Moving, t_grid, &raws, &target)?;
    row.sigma2_or_var = Some(var);
    row.corollary_condition = Some(corollary);
    let volume = t_grid.powi(config.model.dim() as i32);
    match berman_b_asymptotic(&config.model, u) {
        Ok(b) => row.var_ratio = Some(var / (volume * b)),
        Err(e) => note(&mut row, format!("asymptotic variance unavailable: {e}")),
    }
    match moving_level_bound(&config.model, u, t_grid, beta) {
        Ok(b) => {
            row.bound_total = Some(b.total);
            row.n_trunc = Some(b.n_trunc);
            (row.term_body, row.term_tail) = (b.term_body, b.term_tail);
        }
        Err(e) => note(&mut row, format!("bound unavailable: {e}")),
    }
    if row.mean_check == Some(false) {
        note(&mut row, "mean check failed".into());
    }
    Ok(row)
}

/// Run the study for `mode` with an explicit execution strategy.
///
/// A window whose simulation or theory fails still yields a row, with the
/// error in `status`.
pub fn run_study(config: &ExperimentConfig, mode: Mode, exec: &Execution) -> Result<ConvergenceReport> {
    config.validate_study(mode)?;
    let mut rows = Vec::with_capacity(config.t_ladder.len());
    let corollary_holds = match mode {
        Mode::Fixed => {
            let u = config.u.expect("validated");
            let sigma2 = sigma_squared(&config.model, u, SIGMA2_TOL)?;
            for (idx, &t) in config.t_ladder.iter().enumerate() {
                rows.push(fixed_row(config, idx, t, sigma2, exec).unwrap_or_else(|e| {
                    blank_row(t, u, config.replicates, format!("error: {e}"))
                }));
            }
            None
        }
        Mode::Moving => {
            let schedule = config.u_schedule.expect("validated");
            let alpha = config.model.local_exponent()?.alpha;
            let holds = corollary_condition(schedule.gamma, alpha);
            for (idx, &t) in config.t_ladder.iter().enumerate() {
                rows.push(moving_row(config, idx, t, holds, exec).unwrap_or_else(|e| {
                    blank_row(t, schedule.level(t), config.replicates, format!("error: {e}"))
                }));
            }
            Some(holds)
        }
    };
    Ok(ConvergenceReport { mode, rows, corollary_holds })
}

pub fn run_fixed_level_study(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    run_study(config, Mode::Fixed, &Execution::resolve(config.workers))
}

pub fn run_moving_level_study(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    run_study(config, Mode::Moving, &Execution::resolve(config.workers))
}
