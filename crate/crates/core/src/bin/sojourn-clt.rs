//! Command-line front end: theory values as one-row CSV, the exact
//! inequality audit, Monte Carlo studies and raw field dumps.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sojourn_clt::covariance::CovarianceModel;
use sojourn_clt::field_sampler::{write_dump, FieldSampler};
use sojourn_clt::hermite_chaos::chaos_variance_inequality;
use sojourn_clt::stein_bounds::{fixed_level_bound, moving_level_bound, Mode, RateBound};
use sojourn_clt::study::{emit_report, run_study, Execution, ExperimentConfig, ReportFormat};
use sojourn_clt::variance_theory::{
    berman_b_asymptotic, berman_constant, berman_exponent, sigma_squared_routes, variance_breakdown,
};
use sojourn_clt::{Error, Result};

#[derive(Parser)]
#[command(name = "sojourn-clt", version, about = "Sojourn-time CLT theory and Monte Carlo studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a theoretical quantity; prints a one-row CSV.
    Theory {
        #[command(subcommand)]
        what: Theory,
    },
    /// Exact-arithmetic audits.
    Check {
        #[command(subcommand)]
        what: Check,
    },
    /// Run a Monte Carlo convergence study and write the report.
    Study {
        #[arg(value_enum)]
        mode: ModeArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a log-log SVG plot.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Sample `replicates` fields on the config grid and dump them.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fixed,
    Moving,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Fixed => Mode::Fixed,
            ModeArg::Moving => Mode::Moving,
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Covariance model as JSON, e.g. '{"kind":"powered_exponential","alpha":1,"scale":1,"d":1}'.
    #[arg(long, conflicts_with = "config")]
    model: Option<String>,
    /// Take the model from an experiment config instead.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<CovarianceModel> {
        match (&self.model, &self.config) {
            (Some(json), _) => serde_json::from_str(json).map_err(|e| Error::Config(format!("--model: {e}"))),
            (None, Some(path)) => Ok(ExperimentConfig::load(path)?.model),
            (None, None) => Err(Error::Config("pass --model JSON or --config FILE".into())),
        }
    }
}

#[derive(Subcommand)]
enum Theory {
    /// Fixed-level limit variance sigma^2(u), by series and by quadrature.
    Sigma2 {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        u: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Exact Var(S_T) with the high-level asymptotic beside it.
    VarSojourn {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "T")]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        u: f64,
    },
    /// High-level variance per unit volume, K phi(u) u^-(1+2d/alpha).
    BermanB {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        u: f64,
    },
    /// Explicit Wasserstein rate bound.
    Bounds {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long = "T")]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        u: f64,
        /// Moving mode only, in (0, d/2).
        #[arg(long)]
        beta: Option<f64>,
    },
}

#[derive(Subcommand)]
enum Check {
    /// Certify sum_r C(p-1,r)^2 C(2p-2-2r,p-1-r) <= 9^(p-1) for p = 2..=p_max.
    Inequalities {
        #[arg(long, default_value_t = 50)]
        p_max: u64,
    },
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_csv(header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let stdout = std::io::stdout();
    let mut w = csv::Writer::from_writer(stdout.lock());
    let io = |e: csv::Error| Error::Csv {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<stdout>", e))
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn bound_row(b: &RateBound) -> (Vec<String>, Vec<String>) {
    let mut header = strings(&[
        "T", "u", "mode", "n_trunc", "d1", "d2", "d3", "term_body", "term_tail", "total",
    ]);
    let mut row = vec![
        num(b.t),
        num(b.u),
        b.mode.to_string(),
        b.n_trunc.to_string(),
        opt(b.d1),
        opt(b.d2),
        opt(b.d3),
        opt(b.term_body),
        opt(b.term_tail),
        num(b.total),
    ];
    for (name, entry) in &b.constants_profile {
        header.push(format!("const_{name}"));
        row.push(num(entry.value));
    }
    (header, row)
}

fn theory(what: Theory) -> Result<()> {
    match what {
        Theory::Sigma2 { model, u, tol } => {
            let r = sigma_squared_routes(&model.resolve()?, u, tol)?;
            // Same agreement rule as the library's sigma_squared.
            if (r.series - r.integral).abs() > 10.0 * tol {
                return Err(Error::CrossValidation {
                    series: r.series,
                    integral: r.integral,
                    allowed: 10.0 * tol,
                });
            }
            write_csv(
                &strings(&["u", "sigma2", "series", "integral", "terms"]),
                &[vec![num(u), num(r.series), num(r.series), num(r.integral), r.terms.to_string()]],
            )
        }
        Theory::VarSojourn { model, t, u } => {
            let b = variance_breakdown(&model.resolve()?, t, u, false)?;
            write_csv(
                &strings(&["T", "u", "var_exact", "var_asymptotic", "ratio"]),
                &[vec![num(t), num(u), num(b.exact), opt(b.asymptotic), opt(b.ratio)]],
            )
        }
        Theory::BermanB { model, u } => {
            let m = model.resolve()?;
            let e = berman_exponent(&m)?;
            write_csv(
                &strings(&["u", "B_asym", "K", "exponent_general", "exponent_one_dimensional"]),
                &[vec![
                    num(u),
                    num(berman_b_asymptotic(&m, u)?),
                    num(berman_constant(&m)?),
                    num(e.general),
                    num(e.one_dimensional),
                ]],
            )
        }
        Theory::Bounds {
            model,
            mode,
            t,
            u,
            beta,
        } => {
            let m = model.resolve()?;
            let bound = match mode {
                ModeArg::Fixed => fixed_level_bound(&m, u, t)?,
                ModeArg::Moving => {
                    let beta = beta.ok_or_else(|| Error::Config("moving bounds need --beta".into()))?;
                    moving_level_bound(&m, u, t, beta)?
                }
            };
            let (header, row) = bound_row(&bound);
            write_csv(&header, &[row])
        }
    }
}

fn check_inequalities(p_max: u64) -> Result<bool> {
    let mut all = true;
    let mut rows = Vec::new();
    for p in 2..=p_max {
        let c = chaos_variance_inequality(p)?;
        all &= c.holds;
        rows.push(vec![p.to_string(), c.lhs.to_string(), c.rhs.to_string(), c.holds.to_string()]);
    }
    write_csv(&strings(&["p", "lhs", "rhs", "holds"]), &rows)?;
    Ok(all)
}

fn study(mode: Mode, config: &Path, out: &Path, plot: Option<&Path>) -> Result<bool> {
    let config = ExperimentConfig::load(config)?;
    let report = run_study(&config, mode, &Execution::resolve(config.workers))?;
    emit_report(&report, out, ReportFormat::Csv)?;
    if let Some(plot) = plot {
        emit_report(&report, plot, ReportFormat::Svg)?;
    }
    let mut stderr = std::io::stderr().lock();
    for row in &report.rows {
        let _ = writeln!(
            stderr,
            "T={:<10} u={:<8.4} W1={} bound={} {}",
            row.t,
            row.u_eff,
            row.w1_emp.map(|w| format!("{w:.5}")).unwrap_or_else(|| "-".into()),
            row.bound_total.map(|b| format!("{b:.4e}")).unwrap_or_else(|| "-".into()),
            row.status
        );
    }
    if report.non_convergence_flag() {
        let _ = writeln!(stderr, "corollary condition fails for this schedule: no convergence claimed");
    }
    Ok(report.rows.iter().all(|r| r.ok()))
}

fn simulate(config: &Path, out: &Path) -> Result<()> {
    let config = ExperimentConfig::load(config)?;
    let grid = config.grid_for(config.grid.t)?;
    let sampler = FieldSampler::cached(&config.model, &grid)?;
    let exec = Execution::resolve(config.workers);
    let fields = exec.map(config.replicates as u64, |i| sampler.sample(config.seed, i))?;
    write_dump(out, &fields)?;
    eprintln!(
        "wrote {} fields of {} points (n = {}, h = {}) to {}",
        fields.len(),
        grid.points(),
        grid.n,
        grid.h,
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Theory { what } => theory(what).map(|_| true),
        Command::Check {
            what: Check::Inequalities { p_max },
        } => check_inequalities(p_max),
        Command::Study {
            mode,
            config,
            out,
            plot,
        } => study(mode.into(), &config, &out, plot.as_deref()),
        Command::Simulate { config, out } => simulate(&config, &out).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
