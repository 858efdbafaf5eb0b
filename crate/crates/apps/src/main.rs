use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use satisfice::conic::SolveOptions;
use satisfice::engine::{
    empirical_optimum, resolve_target, solve_satisficing_with_z0, solve_twostage_dual, solve_twostage_primal,
    Target,
};
use satisfice::oracle::{mc_budget_bound, McDistribution};
use satisfice::{Error, Result};
use satisfice_apps::lotsizing::{nominal_cost, run_lotsizing, LotSizingInstance, Method, Mode, TIME_GUARD};
use satisfice_apps::model_file::{load_model, read_samples_csv, save_model, write_samples_csv};
use satisfice_apps::portfolio::{build_model, gen_two_point_samples, run_portfolio, PortfolioConfig};
use satisfice_apps::teststrict::{run_teststrict, tau_grid};
use satisfice_apps::verify::{verify, SolutionFile};

#[derive(Parser)]
#[command(name = "satisfice", version, about = "Robust conic satisficing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Adaptation {
    /// Affine dual recourse adaptation for any cone.
    Generic,
    /// Primal adaptation, nonnegative-orthant recourse only.
    Primal,
    /// Dual adaptation, nonnegative-orthant recourse only.
    Dual,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Robust,
    Satisficing,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMethod {
    Primal,
    Dual,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliDist {
    Uniform,
    Twopoint,
}

#[derive(Subcommand)]
enum Command {
    /// Minimal fragility for a target.
    Solve {
        model: PathBuf,
        #[arg(long, conflicts_with = "lambda")]
        tau: Option<f64>,
        /// Target offset above the empirical optimum.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, value_enum, default_value = "generic")]
        adaptation: Adaptation,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical optimum Z0 and its decision.
    Empirical { model: PathBuf },
    /// Checks a solution file against a model.
    Verify {
        model: PathBuf,
        solution: PathBuf,
        /// Grid points per axis.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Portfolio study over a grid of (a, Γ, λ).
    Portfolio {
        #[arg(long, value_delimiter = ',')]
        a: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        gamma: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
        #[arg(long)]
        omega: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Sample CSV to use instead of generated samples.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Also write one model file per (a, Γ).
        #[arg(long)]
        emit_model: bool,
        #[arg(long, default_value = "portfolio_out")]
        out_dir: PathBuf,
    },
    /// Network lot-sizing with primal or dual affine adaptation.
    Lotsizing {
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum)]
        mode: CliMode,
        #[arg(long, value_enum)]
        method: CliMethod,
        /// Demand budget of the robust mode.
        #[arg(long, conflicts_with = "tau")]
        r: Option<f64>,
        /// Target of the satisficing mode; defaults to 1.5 times the cost at
        /// demand z̄/2.
        #[arg(long)]
        tau: Option<f64>,
        /// Solve time limit in seconds.
        #[arg(long, default_value_t = TIME_GUARD)]
        time_limit: f64,
    },
    /// Primal and dual adaptations of the two-stage test instance.
    Teststrict {
        /// lo:hi:steps
        #[arg(long, default_value = "2:200:10")]
        tau_grid: String,
    },
    /// Monte Carlo check of the budgeted-set probability bound.
    Mcbound {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: f64,
        #[arg(long, value_enum)]
        dist: CliDist,
        #[arg(long, default_value_t = 1_000_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn solve(
    model: &Path,
    tau: Option<f64>,
    lambda: Option<f64>,
    adaptation: Adaptation,
    out: Option<PathBuf>,
) -> Result<()> {
    let loaded = load_model(model)?;
    let target = match (tau, lambda) {
        (Some(t), _) => Target::Tau(t),
        (_, Some(l)) => Target::Lambda(l),
        _ => loaded
            .target
            .ok_or_else(|| Error::Validation("no target: pass --tau or --lambda, or set one in the model".into()))?,
    };
    let opts = SolveOptions::default();
    let (tau, z0) = resolve_target(&loaded.model, target, &opts)?;
    let sol = match adaptation {
        Adaptation::Generic => solve_satisficing_with_z0(&loaded.model, tau, z0, &opts)?,
        Adaptation::Primal => solve_twostage_primal(&loaded.model, tau, z0, &opts)?,
        Adaptation::Dual => solve_twostage_dual(&loaded.model, tau, z0, &opts)?,
    };
    let file = SolutionFile::from(&sol);
    match out {
        Some(p) => write(&p, &file.to_json()?),
        None => print_json(&file),
    }
}

fn empirical(model: &Path) -> Result<()> {
    let loaded = load_model(model)?;
    let (z0, x) = empirical_optimum(&loaded.model, &SolveOptions::default())?;
    print_json(&serde_json::json!({ "Z0": z0, "x": x }))
}

fn verify_cmd(model: &Path, solution: &Path, grid: Option<usize>) -> Result<bool> {
    let loaded = load_model(model)?;
    let sol = SolutionFile::load(solution)?;
    let report = verify(&loaded.model, &sol, grid)?;
    print_json(&report)?;
    Ok(report.pass)
}

#[allow(clippy::too_many_arguments)]
fn portfolio(
    a: Option<Vec<f64>>,
    gamma: Option<Vec<usize>>,
    lambda: Option<Vec<f64>>,
    omega: Option<usize>,
    seed: Option<u64>,
    samples_path: Option<PathBuf>,
    emit_model: bool,
    out_dir: &Path,
) -> Result<()> {
    let mut cfg = PortfolioConfig::default();
    if let Some(v) = a {
        cfg.a = v;
    }
    if let Some(v) = gamma {
        cfg.gamma = v;
    }
    if let Some(v) = lambda {
        cfg.lambda = v;
    }
    if let Some(v) = seed {
        cfg.seed = v;
    }
    let samples = match &samples_path {
        Some(p) => {
            let (header, rows) = read_samples_csv(p)?;
            if header.len() != cfg.n() {
                return Err(Error::Validation(format!(
                    "samples: {} columns but the configuration has {} assets",
                    header.len(),
                    cfg.n()
                )));
            }
            cfg.omega = rows.len();
            rows
        }
        None => {
            if let Some(v) = omega {
                cfg.omega = v;
            }
            cfg.validate()?;
            gen_two_point_samples(&cfg)
        }
    };
    std::fs::create_dir_all(out_dir)?;
    write_samples_csv(out_dir.join("samples.csv"), &cfg.asset_names(), &samples)?;
    if emit_model {
        for &ai in &cfg.a {
            for &g in &cfg.gamma {
                let pm = build_model(&samples, ai, g, cfg.padding)?;
                let target = cfg.lambda.first().map(|&l| Target::Lambda(l));
                save_model(out_dir.join(format!("model_a{ai}_gamma{g}.json")), &pm.model, target)?;
            }
        }
    }
    let report = run_portfolio(&cfg, &samples, &SolveOptions::default())?;
    write(&out_dir.join("results.csv"), &report.to_csv())?;
    write(
        &out_dir.join("results.json"),
        &(serde_json::to_string_pretty(&report.without_timings())? + "\n"),
    )?;
    let timings: Vec<_> = report
        .cells
        .iter()
        .map(|c| serde_json::json!({ "a": c.a, "gamma": c.gamma, "lambda": c.lambda, "stats": c.stats }))
        .collect();
    write(&out_dir.join("timings.json"), &(serde_json::to_string_pretty(&timings)? + "\n"))?;
    let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
    eprintln!(
        "{} cells ({} failed) written to {}",
        report.cells.len(),
        failed,
        out_dir.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn lotsizing(
    nodes: usize,
    seed: u64,
    mode: CliMode,
    method: CliMethod,
    r: Option<f64>,
    tau: Option<f64>,
    time_limit: f64,
) -> Result<()> {
    let inst = LotSizingInstance::generate(nodes, seed)?;
    let opts = SolveOptions {
        time_limit,
        ..SolveOptions::default()
    };
    let mode = match mode {
        CliMode::Robust => Mode::Robust,
        CliMode::Satisficing => Mode::Satisficing,
    };
    let method = match method {
        CliMethod::Primal => Method::Primal,
        CliMethod::Dual => Method::Dual,
    };
    let param = match (mode, r, tau) {
        (Mode::Robust, Some(r), _) => r,
        (Mode::Robust, None, _) => return Err(Error::Validation("robust mode needs --r".into())),
        (Mode::Satisficing, _, Some(t)) => t,
        (Mode::Satisficing, _, None) => 1.5 * nominal_cost(&inst, &SolveOptions::default())?,
    };
    let res = run_lotsizing(&inst, mode, method, param, &opts)?;
    if res.timed_out {
        eprintln!("time limit of {time_limit} s reached; partial report");
    }
    print_json(&res)
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Validation(format!("--tau-grid expects lo:hi:steps, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let steps: usize = parts[2].parse().map_err(|_| bad())?;
    tau_grid(lo, hi, steps)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve {
            model,
            tau,
            lambda,
            adaptation,
            out,
        } => solve(&model, tau, lambda, adaptation, out)?,
        Command::Empirical { model } => empirical(&model)?,
        Command::Verify { model, solution, grid } => return verify_cmd(&model, &solution, grid),
        Command::Portfolio {
            a,
            gamma,
            lambda,
            omega,
            seed,
            samples,
            emit_model,
            out_dir,
        } => portfolio(a, gamma, lambda, omega, seed, samples, emit_model, &out_dir)?,
        Command::Lotsizing {
            nodes,
            seed,
            mode,
            method,
            r,
            tau,
            time_limit,
        } => lotsizing(nodes, seed, mode, method, r, tau, time_limit)?,
        Command::Teststrict { tau_grid } => print_json(&run_teststrict(&parse_grid(&tau_grid)?, &SolveOptions::default())?)?,
        Command::Mcbound { n, c, dist, trials, seed } => {
            let dist = match dist {
                CliDist::Uniform => McDistribution::Uniform,
                CliDist::Twopoint => McDistribution::TwoPoint,
            };
            let report = mc_budget_bound(n, c, dist.variance(), dist, trials, seed)?;
            print_json(&serde_json::json!({ "report": report, "holds": report.holds() }))?;
            return Ok(report.holds());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
