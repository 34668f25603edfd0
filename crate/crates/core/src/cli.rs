//! Command-line orchestration: scenario ingestion, solve/verify/simulate/
//! compare runs and the insurance-surface reproduction, all emitting CSV.
//!
//! Exit codes are a stable contract: 0 success, 1 verification failure,
//! 2 input error, 3 numerical error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::scenario::Scenario;
use crate::simulate::{
    compare_strategies, estimate_expected_utility, simulate_path, ClosedFormPolicy,
    EvaluationMode, Policy, SimulationConfig,
};
use crate::solver::{StrategyCoefficients, Variant};
use crate::verify::{verify_grid, VerifyOptions};

/// The bundled reference scenario, byte-for-byte part of the binary.
pub const FIG1_JSON: &str = include_str!("../data/fig1.json");

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "lifeplan",
    about = "Optimal consumption, investment and life insurance for a wage earner \
             with random lifetime: closed-form solve, HJB verification, Monte Carlo."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario JSON file (bundled reference scenario when omitted).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output directory for CSV artifacts.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Monte Carlo seed.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Monte Carlo path count.
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    /// Euler step in years.
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Override the scenario's coefficient-ODE grid resolution.
    #[arg(long)]
    pub grid_steps: Option<usize>,
    /// Override a scenario field, e.g. --override preferences.rho=0.05
    /// (repeatable; dotted path into the scenario JSON).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Estimator: "weighted" (fixed-horizon, survival-weighted) or "random"
    /// (sampled death times).
    #[arg(long, default_value = "weighted")]
    pub mode: String,
    /// Dump the first N simulated paths to paths.csv (simulate only).
    #[arg(long, default_value_t = 0)]
    pub dump_paths: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the coefficient curves and the optimal-control grid.
    Solve(CommonArgs),
    /// Check the closed form against the HJB equation pointwise.
    Verify(CommonArgs),
    /// Monte Carlo evaluation of the closed-form strategy.
    Simulate(CommonArgs),
    /// Compare the with- and without-insurance strategies.
    Compare(CommonArgs),
    /// Reproduce the optimal insurance-purchase surface.
    Figure1(CommonArgs),
}

/// Error with a process exit code attached.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Invalid(_) => EXIT_INPUT,
            Error::Domain(_) | Error::Singular(_) | Error::Accuracy(_) => EXIT_NUMERICAL,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Verify(args) => run_verify(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Compare(args) => run_compare(args),
        Command::Figure1(args) => run_figure1(args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario loading with overrides
// ---------------------------------------------------------------------------

fn load_scenario(args: &CommonArgs) -> CliResult<Scenario> {
    let text = match &args.scenario {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?,
        None => FIG1_JSON.to_string(),
    };
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("scenario is not valid JSON: {e}")))?;
    for entry in &args.overrides {
        apply_override(&mut value, entry)?;
    }
    if let Some(steps) = args.grid_steps {
        value["grid_steps"] = serde_json::json!(steps);
    }
    Scenario::from_json_value(value).map_err(|e| CliError {
        code: EXIT_INPUT,
        message: e.to_string(),
    })
}

/// Set a dotted-path key, e.g. "preferences.rho=0.05" or "market.mu.1=0.12".
/// Intermediate components must already exist; the leaf may be inserted.
fn apply_override(value: &mut serde_json::Value, entry: &str) -> CliResult<()> {
    let (path, raw) = entry
        .split_once('=')
        .ok_or_else(|| CliError::input(format!("override '{entry}' is not KEY=VALUE")))?;
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = value;
    let components: Vec<&str> = path.split('.').collect();
    for (i, comp) in components.iter().enumerate() {
        let last = i + 1 == components.len();
        if last {
            match cursor {
                serde_json::Value::Object(map) => {
                    map.insert(comp.to_string(), parsed);
                    return Ok(());
                }
                serde_json::Value::Array(arr) => {
                    let idx: usize = comp.parse().map_err(|_| {
                        CliError::input(format!("override index '{comp}' is not a number"))
                    })?;
                    if idx >= arr.len() {
                        return Err(CliError::input(format!(
                            "override index {idx} out of bounds in '{path}'"
                        )));
                    }
                    arr[idx] = parsed;
                    return Ok(());
                }
                _ => {
                    return Err(CliError::input(format!(
                        "override path '{path}' does not address an object or array"
                    )))
                }
            }
        }
        cursor = match cursor {
            serde_json::Value::Object(map) => map.get_mut(*comp).ok_or_else(|| {
                CliError::input(format!("override path component '{comp}' not found"))
            })?,
            serde_json::Value::Array(arr) => {
                let idx: usize = comp.parse().map_err(|_| {
                    CliError::input(format!("override index '{comp}' is not a number"))
                })?;
                arr.get_mut(idx).ok_or_else(|| {
                    CliError::input(format!("override index {idx} out of bounds in '{path}'"))
                })?
            }
            _ => {
                return Err(CliError::input(format!(
                    "override path '{path}' descends into a scalar"
                )))
            }
        };
    }
    Ok(())
}

fn simulation_config(args: &CommonArgs) -> CliResult<SimulationConfig> {
    let mode = match args.mode.as_str() {
        "weighted" => EvaluationMode::FixedHorizonWeighted,
        "random" => EvaluationMode::RandomHorizon,
        other => {
            return Err(CliError::input(format!(
                "unknown mode '{other}' (use 'weighted' or 'random')"
            )))
        }
    };
    Ok(SimulationConfig {
        n_paths: args.paths,
        dt: args.dt,
        seed: args.seed,
        antithetic: true,
        mode,
    })
}

// ---------------------------------------------------------------------------
// CSV plumbing
// ---------------------------------------------------------------------------

/// 17-significant-digit decimal: re-reading reproduces the f64 bit pattern.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_atomic(dir: &Path, name: &str, content: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, content)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, &path)
        .map_err(|e| CliError::input(format!("cannot rename into {}: {e}", path.display())))?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn run_solve(args: &CommonArgs) -> CliResult<()> {
    let scenario = load_scenario(args)?;
    let coeffs = StrategyCoefficients::compute(&scenario, Variant::WithInsurance)?;
    let horizon = scenario.horizon();

    let mut csv = String::from("t,b,e,D,a,Sigma,H,K\n");
    for k in 0..=400 {
        let t = horizon * k as f64 / 400.0;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            fmt(t),
            fmt(coeffs.human_capital(t)?),
            fmt(coeffs.coefficient_e(t)?),
            fmt(coeffs.coefficient_d(t)?),
            fmt(coeffs.value_coefficient_a(t)?),
            fmt(coeffs.sigma_quadratic(t)?),
            fmt(coeffs.coefficient_h(t)?),
            fmt(coeffs.coefficient_k(t)?),
        );
    }
    let path = write_atomic(&args.out, "coefficients.csv", &csv)?;
    println!("wrote {}", path.display());

    let n_assets = scenario.market.n_assets();
    let mut grid_csv = String::from("t,x,c_star,p_star");
    for n in 1..=n_assets {
        let _ = write!(grid_csv, ",theta_{n}");
    }
    grid_csv.push_str(",theta_0\n");
    for i in 0..=40 {
        let t = horizon * i as f64 / 40.0;
        for j in 0..=40 {
            let x = 1e3 + (3e6 - 1e3) * j as f64 / 40.0;
            let action = coeffs.optimal_portfolio(t, x)?;
            let _ = write!(
                grid_csv,
                "{},{},{},{}",
                fmt(t),
                fmt(x),
                fmt(action.consumption),
                fmt(action.premium)
            );
            for th in &action.theta {
                let _ = write!(grid_csv, ",{}", fmt(*th));
            }
            let _ = writeln!(grid_csv, ",{}", fmt(action.theta0));
        }
    }
    let path = write_atomic(&args.out, "strategy_grid.csv", &grid_csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run_verify(args: &CommonArgs) -> CliResult<()> {
    let scenario = load_scenario(args)?;
    let coeffs = StrategyCoefficients::compute(&scenario, Variant::WithInsurance)?;
    let options = VerifyOptions::default();
    let report = verify_grid(&coeffs, &options)?;

    let mut csv = String::from("t,x,residual,foc_c,foc_p,foc_theta_norm,hessian_ok\n");
    for p in &report.points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            fmt(p.t),
            fmt(p.x),
            fmt(p.residual),
            fmt(p.foc[0]),
            fmt(p.foc[1]),
            fmt(p.foc[2]),
            p.hessian_ok
        );
    }
    let path = write_atomic(&args.out, "verification.csv", &csv)?;
    println!("wrote {}", path.display());
    println!("{}", report.summary_line());
    if report.passed {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_VERIFY_FAILED,
            message: "HJB verification failed".into(),
        })
    }
}

fn run_simulate(args: &CommonArgs) -> CliResult<()> {
    let scenario = load_scenario(args)?;
    let config = simulation_config(args)?;
    let coeffs = StrategyCoefficients::compute(&scenario, Variant::WithInsurance)?;
    let analytic = coeffs.value_function(0.0, scenario.x0)?;
    let policy = ClosedFormPolicy::optimal(coeffs);
    let estimate =
        estimate_expected_utility(&scenario, &policy, 0.0, scenario.x0, &config)?;

    let mut csv = String::from(
        "strategy,mean,std_error,n_paths,analytic_value,bankruptcy_fraction,\
         negative_wealth_fraction,mean_terminal_wealth,mean_insurance_spend\n",
    );
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{},{},{}",
        policy.name(),
        fmt(estimate.mean),
        fmt(estimate.std_error),
        estimate.n_paths,
        fmt(analytic),
        fmt(estimate.degenerate_fraction),
        fmt(estimate.negative_wealth_fraction),
        fmt(estimate.mean_terminal_wealth),
        fmt(estimate.mean_insurance_spend),
    );
    let path = write_atomic(&args.out, "simulation.csv", &csv)?;
    println!("wrote {}", path.display());
    if estimate.degenerate_fraction > 0.0 {
        eprintln!(
            "warning: {:.3}% of paths were excluded as degenerate (bankrupt full wealth)",
            100.0 * estimate.degenerate_fraction
        );
    }
    println!(
        "J = {:.6e} +- {:.3e} (analytic V = {:.6e}, {} paths)",
        estimate.mean, estimate.std_error, analytic, estimate.n_paths
    );

    if args.dump_paths > 0 {
        let n_assets = scenario.market.n_assets();
        let mut paths_csv = String::from("path,t,wealth,c,p");
        for n in 1..=n_assets {
            let _ = write!(paths_csv, ",q_{n}");
        }
        paths_csv.push('\n');
        for index in 0..args.dump_paths {
            let wp = simulate_path(&scenario, &policy, &config, index)?;
            for k in 0..wp.consumption.len() {
                let _ = write!(
                    paths_csv,
                    "{},{},{},{},{}",
                    index,
                    fmt(wp.times[k]),
                    fmt(wp.wealth[k]),
                    fmt(wp.consumption[k]),
                    fmt(wp.premium[k])
                );
                for q in &wp.risky_dollars[k] {
                    let _ = write!(paths_csv, ",{}", fmt(*q));
                }
                paths_csv.push('\n');
            }
        }
        let path = write_atomic(&args.out, "paths.csv", &paths_csv)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_compare(args: &CommonArgs) -> CliResult<()> {
    let scenario = load_scenario(args)?;
    let config = simulation_config(args)?;
    let with = StrategyCoefficients::compute(&scenario, Variant::WithInsurance)?;
    let without = StrategyCoefficients::compute(&scenario, Variant::NoInsurance)?;
    let horizon = scenario.horizon();
    let n_assets = scenario.market.n_assets();

    // portfolio comparison on a (t, x) grid
    let mut csv = String::from("t,x");
    for n in 1..=n_assets {
        let _ = write!(csv, ",theta_with_{n},theta_no_{n},dollars_with_{n},dollars_no_{n}");
    }
    csv.push('\n');
    for i in 0..=40 {
        let t = horizon * i as f64 / 40.0;
        for &x in &[1e4, 1e5, 5e5, 1e6, 3e6] {
            let a_with = with.optimal_portfolio(t, x)?;
            let a_no = without.optimal_portfolio(t, x)?;
            let q_with = with.dollar_allocations(t, x)?;
            let q_no = without.dollar_allocations(t, x)?;
            let _ = write!(csv, "{},{}", fmt(t), fmt(x));
            for n in 0..n_assets {
                let _ = write!(
                    csv,
                    ",{},{},{},{}",
                    fmt(a_with.theta[n]),
                    fmt(a_no.theta[n]),
                    fmt(q_with[n]),
                    fmt(q_no[n])
                );
            }
            csv.push('\n');
        }
    }
    let path = write_atomic(&args.out, "comparison.csv", &csv)?;
    println!("wrote {}", path.display());

    // Monte Carlo comparison under common random numbers; each closed form
    // is scored under its own objective
    let value_with = with.value_function(0.0, scenario.x0)?;
    let value_without = without.value_function(0.0, scenario.x0)?;
    let p_with = ClosedFormPolicy::optimal(with);
    let p_without = ClosedFormPolicy::optimal(without);
    let table = compare_strategies(
        &scenario,
        &[&p_with as &dyn Policy, &p_without as &dyn Policy],
        0.0,
        scenario.x0,
        &config,
    )?;
    let mut summary = String::from(
        "strategy,mean,std_error,n_paths,analytic_value,bankruptcy_fraction,\
         mean_terminal_wealth,mean_insurance_spend\n",
    );
    for (row, analytic) in table.iter().zip([value_with, value_without]) {
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            row.name,
            fmt(row.estimate.mean),
            fmt(row.estimate.std_error),
            row.estimate.n_paths,
            fmt(analytic),
            fmt(row.estimate.degenerate_fraction),
            fmt(row.estimate.mean_terminal_wealth),
            fmt(row.estimate.mean_insurance_spend),
        );
    }
    let path = write_atomic(&args.out, "comparison_summary.csv", &summary)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run_figure1(args: &CommonArgs) -> CliResult<()> {
    let scenario = load_scenario(args)?;
    let coeffs = StrategyCoefficients::compute(&scenario, Variant::WithInsurance)?;
    let horizon = scenario.horizon();

    // p* as a function of age and full wealth w = x + b(t):
    // p*(t, w) = eta(t) ((D(t) - 1) w + b(t)); raw dollars per year
    let mut csv = String::from("t,full_wealth,p_star\n");
    let n_t = (horizon / 0.5).round() as usize;
    for i in 0..=n_t {
        let t = horizon * i as f64 / n_t as f64;
        let eta = scenario.eta(t)?;
        let d = coeffs.coefficient_d(t)?;
        let b = coeffs.human_capital(t)?;
        for j in 0..=300 {
            let w = 1e4 * j as f64;
            let p_star = eta * ((d - 1.0) * w + b);
            let _ = writeln!(csv, "{},{},{}", fmt(t), fmt(w), fmt(p_star));
        }
    }
    let path = write_atomic(&args.out, "surface.csv", &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}
