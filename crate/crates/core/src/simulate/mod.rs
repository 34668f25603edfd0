//! Monte Carlo evaluation of control policies.
//!
//! The wealth SDE is integrated by Euler-Maruyama on a uniform grid,
//!
//! ```text
//! X_{k+1} = X_k + (i - c - p + r X + alpha . q) dt + sum_m (q . sigma_,m) dW_m
//! ```
//!
//! with q the dollar positions handed back by the policy. Two estimators of
//! the expected utility J are provided:
//!
//! * RandomHorizon samples the death time by inverse transform and scores
//!   the realized objective of each path;
//! * FixedHorizonWeighted never kills a path: it integrates the utility flow
//!   weighted by the survivor function and the bequest flow weighted by the
//!   death density, which is the fixed-horizon restatement of the same J and
//!   a variance reduction.
//!
//! Normal increments come from a counter-based generator keyed by
//! (seed, pair, step, driver); paths are embarrassingly parallel and results
//! are accumulated in deterministic path order with compensated summation,
//! so estimates are bit-identical regardless of thread count.

pub mod policy;

use rayon::prelude::*;

pub use policy::{ClosedFormPolicy, FnPolicy, Objective, Policy, PreparedPolicy};

use crate::error::{Error, Result};
use crate::numerics::solve_backward_linear_ode;
use crate::rng;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluationMode {
    RandomHorizon,
    FixedHorizonWeighted,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub antithetic: bool,
    pub mode: EvaluationMode,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_paths: 100_000,
            dt: 0.01,
            seed: 42,
            antithetic: true,
            mode: EvaluationMode::FixedHorizonWeighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Death,
    Retirement,
    Bankruptcy,
}

/// One simulated trajectory with its controls and realized utility.
#[derive(Debug, Clone)]
pub struct WealthPath {
    pub times: Vec<f64>,
    pub wealth: Vec<f64>,
    pub consumption: Vec<f64>,
    pub premium: Vec<f64>,
    pub risky_dollars: Vec<Vec<f64>>,
    pub death_time: Option<f64>,
    pub realized_utility: f64,
    pub terminated_by: Termination,
}

/// Monte Carlo estimate of the expected utility with sampling diagnostics.
#[derive(Debug, Clone)]
pub struct UtilityEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Paths entering the mean (degenerate paths are excluded).
    pub n_paths: usize,
    /// Fraction of requested paths excluded because their realized utility
    /// was not finite (bankrupt full wealth, zero consumption with gamma < 0).
    pub degenerate_fraction: f64,
    /// Fraction of paths whose wealth was ever negative. Negative wealth is
    /// borrowing against human capital, not bankruptcy; bankruptcy is full
    /// wealth x + b(t) <= 0.
    pub negative_wealth_fraction: f64,
    /// Mean terminal wealth over paths that reached retirement.
    pub mean_terminal_wealth: f64,
    /// Mean total premium paid over the path lifetime.
    pub mean_insurance_spend: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub name: String,
    pub estimate: UtilityEstimate,
}

pub type ComparisonTable = Vec<ComparisonRow>;

// ---------------------------------------------------------------------------
// Precomputed per-step data
// ---------------------------------------------------------------------------

struct StepGrid {
    t0: f64,
    times: Vec<f64>,
    dt: f64,
    sqrt_dt: f64,
    n_steps: usize,
    n_assets: usize,
    n_drivers: usize,
    r: Vec<f64>,
    alpha: Vec<f64>,
    sigma: Vec<f64>,
    income: Vec<f64>,
    eta: Vec<f64>,
    discount: Vec<f64>,
    survival: Vec<f64>,
    density: Vec<f64>,
    /// Human capital of the insured problem: the bankruptcy boundary is
    /// x + b(t) <= 0, the edge of the value function's domain.
    b_floor: Vec<f64>,
    gamma: f64,
    horizon: f64,
}

impl StepGrid {
    fn build(scenario: &Scenario, t0: f64, dt: f64) -> Result<StepGrid> {
        let horizon = scenario.horizon();
        if !(t0 >= 0.0 && t0 < horizon) {
            return Err(Error::domain(format!("t0 = {t0} outside [0, T)")));
        }
        if !(dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        let span = horizon - t0;
        let n_steps = (span / dt).round().max(1.0) as usize;
        let dt = span / n_steps as f64;
        let times: Vec<f64> = (0..=n_steps)
            .map(|k| t0 + span * k as f64 / n_steps as f64)
            .collect();

        let n_assets = scenario.market.n_assets();
        let n_drivers = scenario.market.n_drivers();
        let mut grid = StepGrid {
            t0,
            dt,
            sqrt_dt: dt.sqrt(),
            n_steps,
            n_assets,
            n_drivers,
            r: Vec::with_capacity(n_steps + 1),
            alpha: Vec::with_capacity((n_steps + 1) * n_assets),
            sigma: Vec::with_capacity((n_steps + 1) * n_assets * n_drivers),
            income: Vec::with_capacity(n_steps + 1),
            eta: Vec::with_capacity(n_steps + 1),
            discount: Vec::with_capacity(n_steps + 1),
            survival: Vec::with_capacity(n_steps + 1),
            density: Vec::with_capacity(n_steps + 1),
            b_floor: Vec::new(),
            gamma: scenario.preferences.gamma,
            horizon,
            times,
        };
        for &t in &grid.times {
            grid.r.push(scenario.market.rate(t)?);
            grid.alpha.extend(scenario.market.risk_premium(t)?);
            let vol = scenario.market.volatility(t)?;
            for n in 0..n_assets {
                for m in 0..n_drivers {
                    grid.sigma.push(vol.get(n, m));
                }
            }
            grid.income.push(scenario.income.rate(t)?);
            grid.eta.push(scenario.eta(t)?);
            grid.discount.push((-scenario.preferences.rho * t).exp());
            grid.survival.push(scenario.mortality.conditional_survival(t, t0)?);
            grid.density.push(scenario.mortality.conditional_density(t, t0)?);
        }
        let discount_rate = |t: f64| {
            scenario
                .market
                .rate(t)
                .and_then(|r| scenario.eta(t).map(|e| r + e))
                .unwrap_or(f64::NAN)
        };
        let income_fn = |t: f64| scenario.income.rate(t).unwrap_or(f64::NAN);
        grid.b_floor = solve_backward_linear_ode(discount_rate, income_fn, 0.0, &grid.times)?;
        Ok(grid)
    }
}

// ---------------------------------------------------------------------------
// Single-path engine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct PathOutcome {
    utility: f64,
    terminal_wealth: Option<f64>,
    insurance_paid: f64,
    termination: Termination,
    ever_negative: bool,
}

/// e^{-rho t} a^gamma / gamma with -inf / NaN sentinels instead of errors.
#[inline]
fn crra_flow(gamma: f64, discount: f64, amount: f64) -> f64 {
    if amount > 0.0 {
        discount * amount.powf(gamma) / gamma
    } else if amount == 0.0 {
        if gamma < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    } else {
        f64::NAN
    }
}

struct PathParams<'a> {
    grid: &'a StepGrid,
    prepared: &'a dyn PreparedPolicy,
    objective: Objective,
    mode: EvaluationMode,
    seed: u64,
    scenario: &'a Scenario,
}

#[allow(clippy::too_many_arguments)]
fn run_path(
    params: &PathParams,
    path_index: usize,
    pair_index: u64,
    sign: f64,
    x0: f64,
    mut record: Option<&mut WealthPath>,
) -> Result<PathOutcome> {
    let grid = params.grid;
    let n = grid.n_steps;
    let (na, nm) = (grid.n_assets, grid.n_drivers);
    let mut risky = vec![0.0; na];
    let mut x = x0;
    let mut utility = 0.0;
    let mut insurance_paid = 0.0;
    let mut ever_negative = x < 0.0;
    let _ = path_index;

    // death time for the random-horizon estimator; antithetic partners use
    // the reflected uniform
    let death_time = if params.mode == EvaluationMode::RandomHorizon {
        let u = rng::uniform(params.seed, rng::stream::DEATH, pair_index, 0, 0);
        let u = if sign > 0.0 { u } else { 1.0 - u };
        Some(params.scenario.mortality.invert_survival(grid.t0, u)?)
    } else {
        None
    };

    if let Some(rec) = record.as_deref_mut() {
        rec.times.push(grid.times[0]);
        rec.wealth.push(x);
    }

    for k in 0..n {
        let t = grid.times[k];
        // bankruptcy: the state left the domain of the value function
        if x + grid.b_floor[k] <= 0.0 {
            return Ok(PathOutcome {
                utility: f64::NEG_INFINITY,
                terminal_wealth: None,
                insurance_paid,
                termination: Termination::Bankruptcy,
                ever_negative,
            });
        }

        let (c, p) = params.prepared.controls(k, t, x, &mut risky);
        if !c.is_finite() || !p.is_finite() || risky.iter().any(|q| !q.is_finite()) {
            return Err(Error::accuracy(format!(
                "policy returned a non-finite action at t={t}, x={x}"
            )));
        }
        if c < 0.0 {
            return Err(Error::domain(format!(
                "policy returned negative consumption {c} at t={t}"
            )));
        }
        if let Some(rec) = record.as_deref_mut() {
            rec.consumption.push(c);
            rec.premium.push(p);
            rec.risky_dollars.push(risky.clone());
        }

        // left-endpoint utility accumulation
        match params.mode {
            EvaluationMode::FixedHorizonWeighted => {
                let u = crra_flow(grid.gamma, grid.discount[k], c);
                utility += grid.survival[k] * u * grid.dt;
                if params.objective == Objective::WithBequest {
                    let legacy = x + p / grid.eta[k];
                    let b = crra_flow(grid.gamma, grid.discount[k], legacy);
                    utility += grid.density[k] * b * grid.dt;
                }
            }
            EvaluationMode::RandomHorizon => {
                let tau = death_time.unwrap();
                if tau <= grid.times[k + 1] {
                    // die inside this step: consume until tau, then bequeath
                    let dt_partial = (tau - t).max(0.0);
                    let u = crra_flow(grid.gamma, grid.discount[k], c);
                    utility += u * dt_partial;
                    let x_tau = euler_step(grid, k, x, c, p, &risky, sign, params.seed, pair_index, dt_partial);
                    insurance_paid += p * dt_partial;
                    if params.objective == Objective::WithBequest {
                        let eta_tau = params.scenario.eta(tau)?;
                        let legacy = x_tau + p / eta_tau;
                        let b = crra_flow(
                            grid.gamma,
                            (-params.scenario.preferences.rho * tau).exp(),
                            legacy,
                        );
                        utility += b;
                    }
                    if let Some(rec) = record.as_deref_mut() {
                        rec.times.push(tau);
                        rec.wealth.push(x_tau);
                        rec.death_time = Some(tau);
                        rec.terminated_by = Termination::Death;
                        rec.realized_utility = utility;
                    }
                    return Ok(PathOutcome {
                        utility,
                        terminal_wealth: None,
                        insurance_paid,
                        termination: Termination::Death,
                        ever_negative,
                    });
                }
                let u = crra_flow(grid.gamma, grid.discount[k], c);
                utility += u * grid.dt;
            }
        }

        x = euler_step(grid, k, x, c, p, &risky, sign, params.seed, pair_index, grid.dt);
        insurance_paid += p * grid.dt;
        ever_negative |= x < 0.0;
        if let Some(rec) = record.as_deref_mut() {
            rec.times.push(grid.times[k + 1]);
            rec.wealth.push(x);
        }
        let _ = nm;
    }

    // reached retirement
    let survival_weight = match params.mode {
        EvaluationMode::FixedHorizonWeighted => grid.survival[n],
        EvaluationMode::RandomHorizon => 1.0,
    };
    let w = crra_flow(
        grid.gamma,
        (-params.scenario.preferences.rho * grid.horizon).exp(),
        x,
    );
    utility += survival_weight * w;

    if let Some(rec) = record.as_deref_mut() {
        rec.terminated_by = Termination::Retirement;
        rec.realized_utility = utility;
    }
    Ok(PathOutcome {
        utility,
        terminal_wealth: Some(x),
        insurance_paid,
        termination: Termination::Retirement,
        ever_negative,
    })
}

/// One Euler-Maruyama update over dt_step.
#[allow(clippy::too_many_arguments)]
#[inline]
fn euler_step(
    grid: &StepGrid,
    k: usize,
    x: f64,
    c: f64,
    p: f64,
    risky: &[f64],
    sign: f64,
    seed: u64,
    pair_index: u64,
    dt_step: f64,
) -> f64 {
    let (na, nm) = (grid.n_assets, grid.n_drivers);
    let alpha = &grid.alpha[k * na..(k + 1) * na];
    let sigma = &grid.sigma[k * na * nm..(k + 1) * na * nm];
    let excess: f64 = alpha.iter().zip(risky).map(|(a, q)| a * q).sum();
    let drift = grid.income[k] - c - p + grid.r[k] * x + excess;
    let sqrt_dt = if dt_step == grid.dt {
        grid.sqrt_dt
    } else {
        dt_step.sqrt()
    };
    let mut diffusion = 0.0;
    for m in 0..nm {
        let mut load = 0.0;
        for (n, q) in risky.iter().enumerate() {
            load += q * sigma[n * nm + m];
        }
        let z = sign * rng::normal(seed, rng::stream::INCREMENT, pair_index, k as u64, m as u64);
        diffusion += load * z;
    }
    x + drift * dt_step + diffusion * sqrt_dt
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Simulate a single path with full trajectory recording.
pub fn simulate_path(
    scenario: &Scenario,
    policy: &dyn Policy,
    config: &SimulationConfig,
    path_index: usize,
) -> Result<WealthPath> {
    let grid = StepGrid::build(scenario, 0.0, config.dt)?;
    let prepared = policy.prepare(&grid.times)?;
    let (pair_index, sign) = pair_of(path_index, config.antithetic);
    let mut path = WealthPath {
        times: Vec::with_capacity(grid.n_steps + 1),
        wealth: Vec::with_capacity(grid.n_steps + 1),
        consumption: Vec::new(),
        premium: Vec::new(),
        risky_dollars: Vec::new(),
        death_time: None,
        realized_utility: f64::NAN,
        terminated_by: Termination::Retirement,
    };
    let params = PathParams {
        grid: &grid,
        prepared: prepared.as_ref(),
        objective: policy.objective(),
        mode: config.mode,
        seed: config.seed,
        scenario,
    };
    let outcome = run_path(&params, path_index, pair_index, sign, scenario.x0, Some(&mut path))?;
    path.terminated_by = outcome.termination;
    path.realized_utility = outcome.utility;
    Ok(path)
}

#[inline]
fn pair_of(path_index: usize, antithetic: bool) -> (u64, f64) {
    if antithetic {
        (
            (path_index / 2) as u64,
            if path_index % 2 == 0 { 1.0 } else { -1.0 },
        )
    } else {
        (path_index as u64, 1.0)
    }
}

/// Neumaier compensated accumulator.
#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Estimate J(t0, x0; policy) with mean and standard error.
pub fn estimate_expected_utility(
    scenario: &Scenario,
    policy: &dyn Policy,
    t0: f64,
    x0: f64,
    config: &SimulationConfig,
) -> Result<UtilityEstimate> {
    if config.n_paths == 0 {
        return Err(Error::invalid("n_paths must be at least 1"));
    }
    if policy.n_assets() != scenario.market.n_assets() {
        return Err(Error::invalid("policy and scenario disagree on asset count"));
    }
    let grid = StepGrid::build(scenario, t0, config.dt)?;
    let prepared = policy.prepare(&grid.times)?;
    let params = PathParams {
        grid: &grid,
        prepared: prepared.as_ref(),
        objective: policy.objective(),
        mode: config.mode,
        seed: config.seed,
        scenario,
    };
    let n_paths = if config.antithetic && config.n_paths % 2 == 1 {
        config.n_paths + 1
    } else {
        config.n_paths
    };

    let outcomes: Vec<PathOutcome> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let (pair, sign) = pair_of(i, config.antithetic);
            run_path(&params, i, pair, sign, x0, None)
        })
        .collect::<Result<Vec<_>>>()?;

    summarize(&outcomes, config.antithetic)
}

/// Deterministic aggregation in path order; with antithetic sampling the
/// i.i.d. units are pair means.
fn summarize(outcomes: &[PathOutcome], antithetic: bool) -> Result<UtilityEstimate> {
    let group = if antithetic { 2 } else { 1 };
    let mut included_paths = 0usize;
    let mut degenerate = 0usize;
    let mut negative = 0usize;
    let mut sum = Compensated::default();
    let mut samples: Vec<f64> = Vec::with_capacity(outcomes.len() / group);
    let mut terminal = Compensated::default();
    let mut n_terminal = 0usize;
    let mut insurance = Compensated::default();

    for chunk in outcomes.chunks_exact(group) {
        negative += chunk.iter().filter(|o| o.ever_negative).count();
        if chunk.iter().any(|o| !o.utility.is_finite()) {
            degenerate += group;
            continue;
        }
        let mean: f64 = chunk.iter().map(|o| o.utility).sum::<f64>() / group as f64;
        samples.push(mean);
        sum.add(mean);
        included_paths += group;
        for o in chunk {
            if let Some(w) = o.terminal_wealth {
                terminal.add(w);
                n_terminal += 1;
            }
            insurance.add(o.insurance_paid);
        }
    }
    if samples.is_empty() {
        return Err(Error::accuracy(
            "every simulated path was degenerate; the policy leaves the utility domain",
        ));
    }
    let n = samples.len() as f64;
    let mean = sum.value() / n;
    let mut var = Compensated::default();
    for s in &samples {
        var.add((s - mean) * (s - mean));
    }
    let std_error = if samples.len() > 1 {
        (var.value() / (n - 1.0) / n).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(UtilityEstimate {
        mean,
        std_error,
        n_paths: included_paths,
        degenerate_fraction: degenerate as f64 / outcomes.len() as f64,
        negative_wealth_fraction: negative as f64 / outcomes.len() as f64,
        mean_terminal_wealth: if n_terminal > 0 {
            terminal.value() / n_terminal as f64
        } else {
            f64::NAN
        },
        mean_insurance_spend: insurance.value() / included_paths as f64,
    })
}

/// Evaluate several policies under common random numbers (identical seeds,
/// path keys and death times).
pub fn compare_strategies(
    scenario: &Scenario,
    policies: &[&dyn Policy],
    t0: f64,
    x0: f64,
    config: &SimulationConfig,
) -> Result<ComparisonTable> {
    policies
        .iter()
        .map(|p| {
            Ok(ComparisonRow {
                name: p.name().to_string(),
                estimate: estimate_expected_utility(scenario, *p, t0, x0, config)?,
            })
        })
        .collect()
}
