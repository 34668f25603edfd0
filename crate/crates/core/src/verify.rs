//! Independent verification that the closed form solves the control problem.
//!
//! Three layers of checks, all pointwise on a (t, x) grid:
//!
//! * the HJB residual V_t - lambda V + H(t, x; nu*) with the ansatz
//!   derivatives taken analytically (an algebraic identity check) and, as a
//!   cross-check, by finite differences (a discretization check);
//! * the three first-order conditions at the closed-form controls;
//! * second-order conditions: U_cc < 0, (lambda/eta^2) B_ZZ < 0 and
//!   x^2 V_xx sigma sigma^T negative definite;
//! * a numeric argmax of the Hamiltonian (coordinate-wise Newton on the three
//!   decoupled problems, deliberately started away from the closed form)
//!   that must land back on the closed-form controls.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::SpdFactor;
use crate::scenario::Scenario;
use crate::solver::{
    utility_bequest, utility_consumption, ControlAction, StrategyCoefficients,
};

/// How the ansatz derivatives entering the residual are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

/// The Hamiltonian of the control problem at one state and action:
///
/// ```text
/// H = (i - c - p + (r + sum theta_n alpha_n) x) Vx
///     + x^2/2 sum_m (sum_n theta_n sigma_nm)^2 Vxx
///     + lambda B(x + p/eta, t) + U(c, t)
/// ```
pub fn hamiltonian(
    scenario: &Scenario,
    t: f64,
    x: f64,
    action: &ControlAction,
    vx: f64,
    vxx: f64,
) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("Hamiltonian requires x >= 0, got {x}")));
    }
    let prefs = &scenario.preferences;
    let r = scenario.market.rate(t)?;
    let alpha = scenario.market.risk_premium(t)?;
    let sigma = scenario.market.volatility(t)?;
    let lambda = scenario.mortality.hazard(t)?;
    let eta = scenario.eta(t)?;
    let income = scenario.income.rate(t)?;
    if action.theta.len() != scenario.market.n_assets() {
        return Err(Error::invalid("portfolio dimension mismatch"));
    }

    let excess: f64 = action
        .theta
        .iter()
        .zip(&alpha)
        .map(|(th, a)| th * a)
        .sum();
    let drift = income - action.consumption - action.premium + (r + excess) * x;

    let mut quad = 0.0;
    for m in 0..sigma.cols() {
        let row_dot: f64 = action
            .theta
            .iter()
            .enumerate()
            .map(|(n, th)| th * sigma.get(n, m))
            .sum();
        quad += row_dot * row_dot;
    }

    // infinitely painful actions evaluate to -infinity rather than erroring
    let crra_or_sentinel = |amount: f64, f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        if amount < 0.0 {
            if prefs.gamma < 0.0 {
                Ok(f64::NEG_INFINITY)
            } else {
                Err(Error::domain(format!(
                    "negative argument {amount} with gamma in (0, 1)"
                )))
            }
        } else {
            f(amount)
        }
    };
    let legacy = x + action.premium / eta;
    let u = crra_or_sentinel(action.consumption, &|c| utility_consumption(prefs, c, t))?;
    let b = crra_or_sentinel(legacy, &|z| utility_bequest(prefs, z, t))?;

    Ok(drift * vx + 0.5 * x * x * quad * vxx + lambda * b + u)
}

/// Hamiltonian at a point using the given controls and analytic ansatz
/// derivatives.
pub fn hamiltonian_at(
    coeffs: &StrategyCoefficients,
    t: f64,
    x: f64,
    action: &ControlAction,
) -> Result<f64> {
    let d = coeffs.value_derivatives(t, x)?;
    hamiltonian(coeffs.scenario(), t, x, action, d.vx, d.vxx)
}

/// V_t - lambda V + H(t, x; nu*), which must vanish for the closed form.
pub fn hjb_residual(
    coeffs: &StrategyCoefficients,
    t: f64,
    x: f64,
    mode: DerivativeMode,
) -> Result<f64> {
    let action = coeffs.optimal_portfolio(t, x)?;
    let lambda = coeffs.scenario().mortality.hazard(t)?;
    let (v, vt, vx, vxx) = match mode {
        DerivativeMode::Analytic => {
            let d = coeffs.value_derivatives(t, x)?;
            (d.v, d.vt, d.vx, d.vxx)
        }
        DerivativeMode::FiniteDifference => finite_difference_derivatives(coeffs, t, x)?,
    };
    let h = hamiltonian(coeffs.scenario(), t, x, &action, vx, vxx)?;
    Ok(vt - lambda * v + h)
}

/// Magnitude of the largest term entering the residual sum; the natural
/// scale for calling the residual "zero".
pub fn hamiltonian_scale(coeffs: &StrategyCoefficients, t: f64, x: f64) -> Result<f64> {
    let action = coeffs.optimal_portfolio(t, x)?;
    let d = coeffs.value_derivatives(t, x)?;
    let scenario = coeffs.scenario();
    let lambda = scenario.mortality.hazard(t)?;
    let u = utility_consumption(&scenario.preferences, action.consumption, t)?;
    let z = coeffs.optimal_legacy(t, x)?;
    let b = utility_bequest(&scenario.preferences, z, t)?;
    Ok([d.vt.abs(), (lambda * d.v).abs(), (lambda * b).abs(), u.abs()]
        .into_iter()
        .fold(0.0, f64::max))
}

/// Central differences with the cube-root-of-epsilon step (fourth root for
/// the second derivative); one-sided second-order stencils at the time
/// boundaries where the coefficient curves end.
fn finite_difference_derivatives(
    coeffs: &StrategyCoefficients,
    t: f64,
    x: f64,
) -> Result<(f64, f64, f64, f64)> {
    let v = coeffs.value_function(t, x)?;
    let horizon = coeffs.scenario().horizon();
    let eps = f64::EPSILON;
    // the curvature length scale of V in x is full wealth x + b(t), not x
    let b = coeffs.human_capital(t)?;
    let x_scale = 1.0 + x.abs() + b;
    // the FD step in t must resolve V's log-rate in time, which runs
    // through both a(t) and the gamma-power of full wealth:
    // d ln V / dt = a'/a + gamma b' / (x + b)
    let gamma = coeffs.scenario().preferences.gamma;
    let b_rate = coeffs.human_capital_rate(t)?.abs();
    let a_log_rate =
        (coeffs.value_coefficient_a_rate(t)? / coeffs.value_coefficient_a(t)?).abs();
    let v_log_rate = a_log_rate + gamma.abs() * b_rate / (x + b);
    let t_scale = (1.0 + t.abs())
        .min(1.0 / (v_log_rate + f64::MIN_POSITIVE))
        .max(1e-9);

    let ht = eps.cbrt() * t_scale;
    // V varies fast in t near the boundaries (e' jumps to H - K at T), so
    // the one-sided stencils are third order
    let vt = if t - ht < 0.0 {
        let (v1, v2, v3) = (
            coeffs.value_function(t + ht, x)?,
            coeffs.value_function(t + 2.0 * ht, x)?,
            coeffs.value_function(t + 3.0 * ht, x)?,
        );
        (-11.0 * v + 18.0 * v1 - 9.0 * v2 + 2.0 * v3) / (6.0 * ht)
    } else if t + ht > horizon {
        let (v1, v2, v3) = (
            coeffs.value_function(t - ht, x)?,
            coeffs.value_function(t - 2.0 * ht, x)?,
            coeffs.value_function(t - 3.0 * ht, x)?,
        );
        (11.0 * v - 18.0 * v1 + 9.0 * v2 - 2.0 * v3) / (6.0 * ht)
    } else {
        (coeffs.value_function(t + ht, x)? - coeffs.value_function(t - ht, x)?) / (2.0 * ht)
    };

    // fourth-order central stencils in x keep the noise floor far below the
    // tolerance even when |lambda V| is small against the other terms
    let hx = eps.powf(0.2) * x_scale;
    let vx = (-coeffs.value_function(t, x + 2.0 * hx)?
        + 8.0 * coeffs.value_function(t, x + hx)?
        - 8.0 * coeffs.value_function(t, x - hx)?
        + coeffs.value_function(t, x - 2.0 * hx)?)
        / (12.0 * hx);

    let hxx = eps.powf(1.0 / 6.0) * x_scale;
    let vxx = (-coeffs.value_function(t, x + 2.0 * hxx)?
        + 16.0 * coeffs.value_function(t, x + hxx)?
        - 30.0 * v
        + 16.0 * coeffs.value_function(t, x - hxx)?
        - coeffs.value_function(t, x - 2.0 * hxx)?)
        / (12.0 * hxx * hxx);

    Ok((v, vt, vx, vxx))
}

/// Relative gaps of the three first-order conditions at the closed-form
/// optimum: consumption, premium, portfolio (Euclidean norm over assets).
pub fn foc_gaps(coeffs: &StrategyCoefficients, t: f64, x: f64) -> Result<[f64; 3]> {
    let scenario = coeffs.scenario();
    let prefs = &scenario.preferences;
    let d = coeffs.value_derivatives(t, x)?;
    let action = coeffs.optimal_portfolio(t, x)?;
    let lambda = scenario.mortality.hazard(t)?;
    let eta = scenario.eta(t)?;
    let discount = (-prefs.rho * t).exp();

    // -Vx + U_c(c*) = 0
    let uc = discount * action.consumption.powf(prefs.gamma - 1.0);
    let gap_c = (uc - d.vx).abs() / d.vx.abs();

    // -Vx + (lambda/eta) B_Z(Z*) = 0
    let z = coeffs.optimal_legacy(t, x)?;
    let bz = discount * z.powf(prefs.gamma - 1.0);
    let gap_p = (lambda / eta * bz - d.vx).abs() / d.vx.abs();

    // x Vx alpha + x^2 Vxx sigma sigma^T theta* = 0
    let alpha = scenario.market.risk_premium(t)?;
    let gram = scenario.market.volatility(t)?.gram();
    let gram_theta = gram.matvec(&action.theta);
    let mut gap_sq = 0.0;
    let mut scale_sq = 0.0;
    for n in 0..alpha.len() {
        let lhs = x * d.vx * alpha[n] + x * x * d.vxx * gram_theta[n];
        gap_sq += lhs * lhs;
        scale_sq += (x * d.vx * alpha[n]).powi(2);
    }
    let gap_theta = if scale_sq > 0.0 {
        (gap_sq / scale_sq).sqrt()
    } else {
        gap_sq.sqrt()
    };

    Ok([gap_c, gap_p, gap_theta])
}

/// Strict concavity of the Hamiltonian in each control at the optimum.
pub fn hessian_check(coeffs: &StrategyCoefficients, t: f64, x: f64) -> Result<bool> {
    let d = coeffs.value_derivatives(t, x)?;
    let action = coeffs.optimal_portfolio(t, x)?;
    let z = coeffs.optimal_legacy(t, x)?;
    hessian_parts(coeffs.scenario(), t, x, action.consumption, z, d.vxx)
}

/// Sign conditions with an injectable Vxx, so tests can falsify the check.
pub fn hessian_parts(
    scenario: &Scenario,
    t: f64,
    x: f64,
    consumption: f64,
    legacy: f64,
    vxx: f64,
) -> Result<bool> {
    let prefs = &scenario.preferences;
    let gamma = prefs.gamma;
    let discount = (-prefs.rho * t).exp();
    let lambda = scenario.mortality.hazard(t)?;
    let eta = scenario.eta(t)?;

    let ucc = discount * (gamma - 1.0) * consumption.powf(gamma - 2.0);
    let bzz = discount * (gamma - 1.0) * legacy.powf(gamma - 2.0);
    if !(ucc < 0.0) || !(lambda / (eta * eta) * bzz < 0.0) {
        return Ok(false);
    }

    // x^2 Vxx sigma sigma^T negative definite <=> -(x^2 Vxx) sigma sigma^T SPD
    let gram = scenario.market.volatility(t)?.gram();
    let mut negated = gram.clone();
    for i in 0..negated.rows() {
        for j in 0..negated.cols() {
            negated.set(i, j, -x * x * vxx * gram.get(i, j));
        }
    }
    Ok(SpdFactor::new(&negated).is_ok())
}

/// Independent oracle for the closed form: maximize the Hamiltonian over
/// (c, p, theta) directly. The maximization decouples; consumption and
/// premium use damped Newton started at half the closed-form value, the
/// portfolio iterates Newton on the gradient from half the closed form.
pub fn numeric_hamiltonian_argmax(
    coeffs: &StrategyCoefficients,
    t: f64,
    x: f64,
) -> Result<ControlAction> {
    let scenario = coeffs.scenario();
    let prefs = &scenario.preferences;
    let gamma = prefs.gamma;
    let d = coeffs.value_derivatives(t, x)?;
    let discount = (-prefs.rho * t).exp();
    let lambda = scenario.mortality.hazard(t)?;
    let eta = scenario.eta(t)?;
    let closed = coeffs.optimal_portfolio(t, x)?;

    // solves weight * e^{-rho t} s^{gamma-1} = target for s > 0 by damped
    // Newton; this is the first-order condition of both the consumption and
    // the premium sub-problems
    let newton_power = |target: f64, weight: f64, start: f64| -> Result<f64> {
        let mut s = start;
        for _ in 0..100 {
            let g = weight * discount * s.powf(gamma - 1.0) - target;
            let dg = weight * discount * (gamma - 1.0) * s.powf(gamma - 2.0);
            let mut next = s - g / dg;
            while next <= 0.0 {
                next = 0.5 * (s + next.max(0.0));
            }
            if (next - s).abs() <= 1e-13 * (1.0 + s.abs()) {
                return Ok(next);
            }
            s = next;
        }
        Err(Error::accuracy("Hamiltonian argmax Newton did not converge"))
    };

    // sup_c { U(c) - c Vx }
    let c = newton_power(d.vx, 1.0, 0.5 * closed.consumption)?;

    // sup_p { lambda B(x + p/eta) - p Vx }, Newton in the legacy variable
    let z_start = x + 0.5 * closed.premium / eta;
    let z = newton_power(d.vx, lambda / eta, z_start.max(1e-12))?;
    let p = eta * (z - x);

    // sup_theta: quadratic with gradient x Vx alpha + x^2 Vxx sigma sigma^T theta
    let alpha = scenario.market.risk_premium(t)?;
    let gram = scenario.market.volatility(t)?.gram();
    let factor = SpdFactor::new(&gram)?;
    let mut theta: Vec<f64> = closed.theta.iter().map(|v| 0.5 * v).collect();
    let scale: f64 = alpha
        .iter()
        .map(|a| (x * d.vx * a).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut converged = false;
    for _ in 0..100 {
        let gram_theta = gram.matvec(&theta);
        let grad: Vec<f64> = (0..alpha.len())
            .map(|n| x * d.vx * alpha[n] + x * x * d.vxx * gram_theta[n])
            .collect();
        let gnorm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        // Newton step: -(x^2 Vxx sigma sigma^T)^{-1} grad
        let step = factor.solve(&grad);
        for (th, s) in theta.iter_mut().zip(&step) {
            *th -= s / (x * x * d.vxx);
        }
    }
    if !converged {
        return Err(Error::accuracy("portfolio argmax did not converge"));
    }

    let theta0 = 1.0 - theta.iter().sum::<f64>();
    Ok(ControlAction {
        consumption: c,
        premium: p,
        theta,
        theta0,
    })
}

// ---------------------------------------------------------------------------
// Grid verification report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub n_times: usize,
    pub n_wealth: usize,
    pub wealth_min: f64,
    pub wealth_max: f64,
    /// Residual tolerance with analytic derivatives, relative to 1 + |lambda V|.
    pub tol_analytic: f64,
    /// Residual tolerance with finite-difference derivatives.
    pub tol_fd: f64,
    /// First-order-condition gap tolerance.
    pub tol_foc: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            n_times: 51,
            n_wealth: 51,
            wealth_min: 1e3,
            wealth_max: 3e6,
            tol_analytic: 1e-8,
            tol_fd: 1e-4,
            tol_foc: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PointReport {
    pub t: f64,
    pub x: f64,
    pub residual: f64,
    pub residual_fd: f64,
    /// |residual| / (1 + |lambda V|)
    pub residual_normalized: f64,
    pub residual_fd_normalized: f64,
    /// |residual| relative to the largest Hamiltonian term; this scale keeps
    /// the check meaningful when utilities are numerically tiny
    pub residual_term_scaled: f64,
    pub residual_fd_term_scaled: f64,
    pub foc: [f64; 3],
    pub hessian_ok: bool,
}

#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub points: Vec<PointReport>,
    pub max_residual_normalized: f64,
    pub max_residual_fd_normalized: f64,
    pub max_residual_term_scaled: f64,
    pub max_residual_fd_term_scaled: f64,
    pub max_foc: [f64; 3],
    pub hessian_all_ok: bool,
    pub passed: bool,
    pub options: VerifyOptions,
}

impl VerificationReport {
    pub fn summary_line(&self) -> String {
        format!(
            "{}: max|residual|/(1+|lambdaV|) = {:.3e} (tol {:.0e}), fd = {:.3e} / term-scaled \
             {:.3e} (tol {:.0e}), foc = ({:.2e}, {:.2e}, {:.2e}) (tol {:.0e}), hessian {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.max_residual_normalized,
            self.options.tol_analytic,
            self.max_residual_fd_normalized,
            self.max_residual_fd_term_scaled,
            self.options.tol_fd,
            self.max_foc[0],
            self.max_foc[1],
            self.max_foc[2],
            self.options.tol_foc,
            if self.hessian_all_ok { "ok" } else { "INDEFINITE" },
        )
    }
}

/// Evaluate every check on an n_times x n_wealth grid. Points are
/// independent and evaluated in parallel; the report keeps grid order.
pub fn verify_grid(
    coeffs: &StrategyCoefficients,
    options: &VerifyOptions,
) -> Result<VerificationReport> {
    if options.n_times < 2 || options.n_wealth < 2 {
        return Err(Error::invalid("verification grid needs at least 2x2 points"));
    }
    let horizon = coeffs.scenario().horizon();
    let mut states = Vec::with_capacity(options.n_times * options.n_wealth);
    for i in 0..options.n_times {
        let t = horizon * i as f64 / (options.n_times - 1) as f64;
        for j in 0..options.n_wealth {
            let x = options.wealth_min
                + (options.wealth_max - options.wealth_min) * j as f64
                    / (options.n_wealth - 1) as f64;
            states.push((t, x));
        }
    }

    let points: Vec<PointReport> = states
        .par_iter()
        .map(|&(t, x)| -> Result<PointReport> {
            let residual = hjb_residual(coeffs, t, x, DerivativeMode::Analytic)?;
            let residual_fd = hjb_residual(coeffs, t, x, DerivativeMode::FiniteDifference)?;
            let lambda = coeffs.scenario().mortality.hazard(t)?;
            let v = coeffs.value_function(t, x)?;
            let norm = 1.0 + (lambda * v).abs();
            let scale = hamiltonian_scale(coeffs, t, x)?.max(f64::MIN_POSITIVE);
            Ok(PointReport {
                t,
                x,
                residual,
                residual_fd,
                residual_normalized: residual.abs() / norm,
                residual_fd_normalized: residual_fd.abs() / norm,
                residual_term_scaled: residual.abs() / scale,
                residual_fd_term_scaled: residual_fd.abs() / scale,
                foc: foc_gaps(coeffs, t, x)?,
                hessian_ok: hessian_check(coeffs, t, x)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = VerificationReport {
        max_residual_normalized: 0.0,
        max_residual_fd_normalized: 0.0,
        max_residual_term_scaled: 0.0,
        max_residual_fd_term_scaled: 0.0,
        max_foc: [0.0; 3],
        hessian_all_ok: true,
        passed: false,
        options: options.clone(),
        points,
    };
    for p in &report.points {
        report.max_residual_normalized = report.max_residual_normalized.max(p.residual_normalized);
        report.max_residual_fd_normalized = report
            .max_residual_fd_normalized
            .max(p.residual_fd_normalized);
        report.max_residual_term_scaled =
            report.max_residual_term_scaled.max(p.residual_term_scaled);
        report.max_residual_fd_term_scaled = report
            .max_residual_fd_term_scaled
            .max(p.residual_fd_term_scaled);
        for k in 0..3 {
            report.max_foc[k] = report.max_foc[k].max(p.foc[k]);
        }
        report.hessian_all_ok &= p.hessian_ok;
    }
    // the fd tolerance applies under both normalizations: against
    // 1 + |lambda V| as stated, and against the Hamiltonian term scale so
    // that a coefficient curve violating its ODE cannot slip through when
    // utilities are numerically tiny
    report.passed = report.max_residual_normalized < options.tol_analytic
        && report.max_residual_fd_normalized < options.tol_fd
        && report.max_residual_fd_term_scaled < options.tol_fd
        && report.max_foc.iter().all(|&g| g < options.tol_foc)
        && report.hessian_all_ok;
    Ok(report)
}
