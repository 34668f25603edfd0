//! The closed-form solution for discounted CRRA preferences.
//!
//! Writing y = x + b(t) for full wealth (savings plus human capital), the
//! optimal controls are
//!
//! ```text
//! c*(t, x)     = y / e(t)
//! p*(t, x)     = eta(t) ((D(t) - 1) x + D(t) b(t))
//! theta*(t, x) = y / (x (1 - gamma)) xi alpha(t)
//! ```
//!
//! with value function V(t, x) = a(t)/gamma y^gamma, where
//!
//! ```text
//! b' = (r + eta) b - i          b(T) = 0
//! e' = H e - K                  e(T) = 1
//! H  = (lambda + rho)/(1-gamma) - gamma Sigma/(1-gamma)^2
//!      - gamma (r + eta)/(1-gamma)
//! K  = lambda^{1/(1-gamma)} eta^{-gamma/(1-gamma)} + 1
//! D  = (lambda/eta)^{1/(1-gamma)} / e
//! a  = e^{-rho t} e(t)^{1-gamma}
//! ```
//!
//! The no-insurance problem replaces r + eta by r, sets K = 1 and has no
//! premium control. Both ODEs are solved by backward RK4 on a uniform grid
//! (the double-integral representations are kept as quadrature oracles in
//! the tests) and cached as monotone cubic curves.

use crate::error::{Error, Result};
use crate::numerics::{solve_backward_linear_ode, Curve};
use crate::scenario::{Preferences, Scenario};

/// Which control problem the coefficients solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    WithInsurance,
    NoInsurance,
}

/// A consumption / premium / portfolio triple at one state. Fractions of
/// wealth; theta0 is the implied risk-free weight 1 - sum theta_n.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlAction {
    pub consumption: f64,
    pub premium: f64,
    pub theta: Vec<f64>,
    pub theta0: f64,
}

/// Analytic derivatives of the value-function ansatz at a point.
#[derive(Debug, Clone, Copy)]
pub struct ValueDerivatives {
    pub v: f64,
    pub vt: f64,
    pub vx: f64,
    pub vxx: f64,
}

/// H(t): the decay coefficient of the e ODE.
pub fn coefficient_h(scenario: &Scenario, t: f64, variant: Variant) -> Result<f64> {
    let gamma = scenario.preferences.gamma;
    let one_minus = 1.0 - gamma;
    let lambda = scenario.mortality.hazard(t)?;
    let sigma_q = scenario.market.sigma_quadratic(t)?;
    let discount = match variant {
        Variant::WithInsurance => scenario.market.rate(t)? + scenario.eta(t)?,
        Variant::NoInsurance => scenario.market.rate(t)?,
    };
    Ok((lambda + scenario.preferences.rho) / one_minus
        - gamma * sigma_q / (one_minus * one_minus)
        - gamma / one_minus * discount)
}

/// K(t): the forcing of the e ODE; identically 1 without insurance.
pub fn coefficient_k(scenario: &Scenario, t: f64, variant: Variant) -> Result<f64> {
    match variant {
        Variant::NoInsurance => {
            scenario.mortality.hazard(t)?; // still a domain check on t
            Ok(1.0)
        }
        Variant::WithInsurance => {
            let gamma = scenario.preferences.gamma;
            let one_minus = 1.0 - gamma;
            let lambda = scenario.mortality.hazard(t)?;
            let eta = scenario.eta(t)?;
            Ok(lambda.powf(1.0 / one_minus) * eta.powf(-gamma / one_minus) + 1.0)
        }
    }
}

/// Legacy Z = x + p / eta left by premium rate p at wealth x.
pub fn legacy_value(x: f64, premium: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::domain(format!("premium-payout ratio must be positive, got {eta}")));
    }
    Ok(x + premium / eta)
}

// ---------------------------------------------------------------------------
// Discounted CRRA utilities
// ---------------------------------------------------------------------------

fn crra(prefs: &Preferences, amount: f64, t: f64, what: &str) -> Result<f64> {
    if amount < 0.0 || !amount.is_finite() {
        return Err(Error::domain(format!("{what} must be nonnegative, got {amount}")));
    }
    let gamma = prefs.gamma;
    if amount == 0.0 {
        // for gamma < 0 zero consumption is infinitely painful
        return Ok(if gamma < 0.0 { f64::NEG_INFINITY } else { 0.0 });
    }
    Ok((-prefs.rho * t).exp() * amount.powf(gamma) / gamma)
}

/// U(c, t) = e^{-rho t} c^gamma / gamma.
pub fn utility_consumption(prefs: &Preferences, c: f64, t: f64) -> Result<f64> {
    crra(prefs, c, t, "consumption")
}

/// B(Z, t) = e^{-rho t} Z^gamma / gamma.
pub fn utility_bequest(prefs: &Preferences, legacy: f64, t: f64) -> Result<f64> {
    crra(prefs, legacy, t, "legacy")
}

/// W(x) = e^{-rho T} x^gamma / gamma.
pub fn utility_terminal(prefs: &Preferences, x: f64) -> Result<f64> {
    crra(prefs, x, prefs.horizon, "terminal wealth")
}

// ---------------------------------------------------------------------------
// Coefficient curves and optimal controls
// ---------------------------------------------------------------------------

/// Precomputed deterministic coefficient curves for one variant of the
/// problem. Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct StrategyCoefficients {
    scenario: Scenario,
    variant: Variant,
    grid: Vec<f64>,
    b: Curve,
    e: Curve,
    reference_wealth: f64,
}

impl StrategyCoefficients {
    pub fn compute(scenario: &Scenario, variant: Variant) -> Result<Self> {
        let horizon = scenario.horizon();
        let n = scenario.grid_steps;
        let grid: Vec<f64> = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();

        // fail fast with a real error message before handing closures to RK4
        for &t in &[0.0, 0.5 * horizon, horizon] {
            coefficient_h(scenario, t, variant)?;
            coefficient_k(scenario, t, variant)?;
            scenario.income.rate(t)?;
        }

        let h_fn = |t: f64| coefficient_h(scenario, t, variant).unwrap_or(f64::NAN);
        let k_fn = |t: f64| coefficient_k(scenario, t, variant).unwrap_or(f64::NAN);
        let e_vals = solve_backward_linear_ode(h_fn, k_fn, 1.0, &grid)?;

        let hb_fn = |t: f64| match variant {
            Variant::WithInsurance => {
                scenario.market.rate(t).and_then(|r| scenario.eta(t).map(|e| r + e))
            }
            Variant::NoInsurance => scenario.market.rate(t),
        }
        .unwrap_or(f64::NAN);
        let income_fn = |t: f64| scenario.income.rate(t).unwrap_or(f64::NAN);
        let b_vals = solve_backward_linear_ode(hb_fn, income_fn, 0.0, &grid)?;

        if e_vals.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::accuracy("consumption coefficient e(t) is not positive"));
        }
        if b_vals.iter().any(|&v| v < 0.0) {
            return Err(Error::accuracy("human capital b(t) is negative"));
        }

        // knot derivatives are known exactly from the ODE right-hand sides
        let e_slopes: Vec<f64> = grid
            .iter()
            .zip(&e_vals)
            .map(|(&t, &e)| h_fn(t) * e - k_fn(t))
            .collect();
        let b_slopes: Vec<f64> = grid
            .iter()
            .zip(&b_vals)
            .map(|(&t, &b)| hb_fn(t) * b - income_fn(t))
            .collect();
        let b = Curve::monotone_cubic_with_slopes(grid.clone(), b_vals, b_slopes)?;
        let e = Curve::monotone_cubic_with_slopes(grid.clone(), e_vals, e_slopes)?;
        let reference_wealth = (scenario.x0 + b.eval(0.0)?).max(1.0);
        Ok(StrategyCoefficients {
            scenario: scenario.clone(),
            variant,
            grid,
            b,
            e,
            reference_wealth,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Wealth scale used for the small-x guard on portfolio fractions.
    pub fn reference_wealth(&self) -> f64 {
        self.reference_wealth
    }

    /// b(t): present value of future income discounted at r + eta
    /// (at r for the no-insurance variant).
    pub fn human_capital(&self, t: f64) -> Result<f64> {
        self.b.eval(t)
    }

    pub fn coefficient_e(&self, t: f64) -> Result<f64> {
        self.e.eval(t)
    }

    pub fn coefficient_h(&self, t: f64) -> Result<f64> {
        coefficient_h(&self.scenario, t, self.variant)
    }

    pub fn coefficient_k(&self, t: f64) -> Result<f64> {
        coefficient_k(&self.scenario, t, self.variant)
    }

    /// D(t) = (lambda/eta)^{1/(1-gamma)} / e(t); insurance variant only.
    pub fn coefficient_d(&self, t: f64) -> Result<f64> {
        if self.variant == Variant::NoInsurance {
            return Err(Error::domain(
                "D(t) is defined only for the problem with insurance",
            ));
        }
        let gamma = self.scenario.preferences.gamma;
        let lambda = self.scenario.mortality.hazard(t)?;
        let eta = self.scenario.eta(t)?;
        Ok((lambda / eta).powf(1.0 / (1.0 - gamma)) / self.e.eval(t)?)
    }

    /// a(t) = e^{-rho t} e(t)^{1-gamma}.
    pub fn value_coefficient_a(&self, t: f64) -> Result<f64> {
        let prefs = &self.scenario.preferences;
        Ok((-prefs.rho * t).exp() * self.e.eval(t)?.powf(1.0 - prefs.gamma))
    }

    pub fn sigma_quadratic(&self, t: f64) -> Result<f64> {
        self.scenario.market.sigma_quadratic(t)
    }

    pub fn xi_alpha(&self, t: f64) -> Result<Vec<f64>> {
        self.scenario.market.xi_alpha(t)
    }

    /// b'(t) from the ODE right-hand side (not from differentiating the
    /// interpolant).
    pub fn human_capital_rate(&self, t: f64) -> Result<f64> {
        let r = self.scenario.market.rate(t)?;
        let discount = match self.variant {
            Variant::WithInsurance => r + self.scenario.eta(t)?,
            Variant::NoInsurance => r,
        };
        Ok(discount * self.b.eval(t)? - self.scenario.income.rate(t)?)
    }

    /// a'(t) = a(t) (-rho + (1-gamma)(H - K/e)).
    pub fn value_coefficient_a_rate(&self, t: f64) -> Result<f64> {
        let prefs = &self.scenario.preferences;
        let a = self.value_coefficient_a(t)?;
        let h = self.coefficient_h(t)?;
        let k = self.coefficient_k(t)?;
        let e = self.e.eval(t)?;
        Ok(a * (-prefs.rho + (1.0 - prefs.gamma) * (h - k / e)))
    }

    /// V(t, x) = a(t)/gamma (x + b(t))^gamma.
    pub fn value_function(&self, t: f64, x: f64) -> Result<f64> {
        let y = self.full_wealth(t, x)?;
        let gamma = self.scenario.preferences.gamma;
        Ok(self.value_coefficient_a(t)? / gamma * y.powf(gamma))
    }

    /// V with its analytic t, x and xx derivatives from the ansatz.
    pub fn value_derivatives(&self, t: f64, x: f64) -> Result<ValueDerivatives> {
        let y = self.full_wealth(t, x)?;
        let gamma = self.scenario.preferences.gamma;
        let a = self.value_coefficient_a(t)?;
        let a_rate = self.value_coefficient_a_rate(t)?;
        let b_rate = self.human_capital_rate(t)?;
        let pow_g = y.powf(gamma);
        let pow_g1 = y.powf(gamma - 1.0);
        Ok(ValueDerivatives {
            v: a / gamma * pow_g,
            vt: a_rate / gamma * pow_g + a * pow_g1 * b_rate,
            vx: a * pow_g1,
            vxx: (gamma - 1.0) * a * y.powf(gamma - 2.0),
        })
    }

    fn full_wealth(&self, t: f64, x: f64) -> Result<f64> {
        let y = x + self.b.eval(t)?;
        if !(y > 0.0) {
            return Err(Error::domain(format!(
                "full wealth x + b(t) = {y} is not positive at t={t} (bankrupt)"
            )));
        }
        Ok(y)
    }

    /// c*(t, x) = (x + b(t)) / e(t).
    pub fn optimal_consumption(&self, t: f64, x: f64) -> Result<f64> {
        let y = x + self.b.eval(t)?;
        if y < 0.0 {
            return Err(Error::domain(format!(
                "consumption undefined for negative full wealth {y}"
            )));
        }
        Ok(y / self.e.eval(t)?)
    }

    /// p*(t, x) = eta(t) ((D(t) - 1) x + D(t) b(t)). Negative values mean the
    /// wage earner sells insurance on his own life; no clamping. Zero for the
    /// no-insurance variant.
    pub fn optimal_premium(&self, t: f64, x: f64) -> Result<f64> {
        if self.variant == Variant::NoInsurance {
            self.b.eval(t)?;
            return Ok(0.0);
        }
        let eta = self.scenario.eta(t)?;
        let d = self.coefficient_d(t)?;
        Ok(eta * ((d - 1.0) * x + d * self.b.eval(t)?))
    }

    /// Dollar positions in the risky assets: (x + b) xi alpha / (1 - gamma).
    /// Finite as x -> 0, which is why the simulator consumes these rather
    /// than fractions.
    pub fn dollar_allocations(&self, t: f64, x: f64) -> Result<Vec<f64>> {
        let y = x + self.b.eval(t)?;
        let scale = y / (1.0 - self.scenario.preferences.gamma);
        Ok(self.xi_alpha(t)?.into_iter().map(|v| scale * v).collect())
    }

    /// theta*(t, x) as fractions of wealth, with the implied theta0. Errors
    /// for wealth below 1e-9 of the reference scale, where fractions are
    /// astronomically leveraged and meaningless.
    pub fn optimal_portfolio(&self, t: f64, x: f64) -> Result<ControlAction> {
        if !(x > 1e-9 * self.reference_wealth) {
            return Err(Error::domain(format!(
                "portfolio fractions undefined at wealth {x} (below 1e-9 of scale {})",
                self.reference_wealth
            )));
        }
        let dollars = self.dollar_allocations(t, x)?;
        let theta: Vec<f64> = dollars.iter().map(|q| q / x).collect();
        let theta0 = 1.0 - theta.iter().sum::<f64>();
        Ok(ControlAction {
            consumption: self.optimal_consumption(t, x)?,
            premium: self.optimal_premium(t, x)?,
            theta,
            theta0,
        })
    }

    /// Legacy at the optimum: Z* = x + p*/eta = D(t) (x + b(t)). Evaluated
    /// as the product form, which does not cancel x the way x + p/eta does
    /// when D is small.
    pub fn optimal_legacy(&self, t: f64, x: f64) -> Result<f64> {
        match self.variant {
            Variant::WithInsurance => {
                Ok(self.coefficient_d(t)? * (x + self.b.eval(t)?))
            }
            Variant::NoInsurance => Ok(x),
        }
    }

    /// Negative-control hook for the verifier: coefficients whose e-curve is
    /// scaled by (1 + rel) no longer satisfy the HJB identity, so a passing
    /// verification run on them indicates a broken verifier.
    #[doc(hidden)]
    pub fn with_corrupted_e(self, rel: f64) -> Result<Self> {
        let knots = self.e.knots().to_vec();
        let values: Vec<f64> = self.e.values().iter().map(|v| v * (1.0 + rel)).collect();
        Ok(StrategyCoefficients {
            e: Curve::monotone_cubic(knots, values)?,
            ..self
        })
    }

    /// Whether the hypotheses of the D(t) < 1 lemma (lambda <= eta and
    /// H <= 1 everywhere) hold on the grid.
    pub fn lemma_hypotheses_hold(&self) -> Result<bool> {
        for &t in &self.grid {
            let lambda = self.scenario.mortality.hazard(t)?;
            let eta = self.scenario.eta(t)?;
            if lambda > eta || self.coefficient_h(t)? > 1.0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
