//! Control policies consumed by the Monte Carlo engine.
//!
//! Policies hand the simulator dollar quantities: a consumption rate, a
//! premium rate and dollar positions in the risky assets. Dollar positions
//! stay finite as wealth crosses zero, where fractions of wealth blow up,
//! and the wealth SDE only depends on theta x anyway.

use crate::error::Result;
use crate::solver::{StrategyCoefficients, Variant};

/// Which objective a policy is evaluated under: the full problem rewards a
/// bequest at premature death, the no-insurance problem does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    WithBequest,
    NoBequest,
}

/// A feedback control policy.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;
    fn n_assets(&self) -> usize;
    fn objective(&self) -> Objective {
        Objective::WithBequest
    }
    /// Tabulate whatever the policy needs on the simulation time grid.
    fn prepare(&self, times: &[f64]) -> Result<Box<dyn PreparedPolicy + '_>>;
}

/// Per-run compiled form of a policy; called once per step per path.
pub trait PreparedPolicy: Send + Sync {
    /// Fill the risky dollar positions and return (consumption, premium).
    fn controls(&self, step: usize, t: f64, wealth: f64, risky: &mut [f64]) -> (f64, f64);
}

// ---------------------------------------------------------------------------
// Closed-form policy (optionally perturbed)
// ---------------------------------------------------------------------------

/// The closed-form optimal policy, with optional multiplicative perturbations
/// per control coordinate (scale 1 everywhere is the optimum itself).
#[derive(Debug, Clone)]
pub struct ClosedFormPolicy {
    coeffs: StrategyCoefficients,
    scale_consumption: f64,
    scale_premium: f64,
    scale_portfolio: f64,
    name: String,
}

impl ClosedFormPolicy {
    pub fn optimal(coeffs: StrategyCoefficients) -> Self {
        let name = match coeffs.variant() {
            Variant::WithInsurance => "closed-form".to_string(),
            Variant::NoInsurance => "closed-form-no-insurance".to_string(),
        };
        ClosedFormPolicy {
            coeffs,
            scale_consumption: 1.0,
            scale_premium: 1.0,
            scale_portfolio: 1.0,
            name,
        }
    }

    pub fn scaled(
        coeffs: StrategyCoefficients,
        scale_consumption: f64,
        scale_premium: f64,
        scale_portfolio: f64,
        name: impl Into<String>,
    ) -> Self {
        ClosedFormPolicy {
            coeffs,
            scale_consumption,
            scale_premium,
            scale_portfolio,
            name: name.into(),
        }
    }

    pub fn coefficients(&self) -> &StrategyCoefficients {
        &self.coeffs
    }
}

/// Per-step tables: controls become a handful of flops in the hot loop.
pub struct PreparedClosedForm {
    inv_e: Vec<f64>,
    b: Vec<f64>,
    eta: Vec<f64>,
    d: Vec<f64>,
    /// xi alpha / (1 - gamma) * portfolio scale, flattened per step
    alloc: Vec<f64>,
    n_assets: usize,
    scale_consumption: f64,
    scale_premium: f64,
    with_premium: bool,
}

impl Policy for ClosedFormPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_assets(&self) -> usize {
        self.coeffs.scenario().market.n_assets()
    }

    fn objective(&self) -> Objective {
        match self.coeffs.variant() {
            Variant::WithInsurance => Objective::WithBequest,
            Variant::NoInsurance => Objective::NoBequest,
        }
    }

    fn prepare(&self, times: &[f64]) -> Result<Box<dyn PreparedPolicy + '_>> {
        let coeffs = &self.coeffs;
        let scenario = coeffs.scenario();
        let n_assets = scenario.market.n_assets();
        let gamma = scenario.preferences.gamma;
        let with_premium = coeffs.variant() == Variant::WithInsurance;

        let mut prepared = PreparedClosedForm {
            inv_e: Vec::with_capacity(times.len()),
            b: Vec::with_capacity(times.len()),
            eta: Vec::with_capacity(times.len()),
            d: Vec::with_capacity(times.len()),
            alloc: Vec::with_capacity(times.len() * n_assets),
            n_assets,
            scale_consumption: self.scale_consumption,
            scale_premium: self.scale_premium,
            with_premium,
        };
        for &t in times {
            prepared.inv_e.push(1.0 / coeffs.coefficient_e(t)?);
            prepared.b.push(coeffs.human_capital(t)?);
            prepared.eta.push(scenario.eta(t)?);
            prepared.d.push(if with_premium {
                coeffs.coefficient_d(t)?
            } else {
                0.0
            });
            let xi_alpha = coeffs.xi_alpha(t)?;
            prepared.alloc.extend(
                xi_alpha
                    .iter()
                    .map(|v| self.scale_portfolio * v / (1.0 - gamma)),
            );
        }
        Ok(Box::new(prepared))
    }
}

impl PreparedPolicy for PreparedClosedForm {
    #[inline]
    fn controls(&self, step: usize, _t: f64, wealth: f64, risky: &mut [f64]) -> (f64, f64) {
        let full = wealth + self.b[step];
        let c = self.scale_consumption * full * self.inv_e[step];
        let p = if self.with_premium {
            self.scale_premium * self.eta[step] * (self.d[step] * full - wealth)
        } else {
            0.0
        };
        let alloc = &self.alloc[step * self.n_assets..(step + 1) * self.n_assets];
        for (q, a) in risky.iter_mut().zip(alloc) {
            *q = full * a;
        }
        (c, p)
    }
}

// ---------------------------------------------------------------------------
// Ad-hoc policies from closures (tests, experiments)
// ---------------------------------------------------------------------------

/// A policy defined by a plain function of (t, wealth).
pub struct FnPolicy<F> {
    name: String,
    n_assets: usize,
    objective: Objective,
    f: F,
}

impl<F> FnPolicy<F>
where
    F: Fn(f64, f64) -> (f64, f64, Vec<f64>) + Send + Sync,
{
    pub fn new(name: impl Into<String>, n_assets: usize, f: F) -> Self {
        FnPolicy {
            name: name.into(),
            n_assets,
            objective: Objective::WithBequest,
            f,
        }
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }
}

impl<F> Policy for FnPolicy<F>
where
    F: Fn(f64, f64) -> (f64, f64, Vec<f64>) + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn n_assets(&self) -> usize {
        self.n_assets
    }

    fn objective(&self) -> Objective {
        self.objective
    }

    fn prepare(&self, _times: &[f64]) -> Result<Box<dyn PreparedPolicy + '_>> {
        Ok(Box::new(PreparedFnPolicy { policy: self }))
    }
}

struct PreparedFnPolicy<'a, F> {
    policy: &'a FnPolicy<F>,
}

impl<F> PreparedPolicy for PreparedFnPolicy<'_, F>
where
    F: Fn(f64, f64) -> (f64, f64, Vec<f64>) + Send + Sync,
{
    fn controls(&self, _step: usize, t: f64, wealth: f64, risky: &mut [f64]) -> (f64, f64) {
        let (c, p, q) = (self.policy.f)(t, wealth);
        for (out, v) in risky.iter_mut().zip(q.iter().chain(std::iter::repeat(&0.0))) {
            *out = *v;
        }
        (c, p)
    }
}
