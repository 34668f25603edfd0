//! Problem instances: preferences, income, insurance pricing and the full
//! scenario bundle, together with the strict JSON schema used by the CLI and
//! the Python bindings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketModel;
use crate::mortality::MortalityModel;
use crate::numerics::Curve;

/// Discounted CRRA preferences: U(c, t) = e^{-rho t} c^gamma / gamma,
/// with matching bequest and terminal-wealth utilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preferences {
    pub gamma: f64,
    pub rho: f64,
    pub horizon: f64,
}

impl Preferences {
    pub fn new(gamma: f64, rho: f64, horizon: f64) -> Result<Self> {
        if !(gamma < 1.0) || gamma.abs() < 1e-12 || !gamma.is_finite() {
            return Err(Error::invalid(format!(
                "risk aversion gamma must satisfy gamma < 1, gamma != 0 \
                 (log utility is out of scope); got {gamma}"
            )));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::invalid(format!("discount rate rho must be positive, got {rho}")));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!("horizon T must be positive, got {horizon}")));
        }
        Ok(Preferences { gamma, rho, horizon })
    }
}

/// Deterministic labor income rate i(t) on [0, T].
#[derive(Debug, Clone)]
pub enum IncomeProfile {
    /// i(t) = i0 * exp(growth * t)
    ExponentialGrowth { i0: f64, growth: f64 },
    Curve(Curve),
}

impl IncomeProfile {
    pub fn exponential(i0: f64, growth: f64) -> Result<Self> {
        if !(i0 >= 0.0) || !i0.is_finite() || !growth.is_finite() {
            return Err(Error::invalid("income requires i0 >= 0 and finite growth"));
        }
        Ok(IncomeProfile::ExponentialGrowth { i0, growth })
    }

    pub fn from_curve(curve: Curve) -> Result<Self> {
        if curve.values().iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("income curve must be nonnegative"));
        }
        Ok(IncomeProfile::Curve(curve))
    }

    pub fn rate(&self, t: f64) -> Result<f64> {
        match self {
            IncomeProfile::ExponentialGrowth { i0, growth } => {
                if !(t >= -1e-12) {
                    return Err(Error::domain(format!("income evaluated at t={t} < 0")));
                }
                Ok(i0 * (growth * t).exp())
            }
            IncomeProfile::Curve(c) => c.eval(t),
        }
    }
}

/// Premium-payout ratio eta(t): paying rate p buys a death benefit p / eta.
#[derive(Debug, Clone)]
pub enum InsuranceModel {
    /// eta(t) = loading * lambda(t), loading >= 1.
    HazardLoading { loading: f64 },
    Curve(Curve),
}

impl InsuranceModel {
    pub fn hazard_loading(loading: f64) -> Result<Self> {
        if !(loading >= 1.0) || !loading.is_finite() {
            return Err(Error::invalid(format!(
                "insurance loading must be >= 1 (company does not underprice the hazard), got {loading}"
            )));
        }
        Ok(InsuranceModel::HazardLoading { loading })
    }

    pub fn from_curve(curve: Curve) -> Result<Self> {
        if curve.values().iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("premium-payout curve must be positive"));
        }
        Ok(InsuranceModel::Curve(curve))
    }

    pub fn eta(&self, mortality: &MortalityModel, t: f64) -> Result<f64> {
        match self {
            InsuranceModel::HazardLoading { loading } => Ok(loading * mortality.hazard(t)?),
            InsuranceModel::Curve(c) => c.eval(t),
        }
    }
}

/// A full problem instance.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub market: MarketModel,
    pub mortality: MortalityModel,
    pub insurance: InsuranceModel,
    pub income: IncomeProfile,
    pub preferences: Preferences,
    pub x0: f64,
    pub grid_steps: usize,
}

impl Scenario {
    pub fn new(
        market: MarketModel,
        mortality: MortalityModel,
        insurance: InsuranceModel,
        income: IncomeProfile,
        preferences: Preferences,
        x0: f64,
        grid_steps: usize,
    ) -> Result<Self> {
        if !(x0 >= 0.0) || !x0.is_finite() {
            return Err(Error::invalid(format!("initial wealth must be >= 0, got {x0}")));
        }
        if grid_steps < 2 {
            return Err(Error::invalid("grid_steps must be at least 2"));
        }
        if market.horizon() < preferences.horizon {
            return Err(Error::invalid(
                "market coefficients do not cover the preference horizon",
            ));
        }
        let s = Scenario {
            market,
            mortality,
            insurance,
            income,
            preferences,
            x0,
            grid_steps,
        };
        // probe income and eta across the horizon so bad curves fail here,
        // not deep inside an ODE solve
        for i in 0..=50 {
            let t = s.preferences.horizon * i as f64 / 50.0;
            let inc = s.income.rate(t)?;
            if !(inc >= 0.0) || !inc.is_finite() {
                return Err(Error::invalid(format!("income at t={t} is {inc}")));
            }
            let eta = s.insurance.eta(&s.mortality, t)?;
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(Error::invalid(format!("premium-payout ratio at t={t} is {eta}")));
            }
        }
        Ok(s)
    }

    pub fn horizon(&self) -> f64 {
        self.preferences.horizon
    }

    pub fn eta(&self, t: f64) -> Result<f64> {
        self.insurance.eta(&self.mortality, t)
    }

    /// The two-asset reference scenario: a wage earner who starts working at
    /// 25 and retires 40 years later, income 50000 e^{0.03 t}, r = 0.04,
    /// rho = 0.03, gamma = -3, hazard 0.001 + e^{-9.5 + 0.1 t}, eta = 1.05
    /// lambda, mu = (0.07, 0.11), sigma = [[0.19, 0.15], [0.17, 0.21]].
    pub fn reference() -> Self {
        let market = MarketModel::constant(
            0.04,
            vec![0.07, 0.11],
            vec![vec![0.19, 0.15], vec![0.17, 0.21]],
            40.0,
        )
        .expect("reference market is well formed");
        Scenario::new(
            market,
            MortalityModel::reference(),
            InsuranceModel::HazardLoading { loading: 1.05 },
            IncomeProfile::ExponentialGrowth { i0: 50_000.0, growth: 0.03 },
            Preferences { gamma: -3.0, rho: 0.03, horizon: 40.0 },
            100_000.0,
            4000,
        )
        .expect("reference scenario is well formed")
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(json)
            .map_err(|e| Error::invalid(format!("scenario JSON: {e}")))?;
        spec.build()
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_value(value)
            .map_err(|e| Error::invalid(format!("scenario JSON: {e}")))?;
        spec.build()
    }
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

fn default_grid_steps() -> usize {
    4000
}

/// A coefficient that is either a constant or a sampled time curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrCurve {
    Scalar(f64),
    Curve { t: Vec<f64>, values: Vec<f64> },
}

impl ScalarOrCurve {
    fn into_curve(self, horizon: f64, what: &str) -> Result<Curve> {
        match self {
            ScalarOrCurve::Scalar(v) => Curve::constant(v, 0.0, horizon),
            ScalarOrCurve::Curve { t, values } => Curve::linear(t, values)
                .map_err(|e| Error::invalid(format!("{what}: {e}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub r: ScalarOrCurve,
    pub mu: Vec<ScalarOrCurve>,
    pub sigma: Vec<Vec<ScalarOrCurve>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum MortalitySpec {
    GompertzMakeham { base: f64, scale: f64, growth: f64 },
    Piecewise { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum InsuranceSpec {
    Loading { loading: f64 },
    Eta { eta: ScalarOrCurve },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum IncomeSpec {
    Exponential { i0: f64, growth: f64 },
    Curve { curve: ScalarOrCurve },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferencesSpec {
    pub gamma: f64,
    pub rho: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

/// On-disk scenario schema. Unknown keys are rejected so typos in parameter
/// studies fail loudly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub market: MarketSpec,
    pub mortality: MortalitySpec,
    pub insurance: InsuranceSpec,
    pub income: IncomeSpec,
    pub preferences: PreferencesSpec,
    pub x0: f64,
    #[serde(default = "default_grid_steps")]
    pub grid_steps: usize,
}

impl ScenarioSpec {
    pub fn build(self) -> Result<Scenario> {
        let preferences =
            Preferences::new(self.preferences.gamma, self.preferences.rho, self.preferences.horizon)?;
        let horizon = preferences.horizon;
        let r = self.market.r.into_curve(horizon, "market.r")?;
        let mu = self
            .market
            .mu
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.into_curve(horizon, &format!("market.mu[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let sigma = self
            .market
            .sigma
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(j, c)| c.into_curve(horizon, &format!("market.sigma[{i}][{j}]")))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let market = MarketModel::new(r, mu, sigma, horizon)?;
        let mortality = match self.mortality {
            MortalitySpec::GompertzMakeham { base, scale, growth } => {
                MortalityModel::gompertz_makeham(base, scale, growth)?
            }
            MortalitySpec::Piecewise { knots } => MortalityModel::piecewise_constant(knots)?,
        };
        let insurance = match self.insurance {
            InsuranceSpec::Loading { loading } => InsuranceModel::hazard_loading(loading)?,
            InsuranceSpec::Eta { eta } => {
                InsuranceModel::from_curve(eta.into_curve(horizon, "insurance.eta")?)?
            }
        };
        let income = match self.income {
            IncomeSpec::Exponential { i0, growth } => IncomeProfile::exponential(i0, growth)?,
            IncomeSpec::Curve { curve } => {
                IncomeProfile::from_curve(curve.into_curve(horizon, "income.curve")?)?
            }
        };
        Scenario::new(market, mortality, insurance, income, preferences, self.x0, self.grid_steps)
    }

    /// The reference scenario in schema form; serialized into the bundled
    /// scenario file, round-trips to the same f64 bits.
    pub fn reference() -> Self {
        ScenarioSpec {
            market: MarketSpec {
                r: ScalarOrCurve::Scalar(0.04),
                mu: vec![ScalarOrCurve::Scalar(0.07), ScalarOrCurve::Scalar(0.11)],
                sigma: vec![
                    vec![ScalarOrCurve::Scalar(0.19), ScalarOrCurve::Scalar(0.15)],
                    vec![ScalarOrCurve::Scalar(0.17), ScalarOrCurve::Scalar(0.21)],
                ],
            },
            mortality: MortalitySpec::GompertzMakeham {
                base: 0.001,
                scale: (-9.5f64).exp(),
                growth: 0.1,
            },
            insurance: InsuranceSpec::Loading { loading: 1.05 },
            income: IncomeSpec::Exponential { i0: 50_000.0, growth: 0.03 },
            preferences: PreferencesSpec { gamma: -3.0, rho: 0.03, horizon: 40.0 },
            x0: 100_000.0,
            grid_steps: 4000,
        }
    }
}
