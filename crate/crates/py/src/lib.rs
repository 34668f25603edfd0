//! Python bindings: scenarios, the closed-form solution, the HJB verifier
//! and the Monte Carlo evaluator, exposed with plain Python types.

use std::collections::HashMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use lifeplan::simulate::{
    estimate_expected_utility, simulate_path, ClosedFormPolicy, EvaluationMode,
    SimulationConfig,
};
use lifeplan::solver::{StrategyCoefficients, Variant};
use lifeplan::verify::{
    foc_gaps, hessian_check, hjb_residual, numeric_hamiltonian_argmax, verify_grid,
    DerivativeMode, VerifyOptions,
};

fn err(e: lifeplan::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A full problem instance: market, mortality, insurance, income,
/// preferences and initial wealth.
#[pyclass(name = "Scenario", skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: lifeplan::Scenario,
}

#[pymethods]
impl PyScenario {
    /// The bundled two-asset reference scenario.
    #[staticmethod]
    fn reference() -> Self {
        PyScenario {
            inner: lifeplan::Scenario::reference(),
        }
    }

    /// Parse a scenario from its JSON document (strict schema).
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: lifeplan::Scenario::from_json_str(text).map_err(err)?,
        })
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    #[getter]
    fn x0(&self) -> f64 {
        self.inner.x0
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.preferences.gamma
    }

    #[getter]
    fn n_assets(&self) -> usize {
        self.inner.market.n_assets()
    }

    fn hazard(&self, t: f64) -> PyResult<f64> {
        self.inner.mortality.hazard(t).map_err(err)
    }

    fn survival(&self, s: f64, t: f64) -> PyResult<f64> {
        self.inner.mortality.conditional_survival(s, t).map_err(err)
    }

    fn death_density(&self, s: f64, t: f64) -> PyResult<f64> {
        self.inner.mortality.conditional_density(s, t).map_err(err)
    }

    fn sample_death_time(&self, t0: f64, seed: u64) -> PyResult<f64> {
        self.inner.mortality.sample_death_time(t0, seed).map_err(err)
    }

    fn premium_payout_ratio(&self, t: f64) -> PyResult<f64> {
        self.inner.eta(t).map_err(err)
    }

    fn income(&self, t: f64) -> PyResult<f64> {
        self.inner.income.rate(t).map_err(err)
    }

    fn risk_premium(&self, t: f64) -> PyResult<Vec<f64>> {
        self.inner.market.risk_premium(t).map_err(err)
    }

    fn xi_alpha(&self, t: f64) -> PyResult<Vec<f64>> {
        self.inner.market.xi_alpha(t).map_err(err)
    }

    fn sigma_quadratic(&self, t: f64) -> PyResult<f64> {
        self.inner.market.sigma_quadratic(t).map_err(err)
    }

    fn market_price_of_risk(&self, t: f64) -> PyResult<Vec<f64>> {
        self.inner.market.market_price_of_risk(t).map_err(err)
    }

    /// Solve the coefficient ODEs for the chosen problem variant.
    #[pyo3(signature = (with_insurance = true))]
    fn solve(&self, with_insurance: bool) -> PyResult<PySolution> {
        let variant = if with_insurance {
            Variant::WithInsurance
        } else {
            Variant::NoInsurance
        };
        Ok(PySolution {
            inner: StrategyCoefficients::compute(&self.inner, variant).map_err(err)?,
        })
    }

    /// Monte Carlo estimate of the expected utility of the closed-form
    /// strategy (optionally perturbed by per-control scale factors).
    #[pyo3(signature = (n_paths = 10_000, dt = 0.02, seed = 42, mode = "weighted",
                        with_insurance = true, t0 = 0.0, x0 = None,
                        scale_consumption = 1.0, scale_premium = 1.0,
                        scale_portfolio = 1.0))]
    #[allow(clippy::too_many_arguments)]
    fn estimate_utility(
        &self,
        n_paths: usize,
        dt: f64,
        seed: u64,
        mode: &str,
        with_insurance: bool,
        t0: f64,
        x0: Option<f64>,
        scale_consumption: f64,
        scale_premium: f64,
        scale_portfolio: f64,
    ) -> PyResult<HashMap<String, f64>> {
        let variant = if with_insurance {
            Variant::WithInsurance
        } else {
            Variant::NoInsurance
        };
        let coeffs = StrategyCoefficients::compute(&self.inner, variant).map_err(err)?;
        let policy = ClosedFormPolicy::scaled(
            coeffs,
            scale_consumption,
            scale_premium,
            scale_portfolio,
            "python",
        );
        let config = SimulationConfig {
            n_paths,
            dt,
            seed,
            antithetic: true,
            mode: parse_mode(mode)?,
        };
        let x0 = x0.unwrap_or(self.inner.x0);
        let est =
            estimate_expected_utility(&self.inner, &policy, t0, x0, &config).map_err(err)?;
        Ok(HashMap::from([
            ("mean".to_string(), est.mean),
            ("std_error".to_string(), est.std_error),
            ("n_paths".to_string(), est.n_paths as f64),
            ("degenerate_fraction".to_string(), est.degenerate_fraction),
            (
                "negative_wealth_fraction".to_string(),
                est.negative_wealth_fraction,
            ),
            ("mean_terminal_wealth".to_string(), est.mean_terminal_wealth),
            ("mean_insurance_spend".to_string(), est.mean_insurance_spend),
        ]))
    }

    /// One simulated wealth trajectory: (times, wealth, realized_utility).
    #[pyo3(signature = (path_index = 0, dt = 0.02, seed = 42, mode = "random"))]
    fn simulate_wealth_path(
        &self,
        path_index: usize,
        dt: f64,
        seed: u64,
        mode: &str,
    ) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
        let coeffs =
            StrategyCoefficients::compute(&self.inner, Variant::WithInsurance).map_err(err)?;
        let policy = ClosedFormPolicy::optimal(coeffs);
        let config = SimulationConfig {
            n_paths: 1,
            dt,
            seed,
            antithetic: false,
            mode: parse_mode(mode)?,
        };
        let path = simulate_path(&self.inner, &policy, &config, path_index).map_err(err)?;
        Ok((path.times, path.wealth, path.realized_utility))
    }
}

fn parse_mode(mode: &str) -> PyResult<EvaluationMode> {
    match mode {
        "weighted" => Ok(EvaluationMode::FixedHorizonWeighted),
        "random" => Ok(EvaluationMode::RandomHorizon),
        other => Err(PyValueError::new_err(format!(
            "mode must be 'weighted' or 'random', got '{other}'"
        ))),
    }
}

/// Precomputed coefficient curves and the optimal controls of one variant.
#[pyclass(name = "Solution")]
struct PySolution {
    inner: StrategyCoefficients,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn with_insurance(&self) -> bool {
        self.inner.variant() == Variant::WithInsurance
    }

    fn human_capital(&self, t: f64) -> PyResult<f64> {
        self.inner.human_capital(t).map_err(err)
    }

    fn coefficients(&self, t: f64) -> PyResult<HashMap<String, f64>> {
        let mut out = HashMap::from([
            ("b".to_string(), self.inner.human_capital(t).map_err(err)?),
            ("e".to_string(), self.inner.coefficient_e(t).map_err(err)?),
            ("a".to_string(), self.inner.value_coefficient_a(t).map_err(err)?),
            ("H".to_string(), self.inner.coefficient_h(t).map_err(err)?),
            ("K".to_string(), self.inner.coefficient_k(t).map_err(err)?),
            ("Sigma".to_string(), self.inner.sigma_quadratic(t).map_err(err)?),
        ]);
        if self.inner.variant() == Variant::WithInsurance {
            out.insert("D".to_string(), self.inner.coefficient_d(t).map_err(err)?);
        }
        Ok(out)
    }

    fn value(&self, t: f64, x: f64) -> PyResult<f64> {
        self.inner.value_function(t, x).map_err(err)
    }

    fn consumption(&self, t: f64, x: f64) -> PyResult<f64> {
        self.inner.optimal_consumption(t, x).map_err(err)
    }

    fn premium(&self, t: f64, x: f64) -> PyResult<f64> {
        self.inner.optimal_premium(t, x).map_err(err)
    }

    /// Portfolio fractions (theta_1..theta_N, theta_0).
    fn portfolio(&self, t: f64, x: f64) -> PyResult<(Vec<f64>, f64)> {
        let action = self.inner.optimal_portfolio(t, x).map_err(err)?;
        Ok((action.theta, action.theta0))
    }

    fn dollar_allocations(&self, t: f64, x: f64) -> PyResult<Vec<f64>> {
        self.inner.dollar_allocations(t, x).map_err(err)
    }

    fn legacy(&self, t: f64, x: f64) -> PyResult<f64> {
        self.inner.optimal_legacy(t, x).map_err(err)
    }

    fn hjb_residual(&self, t: f64, x: f64) -> PyResult<f64> {
        hjb_residual(&self.inner, t, x, DerivativeMode::Analytic).map_err(err)
    }

    fn foc_gaps(&self, t: f64, x: f64) -> PyResult<[f64; 3]> {
        foc_gaps(&self.inner, t, x).map_err(err)
    }

    fn hessian_ok(&self, t: f64, x: f64) -> PyResult<bool> {
        hessian_check(&self.inner, t, x).map_err(err)
    }

    /// Consumption, premium and portfolio from direct maximization of the
    /// Hamiltonian (the independent oracle for the closed form).
    fn argmax_controls(&self, t: f64, x: f64) -> PyResult<(f64, f64, Vec<f64>)> {
        let action = numeric_hamiltonian_argmax(&self.inner, t, x).map_err(err)?;
        Ok((action.consumption, action.premium, action.theta))
    }

    /// Pointwise HJB verification over a (t, x) grid; returns the summary.
    #[pyo3(signature = (n_times = 21, n_wealth = 21, wealth_min = 1e3, wealth_max = 3e6))]
    fn verify(
        &self,
        n_times: usize,
        n_wealth: usize,
        wealth_min: f64,
        wealth_max: f64,
    ) -> PyResult<HashMap<String, f64>> {
        let options = VerifyOptions {
            n_times,
            n_wealth,
            wealth_min,
            wealth_max,
            ..VerifyOptions::default()
        };
        let report = verify_grid(&self.inner, &options).map_err(err)?;
        Ok(HashMap::from([
            ("passed".to_string(), f64::from(u8::from(report.passed))),
            (
                "max_residual_normalized".to_string(),
                report.max_residual_normalized,
            ),
            (
                "max_residual_fd_normalized".to_string(),
                report.max_residual_fd_normalized,
            ),
            (
                "max_residual_term_scaled".to_string(),
                report.max_residual_term_scaled,
            ),
            ("max_foc_c".to_string(), report.max_foc[0]),
            ("max_foc_p".to_string(), report.max_foc[1]),
            ("max_foc_theta".to_string(), report.max_foc[2]),
            (
                "hessian_all_ok".to_string(),
                f64::from(u8::from(report.hessian_all_ok)),
            ),
        ]))
    }
}

#[pymodule]
fn lifeplan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PySolution>()?;
    Ok(())
}
