//! Deterministic-coefficient multi-asset market.
//!
//! One risk-free asset with rate r(t) and N risky assets with appreciation
//! mu(t) and an N x M volatility matrix sigma(t) driven by M independent
//! Brownian motions. The derived algebra used by the closed form:
//!
//! ```text
//! alpha = mu - r 1                  risk premium
//! xi    = (sigma sigma^T)^{-1}
//! Sigma = alpha^T xi alpha - 1/2 ||sigma^T xi alpha||^2
//! pi    = sigma^T xi alpha          market price of risk (least-norm)
//! ```
//!
//! Coefficients are piecewise-linear in time; constants are the degenerate
//! two-knot case. All queries are pure and the model is immutable.

use crate::error::{Error, Result};
use crate::numerics::{spd_condition_number, Curve, Matrix, SpdFactor, CONDITION_LIMIT};

#[derive(Debug, Clone)]
pub struct MarketModel {
    r: Curve,
    mu: Vec<Curve>,
    sigma: Vec<Vec<Curve>>,
    n_assets: usize,
    n_drivers: usize,
    horizon: f64,
    max_condition: f64,
}

/// Snapshot of the derived algebraic objects at a fixed time.
#[derive(Debug, Clone)]
pub struct MarketAlgebra {
    pub alpha: Vec<f64>,
    pub xi: Matrix,
    pub xi_alpha: Vec<f64>,
    pub sigma_quadratic: f64,
    pub market_price_of_risk: Vec<f64>,
}

impl MarketModel {
    /// Build a market with constant coefficients on [0, horizon].
    pub fn constant(r: f64, mu: Vec<f64>, sigma: Vec<Vec<f64>>, horizon: f64) -> Result<Self> {
        let to_curve = |v: f64| Curve::constant(v, 0.0, horizon);
        let r = to_curve(r)?;
        let mu = mu.into_iter().map(to_curve).collect::<Result<Vec<_>>>()?;
        let sigma = sigma
            .into_iter()
            .map(|row| row.into_iter().map(to_curve).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(r, mu, sigma, horizon)
    }

    pub fn new(r: Curve, mu: Vec<Curve>, sigma: Vec<Vec<Curve>>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::invalid("market horizon must be positive"));
        }
        let n_assets = mu.len();
        if n_assets == 0 {
            return Err(Error::invalid("market needs at least one risky asset"));
        }
        if sigma.len() != n_assets {
            return Err(Error::invalid(
                "sigma must have one row per risky asset",
            ));
        }
        let n_drivers = sigma[0].len();
        if n_drivers == 0 || sigma.iter().any(|row| row.len() != n_drivers) {
            return Err(Error::invalid("sigma rows must share a positive length"));
        }
        let covers = |c: &Curve| c.first_knot() <= 0.0 && c.last_knot() >= horizon;
        if !covers(&r)
            || !mu.iter().all(covers)
            || !sigma.iter().flatten().all(covers)
        {
            return Err(Error::invalid(
                "market coefficient curves must cover [0, horizon]",
            ));
        }
        let model = MarketModel {
            r,
            mu,
            sigma,
            n_assets,
            n_drivers,
            horizon,
            max_condition: 0.0,
        };
        let max_condition = model.validate_grid()?;
        Ok(MarketModel {
            max_condition,
            ..model
        })
    }

    /// Check r > 0 and sigma sigma^T nonsingular on the union of knot times
    /// and a uniform sample of the horizon; returns the worst condition number.
    fn validate_grid(&self) -> Result<f64> {
        let mut times: Vec<f64> = (0..=100).map(|i| self.horizon * i as f64 / 100.0).collect();
        times.extend(self.r.knots().iter().copied());
        for c in self.mu.iter().chain(self.sigma.iter().flatten()) {
            times.extend(c.knots().iter().copied());
        }
        let mut worst: f64 = 1.0;
        for &t in &times {
            if t < 0.0 || t > self.horizon {
                continue;
            }
            let rate = self.r.eval(t)?;
            if !(rate > 0.0) {
                return Err(Error::invalid(format!(
                    "interest rate must be positive, got r({t}) = {rate}"
                )));
            }
            let gram = self.volatility(t)?.gram();
            let cond = spd_condition_number(&gram)
                .map_err(|e| Error::singular(format!("sigma sigma^T at t={t}: {e}")))?;
            if !cond.is_finite() || cond > CONDITION_LIMIT {
                return Err(Error::singular(format!(
                    "sigma sigma^T at t={t} has condition number {cond:.3e}"
                )));
            }
            worst = worst.max(cond);
        }
        Ok(worst)
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn n_drivers(&self) -> usize {
        self.n_drivers
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Worst condition number of sigma sigma^T seen during validation.
    pub fn max_condition_number(&self) -> f64 {
        self.max_condition
    }

    pub fn rate(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        self.r.eval(t)
    }

    pub fn appreciation(&self, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        self.mu.iter().map(|c| c.eval(t)).collect()
    }

    pub fn volatility(&self, t: f64) -> Result<Matrix> {
        let rows = self
            .sigma
            .iter()
            .map(|row| row.iter().map(|c| c.eval(t)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_rows(&rows)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < -1e-12 || t > self.horizon * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::domain(format!(
                "time {t} outside market horizon [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// alpha(t) = mu(t) - r(t) 1, componentwise.
    pub fn risk_premium(&self, t: f64) -> Result<Vec<f64>> {
        let r = self.rate(t)?;
        Ok(self.appreciation(t)?.into_iter().map(|m| m - r).collect())
    }

    fn gram_factor(&self, t: f64) -> Result<SpdFactor> {
        let gram = self.volatility(t)?.gram();
        let cond = spd_condition_number(&gram)?;
        if !cond.is_finite() || cond > CONDITION_LIMIT {
            return Err(Error::singular(format!(
                "sigma sigma^T at t={t} has condition number {cond:.3e}"
            )));
        }
        SpdFactor::new(&gram)
    }

    /// xi alpha = (sigma sigma^T)^{-1} alpha, by SPD solve.
    pub fn xi_alpha(&self, t: f64) -> Result<Vec<f64>> {
        let alpha = self.risk_premium(t)?;
        Ok(self.gram_factor(t)?.solve(&alpha))
    }

    /// Sigma(t) = alpha^T xi alpha - 1/2 ||sigma^T xi alpha||^2, evaluated
    /// exactly as the two-term expression.
    pub fn sigma_quadratic(&self, t: f64) -> Result<f64> {
        let alpha = self.risk_premium(t)?;
        let xi_alpha = self.gram_factor(t)?.solve(&alpha);
        let first: f64 = alpha.iter().zip(&xi_alpha).map(|(a, x)| a * x).sum();
        let proj = self.volatility(t)?.tr_matvec(&xi_alpha);
        let second: f64 = proj.iter().map(|v| v * v).sum();
        Ok(first - 0.5 * second)
    }

    /// Least-norm pi with sigma pi = alpha, i.e. pi = sigma^T xi alpha.
    pub fn market_price_of_risk(&self, t: f64) -> Result<Vec<f64>> {
        let xi_alpha = self.xi_alpha(t)?;
        Ok(self.volatility(t)?.tr_matvec(&xi_alpha))
    }

    /// All derived objects at once, sharing one factorization.
    pub fn algebra(&self, t: f64) -> Result<MarketAlgebra> {
        let alpha = self.risk_premium(t)?;
        let factor = self.gram_factor(t)?;
        let xi_alpha = factor.solve(&alpha);
        let xi = factor.inverse();
        let market_price_of_risk = self.volatility(t)?.tr_matvec(&xi_alpha);
        let first: f64 = alpha.iter().zip(&xi_alpha).map(|(a, x)| a * x).sum();
        let second: f64 = market_price_of_risk.iter().map(|v| v * v).sum();
        Ok(MarketAlgebra {
            alpha,
            xi,
            xi_alpha,
            sigma_quadratic: first - 0.5 * second,
            market_price_of_risk,
        })
    }
}
