//! Hazard-rate models of the wage earner's random lifetime.
//!
//! The lifetime tau has hazard lambda(t), conditional survivor function
//! Fbar(s, t) = exp(-int_t^s lambda) and conditional density
//! f(s, t) = lambda(s) Fbar(s, t). Cumulative hazards are computed in closed
//! form (no quadrature), and death times are sampled by inverting the
//! cumulative hazard with bracketed bisection.

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum MortalityModel {
    /// lambda(t) = base + scale * exp(growth * t)
    GompertzMakeham { base: f64, scale: f64, growth: f64 },
    /// Piecewise-constant rate; the last segment extends to infinity.
    PiecewiseConstant { knots: Vec<(f64, f64)> },
}

impl MortalityModel {
    pub fn gompertz_makeham(base: f64, scale: f64, growth: f64) -> Result<Self> {
        if !(base.is_finite() && scale.is_finite() && growth.is_finite()) {
            return Err(Error::invalid("Gompertz-Makeham parameters must be finite"));
        }
        if base < 0.0 || scale < 0.0 || base + scale <= 0.0 {
            return Err(Error::invalid(
                "Gompertz-Makeham requires base >= 0, scale >= 0 and base + scale > 0",
            ));
        }
        // the cumulative hazard must diverge: a positive floor or a
        // non-decaying exponential term guarantees it
        if base == 0.0 && growth < 0.0 {
            return Err(Error::invalid(
                "hazard with zero base and decaying exponential has finite total mass",
            ));
        }
        Ok(MortalityModel::GompertzMakeham { base, scale, growth })
    }

    pub fn piecewise_constant(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::invalid("piecewise hazard needs at least one knot"));
        }
        if knots[0].0 != 0.0 {
            return Err(Error::invalid("piecewise hazard must start at t = 0"));
        }
        if knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::invalid("piecewise hazard knots must be increasing"));
        }
        if knots.iter().any(|&(t, l)| !t.is_finite() || !(l > 0.0) || !l.is_finite()) {
            return Err(Error::invalid("piecewise hazard rates must be positive"));
        }
        Ok(MortalityModel::PiecewiseConstant { knots })
    }

    /// The hazard used by the reference scenario: 0.001 + exp(-9.5 + 0.1 t).
    pub fn reference() -> Self {
        MortalityModel::GompertzMakeham {
            base: 0.001,
            scale: (-9.5f64).exp(),
            growth: 0.1,
        }
    }

    /// Instantaneous death rate lambda(t).
    pub fn hazard(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("hazard requires t >= 0, got {t}")));
        }
        Ok(self.hazard_unchecked(t))
    }

    fn hazard_unchecked(&self, t: f64) -> f64 {
        match self {
            MortalityModel::GompertzMakeham { base, scale, growth } => {
                base + scale * (growth * t).exp()
            }
            MortalityModel::PiecewiseConstant { knots } => {
                let idx = knots.partition_point(|&(k, _)| k <= t);
                knots[idx.saturating_sub(1)].1
            }
        }
    }

    /// Integrated hazard int_0^t lambda, in closed form.
    pub fn cumulative_hazard(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!(
                "cumulative hazard requires t >= 0, got {t}"
            )));
        }
        Ok(match self {
            MortalityModel::GompertzMakeham { base, scale, growth } => {
                if *growth == 0.0 {
                    (base + scale) * t
                } else {
                    base * t + scale / growth * ((growth * t).exp() - 1.0)
                }
            }
            MortalityModel::PiecewiseConstant { knots } => {
                let mut acc = 0.0;
                for (i, &(start, rate)) in knots.iter().enumerate() {
                    if t <= start {
                        break;
                    }
                    let end = knots.get(i + 1).map_or(t, |&(next, _)| next.min(t));
                    acc += rate * (end - start);
                }
                acc
            }
        })
    }

    /// Fbar(s, t) = P(tau >= s | tau >= t) = exp(-int_t^s lambda).
    pub fn conditional_survival(&self, s: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !(s >= t) {
            return Err(Error::domain(format!(
                "conditional survival requires 0 <= t <= s, got t={t}, s={s}"
            )));
        }
        Ok((-(self.cumulative_hazard(s)? - self.cumulative_hazard(t)?)).exp())
    }

    /// f(s, t) = lambda(s) Fbar(s, t), the conditional death-time density.
    pub fn conditional_density(&self, s: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !(s >= t) {
            return Err(Error::domain(format!(
                "conditional density requires 0 <= t <= s, got t={t}, s={s}"
            )));
        }
        Ok(self.hazard_unchecked(s) * self.conditional_survival(s, t)?)
    }

    /// Draw a death time tau > t0 with density f(., t0) by inverse transform:
    /// the keyed uniform u solves Lambda(tau) - Lambda(t0) = -ln u.
    pub fn sample_death_time(&self, t0: f64, seed: u64) -> Result<f64> {
        let u = rng::uniform(seed, rng::stream::GENERIC, 0, 0, 0);
        self.invert_survival(t0, u)
    }

    /// Solve Fbar(tau, t0) = u for tau; u in (0, 1).
    pub fn invert_survival(&self, t0: f64, u: f64) -> Result<f64> {
        if !(t0 >= 0.0) {
            return Err(Error::domain(format!(
                "death-time sampling requires t0 >= 0, got {t0}"
            )));
        }
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain("survival inversion needs u in (0, 1)"));
        }
        let base = self.cumulative_hazard(t0)?;
        let target = base - u.ln();
        // bracket by doubling, then bisect to 1e-12 absolute in time
        let mut lo = t0;
        let mut width = 1.0;
        let mut hi = t0 + width;
        while self.cumulative_hazard(hi)? < target {
            lo = hi;
            width *= 2.0;
            hi = t0 + width;
            if !hi.is_finite() {
                return Err(Error::accuracy("death-time bracket did not close"));
            }
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                // f64 spacing exhausted before the absolute tolerance;
                // happens only for astronomically distant death times
                break;
            }
            if self.cumulative_hazard(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}
