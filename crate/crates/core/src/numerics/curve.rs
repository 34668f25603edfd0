//! Time-indexed coefficient curves.
//!
//! All model coefficients live on a bounded interval; evaluation outside the
//! knot range is an error rather than an extrapolation. Monotone cubic
//! interpolation (Fritsch-Carlson) is used for solved coefficient curves so
//! that quantities entering sign-sensitive formulas do not oscillate between
//! knots.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    MonotoneCubic,
    /// Piecewise constant, left-continuous: value of the segment start knot.
    Constant,
}

#[derive(Debug, Clone)]
pub struct Curve {
    knots: Vec<f64>,
    values: Vec<f64>,
    interpolation: Interpolation,
    /// Hermite slopes, populated for MonotoneCubic.
    slopes: Vec<f64>,
}

impl Curve {
    pub fn linear(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(knots, values, Interpolation::Linear)
    }

    pub fn monotone_cubic(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(knots, values, Interpolation::MonotoneCubic)
    }

    /// Cubic Hermite interpolation with caller-supplied knot derivatives,
    /// limited by the Fritsch-Carlson monotonicity region. Exact ODE slopes
    /// make the interpolant third-order accurate in the derivative while
    /// staying shape-preserving on monotone data.
    pub fn monotone_cubic_with_slopes(
        knots: Vec<f64>,
        values: Vec<f64>,
        slopes: Vec<f64>,
    ) -> Result<Self> {
        if slopes.len() != knots.len() {
            return Err(Error::invalid("curve slopes and knots differ in length"));
        }
        if slopes.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("curve slopes must be finite"));
        }
        let mut curve = Self::new(knots, values, Interpolation::MonotoneCubic)?;
        let n = curve.knots.len();
        let delta: Vec<f64> = curve
            .knots
            .windows(2)
            .zip(curve.values.windows(2))
            .map(|(t, y)| (y[1] - y[0]) / (t[1] - t[0]))
            .collect();
        let mut limited = slopes;
        for (i, d) in limited.iter_mut().enumerate() {
            let left = if i > 0 { Some(delta[i - 1]) } else { None };
            let right = if i < n - 1 { Some(delta[i]) } else { None };
            let bound = match (left, right) {
                (Some(a), Some(b)) => {
                    if a * b <= 0.0 {
                        0.0 // data extremum: zero slope keeps both pieces monotone
                    } else {
                        3.0 * a.abs().min(b.abs())
                    }
                }
                (Some(a), None) | (None, Some(a)) => 3.0 * a.abs(),
                (None, None) => unreachable!("curves have at least two knots"),
            };
            let reference = left.or(right).unwrap();
            if *d * reference < 0.0 {
                *d = 0.0;
            } else {
                *d = d.clamp(-bound, bound);
            }
        }
        curve.slopes = limited;
        Ok(curve)
    }

    pub fn piecewise_constant(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(knots, values, Interpolation::Constant)
    }

    /// A constant value represented as a two-knot linear curve on [t0, t1].
    pub fn constant(value: f64, t0: f64, t1: f64) -> Result<Self> {
        Self::new(vec![t0, t1], vec![value, value], Interpolation::Linear)
    }

    fn new(knots: Vec<f64>, values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::invalid("curve knots and values differ in length"));
        }
        if knots.len() < 2 {
            return Err(Error::invalid("curve needs at least two knots"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("curve knots must be strictly increasing"));
        }
        if knots.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("curve knots and values must be finite"));
        }
        let slopes = match interpolation {
            Interpolation::MonotoneCubic => pchip_slopes(&knots, &values),
            _ => Vec::new(),
        };
        Ok(Curve {
            knots,
            values,
            interpolation,
            slopes,
        })
    }

    pub fn first_knot(&self) -> f64 {
        self.knots[0]
    }

    pub fn last_knot(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the segment containing t, after clamping roundoff at the ends.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let lo = self.first_knot();
        let hi = self.last_knot();
        let tol = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
        if !t.is_finite() || t < lo - tol || t > hi + tol {
            return Err(Error::domain(format!(
                "curve evaluated at t={t} outside [{lo}, {hi}]"
            )));
        }
        let t = t.clamp(lo, hi);
        // partition_point: first knot strictly greater than t.
        let idx = self.knots.partition_point(|&k| k <= t);
        let seg = idx.saturating_sub(1).min(self.knots.len() - 2);
        Ok((seg, t))
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (i, t) = self.locate(t)?;
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        Ok(match self.interpolation {
            Interpolation::Constant => {
                if t >= t1 {
                    y1
                } else {
                    y0
                }
            }
            Interpolation::Linear => {
                let w = (t - t0) / (t1 - t0);
                y0 + w * (y1 - y0)
            }
            Interpolation::MonotoneCubic => {
                let h = t1 - t0;
                let s = (t - t0) / h;
                let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
            }
        })
    }
}

/// Fritsch-Carlson shape-preserving slopes.
fn pchip_slopes(knots: &[f64], values: &[f64]) -> Vec<f64> {
    let n = knots.len();
    let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = values
        .windows(2)
        .zip(&h)
        .map(|(w, &hi)| (w[1] - w[0]) / hi)
        .collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] <= 0.0 {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d[0] = edge_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], delta.get(1).copied().unwrap_or(delta[0]));
    d[n - 1] = edge_slope(
        h[n - 2],
        if n >= 3 { h[n - 3] } else { h[n - 2] },
        delta[n - 2],
        if n >= 3 { delta[n - 3] } else { delta[n - 2] },
    );
    d
}

/// One-sided three-point slope estimate with the standard monotonicity clamps.
fn edge_slope(h0: f64, h1: f64, delta0: f64, delta1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * delta0 - h0 * delta1) / (h0 + h1);
    if d * delta0 <= 0.0 {
        0.0
    } else if delta0 * delta1 < 0.0 && d.abs() > 3.0 * delta0.abs() {
        3.0 * delta0
    } else {
        d
    }
}
