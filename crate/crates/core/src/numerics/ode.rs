//! Backward RK4 integration of the linear terminal-value problems
//! y'(t) = H(t) y(t) - K(t), y(T) given, that define the coefficient curves.

use crate::error::{Error, Result};

/// Solve y' = H(t) y - K(t) backward from the last grid point, where the
/// terminal value is attached. Returns the solution at every grid knot,
/// aligned with `grid` (ascending).
pub fn solve_backward_linear_ode<H, K>(
    h: H,
    k: K,
    terminal: f64,
    grid: &[f64],
) -> Result<Vec<f64>>
where
    H: Fn(f64) -> f64,
    K: Fn(f64) -> f64,
{
    if grid.len() < 2 {
        return Err(Error::invalid("ODE grid needs at least two knots"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("ODE grid must be strictly increasing"));
    }
    if !terminal.is_finite() {
        return Err(Error::invalid("ODE terminal value must be finite"));
    }
    let f = |t: f64, y: f64| h(t) * y - k(t);
    let n = grid.len();
    let mut values = vec![0.0; n];
    values[n - 1] = terminal;
    let mut y = terminal;
    for i in (0..n - 1).rev() {
        let t1 = grid[i + 1];
        let t0 = grid[i];
        let step = t0 - t1; // negative
        let k1 = f(t1, y);
        let k2 = f(t1 + 0.5 * step, y + 0.5 * step * k1);
        let k3 = f(t1 + 0.5 * step, y + 0.5 * step * k2);
        let k4 = f(t0, y + step * k3);
        y += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !y.is_finite() {
            return Err(Error::accuracy(format!(
                "backward ODE solution became non-finite at t={t0}"
            )));
        }
        values[i] = y;
    }
    Ok(values)
}
