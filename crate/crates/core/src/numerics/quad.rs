//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 40;

/// Integrate f over [a, b] so that |result - true| <= tol * (1 + |result|)
/// for smooth integrands. Interval bisection with the classic 15x Richardson
/// acceptance test; exceeding the maximum recursion depth is an error.
pub fn integrate_adaptive<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a <= b) {
        return Err(Error::domain(format!("integration bounds a={a} > b={b}")));
    }
    if a == b {
        return Ok(0.0);
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("quadrature tolerance must be positive"));
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    if !(fa.is_finite() && fm.is_finite() && fb.is_finite()) {
        return Err(Error::domain("integrand is not finite on [a, b]"));
    }
    let whole = simpson(a, b, fa, fm, fb);
    // Turn the requested mixed tolerance into an absolute budget using the
    // coarse estimate as the magnitude scale.
    let budget = tol * (1.0 + whole.abs());
    recurse(&f, a, b, fa, fm, fb, whole, budget, MAX_DEPTH)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    budget: f64,
    depth: u32,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    if !(flm.is_finite() && frm.is_finite()) {
        return Err(Error::domain("integrand is not finite on [a, b]"));
    }
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * budget {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::accuracy(format!(
            "adaptive Simpson did not converge on [{a}, {b}] within depth {MAX_DEPTH}"
        )));
    }
    let half = 0.5 * budget;
    Ok(recurse(f, a, m, fa, flm, fm, left, half, depth - 1)?
        + recurse(f, m, b, fm, frm, fb, right, half, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        let v = integrate_adaptive(|x| x, 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, 0.5, max_relative = 1e-13);
        let v = integrate_adaptive(|x| x * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(v, 4.0, max_relative = 1e-13);
    }

    #[test]
    fn integrates_exponential() {
        let v = integrate_adaptive(f64::exp, 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, f64::exp(1.0) - 1.0, max_relative = 1e-12);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate_adaptive(f64::exp, 1.0, 1.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn reversed_bounds_error() {
        assert!(integrate_adaptive(f64::exp, 1.0, 0.0, 1e-10).is_err());
    }

    #[test]
    fn oscillatory_integrand_converges() {
        let v = integrate_adaptive(|x| (20.0 * x).sin(), 0.0, 3.0, 1e-11).unwrap();
        let exact = (1.0 - (60.0f64).cos()) / 20.0;
        assert_relative_eq!(v, exact, epsilon = 1e-10);
    }

    #[test]
    fn non_finite_integrand_is_domain_error() {
        assert!(integrate_adaptive(|x| 1.0 / x, 0.0, 1.0, 1e-10).is_err());
    }
}
