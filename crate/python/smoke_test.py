#!/usr/bin/env python3
"""Smoke test for the lifeplan_py extension module.

Builds nothing itself: expects `cargo build -p lifeplan-py [--release]` to
have produced liblifeplan_py.so, which is copied next to a temp dir under the
importable name.
"""

import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load_module():
    candidates = [
        ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("liblifeplan_py.so", "lifeplan_py.so", "liblifeplan_py.dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p lifeplan-py")
    stage = pathlib.Path(tempfile.mkdtemp(prefix="lifeplan_py_"))
    shutil.copy2(built, stage / "lifeplan_py.so")
    sys.path.insert(0, str(stage))
    import lifeplan_py

    return lifeplan_py


def approx(a, b, rel=1e-9, abs_tol=0.0):
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), abs_tol)


def main():
    lp = load_module()
    print(f"lifeplan_py { lp.__version__ } loaded")

    scenario = lp.Scenario.reference()
    assert scenario.n_assets == 2
    assert scenario.horizon == 40.0
    assert approx(scenario.hazard(0.0), 0.001 + math.exp(-9.5), rel=1e-14)
    assert approx(scenario.premium_payout_ratio(10.0), 1.05 * scenario.hazard(10.0), rel=1e-14)

    # weighted risk premiums carry the short position in the first asset
    xi_alpha = scenario.xi_alpha(0.0)
    assert approx(xi_alpha[0], -10.976080246913580, rel=1e-12)
    assert approx(xi_alpha[1], 10.551697530864197, rel=1e-12)
    assert approx(scenario.sigma_quadratic(0.0),
                  0.5 * sum(a * x for a, x in zip(scenario.risk_premium(0.0), xi_alpha)),
                  rel=1e-12)

    solution = scenario.solve(with_insurance=True)
    coeffs = solution.coefficients(40.0)
    assert approx(coeffs["e"], 1.0, rel=1e-12)
    assert approx(coeffs["b"], 0.0, abs_tol=1e-9)
    assert approx(coeffs["D"], (1 / 1.05) ** 0.25, rel=1e-10)
    assert 0.0 < solution.coefficients(0.0)["D"] < 1.0

    # controls at the young, low-wealth corner: buy insurance, leverage up
    c = solution.consumption(0.0, 1e5)
    p = solution.premium(0.0, 1e5)
    theta, theta0 = solution.portfolio(0.0, 1e5)
    assert c > 0 and p > 0
    assert theta[0] < 0 < theta[1]
    assert approx(sum(theta) + theta0, 1.0, rel=1e-12)
    assert solution.value(0.0, 1e5) < 0  # gamma = -3

    # the independent Hamiltonian argmax lands on the closed form
    ac, ap, atheta = solution.argmax_controls(12.0, 5e5)
    assert approx(ac, solution.consumption(12.0, 5e5), rel=1e-8)
    assert approx(ap, solution.premium(12.0, 5e5), rel=1e-8)
    assert all(approx(a, b, rel=1e-8) for a, b in zip(atheta, solution.portfolio(12.0, 5e5)[0]))

    # pointwise HJB verification on a small grid
    report = solution.verify(n_times=9, n_wealth=9)
    assert report["passed"] == 1.0, report
    assert report["max_residual_term_scaled"] < 1e-8

    # no-insurance variant is the conservative comparison
    base = scenario.solve(with_insurance=False)
    assert base.premium(10.0, 1e5) == 0.0
    assert base.human_capital(10.0) > solution.human_capital(10.0)

    # a small Monte Carlo run brackets the analytic value
    est = scenario.estimate_utility(n_paths=4000, dt=0.05, seed=7)
    value = solution.value(0.0, scenario.x0)
    gap = abs(est["mean"] - value) / est["std_error"]
    assert gap < 4.0, (est, value)
    assert est["degenerate_fraction"] == 0.0

    times, wealth, utility = scenario.simulate_wealth_path(seed=3)
    assert len(times) == len(wealth) and wealth[0] == scenario.x0
    assert utility < 0.0

    # strict schema: typos are rejected
    try:
        lp.Scenario.from_json('{"markets": {}}')
    except ValueError:
        pass
    else:
        raise AssertionError("unknown keys should be rejected")

    print("smoke test OK: solve / verify / simulate all consistent")


if __name__ == "__main__":
    main()
