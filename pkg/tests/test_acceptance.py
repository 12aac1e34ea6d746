"""End-to-end acceptance checks.

Each test prints one ``PASS``/``FAIL`` line (visible in ``pytest -v`` output)
and then asserts the same condition at the stated tolerance.  Run directly
with ``python3 tests/test_acceptance.py`` for the summary lines alone.
"""

import sys
import time

import numpy as np
import pytest

from vectorhost.analytic import (ConstantParams, constant_case_report, equilibrium,
                                 reference_eigenvalue_dirichlet)
from vectorhost.discretization import build_grid
from vectorhost.dynamics_check import check_threshold_dynamics
from vectorhost.model import HeterogeneityParams, constant_spec, parametric_spec
from vectorhost.numerics import Numerics
from vectorhost.periodic import find_periodic_orbit
from vectorhost.solver import StateField, simulate_full, simulate_logistic
from vectorhost.spectral import principal_eigenvalue_scalar, threshold_quantities

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    """Print the verdict line past pytest's capture and return the verdict."""
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}", flush=True)
        return ok
    return emit


def hetero(p, q):
    return parametric_spec(HeterogeneityParams.from_pq(p, q))


def bumpy_init(grid):
    return StateField.from_expressions(
        grid, ["1 + 0.5*cos(pi*x)", "0.2 + 0.1*x", "1.5 - 0.5*x", "0.1*(1 + sin(pi*x))"])


def test_criterion_1_baseline_threshold(report):
    t0 = time.perf_counter()
    r = threshold_quantities(hetero([0] * 4, [0] * 4), Numerics(N=200, dt=1e-3))
    secs = time.perf_counter() - t0
    ok = r.R0 is not None and 0.99 <= r.R0 <= 1.01 and secs < 120
    assert report(1, ok, f"baseline R0 = {r.R0:.6f} in [0.99, 1.01], {secs:.1f} s < 120 s")


def test_criterion_2_heterogeneous_anchor(report):
    t0 = time.perf_counter()
    r = threshold_quantities(hetero([0.5] * 4, [0] * 4), Numerics(N=200, dt=1e-3))
    secs = time.perf_counter() - t0
    ok = r.R0 is not None and 1.10 <= r.R0 <= 1.18 and secs < 300
    assert report(2, ok, f"heterogeneous R0 = {r.R0:.6f} in [1.10, 1.18], {secs:.1f} s < 300 s")


def _random_constant_sets(count, seed=2024):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        a1, a2 = rng.uniform(1.0, 4.0, 2)
        b1, b2 = rng.uniform(0.2, 0.9, 2) * (a1, a2)
        c1, c2 = rng.uniform(0.5, 2.0, 2)
        l1, l2 = rng.uniform(0.5, 4.0, 2)
        out.append((a1, b1, c1, l1, a2, b2, c2, l2))
    return out


def test_criterion_3_constant_oracles(report):
    keys = ("zeta1", "zeta2", "lam", "R0")
    base = Numerics(N=200, dt=1e-3)
    fine = base.refined(space=2, time=2)
    worst_base = worst_fine = 0.0
    for vals in _random_constant_sets(20):
        exact = constant_case_report(vals)
        spec = constant_spec(vals)
        for num, which in ((base, "base"), (fine, "fine")):
            r = threshold_quantities(spec, num)
            gap = max(abs(getattr(r, k) - getattr(exact, k)) / abs(getattr(exact, k))
                      for k in keys)
            if which == "base":
                worst_base = max(worst_base, gap)
            else:
                worst_fine = max(worst_fine, gap)
    ratio = worst_base / worst_fine
    ok = worst_base < 1e-3 and ratio >= 2.0
    assert report(3, ok, f"20 constant sets: max rel gap {worst_base:.2e} < 1e-3, "
                         f"refinement ratio {ratio:.2f} >= 2")


def test_criterion_4_equilibrium(report):
    vals = (2, 1, 1, 3, 3, 1, 1, 2)
    eq = np.array(equilibrium(ConstantParams.from_values(vals)))
    grid = build_grid(1.0, 200)
    traj = simulate_full(constant_spec(vals), bumpy_init(grid), 500.0, dt=1e-3, save_every=0)
    gap = float(np.max(np.abs(traj.final - eq[:, None])))
    ok = np.allclose(eq, (0.625, 0.375, 1.6, 0.4), rtol=1e-14) and gap < 1e-3
    assert report(4, ok, f"sup gap to (0.625, 0.375, 1.6, 0.4) at t = 500 is {gap:.2e} < 1e-3")


SCENARIOS = {
    "ENDEMIC": ((2, 1, 1, 3, 3, 1, 1, 2), "1"),
    "DISEASE_FREE": ((2, 1, 1, 3, 3, 2, 1, 1), "2"),
    "HOST_EXTINCT": ((1, 2, 1, 3, 3, 1, 1, 2), "3a"),
    "ALL_EXTINCT": ((1, 2, 1, 3, 2, 3, 1, 2), "3c"),
}


def test_criterion_5_threshold_dynamics(report):
    num = Numerics(N=50, dt=1e-3)
    grid = build_grid(1.0, num.N)
    other = StateField.from_expressions(grid, ["0.3", "0.05*(1 - x)", "2 + x", "0.02"])
    parts, ok = [], True
    for name, (vals, case) in SCENARIOS.items():
        rep = check_threshold_dynamics(constant_spec(vals), bumpy_init(grid), horizon=500,
                                       tol=1e-3, numerics=num)
        good = rep.predicted_case == case and rep.passed
        parts.append(f"{name} gap {rep.measured_gap:.1e}")
        if name == "ENDEMIC":
            rep2 = check_threshold_dynamics(constant_spec(vals), other, horizon=500, tol=1e-3,
                                            numerics=num)
            spread = float(np.max(np.abs(rep.final_period - rep2.final_period)))
            good = good and rep2.passed and spread < 1e-2
            parts.append(f"two-init spread {spread:.1e}")
        ok = ok and good
    assert report(5, ok, "; ".join(parts) + " (limits within 1e-3, spread < 1e-2)")


def test_criterion_6_sum_identity(report):
    spec = hetero([0.5] * 4, [0] * 4)
    grid = build_grid(1.0, 200)
    init = bumpy_init(grid)
    traj = simulate_full(spec, init, 10.0, dt=1e-3, save_every=1)
    H = simulate_logistic("host", spec, init.hu + init.hi, 10.0, dt=1e-3, save_every=1)
    V = simulate_logistic("vector", spec, init.vu + init.vi, 10.0, dt=1e-3, save_every=1)
    v = traj.values
    gap = max(float(np.max(np.abs(v[:, 0] + v[:, 1] - H.values[:, 0]))),
              float(np.max(np.abs(v[:, 2] + v[:, 3] - V.values[:, 0]))))
    ok = len(traj) == 10001 and gap <= 1e-10
    assert report(6, ok, f"max |sum - logistic| over 10000 steps = {gap:.1e} <= 1e-10")


def test_criterion_7_sign_consistency(report):
    num = Numerics(N=100, dt=1e-3, richardson=False)
    rng = np.random.default_rng(77)
    coupled = scalar = mismatches = draws = 0
    while coupled < 50 and draws < 1000:
        draws += 1
        pq = rng.uniform(-1.0, 1.0, 8)
        r = threshold_quantities(hetero(pq[:4], pq[4:]), num)
        for R, zeta in ((r.R01, r.zeta1), (r.R02, r.zeta2)):
            if abs(R - 1) > 1e-3:
                scalar += 1
                mismatches += np.sign(R - 1) != np.sign(-zeta)
        if r.R0 is not None and abs(r.R0 - 1) > 1e-3:
            coupled += 1
            mismatches += np.sign(r.R0 - 1) != np.sign(-r.lam)
    ok = coupled >= 50 and mismatches == 0
    assert report(7, ok, f"{coupled} coupled and {scalar} scalar pairs from {draws} draws, "
                         f"{mismatches} sign mismatches")


def _order(hs, errs):
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def test_criterion_8_orders(report):
    spec = constant_spec((2, 1, 1, 3, 3, 2, 1, 2), bc="dirichlet")
    exact = reference_eigenvalue_dirichlet(0.1, 1 - 2, 1.0)
    Ns = [50, 100, 200, 400]
    errs = []
    for n in Ns:
        # Richardson in time so the O(h^2) spatial error dominates
        coarse = principal_eigenvalue_scalar(1, spec, Numerics(N=n, dt=1 / 2000)).eigenvalue
        fine = principal_eigenvalue_scalar(1, spec, Numerics(N=n, dt=1 / 4000)).eigenvalue
        errs.append(abs(2 * fine - coarse - exact))
    p_space = _order([1 / n for n in Ns], errs)

    het = hetero([0.5] * 4, [0.5] * 4)
    grid = build_grid(1.0, 50)
    init = bumpy_init(grid)
    ref = simulate_full(het, init, 1.0, dt=1 / 16000, save_every=0).final
    dts = [1 / 250, 1 / 500, 1 / 1000, 1 / 2000]
    terr = [float(np.max(np.abs(simulate_full(het, init, 1.0, dt=d, save_every=0).final - ref)))
            for d in dts]
    p_time = _order(dts, terr)
    ok = abs(p_space - 2.0) <= 0.3 and abs(p_time - 1.0) <= 0.3
    assert report(8, ok, f"spatial order {p_space:.3f} (2 +/- 0.3), "
                         f"temporal order {p_time:.3f} (1 +/- 0.3)")


def test_criterion_9_orbit_invariants(report):
    tol = 1e-8
    rng = np.random.default_rng(99)
    sets = [([0.5] * 4, [0.0] * 4)]
    num = Numerics(N=50, dt=1e-3, richardson=False)
    while len(sets) < 5:
        pq = rng.uniform(-1, 1, 8)
        r = threshold_quantities(hetero(pq[:4], pq[4:]), num)
        if r.R0 is not None and r.R0 > 1.001:
            sets.append((pq[:4], pq[4:]))
    grid = build_grid(1.0, num.N)
    x = grid.nodes
    inits = (StateField.constant(grid, 2, 1, 1, 1),
             StateField(0.1 + 0 * x, 0.01 * (1 + np.cos(np.pi * x)), 3 + x, 0.05 + 0 * x))
    ordered, worst = True, 0.0
    for p, q in sets:
        spec = hetero(p, q)
        a, b = (find_periodic_orbit("full", spec, s, tol=tol, dt=num.dt) for s in inits)
        for orb in (a, b):
            hu, hi, vu, vi = (orb.values[:, i] for i in range(4))
            ordered &= bool(np.all(hi > 0) and np.all(hi < hu + hi)
                            and np.all(vi > 0) and np.all(vi < vu + vi))
        worst = max(worst, float(np.max(np.abs(a.values - b.values))))
    ok = ordered and worst < 10 * tol
    assert report(9, ok, f"{len(sets)} endemic sets: 0 < Hi < H and 0 < Vi < V "
                         f"{'hold' if ordered else 'violated'}; two-init gap {worst:.1e} < {10 * tol:.0e}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
