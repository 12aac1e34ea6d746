import json
import math

import numpy as np
import pytest

from vectorhost.errors import NonConvergenceError, ValidationError, VectorHostError
from vectorhost.model import HeterogeneityParams, constant_spec, parametric_spec
from vectorhost.numerics import Numerics
from vectorhost.periodic import logistic_orbits
from vectorhost.spectral import (ThresholdReport, basic_reproduction_coupled,
                                 basic_reproduction_scalar, poincare_step, power_iteration,
                                 principal_eigenvalue_coupled, principal_eigenvalue_scalar,
                                 read_threshold_json, scalar_problem, threshold_quantities)

from conftest import BASELINE, ENDEMIC

# Frozen at N = 20, dt = 1/200 with Richardson (values computed once, then locked).
FROZEN = [
    (([0.5] * 4, [0.0] * 4),
     (-1.3831395281242844, -1.477956801936192, 2.2122742201171604, 1.6603091795606848,
      -0.41825808591992014, 1.1442037889719179)),
    (([0.5] * 4, [0.5] * 4),
     (-1.1155089583851596, -1.062282726786107, 2.0, 1.5000000000026943,
      -0.10216129700717597, 1.0459176499989717)),
    (([-0.3, 0.7, 0.2, -0.5], [0.4, -0.6, 0.1, 0.3]),
     (-1.3821760824877194, -2.642510846923109, 2.446129609688876, 2.4841314178636793,
      -0.3970475340548227, 1.146425497533044)),
]

SMALL = Numerics(N=20, dt=1 / 200)


@pytest.mark.parametrize("pq,expected", FROZEN)
def test_frozen_regression(pq, expected):
    r = threshold_quantities(parametric_spec(HeterogeneityParams.from_pq(*pq)), SMALL)
    got = (r.zeta1, r.zeta2, r.R01, r.R02, r.lam, r.R0)
    assert got == pytest.approx(expected, rel=1e-7, abs=1e-9)


def test_constant_scalar_oracles(baseline_spec):
    num = Numerics(N=10, dt=1 / 1000)
    z1 = principal_eigenvalue_scalar(1, baseline_spec, num)
    z2 = principal_eigenvalue_scalar("vector", baseline_spec, num)
    # the eigenfunction is constant, so each step scales it by (1 + dt*a)/(1 + dt*b)
    exact = lambda a, b: math.log((1 + 1e-3 * b) / (1 + 1e-3 * a)) / 1e-3  # noqa: E731
    assert z1.eigenvalue == pytest.approx(exact(2, 1), rel=1e-10)
    assert z2.eigenvalue == pytest.approx(exact(3, 2), rel=1e-10)
    assert np.allclose(z1.eigenfunction, 1.0)
    assert z1.converged


def test_dirichlet_oracle():
    spec = constant_spec(BASELINE, bc="dirichlet")
    r = threshold_quantities(spec, Numerics(N=100, dt=1 / 1000))
    # -d pi^2 + (b - a) with d = 0.1: 0.1*pi^2 - 1
    assert r.zeta1 == pytest.approx(0.1 * math.pi ** 2 - 1, abs=2e-4)


def test_mu_limits(baseline_spec):
    prob = scalar_problem(1, baseline_spec, 10, 1 / 1000)
    assert power_iteration(prob, math.inf).eigenvalue == pytest.approx(
        math.log1p(1e-3) / 1e-3, rel=1e-10)
    lams = [power_iteration(prob, mu).eigenvalue for mu in (0.5, 1, 2, 4, 8)]
    assert all(np.diff(lams) > 0)
    with pytest.raises(ValidationError):
        power_iteration(prob, 0.0)


def test_scalar_reproduction(baseline_spec):
    num = Numerics(N=10, dt=1 / 200)
    assert basic_reproduction_scalar(1, baseline_spec, num).value == pytest.approx(2.0, rel=1e-8)
    assert basic_reproduction_scalar(2, baseline_spec, num).value == pytest.approx(1.5, rel=1e-8)


def test_coupled_reproduction(endemic_spec):
    r = threshold_quantities(endemic_spec, Numerics(N=10, dt=1 / 200))
    assert r.R0 == pytest.approx(math.sqrt(2), rel=1e-4)
    assert r.lam == pytest.approx(-1.0, rel=1e-3)
    assert r.status == "ok"
    assert r.diagnostics["coarse"]["sign_consistent"]


def test_poincare_linear(hetero_spec, rng):
    prob = scalar_problem(2, hetero_spec, 12, 1 / 100)
    u, v = rng.uniform(0, 1, (2, 13))
    a, b = 0.7, 2.3
    lhs = poincare_step(prob, a * u + b * v, 1.7)
    rhs = a * poincare_step(prob, u, 1.7) + b * poincare_step(prob, v, 1.7)
    assert np.allclose(lhs, rhs, rtol=1e-12)
    assert np.all(poincare_step(prob, u) > 0)  # strong positivity


def test_coupled_start_independence(hetero_spec):
    H, V = logistic_orbits(hetero_spec, 12, 1 / 100)
    num = Numerics(N=12, dt=1 / 100)
    a = principal_eigenvalue_coupled(hetero_spec, H, V, numerics=num)
    b = principal_eigenvalue_coupled(hetero_spec, H, V, numerics=num,
                                     start=np.vstack([np.linspace(0.1, 1, 13), np.ones(13)]))
    assert a.eigenvalue == pytest.approx(b.eigenvalue, abs=1e-9)
    r = basic_reproduction_coupled(hetero_spec, H, V, num)
    at_root = principal_eigenvalue_coupled(hetero_spec, H, V, mu=r.value, numerics=num)
    assert abs(at_root.eigenvalue) < 1e-7


def test_nonconvergence(hetero_spec):
    num = Numerics(N=12, dt=1 / 100, max_iter=2)
    with pytest.raises(NonConvergenceError) as err:
        principal_eigenvalue_scalar(1, hetero_spec, num)
    assert err.value.kind == "eigen"


def test_subcritical_status():
    r = threshold_quantities(constant_spec((1, 2, 1, 3, 3, 1, 1, 2)), Numerics(N=10, dt=1 / 100))
    assert r.status == "subcritical" and r.R0 is None and r.lam is None
    assert r.R01 == pytest.approx(0.5, rel=1e-6)


def test_report_json_roundtrip(tmp_path, endemic_spec):
    r = threshold_quantities(endemic_spec, Numerics(N=10, dt=1 / 100))
    p = tmp_path / "r.json"
    p.write_text(r.to_json())
    back = read_threshold_json(p)
    assert back.R0 == r.R0 and back.lam == r.lam  # repr floats round-trip bit-exactly
    doc = json.loads(p.read_text())
    doc["schema_version"] = 99
    p.write_text(json.dumps(doc))
    with pytest.raises(VectorHostError):
        read_threshold_json(p)
    assert ThresholdReport.from_dict(r.to_dict()).value("lambda") == r.lam
