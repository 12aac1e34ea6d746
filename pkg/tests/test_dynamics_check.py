import json

import numpy as np
import pytest

from vectorhost.discretization import build_grid
from vectorhost.dynamics_check import check_threshold_dynamics, predict_case
from vectorhost.model import HeterogeneityParams, constant_spec, parametric_spec
from vectorhost.numerics import Numerics
from vectorhost.solver import StateField

NUM = Numerics(N=10, dt=1 / 100)


@pytest.mark.parametrize("r01,r02,r0,case", [
    (2.0, 1.5, 1.2, "1"),
    (2.0, 1.5, 0.8, "2"),
    (0.5, 1.5, None, "3a"),
    (2.0, 0.5, None, "3b"),
    (0.5, 0.5, None, "3c"),
    (2.0, 1.5, 1.00005, None),
    (1.00001, 1.5, None, None),
])
def test_predict_case(r01, r02, r0, case):
    assert predict_case(r01, r02, r0) == case


def _init(n=10):
    g = build_grid(1.0, n)
    return StateField.from_expressions(g, ["1 + 0.3*cos(pi*x)", "0.2", "0.8", "0.1 + 0.1*x"])


@pytest.mark.parametrize("vals,case", [
    ((2, 1, 1, 3, 3, 1, 1, 2), "1"),
    ((2, 1, 1, 3, 3, 2, 1, 1), "2"),
    ((1, 2, 1, 3, 3, 1, 1, 2), "3a"),
    ((2, 1, 1, 3, 2, 3, 1, 2), "3b"),
    ((1, 2, 1, 3, 2, 3, 1, 2), "3c"),
])
def test_constant_regimes(vals, case):
    rep = check_threshold_dynamics(constant_spec(vals), _init(), horizon=150, tol=1e-3,
                                   numerics=NUM)
    assert rep.predicted_case == case
    assert rep.passed, rep.diagnostics
    if case == "1":
        assert rep.diagnostics["hi_below_H"]


def test_heterogeneous_endemic():
    spec = parametric_spec(HeterogeneityParams.from_pq([0.5] * 4, [0.0] * 4))
    rep = check_threshold_dynamics(spec, _init(), horizon=150, numerics=NUM)
    assert rep.case_name == "endemic" and rep.passed
    assert rep.final_period.shape == (101, 4, 11)


def test_short_horizon_fails_honestly():
    spec = constant_spec((2, 1, 1, 3, 3, 2, 1, 1))
    rep = check_threshold_dynamics(spec, _init(), horizon=1, tol=1e-6, numerics=NUM)
    assert rep.verdict == "fail" and rep.measured_gap > 1e-6


def test_indeterminate_baseline(baseline_spec):
    rep = check_threshold_dynamics(baseline_spec, _init(), horizon=5, numerics=NUM)
    assert rep.verdict == "threshold-indeterminate"
    d = json.loads(rep.to_json())
    assert d["case_name"] == "threshold-indeterminate" and d["measured_gap"] is None
