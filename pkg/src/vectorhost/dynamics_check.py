"""Long-horizon checks of the threshold dynamics.

The expected long-run limit is chosen from the reproduction numbers alone,
then the full system is simulated and its last period is compared with that
limit.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .discretization import build_grid
from .errors import NonConvergenceError, VectorHostError
from .model import ModelSpec
from .numerics import Numerics
from .periodic import find_periodic_orbit, logistic_upper_state
from .solver import FULL_COMPONENTS, Integrator, StateField, _check_init, _project_dirichlet
from .spectral import ThresholdReport, _clean, threshold_quantities

log = logging.getLogger(__name__)

DEAD_BAND = 1e-4

CASES = {
    "1": "endemic",
    "2": "disease-free",
    "3a": "host-extinct",
    "3b": "vector-extinct",
    "3c": "all-extinct",
}


def predict_case(R01: float, R02: float, R0: float | None, band: float = DEAD_BAND) -> str | None:
    """Case label from the reproduction numbers, ``None`` inside the dead band."""
    near = lambda r: r is not None and abs(r - 1.0) <= band  # noqa: E731
    if near(R01) or near(R02):
        return None
    if R01 > 1 and R02 > 1:
        if R0 is None or near(R0):
            return None
        return "1" if R0 > 1 else "2"
    if R02 > 1:
        return "3a"
    if R01 > 1:
        return "3b"
    return "3c"


@dataclass
class DynamicsReport:
    predicted_case: str | None
    measured_gap: float | None
    horizon: int
    tol: float
    verdict: str
    thresholds: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    final_period: np.ndarray | None = field(default=None, repr=False)
    limit: np.ndarray | None = field(default=None, repr=False)

    @property
    def case_name(self) -> str:
        return CASES.get(self.predicted_case, "threshold-indeterminate")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {"predicted_case": self.predicted_case, "case_name": self.case_name,
                "measured_gap": self.measured_gap, "horizon": self.horizon, "tol": self.tol,
                "verdict": self.verdict, "thresholds": self.thresholds,
                "diagnostics": self.diagnostics, "schema_version": 1}

    def to_json(self, **kw) -> str:
        return json.dumps(_clean(self.to_dict()), **kw)


def limit_orbit(case: str, spec: ModelSpec, num: Numerics, n: int) -> np.ndarray:
    """Predicted limit over one period, shape ``(m+1, 4, n+1)``."""
    dt = num.step(spec.period)
    m = round(spec.period / dt)
    size = n + 1
    zero = np.zeros((m + 1, size))
    H = V = None
    if case in ("1", "2", "3b"):
        H = find_periodic_orbit("host", spec, logistic_upper_state("host", spec, n), num.orbit_tol,
                                num.max_periods, dt=dt)
    if case in ("1", "2", "3a"):
        V = find_periodic_orbit("vector", spec, logistic_upper_state("vector", spec, n), num.orbit_tol,
                                num.max_periods, dt=dt)
    h = H.values[:, 0, :] if H is not None else zero
    v = V.values[:, 0, :] if V is not None else zero
    if case == "1":
        init = np.array([0.5 * H.values[0, 0], 0.5 * V.values[0, 0]])
        red = find_periodic_orbit("reduced", spec, init, num.orbit_tol, num.max_periods,
                                  drivers=(H, V))
        hi, vi = red.values[:, 0, :], red.values[:, 1, :]
        return np.stack([h - hi, hi, v - vi, vi], axis=1)
    return np.stack([h, zero, v, zero], axis=1)


def check_threshold_dynamics(spec: ModelSpec, init: StateField, horizon: int = 500,
                             tol: float = 1e-3, numerics: Numerics | None = None,
                             thresholds: ThresholdReport | None = None) -> DynamicsReport:
    """Simulate ``horizon`` periods and compare the last one with the predicted limit.

    Failing to approach the limit is reported as a ``fail`` verdict, not an
    exception.  ``thresholds`` may be passed to reuse a computed report.
    """
    num = numerics or Numerics(N=init.n)
    S = init.as_array()
    _check_init(S)
    if not np.any(S[1] > 0) and not np.any(S[3] > 0):
        log.warning("no infection in the initial data; the disease cannot appear")
    n = S.shape[1] - 1
    if num.N != n:
        num = Numerics(**{**num.as_dict(), "N": n})
    rep = thresholds or threshold_quantities(spec, num)
    th = {"R01": rep.R01, "R02": rep.R02, "R0": rep.R0}
    case = predict_case(rep.R01, rep.R02, rep.R0)
    if case is None:
        return DynamicsReport(None, None, horizon, tol, "threshold-indeterminate", th)
    try:
        limit = limit_orbit(case, spec, num, n)
    except NonConvergenceError as exc:
        return DynamicsReport(case, None, horizon, tol, "fail", th,
                              {"error": f"limit orbit: {exc}"})
    dt = num.step(spec.period)
    grid = build_grid(spec.length, n)
    integ = Integrator(spec, grid, dt)
    S = S.copy()
    _project_dirichlet(spec, S, (0, 1), (2, 3))
    integ.set_initial_sup("full", S)
    m = integ.m
    try:
        integ.advance("full", S, 0, (horizon - 1) * m)
        start = S.copy()
        saved = integ.advance("full", S, (horizon - 1) * m, m, 1)
    except VectorHostError as exc:
        return DynamicsReport(case, None, horizon, tol, "fail", th, {"error": str(exc)})
    final = np.concatenate([start[None], saved])
    gap = float(np.max(np.abs(final - limit)))
    per_comp = {c: float(np.max(np.abs(final[:, i] - limit[:, i])))
                for i, c in enumerate(FULL_COMPONENTS)}
    diag = {"component_gap": per_comp, "dt": dt, "N": n}
    verdict = "pass" if gap <= tol else "fail"
    if case == "1":
        Htot = limit[:, 0] + limit[:, 1]
        diag["hi_below_H"] = bool(np.all(final[:, 1] < Htot + 1e-12))
    return DynamicsReport(case, gap, horizon, tol, verdict, th, diag, final, limit)
