"""Periodic solutions by iterating the period map of the nonlinear systems."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .discretization import build_grid
from .errors import NonConvergenceError, ValidationError
from .model import ModelSpec
from .solver import (SYSTEM_COMPONENTS, Integrator, StateField, _check_init,
                     _project_dirichlet)

log = logging.getLogger(__name__)

_DIRICHLET_ROWS = {
    "full": ((0, 1), (2, 3)),
    "modified": ((0, 1), (2, 3)),
    "host": ((0,), ()),
    "vector": ((), (0,)),
    "reduced": ((0,), (1,)),
}


@dataclass
class PeriodicOrbit:
    """One period of a periodic solution, snapshots at ``0, dt, ..., T``."""

    times: np.ndarray
    values: np.ndarray  # (m + 1, components, nodes)
    x: np.ndarray
    components: tuple
    dt: float
    residual: float
    periods_used: int
    metadata: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def period(self) -> float:
        return self.times[-1] - self.times[0]

    def snapshot(self, i: int) -> np.ndarray:
        return self.values[i]

    def component(self, name: str) -> np.ndarray:
        return self.values[:, self.components.index(name), :]

    def shifted(self, k: int) -> "PeriodicOrbit":
        """The orbit restarted ``k`` steps later.

        Snapshots past ``T`` are continued as the start snapshots plus the
        recorded closing gap, so the residual is unchanged.
        """
        m = self.steps
        k %= m
        gap = self.values[-1] - self.values[0]
        idx = np.arange(m + 1) + k
        vals = np.where((idx > m)[:, None, None], self.values[idx % m] + gap,
                        self.values[np.minimum(idx, m)])
        return PeriodicOrbit(self.times.copy(), vals, self.x, self.components, self.dt,
                             self.residual, self.periods_used, dict(self.metadata))

    def to_csv(self, path):
        write_orbit_csv(self, path)


def orbit_residual(orbit: PeriodicOrbit) -> float:
    """Sup-norm gap between the snapshots at ``T`` and at ``0``."""
    if orbit.values.shape[0] < 2:
        raise ValidationError("orbit needs at least two snapshots")
    return float(np.max(np.abs(orbit.values[-1] - orbit.values[0])))


def write_orbit_csv(orbit: PeriodicOrbit, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", *orbit.components])
        for k, t in enumerate(orbit.times):
            for i, x in enumerate(orbit.x):
                w.writerow([f"{t:.12g}", f"{x:.12g}",
                            *(f"{v:.12g}" for v in orbit.values[k, :, i])])


def _as_state(system, init):
    if isinstance(init, StateField):
        return init.as_array()
    S = np.array(init, dtype=float)
    ncomp = len(SYSTEM_COMPONENTS[system])
    return S.reshape(ncomp, -1)


def _close_enough(gap: float, last: float, tol: float) -> bool:
    """Stop when the estimated distance to the periodic orbit is below ``tol``.

    For a linearly contracting period map with ratio ``rho`` the remaining
    error after a step of size ``gap`` is about ``gap * rho / (1 - rho)``;
    ``rho`` is estimated from two consecutive gaps.  Gaps far below ``tol``
    are accepted outright since their ratio is roundoff noise.
    """
    if gap < 1e-3 * tol:
        return True
    if not gap < tol or not np.isfinite(last):
        return False
    rho = gap / last
    return rho < 1.0 and gap * rho / (1.0 - rho) < tol


def find_periodic_orbit(system: str, spec: ModelSpec, init, tol: float = 1e-8,
                        max_periods: int = 5000, dt: float | None = None,
                        drivers=None) -> PeriodicOrbit:
    """March whole periods until the state is within ``tol`` of the periodic orbit.

    ``system`` is one of ``full``, ``modified``, ``host``, ``vector`` or
    ``reduced``; the latter needs ``drivers=(H_orbit, V_orbit)`` and takes its
    step size from them.  After convergence one more period is recorded.
    """
    if system not in SYSTEM_COMPONENTS:
        raise ValidationError(f"unknown system {system!r}")
    if not tol > 0:
        raise ValidationError("tol must be positive")
    if int(max_periods) != max_periods or max_periods < 1:
        raise ValidationError("max_periods must be a positive integer")
    S = _as_state(system, init)
    _check_init(S)
    if not np.any(S > 0):
        raise ValidationError("initial data must be positive somewhere")
    arrays = None
    if system == "reduced":
        if drivers is None:
            raise ValidationError("reduced system needs driver orbits")
        H_orbit, V_orbit = drivers
        dt = H_orbit.dt
        arrays = (np.ascontiguousarray(H_orbit.values[:, 0, :]),
                  np.ascontiguousarray(V_orbit.values[:, 0, :]))
    dt = spec.period / 1000.0 if dt is None else float(dt)
    S = S.copy()
    _project_dirichlet(spec, S, *_DIRICHLET_ROWS[system])
    grid = build_grid(spec.length, S.shape[1] - 1)
    integ = Integrator(spec, grid, dt)
    integ.set_initial_sup(system, S)
    m = integ.m
    gap = np.inf
    n = 0
    while n < max_periods:
        prev = S.copy()
        integ.advance(system, S, n * m, m, 0, arrays)
        n += 1
        last, gap = gap, float(np.max(np.abs(S - prev)))
        if _close_enough(gap, last, tol):
            break
    else:
        raise NonConvergenceError(f"{system} orbit did not converge in {max_periods} periods",
                                  residual=gap, iterations=n, kind="orbit")
    start = S.copy()
    saved = integ.advance(system, S, n * m, m, 1, arrays)
    values = np.concatenate([start[None], saved])
    orbit = PeriodicOrbit(np.arange(m + 1) * integ.dt, values, grid.nodes.copy(),
                          SYSTEM_COMPONENTS[system], integ.dt, 0.0, n + 1,
                          {"system": system, "N": grid.n, "dt": integ.dt, "tol": tol})
    orbit.residual = orbit_residual(orbit)
    log.debug("%s orbit converged after %d periods, residual %.3e", system, n, orbit.residual)
    return orbit


def logistic_upper_state(which: str, spec: ModelSpec, n: int) -> np.ndarray:
    """Constant super-solution ``max(a-b)^+ / min c`` (at least 1) on ``n`` intervals."""
    grid = build_grid(spec.length, n)
    c = spec.coeffs
    a, b, cc = (c.a1, c.b1, c.c1) if which == "host" else (c.a2, c.b2, c.c2)
    x = grid.nodes[None, :]
    t = np.linspace(0.0, spec.period, 201)[:, None]
    bound = max(0.0, float(np.max(a(x, t) - b(x, t)))) / float(np.min(cc(x, t)))
    return np.full((1, grid.size), max(bound, 1.0))


def logistic_orbits(spec: ModelSpec, n: int, dt: float, tol: float = 1e-8,
                    max_periods: int = 5000) -> tuple[PeriodicOrbit, PeriodicOrbit]:
    """Host and vector total orbits started from the constant super-solution."""
    out = []
    for which in ("host", "vector"):
        init = logistic_upper_state(which, spec, n)
        out.append(find_periodic_orbit(which, spec, init, tol, max_periods, dt=dt))
    return out[0], out[1]
