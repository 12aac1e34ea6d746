"""IMEX time stepping of the nonlinear systems.

All sink terms are implicit with coefficients frozen at the previous state;
source terms are explicit.  The infection transfer ``l1*Hu*Vi`` enters the
``Hi`` equation with the freshly solved ``Hu`` so that ``Hu + Hi`` obeys the
logistic step exactly (same for the vector pair).  Every implicit matrix is
an M-matrix for any ``dt > 0``, so nonnegativity holds without a step-size
restriction; small negatives are reported, never clipped.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .discretization import Grid, PeriodSampler, build_grid
from .errors import (BoundednessError, PositivityError, SimulationError,
                     UnsupportedConfigurationError, ValidationError)
from .model import ModelSpec, compile_expression

NEG_TOL = -1e-12
EPS_DEN = 1e-12
FULL_COMPONENTS = ("hu", "hi", "vu", "vi")
SYSTEM_COMPONENTS = {
    "full": FULL_COMPONENTS,
    "modified": FULL_COMPONENTS,
    "host": ("H",),
    "vector": ("V",),
    "reduced": ("hi", "vi"),
}


@dataclass
class StateField:
    hu: np.ndarray
    hi: np.ndarray
    vu: np.ndarray
    vi: np.ndarray
    t: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.hu, self.hi, self.vu, self.vi], dtype=float)

    @classmethod
    def from_array(cls, arr, t: float = 0.0) -> "StateField":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[0].copy(), arr[1].copy(), arr[2].copy(), arr[3].copy(), float(t))

    @classmethod
    def constant(cls, grid: Grid, hu, hi, vu, vi, t: float = 0.0) -> "StateField":
        n = grid.size
        return cls(*(np.full(n, float(v)) for v in (hu, hi, vu, vi)), t=t)

    @classmethod
    def from_expressions(cls, grid: Grid, exprs: Sequence, t: float = 0.0) -> "StateField":
        """Profiles given as numbers or grammar expressions in ``x``."""
        if len(exprs) != 4:
            raise ValidationError("need four initial profiles (hu, hi, vu, vi)")
        arrs = []
        for e in exprs:
            if isinstance(e, (int, float)):
                arrs.append(np.full(grid.size, float(e)))
            else:
                f = compile_expression(e, ("x",))
                arrs.append(np.broadcast_to(np.asarray(f(grid.nodes), float), (grid.size,)).copy())
        return cls(*arrs, t=t)

    @property
    def n(self) -> int:
        return len(self.hu) - 1


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray  # (snapshots, components, nodes)
    x: np.ndarray
    components: tuple
    dt: float
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> StateField:
        if self.components != FULL_COMPONENTS:
            raise ValueError("state() needs a four-component trajectory")
        return StateField.from_array(self.values[i], self.times[i])

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def component(self, name: str) -> np.ndarray:
        return self.values[:, self.components.index(name), :]

    def spatial_average(self) -> np.ndarray:
        """Trapezoid-rule averages, shape ``(snapshots, components)``."""
        w = np.full(len(self.x), 1.0)
        w[0] = w[-1] = 0.5
        w /= w.sum()
        return self.values @ w

    def to_csv(self, path, layout: str = "long"):
        write_trajectory_csv(self, path, layout)


def write_trajectory_csv(traj: Trajectory, path, layout: str = "long"):
    """Long format ``t, x, <components>`` or averages ``t, <component>_avg``.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(traj, path, layout)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(traj, fh, layout)


def _write_rows(traj, fh, layout):
    w = csv.writer(fh, lineterminator="\n")
    if layout == "long":
        w.writerow(["t", "x", *traj.components])
        for k, t in enumerate(traj.times):
            for i, x in enumerate(traj.x):
                w.writerow([f"{t:.12g}", f"{x:.12g}",
                            *(f"{v:.12g}" for v in traj.values[k, :, i])])
    elif layout == "average":
        avg = traj.spatial_average()
        w.writerow(["t", *(f"{c}_avg" for c in traj.components)])
        for k, t in enumerate(traj.times):
            w.writerow([f"{t:.12g}", *(f"{v:.12g}" for v in avg[k])])
    else:
        raise ValueError(f"unknown layout {layout!r}")


def read_trajectory_csv(path) -> dict:
    """Read either CSV layout back into column arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


# -- stepping engine ----------------------------------------------------------

class Integrator:
    """Advances one of the nonlinear systems on a fixed grid and step size.

    Coefficients are tabulated per step through a :class:`PeriodSampler`, so
    ``dt`` must divide the period and runs start on the ``dt`` lattice.
    """

    def __init__(self, spec: ModelSpec, grid: Grid, dt: float, neg_tol: float = NEG_TOL):
        self.spec = spec
        self.grid = grid
        self.sampler = PeriodSampler(spec, grid, dt)
        self.dt = self.sampler.dt
        self.m = self.sampler.m
        self.neg_tol = neg_tol
        self._bounds = None

    def step_index(self, t: float) -> int:
        k = round(t / self.dt)
        if abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValidationError(f"start time {t} is not on the dt lattice")
        return int(k)

    def logistic_bounds(self) -> tuple[float, float]:
        """``max(a-b)/min(c)`` for host and vector, sampled over a period."""
        if self._bounds is None:
            c = self.spec.coeffs
            x = self.grid.nodes[None, :]
            t = np.linspace(0.0, self.spec.period, 201)[:, None]
            out = []
            for a, b, cc in ((c.a1, c.b1, c.c1), (c.a2, c.b2, c.c2)):
                out.append(max(0.0, float(np.max(a(x, t) - b(x, t)))) / float(np.min(cc(x, t))))
            self._bounds = tuple(out)
        return self._bounds

    def advance(self, system: str, S: np.ndarray, k0: int, nsteps: int,
                save_every: int = 0, drivers=None) -> np.ndarray | None:
        """Advance ``S`` (components x nodes) in place from step ``k0``.

        Returns the snapshots taken every ``save_every`` steps after ``k0``,
        or ``None`` when ``save_every`` is 0.
        """
        if system not in SYSTEM_COMPONENTS:
            raise ValueError(f"unknown system {system!r}")
        ncomp = len(SYSTEM_COMPONENTS[system])
        if S.shape != (ncomp, self.grid.size):
            raise ValueError(f"state shape {S.shape} does not match system {system!r}")
        if system == "modified":
            if self.spec.bc_host.is_dirichlet or self.spec.bc_vector.is_dirichlet:
                raise UnsupportedConfigurationError(
                    "the standard-incidence model is only defined with alpha = 1 boundaries")
        if system == "reduced" and drivers is None:
            raise ValueError("reduced system needs driver orbits")
        saves = []
        lo1, hi1 = self.sampler.host_range
        lo2, hi2 = self.sampler.vector_range
        for k, count, rows in self.sampler.blocks(k0, nsteps):
            nsave = 0
            first = 0
            if save_every > 0:
                first = (-(k - k0 + 1)) % save_every  # first local r with (k-k0+r+1) % every == 0
                nsave = 0 if first >= count else (count - 1 - first) // save_every + 1
            saved = np.empty((max(nsave, 1), ncomp, self.grid.size))
            status = self._dispatch(system, S, count, rows, k, k - k0, save_every, saved,
                                    drivers, lo1, hi1, lo2, hi2)
            code, r, comp, node, value = status
            if code == K.NEGATIVE:
                name = SYSTEM_COMPONENTS[system][comp]
                raise PositivityError(name, node, (k + r + 1) * self.dt, value)
            if code == K.SINGULAR:
                raise SimulationError(f"zero pivot at step {k + r}")
            if nsave:
                saves.append(saved[:nsave])
            self._check_bounds(system, S, saves[-1] if nsave else None, k + count)
        if save_every > 0:
            if saves:
                return np.concatenate(saves)
            return np.empty((0, ncomp, self.grid.size))
        return None

    def _dispatch(self, system, S, count, rows, k, phase, every, saved, drivers,
                  lo1, hi1, lo2, hi2):
        # kernels save after local step r when (phase + r + 1) % every == 0
        f, hb, vb = rows.fields, rows.host_bands, rows.vector_bands
        dt = self.dt
        if system == "full":
            return K.full_block(S, count, dt, f["a1"], f["b1"], f["c1"], f["l1"],
                                f["a2"], f["b2"], f["c2"], f["l2"], *hb, *vb,
                                lo1, hi1, lo2, hi2, every, phase, saved, self.neg_tol)
        if system == "modified":
            g = f.get("gamma")
            if g is None:
                g = np.zeros_like(f["a1"])
            return K.modified_block(S, count, dt, f["a1"], f["b1"], f["c1"], f["l1"],
                                    f["a2"], f["b2"], f["c2"], f["l2"], g, *hb, *vb,
                                    every, phase, saved, self.neg_tol, EPS_DEN)
        if system == "host":
            return K.logistic_block(S, count, dt, f["a1"], f["b1"], f["c1"], *hb, lo1, hi1,
                                    every, phase, saved, self.neg_tol)
        if system == "vector":
            return K.logistic_block(S, count, dt, f["a2"], f["b2"], f["c2"], *vb, lo2, hi2,
                                    every, phase, saved, self.neg_tol)
        Hd, Vd = drivers
        j = k % self.m
        return K.reduced_block(S, count, dt, f["b1"], f["c1"], f["l1"], f["b2"], f["c2"],
                               f["l2"], Hd[j:j + count + 1], Vd[j:j + count + 1], *hb, *vb,
                               lo1, hi1, lo2, hi2, every, phase, saved, self.neg_tol)

    def _check_bounds(self, system, S, saved, k):
        if system == "reduced":
            return
        bh, bv = self.logistic_bounds()
        if system in ("full", "modified"):
            tot = np.array([S[0] + S[1], S[2] + S[3]])
            limits = [bh, bv]
        elif system == "host":
            tot, limits = S[:1], [bh]
        else:
            tot, limits = S[:1], [bv]
        for i, lim in enumerate(limits):
            cap = max(self._init_sup[i] if self._init_sup else 0.0, lim) + 1.0
            peak = float(np.max(tot[i]))
            if saved is not None and saved.size:
                if system in ("full", "modified"):
                    peak = max(peak, float(np.max(saved[:, 2 * i] + saved[:, 2 * i + 1])))
                else:
                    peak = max(peak, float(np.max(saved[:, 0])))
            if peak > cap:
                raise BoundednessError(
                    f"total exceeded the a-priori bound {cap:.6g} (got {peak:.6g}) by t={k * self.dt:.6g}")

    _init_sup = None

    def set_initial_sup(self, system: str, S: np.ndarray):
        if system in ("full", "modified"):
            self._init_sup = (float(np.max(S[0] + S[1])), float(np.max(S[2] + S[3])))
        elif system in ("host", "vector"):
            self._init_sup = (float(np.max(S[0])),)
        else:
            self._init_sup = None


# -- public operations ----------------------------------------------------------

def _grid_for(spec: ModelSpec, n_nodes: int) -> Grid:
    return build_grid(spec.length, n_nodes - 1)


def _project_dirichlet(spec: ModelSpec, S: np.ndarray, host_rows, vector_rows):
    fixed = False
    for bc, rows in ((spec.bc_host, host_rows), (spec.bc_vector, vector_rows)):
        if bc.is_dirichlet:
            for r in rows:
                if S[r, 0] != 0.0 or S[r, -1] != 0.0:
                    fixed = True
                    S[r, 0] = S[r, -1] = 0.0
    if fixed:
        warnings.warn("initial data projected to zero at Dirichlet boundary nodes", stacklevel=3)


def _check_init(S: np.ndarray):
    if not np.all(np.isfinite(S)):
        raise ValidationError("initial data must be finite")
    if np.any(S < 0):
        raise ValidationError("initial data must be nonnegative")


def _nsteps(t_end: float, dt: float) -> int:
    if not t_end > 0:
        raise ValidationError("t_end must be positive")
    n = round(t_end / dt)
    if n < 1 or abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValidationError(f"t_end={t_end} is not a multiple of dt={dt}")
    return int(n)


def _trajectory(S0, saved, t0, dt, save_every, grid, components, meta):
    values = np.concatenate([S0[None], saved])
    times = t0 + dt * save_every * np.arange(len(values))
    return Trajectory(times, values, grid.nodes.copy(), components, dt, meta)


def step_full(state: StateField, spec: ModelSpec, dt: float) -> StateField:
    """One IMEX step of the bilinear four-component model from ``state.t``."""
    if not dt > 0:
        raise ValidationError("dt must be positive")
    S = state.as_array()
    _check_init(S)
    grid = _grid_for(spec, S.shape[1])
    sampler = PeriodSampler.__new__(PeriodSampler)
    PeriodSampler.__init__(sampler, spec, grid, spec.period / max(1, round(spec.period / dt)))
    rows = sampler.rows_at([state.t + dt])
    lo1, hi1 = sampler.host_range
    lo2, hi2 = sampler.vector_range
    f = rows.fields
    saved = np.empty((1, 4, grid.size))
    code, r, comp, node, value = K.full_block(
        S, 1, float(dt), f["a1"], f["b1"], f["c1"], f["l1"], f["a2"], f["b2"], f["c2"], f["l2"],
        *rows.host_bands, *rows.vector_bands, lo1, hi1, lo2, hi2, 0, 0, saved, NEG_TOL)
    if code == K.NEGATIVE:
        raise PositivityError(FULL_COMPONENTS[comp], node, state.t + dt, value)
    if code == K.SINGULAR:
        raise SimulationError("zero pivot")
    return StateField.from_array(S, state.t + dt)


def _run_system(system, spec, S, t0, t_end, dt, save_every, drivers=None, integrator=None):
    dt = float(dt) if dt is not None else spec.period / 1000.0
    nsteps = _nsteps(t_end, dt)
    grid = _grid_for(spec, S.shape[1])
    integ = integrator or Integrator(spec, grid, dt)
    integ.set_initial_sup(system, S)
    k0 = integ.step_index(t0)
    S0 = S.copy()
    saved = integ.advance(system, S, k0, nsteps, save_every, drivers)
    meta = {"system": system, "N": grid.n, "dt": integ.dt, "scheme": "imex-lagged",
            "t_start": t0, "t_end": t0 + nsteps * integ.dt}
    if save_every <= 0:
        return Trajectory(np.array([t0, t0 + nsteps * integ.dt]), np.array([S0, S]),
                          grid.nodes.copy(), SYSTEM_COMPONENTS[system], integ.dt, meta)
    return _trajectory(S0, saved, t0, integ.dt, save_every, grid, SYSTEM_COMPONENTS[system], meta)


def simulate_full(spec: ModelSpec, init: StateField, t_end: float, dt: float | None = None,
                  save_every: int = 1) -> Trajectory:
    """Integrate the bilinear model over ``[init.t, init.t + t_end]``.

    ``save_every=0`` keeps only the first and last states.
    """
    S = init.as_array()
    _check_init(S)
    _project_dirichlet(spec, S, (0, 1), (2, 3))
    return _run_system("full", spec, S, init.t, t_end, dt, save_every)


def simulate_logistic(which: str, spec: ModelSpec, init, t_end: float, dt: float | None = None,
                      save_every: int = 1, t0: float = 0.0) -> Trajectory:
    """Integrate the host (``which='host'``) or vector total alone."""
    if which not in ("host", "vector"):
        raise ValidationError("which must be 'host' or 'vector'")
    S = np.array(init, dtype=float).reshape(1, -1)
    _check_init(S)
    if which == "host":
        _project_dirichlet(spec, S, (0,), ())
    else:
        _project_dirichlet(spec, S, (), (0,))
    return _run_system(which, spec, S, t0, t_end, dt, save_every)


def simulate_reduced(spec: ModelSpec, H_orbit, V_orbit, init, t_end: float,
                     save_every: int = 1, t0: float = 0.0) -> Trajectory:
    """Infection pair ``(Hi, Vi)`` driven by periodic host and vector totals.

    ``H_orbit`` and ``V_orbit`` are :class:`~vectorhost.periodic.PeriodicOrbit`
    objects of the logistic systems; they fix the grid and the step size.
    """
    Hd = np.ascontiguousarray(H_orbit.values[:, 0, :])
    Vd = np.ascontiguousarray(V_orbit.values[:, 0, :])
    dt = H_orbit.dt
    if abs(V_orbit.dt - dt) > 1e-15 or Hd.shape != Vd.shape:
        raise ValidationError("host and vector orbits must share grid and dt")
    S = np.array(init, dtype=float).reshape(2, -1)
    _check_init(S)
    if S.shape[1] != Hd.shape[1]:
        raise ValidationError("initial data and orbits live on different grids")
    m = Hd.shape[0] - 1
    j = round(t0 / dt) % m
    if np.any(S[0] > Hd[j] + 1e-12) or np.any(S[1] > Vd[j] + 1e-12):
        raise ValidationError("initial infection exceeds the host or vector total")
    _project_dirichlet(spec, S, (0,), (1,))
    return _run_system("reduced", spec, S, t0, t_end, dt, save_every, drivers=(Hd, Vd))


def simulate_modified(spec: ModelSpec, init: StateField, t_end: float, dt: float | None = None,
                      save_every: int = 1) -> Trajectory:
    """Standard-incidence model with host recovery ``gamma`` (zero if absent)."""
    if spec.bc_host.is_dirichlet or spec.bc_vector.is_dirichlet:
        raise UnsupportedConfigurationError(
            "the standard-incidence model requires alpha = 1 on both populations")
    S = init.as_array()
    _check_init(S)
    if np.any(S[0] + S[1] <= 0):
        raise ValidationError("host total must be positive everywhere")
    return _run_system("modified", spec, S, init.t, t_end, dt, save_every)
