"""Principal eigenvalues of the linear periodic problems and reproduction numbers.

Every eigenvalue comes from power iteration on the discrete period map: the
linear problem is marched over one period with the same IMEX splitting as
the nonlinear solver (decay implicit, coupling explicit), and the dominant
radius ``r`` of that map gives the eigenvalue ``-log(r)/T``.  Reproduction
numbers are the roots ``mu`` of ``mu -> eigenvalue(coupling / mu) = 0``.
"""

from __future__ import annotations

import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .discretization import PeriodSampler, build_grid
from .errors import (NonConvergenceError, RootNotBracketedError, SimulationError,
                     ValidationError, VectorHostError)
from .model import ModelSpec
from .numerics import Numerics
from .periodic import PeriodicOrbit, logistic_orbits

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MU_MIN, MU_MAX = 1e-6, 1e6


def _component(j) -> int:
    if j in (1, "1", "host", "H"):
        return 1
    if j in (2, "2", "vector", "V"):
        return 2
    raise ValidationError(f"component must be host or vector, got {j!r}")


@dataclass
class LinearPeriodicProblem:
    """Discrete one- or two-component cooperative periodic problem.

    Row ``r`` of every table holds the data of the step from ``t_r`` to
    ``t_{r+1}``.  For two components ``coupling[0]`` feeds component 2 into
    component 1 and ``coupling[1]`` the reverse.
    """

    period: float
    dt: float
    x: np.ndarray
    bands: list
    decay: list
    coupling: list
    ranges: list

    def __post_init__(self):
        for c in self.coupling:
            if np.any(c < 0):
                raise ValidationError("coupling fields must be nonnegative (cooperative system)")
        for d in self.decay:
            if np.any(d < 0):
                raise ValidationError("decay fields must be nonnegative")

    @property
    def ncomp(self) -> int:
        return len(self.decay)

    @property
    def steps(self) -> int:
        return self.decay[0].shape[0]

    def start_vector(self) -> np.ndarray:
        u = np.zeros((self.ncomp, len(self.x)))
        for i, (lo, hi) in enumerate(self.ranges):
            u[i, lo:hi] = 1.0
        return u

    def apply(self, u: np.ndarray, mu: float = 1.0) -> float:
        """Advance ``u`` one period in place; returns the log of the divided-out scale."""
        inv = 0.0 if math.isinf(mu) else 1.0 / mu
        if self.ncomp == 1:
            low, dia, up = self.bands[0]
            lo, hi = self.ranges[0]
            s = K.scalar_linear_period(u[0], self.dt, self.decay[0], self.coupling[0], inv,
                                       low, dia, up, lo, hi)
        else:
            (l1, d1, u1), (l2, d2, u2) = self.bands
            (lo1, hi1), (lo2, hi2) = self.ranges
            s = K.pair_linear_period(u[0], u[1], self.dt, self.decay[0], self.decay[1],
                                     self.coupling[0], self.coupling[1], inv,
                                     l1, d1, u1, l2, d2, u2, lo1, hi1, lo2, hi2)
        if not np.isfinite(s):
            raise SimulationError("zero pivot in the linear period map")
        return s


def _sampler(spec: ModelSpec, n: int, dt: float) -> PeriodSampler:
    return PeriodSampler(spec, build_grid(spec.length, n), dt)


def scalar_problem(j, spec: ModelSpec, n: int, dt: float) -> LinearPeriodicProblem:
    """``phi_t - (d phi_x)_x + b phi - a phi / mu`` for host (1) or vector (2)."""
    j = _component(j)
    s = _sampler(spec, n, dt)
    rows = s.block(0, s.m)
    f = rows.fields
    if j == 1:
        return LinearPeriodicProblem(spec.period, s.dt, s.grid.nodes, [rows.host_bands],
                                     [f["b1"]], [f["a1"]], [s.host_range])
    return LinearPeriodicProblem(spec.period, s.dt, s.grid.nodes, [rows.vector_bands],
                                 [f["b2"]], [f["a2"]], [s.vector_range])


def coupled_problem(spec: ModelSpec, H_orbit: PeriodicOrbit,
                    V_orbit: PeriodicOrbit) -> LinearPeriodicProblem:
    """Linearisation of the infection pair at the disease-free orbit ``(H, V)``.

    Decay uses the totals at the start of each step and the coupling the
    totals at its end, which is exactly the linearisation of the nonlinear
    IMEX step.
    """
    if abs(H_orbit.dt - V_orbit.dt) > 1e-15 or H_orbit.values.shape != V_orbit.values.shape:
        raise ValidationError("host and vector orbits must share grid and step size")
    H = H_orbit.values[:, 0, :]
    V = V_orbit.values[:, 0, :]
    if np.any(H < 0) or np.any(V < 0):
        raise ValidationError("orbits must be nonnegative")
    s = _sampler(spec, H.shape[1] - 1, H_orbit.dt)
    if s.m != H.shape[0] - 1:
        raise ValidationError("orbit does not span one period")
    rows = s.block(0, s.m)
    f = rows.fields
    decay1 = np.ascontiguousarray(f["b1"] + f["c1"] * H[:-1])
    decay2 = np.ascontiguousarray(f["b2"] + f["c2"] * V[:-1])
    coup1 = np.ascontiguousarray(f["l1"] * H[1:])
    coup2 = np.ascontiguousarray(f["l2"] * V[1:])
    return LinearPeriodicProblem(spec.period, s.dt, s.grid.nodes,
                                 [rows.host_bands, rows.vector_bands],
                                 [decay1, decay2], [coup1, coup2],
                                 [s.host_range, s.vector_range])


def poincare_step(problem: LinearPeriodicProblem, v, mu: float = 1.0) -> np.ndarray:
    """Image of ``v`` under the discrete period map (``v`` is not modified)."""
    u = np.array(v, dtype=float).reshape(problem.ncomp, -1)
    if not np.all(np.isfinite(u)):
        raise ValidationError("input must be finite")
    s = problem.apply(u, mu)
    out = u * math.exp(s) if s else u
    return out.reshape(np.shape(v))


@dataclass
class SpectralResult:
    eigenvalue: float
    eigenfunction: np.ndarray  # (components, nodes) at t = 0, sup-normalised
    spectral_radius: float
    iterations: int
    converged: bool
    residual: float = float("nan")
    mu: float = 1.0
    period: float = 1.0

    @property
    def log_radius(self) -> float:
        return -self.eigenvalue * self.period


def power_iteration(problem: LinearPeriodicProblem, mu: float = 1.0, start=None,
                    tol: float = 1e-10, field_tol: float = 1e-8,
                    max_iter: int = 10000, strict: bool = True) -> SpectralResult:
    """Dominant eigenpair of the period map by sup-normalised power iteration."""
    if not (mu > 0):
        raise ValidationError("mu must be positive")
    u = problem.start_vector() if start is None else np.array(start, dtype=float)
    if u.shape != (problem.ncomp, len(problem.x)) or not np.any(u > 0):
        raise ValidationError("start vector must be a positive field of the right shape")
    u /= np.max(np.abs(u))
    log_r = None
    converged = False
    it = 0
    change = np.inf
    while it < max_iter:
        prev = u.copy()
        s = problem.apply(u, mu)
        m = float(np.max(np.abs(u)))
        if m == 0.0:
            raise SimulationError("period map annihilated the start vector")
        u /= m
        new_log = s + math.log(m)
        it += 1
        change = float(np.max(np.abs(u - prev)))
        if log_r is not None:
            # relative change of r itself
            if abs(math.expm1(new_log - log_r)) < tol and change < field_tol:
                log_r = new_log
                converged = True
                break
        log_r = new_log
    if not converged and strict:
        raise NonConvergenceError("power iteration did not converge", residual=change,
                                  iterations=it, kind="eigen")
    check = u.copy()
    s = problem.apply(check, mu)
    resid = float(np.max(np.abs(check * math.exp(s - log_r) - u)))
    lam = -log_r / problem.period
    radius = math.exp(log_r) if log_r < 700 else math.inf
    return SpectralResult(lam, u, radius, it, converged, resid, mu, problem.period)


def _numerics(numerics):
    return numerics if numerics is not None else Numerics()


def principal_eigenvalue_scalar(j, spec: ModelSpec, numerics: Numerics | None = None,
                                mu: float = 1.0, start=None) -> SpectralResult:
    """Principal eigenvalue ``zeta_j`` of ``phi_t - (d_j phi_x)_x + (b_j - a_j) phi``."""
    num = _numerics(numerics)
    prob = scalar_problem(j, spec, num.N, num.step(spec.period))
    return power_iteration(prob, mu, start, num.eig_tol, num.eig_field_tol, num.max_iter)


def principal_eigenvalue_coupled(spec: ModelSpec, H_orbit, V_orbit, mu: float = 1.0,
                                 numerics: Numerics | None = None, start=None) -> SpectralResult:
    """Principal eigenvalue of the infection pair linearised at ``(H, V)``."""
    num = _numerics(numerics)
    prob = coupled_problem(spec, H_orbit, V_orbit)
    return power_iteration(prob, mu, start, num.eig_tol, num.eig_field_tol, num.max_iter)


@dataclass
class R0Result:
    value: float
    lambda_at_one: float
    bracket: tuple
    evaluations: int
    sign_consistent: bool = True
    eigen: SpectralResult | None = None


def _mu_root(problem: LinearPeriodicProblem, num: Numerics) -> R0Result:
    """Root of the increasing map ``mu -> eigenvalue(mu)``."""
    cache = {}
    state = {"start": None, "evals": 0}

    def lam(mu):
        if mu in cache:
            return cache[mu]
        res = power_iteration(problem, mu, state["start"], num.eig_tol, num.eig_field_tol,
                              num.max_iter)
        state["start"] = res.eigenfunction
        state["evals"] += 1
        cache[mu] = res.eigenvalue
        return res.eigenvalue

    first = power_iteration(problem, 1.0, None, num.eig_tol, num.eig_field_tol, num.max_iter)
    state["start"] = first.eigenfunction
    state["evals"] = 1
    cache[1.0] = lam1 = first.eigenvalue
    if lam1 == 0.0:
        return R0Result(1.0, lam1, (1.0, 1.0), 1, True, first)
    lo = hi = 1.0
    if lam1 < 0:
        while lam(hi) < 0:
            lo = hi
            hi *= 2.0
            if hi > MU_MAX:
                raise RootNotBracketedError(
                    f"eigenvalue still negative at mu={MU_MAX:g}; reproduction number too large")
    else:
        while lam(lo) > 0:
            hi = lo
            lo /= 2.0
            if lo < MU_MIN:
                raise RootNotBracketedError(
                    f"eigenvalue still positive at mu={MU_MIN:g}; reproduction number too small")
    if lam(lo) == 0.0:
        root = lo
    elif lam(hi) == 0.0:
        root = hi
    else:
        root = brentq(lam, lo, hi, rtol=num.root_rtol, xtol=1e-300)
    ok = (root > 1) == (lam1 < 0) or abs(root - 1) <= 10 * num.root_rtol
    if not ok:
        warnings.warn(f"sign mismatch: R0={root:.9g} but eigenvalue at mu=1 is {lam1:.3e}")
    return R0Result(float(root), float(lam1), (lo, hi), state["evals"], ok, first)


def basic_reproduction_scalar(j, spec: ModelSpec, numerics: Numerics | None = None) -> R0Result:
    """``R0_j``: the ``mu`` at which ``phi_t - (d_j phi_x)_x + b_j phi - a_j phi/mu`` is neutral."""
    num = _numerics(numerics)
    prob = scalar_problem(j, spec, num.N, num.step(spec.period))
    b = prob.decay[0]
    if not np.any(b > 0):
        raise ValidationError("death rate must be positive somewhere")
    return _mu_root(prob, num)


def basic_reproduction_coupled(spec: ModelSpec, H_orbit, V_orbit,
                               numerics: Numerics | None = None) -> R0Result:
    """``R0`` as the coupling scale that makes the linearised infection pair neutral."""
    num = _numerics(numerics)
    H = H_orbit.values[:, 0, :]
    V = V_orbit.values[:, 0, :]
    lo1, hi1 = _sampler(spec, H.shape[1] - 1, H_orbit.dt).host_range
    lo2, hi2 = _sampler(spec, V.shape[1] - 1, V_orbit.dt).vector_range
    if np.any(H[:, lo1:hi1] <= 0) or np.any(V[:, lo2:hi2] <= 0):
        raise ValidationError("host and vector orbits must be positive")
    prob = coupled_problem(spec, H_orbit, V_orbit)
    return _mu_root(prob, num)


# -- threshold summary -------------------------------------------------------

QUANTITIES = ("zeta1", "zeta2", "R01", "R02", "lambda", "R0")


@dataclass
class ThresholdReport:
    zeta1: float
    zeta2: float
    R01: float
    R02: float
    lam: float | None
    R0: float | None
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)

    def value(self, name: str):
        return self.lam if name == "lambda" else getattr(self, name)

    def to_dict(self) -> dict:
        return {"zeta1": self.zeta1, "zeta2": self.zeta2, "R01": self.R01, "R02": self.R02,
                "lambda": self.lam, "R0": self.R0, "status": self.status,
                "diagnostics": self.diagnostics, "schema_version": SCHEMA_VERSION}

    def to_json(self, **kw) -> str:
        return json.dumps(_clean(self.to_dict()), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdReport":
        return cls(d["zeta1"], d["zeta2"], d["R01"], d["R02"], d["lambda"], d["R0"],
                   d.get("status", "ok"), d.get("diagnostics", {}))


def _clean(obj):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _raw_quantities(spec: ModelSpec, num: Numerics, dt: float) -> dict:
    local = Numerics(**{**num.as_dict(), "dt": dt, "richardson": False})
    out = {"dt": dt}
    # the mu = 1 evaluation inside each root search is the principal eigenvalue itself
    r1 = basic_reproduction_scalar(1, spec, local)
    r2 = basic_reproduction_scalar(2, spec, local)
    out.update(zeta1=r1.lambda_at_one, zeta2=r2.lambda_at_one, R01=r1.value, R02=r2.value,
               eig_iterations=[r1.eigen.iterations, r2.eigen.iterations],
               root_evaluations=[r1.evaluations, r2.evaluations])
    if r1.value > 1 and r2.value > 1:
        H, V = logistic_orbits(spec, num.N, dt, num.orbit_tol, num.max_periods)
        r0 = basic_reproduction_coupled(spec, H, V, local)
        out.update({"lambda": r0.lambda_at_one, "R0": r0.value,
                    "eigen_residual": r0.eigen.residual, "sign_consistent": r0.sign_consistent,
                    "orbit_periods": [H.periods_used, V.periods_used],
                    "orbit_residual": [H.residual, V.residual]})
        out["root_evaluations"].append(r0.evaluations)
    else:
        out.update({"lambda": None, "R0": None})
    return out


def threshold_quantities(spec: ModelSpec, numerics: Numerics | None = None) -> ThresholdReport:
    """All threshold quantities for one model.

    With ``numerics.richardson`` the computation runs at ``dt`` and ``dt/2``
    and each quantity is reported as ``2*fine - coarse``, cancelling the
    first-order time error of the IMEX period maps.  ``lambda`` and ``R0``
    need positive host and vector orbits and are ``None`` when
    ``R01 <= 1`` or ``R02 <= 1``.
    """
    num = _numerics(numerics)
    dt = num.step(spec.period)
    t0 = time.perf_counter()
    coarse = _raw_quantities(spec, num, dt)
    diag = {"N": num.N, "dt": dt, "richardson": num.richardson, "coarse": coarse}
    if num.richardson:
        fine = _raw_quantities(spec, num, dt / 2)
        diag["fine"] = fine
        vals = {}
        for q in QUANTITIES:
            c, f = coarse[q], fine[q]
            vals[q] = None if c is None or f is None else 2.0 * f - c
            if c is not None and f is not None:
                diag.setdefault("richardson_gap", {})[q] = abs(f - c)
    else:
        vals = {q: coarse[q] for q in QUANTITIES}
    status = "ok" if vals["R0"] is not None else "subcritical"
    diag["seconds"] = time.perf_counter() - t0
    return ThresholdReport(vals["zeta1"], vals["zeta2"], vals["R01"], vals["R02"],
                           vals["lambda"], vals["R0"], status, diag)


def read_threshold_json(path) -> ThresholdReport:
    with open(path) as fh:
        d = json.load(fh)
    if d.get("schema_version") != SCHEMA_VERSION:
        raise VectorHostError(f"unsupported schema version {d.get('schema_version')!r}")
    return ThresholdReport.from_dict(d)
