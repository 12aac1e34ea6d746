"""Uniform grids and flux-form tridiagonal operators for ``-d/dx(d du/dx) + r u``.

Interior rows use face diffusivities ``d(x_i ± h/2, t)``.  Robin rows come
from ghost-node elimination of ``du/dnu + beta u = 0``, which gives the
half-cell form

    row 0:  (2/h^2) d_{1/2} (u_0 - u_1) + (2/h) d_0 beta_0 u_0

and symmetrically at ``x = L``.  Dirichlet unknowns at the two ends are
removed, so the operator acts on the ``N - 1`` interior nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import AssemblyError, SingularSystemError, ValidationError
from .model import BoundaryCondition, CoefficientField, ModelSpec

CACHE_ROWS = 4000


@dataclass(frozen=True)
class Grid:
    length: float
    n: int

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    @property
    def faces(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    @property
    def size(self) -> int:
        return self.n + 1

    def weights(self) -> np.ndarray:
        """Trapezoid weights; the Robin operator is symmetric in this inner product."""
        w = np.full(self.n + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


def build_grid(length: float, n: int) -> Grid:
    if not length > 0:
        raise ValidationError("grid length must be positive")
    if int(n) != n or n < 4:
        raise ValidationError(f"need N >= 4 intervals, got {n}")
    return Grid(float(length), int(n))


def unknown_range(grid: Grid, bc: BoundaryCondition) -> tuple[int, int]:
    """Half-open node range carrying unknowns."""
    return (1, grid.n) if bc.is_dirichlet else (0, grid.n + 1)


def diffusion_bands(h, d_faces, d_ends, beta_ends, dirichlet: bool):
    """Full-length bands of the diffusion operator.

    Arrays may carry leading (time) axes; the last axis of ``d_faces`` has
    length N and of ``d_ends``/``beta_ends`` length 2.  Dirichlet end rows are
    returned as zeros and must be excluded by the caller.
    """
    d_faces = np.asarray(d_faces, dtype=float)
    shape = d_faces.shape[:-1] + (d_faces.shape[-1] + 1,)
    lower = np.zeros(shape)
    diag = np.zeros(shape)
    upper = np.zeros(shape)
    inv = 1.0 / (h * h)
    left = d_faces[..., :-1] * inv
    right = d_faces[..., 1:] * inv
    lower[..., 1:-1] = -left
    upper[..., 1:-1] = -right
    diag[..., 1:-1] = left + right
    if not dirichlet:
        d_ends = np.asarray(d_ends, dtype=float)
        beta_ends = np.asarray(beta_ends, dtype=float)
        upper[..., 0] = -2.0 * d_faces[..., 0] * inv
        diag[..., 0] = 2.0 * d_faces[..., 0] * inv + 2.0 * d_ends[..., 0] * beta_ends[..., 0] / h
        lower[..., -1] = -2.0 * d_faces[..., -1] * inv
        diag[..., -1] = 2.0 * d_faces[..., -1] * inv + 2.0 * d_ends[..., 1] * beta_ends[..., 1] / h
    return lower, diag, upper


@dataclass(frozen=True)
class TridiagonalOperator:
    """Square tridiagonal matrix stored by bands.

    ``lower[0]`` and ``upper[-1]`` are unused and kept at zero.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def unknown_count(self) -> int:
        return len(self.diag)

    def matvec(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = self.diag * u
        out[1:] += self.lower[1:] * u[:-1]
        out[:-1] += self.upper[:-1] * u[1:]
        return out

    def to_dense(self) -> np.ndarray:
        n = self.unknown_count
        m = np.diag(self.diag)
        m[np.arange(1, n), np.arange(n - 1)] = self.lower[1:]
        m[np.arange(n - 1), np.arange(1, n)] = self.upper[:-1]
        return m

    def shifted(self, dt: float) -> "TridiagonalOperator":
        """Return ``I + dt * self``."""
        return TridiagonalOperator(dt * self.lower, 1.0 + dt * self.diag, dt * self.upper)

    def mmatrix_dt_bound(self) -> float:
        """Largest ``dt`` for which ``I + dt*A`` stays a diagonally dominant M-matrix."""
        off = np.abs(self.lower) + np.abs(self.upper)
        deficit = off - self.diag  # row deficit of diagonal dominance of A
        worst = float(np.max(deficit))
        return np.inf if worst <= 0 else 1.0 / worst


def _sample(value, x, t):
    if isinstance(value, CoefficientField):
        return value(x, t)
    return np.broadcast_to(np.asarray(value, dtype=float), np.shape(x)).copy()


def assemble_operator(grid: Grid, d: CoefficientField, reaction, t: float,
                      bc: BoundaryCondition) -> TridiagonalOperator:
    """Assemble ``A(t) u = -d/dx(d du/dx) + reaction * u`` on the unknowns.

    ``reaction`` may be a field or an array of nodal values.
    """
    faces = d(grid.faces, t)
    ends = d(np.array([0.0, grid.length]), t)
    if np.any(faces <= 0) or np.any(ends <= 0):
        raise AssemblyError("diffusivity must be strictly positive")
    beta = bc.beta(np.array([0.0, grid.length]), t)
    lower, diag, upper = diffusion_bands(grid.h, faces, ends, beta, bc.is_dirichlet)
    r = _sample(reaction, grid.nodes, t)
    diag = diag + r
    lo, hi = unknown_range(grid, bc)
    lower, diag, upper = lower[lo:hi].copy(), diag[lo:hi].copy(), upper[lo:hi].copy()
    lower[0] = 0.0
    upper[-1] = 0.0
    if np.any(lower > 0) or np.any(upper > 0):
        raise AssemblyError("positive off-diagonal entry: operator is not of M-matrix type")
    op = TridiagonalOperator(lower, diag, upper)
    if np.all(r[lo:hi] >= 0) and not np.isinf(op.mmatrix_dt_bound()):
        raise AssemblyError("nonnegative reaction but diagonal dominance lost")
    return op


@njit(cache=True)
def thomas(lower, diag, upper, rhs, out, lo, hi, work):
    """Solve rows ``lo..hi-1``; couplings outside that range are ignored.

    Returns False on a zero pivot.
    """
    piv = diag[lo]
    if piv == 0.0:
        return False
    work[lo] = upper[lo] / piv if hi - lo > 1 else 0.0
    out[lo] = rhs[lo] / piv
    for j in range(lo + 1, hi):
        piv = diag[j] - lower[j] * work[j - 1]
        if piv == 0.0:
            return False
        work[j] = upper[j] / piv if j < hi - 1 else 0.0
        out[j] = (rhs[j] - lower[j] * out[j - 1]) / piv
    for j in range(hi - 2, lo - 1, -1):
        out[j] -= work[j] * out[j + 1]
    return True


def tridiagonal_solve(op: TridiagonalOperator, rhs) -> np.ndarray:
    """Solve ``op @ u = rhs`` by forward elimination and back substitution."""
    rhs = np.ascontiguousarray(rhs, dtype=float)
    n = op.unknown_count
    if rhs.shape != (n,):
        raise ValidationError(f"rhs has shape {rhs.shape}, expected ({n},)")
    out = np.empty(n)
    work = np.empty(n)
    ok = thomas(np.ascontiguousarray(op.lower, dtype=float), np.ascontiguousarray(op.diag, dtype=float),
                np.ascontiguousarray(op.upper, dtype=float), rhs, out, 0, n, work)
    if not ok or not np.all(np.isfinite(out)):
        raise SingularSystemError("zero pivot in tridiagonal elimination")
    return out


def steps_per_period(period: float, dt: float) -> int:
    if not dt > 0:
        raise ValidationError("dt must be positive")
    m = int(round(period / dt))
    if m < 1 or abs(m * dt - period) > 1e-12 * max(1.0, period):
        raise ValidationError(f"dt={dt} does not divide the period {period}")
    return m


@dataclass
class Rows:
    """Coefficient samples for a block of consecutive step end-times.

    Nodal arrays have shape ``(count, N+1)``; band arrays ``(count, N+1)``.
    """

    fields: dict
    host_bands: tuple
    vector_bands: tuple


class PeriodSampler:
    """Samples coefficients at the end-time of every step of one period.

    Row ``k`` holds values at ``t = (k + 1) * dt``, i.e. the data used by the
    step from ``t_k`` to ``t_{k+1}``.  Whole periods are cached when small.
    """

    def __init__(self, spec: ModelSpec, grid: Grid, dt: float):
        self.spec = spec
        self.grid = grid
        self.dt = float(dt)
        self.m = steps_per_period(spec.period, dt)
        self._cache = None
        self.host_range = unknown_range(grid, spec.bc_host)
        self.vector_range = unknown_range(grid, spec.bc_vector)

    def _compute(self, j0: int, count: int) -> Rows:
        return self.rows_at((j0 + 1 + np.arange(count)) * self.dt)

    def rows_at(self, times) -> Rows:
        """Coefficient rows at arbitrary times."""
        g = self.grid
        t = np.asarray(times, dtype=float)[:, None]
        count = t.shape[0]
        x = g.nodes[None, :]
        ends = np.array([0.0, g.length])[None, :]
        coeffs = self.spec.coeffs
        out = {}
        for name, fld in coeffs.fields().items():
            if name in ("d1", "d2"):
                continue
            if fld.is_constant:
                out[name] = np.full((count, g.size), fld.value)
            else:
                out[name] = np.ascontiguousarray(fld(x, t))
        bands = []
        for d, bc in ((coeffs.d1, self.spec.bc_host), (coeffs.d2, self.spec.bc_vector)):
            faces = d(g.faces[None, :], t)
            dend = d(ends, t)
            if np.any(faces <= 0) or np.any(dend <= 0):
                raise AssemblyError("diffusivity must be strictly positive")
            beta = bc.beta(ends, t)
            bands.append(tuple(np.ascontiguousarray(b) for b in
                               diffusion_bands(g.h, faces, dend, beta, bc.is_dirichlet)))
        return Rows(out, bands[0], bands[1])

    def block(self, j0: int, count: int) -> Rows:
        if not (0 <= j0 and j0 + count <= self.m):
            raise ValueError("block must lie within one period")
        if self.m <= CACHE_ROWS:
            if self._cache is None:
                self._cache = self._compute(0, self.m)
            if j0 == 0 and count == self.m:
                return self._cache
            c = self._cache
            sl = slice(j0, j0 + count)
            return Rows({k: v[sl] for k, v in c.fields.items()},
                        tuple(b[sl] for b in c.host_bands),
                        tuple(b[sl] for b in c.vector_bands))
        return self._compute(j0, count)

    def blocks(self, k0: int, nsteps: int, chunk: int = 1000):
        """Yield ``(k, count, rows)`` covering steps ``k0 .. k0+nsteps-1``."""
        k = k0
        end = k0 + nsteps
        while k < end:
            j = k % self.m
            count = min(end - k, self.m - j)
            if self.m > CACHE_ROWS:
                count = min(count, chunk)
            yield k, count, self.block(j, count)
            k += count
