"""Resolution and tolerance settings shared by the numerical modules."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

from .errors import ValidationError


@dataclass(frozen=True)
class Numerics:
    """Discretization and iteration controls.

    ``dt=None`` means ``period / 1000``.  ``richardson`` combines threshold
    quantities computed at ``dt`` and ``dt/2`` as ``2*fine - coarse``.
    """

    N: int = 200
    dt: float | None = None
    orbit_tol: float = 1e-8
    max_periods: int = 5000
    eig_tol: float = 1e-10
    eig_field_tol: float = 1e-8
    max_iter: int = 10000
    root_rtol: float = 1e-9
    richardson: bool = True

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4:
            raise ValidationError(f"N must be an integer >= 4, got {self.N}")
        if self.dt is not None and not self.dt > 0:
            raise ValidationError("dt must be positive")
        for name in ("orbit_tol", "eig_tol", "eig_field_tol", "root_rtol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.max_periods < 1 or self.max_iter < 1:
            raise ValidationError("iteration caps must be positive")

    def step(self, period: float) -> float:
        dt = period / 1000.0 if self.dt is None else float(self.dt)
        m = round(period / dt)
        if m < 1 or abs(m * dt - period) > 1e-12 * max(1.0, period):
            raise ValidationError(f"dt={dt} does not divide the period {period}")
        return dt

    def refined(self, space: int = 1, time: int = 2, period: float = 1.0) -> "Numerics":
        return replace(self, N=self.N * space, dt=self.step(period) / time)

    def as_dict(self) -> dict:
        return asdict(self)
