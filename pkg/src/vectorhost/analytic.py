"""Closed forms for constant coefficients with Neumann boundaries.

With constant coefficients the totals settle at ``H = (a1-b1)/c1`` and
``V = (a2-b2)/c2`` and every threshold quantity is explicit.  These are the
ground truth for the numerical modules.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import AnalyticDomainError, ValidationError

PARAM_ORDER = ("a1", "b1", "c1", "l1", "a2", "b2", "c2", "l2")


class Regime(str, enum.Enum):
    ENDEMIC = "ENDEMIC"
    DISEASE_FREE = "DISEASE_FREE"
    HOST_EXTINCT = "HOST_EXTINCT"
    VECTOR_EXTINCT = "VECTOR_EXTINCT"
    ALL_EXTINCT = "ALL_EXTINCT"


@dataclass(frozen=True)
class ConstantParams:
    a1: float
    b1: float
    c1: float
    l1: float
    a2: float
    b2: float
    c2: float
    l2: float
    gamma: float | None = None

    def __post_init__(self):
        for name in PARAM_ORDER:
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError(f"{name} must be a finite number")
        for name in ("a1", "a2", "c1", "c2"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("b1", "b2", "l1", "l2"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")
        if self.gamma is not None and self.gamma < 0:
            raise ValidationError("gamma must be nonnegative")

    @classmethod
    def from_values(cls, values: Mapping[str, float] | Sequence[float]) -> "ConstantParams":
        if isinstance(values, Mapping):
            return cls(**{k: float(values[k]) for k in PARAM_ORDER},
                       gamma=values.get("gamma"))
        values = [float(v) for v in values]
        if len(values) != 8:
            raise ValidationError("need 8 values a1,b1,c1,l1,a2,b2,c2,l2")
        return cls(*values)

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, k) for k in PARAM_ORDER)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_ORDER}

    @property
    def threshold_product(self) -> float:
        """``l1 l2 (a1-b1)(a2-b2) / (c1 c2)``, compared against ``a1 a2``."""
        return (self.l1 * self.l2 * (self.a1 - self.b1) * (self.a2 - self.b2)
                / (self.c1 * self.c2))


@dataclass
class ConstantCaseReport:
    zeta1: float
    zeta2: float
    R01: float | None
    R02: float | None
    H: float | None
    V: float | None
    lam: float | None
    R0: float | None
    equilibrium: tuple | None
    regime: Regime

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["regime"] = self.regime.value
        if self.equilibrium is not None:
            d["equilibrium"] = list(self.equilibrium)
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _params(p) -> ConstantParams:
    return p if isinstance(p, ConstantParams) else ConstantParams.from_values(p)


def classify_regime(params) -> Regime:
    """Long-run regime; the boundary ``a1 a2 = threshold`` counts as disease-free."""
    p = _params(params)
    host = p.a1 > p.b1
    vector = p.a2 > p.b2
    if host and vector:
        return Regime.ENDEMIC if p.a1 * p.a2 < p.threshold_product else Regime.DISEASE_FREE
    if vector:
        return Regime.HOST_EXTINCT
    if host:
        return Regime.VECTOR_EXTINCT
    return Regime.ALL_EXTINCT


def reproduction_scalar(a: float, b: float) -> float:
    if b == 0:
        raise AnalyticDomainError("R0 of a component is undefined when its death rate is 0")
    return a / b


def coupled_eigenvalue(p: ConstantParams) -> float:
    disc = (p.a1 - p.a2) ** 2 + 4.0 * p.threshold_product
    if disc < 0:
        raise AnalyticDomainError("negative discriminant: totals must be positive")
    return 0.5 * (p.a1 + p.a2 - math.sqrt(disc))


def coupled_reproduction(p: ConstantParams) -> float:
    return math.sqrt(p.threshold_product / (p.a1 * p.a2))


def equilibrium(p: ConstantParams) -> tuple | None:
    """Positive constant equilibrium ``(Hu, Hi, Vu, Vi)``, or ``None`` if none exists."""
    if classify_regime(p) is not Regime.ENDEMIC:
        return None
    e1, e2 = p.a1 - p.b1, p.a2 - p.b2
    excess = p.l1 * p.l2 * e1 * e2 - p.a1 * p.a2 * p.c1 * p.c2
    den_h = p.c1 * p.l2 * (p.a1 * p.c2 + p.l1 * e2)
    den_v = p.c2 * p.l1 * (p.a2 * p.c1 + p.l2 * e1)
    hu = p.a1 * p.c2 * (p.a2 * p.c1 + p.l2 * e1) / den_h
    vu = p.a2 * p.c1 * (p.a1 * p.c2 + p.l1 * e2) / den_v
    return (hu, excess / den_h, vu, excess / den_v)


def equilibrium_residual(params, state) -> float:
    """Largest absolute right-hand side of the constant steady-state equations."""
    p = _params(params)
    hu, hi, vu, vi = state
    h, v = hu + hi, vu + vi
    r = (
        p.a1 * h - p.b1 * hu - p.c1 * h * hu - p.l1 * hu * vi,
        p.l1 * hu * vi - p.b1 * hi - p.c1 * h * hi,
        p.a2 * v - p.b2 * vu - p.c2 * v * vu - p.l2 * vu * hi,
        p.l2 * vu * hi - p.b2 * vi - p.c2 * v * vi,
    )
    return float(max(abs(x) for x in r))


def constant_case_report(params) -> ConstantCaseReport:
    """All closed-form quantities for one constant parameter set.

    ``H``, ``V``, ``lambda`` and ``R0`` are only defined when both totals are
    positive; they are ``None`` otherwise.
    """
    p = _params(params)
    R01 = reproduction_scalar(p.a1, p.b1)
    R02 = reproduction_scalar(p.a2, p.b2)
    H = (p.a1 - p.b1) / p.c1 if p.a1 > p.b1 else None
    V = (p.a2 - p.b2) / p.c2 if p.a2 > p.b2 else None
    lam = R0 = None
    if H is not None and V is not None:
        lam = coupled_eigenvalue(p)
        R0 = coupled_reproduction(p)
    return ConstantCaseReport(p.b1 - p.a1, p.b2 - p.a2, R01, R02, H, V, lam, R0,
                              equilibrium(p), classify_regime(p))


def predicted_limit(params) -> np.ndarray:
    """Constant long-run state ``(Hu, Hi, Vu, Vi)`` of the regime."""
    p = _params(params)
    reg = classify_regime(p)
    H = max(p.a1 - p.b1, 0.0) / p.c1
    V = max(p.a2 - p.b2, 0.0) / p.c2
    if reg is Regime.ENDEMIC:
        return np.array(equilibrium(p))
    return np.array([H, 0.0, V, 0.0])


def reference_eigenvalue_dirichlet(d: float, net_decay: float, length: float = 1.0) -> float:
    """Principal eigenvalue of ``-d u'' + net_decay u`` with zero ends on ``[0, length]``."""
    if not d > 0 or not length > 0:
        raise ValidationError("d and length must be positive")
    return d * math.pi ** 2 / length ** 2 + net_decay
