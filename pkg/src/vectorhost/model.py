"""Continuous problem statement: coefficient fields, boundary data, model specs.

Coefficient fields are evaluable functions of ``(x, t)`` so one model can be
sampled on any grid.  Time is wrapped modulo the period inside evaluation.

Custom expressions
------------------
Fields given as strings use a small arithmetic grammar::

    expr   := expr ('+' | '-') term | term
    term   := term ('*' | '/') factor | factor
    factor := ('+' | '-') factor | power
    power  := atom ['**' factor]
    atom   := number | 'x' | 't' | 'pi' | 'π' | func '(' expr ')' | '(' expr ')'
    func   := 'cos' | 'sin' | 'exp'

for example ``"2*(1 + 0.5*cos(pi*x))*(1 + 0.5*cos(2*pi*t))"``.
"""

from __future__ import annotations

import ast
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DomainError, ValidationError

_X_SLACK = 1e-12

COEFFICIENT_NAMES = ("d1", "d2", "a1", "a2", "b1", "b2", "c1", "c2", "l1", "l2")


@dataclass(frozen=True)
class CoefficientField:
    """A T-periodic scalar field on ``[0, length] x R``.

    ``func`` must broadcast over numpy arrays.  ``value`` is set for fields
    known to be constant so callers can skip work.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    period: float
    length: float
    name: str = ""
    value: float | None = None

    @classmethod
    def constant(cls, value: float, period: float = 1.0, length: float = 1.0, name: str = ""):
        v = float(value)
        return cls(lambda x, t: np.full(np.broadcast(x, t).shape, v), period, length, name, v)

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        if x.size and (x.min() < -_X_SLACK or x.max() > self.length + _X_SLACK):
            raise DomainError(
                f"{self.name or 'field'} evaluated at x outside [0, {self.length}]"
            )
        t = np.mod(np.asarray(t, dtype=float), self.period)
        out = np.asarray(self.func(x, t), dtype=float)
        shape = np.broadcast(x, t).shape
        if out.shape != shape:
            out = np.broadcast_to(out, shape).copy()
        return out

    def raw(self, x, t):
        """Evaluate without periodic wrapping (used for periodicity checks)."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x, t), dtype=float), np.broadcast(x, t).shape)

    @property
    def is_constant(self) -> bool:
        return self.value is not None


def eval_coefficient(field: CoefficientField, x, t):
    """Evaluate ``field`` at ``(x, t)`` with periodic extension in ``t``."""
    return field(x, t)


# -- expression grammar ------------------------------------------------------

_FUNCS = {"cos": np.cos, "sin": np.sin, "exp": np.exp}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _compile_node(node, allowed_vars):
    if isinstance(node, ast.Expression):
        return _compile_node(node.body, allowed_vars)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        v = float(node.value)
        return lambda env: v
    if isinstance(node, ast.Name):
        if node.id == "pi":
            return lambda env: math.pi
        if node.id in allowed_vars:
            name = node.id
            return lambda env: env[name]
        raise ValidationError(f"unknown name {node.id!r} in expression")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left = _compile_node(node.left, allowed_vars)
        right = _compile_node(node.right, allowed_vars)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        inner = _compile_node(node.operand, allowed_vars)
        if isinstance(node.op, ast.USub):
            return lambda env: np.negative(inner(env))
        return inner
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
        fn = _FUNCS[node.func.id]
        arg = _compile_node(node.args[0], allowed_vars)
        return lambda env: fn(arg(env))
    raise ValidationError(f"unsupported construct in expression: {ast.dump(node)[:60]}")


def compile_expression(text: str, variables: Sequence[str] = ("x", "t")):
    """Compile a grammar expression into a numpy-broadcasting callable.

    The returned function takes the variables positionally, in the order
    given by ``variables``.
    """
    source = str(text).replace("π", "pi").replace("^", "**")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ValidationError(f"cannot parse expression {text!r}: {exc.msg}") from None
    body = _compile_node(tree, set(variables))

    def func(*args):
        env = dict(zip(variables, args))
        return body(env)

    return func


def expression_field(text, period: float, length: float, name: str = "") -> CoefficientField:
    """Build a field from a number or an expression string in ``x`` and ``t``."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return CoefficientField.constant(text, period, length, name)
    return CoefficientField(compile_expression(text), period, length, name)


# -- coefficient sets and boundary data ---------------------------------------

@dataclass(frozen=True)
class CoefficientSet:
    d1: CoefficientField
    d2: CoefficientField
    a1: CoefficientField
    a2: CoefficientField
    b1: CoefficientField
    b2: CoefficientField
    c1: CoefficientField
    c2: CoefficientField
    l1: CoefficientField
    l2: CoefficientField
    gamma: CoefficientField | None = None

    def __post_init__(self):
        periods = {f.period for f in self.fields().values()}
        if len(periods) != 1:
            raise ValidationError("all coefficient fields must share one period")

    @property
    def period(self) -> float:
        return self.d1.period

    def fields(self) -> dict[str, CoefficientField]:
        out = {name: getattr(self, name) for name in COEFFICIENT_NAMES}
        if self.gamma is not None:
            out["gamma"] = self.gamma
        return out

    def host(self):
        """Diffusion, birth, death, crowding and transmission rates of the host."""
        return self.d1, self.a1, self.b1, self.c1, self.l1

    def vector(self):
        return self.d2, self.a2, self.b2, self.c2, self.l2


@dataclass(frozen=True)
class BoundaryCondition:
    """``alpha * du/dnu + beta * u = 0``; ``alpha=0, beta=1`` is Dirichlet."""

    alpha: int
    beta: CoefficientField

    def __post_init__(self):
        if self.alpha not in (0, 1):
            raise ValidationError(f"alpha must be 0 or 1, got {self.alpha!r}")

    @property
    def is_dirichlet(self) -> bool:
        return self.alpha == 0

    @classmethod
    def dirichlet(cls, period=1.0, length=1.0):
        return cls(0, CoefficientField.constant(1.0, period, length, "beta"))

    @classmethod
    def neumann(cls, period=1.0, length=1.0):
        return cls(1, CoefficientField.constant(0.0, period, length, "beta"))

    @classmethod
    def robin(cls, beta, period=1.0, length=1.0):
        if not isinstance(beta, CoefficientField):
            beta = expression_field(beta, period, length, "beta")
        return cls(1, beta)


@dataclass(frozen=True)
class ModelSpec:
    length: float
    period: float
    bc_host: BoundaryCondition
    bc_vector: BoundaryCondition
    coeffs: CoefficientSet

    def __post_init__(self):
        if not self.length > 0:
            raise ValidationError("length must be positive")
        if not self.period > 0:
            raise ValidationError("period must be positive")
        if abs(self.coeffs.period - self.period) > 1e-12 * self.period:
            raise ValidationError("coefficient period differs from model period")

    def bc(self, which: str) -> BoundaryCondition:
        return self.bc_host if which == "host" else self.bc_vector


# -- the heterogeneous family used for the numerical experiments ---------------

PARAM_NAMES = ("p1", "p2", "p3", "p4", "q1", "q2", "q3", "q4")


@dataclass(frozen=True)
class HeterogeneityParams:
    p1: float = 0.0
    p2: float = 0.0
    p3: float = 0.0
    p4: float = 0.0
    q1: float = 0.0
    q2: float = 0.0
    q3: float = 0.0
    q4: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (-1.0 <= v <= 1.0):
                raise ValidationError(f"{f.name}={v} outside [-1, 1]")

    @classmethod
    def from_pq(cls, p: Sequence[float], q: Sequence[float]):
        if len(p) != 4 or len(q) != 4:
            raise ValidationError("p and q need four entries each")
        return cls(*map(float, p), *map(float, q))

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in PARAM_NAMES}


def _modulated(base, sp, tp):
    def f(x, t):
        return base * (1.0 + sp * np.cos(np.pi * x)) * (1.0 + tp * np.cos(2.0 * np.pi * t))
    return f


def make_parametric_family(params: HeterogeneityParams) -> CoefficientSet:
    """Coefficient set with cosine-modulated birth and death rates on [0,1], T=1."""
    if not isinstance(params, HeterogeneityParams):
        raise ValidationError("params must be HeterogeneityParams")
    P = params

    def mod(base, sp, tp, name):
        if sp == 0.0 and tp == 0.0:
            return CoefficientField.constant(base, 1.0, 1.0, name)
        return CoefficientField(_modulated(base, sp, tp), 1.0, 1.0, name)

    const = CoefficientField.constant
    return CoefficientSet(
        d1=const(0.1, name="d1"),
        d2=const(0.2, name="d2"),
        a1=mod(2.0, P.p1, P.p3, "a1"),
        a2=mod(3.0, P.p2, P.p4, "a2"),
        b1=mod(1.0, P.q1, P.q3, "b1"),
        b2=mod(2.0, P.q2, P.q4, "b2"),
        c1=const(1.0, name="c1"),
        c2=const(1.0, name="c2"),
        l1=const(3.0, name="l1"),
        l2=const(2.0, name="l2"),
    )


def parametric_spec(params: HeterogeneityParams | None = None, bc: str = "neumann") -> ModelSpec:
    """Model on [0,1] with T=1 built from :func:`make_parametric_family`."""
    params = params or HeterogeneityParams()
    coeffs = make_parametric_family(params)
    b = BoundaryCondition.dirichlet() if bc == "dirichlet" else BoundaryCondition.neumann()
    return ModelSpec(1.0, 1.0, b, b, coeffs)


def constant_spec(values: Mapping[str, float] | Sequence[float], *, d1=0.1, d2=0.2,
                  gamma=None, length=1.0, period=1.0, bc: str = "neumann") -> ModelSpec:
    """Constant-coefficient model.

    ``values`` is a mapping with keys a1,b1,c1,l1,a2,b2,c2,l2 or a sequence in
    that order.
    """
    keys = ("a1", "b1", "c1", "l1", "a2", "b2", "c2", "l2")
    if not isinstance(values, Mapping):
        values = list(values)
        if len(values) != 8:
            raise ValidationError("constant parameters need 8 values a1,b1,c1,l1,a2,b2,c2,l2")
        values = dict(zip(keys, values))
    vals = {"d1": d1, "d2": d2, **{k: values[k] for k in keys}}
    for k in ("d1", "d2"):
        if k in values:
            vals[k] = values[k]
    if gamma is None and "gamma" in values:
        gamma = values["gamma"]
    mk = lambda name: CoefficientField.constant(vals[name], period, length, name)  # noqa: E731
    coeffs = CoefficientSet(
        **{name: mk(name) for name in COEFFICIENT_NAMES},
        gamma=None if gamma is None else CoefficientField.constant(gamma, period, length, "gamma"),
    )
    if bc == "dirichlet":
        b = BoundaryCondition.dirichlet(period, length)
    else:
        b = BoundaryCondition.neumann(period, length)
    return ModelSpec(length, period, b, b, coeffs)


# -- hypothesis checks --------------------------------------------------------

@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_model(spec: ModelSpec, samples: int = 41) -> ValidationReport:
    """Check positivity, nonnegativity, nontriviality, periodicity and the
    boundary dichotomy on a space-time sample lattice."""
    report = ValidationReport()
    L, T = spec.length, spec.period
    xs = np.linspace(0.0, L, samples)
    ts = np.linspace(0.0, T, samples)
    X, Tt = np.meshgrid(xs, ts)
    fields_ = spec.coeffs.fields()
    for name, fld in fields_.items():
        try:
            vals = fld(X, Tt)
        except Exception as exc:  # report-style: never raise
            report.violations.append(f"{name} could not be evaluated: {exc}")
            continue
        if not np.all(np.isfinite(vals)):
            report.violations.append(f"{name} not finite")
            continue
        if name in ("d1", "d2", "a1", "a2", "c1", "c2"):
            if np.any(vals <= 0):
                report.violations.append(f"{name} not strictly positive")
        elif np.any(vals < 0):
            report.violations.append(f"{name} negative somewhere")
        if name in ("l1", "l2") and not np.any(vals > 0):
            report.violations.append(f"{name} trivial (zero everywhere)")
        gap = np.abs(fld.raw(X, Tt + T) - fld.raw(X, Tt))
        scale = max(1.0, float(np.max(np.abs(vals))))
        if np.max(gap) > 1e-10 * scale:
            report.violations.append(f"{name} not {T}-periodic in t")
    bcs = (("bc_host", spec.bc_host), ("bc_vector", spec.bc_vector))
    xb = np.array([0.0, L])
    for label, bc in bcs:
        bvals = bc.beta(xb[None, :], ts[:, None])
        if bc.alpha == 0:
            if np.any(np.abs(bvals - 1.0) > 1e-14):
                report.violations.append(f"{label}: a Dirichlet boundary (alpha = 0) requires beta ≡ 1")
        elif np.any(bvals < 0):
            report.violations.append(f"{label}: beta negative on the boundary")
        if np.max(np.abs(bc.beta.raw(xb[None, :], ts[:, None] + T) - bc.beta.raw(xb[None, :], ts[:, None]))) > 1e-10:
            report.violations.append(f"{label}: beta not {T}-periodic in t")
    if spec.bc_host.alpha != spec.bc_vector.alpha:
        report.violations.append("host and vector must share the boundary type (both alpha = 0 or both alpha = 1)")
    return report


# -- configuration documents ---------------------------------------------------

def _bc_from_config(doc, period, length) -> BoundaryCondition:
    if not isinstance(doc, Mapping) or "alpha" not in doc:
        raise ValidationError("boundary condition needs an 'alpha' key")
    alpha = doc["alpha"]
    if alpha not in (0, 1):
        raise ValidationError("alpha must be 0 or 1")
    beta = doc.get("beta", 1.0 if alpha == 0 else None)
    if beta is None:
        raise ValidationError("Robin/Neumann boundary needs an explicit 'beta'")
    return BoundaryCondition(int(alpha), expression_field(beta, period, length, "beta"))


def spec_from_config(doc: Mapping) -> ModelSpec:
    """Build a :class:`ModelSpec` from a decoded configuration document."""
    if not isinstance(doc, Mapping):
        raise ValidationError("configuration must be a JSON object")
    fam = doc.get("family")
    if not isinstance(fam, Mapping) or "type" not in fam:
        raise ValidationError("configuration needs family.type")
    kind = fam["type"]
    length = float(doc.get("length", 1.0))
    period = float(doc.get("period", 1.0))
    if kind in ("parametric", "section5"):
        if length != 1.0 or period != 1.0:
            raise ValidationError("the parametric family is defined on [0,1] with period 1")
        params = HeterogeneityParams.from_pq(fam.get("p", [0] * 4), fam.get("q", [0] * 4)) \
            if ("p" in fam or "q" in fam) else \
            HeterogeneityParams(**{k: float(fam.get(k, 0.0)) for k in PARAM_NAMES})
        coeffs = make_parametric_family(params)
    elif kind in ("constant", "custom-expression"):
        missing = [k for k in COEFFICIENT_NAMES if k not in fam]
        if missing:
            raise ValidationError(f"family is missing coefficients: {', '.join(missing)}")
        if kind == "constant":
            bad = [k for k in COEFFICIENT_NAMES if not isinstance(fam[k], (int, float))]
            if bad:
                raise ValidationError(f"constant family needs numeric values: {', '.join(bad)}")
        made = {k: expression_field(fam[k], period, length, k) for k in COEFFICIENT_NAMES}
        gamma = fam.get("gamma")
        coeffs = CoefficientSet(
            **made,
            gamma=None if gamma is None else expression_field(gamma, period, length, "gamma"),
        )
    else:
        raise ValidationError(f"unknown family type {kind!r}")
    for key in ("bc_host", "bc_vector"):
        if key not in doc:
            raise ValidationError(f"configuration needs {key}")
    return ModelSpec(
        length,
        period,
        _bc_from_config(doc["bc_host"], period, length),
        _bc_from_config(doc["bc_vector"], period, length),
        coeffs,
    )


def load_spec(path) -> ModelSpec:
    with open(Path(path), encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed configuration: {exc}") from None
    return spec_from_config(doc)
