"""Parameter sweeps over the heterogeneity amplitudes of the parametric family.

Each lattice point is an independent threshold computation; points are
farmed out to a process pool and gathered back in lattice order, so the
table does not depend on the worker count.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np

from .analytic import PARAM_ORDER
from .errors import (NonConvergenceError, RootNotBracketedError, ValidationError,
                     VectorHostError)
from .model import HeterogeneityParams, constant_spec, parametric_spec
from .numerics import Numerics
from .spectral import _clean, threshold_quantities

log = logging.getLogger(__name__)

OUTPUTS = ("R0", "lambda", "zeta1", "zeta2", "R01", "R02")
FAMILY_PARAMS = {
    "parametric": ("p1", "p2", "p3", "p4", "q1", "q2", "q3", "q4"),
    "constant": PARAM_ORDER,
}
WORKERS_ENV = "VECTORHOST_WORKERS"


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, self.count)


@dataclass
class SweepSpec:
    """Lattice definition.

    ``linked`` maps a parameter to ``(source, factor)``: the parameter takes
    ``factor`` times the value of ``source`` at each point (``q3 = p3`` is
    ``{"q3": ("p3", 1.0)}``).
    """

    varied: list
    fixed: dict = field(default_factory=dict)
    linked: dict = field(default_factory=dict)
    numerics: Numerics = field(default_factory=Numerics)
    outputs: tuple = OUTPUTS
    family: str = "parametric"
    bc: str = "neumann"

    def __post_init__(self):
        self.family = {"section5": "parametric"}.get(self.family, self.family)
        self.varied = [a if isinstance(a, Axis) else Axis(a[0], float(a[1]), float(a[2]), int(a[3]))
                       for a in self.varied]
        self.outputs = tuple(self.outputs)
        self.validate()

    def validate(self):
        if self.family not in FAMILY_PARAMS:
            raise ValidationError(f"unknown family {self.family!r}")
        allowed = FAMILY_PARAMS[self.family]
        names = [a.name for a in self.varied]
        if not names:
            raise ValidationError("at least one varied parameter is required")
        if len(set(names)) != len(names):
            raise ValidationError("varied parameters must be distinct")
        for a in self.varied:
            if a.name not in allowed:
                raise ValidationError(f"unknown parameter {a.name!r}")
            if a.count < 1:
                raise ValidationError(f"{a.name}: sample count must be positive")
            if self.family == "parametric" and not (-1 <= a.lo <= 1 and -1 <= a.hi <= 1):
                raise ValidationError(f"{a.name}: range must lie in [-1, 1]")
        for k in self.fixed:
            if k not in allowed or k in names:
                raise ValidationError(f"fixed parameter {k!r} is unknown or also varied")
        for k, (src, _) in self.linked.items():
            if k not in allowed or src not in allowed:
                raise ValidationError(f"link {k} <- {src} references an unknown parameter")
            if k in names or k in self.fixed:
                raise ValidationError(f"linked parameter {k!r} is also varied or fixed")
            if src not in names and src not in self.fixed:
                raise ValidationError(f"link source {src!r} is not declared")
        if self.family == "constant":
            given = set(names) | set(self.fixed) | set(self.linked)
            missing = [k for k in PARAM_ORDER if k not in given]
            if missing:
                raise ValidationError(f"constant family needs values for {missing}")
        bad = [o for o in self.outputs if o not in OUTPUTS]
        if bad or not self.outputs:
            raise ValidationError(f"outputs must be a nonempty subset of {OUTPUTS}")

    def points(self) -> list[dict]:
        """Lattice points in row-major order (first varied axis outermost)."""
        out = []
        for combo in itertools.product(*(a.values() for a in self.varied)):
            pt = dict(self.fixed)
            pt.update({a.name: float(v) for a, v in zip(self.varied, combo)})
            for k, (src, factor) in self.linked.items():
                pt[k] = factor * pt[src]
            out.append(pt)
        return out

    def as_dict(self) -> dict:
        return {
            "family": self.family, "bc": self.bc,
            "varied": [[a.name, a.lo, a.hi, a.count] for a in self.varied],
            "fixed": self.fixed, "linked": {k: list(v) for k, v in self.linked.items()},
            "numerics": self.numerics.as_dict(), "outputs": list(self.outputs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        num = d.get("numerics", {})
        return cls(varied=[tuple(v) for v in d["varied"]], fixed=d.get("fixed", {}),
                   linked={k: (v[0], float(v[1])) for k, v in d.get("linked", {}).items()},
                   numerics=Numerics(**num) if isinstance(num, dict) else num,
                   outputs=tuple(d.get("outputs", OUTPUTS)), family=d.get("family", "parametric"),
                   bc=d.get("bc", "neumann"))


@dataclass
class SweepTable:
    params: list
    outputs: tuple
    rows: list  # dicts with parameter values, outputs and "status"
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if r.get(name) is None else r[name] for r in self.rows])


def _model(family, pt, bc):
    if family == "parametric":
        return parametric_spec(HeterogeneityParams(**{k: pt.get(k, 0.0) for k in FAMILY_PARAMS[family]}), bc)
    return constant_spec({k: pt[k] for k in PARAM_ORDER}, bc=bc)


def evaluate_point(family: str, pt: dict, numerics: Numerics, outputs, bc="neumann") -> dict:
    """Threshold quantities at one point; failures become a status string."""
    row = {k: None for k in outputs}
    try:
        rep = threshold_quantities(_model(family, pt, bc), numerics)
    except NonConvergenceError as exc:
        row["status"] = "eig-nonconverged" if exc.kind == "eigen" else "orbit-nonconverged"
        row["error"] = str(exc)
        return row
    except RootNotBracketedError as exc:
        row["status"] = "root-not-bracketed"
        row["error"] = str(exc)
        return row
    except VectorHostError as exc:
        row["status"] = "error"
        row["error"] = str(exc)
        return row
    for k in outputs:
        row[k] = rep.value(k)
    row["status"] = rep.status
    return row


def _task(args):
    return evaluate_point(*args)


def worker_count(requested: int | None = None) -> int:
    if requested is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise ValidationError(f"{WORKERS_ENV} must be an integer") from None
        else:
            requested = os.cpu_count() or 1
    if requested < 1:
        raise ValidationError("worker count must be positive")
    return requested


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepTable:
    """Evaluate every lattice point, in parallel when more than one worker is allowed."""
    pts = spec.points()
    n = min(worker_count(workers), len(pts))
    tasks = [(spec.family, pt, spec.numerics, spec.outputs, spec.bc) for pt in pts]
    t0 = time.perf_counter()
    if n <= 1:
        results = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_task, tasks))
    names = [a.name for a in spec.varied]
    rows = []
    for pt, res in zip(pts, results):
        row = {k: pt[k] for k in names}
        row.update(res)
        rows.append(row)
    meta = {
        "spec": spec.as_dict(),
        "version": _version(),
        "python": platform.python_version(),
        "workers": n,
        "points": len(pts),
        "wall_seconds": time.perf_counter() - t0,
        "schema_version": 1,
    }
    return SweepTable(names, spec.outputs, rows, meta)


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return "" if not np.isfinite(v) else f"{v:.12g}"


def write_table(table: SweepTable, destination) -> None:
    """CSV: varied parameters, requested outputs, then ``status``."""
    if not table.rows:
        raise ValidationError("table is empty")
    with open(destination, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*table.params, *table.outputs, "status"])
        for r in table.rows:
            w.writerow([*(_fmt(r[k]) for k in table.params),
                        *(_fmt(r.get(k)) for k in table.outputs), r["status"]])


def write_metadata(table: SweepTable, destination) -> None:
    with open(destination, "w") as fh:
        json.dump(_clean(table.metadata), fh, indent=2, sort_keys=True)


def read_table(path) -> SweepTable:
    """Inverse of :func:`write_table` (empty cells come back as ``None``)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    status_at = header.index("status")
    outputs = tuple(h for h in header[:status_at] if h in OUTPUTS)
    params = [h for h in header[:status_at] if h not in OUTPUTS]
    out = []
    for r in rows[1:]:
        d = {h: (None if v == "" else float(v)) for h, v in zip(header[:status_at], r[:status_at])}
        d["status"] = r[status_at]
        out.append(d)
    return SweepTable(params, outputs, out)
