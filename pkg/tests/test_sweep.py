import json

import numpy as np
import pytest

from vectorhost.errors import ValidationError
from vectorhost.numerics import Numerics
from vectorhost.sweep import (Axis, SweepSpec, evaluate_point, read_table, run_sweep,
                              worker_count, write_metadata, write_table)

NUM = Numerics(N=10, dt=1 / 100)


def _spec(**kw):
    base = dict(varied=[("p1", -0.5, 0.5, 3), ("q1", 0.0, 0.5, 2)], fixed={"p3": 0.5},
                linked={"q3": ("p3", -1.0)}, numerics=NUM)
    base.update(kw)
    return SweepSpec(**base)


def test_points_row_major():
    pts = _spec().points()
    assert len(pts) == 6
    assert [(p["p1"], p["q1"]) for p in pts[:3]] == [(-0.5, 0.0), (-0.5, 0.5), (0.0, 0.0)]
    assert all(p["q3"] == -0.5 for p in pts)


@pytest.mark.parametrize("kw", [
    {"varied": [("p9", 0, 1, 2)]},
    {"varied": [("p1", 0, 2, 2)]},
    {"varied": [("p1", 0, 1, 0)]},
    {"varied": []},
    {"fixed": {"p1": 0.1}},
    {"linked": {"q2": ("p4", 1.0)}},
    {"outputs": ("R0", "bogus")},
    {"family": "constant"},
])
def test_invalid_specs(kw):
    with pytest.raises(ValidationError):
        _spec(**kw)


def test_family_alias_accepted():
    assert _spec(family="section5").family == "parametric"


def test_dict_roundtrip():
    s = _spec()
    back = SweepSpec.from_dict(json.loads(json.dumps(s.as_dict())))
    assert back.points() == s.points()
    assert back.numerics == s.numerics


def test_deterministic_across_workers(tmp_path):
    s = _spec(varied=[Axis("p1", -0.5, 0.5, 3)])
    one = run_sweep(s, workers=1)
    two = run_sweep(s, workers=2)
    assert one.rows == two.rows
    write_table(one, tmp_path / "a.csv")
    write_table(two, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_table_roundtrip(tmp_path):
    t = run_sweep(_spec(varied=[Axis("p2", 0.0, 0.5, 2)], outputs=("R0", "lambda")), workers=1)
    write_table(t, tmp_path / "t.csv")
    write_metadata(t, tmp_path / "t.json")
    back = read_table(tmp_path / "t.csv")
    assert back.params == ["p2"] and back.outputs == ("R0", "lambda")
    assert np.allclose(back.column("R0"), t.column("R0"), rtol=1e-11)
    meta = json.loads((tmp_path / "t.json").read_text())
    assert meta["points"] == 2 and meta["spec"]["numerics"]["N"] == 10


def test_failed_point_reports_status():
    row = evaluate_point("parametric", {"p1": 0.5}, Numerics(N=10, dt=1 / 100, max_iter=2),
                         ("R0",))
    assert row["status"] == "eig-nonconverged" and row["R0"] is None


def test_constant_family_subcritical():
    s = SweepSpec(varied=[("a1", 0.5, 0.5, 1)],
                  fixed={"b1": 1, "c1": 1, "l1": 1, "a2": 3, "b2": 1, "c2": 1, "l2": 1},
                  numerics=NUM, family="constant")
    row = run_sweep(s, workers=1).rows[0]
    assert row["status"] == "subcritical" and row["R0"] is None
    assert row["R01"] == pytest.approx(0.5, rel=1e-6)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("VECTORHOST_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("VECTORHOST_WORKERS", "x")
    with pytest.raises(ValidationError):
        worker_count()
    with pytest.raises(ValidationError):
        worker_count(0)
