import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vectorhost.discretization import (PeriodSampler, TridiagonalOperator, assemble_operator,
                                       build_grid, steps_per_period, tridiagonal_solve,
                                       unknown_range)
from vectorhost.errors import AssemblyError, SingularSystemError, ValidationError
from vectorhost.model import BoundaryCondition, CoefficientField, expression_field


def test_grid_basics():
    g = build_grid(2.0, 8)
    assert g.h == 0.25 and g.size == 9
    assert g.nodes[-1] == pytest.approx(2.0)
    assert g.weights().sum() == pytest.approx(2.0)
    with pytest.raises(ValidationError):
        build_grid(1.0, 3)
    with pytest.raises(ValidationError):
        build_grid(-1.0, 10)


def test_unknown_range():
    g = build_grid(1.0, 10)
    assert unknown_range(g, BoundaryCondition.neumann()) == (0, 11)
    assert unknown_range(g, BoundaryCondition.dirichlet()) == (1, 10)


def _op(n=16, bc=None, d="0.1 + 0.05*sin(pi*x)", r=0.0):
    g = build_grid(1.0, n)
    return g, assemble_operator(g, expression_field(d, 1.0, 1.0), r, 0.3,
                                bc or BoundaryCondition.neumann())


def test_neumann_rows_sum_to_zero():
    _, op = _op()
    assert np.allclose(op.matvec(np.ones(op.unknown_count)), 0.0, atol=1e-10)


@pytest.mark.parametrize("beta", [0.0, 0.5, "1 + 0.5*x"])
def test_robin_weighted_symmetry(beta):
    bfield = beta if not isinstance(beta, str) else expression_field(beta, 1.0, 1.0)
    bc = BoundaryCondition(1, bfield if isinstance(bfield, CoefficientField)
                           else CoefficientField.constant(bfield))
    g, op = _op(bc=bc)
    A = op.to_dense()
    W = np.diag(g.weights())
    assert np.allclose(W @ A, (W @ A).T, atol=1e-10)


def test_dirichlet_symmetric():
    _, op = _op(bc=BoundaryCondition.dirichlet())
    A = op.to_dense()
    assert op.unknown_count == 15
    assert np.allclose(A, A.T)


def test_mmatrix_structure():
    _, op = _op(r=0.5)
    A = op.shifted(0.01).to_dense()
    off = A - np.diag(np.diag(A))
    assert np.all(off <= 0)
    assert np.all(np.diag(A) > 0)
    assert np.all(np.linalg.inv(A) >= -1e-14)  # monotone


def test_negative_diffusivity_rejected():
    with pytest.raises(AssemblyError):
        _op(d="x - 0.5")


def test_matvec_matches_dense(rng):
    _, op = _op(r=1.0)
    u = rng.standard_normal(op.unknown_count)
    assert np.allclose(op.matvec(u), op.to_dense() @ u)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 60), st.floats(0.01, 10.0), st.integers(0, 2 ** 31))
def test_thomas_matches_dense(n, shift, seed):
    r = np.random.default_rng(seed)
    lower = -r.uniform(0, 1, n)
    upper = -r.uniform(0, 1, n)
    lower[0] = upper[-1] = 0.0
    diag = -(lower + upper) + shift
    op = TridiagonalOperator(lower, diag, upper)
    b = r.standard_normal(n)
    x = tridiagonal_solve(op, b)
    assert np.allclose(op.to_dense() @ x, b, atol=1e-10 * (1 + np.abs(b).max()))


def test_singular_system():
    op = TridiagonalOperator(np.zeros(3), np.array([1.0, 0.0, 1.0]), np.zeros(3))
    with pytest.raises(SingularSystemError):
        tridiagonal_solve(op, np.ones(3))
    with pytest.raises(ValidationError):
        tridiagonal_solve(op, np.ones(4))


def test_steps_per_period():
    assert steps_per_period(1.0, 1e-3) == 1000
    with pytest.raises(ValidationError):
        steps_per_period(1.0, 0.3)
    with pytest.raises(ValidationError):
        steps_per_period(1.0, 0.0)


def test_sampler_rows_match_fields(hetero_spec):
    g = build_grid(1.0, 10)
    s = PeriodSampler(hetero_spec, g, 0.01)
    assert s.m == 100
    rows = s.block(0, 5)
    a1 = hetero_spec.coeffs.a1
    for r in range(5):
        assert np.allclose(rows.fields["a1"][r], a1(g.nodes, (r + 1) * 0.01))
    # blocks cover a requested run exactly once and wrap periodically
    parts = list(s.blocks(95, 30))
    assert [(k, c) for k, c, _ in parts] == [(95, 5), (100, 25)]
    assert np.allclose(parts[1][2].fields["a1"][0], a1(g.nodes, 0.01))
