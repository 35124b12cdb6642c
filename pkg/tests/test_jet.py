import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crforge.errors import JetShapeError, SingularJetError
from crforge.jet import (
    Jet,
    compose,
    cos,
    exp,
    jet_invert,
    jet_mul,
    jet_partial,
    jet_solve_linear,
    log,
    multi_indices,
    ncoef,
    sin,
    sqrt,
)
from conftest import maxabs


def var(n, k, order, point=None):
    point = np.zeros(n) if point is None else point
    return Jet.variables(point, order)[k]


# examples ------------------------------------------------------------
def test_multiplicative_identity():
    a = exp(var(2, 0, 3) + 2 * var(2, 1, 3))
    assert maxabs((jet_mul(Jet.constant(1.0, 2, 3), a) - a).coeffs) == 0


def test_product_of_linear_factors():
    x, y = var(2, 0, 2), var(2, 1, 2)
    d = ((1 + x) * (1 + y)).as_dict(tol=1e-15)
    assert d == {(0, 0): 1, (1, 0): 1, (0, 1): 1, (1, 1): 1}


def test_truncation_kills_high_degree():
    x = var(1, 0, 4)
    assert maxabs((x**2 * x**3).coeffs) == 0


def test_invert_constant_and_geometric_series():
    assert jet_invert(Jet.constant(2.0, 1, 3)).value == pytest.approx(0.5)
    inv = jet_invert(1 + var(1, 0, 3))
    assert np.allclose(inv.coeffs, [1, -1, 1, -1])


def test_invert_singular_raises():
    with pytest.raises(SingularJetError):
        jet_invert(var(1, 0, 3))


def test_solve_identity_and_scalar_reduction(rng):
    n, order = 2, 3
    xs = Jet.variables(np.zeros(n), order)
    b = exp(xs) * (1 + 1j)
    eye = Jet.constant(np.eye(2), n, order)
    assert maxabs((jet_solve_linear(eye, b) - b).coeffs) < 1e-15
    a = 2 + sin(xs[0]) + xs[1] ** 2
    x = jet_solve_linear(a.reshape(1, 1), b[:1])
    assert maxabs((x[0] - jet_mul(jet_invert(a), b[0])).coeffs) < 1e-14


def test_solve_random_4x4_residual(rng):
    n, order = 3, 4
    A = Jet(rng.normal(size=(4, 4, ncoef(n, order))) + 1j * rng.normal(size=(4, 4, ncoef(n, order))), n, order)
    A.coeffs[..., 0] += 4 * np.eye(4)
    b = Jet(rng.normal(size=(4, ncoef(n, order))), n, order)
    x = jet_solve_linear(A, b)
    residual = (A @ x) - b
    assert maxabs(residual.coeffs) < 1e-10


def test_solve_singular_constant_term():
    A = Jet.constant(np.array([[1.0, 2.0], [2.0, 4.0]]), 1, 2)
    with pytest.raises(SingularJetError):
        jet_solve_linear(A, Jet.constant(np.ones(2), 1, 2))


def test_partial_factorial_normalization():
    x, y = var(2, 0, 3), var(2, 1, 3)
    assert jet_partial(x**2 * y, (2, 1)) == pytest.approx(2)
    f = exp(x) * cos(y)
    assert jet_partial(f, (0, 0)) == pytest.approx(1)


def test_partial_of_sine_matches_finite_differences():
    h = 1e-2
    fd = (np.sin(2 * h) - 2 * np.sin(h) + 2 * np.sin(-h) - np.sin(-2 * h)) / (2 * h**3)
    assert jet_partial(sin(var(1, 0, 3)), (3,)).real == pytest.approx(-1)
    assert fd == pytest.approx(-1, rel=1e-3)


def test_base_value_equals_function_value():
    p = np.array([0.3, -0.7])
    xs = Jet.variables(p, 3)
    f = log(2 + xs[0]) * sqrt(3 + xs[1])
    assert f.value == pytest.approx(np.log(2.3) * np.sqrt(2.3))


def test_compose_matches_direct_expansion():
    p = np.array([0.2, -0.1])
    xs = Jet.variables(p, 4)
    u = sin(xs[0]) + xs[1] ** 2
    outer = exp(Jet.variables(np.array([u.value.real]), 4))[0]
    direct = exp(u)
    composed = compose(outer, u.reshape(1))
    assert maxabs((composed - direct).coeffs) < 1e-13


def test_shape_mismatch_raises():
    with pytest.raises(JetShapeError):
        Jet.variables(np.zeros(2), 2) + Jet.variables(np.zeros(3), 2)


def test_multi_indices_graded():
    mis = multi_indices(2, 2)
    assert [sum(m) for m in mis] == sorted(sum(m) for m in mis)
    assert len(mis) == ncoef(2, 2)


# properties ----------------------------------------------------------
@st.composite
def jets(draw, nvars=None, order=None):
    nvars = nvars or draw(st.integers(1, 3))
    order = order if order is not None else draw(st.integers(0, 4))
    n = ncoef(nvars, order)
    vals = draw(st.lists(st.floats(-1, 1), min_size=2 * n, max_size=2 * n))
    c = np.array(vals[:n]) + 1j * np.array(vals[n:])
    return Jet(c, nvars, order)


@st.composite
def jet_triples(draw):
    nvars = draw(st.integers(1, 3))
    order = draw(st.integers(0, 4))
    return tuple(draw(jets(nvars, order)) for _ in range(3))


def _close(a, b, tol=1e-13):
    scale = max(1.0, maxabs(a.coeffs), maxabs(b.coeffs))
    return maxabs((a - b).coeffs) <= tol * scale


@given(jet_triples())
def test_ring_associativity(t):
    a, b, c = t
    assert _close((a * b) * c, a * (b * c))


@given(jet_triples())
def test_ring_distributivity(t):
    a, b, c = t
    assert _close(a * (b + c), a * b + a * c)


@given(jet_triples())
def test_ring_commutativity(t):
    a, b, _ = t
    assert _close(a * b, b * a)
    assert _close(a + b, b + a)


@given(jets())
def test_inverse_property(a):
    a.coeffs[0] = 1.5 + 0.5j
    r = a * jet_invert(a) - 1
    assert maxabs(r.coeffs) < 1e-12


@given(jet_triples())
def test_truncation_closure(t):
    a, b, c = t
    out = a * b + c * a
    assert out.coeffs.shape[-1] == ncoef(a.nvars, a.order)
    low = (a.truncate(max(a.order - 1, 0)) * b.truncate(max(a.order - 1, 0)))
    assert _close(low, (a * b).truncate(max(a.order - 1, 0)))
