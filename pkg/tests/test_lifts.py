import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crforge.cr import structure_for
from crforge.errors import ModelValidationError
from crforge.geometry import Splitting, random_polynomial
from crforge.jet import Jet
from crforge.lifts import (
    TangentCRStructure,
    bundle_cr_lift,
    complete_lift,
    complete_lift_tensor,
    lift_identities_check,
    random_horizontal_field,
    restriction_independence,
    tangent_cr_structure,
    vertical_lift,
)
from crforge.models import parse_model_text
from conftest import maxabs


def const_field(v):
    v = np.asarray(v, dtype=float)
    return lambda xs: Jet.constant(v, xs.nvars, xs.order)


def test_coordinate_field_lifts():
    dx = const_field([1.0, 0.0, 0.0])
    zs = Jet.variables([0.1, 0.2, 0.3, 0.5, -0.2, 0.7], 1)
    assert np.allclose(vertical_lift(dx, 3)(zs).value, [0, 0, 0, 1, 0, 0])
    assert np.allclose(complete_lift(dx, 3)(zs).value, [1, 0, 0, 0, 0, 0])


def test_vertical_lift_base_linearity():
    f = lambda xs: 1 + xs[0] * xs[1]  # noqa: E731
    Z = lambda xs: xs * 2.0  # noqa: E731
    fZ = lambda xs: Z(xs) * f(xs)  # noqa: E731
    q = np.array([0.3, -0.4, 0.5, 0.9])
    v = vertical_lift(fZ, 2)(Jet.variables(q, 1)).value
    assert np.allclose(v[2:], (1 + 0.3 * -0.4) * 2 * q[:2])


def test_complete_lift_of_linear_field():
    """For Z = M x the complete lift is (M x, M y)."""
    M = np.array([[0.0, 1.0], [-2.0, 0.5]])
    Z = lambda xs: Jet.constant(M, xs.nvars, xs.order) @ xs  # noqa: E731
    q = np.array([0.3, -0.4, 0.5, 0.9])
    v = complete_lift(Z, 2)(Jet.variables(q, 1)).value
    assert np.allclose(v, np.concatenate([M @ q[:2], M @ q[2:]]))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15)
def test_six_identities_random_polynomials(seed):
    rng = np.random.default_rng(seed)
    m = 3
    Z = random_polynomial(m, rng, 3, (m,), scale=0.5)
    W = random_polynomial(m, rng, 3, (m,), scale=0.5)
    A = random_polynomial(m, rng, 3, (m, m), scale=0.5)
    r = lift_identities_check(Z, W, A, m, rng.uniform(-0.5, 0.5, (2, 2 * m)))
    assert max(r.values()) < 1e-10


def test_identity_tensor_lift(rng):
    m = 3
    Z = random_polynomial(m, rng, 2, (m,))
    eye = lambda xs: Jet.constant(np.eye(m), xs.nvars, xs.order)  # noqa: E731
    zs = Jet.variables(rng.uniform(-0.5, 0.5, 2 * m), 1)
    assert maxabs((complete_lift_tensor(eye, m)(zs) @ complete_lift(Z, m)(zs) - complete_lift(Z, m)(zs)).value) < 1e-14


def test_structure_map_square_is_minus_projection(rng):
    """For A = J (zero on F): (A^2)^C = (A^C)^2 and A^2 = -pi_H."""
    st_ = structure_for("heisenberg3")
    J = lambda xs: Splitting(st_.frame(xs), st_.complement(xs)).J  # noqa: E731
    q = rng.uniform(-0.5, 0.5, 6)
    zs = Jet.variables(q, 1)
    jc = complete_lift_tensor(J, 3)(zs)
    J2 = lambda xs: J(xs) @ J(xs)  # noqa: E731
    assert maxabs((complete_lift_tensor(J2, 3)(zs) - jc @ jc).value) < 1e-10
    xs = Jet.variables(q[:3], 1)
    S = Splitting(st_.frame(xs), st_.complement(xs))
    v = Jet.constant(rng.normal(size=3), 3, 1)
    assert maxabs((J2(xs) @ v + S.horizontal(v)).value) < 1e-12


def test_tangent_structure_integrable_base(rng):
    T, rep = tangent_cr_structure("heisenberg3", rng.uniform(-0.3, 0.3, (2, 6)), rng)
    assert max(rep.values()) < 1e-9


def test_tangent_structure_non_integrable_transfer(rng):
    st_ = structure_for("heisenberg5_nonint")
    T = TangentCRStructure(st_)
    q = np.concatenate([np.asarray(st_.spec.basepoint), rng.uniform(-0.3, 0.3, 5)])
    Z, W = random_horizontal_field(st_, rng), random_horizontal_field(st_, rng)
    tr = T.transfer(q, Z, W)
    assert tr["N_CC"] > 0.05
    assert tr["CC"] < 1e-8 and tr["CV"] < 1e-8 and tr["VV"] < 1e-8


def test_restriction_independence(rng):
    st_ = structure_for("heisenberg3")

    def tilted(xs):
        E = st_.frame(xs)
        return st_.complement(xs) + (E[0] + E[0].conj()).reshape(1, -1) * 0.3

    q = rng.uniform(-0.3, 0.3, 6)
    assert restriction_independence(st_, None, tilted, q) < 1e-10
    # J^C itself (off the lifted distribution) does change with the complement
    ja = TangentCRStructure(st_).JC(Jet.variables(q, 0)).value
    jb = TangentCRStructure(st_, tilted).JC(Jet.variables(q, 0)).value
    assert maxabs(ja - jb) > 1e-3


@pytest.mark.parametrize("name,tol", [("trivial_h3", 1e-11), ("hm_h3", 1e-9)])
def test_bundle_lifts(name, tol, rng):
    lift, rep = bundle_cr_lift(name, rng.uniform(-0.3, 0.3, (3, 5)))
    assert max(rep[k] for k in ("J_squared", "dp_HE_in_HM", "dp_commutes")) < tol
    assert rep["splitting_rank"] == 5


def test_bundle_broken_vertical_block(rng):
    bad = lambda xs: Jet.constant(np.array([[0.0, -1.0], [1.3, 0.0]]), xs.nvars, xs.order)  # noqa: E731
    _, rep = bundle_cr_lift("hm_h3", rng.uniform(-0.3, 0.3, (1, 5)), I_override=bad)
    assert rep["J_squared"] > 0.1


def test_bundle_with_bad_I_rejected(registry):
    text = """
[bundle]
name = "b"
base = "heisenberg3"
rank = 2
I = [["x", "-1"], ["1", "0"]]
omega = [[["0", "0", "0"], ["0", "0", "0"]], [["0", "0", "0"], ["0", "0", "0"]]]
"""
    spec = parse_model_text(text, registry=registry)
    with pytest.raises(ModelValidationError):
        bundle_cr_lift(spec, [[0.5, 0, 0, 0, 0]], registry)
