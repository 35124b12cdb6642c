import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crforge.cr import LocalGeometry, chern_connection, structure_for
from crforge.errors import ContractViolation
from crforge.frames import (
    FrameTransform,
    LocalFrame,
    normal_quasi_frame,
    pseudoholomorphic_frame,
    quasi_holomorphic_frame,
    quasi_holomorphic_residuals,
    unitary_seed,
    verify_normal_frame,
    yu_normal_frame,
)
from crforge.geometry import Splitting, lie_bracket
from crforge.jet import Jet
from conftest import maxabs

NORMAL_KEYS = ("Gamma", "Gamma_bar", "del_Gamma_bar", "dbar_Gamma_bar", "unitary", "dH_g")
SPHERE_P = np.array([0.2, -0.1, 0.3])


def worst(r, keys=NORMAL_KEYS):
    return max(r[k] for k in keys)


def test_heisenberg_frame_is_already_pseudoholomorphic():
    u = pseudoholomorphic_frame("heisenberg3", [0.1, 0.2, 0.3], order=3)
    assert maxabs(u.transforms[-1].L) < 1e-14
    e = quasi_holomorphic_frame("heisenberg3", [0.1, 0.2, 0.3], u, order=3)
    assert maxabs(e.transforms[-1].L) < 1e-14 and maxabs(e.transforms[-1].Q) < 1e-14


def test_pseudoholomorphic_on_sphere(rng):
    u = pseudoholomorphic_frame("cr_sphere_s3", SPHERE_P, order=3)
    g = LocalGeometry("cr_sphere_s3", SPHERE_P, 3)
    U = u(g.xs)
    S = Splitting(U, g.F)
    # arbitrary (1,0) fields v = alpha^k v_k with random polynomial alpha
    for _ in range(3):
        a = rng.normal(size=4) + 1j * rng.normal(size=4)
        h = g.xs - SPHERE_P
        alpha = a[0] + a[1] * h[0] + a[2] * h[1] + a[3] * h[2]
        v = g.E[0] * alpha
        br = lie_bracket(U[0], v.conj())
        assert maxabs(S.part(br, "10").value) < 1e-9
    r = quasi_holomorphic_residuals("cr_sphere_s3", SPHERE_P, u, 3, rng)
    assert r["pseudo"] < 1e-9


def test_quasi_holomorphic_on_sphere(rng):
    u = pseudoholomorphic_frame("cr_sphere_s3", SPHERE_P, order=4)
    e = quasi_holomorphic_frame("cr_sphere_s3", SPHERE_P, u, order=4)
    r = quasi_holomorphic_residuals("cr_sphere_s3", SPHERE_P, e, 4, rng)
    assert max(r.values()) < 1e-8


def test_unitary_seed():
    g = LocalGeometry("cr_sphere_s3", SPHERE_P, 2)
    a = unitary_seed(g, np.random.default_rng(0))
    gram = g.gram(Jet.constant(a, 3, 2) @ g.E).value
    assert np.allclose(gram, np.eye(1), atol=1e-14)


@pytest.mark.parametrize("model,tol", [("heisenberg3", 1e-10), ("cr_sphere_s3", 1e-8), ("heisenberg5", 1e-8)])
def test_normal_frame_pseudo_hermitian(model, tol, rng):
    p = np.asarray(structure_for(model).spec.basepoint) + 0.1
    e = normal_quasi_frame(model, p, 4, rng)
    r = verify_normal_frame(model, p, e, 4)
    assert worst(r) < tol
    assert r["reeb_bracket"] < tol
    assert r["curvature_identity"] < 1e-7
    assert max(quasi_holomorphic_residuals(model, p, e, 4, rng).values()) < 1e-8


@pytest.mark.parametrize("model", ["euclidean_c1", "poincare_disc", "euclidean_c2"])
def test_normal_frame_hermitian(model, rng):
    p = np.asarray(structure_for(model).spec.basepoint) + 0.05
    e = yu_normal_frame(model, p, 4, rng)
    r = verify_normal_frame(model, p, e, 4)
    assert worst(r) < 1e-8
    assert r["del_Gamma_bar"] < 1e-8
    assert r["curvature_identity"] < 1e-7
    # curvature read off the frame matches the Chern curvature in that frame
    R = chern_connection(model, p, 4, frame=e).curvature().value
    assert maxabs(R - r["R"]) < 1e-8


def test_euclidean_identity_frame_is_normal():
    p = np.array([0.3, -0.2])
    ident = LocalFrame(structure_for("euclidean_c1").frame, np.eye(1), point=p)
    r = verify_normal_frame("euclidean_c1", p, ident, 3)
    assert worst(r) < 1e-12


def test_non_normal_frames_fail(rng):
    st_ = structure_for("cr_sphere_s3")
    seed = LocalFrame(st_.frame, unitary_seed(LocalGeometry(st_, SPHERE_P, 3)), point=SPHERE_P)
    assert worst(verify_normal_frame(st_, SPHERE_P, seed, 4)) > 1e-3
    u = pseudoholomorphic_frame(st_, SPHERE_P, seed, 4)
    e = quasi_holomorphic_frame(st_, SPHERE_P, u, 4, normal=False)
    assert worst(verify_normal_frame(st_, SPHERE_P, e, 4)) > 1e-3


def test_no_metric_no_normal_frame():
    with pytest.raises(ContractViolation):
        normal_quasi_frame("heisenberg5_nonint", np.zeros(5))
    with pytest.raises(ContractViolation):
        yu_normal_frame("heisenberg3", np.zeros(3))


def test_frame_transform_identity():
    T = FrameTransform.identity(np.zeros(3), 1)
    xs = Jet.variables([0.1, 0.2, 0.3], 2)
    assert maxabs((T.matrix(xs) - Jet.constant(np.eye(1), 3, 2)).coeffs) == 0


@settings(max_examples=8)
@given(st.sampled_from(["cr_sphere_s3", "poincare_disc"]), st.integers(0, 2**32 - 1))
def test_normal_frame_property(model, seed):
    rng = np.random.default_rng(seed)
    box = np.array(structure_for(model).spec.box) * 0.5
    p = rng.uniform(box[:, 0], box[:, 1])
    e = normal_quasi_frame(model, p, 4, rng)
    r = verify_normal_frame(model, p, e, 4)
    assert worst(r) < 1e-8
    assert r["curvature_identity"] < 1e-7
