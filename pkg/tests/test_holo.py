import numpy as np
import pytest

from crforge.cr import structure_for
from crforge.errors import ContractViolation, HypothesisViolation
from crforge.geometry import commute_residual
from crforge.holo import (
    HoloMapModel,
    MapGeometry,
    MapKind,
    SlitBundle,
    SlitBundlePoint,
    bochner_frozen,
    bochner_terms,
    classify_map,
    energy_density,
    normal_frames_for,
    random_slit_points,
    structure_eq_residuals,
)
from conftest import maxabs

SHIPPED = ["h3_to_c1", "h3_to_c1_sq", "h3_to_disc", "c1_to_h3", "disc_to_h3",
           "id_heisenberg3", "id_cr_sphere_s3", "h3_to_h3_sq"]


def hm(name, registry):
    return HoloMapModel.from_spec(name, registry)


def base(m, registry):
    return np.asarray(m.source.spec.basepoint, dtype=float)


def test_identity_transversal(registry):
    m = HoloMapModel(lambda xs: xs, "heisenberg3", "heisenberg3", "transversal", "id")
    r = classify_map(m, [[0.1, 0.2, 0.3], [-0.4, 0.1, 0.0]])
    assert max(r.values()) < 1e-12


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_maps_are_holomorphic(name, registry):
    m = hm(name, registry)
    pts = base(m, registry) + np.random.default_rng(0).uniform(-0.1, 0.1, (3, m.source.m))
    r = classify_map(m, pts)
    assert max(r.values()) < 1e-10, r


def test_antiholomorphic_control(registry):
    r = classify_map(hm("h3_to_c1_conj", registry), [[0.1, 0.2, 0.3]])
    assert r["commutation"] > 0.5


def test_kind_category_mismatch(registry):
    with pytest.raises(ContractViolation):
        HoloMapModel.from_spec("h3_to_c1", registry, kind="hermitian_to_ph")
    assert MapKind("transversal").needs_sasakian_target


@pytest.mark.parametrize("name,tol", [("h3_to_c1", 1e-9), ("id_heisenberg3", 1e-10), ("id_cr_sphere_s3", 1e-8),
                                      ("h3_to_disc", 1e-8), ("disc_to_h3", 1e-8)])
def test_structure_equations(name, tol, registry):
    m = hm(name, registry)
    r = structure_eq_residuals(m, base(m, registry) + 0.05)
    assert max(r.values()) < tol


def test_structure_equations_have_connection_terms(registry):
    from crforge.cr import connection

    m = hm("id_cr_sphere_s3", registry)
    mg = MapGeometry(m, base(m, registry), 3)
    assert maxabs(connection(mg.src).Gamma_bar.value) > 1e-3


def test_energy_density_oracle(registry):
    m = hm("h3_to_c1", registry)
    mg = MapGeometry(m, [0.0, 0.0, 0.0], 1)
    d = energy_density(mg, [1.0])
    # g(e, conj e) = 1/2 on heisenberg3 and f^1_1 = 1 into the unit-metric C^1 frame
    assert d["H"] == pytest.approx(0.5) and d["F"] == pytest.approx(1.0)
    assert d["Y"] == pytest.approx(2.0)
    assert energy_density(mg, [2.0 - 1j])["Y"] == pytest.approx(d["Y"], abs=1e-11)


def test_constant_map_energy_and_bochner(registry):
    c = HoloMapModel.constant([0.1, 0.2, 0.3], "euclidean_c1", "heisenberg3", "hermitian_to_ph")
    mg = MapGeometry(c, [0.1, 0.1], 2)
    assert energy_density(mg, [1.0 + 1j])["Y"] == 0
    b = bochner_terms(c, SlitBundlePoint(np.array([0.1, 0.1]), np.array([1.0 + 0.5j])))
    for k in ("lhs", "curv_source", "curv_target", "remainder"):
        assert abs(b[k]) < 1e-12


def test_zero_fiber_point_rejected():
    with pytest.raises(ContractViolation):
        SlitBundlePoint(np.zeros(3), np.zeros(1))


def test_slit_bundle_identities(rng):
    slit = SlitBundle("heisenberg3")
    for q in random_slit_points("heisenberg3", rng, 5, np.zeros(3), radius=0.8):
        assert max(slit.residuals(q).values()) < 1e-10
        pc = slit.projection_check(q)
        assert max(pc.values()) < 1e-10


def test_slit_projection_pullback_commutes(rng):
    st_ = structure_for("heisenberg3")
    slit = SlitBundle(st_)
    q = SlitBundlePoint(np.array([0.1, 0.2, -0.1]), np.array([0.7 - 0.2j]))
    for bd in ((1, 0), (0, 1)):
        r = commute_residual(
            lambda zs: slit.base(zs),
            lambda zs: (slit.frame_fn(zs), slit.complement_fn(zs)),
            lambda xs: (st_.frame(xs), st_.complement(xs)),
            lambda ys: ys * (1 + ys[2]),
            bd,
            q.chart_point(),
        )
        assert r["del"] < 1e-9 and r["dbar"] < 1e-9


def test_bochner_flat_pair(registry):
    m = hm("h3_to_c1", registry)
    for q in random_slit_points(m.source, np.random.default_rng(1), 3, [0.0, 0.0, 0.0]):
        b = bochner_terms(m, q)
        assert abs(b["curv_source"]) < 1e-10 and abs(b["curv_target"]) < 1e-10
        assert abs(b["lhs"] - b["remainder"]) < 1e-12
        assert b["remainder"].real >= -1e-9
        assert abs(b["remainder"] - b["dropped"]) < 1e-7


def test_bochner_sphere_identity(registry):
    m = hm("id_cr_sphere_s3", registry)
    for q in random_slit_points(m.source, np.random.default_rng(2), 2, base(m, registry)):
        b = bochner_terms(m, q)
        assert abs(b["remainder"] - b["dropped"]) < 1e-7
        assert b["remainder"].real >= -1e-9


def test_bochner_needs_sasakian_target(registry):
    m = HoloMapModel(lambda xs: xs, "heisenberg3_torsion", "heisenberg3_torsion", "transversal", "id")
    with pytest.raises(HypothesisViolation):
        bochner_terms(m, SlitBundlePoint(np.array([0.3, 0.2, 0.0]), np.array([1.0])))


def test_bochner_frozen_synthetic_mode():
    r = bochner_frozen("cr_sphere_s3", "poincare_disc", [0.2, -0.1, 0.3], [0.1, -0.2], [[0.7 + 0.1j]], [1.0])
    assert r["synthetic"]
    assert r["curv_source"].real > 0 and r["curv_target"].real < 0


def test_frames_for_map_are_normal(registry):
    m = hm("h3_to_disc", registry)
    e, et = normal_frames_for(m, base(m, registry), 4, check=True)
    assert e.point is not None and et.point is not None
