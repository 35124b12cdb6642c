import numpy as np
import pytest

from crforge.cr import LocalGeometry, structure_for
from crforge.errors import ModelSchemaError, ModelValidationError
from crforge.jet import Jet
from crforge.models import (
    Registry,
    heisenberg_model,
    heisenberg_text,
    load_model,
    parse_model_text,
)

H3 = heisenberg_text(1)


def test_heisenberg3_builtin(registry):
    spec = registry.manifold("heisenberg3")
    assert (spec.m, spec.m0, spec.d) == (3, 1, 1)
    assert spec.coordinates == ("x", "y", "t")
    p = np.array([0.4, -0.3, 0.2])
    th = spec.theta(Jet.variables(p, 0)).value
    assert np.allclose(th, [0.3, 0.4, 1.0])


def test_heisenberg_levi_form_positive(registry, rng):
    for _ in range(5):
        p = rng.uniform(-1, 1, 3)
        g = LocalGeometry("heisenberg3", p, 1)
        E = g.E.value
        X = (E[0] + E[0].conj()).real
        JX = (1j * E[0] - 1j * E[0].conj()).real
        val = np.einsum("ab,a,b->", g.dtheta.value, X, JX)
        assert val.real > 0


def test_generated_heisenberg_matches_builtin(registry):
    gen = heisenberg_model(1)
    builtin = registry.manifold("heisenberg3")
    assert gen == builtin
    h5 = heisenberg_model(2)
    assert (h5.m, h5.m0) == (5, 2)
    with pytest.raises(ValueError):
        heisenberg_text(3)


def test_euclidean_c1(registry):
    spec = registry.manifold("euclidean_c1")
    assert (spec.m, spec.m0, spec.d) == (2, 1, 0)
    assert np.allclose(spec.metric(Jet.variables([0.2, 0.1], 0)).value, np.eye(1))


def test_missing_frame_names_field():
    text = H3.replace("[frame]", "[nothing]")
    with pytest.raises(ModelSchemaError, match="frame"):
        parse_model_text(text)


def test_missing_complement_is_an_error():
    text = H3.replace('kind = "pseudo_hermitian"', 'kind = "almost_cr"').replace('[complement]\nvectors = "reeb"', "")
    with pytest.raises(ModelSchemaError, match="complement"):
        parse_model_text(text)


def test_theta_must_annihilate_frame():
    text = H3.replace('components = ["-y", "x", "1"]', 'components = ["1", "x", "1"]')
    with pytest.raises(ModelValidationError, match="annihilate"):
        parse_model_text(text)


def test_dependent_frame_rejected():
    text = H3.replace('["1/2", "-i/2", "(y + i*x)/2"]', '["1", "0", "0"]')
    with pytest.raises(ModelValidationError, match="dependent"):
        parse_model_text(text)


def test_bad_metric_rejected():
    text = """
[manifold]
name = "bad"
kind = "hermitian"
coordinates = ["u", "v"]
[frame]
vectors = [["1/2", "-i/2"]]
[metric]
matrix = [["-1"]]
"""
    with pytest.raises(ModelValidationError):
        parse_model_text(text)


def test_map_arity_checked(registry):
    text = """
[map]
name = "m"
source = "heisenberg3"
target = "euclidean_c1"
kind = "ph_to_hermitian"
components = ["x"]
"""
    with pytest.raises(ModelSchemaError, match="target dimension"):
        parse_model_text(text, registry=registry)


def test_bundle_complex_structure_checked(registry):
    text = """
[bundle]
name = "b"
base = "heisenberg3"
rank = 2
I = [["1", "0"], ["0", "1"]]
omega = [[["0", "0", "0"], ["0", "0", "0"]], [["0", "0", "0"], ["0", "0", "0"]]]
"""
    with pytest.raises(ModelValidationError):
        parse_model_text(text, registry=registry)


def test_unknown_model_lists_names(registry):
    with pytest.raises(ModelSchemaError, match="heisenberg3"):
        registry.get("nope")


def test_listing_categories(registry):
    rows = {r["name"]: r for r in registry.listing()}
    for name in ("heisenberg3", "cr_sphere_s3", "euclidean_c1", "poincare_disc", "h3_to_c1"):
        assert name in rows
    assert rows["heisenberg3"]["category"] == "pseudo-Hermitian"
    assert rows["poincare_disc"]["category"] == "Hermitian"
    assert rows["heisenberg5_nonint"]["category"] == "almost CR"
    assert rows["h3_to_c1"]["category"] == "map"
    assert rows["hm_h3"]["category"] == "bundle"


def test_user_directory(tmp_path):
    (tmp_path / "my_h3.toml").write_text(H3.replace('name = "heisenberg3"', 'name = "my_h3"'))
    reg = Registry([tmp_path])
    assert "my_h3" in reg.names()
    assert reg.manifold("my_h3").m == 3
    empty = Registry([tmp_path / "missing"])
    assert empty.names() == Registry().names()


def test_loading_is_deterministic(tmp_path):
    path = tmp_path / "h.toml"
    path.write_text(H3)
    assert load_model(path) == load_model(path)


def test_structure_classes(registry):
    assert type(structure_for("heisenberg3")).__name__ == "PseudoHermitianModel"
    assert type(structure_for("poincare_disc")).__name__ == "HermitianModel"
    assert type(structure_for("heisenberg5_nonint")).__name__ == "AlmostCRStructure"
