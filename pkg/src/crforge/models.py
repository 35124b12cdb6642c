"""Declarative chart models: manifolds, maps and bundles.

Model files are TOML documents with exactly one of the top-level tables
``[manifold]``, ``[map]`` or ``[bundle]``.  All geometric data are strings
in the expression language of :mod:`crforge.expr`, written in the chart
coordinates.  See ``docs/model-format.md`` for the full grammar.

Manifold files::

    [manifold]
    name = "heisenberg3"
    kind = "pseudo_hermitian"          # or "hermitian", "almost_cr"
    coordinates = ["x", "y", "t"]
    basepoint = [0.0, 0.0, 0.0]
    box = [[-1, 1], [-1, 1], [-1, 1]]  # sampling box

    [frame]                            # (1,0) vectors, coordinate components
    vectors = [["1/2", "-i/2", "(y + i*x)/2"]]

    [complement]                       # F; the string "reeb" means span of xi
    vectors = "reeb"

    [theta]                            # contact form, pseudo-Hermitian only
    components = ["-y", "x", "1"]

    [metric]                           # h(e_i, conj e_j), Hermitian only
    matrix = [["1"]]

Maps carry ``source``, ``target``, ``kind`` and ``components`` (target
coordinates as functions of the source coordinates).  Bundles carry
``base``, real ``rank``, the complex structure matrix ``I`` (column ``j``
is the image of the frame section ``s_j``) and ``omega`` where
``omega[j][p]`` lists the coordinate components of the 1-form
``omega_j^p`` in ``nabla s_j = omega_j^p s_p``.
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import (
    CRForgeError,
    ModelSchemaError,
    ModelValidationError,
)
from .expr import CompiledExpr
from .jet import Jet, stack

MANIFOLD_KINDS = ("pseudo_hermitian", "hermitian", "almost_cr")
MAP_KINDS = ("ph_to_hermitian", "hermitian_to_ph", "transversal")
BUILTIN_DIR = Path(__file__).parent / "builtin"
MODEL_PATH_ENV = "CRFORGE_MODEL_PATH"

# frame independence at the basepoint: smallest singular value threshold
INDEPENDENCE_TOL = 1e-8


def _eval_array(exprs, xs: Jet) -> Jet:
    """Evaluate a nested list of compiled expressions into one jet array."""
    if isinstance(exprs, CompiledExpr):
        return exprs(xs)
    return stack([_eval_array(e, xs) for e in exprs])


def _compile_nested(data, coordinates, where: str):
    if isinstance(data, str):
        try:
            return CompiledExpr(data, coordinates)
        except CRForgeError as exc:
            raise ModelSchemaError(f"{where}: {exc}") from exc
    if isinstance(data, (int, float)) and not isinstance(data, bool):
        return CompiledExpr(repr(float(data)), coordinates)
    if isinstance(data, list):
        return [_compile_nested(d, coordinates, f"{where}[{k}]") for k, d in enumerate(data)]
    raise ModelSchemaError(f"{where}: expected an expression string, got {type(data).__name__}")


def _shape(nested) -> tuple:
    if isinstance(nested, list):
        if not nested:
            return (0,)
        inner = {_shape(n) for n in nested}
        if len(inner) != 1:
            return (len(nested), None)
        return (len(nested),) + inner.pop()
    return ()


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ModelSchemaError(f"missing field '{key}' in [{where}]")
    return table[key]


@dataclass(frozen=True)
class ManifoldSpec:
    """A chart carrying an almost CR or almost Hermitian structure."""

    name: str
    kind: str
    coordinates: tuple
    frame_exprs: tuple
    complement_exprs: object  # tuple of vectors, "reeb", or ()
    theta_exprs: object = None
    metric_exprs: object = None
    basepoint: tuple = ()
    box: tuple = ()
    description: str = ""
    source: str = field(default="", compare=False)

    @property
    def m(self) -> int:
        return len(self.coordinates)

    @property
    def m0(self) -> int:
        return len(self.frame_exprs)

    @property
    def d(self) -> int:
        return self.m - 2 * self.m0

    @property
    def category(self) -> str:
        return {
            "pseudo_hermitian": "pseudo-Hermitian",
            "hermitian": "Hermitian",
            "almost_cr": "almost CR",
        }[self.kind]

    def frame(self, xs: Jet) -> Jet:
        """(1,0) frame components, shape (m0, m)."""
        return _eval_array(list(self.frame_exprs), xs)

    def theta(self, xs: Jet) -> Jet:
        if self.theta_exprs is None:
            raise ModelValidationError(f"model {self.name!r} declares no contact form")
        return _eval_array(list(self.theta_exprs), xs)

    def metric(self, xs: Jet) -> Jet:
        if self.metric_exprs is None:
            raise ModelValidationError(f"model {self.name!r} declares no metric")
        return _eval_array([list(r) for r in self.metric_exprs], xs)

    def complement(self, xs: Jet) -> Jet | None:
        """Explicit complement vectors, shape (d, m); None when F is the Reeb line."""
        if self.complement_exprs == "reeb":
            return None
        if self.d == 0:
            return Jet.zeros((0, self.m), xs.nvars, xs.order)
        return _eval_array([list(v) for v in self.complement_exprs], xs)


@dataclass(frozen=True)
class MapSpec:
    name: str
    source: str
    target: str
    kind: str
    component_exprs: tuple
    source_coordinates: tuple
    box: tuple = ()
    description: str = ""
    path: str = field(default="", compare=False)

    @property
    def category(self) -> str:
        return "map"

    def __call__(self, xs: Jet) -> Jet:
        return _eval_array(list(self.component_exprs), xs)


@dataclass(frozen=True)
class BundleSpec:
    name: str
    base: str
    rank: int
    I_exprs: tuple
    omega_exprs: tuple
    base_coordinates: tuple
    description: str = ""
    path: str = field(default="", compare=False)

    @property
    def category(self) -> str:
        return "bundle"

    def complex_structure(self, xs: Jet) -> Jet:
        """Matrix I with I s_j = sum_l I[l, j] s_l, shape (rank, rank)."""
        return _eval_array([list(r) for r in self.I_exprs], xs)

    def connection_forms(self, xs: Jet) -> Jet:
        """omega[j, p, a]: component a of omega_j^p, shape (rank, rank, m)."""
        return _eval_array([[list(c) for c in row] for row in self.omega_exprs], xs)


# parsing --------------------------------------------------------------
def parse_model_text(text: str, origin: str = "<string>", registry=None):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ModelSchemaError(f"{origin}: {exc}") from exc
    sections = [k for k in ("manifold", "map", "bundle") if k in data]
    if len(sections) != 1:
        raise ModelSchemaError(
            f"{origin}: expected exactly one of [manifold], [map], [bundle]; found {sections or 'none'}"
        )
    kind = sections[0]
    if kind == "manifold":
        return _parse_manifold(data, origin)
    registry = registry if registry is not None else default_registry()
    if kind == "map":
        return _parse_map(data["map"], origin, registry)
    return _parse_bundle(data["bundle"], origin, registry)


def _float_vector(values, n, where):
    try:
        out = tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise ModelSchemaError(f"{where}: expected {n} numbers") from exc
    if len(out) != n:
        raise ModelSchemaError(f"{where}: expected {n} entries, got {len(out)}")
    return out


def _parse_box(raw, n, where):
    if not isinstance(raw, list) or len(raw) != n:
        raise ModelSchemaError(f"{where}: expected {n} [low, high] pairs")
    box = tuple(_float_vector(b, 2, where) for b in raw)
    if any(lo >= hi for lo, hi in box):
        raise ModelSchemaError(f"{where}: every interval needs low < high")
    return box


def _parse_manifold(data, origin):
    man = data["manifold"]
    name = _require(man, "name", "manifold")
    kind = _require(man, "kind", "manifold")
    if kind not in MANIFOLD_KINDS:
        raise ModelSchemaError(f"{origin}: kind must be one of {MANIFOLD_KINDS}, got {kind!r}")
    coords = tuple(_require(man, "coordinates", "manifold"))
    m = len(coords)
    if len(set(coords)) != m or not all(isinstance(c, str) and c.isidentifier() for c in coords):
        raise ModelSchemaError(f"{origin}: coordinates must be distinct identifiers")
    basepoint = _float_vector(man.get("basepoint", [0.0] * m), m, "manifold.basepoint")
    box = _parse_box(man.get("box", [[-1.0, 1.0]] * m), m, "manifold.box")

    if "frame" not in data:
        raise ModelSchemaError(f"{origin}: missing field 'frame' (section [frame])")
    frame_raw = _require(data["frame"], "vectors", "frame")
    frame = _compile_nested(frame_raw, coords, "frame.vectors")
    shape = _shape(frame)
    if len(shape) != 2 or shape[1] != m or shape[0] < 1:
        raise ModelSchemaError(f"{origin}: frame.vectors must be a list of {m}-component vectors")
    m0 = shape[0]
    d = m - 2 * m0
    if d < 0:
        raise ModelSchemaError(f"{origin}: {m0} frame vectors exceed half the dimension {m}")

    complement = ()
    comp_raw = data.get("complement", {}).get("vectors")
    if d > 0 and comp_raw is None:
        raise ModelSchemaError(f"{origin}: missing field 'complement' (required when d = {d} > 0)")
    if comp_raw == "reeb":
        if kind != "pseudo_hermitian":
            raise ModelSchemaError(f"{origin}: complement 'reeb' needs a pseudo_hermitian model")
        complement = "reeb"
    elif comp_raw is not None:
        complement = _compile_nested(comp_raw, coords, "complement.vectors")
        cshape = _shape(complement)
        if d == 0 and complement == []:
            complement = ()
        elif len(cshape) != 2 or cshape != (d, m):
            raise ModelSchemaError(
                f"{origin}: complement.vectors must hold {d} vectors of {m} components"
            )
        else:
            complement = tuple(tuple(v) for v in complement)

    theta = None
    metric = None
    if kind == "pseudo_hermitian":
        if d != 1:
            raise ModelSchemaError(f"{origin}: pseudo_hermitian models need d = 1, got d = {d}")
        if "theta" not in data:
            raise ModelSchemaError(f"{origin}: missing field 'theta' (section [theta])")
        theta = _compile_nested(_require(data["theta"], "components", "theta"), coords, "theta")
        if _shape(theta) != (m,):
            raise ModelSchemaError(f"{origin}: theta.components must have {m} entries")
        theta = tuple(theta)
    if kind == "hermitian":
        if d != 0:
            raise ModelSchemaError(f"{origin}: hermitian models need d = 0, got d = {d}")
        if "metric" not in data:
            raise ModelSchemaError(f"{origin}: missing field 'metric' (section [metric])")
        metric = _compile_nested(_require(data["metric"], "matrix", "metric"), coords, "metric")
        if _shape(metric) != (m0, m0):
            raise ModelSchemaError(f"{origin}: metric.matrix must be {m0}x{m0}")
        metric = tuple(tuple(r) for r in metric)

    spec = ManifoldSpec(
        name=name,
        kind=kind,
        coordinates=coords,
        frame_exprs=tuple(tuple(v) for v in frame),
        complement_exprs=complement,
        theta_exprs=theta,
        metric_exprs=metric,
        basepoint=basepoint,
        box=box,
        description=man.get("description", ""),
        source=origin,
    )
    validate_manifold(spec)
    return spec


def validate_manifold(spec: ManifoldSpec) -> None:
    """Spot-check frame independence and positivity at the basepoint."""
    xs = Jet.variables(spec.basepoint, 0)
    try:
        E = spec.frame(xs).value
        blocks = [E, E.conj()]
        if spec.complement_exprs != "reeb" and spec.d > 0:
            blocks.append(spec.complement(xs).value)
        B = np.concatenate(blocks, axis=0)
        sv = np.linalg.svd(B, compute_uv=False)
        if sv.min() < INDEPENDENCE_TOL * max(1.0, sv.max()):
            raise ModelValidationError(
                f"model {spec.name!r}: frame is dependent at the basepoint "
                f"(smallest singular value {sv.min():.3g})"
            )
        if spec.kind == "pseudo_hermitian":
            th = spec.theta(xs).value
            if np.max(np.abs(E @ th)) > 1e-10:
                raise ModelValidationError(
                    f"model {spec.name!r}: theta does not annihilate the frame at the basepoint"
                )
        if spec.kind == "hermitian":
            h = spec.metric(xs).value
            if np.max(np.abs(h - h.conj().T)) > 1e-10 or np.linalg.eigvalsh(h).min() <= 0:
                raise ModelValidationError(
                    f"model {spec.name!r}: metric is not Hermitian positive definite at the basepoint"
                )
    except ModelValidationError:
        raise
    except CRForgeError as exc:
        raise ModelValidationError(f"model {spec.name!r}: {exc}") from exc


def _parse_map(table, origin, registry):
    name = _require(table, "name", "map")
    source = registry.manifold(_require(table, "source", "map"))
    target = registry.manifold(_require(table, "target", "map"))
    kind = _require(table, "kind", "map")
    if kind not in MAP_KINDS:
        raise ModelSchemaError(f"{origin}: map kind must be one of {MAP_KINDS}, got {kind!r}")
    comps = _compile_nested(_require(table, "components", "map"), source.coordinates, "map.components")
    if _shape(comps) != (target.m,):
        raise ModelSchemaError(
            f"{origin}: map.components must have {target.m} entries (target dimension)"
        )
    box = _parse_box(table["box"], source.m, "map.box") if "box" in table else source.box
    return MapSpec(
        name=name,
        source=source.name,
        target=target.name,
        kind=kind,
        component_exprs=tuple(comps),
        source_coordinates=source.coordinates,
        box=box,
        description=table.get("description", ""),
        path=origin,
    )


def _parse_bundle(table, origin, registry):
    name = _require(table, "name", "bundle")
    base = registry.manifold(_require(table, "base", "bundle"))
    rank = _require(table, "rank", "bundle")
    if not isinstance(rank, int) or rank < 2 or rank % 2:
        raise ModelSchemaError(f"{origin}: bundle rank must be a positive even integer")
    I = _compile_nested(_require(table, "I", "bundle"), base.coordinates, "bundle.I")
    if _shape(I) != (rank, rank):
        raise ModelSchemaError(f"{origin}: bundle.I must be {rank}x{rank}")
    omega = _compile_nested(_require(table, "omega", "bundle"), base.coordinates, "bundle.omega")
    if _shape(omega) != (rank, rank, base.m):
        raise ModelSchemaError(
            f"{origin}: bundle.omega must have shape {rank}x{rank}x{base.m}"
        )
    spec = BundleSpec(
        name=name,
        base=base.name,
        rank=rank,
        I_exprs=tuple(tuple(r) for r in I),
        omega_exprs=tuple(tuple(tuple(c) for c in row) for row in omega),
        base_coordinates=base.coordinates,
        description=table.get("description", ""),
        path=origin,
    )
    xs = Jet.variables(base.basepoint, 0)
    Iv = spec.complex_structure(xs).value
    if np.max(np.abs(Iv @ Iv + np.eye(rank))) > 1e-10:
        raise ModelValidationError(f"bundle {name!r}: I^2 + id does not vanish at the basepoint")
    return spec


def load_model(path, registry=None):
    """Load a manifold, map or bundle model from a TOML file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelSchemaError(f"cannot read model file {path}: {exc}") from exc
    return parse_model_text(text, str(path), registry)


# registry -------------------------------------------------------------
def _model_section(path: Path) -> str | None:
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError):
        return None
    for key in ("manifold", "map", "bundle"):
        if key in data:
            return key
    return None


class Registry:
    """Name -> model lookup over the builtin directory and user directories.

    Files are parsed lazily; manifolds are resolved before maps and bundles
    because the latter refer to manifolds by name.
    """

    def __init__(self, directories=()):
        self.directories = [BUILTIN_DIR, *[Path(d) for d in directories]]
        self._paths = {}
        for directory in self.directories:
            if not directory.is_dir():
                continue
            for path in sorted(directory.glob("*.toml")):
                self._paths[path.stem] = path
        self._cache = {}

    @classmethod
    def from_environment(cls) -> "Registry":
        raw = os.environ.get(MODEL_PATH_ENV, "")
        return cls([d for d in raw.split(os.pathsep) if d])

    def names(self) -> list[str]:
        return sorted(self._paths)

    def get(self, name: str):
        if name not in self._cache:
            if name not in self._paths:
                raise ModelSchemaError(
                    f"unknown model {name!r}; available: {', '.join(self.names())}"
                )
            self._cache[name] = load_model(self._paths[name], self)
        return self._cache[name]

    def manifold(self, name: str) -> ManifoldSpec:
        model = self.get(name)
        if not isinstance(model, ManifoldSpec):
            raise ModelSchemaError(f"model {name!r} is a {model.category}, not a manifold")
        return model

    def map(self, name: str) -> MapSpec:
        model = self.get(name)
        if not isinstance(model, MapSpec):
            raise ModelSchemaError(f"model {name!r} is not a map")
        return model

    def bundle(self, name: str) -> BundleSpec:
        model = self.get(name)
        if not isinstance(model, BundleSpec):
            raise ModelSchemaError(f"model {name!r} is not a bundle")
        return model

    def listing(self) -> list[dict]:
        rows = []
        for name in self.names():
            model = self.get(name)
            row = {"name": name, "category": model.category}
            if isinstance(model, ManifoldSpec):
                row.update(dimension=model.m, m0=model.m0, codimension=model.d)
            elif isinstance(model, MapSpec):
                row.update(source=model.source, target=model.target, kind=model.kind)
            else:
                row.update(base=model.base, rank=model.rank)
            rows.append(row)
        return rows


@functools.lru_cache(maxsize=1)
def _builtin_registry() -> Registry:
    return Registry()


def default_registry() -> Registry:
    if os.environ.get(MODEL_PATH_ENV):
        return Registry.from_environment()
    return _builtin_registry()


def get_model(name: str):
    return default_registry().get(name)


def heisenberg_text(n: int) -> str:
    """Model file text for the Heisenberg group of real dimension 2n+1.

    theta = dt + sum(x_j dy_j - y_j dx_j) and
    e_j = (X_j - i Y_j)/2 with X_j = d/dx_j + y_j d/dt, Y_j = d/dy_j - x_j d/dt.
    """
    if not 1 <= n <= 2:
        raise ValueError("heisenberg models are shipped for n = 1, 2")
    if n == 1:
        coords = ["x", "y", "t"]
        pairs = [("x", "y")]
    else:
        coords = [c for j in range(1, n + 1) for c in (f"x{j}", f"y{j}")] + ["t"]
        pairs = [(f"x{j}", f"y{j}") for j in range(1, n + 1)]
    m = 2 * n + 1
    frame = []
    for j, (xj, yj) in enumerate(pairs):
        vec = ["0"] * m
        vec[2 * j] = "1/2"
        vec[2 * j + 1] = "-i/2"
        vec[-1] = f"({yj} + i*{xj})/2"
        frame.append(vec)
    theta = ["0"] * m
    for j, (xj, yj) in enumerate(pairs):
        theta[2 * j] = f"-{yj}"
        theta[2 * j + 1] = xj
    theta[-1] = "1"

    def fmt(v):
        return "[" + ", ".join(f'"{e}"' for e in v) + "]"

    lines = [
        "[manifold]",
        f'name = "heisenberg{m}"',
        'kind = "pseudo_hermitian"',
        f"coordinates = {fmt(coords)}",
        f"basepoint = [{', '.join(['0.0'] * m)}]",
        f"box = [{', '.join(['[-1.0, 1.0]'] * m)}]",
        f'description = "Heisenberg group of dimension {m} with its standard flat Sasakian structure"',
        "",
        "[frame]",
        "vectors = [" + ", ".join(fmt(v) for v in frame) + "]",
        "",
        "[complement]",
        'vectors = "reeb"',
        "",
        "[theta]",
        f"components = {fmt(theta)}",
        "",
    ]
    return "\n".join(lines)


def heisenberg_model(n: int) -> ManifoldSpec:
    return parse_model_text(heisenberg_text(n), f"<heisenberg{2 * n + 1}>")
