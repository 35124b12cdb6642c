"""Check catalogue and suite runner behind the command line.

Every check has a stable id, a short anchor naming the property, the
formula it evaluates and a default tolerance.  A check passes iff its
maximum residual over the sampled points is ``<= tolerance``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import __version__
from .cr import (
    HermitianModel,
    LocalGeometry,
    PseudoHermitianModel,
    chern_connection,
    check_cr_integrability,
    structure_equation_residual,
    structure_for,
    tw_connection,
    verify_chern_axioms,
    verify_tw_axioms,
)
from .errors import CRForgeError, HypothesisViolation
from .frames import normal_quasi_frame, quasi_holomorphic_residuals, verify_normal_frame
from .geometry import (
    calculus_residuals,
    check_max_principle,
    commute_residual,
    constructed_maximum,
    random_polynomial,
)
from .holo import (
    HoloMapModel,
    MapGeometry,
    MapKind,
    SlitBundle,
    SlitBundlePoint,
    bochner_terms,
    classify_map,
    energy_density,
    normal_frames_for,
    structure_eq_residuals,
)
from .lifts import (
    TangentCRStructure,
    bundle_cr_lift,
    lift_identities_check,
    random_horizontal_field,
    restriction_independence,
)
from .models import Registry, default_registry

SCHEMA_VERSION = 1
SUITES = ("all", "frames", "bochner", "lifts")


@dataclass(frozen=True)
class CheckInfo:
    id: str
    anchor: str
    formula: str
    tolerance: float
    rationale: str
    suite: str


def _c(id, anchor, formula, tol, rationale, suite="all"):
    return CheckInfo(id, anchor, formula, tol, rationale, suite)


_ROUNDOFF = "exact identity; residual is floating-point roundoff in jet arithmetic"
_DERIVED = "identity holds exactly; several chained jet solves accumulate more roundoff"

CATALOGUE: dict[str, CheckInfo] = {
    c.id: c
    for c in [
        _c("integrability.first_condition", "CR integrability, first condition",
           "[JX,Y] + [X,JY] has no component along F, for X, Y in HM", 1e-9, _ROUNDOFF),
        _c("integrability.nijenhuis", "CR integrability, Nijenhuis tensor",
           "N_J(X,Y) = [JX,JY] - J[JX,Y] - J[X,JY] - [X,Y] vanishes for X, Y in HM", 1e-9, _ROUNDOFF),
        _c("tw.parallel_H", "Tanaka-Webster: Levi distribution parallel",
           "theta(nabla_Z Y) = 0 for Y in HM", 1e-9, _ROUNDOFF),
        _c("tw.nabla_J", "Tanaka-Webster: J parallel", "nabla_Z (J Y) - J nabla_Z Y = 0", 1e-9, _ROUNDOFF),
        _c("tw.nabla_g", "Tanaka-Webster: Webster metric parallel",
           "Z g(Y,W) - g(nabla_Z Y, W) - g(Y, nabla_Z W) = 0", 1e-9, _ROUNDOFF),
        _c("tw.torsion_H", "Tanaka-Webster: horizontal torsion",
           "T(X,Y) = 2 dtheta(X,Y) xi for X, Y in HM", 1e-9, _ROUNDOFF),
        _c("tw.torsion_purity", "Tanaka-Webster: pseudo-Hermitian torsion purity",
           "T(xi, JX) + J T(xi, X) = 0", 1e-9, _ROUNDOFF),
        _c("tw.structure_equation", "first structure equation",
           "d theta^i = theta^j ^ theta^i_j + theta ^ A^i_{bar j} conj(theta^j)", 1e-9, _ROUNDOFF),
        _c("chern.nabla_J", "Chern connection: J parallel", "nabla J = 0", 1e-9, _ROUNDOFF),
        _c("chern.nabla_g", "Chern connection: metric parallel", "nabla g = 0", 1e-9, _ROUNDOFF),
        _c("chern.torsion_11", "Chern connection: no (1,1) torsion", "T(e_i, conj e_j) = 0", 1e-9, _ROUNDOFF),
        _c("calculus.d_squared", "d o d = 0 on jets", "d(d w) = 0 for random functions and 1-forms", 1e-9, _ROUNDOFF),
        _c("calculus.leibniz", "Leibniz rule for del and dbar",
           "del(u w) = del u ^ w + u del w (and the dbar analogue)", 1e-9, _ROUNDOFF),
        _c("calculus.conjugation", "conjugation swaps del and dbar", "conj(del w) = dbar(conj w)", 1e-9, _ROUNDOFF),
        _c("calculus.max_gradient", "maximum principle: critical point",
           "|du(p)| at a constructed strict maximum", 1e-10, _ROUNDOFF),
        _c("calculus.max_hessian", "maximum principle: sign of del dbar u",
           "max(0, Re del dbar u(V, conj V)(p)) at a constructed maximum", 1e-9,
           "a maximum forces Re del dbar u(V, conj V) <= 0; positive values beyond roundoff are violations"),
        _c("calculus.pullback_commutation", "pullback commutes with del and dbar",
           "f^* del w = del f^* w and f^* dbar w = dbar f^* w for almost CR maps with df(F1) in F2",
           1e-9, _ROUNDOFF),
        _c("frames.Gamma", "normal frame: Christoffel symbols vanish", "Gamma^k_{ij}(p) = 0", 1e-8, _DERIVED, "frames"),
        _c("frames.Gamma_bar", "normal frame: mixed Christoffel symbols vanish",
           "Gamma^k_{bar i j}(p) = 0", 1e-8, _DERIVED, "frames"),
        _c("frames.del_Gamma_bar", "normal frame: del of mixed symbols",
           "e_l(Gamma^k_{bar i j})(p) = 0", 1e-8, _DERIVED, "frames"),
        _c("frames.dbar_Gamma_bar", "normal frame: dbar of mixed symbols",
           "conj(e_l)(Gamma^k_{bar i j})(p) = 0", 1e-8, _DERIVED, "frames"),
        _c("frames.curvature_identity", "normal frame: curvature from the metric",
           "R_{i bar j k bar l}(p) = -conj(e_j) e_i g_{k bar l}(p)", 1e-7,
           "two independent evaluation paths; second derivatives of composed frames", "frames"),
        _c("frames.unitary", "normal frame: unitary at p", "g_{i bar j}(p) = delta_ij", 1e-8, _DERIVED, "frames"),
        _c("frames.dH_g", "normal frame: horizontal metric derivatives",
           "e_l g(p) = conj(e_l) g(p) = 0", 1e-8, _DERIVED, "frames"),
        _c("frames.reeb_bracket", "normal frame: Reeb bracket",
           "[xi, e_i]_{1,0}(p) = 0", 1e-8, _DERIVED, "frames"),
        _c("frames.quasi_holomorphic", "quasi holomorphic frame conditions",
           "[e_i, conj v]_{1,0}(p) = 0 and [[e_i, conj a]_H, b]_{1,0}(p) = 0", 1e-8, _DERIVED, "frames"),
        _c("maps.commutation", "holomorphy of the map",
           "df o J - J^N o df on HM (projected per map kind)", 1e-9, _ROUNDOFF, "bochner"),
        _c("maps.df_xi", "Reeb field is killed", "|df(xi)|", 1e-9, _ROUNDOFF, "bochner"),
        _c("maps.df_xi_horizontal", "Reeb line is preserved", "|pi_H df(xi)|", 1e-9, _ROUNDOFF, "bochner"),
        _c("maps.pullback_identity", "pullback of the target coframe",
           "f^* theta~^a = f^a_i theta^i on frame vectors", 1e-9, _ROUNDOFF, "bochner"),
        _c("maps.dbar_f", "dbar of the differential components",
           "conj(e_k) f^a_i = f^a_j Gamma^j_{bar k i} - f^b_i Gamma~^a_{bar c b} conj(f^c_k)", 1e-8, _DERIVED,
           "bochner"),
        _c("maps.xi_f", "Reeb derivative of the differential components", "xi(f^a_i) = 0", 1e-9, _ROUNDOFF,
           "bochner"),
        _c("slit.dbar_W", "slit bundle: fiber coordinates are CR functions", "dbar W^i = 0", 1e-10, _ROUNDOFF,
           "bochner"),
        _c("slit.del_Wbar", "slit bundle: conjugate fiber coordinates", "del conj(W^i) = 0", 1e-10, _ROUNDOFF,
           "bochner"),
        _c("slit.del_dbar_Wbar", "slit bundle: second order, conjugate", "del dbar conj(W^i) = 0", 1e-10,
           _ROUNDOFF, "bochner"),
        _c("slit.dbar_del_W", "slit bundle: second order", "dbar del W^i = 0", 1e-10, _ROUNDOFF, "bochner"),
        _c("slit.projection", "slit bundle: projection is an almost CR map",
           "dpi(T10) in T10, dpi(F) in F and dpi(d/dW) = 0", 1e-10, _ROUNDOFF, "bochner"),
        _c("bochner.two_path", "Bochner decomposition, two evaluation paths",
           "|lhs - (curv_source - curv_target) - dropped|", 1e-7,
           "second derivatives of a quotient on the slit bundle against first derivatives on the base",
           "bochner"),
        _c("bochner.remainder_nonneg", "Bochner remainder is nonnegative",
           "max(0, -Re remainder)", 1e-9, "the dropped term is a positive semidefinite Hermitian form",
           "bochner"),
        _c("bochner.homogeneity", "energy density is projectively invariant",
           "|Y(lambda W) - Y(W)|", 1e-11, _ROUNDOFF, "bochner"),
        _c("lifts.AC_ZC", "complete lift of a tensor on complete lifts", "A^C Z^C = (AZ)^C", 1e-10, _ROUNDOFF,
           "lifts"),
        _c("lifts.AC_ZV", "complete lift of a tensor on vertical lifts", "A^C Z^V = (AZ)^V", 1e-10, _ROUNDOFF,
           "lifts"),
        _c("lifts.A2_C", "complete lift of a square", "(A^2)^C = (A^C)^2", 1e-10, _ROUNDOFF, "lifts"),
        _c("lifts.bracket_VV", "vertical lifts commute", "[Z^V, W^V] = 0", 1e-10, _ROUNDOFF, "lifts"),
        _c("lifts.bracket_VC", "mixed lift bracket", "[Z^V, W^C] = [Z,W]^V", 1e-10, _ROUNDOFF, "lifts"),
        _c("lifts.bracket_CC", "complete lift bracket", "[Z^C, W^C] = [Z,W]^C", 1e-10, _ROUNDOFF, "lifts"),
        _c("lifts.J_squared", "lifted structure map squares to -id",
           "(J^C)^2 = -id on (HM)^V + (HM)^C", 1e-10, _ROUNDOFF, "lifts"),
        _c("lifts.first_condition", "lifted structure, first integrability condition",
           "[J^C X, Y] + [X, J^C Y] in (HM)^V + (HM)^C", 1e-9, _ROUNDOFF, "lifts"),
        _c("lifts.nijenhuis", "lifted structure, Nijenhuis tensor",
           "N_{J^C} = 0 on the lifted distribution", 1e-9, _ROUNDOFF, "lifts"),
        _c("lifts.transfer_VV", "Nijenhuis transfer on vertical lifts", "N_{J^C}(Z^V, W^V) = 0", 1e-8,
           _ROUNDOFF, "lifts"),
        _c("lifts.transfer_CC", "Nijenhuis transfer on complete lifts",
           "N_{J^C}(Z^C, W^C) = (N_J(Z,W))^C", 1e-8, _ROUNDOFF, "lifts"),
        _c("lifts.transfer_CV", "Nijenhuis transfer, mixed", "N_{J^C}(Z^C, W^V) = (N_J(Z,W))^V", 1e-8,
           _ROUNDOFF, "lifts"),
        _c("lifts.restriction_independence", "lifted structure does not depend on the complement",
           "J^C from two complements agree on (HM)^V + (HM)^C", 1e-10, _ROUNDOFF, "lifts"),
        _c("bundle.J_squared", "bundle lift: structure map squares to -id", "J_E^2 = -id on HE", 1e-10,
           _ROUNDOFF, "lifts"),
        _c("bundle.dp_HE_in_HM", "bundle lift: projection maps HE into HM", "F-component of dp(HE)", 1e-10,
           _ROUNDOFF, "lifts"),
        _c("bundle.dp_commutes", "bundle lift: projection commutes with the structure maps",
           "dp o J_E - J o dp on HE", 1e-10, _ROUNDOFF, "lifts"),
    ]
}


class ConfigError(CRForgeError):
    """Invalid suite configuration (exit code 2)."""


class EvaluationError(CRForgeError):
    """A check raised while evaluating (exit code 3)."""

    def __init__(self, check_id: str, cause: BaseException):
        super().__init__(f"evaluation failed in check {check_id!r}: {type(cause).__name__}: {cause}")
        self.check_id = check_id
        self.cause = cause


@dataclass
class SuiteConfig:
    model: str
    map: str | None = None
    suite: str = "all"
    points: int = 3
    seed: int = 0
    order: int = 4
    tolerances: dict = field(default_factory=dict)

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d["tolerances"] = dict(sorted(self.tolerances.items()))
        return d


def parse_tolerances(items) -> dict:
    """``["key=val", ...]`` -> dict; keys are check ids, id prefixes or ``*``."""
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"tolerance override {item!r} is not of the form key=value")
        try:
            tol = float(val)
        except ValueError:
            raise ConfigError(f"tolerance override {item!r}: {val!r} is not a number") from None
        if not np.isfinite(tol) or tol < 0:
            raise ConfigError(f"tolerance override {item!r} must be finite and >= 0")
        if key != "*" and key not in CATALOGUE and not any(c.startswith(key + ".") for c in CATALOGUE):
            raise ConfigError(f"tolerance override {key!r} matches no check id or group")
        out[key] = tol
    return out


def tolerance_for(check_id: str, overrides: dict) -> float:
    if check_id in overrides:
        return overrides[check_id]
    group = check_id.split(".")[0]
    if group in overrides:
        return overrides[group]
    if "*" in overrides:
        return overrides["*"]
    return CATALOGUE[check_id].tolerance


def validate_config(cfg: SuiteConfig, registry: Registry):
    if cfg.suite not in SUITES:
        raise ConfigError(f"unknown suite {cfg.suite!r}; choose one of {', '.join(SUITES)}")
    if cfg.points < 1:
        raise ConfigError("--points must be >= 1")
    if not 3 <= cfg.order <= 8:
        raise ConfigError("--order must be between 3 and 8")
    try:
        model = registry.manifold(cfg.model)
    except CRForgeError as exc:
        raise ConfigError(str(exc)) from None
    spec = None
    if cfg.map is not None:
        try:
            spec = registry.map(cfg.map)
        except CRForgeError as exc:
            raise ConfigError(str(exc)) from None
        if spec.source != cfg.model:
            raise ConfigError(f"map {cfg.map!r} has source {spec.source!r}, not {cfg.model!r}")
    return model, spec


def sample_points(box, n: int, seed: int) -> np.ndarray:
    """Scrambled Halton points in ``box`` (list of (low, high))."""
    box = np.asarray(box, dtype=float)
    sampler = qmc.Halton(d=len(box), scramble=True, rng=np.random.default_rng(seed))
    return qmc.scale(sampler.random(n), box[:, 0], box[:, 1])


def shrink_box(box, factor: float = 0.5):
    """The box scaled by ``factor`` about its center; suites sample away from the chart edge."""
    return [((lo + hi) / 2 - factor * (hi - lo) / 2, (lo + hi) / 2 + factor * (hi - lo) / 2) for lo, hi in box]


class _Recorder:
    def __init__(self):
        self.values: dict[str, list[float]] = {}

    def add(self, check_id: str, value: float):
        if check_id not in CATALOGUE:
            raise KeyError(check_id)
        self.values.setdefault(check_id, []).append(float(value))


def _guard(check_id):
    def deco(fn):
        def wrapped(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except EvaluationError:
                raise
            except Exception as exc:  # noqa: BLE001 - reported with the check id
                raise EvaluationError(check_id, exc) from exc

        return wrapped

    return deco


# groups ----------------------------------------------------------------
@_guard("integrability.nijenhuis")
def _group_structure(rec, st, pts, rng, cfg):
    for p in pts:
        r = check_cr_integrability(st, [p], rng, order=3, samples=2)
        rec.add("integrability.first_condition", r["first_condition"])
        rec.add("integrability.nijenhuis", r["nijenhuis"])


@_guard("tw.nabla_g")
def _group_connection(rec, st, pts, rng, cfg):
    for p in pts:
        if isinstance(st, PseudoHermitianModel):
            conn = tw_connection(st, p, cfg.order)
            for k, v in verify_tw_axioms(conn, rng).items():
                rec.add(f"tw.{k}", v)
            rec.add("tw.structure_equation", structure_equation_residual(conn))
        elif isinstance(st, HermitianModel):
            conn = chern_connection(st, p, cfg.order)
            for k, v in verify_chern_axioms(conn, rng).items():
                rec.add(f"chern.{k}", v)


@_guard("calculus.leibniz")
def _group_calculus(rec, st, pts, rng, cfg, hm=None):
    for p in pts:
        S = LocalGeometry(st, p, 3).S
        for k, v in calculus_residuals(S, rng).items():
            rec.add(f"calculus.{k}", v)
        u = constructed_maximum(S, rng)
        c = rng.normal(size=S.m0) + 1j * rng.normal(size=S.m0)
        V = (S.E * c.reshape(-1, 1)).sum(axis=0)
        mp = check_max_principle(u, S, V)
        rec.add("calculus.max_gradient", mp["du_norm"])
        rec.add("calculus.max_hessian", max(0.0, mp["ddbar_value"].real))
        for r in _pullback_instances(st, hm, p, rng):
            rec.add("calculus.pullback_commutation", r)


def _pullback_instances(st, hm, p, rng):
    """Commutation residuals for the identity map and, if it is almost CR, the configured map."""
    src_split = lambda xs: (st.frame(xs), st.complement(xs))  # noqa: E731
    cases = [((lambda xs: xs), st, False)]
    if hm is not None:
        cases.append((hm.fn, hm.target, True))
    out = []
    for f, target, optional in cases:
        tgt_split = lambda ys, t=target: (t.frame(ys), t.complement(ys))  # noqa: E731
        n = target.m
        form = random_polynomial(n, rng, 2, shape=(n,), center=np.zeros(n))
        try:
            for bd in ((1, 0), (0, 1)):
                r = commute_residual(f, src_split, tgt_split, form, bd, p, order=3)
                out.append(max(r["del"], r["dbar"]))
        except HypothesisViolation:
            # the identity only holds for almost CR maps; other map kinds are covered by maps.*
            if not optional:
                raise
    return out


@_guard("frames.curvature_identity")
def _group_frames(rec, st, pts, rng, cfg):
    if not isinstance(st, (PseudoHermitianModel, HermitianModel)):
        return
    for p in pts:
        e = normal_quasi_frame(st, p, cfg.order, rng)
        r = verify_normal_frame(st, p, e, cfg.order)
        for k in ("Gamma", "Gamma_bar", "del_Gamma_bar", "dbar_Gamma_bar", "curvature_identity", "unitary", "dH_g"):
            rec.add(f"frames.{k}", r[k])
        if isinstance(st, PseudoHermitianModel):
            rec.add("frames.reeb_bracket", r["reeb_bracket"])
        qh = quasi_holomorphic_residuals(st, p, e, cfg.order, rng)
        rec.add("frames.quasi_holomorphic", max(qh.values()))


@_guard("slit.dbar_W")
def _group_slit(rec, st, pts, rng, cfg):
    slit = SlitBundle(st)
    for p in pts:
        W = rng.normal(size=st.m0) + 1j * rng.normal(size=st.m0)
        q = SlitBundlePoint(p, W)
        for k, v in slit.residuals(q).items():
            rec.add(f"slit.{k}", v)
        pc = slit.projection_check(q)
        rec.add("slit.projection", max(pc.values()))


@_guard("bochner.two_path")
def _group_maps(rec, hm: HoloMapModel, pts, rng, cfg):
    for p in pts:
        cls = classify_map(hm, [p])
        rec.add("maps.commutation", cls["commutation"])
        if "df_xi" in cls:
            rec.add("maps.df_xi", cls["df_xi"])
        if "df_xi_horizontal" in cls:
            rec.add("maps.df_xi_horizontal", cls["df_xi_horizontal"])
        se = structure_eq_residuals(hm, p)
        rec.add("maps.pullback_identity", se["pullback"])
        rec.add("maps.dbar_f", se["dbar_f"])
        if "xi_f" in se:
            rec.add("maps.xi_f", se["xi_f"])
        frames = normal_frames_for(hm, p, cfg.order, check=False)
        for _ in range(2):
            W = rng.normal(size=hm.source.m0) + 1j * rng.normal(size=hm.source.m0)
            b = bochner_terms(hm, SlitBundlePoint(p, W), cfg.order, frames=frames)
            rec.add("bochner.two_path", abs(b["remainder"] - b["dropped"]))
            rec.add("bochner.remainder_nonneg", max(0.0, -b["remainder"].real))
            mg = MapGeometry(hm, p, 1, *frames)
            lam = complex(rng.normal(), rng.normal()) or 1.0
            rec.add("bochner.homogeneity", abs(energy_density(mg, lam * W)["Y"] - energy_density(mg, W)["Y"]))


@_guard("lifts.bracket_CC")
def _group_lifts(rec, st, pts, rng, cfg, registry):
    m = st.m
    T = TangentCRStructure(st)
    for p in pts:
        y = rng.uniform(-0.5, 0.5, size=m)
        q = np.concatenate([p, y])
        Z = random_polynomial(m, rng, 3, shape=(m,), center=p, scale=0.5)
        W = random_polynomial(m, rng, 3, shape=(m,), center=p, scale=0.5)
        A = random_polynomial(m, rng, 3, shape=(m, m), center=p, scale=0.5)
        for k, v in lift_identities_check(Z, W, A, m, [q]).items():
            rec.add(f"lifts.{k}", v)
        rec.add("lifts.J_squared", T.structure_checks(q)["J_squared"])
        integ = T.integrability(q, rng)
        rec.add("lifts.first_condition", integ["first_condition"])
        rec.add("lifts.nijenhuis", integ["nijenhuis"])
        Zh, Wh = random_horizontal_field(st, rng), random_horizontal_field(st, rng)
        tr = T.transfer(q, Zh, Wh)
        rec.add("lifts.transfer_VV", tr["VV"])
        rec.add("lifts.transfer_CC", tr["CC"])
        rec.add("lifts.transfer_CV", tr["CV"])
        if st.d:
            shift = rng.normal(size=st.m0) + 1j * rng.normal(size=st.m0)
            alt = _shifted_complement(st, shift)
            rec.add("lifts.restriction_independence", restriction_independence(st, None, alt, q))
    for name in registry.names():
        try:
            spec = registry.bundle(name)
        except CRForgeError:
            continue
        if spec.base != st.name:
            continue
        bpts = [np.concatenate([p, rng.uniform(-0.5, 0.5, size=spec.rank)]) for p in pts]
        _, rep = bundle_cr_lift(spec, bpts, registry)
        for k in ("J_squared", "dp_HE_in_HM", "dp_commutes"):
            rec.add(f"bundle.{k}", rep[k])


def _shifted_complement(st, shift):
    def fn(xs):
        F = st.complement(xs)
        E = st.frame(xs)
        v = (E * shift.reshape(-1, 1)).sum(axis=0)
        return F + (v + v.conj()).reshape(1, -1)

    return fn


# runner ---------------------------------------------------------------
def _wants(cfg: SuiteConfig, suite: str) -> bool:
    return cfg.suite == "all" or cfg.suite == suite


def run_suite(cfg: SuiteConfig, registry: Registry | None = None) -> dict:
    """Run the configured checks and return the report dictionary (no timestamp)."""
    registry = registry or default_registry()
    model_spec, map_spec = validate_config(cfg, registry)
    st = structure_for(model_spec)
    rng = np.random.default_rng(cfg.seed)
    box = map_spec.box if map_spec is not None and map_spec.box else shrink_box(model_spec.box)
    pts = sample_points(box, cfg.points, cfg.seed)
    hm = HoloMapModel.from_spec(map_spec, registry) if map_spec is not None else None
    rec = _Recorder()
    if cfg.suite == "all":
        _group_structure(rec, st, pts, rng, cfg)
        _group_connection(rec, st, pts, rng, cfg)
        _group_calculus(rec, st, pts, rng, cfg, hm)
    if _wants(cfg, "frames"):
        _group_frames(rec, st, pts, rng, cfg)
    if _wants(cfg, "bochner"):
        _group_slit(rec, st, pts, rng, cfg)
        if hm is not None:
            _group_maps(rec, hm, pts, rng, cfg)
    if _wants(cfg, "lifts"):
        _group_lifts(rec, st, pts, rng, cfg, registry)
    return build_report(cfg, rec.values)


def build_report(cfg: SuiteConfig, values: dict) -> dict:
    checks = []
    for cid in sorted(values):
        vals = values[cid]
        tol = tolerance_for(cid, cfg.tolerances)
        worst = max(vals)
        checks.append(
            {
                "id": cid,
                "anchor": CATALOGUE[cid].anchor,
                "max_residual": worst,
                "tolerance": tol,
                "pass": bool(worst <= tol),
                "points": len(vals),
            }
        )
    passed = sum(c["pass"] for c in checks)
    return {
        "schema_version": SCHEMA_VERSION,
        "engine_version": __version__,
        "config": cfg.echo(),
        "checks": checks,
        "summary": {"total": len(checks), "passed": passed, "failed": len(checks) - passed},
    }


def explain(check_id: str) -> str:
    if check_id not in CATALOGUE:
        raise KeyError(check_id)
    c = CATALOGUE[check_id]
    return "\n".join(
        [
            f"{c.id}: {c.anchor}",
            f"  formula:   {c.formula}",
            f"  tolerance: {c.tolerance:g} ({c.rationale})",
            f"  suite:     {c.suite}",
        ]
    )


__all__ = [
    "CATALOGUE",
    "CheckInfo",
    "ConfigError",
    "EvaluationError",
    "MapKind",
    "SuiteConfig",
    "build_report",
    "explain",
    "parse_tolerances",
    "run_suite",
    "sample_points",
    "tolerance_for",
]
