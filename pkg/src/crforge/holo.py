"""Generalized holomorphic maps, the energy density and its Bochner terms.

Three map classes are supported:

``ph_to_hermitian``
    pseudo-Hermitian source, almost Hermitian target, ``df o J = J^N o df``
    on the Levi distribution and ``df(xi) = 0``;
``hermitian_to_ph``
    almost Hermitian source, pseudo-Hermitian target,
    ``df_H o J^N = J o df_H`` with ``df_H = pi_H o df``;
``transversal``
    pseudo-Hermitian to pseudo-Hermitian, ``df_{M,N} o J = J^N o df_{M,N}``
    on the Levi distribution and ``df(xi)`` tangent to the Reeb line.

Throughout, ``fa[i, alpha] = f^alpha_i`` are the (1,0) components of
``df(e_i)`` (horizontally projected where the kind requires it) in the
target frame.  The energy density on the slit bundle of nonzero (1,0)
vectors ``W = W^i e_i`` is ``Y = F / H`` with
``F = h_{a bar b} f^a_i conj(f^b_j) W^i conj(W^j)`` and
``H = g_{k bar l} W^k conj(W^l)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .cr import HermitianModel, LocalGeometry, PseudoHermitianModel, connection, is_sasakian, structure_for
from .errors import ContractViolation, HypothesisViolation
from .frames import normal_quasi_frame, verify_normal_frame
from .geometry import (
    Splitting,
    apply_field,
    check_pullback_hypotheses,
    del_dbar_function,
    gradient,
    push_vector,
)
from .jet import DEFAULT_ORDER, Jet, compose, concatenate, stack
from .models import MapSpec, default_registry

NORMAL_FRAME_TOL = 1e-8


class MapKind(str, enum.Enum):
    PH_TO_HERMITIAN = "ph_to_hermitian"
    HERMITIAN_TO_PH = "hermitian_to_ph"
    TRANSVERSAL = "transversal"

    @property
    def categories(self) -> tuple[type, type]:
        return {
            MapKind.PH_TO_HERMITIAN: (PseudoHermitianModel, HermitianModel),
            MapKind.HERMITIAN_TO_PH: (HermitianModel, PseudoHermitianModel),
            MapKind.TRANSVERSAL: (PseudoHermitianModel, PseudoHermitianModel),
        }[self]

    @property
    def needs_sasakian_target(self) -> bool:
        return self is not MapKind.PH_TO_HERMITIAN


class HoloMapModel:
    """A map between two builtin (or user) models, tagged with a kind.

    ``fn`` maps source coordinate jets of shape ``(m,)`` to target
    coordinate jets.  Use :meth:`from_spec` for maps loaded from files.
    """

    def __init__(self, fn, source, target, kind, name: str = "map"):
        self.fn = fn
        self.source = structure_for(source)
        self.target = structure_for(target)
        self.kind = MapKind(kind)
        self.name = name
        src_cls, tgt_cls = self.kind.categories
        if not isinstance(self.source, src_cls) or not isinstance(self.target, tgt_cls):
            raise ContractViolation(
                f"map {name!r}: kind {self.kind.value} needs a {src_cls.__name__} source and a "
                f"{tgt_cls.__name__} target, got {type(self.source).__name__} -> {type(self.target).__name__}"
            )

    @classmethod
    def from_spec(cls, spec, registry=None, kind=None) -> "HoloMapModel":
        reg = registry or default_registry()
        if isinstance(spec, str):
            spec = reg.map(spec)
        if not isinstance(spec, MapSpec):
            raise TypeError(f"expected a MapSpec, got {type(spec).__name__}")
        return cls(spec, reg.manifold(spec.source), reg.manifold(spec.target), kind or spec.kind, spec.name)

    @classmethod
    def constant(cls, value, source, target, kind, name: str = "constant") -> "HoloMapModel":
        value = np.asarray(value, dtype=float)

        def fn(xs: Jet) -> Jet:
            return Jet.constant(value, xs.nvars, xs.order)

        return cls(fn, source, target, kind, name)

    def __call__(self, xs: Jet) -> Jet:
        return self.fn(xs)

    def image(self, point) -> np.ndarray:
        return np.asarray(self.fn(Jet.variables(point, 0)).value.real, dtype=float)


class MapGeometry:
    """Jets of a map and of both geometries about a source point.

    Attributes (all jets in the source variables, order ``order``):
    ``e`` source frame, ``g`` source Gram matrix, ``S`` source splitting,
    ``fx`` image, ``Df`` differential, ``etilde`` target frame along ``f``,
    ``St`` target splitting along ``f``, ``h`` target Gram matrix along ``f``,
    ``C[i, A]`` target-frame coefficients of ``df(e_i)`` and ``fa``.
    """

    def __init__(self, hm: HoloMapModel, point, order: int = DEFAULT_ORDER, source_frame=None, target_frame=None):
        self.hm = hm
        self.point = np.asarray(point, dtype=float)
        self.order = order
        self.src = LocalGeometry(hm.source, self.point, order)
        xs1 = Jet.variables(self.point, order + 1)
        fx1 = hm(xs1)
        self.fx = fx1.truncate(order)
        self.Df = gradient(fx1, hm.source.m)
        self.fp = self.fx.value.real
        self.tgt = LocalGeometry(hm.target, self.fp, order)
        self.source_frame = source_frame or hm.source.frame
        self.target_frame = target_frame or hm.target.frame
        self.e = self.source_frame(self.src.xs)
        self.S = Splitting(self.e, self.src.F)
        self.g = self.src.gram(self.e)
        et_local = self.target_frame(self.tgt.xs)
        St_local = Splitting(et_local, self.tgt.F)
        self.h_local = self.tgt.gram(et_local)
        self.etilde = compose(et_local, self.fx)
        self.coframe_t = compose(St_local.coframe, self.fx)
        self.Bt = compose(St_local.B, self.fx)
        self.h = compose(self.h_local, self.fx)
        m0 = self.src.m0
        self.C = stack([self.coframe_t @ push_vector(self.Df, self.S.E[i]) for i in range(m0)])
        n0 = self.tgt.m0
        self.fa = self.C[:, :n0]
        self.St_local = St_local

    @property
    def m0(self) -> int:
        return self.src.m0

    @property
    def n0(self) -> int:
        return self.tgt.m0

    def push(self, v: Jet) -> Jet:
        return push_vector(self.Df, v)

    def target_coefficients(self, v: Jet) -> Jet:
        w = self.push(v)
        return self.coframe_t.truncate(w.order) @ w


def _maxabs(x) -> float:
    return float(np.max(np.abs(np.asarray(x)), initial=0.0))


def classify_map(hm: HoloMapModel, points, order: int = 1) -> dict:
    """Defining commutation residuals of ``hm.kind`` at ``points``.

    Returns ``commutation`` plus ``df_xi`` (kind ``ph_to_hermitian``) or
    ``df_xi_horizontal`` (kind ``transversal``), each the max over points.
    """
    out = {"commutation": 0.0}
    kind = hm.kind
    if kind is MapKind.PH_TO_HERMITIAN:
        out["df_xi"] = 0.0
    elif kind is MapKind.TRANSVERSAL:
        out["df_xi_horizontal"] = 0.0
    n0 = hm.target.m0
    for p in np.atleast_2d(points):
        mg = MapGeometry(hm, p, order)
        m0 = mg.m0
        # frame coefficients of df(e_i) and df(conj e_i) in (etilde, conj etilde, F)
        # df(J X) - J^N df(X) (after pi_H where the kind projects) is 2i times
        # the (0,1) part of df(e_i) for X = e_i; the F part is dropped by pi_H
        # or absent for Hermitian targets
        Bt = mg.Bt.value
        for i in range(m0):
            c = mg.target_coefficients(mg.S.E[i]).value
            bad = c[n0 : 2 * n0] @ Bt[n0 : 2 * n0]
            out["commutation"] = max(out["commutation"], 2.0 * _maxabs(bad))
        if kind is MapKind.PH_TO_HERMITIAN:
            out["df_xi"] = max(out["df_xi"], _maxabs(mg.push(mg.src.F[0]).value))
        elif kind is MapKind.TRANSVERSAL:
            c = mg.target_coefficients(mg.src.F[0]).value
            out["df_xi_horizontal"] = max(out["df_xi_horizontal"], _maxabs(c[: 2 * n0] @ Bt[: 2 * n0]))
    return out


def structure_eq_residuals(hm: HoloMapModel, point, order: int = 3, source_frame=None, target_frame=None) -> dict:
    """Residuals of the map structure equations at ``point``.

    ``pullback``: ``theta~^a(df E_A) - f^a_i theta^i(E_A)`` over the source
    frame ``(e, conj e)`` (and ``xi``).  ``dbar_f``: ``conj e_k (f^a_i) -
    (f^a_j Gamma^j_{bar k i} - f^b_i Gamma~^a_{bar c b} conj f^c_k)``.
    ``xi_f``: ``xi(f^a_i)`` for pseudo-Hermitian sources.
    """
    mg = MapGeometry(hm, point, order, source_frame, target_frame)
    m0, n0 = mg.m0, mg.n0
    S = mg.S
    # pullback identity on frame vectors
    pull = 0.0
    for A in range(S.n):
        lhs = mg.target_coefficients(S.B[A]).value[:n0]
        rhs = mg.fa.value[A] if A < m0 else np.zeros(n0)
        pull = max(pull, _maxabs(lhs - rhs))
    conn_s = connection(mg.src, mg.source_frame)
    conn_t = connection(mg.tgt, mg.target_frame)
    Gs = conn_s.Gamma_bar.value  # [k, i, j] = Gamma^j_{bar k i}
    Gt = conn_t.Gamma_bar.value  # [c, b, a] = Gamma~^a_{bar c b}
    fa = mg.fa
    f0 = fa.value  # [i, a]
    dbar = 0.0
    for k in range(m0):
        lhs = apply_field(S.E[k].conj(), fa).value  # [i, a]
        rhs = np.einsum("ja,ij->ia", f0, Gs[k]) - np.einsum("ib,cba,c->ia", f0, Gt, f0[k].conj())
        dbar = max(dbar, _maxabs(lhs - rhs))
    out = {"pullback": pull, "dbar_f": dbar}
    if mg.src.is_ph:
        out["xi_f"] = _maxabs(apply_field(mg.src.F[0], fa).value)
    return out


# slit bundle -----------------------------------------------------------
@dataclass(frozen=True)
class SlitBundlePoint:
    point: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=complex)
        if not np.any(W):
            raise ContractViolation("slit-bundle point needs a nonzero fiber vector W")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))

    def chart_point(self) -> np.ndarray:
        return np.concatenate([self.point, self.W.real, self.W.imag])


class SlitBundle:
    """Product structure on ``U x (C^{m0} - 0)`` trivialized by a (1,0) frame.

    Chart coordinates are ``(x, Re W, Im W)``; the (1,0) frame is
    ``(e_i, 0)`` together with ``d/dW^j``, the complement is ``(F, 0)``.
    """

    def __init__(self, model, frame=None):
        self.model = structure_for(model)
        self.frame = frame or self.model.frame
        self.m, self.m0 = self.model.m, self.model.m0
        self.dim = self.m + 2 * self.m0

    def base(self, zs: Jet) -> Jet:
        return zs[: self.m]

    def W(self, zs: Jet) -> Jet:
        m, m0 = self.m, self.m0
        return zs[m : m + m0] + zs[m + m0 :] * 1j

    def _pad(self, rows: Jet, zs: Jet) -> Jet:
        k = rows.shape[0]
        return concatenate([rows, Jet.zeros((k, 2 * self.m0), zs.nvars, rows.order)], axis=1)

    def frame_fn(self, zs: Jet) -> Jet:
        m0 = self.m0
        e = self._pad(self.frame(self.base(zs)), zs)
        vert = np.zeros((m0, self.dim), dtype=complex)
        for j in range(m0):
            vert[j, self.m + j] = 0.5
            vert[j, self.m + m0 + j] = -0.5j
        return concatenate([e, Jet.constant(vert, zs.nvars, e.order)], axis=0)

    def complement_fn(self, zs: Jet) -> Jet:
        F = self.model.complement(self.base(zs))
        return self._pad(F, zs)

    def splitting(self, q: SlitBundlePoint, order: int = 3) -> tuple[Splitting, Jet]:
        zs = Jet.variables(q.chart_point(), order)
        return Splitting(self.frame_fn(zs), self.complement_fn(zs)), zs

    def lift(self, jet_x: Jet, zs: Jet) -> Jet:
        """Pull a base jet (about ``p``) back along the projection."""
        return compose(jet_x, self.base(zs))

    def horizontal_vector(self, S: Splitting, V) -> Jet:
        """``V^i e_i`` with constant coefficients, as a field on the chart."""
        V = np.asarray(V, dtype=complex)
        return (S.E[: self.m0] * V.reshape(-1, 1)).sum(axis=0)

    def residuals(self, q: SlitBundlePoint, order: int = 3) -> dict:
        """``dbar W``, ``del conj W``, ``del dbar conj W``, ``dbar del W`` at ``q``."""
        S, zs = self.splitting(q, order)
        out = {"dbar_W": 0.0, "del_Wbar": 0.0, "del_dbar_Wbar": 0.0, "dbar_del_W": 0.0}
        W = self.W(zs)
        for i in range(self.m0):
            w = W[i]
            dw = gradient(w)
            dwb = gradient(w.conj())
            dbar_w = S.project(dw, 0, 1)
            del_wb = S.project(dwb, 1, 0)
            out["dbar_W"] = max(out["dbar_W"], _maxabs(dbar_w.value))
            out["del_Wbar"] = max(out["del_Wbar"], _maxabs(del_wb.value))
            dbar_wb = S.project(dwb, 0, 1)
            out["del_dbar_Wbar"] = max(out["del_dbar_Wbar"], _maxabs(S.dee(dbar_wb, (0, 1)).value))
            del_w = S.project(dw, 1, 0)
            out["dbar_del_W"] = max(out["dbar_del_W"], _maxabs(S.dbar(del_w, (1, 0)).value))
        return out

    def projection_check(self, q: SlitBundlePoint, order: int = 2) -> dict:
        """Almost CR map conditions of the projection and the image of the fiber directions."""
        S, zs = self.splitting(q, order)
        base_S = Splitting(self.frame(Jet.variables(q.point, order)), self.model.complement(Jet.variables(q.point, order)))
        Dpi = np.zeros((self.m, self.dim))
        Dpi[:, : self.m] = np.eye(self.m)
        Dpi = Jet.constant(Dpi, zs.nvars, order)
        base_S_z = Splitting(
            Jet.constant(base_S.E.value, zs.nvars, 0), Jet.constant(base_S.F.value, zs.nvars, 0)
        )
        hyp = check_pullback_hypotheses(S, base_S_z, Dpi)
        vert = S.E[self.m0 :]
        hyp["vertical_image"] = max(_maxabs(push_vector(Dpi, vert[j]).value) for j in range(self.m0))
        return hyp


# energy density and Bochner terms -------------------------------------
def _pairing(M: np.ndarray, a: np.ndarray, b: np.ndarray) -> complex:
    return complex(a @ M @ b.conj())


def energy_density(mg: MapGeometry, W) -> dict:
    """``Y``, ``F`` and ``H`` at the base point of ``mg`` for the fiber vector ``W``."""
    W = np.asarray(W, dtype=complex)
    if not np.any(W):
        raise ContractViolation("energy density is undefined at W = 0")
    fa = mg.fa.value  # [i, a]
    fW = W @ fa
    F = _pairing(mg.h.value, fW, fW).real
    H = _pairing(mg.g.value, W, W).real
    return {"Y": F / H, "F": F, "H": H}


def _energy_jet(mg: MapGeometry):
    """Jets (in source variables) of ``P_{i bar j} = h(f_i, conj f_j)`` and ``g``."""
    fa = mg.fa  # [i, a]
    order = min(fa.order, mg.h.order)
    fa = fa.truncate(order)
    h = mg.h.truncate(order)
    P = fa @ h @ fa.conj().T
    return P, mg.g.truncate(order)


def _sasakian_guard(hm: HoloMapModel, fp) -> None:
    if hm.kind.needs_sasakian_target:
        ok, amax = is_sasakian(hm.target, [fp])
        if not ok:
            raise HypothesisViolation(f"target {hm.target.name!r} is not Sasakian at f(p) (|A| = {amax:.3g})")


def normal_frames_for(hm: HoloMapModel, point, order: int = DEFAULT_ORDER, check: bool = True):
    """Normal frames at ``point`` and at its image, optionally verified."""
    point = np.asarray(point, dtype=float)
    fp = hm.image(point)
    e = normal_quasi_frame(hm.source, point, order)
    et = normal_quasi_frame(hm.target, fp, order)
    if check:
        for model, p, fr in ((hm.source, point, e), (hm.target, fp, et)):
            _require_normal(model, p, fr, order)
    return e, et


def _require_normal(model, p, frame, order):
    r = verify_normal_frame(model, p, frame, order)
    worst = max(r[k] for k in ("Gamma", "Gamma_bar", "del_Gamma_bar", "dbar_Gamma_bar", "unitary", "dH_g"))
    if worst > NORMAL_FRAME_TOL:
        raise ContractViolation(f"frame is not normal at {np.round(p, 6).tolist()} (residual {worst:.3g})")
    return r


def bochner_terms(
    hm: HoloMapModel,
    q: SlitBundlePoint,
    order: int = DEFAULT_ORDER,
    frames=None,
    check_frames: bool = True,
    slit_order: int = 2,
) -> dict:
    """Bochner decomposition of ``del dbar Y (V, conj V)`` at ``q = (p, V)``.

    ``lhs`` is evaluated on the slit-bundle chart with
    :func:`~crforge.geometry.del_dbar_function`.  ``remainder = lhs -
    (curv_source - curv_target)`` and ``dropped`` is the term
    ``h(V(f_i) V^i, V(f_j) V^j) / H`` computed from the map jets alone.
    """
    p = q.point
    V = q.W
    _sasakian_guard(hm, hm.image(p))
    if frames is None:
        e, et = normal_frames_for(hm, p, order, check=False)
    else:
        e, et = frames
    if check_frames:
        _require_normal(hm.source, p, e, order)
        _require_normal(hm.target, hm.image(p), et, order)
    mg = MapGeometry(hm, p, order, e, et)
    conn_s = connection(mg.src, e)
    conn_t = connection(mg.tgt, et)
    return _bochner_from(mg, conn_s, conn_t, V, slit_order)


def _bochner_from(mg: MapGeometry, conn_s, conn_t, V, slit_order: int = 2) -> dict:
    V = np.asarray(V, dtype=complex)
    slit = SlitBundle(mg.hm.source, mg.source_frame)
    q = SlitBundlePoint(mg.point, V)
    S, zs = slit.splitting(q, slit_order + 1)
    P, g = _energy_jet(mg)
    P = slit.lift(P, zs)
    g = slit.lift(g, zs)
    W = slit.W(zs)
    Wc = W.conj()
    F = (W.reshape(-1, 1) * P * Wc.reshape(1, -1)).sum()
    H = (W.reshape(-1, 1) * g * Wc.reshape(1, -1)).sum()
    Y = F / H
    Vf = slit.horizontal_vector(S, V)
    lhs = complex(del_dbar_function(Y, S, Vf).value)
    dens = energy_density(mg, V)
    Yv, Hv = dens["Y"], dens["H"]
    R = conn_s.curvature().value
    Rt = conn_t.curvature().value
    fV = V @ mg.fa.value
    cs = Yv / Hv * np.einsum("ijkl,i,j,k,l->", R, V, V.conj(), V, V.conj())
    ct = np.einsum("abcd,a,b,c,d->", Rt, fV, fV.conj(), fV, fV.conj()) / Hv
    remainder = lhs - (cs - ct)
    # independent path: the dropped nonnegative term, from source jets only
    Vx = (mg.S.E * V.reshape(-1, 1)).sum(axis=0)
    dfa = apply_field(Vx, mg.fa).value  # [i, a]
    VfW = V @ dfa
    dropped = _pairing(mg.h.value, VfW, VfW) / Hv
    return {
        "lhs": lhs,
        "curv_source": complex(cs),
        "curv_target": complex(ct),
        "remainder": complex(remainder),
        "dropped": complex(dropped),
        "Y": Yv,
        "H": Hv,
        "synthetic": False,
    }


def bochner_frozen(source, target, point, image_point, fa, V, order: int = DEFAULT_ORDER) -> dict:
    """Curvature terms with a constant differential ``fa[i, a]`` injected at one point.

    Synthetic test mode: no map is involved, only normal frames at
    ``point`` and ``image_point`` and the two curvature tensors.
    """
    source, target = structure_for(source), structure_for(target)
    fa = np.asarray(fa, dtype=complex)
    V = np.asarray(V, dtype=complex)
    if not np.any(V):
        raise ContractViolation("V must be nonzero")
    e = normal_quasi_frame(source, point, order)
    et = normal_quasi_frame(target, image_point, order)
    cs_conn = connection(LocalGeometry(source, point, order), e)
    ct_conn = connection(LocalGeometry(target, image_point, order), et)
    g = cs_conn.gram.value
    h = ct_conn.gram.value
    fV = V @ fa
    Hv = _pairing(g, V, V).real
    Yv = _pairing(h, fV, fV).real / Hv
    R = cs_conn.curvature().value
    Rt = ct_conn.curvature().value
    cs = Yv / Hv * np.einsum("ijkl,i,j,k,l->", R, V, V.conj(), V, V.conj())
    ct = np.einsum("abcd,a,b,c,d->", Rt, fV, fV.conj(), fV, fV.conj()) / Hv
    return {"curv_source": complex(cs), "curv_target": complex(ct), "Y": Yv, "H": Hv, "synthetic": True}


def random_slit_points(model, rng, n: int, center, radius: float = 0.1):
    """``n`` slit-bundle points with base points near ``center`` and random W."""
    st = structure_for(model)
    pts = []
    for _ in range(n):
        p = np.asarray(center, float) + radius * rng.uniform(-1, 1, size=st.m)
        W = rng.normal(size=st.m0) + 1j * rng.normal(size=st.m0)
        pts.append(SlitBundlePoint(p, W))
    return pts
