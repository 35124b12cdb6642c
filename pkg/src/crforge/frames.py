"""Pseudoholomorphic, quasi holomorphic and normal frames at a point.

A frame change ``e_i = P_i^j(x) v_j`` is realized by a matrix of complex
polynomials of degree <= 2 in ``h = x - p``::

    P_i^j(p + h) = delta_i^j + L_i^j . h + 1/2 h^T Q_i^j h

The linear and quadratic coefficients are solved from derivatives
prescribed along the frame ``(u, conj u, F)`` at ``p``.  For a field ``X``
and polynomial ``P``, ``X(P)(p) = X^a L_a`` and
``X Y(P)(p) = X^a Y^b Q_ab + X(Y^b)(p) L_b``.

Construction steps:

1. *seed*: constant combination of the model frame, unitary at ``p``;
2. *pseudoholomorphic*: ``f(p) = id``, ``conj v_k (f_i^j)(p) = c^j_{i bar k}(p)``
   where ``[v_i, conj v_k]_{1,0} = c^j_{i bar k} v_j``;
3. *quasi holomorphic*: ``phi(p) = id``, ``conj u_k (phi)(p) = 0`` and
   ``u_k conj u_l (phi_i^j)(p) = u_k(b^j_{i bar l})(p)`` with
   ``[u_i, conj u_l]_{1,0} = b^j_{i bar l} u_j``;
4. *normal*: additionally ``u_k(phi_i^j)(p) = -Gamma^j_{ki}(p)``,
   ``xi(phi_i^j)(p) = -t_i^j`` with ``[xi, u_i]_{1,0}(p) = t_i^j u_j``, and
   ``conj u_l conj u_k (phi_i^j)(p) = conj u_l (b^j_{i bar k})(p)`` so
   that the conjugate derivatives of ``Gamma^k_{bar i j}`` vanish too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.stats

from .cr import HermitianModel, LocalGeometry, PseudoHermitianModel, connection, structure_for
from .errors import ContractViolation
from .geometry import Splitting, apply_field, lie_bracket
from .jet import DEFAULT_ORDER, Jet, stack


@dataclass
class FrameTransform:
    """Polynomial frame-change matrix ``P(p + h) = I + L.h + h^T Q h / 2``."""

    point: np.ndarray
    L: np.ndarray  # (m0, m0, m)
    Q: np.ndarray  # (m0, m0, m, m), symmetric in the last two axes
    label: str = ""

    @classmethod
    def identity(cls, point, m0: int, label: str = "") -> "FrameTransform":
        m = len(point)
        return cls(np.asarray(point, float), np.zeros((m0, m0, m), complex), np.zeros((m0, m0, m, m), complex), label)

    def matrix(self, xs: Jet) -> Jet:
        m0 = self.L.shape[0]
        h = xs - self.point
        return Jet.constant(np.eye(m0), xs.nvars, xs.order) + _lin(self.L, h) + _quad(self.Q, h) * 0.5

    def partial(self, mi) -> np.ndarray:
        """Mixed partial of every entry at ``point`` (exact readback)."""
        mi = tuple(mi)
        deg = sum(mi)
        m0 = self.L.shape[0]
        if deg == 0:
            return np.eye(m0, dtype=complex)
        if deg == 1:
            a = mi.index(1)
            return self.L[..., a]
        if deg == 2:
            idx = [a for a, e in enumerate(mi) for _ in range(e)]
            return self.Q[..., idx[0], idx[1]]
        return np.zeros((m0, m0), dtype=complex)


def _lin(L: np.ndarray, h: Jet) -> Jet:
    out = None
    for a in range(L.shape[-1]):
        term = h[a].reshape(1, 1) * L[..., a]
        out = term if out is None else out + term
    return out


def _quad(Q: np.ndarray, h: Jet) -> Jet:
    out = None
    m = Q.shape[-1]
    for a in range(m):
        for b in range(a, m):
            coef = Q[..., a, b] * (1.0 if a == b else 2.0)
            if not np.any(coef):
                continue
            term = (h[a] * h[b]).reshape(1, 1) * coef
            out = term if out is None else out + term
    if out is None:
        return Jet.zeros(Q.shape[:2], h.nvars, h.order)
    return out


class LocalFrame:
    """A (1,0) frame ``P_k(x) ... P_1(x) seed E(x)`` valid near a point."""

    def __init__(self, base, seed: np.ndarray, transforms=(), point=None, label: str = ""):
        self.base = base
        self.seed = np.asarray(seed, dtype=complex)
        self.transforms = list(transforms)
        self.point = None if point is None else np.asarray(point, float)
        self.label = label

    def __call__(self, xs: Jet) -> Jet:
        E = self.base(xs)
        out = Jet.constant(self.seed, E.nvars, E.order) @ E
        for T in self.transforms:
            out = T.matrix(xs) @ out
        return out

    def extended(self, T: FrameTransform, label: str = "") -> "LocalFrame":
        return LocalFrame(self.base, self.seed, self.transforms + [T], self.point, label or self.label)


def unitary_seed(geom: LocalGeometry, rng=None) -> np.ndarray:
    """Constant matrix ``a`` with ``a g(p) a^* = I`` (times a random unitary if ``rng``)."""
    g0 = geom.gram(geom.E).value
    g0 = 0.5 * (g0 + g0.conj().T)
    Lc = np.linalg.cholesky(g0)
    a = np.linalg.inv(Lc)
    if rng is not None:
        U = scipy.stats.unitary_group.rvs(geom.m0, random_state=rng) if geom.m0 > 1 else np.exp(2j * np.pi * rng.uniform()) * np.eye(1)
        a = U @ a
    return a


def _solve_linear_part(B0: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """L with ``B0[A] . L = targets[..., A]`` for every frame direction A."""
    # targets (m0, m0, n); L (m0, m0, m)
    return np.linalg.solve(B0, targets.reshape(-1, B0.shape[0]).T).T.reshape(targets.shape[:-1] + (B0.shape[1],))


def _solve_quadratic_part(B0: np.ndarray, Qhat: np.ndarray) -> np.ndarray:
    """Q with ``B0 Q B0^T = Qhat`` (both symmetric)."""
    Binv = np.linalg.inv(B0)
    return np.einsum("ap,...pq,bq->...ab", Binv, Qhat, Binv)


def _frame_split(geom: LocalGeometry, frame, order=None) -> Splitting:
    E = frame(geom.xs) if callable(frame) else frame
    return Splitting(E, geom.F)


def pseudoholomorphic_frame(model, point, seed_frame=None, order: int = DEFAULT_ORDER, seed=None):
    """Frame ``u_i = f_i^j v_j`` pseudoholomorphic at ``point``.

    ``seed_frame`` is a :class:`LocalFrame` (default: the model frame,
    or the constant ``seed`` combination of it).
    """
    geom = LocalGeometry(model, point, order)
    m0 = geom.m0
    if seed_frame is None:
        seed_frame = LocalFrame(geom.model.frame, np.eye(m0) if seed is None else seed, point=point, label="seed")
    S = _frame_split(geom, seed_frame)
    V = S.E
    n = S.n
    targets = np.zeros((m0, m0, n), dtype=complex)
    for i in range(m0):
        for k in range(m0):
            br = lie_bracket(V[i], V[k].conj())
            c = S.coefficients(br).value[:m0]  # c^j_{i bar k}
            targets[i, :, m0 + k] = c
    B0 = S.B.value
    L = _solve_linear_part(B0, targets)
    T = FrameTransform(np.asarray(point, float), L, np.zeros(L.shape + (L.shape[-1],), complex), "pseudoholomorphic")
    return seed_frame.extended(T, "pseudoholomorphic")


def quasi_holomorphic_frame(model, point, u_frame: LocalFrame, order: int = DEFAULT_ORDER, normal: bool = False):
    """Frame ``e_i = phi_i^j u_j`` quasi holomorphic at ``point``.

    With ``normal`` the extra first-order prescriptions (Christoffel and
    Reeb terms) and the conjugate second-order block are included, which
    requires a metric (pseudo-Hermitian or Hermitian model).
    """
    geom = LocalGeometry(model, point, order)
    m0 = geom.m0
    S = _frame_split(geom, u_frame)
    U = S.E
    n, _m = S.n, S.n
    B0 = S.B.value
    B = S.B
    # b[i, l, j] = b^j_{i bar l}: coefficient of u_j in [u_i, conj u_l]_{1,0}
    b = stack([stack([S.coefficients(lie_bracket(U[i], U[l].conj()))[:m0] for l in range(m0)]) for i in range(m0)])
    lin_t = np.zeros((m0, m0, n), dtype=complex)
    conn = None
    if normal:
        conn = connection(geom, u_frame)
        G = conn.Gamma.value  # G[k, i, j] = Gamma^j_{ki}
        for i in range(m0):
            for j in range(m0):
                for k in range(m0):
                    lin_t[i, j, k] = -G[k, i, j]
        if geom.is_ph:
            t = conn.Gamma_reeb.value[0]  # t[i, j] = t_i^j
            lin_t[:, :, 2 * m0] = -t
    L = _solve_linear_part(B0, lin_t)
    # second-order targets in the frame basis
    Qhat = np.zeros((m0, m0, n, n), dtype=complex)
    # dB[A, C, a] = E_A(E_C^a)(p)
    dB = np.stack([apply_field(B[A], B).value for A in range(n)])
    for k in range(m0):
        db_k = apply_field(U[k], b).value  # [i, l, j] = u_k(b^j_{i bar l})
        for l in range(m0):
            target = db_k[:, l, :]  # [i, j]
            corr = np.einsum("a,ija->ij", dB[k, m0 + l], L)  # u_k(conj u_l^a) L_a
            Qhat[:, :, k, m0 + l] = target - corr
            Qhat[:, :, m0 + l, k] = target - corr
    if normal:
        for l in range(m0):
            db_l = apply_field(U[l].conj(), b).value  # [i, r, j] = conj u_l (b^j_{i bar r})
            for r in range(m0):
                # conj u_l conj u_r (phi_i^j) = conj u_l (b^j_{i bar r})
                target = db_l[:, r, :]
                Qhat[:, :, m0 + l, m0 + r] += 0.5 * (target - np.einsum("a,ija->ij", dB[m0 + l, m0 + r], L))
                Qhat[:, :, m0 + r, m0 + l] += 0.5 * (target - np.einsum("a,ija->ij", dB[m0 + l, m0 + r], L))
    Q = _solve_quadratic_part(B0, Qhat)
    T = FrameTransform(np.asarray(point, float), L, Q, "normal" if normal else "quasi_holomorphic")
    return u_frame.extended(T, T.label)


def normal_quasi_frame(model, point, order: int = DEFAULT_ORDER, rng=None) -> LocalFrame:
    """Normal quasi holomorphic frame at ``point`` (pseudo-Hermitian or Hermitian model)."""
    st = structure_for(model)
    geom = LocalGeometry(st, point, order)
    if not isinstance(st, (PseudoHermitianModel, HermitianModel)):
        raise ContractViolation(f"model {st.name!r} carries no metric; normal frames need one")
    a = unitary_seed(geom, rng)
    seed = LocalFrame(st.frame, a, point=point, label="unitary seed")
    u = pseudoholomorphic_frame(st, point, seed, order)
    return quasi_holomorphic_frame(st, point, u, order, normal=True)


def yu_normal_frame(model, point, order: int = DEFAULT_ORDER, rng=None) -> LocalFrame:
    st = structure_for(model)
    if not isinstance(st, HermitianModel):
        raise ContractViolation(f"model {st.name!r} is not almost Hermitian")
    return normal_quasi_frame(st, point, order, rng)


# verification ---------------------------------------------------------
def _maxabs(x) -> float:
    return float(np.max(np.abs(x), initial=0.0))


def quasi_holomorphic_residuals(model, point, frame, order: int = DEFAULT_ORDER, rng=None, samples: int = 2) -> dict:
    """Defining residuals of pseudoholomorphic and quasi holomorphic frames at ``point``.

    ``pseudo``: ``max |[e_i, conj v]_{1,0}(p)|`` over model frame vectors and
    random (1,0) fields ``v``.  ``quasi``: ``max |[[e_i, conj a]_H, b]_{1,0}(p)|``
    over pseudoholomorphic fields ``a``, ``b`` built from ``e`` with random
    coefficients whose conjugate derivatives vanish at ``p``.
    """
    rng = rng or np.random.default_rng(0)
    geom = LocalGeometry(model, point, order)
    m0, n = geom.m0, geom.m
    S = _frame_split(geom, frame)
    e = S.E
    Emodel = geom.E
    pseudo = 0.0
    h = Jet.variables(np.zeros(n), S.order)
    for _ in range(samples):
        # random (1,0) field with polynomial coefficients
        alpha = rng.normal(size=(m0, n + 1)) + 1j * rng.normal(size=(m0, n + 1))
        coef = stack([alpha[k, 0] + (h * alpha[k, 1:]).sum() for k in range(m0)])
        v = (coef.reshape(-1, 1) * Emodel.truncate(S.order)).sum(axis=0)
        for i in range(m0):
            pseudo = max(pseudo, _maxabs(S.part(lie_bracket(e[i], v.conj()), "10").value))
    for i in range(m0):
        for k in range(m0):
            pseudo = max(pseudo, _maxabs(S.part(lie_bracket(e[i], Emodel[k].conj()), "10").value))
    quasi = 0.0
    for _ in range(samples):
        fields = []
        for _f in range(2):
            c = rng.normal(size=(m0,)) + 1j * rng.normal(size=(m0,))
            # coefficients holomorphic to first order: c + (linear in the (1,0) coordinates of e at p)
            lin = rng.normal(size=(m0, m0)) + 1j * rng.normal(size=(m0, m0))
            coframe0 = S.coframe.value[:m0]  # theta^k(p)
            zk = (h.reshape(1, n) * coframe0).sum(axis=1)  # linear functions with conj e_l(z_k)(p) = 0
            coef = stack([c[k] + (zk * lin[k]).sum() for k in range(m0)])
            fields.append((coef.reshape(-1, 1) * e.truncate(coef.order)).sum(axis=0))
        a, bf = fields
        for i in range(m0):
            inner = S.horizontal(lie_bracket(e[i], a.conj()))
            outer = S.part(lie_bracket(inner, bf), "10")
            quasi = max(quasi, _maxabs(outer.value))
    return {"pseudo": pseudo, "quasi": quasi}


def verify_normal_frame(model, point, frame, order: int = DEFAULT_ORDER) -> dict:
    """Residuals of the normal-frame identities at ``point``.

    Keys: ``Gamma`` and ``Gamma_bar`` (values), ``del_Gamma_bar`` and
    ``dbar_Gamma_bar`` (derivatives along ``e_l`` and ``conj e_l``),
    ``curvature_identity`` (``R_{i bar j k bar l} + conj e_j e_i g_{k bar l}``),
    ``unitary`` (``g(p) - I``), ``dH_g`` (horizontal derivatives of g),
    ``dg`` (all derivatives, meaningful for Hermitian models) and
    ``reeb_bracket`` (``[xi, e_i]_{1,0}(p)``).
    """
    geom = LocalGeometry(model, point, order)
    conn = connection(geom, frame)
    m0 = conn.m0
    S = conn.S
    E = S.E
    Gb = conn.Gamma_bar
    del_Gb = stack([apply_field(E[l], Gb) for l in range(m0)])
    dbar_Gb = stack([apply_field(E[l].conj(), Gb) for l in range(m0)])
    R = conn.curvature()
    g = conn.gram
    eg = stack([apply_field(E[i], g) for i in range(m0)])  # [i, k, l]
    ebar_eg = stack([apply_field(E[j].conj(), eg) for j in range(m0)])  # [j, i, k, l]
    two_path = R.value + np.transpose(ebar_eg.value, (1, 0, 2, 3))
    dH = [apply_field(E[l], g).value for l in range(m0)] + [apply_field(E[l].conj(), g).value for l in range(m0)]
    dg = [g.deriv(a).value for a in range(geom.m)]
    out = {
        "Gamma": _maxabs(conn.Gamma.value),
        "Gamma_bar": _maxabs(Gb.value),
        "del_Gamma_bar": _maxabs(del_Gb.value),
        "dbar_Gamma_bar": _maxabs(dbar_Gb.value),
        "curvature_identity": _maxabs(two_path),
        "unitary": _maxabs(g.value - np.eye(m0)),
        "dH_g": _maxabs(np.array(dH)),
        "dg": _maxabs(np.array(dg)),
        "reeb_bracket": 0.0,
    }
    if geom.is_ph:
        xi = S.F[0]
        out["reeb_bracket"] = max(_maxabs(S.part(lie_bracket(xi, E[i]), "10").value) for i in range(m0))
    out["R"] = R.value
    return out
