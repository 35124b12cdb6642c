"""Almost CR and pseudo-Hermitian structures, their connections and curvature.

Frames are indexed as ``A = (e_1..e_m0, conj e_1..conj e_m0, F_1..F_d)``;
for pseudo-Hermitian models the complement is the Reeb field ``xi``.  A
connection is stored as ``omega[A, B, C]``, the ``E_C`` coefficient of
``nabla_{E_A} E_B``.  In this notation

* ``Gamma^k_{ij} = omega[i, j, k]`` and ``Gamma^k_{bar i j} = omega[m0+i, j, k]``;
* ``Gamma^k_{0j} = omega[2 m0, j, k]`` is the Reeb component.

The Tanaka-Webster connection is computed from its closed-form
consequences: ``nabla_{bar e_i} e_j = [bar e_i, e_j]_{1,0}``, metric
compatibility for ``nabla_{e_i} e_j``, ``nabla_xi e_j = [xi, e_j]_{1,0}``
and ``nabla xi = 0``.  The Chern connection of an almost Hermitian model
uses the same formulas without the Reeb terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CRForgeError, ModelValidationError
from .geometry import (
    Splitting,
    apply_field,
    evaluate_form,
    exterior_derivative,
    lie_bracket,
    wedge,
)
from .jet import DEFAULT_ORDER, Jet, compose, jet_mul, jet_solve_linear, stack
from .models import ManifoldSpec, get_model


def _is_identity_chart(xs: Jet) -> bool:
    m = xs.shape[0]
    if xs.nvars != m:
        return False
    if xs.order == 0:
        return True
    c = xs.coeffs[:, 1:]
    return bool(np.array_equal(c, np.eye(m, c.shape[1]).astype(complex)))


def derived(local_fn):
    """Lift ``local_fn(point, order) -> local jet`` to a function of coordinate jets."""

    def fn(xs: Jet) -> Jet:
        point = xs.value.real
        local = local_fn(point, xs.order)
        if _is_identity_chart(xs):
            return local
        return compose(local, xs)

    return fn


# structures -----------------------------------------------------------
class AlmostCRStructure:
    """A (1,0) frame and a complement, both as functions of coordinate jets."""

    def __init__(self, spec: ManifoldSpec):
        self.spec = spec
        self.name = spec.name
        self.m, self.m0, self.d = spec.m, spec.m0, spec.d
        self.kind = spec.kind

    @property
    def coordinates(self):
        return self.spec.coordinates

    def frame(self, xs: Jet) -> Jet:
        return self.spec.frame(xs)

    def complement(self, xs: Jet) -> Jet:
        F = self.spec.complement(xs)
        if F is None:
            raise ModelValidationError(f"model {self.name!r} has no explicit complement")
        return F

    def splitting(self, point, order: int = DEFAULT_ORDER, frame=None) -> Splitting:
        xs = Jet.variables(point, order)
        E = (frame or self.frame)(xs)
        return Splitting(E, self.complement(xs))

    def split_fn(self, xs: Jet):
        return self.frame(xs), self.complement(xs)


class PseudoHermitianModel(AlmostCRStructure):
    """Codimension-one structure with contact form; complement = Reeb line."""

    def __init__(self, spec: ManifoldSpec):
        if spec.kind != "pseudo_hermitian":
            raise ModelValidationError(f"model {spec.name!r} is not pseudo-Hermitian")
        super().__init__(spec)
        self._reeb = derived(self.reeb_local)

    def theta(self, xs: Jet) -> Jet:
        return self.spec.theta(xs)

    def reeb_local(self, point, order: int = DEFAULT_ORDER) -> Jet:
        """Reeb field about ``point`` to ``order``: theta(xi) = 1, i_xi dtheta = 0 on H."""
        xs = Jet.variables(point, order + 1)
        th = self.theta(xs)
        dth = exterior_derivative(th, self.m)  # order
        E = self.frame(xs).truncate(order)
        th = th.truncate(order)
        rows = [th]
        for Z in list(E) + list(E.conj()):
            rows.append(jet_mul(dth, Z.reshape(1, self.m)).sum(axis=1))
        A = stack(rows)
        rhs = np.zeros(self.m)
        rhs[0] = 1.0
        return jet_solve_linear(A, Jet.constant(rhs, A.nvars, A.order))

    def reeb(self, xs: Jet) -> Jet:
        return self._reeb(xs)

    def complement(self, xs: Jet) -> Jet:
        return self.reeb(xs).reshape(1, self.m)


class HermitianModel(AlmostCRStructure):
    """Almost Hermitian chart: (1,0) frame and h(e_i, conj e_j) matrix."""

    def __init__(self, spec: ManifoldSpec):
        if spec.kind != "hermitian":
            raise ModelValidationError(f"model {spec.name!r} is not Hermitian")
        super().__init__(spec)

    def complement(self, xs: Jet) -> Jet:
        return Jet.zeros((0, self.m), xs.nvars, xs.order)

    def metric(self, xs: Jet) -> Jet:
        return self.spec.metric(xs)


def structure_for(model) -> AlmostCRStructure:
    """Wrap a spec (or a registry name) in the matching structure class."""
    if isinstance(model, AlmostCRStructure):
        return model
    if isinstance(model, str):
        model = get_model(model)
    if model.kind == "pseudo_hermitian":
        return PseudoHermitianModel(model)
    if model.kind == "hermitian":
        return HermitianModel(model)
    return AlmostCRStructure(model)


# local data -------------------------------------------------------------
class LocalGeometry:
    """Model data expanded about one point.

    ``order`` is the order of the returned frame-independent data; the
    model is evaluated one order higher where a derivative is consumed.
    """

    def __init__(self, model, point, order: int = DEFAULT_ORDER):
        self.model = structure_for(model)
        self.point = np.asarray(point, dtype=float)
        self.order = order
        self.m, self.m0, self.d = self.model.m, self.model.m0, self.model.d
        xs = Jet.variables(self.point, order)
        self.xs = xs
        if isinstance(self.model, PseudoHermitianModel):
            xs1 = Jet.variables(self.point, order + 1)
            th = self.model.theta(xs1)
            self.dtheta = exterior_derivative(th, self.m)  # order
            self.theta = th.truncate(order)
            self.xi = self.model.reeb_local(self.point, order)
            self.F = self.xi.reshape(1, self.m)
        elif isinstance(self.model, HermitianModel):
            self.theta = self.dtheta = self.xi = None
            self.F = Jet.zeros((0, self.m), xs.nvars, order)
            self.h = self.model.metric(xs)
        else:
            self.theta = self.dtheta = self.xi = None
            self.F = self.model.complement(xs)
        self.E = self.model.frame(xs)
        self.S = Splitting(self.E, self.F)

    @property
    def is_ph(self) -> bool:
        return self.xi is not None

    def pair(self, V: Jet, W: Jet) -> Jet:
        """Hermitian pairing ``g(V, conj W)`` of (1,0) vectors."""
        if self.is_ph:
            return -1j * evaluate_form(self.dtheta, V, W.conj())
        if isinstance(self.model, HermitianModel):
            cV = self.S.coefficients(V)[: self.m0]
            cW = self.S.coefficients(W)[: self.m0]
            h = self.h.truncate(min(self.h.order, cV.order))
            return jet_mul(jet_mul(cV.reshape(-1, 1), h), cW.conj().reshape(1, -1)).sum()
        raise CRForgeError(f"model {self.model.name!r} carries no metric")

    def gram(self, E: Jet) -> Jet:
        """``g[j, k] = g(e_j, conj e_k)`` for a (1,0) frame ``E``."""
        return stack([stack([self.pair(E[j], E[k]) for k in range(E.shape[0])]) for j in range(E.shape[0])])

    def levi_form(self, X: Jet, Y: Jet) -> Jet:
        """``L(X, Y) = dtheta(X, J Y)``."""
        return evaluate_form(self.dtheta, X, self.S.apply_J(Y))

    def webster_metric(self, X: Jet, Y: Jet) -> Jet:
        """``g_theta(X, Y) = L(pi_H X, pi_H Y) + theta(X) theta(Y)`` (complex bilinear)."""
        Xh, Yh = self.S.horizontal(X), self.S.horizontal(Y)
        th = self.theta
        return self.levi_form(Xh, Yh) + (th * X).sum() * (th * Y).sum()

    def metric_full(self, X: Jet, Y: Jet) -> Jet:
        """Complex-bilinear metric on all of TM (x) C (Webster or Hermitian)."""
        if self.is_ph:
            return self.webster_metric(X, Y)
        c = self.S.coefficients(X)
        e = self.S.coefficients(Y)
        m0 = self.m0
        h = self.h.truncate(min(self.h.order, c.order))
        # g(E_i, conj E_j) = h_ij, g(conj E_i, E_j) = conj h_ij... bilinear extension
        a = jet_mul(jet_mul(c[:m0].reshape(-1, 1), h), e[m0 : 2 * m0].reshape(1, -1)).sum()
        b = jet_mul(jet_mul(e[:m0].reshape(-1, 1), h), c[m0 : 2 * m0].reshape(1, -1)).sum()
        return a + b


# connection -----------------------------------------------------------------
@dataclass
class Connection:
    """Connection coefficients in a full frame together with its splitting."""

    S: Splitting
    omega: Jet  # [A, B, C]
    gram: Jet  # g(e_j, conj e_k)
    geometry: LocalGeometry

    @property
    def m0(self) -> int:
        return self.S.m0

    @property
    def n(self) -> int:
        return self.S.n

    @property
    def order(self) -> int:
        return self.omega.order

    @property
    def Gamma(self) -> Jet:
        """``Gamma[i, j, k] = Gamma^k_{ij}``."""
        m0 = self.m0
        return self.omega[:m0, :m0, :m0]

    @property
    def Gamma_bar(self) -> Jet:
        """``Gamma_bar[i, j, k] = Gamma^k_{bar i j}``."""
        m0 = self.m0
        return self.omega[m0 : 2 * m0, :m0, :m0]

    @property
    def Gamma_reeb(self) -> Jet:
        """``Gamma_reeb[j, k] = Gamma^k_{0 j}`` (zero-size without Reeb field)."""
        m0 = self.m0
        return self.omega[2 * m0 :, :m0, :m0]

    def torsion_matrix(self) -> Jet:
        """``A[i, j] = A^i_{bar j}`` with ``tau(conj e_j) = A^i_{bar j} e_i``."""
        m0 = self.m0
        if self.S.d == 0:
            return Jet.zeros((m0, m0), self.omega.nvars, self.order)
        xi = self.S.F[0]
        cols = []
        for j in range(m0):
            br = lie_bracket(xi, self.S.B[m0 + j])
            cols.append(-self.S.coefficients(br)[:m0])
        return stack(cols, axis=1)

    def covariant(self, X: Jet, Y: Jet) -> Jet:
        """``nabla_X Y`` for arbitrary local fields (coordinate components)."""
        y = self.S.coefficients(Y)
        x = self.S.coefficients(X)
        order = min(self.order, y.order - 1, x.order)
        B = self.S.B.truncate(order)
        dy = apply_field(X, y).truncate(order)
        w = self.omega.truncate(order)
        z = jet_mul(jet_mul(x.truncate(order).reshape(-1, 1, 1), y.truncate(order).reshape(1, -1, 1)), w).sum(axis=(0, 1))
        return (dy + z) @ B

    def torsion(self, X: Jet, Y: Jet) -> Jet:
        br = lie_bracket(X, Y)
        a = self.covariant(X, Y)
        b = self.covariant(Y, X)
        order = min(a.order, b.order, br.order)
        return a.truncate(order) - b.truncate(order) - br.truncate(order)

    def curvature_frame(self) -> Jet:
        """``R[A, B, k, D]``: E_D coefficient of ``R(E_A, E_B) e_k``."""
        S, w = self.S, self.omega
        n, m0 = self.n, self.m0
        order = w.order - 1
        B = S.B.truncate(order + 1)
        # E_A(omega[B, k, D])
        dw = stack([apply_field(B[A], w) for A in range(n)])  # [A, B, k, D]
        wt = w.truncate(order)
        # brackets of frame fields in frame coefficients c[A, B, C]
        c = stack([stack([S.coefficients(lie_bracket(B[A], B[Bi])) for Bi in range(n)]) for A in range(n)])
        c = c.truncate(order)
        term1 = dw - dw.transpose(1, 0, 2, 3)
        # omega[B, k, C] omega[A, C, D]
        quad = jet_mul(wt.reshape(1, n, n, n, 1), wt.reshape(n, 1, 1, n, n)).sum(axis=3)
        term2 = quad - quad.transpose(1, 0, 2, 3)
        term3 = jet_mul(c.reshape(n, n, n, 1, 1), wt.reshape(1, 1, n, n, n)).sum(axis=2)
        R = term1 + term2 - term3
        return R[:, :, :m0, :]

    def curvature(self) -> Jet:
        """``R[i, j, k, l] = R_{i bar j k bar l} = g(R(e_i, bar e_j) e_k, bar e_l)``."""
        m0 = self.m0
        Rf = self.curvature_frame()
        R = Rf[:m0, m0 : 2 * m0, :, :m0]  # D restricted to (1,0) part
        g = self.gram.truncate(R.order)
        return jet_mul(R.reshape(m0, m0, m0, m0, 1), g.reshape(1, 1, 1, m0, m0)).sum(axis=3)

    def perturbed(self, delta: np.ndarray) -> "Connection":
        """Copy with ``delta`` added to the degree-0 part of omega (negative controls)."""
        w = self.omega.copy()
        w.coeffs[..., 0] += delta
        return Connection(self.S, w, self.gram, self.geometry)


def connection(geom: LocalGeometry, frame=None) -> Connection:
    """Tanaka-Webster (pseudo-Hermitian) or Chern (Hermitian) connection in ``frame``.

    ``frame`` maps coordinate jets to a (1,0) frame; default is the model
    frame.  The Christoffel symbols have order ``geom.order - 2``.
    """
    _m, m0 = geom.m, geom.m0
    if frame is None:
        E = geom.E
    else:
        E = frame(geom.xs) if callable(frame) else frame
    order = geom.order - 1
    E = E.truncate(min(E.order, geom.order))
    S = Splitting(E.truncate(order + 1 if E.order > order else E.order), geom.F)
    # S has order <= geom.order - 1 for pseudo-Hermitian models (Reeb field)
    so = S.order
    g = geom.gram(E.truncate(so + 1) if E.order > so else E)  # order so
    n = S.n
    Eb = E.conj()
    br_bar = [[lie_bracket(Eb[i], E[j]) for j in range(m0)] for i in range(m0)]  # [bar e_i, e_j]
    w_order = min(so - 1, g.order - 1)
    omega = Jet.zeros((n, n, n), E.nvars, w_order)
    co = omega.coeffs
    ginv_solve = lambda rhs: jet_solve_linear(g.truncate(w_order).T, rhs)  # noqa: E731
    for i in range(m0):
        for j in range(m0):
            c = S.coefficients(br_bar[i][j]).truncate(w_order)
            co[m0 + i, j, :m0] = c.coeffs[:m0]  # nabla_{bar e_i} e_j
    for i in range(m0):
        # rhs[j, k] = e_i g_{j bar k} - g(e_j, [e_i, bar e_k]_{0,1})
        eg = apply_field(E[i], g).truncate(w_order)
        rhs = Jet.zeros((m0, m0), E.nvars, w_order)
        for k in range(m0):
            br = lie_bracket(E[i], Eb[k])
            c01 = S.coefficients(br)[m0 : 2 * m0].truncate(w_order)  # coefficient of bar e_q
            # g(e_j, bar e_q) = g[j, q]
            rhs_k = eg[:, k] - (g.truncate(w_order) * c01.reshape(1, m0)).sum(axis=1)
            rhs.coeffs[:, k] = rhs_k.coeffs
        # Gamma^l_{ij} g[l, k] = rhs[j, k]  ->  g^T Gamma_i[j, :]^T = rhs[j, :]^T
        sol = ginv_solve(rhs.T)  # [l, j]
        co[i, :m0, :m0] = sol.T.coeffs
    if geom.is_ph:
        xi = S.F[0]
        for j in range(m0):
            c = S.coefficients(lie_bracket(xi, E[j])).truncate(w_order)
            co[2 * m0, j, :m0] = c.coeffs[:m0]
    # conjugate blocks
    for A in range(n):
        Ab = _bar(A, m0)
        for j in range(m0):
            co[Ab, m0 + j, m0 : 2 * m0] = co[A, j, :m0].conj()
    return Connection(S, omega, g, geom)


def _bar(A: int, m0: int) -> int:
    if A < m0:
        return A + m0
    if A < 2 * m0:
        return A - m0
    return A


def tw_connection(model, point, order: int = DEFAULT_ORDER, frame=None) -> Connection:
    geom = LocalGeometry(model, point, order)
    if not geom.is_ph:
        raise ModelValidationError(f"model {geom.model.name!r} is not pseudo-Hermitian")
    return connection(geom, frame)


def chern_connection(model, point, order: int = DEFAULT_ORDER, frame=None) -> Connection:
    geom = LocalGeometry(model, point, order)
    if not isinstance(geom.model, HermitianModel):
        raise ModelValidationError(f"model {geom.model.name!r} is not Hermitian")
    return connection(geom, frame)


def tw_curvature(conn: Connection) -> Jet:
    return conn.curvature()


def chern_torsion(conn: Connection) -> Jet:
    """``T[a, b, c] = T^a_{bc} = theta^a(T(e_b, e_c))``."""
    S, m0 = conn.S, conn.m0
    E = S.E
    out = Jet.zeros((m0, m0, m0), E.nvars, conn.order)
    for b in range(m0):
        for c in range(m0):
            T = conn.torsion(E[b], E[c])
            out.coeffs[:, b, c] = S.coefficients(T).truncate(conn.order).coeffs[:m0] if T.order >= conn.order else 0
    return out


def sectional_holo(R: np.ndarray, g: np.ndarray, W) -> float:
    """``R_{i bar j k bar l} W^i conj W^j W^k conj W^l / g(W, conj W)^2``."""
    R = np.asarray(R)
    g = np.asarray(g)
    W = np.asarray(W, dtype=complex)
    norm = np.einsum("i,ij,j->", W, g, W.conj())
    if abs(norm) == 0:
        raise ValueError("sectional curvature needs a nonzero vector")
    val = np.einsum("ijkl,i,j,k,l->", R, W, W.conj(), W, W.conj())
    return float((val / norm**2).real)


# checks ---------------------------------------------------------------
def random_field(nvars: int, order: int, rng, n: int | None = None) -> Jet:
    """A random real vector field with polynomial coefficients of degree <= 2."""
    n = nvars if n is None else n
    h = Jet.variables(np.zeros(nvars), order)
    comps = []
    for _ in range(n):
        a = rng.normal(size=(nvars + 1,))
        q = rng.normal(size=(nvars, nvars)) * 0.3
        val = a[0] + (h * a[1:]).sum()
        val = val + (jet_mul(h.reshape(-1, 1), h.reshape(1, -1)) * q).sum()
        comps.append(val)
    return stack(comps)


def check_cr_integrability(model, points, rng=None, order: int = 3, samples: int = 3) -> dict:
    """Max residuals of ``[JX,Y]+[X,JY] in HM`` and of the Nijenhuis tensor."""
    rng = rng or np.random.default_rng(0)
    st = structure_for(model)
    r1 = r2 = 0.0
    for p in points:
        S = LocalGeometry(st, p, order).S
        for _ in range(samples):
            X = random_levi_section(S, rng)
            Y = random_levi_section(S, rng)
            JX, JY = S.apply_J(X), S.apply_J(Y)
            first = lie_bracket(JX, Y) + lie_bracket(X, JY)
            r1 = max(r1, float(np.abs(S.part(first, "F").value).max()))
            N = nijenhuis(S, X, Y)
            r2 = max(r2, float(np.abs(N.value).max()))
    return {"first_condition": r1, "nijenhuis": r2}


def random_levi_section(S: Splitting, rng) -> Jet:
    """Random real section ``2 Re(c^i e_i)`` with affine coefficients about the base point."""
    m0, nv, order = S.m0, S.E.nvars, S.order
    h = Jet.variables(np.zeros(nv), order)
    Z = None
    for i in range(m0):
        a = rng.normal(size=nv + 1) + 1j * rng.normal(size=nv + 1)
        coef = a[0] + (h * a[1:]).sum()
        term = S.E[i] * coef
        Z = term if Z is None else Z + term
    return Z + Z.conj()


def nijenhuis(S: Splitting, X: Jet, Y: Jet) -> Jet:
    """``N_J(X,Y) = [JX,JY] - J[JX,Y] - J[X,JY] - [X,Y]`` with J = 0 on F."""
    JX, JY = S.apply_J(X), S.apply_J(Y)
    a = lie_bracket(JX, JY)
    b = S.apply_J(lie_bracket(JX, Y))
    c = S.apply_J(lie_bracket(X, JY))
    d = lie_bracket(X, Y)
    order = min(a.order, b.order, c.order, d.order)
    return a.truncate(order) - b.truncate(order) - c.truncate(order) - d.truncate(order)


def verify_tw_axioms(conn: Connection, rng=None, samples: int = 2) -> dict:
    """Residuals of the defining properties of a pseudo-Hermitian connection at its base point."""
    rng = rng or np.random.default_rng(0)
    geom = conn.geometry
    S = conn.S
    nv = S.E.nvars
    res = dict.fromkeys(["parallel_H", "nabla_J", "nabla_g", "torsion_H", "torsion_purity"], 0.0)
    xi = S.F[0]
    th = geom.theta
    for _ in range(samples):
        X = random_levi_section(S, rng)
        Y = random_levi_section(S, rng)
        Z = random_field(nv, S.order, rng, S.n)
        nY = conn.covariant(Z, Y)
        res["parallel_H"] = max(res["parallel_H"], _val(( th.truncate(nY.order) * nY).sum()))
        JY = S.apply_J(Y)
        nJ = conn.covariant(Z, JY) - S.apply_J(nY)
        res["nabla_J"] = max(res["nabla_J"], _val(nJ))
        W = random_field(nv, S.order, rng, S.n)
        gXW = geom.metric_full(Y, W)
        lhs = apply_field(Z, gXW)
        rhs = geom.metric_full(conn.covariant(Z, Y), W) + geom.metric_full(Y, conn.covariant(Z, W))
        res["nabla_g"] = max(res["nabla_g"], _val(lhs.truncate(0) - rhs.truncate(0)))
        T = conn.torsion(X, Y)
        two_dth = 2 * evaluate_form(geom.dtheta, X, Y)
        res["torsion_H"] = max(res["torsion_H"], _val(T.truncate(0) - (two_dth.truncate(0) * xi.truncate(0))))
        tJ = conn.torsion(xi, S.apply_J(X))
        Jt = S.apply_J(conn.torsion(xi, X))
        res["torsion_purity"] = max(res["torsion_purity"], _val(tJ.truncate(0) + Jt.truncate(0)))
    return res


def verify_chern_axioms(conn: Connection, rng=None, samples: int = 2) -> dict:
    """Residuals of ``nabla J = 0``, ``nabla g = 0`` and vanishing (1,1) torsion."""
    rng = rng or np.random.default_rng(0)
    geom = conn.geometry
    S = conn.S
    nv = S.E.nvars
    res = dict.fromkeys(["nabla_J", "nabla_g", "torsion_11"], 0.0)
    for _ in range(samples):
        Y = random_field(nv, S.order, rng, S.n)
        Z = random_field(nv, S.order, rng, S.n)
        W = random_field(nv, S.order, rng, S.n)
        nY = conn.covariant(Z, Y)
        nJ = conn.covariant(Z, S.apply_J(Y)) - S.apply_J(nY)
        res["nabla_J"] = max(res["nabla_J"], _val(nJ.truncate(0)))
        lhs = apply_field(Z, geom.metric_full(Y, W))
        rhs = geom.metric_full(nY, W) + geom.metric_full(Y, conn.covariant(Z, W))
        res["nabla_g"] = max(res["nabla_g"], _val(lhs.truncate(0) - rhs.truncate(0)))
    for i in range(conn.m0):
        for j in range(conn.m0):
            T = conn.torsion(S.E[i], S.E[j].conj())
            res["torsion_11"] = max(res["torsion_11"], _val(T.truncate(0)))
    return res


def _val(j: Jet) -> float:
    return float(np.abs(j.value).max(initial=0.0))


def structure_equation_residual(conn: Connection) -> float:
    """``d theta^i - theta^j ^ theta^i_j - theta ^ A^i_{bar j} theta^bar j`` at the base point."""
    S, m0, n = conn.S, conn.m0, conn.n
    Theta = S.coframe  # rows theta^A
    geom = conn.geometry
    order = conn.order
    # connection forms theta^i_j = omega[A, j, i] theta^A
    w = conn.omega
    conn_forms = jet_mul(w[:, :m0, :m0].reshape(n, m0, m0, 1), Theta.truncate(order).reshape(n, 1, 1, n)).sum(axis=0)  # [j, i, a]
    dTheta = stack([exterior_derivative(Theta[i], n) for i in range(m0)])
    A = conn.torsion_matrix() if geom.is_ph else None
    worst = 0.0
    for i in range(m0):
        rhs = None
        for j in range(m0):
            term = wedge(Theta[j].truncate(order), conn_forms[j, i])
            rhs = term if rhs is None else rhs + term
        if geom.is_ph:
            th = geom.theta
            s = (A[i].reshape(m0, 1) * Theta[m0 : 2 * m0].truncate(A.order)).sum(axis=0)
            rhs = rhs + wedge(th.truncate(s.order), s)
        diff = dTheta[i].truncate(0) - rhs.truncate(0)
        worst = max(worst, _val(diff))
    return worst


def is_sasakian(model, points, order: int = 3, tol: float = 1e-9) -> tuple[bool, float]:
    worst = 0.0
    for p in points:
        conn = tw_connection(model, p, order)
        worst = max(worst, _val(conn.torsion_matrix()))
    return worst < tol, worst
