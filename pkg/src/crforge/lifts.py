"""Lifts of almost CR structures to the tangent bundle and to vector bundles.

Tangent bundle
    On the chart ``(x^1..x^m, y^1..y^m)`` of ``TU`` the vertical and
    complete lifts of ``Z = z^i d/dx^i`` are ``Z^V = z^i d/dY^i`` and
    ``Z^C = z^i d/dX^i + y^j (dz^i/dx^j) d/dY^i``; a (1,1) tensor ``A`` lifts
    to the block matrix ``[[A, 0], [y^k d_k A, A]]``.  The lifted structure
    has Levi distribution ``(HM)^V + (HM)^C`` and structure map ``J^C``.

Vector bundles
    For a real frame ``s_j`` of ``E`` with connection forms
    ``nabla s_j = omega_j^p s_p`` and complex structure ``I s_j = I^l_j s_l``,
    the chart ``(x, y)`` of ``E`` carries the horizontal lift
    ``v -> v - y^j omega_j^p(v) d/dy^p`` and ``J_E`` acts by ``J`` on lifted
    Levi vectors and by ``I`` on the fiber.

Fields and tensors are callables on coordinate jets, as elsewhere in the
package: a field returns shape ``(m,)``, a tensor returns ``A[j, i]`` with
``(A v)^j = A[j, i] v^i``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .cr import derived, nijenhuis, random_levi_section, structure_for
from .errors import ModelValidationError
from .geometry import Splitting, lie_bracket, random_polynomial
from .jet import Jet, concatenate, jet_inverse_matrix, stack
from .models import BundleSpec, default_registry


def _maxabs(x) -> float:
    return float(np.max(np.abs(np.asarray(x)), initial=0.0))


# lifts -----------------------------------------------------------------
def vertical_lift(Z, m: int):
    """``Z^V = z^i d/dY^i`` as a field on the doubled chart."""

    def fn(zs: Jet) -> Jet:
        z = Z(zs[:m])
        return concatenate([Jet.zeros((m,), zs.nvars, z.order), z])

    return fn


def complete_lift(Z, m: int):
    """``Z^C = z^i d/dX^i + y^j (dz^i/dx^j) d/dY^i``."""

    def local(point, order):
        zs = Jet.variables(point, order + 1)
        z = Z(zs[:m])
        y = zs[m:].truncate(order)
        dz = sum(y[j] * z.deriv(j) for j in range(m))
        return concatenate([z.truncate(order), dz])

    return derived(local)


def complete_lift_tensor(A, m: int):
    """``A^C = [[A, 0], [y^k d_k A, A]]`` on the doubled chart."""

    def local(point, order):
        zs = Jet.variables(point, order + 1)
        a = A(zs[:m])
        y = zs[m:].truncate(order)
        da = sum(y[k] * a.deriv(k) for k in range(m))
        a0 = a.truncate(order)
        top = concatenate([a0, Jet.zeros((m, m), a0.nvars, order)], axis=1)
        bottom = concatenate([da, a0], axis=1)
        return concatenate([top, bottom], axis=0)

    return derived(local)


def apply_tensor(A, Z):
    """The field ``A Z``."""
    return lambda xs: A(xs) @ Z(xs)


def tensor_square(A):
    return lambda xs: A(xs) @ A(xs)


def bracket_field(Z, W):
    """``[Z, W]`` as a callable field (one derivative is taken internally)."""
    return derived(lambda point, order: lie_bracket(Z, W, point, order + 1))


# random inputs ---------------------------------------------------------
def random_horizontal_field(structure, rng, degree: int = 1):
    """Random real section ``2 Re(c^i e_i)`` of the Levi distribution."""
    st = structure_for(structure)
    c = random_polynomial(st.m, rng, degree, shape=(st.m0,))
    c2 = random_polynomial(st.m, rng, degree, shape=(st.m0,))

    def fn(xs: Jet) -> Jet:
        E = st.frame(xs)
        coef = c(xs) + c2(xs) * 1j
        Z = (coef.reshape(-1, 1) * E).sum(axis=0)
        return Z + Z.conj()

    return fn


# identities -------------------------------------------------------------
def lift_identities_check(Z, W, A, m: int, points, order: int = 2) -> dict:
    """Residuals of the six lift identities at doubled-chart ``points``."""
    ZV, WV = vertical_lift(Z, m), vertical_lift(W, m)
    ZC, WC = complete_lift(Z, m), complete_lift(W, m)
    AC = complete_lift_tensor(A, m)
    ZW = bracket_field(Z, W)
    out = dict.fromkeys(
        ["AC_ZC", "AC_ZV", "A2_C", "bracket_VV", "bracket_VC", "bracket_CC"], 0.0
    )
    for q in np.atleast_2d(points):
        zs = Jet.variables(q, order)
        ac = AC(zs)
        out["AC_ZC"] = max(out["AC_ZC"], _maxabs((ac @ ZC(zs) - complete_lift(apply_tensor(A, Z), m)(zs)).value))
        out["AC_ZV"] = max(out["AC_ZV"], _maxabs((ac @ ZV(zs) - vertical_lift(apply_tensor(A, Z), m)(zs)).value))
        out["A2_C"] = max(out["A2_C"], _maxabs((complete_lift_tensor(tensor_square(A), m)(zs) - ac @ ac).value))
        zv, wv, zc, wc = ZV(zs), WV(zs), ZC(zs), WC(zs)
        out["bracket_VV"] = max(out["bracket_VV"], _maxabs(lie_bracket(zv, wv).value))
        out["bracket_VC"] = max(
            out["bracket_VC"], _maxabs((lie_bracket(zv, wc) - vertical_lift(ZW, m)(zs)).value)
        )
        out["bracket_CC"] = max(
            out["bracket_CC"], _maxabs((lie_bracket(zc, wc) - complete_lift(ZW, m)(zs)).value)
        )
    return out


def nijenhuis_tensor(Jm: Jet, X: Jet, Y: Jet) -> Jet:
    """``N(X,Y) = [JX,JY] - J[JX,Y] - J[X,JY] - [X,Y]`` for a tensor jet ``Jm``."""
    JX, JY = Jm @ X, Jm @ Y
    a = lie_bracket(JX, JY)
    b = Jm.truncate(a.order) @ lie_bracket(JX, Y)
    c = Jm.truncate(a.order) @ lie_bracket(X, JY)
    d = lie_bracket(X, Y)
    order = min(a.order, b.order, c.order, d.order)
    return a.truncate(order) - b.truncate(order) - c.truncate(order) - d.truncate(order)


# tangent bundle structure ---------------------------------------------
class TangentCRStructure:
    """``((HM)^V + (HM)^C, J^C)`` on ``TM`` for a base almost CR model.

    ``complement`` overrides the base complement used to extend ``J`` by
    zero; the restriction of ``J^C`` to the lifted distribution does not
    depend on it.
    """

    def __init__(self, model, complement=None):
        self.base = structure_for(model)
        self.m, self.m0, self.d = self.base.m, self.base.m0, self.base.d
        self.dim = 2 * self.m
        self.base_complement = complement or self.base.complement
        m = self.m
        self.J = lambda xs: Splitting(self.base.frame(xs), self.base_complement(xs)).J
        self.JC = complete_lift_tensor(self.J, m)
        E = self.base.frame
        self._EV = [vertical_lift(_row(E, i), m) for i in range(self.m0)]
        self._EC = [complete_lift(_row(E, i), m) for i in range(self.m0)]
        self._FV = [vertical_lift(_row(self.base_complement, r), m) for r in range(self.d)]
        self._FC = [complete_lift(_row(self.base_complement, r), m) for r in range(self.d)]

    @property
    def name(self) -> str:
        return f"T({self.base.name})"

    def frame(self, zs: Jet) -> Jet:
        return stack([f(zs) for f in self._EV + self._EC])

    def complement(self, zs: Jet) -> Jet:
        if not self._FV:
            return Jet.zeros((0, self.dim), zs.nvars, zs.order)
        return stack([f(zs) for f in self._FV + self._FC])

    def splitting(self, point, order: int = 2) -> Splitting:
        zs = Jet.variables(point, order)
        return Splitting(self.frame(zs), self.complement(zs))

    def structure_checks(self, point, order: int = 1) -> dict:
        """``(J^C)^2 = -id`` and ``J^C = i`` on the lifted (1,0) frame."""
        zs = Jet.variables(point, order)
        jc = self.JC(zs).value
        E = self.frame(zs).value
        rows = list(E) + list(E.conj())
        sq = max(_maxabs(jc @ (jc @ v) + v) for v in rows)
        typ = max(_maxabs(jc @ v - 1j * v) for v in E)
        return {"J_squared": sq, "type_10": typ}

    def integrability(self, point, rng, samples: int = 2, order: int = 2) -> dict:
        """First condition and Nijenhuis residuals on random lifted Levi sections."""
        S = self.splitting(point, order)
        r1 = r2 = 0.0
        for _ in range(samples):
            X = random_levi_section(S, rng)
            Y = random_levi_section(S, rng)
            JX, JY = S.apply_J(X), S.apply_J(Y)
            first = lie_bracket(JX, Y) + lie_bracket(X, JY)
            r1 = max(r1, _maxabs(S.part(first, "F").value))
            r2 = max(r2, _maxabs(nijenhuis(S, X, Y).value))
        return {"first_condition": r1, "nijenhuis": r2}

    def transfer(self, point, Z, W, order: int = 1) -> dict:
        """Nijenhuis transfer residuals for base fields ``Z``, ``W``.

        ``VV``: ``N_{J^C}(Z^V, W^V)``; ``CC``: ``N_{J^C}(Z^C, W^C) -
        (N_J(Z,W))^C``; ``CV``: ``N_{J^C}(Z^C, W^V) - (N_J(Z,W))^V``; plus the
        sizes ``N_CC`` of ``N_{J^C}(Z^C, W^C)`` and ``NJ_C`` of its predicted value.
        """
        m = self.m
        zs = Jet.variables(point, order)
        jc = self.JC(zs)
        zv, wv = vertical_lift(Z, m)(zs), vertical_lift(W, m)(zs)
        zc, wc = complete_lift(Z, m)(zs), complete_lift(W, m)(zs)
        NJ = derived(lambda p, o: nijenhuis_tensor(self.J(Jet.variables(p, o + 1)), Z(Jet.variables(p, o + 1)), W(Jet.variables(p, o + 1))))
        NJC = complete_lift(NJ, m)(zs).value
        NJV = vertical_lift(NJ, m)(zs).value
        n_cc = nijenhuis_tensor(jc, zc, wc).value
        n_cv = nijenhuis_tensor(jc, zc, wv).value
        n_vv = nijenhuis_tensor(jc, zv, wv).value
        return {
            "VV": _maxabs(n_vv),
            "CC": _maxabs(n_cc - NJC),
            "CV": _maxabs(n_cv - NJV),
            "N_CC": _maxabs(n_cc),
            "NJ_C": _maxabs(NJC),
        }

    def first_condition_transfer(self, point, Z, W, order: int = 1) -> dict:
        """``[J^C Z^C, W^C] + [Z^C, J^C W^C]`` and its component off the lifted distribution."""
        m = self.m
        zs = Jet.variables(point, order + 1)
        jc = self.JC(zs)
        zc, wc = complete_lift(Z, m)(zs), complete_lift(W, m)(zs)
        v = lie_bracket(jc @ zc, wc) + lie_bracket(zc, jc @ wc)
        S = Splitting(self.frame(zs).truncate(v.order), self.complement(zs).truncate(v.order))
        return {"off_distribution": _maxabs(S.part(v, "F").value)}


def _row(fn, i):
    return lambda xs: fn(xs)[i]


def restriction_independence(model, complement_a, complement_b, point, order: int = 1) -> float:
    """Max difference of ``J^C`` built from two complements, on the lifted distribution."""
    ta = TangentCRStructure(model, complement_a)
    tb = TangentCRStructure(model, complement_b)
    zs = Jet.variables(point, order)
    E = ta.frame(zs).value
    rows = list(E) + list(E.conj())
    ja, jb = ta.JC(zs).value, tb.JC(zs).value
    return max(_maxabs(ja @ v - jb @ v) for v in rows)


def tangent_cr_structure(model, points, rng=None, complement=None, samples: int = 2) -> tuple[TangentCRStructure, dict]:
    """The lifted structure and a report over doubled-chart ``points``."""
    rng = rng or np.random.default_rng(0)
    T = TangentCRStructure(model, complement)
    rep = {"J_squared": 0.0, "type_10": 0.0, "first_condition": 0.0, "nijenhuis": 0.0}
    for q in np.atleast_2d(points):
        for k, v in T.structure_checks(q).items():
            rep[k] = max(rep[k], v)
        for k, v in T.integrability(q, rng, samples).items():
            rep[k] = max(rep[k], v)
    return T, rep


# vector bundles --------------------------------------------------------
class BundleCRLift:
    """Almost CR structure ``(HE, J_E)`` on the total space of a real bundle.

    Chart coordinates are ``(x, y)`` with ``y`` the coefficients in the
    bundle frame.  ``I_override`` replaces the fiber complex structure
    (used to build negative controls).
    """

    def __init__(self, spec: BundleSpec, registry=None, I_override=None):
        reg = registry or default_registry()
        self.spec = spec
        self.base = structure_for(reg.manifold(spec.base))
        self.m, self.m0, self.d = self.base.m, self.base.m0, self.base.d
        self.r = spec.rank
        self.dim = self.m + self.r
        self.I = I_override or spec.complex_structure

    def horizontal_lift(self, v: Jet, zs: Jet) -> Jet:
        """``v - y^j omega_j^p(v) d/dy^p`` for a base vector ``v`` (jets in chart variables)."""
        m = self.m
        om = self.spec.connection_forms(zs[:m])  # [j, p, a]
        y = zs[m:]
        vv = v.truncate(min(v.order, om.order))
        w = (om.truncate(vv.order) * vv.reshape(1, 1, m)).sum(axis=-1)  # [j, p] = omega_j^p(v)
        vert = -(y.truncate(w.order).reshape(-1, 1) * w).sum(axis=0)
        return concatenate([vv, vert])

    def _vertical(self, zs: Jet) -> Jet:
        return concatenate([Jet.zeros((self.r, self.m), zs.nvars, zs.order), Jet.constant(np.eye(self.r), zs.nvars, zs.order)], axis=1)

    def J_E(self, zs: Jet) -> Jet:
        """``J_E`` as a coordinate matrix, zero on the lifted complement."""
        m, r = self.m, self.r
        xs = zs[:m]
        E = self.base.frame(xs)
        F = self.base.complement(xs)
        S = Splitting(E, F)
        Jb = S.J
        # real basis of TM: Re e, Im e, F  -> lifted, and d/dy
        basis = [E[i] + E[i].conj() for i in range(self.m0)] + [(E[i] - E[i].conj()) * 1j for i in range(self.m0)]
        basis += [F[k] for k in range(self.d)]
        images = [Jb @ b for b in basis]
        cols = [self.horizontal_lift(b, zs) for b in basis]
        img = [self.horizontal_lift(b, zs) for b in images[: 2 * self.m0]]
        img += [Jet.zeros((self.dim,), zs.nvars, cols[0].order)] * self.d
        V = self._vertical(zs)
        Imat = self.I(xs)
        order = min(c.order for c in cols + img)
        order = min(order, Imat.order)
        for j in range(r):
            cols.append(V[j].truncate(order))
            img.append((Imat[:, j].reshape(-1, 1).truncate(order) * V.truncate(order)).sum(axis=0))
        Bm = stack([c.truncate(order) for c in cols], axis=1)
        Im = stack([c.truncate(order) for c in img], axis=1)
        return Im @ jet_inverse_matrix(Bm)

    def frame(self, zs: Jet) -> Jet:
        """(1,0) frame ``(hat e_i, f_j)`` with ``f_j`` the independent columns of ``(1 - iI)/2``."""
        m = self.m
        xs = zs[:m]
        E = self.base.frame(xs)
        rows = [self.horizontal_lift(E[i], zs) for i in range(self.m0)]
        Imat = self.I(xs)
        P = (Jet.constant(np.eye(self.r), zs.nvars, Imat.order) - Imat * 1j) * 0.5
        cols = _independent_columns(P.value, self.r // 2)
        V = self._vertical(zs)
        order = min(min(r.order for r in rows), P.order)
        for j in cols:
            rows.append((P[:, j].reshape(-1, 1) * V.truncate(P.order)).sum(axis=0).truncate(order))
        return stack([r_.truncate(order) for r_ in rows])

    def complement(self, zs: Jet) -> Jet:
        F = self.base.complement(zs[: self.m])
        if F.shape[0] == 0:
            return Jet.zeros((0, self.dim), zs.nvars, zs.order)
        return stack([self.horizontal_lift(F[k], zs) for k in range(self.d)])

    def splitting(self, point, order: int = 1) -> Splitting:
        zs = Jet.variables(point, order)
        E = self.frame(zs)
        F = self.complement(zs)
        o = min(E.order, F.order)
        return Splitting(E.truncate(o), F.truncate(o))

    def report(self, point, rng=None, order: int = 1) -> dict:
        """Residuals of ``J_E^2 = -id`` on HE, of the almost CR map conditions
        for the projection and the rank of ``TE = lifted TM + VE``."""
        zs = Jet.variables(point, order)
        m = self.m
        JE = self.J_E(zs).value
        xs0 = Jet.variables(point[:m], 0)
        Eb = self.base.frame(xs0).value
        Fb = self.base.complement(xs0).value
        Sb = Splitting(Jet.constant(Eb, 1, 0), Jet.constant(Fb, 1, 0))
        Jb = Sb.J.value
        # HE basis at the point
        HE = [self.horizontal_lift(Jet.constant(v, zs.nvars, order), zs).value for v in list(Eb) + list(Eb.conj())]
        HE += [np.eye(self.dim)[m + j] for j in range(self.r)]
        sq = max(_maxabs(JE @ (JE @ v) + v) for v in HE)
        dp = np.zeros((m, self.dim))
        dp[:, :m] = np.eye(m)
        # dp(HE) in HM: no F component; dp o J_E = J o dp on HE
        coframe = np.linalg.inv(Sb.B.value.T)
        leak = max(_maxabs((coframe @ (dp @ v))[2 * self.m0 :]) for v in HE)
        comm = max(_maxabs(dp @ (JE @ v) - Jb @ (dp @ v)) for v in HE)
        lifted = [self.horizontal_lift(Jet.constant(np.eye(m)[a], zs.nvars, order), zs).value for a in range(m)]
        Mrank = np.column_stack(lifted + [np.eye(self.dim)[m + j] for j in range(self.r)])
        sv = np.linalg.svd(Mrank, compute_uv=False)
        return {
            "J_squared": sq,
            "dp_HE_in_HM": leak,
            "dp_commutes": comm,
            "splitting_rank": int(np.sum(sv > 1e-10 * sv[0])),
            "splitting_min_sv": float(sv[-1]),
        }

    def nijenhuis_number(self, point, rng=None, samples: int = 2, order: int = 2) -> float:
        """Size of the Nijenhuis tensor on random Levi sections (reported, not asserted)."""
        rng = rng or np.random.default_rng(0)
        S = self.splitting(point, order)
        out = 0.0
        for _ in range(samples):
            X, Y = random_levi_section(S, rng), random_levi_section(S, rng)
            out = max(out, _maxabs(nijenhuis(S, X, Y).value))
        return out


def _independent_columns(P: np.ndarray, k: int) -> list[int]:
    _, _, piv = scipy.linalg.qr(P, pivoting=True)
    return sorted(int(j) for j in piv[:k])


def bundle_cr_lift(spec, points, registry=None, I_override=None) -> tuple[BundleCRLift, dict]:
    """Build the lift of ``spec`` (name or :class:`BundleSpec`) and report at ``points``."""
    reg = registry or default_registry()
    if isinstance(spec, str):
        spec = reg.bundle(spec)
    lift = BundleCRLift(spec, reg, I_override)
    if I_override is None:
        I0 = spec.complex_structure(Jet.variables(np.asarray(points)[0][: lift.m], 0)).value
        if _maxabs(I0 @ I0 + np.eye(spec.rank)) > 1e-9:
            raise ModelValidationError(f"bundle {spec.name!r}: I^2 != -id")
    reports = [lift.report(q) for q in np.atleast_2d(points)]
    rep = {k: max(r[k] for r in reports) for k in ("J_squared", "dp_HE_in_HM", "dp_commutes")}
    rep["splitting_rank"] = min(r["splitting_rank"] for r in reports)
    rep["splitting_min_sv"] = min(r["splitting_min_sv"] for r in reports)
    return lift, rep
