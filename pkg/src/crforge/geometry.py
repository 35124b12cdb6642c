"""Chart-level calculus on jets: fields, forms, brackets and splittings.

Everything here works on *local jets*: Taylor expansions about a base
point ``p`` in the chart variables.  A vector field is a jet of shape
``(n,)`` holding coordinate components; a ``k``-form is a jet with ``k``
trailing axes of length ``n`` holding its fully antisymmetric components,
so ``w(X1, ..., Xk) = w[a1, ..., ak] X1^a1 ... Xk^ak``.

Normalization: ``alpha ^ beta = Alt(alpha (x) beta)`` and
``d = Alt o partial``.  For 1-forms this reads
``dw(X, Y) = (X w(Y) - Y w(X) - w([X, Y])) / 2`` and
``(a ^ b)(X, Y) = (a(X) b(Y) - a(Y) b(X)) / 2``.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from .errors import ContractViolation, HypothesisViolation, JetShapeError, TruncationError
from .jet import DEFAULT_ORDER, Jet, compose, concatenate, jet_inverse_matrix, jet_mul, multi_indices, stack

# (1,0) test: the (0,1) and F parts of a declared (1,0) vector must stay below this
CONTRACT_TOL = 1e-9


# fields -----------------------------------------------------------------
class VectorField:
    """A vector field given as a function of coordinate jets.

    ``fn(xs)`` receives a jet of shape ``(dim,)`` (the chart coordinates,
    possibly composed with another map) and returns coordinate components
    of shape ``(dim,)``.
    """

    def __init__(self, fn: Callable[[Jet], Jet], dim: int, name: str = ""):
        self.fn = fn
        self.dim = dim
        self.name = name

    def __call__(self, xs: Jet) -> Jet:
        return self.fn(xs)

    def at(self, point, order: int = DEFAULT_ORDER) -> Jet:
        return self.fn(Jet.variables(point, order))

    @classmethod
    def from_exprs(cls, exprs, coordinates, name: str = ""):
        from .expr import CompiledExpr

        compiled = [e if isinstance(e, CompiledExpr) else CompiledExpr(e, coordinates) for e in exprs]
        return cls(lambda xs: stack([c(xs) for c in compiled]), len(coordinates), name)


def local_jet(obj, point, order: int) -> Jet:
    """Jet about ``point`` of a field/function given as a callable or a jet."""
    if isinstance(obj, Jet):
        return obj.truncate(order) if obj.order > order else obj
    return obj(Jet.variables(point, order))


def apply_field(X: Jet, f: Jet) -> Jet:
    """Directional derivative ``X(f) = X^a d_a f`` (elementwise on ``f``)."""
    if X.ndim != 1:
        raise JetShapeError(f"vector field must have shape (n,), got {X.shape}")
    if f.order == 0:
        raise TruncationError("cannot differentiate an order-0 jet")
    n = X.shape[0]
    if n > f.nvars:
        raise JetShapeError(f"field has {n} components but jets carry {f.nvars} variables")
    total = None
    for a in range(n):
        term = jet_mul(X[a].reshape((1,) * f.ndim) if f.ndim else X[a], f.deriv(a))
        total = term if total is None else total + term
    return total


def lie_bracket(X, Y, point=None, order: int = DEFAULT_ORDER) -> Jet:
    """Lie bracket ``[X, Y]^b = X(Y^b) - Y(X^b)``.

    ``X`` and ``Y`` are local jets, or callables evaluated about ``point``.
    The result has one order less than its inputs.
    """
    if not isinstance(X, Jet) or not isinstance(Y, Jet):
        if point is None:
            raise ValueError("a base point is required for callable fields")
        X = local_jet(X, point, order)
        Y = local_jet(Y, point, order)
    if X.order == 0 or Y.order == 0:
        raise TruncationError("Lie bracket needs jets of order >= 1")
    return apply_field(X, Y) - apply_field(Y, X)


def gradient(f: Jet, n: int | None = None) -> Jet:
    """Partial derivatives on a new trailing axis (first ``n`` variables)."""
    n = f.nvars if n is None else n
    return stack([f.deriv(a) for a in range(n)], axis=-1)


def jacobian(F: Jet, n: int | None = None) -> Jet:
    """``J[i, a] = d_a F^i`` for a jet of shape ``(k,)``."""
    return gradient(F, n)


def random_polynomial(nvars: int, rng, degree: int = 3, shape=(), center=None, scale: float = 1.0):
    """Callable evaluating a polynomial with random real coefficients."""
    center = np.zeros(nvars) if center is None else np.asarray(center, float)
    monos = [mi for mi in multi_indices(nvars, degree)]
    coef = scale * rng.normal(size=tuple(shape) + (len(monos),))

    def fn(xs: Jet) -> Jet:
        h = xs - center
        out = None
        for k, mi in enumerate(monos):
            term = Jet.constant(1.0, xs.nvars, xs.order)
            for v, e in enumerate(mi):
                for _ in range(e):
                    term = term * h[v]
            c = coef[..., k]
            piece = term * c if np.ndim(c) == 0 else term.reshape((1,) * len(shape)) * c
            out = piece if out is None else out + piece
        return out

    return fn


# forms ----------------------------------------------------------------
def _parity(perm) -> int:
    inv = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return -1 if inv % 2 else 1


def alt(T: Jet, k: int | None = None) -> Jet:
    """Antisymmetrize the last ``k`` axes of ``T`` (average with signs)."""
    k = T.ndim if k is None else k
    if k <= 1:
        return T
    lead = T.ndim - k
    out = None
    for perm in itertools.permutations(range(k)):
        axes = tuple(range(lead)) + tuple(lead + p for p in perm)
        term = T.transpose(axes) * float(_parity(perm))
        out = term if out is None else out + term
    return out / math.factorial(k)


def wedge(a: Jet, b: Jet, ka: int | None = None, kb: int | None = None) -> Jet:
    ka = a.ndim if ka is None else ka
    kb = b.ndim if kb is None else kb
    if a.ndim != ka or b.ndim != kb:
        raise JetShapeError("wedge expects pure form component arrays")
    outer = jet_mul(a.reshape(a.shape + (1,) * kb), b.reshape((1,) * ka + b.shape))
    return alt(outer, ka + kb)


def exterior_derivative(w: Jet, n: int | None = None) -> Jet:
    """``d = Alt o partial``; a 0-form (scalar jet) maps to its gradient."""
    n = w.nvars if n is None else n
    if w.ndim and w.shape[0] != n:
        raise JetShapeError(f"form components of length {w.shape[0]} on an {n}-dimensional chart")
    D = stack([w.deriv(a) for a in range(n)], axis=0)
    return alt(D, w.ndim + 1)


def evaluate_form(w: Jet, *vectors: Jet) -> Jet:
    """``w(X1, ..., Xk)`` as a scalar jet."""
    if len(vectors) != w.ndim:
        raise JetShapeError(f"a {w.ndim}-form needs {w.ndim} vectors, got {len(vectors)}")
    out = w
    for X in vectors:
        out = interior(X, out)
    return out


def interior(X: Jet, w: Jet) -> Jet:
    """Contraction ``i_X w`` in the first slot (no combinatorial factor)."""
    return jet_mul(w, X.reshape(X.shape + (1,) * (w.ndim - 1))).sum(axis=0)


def _contract_axes(T: Jet, M: Jet, k: int) -> Jet:
    """Apply ``M`` (shape (r, s)) to each of the last ``k`` axes: T[..a..] M[A, a]."""
    out = T
    for axis in range(T.ndim - k, T.ndim):
        moved = out.transpose(tuple(i for i in range(out.ndim) if i != axis) + (axis,))
        # moved[..., a] * M[A, a] summed over a -> [..., A]
        prod = jet_mul(moved.expand_dims(-2), M.reshape((1,) * (moved.ndim - 1) + M.shape)).sum(axis=-1)
        back = list(range(prod.ndim - 1))
        back.insert(axis, prod.ndim - 1)
        out = prod.transpose(tuple(back))
    return out


# splitting ------------------------------------------------------------
class Splitting:
    """Local splitting ``TM (x) C = T10 + T01 + F`` from frame jets.

    Parameters
    ----------
    E : Jet, shape (m0, n)
        (1,0) frame, coordinate components.
    F : Jet, shape (d, n)
        Real complement frame.
    """

    def __init__(self, E: Jet, F: Jet | None = None):
        m0, n = E.shape
        if F is None or F.shape[0] == 0:
            F = Jet.zeros((0, n), E.nvars, E.order)
        d = F.shape[0]
        if 2 * m0 + d != n:
            raise JetShapeError(f"frame blocks of sizes {m0}, {m0}, {d} do not span dimension {n}")
        order = min(E.order, F.order)
        self.E = E.truncate(order)
        self.F = F.truncate(order)
        self.m0, self.d, self.n = m0, d, n
        self.B = concatenate([self.E, self.E.conj(), self.F], axis=0)  # rows E_A
        # coframe rows theta^A with theta^A(E_B) = delta
        self.coframe = jet_inverse_matrix(self.B.T)
        self.types = np.array([0] * m0 + [1] * m0 + [2] * d)
        lam = np.array([1j] * m0 + [-1j] * m0 + [0] * d)
        self.J = jet_mul(self.B.T, Jet.constant(lam, E.nvars, order).reshape(1, n)) @ self.coframe

    @property
    def order(self) -> int:
        return self.B.order

    def coefficients(self, v: Jet) -> Jet:
        """Frame coefficients ``c^A`` with ``v = c^A E_A``."""
        return self.coframe.truncate(min(self.order, v.order)) @ v

    def split(self, v: Jet) -> tuple[Jet, Jet, Jet]:
        c = self.coefficients(v)
        m0 = self.m0
        parts = []
        for lo, hi in ((0, m0), (m0, 2 * m0), (2 * m0, self.n)):
            if hi == lo:
                parts.append(Jet.zeros(v.shape, v.nvars, c.order))
            else:
                parts.append(c[lo:hi] @ self.B[lo:hi].truncate(c.order))
        return tuple(parts)

    def part(self, v: Jet, which: str) -> Jet:
        return self.split(v)[{"10": 0, "01": 1, "F": 2}[which]]

    def horizontal(self, v: Jet) -> Jet:
        p10, p01, _ = self.split(v)
        return p10 + p01

    def apply_J(self, v: Jet) -> Jet:
        return self.J.truncate(min(self.order, v.order)) @ v

    def to_frame(self, w: Jet, k: int | None = None) -> Jet:
        k = w.ndim if k is None else k
        return _contract_axes(w, self.B, k)

    def from_frame(self, beta: Jet, k: int | None = None) -> Jet:
        k = beta.ndim if k is None else k
        return _contract_axes(beta, self.coframe.T, k)

    def type_mask(self, k: int, p: int, q: int) -> np.ndarray:
        """Boolean mask over frame multi-indices of bidegree (p, q, 0)."""
        mask = np.zeros((self.n,) * k, dtype=bool)
        for idx in itertools.product(range(self.n), repeat=k):
            t = self.types[list(idx)]
            mask[idx] = (t == 0).sum() == p and (t == 1).sum() == q and (t == 2).sum() == 0
        return mask

    def project(self, w: Jet, p: int, q: int) -> Jet:
        """Component of bidegree (p, q) of a (p+q)-form (pi^{p,q})."""
        k = w.ndim
        if p + q != k:
            raise JetShapeError(f"cannot project a {k}-form to bidegree ({p}, {q})")
        if k == 0:
            return w
        beta = self.to_frame(w)
        mask = self.type_mask(k, p, q)
        beta = Jet(beta.coeffs * mask[..., None], beta.nvars, beta.order)
        return self.from_frame(beta)

    def bidegree(self, w: Jet, tol: float = 1e-10) -> tuple[int, int] | None:
        """The (p, q) carrying ``w`` if it is pure, else None."""
        k = w.ndim
        if k == 0:
            return (0, 0)
        beta = np.abs(self.to_frame(w).coeffs).max(axis=-1)
        found = None
        for p in range(k + 1):
            if beta[self.type_mask(k, p, k - p)].max(initial=0.0) > tol:
                if found is not None:
                    return None
                found = (p, k - p)
        if beta[~np.any([self.type_mask(k, p, k - p) for p in range(k + 1)], axis=0)].max(initial=0) > tol:
            return None
        return found or (k, 0)

    def dee(self, w: Jet, bidegree: tuple[int, int] | None = None) -> Jet:
        """``del w = pi^{p+1,q}(dw)`` for a (p,q)-form ``w``."""
        p, q = bidegree or self._bidegree_or_fail(w)
        return self.project(exterior_derivative(w, self.n), p + 1, q)

    def dbar(self, w: Jet, bidegree: tuple[int, int] | None = None) -> Jet:
        p, q = bidegree or self._bidegree_or_fail(w)
        return self.project(exterior_derivative(w, self.n), p, q + 1)

    def _bidegree_or_fail(self, w):
        bd = self.bidegree(w)
        if bd is None:
            raise ContractViolation("form is not of pure bidegree; pass bidegree explicitly")
        return bd


def splitting_at(frame_fn, complement_fn, point, order: int) -> Splitting:
    xs = Jet.variables(point, order)
    E = frame_fn(xs)
    F = complement_fn(xs) if complement_fn is not None else None
    return Splitting(E, F)


def is_type_10(S: Splitting, V: Jet, tol: float = CONTRACT_TOL) -> float:
    """Largest (0,1)+F part of ``V`` at the base point."""
    _, v01, vF = S.split(V)
    return float(max(np.abs(v01.value).max(initial=0), np.abs(vF.value).max(initial=0)))


def del_dbar_function(u: Jet, S: Splitting, V: Jet, tol: float = CONTRACT_TOL) -> Jet:
    """``V Vbar(u) - [V, Vbar]_{0,1}(u)`` for a (1,0) field ``V``.

    In the half-normalized convention of this module this is twice
    ``(del dbar u)(V, Vbar)``; it is the operator used in the maximum
    principle and in the Bochner computations.
    """
    leak = is_type_10(S, V)
    if leak > tol:
        raise ContractViolation(f"V is not a (1,0) vector at the base point (leak {leak:.3g})")
    Vb = V.conj()
    VVb_u = apply_field(V, apply_field(Vb, u))
    br = lie_bracket(V, Vb)
    br01 = S.part(br, "01")
    return VVb_u - apply_field(br01, u)


def check_max_principle(u: Jet, S: Splitting, V: Jet) -> dict:
    """|du(p)| and ``del dbar u(V, Vbar)(p)`` for a candidate maximum at p."""
    du = gradient(u, S.n).value
    ddbar = complex(del_dbar_function(u, S, V).value)
    return {"du_norm": float(np.abs(du).max()), "ddbar_value": ddbar}


# pullback -------------------------------------------------------------
def pullback(w_at_image: Jet, Df: Jet) -> Jet:
    """``(f^* w)[a..] = w[alpha..](f(x)) Df[alpha, a] ...``.

    ``w_at_image`` is the form already composed with ``f``; ``Df`` has shape
    (target dim, source dim).
    """
    return _contract_axes(w_at_image, Df.T, w_at_image.ndim)


def push_vector(Df: Jet, v: Jet) -> Jet:
    return Df.truncate(min(Df.order, v.order)) @ v


def transport(local: Jet, image: Jet) -> Jet:
    """Compose a local jet (about ``image.value``) with the map jets ``image``."""
    return compose(local, image)


class MapLocal:
    """Local jets of a map ``f`` about ``p`` with its differential."""

    def __init__(self, f, point, order: int, source_dim: int | None = None):
        xs = Jet.variables(point, order + 1)
        self.point = np.asarray(point, dtype=float)
        self.values = f(xs)  # order + 1
        self.image = self.values.value.real
        n = len(point) if source_dim is None else source_dim
        self.Df = gradient(self.values, n)  # order
        self.order = order

    def image_jets(self) -> Jet:
        return self.values.truncate(self.order)


def check_pullback_hypotheses(S1: Splitting, S2: Splitting, Df: Jet, tol: float = 1e-9) -> dict:
    """Residuals of the almost CR map conditions and of df(F1) in F2 at the base point."""
    Df0 = Jet.constant(Df.value, Df.nvars, 0)
    E1 = Jet.constant(S1.E.value, Df.nvars, 0)
    F1 = Jet.constant(S1.F.value, Df.nvars, 0)
    S2_0 = _frozen(S2, Df.nvars)
    leak_cr = 0.0
    for i in range(S1.m0):
        _, v01, vF = S2_0.split(push_vector(Df0, E1[i]))
        leak_cr = max(leak_cr, np.abs(v01.value).max(initial=0), np.abs(vF.value).max(initial=0))
    leak_F = 0.0
    for r in range(S1.d):
        v10, v01, _ = S2_0.split(push_vector(Df0, F1[r]))
        leak_F = max(leak_F, np.abs(v10.value).max(initial=0), np.abs(v01.value).max(initial=0))
    return {"almost_cr": float(leak_cr), "complement": float(leak_F)}


def _frozen(S: Splitting, nvars: int | None = None) -> Splitting:
    n = S.E.nvars if nvars is None else nvars
    return Splitting(Jet.constant(S.E.value, n, 0), Jet.constant(S.F.value, n, 0))


def commute_residual(
    f,
    source_split: Callable[[Jet], tuple[Jet, Jet]],
    target_split: Callable[[Jet], tuple[Jet, Jet]],
    form: Callable[[Jet], Jet],
    bidegree: tuple[int, int],
    point,
    order: int = 3,
    tol: float = 1e-9,
) -> dict:
    """Residuals of ``f^* del w = del f^* w`` and the dbar analogue at ``point``.

    ``source_split``/``target_split`` map coordinate jets to ``(E, F)``
    frame jets; ``form`` maps target coordinate jets to raw form
    components, which are first projected to ``bidegree``.  Raises
    :class:`HypothesisViolation` if ``f`` is not an almost CR map or
    ``df(F1)`` is not inside ``F2``.
    """
    p, q = bidegree
    loc = MapLocal(f, point, order)
    y = Jet.variables(loc.image, order + 1)
    S2 = Splitting(*target_split(y))
    w = S2.project(form(y), p, q)  # order + 1
    del_w = S2.dee(w, (p, q))  # order
    dbar_w = S2.dbar(w, (p, q))

    xs = Jet.variables(point, order)
    S1 = Splitting(*source_split(xs))
    hyp = check_pullback_hypotheses(S1, S2, loc.Df, tol)
    if hyp["almost_cr"] > tol:
        raise HypothesisViolation(f"map is not almost CR at the point (residual {hyp['almost_cr']:.3g})")
    if hyp["complement"] > tol:
        raise HypothesisViolation(
            f"df(F1) is not contained in F2 at the point (residual {hyp['complement']:.3g})"
        )
    img = loc.image_jets()
    fw = pullback(transport(w.truncate(order), img), loc.Df)  # order
    f_del = pullback(transport(del_w, img), loc.Df)
    f_dbar = pullback(transport(dbar_w, img), loc.Df)
    del_f = S1.dee(fw, (p, q))  # order - 1
    dbar_f = S1.dbar(fw, (p, q))
    return {
        "del": float(np.abs((f_del.truncate(0) - del_f.truncate(0)).coeffs).max(initial=0)),
        "dbar": float(np.abs((f_dbar.truncate(0) - dbar_f.truncate(0)).coeffs).max(initial=0)),
        "pure": float(
            np.abs((fw - S1.project(fw, p, q)).truncate(0).coeffs).max(initial=0)
        ),
    }


# calculus identities -------------------------------------------------
def random_form(S: Splitting, rng, k: int, bidegree: tuple[int, int] | None = None, degree: int = 2) -> Jet:
    """Random complex ``k``-form with polynomial components about the base point."""
    n, order = S.n, S.order
    h = Jet.variables(np.zeros(S.E.nvars), order)
    shape = (n,) * k
    re = random_polynomial(S.E.nvars, rng, degree, shape=shape)
    im = random_polynomial(S.E.nvars, rng, degree, shape=shape)
    w = alt(re(h) + im(h) * 1j, k) if k else re(h) + im(h) * 1j
    return S.project(w, *bidegree) if bidegree is not None else w


def calculus_residuals(S: Splitting, rng, samples: int = 1) -> dict:
    """Base-point residuals of ``d^2 = 0``, Leibniz and conjugation for del/dbar.

    Leibniz: ``del(u w) = del u ^ w + u del w`` for a function ``u`` and a
    (1,0)-form ``w`` (likewise for dbar with a (0,1)-form).  Conjugation:
    ``conj(del w) = dbar(conj w)``.
    """
    n = S.n
    out = {"d_squared": 0.0, "leibniz": 0.0, "conjugation": 0.0}
    for _ in range(samples):
        u = random_form(S, rng, 0)
        w1 = random_form(S, rng, 1)
        dd = exterior_derivative(exterior_derivative(w1, n), n)
        ddu = exterior_derivative(exterior_derivative(u, n), n)
        out["d_squared"] = max(out["d_squared"], _vmax(dd), _vmax(ddu))
        for bd, op, du_type in (((1, 0), S.dee, (1, 0)), ((0, 1), S.dbar, (0, 1))):
            w = S.project(w1, *bd)
            uw = jet_mul(u.reshape((1,)), w)
            lhs = op(uw, bd)
            du = S.project(gradient(u, n), *du_type)
            rhs = wedge(du.truncate(w.order - 1), w.truncate(du.order)) + jet_mul(
                u.truncate(w.order - 1).reshape((1, 1)), op(w, bd)
            )
            o = min(lhs.order, rhs.order)
            out["leibniz"] = max(out["leibniz"], _vmax(lhs.truncate(o) - rhs.truncate(o)))
        for bd in ((1, 0), (0, 1), (1, 1)):
            k = bd[0] + bd[1]
            w = random_form(S, rng, k, bd)
            lhs = S.dee(w, bd).conj()
            rhs = S.dbar(w.conj(), (bd[1], bd[0]))
            out["conjugation"] = max(out["conjugation"], _vmax(lhs - rhs))
    return out


def constructed_maximum(S: Splitting, rng) -> Jet:
    """A real function with a strict local maximum at the base point."""
    nv = S.E.nvars
    h = Jet.variables(np.zeros(nv), S.order)
    A = rng.normal(size=(nv, nv))
    Q = A @ A.T + 0.1 * np.eye(nv)
    quad = (h.reshape(-1, 1) * Q * h.reshape(1, -1)).sum()
    cubic = random_polynomial(nv, rng, 3)(h)
    cubic_part = Jet(cubic.coeffs * (_degrees(nv, S.order) == 3), nv, S.order)
    return -quad + cubic_part.real


def _degrees(nvars: int, order: int) -> np.ndarray:
    return np.array([sum(mi) for mi in multi_indices(nvars, order)])


def _vmax(j: Jet) -> float:
    return float(np.abs(j.value).max(initial=0.0))
