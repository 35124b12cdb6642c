"""Truncated multivariate Taylor arithmetic over complex coefficients.

A :class:`Jet` stores the Taylor coefficients of one or more functions of
``nvars`` real variables about a base point, truncated at total degree
``order``.  Coefficients live on the last axis of a dense complex array, in
graded order, so that the coefficients of a lower-order truncation are a
prefix of the higher-order ones.  Leading axes give arrays of jets
(vector fields, matrices, tensors) that broadcast like numpy arrays.

The coefficient of multi-index ``a`` is the Taylor coefficient, i.e. the
mixed partial derivative divided by ``a!``.
"""

from __future__ import annotations

import functools
import itertools
import math
from numbers import Number

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import JetShapeError, SingularJetError, TruncationError

DEFAULT_ORDER = 4

# Constant-term condition numbers above this are reported as singular.
SINGULAR_CONDITION = 1e13


@functools.lru_cache(maxsize=None)
def ncoef(nvars: int, order: int) -> int:
    return math.comb(nvars + order, order)


class _Tables:
    """Index bookkeeping for one (nvars, order) pair."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        index = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), d):
                mi = [0] * nvars
                for v in combo:
                    mi[v] += 1
                index.append(tuple(mi))
        self.index = index
        self.lookup = {mi: k for k, mi in enumerate(index)}
        self.n = len(index)
        self.degree = np.array([sum(mi) for mi in index])
        self.factorial = np.array(
            [math.prod(math.factorial(e) for e in mi) for mi in index], dtype=float
        )

    @functools.cached_property
    def product(self):
        rows_i, rows_j, cols = [], [], []
        for i, a in enumerate(self.index):
            # graded order: every partner of degree <= order - |a| is a prefix
            limit = ncoef(self.nvars, self.order - sum(a))
            for j in range(limit):
                b = self.index[j]
                rows_i.append(i)
                rows_j.append(j)
                cols.append(self.lookup[tuple(x + y for x, y in zip(a, b))])
        left = np.array(rows_i)
        right = np.array(rows_j)
        # gather[c, k] = 1 when pair k lands on coefficient c
        gather = scipy.sparse.csr_matrix(
            (np.ones(len(cols)), (np.array(cols), np.arange(len(cols)))),
            shape=(self.n, len(cols)),
        )
        return left, right, gather

    @functools.lru_cache(maxsize=None)
    def derivative(self, var: int):
        lower = _tables(self.nvars, self.order - 1)
        src = np.empty(lower.n, dtype=int)
        fac = np.empty(lower.n)
        for k, mi in enumerate(lower.index):
            up = list(mi)
            up[var] += 1
            src[k] = self.lookup[tuple(up)]
            fac[k] = up[var]
        return src, fac


@functools.lru_cache(maxsize=None)
def _tables(nvars: int, order: int) -> _Tables:
    return _Tables(nvars, order)


def multi_indices(nvars: int, order: int) -> list[tuple[int, ...]]:
    """Multi-indices of total degree <= order in storage order."""
    return list(_tables(nvars, order).index)


class Jet:
    """Array of truncated Taylor expansions sharing nvars and order.

    Parameters
    ----------
    coeffs : array_like
        Complex array of shape ``shape + (ncoef(nvars, order),)``.
    nvars, order : int
    """

    __slots__ = ("coeffs", "nvars", "order")
    __array_priority__ = 1000

    def __init__(self, coeffs, nvars: int, order: int):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim == 0 or coeffs.shape[-1] != ncoef(nvars, order):
            raise JetShapeError(
                f"coefficient axis has length {coeffs.shape[-1:] or 0}, "
                f"expected {ncoef(nvars, order)} for nvars={nvars}, order={order}"
            )
        self.coeffs = coeffs
        self.nvars = nvars
        self.order = order

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, value, nvars: int, order: int = DEFAULT_ORDER) -> "Jet":
        value = np.asarray(value, dtype=complex)
        coeffs = np.zeros(value.shape + (ncoef(nvars, order),), dtype=complex)
        coeffs[..., 0] = value
        return cls(coeffs, nvars, order)

    @classmethod
    def zeros(cls, shape, nvars: int, order: int = DEFAULT_ORDER) -> "Jet":
        return cls(np.zeros(tuple(shape) + (ncoef(nvars, order),), complex), nvars, order)

    @classmethod
    def variables(cls, point, order: int = DEFAULT_ORDER, nvars: int | None = None) -> "Jet":
        """Jets of the coordinate functions ``x_k`` about ``point``.

        Returns a jet of shape ``(len(point),)``; component ``k`` is
        ``point[k] + h_k``.  ``nvars`` may exceed ``len(point)`` when the
        coordinates are the leading variables of a larger space.
        """
        point = np.asarray(point, dtype=float)
        m = len(point)
        nvars = m if nvars is None else nvars
        if nvars < m:
            raise JetShapeError("nvars smaller than the number of coordinates")
        coeffs = np.zeros((m, ncoef(nvars, order)), dtype=complex)
        coeffs[:, 0] = point
        if order >= 1:
            coeffs[np.arange(m), 1 + np.arange(m)] = 1.0
        return cls(coeffs, nvars, order)

    # basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.coeffs.ndim - 1

    @property
    def value(self) -> np.ndarray:
        """Degree-0 coefficients, i.e. the values at the base point."""
        return self.coeffs[..., 0]

    def __len__(self):
        return self.shape[0]

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx):
            raise JetShapeError("Ellipsis indexing is not supported on jets")
        return Jet(self.coeffs[idx + (slice(None),)], self.nvars, self.order)

    def __repr__(self):
        return f"Jet(shape={self.shape}, nvars={self.nvars}, order={self.order})"

    def copy(self) -> "Jet":
        return Jet(self.coeffs.copy(), self.nvars, self.order)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise TruncationError(f"cannot raise jet order {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.coeffs[..., : ncoef(self.nvars, order)], self.nvars, order)

    def coeff(self, mi) -> np.ndarray:
        mi = tuple(mi)
        if len(mi) != self.nvars:
            raise JetShapeError(f"multi-index {mi} has wrong length for nvars={self.nvars}")
        if sum(mi) > self.order:
            return np.zeros(self.shape, dtype=complex)
        return self.coeffs[..., _tables(self.nvars, self.order).lookup[mi]]

    def partial(self, mi) -> np.ndarray:
        """Mixed partial derivative ``d^mi f`` at the base point."""
        mi = tuple(mi)
        if sum(mi) > self.order:
            raise TruncationError(
                f"derivative of total degree {sum(mi)} exceeds jet order {self.order}"
            )
        return self.coeff(mi) * math.prod(math.factorial(e) for e in mi)

    def as_dict(self, tol: float = 0.0) -> dict:
        """Map multi-index -> coefficient for a scalar jet (entries above tol)."""
        if self.shape:
            raise JetShapeError("as_dict needs a scalar jet")
        tabs = _tables(self.nvars, self.order)
        return {mi: complex(c) for mi, c in zip(tabs.index, self.coeffs) if abs(c) > tol}

    # arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.nvars != self.nvars:
                raise JetShapeError(
                    f"jets over {self.nvars} and {other.nvars} variables cannot be combined"
                )
            order = min(self.order, other.order)
            return self.truncate(order), other.truncate(order)
        if isinstance(other, (Number, np.ndarray, np.generic, list, tuple)):
            return self, Jet.constant(other, self.nvars, self.order)
        return NotImplemented

    def __add__(self, other):
        pair = self._coerce(other)
        if pair is NotImplemented:
            return NotImplemented
        a, b = pair
        return Jet(a.coeffs + b.coeffs, a.nvars, a.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs, self.nvars, self.order)

    def __sub__(self, other):
        pair = self._coerce(other)
        if pair is NotImplemented:
            return NotImplemented
        a, b = pair
        return Jet(a.coeffs - b.coeffs, a.nvars, a.order)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, (Number, np.generic)):
            return Jet(self.coeffs * other, self.nvars, self.order)
        if isinstance(other, (np.ndarray, list, tuple)):
            other = np.asarray(other, dtype=complex)
            return Jet(self.coeffs * other[..., None], self.nvars, self.order)
        if isinstance(other, Jet):
            return jet_mul(self, other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (Number, np.generic)):
            if other == 0:
                raise SingularJetError("division by zero constant")
            return Jet(self.coeffs / other, self.nvars, self.order)
        if isinstance(other, (np.ndarray, list, tuple)):
            other = np.asarray(other, dtype=complex)
            if np.any(other == 0):
                raise SingularJetError("division by zero constant")
            return Jet(self.coeffs / other[..., None], self.nvars, self.order)
        if isinstance(other, Jet):
            return jet_mul(self, jet_invert(other))
        return NotImplemented

    def __rtruediv__(self, other):
        return jet_invert(self) * other

    def __pow__(self, n):
        if isinstance(n, (int, np.integer)):
            if n < 0:
                return jet_invert(self) ** (-n)
            result = Jet.constant(np.ones(self.shape), self.nvars, self.order)
            base = self
            while n:
                if n & 1:
                    result = jet_mul(result, base)
                n >>= 1
                if n:
                    base = jet_mul(base, base)
            return result
        return jet_power(self, n)

    def __matmul__(self, other):
        return jet_matmul(self, other)

    def __rmatmul__(self, other):
        return jet_matmul(Jet.constant(other, self.nvars, self.order), self)

    def conj(self) -> "Jet":
        # chart variables are real, so conjugation acts on coefficients only
        return Jet(self.coeffs.conj(), self.nvars, self.order)

    @property
    def real(self) -> "Jet":
        return Jet(self.coeffs.real.astype(complex), self.nvars, self.order)

    @property
    def imag(self) -> "Jet":
        return Jet(self.coeffs.imag.astype(complex), self.nvars, self.order)

    # calculus ---------------------------------------------------------
    def deriv(self, var: int) -> "Jet":
        """Partial derivative in variable ``var``; the result has order - 1."""
        if self.order == 0:
            raise TruncationError("cannot differentiate an order-0 jet")
        if not 0 <= var < self.nvars:
            raise JetShapeError(f"variable {var} out of range for nvars={self.nvars}")
        src, fac = _tables(self.nvars, self.order).derivative(var)
        return Jet(self.coeffs[..., src] * fac, self.nvars, self.order - 1)

    def gradient(self, nvars: int | None = None) -> "Jet":
        """Stack of partial derivatives on a new last axis (first ``nvars`` variables)."""
        nvars = self.nvars if nvars is None else nvars
        return stack([self.deriv(v) for v in range(nvars)], axis=-1)

    # array manipulation -----------------------------------------------
    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        axes = _normalize_axes(axis, self.ndim)
        return Jet(self.coeffs.sum(axis=axes), self.nvars, self.order)

    def transpose(self, *axes) -> "Jet":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return Jet(np.transpose(self.coeffs, tuple(axes) + (self.ndim,)), self.nvars, self.order)

    @property
    def T(self) -> "Jet":
        return self.transpose()

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Jet(self.coeffs.reshape(tuple(shape) + (self.coeffs.shape[-1],)), self.nvars, self.order)

    def expand_dims(self, axis: int) -> "Jet":
        axis = axis if axis >= 0 else self.ndim + 1 + axis
        return Jet(np.expand_dims(self.coeffs, axis), self.nvars, self.order)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0


def _normalize_axes(axis, ndim):
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a if a >= 0 else a + ndim for a in axis)


def stack(jets, axis: int = 0) -> Jet:
    jets = list(jets)
    if not jets:
        raise JetShapeError("cannot stack an empty sequence")
    order = min(j.order for j in jets)
    nvars = jets[0].nvars
    if any(j.nvars != nvars for j in jets):
        raise JetShapeError("stacked jets disagree on nvars")
    ndim = jets[0].ndim
    axis = axis if axis >= 0 else ndim + 1 + axis
    coeffs = np.stack([j.truncate(order).coeffs for j in jets], axis=axis)
    return Jet(coeffs, nvars, order)


def concatenate(jets, axis: int = 0) -> Jet:
    jets = list(jets)
    order = min(j.order for j in jets)
    ndim = jets[0].ndim
    axis = axis if axis >= 0 else ndim + axis
    coeffs = np.concatenate([j.truncate(order).coeffs for j in jets], axis=axis)
    return Jet(coeffs, jets[0].nvars, order)


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Elementwise product in the truncated polynomial ring (broadcasting)."""
    if a.nvars != b.nvars:
        raise JetShapeError(f"jets over {a.nvars} and {b.nvars} variables cannot be multiplied")
    order = min(a.order, b.order)
    a = a.truncate(order)
    b = b.truncate(order)
    left, right, gather = _tables(a.nvars, order).product
    try:
        shape = np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise JetShapeError(f"shapes {a.shape} and {b.shape} do not broadcast") from exc
    prod = a.coeffs[..., left] * b.coeffs[..., right]
    flat = prod.reshape(-1, prod.shape[-1])
    out = np.asarray(gather @ flat.T).T
    return Jet(out.reshape(shape + (gather.shape[0],)), a.nvars, order)


def _series(a: Jet, terms) -> Jet:
    """Sum_k terms[k] * (a - a0)^k with per-element coefficient arrays."""
    nil = Jet(a.coeffs.copy(), a.nvars, a.order)
    nil.coeffs[..., 0] = 0
    result = Jet.constant(terms[0], a.nvars, a.order)
    power = None
    for k in range(1, a.order + 1):
        power = nil if power is None else jet_mul(power, nil)
        result = result + power * terms[k]
    return result


def jet_invert(a: Jet) -> Jet:
    """Multiplicative inverse; the constant term must be nonzero."""
    a0 = a.value
    if np.any(a0 == 0):
        raise SingularJetError("jet with zero constant term is not invertible", float("inf"))
    terms = [(-1.0) ** k / a0 ** (k + 1) for k in range(a.order + 1)]
    return _series(a, terms)


def jet_power(a: Jet, p: complex) -> Jet:
    """Principal-branch power a**p for non-integer p (constant term nonzero)."""
    a0 = a.value
    if np.any(a0 == 0):
        raise SingularJetError("non-integer power of a jet with zero constant term")
    terms = []
    for k in range(a.order + 1):
        binom = np.prod([(p - r) / (r + 1) for r in range(k)]) if k else 1.0
        terms.append(binom * a0 ** (p - k))
    return _series(a, terms)


def _cyclic(funcs, a: Jet) -> Jet:
    a0 = a.value
    vals = [f(a0) for f in funcs]
    terms = [vals[k % len(vals)] / math.factorial(k) for k in range(a.order + 1)]
    return _series(a, terms)


def exp(a: Jet) -> Jet:
    e = np.exp(a.value)
    return _series(a, [e / math.factorial(k) for k in range(a.order + 1)])


def sin(a: Jet) -> Jet:
    return _cyclic([np.sin, np.cos, lambda z: -np.sin(z), lambda z: -np.cos(z)], a)


def cos(a: Jet) -> Jet:
    return _cyclic([np.cos, lambda z: -np.sin(z), lambda z: -np.cos(z), np.sin], a)


def sinh(a: Jet) -> Jet:
    return _cyclic([np.sinh, np.cosh], a)


def cosh(a: Jet) -> Jet:
    return _cyclic([np.cosh, np.sinh], a)


def log(a: Jet) -> Jet:
    a0 = a.value
    if np.any(a0 == 0):
        raise SingularJetError("log of a jet with zero constant term")
    terms = [np.log(a0.astype(complex))]
    terms += [(-1.0) ** (k + 1) / (k * a0**k) for k in range(1, a.order + 1)]
    return _series(a, terms)


def sqrt(a: Jet) -> Jet:
    return jet_power(a, 0.5)


def jet_matmul(a: Jet, b: Jet) -> Jet:
    """Matrix product over the jet ring with numpy matmul shape rules."""
    if not isinstance(b, Jet):
        b = Jet.constant(b, a.nvars, a.order)
    if a.ndim == 0 or b.ndim == 0:
        raise JetShapeError("matmul needs at least one axis on each operand")
    a2 = a.expand_dims(0) if a.ndim == 1 else a
    b2 = b.expand_dims(-1) if b.ndim == 1 else b
    if a2.shape[-1] != b2.shape[-2]:
        raise JetShapeError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    prod = jet_mul(a2.expand_dims(-1), b2.expand_dims(-3)).sum(axis=-2)
    if a.ndim == 1:
        prod = prod[0] if prod.ndim == 2 else Jet(np.take(prod.coeffs, 0, axis=-3), prod.nvars, prod.order)
    if b.ndim == 1:
        prod = Jet(np.take(prod.coeffs, 0, axis=-2), prod.nvars, prod.order)
    return prod


def condition_number(matrix: np.ndarray) -> float:
    with np.errstate(all="ignore"):
        c = np.linalg.cond(matrix)
    return float(c) if np.isfinite(c) else float("inf")


def jet_solve_linear(A: Jet, b: Jet) -> Jet:
    """Solve ``A x = b`` over the jet ring.

    ``A`` has shape ``(n, n)``; ``b`` has shape ``(n,)`` or ``(n, k)``.  The
    constant-term matrix is LU-factored with partial pivoting and higher
    degrees are recovered by the Neumann iteration
    ``x <- A0^{-1} (b - (A - A0) x)``, which is exact after ``order`` steps
    because ``A - A0`` is nilpotent.
    """
    if not isinstance(b, Jet):
        b = Jet.constant(b, A.nvars, A.order)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise JetShapeError(f"system matrix must be square, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise JetShapeError(f"right-hand side shape {b.shape} does not match {A.shape}")
    order = min(A.order, b.order)
    A = A.truncate(order)
    b = b.truncate(order)
    A0 = A.value
    cond = condition_number(A0)
    if cond > SINGULAR_CONDITION:
        raise SingularJetError(
            f"degree-0 matrix is singular (condition estimate {cond:.3g})", cond
        )
    lu = scipy.linalg.lu_factor(A0)
    n = A.shape[0]

    def apply_inverse(rhs: Jet) -> Jet:
        flat = rhs.coeffs.reshape(n, -1)
        sol = scipy.linalg.lu_solve(lu, flat)
        return Jet(sol.reshape(rhs.coeffs.shape), rhs.nvars, rhs.order)

    nil = Jet(A.coeffs.copy(), A.nvars, order)
    nil.coeffs[..., 0] = 0
    x = apply_inverse(b)
    for _ in range(order):
        x = apply_inverse(b - jet_matmul(nil, x))
    return x


def jet_inverse_matrix(A: Jet) -> Jet:
    n = A.shape[0]
    return jet_solve_linear(A, Jet.constant(np.eye(n), A.nvars, A.order))


def jet_partial(a: Jet, mi) -> np.ndarray:
    return a.partial(mi)


def compose(outer: Jet, inner: Jet) -> Jet:
    """Substitute ``inner`` for the variables of ``outer``.

    ``outer`` is an expansion in displacement variables about a point
    ``y0``; ``inner`` has shape ``(outer.nvars,)`` and holds jets of ``y(x)``
    with ``y(x0) == y0``.  Only the non-constant part of ``inner`` enters,
    so the caller is responsible for expanding ``outer`` about ``y(x0)``.
    """
    if inner.shape != (outer.nvars,):
        raise JetShapeError(f"inner jet must have shape ({outer.nvars},), got {inner.shape}")
    order = min(outer.order, inner.order)
    outer = outer.truncate(order)
    disp = Jet(inner.truncate(order).coeffs.copy(), inner.nvars, order)
    disp.coeffs[..., 0] = 0
    tabs = _tables(outer.nvars, order)
    rows = np.zeros((tabs.n, ncoef(inner.nvars, order)), dtype=complex)
    rows[0, 0] = 1.0
    powers = {tabs.index[0]: Jet.constant(1.0, inner.nvars, order)}
    for k, mi in enumerate(tabs.index[1:], start=1):
        v = next(i for i, e in enumerate(mi) if e)
        lower = list(mi)
        lower[v] -= 1
        pw = jet_mul(powers[tuple(lower)], disp[v])
        powers[mi] = pw
        rows[k] = pw.coeffs
    return Jet(outer.coeffs @ rows, inner.nvars, order)
