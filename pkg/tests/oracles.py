"""Independent reference computations used by several test modules."""

import numpy as np

from crforge.expr import CompiledExpr
from crforge.jet import Jet
from crforge.models import BundleSpec, ManifoldSpec, MapSpec

FD_STEP = 1e-5


def _flatten(obj):
    if isinstance(obj, CompiledExpr):
        yield obj
    elif isinstance(obj, (tuple, list)):
        for item in obj:
            yield from _flatten(item)


def builtin_expressions(registry):
    """(model name, expression, evaluation point) for every builtin expression."""
    out = []
    for name in registry.names():
        spec = registry.get(name)
        if isinstance(spec, ManifoldSpec):
            groups = [spec.frame_exprs, spec.complement_exprs, spec.theta_exprs, spec.metric_exprs]
            point = spec.basepoint
        elif isinstance(spec, MapSpec):
            groups = [spec.component_exprs]
            point = registry.manifold(spec.source).basepoint
        elif isinstance(spec, BundleSpec):
            groups = [spec.I_exprs, spec.omega_exprs]
            point = registry.manifold(spec.base).basepoint
        else:
            continue
        shifted = np.asarray(point, dtype=float) + 0.05 * np.arange(1, len(point) + 1) / len(point)
        for g in groups:
            if g is None or isinstance(g, str):
                continue
            for e in _flatten(g):
                out.append((name, e, shifted))
    return out


def fd_gradient(scalar, p, h=FD_STEP):
    """Central differences of a pointwise evaluator."""
    p = np.asarray(p, dtype=float)
    g = np.zeros(len(p), dtype=complex)
    for a in range(len(p)):
        e = np.zeros(len(p))
        e[a] = h
        g[a] = (scalar(p + e) - scalar(p - e)) / (2 * h)
    return g


def fd_hessian_from_gradients(grad, p, h=FD_STEP):
    """Central differences of an exact first-derivative evaluator."""
    p = np.asarray(p, dtype=float)
    n = len(p)
    H = np.zeros((n, n), dtype=complex)
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        H[a] = (grad(p + e) - grad(p - e)) / (2 * h)
    return H


def jet_gradient(expr, p):
    xs = Jet.variables(p, 1)
    j = expr(xs)
    return np.array([j.partial(tuple(int(b == a) for b in range(len(p)))) for a in range(len(p))])


def jet_hessian(expr, p):
    n = len(p)
    j = expr(Jet.variables(p, 2))
    H = np.zeros((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            mi = [0] * n
            mi[a] += 1
            mi[b] += 1
            H[a, b] = j.partial(tuple(mi))
    return H


def rel_err(a, b, floor=1.0):
    """Elementwise relative error with a floor on the scale for vanishing entries."""
    a, b = np.asarray(a), np.asarray(b)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale, initial=0.0))


def expression_fd_error(expr, p):
    """Worst relative error over value, first and second derivatives."""
    p = np.asarray(p, dtype=float)
    j0 = expr(Jet.variables(p, 0)).value
    err0 = rel_err(j0, expr.scalar(p))
    err1 = rel_err(jet_gradient(expr, p), fd_gradient(expr.scalar, p))
    err2 = rel_err(jet_hessian(expr, p), fd_hessian_from_gradients(lambda q: jet_gradient(expr, q), p))
    return max(err0, err1, err2)
