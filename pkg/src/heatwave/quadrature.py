"""Vectorised adaptive Gauss-Kronrod (G7/K15) quadrature.

Two entry points:

``integrate``
    one integral of a vectorised integrand ``f(y_array) -> array``.
``integrate_batch``
    many independent integrals at once; each keeps its own panel tree and
    tolerance, but every refinement sweep evaluates all live panels of all
    integrals in a single integrand call.

Panels are bisected until ``|K15 - G7|`` is below the panel's share of the
tolerance, where the tolerance is ``max(atol, rtol * |estimate|)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import QuadratureError

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# 15 abscissae on [-1, 1] and matching weights
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
_g_full = np.zeros(15)
_g_full[[1, 3, 5]] = _WG[:3]
_g_full[7] = _WG[3]
_g_full[[9, 11, 13]] = _WG[2::-1]
GAUSS = _g_full

_MIN_WIDTH = 1e-13


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    panels: int


def _rule(fv, half):
    k = fv @ KRONROD * half
    g = fv @ GAUSS * half
    return k, np.abs(k - g)


def integrate(f, a, b, *, atol=1e-10, rtol=0.0, points=(), max_panels=100_000):
    """Adaptive integral of ``f`` over ``[a, b]``.

    Parameters
    ----------
    f : callable
        Vectorised integrand; receives a 1-D array of abscissae.
    a, b : float
        Finite limits, ``a < b``.
    atol, rtol : float
        Absolute and relative error targets.
    points : sequence of float
        Interior breakpoints (kinks, peaks) used as initial panel edges.

    Returns
    -------
    QuadResult

    Raises
    ------
    QuadratureError
        If the panel budget is exhausted or panels shrink to rounding level
        before the error estimate meets the tolerance.
    """
    if not b > a:
        if a == b:
            return QuadResult(0.0, 0.0, 0)
        raise ValueError("integrate requires a < b")
    inner = sorted(p for p in points if a < p < b)
    edges = np.array([a, *inner, b], dtype=float)
    lo, hi = edges[:-1], edges[1:]
    total_width = b - a

    acc_val, acc_err = [], []
    n_panels = 0
    forced = False
    while lo.size:
        n_panels += lo.size
        if n_panels > max_panels:
            raise QuadratureError(
                f"panel budget {max_panels} exhausted",
                achieved=float(np.sum(acc_err)),
                requested=atol,
            )
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        y = mid[:, None] + half[:, None] * NODES
        fv = np.asarray(f(y.ravel()), dtype=float).reshape(y.shape)
        val, err = _rule(fv, half)
        estimate = float(np.sum(acc_val) + val.sum())
        tol = max(atol, rtol * abs(estimate))
        ok = err <= tol * (2.0 * half) / total_width
        tiny = (2.0 * half) <= _MIN_WIDTH * max(1.0, abs(a), abs(b))
        if np.any(tiny & ~ok):
            forced = True
        ok = ok | tiny
        acc_val.extend(val[ok].tolist())
        acc_err.extend(err[ok].tolist())
        lo, hi, mid = lo[~ok], hi[~ok], mid[~ok]
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    value = float(np.sum(np.sort(np.asarray(acc_val))))
    error = float(np.sum(acc_err))
    tol = max(atol, rtol * abs(value))
    if forced and error > tol:
        raise QuadratureError(
            f"quadrature stalled at error {error:.3e} > {tol:.3e}",
            achieved=error,
            requested=tol,
        )
    return QuadResult(value, error, n_panels)


def integrate_batch(f, a, b, *, atol=1e-10, rtol=0.0, max_sweeps=60, max_live=4_000_000):
    """Integrate many integrands at once.

    Parameters
    ----------
    f : callable
        ``f(idx, y)`` with ``idx`` an int array of integral indices, shape
        ``(P,)``, and ``y`` abscissae of shape ``(P, 15)``; returns values of
        shape ``(P, 15)``.
    a, b : array_like
        Per-integral limits, shape ``(n,)``.
    atol : float or array_like
        Absolute tolerance, scalar or per integral.
    rtol : float
        Relative tolerance against each integral's running estimate.
    max_live : int
        Cap on simultaneously unresolved panels; guards against integrands
        whose noise floor sits above the requested tolerance.

    Returns
    -------
    values, errors : ndarray
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.size
    atol = np.broadcast_to(np.asarray(atol, dtype=float), (n,))
    width = b - a
    values = np.zeros(n)
    errors = np.zeros(n)
    idx = np.arange(n)
    lo, hi = a.copy(), b.copy()
    live = width > 0
    idx, lo, hi = idx[live], lo[live], hi[live]
    pending = np.zeros(n)
    for _ in range(max_sweeps):
        if idx.size == 0:
            break
        if idx.size > max_live:
            raise QuadratureError(
                f"{idx.size} live panels exceed max_live={max_live}; tolerance "
                "below the integrand's noise floor?",
                requested=float(atol.min()),
            )
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        y = mid[:, None] + half[:, None] * NODES
        fv = np.asarray(f(idx, y), dtype=float).reshape(y.shape)
        val, err = _rule(fv, half)
        pending[:] = 0.0
        np.add.at(pending, idx, val)
        estimate = values + pending
        tol = np.maximum(atol, rtol * np.abs(estimate))
        ok = err <= tol[idx] * (2.0 * half) / width[idx]
        ok |= (2.0 * half) <= _MIN_WIDTH * np.maximum(1.0, np.abs(mid))
        values += np.bincount(idx[ok], weights=val[ok], minlength=n)
        errors += np.bincount(idx[ok], weights=err[ok], minlength=n)
        keep = ~ok
        idx, lo, hi, mid = idx[keep], lo[keep], hi[keep], mid[keep]
        idx = np.concatenate([idx, idx])
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    else:
        if idx.size:
            raise QuadratureError(
                f"{np.unique(idx).size} batch integrals unresolved after "
                f"{max_sweeps} bisection sweeps",
                requested=float(atol.max()) if n else None,
            )
    return values, errors
