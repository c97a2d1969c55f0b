"""Heat kernel, interval Green's functions and the bound quantities built on them.

All evaluators accept scalars or broadcastable arrays and return a float for
scalar input, an array otherwise.

The interval is ``[-L, L]``. ``MIXED`` means Dirichlet at ``-L`` and Neumann
at ``+L``.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc

from . import _series
from ._backend import pick
from .errors import DomainError, TruncationError
from .quadrature import integrate, integrate_batch

_CHUNK = 20_000
_EDGE_SLACK = 1e-12


class BoundaryCondition(enum.IntEnum):
    DIRICHLET = _series.DIRICHLET
    MIXED = _series.MIXED
    NEUMANN = _series.NEUMANN

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper()
        aliases = {"D": "DIRICHLET", "M": "MIXED", "N": "NEUMANN"}
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise DomainError(f"unknown boundary condition {value!r}") from None


@dataclass(frozen=True)
class GreenEvaluator:
    """Green's function of ``d/dt - d2/dx2`` on ``[-L, L]``.

    Parameters
    ----------
    L : float
        Half-length of the interval.
    bc : BoundaryCondition or str
    series_tol : float
        Absolute truncation tolerance certified for every series sum.
    max_terms : int
        Largest number of series terms allowed per evaluation point.
    """

    L: float
    bc: BoundaryCondition = BoundaryCondition.DIRICHLET
    series_tol: float = 1e-12
    max_terms: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "bc", BoundaryCondition.parse(self.bc))
        object.__setattr__(self, "L", float(self.L))
        if not (self.L > 0 and math.isfinite(self.L)):
            raise DomainError(f"L must be positive and finite, got {self.L}")
        if not self.series_tol > 0:
            raise DomainError("series_tol must be positive")
        if int(self.max_terms) < 1:
            raise DomainError("max_terms must be >= 1")

    def __call__(self, t, x, y):
        return green(self, t, x, y)

    def images(self, t, x, y):
        return green_images(self, t, x, y)

    def eigen(self, t, x, y):
        return green_eigen(self, t, x, y)

    def discrepancy(self, t, x, y):
        return discrepancy(self, t, x, y)


@dataclass(frozen=True)
class BoundBundle:
    k_factor: float
    a_L: float
    tail_mass: float


# --------------------------------------------------------------------------
# argument handling

def _out(values, shape):
    values = np.asarray(values, dtype=float).reshape(shape)
    return float(values) if values.ndim == 0 else values


def _times(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t <= 0):
        raise DomainError("time must be finite and > 0")
    return t


def _inside(z, L, name, closed=True):
    z = np.asarray(z, dtype=float)
    lim = L * (1.0 + _EDGE_SLACK)
    bad = np.abs(z) > lim if closed else np.abs(z) >= L
    if np.any(bad) or np.any(~np.isfinite(z)):
        rel = "[-L, L]" if closed else "(-L, L)"
        raise DomainError(f"{name} must lie in {rel} with L={L}")
    return np.clip(z, -L, L)


def _flat(*arrays):
    b = np.broadcast_arrays(*arrays)
    shape = b[0].shape
    return shape, [np.ascontiguousarray(a, dtype=float).ravel() for a in b]


# --------------------------------------------------------------------------
# whole-line quantities

def heat_kernel(t, x):
    """``(4 pi t)^(-1/2) exp(-x^2 / 4t)``."""
    t = _times(t)
    x = np.asarray(x, dtype=float)
    val = np.exp(-x * x / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)
    return _out(val, val.shape)


def gaussian_tail_exact(a, sigma2):
    """``P(N(0, sigma2) > a)`` for ``a >= 0``, via ``erfc``."""
    a = np.asarray(a, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 <= 0):
        raise DomainError("sigma2 must be > 0")
    if np.any(a < 0):
        raise DomainError("a must be >= 0")
    val = 0.5 * erfc(a / np.sqrt(2.0 * sigma2))
    return _out(val, val.shape)


def gaussian_tail_bound(a, sigma2):
    """``0.5 min(1, sqrt(2/pi) sigma / a) exp(-a^2 / (2 sigma2))``, for ``a > 0``."""
    a = np.asarray(a, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 <= 0):
        raise DomainError("sigma2 must be > 0")
    if np.any(a <= 0):
        raise DomainError("the tail bound needs a > 0")
    sig = np.sqrt(sigma2)
    val = 0.5 * np.minimum(1.0, math.sqrt(2.0 / math.pi) * sig / a) * np.exp(
        -a * a / (2.0 * sigma2)
    )
    return _out(val, val.shape)


def k_factor(t, x, L):
    """``min(1/2, sqrt(t/pi) max(1/(L-x), 1/(L+x)))``; requires ``|x| < L``."""
    t = _times(t)
    x = np.asarray(x, dtype=float)
    L = np.asarray(L, dtype=float)
    if np.any(np.abs(x) >= L):
        raise DomainError("k_factor needs |x| < L")
    gap = L - np.abs(x)
    val = np.minimum(0.5, np.sqrt(t / np.pi) / gap)
    return _out(val, val.shape)


def rate_factor_aL(t, x, L):
    """``exp(-(L-x)^2/8t) + exp(-(L+x)^2/8t)``."""
    t = _times(t)
    x = np.asarray(x, dtype=float)
    L = np.asarray(L, dtype=float)
    if np.any(np.abs(x) > L * (1 + _EDGE_SLACK)):
        raise DomainError("rate_factor_aL needs |x| <= L")
    val = np.exp(-((L - x) ** 2) / (8.0 * t)) + np.exp(-((L + x) ** 2) / (8.0 * t))
    return _out(val, val.shape)


def exp_bracket(t, x, L, denom=4.0):
    """``exp(-(L-x)^2/(denom t)) + exp(-(L+x)^2/(denom t))``."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    L = np.asarray(L, dtype=float)
    return np.exp(-((L - x) ** 2) / (denom * t)) + np.exp(-((L + x) ** 2) / (denom * t))


def tail_mass(t, x, L):
    """Mass of ``Gamma(t, x - .)`` outside ``[-L, L]``; requires ``|x| < L``."""
    t = _times(t)
    x = np.asarray(x, dtype=float)
    L = np.asarray(L, dtype=float)
    if np.any(np.abs(x) >= L):
        raise DomainError("tail_mass needs |x| < L")
    s = np.sqrt(4.0 * t)
    val = 0.5 * erfc((L - x) / s) + 0.5 * erfc((L + x) / s)
    return _out(val, val.shape)


def bound_bundle(t, x, L):
    return BoundBundle(
        k_factor=k_factor(t, x, L),
        a_L=rate_factor_aL(t, x, L),
        tail_mass=tail_mass(t, x, L),
    )


def theta(a):
    """``sum_{m >= 0} exp(-a m^2)``, stopping at the first term below 1e-15."""
    a = np.asarray(a, dtype=float)
    if np.any(~(a > 0)):
        raise DomainError("theta needs a > 0")
    flat = a.ravel()
    out = np.empty(flat.shape)
    cut = -math.log(1e-15)
    for i, ai in enumerate(flat):
        mmax = int(math.sqrt(cut / ai)) + 1
        if mmax > 50_000_000:
            raise TruncationError("theta argument too small", terms_needed=mmax)
        m = np.arange(mmax + 1, dtype=float)
        terms = np.exp(-ai * m * m)
        out[i] = terms[terms >= 1e-15].sum()
    return _out(out, a.shape)


# --------------------------------------------------------------------------
# Green's functions

_images = pick(_series.images_nb, _series.images_np)
_eigen = pick(_series.eigen_nb, _series.eigen_np)
_disc_mass = pick(_series.discrepancy_mass_nb, _series.discrepancy_mass_np)
_disc_sq_mass = pick(_series.discrepancy_sq_mass_nb, _series.discrepancy_sq_mass_np)


def _image_shells(t, L, tol, max_terms):
    shells = _series.image_shells(t, L, tol)
    need = 4 * int(shells.max(initial=0)) + 3
    if need > max_terms:
        raise TruncationError(
            f"image series needs {need} terms > max_terms={max_terms}",
            terms_needed=need,
            max_terms=max_terms,
        )
    return shells


def _eigen_modes(t, L, tol, bc, max_terms):
    modes = _series.eigen_terms(t, L, tol, int(bc))
    need = int(modes.max(initial=0)) + 1
    if need > max_terms:
        raise TruncationError(
            f"eigen series needs {need} terms > max_terms={max_terms}; "
            "use the image series at small t",
            terms_needed=need,
            max_terms=max_terms,
        )
    return modes


def _chunked(kernel, *arrays):
    n = arrays[0].shape[0]
    if n <= _CHUNK:
        return kernel(*arrays)
    out = np.empty(n)
    for lo in range(0, n, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        out[sl] = kernel(*[a[sl] for a in arrays])
    return out


# Flat-array evaluators with a per-point half-length. They skip argument
# validation and are meant for batched sampling; the public functions below
# validate and broadcast.

def images_raw(bc, t, x, y, L, tol=1e-12, max_terms=10_000, drop_center=False):
    shells = _image_shells(t, L, tol, max_terms)
    return _chunked(
        lambda tt, xx, yy, LL, sh: _images(tt, xx, yy, LL, int(bc), sh, drop_center),
        t, x, y, L, shells,
    )


def eigen_raw(bc, t, x, y, L, tol=1e-12, max_terms=10_000):
    modes = _eigen_modes(t, L, tol, bc, max_terms)
    return _chunked(
        lambda tt, xx, yy, LL, md: _eigen(tt, xx, yy, LL, int(bc), md),
        t, x, y, L, modes,
    )


def discrepancy_raw(bc, t, x, y, L, tol=1e-12, max_terms=10_000):
    try:
        return -images_raw(bc, t, x, y, L, tol, max_terms, drop_center=True)
    except TruncationError:
        g = np.exp(-((x - y) ** 2) / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)
        return g - eigen_raw(bc, t, x, y, L, tol, max_terms)


def discrepancy_mass_raw(bc, t, x, L, tol=1e-12, max_terms=10_000):
    shells = _image_shells(t, L, tol, max_terms)
    return _chunked(
        lambda tt, xx, LL, sh: _disc_mass(tt, xx, LL, int(bc), sh), t, x, L, shells
    )


def discrepancy_sq_mass_raw(bc, t, x, L, tol=1e-12, max_terms=10_000):
    shells = _image_shells(t, L, tol, max_terms)
    return _chunked(
        lambda tt, xx, LL, sh: _disc_sq_mass(tt, xx, LL, int(bc), sh), t, x, L, shells
    )


def discrepancy_abs_mass_raw(bc, t, x, L, tol=1e-12, max_terms=10_000, n_grid=64,
                             bisections=60):
    """``int_{-L}^{L} |H_L(t; x, y)| dy`` per point.

    Dirichlet and Neumann discrepancies have one sign, so this is the
    absolute exact mass. For Mixed the sign changes in ``y`` are bracketed on
    an ``n_grid`` lattice and refined by bisection; between consecutive roots
    the exact interval masses are summed in absolute value. Sign excursions
    narrower than the lattice spacing are not resolved.
    """
    if bc != BoundaryCondition.MIXED:
        return np.abs(discrepancy_mass_raw(bc, t, x, L, tol, max_terms))
    n = t.size
    u = np.linspace(-1.0, 1.0, n_grid)
    Y = L[:, None] * u
    rep = lambda v: np.repeat(v, n_grid)  # noqa: E731
    H = discrepancy_raw(bc, rep(t), rep(x), Y.ravel(), rep(L), tol, max_terms).reshape(n, n_grid)
    sign = np.sign(H)
    rows, cols = np.nonzero(sign[:, :-1] * sign[:, 1:] < 0)
    lo, hi = Y[rows, cols], Y[rows, cols + 1]
    slo = sign[rows, cols]
    for _ in range(bisections if rows.size else 0):
        mid = 0.5 * (lo + hi)
        sm = np.sign(discrepancy_raw(bc, t[rows], x[rows], mid, L[rows], tol, max_terms))
        left = sm == slo
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)
    roots = 0.5 * (lo + hi)
    pts = np.concatenate([-L, roots, L])
    owner = np.concatenate([np.arange(n), rows, np.arange(n)])
    rank = np.concatenate([np.zeros(n), np.ones(rows.size), np.full(n, 2.0)])
    # within an owner: the -L edge first, roots ascending, the +L edge last
    order = np.lexsort((pts, rank, owner))
    pts, owner = pts[order], owner[order]
    same = owner[:-1] == owner[1:]
    a, b, who = pts[:-1][same], pts[1:][same], owner[:-1][same]
    shells = _image_shells(t[who], L[who], tol, max_terms)
    seg = _series.interval_discrepancy_mass_np(t[who], x[who], L[who], a, b, int(bc), shells)
    return np.bincount(who, weights=np.abs(seg), minlength=n)


def _fullL(ev, t):
    return np.full(t.shape, ev.L)


def _prepare(ev, t, x, y):
    t = _times(t)
    x = _inside(x, ev.L, "x")
    y = _inside(y, ev.L, "y")
    return _flat(t, x, y)


def green_images(ev, t, x, y):
    """Image-series value of the Green's function, truncation certified by ``ev.series_tol``."""
    shape, (t, x, y) = _prepare(ev, t, x, y)
    return _out(images_raw(ev.bc, t, x, y, _fullL(ev, t), ev.series_tol, ev.max_terms), shape)


def green_eigen(ev, t, x, y):
    """Eigenfunction-series value of the Green's function."""
    shape, (t, x, y) = _prepare(ev, t, x, y)
    return _out(eigen_raw(ev.bc, t, x, y, _fullL(ev, t), ev.series_tol, ev.max_terms), shape)


def green(ev, t, x, y):
    """Green's function, images for ``t <= L^2`` and eigenfunctions above."""
    shape, (t, x, y) = _prepare(ev, t, x, y)
    out = np.empty(t.shape)
    small = t <= ev.L * ev.L
    L = _fullL(ev, t)
    tol, mt = ev.series_tol, ev.max_terms
    if small.any():
        sm = small
        out[sm] = images_raw(ev.bc, t[sm], x[sm], y[sm], L[sm], tol, mt)
    if (~small).any():
        big = ~small
        out[big] = eigen_raw(ev.bc, t[big], x[big], y[big], L[big], tol, mt)
    return _out(out, shape)


def discrepancy(ev, t, x, y):
    """``Gamma(t, x - y) - Gamma_L(t; x, y)``.

    Summed directly as minus the non-central images, which avoids the
    cancellation of subtracting two nearly equal numbers; falls back to
    ``Gamma - eigen series`` when the image series is too long.
    """
    shape, (t, x, y) = _prepare(ev, t, x, y)
    val = discrepancy_raw(ev.bc, t, x, y, _fullL(ev, t), ev.series_tol, ev.max_terms)
    return _out(val, shape)


def mixed_from_dirichlet(L, t, x, y, series_tol=1e-12, max_terms=10_000):
    """Mixed Green's function rebuilt from the Dirichlet one on ``[-2L, 2L]``."""
    ev2 = GreenEvaluator(2.0 * L, BoundaryCondition.DIRICHLET, series_tol, max_terms)
    x = _inside(x, L, "x")
    y = _inside(y, L, "y")
    return _out(
        np.asarray(green(ev2, t, x - L, y - L)) + np.asarray(green(ev2, t, x - L, L - y)),
        np.broadcast(np.asarray(t), x, y).shape,
    )


# --------------------------------------------------------------------------
# integrals in y and in (s, y)

QUAD_TOL = 1e-10
QUAD_TOL_2D = 1e-8


def _scalar_point(ev, t, x, open_interval=False):
    t = float(_times(t))
    x = float(_inside(x, ev.L, "x", closed=not open_interval))
    return t, x


def green_mass(ev, t, x, route="quadrature", tol=QUAD_TOL):
    """``int_{-L}^{L} Gamma_L(t; x, y) dy``.

    ``route="quadrature"`` integrates the kernel adaptively; ``route="closed"``
    sums the exact interval masses of the image Gaussians.
    """
    t, x = _scalar_point(ev, t, x)
    if route == "closed":
        inside = 1.0 - _tail_mass_closed(t, x, ev.L)
        return inside - float(discrepancy_mass(ev, t, x))
    res = integrate(lambda y: green(ev, t, x, y), -ev.L, ev.L, atol=tol, points=(x,))
    return res.value


def green_mass_deficit(ev, t, x):
    """``1 - int Gamma_L(t; x, y) dy`` without cancellation: outside mass plus
    the exact interval mass of the discrepancy. Requires ``|x| < L``.

    The Mixed mass equals the Dirichlet mass on ``[-2L, 2L]`` seen from
    ``x - L``; both parts of the Dirichlet deficit are positive, so that
    route has no cancellation.
    """
    t, x = _scalar_point(ev, t, x, open_interval=True)
    if ev.bc == BoundaryCondition.MIXED:
        ev2 = GreenEvaluator(2.0 * ev.L, BoundaryCondition.DIRICHLET, ev.series_tol, ev.max_terms)
        return green_mass_deficit(ev2, t, x - ev.L)
    return _tail_mass_closed(t, x, ev.L) + float(discrepancy_mass(ev, t, x))


def _tail_mass_closed(t, x, L):
    s = math.sqrt(4.0 * t)
    return 0.5 * math.erfc((L - x) / s) + 0.5 * math.erfc((L + x) / s)


def discrepancy_mass(ev, t, x):
    """Signed ``int_{-L}^{L} H_L(t; x, y) dy`` from exact Gaussian interval masses."""
    shape, (t, x) = _flat(_times(t), _inside(x, ev.L, "x"))
    val = discrepancy_mass_raw(ev.bc, t, x, _fullL(ev, t), ev.series_tol, ev.max_terms)
    return _out(val, shape)


def discrepancy_sq_mass(ev, t, x):
    """``int_{-L}^{L} H_L(t; x, y)^2 dy`` from pairwise Gaussian products."""
    shape, (t, x) = _flat(_times(t), _inside(x, ev.L, "x"))
    val = discrepancy_sq_mass_raw(ev.bc, t, x, _fullL(ev, t), ev.series_tol, ev.max_terms)
    return _out(val, shape)


def discrepancy_l1(ev, t, x, route="auto", tol=QUAD_TOL):
    """``int_{-L}^{L} |H_L(t; x, y)| dy`` for ``|x| < L``.

    Dirichlet and Neumann discrepancies have one sign, so ``route="closed"``
    uses exact interval masses. The Mixed discrepancy changes sign:
    ``"piecewise"`` splits at its roots in ``y`` and sums exact interval
    masses, ``"quadrature"`` integrates ``|H|`` adaptively. ``"auto"`` picks
    closed or piecewise.
    """
    t, x = _scalar_point(ev, t, x, open_interval=True)
    mixed = ev.bc == BoundaryCondition.MIXED
    if route == "auto":
        route = "piecewise" if mixed else "closed"
    if route == "closed" and mixed:
        raise DomainError("no closed route for the Mixed |H| integral; use 'piecewise'")
    if route in ("closed", "piecewise"):
        val = discrepancy_abs_mass_raw(
            ev.bc, np.array([t]), np.array([x]), np.array([float(ev.L)]),
            ev.series_tol, ev.max_terms,
        )
        return float(val[0])
    f = lambda y: discrepancy(ev, t, x, y)  # noqa: E731
    points = [x]
    if mixed:
        # kinks of |H| defeat the Kronrod error estimate; pass them as edges
        yy = np.linspace(-ev.L, ev.L, 1025)
        hv = f(yy)
        for i in np.nonzero(np.sign(hv[:-1]) * np.sign(hv[1:]) < 0)[0]:
            points.append(brentq(lambda v: float(f(np.array([v]))[0]), yy[i], yy[i + 1],
                                 xtol=1e-15, rtol=1e-15))
    res = integrate(lambda y: np.abs(f(y)), -ev.L, ev.L, atol=tol, points=points)
    return res.value


def _time_weights(t, w):
    # s = t w^2 maps w in [0, 1] to s in [0, t]; ds = 2 t w dw
    return t * w * w, 2.0 * t * w


def discrepancy_l2_time(ev, t, x, L0=None, route="closed", tol=QUAD_TOL_2D):
    """``int_0^t ds int_{-L}^{L} H_L(s; x, y)^2 dy`` for ``|x| < L``.

    For Neumann the bound involves a reference length ``L0`` in ``(0, L]``
    which must be supplied; it does not change the integral itself.
    ``route="closed"`` integrates exact ``y``-integrals over time;
    ``route="quadrature"`` is a full two-dimensional adaptive quadrature.
    """
    t, x = _scalar_point(ev, t, x, open_interval=True)
    if ev.bc == BoundaryCondition.NEUMANN:
        if L0 is None or not (0 < L0 <= ev.L):
            raise DomainError("Neumann case needs a reference length 0 < L0 <= L")
    if route == "closed":
        def f(w):
            s, jac = _time_weights(t, w)
            val = np.zeros_like(w)
            pos = s > 0
            val[pos] = np.asarray(discrepancy_sq_mass(ev, s[pos], x)) * jac[pos]
            return val
        return integrate(f, 0.0, 1.0, atol=tol, rtol=1e-10).value

    def outer(idx, w):
        s, jac = _time_weights(t, w.ravel())
        s = np.maximum(s, 1e-300)

        def inner(j, y):
            return np.asarray(discrepancy(ev, s[j][:, None], x, y)) ** 2

        vals, _ = integrate_batch(
            inner, np.full(s.size, -ev.L), np.full(s.size, ev.L), atol=tol * 0.1
        )
        return (vals * jac).reshape(w.shape)

    vals, _ = integrate_batch(outer, [0.0], [1.0], atol=tol)
    return float(vals[0])


def semigroup_residual(ev, s, t, x, z, tol=QUAD_TOL):
    """``|int Gamma_L(s; x, y) Gamma_L(t; y, z) dy - Gamma_L(s + t; x, z)|``."""
    s = float(_times(s))
    t = float(_times(t))
    x = float(_inside(x, ev.L, "x"))
    z = float(_inside(z, ev.L, "z"))
    res = integrate(
        lambda y: np.asarray(green(ev, s, x, y)) * np.asarray(green(ev, t, y, z)),
        -ev.L, ev.L, atol=tol, points=(x, z),
    )
    return abs(res.value - green(ev, s + t, x, z))
