"""Space-time convolution kernels, their Gronwall resolvents and iteration checks.

Grid fields are arrays of shape ``(nt, nx)`` sampled at the time-cell
midpoints ``tau_k = (k + 1/2) dt`` and the spatial nodes ``x_j``. Sampling
at midpoints keeps the integrable ``r^(-1/2)`` singularity of the kernels
off the grid.
"""

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy.special import gamma as gamma_fn
from scipy.special import ndtr

from .errors import DomainError, InstabilityError, ShapeError, TruncationError
from .quadrature import integrate_batch

_ALIGN = 1e-9


class Variant(enum.Enum):
    STOCHASTIC = "stochastic"
    NODRIFT = "nodrift"
    DETERMINISTIC = "deterministic"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace("-", "").replace("_", ""))
        except ValueError:
            raise DomainError(f"unknown kernel variant {value!r}") from None


@dataclass(frozen=True)
class KernelVariant:
    variant: Variant
    C: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        object.__setattr__(self, "C", float(self.C))
        if not (self.C >= 0 and math.isfinite(self.C)):
            raise DomainError("C must be finite and >= 0")


class ResolutionWarning(UserWarning):
    """Grid too coarse for the requested accuracy near the kernel singularity."""


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform grid on ``]0, T] x [x_min, x_max]``."""

    T: float
    dt: float
    x_min: float
    x_max: float
    dx: float

    def __post_init__(self):
        if not (self.dt > 0 and self.dx > 0 and self.T > 0):
            raise DomainError("T, dt and dx must be > 0")
        if not self.x_max > self.x_min:
            raise DomainError("x_max must exceed x_min")
        for name, ratio in (("T/dt", self.T / self.dt),
                            ("(x_max-x_min)/dx", (self.x_max - self.x_min) / self.dx)):
            if abs(ratio - round(ratio)) > _ALIGN * max(1.0, ratio) or round(ratio) < 1:
                raise DomainError(f"{name} = {ratio} must be a positive integer")

    @classmethod
    def symmetric(cls, T, dt, half_width, dx):
        n = math.ceil(half_width / dx - _ALIGN)
        return cls(T, dt, -n * dx, n * dx, dx)

    @property
    def nt(self):
        return int(round(self.T / self.dt))

    @property
    def nx(self):
        return int(round((self.x_max - self.x_min) / self.dx)) + 1

    @property
    def shape(self):
        return (self.nt, self.nx)

    @property
    def t(self):
        return (np.arange(self.nt) + 0.5) * self.dt

    @property
    def x(self):
        return self.x_min + np.arange(self.nx) * self.dx

    def mesh(self):
        return np.meshgrid(self.t, self.x, indexing="ij")

    def sample(self, fn):
        tt, xx = self.mesh()
        return np.asarray(fn(tt, xx), dtype=float)


def _heat(t, x):
    return np.exp(-x * x / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)


def _positive_time(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError("time argument must be > 0")
    return r


def j_kernel(variant, r, z):
    """One-step kernel: ``Gamma/sqrt(4 pi r)``, ``Gamma^2`` or ``Gamma``."""
    v = variant.variant if isinstance(variant, KernelVariant) else Variant.parse(variant)
    r = _positive_time(r)
    z = np.asarray(z, dtype=float)
    if v is Variant.STOCHASTIC:
        out = _heat(r, z) / np.sqrt(4.0 * np.pi * r)
    elif v is Variant.NODRIFT:
        out = _heat(r / 2.0, z) / np.sqrt(8.0 * np.pi * r)
    else:
        out = _heat(r, z)
    return float(out) if out.ndim == 0 else out


def resolvent_prefactor(kv, t):
    """Time factor of the closed-form resolvent, multiplying its Gaussian in ``x``.

    The stochastic and no-drift forms follow from
    ``sum_{l>=1} z^l / Gamma(l/2) = z/sqrt(pi) + 2 z^2 exp(z^2) Phi(z sqrt 2)``
    with ``z = C sqrt(t)/2`` and ``z = C sqrt(t/8)`` respectively; the
    deterministic form sums ``C^l t^(l-1) / (l-1)!``.
    """
    t = _positive_time(t)
    C = kv.C
    v = kv.variant
    if v is Variant.STOCHASTIC:
        out = C / (2.0 * np.sqrt(np.pi * t)) + 0.5 * C * C * np.exp(C * C * t / 4.0) * ndtr(
            C * np.sqrt(t / 2.0))
    elif v is Variant.NODRIFT:
        out = C / np.sqrt(8.0 * np.pi * t) + 0.25 * C * C * np.exp(C * C * t / 8.0) * ndtr(
            C * np.sqrt(t) / 2.0)
    else:
        out = C * np.exp(C * t) * np.ones_like(t)
    return out


def resolvent_closed(kv, t, x):
    """Closed form of ``sum_{l>=1} C^l J^{*l}(t, x)``."""
    t = _positive_time(t)
    x = np.asarray(x, dtype=float)
    pre = resolvent_prefactor(kv, t)
    space = _heat(t / 2.0, x) if kv.variant is Variant.NODRIFT else _heat(t, x)
    out = pre * space
    return float(out) if np.ndim(out) == 0 else out


def series_term_closed(kv, ell, t, x):
    """Closed form of the single term ``C^l J^{*l}(t, x)``, used to size truncations."""
    t = _positive_time(t)
    C = kv.C
    if kv.variant is Variant.DETERMINISTIC:
        pre = C ** ell * t ** (ell - 1) / math.factorial(ell - 1)
        return pre * _heat(t, x)
    scale = 2.0 if kv.variant is Variant.STOCHASTIC else math.sqrt(8.0)
    pre = (C / scale) ** ell * t ** (ell / 2.0 - 1.0) / gamma_fn(ell / 2.0)
    space = _heat(t / 2.0, x) if kv.variant is Variant.NODRIFT else _heat(t, x)
    return pre * space


# --------------------------------------------------------------------------
# discrete space-time convolution

def _space_weights(grid):
    w = np.full(grid.nx, grid.dx)
    w[0] = w[-1] = 0.5 * grid.dx
    return w


class _Convolver:
    """Causal space-time convolution against a fixed right operand.

    ``c[m] = sum_k f[m-k] w g[k]`` approximates the convolution at time
    ``(m + 1) dt``; averaging neighbours maps it back to the midpoints.
    """

    def __init__(self, g, grid):
        g = np.asarray(g, dtype=float)
        if g.shape != grid.shape:
            raise ShapeError(f"field shape {g.shape} != grid shape {grid.shape}")
        self.grid = grid
        nt, nx = grid.shape
        self.pad = (sfft.next_fast_len(2 * nt, real=True), sfft.next_fast_len(2 * nx - 1, real=True))
        self.G = sfft.rfft2(g * _space_weights(grid), s=self.pad)

    def __call__(self, f):
        f = np.asarray(f, dtype=float)
        grid = self.grid
        if f.shape != grid.shape:
            raise ShapeError(f"field shape {f.shape} != grid shape {grid.shape}")
        nt, nx = grid.shape
        full = sfft.irfft2(sfft.rfft2(f, s=self.pad) * self.G, s=self.pad)
        # x_j - y_k sits at index j - k + off of a grid symmetric about 0
        off = (nx - 1) // 2
        c = full[:nt, off:off + nx]
        out = np.empty_like(c)
        out[0] = 0.5 * c[0]
        out[1:] = 0.5 * (c[1:] + c[:-1])
        return out * grid.dt


def convolve_st(f, g, grid):
    """Discrete ``(f * g)(t, x) = int_0^t ds int dy f(t - s, x - y) g(s, y)`` on ``grid``.

    Midpoint rule in time, trapezoid in space, computed by zero-padded FFT.
    The grid must be symmetric about ``x = 0`` so that ``x - y`` stays on it.
    """
    if abs(grid.x_min + grid.x_max) > _ALIGN * grid.dx:
        raise ShapeError("convolve_st needs a grid symmetric about x = 0")
    return _Convolver(g, grid)(f)


def default_grid(C, T=1.0, dt=1e-3, dx=0.02):
    """Grid on ``[-8 sqrt(T) max(1, C), +...]``; tails beyond are below double precision relevance."""
    return SpaceTimeGrid.symmetric(T, dt, 8.0 * math.sqrt(T) * max(1.0, C), dx)


def midpoint_error_estimate(grid, t_min):
    """Relative error of the midpoint rule for ``J * J`` at time ``t_min``.

    ``int_0^t r^(-1/2) (t - r)^(-1/2) dr = pi``; on each end cell the midpoint
    rule gives ``sqrt(2 dt)`` instead of ``2 sqrt(dt)``, so both ends together
    miss ``2 (2 - sqrt 2) sqrt(dt / t) / pi`` of the total.
    """
    return 2.0 * (2.0 - math.sqrt(2.0)) * math.sqrt(grid.dt / t_min) / math.pi


def convolution_powers(variant, grid, n_terms):
    """``[J, J*J, ..., J^{*n}]`` sampled on ``grid`` (``C`` not applied)."""
    if n_terms < 1:
        raise DomainError("n_terms must be >= 1")
    tt, xx = grid.mesh()
    J = j_kernel(variant, tt, xx)
    conv = _Convolver(J, grid)
    powers = [J]
    for _ in range(n_terms - 1):
        powers.append(conv(powers[-1]))
    return powers


def resolvent_series(kv, grid, n_terms, powers=None, warn_tol=None, t_min=0.1):
    """``sum_{l=1}^{n} C^l J^{*l}`` by repeated grid convolution.

    Parameters
    ----------
    powers : list of ndarray, optional
        Precomputed ``convolution_powers`` for the same variant and grid.
    warn_tol : float, optional
        Emit a ``ResolutionWarning`` if the estimated midpoint error at time
        ``t_min`` exceeds this relative tolerance.
    """
    if kv.variant is not Variant.DETERMINISTIC and warn_tol is not None and kv.C > 0:
        est = midpoint_error_estimate(grid, t_min)
        if est > warn_tol:
            warnings.warn(
                f"dt={grid.dt} leaves an estimated {est:.1%} midpoint error near the "
                f"r^(-1/2) singularity (tolerance {warn_tol:.0%})",
                ResolutionWarning, stacklevel=2,
            )
    if powers is None:
        powers = convolution_powers(kv.variant, grid, n_terms)
    if len(powers) < n_terms:
        raise DomainError("not enough precomputed convolution powers")
    out = np.zeros(grid.shape)
    for ell in range(n_terms, 0, -1):
        out += kv.C ** ell * powers[ell - 1]
    return out


def interior_mask(grid, reference, rel_floor=1e-6, t_range=None):
    """Grid points where ``reference`` is resolvable: above ``rel_floor`` times the
    row maximum and inside the central half of the spatial window."""
    ref = np.asarray(reference, dtype=float)
    row_max = ref.max(axis=1, keepdims=True)
    mask = ref >= rel_floor * row_max
    mask &= (np.abs(grid.x) <= 0.5 * max(abs(grid.x_min), abs(grid.x_max)))[None, :]
    if t_range is not None:
        lo, hi = t_range
        tt = grid.t
        mask &= ((tt >= lo - 1e-12) & (tt <= hi + 1e-12))[:, None]
    return mask


def series_vs_closed(kv, grid, n_terms, t_range=(0.1, 1.0), powers=None, warn_tol=None):
    """Largest relative gap between the grid series and the closed form at interior points."""
    series = resolvent_series(kv, grid, n_terms, powers=powers, warn_tol=warn_tol,
                              t_min=t_range[0])
    if kv.C == 0:
        return 0.0, series
    tt, xx = grid.mesh()
    closed = resolvent_closed(kv, tt, xx)
    mask = interior_mask(grid, closed, t_range=t_range)
    rel = np.abs(series[mask] - closed[mask]) / closed[mask]
    return float(rel.max()), series


# --------------------------------------------------------------------------
# Picard iteration

@dataclass
class PicardReport:
    iterations: int
    max_excess: float
    relative_excess: float
    monotone: bool
    final: np.ndarray
    bound: np.ndarray


def picard_verify(a, kv, grid, iters=20, blowup=1e12):
    """Iterate ``f <- a + C J * f`` from ``f = a`` and compare with ``a + K * a``.

    ``max_excess`` is ``max(f_iters - (a + K_closed * a))`` over the grid;
    ``relative_excess`` divides it by the largest bound value.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != grid.shape:
        raise ShapeError(f"field shape {a.shape} != grid shape {grid.shape}")
    if np.any(a < 0):
        raise DomainError("picard_verify needs a >= 0")
    tt, xx = grid.mesh()
    conv_a = _Convolver(a, grid)
    Kc = resolvent_closed(kv, tt, xx) if kv.C > 0 else np.zeros(grid.shape)
    bound = a + conv_a(Kc)
    J = j_kernel(kv.variant, tt, xx)
    conv_J = _Convolver(J, grid)
    f = a.copy()
    monotone = True
    for k in range(iters):
        nxt = a + kv.C * conv_J(f)
        if not np.all(np.isfinite(nxt)) or np.abs(nxt).max() > blowup:
            raise InstabilityError(f"Picard iteration diverged at step {k + 1}")
        scale = max(1.0, float(np.abs(nxt).max()))
        if np.any(nxt < f - 1e-12 * scale):
            monotone = False
        f = nxt
    excess = float((f - bound).max())
    rel = excess / max(float(np.abs(bound).max()), 1e-300)
    return PicardReport(iters, excess, rel, monotone, f, bound)


# --------------------------------------------------------------------------
# scalar Gronwall lemma

@dataclass
class ScalarGronwallBound:
    """``t -> c1 + (c1 + c2) U(t)`` with ``U = int_0^t sum_n J^{*n}``."""

    c1: float
    c2: float
    t: np.ndarray
    U: np.ndarray
    terms: int

    def __call__(self, s):
        u = np.interp(s, self.t, self.U)
        return self.c1 + (self.c1 + self.c2) * u


def _cell_moments(J_time, dt, n):
    # per cell k: int J and int J (r - k dt)/dt over [k dt, (k+1) dt]; r = k dt + dt u^2
    # smooths an r^(-1/2) singularity at 0
    k0 = np.arange(n, dtype=float)

    def f(idx, u):
        r = (k0[idx][:, None] + u * u) * dt
        base = np.asarray(J_time(r), dtype=float) * 2.0 * dt * u
        return base

    def f1(idx, u):
        return f(idx, u) * u * u

    z, o = np.zeros(n), np.ones(n)
    m0, _ = integrate_batch(f, z, o, atol=1e-14, rtol=1e-12)
    m1, _ = integrate_batch(f1, z, o, atol=1e-14, rtol=1e-12)
    return m0, m1


def gronwall_scalar(c1, c2, J_time, T, n_steps=2000, tol=1e-12, max_terms=500):
    """Scalar Gronwall bound ``c1 + (c1 + c2) U(t)`` on ``[0, T]``.

    ``U`` is the sum of the series ``V_1 = int_0^t J``,
    ``V_{n+1}(t) = int_0^t J(r) V_n(t - r) dr``, each convolution done by
    product integration (exact kernel moments per cell, ``V_n`` linear
    within cells). Summation stops once a term is below ``tol`` relative to
    the running sum.

    Raises
    ------
    TruncationError
        If the series has not converged after ``max_terms`` terms.
    """
    if c1 < 0 or c2 < 0:
        raise DomainError("c1 and c2 must be >= 0")
    if not T > 0:
        raise DomainError("T must be > 0")
    dt = T / n_steps
    t = np.arange(n_steps + 1) * dt
    m0, m1 = _cell_moments(J_time, dt, n_steps)
    if not np.all(np.isfinite(m0)):
        raise DomainError("J_time is not integrable on ]0, T]")
    a_w = m0 - m1  # weight on V(t_n - k dt)
    b_w = m1       # weight on V(t_n - (k+1) dt)
    V = np.concatenate([[0.0], np.cumsum(m0)])
    U = V.copy()
    for n in range(2, max_terms + 1):
        ca = np.convolve(a_w, V[1:])[: n_steps]
        cb = np.convolve(b_w, V[:-1])[: n_steps]
        V = np.concatenate([[0.0], ca + cb])
        U += V
        if np.abs(V).max() <= tol * max(1.0, np.abs(U).max()):
            return ScalarGronwallBound(float(c1), float(c2), t, U, n)
    if np.abs(V).max() == 0.0:
        return ScalarGronwallBound(float(c1), float(c2), t, U, max_terms)
    raise TruncationError(
        f"scalar resolvent series not converged after {max_terms} terms",
        terms_needed=None, max_terms=max_terms,
    )
