"""Hot loops for the image and eigenfunction series of the interval Green's functions.

Each kernel has a numba version (``*_nb``) and a numpy version (``*_np``)
taking identical arguments. Arrays passed in (including the half-length ``L``)
are flat float64 arrays of equal length; the per-point truncation orders are computed by the caller so both
backends sum exactly the same set of terms.

Boundary-condition codes: 0 Dirichlet, 1 Mixed, 2 Neumann.
"""

import math

import numpy as np
from scipy.special import erfc

from ._backend import njit

DIRICHLET, MIXED, NEUMANN = 0, 1, 2

_SQRT2 = math.sqrt(2.0)


# --------------------------------------------------------------------------
# truncation orders

def image_shells(t, L, tol, prefactor=None):
    """Smallest shell count ``M`` whose remainder bound is below ``tol``.

    Shell ``k >= 1`` holds four images, each at distance at least
    ``(4k - 2) L`` from the evaluation point, so the remainder after shell
    ``M`` is at most ``4 g((4M+2)L) / (1 - q)`` with ``g`` the peak-normalised
    Gaussian and ``q = exp(-8 L^2 / t)`` a bound on the ratio of consecutive
    shells. ``prefactor`` defaults to the heat-kernel amplitude.
    """
    t = np.asarray(t, dtype=float)
    if prefactor is None:
        prefactor = 1.0 / np.sqrt(4.0 * np.pi * t)
    q0 = np.exp(-8.0 * L * L / t)
    amp = 4.0 * prefactor / (1.0 - q0)
    ratio = np.log(np.maximum(amp / tol, 1.0))
    dist = np.sqrt(4.0 * t * ratio)
    m = np.floor((dist / L - 2.0) / 4.0) + 1.0
    return np.maximum(m, 0.0).astype(np.int64)


def eigen_terms(t, L, tol, bc):
    """Smallest mode count whose integral-comparison tail bound is below ``tol``."""
    t = np.asarray(t, dtype=float)
    if bc == MIXED:
        b = np.pi ** 2 * t / (16.0 * L * L)
        amp = np.sqrt(np.pi / b) / (4.0 * L)
        z = np.sqrt(np.log(np.maximum(amp / tol, 1.0)) / b)
        n = np.ceil((z - 1.0) / 2.0)
    else:
        b = np.pi ** 2 * t / (4.0 * L * L)
        amp = np.sqrt(np.pi / b) / (2.0 * L)
        n = np.ceil(np.sqrt(np.log(np.maximum(amp / tol, 1.0)) / b))
    return np.maximum(n, 0.0).astype(np.int64)


# --------------------------------------------------------------------------
# image series

@njit
def _gauss(t, z):
    return math.exp(-z * z / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)


@njit
def _signs(bc, m):
    # (direct sign, reflected sign) of image index m
    if bc == 0:
        return 1.0, -1.0
    if bc == 2:
        return 1.0, 1.0
    s = 1.0 if m % 2 == 0 else -1.0
    return s, -s


@njit
def images_nb(t, x, y, L, bc, shells, drop_center):
    n = t.shape[0]
    out = np.empty(n)
    for i in range(n):
        ti, xi, yi, Li = t[i], x[i], y[i], L[i]
        acc = 0.0
        for k in range(shells[i] + 1):
            if k == 0:
                sd, sr = _signs(bc, 0)
                if not drop_center:
                    acc += sd * _gauss(ti, xi - yi)
                acc += sr * _gauss(ti, xi + yi + 2.0 * Li)
                sd, sr = _signs(bc, -1)
                acc += sr * _gauss(ti, xi + yi - 2.0 * Li)
            else:
                sd, sr = _signs(bc, k)
                acc += sd * _gauss(ti, xi - yi + 4.0 * k * Li)
                acc += sr * _gauss(ti, xi + yi + (4.0 * k + 2.0) * Li)
                sd, sr = _signs(bc, -k)
                acc += sd * _gauss(ti, xi - yi - 4.0 * k * Li)
                sd, sr = _signs(bc, -k - 1)
                acc += sr * _gauss(ti, xi + yi - (4.0 * k + 2.0) * Li)
        out[i] = acc
    return out


def _image_table(bc, shells):
    """Image indices and signs up to the largest shell, with their shell number."""
    mmax = int(shells.max()) if shells.size else 0
    m = np.arange(-mmax - 1, mmax + 1)
    shell_direct = np.abs(m)
    shell_refl = np.where(m >= 0, m, -m - 1)
    if bc == DIRICHLET:
        sd = np.ones(m.shape)
        sr = -np.ones(m.shape)
    elif bc == NEUMANN:
        sd = np.ones(m.shape)
        sr = np.ones(m.shape)
    else:
        sd = np.where(m % 2 == 0, 1.0, -1.0)
        sr = -sd
    return m, sd, sr, shell_direct, shell_refl


def images_np(t, x, y, L, bc, shells, drop_center):
    m, sd, sr, shd, shr = _image_table(bc, shells)
    t2 = t[:, None]
    keep_d = shd[None, :] <= shells[:, None]
    if drop_center:
        keep_d = keep_d & (m[None, :] != 0)
    keep_r = shr[None, :] <= shells[:, None]
    L2 = L[:, None]
    zd = x[:, None] - y[:, None] + 4.0 * m * L2
    zr = x[:, None] + y[:, None] + (4.0 * m + 2.0) * L2
    amp = 1.0 / np.sqrt(4.0 * np.pi * t2)
    direct = np.where(keep_d, sd * amp * np.exp(-zd * zd / (4.0 * t2)), 0.0)
    refl = np.where(keep_r, sr * amp * np.exp(-zr * zr / (4.0 * t2)), 0.0)
    return direct.sum(axis=1) + refl.sum(axis=1)


# --------------------------------------------------------------------------
# eigenfunction series

@njit
def eigen_nb(t, x, y, L, bc, modes):
    n = t.shape[0]
    out = np.empty(n)
    for i in range(n):
        ti, Li = t[i], L[i]
        px = x[i] + Li
        py = y[i] + Li
        acc = 0.0
        if bc == 1:
            b = math.pi * math.pi * ti / (16.0 * Li * Li)
            for j in range(modes[i] + 1):
                k = 2.0 * j + 1.0
                w = k * math.pi / (4.0 * Li)
                acc += math.exp(-b * k * k) * math.sin(w * px) * math.sin(w * py)
            out[i] = acc / Li
        else:
            b = math.pi * math.pi * ti / (4.0 * Li * Li)
            for j in range(1, modes[i] + 1):
                w = j * math.pi / (2.0 * Li)
                if bc == 0:
                    acc += math.exp(-b * j * j) * math.sin(w * px) * math.sin(w * py)
                else:
                    acc += math.exp(-b * j * j) * math.cos(w * px) * math.cos(w * py)
            out[i] = acc / Li
            if bc == 2:
                out[i] += 0.5 / Li
    return out


def eigen_np(t, x, y, L, bc, modes):
    nmax = int(modes.max()) if modes.size else 0
    t2 = t[:, None]
    L2 = L[:, None]
    px = (x + L)[:, None]
    py = (y + L)[:, None]
    if bc == MIXED:
        j = np.arange(0, nmax + 1)
        k = 2.0 * j + 1.0
        w = k * np.pi / (4.0 * L2)
        b = np.pi ** 2 * t2 / (16.0 * L2 * L2)
        terms = np.exp(-b * k * k) * np.sin(w * px) * np.sin(w * py)
        terms = np.where(j[None, :] <= modes[:, None], terms, 0.0)
        return terms.sum(axis=1) / L
    j = np.arange(1, nmax + 1)
    w = j * np.pi / (2.0 * L2)
    b = np.pi ** 2 * t2 / (4.0 * L2 * L2)
    if bc == DIRICHLET:
        terms = np.exp(-b * j * j) * np.sin(w * px) * np.sin(w * py)
    else:
        terms = np.exp(-b * j * j) * np.cos(w * px) * np.cos(w * py)
    terms = np.where(j[None, :] <= modes[:, None], terms, 0.0)
    out = terms.sum(axis=1) / L
    if bc == NEUMANN:
        out = out + 0.5 / L
    return out


# --------------------------------------------------------------------------
# closed-form integrals of image terms over [-L, L]

@njit
def _phi_diff_scalar(a, b):
    # Phi(b) - Phi(a) for a <= b without cancellation in either tail
    if a >= 0.0:
        return 0.5 * (math.erfc(a / _SQRT2) - math.erfc(b / _SQRT2))
    if b <= 0.0:
        return 0.5 * (math.erfc(-b / _SQRT2) - math.erfc(-a / _SQRT2))
    return 1.0 - 0.5 * math.erfc(-a / _SQRT2) - 0.5 * math.erfc(b / _SQRT2)


def phi_diff(a, b):
    """``Phi(b) - Phi(a)`` for ``a <= b``, accurate in both tails."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    right = 0.5 * (erfc(a / _SQRT2) - erfc(b / _SQRT2))
    left = 0.5 * (erfc(-b / _SQRT2) - erfc(-a / _SQRT2))
    mid = 1.0 - 0.5 * erfc(-a / _SQRT2) - 0.5 * erfc(b / _SQRT2)
    return np.where(a >= 0.0, right, np.where(b <= 0.0, left, mid))


@njit
def _collect_terms(x, L, bc, shells, drop_center, mu, sg):
    # fills mu/sg with image centres and signs as Gaussians in y; returns count
    n = 0
    for k in range(shells + 1):
        if k == 0:
            sd, sr = _signs(bc, 0)
            if not drop_center:
                mu[n] = x
                sg[n] = sd
                n += 1
            mu[n] = -x - 2.0 * L
            sg[n] = sr
            n += 1
            sd, sr = _signs(bc, -1)
            mu[n] = -x + 2.0 * L
            sg[n] = sr
            n += 1
        else:
            sd, sr = _signs(bc, k)
            mu[n] = x + 4.0 * k * L
            sg[n] = sd
            n += 1
            mu[n] = -x - (4.0 * k + 2.0) * L
            sg[n] = sr
            n += 1
            sd, sr = _signs(bc, -k)
            mu[n] = x - 4.0 * k * L
            sg[n] = sd
            n += 1
            sd, sr = _signs(bc, -k - 1)
            mu[n] = -x + (4.0 * k + 2.0) * L
            sg[n] = sr
            n += 1
    return n


@njit
def discrepancy_mass_nb(t, x, L, bc, shells):
    """Signed integral over [-L, L] of the discrepancy, term by term."""
    n = t.shape[0]
    out = np.empty(n)
    for i in range(n):
        mu = np.empty(4 * shells[i] + 3)
        sg = np.empty(4 * shells[i] + 3)
        Li = L[i]
        cnt = _collect_terms(x[i], Li, bc, shells[i], True, mu, sg)
        s = math.sqrt(2.0 * t[i])
        acc = 0.0
        for j in range(cnt):
            acc += sg[j] * _phi_diff_scalar((-Li - mu[j]) / s, (Li - mu[j]) / s)
        out[i] = -acc
    return out


@njit
def discrepancy_sq_mass_nb(t, x, L, bc, shells):
    """Integral over [-L, L] of the squared discrepancy via pairwise Gaussian products."""
    n = t.shape[0]
    out = np.empty(n)
    for i in range(n):
        mu = np.empty(4 * shells[i] + 3)
        sg = np.empty(4 * shells[i] + 3)
        Li = L[i]
        cnt = _collect_terms(x[i], Li, bc, shells[i], True, mu, sg)
        ti = t[i]
        st = math.sqrt(ti)
        pref = 1.0 / (2.0 * math.sqrt(2.0 * math.pi * ti))
        acc = 0.0
        for a in range(cnt):
            for b in range(a, cnt):
                d = mu[a] - mu[b]
                e = math.exp(-d * d / (8.0 * ti))
                if e == 0.0:
                    continue
                c = 0.5 * (mu[a] + mu[b])
                val = pref * e * _phi_diff_scalar((-Li - c) / st, (Li - c) / st)
                w = 1.0 if a == b else 2.0
                acc += w * sg[a] * sg[b] * val
        out[i] = max(acc, 0.0)
    return out


def _term_arrays(x, L, bc, shells, drop_center):
    m, sd, sr, shd, shr = _image_table(bc, shells)
    L2 = L[:, None]
    mu_d = x[:, None] + 4.0 * m * L2
    mu_r = -x[:, None] - (4.0 * m + 2.0) * L2
    keep_d = shd[None, :] <= shells[:, None]
    if drop_center:
        keep_d = keep_d & (m[None, :] != 0)
    keep_r = shr[None, :] <= shells[:, None]
    mu = np.concatenate([mu_d, mu_r], axis=1)
    sg = np.concatenate(
        [np.broadcast_to(sd, mu_d.shape), np.broadcast_to(sr, mu_r.shape)], axis=1
    )
    keep = np.concatenate([keep_d, keep_r], axis=1)
    return mu, np.where(keep, sg, 0.0)


def discrepancy_mass_np(t, x, L, bc, shells):
    mu, sg = _term_arrays(x, L, bc, shells, True)
    s = np.sqrt(2.0 * t)[:, None]
    L2 = L[:, None]
    return -(sg * phi_diff((-L2 - mu) / s, (L2 - mu) / s)).sum(axis=1)


def discrepancy_sq_mass_np(t, x, L, bc, shells):
    mu, sg = _term_arrays(x, L, bc, shells, True)
    t3 = t[:, None, None]
    d = mu[:, :, None] - mu[:, None, :]
    c = 0.5 * (mu[:, :, None] + mu[:, None, :])
    st = np.sqrt(t3)
    L3 = L[:, None, None]
    pref = 1.0 / (2.0 * np.sqrt(2.0 * np.pi * t3))
    val = pref * np.exp(-d * d / (8.0 * t3)) * phi_diff((-L3 - c) / st, (L3 - c) / st)
    total = (sg[:, :, None] * sg[:, None, :] * val).sum(axis=(1, 2))
    return np.maximum(total, 0.0)


def interval_discrepancy_mass_np(t, x, L, a, b, bc, shells):
    """Signed integral of the discrepancy over ``[a, b]`` inside ``[-L, L]``."""
    mu, sg = _term_arrays(x, L, bc, shells, True)
    s = np.sqrt(2.0 * t)[:, None]
    return -(sg * phi_diff((a[:, None] - mu) / s, (b[:, None] - mu) / s)).sum(axis=1)
