"""Counter-based space-time white noise.

Deviates come from Philox4x32-10 keyed by a 64-bit seed. The counter is
``(pair, step, stream0, stream1)`` where ``pair`` indexes a pair of adjacent
half-cells, so every deviate is a pure function of
``(seed, step, half-cell, stream)``. Nothing is stored: a noise field is a
description of which counters to read, and restriction to a sub-interval is
just a narrower index window. Two fields sharing a space-time cell therefore
carry bit-identical deviates no matter which domains they were built for.

Half-cells have width ``dx/2``; half-cell ``k`` covers
``[k dx/2, (k+1) dx/2]``. A lattice node owns the two half-cells adjacent to
it, an end node only the one inside the interval.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._backend import njit, pick
from .errors import AlignmentError, CapacityError

PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85
ROUNDS = 10

_MASK32 = 0xFFFFFFFF
_OFFSET = 1 << 31  # signed half-cell index -> unsigned counter word
_TWO53 = 1.0 / 9007199254740992.0


# --------------------------------------------------------------------------
# Philox4x32-10

def philox4x32(ctr, key):
    """Philox4x32-10 on uint32 arrays.

    Parameters
    ----------
    ctr : array_like, shape (..., 4)
    key : array_like, shape (..., 2)

    Returns
    -------
    ndarray of uint32, shape (..., 4)
    """
    c = np.asarray(ctr, dtype=np.uint64) & _MASK32
    k = np.asarray(key, dtype=np.uint64) & _MASK32
    c0, c1, c2, c3 = (c[..., i].copy() for i in range(4))
    k0, k1 = k[..., 0].copy(), k[..., 1].copy()
    m0, m1 = np.uint64(PHILOX_M0), np.uint64(PHILOX_M1)
    mask, s32 = np.uint64(_MASK32), np.uint64(32)
    for r in range(ROUNDS):
        p0 = m0 * c0
        p1 = m1 * c2
        c0, c1, c2, c3 = (
            (p1 >> s32) ^ c1 ^ k0,
            p1 & mask,
            (p0 >> s32) ^ c3 ^ k1,
            p0 & mask,
        )
        if r < ROUNDS - 1:
            k0 = (k0 + np.uint64(PHILOX_W0)) & mask
            k1 = (k1 + np.uint64(PHILOX_W1)) & mask
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def _split_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 1 << 64:
        raise CapacityError(f"seed must fit in 64 unsigned bits, got {seed}")
    return seed & _MASK32, seed >> 32


@njit
def _normals_nb(key0, key1, k_start, n, step, s0, s1, out):
    # out[j] is the deviate of half-cell k_start + j; both Box-Muller outputs
    # of one counter are used, so each pair is generated at most once
    mask = np.uint64(0xFFFFFFFF)
    j = 0
    while j < n:
        k = np.int64(k_start + j)
        ku = np.uint64(k + 2147483648)
        c0 = ku >> np.uint64(1)
        c1 = np.uint64(step)
        c2 = np.uint64(s0)
        c3 = np.uint64(s1)
        k0 = np.uint64(key0)
        k1 = np.uint64(key1)
        for r in range(10):
            p0 = np.uint64(0xD2511F53) * c0
            p1 = np.uint64(0xCD9E8D57) * c2
            n0 = (p1 >> np.uint64(32)) ^ c1 ^ k0
            n2 = (p0 >> np.uint64(32)) ^ c3 ^ k1
            c0 = n0
            c1 = p1 & mask
            c2 = n2
            c3 = p0 & mask
            if r < 9:
                k0 = (k0 + np.uint64(0x9E3779B9)) & mask
                k1 = (k1 + np.uint64(0xBB67AE85)) & mask
        ua = ((c0 >> np.uint64(5)) * np.uint64(67108864) + (c1 >> np.uint64(6))) * _TWO53
        ub = ((c2 >> np.uint64(5)) * np.uint64(67108864) + (c3 >> np.uint64(6))) * _TWO53
        rad = math.sqrt(-2.0 * math.log(1.0 - ua))
        z0 = rad * math.cos(2.0 * math.pi * ub)
        z1 = rad * math.sin(2.0 * math.pi * ub)
        if ku & np.uint64(1):
            out[j] = z1
            j += 1
        else:
            out[j] = z0
            if j + 1 < n:
                out[j + 1] = z1
            j += 2


def _normals_np(key0, key1, k_start, n, step, s0, s1, out):
    k = np.arange(k_start, k_start + n, dtype=np.int64)
    ku = (k + _OFFSET).astype(np.uint64)
    ctr = np.empty(ku.shape + (4,), dtype=np.uint64)
    ctr[:, 0] = ku >> np.uint64(1)
    ctr[:, 1] = step
    ctr[:, 2] = s0
    ctr[:, 3] = s1
    w = philox4x32(ctr, np.array([key0, key1], dtype=np.uint64)).astype(np.uint64)
    ua = ((w[:, 0] >> np.uint64(5)) * np.uint64(67108864) + (w[:, 1] >> np.uint64(6))) * _TWO53
    ub = ((w[:, 2] >> np.uint64(5)) * np.uint64(67108864) + (w[:, 3] >> np.uint64(6))) * _TWO53
    rad = np.sqrt(-2.0 * np.log(1.0 - ua))
    odd = (ku & np.uint64(1)).astype(bool)
    out[:] = np.where(odd, rad * np.sin(2.0 * np.pi * ub), rad * np.cos(2.0 * np.pi * ub))


@njit
def _block_nb(key0, key1, k_start, n, step, streams, out):
    for r in range(streams.shape[0]):
        _normals_nb(key0, key1, k_start, n, step, streams[r, 0], streams[r, 1], out[r])


def _block_np(key0, key1, k_start, n, step, streams, out):
    for r in range(streams.shape[0]):
        _normals_np(key0, key1, k_start, n, step, streams[r, 0], streams[r, 1], out[r])


_normals = pick(_normals_nb, _normals_np)
_block = pick(_block_nb, _block_np)


def normals(seed, step, k_start, n, stream=(0, 0)):
    """Standard normal deviates of half-cells ``k_start .. k_start + n - 1``."""
    key0, key1 = _split_seed(seed)
    _check_capacity(step, k_start, n, stream)
    out = np.empty(n)
    _normals(key0, key1, int(k_start), int(n), int(step), int(stream[0]), int(stream[1]), out)
    return out


def normals_block(seed, step, k_start, n, streams):
    """Deviates for several streams at one step, shape ``(len(streams), n)``.

    ``streams`` is an integer array of shape ``(R, 2)``; row ``r`` equals
    ``normals(seed, step, k_start, n, streams[r])``.
    """
    key0, key1 = _split_seed(seed)
    streams = np.ascontiguousarray(streams, dtype=np.int64).reshape(-1, 2)
    for row in streams:
        _check_capacity(step, k_start, n, row)
    out = np.empty((streams.shape[0], n))
    _block(key0, key1, int(k_start), int(n), int(step), streams, out)
    return out


def _check_capacity(step, k_start, n, stream):
    if not (0 <= step <= _MASK32):
        raise CapacityError(f"time step {step} outside the 32-bit counter range")
    if k_start < -_OFFSET or k_start + n > _OFFSET:
        raise CapacityError("half-cell index outside the 32-bit counter range")
    for s in stream:
        if not 0 <= s <= _MASK32:
            raise CapacityError(f"stream word {s} outside the 32-bit counter range")


# --------------------------------------------------------------------------
# noise fields

def _grid_count(value, dx, what):
    q = value / dx
    n = round(q)
    if abs(q - n) > 1e-9 * max(1.0, abs(q)):
        raise AlignmentError(f"{what}={value!r} is not a multiple of dx={dx!r}")
    return int(n)


@dataclass(frozen=True)
class NoiseField:
    """White noise on ``[0, T] x [-L, L]`` at lattice resolution ``(dt, dx)``.

    ``L`` must be a multiple of ``dx/2``. The field is never materialised
    unless ``values`` is called; ``block`` returns the deviates of one time
    step.
    """

    seed: int
    L: float
    dx: float
    dt: float
    T: float
    stream: tuple = (0, 0)

    def __post_init__(self):
        _split_seed(self.seed)
        self.nt  # validates T/dt
        _check_capacity(self.nt - 1, self.k_start, self.n_half, self.stream)

    @property
    def nt(self):
        return _grid_count(self.T, self.dt, "T")

    @property
    def n_half(self):
        """Number of half-cells across ``[-L, L]``."""
        return 2 * _grid_count(2.0 * self.L, self.dx, "2L")

    @property
    def k_start(self):
        return -self.n_half // 2

    def block(self, step):
        """Deviates ``xi[step, :]`` for all half-cells, shape ``(n_half,)``."""
        if not 0 <= step < self.nt:
            raise IndexError(f"step {step} outside 0..{self.nt - 1}")
        return normals(self.seed, step, self.k_start, self.n_half, self.stream)

    def values(self):
        """All deviates, shape ``(nt, n_half)``; meant for small fields and tests."""
        return np.stack([self.block(i) for i in range(self.nt)]) if self.nt else np.empty((0, self.n_half))

    def cell_increment(self, step):
        """``W`` increments of the half-cells at ``step``: ``xi * sqrt(dt dx / 2)``."""
        return self.block(step) * math.sqrt(self.dt * self.dx / 2.0)


def make_noise(seed, L_master, dx, dt, T, stream=(0, 0)):
    """Seeded noise on the master interval ``[-L_master, L_master]``.

    Raises
    ------
    CapacityError
        Seed, step count or half-cell range exceeds the counter space.
    AlignmentError
        ``L_master`` or ``T`` is off the lattice.
    """
    if not (dx > 0 and dt > 0 and T > 0 and L_master > 0):
        raise ValueError("make_noise needs positive L_master, dx, dt, T")
    return NoiseField(int(seed), float(L_master), float(dx), float(dt), float(T), tuple(int(s) for s in stream))


def restrict_noise(noise, L_sub):
    """View of ``noise`` on the centred sub-interval ``[-L_sub, L_sub]``.

    ``L_master - L_sub`` must be a whole number of cells. Shared half-cells
    read the same counters, so their deviates are bit-identical.
    """
    if L_sub > noise.L * (1 + 1e-12):
        raise AlignmentError(f"L_sub={L_sub} exceeds the master half-length {noise.L}")
    if L_sub <= 0:
        raise AlignmentError("L_sub must be positive")
    _grid_count(noise.L - L_sub, noise.dx, "L_master - L_sub")
    return NoiseField(noise.seed, float(L_sub), noise.dx, noise.dt, noise.T, noise.stream)
