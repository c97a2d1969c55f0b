"""Finite-difference Monte Carlo solver for the stochastic heat equation.

    du = u_xx dt + sigma(t, x, u) W(dt, dx) + b(t, x, u) dt

on ``[-L, L]`` with Dirichlet, Mixed (Dirichlet left, Neumann right) or
Neumann ends, and on a wide Neumann interval standing in for the whole line.

Scheme: backward Euler for the diffusion, explicit noise and drift,

    (I - dt D) u^{i+1} = u^i + sigma(t_i, x, u^i) F_i + dt b(t_i, x, u^i)

solved in increment form ``(I - dt D) delta = dt D u^i + ...`` so that
states in the kernel of ``D`` are preserved exactly. Neumann ends use a
mirrored ghost node; Dirichlet ends are pinned rows. ``F_i`` is the lattice
white noise: an interior node averages the two half-cells it owns, an end
node sees only its inner half-cell and hence gets a ``sqrt(2)`` larger
forcing.

Replicates are stepped in fixed-size column batches. A batch is the unit of
work handed to a thread, and every column is computed independently, so
results do not depend on the thread count.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from . import kernels
from ._backend import default_threads, njit, pick
from .errors import BlowUpError, ConfigurationError, DomainError
from .kernels import BoundaryCondition
from .noise import normals_block, restrict_noise
from .quadrature import integrate
from .records import LocalizationRecord

PROXY_MARGIN = 6.0  # whole-line proxy needs L_master >= L + PROXY_MARGIN sqrt(T)
BATCH = 16  # replicates per work unit; fixed so results ignore the thread count
MAX_FLAGGED = 0.01


# --------------------------------------------------------------------------
# lattice

def _count(value, step, what):
    q = value / step
    n = round(q)
    if n < 1 or abs(q - n) > 1e-9 * max(1.0, q):
        raise ConfigurationError(f"{what}={value!r} is not a positive multiple of {step!r}")
    return int(n)


@dataclass(frozen=True)
class LatticeSpec:
    """Space-time lattice ``x_j = -L + j dx`` (``j = 0..M``), ``t_i = i dt``.

    ``M = 2L/dx`` and ``T/dt`` must be integers; ``dt <= dx`` keeps the
    noise term's correlation error below the diffusion error.
    """

    L: float
    dx: float
    T: float
    dt: float

    def __post_init__(self):
        for name in ("L", "dx", "T", "dt"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigurationError(f"lattice {name} must be positive and finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.dt > self.dx * (1 + 1e-12):
            raise ConfigurationError(f"dt={self.dt} exceeds dx={self.dx}")
        _count(2.0 * self.L, self.dx, "2L")
        _count(self.T, self.dt, "T")

    @classmethod
    def make(cls, L, dx, T, dt=None):
        """Lattice with ``dt = dx^2`` by default, shrunk so it divides ``T``."""
        if dt is None:
            dt = T / math.ceil(T / (dx * dx) - 1e-9)
        return cls(L, dx, T, dt)

    @property
    def M(self):
        return _count(2.0 * self.L, self.dx, "2L")

    @property
    def nt(self):
        return _count(self.T, self.dt, "T")

    @property
    def x(self):
        return -self.L + self.dx * np.arange(self.M + 1)

    @property
    def t(self):
        return self.dt * np.arange(self.nt + 1)

    def node(self, x):
        """Index of the lattice node at ``x``."""
        q = (x + self.L) / self.dx
        j = round(q)
        if abs(q - j) > 1e-9 * max(1.0, q) or not 0 <= j <= self.M:
            raise ConfigurationError(f"x={x!r} is not a node of the lattice on [-{self.L}, {self.L}]")
        return int(j)

    def step(self, t):
        """Number of steps to reach time ``t``."""
        q = t / self.dt
        i = round(q)
        if abs(q - i) > 1e-9 * max(1.0, q) or not 0 <= i <= self.nt:
            raise ConfigurationError(f"t={t!r} is not a time level of the lattice")
        return int(i)

    def with_half_length(self, L):
        if abs((self.L - L) / self.dx - round((self.L - L) / self.dx)) > 1e-9:
            raise ConfigurationError(f"L={L} is not aligned with the lattice of half-length {self.L}")
        return LatticeSpec(L, self.dx, self.T, self.dt)


def proxy_half_length(L_target, T, dx):
    """Smallest lattice-aligned ``L_master >= L_target + 6 sqrt(T)``."""
    cells = math.ceil(PROXY_MARGIN * math.sqrt(T) / dx - 1e-9)
    return L_target + cells * dx


# --------------------------------------------------------------------------
# coefficient and initial-condition registries

@dataclass(frozen=True)
class CoefficientSpec:
    """``sigma(t, x, u)`` and ``b(t, x, u)``, vectorised over arrays.

    ``lipschitz_const`` bounds both the Lipschitz constants and the linear
    growth constants of ``sigma`` and ``b``.
    """

    sigma: object
    b: object
    lipschitz_const: float
    registry_id: str = None
    params: tuple = ()
    noise_free: bool = False
    drift_free: bool = False


def _const(c):
    return lambda t, x, u: np.full(np.shape(u), float(c))


def _zero_coeffs():
    return CoefficientSpec(_const(0.0), _const(0.0), 0.0, noise_free=True, drift_free=True)


def _linear(sigma0=1.0):
    return CoefficientSpec(_const(sigma0), _const(0.0), abs(sigma0),
                           noise_free=sigma0 == 0, drift_free=True)


def _sine_tanh(alpha=1.0, beta=0.5, gamma=0.5):
    return CoefficientSpec(
        lambda t, x, u: alpha + beta * np.sin(u),
        lambda t, x, u: gamma * np.tanh(u),
        max(abs(alpha) + abs(beta), abs(gamma)),
    )


def _sqrt_growth():
    return CoefficientSpec(lambda t, x, u: np.sqrt(1.0 + u * u), _const(0.0), 1.0, drift_free=True)


def _det_tanh(gamma=1.0):
    return CoefficientSpec(_const(0.0), lambda t, x, u: gamma * np.tanh(u), abs(gamma), noise_free=True)


COEFFICIENTS = {
    "zero": _zero_coeffs,
    "linear": _linear,
    "sine_tanh": _sine_tanh,
    "sqrt": _sqrt_growth,
    "det_tanh": _det_tanh,
}


def coefficients(registry_id, **params):
    """Built-in coefficient pair by name; ``params`` override its defaults."""
    try:
        factory = COEFFICIENTS[registry_id]
    except KeyError:
        raise ConfigurationError(
            f"unknown coefficients {registry_id!r}; choose from {sorted(COEFFICIENTS)}"
        ) from None
    try:
        spec = factory(**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {registry_id!r}: {exc}") from None
    return CoefficientSpec(spec.sigma, spec.b, spec.lipschitz_const, registry_id,
                           tuple(sorted(params.items())), spec.noise_free, spec.drift_free)


@dataclass(frozen=True)
class InitialCondition:
    """Bounded initial datum ``u0(x, L)``; ``L`` is the domain half-length."""

    func: object
    sup_norm: float
    registry_id: str = None
    params: tuple = ()

    def __call__(self, x, L):
        return np.broadcast_to(np.asarray(self.func(np.asarray(x, dtype=float), L), dtype=float),
                               np.shape(x)).copy()


def _u0_zero():
    return InitialCondition(lambda x, L: np.zeros_like(x), 0.0)


def _u0_constant(c=1.0):
    return InitialCondition(lambda x, L: np.full_like(x, c), abs(c))


def _u0_gaussian(amplitude=1.0, width=0.5, center=0.0):
    return InitialCondition(
        lambda x, L: amplitude * np.exp(-((x - center) ** 2) / (2.0 * width * width)), abs(amplitude)
    )


def _u0_step(height=1.0, half_width=0.5, smooth=0.05):
    # tanh-smoothed indicator of [-half_width, half_width]
    def f(x, L):
        return 0.5 * height * (np.tanh((x + half_width) / smooth) - np.tanh((x - half_width) / smooth))
    return InitialCondition(f, abs(height) * math.tanh(half_width / smooth))


def _u0_mode():
    # first Dirichlet eigenfunction of the domain it is evaluated on
    return InitialCondition(lambda x, L: np.sin(np.pi * (x + L) / (2.0 * L)), 1.0)


INITIAL_CONDITIONS = {
    "zero": _u0_zero,
    "constant": _u0_constant,
    "gaussian": _u0_gaussian,
    "step": _u0_step,
    "dirichlet_mode": _u0_mode,
}


def initial_condition(registry_id, **params):
    try:
        factory = INITIAL_CONDITIONS[registry_id]
    except KeyError:
        raise ConfigurationError(
            f"unknown initial condition {registry_id!r}; choose from {sorted(INITIAL_CONDITIONS)}"
        ) from None
    try:
        ic = factory(**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {registry_id!r}: {exc}") from None
    return InitialCondition(ic.func, ic.sup_norm, registry_id, tuple(sorted(params.items())))


# --------------------------------------------------------------------------
# solution container

@dataclass
class SolutionField:
    """Snapshots ``values[k, j] = u(times[k], x_j)`` of one realisation."""

    lattice: LatticeSpec
    values: np.ndarray
    bc: BoundaryCondition
    times: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def x(self):
        return self.lattice.x

    def at(self, t, x):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, t):
            raise KeyError(f"no snapshot at t={t}")
        return float(self.values[k, self.lattice.node(x)])

    def boundary_residuals(self):
        """Largest violation of the boundary conditions over snapshots with ``t > 0``."""
        v = self.values[self.times > 0]
        if v.size == 0:
            return 0.0
        out = []
        if self.bc in (BoundaryCondition.DIRICHLET, BoundaryCondition.MIXED):
            out.append(np.abs(v[:, 0]).max())
        if self.bc == BoundaryCondition.DIRICHLET:
            out.append(np.abs(v[:, -1]).max())
        # Neumann ends hold by construction: the mirrored ghost makes the
        # centred difference through the end node vanish identically
        return float(max(out)) if out else 0.0

    def to_csv(self, path, extra_columns=None):
        """Write ``t, x, value`` rows (plus any extra columns) with 17 significant digits."""
        extra_columns = extra_columns or {}
        x = self.x
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["t", "x", "value", *extra_columns])
                cols = [np.asarray(c) for c in extra_columns.values()]
                for k, t in enumerate(self.times):
                    for j, xj in enumerate(x):
                        row = [f"{t:.17g}", f"{xj:.17g}", f"{self.values[k, j]:.17g}"]
                        row += [f"{c[k, j]:.17g}" for c in cols]
                        w.writerow(row)
        except OSError as exc:
            raise OSError(f"cannot write solution CSV {path!r}: {exc}") from exc


# --------------------------------------------------------------------------
# tridiagonal solves

@njit
def _thomas_nb(sub, inv_m, cp, d):
    # d has shape (R, n); solved in place column by column
    R, n = d.shape
    for r in range(R):
        d[r, 0] *= inv_m[0]
        for j in range(1, n):
            d[r, j] = (d[r, j] - sub[j] * d[r, j - 1]) * inv_m[j]
        for j in range(n - 2, -1, -1):
            d[r, j] -= cp[j] * d[r, j + 1]


class _Operator:
    """``I - dt D`` for one boundary condition, factored once."""

    def __init__(self, bc, M, r):
        n = M + 1
        sub = np.full(n, -r)
        diag = np.full(n, 1.0 + 2.0 * r)
        sup = np.full(n, -r)
        sub[0] = 0.0
        sup[-1] = 0.0
        left_pinned = bc in (BoundaryCondition.DIRICHLET, BoundaryCondition.MIXED)
        right_pinned = bc == BoundaryCondition.DIRICHLET
        if left_pinned:
            diag[0], sup[0] = 1.0, 0.0
        else:
            sup[0] = -2.0 * r
        if right_pinned:
            diag[-1], sub[-1] = 1.0, 0.0
        else:
            sub[-1] = -2.0 * r
        self.left_pinned, self.right_pinned = left_pinned, right_pinned
        self.sub, self.diag, self.sup = sub, diag, sup
        # Thomas factors; diagonally dominant, so no pivoting is needed
        m = np.empty(n)
        cp = np.empty(n)
        m[0] = diag[0]
        cp[0] = sup[0] / m[0]
        for j in range(1, n):
            m[j] = diag[j] - sub[j] * cp[j - 1]
            cp[j] = sup[j] / m[j]
        self.inv_m, self.cp = 1.0 / m, cp
        self.banded = np.vstack([np.r_[0.0, sup[:-1]], diag, np.r_[sub[1:], 0.0]])

    def _solve_nb(self, d):
        _thomas_nb(self.sub, self.inv_m, self.cp, d)
        return d

    def _solve_np(self, d):
        return np.ascontiguousarray(solve_banded((1, 1), self.banded, d.T, check_finite=False).T)

    def solve(self, d):
        return pick(self._solve_nb, self._solve_np)(d)


def _laplacian(u, dx, bc):
    out = np.empty_like(u)
    out[:, 1:-1] = (u[:, 2:] - 2.0 * u[:, 1:-1] + u[:, :-2]) / (dx * dx)
    out[:, 0] = 2.0 * (u[:, 1] - u[:, 0]) / (dx * dx)
    out[:, -1] = 2.0 * (u[:, -2] - u[:, -1]) / (dx * dx)
    return out


def _forcing(z, dt, dx):
    """Node forcing ``F`` from half-cell deviates ``z`` of shape ``(R, 2M)``."""
    s = math.sqrt(dt / dx)
    R, nh = z.shape
    F = np.empty((R, nh // 2 + 1))
    F[:, 1:-1] = (z[:, 1:-2:2] + z[:, 2:-1:2]) * (s / math.sqrt(2.0))
    F[:, 0] = z[:, 0] * (s * math.sqrt(2.0))
    F[:, -1] = z[:, -1] * (s * math.sqrt(2.0))
    return F


class _Domain:
    """State of ``R`` replicate columns on one interval."""

    def __init__(self, bc, lattice, coeffs, u0, R):
        self.bc = BoundaryCondition.parse(bc)
        self.lat = lattice
        self.coeffs = coeffs
        self.op = _Operator(self.bc, lattice.M, lattice.dt / lattice.dx ** 2)
        self.x = lattice.x[None, :]
        self.u = np.repeat(u0(lattice.x, lattice.L)[None, :], R, axis=0)
        self.bad = np.zeros(R, dtype=bool)
        self.bad_step = np.full(R, -1)

    def advance(self, step, z):
        lat, c, u = self.lat, self.coeffs, self.u
        t = step * lat.dt
        rhs = lat.dt * _laplacian(u, lat.dx, self.bc)
        if not c.noise_free:
            rhs += c.sigma(t, self.x, u) * _forcing(z, lat.dt, lat.dx)
        if not c.drift_free:
            rhs += lat.dt * c.b(t, self.x, u)
        if self.op.left_pinned:
            rhs[:, 0] = -u[:, 0]
        if self.op.right_pinned:
            rhs[:, -1] = -u[:, -1]
        u += self.op.solve(rhs)
        finite = np.isfinite(u).all(axis=1)
        newly = ~finite & ~self.bad
        if newly.any():
            self.bad |= newly
            self.bad_step[newly] = step
            # keep broken columns finite so they cannot poison shared arithmetic
            u[newly] = 0.0


def _check_noise(noise, lattice):
    if noise is None:
        return None
    for name in ("dx", "dt", "T"):
        a, b = getattr(noise, name), getattr(lattice, name)
        if abs(a - b) > 1e-12 * max(abs(a), abs(b)):
            raise ConfigurationError(f"noise {name}={a} does not match lattice {name}={b}")
    if abs(noise.L - lattice.L) > 1e-12 * lattice.L:
        noise = restrict_noise(noise, lattice.L)
    return noise


def _snapshot_steps(lattice, snapshot_times):
    if snapshot_times is None:
        return np.arange(lattice.nt + 1)
    return np.array(sorted({lattice.step(t) for t in snapshot_times}))


def solve(bc, lattice, coeffs, u0, noise=None, snapshot_times=None):
    """One realisation of the interval equation.

    Parameters
    ----------
    bc : BoundaryCondition or str
    lattice : LatticeSpec
    coeffs : CoefficientSpec
    u0 : InitialCondition
    noise : NoiseField, optional
        Required unless ``coeffs`` is noise free. A wider field is restricted
        to the lattice interval.
    snapshot_times : sequence of float, optional
        Lattice times to keep; all time levels by default.

    Returns
    -------
    SolutionField

    Raises
    ------
    BlowUpError
        Non-finite values; ``step`` names the first bad time step.
    """
    noise = _check_noise(noise, lattice)
    if noise is None and not coeffs.noise_free:
        raise ConfigurationError("a noise field is required when sigma is not identically zero")
    keep = _snapshot_steps(lattice, snapshot_times)
    dom = _Domain(bc, lattice, coeffs, u0, 1)
    out = np.empty((keep.size, lattice.M + 1))
    k = 0
    if keep[0] == 0:
        out[0] = dom.u[0]
        k = 1
    for i in range(lattice.nt):
        z = None if coeffs.noise_free else noise.block(i)[None, :]
        dom.advance(i, z)
        if dom.bad[0]:
            raise BlowUpError(f"non-finite solution at step {i}", step=i)
        if k < keep.size and keep[k] == i + 1:
            out[k] = dom.u[0]
            k += 1
    return SolutionField(lattice, out, dom.bc, keep * lattice.dt)


def solve_line_proxy(lattice, coeffs, u0, noise=None, L_target=None, snapshot_times=None):
    """Neumann solve on ``[-L_master, L_master]`` standing in for the whole line.

    ``lattice.L`` is ``L_master``. The boundary contamination at
    ``|x| <= L_target`` is bounded by the localisation rate at ``L_master``;
    that number is stored as ``meta["proxy_rate_bound"]``.
    """
    if L_target is not None:
        need = L_target + PROXY_MARGIN * math.sqrt(lattice.T)
        if lattice.L < need - 1e-9 * need:
            raise ConfigurationError(
                f"L_master={lattice.L} violates the margin L_target + 6 sqrt(T) = {need:.6g}"
            )
    sol = solve(BoundaryCondition.NEUMANN, lattice, coeffs, u0, noise, snapshot_times)
    sol.meta["proxy"] = True
    if L_target is not None:
        sol.meta["L_target"] = L_target
        sol.meta["proxy_rate_bound"] = float(kernels.rate_factor_aL(lattice.T, L_target, lattice.L))
    return sol


# --------------------------------------------------------------------------
# exact linear-case variance

def linear_variance_exact(bc, L, t, x, u0_id="zero", c=1.0, tol=1e-11):
    """``E[(u - u_L)^2](t, x)`` for ``sigma = 1``, ``b = 0``.

    The difference is Gaussian with mean ``m = c (1 - int Gamma_L)`` for a
    constant datum ``c`` and variance
    ``int_0^t dr [int_D H_L(r)^2 + int_{D^c} Gamma(r)^2]``; the outer
    integral uses ``r = t w^2`` and the inner ones are exact.

    Parameters
    ----------
    u0_id : {"zero", "constant"}
    c : float
        Value of the constant datum.
    tol : float
        Relative tolerance of the time integral.
    """
    if isinstance(u0_id, InitialCondition):
        u0_id, c = u0_id.registry_id, dict(u0_id.params).get("c", 1.0)
    if u0_id not in ("zero", "constant"):
        raise ConfigurationError(f"linear_variance_exact supports u0 'zero' or 'constant', got {u0_id!r}")
    ev = kernels.GreenEvaluator(L, bc)
    if not (t > 0 and abs(x) < L):
        raise DomainError("linear_variance_exact needs t > 0 and |x| < L")
    m = 0.0
    if u0_id == "constant" and ev.bc != BoundaryCondition.NEUMANN:
        m = c * kernels.green_mass_deficit(ev, t, x)

    def f(w):
        r = t * w * w
        val = np.zeros_like(w)
        pos = r > 0
        rp = r[pos]
        inner = np.asarray(kernels.discrepancy_sq_mass(ev, rp, x), dtype=float)
        outer = kernels.tail_mass(rp / 2.0, x, L) / np.sqrt(8.0 * np.pi * rp)
        val[pos] = (inner + outer) * 2.0 * t * w[pos]
        return val

    noise_var = integrate(f, 0.0, 1.0, atol=1e-300, rtol=tol).value
    return m * m + noise_var


# --------------------------------------------------------------------------
# Monte Carlo localisation error

def _jackknife(v, p):
    """``mean(v)^(1/p)`` with its jackknife standard error."""
    n = v.size
    total = v.sum()
    est = (total / n) ** (1.0 / p)
    loo = ((total - v) / (n - 1)) ** (1.0 / p)
    se = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return est, se


def _run_batch(reps, bc, L_list, lat_master, coeffs, u0, base_seed, cell, steps, nodes_proxy, nodes_L):
    """Proxy and every restricted run for one batch of replicates.

    Returns ``proxy[k, r, m]``, ``restricted[l][k, r, m]`` (snapshot ``k``,
    replicate ``r``, point ``m``) and the per-replicate blow-up flags.
    """
    R = len(reps)
    proxy = _Domain(BoundaryCondition.NEUMANN, lat_master, coeffs, u0, R)
    subs = [_Domain(bc, lat_master.with_half_length(L), coeffs, u0, R) for L in L_list]
    nh = 2 * lat_master.M
    offsets = [(lat_master.M - d.lat.M) for d in subs]  # half-cells trimmed per side
    streams = np.array([[r, cell] for r in reps], dtype=np.int64)
    n_snap = len(steps)
    P = np.empty((n_snap, R, len(nodes_proxy)))
    S = [np.empty((n_snap, R, len(nodes_L[l]))) for l in range(len(L_list))]

    def record(k):
        P[k] = proxy.u[:, nodes_proxy]
        for l, d in enumerate(subs):
            S[l][k] = d.u[:, nodes_L[l]]

    k = 0
    if n_snap and steps[0] == 0:
        record(0)
        k = 1
    for i in range(steps[-1] if n_snap else 0):
        z = None
        if not coeffs.noise_free:
            z = normals_block(base_seed, i, -nh // 2, nh, streams)
        proxy.advance(i, z)
        for d, off in zip(subs, offsets):
            d.advance(i, None if z is None else z[:, off: nh - off])
        if k < n_snap and steps[k] == i + 1:
            record(k)
            k += 1
    bad = proxy.bad.copy()
    for d in subs:
        bad |= d.bad
    return P, S, bad


def mc_errors(bc, L_list, t_list, x_list, p, n_reps, base_seed, lattice, coeffs, u0,
              threads=None, cell=0, exact_variance=False):
    """``||u(t, x) - u_L(t, x)||_{L^p(Omega)}`` for several ``L`` sharing one noise per replicate.

    ``lattice`` is the proxy lattice; its half-length is ``L_master``.
    Replicate ``r`` reads the noise stream ``(r, cell)`` of ``base_seed``,
    so the proxy and every ``u_L`` of that replicate see the same white
    noise on shared cells.

    Returns
    -------
    list of LocalizationRecord
        Ordered by ``L``, then ``t``, then ``x``.

    Raises
    ------
    BlowUpError
        More than 1% of replicates produced non-finite values.
    """
    bc = BoundaryCondition.parse(bc)
    if p < 1:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    if n_reps < 2:
        raise ConfigurationError("n_reps must be >= 2")
    L_list = [float(L) for L in L_list]
    L_master = lattice.L
    T = max(t_list)
    if lattice.T < T - 1e-12:
        raise ConfigurationError(f"lattice horizon T={lattice.T} is before t={T}")
    need = max(L_list) + PROXY_MARGIN * math.sqrt(lattice.T)
    if L_master < need - 1e-9 * need:
        raise ConfigurationError(
            f"L_master={L_master} violates the margin max(L) + 6 sqrt(T) = {need:.6g}"
        )
    for L, x in ((L, x) for L in L_list for x in x_list):
        if not abs(x) < L:
            raise ConfigurationError(f"x={x} must lie strictly inside [-{L}, {L}]")
    steps = np.array(sorted({lattice.step(t) for t in t_list}))
    t_index = {t: int(np.searchsorted(steps, lattice.step(t))) for t in t_list}
    nodes_proxy = np.array([lattice.node(x) for x in x_list])
    nodes_L = [np.array([lattice.with_half_length(L).node(x) for x in x_list]) for L in L_list]

    batches = [list(range(s, min(s + BATCH, n_reps))) for s in range(0, n_reps, BATCH)]
    run = lambda reps: _run_batch(reps, bc, L_list, lattice, coeffs, u0,  # noqa: E731
                                  base_seed, cell, steps, nodes_proxy, nodes_L)
    threads = threads or default_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, batches))
    else:
        results = [run(b) for b in batches]

    proxy = np.concatenate([r[0] for r in results], axis=1)
    bad = np.concatenate([r[2] for r in results])
    n_bad = int(bad.sum())
    if n_bad > MAX_FLAGGED * n_reps:
        raise BlowUpError(f"{n_bad} of {n_reps} replicates blew up")
    good = ~bad
    records = []
    for l, L in enumerate(L_list):
        sub = np.concatenate([r[1][l] for r in results], axis=1)
        diff = np.abs(proxy - sub)[:, good, :] ** p
        for t in t_list:
            k = t_index[t]
            for m, x in enumerate(x_list):
                est, se = _jackknife(diff[k, :, m], p)
                ev = float("nan")
                if exact_variance and t > 0:
                    ev = linear_variance_exact(bc, L, t, x, u0)
                records.append(LocalizationRecord(
                    bc=bc.name.lower(), L=L, t=float(t), x=float(x), p=float(p),
                    error=est, std_error=se,
                    bound_aL=float(kernels.rate_factor_aL(t, x, L)) if t > 0 else 0.0,
                    exact_variance=ev, n_effective=int(good.sum()), seed=int(base_seed),
                ))
    return records


def mc_lp_error(bc, L, t_list, x_list, p, n_reps, base_seed, lattice, coeffs, u0, threads=None,
                exact_variance=False):
    """Monte Carlo ``L^p(Omega)`` localisation error at one half-length ``L``."""
    return mc_errors(bc, [L], t_list, x_list, p, n_reps, base_seed, lattice, coeffs, u0,
                     threads=threads, exact_variance=exact_variance)
