"""Localisation sweeps, decay-rate fits and result tables.

A sweep evaluates ``||u(t, x) - u_L(t, x)||_{L^p(Omega)}`` over a grid of
``(L, t, x)``, either by Monte Carlo with coupled noise or, for the linear
coefficients, from the exact Gaussian law of the difference. The fits then
ask two questions of the table: how fast does the error decay in ``L^2``,
and is one constant enough to put every record under
``c (1 + ||u0||) a_L(t, x)``.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.special import gamma as gamma_fn

from . import kernels, solver
from .errors import ConfigurationError
from .kernels import BoundaryCondition
from .quadrature import integrate
from .records import CSV_COLUMNS, LocalizationRecord

THEOREM = "Theorem-8t"
SHARP = "Sharp-4t"
FIT_WINDOW = 2.0  # rate fits keep only (L - |x|)^2 / (8t) >= FIT_WINDOW
SLOPE_TOL = 0.15
MIN_MC_REPS = 100

__all__ = [
    "SweepConfig", "LocalizationRecord", "RateFit", "EnvelopeFit", "SmallLReport",
    "sweep", "fit_rate", "fit_envelope_constant", "monotonicity_violations",
    "neumann_smallL_check", "emit", "read_records",
]


# --------------------------------------------------------------------------
# configuration

@dataclass
class SweepConfig:
    """One localisation sweep.

    ``method`` is ``"mc"``, ``"quadrature"`` (linear coefficients only) or
    ``"auto"``, which picks quadrature whenever it applies. ``dt`` defaults
    to ``dx^2``; ``L_master`` defaults to the smallest admissible proxy.
    """

    bc: BoundaryCondition
    L_values: list
    t_values: list
    x_values: list
    p: float = 2.0
    n_reps: int = 1000
    dx: float = 1.0 / 32.0
    dt: float = None
    coeffs: str = "linear"
    coeff_params: dict = field(default_factory=dict)
    u0: str = "zero"
    u0_params: dict = field(default_factory=dict)
    base_seed: int = 0
    method: str = "auto"
    L_master: float = None

    def __post_init__(self):
        self.bc = BoundaryCondition.parse(self.bc)
        self.L_values = [float(v) for v in self.L_values]
        self.t_values = [float(v) for v in self.t_values]
        self.x_values = [float(v) for v in self.x_values]

    @property
    def T(self):
        return max(self.t_values)

    @property
    def coefficient_spec(self):
        return solver.coefficients(self.coeffs, **self.coeff_params)

    @property
    def initial(self):
        return solver.initial_condition(self.u0, **self.u0_params)

    @property
    def resolved_method(self):
        if self.method == "auto":
            return "quadrature" if self._quadrature_applies() else "mc"
        return self.method

    def _quadrature_applies(self):
        return self.coeffs == "linear" and self.u0 in ("zero", "constant")

    def lattice(self):
        L_master = self.L_master
        if L_master is None:
            L_master = solver.proxy_half_length(max(self.L_values), self.T, self.dx)
        return solver.LatticeSpec.make(L_master, self.dx, self.T, self.dt)

    def validate(self):
        """Check every precondition before any compute starts."""
        if not self.L_values or not self.t_values or not self.x_values:
            raise ConfigurationError("L_values, t_values and x_values must be nonempty")
        if any(b <= a for a, b in zip(self.L_values, self.L_values[1:])):
            raise ConfigurationError("L_values must be strictly ascending")
        if min(self.t_values) <= 0:
            raise ConfigurationError("t_values must be positive")
        if not self.p >= 1:
            raise ConfigurationError(f"p must be >= 1, got {self.p}")
        for L in self.L_values:
            for x in self.x_values:
                if not abs(x) < L:
                    raise ConfigurationError(f"x={x} must satisfy |x| < L={L}")
        self.coefficient_spec, self.initial
        if self.method not in ("auto", "mc", "quadrature"):
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.resolved_method == "quadrature":
            if not self._quadrature_applies():
                raise ConfigurationError("quadrature path needs coeffs 'linear' and u0 'zero' or 'constant'")
            return
        if self.n_reps < MIN_MC_REPS:
            raise ConfigurationError(f"Monte Carlo sweeps need n_reps >= {MIN_MC_REPS}")
        lat = self.lattice()
        need = max(self.L_values) + solver.PROXY_MARGIN * math.sqrt(self.T)
        if lat.L < need - 1e-9 * need:
            raise ConfigurationError(
                f"L_master={lat.L} violates max(L) + 6 sqrt(T) = {need:.6g}"
            )
        for L in self.L_values:
            lat.with_half_length(L)
        for x in self.x_values:
            lat.node(x)
        for t in self.t_values:
            lat.step(t)

    def as_dict(self):
        d = asdict(self)
        d["bc"] = self.bc.name.lower()
        return d


# --------------------------------------------------------------------------
# sweep

def gaussian_abs_moment(mean, var, p):
    """``E|Z|^p`` for ``Z ~ N(mean, var)``."""
    if var <= 0:
        return abs(mean) ** p
    s = math.sqrt(var)
    if mean == 0:
        return s ** p * 2 ** (p / 2) * gamma_fn((p + 1) / 2) / math.sqrt(math.pi)
    dens = lambda z: np.abs(mean + s * z) ** p * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)  # noqa: E731
    lim = 40.0
    return integrate(dens, -lim, lim, atol=1e-300, rtol=1e-12, points=(-mean / s,)).value


def _quadrature_records(cfg):
    coeffs = cfg.coefficient_spec
    sigma0 = dict(coeffs.params).get("sigma0", 1.0)
    c = dict(cfg.initial.params).get("c", 1.0)
    out = []
    for L in cfg.L_values:
        ev = kernels.GreenEvaluator(L, cfg.bc)
        for t in cfg.t_values:
            for x in cfg.x_values:
                m = 0.0
                if cfg.u0 == "constant" and cfg.bc != BoundaryCondition.NEUMANN:
                    m = c * kernels.green_mass_deficit(ev, t, x)
                second = solver.linear_variance_exact(cfg.bc, L, t, x, "zero")
                var = sigma0 * sigma0 * second
                moment = gaussian_abs_moment(m, var, cfg.p)
                out.append(LocalizationRecord(
                    bc=cfg.bc.name.lower(), L=L, t=t, x=x, p=float(cfg.p),
                    error=moment ** (1.0 / cfg.p), std_error=0.0,
                    bound_aL=float(kernels.rate_factor_aL(t, x, L)),
                    exact_variance=m * m + var, n_effective=0, seed=int(cfg.base_seed),
                ))
    return out


def sweep(config, threads=None):
    """One record per ``(L, t, x)``, ordered by ``L``, then ``t``, then ``x``."""
    config.validate()
    if config.resolved_method == "quadrature":
        return _quadrature_records(config)
    return solver.mc_errors(
        config.bc, config.L_values, config.t_values, config.x_values, config.p,
        config.n_reps, config.base_seed, config.lattice(), config.coefficient_spec,
        config.initial, threads=threads, exact_variance=config._quadrature_applies(),
    )


# --------------------------------------------------------------------------
# fits

@dataclass(frozen=True)
class RateFit:
    """Least-squares line ``log(error) = slope (L - |x|)^2 + intercept``."""

    slope: float
    intercept: float
    r_squared: float
    theoretical_slope: float
    regime: str
    t: float
    x: float
    n_points: int

    @property
    def relative_deviation(self):
        return self.slope / self.theoretical_slope - 1.0

    @property
    def satisfies_theorem(self):
        """Decay at least as fast as ``exp(-L^2/(8t))``, up to the slope tolerance."""
        return self.slope <= -(1 - SLOPE_TOL) / (8.0 * self.t)

    @property
    def satisfies_sharp(self):
        return self.slope <= -(1 - SLOPE_TOL) / (4.0 * self.t)

    def as_dict(self):
        d = asdict(self)
        d.update(relative_deviation=self.relative_deviation,
                 satisfies_theorem=self.satisfies_theorem, satisfies_sharp=self.satisfies_sharp)
        return d


def regime_for(coeffs):
    """Sharp rate when the drift or the noise vanishes, theorem rate otherwise."""
    return SHARP if (coeffs.drift_free or coeffs.noise_free) else THEOREM


def fit_rate(records, regime=SHARP, window=True):
    """Fit the decay of ``log(error)`` against ``(L - |x|)^2``.

    Parameters
    ----------
    records : sequence of LocalizationRecord
        Same ``t`` and ``x``, varying ``L``.
    regime : {"Sharp-4t", "Theorem-8t"}
        Sets ``theoretical_slope`` to ``-1/(4t)`` or ``-1/(8t)``.
    window : bool
        Keep only records with ``(L - |x|)^2 / (8t) >= 2``.

    Raises
    ------
    ValueError
        Mixed ``t`` or ``x``, a nonpositive error, or fewer than 4 points.
    """
    if regime not in (SHARP, THEOREM):
        raise ValueError(f"unknown regime {regime!r}")
    if not records:
        raise ValueError("fit_rate needs records")
    t, x = records[0].t, records[0].x
    if any(r.t != t or r.x != x for r in records):
        raise ValueError("fit_rate needs records at a single (t, x)")
    pts = [(r.L, r.error) for r in records
           if not window or (r.L - abs(x)) ** 2 / (8.0 * t) >= FIT_WINDOW]
    if len(pts) < 4:
        raise ValueError(f"fit_rate needs >= 4 records in the fit window, got {len(pts)}")
    L = np.array([p[0] for p in pts])
    err = np.array([p[1] for p in pts])
    if np.any(err <= 0):
        raise ValueError("fit_rate needs strictly positive errors")
    X = (L - abs(x)) ** 2
    Y = np.log(err)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    theo = -1.0 / ((4.0 if regime == SHARP else 8.0) * t)
    return RateFit(float(slope), float(intercept), float(min(max(r2, 0.0), 1.0)), theo, regime,
                   float(t), float(x), len(pts))


@dataclass(frozen=True)
class EnvelopeFit:
    """``fitted_c = max error / ((1 + ||u0||) a_L)`` and the top-3 trend verdict."""

    fitted_c: float
    upward_trend: bool
    trends: tuple  # (t, x, p, first_ratio, last_ratio, allowed_growth) per group

    def as_dict(self):
        return {"fitted_c": self.fitted_c, "upward_trend": self.upward_trend,
                "trends": [list(t) for t in self.trends]}


def _groups(records):
    out = {}
    for r in records:
        out.setdefault((r.bc, r.t, r.x, r.p), []).append(r)
    return {k: sorted(v, key=lambda r: r.L) for k, v in out.items()}


def fit_envelope_constant(records, u0_sup=0.0):
    """Smallest ``c`` with ``error <= c (1 + u0_sup) a_L`` on every record.

    Within each ``(t, x, p)`` group the ratio at the largest of the three
    largest ``L`` may exceed the ratio at the smallest of them by at most
    three combined relative standard errors; otherwise ``upward_trend``.
    """
    if not records:
        raise ValueError("fit_envelope_constant needs records")
    if any(not r.bound_aL > 0 for r in records):
        raise ValueError("every record needs bound_aL > 0")
    scale = 1.0 + u0_sup
    fitted = max(r.error / (scale * r.bound_aL) for r in records)
    trends, flag = [], False
    for (bc, t, x, p), rs in _groups(records).items():
        top = rs[-3:]
        if len(top) < 2:
            continue
        a, b = top[0], top[-1]
        ra, rb = a.error / (scale * a.bound_aL), b.error / (scale * b.bound_aL)
        rel = math.hypot(a.std_error / a.error if a.error > 0 else 0.0,
                         b.std_error / b.error if b.error > 0 else 0.0)
        allowed = 1.0 + 3.0 * rel
        up = rb > ra * allowed if ra > 0 else rb > 0
        flag |= up
        trends.append((t, x, p, ra, rb, allowed))
    return EnvelopeFit(float(fitted), bool(flag), tuple(trends))


def monotonicity_violations(records, n_se=3.0):
    """Consecutive-``L`` pairs whose error grows by more than ``n_se`` standard errors."""
    bad = []
    for _, rs in _groups(records).items():
        for a, b in zip(rs, rs[1:]):
            if b.error > a.error + n_se * math.hypot(a.std_error, b.std_error):
                bad.append((a, b))
    return bad


# --------------------------------------------------------------------------
# Neumann small-L lower bound

@dataclass(frozen=True)
class SmallLReport:
    t: float
    L: float
    value: float
    lower_bound: float

    @property
    def passed(self):
        return self.value >= self.lower_bound

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} neumann_small_L t={self.t:g} L={self.L:g} value={self.value:.10g} bound={self.lower_bound:.10g}"


def neumann_smallL_check(t, L, tol=1e-12):
    """``E[u_L(t, 0)^2] = int_0^t Gamma^N_L(2r; 0, 0) dr`` against ``t / (2L)``.

    Linear equation with zero datum: the second moment is the time integral
    of the squared kernel, which the semigroup property folds into the
    kernel at doubled time.
    """
    if not (t > 0 and L > 0):
        raise ConfigurationError("neumann_smallL_check needs t > 0 and L > 0")
    ev = kernels.GreenEvaluator(L, BoundaryCondition.NEUMANN)

    def f(w):
        r = t * w * w
        val = np.zeros_like(w)
        pos = r > 0
        # the kernel is ~ 1/sqrt(8 pi r) near r = 0; r = t w^2 removes it
        val[pos] = np.asarray(kernels.green(ev, 2.0 * r[pos], 0.0, 0.0)) * 2.0 * t * w[pos]
        return val

    value = integrate(f, 0.0, 1.0, atol=0.0, rtol=tol).value
    return SmallLReport(float(t), float(L), float(value), t / (2.0 * L))


# --------------------------------------------------------------------------
# output

def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, (np.floating,)):
        return _jsonable(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, BoundaryCondition):
        return v.name.lower()
    return v


def _record_row(r):
    return [_fmt(getattr(r, c)) for c in CSV_COLUMNS]


def emit(items, path, fmt="csv", config=None):
    """Write records (CSV or JSON) or fits (JSON).

    CSV columns are ``bc,L,t,x,p,error,std_error,bound_aL,exact_variance,
    n_effective,seed`` with floats at 17 significant digits. JSON holds
    ``{"config": ..., "records": [...]}`` or ``{"config": ..., "fits": [...]}``.
    """
    items = list(items)
    is_records = all(isinstance(i, LocalizationRecord) for i in items)
    try:
        if fmt == "csv":
            if not is_records:
                raise ValueError("CSV output is for LocalizationRecord lists only")
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for r in items:
                    w.writerow(_record_row(r))
        elif fmt == "json":
            key = "records" if is_records else "fits"
            body = [asdict(i) if is_records else (i.as_dict() if hasattr(i, "as_dict") else i)
                    for i in items]
            payload = {"config": config, key: body}
            with open(path, "w") as fh:
                json.dump(_jsonable(payload), fh, indent=1, sort_keys=True)
                fh.write("\n")
        else:
            raise ValueError(f"unknown format {fmt!r}; use 'csv' or 'json'")
    except OSError as exc:
        raise OSError(f"cannot write {path!r}: {exc}") from exc


def _from_values(d):
    kw = {}
    for f in fields(LocalizationRecord):
        v = d[f.name]
        if f.name == "bc":
            kw[f.name] = str(v)
        elif f.name in ("n_effective", "seed"):
            kw[f.name] = int(v)
        else:
            kw[f.name] = float("nan") if v is None else float(v)
    return LocalizationRecord(**kw)


def read_records(path):
    """Records back from an ``emit`` CSV or JSON file."""
    try:
        if str(path).endswith(".json"):
            with open(path) as fh:
                return [_from_values(d) for d in json.load(fh)["records"]]
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path!r}: {exc}") from exc
    return [_from_values(r) for r in rows]
