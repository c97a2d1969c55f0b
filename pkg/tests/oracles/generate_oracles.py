"""Regenerate ``oracle_values.json`` with mpmath.

Nothing here imports ``heatwave``: Green's functions are rebuilt from their
eigenfunction expansions (and cross-checked against image sums), integrals
use mpmath quadrature, resolvents come from numerical Laplace inversion.

    python tests/oracles/generate_oracles.py
"""

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 30
OUT = Path(__file__).with_name("oracle_values.json")


def gauss(t, z):
    return mp.exp(-z * z / (4 * t)) / mp.sqrt(4 * mp.pi * t)


def modes(bc, L, n):
    """(eigenvalue, phi) of the n-th mode on [-L, L]."""
    if bc == "dirichlet":
        k = (n + 1) * mp.pi / (2 * L)
        return k * k, lambda z: mp.sin(k * (z + L)) / mp.sqrt(L)
    if bc == "mixed":
        k = (n + mp.mpf(1) / 2) * mp.pi / (2 * L)
        return k * k, lambda z: mp.sin(k * (z + L)) / mp.sqrt(L)
    if n == 0:
        return mp.mpf(0), lambda z: 1 / mp.sqrt(2 * L)
    k = n * mp.pi / (2 * L)
    return k * k, lambda z: mp.cos(k * (z + L)) / mp.sqrt(L)


def green_eigen(bc, L, t, x, y, cut=mp.mpf("1e-32")):
    s, n = mp.mpf(0), 0
    while True:
        lam, phi = modes(bc, L, n)
        if n > 2 and mp.exp(-lam * t) < cut:
            return s
        s += phi(x) * phi(y) * mp.exp(-lam * t)
        n += 1


def image_terms(bc, L, t, x, y):
    """(sign, shift) pairs with Gamma_L = sum sign * Gamma(t, x - shift)."""
    M = int(16 * mp.sqrt(t) / (4 * L)) + 3  # dropped images are below exp(-60)
    out = []
    for m in range(-M, M + 1):
        if bc == "dirichlet":
            out += [(1, y + 4 * m * L), (-1, 2 * L - y + 4 * m * L)]
        elif bc == "neumann":
            out += [(1, y + 4 * m * L), (1, 2 * L - y + 4 * m * L)]
        else:  # Dirichlet at -L, Neumann at L: period 8L
            sg = (-1) ** (m % 2)
            out += [(sg, y + 4 * m * L), (sg, 2 * L - y + 4 * m * L)]
    return out


def green_images(bc, L, t, x, y):
    return mp.fsum(s * gauss(t, x - c) for s, c in image_terms(bc, L, t, x, y))


def discrepancy(bc, L, t, x, y):
    # Gamma - Gamma_L: minus the non-central images
    return -mp.fsum(s * gauss(t, x - c) for s, c in image_terms(bc, L, t, x, y) if not (s == 1 and c == y))


def roots_in(f, a, b, n=800):
    pts = [a + (b - a) * mp.mpf(i) / n for i in range(n + 1)]
    vals = [f(p) for p in pts]
    out = []
    for i in range(n):
        if vals[i] == 0 or vals[i] * vals[i + 1] < 0:
            lo, hi, flo = pts[i], pts[i + 1], vals[i]
            for _ in range(110):  # bisection to ~1e-33 relative
                mid = (lo + hi) / 2
                fm = f(mid)
                if fm * flo > 0:
                    lo, flo = mid, fm
                else:
                    hi = mid
            out.append((lo + hi) / 2)
    return out


def abs_l1(bc, L, t, x):
    f = lambda y: discrepancy(bc, L, t, x, y)  # noqa: E731
    cuts = sorted(set([-L, x, L] + roots_in(f, -L, L)))
    return mp.quad(lambda y: abs(f(y)), cuts)


def localization_error_sq(bc, L, t, x, c=0):
    """E|u(t,x) - u_L(t,x)|^2 for the linear equation, u0 = c."""
    with mp.workdps(20):
        def inner(s):
            if s == 0:
                return mp.mpf(0)
            h2 = mp.quad(lambda y: discrepancy(bc, L, s, x, y) ** 2, [-L, x, L])
            # Gamma(s, .)^2 = Gamma(s/2, .)/sqrt(8 pi s); its mass outside [-L, L]
            r = mp.sqrt(2 * s)
            out = (mp.erfc((L - x) / r) + mp.erfc((L + x) / r)) / (2 * mp.sqrt(8 * mp.pi * s))
            return h2 + out
        var = mp.quad(inner, [0, t / 4, t])
        m = 0
        if c:
            mass = mp.quad(lambda y: green_images(bc, L, t, x, y), [-L, x, L])
            m = c * (mass - 1)
        return var + m * m


def green_mass(bc, L, t, x):
    s, n = mp.mpf(0), 0
    while True:
        lam, phi = modes(bc, L, n)
        if n > 2 and mp.exp(-lam * t) < mp.mpf("1e-32"):
            return s
        s += phi(x) * mp.exp(-lam * t) * mp.quad(phi, [-L, L])
        n += 1


def small_l(t, L):
    # int_0^t Gamma_L^N(2s; 0, 0) ds by termwise time integration
    s = t / (2 * L)
    s += mp.nsum(lambda k: (1 / L) * (1 - mp.exp(-2 * (k * mp.pi / L) ** 2 * t))
                 / (2 * (k * mp.pi / L) ** 2), [1, mp.inf])
    return s


def resolvent_prefactor(kind, C, t):
    # K = Gamma(t, x) * q(t); q has Laplace transform C g/(1 - C g)
    if kind == "stochastic":
        F = lambda lam: C / (2 * mp.sqrt(lam) - C)  # noqa: E731  g = 1/sqrt(4 pi r)
    else:
        F = lambda lam: C / (lam - C)  # noqa: E731  g = 1
    return mp.invertlaplace(F, t, method="talbot")


def gronwall_U(T):
    # J(s) = 1/sqrt(8 pi s) + 1; U(T) = int_0^T sum_n J^{*n}
    Jhat = lambda lam: 1 / mp.sqrt(8 * lam) + 1 / lam  # noqa: E731
    return mp.invertlaplace(lambda lam: Jhat(lam) / (lam * (1 - Jhat(lam))), T, method="talbot")


def main():
    f = lambda v: float(v)  # noqa: E731
    data = {}
    pts = [
        ("dirichlet", 1, 0.5, 0.2, -0.4), ("mixed", 1, 0.5, 0.2, -0.4), ("neumann", 1, 0.5, 0.2, -0.4),
        ("neumann", 1, 1.0, 0.0, 0.0), ("dirichlet", 1, 0.1, 1.0, 0.3), ("mixed", 2, 0.05, -1.9, -1.7),
        ("neumann", 0.5, 2.0, 0.49, -0.5), ("dirichlet", 2, 4.0, 0.0, 1.5), ("mixed", 0.5, 0.25, 0.5, 0.5),
        ("mixed", 1, 0.3, 0.5, 0.5),
    ]
    green = []
    for bc, L, t, x, y in pts:
        L, t, x, y = map(mp.mpf, (L, t, x, y))
        e, i = green_eigen(bc, L, t, x, y), green_images(bc, L, t, x, y)
        assert abs(e - i) < mp.mpf("1e-25"), (bc, e, i)
        green.append({"bc": bc, "L": f(L), "t": f(t), "x": f(x), "y": f(y), "value": f(e)})
    data["green"] = green

    data["green_mass"] = [
        {"bc": bc, "L": L, "t": t, "x": x, "value": f(green_mass(bc, mp.mpf(L), mp.mpf(t), mp.mpf(x)))}
        for bc, L, t, x in [("dirichlet", 1, 1, 0), ("mixed", 1, 0.5, 0.3), ("neumann", 2, 0.7, -1.1)]
    ]
    data["discrepancy_l1"] = [
        {"bc": bc, "L": L, "t": t, "x": x, "value": f(abs_l1(bc, mp.mpf(L), mp.mpf(t), mp.mpf(x)))}
        for bc, L, t, x in [("dirichlet", 2, 0.5, 0.3), ("neumann", 2, 0.5, 0.3), ("mixed", 1, 0.5, 0.2),
                            ("mixed", 1, 2.0, -0.6), ("mixed", 2, 0.8, 0.0)]
    ]
    data["localization_error_sq"] = [
        {"bc": bc, "L": L, "t": t, "x": x, "c": c,
         "value": f(localization_error_sq(bc, mp.mpf(L), mp.mpf(t), mp.mpf(x), c))}
        for bc, L, t, x, c in [("dirichlet", 1, 0.5, 0, 0), ("dirichlet", 2, 0.5, 0, 0), ("dirichlet", 3, 0.5, 0, 0),
                               ("neumann", 1, 0.5, 0, 0), ("mixed", 1, 0.5, 0.2, 0), ("dirichlet", 1, 0.5, 0, 1)]
    ]
    data["small_l"] = [{"t": 0.5, "L": L, "value": f(small_l(mp.mpf("0.5"), mp.mpf(L)))} for L in (0.2, 0.1, 0.05)]
    data["resolvent_prefactor"] = [
        {"variant": v, "C": C, "t": t, "value": f(resolvent_prefactor(v, mp.mpf(C), mp.mpf(t)))}
        for v in ("stochastic", "deterministic") for C in (0.5, 1, 2) for t in (0.1, 0.5, 1)
    ]
    data["gronwall_U"] = [{"T": T, "value": f(gronwall_U(mp.mpf(T)))} for T in (0.5, 1)]
    data["scalars"] = {
        "gaussian_tail_1_1": f(mp.quad(lambda z: mp.npdf(z), [1, mp.inf])),
        "gaussian_tail_5_1": f(mp.quad(lambda z: mp.npdf(z), [5, mp.inf])),
        "theta_1": f(mp.nsum(lambda m: mp.exp(-m * m), [0, mp.inf])),
        "theta_2": f(mp.nsum(lambda m: mp.exp(-2 * m * m), [0, mp.inf])),
        "tail_mass_1_0_3": f(2 * mp.quad(lambda y: gauss(1, y), [3, mp.inf])),
        "heat_kernel_mass_0.3": f(mp.quad(lambda y: gauss(mp.mpf("0.3"), y), [-mp.inf, 0, mp.inf])),
    }
    # Philox4x32-10 known-answer vectors of the Random123 distribution
    data["philox_kat"] = [
        {"ctr": [0, 0, 0, 0], "key": [0, 0], "out": [0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8]},
        {"ctr": [0xFFFFFFFF] * 4, "key": [0xFFFFFFFF] * 2,
         "out": [0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD]},
        {"ctr": [0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344], "key": [0xA4093822, 0x299F31D0],
         "out": [0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1]},
    ]
    OUT.write_text(json.dumps(data, indent=1) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
