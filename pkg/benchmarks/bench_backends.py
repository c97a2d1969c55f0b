"""Time the numba and numpy backends on the hot kernels.

Each backend runs in its own interpreter because ``HEATWAVE_BACKEND`` is read
at import. The numba timings exclude compilation (one warm-up call first).

    python benchmarks/bench_backends.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from heatwave import _backend, kernels, noise, solver

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
n = 200_000
t = np.exp(rng.uniform(np.log(0.01), np.log(2.0), n))
L = np.full(n, 1.0)
x = rng.uniform(-1, 1, n)
y = rng.uniform(-1, 1, n)
lat = solver.LatticeSpec.make(2.0, 1 / 32, 0.25)
coeffs = solver.coefficients("sine_tanh")
u0 = solver.initial_condition("gaussian")
streams = np.stack([np.arange(64), np.zeros(64, dtype=np.int64)], axis=1)

cases = {
    "images_raw (2e5 points)": lambda: kernels.images_raw(kernels.BoundaryCondition.DIRICHLET, t, x, y, L),
    "eigen_raw (2e5 points)": lambda: kernels.eigen_raw(kernels.BoundaryCondition.NEUMANN, t, x, y, L),
    "normals_block (64 x 8192)": lambda: noise.normals_block(7, 3, -4096, 8192, streams),
    "solve (L=2, dx=1/32, T=1/4)": lambda: solver.solve(
        kernels.BoundaryCondition.DIRICHLET, lat, coeffs, u0, noise.make_noise(1, 2.0, lat.dx, lat.dt, lat.T)),
}
out = {"backend": _backend.BACKEND, "timings": {}, "checksums": {}}
for name, fn in cases.items():
    res = fn()  # warm-up, includes compilation
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = fn()
        best = min(best, time.perf_counter() - t0)
    vals = res.values if hasattr(res, "values") else res
    out["timings"][name] = best
    out["checksums"][name] = float(np.sum(np.abs(vals)))
print(json.dumps(out))
"""


def run(backend, repeat):
    env = dict(os.environ, HEATWAVE_BACKEND=backend)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    res = {b: run(b, args.repeat) for b in ("numba", "numpy")}
    if res["numba"]["backend"] != "numba":
        print("numba is not importable; only the numpy backend ran")
    print(f"{'kernel':32s} {'numba [s]':>11s} {'numpy [s]':>11s} {'speed-up':>9s} {'checksum diff':>14s}")
    for name, tn in res["numba"]["timings"].items():
        tp = res["numpy"]["timings"][name]
        cn, cp = res["numba"]["checksums"][name], res["numpy"]["checksums"][name]
        print(f"{name:32s} {tn:11.4f} {tp:11.4f} {tp / tn:9.1f} {abs(cn - cp) / max(abs(cp), 1e-300):14.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
