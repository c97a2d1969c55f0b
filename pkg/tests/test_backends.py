"""The numba and numpy backends must give the same numbers."""

import os
import subprocess
import sys

import numpy as np
import pytest

from heatwave import _backend

SCRIPT = r"""
import sys
import numpy as np
from heatwave import _backend, kernels, noise, solver
from heatwave.kernels import BoundaryCondition as BC

assert _backend.BACKEND == sys.argv[2], _backend.BACKEND
rng = np.random.default_rng(1)
n = 2000
t = np.exp(rng.uniform(np.log(0.01), np.log(4.0), n))
L = rng.choice([0.5, 1.0, 2.0], n)
x, y = L * rng.uniform(-1, 1, n), L * rng.uniform(-1, 1, n)
xi = L * rng.uniform(-0.99, 0.99, n)
out = {}
for bc in BC:
    out[f"img{int(bc)}"] = kernels.images_raw(bc, t, x, y, L)
    out[f"eig{int(bc)}"] = kernels.eigen_raw(bc, t, x, y, L)
    out[f"dm{int(bc)}"] = kernels.discrepancy_mass_raw(bc, t, xi, L)
    out[f"dsq{int(bc)}"] = kernels.discrepancy_sq_mass_raw(bc, t, xi, L)
out["normals"] = noise.normals_block(77, 5, -301, 603, np.array([[0, 0], [3, 1], [9, 9]]))
lat = solver.LatticeSpec.make(1.0, 1 / 16, 0.125)
for bc in BC:
    sol = solver.solve(bc, lat, solver.coefficients("sine_tanh"), solver.initial_condition("gaussian"),
                       noise.make_noise(4, 1.0, lat.dx, lat.dt, lat.T))
    out[f"solve{int(bc)}"] = sol.values
np.savez(sys.argv[1], **out)
"""


def _run(backend, path):
    env = dict(os.environ, HEATWAVE_BACKEND=backend)
    subprocess.run([sys.executable, "-c", SCRIPT, str(path), backend], env=env, check=True)
    return np.load(path)


@pytest.mark.skipif(not _backend.HAVE_NUMBA, reason="numba not installed")
def test_backends_agree(tmp_path):
    a = _run("numba", tmp_path / "numba.npz")
    b = _run("numpy", tmp_path / "numpy.npz")
    assert sorted(a.files) == sorted(b.files)
    for k in a.files:
        if k == "normals":
            assert np.array_equal(a[k], b[k]), k
        else:
            scale = max(1.0, float(np.max(np.abs(b[k]))))
            assert np.max(np.abs(a[k] - b[k])) <= 1e-13 * scale, k


def test_bad_backend_name_is_rejected():
    env = dict(os.environ, HEATWAVE_BACKEND="fortran")
    proc = subprocess.run([sys.executable, "-c", "import heatwave.kernels"], env=env,
                          capture_output=True, text=True)
    assert proc.returncode != 0
    assert "HEATWAVE_BACKEND" in proc.stderr
