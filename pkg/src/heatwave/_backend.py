"""Backend selection for the hot numeric kernels.

Every hot kernel in the package exists twice: a numba ``@njit`` loop and a
pure-numpy equivalent. The numba path is used unless numba is missing or the
environment variable ``HEATWAVE_BACKEND`` is set to ``numpy``.

Worker threads for replicate-level parallelism are capped by
``HEATWAVE_THREADS`` (or the CLI ``--threads`` flag). Results never depend on
the thread count.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

_requested = os.environ.get("HEATWAVE_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(
        f"HEATWAVE_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

USE_NUMBA = HAVE_NUMBA and _requested == "numba"
BACKEND = "numba" if USE_NUMBA else "numpy"

numba_kwargs = {"cache": True, "nogil": True}


def njit(*args, **kwargs):
    """``numba.njit`` with the package defaults, or a no-op when numba is absent."""
    opts = dict(numba_kwargs)
    opts.update(kwargs)
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    if args and callable(args[0]):
        return numba.njit(**opts)(args[0])
    return numba.njit(*args, **opts)


def pick(numba_impl, numpy_impl):
    """Return the implementation matching the active backend."""
    return numba_impl if USE_NUMBA else numpy_impl


def default_threads():
    raw = os.environ.get("HEATWAVE_THREADS")
    if raw is None or raw == "":
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError("HEATWAVE_THREADS must be >= 1")
    return n
