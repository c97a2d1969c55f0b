import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatwave.errors import QuadratureError
from heatwave.quadrature import integrate, integrate_batch


@given(st.integers(0, 20), st.floats(-3, 3), st.floats(0.1, 4))
def test_polynomials_exact(k, a, w):
    b = a + w
    res = integrate(lambda x: x ** k, a, b, atol=1e-13, rtol=1e-13)
    exact = (b ** (k + 1) - a ** (k + 1)) / (k + 1)
    assert res.value == pytest.approx(exact, rel=1e-11, abs=1e-12)


def test_kink_with_breakpoint():
    f = lambda x: np.abs(x - 1 / 3)  # noqa: E731
    exact = ((1 / 3) ** 2 + (2 / 3) ** 2) / 2
    assert integrate(f, 0.0, 1.0, atol=1e-14, points=(1 / 3,)).value == pytest.approx(exact, abs=1e-15)
    assert integrate(f, 0.0, 1.0, atol=1e-12).value == pytest.approx(exact, abs=1e-11)


def test_endpoint_singularity():
    res = integrate(lambda x: 1 / np.sqrt(x), 0.0, 1.0, atol=1e-6)
    assert res.value == pytest.approx(2.0, abs=1e-7)
    # the last panel near 0 cannot shrink below the minimum width
    with pytest.raises(QuadratureError) as err:
        integrate(lambda x: 1 / np.sqrt(x), 0.0, 1.0, atol=1e-10)
    assert err.value.achieved > 1e-10


def test_gaussian_mass():
    res = integrate(lambda x: np.exp(-x * x), -12.0, 12.0, atol=1e-14)
    assert res.value == pytest.approx(math.sqrt(math.pi), rel=1e-14)


def test_reports_non_convergence():
    with pytest.raises(QuadratureError):
        integrate(lambda x: np.sin(1 / np.maximum(x, 1e-300)), 0.0, 1.0, atol=1e-14, max_panels=50)


def test_batch_matches_scalar():
    c = np.array([0.5, 1.0, 2.0, 4.0])
    f = lambda idx, y: np.exp(-c[idx][:, None] * y * y)  # noqa: E731
    vals, errs = integrate_batch(f, np.full(4, -3.0), np.full(4, 3.0), atol=1e-13)
    for i, ci in enumerate(c):
        ref = math.sqrt(math.pi / ci) * math.erf(3 * math.sqrt(ci))
        assert vals[i] == pytest.approx(ref, rel=1e-12)
    assert np.all(errs <= 1e-12)
