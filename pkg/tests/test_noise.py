import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatwave import noise as N
from heatwave.errors import AlignmentError, CapacityError


def test_philox_known_answers(oracle):
    for row in oracle["philox_kat"]:
        out = N.philox4x32(np.array(row["ctr"], dtype=np.uint64), np.array(row["key"], dtype=np.uint64))
        assert out.tolist() == row["out"]


def test_same_seed_same_field():
    a = N.make_noise(11, 1.0, 0.125, 0.01, 0.05).values()
    b = N.make_noise(11, 1.0, 0.125, 0.01, 0.05).values()
    c = N.make_noise(12, 1.0, 0.125, 0.01, 0.05).values()
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_moments_of_a_million():
    z = N.normals(2024, 0, -500_000, 1_000_000)
    assert abs(z.mean()) <= 4e-3
    assert abs(z.var() - 1.0) <= 0.01


def test_random_access_matches_block():
    full = N.normals(5, 3, -40, 80, stream=(2, 1))
    part = N.normals(5, 3, -13, 29, stream=(2, 1))
    assert np.array_equal(full[27:56], part)


@given(st.integers(0, 2 ** 64 - 1), st.integers(0, 1000), st.integers(-1000, 1000), st.integers(1, 40))
def test_windows_are_consistent(seed, step, k0, n):
    wide = N.normals(seed, step, k0 - 3, n + 6)
    assert np.array_equal(wide[3:3 + n], N.normals(seed, step, k0, n))


def test_block_rows_equal_single_streams():
    streams = np.array([[0, 0], [1, 0], [7, 3]])
    blk = N.normals_block(9, 4, -10, 20, streams)
    for r, s in enumerate(streams):
        assert np.array_equal(blk[r], N.normals(9, 4, -10, 20, stream=tuple(s)))


def test_restriction_identity_and_composition():
    master = N.make_noise(3, 4.0, 0.25, 0.0625, 0.25)
    same = N.restrict_noise(master, 4.0)
    assert np.array_equal(same.values(), master.values())
    nested = N.restrict_noise(N.restrict_noise(master, 2.0), 1.0)
    assert np.array_equal(nested.values(), N.restrict_noise(master, 1.0).values())


def test_restricted_cells_bit_equal():
    master = N.make_noise(3, 4.0, 0.25, 0.0625, 0.25)
    full = master.values()
    for L in (1.0, 2.0, 4.0):
        sub = N.restrict_noise(master, L).values()
        off = (master.n_half - sub.shape[1]) // 2
        assert np.array_equal(sub, full[:, off:off + sub.shape[1]])


def test_cell_increment_scaling():
    f = N.make_noise(1, 1.0, 0.5, 0.25, 0.5)
    assert np.allclose(f.cell_increment(1), f.block(1) * np.sqrt(0.25 * 0.5 / 2), rtol=0, atol=0)


def test_errors():
    with pytest.raises(CapacityError):
        N.make_noise(2 ** 64, 1.0, 0.5, 0.25, 0.5)
    with pytest.raises(CapacityError):
        N.normals(0, 2 ** 32, 0, 4)
    with pytest.raises(AlignmentError):
        N.make_noise(0, 1.0, 0.3, 0.25, 0.5)
    master = N.make_noise(0, 2.0, 0.25, 0.25, 0.5)
    with pytest.raises(AlignmentError):
        N.restrict_noise(master, 1.1)
    with pytest.raises(AlignmentError):
        N.restrict_noise(master, 3.0)
