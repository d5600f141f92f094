import numpy as np
import pytest

import mls
from utils import ChartError, ConfigError


def test_make_series_constant():
    f = mls.make_series(1, 0, [[[1]]])
    assert f.rank == 1 and f.lead == 0 and len(f) == 1
    np.testing.assert_array_equal(mls.coefficient(f, 0), [[1]])


def test_make_series_keeps_interior_zeros():
    f = mls.make_series(1, -1, [1, 0, 1])
    assert f.lead == -1 and len(f) == 3
    np.testing.assert_array_equal(mls.coefficient(f, 0), [[0]])


def test_make_series_trims_ends():
    f = mls.make_series(1, -2, [0, 1, 0, 2, 0])
    assert f.lead == -1 and f.last == 1


def test_zero_series_normalized():
    f = mls.make_series(2, 3, [np.zeros((2, 2))])
    assert f.is_zero() and f.lead == 0 and len(f) == 1
    assert f == mls.zero_series(2)


@pytest.mark.parametrize('coeffs', [[], None])
def test_make_series_empty(coeffs):
    with pytest.raises(ConfigError):
        mls.make_series(1, 0, coeffs)


def test_make_series_mismatched_rank():
    with pytest.raises(ConfigError, match='coeffs\\[1\\]'):
        mls.make_series(2, 0, [np.eye(2), np.eye(3)])


def test_make_series_non_square():
    with pytest.raises(ConfigError):
        mls.make_series(2, 0, [np.ones((2, 3))])


def test_coefficients_read_only():
    f = mls.identity_series(2)
    with pytest.raises(ValueError):
        f.coeffs[0, 0, 0] = 5


@pytest.mark.parametrize('r, expected', [(-1, 1), (0, 0), (1, 1), (7, 0), (-5, 0)])
def test_coefficient(r, expected):
    f = mls.scalar_series(-1, [1, 0, 1])
    np.testing.assert_array_equal(mls.coefficient(f, r), [[expected]])


def test_coefficient_returns_supplied_matrices(rng):
    mats = [rng.randn(3, 3) + 1j * rng.randn(3, 3) for _ in range(4)]
    f = mls.make_series(3, -2, mats)
    for r, mat in zip(range(-2, 2), mats):
        np.testing.assert_array_equal(mls.coefficient(f, r), mat)


def test_evaluate():
    f = mls.scalar_series(-1, [1, 0, 1])
    np.testing.assert_allclose(mls.evaluate(f, 2), [[2.5]])


def test_evaluate_identity():
    np.testing.assert_allclose(mls.evaluate(mls.identity_series(2), 1j), np.eye(2))


def test_evaluate_pole():
    with pytest.raises(ChartError):
        mls.evaluate(mls.scalar_series(-1, [1]), 0)


def test_evaluate_at_zero_regular():
    f = mls.scalar_series(0, [3, 5])
    np.testing.assert_allclose(mls.evaluate(f, 0), [[3]])


def test_evaluate_matches_term_sum(rng):
    mats = [rng.randn(2, 2) + 1j * rng.randn(2, 2) for _ in range(9)]
    f = mls.make_series(2, -4, mats)
    zs = np.exp(2j * np.pi * rng.uniform(size=16))
    values = mls.evaluate_many(f, zs)
    for z, value in zip(zs, values):
        expected = sum(mls.coefficient(f, r) * z ** r for r in range(-4, 5))
        np.testing.assert_allclose(value, expected, rtol=1e-12)
        np.testing.assert_allclose(mls.evaluate(f, z), expected, rtol=1e-12)


def test_evaluate_many_shape():
    f = mls.identity_series(3, power=1)
    assert mls.evaluate_many(f, np.ones((4, 5))).shape == (4, 5, 3, 3)


@pytest.mark.parametrize('A, B, expected', [
    (np.eye(2), np.eye(2), 2),
    (np.diag([1j, -1j]), np.eye(2), 0),
    ([[2 + 1j]], [[3]], 6 - 3j),
])
def test_trace_pair(A, B, expected):
    assert mls.trace_pair(A, B) == pytest.approx(expected)


def test_trace_pair_rank_mismatch():
    with pytest.raises(ConfigError):
        mls.trace_pair(np.eye(2), np.eye(3))


def test_trace_pair_properties(rng):
    for _ in range(20):
        A = rng.randn(3, 3) + 1j * rng.randn(3, 3)
        B = rng.randn(3, 3) + 1j * rng.randn(3, 3)
        assert mls.trace_pair(A, B) == pytest.approx(np.conj(mls.trace_pair(B, A)), rel=1e-14)
        aa = mls.trace_pair(A, A)
        assert abs(aa.imag) <= 1e-14 * aa.real and aa.real >= 0
        assert aa.real == pytest.approx(np.linalg.norm(A, 'fro') ** 2, rel=1e-14)


def test_arithmetic():
    f = mls.scalar_series(-1, [1, 2])
    g = mls.scalar_series(0, [-2, 3])
    h = f + g
    assert h.lead == -1 and h.last == 1
    np.testing.assert_array_equal(mls.coefficient(h, 0), [[0]])
    np.testing.assert_array_equal(mls.coefficient(h, 1), [[3]])
    assert (f - f).is_zero()
    assert (2 * f) == mls.scalar_series(-1, [2, 4])
    assert (-f) == f * -1


def test_add_rank_mismatch():
    with pytest.raises(ConfigError):
        mls.identity_series(1) + mls.identity_series(2)


def test_max_exponent_and_norm():
    f = mls.make_series(2, -3, [np.eye(2), np.zeros((2, 2)), 2 * np.eye(2)])
    assert mls.max_exponent(f) == 3
    assert mls.coefficient_norm(f) == pytest.approx(2 * np.sqrt(2))
    assert mls.max_exponent(mls.zero_series(1)) == 0


def test_json_codec(tmp_path, rng):
    f = mls.make_series(2, -1, [rng.randn(2, 2) + 1j * rng.randn(2, 2) for _ in range(3)])
    path = str(tmp_path / 'f.json')
    mls.save_series(path, f)
    assert mls.load_series(path) == f


@pytest.mark.parametrize('obj, field', [
    ({'lead': 0, 'coeffs': [[[[1, 0]]]]}, 'rank'),
    ({'rank': 1, 'lead': 'x', 'coeffs': [[[[1, 0]]]]}, 'lead'),
    ({'rank': 1, 'lead': 0, 'coeffs': [[[[1, 0, 2]]]]}, 'coeffs[0][0][0]'),
    ({'rank': 2, 'lead': 0, 'coeffs': [[[[1, 0]]]]}, 'coeffs[0]'),
    ({'rank': 1, 'lead': 0, 'coeffs': []}, 'coeffs'),
])
def test_series_from_json_names_field(obj, field):
    with pytest.raises(ConfigError) as excinfo:
        mls.series_from_json(obj)
    assert field in str(excinfo.value)
