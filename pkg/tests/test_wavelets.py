import math

import numpy as np
import pytest
import pywt
from hypothesis import given
import hypothesis.strategies as st

from copula_wavelet.errors import InvalidFilterError
from copula_wavelet.wavelets import (
    SQRT2,
    WAVELET_IDS,
    cascade_refine,
    check_basis,
    get_wavelet,
    gram_matrix,
    integral,
    left_limit,
    partition_of_unity,
    periodize,
    phi_jk,
    theta_bound,
    theta_phi,
    two_scale_residual,
)


def test_haar_is_right_open_indicator(haar):
    assert haar.eval(0.0) == 1.0
    assert haar.eval(0.5) == 1.0
    assert haar.eval(1.0) == 0.0
    assert haar.eval(-0.1) == 0.0


def test_haar_table_values():
    table = cascade_refine([1 / SQRT2, 1 / SQRT2], 3)
    assert len(table.values) == 9
    assert np.all(table.values[:-1] == 1.0)
    assert table.values[-1] == 0.0


def test_cascade_rejects_unnormalized_filter():
    with pytest.raises(InvalidFilterError):
        cascade_refine([0.5, 0.5])


def test_cascade_rejects_level_zero():
    with pytest.raises(ValueError):
        cascade_refine([1 / SQRT2, 1 / SQRT2], 0)


@pytest.mark.parametrize("order", [2, 3, 4])
def test_daubechies_filter_comes_from_pywavelets(order):
    w = get_wavelet(f"db{order}")
    np.testing.assert_array_equal(w.filter, np.array(pywt.Wavelet(f"db{order}").rec_lo))
    assert w.support_end == 2 * order - 1
    assert len(w.table.values) == w.support_end * 2 ** 12 + 1


def test_db2_integer_values(db2):
    assert db2.eval(0.0) == pytest.approx(0.0, abs=1e-12)
    assert db2.eval(1.0) == pytest.approx((1 + math.sqrt(3)) / 2, abs=1e-10)
    assert db2.eval(2.0) == pytest.approx((1 - math.sqrt(3)) / 2, abs=1e-10)
    assert db2.eval(3.0) == 0.0


def test_db2_integral_and_partition_of_unity(db2):
    assert integral(db2) == pytest.approx(1.0, abs=1e-6)
    assert partition_of_unity(db2, 0.37) == pytest.approx(1.0, abs=1e-6)


def test_two_scale_residual(haar, db2):
    assert two_scale_residual(haar) == 0.0
    assert two_scale_residual(db2) <= 1e-8


def test_phi_jk_haar_example(haar):
    assert phi_jk(haar, 2, 2, 0.3) == 2.0
    assert phi_jk(haar, 2, 1, 0.3) == 0.0
    assert phi_jk(haar, 1, 2, 1.0) == pytest.approx(SQRT2)


@pytest.mark.parametrize("k", [0, 5])
def test_phi_jk_rejects_translate_out_of_range(haar, k):
    with pytest.raises(ValueError):
        phi_jk(haar, 2, k, 0.5)


def test_phi_jk_matches_direct_periodic_sum(db2):
    u = np.linspace(0.0, 0.999, 37)
    j, k = 2, 3
    direct = sum(db2.eval(4 * u - (k - 1) + 4 * m) for m in range(-2, 3))
    np.testing.assert_allclose(phi_jk(db2, j, k, u), 2.0 * direct, atol=1e-12)


def test_periodize_wraps_support(db2):
    t = np.array([0.25, 1.25, 1.5])
    expected = db2.eval(t) + db2.eval(t + 2.0)
    np.testing.assert_allclose(periodize(db2, t, 2), expected, atol=1e-14)


def test_left_limit_only_moves_one():
    out = left_limit([0.0, 0.5, 1.0])
    assert out[0] == 0.0 and out[1] == 0.5
    assert out[2] < 1.0 and out[2] == np.nextafter(1.0, 0.0)


@given(st.floats(min_value=0.0, max_value=100.0, allow_nan=False))
def test_theta_phi_is_one_for_haar(x):
    assert theta_phi(get_wavelet("haar"), x) == 1.0


def test_theta_phi_db2_is_bounded(db2):
    x = np.linspace(0.0, 1.0, 1001)
    values = theta_phi(db2, x)
    assert values.min() >= 1.0 - 1e-9
    assert values.max() <= theta_bound(db2) + 1e-9


def test_haar_gram_is_exactly_identity(haar):
    np.testing.assert_array_equal(gram_matrix(haar, 3), np.eye(8))


def test_db2_gram_is_close_to_identity(db2):
    gram = gram_matrix(db2, 3)
    assert np.abs(gram - np.eye(8)).max() <= 5e-4


@pytest.mark.parametrize("name", WAVELET_IDS)
def test_check_basis_passes(name):
    checks = check_basis(get_wavelet(name))
    failed = [c.name for c in checks if not c.passed]
    assert not failed


@pytest.mark.parametrize("name", ["db5", "sym4", "coif1"])
def test_unknown_wavelets_are_rejected(name):
    with pytest.raises(ValueError):
        get_wavelet(name)
