import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcovmat.rank import CalibrationTable, calibrate_dn, eigen_ratios, estimate_rank, trim_eigenvalues


def test_hand_example():
    est = estimate_rank([10, 5, 1.01, 1.00, 0.99], 0.05)
    assert est.ratios == pytest.approx((0.5, 0.202, 1.00 / 1.01, 0.99))
    assert est.m_hat == 2 and not est.capped


def test_equal_eigenvalues_give_zero():
    assert estimate_rank([3.0] * 6, 0.1).m_hat == 0


def test_cap_flag():
    eigs = 2.0 ** -np.arange(30.0)
    est = estimate_rank(eigs, 0.1, cap=20)
    assert est.capped and est.m_hat == 20 and len(est.ratios) == 20


def test_trailing_zeros_trimmed():
    eigs = [8.0, 2.0, 1.9, 1.8, 1e-14, 0.0]
    assert trim_eigenvalues(eigs).tolist() == [8.0, 2.0, 1.9, 1.8]
    assert estimate_rank(eigs, 0.1).m_hat == 1


def test_needs_two_positive():
    with pytest.raises(ValueError):
        estimate_rank([1.0, 0.0], 0.1)
    with pytest.raises(ValueError):
        estimate_rank([1.0, 0.5], 1.5)


def test_ratio_helper():
    assert eigen_ratios([4.0, 2.0, 1.0], 2).tolist() == [0.5, 0.5]
    with pytest.raises(ValueError):
        eigen_ratios([4.0, 2.0], 2)


positive_spectra = st.lists(st.floats(1e-3, 1e3), min_size=3, max_size=30).map(lambda v: sorted(v, reverse=True))


@settings(max_examples=80, deadline=None)
@given(positive_spectra, st.floats(0.01, 0.9), st.floats(1e-3, 1e3))
def test_scale_invariance(eigs, d_n, c):
    a = estimate_rank(eigs, d_n)
    b = estimate_rank([c * e for e in eigs], d_n)
    assert a.m_hat == b.m_hat


@settings(max_examples=80, deadline=None)
@given(positive_spectra, st.floats(0.01, 0.9), st.floats(0.01, 0.9))
def test_monotone_in_dn(eigs, d1, d2):
    lo, hi = sorted((d1, d2))
    assert estimate_rank(eigs, hi).m_hat <= estimate_rank(eigs, lo).m_hat


@settings(max_examples=80, deadline=None)
@given(positive_spectra, st.floats(0.01, 0.9))
def test_ratios_in_unit_interval(eigs, d_n):
    est = estimate_rank(eigs, d_n)
    assert all(0 < r <= 1 for r in est.ratios)


def test_calibration_deterministic_and_cached(tmp_path):
    a = calibrate_dn(120, 12, 24, replicates=200, seed=3)
    b = calibrate_dn(120, 12, 24, replicates=200, seed=3, threads=3, cache_dir=tmp_path)
    assert a == b
    assert a.quantile <= 0
    assert a.d_n == pytest.approx(120 ** (-2 / 3) * abs(a.quantile))
    files = list(tmp_path.iterdir())
    assert len(files) == 1
    assert CalibrationTable.from_dict(json.loads(files[0].read_text())) == a
    assert calibrate_dn(120, 12, 24, replicates=200, seed=3, cache_dir=tmp_path) == a


def test_calibration_needs_enough_replicates():
    with pytest.raises(ValueError):
        calibrate_dn(50, 5, 10, replicates=100)


@pytest.mark.slow
def test_dn_shrinks_with_n():
    small = calibrate_dn(200, 20, 40, replicates=400, seed=1)
    large = calibrate_dn(400, 40, 80, replicates=400, seed=1)
    assert 0.5 <= large.d_n / small.d_n <= 0.8
