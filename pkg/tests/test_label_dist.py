import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordac.errors import ConfigurationError, DimensionError
from ordac.label_dist import (LabelDistribution, confidence, discretize, discretize_many, expected_rank,
                              kl_divergence)


def test_discretize_symmetric_about_integer_mean():
    p = discretize(LabelDistribution(1.0, 0.75), 3)
    side = math.exp(-1 / 1.125)
    np.testing.assert_allclose(p, np.array([side, 1.0, side]) / (1 + 2 * side), atol=1e-12)
    assert p[1] > p[0] and p[0] == p[2]


def test_discretize_degenerate_sigma():
    np.testing.assert_allclose(discretize(LabelDistribution(0.0, 0.01), 5), [1, 0, 0, 0, 0], atol=1e-6)


def test_discretize_half_rank_mean():
    # frozen from a scalar evaluation of exp(-(c-2.5)^2/2) / sum
    expected = [0.017873361003131354, 0.13206726712857697, 0.3589960523698574,
                0.3589960523698574, 0.13206726712857697]
    p = discretize(LabelDistribution(2.5, 1.0), 5)
    np.testing.assert_allclose(p, expected, atol=1e-12)
    assert p[2] == pytest.approx(p[3], abs=1e-15)


def test_discretize_rejects_single_rank():
    with pytest.raises(ConfigurationError):
        discretize(LabelDistribution(0.0, 1.0), 1)


@pytest.mark.parametrize("probs, expected", [
    ([1, 0, 0], 0.0),
    ([0.25, 0.5, 0.25], 1.0),
    ([0.1, 0.2, 0.3, 0.4], 2.0),
])
def test_expected_rank(probs, expected):
    assert expected_rank(probs) == pytest.approx(expected, abs=1e-12)


def test_kl_examples():
    assert kl_divergence([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == pytest.approx(0.0, abs=1e-9)
    assert kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(0.6931471805599453, abs=1e-6)
    assert kl_divergence([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.5108256237659907, abs=1e-6)


def test_kl_length_mismatch():
    with pytest.raises(DimensionError):
        kl_divergence([0.5, 0.5], [1 / 3] * 3)


@pytest.mark.parametrize("probs, gamma", [
    ([1 / 3] * 3, 0.0),
    ([0, 1, 0], 1.0),
    ([0.7, 0.2, 0.1], 0.27015330083790257),
])
def test_confidence(probs, gamma):
    assert float(confidence(probs)) == pytest.approx(gamma, abs=1e-6)


dist_params = st.tuples(st.integers(2, 12), st.floats(0, 1), st.floats(0.01, 5.0))


@given(dist_params)
def test_discretize_normalized_and_unimodal(params):
    C, frac, sigma = params
    mu = frac * (C - 1)
    p = discretize(LabelDistribution(mu, sigma), C)
    assert abs(p.sum() - 1) < 1e-9
    mode = int(np.argmax(p))
    assert np.all(np.diff(p[: mode + 1]) >= -1e-15)
    assert np.all(np.diff(p[mode:]) <= 1e-15)


@given(st.integers(2, 12), st.floats(0.01, 5.0))
def test_discretize_mode_at_rounded_mean(C, sigma):
    # integer means keep the mode unambiguous
    for mu in range(C):
        assert int(np.argmax(discretize(LabelDistribution(float(mu), sigma), C))) == mu


@given(st.integers(2, 12), st.floats(0.01, 5.0))
def test_expected_rank_exact_at_centre(C, sigma):
    mu = (C - 1) / 2
    assert expected_rank(discretize(LabelDistribution(mu, sigma), C)) == pytest.approx(mu, abs=1e-3)


@pytest.mark.parametrize("C", [4, 5, 8])
@pytest.mark.parametrize("sigma", [0.5, 0.6, 0.75])
def test_expected_rank_tracks_mean(C, sigma):
    for mu in np.linspace(1, C - 2, 7):
        assert abs(expected_rank(discretize(LabelDistribution(mu, sigma), C)) - mu) < 0.1


def _scalar_expected_rank(mu, sigma, C):
    w = [math.exp(-((c - mu) ** 2) / (2 * sigma**2)) for c in range(C)]
    return sum(c * x for c, x in enumerate(w)) / sum(w)


@pytest.mark.parametrize("C", [4, 5, 8])
def test_truncation_bias_at_unit_sigma(C):
    # at sigma=1 the boundary ranks lose ~0.13 of a rank toward the centre
    for mu in np.linspace(1, C - 2, 7):
        got = expected_rank(discretize(LabelDistribution(mu, 1.0), C))
        assert got == pytest.approx(_scalar_expected_rank(mu, 1.0, C), abs=1e-12)
        assert abs(got - mu) < 0.15
        assert (got - mu) * (mu - (C - 1) / 2) <= 1e-12


def test_narrow_distribution_snaps_to_nearest_rank():
    # integer support cannot represent sub-rank offsets once sigma << 1
    got = expected_rank(discretize(LabelDistribution(1.2, 0.2), 4))
    assert abs(got - 1.0) < abs(got - 1.2)


def _normalized(x):
    x = np.asarray(x, dtype=float) + 1e-3
    return x / x.sum()


probs = st.lists(st.floats(0, 1), min_size=2, max_size=8)


@given(probs, probs)
@settings(max_examples=200)
def test_kl_non_negative(a, b):
    n = min(len(a), len(b))
    p, q = _normalized(a[:n]), _normalized(b[:n])
    assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-9)
    assert kl_divergence(p, q) >= -1e-9


def test_discretize_many_matches_scalar():
    mu = np.array([0.0, 1.3, 4.0])
    sigma = np.array([0.5, 2.0, 0.01])
    batch = discretize_many(mu, sigma, 5)
    for i in range(3):
        np.testing.assert_allclose(batch[i], discretize(LabelDistribution(mu[i], sigma[i]), 5))
