"""
Tests for moving-average generation, grouped data and the Gaussian window
"""

import math

import numpy as np
import pytest
from scipy import stats

from distributions import Deterministic, Gaussian, RandomStream, StudentT
from errors import DegenerateSampleError, ModelError, ParameterError
from process_models import (GroupData, WeightProfile, ar_truncated_weights, autocovariance, build_window_model,
                            c_coefficients, equal_weights, generate_groups, generate_ma, generate_ma_batch,
                            generate_t_stat_batch, group_mean_stats, group_t_stats, sample_window_conditional,
                            t_statistics)


def test_weight_profile_validation():
    with pytest.raises(ParameterError):
        WeightProfile((), ())
    with pytest.raises(ParameterError):
        WeightProfile.from_values([0.0, 0.0])
    with pytest.raises(ParameterError):
        WeightProfile((1, 0), (1.0, 1.0))
    with pytest.raises(ParameterError):
        equal_weights(0)


def test_weight_profile_dense_and_span():
    weights = WeightProfile.from_dict({-1: 2.0, 2: 1.0})
    assert weights.span == 4
    assert list(weights.dense()) == [2.0, 0.0, 0.0, 1.0]
    assert weights.as_dict() == {-1: 2.0, 2: 1.0}


def test_moving_average_with_stub_errors():
    series = generate_ma(WeightProfile.from_values([1.0, 1.0]), Deterministic((1, 2, 3, 4)), 3, None)
    assert list(series) == [3.0, 5.0, 7.0]


def test_moving_average_is_reproducible():
    weights = equal_weights(3)
    a = generate_ma(weights, StudentT(3.0), 500, RandomStream(11, 2))
    b = generate_ma(weights, StudentT(3.0), 500, RandomStream(11, 2))
    assert a.shape == (500,)
    assert np.array_equal(a, b)


def test_moving_average_covariance():
    weights = equal_weights(3).scaled(1 / math.sqrt(3))
    x = generate_ma_batch(weights, Gaussian(), 50, 4000, RandomStream(5))
    lag0 = np.mean(x[:, 10] * x[:, 10])
    lag1 = np.mean(x[:, 10] * x[:, 11])
    lag3 = np.mean(x[:, 10] * x[:, 13])
    assert lag0 == pytest.approx(autocovariance(weights, 1.0, 0), abs=0.08)
    assert lag1 == pytest.approx(2 / 3, abs=0.08)
    assert lag3 == pytest.approx(0.0, abs=0.08)


def test_autocovariance():
    weights = equal_weights(3)
    assert autocovariance(weights, 1.0, 1) == 2.0
    assert autocovariance(weights, 2.0, -2) == 2.0
    assert autocovariance(weights, 1.0, 3) == 0.0


def test_t_statistics():
    t = t_statistics(np.array([[1.0, 2.0, 3.0]]))
    assert t[0] == pytest.approx(math.sqrt(3) * 2 / math.sqrt(2 / 3))
    with pytest.raises(DegenerateSampleError) as excinfo:
        t_statistics(np.array([[1.0, 2.0], [4.0, 4.0]]))
    assert excinfo.value.row == 1


def test_groups_carry_the_mean_vector():
    mu = np.zeros(20)
    mu[3] = 100.0
    data = generate_groups(equal_weights(2), Gaussian(), 20, 5, mu, RandomStream(3))
    assert data.values.shape == (20, 5)
    assert data.nu == 20 and data.n == 5
    means = group_mean_stats(data)
    assert np.argmax(means) == 3
    assert group_t_stats(data).shape == (20,)
    with pytest.raises(ParameterError):
        GroupData(np.zeros((3, 1)), np.zeros(3))


def test_t_stat_batch_shape():
    y = generate_t_stat_batch(equal_weights(3), StudentT(4.0), 40, 10, 3, RandomStream(9))
    assert y.shape == (3, 40)
    assert np.all(np.isfinite(y))


def test_truncated_weights_have_unit_norm():
    weights = ar_truncated_weights(2, (1.0, 1.0), 0.1)
    assert weights.offsets == (-2, -1, 0)
    assert weights.sum_of_squares() == pytest.approx(1.0)
    flat = ar_truncated_weights(2, (1.0, 1.0), 0.0)
    assert flat.values == pytest.approx((1 / math.sqrt(3),) * 3)
    with pytest.raises(ParameterError):
        ar_truncated_weights(2, (1.0,), 0.1)


def test_c_coefficients():
    assert c_coefficients((1.0,)) == pytest.approx((0.5, 0.5))
    assert c_coefficients((0.0, 0.0)) == (0.0, 0.0, 0.0, 0.0)


def test_window_model_rejects_bad_inputs():
    with pytest.raises(ModelError):
        build_window_model(1, (0.5,), 0.01)
    with pytest.raises(ModelError):
        build_window_model(1, (0.5, -0.5), 0.01)
    with pytest.raises(ModelError):
        build_window_model(1, (0.5, 0.5), 0.0)


def test_window_conditional_sampler():
    model = build_window_model(1, (0.5, 0.5), 0.05)
    x0, neighbors = sample_window_conditional(model, 4.0, RandomStream(1), 5000)
    assert x0.shape == (5000,)
    assert neighbors.shape == (5000, 2)
    assert x0.min() > 4.0
    # E[X_1 | X_0] = (1 - c_1 delta) X_0
    slope = np.sum(neighbors[:, 1] * x0) / np.sum(x0 * x0)
    assert slope == pytest.approx(1 - 0.5 * 0.05, abs=0.01)


def test_adjacent_group_rows_are_half_correlated():
    data = generate_groups(equal_weights(2), Gaussian(), 2000, 20, np.zeros(2000), RandomStream(31))
    corr = np.corrcoef(data.values[:-1].ravel(), data.values[1:].ravel())[0, 1]
    assert corr == pytest.approx(0.5, abs=0.03)


def test_t_statistic_is_rescaled_textbook_t():
    values = np.random.default_rng(5).normal(size=(4, 8))
    textbook = stats.ttest_1samp(values, 0.0, axis=1).statistic
    assert t_statistics(values) == pytest.approx(textbook * math.sqrt(8 / 7))


def test_group_means_match_moving_average_of_stub():
    weights = WeightProfile.from_values([1.0, 2.0])
    stub = Deterministic((1, 2, 3, 4, 5, 6))
    data = generate_groups(weights, stub, 5, 4, np.zeros(5), None)
    expected = math.sqrt(4) * generate_ma(weights, stub, 5, None)
    assert group_mean_stats(data) == pytest.approx(expected)


def test_sigma1_for_radius_one():
    model = build_window_model(1, (0.5, 0.5), 0.05)
    assert model.sigma1 == pytest.approx(np.array([[1.0, 0.5], [0.5, 1.0]]))


def test_sigma1_must_be_positive_semidefinite():
    # off-diagonal 0.1 + 0.1 - 1.0 gives eigenvalues 0.2 +- 0.8
    with pytest.raises(ModelError):
        build_window_model(1, (0.1, 1.0), 0.01)


def test_untruncated_window_has_model_covariance():
    model = build_window_model(1, (0.5, 0.5), 0.05)
    x0, neighbors = sample_window_conditional(model, -40.0, RandomStream(32), 50_000)
    window = np.column_stack([neighbors, x0])
    assert np.cov(window, rowvar=False) == pytest.approx(model.window_cov, abs=0.03)
    assert np.mean(neighbors[:, 0] * x0) == pytest.approx(1 - 0.5 * 0.05, abs=0.03)
