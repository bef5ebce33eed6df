#!/usr/bin/env python3
"""
Tests for the counter-based Brownian paths and the stochastic convolution
"""

import math
import sys
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from catalog import build_model
from noise import (IndexSpaceOverflowError, StepRatioError, generate, initial_field, ou_coefficients,
                   past_increments, past_slow_path, slow_rescale, standard_normals,
                   stochastic_convolution)
from utils import loglog_slope

SEED = 123456789


def test_regeneration_is_bit_exact():
    model = build_model("allen-cahn", 8)
    a = generate(SEED, 4, 1e-2, 500, model)
    b = generate(SEED, 4, 1e-2, 500, model)
    assert_array_equal(a.increments, b.increments)


def test_windows_do_not_depend_on_chunking():
    path = generate(SEED, 0, 1e-2, 1000, np.ones(3))
    full = path.normals()
    for start, stop in [(0, 1), (37, 60), (3, 999), (512, 1000)]:
        assert_array_equal(path.normals(start, stop), full[start:stop])


def test_samples_are_uncorrelated():
    a = standard_normals(SEED, 0, 0, 0, 0, 10_000)
    b = standard_normals(SEED, 1, 0, 0, 0, 10_000)
    c = standard_normals(SEED, 0, 1, 0, 0, 10_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.05
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.05


def test_increment_variance():
    dt, n = 1e-2, 20_000
    q = np.array([1.0, 0.5, 2.0])
    inc = generate(SEED, 2, dt, n, q).increments
    se = math.sqrt(2.0 / n)
    for mode in range(3):
        ratio = np.var(inc[:, mode]) / (q[mode] * dt)
        assert abs(ratio - 1.0) < 5 * se


def test_silent_mode_has_zero_column():
    model = build_model("surface-growth", 6)
    inc = generate(SEED, 0, 1e-2, 200, model).increments
    assert np.all(inc[:, 0] == 0.0)
    assert np.any(inc[:, 1] != 0.0)


def test_index_space_overflow():
    with pytest.raises(IndexSpaceOverflowError):
        generate(SEED, 0, 1e-3, 2 ** 63, np.ones(2))
    with pytest.raises(IndexSpaceOverflowError):
        standard_normals(SEED, 0, 0, 0, -1, 5)


def test_invalid_step():
    with pytest.raises(ValueError):
        generate(SEED, 0, 0.0, 10, np.ones(2))
    with pytest.raises(ValueError):
        generate(SEED, 0, 1e-3, 0, np.ones(2))


def test_slow_rescale_identity():
    path = generate(SEED, 0, 1e-2, 100, np.ones(4))
    slow = slow_rescale(path, 1.0, 0)
    assert_array_equal(slow.increments, path.increments[:, 0])
    assert slow.dT == pytest.approx(1e-2)


def test_slow_rescale_telescoping():
    path = generate(SEED, 1, 1e-2, 1200, np.ones(4))
    slow = slow_rescale(path, 0.1, 0, fast_per_slow=4)
    assert slow.n_steps == 300
    assert slow.dT == pytest.approx(4 * 1e-2 * 0.01)
    assert slow.increments.sum() == pytest.approx(0.1 * path.increments[:, 0].sum(), abs=1e-12)
    assert slow.brownian()[-1] == pytest.approx(slow.increments.sum(), abs=1e-12)


def test_slow_rescale_step_ratio():
    path = generate(SEED, 0, 1e-2, 10, np.ones(2))
    with pytest.raises(StepRatioError):
        slow_rescale(path, 0.1, 0, fast_per_slow=3)
    with pytest.raises(ValueError):
        slow_rescale(path, 0.0, 0)


def test_slow_brownian_variance():
    eps, samples = 0.1, 10_000
    ends = np.array([slow_rescale(generate(SEED, s, 1.0, 100, np.ones(1)), eps, 0).increments.sum()
                     for s in range(samples)])
    se = math.sqrt(2.0 / samples)
    assert abs(np.var(ends) - 1.0) < 5 * se


def test_past_extends_at_its_start():
    short = past_increments(SEED, [0, 1], 0, 1.0, 1e-2, 5)
    long = past_increments(SEED, [0, 1], 0, 1.0, 1e-2, 10)
    assert_array_equal(long[5:], short)
    single = past_slow_path(SEED, 1, 0, 1.0, 1e-2, 5)
    assert_array_equal(single.increments, short[:, 1])


def test_ou_coefficients():
    rates = np.array([0.0, -3.0])
    decay, std = ou_coefficients(rates, 0.1, np.array([2.0, 1.0]))
    assert decay[0] == 1.0
    assert std[0] == pytest.approx(math.sqrt(0.2))
    assert decay[1] == pytest.approx(math.exp(-0.3))
    assert std[1] == pytest.approx(math.sqrt((1 - math.exp(-0.6)) / 6))


def test_convolution_without_noise():
    model = build_model("allen-cahn", 6)
    path = generate(SEED, 0, 1e-2, 100, np.zeros(6))
    assert np.all(stochastic_convolution(path, model) == 0.0)


def test_kernel_convolution_is_brownian():
    model = build_model("allen-cahn", 6)
    path = generate(SEED, 0, 1e-2, 2000, model)
    Z = stochastic_convolution(path, model)
    assert_allclose(Z[1:, 0], np.cumsum(path.increments[:, 0]), atol=1e-12)
    assert np.all(Z[0] == 0.0)


def test_stationary_variance():
    model = build_model("allen-cahn", 4)
    path = generate(SEED, 0, 1e-2, 500_000, model)
    Z = stochastic_convolution(path, model)[1000:]
    for k in (1, 2):
        expected = 1.0 / (2 * abs(model.eigenvalues[k]))
        assert np.var(Z[:, k]) == pytest.approx(expected, rel=0.05)


def test_stable_convolution_grows_slowly():
    model = build_model("allen-cahn", 8)
    horizons = [1.0, 10.0, 100.0]
    sups = []
    for T in horizons:
        values = []
        for s in range(20):
            path = generate(SEED, s, 1e-2, int(round(T / 1e-2)), model)
            Z = model.basis.stable_part(stochastic_convolution(path, model))
            values.append(np.max(np.linalg.norm(Z, axis=-1)))
        sups.append(np.median(values))
    assert loglog_slope(horizons, sups) < 0.25


def test_initial_field():
    u = initial_field(SEED, 3, 16)
    assert np.linalg.norm(u) <= 1.0
    assert_array_equal(u, initial_field(SEED, 3, 16))
    assert not np.array_equal(u, initial_field(SEED, 4, 16))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
