#!/usr/bin/env python3
"""
Tests for the exponential-Euler SPDE engine, its variation equation and FTLEs
"""

import math
import sys
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from amplitude import HorizonMismatchError
from catalog import build_model, random_field
from models import FtleMethod
from noise import StepRatioError, generate
from spde import (SpdeParams, approximation_error, integrate_spde, integrate_variation,
                  largest_singular_values, linearization_error, monodromy, power_iteration_sigma_max,
                  spde_ftle)
from spectral import DimensionMismatchError
from utils import loglog_slope

SEED = 31337


def paths_for(model, params, samples=1):
    paths = [generate(SEED, s, params.dt, params.n_steps, model) for s in range(samples)]
    return paths[0] if samples == 1 else paths


def test_params_validation():
    model = build_model("allen-cahn", 8)
    with pytest.raises(HorizonMismatchError):
        SpdeParams(model, 0.0, 0.0, 1.0, 1e-3, 1.0005)
    with pytest.raises(ValueError):
        SpdeParams(model, 0.0, -0.1, 1.0, 1e-3, 1.0)
    with pytest.raises(ValueError):
        SpdeParams(model, 0.0, 0.1, 0.0, 1e-3, 1.0)
    params = SpdeParams(model, 0.2, 0.1, 1.0, 1e-3, 2.0)
    assert params.n_steps == 2000
    assert params.rates[0] == pytest.approx(0.2)


def test_linear_kernel_decay():
    model = build_model("allen-cahn", 8)
    params = SpdeParams(model, -0.5, 0.0, 1.0, 1e-3, 2.0, nonlinear=False)
    u0 = 0.1 * model.basis.kernel_vector()
    traj = integrate_spde(params, u0, paths_for(model, params))
    t = np.arange(params.n_steps + 1) * params.dt
    assert_allclose(traj[:, 0], 0.1 * np.exp(-0.5 * t), rtol=1e-12)
    assert np.all(traj[:, 1:] == 0.0)


def test_zero_is_an_equilibrium():
    model = build_model("swift-hohenberg", 8)
    params = SpdeParams(model, 0.3, 0.0, 1.0, 1e-3, 1.0)
    traj = integrate_spde(params, np.zeros(8), paths_for(model, params, 2))
    assert traj.shape == (1001, 2, 8)
    assert np.all(traj == 0.0)


def test_energy_decay():
    model = build_model("allen-cahn", 16)
    params = SpdeParams(model, 0.0, 0.0, 1.0, 1e-3, 2.0)
    u0 = random_field(model, np.random.default_rng(1))
    u0 /= np.linalg.norm(u0)
    norms = np.linalg.norm(integrate_spde(params, u0, paths_for(model, params)), axis=-1)
    assert np.all(np.diff(norms) <= 1e-12)


def test_time_step_convergence():
    model = build_model("allen-cahn", 16)
    u0 = random_field(model, np.random.default_rng(2))
    u0 /= np.linalg.norm(u0)

    def final_state(dt):
        params = SpdeParams(model, 0.3, 0.0, 1.0, dt, 1.0)
        return integrate_spde(params, u0, paths_for(model, params))[-1]

    steps = [4e-3, 2e-3, 1e-3]
    errors = [np.linalg.norm(final_state(dt) - final_state(dt / 16)) for dt in steps]
    assert loglog_slope(steps, errors) >= 0.9


@pytest.mark.parametrize("nu", [-0.5, 0.0, 0.3])
def test_trivial_solution_ftle(nu):
    model = build_model("allen-cahn", 16)
    params = SpdeParams(model, nu, 0.0, 1.0, 1e-3, 5.0)
    estimate = spde_ftle(params, np.zeros(16), paths_for(model, params))
    assert estimate.lambda_ == pytest.approx(nu, abs=1e-8)
    assert estimate.horizon == pytest.approx(5.0)
    assert estimate.method == FtleMethod.FULL_SVD


def test_ftle_batch_and_horizon():
    model = build_model("allen-cahn", 8)
    params = SpdeParams(model, -0.2, 0.0, 1.0, 1e-2, 2.0)
    paths = paths_for(model, params, 3)
    estimates = spde_ftle(params, np.zeros(8), paths, t=1.0)
    assert len(estimates) == 3
    assert all(e.horizon == pytest.approx(1.0) for e in estimates)
    with pytest.raises(HorizonMismatchError):
        spde_ftle(params, np.zeros(8), paths, t=3.0)


def test_monodromy_of_trivial_solution():
    model = build_model("allen-cahn", 8)
    params = SpdeParams(model, 0.1, 0.0, 1.0, 1e-3, 1.0)
    traj = integrate_spde(params, np.zeros(8), paths_for(model, params))
    M = monodromy(params, traj)
    assert_allclose(M, np.diag(np.exp(params.rates * 1.0)), rtol=1e-10, atol=1e-300)


def test_variation_is_linear():
    model = build_model("allen-cahn", 8)
    params = SpdeParams(model, 0.2, 0.3, 1.0, 1e-3, 1.0)
    rng = np.random.default_rng(2)
    traj = integrate_spde(params, random_field(model, rng), paths_for(model, params))
    x, y = rng.standard_normal(8), rng.standard_normal(8)
    combined = integrate_variation(params, traj, 2.0 * x - 0.5 * y)
    separate = 2.0 * integrate_variation(params, traj, x) - 0.5 * integrate_variation(params, traj, y)
    assert_allclose(combined, separate, atol=1e-12)
    assert_allclose(integrate_variation(params, traj, np.zeros(8)), 0.0)
    columns = integrate_variation(params, traj, np.stack([x, y], axis=1))
    assert_allclose(columns[:, 0], integrate_variation(params, traj, x), atol=1e-12)


def test_variation_growth_bound():
    model = build_model("allen-cahn", 12)
    params = SpdeParams(model, 0.4, 0.5, 1.0, 1e-3, 2.0)
    rng = np.random.default_rng(3)
    traj = integrate_spde(params, random_field(model, rng), paths_for(model, params))
    v0 = rng.standard_normal(12)
    v = integrate_variation(params, traj, v0)
    assert np.linalg.norm(v) <= math.exp(0.4 * 2.0) * np.linalg.norm(v0) * (1 + 1e-12)


def test_regime_one_sample_bound():
    model = build_model("allen-cahn", 16)
    params = SpdeParams(model, -0.5, 0.1, 1.0, 1e-3, 10.0)
    rng = np.random.default_rng(4)
    for path in paths_for(model, params, 5):
        estimate = spde_ftle(params, random_field(model, rng), path)
        assert estimate.lambda_ <= -0.5 + 1e-10


def test_power_iteration_matches_svd():
    rng = np.random.default_rng(5)
    q1, _ = np.linalg.qr(rng.standard_normal((64, 64)))
    q2, _ = np.linalg.qr(rng.standard_normal((64, 64)))
    singular = np.concatenate([[5.0], np.linspace(2.5, 0.1, 63)])
    matrix = q1 @ np.diag(singular) @ q2.T
    sigma, iterations = power_iteration_sigma_max(matrix)
    assert sigma == pytest.approx(np.linalg.svd(matrix, compute_uv=False)[0], rel=1e-6)
    assert iterations < 500
    assert power_iteration_sigma_max(np.zeros((4, 4)))[0] == 0.0


def test_largest_singular_values_stack():
    stack = np.stack([np.diag([3.0, 1.0]), np.diag([0.5, 2.0])])
    values, method, diagnostics = largest_singular_values(stack)
    assert_allclose(values, [3.0, 2.0])
    assert method == FtleMethod.FULL_SVD
    assert diagnostics[0]["condition"] == pytest.approx(3.0)


def test_dimension_and_path_checks():
    model = build_model("allen-cahn", 8)
    params = SpdeParams(model, 0.0, 0.1, 1.0, 1e-3, 1.0)
    with pytest.raises(DimensionMismatchError):
        integrate_spde(params, np.zeros(7), paths_for(model, params))
    with pytest.raises(DimensionMismatchError):
        integrate_spde(params, np.zeros(8), generate(SEED, 0, 1e-3, 1000, np.ones(6)))
    with pytest.raises(HorizonMismatchError):
        integrate_spde(params, np.zeros(8), generate(SEED, 0, 1e-3, 500, model))
    with pytest.raises(HorizonMismatchError):
        integrate_spde(params, np.zeros(8), generate(SEED, 0, 2e-3, 1000, model))


def test_approximation_without_noise_is_exact():
    model = build_model("allen-cahn", 16)
    params = SpdeParams(model, 0.01, 0.0, 0.1, 1e-3, 10.0)
    result = approximation_error(params, 0.0, paths_for(model, params, 2))
    assert np.all(result.error_sup == 0.0)
    assert np.all(result.stable_sup == 0.0)
    assert np.all(result.x4_integral == 0.0)


def test_approximation_step_ratio():
    model = build_model("allen-cahn", 8)
    params = SpdeParams(model, 0.01, 0.01, 0.1, 1e-3, 1.0)
    with pytest.raises(StepRatioError):
        approximation_error(params, 0.0, paths_for(model, params), fast_per_slow=3)
    with pytest.raises(StepRatioError):
        linearization_error(params, 0.0, paths_for(model, params), fast_per_slow=3)


def test_linearization_without_nonlinearity():
    model = build_model("allen-cahn", 16)
    params = SpdeParams(model, 0.04, 0.04, 0.2, 1e-3, 25.0, nonlinear=False)
    result = linearization_error(params, 0.3, paths_for(model, params, 2), fast_per_slow=5)
    assert np.all(result.error_sup < 1e-10)
    assert np.all(result.stable_sup == 0.0)
    assert_allclose(result.kernel_final, math.exp(0.04 * 25.0), rtol=1e-10)


def test_approximation_error_is_small():
    model = build_model("allen-cahn", 16)
    params = SpdeParams(model, 0.04, 0.04, 0.2, 1e-3, 25.0)
    result = approximation_error(params, 0.0, paths_for(model, params, 3), fast_per_slow=10)
    assert np.all(np.isfinite(result.error_sup))
    assert np.all(result.error_sup < 1.0)
    assert np.all(result.amplitude_sup >= 0.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
