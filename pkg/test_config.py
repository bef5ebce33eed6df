#!/usr/bin/env python3
"""
Tests for campaign config parsing and the regime parameter gates
"""

import sys
import os

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config import ConfigError, Settings, fast_horizon, grid_parameters, load_config, parse_config, slow_horizon
from models import AmplitudeVariant, ModelName, Regime

CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs")

REGIME_I = """
[campaign]
regime = "I"
seed = 1
output_path = "out/regime_I"

[parameters]
nu = -0.5
sigma = 0.1
"""


def violations(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value.violations


def test_minimal_regime_one_defaults():
    config = parse_config(REGIME_I)
    assert config.regime == Regime.I
    assert config.model == ModelName.ALLEN_CAHN
    assert config.n_modes == 32
    assert config.dt == 1e-3
    assert config.samples == 100
    assert config.variant == AmplitudeVariant.A2
    assert slow_horizon(config) == 10.0
    assert fast_horizon(config) == 10.0


def test_negative_sigma():
    found = violations(REGIME_I.replace("sigma = 0.1", "sigma = -0.1"))
    assert "sigma must be ≥ 0" in found


def test_regime_two_ratio_gate():
    text = """
    regime = "II"
    seed = 1
    output_path = "out/ii"
    nu = 0.01
    sigma = 0.1
    epsilon = 0.1
    """
    found = violations(text)
    assert len(found) == 1
    assert "σ/ν ∈ [1/2,2]" in found[0]


def test_regime_three_gate():
    text = """
    regime = "III"
    seed = 1
    output_path = "out/iii"
    nu = 0.01
    sigma = 0.005
    epsilon = 0.1
    """
    assert any("σ ≤ ν/10" in v for v in violations(text))


def test_regime_one_requires_negative_nu():
    assert any("ν < 0" in v for v in violations(REGIME_I.replace("nu = -0.5", "nu = 0.5")))


def test_regime_four_gates():
    text = """
    regime = "IV-critical"
    seed = 1
    output_path = "out/iv"
    nu = 0.001
    sigma = 0.02
    epsilon = 0.1
    """
    found = violations(text)
    assert any("σ = ε²" in v for v in found)
    assert any("ν = 0" in v for v in found)


def test_epsilon_grid_needs_three_values():
    text = """
    regime = "approx-order"
    seed = 1
    output_path = "out/approx"
    nu = 1.0
    sigma = 1.0
    epsilon_grid = [0.1, 0.1, 0.05]
    """
    assert "epsilon_grid requires at least 3 distinct values" in violations(text)


def test_density_variant_gate():
    text = """
    regime = "density"
    seed = 1
    output_path = "out/density"
    variant = "a3"
    """
    assert any("variant ∈ {a1, a2}" in v for v in violations(text))


def test_unknown_key_and_section():
    found = violations(REGIME_I + "\n[numerics]\nfoo = 1\n[extra]\nbar = 2\n")
    assert "unknown key 'foo'" in found
    assert "unknown section [extra]" in found


def test_missing_seed():
    found = violations(REGIME_I.replace("seed = 1", ""))
    assert "missing required key 'seed'" in found


def test_all_violations_reported_together():
    text = REGIME_I.replace("sigma = 0.1", "sigma = -0.1") + "\n[numerics]\ndt = 0\nn_modes = 1\n"
    found = violations(text)
    assert "sigma must be ≥ 0" in found
    assert "dt must be > 0" in found
    assert any("n_modes" in v for v in found)


def test_invalid_toml():
    found = violations("regime = ")
    assert found[0].startswith("invalid TOML")


def test_horizon_must_be_whole_steps():
    found = violations(REGIME_I + "\n[numerics]\ndt = 0.3\nslow_horizon = 1.0\n")
    assert any("whole number" in v for v in found)


def test_grid_parameters_scale_with_epsilon():
    config = load_config(os.path.join(CONFIG_DIR, "approx_order.toml"))
    nu, sigma = grid_parameters(config, 0.1)
    assert nu == pytest.approx(0.01)
    assert sigma == pytest.approx(0.01)
    assert fast_horizon(config, 0.1) == pytest.approx(100.0)


@pytest.mark.parametrize("name", sorted(os.listdir(CONFIG_DIR)))
def test_shipped_configs_are_valid(name):
    config = load_config(os.path.join(CONFIG_DIR, name))
    assert config.output_path


def test_settings_environment_prefix(monkeypatch):
    monkeypatch.setenv("SPDE_FTLE_MAX_WORKERS", "4")
    monkeypatch.setenv("SPDE_FTLE_OUTPUT_DIR", "/tmp/spde")
    fresh = Settings()
    assert fresh.max_workers == 4
    assert fresh.output_dir == "/tmp/spde"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
