import math
import os
import sys
from typing import Dict, List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError
from pydantic_settings import BaseSettings

from models import AmplitudeVariant, CampaignConfig, Regime

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

load_dotenv()


class Settings(BaseSettings):
    # Output
    output_dir: str = os.getenv("SPDE_FTLE_OUTPUT_DIR", "")  # overrides the directory of output_path
    log_level: str = os.getenv("SPDE_FTLE_LOG_LEVEL", "INFO")

    # Sample scheduling
    max_workers: int = int(os.getenv("SPDE_FTLE_MAX_WORKERS", "1"))
    sample_chunk: int = int(os.getenv("SPDE_FTLE_SAMPLE_CHUNK", "50"))  # samples advanced together

    # Amplitude numerics
    amplitude_dt: float = float(os.getenv("SPDE_FTLE_AMPLITUDE_DT", "1e-3"))  # slow step of pullbacks
    pullback_max_horizon: float = float(os.getenv("SPDE_FTLE_PULLBACK_MAX_HORIZON", "256"))

    class Config:
        env_file = ".env"
        env_prefix = "SPDE_FTLE_"


settings = Settings()


class ConfigError(ValueError):
    """Invalid campaign config; `violations` lists every problem found."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


SECTIONS = ("campaign", "parameters", "numerics")

DEFAULT_SLOW_HORIZON = {
    Regime.I: 10.0,  # fast time: regime I has no slow scale
    Regime.II: 1.0,
    Regime.III: 1.0,
    Regime.IV_CRITICAL: 50.0,
    Regime.IV_SMALL_NU: 50.0,
    Regime.APPROX_ORDER: 1.0,
    Regime.LINEARIZATION_ORDER: 1.0,
    Regime.DENSITY: 50.0,
    Regime.BIRKHOFF: 50.0,
}

EPSILON_GRID_REGIMES = (Regime.APPROX_ORDER, Regime.LINEARIZATION_ORDER)
AMPLITUDE_REGIMES = (Regime.DENSITY, Regime.BIRKHOFF)


def slow_horizon(config: CampaignConfig) -> float:
    return config.slow_horizon or DEFAULT_SLOW_HORIZON[config.regime]


def grid_parameters(config: CampaignConfig, epsilon: float):
    """(nu, sigma) at one point of an epsilon grid: the config values are coefficients of eps^2."""
    return (config.nu or 0.0) * epsilon ** 2, (config.sigma or 0.0) * epsilon ** 2


def fast_horizon(config: CampaignConfig, epsilon: Optional[float] = None) -> float:
    """FTLE / comparison horizon on the fast time scale."""
    T = slow_horizon(config)
    regime = config.regime
    if regime == Regime.I:
        return T
    if regime in (Regime.II, Regime.III):
        return T / config.nu
    if regime in (Regime.IV_CRITICAL, Regime.IV_SMALL_NU):
        return T / math.sqrt(config.sigma)
    if regime in EPSILON_GRID_REGIMES:
        return T / epsilon ** 2
    raise ValueError(f"regime {regime.value} has no fast horizon")


def _flatten(document: dict, violations: List[str]) -> Dict[str, object]:
    flat: Dict[str, object] = {}
    for key, value in document.items():
        if isinstance(value, dict):
            if key not in SECTIONS:
                violations.append(f"unknown section [{key}]")
                continue
            items = value.items()
        else:
            items = [(key, value)]
        for name, item in items:
            if name in flat:
                violations.append(f"duplicate key '{name}'")
            flat[name] = item
    return flat


def _format_error(error: dict) -> str:
    field = ".".join(str(part) for part in error["loc"])
    if error["type"] == "missing":
        return f"missing required key '{field}'"
    message = error["msg"]
    if message.startswith("Value error, "):
        return message[len("Value error, "):]
    return f"{field}: {message}"


def _is_whole(horizon: float, dt: float) -> bool:
    ratio = horizon / dt
    return abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio)


def _gate_violations(config: CampaignConfig) -> List[str]:
    """Regime parameter gates; each message names the violated inequality."""
    out: List[str] = []
    regime, nu, sigma, eps = config.regime, config.nu, config.sigma, config.epsilon

    def require(*names):
        missing = [name for name in names if getattr(config, name) is None]
        out.extend(f"missing required key '{name}' for regime {regime.value}" for name in missing)
        return not missing

    if regime == Regime.I:
        if require("nu", "sigma") and not nu < 0:
            out.append(f"regime I requires ν < 0 (got nu={nu})")
    elif regime in (Regime.II, Regime.III):
        if require("nu", "sigma", "epsilon"):
            if not (nu > 0 and math.isclose(nu, eps ** 2, rel_tol=1e-9)):
                out.append(f"regime {regime.value} requires 0 < ν = ε² (got nu={nu}, epsilon={eps})")
            elif regime == Regime.II and not 0.5 <= sigma / nu <= 2.0:
                out.append(f"regime II requires σ/ν ∈ [1/2,2] (got σ/ν={sigma / nu:g})")
            elif regime == Regime.III and not sigma <= nu / 10:
                out.append(f"regime III requires σ ≤ ν/10 (got σ/ν={sigma / nu:g})")
    elif regime in (Regime.IV_CRITICAL, Regime.IV_SMALL_NU):
        if require("nu", "sigma", "epsilon"):
            if not math.isclose(sigma, eps ** 2, rel_tol=1e-9):
                out.append(f"regime {regime.value} requires σ = ε² (got sigma={sigma}, epsilon={eps})")
            if regime == Regime.IV_CRITICAL and nu != 0:
                out.append(f"regime IV-critical requires ν = 0 (got nu={nu})")
            if regime == Regime.IV_SMALL_NU and not 0 < nu <= sigma / 10:
                out.append(f"regime IV-small-nu requires 0 < ν ≤ σ/10 (got nu={nu}, sigma={sigma})")
    elif regime in EPSILON_GRID_REGIMES:
        if require("nu", "sigma", "epsilon_grid"):
            if len(set(config.epsilon_grid)) < 3:
                out.append("epsilon_grid requires at least 3 distinct values")
            if regime == Regime.LINEARIZATION_ORDER and not (nu > 0 and 0.5 <= sigma / nu <= 2.0):
                out.append(f"linearization-order runs in regime II: requires ν > 0 and σ/ν ∈ [1/2,2] (got nu={nu}, sigma={sigma})")
    elif regime in AMPLITUDE_REGIMES:
        if config.variant not in (AmplitudeVariant.A1, AmplitudeVariant.A2):
            out.append(f"regime {regime.value} requires variant ∈ {{a1, a2}} (got {config.variant.value})")
        elif config.variant == AmplitudeVariant.A1 and require("nu", "sigma") and not (nu > 0 and sigma > 0):
            out.append(f"variant a1 requires ν > 0 and σ > 0 (got nu={nu}, sigma={sigma})")
        if config.cubic_coeff >= 0:
            out.append(f"cubic_coeff must be < 0 (got {config.cubic_coeff})")

    if not out and regime not in AMPLITUDE_REGIMES:
        grid = config.epsilon_grid if regime in EPSILON_GRID_REGIMES else [eps]
        for value in grid:
            horizon = fast_horizon(config, value)
            if not _is_whole(horizon, config.dt):
                out.append(f"fast horizon {horizon:g} is not a whole number of dt={config.dt:g} steps")
            elif regime in EPSILON_GRID_REGIMES and round(horizon / config.dt) % config.fast_per_slow:
                out.append(f"fast horizon {horizon:g} is not a multiple of fast_per_slow={config.fast_per_slow} steps")
    return out


def parse_config(text: str) -> CampaignConfig:
    """Parse and validate a TOML campaign document, reporting all violations at once."""
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([f"invalid TOML: {e}"])

    violations: List[str] = []
    flat = _flatten(document, violations)
    known = set(CampaignConfig.model_fields)
    for key in flat:
        if key not in known:
            violations.append(f"unknown key '{key}'")
    values = {key: value for key, value in flat.items() if key in known}

    try:
        config = CampaignConfig(**values)
    except ValidationError as e:
        violations.extend(_format_error(error) for error in e.errors())
        raise ConfigError(violations)

    violations.extend(_gate_violations(config))
    if violations:
        raise ConfigError(violations)
    return config


def load_config(path: str) -> CampaignConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read())
