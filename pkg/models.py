from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing import List, Dict, Any, Optional
from enum import Enum

class ModelName(str, Enum):
    ALLEN_CAHN = "allen-cahn"
    SWIFT_HOHENBERG = "swift-hohenberg"
    SURFACE_GROWTH = "surface-growth"

class XSpace(str, Enum):
    L4 = "L4"
    W14 = "W14"

class AmplitudeVariant(str, Enum):
    A1 = "a1"
    A2 = "a2"
    A3 = "a3"
    EAE = "eAE"

class Regime(str, Enum):
    I = "I"
    II = "II"
    III = "III"
    IV_CRITICAL = "IV-critical"
    IV_SMALL_NU = "IV-small-nu"
    APPROX_ORDER = "approx-order"
    LINEARIZATION_ORDER = "linearization-order"
    DENSITY = "density"
    BIRKHOFF = "birkhoff"

class FtleMethod(str, Enum):
    FULL_SVD = "full-svd"
    POWER_ITERATION = "power-iteration"
    CLOSED_FORM = "closed-form"

class FtleEstimate(BaseModel):
    horizon: float
    lambda_: float = Field(alias="lambda")
    monodromy_norm: float
    method: FtleMethod
    diagnostics: Dict[str, Any] = {}

    model_config = ConfigDict(populate_by_name=True)

class AttractorSample(BaseModel):
    value: float
    pullback_horizon: float
    residual: float
    converged: bool

class DissipativityReport(BaseModel):
    model: ModelName
    trials: int
    max_inner_product: float  # max <F(u)-F(v), u-v>
    max_bound_gap: float  # max <F(u)-F(v), u-v> + c_est*|u-v|_X^4
    c_est: float
    w14_c_est: Optional[float] = None  # same constant against the full W^{1,4} norm
    passed: bool

class SampleRecord(BaseModel):
    sample_index: int
    seed: int
    lambda_: Optional[float] = Field(default=None, alias="lambda")
    event_omega0: Optional[bool] = None
    attractor_value: Optional[float] = None
    error_sup: Optional[float] = None
    excluded: bool = False
    epsilon: Optional[float] = None
    extras: Dict[str, float] = {}

    model_config = ConfigDict(populate_by_name=True)

class SummaryRow(BaseModel):
    metric: str
    value: float
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    passed: Optional[bool] = None  # None: informational row, not a predicate

class RegimeReport(BaseModel):
    regime: Regime
    records: List[SampleRecord]
    summary: List[SummaryRow]
    passed: bool
    error: Optional[str] = None
    execution_time: float = 0.0

class CampaignConfig(BaseModel):
    """Validated campaign document; see config.parse_config for the gate table."""

    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    model: ModelName = ModelName.ALLEN_CAHN
    regime: Regime
    nu: Optional[float] = None
    sigma: Optional[float] = None
    epsilon: Optional[float] = None
    n_modes: int = 32
    dt: float = 1e-3
    slow_horizon: Optional[float] = None
    samples: int = 100
    seed: int
    output_path: str
    epsilon_grid: Optional[List[float]] = None

    variant: AmplitudeVariant = AmplitudeVariant.A2
    cubic_coeff: float = -1.0
    initial_state: str = "random"
    omega0_horizon: float = 1.0
    fast_per_slow: int = 1
    disable_nonlinearity: bool = False
    sh_wavenumber: int = 1
    domain_length: Optional[float] = None
    shifted_laplacian_drift: bool = False

    @field_validator("sigma")
    @classmethod
    def _sigma_non_negative(cls, value):
        if value is not None and value < 0:
            raise ValueError("sigma must be ≥ 0")
        return value

    @field_validator("epsilon")
    @classmethod
    def _epsilon_positive(cls, value):
        if value is not None and value <= 0:
            raise ValueError("epsilon must be > 0")
        return value

    @field_validator("epsilon_grid")
    @classmethod
    def _grid_positive(cls, value):
        if value is not None and any(eps <= 0 for eps in value):
            raise ValueError("epsilon_grid entries must be > 0")
        return value

    @field_validator("dt")
    @classmethod
    def _dt_positive(cls, value):
        if value <= 0:
            raise ValueError("dt must be > 0")
        return value

    @field_validator("n_modes")
    @classmethod
    def _modes_in_range(cls, value):
        if not 2 <= value <= 256:
            raise ValueError("n_modes must satisfy 2 ≤ n_modes ≤ 256")
        return value

    @field_validator("samples", "fast_per_slow", "sh_wavenumber")
    @classmethod
    def _at_least_one(cls, value, info):
        if value < 1:
            raise ValueError(f"{info.field_name} must be ≥ 1")
        return value

    @field_validator("slow_horizon", "omega0_horizon", "domain_length")
    @classmethod
    def _horizon_positive(cls, value, info):
        if value is not None and value <= 0:
            raise ValueError(f"{info.field_name} must be > 0")
        return value

    @field_validator("initial_state")
    @classmethod
    def _known_initial_state(cls, value):
        if value not in ("random", "zero"):
            raise ValueError("initial_state must be one of: random, zero")
        return value
