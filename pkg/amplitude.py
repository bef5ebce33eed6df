"""
One-dimensional amplitude equations db = (alpha b + c_F b^3) dT + noise_amp dbeta.

Variants differ only in (alpha, noise_amp):

    a1   alpha = 1,         noise sigma/nu     (nu = eps^2 > 0, sigma ~ nu)
    a2   alpha = 0,         noise 1            (at the bifurcation)
    a3   alpha = nu/sigma,  noise 1            (small nu after the critical case)
    eAE  alpha = nu/eps^2,  noise sigma/eps^2  (the general reduced equation)

All integrators are vectorised over a trailing sample axis.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from pydantic import BaseModel, field_validator
from scipy.integrate import cumulative_trapezoid, quad, trapezoid

from models import AmplitudeVariant, AttractorSample, FtleEstimate, FtleMethod
from noise import SlowPath

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda func: func

logger = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e6
PULLBACK_BRACKET = 10.0
PULLBACK_TOLERANCE = 1e-8
DENSITY_CUTOFF = 6.0
OMEGA0_DELTA = 0.5


class AmplitudeBlowUpError(FloatingPointError):
    """|b| left the blow-up guard; with c_F < 0 this means a bad configuration."""


class HorizonMismatchError(ValueError):
    """Requested horizon exceeds the driving path."""


class AmplitudeSpec(BaseModel):
    linear_coeff: float
    cubic_coeff: float
    noise_amp: float
    variant: AmplitudeVariant = AmplitudeVariant.EAE

    @field_validator("cubic_coeff")
    @classmethod
    def _stable_cubic(cls, value):
        if value > 0:
            raise ValueError("cubic_coeff must be ≤ 0")
        return value

    @field_validator("noise_amp")
    @classmethod
    def _noise_non_negative(cls, value):
        if value < 0:
            raise ValueError("noise_amp must be ≥ 0")
        return value

    @classmethod
    def a1(cls, nu: float, sigma: float, cubic_coeff: float = -1.0) -> "AmplitudeSpec":
        if nu <= 0:
            raise ValueError("variant a1 needs nu > 0")
        return cls(linear_coeff=1.0, cubic_coeff=cubic_coeff, noise_amp=sigma / nu,
                   variant=AmplitudeVariant.A1)

    @classmethod
    def a2(cls, cubic_coeff: float = -1.0) -> "AmplitudeSpec":
        return cls(linear_coeff=0.0, cubic_coeff=cubic_coeff, noise_amp=1.0, variant=AmplitudeVariant.A2)

    @classmethod
    def a3(cls, nu: float, sigma: float, cubic_coeff: float = -1.0) -> "AmplitudeSpec":
        if sigma <= 0:
            raise ValueError("variant a3 needs sigma > 0")
        return cls(linear_coeff=nu / sigma, cubic_coeff=cubic_coeff, noise_amp=1.0,
                   variant=AmplitudeVariant.A3)

    @classmethod
    def eae(cls, nu: float, sigma: float, epsilon: float, cubic_coeff: float) -> "AmplitudeSpec":
        return cls(linear_coeff=nu / epsilon ** 2, cubic_coeff=cubic_coeff,
                   noise_amp=sigma / epsilon ** 2, variant=AmplitudeVariant.EAE)

    def drift(self, b):
        return self.linear_coeff * b + self.cubic_coeff * b ** 3


@njit(cache=True)
def _em_kernel(b, increments, dT, alpha, cubic, noise, limit, out):
    # returns the first step whose state left the guard, -1 if none
    for j in range(increments.shape[0]):
        for i in range(b.shape[0]):
            x = b[i]
            x = x + dT * (alpha * x + cubic * x * x * x) + noise * increments[j, i]
            if not abs(x) <= limit:
                return j
            b[i] = x
        if out.shape[0] > 0:
            out[j + 1, :] = b
    return -1


def _advance(spec: AmplitudeSpec, b0, increments: np.ndarray, dT: float, keep_path: bool):
    increments = np.asarray(increments, dtype=float)
    n_steps, sample_shape = increments.shape[0], increments.shape[1:]
    inc = increments.reshape(n_steps, int(np.prod(sample_shape)))
    b = np.broadcast_to(np.asarray(b0, dtype=float), sample_shape).reshape(-1).copy()
    out = np.empty((n_steps + 1 if keep_path else 0, inc.shape[1]))
    if keep_path:
        out[0] = b
    failed = _em_kernel(b, np.ascontiguousarray(inc), float(dT), float(spec.linear_coeff),
                        float(spec.cubic_coeff), float(spec.noise_amp), BLOWUP_LIMIT, out)
    if failed >= 0:
        raise AmplitudeBlowUpError(
            f"|b| > {BLOWUP_LIMIT:g} at slow step {failed} (alpha={spec.linear_coeff}, c_F={spec.cubic_coeff})")
    if keep_path:
        return out.reshape((n_steps + 1,) + sample_shape)
    return b.reshape(sample_shape)


def euler_maruyama(spec: AmplitudeSpec, b0, increments: np.ndarray, dT: float) -> np.ndarray:
    """Trajectory of shape (n+1, ...) for increments of shape (n, ...)."""
    return _advance(spec, b0, increments, dT, keep_path=True)


def integrate_sde(spec: AmplitudeSpec, b0: float, path: SlowPath, T: float) -> np.ndarray:
    n_steps = int(round(T / path.dT))
    if T < 0 or n_steps > path.n_steps:
        raise HorizonMismatchError(f"horizon {T} exceeds the path horizon {path.horizon}")
    return euler_maruyama(spec, b0, path.increments[:n_steps], path.dT)


@dataclass
class AttractorBatch:
    values: np.ndarray
    residuals: np.ndarray
    horizon: float
    converged: np.ndarray

    def samples(self):
        return [AttractorSample(value=float(v), pullback_horizon=self.horizon, residual=float(r),
                                converged=bool(c))
                for v, r, c in zip(self.values, self.residuals, self.converged)]


def pullback_batch(spec: AmplitudeSpec, past_source: Callable[[int], np.ndarray], dT: float,
                   initial_horizon: float = 1.0, max_horizon: float = 256.0,
                   bracket: float = PULLBACK_BRACKET, tol: float = PULLBACK_TOLERANCE) -> AttractorBatch:
    """Pullback limit a(omega) for a batch of pasts.

    `past_source(n)` returns kernel increments on [-n dT, 0] in forward order,
    shape (n, B); a longer past must extend a shorter one at its start.
    Two trajectories from -R and +R bracket every solution started in [-R, R];
    the horizon doubles until their gap at time 0 is below tol everywhere.
    """
    if initial_horizon <= 0:
        raise ValueError("pullback horizon must be positive")
    if dT * (abs(spec.linear_coeff) + 3 * abs(spec.cubic_coeff) * bracket ** 2) >= 1:
        raise ValueError(f"slow step {dT} is unstable for the bracket ±{bracket}")

    horizon = initial_horizon
    while True:
        n_steps = max(1, int(round(horizon / dT)))
        past = np.asarray(past_source(n_steps), dtype=float)
        lower = _advance(spec, -bracket, past, dT, keep_path=False)
        upper = _advance(spec, bracket, past, dT, keep_path=False)
        residuals = np.abs(upper - lower)
        converged = residuals < tol
        if converged.all() or 2 * horizon > max_horizon:
            break
        logger.debug(f"Pullback gap {residuals.max():.3e} at S={horizon:g}, doubling")
        horizon *= 2

    if not converged.all():
        logger.info(f"Pullback did not converge for {int(np.sum(~converged))} of {converged.size} samples at S={horizon:g}")
    return AttractorBatch(np.atleast_1d(0.5 * (upper + lower)), np.atleast_1d(residuals),
                          horizon, np.atleast_1d(converged))


def pullback_attractor(spec: AmplitudeSpec, past: Union[SlowPath, Callable[[int], np.ndarray]],
                       initial_horizon: float = 1.0, max_horizon: float = 256.0,
                       tol: float = PULLBACK_TOLERANCE, dT: Optional[float] = None) -> AttractorSample:
    """Single-sample pullback; a fixed SlowPath caps the horizon at its length."""
    if isinstance(past, SlowPath):
        fixed = past
        dT = fixed.dT
        max_horizon = min(max_horizon, fixed.horizon)
        initial_horizon = min(initial_horizon, max_horizon)

        def source(n):
            return fixed.increments[fixed.n_steps - n:, None]
    else:
        if dT is None:
            raise ValueError("dT is required with a callable past")

        def source(n):
            return np.asarray(past(n)).reshape(n, 1)

    return pullback_batch(spec, source, dT, initial_horizon, max_horizon, tol=tol).samples()[0]


def attractor_trajectory(spec: AmplitudeSpec, value, future_increments: np.ndarray, dT: float) -> np.ndarray:
    """a(theta_T omega) for T on the slow grid, by the cocycle from a(omega)."""
    return euler_maruyama(spec, value, future_increments, dT)


class InvariantDensity:
    """Stationary Fokker-Planck density p(x) ∝ exp((alpha x^2 + c_F x^4 / 2) / D^2)."""

    def __init__(self, spec: AmplitudeSpec, cutoff: float = DENSITY_CUTOFF, grid_points: int = 20001):
        if spec.noise_amp <= 0:
            raise ValueError("the invariant density needs noise_amp > 0")
        self.spec = spec
        self.cutoff = cutoff
        self._scale = spec.noise_amp ** 2
        self._peak = self._peak_exponent()
        self.norm, _ = quad(self.unnormalized, -cutoff, cutoff, limit=200)
        self._grid = np.linspace(-cutoff, cutoff, grid_points)
        cdf = cumulative_trapezoid(self.pdf(self._grid), self._grid, initial=0.0)
        self._cdf = cdf / cdf[-1]

    def _peak_exponent(self) -> float:
        alpha, c = self.spec.linear_coeff, self.spec.cubic_coeff
        if alpha > 0 and c < 0:
            return -alpha ** 2 / (2 * c * self._scale)
        return 0.0

    def log_unnormalized(self, x):
        x = np.asarray(x, dtype=float)
        return (self.spec.linear_coeff * x ** 2 + 0.5 * self.spec.cubic_coeff * x ** 4) / self._scale - self._peak

    def unnormalized(self, x):
        return np.exp(self.log_unnormalized(x))

    def pdf(self, x):
        return self.unnormalized(x) / self.norm

    def cdf(self, x):
        return np.interp(x, self._grid, self._cdf, left=0.0, right=1.0)

    def moment(self, power: int) -> float:
        value, _ = quad(lambda x: x ** power * self.pdf(x), -self.cutoff, self.cutoff, limit=200)
        return value


def invariant_density(spec: AmplitudeSpec, x):
    return InvariantDensity(spec).pdf(x)


def birkhoff_average(trajectory: np.ndarray, dT: float) -> np.ndarray:
    """(1/T) int_0^T a^2 ds by the trapezoid rule along axis 0."""
    trajectory = np.asarray(trajectory, dtype=float)
    horizon = (trajectory.shape[0] - 1) * dT
    if horizon <= 0:
        raise ValueError("a Birkhoff average needs at least one step")
    return trapezoid(trajectory ** 2, dx=dT, axis=0) / horizon


def sde_exponents(spec: AmplitudeSpec, trajectory: np.ndarray, dT: float) -> np.ndarray:
    """lambda_T = alpha + 3 c_F (1/T) int a^2: closed form in one dimension."""
    return spec.linear_coeff + 3.0 * spec.cubic_coeff * birkhoff_average(trajectory, dT)


def sde_ftle(spec: AmplitudeSpec, trajectory: np.ndarray, dT: float) -> FtleEstimate:
    horizon = (len(trajectory) - 1) * dT
    lam = float(sde_exponents(spec, np.asarray(trajectory).reshape(len(trajectory)), dT))
    return FtleEstimate(horizon=horizon, lambda_=lam, monodromy_norm=math.exp(lam * horizon),
                        method=FtleMethod.CLOSED_FORM,
                        diagnostics={"birkhoff": float(birkhoff_average(trajectory, dT))})


def omega0_eta(noise_amp: float, delta: float = OMEGA0_DELTA) -> float:
    return delta / (2.0 * (1.0 + noise_amp))


def omega0_holds(spec: AmplitudeSpec, a0, beta_sup, delta: float = OMEGA0_DELTA):
    """Omega_0 from the attractor value and the running sup of |beta| over the window."""
    if spec.variant != AmplitudeVariant.A1:
        raise ValueError("the Omega_0 event is defined for variant a1")
    eta = omega0_eta(spec.noise_amp, delta)
    return (np.abs(a0) < eta) & (np.asarray(beta_sup) <= eta / 2)


def event_omega0(spec: AmplitudeSpec, a0, increments: np.ndarray, dT: float, T: float,
                 delta: float = OMEGA0_DELTA):
    """|a0| < eta and sup_{t <= T} |beta(t)| <= eta / 2."""
    n_steps = int(round(T / dT))
    increments = np.asarray(increments, dtype=float)
    if n_steps > len(increments):
        raise HorizonMismatchError(f"horizon {T} exceeds the path horizon {len(increments) * dT}")
    beta = np.cumsum(increments[:n_steps], axis=0)
    sup = np.max(np.abs(beta), axis=0) if n_steps else np.zeros(np.shape(a0))
    return omega0_holds(spec, a0, sup, delta)
