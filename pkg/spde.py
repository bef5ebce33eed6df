"""
Exponential-Euler SPDE engine with its first-variation equation.

One step of du = [Au + nu u + F(u)] dt + sigma dW is

    u_{n+1} = E (u_n + dt F(u_n)) + sigma xi_n,    E = exp(dt (A + nu)),

with xi_n the exact per-mode OU increment. The tangent uses the same
propagator with DF(u_n) frozen over the step, so the monodromy is advanced
together with u and no trajectory has to be stored for FTLEs.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Union

import numpy as np

from amplitude import AmplitudeBlowUpError, AmplitudeSpec, HorizonMismatchError
from catalog import ModelSpec, apply_jacobian, cubic_coefficient, evaluate_DF, evaluate_F
from models import FtleEstimate, FtleMethod
from noise import StepRatioError, WienerPath, batch_normals, ou_coefficients
from spectral import DimensionMismatchError

logger = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e6
GUARD_EVERY = 100
RENORM_EVERY = 50
NOISE_BLOCK = 1024
FULL_SVD_MAX_MODES = 128
POWER_TOL = 1e-8
POWER_MAX_ITER = 500

Paths = Union[WienerPath, Sequence[WienerPath]]
Observer = Callable[[int, np.ndarray, np.ndarray], None]


class SpdeBlowUpError(FloatingPointError):
    """‖u‖ left the blow-up guard."""


@dataclass(frozen=True)
class SpdeParams:
    model: ModelSpec
    nu: float
    sigma: float
    epsilon: float
    dt: float
    t_fast: float
    nonlinear: bool = True

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be ≥ 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.dt <= 0 or self.t_fast <= 0:
            raise ValueError("dt and t_fast must be > 0")
        ratio = self.t_fast / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise HorizonMismatchError(f"t_fast={self.t_fast} is not a whole number of steps dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_fast / self.dt))

    @property
    def n_modes(self) -> int:
        return self.model.n_modes

    @property
    def rates(self) -> np.ndarray:
        return self.model.eigenvalues + self.nu * self.model.nu_weights

    @property
    def stiffness(self) -> float:
        """dt * max|lambda_k + nu|; the scheme is exact on the linear part whatever its size."""
        return float(self.dt * np.max(np.abs(self.rates)))


class _Propagator:
    def __init__(self, params: SpdeParams):
        self.params = params
        self.model = params.model
        self.decay, std = ou_coefficients(params.rates, params.dt, self.model.noise_spectrum)
        self.noise = params.sigma * std

    def step(self, u: np.ndarray, z: Optional[np.ndarray]) -> np.ndarray:
        drift = u + self.params.dt * evaluate_F(self.model, u) if self.params.nonlinear else u
        out = self.decay * drift
        if z is not None:
            out += self.noise * z
        return out

    def tangent(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """One step of the variation equation for a (.., N) vector or a (.., N, K) stack."""
        if self.params.nonlinear:
            if v.ndim == u.ndim + 1:
                v = v + self.params.dt * apply_jacobian(self.model, u, v)
            else:
                v = v + self.params.dt * evaluate_DF(self.model, u, v)
        if v.ndim == u.ndim + 1:
            return self.decay[:, None] * v
        return self.decay * v


def _as_batch(paths: Paths):
    if isinstance(paths, WienerPath):
        return [paths], True
    return list(paths), False


def _check_paths(params: SpdeParams, paths: List[WienerPath], n_steps: int):
    for path in paths:
        if path.n_modes != params.n_modes:
            raise DimensionMismatchError(f"path has {path.n_modes} modes, model has {params.n_modes}")
        if not math.isclose(path.dt, params.dt, rel_tol=1e-12):
            raise HorizonMismatchError(f"path step {path.dt} differs from dt={params.dt}")
        if n_steps > path.n_steps:
            raise HorizonMismatchError(f"{n_steps} steps requested from a path of {path.n_steps}")


def _draws(params: SpdeParams, paths: List[WienerPath], n_steps: int) -> Iterable[np.ndarray]:
    """Per-step normals (B, N), generated lazily in windows."""
    for start in range(0, n_steps, NOISE_BLOCK):
        stop = min(start + NOISE_BLOCK, n_steps)
        if params.sigma == 0:
            yield from (None for _ in range(stop - start))
        else:
            yield from batch_normals(paths, start, stop)


def _guard(u: np.ndarray, step: int):
    norm = np.max(np.linalg.norm(u, axis=-1))
    if not norm <= BLOWUP_LIMIT:
        raise SpdeBlowUpError(f"‖u‖ = {norm:.3e} exceeds {BLOWUP_LIMIT:g} at step {step}")


def _initial(params: SpdeParams, u0, batch: int) -> np.ndarray:
    u0 = np.asarray(u0, dtype=float)
    if u0.shape[-1] != params.n_modes:
        raise DimensionMismatchError(f"u0 has {u0.shape[-1]} modes, model has {params.n_modes}")
    return np.broadcast_to(u0, (batch, params.n_modes)).copy()


def integrate_spde(params: SpdeParams, u0, paths: Paths, n_steps: Optional[int] = None) -> np.ndarray:
    """Trajectory of shape (n+1, N), or (n+1, B, N) for a list of paths."""
    paths, single = _as_batch(paths)
    n_steps = params.n_steps if n_steps is None else n_steps
    _check_paths(params, paths, n_steps)
    prop = _Propagator(params)
    u = _initial(params, u0, len(paths))
    out = np.empty((n_steps + 1,) + u.shape)
    out[0] = u
    for n, z in enumerate(_draws(params, paths, n_steps)):
        u = prop.step(u, z)
        if (n + 1) % GUARD_EVERY == 0:
            _guard(u, n + 1)
        out[n + 1] = u
    _guard(u, n_steps)
    return out[:, 0] if single else out


def integrate_variation(params: SpdeParams, u_trajectory: np.ndarray, v0) -> np.ndarray:
    """v(T) along a stored trajectory; v0 may be a vector (N,) or columns (N, K)."""
    u_trajectory = np.asarray(u_trajectory, dtype=float)
    v = np.array(v0, dtype=float)
    if v.shape[0] != params.n_modes:
        raise DimensionMismatchError(f"v0 has {v.shape[0]} modes, model has {params.n_modes}")
    prop = _Propagator(params)
    for u in u_trajectory[:-1]:
        v = prop.tangent(u, v)
    return v


def monodromy(params: SpdeParams, u_trajectory: np.ndarray) -> np.ndarray:
    return integrate_variation(params, u_trajectory, np.eye(params.n_modes))


def power_iteration_sigma_max(matrix: np.ndarray, tol: float = POWER_TOL,
                              max_iter: int = POWER_MAX_ITER):
    """Largest singular value by power iteration on M^T M; returns (sigma, iterations)."""
    gram = matrix.T @ matrix
    x = np.full(gram.shape[0], 1.0 / math.sqrt(gram.shape[0]))
    estimate = 0.0
    for iteration in range(1, max_iter + 1):
        y = gram @ x
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0, iteration
        updated = float(x @ y)
        x = y / norm
        if abs(updated - estimate) <= tol * abs(updated):
            return math.sqrt(max(updated, 0.0)), iteration
        estimate = updated
    logger.warning(f"Power iteration stopped at {max_iter} iterations")
    return math.sqrt(max(estimate, 0.0)), max_iter


def largest_singular_values(matrices: np.ndarray):
    """sigma_max and diagnostics for a (B, N, N) stack."""
    n_modes = matrices.shape[-1]
    if n_modes <= FULL_SVD_MAX_MODES:
        try:
            s = np.linalg.svd(matrices, compute_uv=False)
            with np.errstate(divide="ignore"):
                condition = np.where(s[:, -1] > 0, s[:, 0] / s[:, -1], np.inf)
            return s[:, 0], FtleMethod.FULL_SVD, [{"condition": float(c)} for c in condition]
        except np.linalg.LinAlgError as exc:
            logger.warning(f"SVD failed ({exc}), falling back to power iteration")
            fallback = {"svd_failed": True}
    else:
        fallback = {}
    values, diagnostics = [], []
    for matrix in matrices:
        value, iterations = power_iteration_sigma_max(matrix)
        values.append(value)
        diagnostics.append({"iterations": iterations, **fallback})
    return np.array(values), FtleMethod.POWER_ITERATION, diagnostics


def _cointegrate(params: SpdeParams, u0, paths: List[WienerPath], n_steps: int,
                 observer: Optional[Observer] = None):
    prop = _Propagator(params)
    u = _initial(params, u0, len(paths))
    M = np.broadcast_to(np.eye(params.n_modes), (len(paths), params.n_modes, params.n_modes)).copy()
    log_scale = np.zeros(len(paths))
    for n, z in enumerate(_draws(params, paths, n_steps)):
        M = prop.tangent(u, M)
        u = prop.step(u, z)
        if (n + 1) % RENORM_EVERY == 0:
            scale = np.linalg.norm(M, axis=(-2, -1))
            M /= scale[:, None, None]
            log_scale += np.log(scale)
        if (n + 1) % GUARD_EVERY == 0:
            _guard(u, n + 1)
        if observer is not None:
            observer(n + 1, u, z)
    _guard(u, n_steps)
    return u, M, log_scale


def spde_ftle(params: SpdeParams, u0, paths: Paths, t: Optional[float] = None,
              observer: Optional[Observer] = None) -> Union[FtleEstimate, List[FtleEstimate]]:
    """lambda_t(u0) = (1/t) ln ‖U_{u0}(t)‖ on the truncated space.

    `observer(step, u, z)` sees every step; runners use it to track events
    along the same noise without a second pass.
    """
    paths, single = _as_batch(paths)
    t = params.t_fast if t is None else t
    n_steps = int(round(t / params.dt))
    if t <= 0 or n_steps > params.n_steps:
        raise HorizonMismatchError(f"FTLE horizon {t} outside (0, {params.t_fast}]")
    _check_paths(params, paths, n_steps)

    _, M, log_scale = _cointegrate(params, u0, paths, n_steps, observer)
    sigma_max, method, diagnostics = largest_singular_values(M)
    horizon = n_steps * params.dt
    estimates = []
    for s, shift, diag in zip(sigma_max, log_scale, diagnostics):
        log_norm = math.log(s) + shift if s > 0 else -math.inf
        lam = log_norm / horizon
        diag.update(log_norm=log_norm, stiffness=params.stiffness, storage="co-integrated")
        estimates.append(FtleEstimate(horizon=horizon, lambda_=lam,
                                      monodromy_norm=math.exp(min(log_norm, 700.0)),
                                      method=method, diagnostics=diag))
    return estimates[0] if single else estimates


def _amplitude_spec(params: SpdeParams) -> AmplitudeSpec:
    c_f = cubic_coefficient(params.model) if params.nonlinear else 0.0
    return AmplitudeSpec.eae(params.nu, params.sigma, params.epsilon, c_f)


def _slow_steps(params: SpdeParams, fast_per_slow: int) -> int:
    if fast_per_slow < 1 or params.n_steps % fast_per_slow:
        raise StepRatioError(f"{params.n_steps} fast steps are not a multiple of {fast_per_slow}")
    return params.n_steps // fast_per_slow


@dataclass
class ApproximationResult:
    error_sup: np.ndarray  # sup ‖u(t) - eps b(eps^2 t)‖_H on the slow grid
    stable_sup: np.ndarray  # sup ‖P_s u‖_H
    amplitude_sup: np.ndarray  # sup |b|
    x4_integral: np.ndarray  # int_0^T ‖u - sigma Z‖_X^4 dt
    amplitude: AmplitudeSpec = field(repr=False, default=None)


def approximation_error(params: SpdeParams, b0, paths: Paths, fast_per_slow: int = 1) -> ApproximationResult:
    """SPDE vs eps b(eps^2 t) on one shared noise, u0 = eps b0 e."""
    paths, _ = _as_batch(paths)
    model = params.model
    n_slow = _slow_steps(params, fast_per_slow)
    _check_paths(params, paths, params.n_steps)

    spec = _amplitude_spec(params)
    eps, k = params.epsilon, model.kernel_index
    dT = fast_per_slow * params.dt * eps ** 2
    kernel_scale = math.sqrt(model.noise_spectrum[k] * params.dt)
    e = model.basis.kernel_vector()

    b = np.broadcast_to(np.asarray(b0, dtype=float), (len(paths),)).copy()
    prop = _Propagator(params)
    u = eps * b[:, None] * e
    z_decay, z_std = ou_coefficients(model.eigenvalues, params.dt, model.noise_spectrum)
    Z = np.zeros_like(u)
    acc = np.zeros(len(paths))

    error_sup = np.linalg.norm(u - eps * b[:, None] * e, axis=-1)
    stable_sup = model.basis.norm_h(model.basis.stable_part(u))
    amplitude_sup = np.abs(b)
    x4 = np.zeros(len(paths))

    for n, z in enumerate(_draws(params, paths, params.n_steps)):
        x4 += params.dt * model.basis.norm_x(u - params.sigma * Z, model.x_space) ** 4
        u = prop.step(u, z)
        if z is not None:
            Z = z_decay * Z + z_std * z
            acc += kernel_scale * z[:, k]
        if (n + 1) % fast_per_slow:
            continue
        b = b + dT * spec.drift(b) + spec.noise_amp * eps * acc
        acc[:] = 0.0
        if not np.all(np.abs(b) <= 1e6):
            raise AmplitudeBlowUpError(f"amplitude left the guard at slow step {(n + 1) // fast_per_slow}")
        _guard(u, n + 1)
        error_sup = np.maximum(error_sup, np.linalg.norm(u - eps * b[:, None] * e, axis=-1))
        stable_sup = np.maximum(stable_sup, model.basis.norm_h(model.basis.stable_part(u)))
        amplitude_sup = np.maximum(amplitude_sup, np.abs(b))

    logger.debug(f"Approximation at eps={eps}: {n_slow} slow steps, median error {np.median(error_sup):.3e}")
    return ApproximationResult(error_sup, stable_sup, amplitude_sup, x4, spec)


@dataclass
class LinearizationResult:
    error_sup: np.ndarray  # sup ‖V(T) - phi(T) e‖_H
    stable_sup: np.ndarray  # sup ‖P_s V(T)‖_H
    stable_l2_half: np.ndarray  # ‖P_s V‖ in L^2(0, T0; H^{1/2})
    kernel_final: np.ndarray = field(default=None)


def linearization_error(params: SpdeParams, b0, paths: Paths, fast_per_slow: int = 1) -> LinearizationResult:
    """Rescaled SPDE tangent V(T) = v(T / eps^2) from v0 = e against the amplitude tangent phi."""
    paths, _ = _as_batch(paths)
    model = params.model
    _slow_steps(params, fast_per_slow)
    _check_paths(params, paths, params.n_steps)

    spec = _amplitude_spec(params)
    eps, k = params.epsilon, model.kernel_index
    dT = fast_per_slow * params.dt * eps ** 2
    kernel_scale = math.sqrt(model.noise_spectrum[k] * params.dt)
    e = model.basis.kernel_vector()

    b = np.broadcast_to(np.asarray(b0, dtype=float), (len(paths),)).copy()
    prop = _Propagator(params)
    u = eps * b[:, None] * e
    v = np.broadcast_to(e, u.shape).copy()
    phi = np.ones(len(paths))
    acc = np.zeros(len(paths))

    error_sup = np.zeros(len(paths))
    stable_sup = np.zeros(len(paths))
    l2_half = np.zeros(len(paths))

    for n, z in enumerate(_draws(params, paths, params.n_steps)):
        v = prop.tangent(u, v)
        u = prop.step(u, z)
        if z is not None:
            acc += kernel_scale * z[:, k]
        if (n + 1) % fast_per_slow:
            continue
        phi = phi * np.exp(dT * (spec.linear_coeff + 3.0 * spec.cubic_coeff * b ** 2))
        b = b + dT * spec.drift(b) + spec.noise_amp * eps * acc
        acc[:] = 0.0
        if not np.all(np.abs(b) <= 1e6):
            raise AmplitudeBlowUpError(f"amplitude left the guard at slow step {(n + 1) // fast_per_slow}")
        _guard(u, n + 1)
        stable = model.basis.stable_part(v)
        error_sup = np.maximum(error_sup, np.linalg.norm(v - phi[:, None] * e, axis=-1))
        stable_sup = np.maximum(stable_sup, model.basis.norm_h(stable))
        l2_half += dT * model.basis.norm_halpha(stable, 0.5) ** 2

    return LinearizationResult(error_sup, stable_sup, np.sqrt(l2_half), v[:, k])
