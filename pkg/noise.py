"""
Reproducible Brownian increments for the SPDE and its amplitude equation.

Every normal draw is addressed by (master_seed, sample_index, mode, stream,
step): each (sample, mode, stream) owns a Philox counter stream keyed by a
SeedSequence, and step s is the s-th 64-bit output of that stream. Windows of
steps are generated independently by starting the counter at s // 4, so the
draws never depend on how a run is chunked or scheduled.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr, ndtri

logger = logging.getLogger(__name__)

FUTURE_STREAM = 0
PAST_STREAM = 1
INITIAL_STREAM = 2

MAX_STEP_INDEX = 2 ** 62
MAX_MODE_INDEX = 2 ** 32
OUTPUTS_PER_COUNTER = 4


class IndexSpaceOverflowError(OverflowError):
    """A (step, mode) address does not fit the counter space."""


class StepRatioError(ValueError):
    """Slow and fast step sizes are not commensurate."""


def _stream_key(master_seed: int, sample_index: int, mode: int, stream: int) -> np.ndarray:
    return np.random.SeedSequence([master_seed, sample_index, mode, stream]).generate_state(2, dtype=np.uint64)


def standard_normals(master_seed: int, sample_index: int, mode: int, stream: int,
                     start: int, count: int) -> np.ndarray:
    """Draws start .. start+count-1 of one (sample, mode, stream) counter stream."""
    if start < 0 or start + count > MAX_STEP_INDEX or not 0 <= mode < MAX_MODE_INDEX:
        raise IndexSpaceOverflowError(f"step window [{start}, {start + count}) of mode {mode} is out of range")
    counter = np.array([start // OUTPUTS_PER_COUNTER, 0, 0, 0], dtype=np.uint64)
    bitgen = np.random.Philox(key=_stream_key(master_seed, sample_index, mode, stream), counter=counter)
    skip = start % OUTPUTS_PER_COUNTER
    raw = bitgen.random_raw(skip + count)[skip:]
    uniform = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(uniform)


def ou_coefficients(rates: np.ndarray, dt: float, noise_spectrum: np.ndarray):
    """Exact per-mode OU step: decay exp(r dt) and std of int_0^dt e^{r(dt-s)} dW_s."""
    rates = np.asarray(rates, dtype=float)
    decay = np.exp(rates * dt)
    tiny = np.abs(rates * dt) < 1e-14
    safe = np.where(tiny, 1.0, rates)
    variance = np.where(tiny, dt, np.expm1(2.0 * safe * dt) / (2.0 * safe))
    return decay, np.sqrt(noise_spectrum * variance)


@dataclass(frozen=True)
class WienerPath:
    master_seed: int
    sample_index: int
    dt: float
    n_steps: int
    noise_spectrum: np.ndarray = field(repr=False)
    stream: int = FUTURE_STREAM

    @property
    def n_modes(self) -> int:
        return len(self.noise_spectrum)

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    def normals(self, start: int = 0, stop: int = None) -> np.ndarray:
        stop = self.n_steps if stop is None else stop
        if not 0 <= start <= stop <= self.n_steps:
            raise ValueError(f"window [{start}, {stop}) outside path of {self.n_steps} steps")
        out = np.empty((stop - start, self.n_modes))
        for mode in range(self.n_modes):
            out[:, mode] = standard_normals(self.master_seed, self.sample_index, mode, self.stream,
                                           start, stop - start)
        return out

    def block(self, start: int = 0, stop: int = None) -> np.ndarray:
        return self.normals(start, stop) * np.sqrt(self.noise_spectrum * self.dt)

    @cached_property
    def increments(self) -> np.ndarray:
        return self.block()


def generate(master_seed: int, sample_index: int, dt: float, n_steps: int,
             noise_spectrum: Union[np.ndarray, "object"], stream: int = FUTURE_STREAM) -> WienerPath:
    """Keyed path; `noise_spectrum` is the q_k array or a ModelSpec carrying one."""
    if dt <= 0 or n_steps < 1:
        raise ValueError(f"need dt > 0 and n_steps ≥ 1, got dt={dt}, n_steps={n_steps}")
    q = getattr(noise_spectrum, "noise_spectrum", noise_spectrum)
    q = np.asarray(q, dtype=float)
    if n_steps > MAX_STEP_INDEX or len(q) > MAX_MODE_INDEX:
        raise IndexSpaceOverflowError(f"{n_steps} steps x {len(q)} modes exceeds the counter space")
    return WienerPath(int(master_seed), int(sample_index), float(dt), int(n_steps), q, stream)


def batch_normals(paths: Sequence[WienerPath], start: int, stop: int) -> np.ndarray:
    """Window of draws for several samples, shape (stop - start, B, N)."""
    return np.stack([path.normals(start, stop) for path in paths], axis=1)


@dataclass(frozen=True)
class SlowPath:
    epsilon: float
    dT: float
    increments: np.ndarray = field(repr=False)

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dT

    def brownian(self) -> np.ndarray:
        zero = np.zeros((1,) + self.increments.shape[1:])
        return np.concatenate([zero, np.cumsum(self.increments, axis=0)])


def slow_rescale(path: WienerPath, epsilon: float, kernel_index: int, fast_per_slow: int = 1) -> SlowPath:
    """beta_eps(T) = eps * beta(T / eps^2) on a slow grid of fast_per_slow fast steps."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if fast_per_slow < 1 or path.n_steps % fast_per_slow:
        raise StepRatioError(f"{path.n_steps} fast steps are not a multiple of {fast_per_slow}")
    fast = path.block()[:, kernel_index]
    slow = epsilon * fast.reshape(-1, fast_per_slow).sum(axis=1)
    return SlowPath(epsilon, fast_per_slow * path.dt * epsilon ** 2, slow)


def kernel_increments(master_seed: int, sample_indices: Sequence[int], kernel_index: int,
                      q_kernel: float, dT: float, n_steps: int, stream: int = FUTURE_STREAM) -> np.ndarray:
    """Kernel-mode increments on the slow grid [0, n dT], shape (n, B)."""
    scale = np.sqrt(q_kernel * dT)
    cols = [standard_normals(master_seed, s, kernel_index, stream, 0, n_steps) for s in sample_indices]
    return scale * np.stack(cols, axis=1)


def past_increments(master_seed: int, sample_indices: Sequence[int], kernel_index: int,
                    q_kernel: float, dT: float, n_steps: int) -> np.ndarray:
    """Kernel increments on [-n dT, 0] in forward time order, shape (n, B).

    Draw j of the past stream covers [-(j+1) dT, -j dT], so a longer past only
    prepends draws and theta_t is an index offset.
    """
    return kernel_increments(master_seed, sample_indices, kernel_index, q_kernel, dT, n_steps,
                             stream=PAST_STREAM)[::-1]


def past_slow_path(master_seed: int, sample_index: int, kernel_index: int,
                   q_kernel: float, dT: float, n_steps: int) -> SlowPath:
    inc = past_increments(master_seed, [sample_index], kernel_index, q_kernel, dT, n_steps)[:, 0]
    return SlowPath(1.0, dT, inc)


def initial_field(master_seed: int, sample_index: int, n_modes: int) -> np.ndarray:
    """Random initial state with 1/k damped direction and norm uniform in (0, 1]."""
    z = np.array([standard_normals(master_seed, sample_index, k, INITIAL_STREAM, 0, 1)[0]
                  for k in range(n_modes + 1)])
    direction = z[:n_modes] / np.arange(1, n_modes + 1)
    radius = ndtr(z[n_modes])
    return radius * direction / np.linalg.norm(direction)


def stochastic_convolution(path: WienerPath, model, n_steps: int = None, shift: float = 0.0) -> np.ndarray:
    """Z(t) = int_0^t e^{(A+shift)(t-s)} dW_s by the exact OU recursion; shape (n+1, N)."""
    n_steps = path.n_steps if n_steps is None else n_steps
    if path.n_modes != model.n_modes:
        raise ValueError(f"path has {path.n_modes} modes, model has {model.n_modes}")
    rates = model.eigenvalues + shift * model.nu_weights
    decay, std = ou_coefficients(rates, path.dt, path.noise_spectrum)
    xi = path.normals(0, n_steps) * std
    Z = np.zeros((n_steps + 1, path.n_modes))
    for k in range(path.n_modes):
        if std[k] > 0:
            Z[1:, k] = lfilter([1.0], [1.0, -decay[k]], xi[:, k])
    return Z
