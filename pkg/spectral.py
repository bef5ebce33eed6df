"""
Truncated eigenmode expansions of the linear operator A.

A field is the coefficient vector of the model's orthonormal eigenfunctions.
Physical values live on a closed uniform grid with trapezoid weights, which
integrates every trigonometric polynomial of frequency below 2M exactly
(DCT-I orthogonality), so products of four retained modes are exact once
M > 2 * k_max.

All SpectralBasis methods take arrays with a leading batch shape (..., N).
The module-level functions are the typed single-sample API.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from models import XSpace

logger = logging.getLogger(__name__)


class DimensionMismatchError(ValueError):
    """A field does not match the basis it is used with."""


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    model_id: str
    domain_length: float
    mode_numbers: np.ndarray
    wavenumbers: np.ndarray
    eigenvalues: np.ndarray
    kernel_index: int
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray  # (M+1, N): e_k(x_j)
    derivatives: np.ndarray  # (M+1, N): e_k'(x_j)

    @classmethod
    def sine(cls, model_id: str, length: float, n_modes: int, eigenvalues: np.ndarray,
             kernel_index: int, grid_intervals: Optional[int] = None) -> "SpectralBasis":
        """Dirichlet family sqrt(2/L) sin(k pi x / L), k = 1..N."""
        modes = np.arange(1, n_modes + 1)
        q = modes * math.pi / length
        nodes, weights = _trapezoid_grid(length, _grid_size(modes, n_modes, grid_intervals))
        amp = math.sqrt(2.0 / length)
        values = amp * np.sin(np.outer(nodes, q))
        derivatives = amp * q * np.cos(np.outer(nodes, q))
        return cls(model_id, length, modes, q, np.asarray(eigenvalues, dtype=float),
                   kernel_index, nodes, weights, values, derivatives)

    @classmethod
    def cosine(cls, model_id: str, length: float, mode_numbers: np.ndarray, eigenvalues: np.ndarray,
               kernel_index: int, grid_intervals: Optional[int] = None) -> "SpectralBasis":
        """Neumann family: 1/sqrt(L) for m = 0, sqrt(2/L) cos(m pi x / L) otherwise."""
        modes = np.asarray(mode_numbers)
        q = modes * math.pi / length
        nodes, weights = _trapezoid_grid(length, _grid_size(modes, len(modes), grid_intervals))
        amp = np.where(modes == 0, math.sqrt(1.0 / length), math.sqrt(2.0 / length))
        values = amp * np.cos(np.outer(nodes, q))
        derivatives = -amp * q * np.sin(np.outer(nodes, q))
        return cls(model_id, length, modes, q, np.asarray(eigenvalues, dtype=float),
                   kernel_index, nodes, weights, values, derivatives)

    @property
    def n_modes(self) -> int:
        return self.values.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def spectral_gap(self) -> float:
        stable = np.delete(self.eigenvalues, self.kernel_index)
        return float(np.min(-stable))

    def kernel_vector(self) -> np.ndarray:
        e = np.zeros(self.n_modes)
        e[self.kernel_index] = 1.0
        return e

    def check(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != self.n_modes:
            raise DimensionMismatchError(
                f"{self.model_id}: expected {self.n_modes} coefficients, got {coeffs.shape[-1]}")
        return coeffs

    def to_physical(self, coeffs: np.ndarray) -> np.ndarray:
        return self.check(coeffs) @ self.values.T

    def derivative_physical(self, coeffs: np.ndarray) -> np.ndarray:
        return self.check(coeffs) @ self.derivatives.T

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.n_nodes:
            raise DimensionMismatchError(
                f"{self.model_id}: expected {self.n_nodes} grid values, got {values.shape[-1]}")
        return (values * self.weights) @ self.values

    def project_kernel(self, coeffs: np.ndarray) -> np.ndarray:
        return self.check(coeffs)[..., self.kernel_index]

    def stable_part(self, coeffs: np.ndarray) -> np.ndarray:
        out = np.array(self.check(coeffs), copy=True)
        out[..., self.kernel_index] = 0.0
        return out

    def norm_h(self, coeffs: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.check(coeffs), axis=-1)

    def norm_halpha(self, coeffs: np.ndarray, alpha: float) -> np.ndarray:
        if not -1.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [-1, 1], got {alpha}")
        scale = (1.0 - self.eigenvalues) ** alpha
        return np.linalg.norm(self.check(coeffs) * scale, axis=-1)

    def l4_norm(self, values: np.ndarray) -> np.ndarray:
        return np.sum(self.weights * np.asarray(values) ** 4, axis=-1) ** 0.25

    def x_table(self, x_space: XSpace) -> np.ndarray:
        """Grid table of the map whose L4 norm is the X (semi)norm."""
        return self.derivatives if x_space == XSpace.W14 else self.values

    def norm_x(self, coeffs: np.ndarray, x_space: XSpace) -> np.ndarray:
        return self.l4_norm(self.check(coeffs) @ self.x_table(x_space).T)

    def norm_w14(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = self.check(coeffs)
        return (self.l4_norm(self.to_physical(coeffs)) ** 4
                + self.l4_norm(self.derivative_physical(coeffs)) ** 4) ** 0.25

    def semigroup_factors(self, t: float, shift: float = 0.0,
                          shift_weights: Optional[np.ndarray] = None) -> np.ndarray:
        if t < 0:
            raise ValueError(f"semigroup time must be non-negative, got {t}")
        weights = 1.0 if shift_weights is None else shift_weights
        return np.exp(t * (self.eigenvalues + shift * weights))

    def apply_semigroup(self, coeffs: np.ndarray, t: float, shift: float = 0.0,
                        shift_weights: Optional[np.ndarray] = None) -> np.ndarray:
        return self.check(coeffs) * self.semigroup_factors(t, shift, shift_weights)


def _grid_size(modes: np.ndarray, n_modes: int, grid_intervals: Optional[int]) -> int:
    k_max = int(np.max(modes))
    if grid_intervals is None:
        return 2 * k_max + 2
    if grid_intervals < math.ceil(3 * n_modes / 2):
        raise DimensionMismatchError(
            f"grid of {grid_intervals} intervals is below the dealiasing reserve for {n_modes} modes")
    if grid_intervals <= 2 * k_max:
        logger.warning(f"grid of {grid_intervals} intervals aliases quartic products of mode {k_max}")
    return grid_intervals


def _trapezoid_grid(length: float, intervals: int):
    nodes = np.linspace(0.0, length, intervals + 1)
    weights = np.full(intervals + 1, length / intervals)
    weights[[0, -1]] *= 0.5
    return nodes, weights


@dataclass(frozen=True)
class SpectralField:
    model_id: str
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise DimensionMismatchError("a spectral field is a non-empty vector of coefficients")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("spectral coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n_modes(self) -> int:
        return self.coeffs.size


@dataclass(frozen=True)
class PhysicalField:
    values: np.ndarray = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


def _coeffs(basis: SpectralBasis, f: SpectralField) -> np.ndarray:
    if f.model_id != basis.model_id:
        raise DimensionMismatchError(f"field of {f.model_id} used with basis of {basis.model_id}")
    return basis.check(f.coeffs)


def to_physical(basis: SpectralBasis, f: SpectralField) -> PhysicalField:
    return PhysicalField(basis.to_physical(_coeffs(basis, f)), basis.nodes, basis.weights)


def to_spectral(basis: SpectralBasis, g: PhysicalField) -> SpectralField:
    if g.nodes.shape != basis.nodes.shape or not np.allclose(g.nodes, basis.nodes):
        raise DimensionMismatchError(f"physical field is not on the {basis.model_id} grid")
    return SpectralField(basis.model_id, basis.to_spectral(g.values))


def project_kernel(basis: SpectralBasis, f: SpectralField) -> float:
    return float(basis.project_kernel(_coeffs(basis, f)))


def stable_part(basis: SpectralBasis, f: SpectralField) -> SpectralField:
    return SpectralField(basis.model_id, basis.stable_part(_coeffs(basis, f)))


def norm_h(f: SpectralField) -> float:
    return float(np.linalg.norm(f.coeffs))


def norm_x(basis: SpectralBasis, f: SpectralField, x_space: XSpace) -> float:
    return float(basis.norm_x(_coeffs(basis, f), x_space))


def norm_halpha(basis: SpectralBasis, f: SpectralField, alpha: float) -> float:
    return float(basis.norm_halpha(_coeffs(basis, f), alpha))


def apply_semigroup(basis: SpectralBasis, f: SpectralField, t: float, shift: float = 0.0) -> SpectralField:
    return SpectralField(basis.model_id, basis.apply_semigroup(_coeffs(basis, f), t, shift))
