"""
Catalog of the example SPDEs near their pitchfork bifurcation.

Each entry fixes the eigenbasis of A, the kernel mode, the noise spectrum and
the X space. The three nonlinearities share one form,

    F(u) = -G^T W (G u)^3,

with G the grid table of values (plain cubic -u^3) or of first derivatives
(surface growth d/dx(h_x^3), after integrating by parts against the cosine
basis; the boundary term vanishes because h_x = 0 at both Neumann ends).
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from models import DissipativityReport, ModelName, XSpace
from spectral import SpectralBasis

logger = logging.getLogger(__name__)

ZERO_EIGENVALUE_TOL = 1e-12


class NonlinearityError(ValueError):
    """The projected nonlinearity is not a stable cubic."""


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: ModelName
    basis: SpectralBasis = field(repr=False)
    noise_spectrum: np.ndarray = field(repr=False)
    x_space: XSpace
    nu_weights: np.ndarray = field(repr=False)
    shifted_laplacian_drift: bool = False
    trace_condition: str = ""

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.basis.eigenvalues

    @property
    def kernel_index(self) -> int:
        return self.basis.kernel_index

    @property
    def spectral_gap(self) -> float:
        return self.basis.spectral_gap

    @property
    def domain_length(self) -> float:
        return self.basis.domain_length

    @property
    def n_modes(self) -> int:
        return self.basis.n_modes

    @property
    def x_table(self) -> np.ndarray:
        return self.basis.x_table(self.x_space)


@lru_cache(maxsize=32)
def build_model(name: ModelName, n_modes: int = 32, *, sh_wavenumber: int = 1,
                domain_length: Optional[float] = None, shifted_laplacian_drift: bool = False,
                grid_intervals: Optional[int] = None) -> ModelSpec:
    name = ModelName(name)
    if shifted_laplacian_drift and name != ModelName.SURFACE_GROWTH:
        raise ValueError("shifted_laplacian_drift only applies to the surface-growth model")

    if name == ModelName.ALLEN_CAHN:
        length = domain_length or math.pi
        q = np.arange(1, n_modes + 1) * math.pi / length
        basis = SpectralBasis.sine(name.value, length, n_modes, 1.0 - q ** 2, 0, grid_intervals)
        spec = ModelSpec(name, basis, np.ones(n_modes), XSpace.L4, np.ones(n_modes),
                         trace_condition="space-time white: sum 1/(2(k^2-1)) converges")

    elif name == ModelName.SWIFT_HOHENBERG:
        k = sh_wavenumber
        if n_modes <= k:
            raise ValueError(f"swift-hohenberg with k={k} needs more than {k} modes")
        length = k * math.pi
        modes = np.arange(n_modes)
        basis = SpectralBasis.cosine(name.value, length, modes, -(1.0 - (modes / k) ** 2) ** 2,
                                     k, grid_intervals)
        spec = ModelSpec(name, basis, np.ones(n_modes), XSpace.L4, np.ones(n_modes),
                         trace_condition="space-time white: sum 1/(2(1-m^2/k^2)^2) converges")

    else:
        length = domain_length or math.pi
        modes = np.arange(1, n_modes + 1)
        q = modes * math.pi / length
        mu0 = (math.pi / length) ** 2
        basis = SpectralBasis.cosine(name.value, length, modes, -q ** 4 + mu0 * q ** 2, 0, grid_intervals)
        noise = np.ones(n_modes)
        # moving frame: mean mode is not retained, first Fourier mode is removed from the noise
        noise[0] = 0.0
        weights = q ** 2 if shifted_laplacian_drift else np.ones(n_modes)
        spec = ModelSpec(name, basis, noise, XSpace.W14, weights, shifted_laplacian_drift,
                         trace_condition="space-time white, derivative: sum q^2/(2(q^4-mu0 q^2)) converges")

    _check_spectrum(spec)
    logger.debug(f"Built {name.value} with {n_modes} modes, gap {spec.spectral_gap:.4g}")
    return spec


def _check_spectrum(spec: ModelSpec):
    eig = spec.eigenvalues
    zeros = np.flatnonzero(np.abs(eig) < ZERO_EIGENVALUE_TOL)
    if zeros.tolist() != [spec.kernel_index]:
        raise ValueError(f"{spec.name.value}: expected a single zero eigenvalue at {spec.kernel_index}")
    if spec.spectral_gap <= 0:
        raise ValueError(f"{spec.name.value}: stable eigenvalues must be negative")


def evaluate_F(model: ModelSpec, u: np.ndarray) -> np.ndarray:
    G = model.x_table
    g = model.basis.check(u) @ G.T
    return -(model.basis.weights * g ** 3) @ G


def evaluate_DF(model: ModelSpec, u: np.ndarray, h: np.ndarray) -> np.ndarray:
    G = model.x_table
    gu = model.basis.check(u) @ G.T
    gh = model.basis.check(h) @ G.T
    return -3.0 * (model.basis.weights * gu ** 2 * gh) @ G


def apply_jacobian(model: ModelSpec, u: np.ndarray, columns: np.ndarray) -> np.ndarray:
    """DF(u) applied to the columns of a (..., N, K) stack."""
    G = model.x_table
    gu = model.basis.check(u) @ G.T
    scaled = (-3.0 * model.basis.weights * gu ** 2)[..., :, None] * (G @ columns)
    return G.T @ scaled


def jacobian(model: ModelSpec, u: np.ndarray) -> np.ndarray:
    """Matrix of DF(u) on the truncated space; symmetric negative semidefinite."""
    G = model.x_table
    gu = model.basis.check(u) @ G.T
    return (G.T * (-3.0 * model.basis.weights * gu ** 2)[..., None, :]) @ G


def cubic_coefficient(model: ModelSpec) -> float:
    e = model.basis.kernel_vector()
    c = float(evaluate_F(model, e) @ e)
    if c >= 0:
        raise NonlinearityError(f"{model.name.value}: <F(e), e> = {c} is not negative")
    return c


def random_field(model: ModelSpec, rng: np.random.Generator, size=None) -> np.ndarray:
    """i.i.d. normal coefficients damped by 1/k (H^alpha-like regularity)."""
    shape = (model.n_modes,) if size is None else (*np.atleast_1d(size), model.n_modes)
    return rng.standard_normal(shape) / np.arange(1, model.n_modes + 1)


def check_dissipativity(model: ModelSpec, trials: int, seed: int = 0,
                        u: Optional[np.ndarray] = None, v: Optional[np.ndarray] = None,
                        tol: float = 1e-10) -> DissipativityReport:
    if trials < 1:
        raise ValueError("trials must be ≥ 1")
    rng = np.random.default_rng(seed)
    u = random_field(model, rng, trials) if u is None else np.atleast_2d(u)
    v = random_field(model, rng, trials) if v is None else np.atleast_2d(v)
    d = u - v
    inner = np.sum((evaluate_F(model, u) - evaluate_F(model, v)) * d, axis=-1)
    dist4 = model.basis.norm_x(d, model.x_space) ** 4
    w14 = model.basis.norm_w14(d) ** 4

    nonzero = dist4 > 0
    c_est = float(np.min(-inner[nonzero] / dist4[nonzero])) if nonzero.any() else 0.0
    w14_c = float(np.min(-inner[nonzero] / w14[nonzero])) if nonzero.any() else None
    scale = np.maximum(dist4, 1.0)
    max_inner = float(np.max(inner))
    passed = bool(np.all(inner <= tol * scale) and c_est > 0)
    if not passed:
        logger.warning(f"{model.name.value}: dissipativity check failed (max inner {max_inner:.3e}, c_est {c_est:.3e})")
    return DissipativityReport(
        model=model.name,
        trials=len(inner),
        max_inner_product=max_inner,
        max_bound_gap=float(np.max(inner + c_est * dist4)),
        c_est=c_est,
        w14_c_est=w14_c if model.x_space == XSpace.W14 else None,
        passed=passed,
    )
