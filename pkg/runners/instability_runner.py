import math
from typing import List, Optional

import numpy as np

from amplitude import AmplitudeSpec, omega0_holds
from catalog import cubic_coefficient
from config import fast_horizon
from models import CampaignConfig, Regime, SampleRecord, SummaryRow
from runners.base_runner import BaseRunner, CampaignError
from spde import SpdeParams, spde_ftle


class _Omega0Tracker:
    """Running sup of beta_eps(T) = eps W_k(T / eps^2) over the event window."""

    def __init__(self, batch: int, epsilon: float, kernel_index: int, kernel_scale: float, n_steps: int):
        self.epsilon = epsilon
        self.kernel_index = kernel_index
        self.kernel_scale = kernel_scale
        self.n_steps = n_steps
        self.brownian = np.zeros(batch)
        self.sup = np.zeros(batch)

    def __call__(self, step: int, u: np.ndarray, z: Optional[np.ndarray]):
        if z is None or step > self.n_steps:
            return
        self.brownian += self.kernel_scale * z[:, self.kernel_index]
        self.sup = np.maximum(self.sup, self.epsilon * np.abs(self.brownian))


class InstabilityRunner(BaseRunner):
    """Regime II, nu = eps^2 with sigma ~ nu: positive FTLEs with positive probability"""

    def __init__(self):
        super().__init__(Regime.II)

    def run_chunk(self, config: CampaignConfig, sample_indices: List[int],
                  epsilon: Optional[float]) -> List[SampleRecord]:
        if config.disable_nonlinearity:
            raise CampaignError("regime II needs the cubic nonlinearity for its attractor")
        model = self.model_for(config)
        eps, k = config.epsilon, model.kernel_index
        spec = AmplitudeSpec.a1(config.nu, config.sigma, cubic_coefficient(model))
        batch = self.attractors(config, spec, sample_indices, k, model.noise_spectrum[k])

        params = SpdeParams(model, config.nu, config.sigma, eps, config.dt, fast_horizon(config))
        event_steps = int(round(config.omega0_horizon / config.nu / config.dt))
        if event_steps > params.n_steps:
            self.logger.warning(f"Omega_0 window exceeds the FTLE horizon, truncated to {params.n_steps} steps")
        tracker = _Omega0Tracker(len(sample_indices), eps, k,
                                 math.sqrt(model.noise_spectrum[k] * config.dt), event_steps)

        u0 = eps * batch.values[:, None] * model.basis.kernel_vector()
        paths = self.paths_for(config, model, sample_indices, params.n_steps)
        estimates = spde_ftle(params, u0, paths, observer=tracker)

        events = omega0_holds(spec, batch.values, tracker.sup)
        return [
            SampleRecord(sample_index=index, seed=config.seed, lambda_=estimate.lambda_,
                         event_omega0=bool(event), attractor_value=float(value),
                         excluded=not bool(converged), epsilon=eps,
                         extras={"pullback_residual": float(residual)})
            for index, estimate, event, value, converged, residual in zip(
                sample_indices, estimates, events, batch.values, batch.converged, batch.residuals)
        ]

    def summarize(self, config: CampaignConfig, records: List[SampleRecord]) -> List[SummaryRow]:
        threshold = config.nu / 8
        positive = [r.lambda_ > threshold for r in records]
        on_event = [r.lambda_ > threshold for r in records if r.event_omega0]
        rows = [
            self.fraction_row("fraction_lambda_gt_nu_over_8", positive, ci_low_above=0.0),
            self.info_row("omega0_events", len(on_event)),
        ]
        # the conditional predicate only applies when the event was observed
        rows.append(self.fraction_row("conditional_fraction_lambda_gt_nu_over_8", on_event,
                                      threshold=0.8 if on_event else None))
        rows.append(self.info_row("median_lambda", np.median([r.lambda_ for r in records]) if records else np.nan))
        return rows
