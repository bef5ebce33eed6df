from typing import List, Optional

import numpy as np

from amplitude import AmplitudeSpec, InvariantDensity
from catalog import cubic_coefficient
from config import fast_horizon
from models import CampaignConfig, Regime, SampleRecord, SummaryRow
from runners.base_runner import BaseRunner, CampaignError
from spde import SpdeParams, spde_ftle

ORACLE_FACTOR = 2.0


def amplitude_for(config: CampaignConfig, cubic: float) -> AmplitudeSpec:
    """(a2) at nu = 0, (a3) for small nu > 0; both with sigma = eps^2"""
    if config.regime == Regime.IV_CRITICAL:
        return AmplitudeSpec.a2(cubic)
    return AmplitudeSpec.a3(config.nu, config.sigma, cubic)


class CriticalRunner(BaseRunner):
    """Regime IV, at the bifurcation: negative FTLEs from the attractor"""

    def run_chunk(self, config: CampaignConfig, sample_indices: List[int],
                  epsilon: Optional[float]) -> List[SampleRecord]:
        if config.disable_nonlinearity:
            raise CampaignError("regime IV needs the cubic nonlinearity for its attractor")
        model = self.model_for(config)
        eps, k = config.epsilon, model.kernel_index
        spec = amplitude_for(config, cubic_coefficient(model))
        batch = self.attractors(config, spec, sample_indices, k, model.noise_spectrum[k])

        params = SpdeParams(model, config.nu, config.sigma, eps, config.dt, fast_horizon(config))
        u0 = eps * batch.values[:, None] * model.basis.kernel_vector()
        paths = self.paths_for(config, model, sample_indices, params.n_steps)
        estimates = spde_ftle(params, u0, paths)
        return [
            SampleRecord(sample_index=index, seed=config.seed, lambda_=estimate.lambda_,
                         attractor_value=float(value), excluded=not bool(converged), epsilon=eps,
                         extras={"pullback_residual": float(residual)})
            for index, estimate, value, converged, residual in zip(
                sample_indices, estimates, batch.values, batch.converged, batch.residuals)
        ]

    def summarize(self, config: CampaignConfig, records: List[SampleRecord]) -> List[SummaryRow]:
        lambdas = np.array([r.lambda_ for r in records])
        model = self.model_for(config)
        spec = amplitude_for(config, cubic_coefficient(model))
        # slow-scale closed form alpha + 3 c_F E[a^2], rescaled to fast time
        oracle = config.epsilon ** 2 * (spec.linear_coeff
                                        + 3 * spec.cubic_coeff * InvariantDensity(spec).moment(2))
        median = float(np.median(lambdas)) if len(lambdas) else np.nan
        ratio = median / oracle if oracle else np.nan
        return [
            self.fraction_row("fraction_lambda_negative", lambdas < 0, threshold=0.9),
            self.info_row("median_lambda", median),
            self.info_row("lambda_oracle", oracle),
            SummaryRow(metric="median_to_oracle_ratio", value=ratio,
                       passed=bool(1 / ORACLE_FACTOR <= ratio <= ORACLE_FACTOR)),
        ]
