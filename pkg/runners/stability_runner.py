from typing import List, Optional

import numpy as np

from config import fast_horizon
from models import CampaignConfig, Regime, SampleRecord, SummaryRow
from noise import initial_field
from runners.base_runner import BaseRunner
from spde import SpdeParams, spde_ftle

# slack on lambda_T <= nu for the time discretisation
LAMBDA_TOLERANCE = 0.02


class StabilityRunner(BaseRunner):
    """Regime I, before the bifurcation: every FTLE stays below nu"""

    def __init__(self):
        super().__init__(Regime.I)

    def run_chunk(self, config: CampaignConfig, sample_indices: List[int],
                  epsilon: Optional[float]) -> List[SampleRecord]:
        model = self.model_for(config)
        params = SpdeParams(model, config.nu, config.sigma, config.epsilon or 1.0, config.dt,
                            fast_horizon(config), nonlinear=not config.disable_nonlinearity)
        if config.initial_state == "zero":
            u0 = np.zeros((len(sample_indices), model.n_modes))
        else:
            u0 = np.stack([initial_field(config.seed, index, model.n_modes) for index in sample_indices])

        paths = self.paths_for(config, model, sample_indices, params.n_steps)
        estimates = spde_ftle(params, u0, paths)
        return [
            SampleRecord(sample_index=index, seed=config.seed, lambda_=estimate.lambda_,
                         epsilon=config.epsilon,
                         extras={"u0_norm": float(np.linalg.norm(u))})
            for index, estimate, u in zip(sample_indices, estimates, u0)
        ]

    def summarize(self, config: CampaignConfig, records: List[SampleRecord]) -> List[SummaryRow]:
        lambdas = np.array([r.lambda_ for r in records])
        bound = config.nu + LAMBDA_TOLERANCE
        return [
            self.fraction_row("all_lambda_leq_nu", lambdas <= bound, threshold=1.0),
            self.info_row("max_lambda", lambdas.max() if len(lambdas) else np.nan),
            self.info_row("median_lambda", np.median(lambdas) if len(lambdas) else np.nan),
        ]
