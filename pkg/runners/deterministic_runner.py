from typing import List, Optional

import numpy as np

from config import fast_horizon
from models import CampaignConfig, Regime, SampleRecord, SummaryRow
from runners.base_runner import BaseRunner
from spde import SpdeParams, spde_ftle


class DeterministicRunner(BaseRunner):
    """Regime III, noise well below nu: the FTLE at the origin is close to nu"""

    def __init__(self):
        super().__init__(Regime.III)

    def run_chunk(self, config: CampaignConfig, sample_indices: List[int],
                  epsilon: Optional[float]) -> List[SampleRecord]:
        model = self.model_for(config)
        params = SpdeParams(model, config.nu, config.sigma, config.epsilon, config.dt,
                            fast_horizon(config), nonlinear=not config.disable_nonlinearity)
        u0 = np.zeros((len(sample_indices), model.n_modes))
        paths = self.paths_for(config, model, sample_indices, params.n_steps)
        estimates = spde_ftle(params, u0, paths)
        return [
            SampleRecord(sample_index=index, seed=config.seed, lambda_=estimate.lambda_,
                         epsilon=config.epsilon)
            for index, estimate in zip(sample_indices, estimates)
        ]

    def summarize(self, config: CampaignConfig, records: List[SampleRecord]) -> List[SummaryRow]:
        lambdas = np.array([r.lambda_ for r in records])
        return [
            self.fraction_row("fraction_lambda_gt_nu_over_2", lambdas > config.nu / 2, threshold=0.9),
            self.info_row("median_lambda_over_nu", np.median(lambdas) / config.nu if len(lambdas) else np.nan),
        ]
