from typing import Dict, List, Optional

import numpy as np

from amplitude import AmplitudeSpec
from catalog import cubic_coefficient
from config import fast_horizon, grid_parameters
from models import CampaignConfig, Regime, SampleRecord, SummaryRow
from runners.base_runner import BaseRunner
from spde import SpdeParams, approximation_error, linearization_error
from utils import loglog_slope

# (metric, record field, minimum slope, maximum slope)
APPROX_SLOPES = [
    ("error_slope", "error_sup", 1.7, 2.3),
    ("stable_slope", "stable_sup", 1.7, None),
    ("x4_integral_slope", "x4_integral", 1.7, None),
    ("amplitude_slope", "amplitude_sup", -0.2, 0.2),
]
LINEARIZATION_SLOPES = [
    ("error_slope", "error_sup", 0.8, None),
    ("stable_slope", "stable_sup", 0.8, None),
    ("stable_l2_half_slope", "stable_l2_half", 1.7, None),
]


class ApproximationRunner(BaseRunner):
    """Order of the amplitude approximation over an epsilon grid, on coupled noise"""

    def epsilons(self, config: CampaignConfig) -> List[Optional[float]]:
        return list(config.epsilon_grid)

    def run_chunk(self, config: CampaignConfig, sample_indices: List[int],
                  epsilon: Optional[float]) -> List[SampleRecord]:
        model = self.model_for(config)
        nu, sigma = grid_parameters(config, epsilon)
        nonlinear = not config.disable_nonlinearity
        params = SpdeParams(model, nu, sigma, epsilon, config.dt, fast_horizon(config, epsilon),
                            nonlinear=nonlinear)

        cubic = cubic_coefficient(model) if nonlinear else 0.0
        spec = AmplitudeSpec.eae(nu, sigma, epsilon, cubic)
        if config.initial_state == "zero" or spec.noise_amp == 0 or spec.cubic_coeff == 0:
            b0 = np.zeros(len(sample_indices))
            converged = np.ones(len(sample_indices), dtype=bool)
        else:
            k = model.kernel_index
            batch = self.attractors(config, spec, sample_indices, k, model.noise_spectrum[k])
            b0, converged = batch.values, batch.converged

        paths = self.paths_for(config, model, sample_indices, params.n_steps)
        if self.regime == Regime.APPROX_ORDER:
            result = approximation_error(params, b0, paths, config.fast_per_slow)
            extras = {"stable_sup": result.stable_sup, "amplitude_sup": result.amplitude_sup,
                      "x4_integral": result.x4_integral}
        else:
            result = linearization_error(params, b0, paths, config.fast_per_slow)
            extras = {"stable_sup": result.stable_sup, "stable_l2_half": result.stable_l2_half}

        return [
            SampleRecord(sample_index=index, seed=config.seed, attractor_value=float(b0[i]),
                         error_sup=float(result.error_sup[i]), excluded=not bool(converged[i]),
                         epsilon=epsilon, extras={name: float(values[i]) for name, values in extras.items()})
            for i, index in enumerate(sample_indices)
        ]

    def summarize(self, config: CampaignConfig, records: List[SampleRecord]) -> List[SummaryRow]:
        grid = list(config.epsilon_grid)
        checks = APPROX_SLOPES if self.regime == Regime.APPROX_ORDER else LINEARIZATION_SLOPES
        medians: Dict[str, List[float]] = {field: [] for _, field, _, _ in checks}
        rows: List[SummaryRow] = []

        for epsilon in grid:
            at_eps = [r for r in records if r.epsilon == epsilon]
            for _, field, _, _ in checks:
                values = [r.error_sup if field == "error_sup" else r.extras[field] for r in at_eps]
                median = float(np.median(values)) if values else np.nan
                medians[field].append(median)
                rows.append(self.info_row(f"median_{field}[eps={epsilon:g}]", median))

        if all(m == 0 for m in medians["error_sup"]):
            # coupled runs without noise and nonlinearity agree exactly
            rows.append(SummaryRow(metric="max_error_sup", value=0.0, passed=True))
            return rows

        for metric, field, lowest, highest in checks:
            slope = loglog_slope(grid, medians[field])
            passed = bool(np.isfinite(slope) and slope >= lowest and (highest is None or slope <= highest))
            rows.append(SummaryRow(metric=metric, value=slope, passed=passed))
        return rows
