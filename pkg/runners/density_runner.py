import math
from typing import List, Optional

import numpy as np

from amplitude import (AmplitudeSpec, InvariantDensity, attractor_trajectory, birkhoff_average,
                       event_omega0, sde_exponents)
from config import settings, slow_horizon
from models import AmplitudeVariant, CampaignConfig, Regime, SampleRecord, SummaryRow
from noise import kernel_increments
from runners.base_runner import BaseRunner
from utils import ks_distance

KS_LIMIT = 0.05
MOMENT_TOLERANCE = 0.02
BIRKHOFF_FRACTION = 0.95
AMPLITUDE_MODE = 0


def amplitude_spec(config: CampaignConfig) -> AmplitudeSpec:
    if config.variant == AmplitudeVariant.A1:
        return AmplitudeSpec.a1(config.nu, config.sigma, config.cubic_coeff)
    return AmplitudeSpec.a2(config.cubic_coeff)


class DensityRunner(BaseRunner):
    """Stand-alone amplitude SDE: stationary density of the attractor and Birkhoff averages"""

    def run_chunk(self, config: CampaignConfig, sample_indices: List[int],
                  epsilon: Optional[float]) -> List[SampleRecord]:
        spec = amplitude_spec(config)
        batch = self.attractors(config, spec, sample_indices, AMPLITUDE_MODE)
        records = [
            SampleRecord(sample_index=index, seed=config.seed, attractor_value=float(value),
                         excluded=not bool(converged), extras={"pullback_residual": float(residual)})
            for index, value, converged, residual in zip(
                sample_indices, batch.values, batch.converged, batch.residuals)
        ]
        if self.regime == Regime.DENSITY:
            return records

        dT = settings.amplitude_dt
        n_steps = int(round(slow_horizon(config) / dT))
        future = kernel_increments(config.seed, sample_indices, AMPLITUDE_MODE, 1.0, dT, n_steps)
        trajectory = attractor_trajectory(spec, batch.values, future, dT)
        averages = birkhoff_average(trajectory, dT)
        lambdas = sde_exponents(spec, trajectory, dT)

        events = [None] * len(records)
        if spec.variant == AmplitudeVariant.A1:
            horizon = min(config.omega0_horizon, slow_horizon(config))
            events = event_omega0(spec, batch.values, future, dT, horizon)

        for record, average, lam, event in zip(records, averages, lambdas, events):
            record.lambda_ = float(lam)
            record.event_omega0 = None if event is None else bool(event)
            record.extras["birkhoff_average"] = float(average)
        return records

    def summarize(self, config: CampaignConfig, records: List[SampleRecord]) -> List[SummaryRow]:
        density = InvariantDensity(amplitude_spec(config))
        moment = density.moment(2)
        values = np.array([r.attractor_value for r in records])
        rows = [self.info_row("density_second_moment", moment)]

        if self.regime == Regime.DENSITY:
            empirical = float(np.mean(values ** 2)) if len(values) else math.nan
            stderr = float(np.std(values ** 2) / math.sqrt(len(values))) if len(values) else math.nan
            distance = ks_distance(values, density.cdf)
            rows.append(SummaryRow(metric="ks_distance", value=distance, passed=distance < KS_LIMIT))
            rows.append(SummaryRow(metric="second_moment", value=empirical,
                                   ci_low=empirical - 3 * stderr, ci_high=empirical + 3 * stderr,
                                   passed=bool(abs(empirical - moment) <= MOMENT_TOLERANCE)))
            return rows

        averages = [r.extras["birkhoff_average"] for r in records]
        rows.append(self.fraction_row("fraction_birkhoff_geq_quarter_moment",
                                      [a >= moment / 4 for a in averages], threshold=BIRKHOFF_FRACTION))
        lambdas = [r.lambda_ for r in records]
        rows.append(self.fraction_row("fraction_lambda_negative", [lam < 0 for lam in lambdas]))
        if any(r.event_omega0 is not None for r in records):
            on_event = [r.lambda_ >= 0.25 for r in records if r.event_omega0]
            rows.append(self.info_row("omega0_events", len(on_event)))
            rows.append(self.fraction_row("conditional_fraction_lambda_geq_quarter", on_event))
        return rows
