import asyncio
import logging
import math
import time
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence

import numpy as np

from amplitude import AmplitudeSpec, AttractorBatch, pullback_batch
from catalog import ModelSpec, build_model
from config import settings
from models import CampaignConfig, Regime, RegimeReport, SampleRecord, SummaryRow
from noise import WienerPath, generate, past_increments
from utils import wilson_interval

logger = logging.getLogger(__name__)

MAX_EXCLUDED_FRACTION = 0.01


class CampaignError(RuntimeError):
    """A campaign could not be carried out as configured."""


class BaseRunner(ABC):
    """Base class for all campaign runners"""

    def __init__(self, regime: Regime):
        self.regime = regime
        self.logger = logging.getLogger(f"{__name__}.{regime.value}")

    @abstractmethod
    def run_chunk(self, config: CampaignConfig, sample_indices: List[int],
                  epsilon: Optional[float]) -> List[SampleRecord]:
        """Advance one chunk of samples together; runs in a worker thread"""
        pass

    @abstractmethod
    def summarize(self, config: CampaignConfig, records: List[SampleRecord]) -> List[SummaryRow]:
        """Acceptance rows; a pure function of the per-sample records"""
        pass

    def epsilons(self, config: CampaignConfig) -> List[Optional[float]]:
        return [config.epsilon]

    async def run(self, config: CampaignConfig) -> RegimeReport:
        start_time = time.time()
        self.logger.info(f"Starting {self.regime.value} campaign: {config.samples} samples, seed {config.seed}")
        records = await self.collect(config)
        summary = self.summarize(config, [r for r in records if not r.excluded])
        summary.append(self._exclusion_row(records))
        passed = all(row.passed for row in summary if row.passed is not None)
        if not passed:
            failed = [row.metric for row in summary if row.passed is False]
            self.logger.warning(f"Predicates failed: {', '.join(failed)}")
        return self.create_report(records, summary, passed, time.time() - start_time)

    async def collect(self, config: CampaignConfig) -> List[SampleRecord]:
        """Dispatch deterministic sample chunks to worker threads and re-sort the records"""
        semaphore = asyncio.Semaphore(max(1, settings.max_workers))
        chunk = max(1, settings.sample_chunk)
        grid = self.epsilons(config)

        async def run_one(indices: List[int], epsilon: Optional[float]) -> List[SampleRecord]:
            async with semaphore:
                result = await asyncio.to_thread(self.run_chunk, config, indices, epsilon)
                self.logger.info(f"Finished samples {indices[0]}..{indices[-1]}"
                                 + (f" at epsilon={epsilon:g}" if epsilon is not None else ""))
                return result

        tasks = []
        for epsilon in grid:
            for first in range(0, config.samples, chunk):
                indices = list(range(first, min(first + chunk, config.samples)))
                tasks.append(asyncio.create_task(run_one(indices, epsilon),
                                                 name=f"{self.regime.value}_{first}"))
        chunks = await asyncio.gather(*tasks)

        rank = {epsilon: position for position, epsilon in enumerate(grid)}
        records = [record for part in chunks for record in part]
        return sorted(records, key=lambda r: (rank.get(r.epsilon, 0), r.sample_index))

    def create_report(self, records: List[SampleRecord], summary: List[SummaryRow],
                      passed: bool, execution_time: float, error: str = None) -> RegimeReport:
        """Create a standardized regime report"""
        return RegimeReport(
            regime=self.regime,
            records=records,
            summary=summary,
            passed=passed,
            error=error,
            execution_time=execution_time,
        )

    def _exclusion_row(self, records: List[SampleRecord]) -> SummaryRow:
        excluded = sum(r.excluded for r in records)
        fraction = excluded / len(records) if records else 0.0
        if fraction > MAX_EXCLUDED_FRACTION:
            self.logger.error(f"{excluded} of {len(records)} samples excluded (non-converged pullback)")
        return SummaryRow(metric="excluded_fraction", value=fraction,
                          passed=fraction <= MAX_EXCLUDED_FRACTION)

    # Shared building blocks

    def model_for(self, config: CampaignConfig) -> ModelSpec:
        return build_model(config.model, config.n_modes, sh_wavenumber=config.sh_wavenumber,
                           domain_length=config.domain_length,
                           shifted_laplacian_drift=config.shifted_laplacian_drift)

    def paths_for(self, config: CampaignConfig, model: ModelSpec, sample_indices: Sequence[int],
                  n_steps: int) -> List[WienerPath]:
        return [generate(config.seed, index, config.dt, n_steps, model) for index in sample_indices]

    def attractors(self, config: CampaignConfig, spec: AmplitudeSpec, sample_indices: Sequence[int],
                   kernel_index: int, q_kernel: float = 1.0) -> AttractorBatch:
        """Pullback attractor a(omega) from each sample's two-sided past"""
        dT = settings.amplitude_dt

        def past(n_steps: int) -> np.ndarray:
            return past_increments(config.seed, sample_indices, kernel_index, q_kernel, dT, n_steps)

        batch = pullback_batch(spec, past, dT, max_horizon=settings.pullback_max_horizon)
        self.logger.debug(f"Pullback horizon {batch.horizon:g}, max residual {batch.residuals.max():.3e}")
        return batch

    @staticmethod
    def fraction_row(metric: str, flags: Sequence[bool], threshold: Optional[float] = None,
                     ci_low_above: Optional[float] = None) -> SummaryRow:
        """Fraction with its Wilson 95% interval; passes at value ≥ threshold or ci_low > ci_low_above"""
        flags = list(flags)
        successes, trials = int(sum(flags)), len(flags)
        low, high = wilson_interval(successes, trials)
        value = successes / trials if trials else math.nan
        passed = None
        if threshold is not None:
            passed = trials > 0 and value >= threshold
        if ci_low_above is not None:
            passed = trials > 0 and low > ci_low_above
        return SummaryRow(metric=metric, value=value, ci_low=low, ci_high=high, passed=passed)

    @staticmethod
    def info_row(metric: str, value: float) -> SummaryRow:
        return SummaryRow(metric=metric, value=float(value))
