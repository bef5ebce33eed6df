import asyncio
import time
from typing import Dict, Any
from runners.base_runner import BaseRunner
from runners.stability_runner import StabilityRunner
from runners.instability_runner import InstabilityRunner
from runners.deterministic_runner import DeterministicRunner
from runners.critical_runner import CriticalRunner
from runners.approximation_runner import ApproximationRunner
from runners.density_runner import DensityRunner
from models import CampaignConfig, RegimeReport, Regime
import logging

logger = logging.getLogger(__name__)

class CampaignOrchestrator:
    """Main orchestrator that dispatches campaigns to their regime runners"""

    def __init__(self):
        self.runners: Dict[Regime, BaseRunner] = {}
        self._initialize_runners()

    def _initialize_runners(self):
        """Initialize one runner per regime tag"""
        self.runners[Regime.I] = StabilityRunner()
        self.runners[Regime.II] = InstabilityRunner()
        self.runners[Regime.III] = DeterministicRunner()
        self.runners[Regime.IV_CRITICAL] = CriticalRunner(Regime.IV_CRITICAL)
        self.runners[Regime.IV_SMALL_NU] = CriticalRunner(Regime.IV_SMALL_NU)
        self.runners[Regime.APPROX_ORDER] = ApproximationRunner(Regime.APPROX_ORDER)
        self.runners[Regime.LINEARIZATION_ORDER] = ApproximationRunner(Regime.LINEARIZATION_ORDER)
        self.runners[Regime.DENSITY] = DensityRunner(Regime.DENSITY)
        self.runners[Regime.BIRKHOFF] = DensityRunner(Regime.BIRKHOFF)

        logger.debug(f"Initialized {len(self.runners)} runners")

    async def run_campaign(self, config: CampaignConfig) -> RegimeReport:
        """Run a validated campaign; failures come back as a failed report"""
        start_time = time.time()
        runner = self.runners[config.regime]

        try:
            task = asyncio.create_task(runner.run(config), name=f"{config.regime.value}_campaign")
            report = await task
            logger.info(f"Campaign {config.regime.value} finished in {report.execution_time:.2f}s, "
                        f"{'passed' if report.passed else 'failed'}")
            return report

        except Exception as e:
            logger.error(f"Campaign {config.regime.value} failed: {str(e)}")
            return runner.create_report(
                records=[],
                summary=[],
                passed=False,
                execution_time=time.time() - start_time,
                error=f"{type(e).__name__}: {e}"
            )

    def describe(self) -> Dict[str, Any]:
        """Describe the available campaign regimes"""
        return {regime.value: type(runner).__doc__ for regime, runner in self.runners.items()}
