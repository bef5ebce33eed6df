#!/usr/bin/env python3
"""
spde-ftle - Main Entry Point

Runs Monte Carlo campaigns for finite-time Lyapunov exponents of SPDEs near
a pitchfork bifurcation, validates campaign configs and turns per-sample CSVs
into plot-ready series.

Exit codes: 0 all predicates pass, 2 a predicate failed, 1 error.
"""

import asyncio
import argparse
import sys
from typing import List, Optional
from orchestrator import CampaignOrchestrator
from config import settings, load_config, ConfigError
from models import CampaignConfig, RegimeReport
from report_writer import write_report, write_plotdata, PlotKindError
from utils import print_dependency_status
import logging

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.log_level.upper()),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PREDICATE_FAILED = 2

def _load(path: str) -> Optional[CampaignConfig]:
    """Load a config, printing every violation"""
    try:
        return load_config(path)
    except ConfigError as e:
        print(f"❌ Invalid config {path}:")
        for violation in e.violations:
            print(f"  - {violation}")
    except OSError as e:
        print(f"❌ Cannot read config {path}: {e}")
    return None

def print_report(report: RegimeReport):
    """Print a report summary in a formatted way"""
    print(f"\n📊 Regime {report.regime.value}: {len(report.records)} samples in {report.execution_time:.2f}s")
    print("=" * 60)
    for row in report.summary:
        icon = "ℹ️ " if row.passed is None else ("✅" if row.passed else "❌")
        interval = f" [{row.ci_low:.4g}, {row.ci_high:.4g}]" if row.ci_low is not None else ""
        print(f"  {icon} {row.metric}: {row.value:.6g}{interval}")
    print(f"\nOverall: {'✅ PASS' if report.passed else '❌ FAIL'}")

async def run_campaign(config_path: str) -> int:
    """Run a campaign from a config file"""
    config = _load(config_path)
    if config is None:
        return EXIT_ERROR

    print(f"\n🧪 Running {config.regime.value} campaign on {config.model.value} ({config.samples} samples)")
    orchestrator = CampaignOrchestrator()
    report = await orchestrator.run_campaign(config)
    if report.error:
        print(f"❌ Error: {report.error}")
        return EXIT_ERROR

    try:
        samples_path, summary_path = await write_report(report, config.output_path)
    except OSError as e:
        logger.error(f"Writing the report failed: {str(e)}")
        print(f"❌ Cannot write output: {e}")
        return EXIT_ERROR

    print_report(report)
    print(f"\n📁 {samples_path}\n📁 {summary_path}")
    return EXIT_OK if report.passed else EXIT_PREDICATE_FAILED

def validate_config(config_path: str) -> int:
    """Validate a config without running it"""
    config = _load(config_path)
    if config is None:
        return EXIT_ERROR
    print(f"✅ {config_path}: regime {config.regime.value}, model {config.model.value}, "
          f"{config.samples} samples, seed {config.seed}")
    return EXIT_OK

def run_health_check() -> int:
    """Check dependencies and list the registered campaign regimes"""
    print("🏥 Checking spde-ftle health...")
    missing = print_dependency_status()

    print("\n🔧 Campaign Regimes:")
    for regime, description in CampaignOrchestrator().describe().items():
        print(f"  {regime}: {description}")
    return EXIT_ERROR if missing else EXIT_OK

async def run_plotdata(csv_path: str, kind: str, output: Optional[str]) -> int:
    """Emit plot-ready series from a per-sample CSV"""
    try:
        text = await write_plotdata(csv_path, kind, output)
    except PlotKindError as e:
        print(f"❌ {e}")
        return EXIT_ERROR
    except (OSError, KeyError, ValueError) as e:
        print(f"❌ Cannot read {csv_path}: {e}")
        return EXIT_ERROR
    if not output:
        sys.stdout.write(text)
    return EXIT_OK

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="spde-ftle - Finite-time Lyapunov exponents of SPDEs near a pitchfork bifurcation"
    )

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    # Run command
    run_parser = subparsers.add_parser('run', help='Run a campaign and write its CSV files')
    run_parser.add_argument('config', help='Campaign config (TOML)')

    # Validate command
    validate_parser = subparsers.add_parser('validate', help='Check a campaign config without running it')
    validate_parser.add_argument('config', help='Campaign config (TOML)')

    # Plot data command
    plot_parser = subparsers.add_parser('plotdata', help='Turn a per-sample CSV into plot-ready series')
    plot_parser.add_argument('csv', help='Per-sample CSV written by run')
    plot_parser.add_argument('--kind', required=True, help='lambda-histogram, error-series or attractor-histogram')
    plot_parser.add_argument('--output', help='Write to this file instead of stdout')

    # Health command
    subparsers.add_parser('health', help='Check dependencies and list the campaign regimes')

    return parser

def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == 'run':
        return asyncio.run(run_campaign(args.config))

    elif args.command == 'validate':
        return validate_config(args.config)

    elif args.command == 'plotdata':
        return asyncio.run(run_plotdata(args.csv, args.kind, args.output))

    elif args.command == 'health':
        return run_health_check()

    parser.print_help()
    return EXIT_ERROR

if __name__ == "__main__":
    sys.exit(main())
