"""
Utility functions for the spde-ftle campaigns: summary statistics and
dependency checks.
"""

import importlib
import math
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

WILSON_Z = 1.959963984540054  # two-sided 95%


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> Tuple[float, float]:
    """Wilson score interval for a binomial fraction; (0, 1) when there are no trials"""
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1.0 + z ** 2 / trials
    centre = (p + z ** 2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z ** 2 / (4 * trials ** 2)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x"""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(x <= 0) or np.any(y <= 0):
        return float("nan")
    return float(stats.linregress(np.log(x), np.log(y)).slope)


def ks_distance(samples: Sequence[float], cdf: Callable) -> float:
    """Kolmogorov-Smirnov distance between samples and a continuous cdf"""
    return float(stats.kstest(np.asarray(samples, dtype=float), cdf).statistic)


def safe_import(module_name: str, package: Optional[str] = None) -> Optional[Any]:
    """Safely import a module, returning None if import fails"""
    try:
        return importlib.import_module(module_name, package)
    except ImportError as e:
        print(f"Warning: Could not import {module_name}: {e}")
        return None


def check_dependencies() -> dict:
    """Check which dependencies are available"""
    modules = ['numpy', 'scipy', 'numba', 'pydantic', 'pydantic_settings', 'dotenv', 'aiofiles']
    return {name: safe_import(name) is not None for name in modules}


OPTIONAL_DEPENDENCIES = {"numba"}


def print_dependency_status() -> List[str]:
    """Print the status of all dependencies; returns the missing required ones"""
    print("📦 Dependency Status:")
    print("=" * 30)

    available = check_dependencies()
    for dep, is_available in available.items():
        status = "✅ Available" if is_available else "❌ Missing"
        print(f"{dep:18} {status}")

    missing = [name for name, ok in available.items() if not ok]
    if missing:
        print(f"\n⚠️  Missing dependencies: {', '.join(missing)}")
        print("Run 'pip install -r requirements.txt' to install them.")
    else:
        print("\n🎉 All dependencies are available!")
    return [name for name in missing if name not in OPTIONAL_DEPENDENCIES]

