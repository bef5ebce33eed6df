#!/usr/bin/env python3
"""
Tests for the summary statistics and dependency helpers
"""

import math
import sys
import os

import numpy as np
import pytest
from scipy import stats

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from utils import check_dependencies, ks_distance, loglog_slope, safe_import, wilson_interval


def test_wilson_interval():
    low, high = wilson_interval(50, 100)
    assert low == pytest.approx(0.4038, abs=1e-4)
    assert high == pytest.approx(0.5962, abs=1e-4)
    assert wilson_interval(0, 0) == (0.0, 1.0)
    low, high = wilson_interval(0, 20)
    assert low == pytest.approx(0.0, abs=1e-12) and 0 < high < 0.2
    low, high = wilson_interval(20, 20)
    assert 0.8 < low < 1.0 and high == pytest.approx(1.0, abs=1e-12)


def test_loglog_slope():
    x = np.array([0.2, 0.1, 0.05])
    assert loglog_slope(x, 3 * x ** 2) == pytest.approx(2.0)
    assert math.isnan(loglog_slope([1.0], [1.0]))
    assert math.isnan(loglog_slope([1.0, 2.0], [0.0, 1.0]))


def test_ks_distance():
    samples = stats.norm.ppf((np.arange(1000) + 0.5) / 1000)
    assert ks_distance(samples, stats.norm.cdf) < 1e-3
    assert ks_distance(samples + 1.0, stats.norm.cdf) > 0.3


def test_dependency_check():
    available = check_dependencies()
    assert available["numpy"] and available["scipy"] and available["pydantic"]
    assert safe_import("no_such_module_here") is None


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
