"""
CSV emission for campaign reports and plot-ready series.

Headers are versioned through the file names (`*_samples.v1.csv`,
`*_summary.v1.csv`); floats are written with 17 significant digits so a
rerun of the same config and seed reproduces the files byte for byte.
"""

import csv
import io
import logging
import math
import os
from typing import Dict, List, Optional, Tuple

import aiofiles
import numpy as np

from config import settings
from models import RegimeReport

logger = logging.getLogger(__name__)

FORMAT_VERSION = "v1"
SAMPLE_COLUMNS = ["sample_index", "seed", "lambda", "event_omega0", "attractor_value",
                  "error_sup", "excluded", "epsilon"]
SUMMARY_COLUMNS = ["metric", "value", "ci_low", "ci_high", "pass"]
PLOT_KINDS = ("lambda-histogram", "error-series", "attractor-histogram")
HISTOGRAM_BINS = 20


class PlotKindError(ValueError):
    """Unknown plotdata kind."""


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def output_paths(output_path: str) -> Tuple[str, str]:
    """Per-sample and summary file names; SPDE_FTLE_OUTPUT_DIR replaces the directory."""
    if settings.output_dir:
        output_path = os.path.join(settings.output_dir, os.path.basename(output_path))
    stem = output_path[:-4] if output_path.endswith(".csv") else output_path
    return f"{stem}_samples.{FORMAT_VERSION}.csv", f"{stem}_summary.{FORMAT_VERSION}.csv"


def _to_csv(header: List[str], rows: List[List[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def samples_csv(report: RegimeReport) -> str:
    extras = sorted({key for record in report.records for key in record.extras})
    rows = []
    for r in report.records:
        row = [r.sample_index, r.seed, r.lambda_, r.event_omega0, r.attractor_value,
               r.error_sup, r.excluded, r.epsilon]
        row += [r.extras.get(key) for key in extras]
        rows.append([format_value(value) for value in row])
    return _to_csv(SAMPLE_COLUMNS + extras, rows)


def summary_csv(report: RegimeReport) -> str:
    rows = [[format_value(value) for value in (row.metric, row.value, row.ci_low, row.ci_high, row.passed)]
            for row in report.summary]
    return _to_csv(SUMMARY_COLUMNS, rows)


async def write_text(path: str, text: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    async with aiofiles.open(path, "w", encoding="utf-8", newline="") as f:
        await f.write(text)


async def write_report(report: RegimeReport, output_path: str) -> Tuple[str, str]:
    samples_path, summary_path = output_paths(output_path)
    await write_text(samples_path, samples_csv(report))
    await write_text(summary_path, summary_csv(report))
    logger.info(f"Wrote {len(report.records)} samples to {samples_path} and summary to {summary_path}")
    return samples_path, summary_path


async def read_samples(path: str) -> List[Dict[str, str]]:
    async with aiofiles.open(path, "r", encoding="utf-8", newline="") as f:
        text = await f.read()
    return list(csv.DictReader(io.StringIO(text)))


def _floats(rows: List[Dict[str, str]], column: str) -> np.ndarray:
    values = [float(row[column]) for row in rows
              if row.get(column) not in (None, "") and row.get("excluded") != "true"]
    return np.array(values, dtype=float)


def _histogram(values: np.ndarray) -> List[List[str]]:
    values = values[np.isfinite(values)]
    if values.size == 0:
        return []
    counts, edges = np.histogram(values, bins=HISTOGRAM_BINS)
    return [[format_value(float(lo)), format_value(float(hi)), str(int(c))]
            for lo, hi, c in zip(edges[:-1], edges[1:], counts)]


def _error_series(rows: List[Dict[str, str]]) -> List[List[str]]:
    grouped: Dict[float, List[float]] = {}
    for row in rows:
        if row.get("excluded") == "true" or row.get("error_sup") in (None, "") or row.get("epsilon") in (None, ""):
            continue
        grouped.setdefault(float(row["epsilon"]), []).append(float(row["error_sup"]))
    out = []
    for epsilon, errors in grouped.items():
        median = float(np.median(errors))
        log_median = math.log(median) if median > 0 else -math.inf
        out.append([format_value(epsilon), format_value(math.log(epsilon)),
                    format_value(median), format_value(log_median)])
    return out


def plotdata(rows: List[Dict[str, str]], kind: str) -> str:
    """Tidy plot-ready series from per-sample rows"""
    if kind == "lambda-histogram":
        return _to_csv(["bin_low", "bin_high", "count"], _histogram(_floats(rows, "lambda")))
    if kind == "attractor-histogram":
        return _to_csv(["bin_low", "bin_high", "count"], _histogram(_floats(rows, "attractor_value")))
    if kind == "error-series":
        return _to_csv(["epsilon", "log_epsilon", "median_error_sup", "log_median_error_sup"],
                       _error_series(rows))
    raise PlotKindError(f"unknown plotdata kind '{kind}' (expected one of: {', '.join(PLOT_KINDS)})")


async def write_plotdata(csv_path: str, kind: str, output: Optional[str] = None) -> str:
    text = plotdata(await read_samples(csv_path), kind)
    if output:
        await write_text(output, text)
    return text
