"""
Model comparison with Welch's t-test.

For every value of the retained dimensions, per-seed scores are averaged over
the other dimensions and the best model is declared only if it beats every
other model at p < 0.05.
"""

import logging
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd

from lattice_relax.metrics_loss import DegenerateSampleError, welch_ttest
from lattice_relax.types import InvalidInputError

logger = logging.getLogger(__name__)

SIGNIFICANCE_LEVEL = 0.05
DIMENSIONS = ("noise", "samples", "iteration", "class")
REPORTED_METRICS = ("iou", "mean_iou", "class_iou", "precision", "recall")
NO_SIGNIFICANCE = "no significance"
UNTESTABLE = "untestable"
REPORT_COLUMNS = ["metric", "outcome", "best_mean", "max_p"]


def _judge(samples: dict) -> tuple:
    """Return (outcome, best mean, largest p against the leader)."""
    means = {model: float(np.mean(values)) for model, values in samples.items()}
    leader = max(means, key=means.get)
    if len(samples) < 2:
        return UNTESTABLE, means[leader], float("nan")
    largest_p = 0.0
    try:
        for model, values in samples.items():
            if model == leader:
                continue
            _, p = welch_ttest(samples[leader], values)
            largest_p = max(largest_p, p)
    except DegenerateSampleError:
        return UNTESTABLE, means[leader], float("nan")
    if largest_p < SIGNIFICANCE_LEVEL and all(means[leader] > m for k, m in means.items() if k != leader):
        return leader, means[leader], largest_p
    return NO_SIGNIFICANCE, means[leader], largest_p


def significance_report(rows: pd.DataFrame, dims_to_average: Sequence[str]) -> pd.DataFrame:
    """
    Build the significance table.

    Args:
        rows (pd.DataFrame): Result rows (model, noise, samples, iteration, seed, class, metric, value)
        dims_to_average (Sequence[str]): Dimensions among noise, samples, iteration, class
            to average away before testing

    Returns:
        pd.DataFrame: One row per retained-dimension value and metric, with outcome
            set to a model name, 'no significance' or 'untestable'

    Raises:
        InvalidInputError: If an averaged dimension is unknown
    """
    unknown = [d for d in dims_to_average if d not in DIMENSIONS]
    if unknown:
        raise InvalidInputError(f"Cannot average over {unknown}; choose from {list(DIMENSIONS)}")
    retained: List[str] = [d for d in DIMENSIONS if d not in dims_to_average]
    data = rows[rows["metric"].isin(REPORTED_METRICS)]
    if data.empty:
        logger.warning("No reportable metrics in the input rows")
        return pd.DataFrame(columns=retained + REPORT_COLUMNS)
    per_seed = data.groupby(retained + ["metric", "model", "seed"], sort=True)["value"].mean().reset_index()
    records = []
    for key, cell in per_seed.groupby(retained + ["metric"], sort=True):
        samples = {model: group.sort_values("seed")["value"].to_numpy() for model, group in cell.groupby("model")}
        outcome, best_mean, largest_p = _judge(samples)
        records.append(list(key) + [outcome, best_mean, largest_p])
    report = pd.DataFrame(records, columns=retained + REPORT_COLUMNS)
    winners = int((~report["outcome"].isin([NO_SIGNIFICANCE, UNTESTABLE])).sum())
    logger.info(f"Significance report: {len(report)} cells, {winners} with a significant best model")
    return report


def write_report(report: pd.DataFrame, path: Union[str, Path]) -> None:
    try:
        report.to_csv(path, index=False, float_format="%.9g", lineterminator="\n")
        logger.info(f"Report saved to {path}")
    except Exception as e:
        logger.error(f"Failed to save report: {e}")
        raise
