"""
Response-time statistics: nearest-rank percentiles, empirical CDF, aggregation over trials.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import ConfigError
from .settings import PERCENTILES

_logger = logging.getLogger(__name__)


def _check_q(q: float):
    if isinstance(q, bool) or not isinstance(q, (int,float)) or not (0 < q <= 100):
        raise ConfigError(f"invalid percentile {q!r}: must be in ]0, 100]")


def _nearest_rank(ordered: np.ndarray, q: float) -> float:
    n = len(ordered)
    rank = min(max(math.ceil(q * n / 100), 1), n)
    return float(ordered[rank - 1])


def percentile_nearest_rank(samples: Sequence[float]|np.ndarray, q: float) -> float:
    """
    Return the smallest sample such that at least `q` percent of the samples are lower or equal to it
    (1-based rank `ceil(q*n/100)`, clamped to [1, n]). The result is always one of the samples.
    """
    _check_q(q)
    if len(samples) == 0:
        raise ConfigError("cannot compute a percentile of an empty sample")
    return _nearest_rank(np.sort(np.asarray(samples, dtype=float)), q)


class CdfSeries(NamedTuple):
    values: np.ndarray
    """ Distinct sample values, ascending. """
    fractions: np.ndarray
    """ Fraction of samples lower or equal to each value. Last one is 1. """


def cdf(samples: Sequence[float]|np.ndarray) -> CdfSeries:
    """
    Empirical cumulative distribution of the samples (duplicates collapsed to the largest fraction).
    """
    if len(samples) == 0:
        raise ConfigError("cannot compute the CDF of an empty sample")
    values, counts = np.unique(np.asarray(samples, dtype=float), return_counts=True)
    fractions = np.cumsum(counts) / counts.sum()
    return CdfSeries(values, fractions)


def reduction(baseline: float, treated: float) -> float:
    """
    Relative reduction of `treated` compared to `baseline`. Negative if `treated` is greater.
    """
    if not (baseline > 0):
        raise ConfigError(f"invalid baseline {baseline!r} for a reduction: must be greater than 0")
    return (baseline - treated) / baseline


class Aggregate(NamedTuple):
    mean: float
    std: float
    """ Sample standard deviation (0 when there is a single value). """


def aggregate(values: Sequence[float]|np.ndarray) -> Aggregate:
    array = np.asarray(values, dtype=float)
    if len(array) == 0:
        raise ConfigError("cannot aggregate an empty sequence")
    mean = float(array.mean())
    std = float(array.std(ddof=1)) if len(array) > 1 else 0.0
    return Aggregate(mean, std)


class TrialPercentiles(NamedTuple):
    trial_index: int
    p50: float
    p95: float
    p99: float
    p995: float


@dataclass
class PercentileReport:
    per_trial: list[TrialPercentiles]
    aggregate: dict[str,Aggregate]
    """ Mean and standard deviation of each percentile field of `per_trial` (or pooled percentile, see `pooled`). """
    n_trials: int
    pooled: bool = False


def percentile_label(field: str) -> str:
    """
    Column label of a percentile field in output tables (e.g. `p995` -> `p99.5`).
    """
    return f"p{PERCENTILES[field]:g}"


def _trial_percentiles(trial_index: int, samples: Sequence[float]|np.ndarray) -> TrialPercentiles:
    if len(samples) == 0:
        raise ConfigError(f"trial {trial_index} has no response time")
    ordered = np.sort(np.asarray(samples, dtype=float))
    return TrialPercentiles(trial_index, *(_nearest_rank(ordered, q) for q in PERCENTILES.values()))


def build_report(samples_by_trial: Sequence[Sequence[float]|np.ndarray]) -> PercentileReport:
    """
    Compute each reported percentile per trial (trial index = position in `samples_by_trial`), then the mean and
    sample standard deviation across trials.
    """
    if len(samples_by_trial) == 0:
        raise ConfigError("cannot build a report without any trial")

    per_trial = [_trial_percentiles(i, samples) for i, samples in enumerate(samples_by_trial)]
    return PercentileReport(
        per_trial = per_trial,
        aggregate = {field: aggregate([getattr(entry, field) for entry in per_trial]) for field in PERCENTILES},
        n_trials = len(per_trial),
    )


def pooled_report(samples_by_trial: Sequence[Sequence[float]|np.ndarray]) -> PercentileReport:
    """
    Like `build_report`, but the aggregate of each percentile is computed over the samples of all trials pooled
    together, with a standard deviation of 0.
    """
    report = build_report(samples_by_trial)
    ordered = np.sort(np.concatenate([np.asarray(samples, dtype=float) for samples in samples_by_trial]))
    report.aggregate = {field: Aggregate(_nearest_rank(ordered, q), 0.0) for field, q in PERCENTILES.items()}
    report.pooled = True
    return report
