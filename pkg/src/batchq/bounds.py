"""Closed-form bounds: FUT's additive delay gap and the factor-2 margin."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import ServiceDistribution
from .model import Workload


@dataclass(frozen=True)
class GapBound:
    per_job: np.ndarray
    average: float
    coarse: float
    warning: str | None = None


def _rates(servers) -> tuple[np.ndarray, str | None]:
    if all(isinstance(s, ServiceDistribution) for s in servers):
        warning = None
        if not all(s.classify().is_nbu for s in servers):
            warning = "non-NBU servers: bound hypothesis not met"
        return np.array([s.service_rate for s in servers], dtype=float), warning
    return np.asarray(servers, dtype=float), None


def fut_gap_bound(workload: Workload, mus: Sequence[float] | Sequence[ServiceDistribution]) -> GapBound:
    """Average over jobs of sum_{l <= min(k_i, m)} 1 / (mu_(1) + ... + mu_(l)),
    with rates sorted ascending, and the coarser (ln(min(k_max, m)) + 1) / mu_(1).

    ``mus`` may be service rates or distributions (rate = 1 / mean); with
    distributions, non-NBU servers set ``warning``.
    """
    if workload.n == 0:
        raise ValueError("empty workload")
    rates, warning = _rates(list(mus))
    if len(rates) == 0 or np.any(rates <= 0):
        raise ValueError("need at least one positive service rate")
    rates = np.sort(rates)
    m = len(rates)
    terms = np.cumsum(1.0 / np.cumsum(rates))
    per_job = terms[np.minimum(workload.sizes, m) - 1]
    coarse = (math.log(min(workload.k_max, m)) + 1.0) / float(rates[0])
    return GapBound(per_job, float(per_job.mean()), coarse, warning)


def two_approx_margin(mean_fcfs: float, mean_other: float) -> float:
    """2 * mean_other - mean_fcfs; nonnegative when the factor-2 bound holds."""
    if mean_fcfs < 0 or mean_other < 0:
        raise ValueError("means must be >= 0")
    return 2.0 * mean_other - mean_fcfs


def harmonic_log_bound(k: int) -> float:
    """ln(k) + 1, an upper bound on the k-th harmonic number."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return math.log(k) + 1.0
