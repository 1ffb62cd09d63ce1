"""Delay vectors and delay metrics.

All metrics take a time vector (completion times C or start-saturation
times V) plus the per-job reference times (arrivals or due times) they
subtract.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .model import IncompleteTraceError, Trace

SYM, SCH1, SCH2 = "sym", "sch1", "sch2"


@dataclass(frozen=True)
class DelayVectors:
    C: np.ndarray
    V: np.ndarray
    a: np.ndarray
    d: np.ndarray

    @property
    def D(self) -> np.ndarray:
        return self.C - self.a

    @property
    def L(self) -> np.ndarray:
        return self.C - self.d

    @property
    def T(self) -> np.ndarray:
        return np.maximum(self.L, 0.0)


def extract_vectors(trace: Trace) -> DelayVectors:
    """C_i is the last finish of job i, V_i its last start."""
    w = trace.workload
    n = w.n
    arr = trace.arrays
    idx = arr["job"] - 1
    counts = np.bincount(idx, minlength=n) if n else np.zeros(0, dtype=np.int64)
    short = np.nonzero(counts < w.sizes)[0]
    if len(short):
        i = int(short[0])
        raise IncompleteTraceError(f"job {i + 1} has {counts[i]} of {w.sizes[i]} task records")
    C = np.full(n, -np.inf)
    V = np.full(n, -np.inf)
    np.maximum.at(C, idx, arr["finish"])
    np.maximum.at(V, idx, arr["start"])
    return DelayVectors(C, V, w.arrivals.copy(), w.dues.copy())


def d_avg(vec, a) -> float:
    vec, a = _pair(vec, a)
    if len(vec) == 0:
        raise ValueError("need at least one job")
    return float(np.mean(vec - a))


def l_max(vec, d) -> float:
    vec, d = _pair(vec, d)
    return float(np.max(vec - d))


def d_max(vec, a) -> float:
    vec, a = _pair(vec, a)
    return float(np.max(vec - a))


def p_norm_delay(D, p: float = 2.0) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    D = np.asarray(D, dtype=float)
    if np.isinf(p):
        return float(np.max(np.abs(D)))
    return float(np.sum(np.abs(D) ** p) ** (1.0 / p))


def rms_tardiness(vec, d) -> float:
    vec, d = _pair(vec, d)
    return float(np.sqrt(np.mean(np.maximum(vec - d, 0.0) ** 2)))


def p2_norm(vec, a) -> float:
    vec, a = _pair(vec, a)
    return p_norm_delay(vec - a, 2.0)


def _pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return x, y


class Metric(NamedTuple):
    """A delay metric f(vec) with its reference vector ("a" or "d")."""

    name: str
    reference: str
    fn: Callable[[np.ndarray, np.ndarray], float]
    classes: frozenset

    def __call__(self, vec, a, d) -> float:
        return self.fn(vec, a if self.reference == "a" else d)

    def of(self, vectors: DelayVectors, which: str = "C") -> float:
        return self(getattr(vectors, which), vectors.a, vectors.d)


METRICS: dict[str, Metric] = {
    "d_avg": Metric("d_avg", "a", d_avg, frozenset({SYM, SCH1, SCH2})),
    "l_max": Metric("l_max", "d", l_max, frozenset({SCH1})),
    "d_max": Metric("d_max", "a", d_max, frozenset({SCH2})),
    "p2_norm": Metric("p2_norm", "a", p2_norm, frozenset({SCH2})),
    "rms_tardiness": Metric("rms_tardiness", "d", rms_tardiness, frozenset({SCH1})),
}


def get_metric(metric) -> Metric:
    if isinstance(metric, Metric):
        return metric
    try:
        return METRICS[metric]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}") from None


def metric_classes(metric) -> frozenset:
    """Which of the classes sym / sch1 / sch2 the metric belongs to."""
    return get_metric(metric).classes


def is_symmetric_metric(metric) -> bool:
    return SYM in metric_classes(metric)
