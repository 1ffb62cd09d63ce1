"""Service-time distributions sampled by inverse transform.

Every kind exposes survival, quantile and the quantile of the residual life
after an elapsed service time. Sampling only ever goes through ``quantile``
so two runs can share uniforms.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

NUMERIC_TOL = 1e-12


class DistributionClass(enum.Enum):
    NBU = "NBU"
    NWU = "NWU"
    NBU_AND_NWU = "NBU_AND_NWU"
    UNKNOWN = "UNKNOWN"

    @property
    def is_nbu(self) -> bool:
        return self in (DistributionClass.NBU, DistributionClass.NBU_AND_NWU)


def _check_u(u: float) -> None:
    if not 0.0 <= u < 1.0:
        raise ValueError(f"uniform must lie in [0, 1), got {u}")


class ServiceDistribution:
    kind: str = ""

    def survival(self, x: float) -> float:
        raise NotImplementedError

    def quantile(self, u: float) -> float:
        raise NotImplementedError

    def quantiles(self, u: np.ndarray) -> np.ndarray:
        """Vectorised ``quantile``; no domain checks."""
        return np.array([self.quantile(float(v)) for v in u])

    def residual_quantile(self, elapsed: float, u: float) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def classify(self) -> DistributionClass:
        raise NotImplementedError

    @property
    def service_rate(self) -> float:
        return 1.0 / self.mean()

    def _check_elapsed(self, elapsed: float) -> None:
        if elapsed < 0:
            raise ValueError("elapsed time must be >= 0")
        if self.survival(elapsed) <= 0.0:
            raise ValueError(f"{self.kind}: elapsed time {elapsed} has zero survival probability")

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(ServiceDistribution):
    rate: float
    kind = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be > 0")

    def survival(self, x):
        if x < 0:
            raise ValueError("x must be >= 0")
        return math.exp(-self.rate * x)

    def quantile(self, u):
        _check_u(u)
        return -math.log1p(-u) / self.rate

    def quantiles(self, u):
        return -np.log1p(-np.asarray(u)) / self.rate

    def residual_quantile(self, elapsed, u):
        self._check_elapsed(elapsed)
        return self.quantile(u)

    def mean(self):
        return 1.0 / self.rate

    def classify(self):
        return DistributionClass.NBU_AND_NWU

    def to_json(self):
        return {"kind": self.kind, "rate": self.rate}


@dataclass(frozen=True)
class ShiftedExponential(ServiceDistribution):
    """Constant ``shift`` followed by an exponential tail with rate ``rate``."""

    shift: float
    rate: float
    kind = "shifted_exponential"

    def __post_init__(self):
        if not self.shift >= 0:
            raise ValueError("shift must be >= 0")
        if not self.rate > 0:
            raise ValueError("rate must be > 0")

    @classmethod
    def with_mean_rate(cls, mu: float) -> "ShiftedExponential":
        """Shift 1/(3 mu), tail rate 3 mu / 2: mean exactly 1/mu."""
        return cls(1.0 / (3.0 * mu), 1.5 * mu)

    def survival(self, x):
        if x < 0:
            raise ValueError("x must be >= 0")
        if x < self.shift:
            return 1.0
        return math.exp(-self.rate * (x - self.shift))

    def quantile(self, u):
        _check_u(u)
        return self.shift - math.log1p(-u) / self.rate

    def quantiles(self, u):
        return self.shift - np.log1p(-np.asarray(u)) / self.rate

    def residual_quantile(self, elapsed, u):
        self._check_elapsed(elapsed)
        _check_u(u)
        return max(self.shift - elapsed, 0.0) - math.log1p(-u) / self.rate

    def mean(self):
        return self.shift + 1.0 / self.rate

    def classify(self):
        return DistributionClass.NBU if self.shift > 0 else DistributionClass.NBU_AND_NWU

    def to_json(self):
        return {"kind": self.kind, "shift": self.shift, "rate": self.rate}


@dataclass(frozen=True)
class ParetoLomax(ServiceDistribution):
    """Survival (1 + x/sigma)^(-alpha); alpha > 1 so the mean is finite."""

    sigma: float
    alpha: float
    kind = "pareto_lomax"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if not self.alpha > 1:
            raise ValueError("alpha must be > 1 (finite mean)")

    def survival(self, x):
        if x < 0:
            raise ValueError("x must be >= 0")
        return (1.0 + x / self.sigma) ** (-self.alpha)

    def quantile(self, u):
        _check_u(u)
        return self.sigma * math.expm1(-math.log1p(-u) / self.alpha)

    def quantiles(self, u):
        return self.sigma * np.expm1(-np.log1p(-np.asarray(u)) / self.alpha)

    def residual_quantile(self, elapsed, u):
        self._check_elapsed(elapsed)
        _check_u(u)
        return (self.sigma + elapsed) * math.expm1(-math.log1p(-u) / self.alpha)

    def mean(self):
        return self.sigma / (self.alpha - 1.0)

    def classify(self):
        return DistributionClass.NWU

    def to_json(self):
        return {"kind": self.kind, "sigma": self.sigma, "alpha": self.alpha}


@dataclass(frozen=True)
class Deterministic(ServiceDistribution):
    value: float
    kind = "deterministic"

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError("value must be >= 0")

    def survival(self, x):
        if x < 0:
            raise ValueError("x must be >= 0")
        return 1.0 if x < self.value else 0.0

    def quantile(self, u):
        _check_u(u)
        return self.value

    def quantiles(self, u):
        return np.full(np.shape(u), self.value, dtype=float)

    def residual_quantile(self, elapsed, u):
        self._check_elapsed(elapsed)
        _check_u(u)
        return self.value - elapsed

    def mean(self):
        return self.value

    def classify(self):
        return DistributionClass.NBU

    def to_json(self):
        return {"kind": self.kind, "value": self.value}


def classify_numeric(dist: ServiceDistribution, grid: Iterable[tuple[float, float]],
                     tol: float = NUMERIC_TOL) -> DistributionClass:
    """Classify by testing the NBU/NWU product inequality on a finite grid."""
    le = ge = True
    empty = True
    for tau, t in grid:
        empty = False
        lhs = dist.survival(tau + t)
        rhs = dist.survival(tau) * dist.survival(t)
        le &= lhs <= rhs + tol
        ge &= lhs >= rhs - tol
    if empty:
        raise ValueError("grid must be nonempty")
    if le and ge:
        return DistributionClass.NBU_AND_NWU
    if le:
        return DistributionClass.NBU
    if ge:
        return DistributionClass.NWU
    return DistributionClass.UNKNOWN


def default_grid(dist: ServiceDistribution, points: int = 50, span: float = 3.0):
    """points x points grid of (tau, t) covering [0, span * mean]."""
    xs = np.linspace(0.0, span * dist.mean(), points)
    return [(float(a), float(b)) for a in xs for b in xs]


_KINDS = {
    "exponential": lambda p: Exponential(float(p["rate"])),
    "shifted_exponential": lambda p: ShiftedExponential(float(p["shift"]), float(p["rate"])),
    "pareto_lomax": lambda p: ParetoLomax(float(p["sigma"]), float(p["alpha"])),
    "deterministic": lambda p: Deterministic(float(p["value"])),
}


def from_json(data: dict) -> ServiceDistribution:
    try:
        build = _KINDS[data["kind"]]
    except KeyError:
        raise ValueError(f"unknown distribution kind {data.get('kind')!r}") from None
    try:
        return build(data)
    except KeyError as exc:
        raise ValueError(f"{data['kind']}: missing parameter {exc.args[0]!r}") from None
