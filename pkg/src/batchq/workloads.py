"""Random workload generators with a traffic-intensity parameterisation.

Traffic intensity rho is the long-run task arrival rate over the total
service rate sum(mu). Paired-exponential arrivals bring two jobs per gap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import Workload
from .rng import WORKLOAD, generator


def _check_probs(values, probs, what):
    if len(values) == 0 or len(values) != len(probs):
        raise ValueError(f"{what}: values and probs must be nonempty and of equal length")
    if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
        raise ValueError(f"{what}: probabilities must be >= 0 and sum to 1")


@dataclass(frozen=True)
class SizeLaw:
    values: tuple[int, ...] = (1,)
    probs: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        _check_probs(self.values, self.probs, "size law")
        if min(self.values) < 1:
            raise ValueError("job sizes must be >= 1")

    @classmethod
    def constant(cls, k: int) -> "SizeLaw":
        return cls((k,), (1.0,))

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))


@dataclass(frozen=True)
class DueLaw:
    """Due time = arrival + an offset drawn from ``offsets``."""

    offsets: tuple[float, ...] = (0.0,)
    probs: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(float(v) for v in self.offsets))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        _check_probs(self.offsets, self.probs, "due law")
        if min(self.offsets) < 0:
            raise ValueError("due offsets must be >= 0")


@dataclass(frozen=True)
class ArrivalLaw:
    """``paired_exponential`` (mean_gap), ``poisson`` (rate) or ``explicit`` (times)."""

    kind: str = "paired_exponential"
    mean_gap: float | None = None
    rate: float | None = None
    times: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind == "paired_exponential":
            if not (self.mean_gap is not None and self.mean_gap > 0):
                raise ValueError("paired_exponential needs mean_gap > 0")
        elif self.kind == "poisson":
            if not (self.rate is not None and self.rate > 0):
                raise ValueError("poisson needs rate > 0")
        elif self.kind == "explicit":
            if self.times is None:
                raise ValueError("explicit arrivals need times")
            object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        else:
            raise ValueError(f"unknown arrival law {self.kind!r}")


@dataclass(frozen=True)
class WorkloadSpec:
    n: int
    arrivals: ArrivalLaw
    sizes: SizeLaw = field(default_factory=SizeLaw)
    dues: DueLaw = field(default_factory=DueLaw)
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.arrivals.kind == "explicit" and len(self.arrivals.times) != self.n:
            raise ValueError("explicit arrival list must have n entries")

    def with_seed(self, seed: int) -> "WorkloadSpec":
        return WorkloadSpec(self.n, self.arrivals, self.sizes, self.dues, seed)


def generate(spec: WorkloadSpec) -> Workload:
    """Deterministic in ``spec`` (including its seed)."""
    n = spec.n
    law = spec.arrivals
    if law.kind == "paired_exponential":
        pairs = (n + 1) // 2
        gaps = generator(spec.seed, WORKLOAD, 0).exponential(law.mean_gap, size=pairs - 1)
        starts = np.concatenate([[0.0], np.cumsum(gaps)])
        arrivals = np.repeat(starts, 2)[:n]
    elif law.kind == "poisson":
        gaps = generator(spec.seed, WORKLOAD, 0).exponential(1.0 / law.rate, size=n - 1)
        arrivals = np.concatenate([[0.0], np.cumsum(gaps)])
    else:
        arrivals = np.asarray(law.times, dtype=float)
        if arrivals[0] != 0 or np.any(np.diff(arrivals) < 0):
            raise ValueError("explicit arrivals must start at 0 and be nondecreasing")
    sizes = generator(spec.seed, WORKLOAD, 1).choice(spec.sizes.values, size=n, p=spec.sizes.probs)
    offsets = generator(spec.seed, WORKLOAD, 2).choice(spec.dues.offsets, size=n, p=spec.dues.probs)
    return Workload.from_arrays(arrivals, sizes, arrivals + offsets)


def mean_gap_for_rho(rho: float, mean_size: float, mus: Sequence[float]) -> float:
    """Mean gap between job pairs so that 2 * mean_size / gap = rho * sum(mus)."""
    if not rho > 0:
        raise ValueError("rho must be > 0")
    if not mean_size > 0:
        raise ValueError("mean job size must be > 0")
    total = float(np.sum(mus))
    if not total > 0:
        raise ValueError("total service rate must be > 0")
    return 2.0 * mean_size / (rho * total)


def rho_for_mean_gap(mean_gap: float, mean_size: float, mus: Sequence[float]) -> float:
    return 2.0 * mean_size / (mean_gap * float(np.sum(mus)))


def paired_spec(n: int, rho: float, sizes: SizeLaw, mus: Sequence[float],
                dues: DueLaw | None = None, seed: int = 0) -> WorkloadSpec:
    """The paired-exponential workload at traffic intensity ``rho``."""
    gap = mean_gap_for_rho(rho, sizes.mean, mus)
    return WorkloadSpec(n, ArrivalLaw("paired_exponential", mean_gap=gap), sizes, dues or DueLaw(), seed)


def spec_to_json(spec: WorkloadSpec) -> dict:
    law = spec.arrivals
    arrivals: dict = {"kind": law.kind}
    if law.kind == "paired_exponential":
        arrivals["mean_gap"] = law.mean_gap
    elif law.kind == "poisson":
        arrivals["rate"] = law.rate
    else:
        arrivals["times"] = list(law.times)
    return {"n": spec.n, "arrivals": arrivals,
            "sizes": {"values": list(spec.sizes.values), "probs": list(spec.sizes.probs)},
            "dues": {"offsets": list(spec.dues.offsets), "probs": list(spec.dues.probs)},
            "seed": spec.seed}


def spec_from_json(data: dict, mus: Sequence[float] | None = None) -> WorkloadSpec:
    """Parse a WorkloadSpec; arrivals may give ``rho`` instead of ``mean_gap``
    (needs ``mus``)."""
    sizes = SizeLaw(**data["sizes"]) if "sizes" in data else SizeLaw()
    dues = DueLaw(**data["dues"]) if "dues" in data else DueLaw()
    arr = dict(data.get("arrivals", {}))
    kind = arr.pop("kind", "paired_exponential")
    if "rho" in arr:
        if mus is None:
            raise ValueError("arrivals given by rho need the server rates")
        rho = float(arr.pop("rho"))
        if kind == "paired_exponential":
            arr["mean_gap"] = mean_gap_for_rho(rho, sizes.mean, mus)
        elif kind == "poisson":
            arr["rate"] = 2.0 / mean_gap_for_rho(rho, sizes.mean, mus)
        else:
            raise ValueError("rho only applies to random arrivals")
    if "times" in arr:
        arr["times"] = tuple(arr["times"])
    return WorkloadSpec(int(data["n"]), ArrivalLaw(kind, **arr), sizes, dues, int(data.get("seed", 0)))
