"""Job, workload, system-state and trace types.

A trace is the immutable log of per-task service records produced by a run.
The system state (xi, gamma) is never stored; it is rebuilt from the
records whenever a check needs it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np


class IncompleteTraceError(ValueError):
    """A job has fewer task records than its size."""


@dataclass(frozen=True)
class JobSpec:
    id: int
    arrival: float
    size: int
    due: float

    def __post_init__(self):
        if self.size < 1 or int(self.size) != self.size:
            raise ValueError(f"job {self.id}: size must be a positive integer, got {self.size}")
        for name in ("arrival", "due"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"job {self.id}: {name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class Workload:
    """The job instance: arrival times, batch sizes and due times."""

    jobs: tuple[JobSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(self.jobs))
        for pos, job in enumerate(self.jobs, start=1):
            if job.id != pos:
                raise ValueError(f"job ids must be 1..n in arrival order; position {pos} has id {job.id}")
        if self.jobs and self.jobs[0].arrival != 0:
            raise ValueError("first arrival must be at time 0")
        for prev, job in zip(self.jobs, self.jobs[1:]):
            if job.arrival < prev.arrival:
                raise ValueError(f"arrivals must be nondecreasing (job {job.id})")

    @classmethod
    def from_arrays(cls, arrivals: Sequence[float], sizes: Sequence[int],
                    dues: Sequence[float] | None = None) -> "Workload":
        if dues is None:
            dues = arrivals
        if not (len(arrivals) == len(sizes) == len(dues)):
            raise ValueError("arrivals, sizes and dues must have equal length")
        return cls(tuple(JobSpec(i + 1, float(a), int(k), float(d))
                         for i, (a, k, d) in enumerate(zip(arrivals, sizes, dues))))

    @property
    def n(self) -> int:
        return len(self.jobs)

    @property
    def k_max(self) -> int:
        return max((j.size for j in self.jobs), default=0)

    @cached_property
    def arrivals(self) -> np.ndarray:
        return np.array([j.arrival for j in self.jobs], dtype=float)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([j.size for j in self.jobs], dtype=np.int64)

    @cached_property
    def dues(self) -> np.ndarray:
        return np.array([j.due for j in self.jobs], dtype=float)

    @property
    def total_tasks(self) -> int:
        return int(self.sizes.sum()) if self.jobs else 0

    def to_json(self) -> dict:
        return {"jobs": [{"id": j.id, "arrival": j.arrival, "size": j.size, "due": j.due}
                         for j in self.jobs]}

    @classmethod
    def from_json(cls, data: dict) -> "Workload":
        return cls(tuple(JobSpec(int(j["id"]), float(j["arrival"]), int(j["size"]), float(j["due"]))
                         for j in data["jobs"]))


@dataclass(frozen=True)
class SystemState:
    time: float
    xi: tuple[int, ...]
    gamma: tuple[int, ...]


class TaskRecord(NamedTuple):
    job: int
    task_index: int
    server: int
    start: float
    finish: float


@dataclass(frozen=True)
class Trace:
    workload: Workload
    servers: int
    policy: str
    records: tuple[TaskRecord, ...]
    rng_seed: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @cached_property
    def arrays(self) -> dict[str, np.ndarray]:
        recs = self.records
        return {
            "job": np.fromiter((r.job for r in recs), dtype=np.int64, count=len(recs)),
            "task_index": np.fromiter((r.task_index for r in recs), dtype=np.int64, count=len(recs)),
            "server": np.fromiter((r.server for r in recs), dtype=np.int64, count=len(recs)),
            "start": np.fromiter((r.start for r in recs), dtype=float, count=len(recs)),
            "finish": np.fromiter((r.finish for r in recs), dtype=float, count=len(recs)),
        }

    @cached_property
    def event_times(self) -> np.ndarray:
        arr = self.arrays
        return np.unique(np.concatenate([self.workload.arrivals, arr["start"], arr["finish"]]))

    @cached_property
    def path(self) -> "StatePath":
        return state_path(self)


@dataclass(frozen=True)
class StatePath:
    """Right-continuous state sampled at every event time of a trace.

    Row ``r`` of ``xi``/``gamma`` holds the state on ``[times[r], times[r+1])``.
    """

    times: np.ndarray
    xi: np.ndarray
    gamma: np.ndarray

    def index_at(self, t) -> np.ndarray:
        """Row index in force at time(s) ``t``; -1 means before the first event."""
        return np.searchsorted(self.times, t, side="right") - 1


def _event_deltas(trace: Trace):
    """Per-event (time, job column, d_xi, d_gamma) arrays for a trace."""
    w = trace.workload
    arr = trace.arrays
    n = w.n
    jobs_col = np.arange(n)
    k = w.sizes
    t = np.concatenate([w.arrivals, arr["start"], arr["finish"]])
    col = np.concatenate([jobs_col, arr["job"] - 1, arr["job"] - 1])
    nr = len(arr["job"])
    dxi = np.concatenate([k, np.zeros(nr, dtype=np.int64), -np.ones(nr, dtype=np.int64)])
    dgamma = np.concatenate([k, -np.ones(nr, dtype=np.int64), np.zeros(nr, dtype=np.int64)])
    return t, col, dxi, dgamma


def state_at_times(trace: Trace, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dense (len(times), n) matrices of xi and gamma, right-continuous.

    ``times`` must be sorted. Memory is O(len(times) * n); callers with huge
    instances should pass chunks.
    """
    times = np.asarray(times, dtype=float)
    n = trace.workload.n
    et, col, dxi, dgamma = _event_deltas(trace)
    xi = np.zeros((len(times), n), dtype=np.int64)
    gamma = np.zeros((len(times), n), dtype=np.int64)
    if n == 0 or len(times) == 0:
        return xi, gamma
    # each event contributes from the first sample time >= its timestamp
    row = np.searchsorted(times, et, side="left")
    keep = row < len(times)
    np.add.at(xi, (row[keep], col[keep]), dxi[keep])
    np.add.at(gamma, (row[keep], col[keep]), dgamma[keep])
    return np.cumsum(xi, axis=0), np.cumsum(gamma, axis=0)


def state_path(trace: Trace) -> StatePath:
    times = trace.event_times
    xi, gamma = state_at_times(trace, times)
    return StatePath(times, xi, gamma)


def reconstruct_state(trace: Trace, t: float) -> SystemState:
    """State (xi(t), gamma(t)) after every event stamped <= t has been applied."""
    if t < 0:
        raise ValueError("t must be >= 0")
    xi, gamma = state_at_times(trace, np.array([t]))
    return SystemState(float(t), tuple(int(v) for v in xi[0]), tuple(int(v) for v in gamma[0]))


@dataclass(frozen=True)
class Violation:
    kind: str
    time: float | None
    entities: tuple

    def __str__(self):
        at = "" if self.time is None else f" at t={self.time!r}"
        return f"{self.kind}{at}: {self.entities}"


def validate_trace(trace: Trace) -> list[Violation]:
    """Every broken trace invariant, as data. Empty list means the trace is valid."""
    out: list[Violation] = []
    w = trace.workload
    n, m = w.n, trace.servers
    seen: dict[int, set] = {}
    by_server: dict[int, list[TaskRecord]] = {}
    for r in trace.records:
        if not 1 <= r.job <= n:
            out.append(Violation("unknown-job", r.start, (r.job,)))
            continue
        if not 1 <= r.server <= m:
            out.append(Violation("unknown-server", r.start, (r.job, r.server)))
        if r.finish < r.start:
            out.append(Violation("finish-before-start", r.start, (r.job, r.task_index)))
        if r.start < w.jobs[r.job - 1].arrival:
            out.append(Violation("starts-before-arrival", r.start, (r.job, r.task_index)))
        idx = seen.setdefault(r.job, set())
        if r.task_index in idx:
            out.append(Violation("duplicate-task", r.start, (r.job, r.task_index)))
        idx.add(r.task_index)
        by_server.setdefault(r.server, []).append(r)
    for job in w.jobs:
        count = len(seen.get(job.id, ()))
        if count != job.size:
            out.append(Violation("record-count", None, (job.id, count, job.size)))
    for server, recs in sorted(by_server.items()):
        recs = sorted(recs, key=lambda r: (r.start, r.finish))
        for a, b in zip(recs, recs[1:]):
            if b.start < a.finish:
                out.append(Violation("server-overlap", b.start, (server, (a.job, a.task_index), (b.job, b.task_index))))
    # state checks are derived from the records; a record-level fault already
    # explains any state anomaly it causes, so only report them on clean records
    if out or n == 0:
        return out
    path = trace.path
    k = w.sizes
    bad = (path.gamma < 0) | (path.gamma > path.xi) | (path.xi > k[None, :])
    for r, i in zip(*np.nonzero(bad)):
        out.append(Violation("state-bounds", float(path.times[r]),
                             (int(i) + 1, int(path.xi[r, i]), int(path.gamma[r, i]))))
    busy = (path.xi - path.gamma).sum(axis=1)
    for r in np.nonzero(busy > m)[0]:
        out.append(Violation("capacity", float(path.times[r]), (int(busy[r]), m)))
    return out


def departure_times(trace: Trace) -> dict[int, float]:
    """Job completion times C_i: the finish of the job's last task."""
    w = trace.workload
    finish: dict[int, float] = {}
    count: dict[int, int] = {}
    for r in trace.records:
        count[r.job] = count.get(r.job, 0) + 1
        if r.job not in finish or r.finish > finish[r.job]:
            finish[r.job] = r.finish
    for job in w.jobs:
        if count.get(job.id, 0) < job.size:
            raise IncompleteTraceError(
                f"job {job.id} has {count.get(job.id, 0)} of {job.size} task records")
    return {job.id: finish[job.id] for job in w.jobs}
