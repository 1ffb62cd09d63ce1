"""Majorization predicates and sample-path ordering checks between two traces.

The prefix checks compare policy P (gamma or xi) against policy pi (xi) at
every merged event time. State is right-continuous and piecewise constant,
so checking event times is exhaustive.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .model import Trace, state_at_times

CHUNK_CELLS = 4_000_000


@dataclass(frozen=True)
class OrderingReport:
    holds: bool
    first_violation: dict | None = None
    checked_times: int = 0
    details: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {"holds": self.holds, "first_violation": self.first_violation,
                "checked_times": self.checked_times, **self.details}


def _desc_cumsum(x) -> np.ndarray:
    return np.cumsum(np.sort(np.asarray(x, dtype=float))[::-1])


def _asc_cumsum(x) -> np.ndarray:
    return np.cumsum(np.sort(np.asarray(x, dtype=float)))


def _check_len(x, y):
    if len(x) != len(y):
        raise ValueError("vectors must have equal length")


def majorize(x, y, tol: float = 0.0) -> bool:
    """x is majorized by y."""
    _check_len(x, y)
    if len(x) == 0:
        return True
    sx, sy = _desc_cumsum(x), _desc_cumsum(y)
    return bool(np.all(sx[:-1] <= sy[:-1] + tol) and abs(sx[-1] - sy[-1]) <= tol)


def weak_majorize_below(x, y, tol: float = 0.0) -> bool:
    """x is weakly submajorized by y: every top-j partial sum of x <= y's."""
    _check_len(x, y)
    return bool(np.all(_desc_cumsum(x) <= _desc_cumsum(y) + tol))


def weak_majorize_above(x, y, tol: float = 0.0) -> bool:
    """x is weakly supermajorized by y: every bottom-j partial sum of x >= y's."""
    _check_len(x, y)
    return bool(np.all(_asc_cumsum(x) >= _asc_cumsum(y) - tol))


def _same_workload(traceP: Trace, tracePi: Trace):
    wp, wpi = traceP.workload, tracePi.workload
    if wp.n != wpi.n or not (np.array_equal(wp.arrivals, wpi.arrivals)
                             and np.array_equal(wp.sizes, wpi.sizes)
                             and np.array_equal(wp.dues, wpi.dues)):
        raise ValueError("traces must share one workload")


def merged_times(*traces: Trace) -> np.ndarray:
    return np.unique(np.concatenate([t.event_times for t in traces]))


def _chunks(times: np.ndarray, n: int):
    step = max(1, CHUNK_CELLS // max(n, 1))
    for lo in range(0, len(times), step):
        yield times[lo:lo + step]


def _prefix_check(traceP: Trace, tracePi: Trace, use_gamma: bool,
                  reduce: Callable[[np.ndarray], np.ndarray],
                  labels: Callable[[int], object], label_name: str,
                  times: np.ndarray | None = None) -> OrderingReport:
    """Generic driver: ``reduce`` maps a (T, n) state matrix to (T, J) prefix sums;
    the check is lhs <= rhs elementwise."""
    _same_workload(traceP, tracePi)
    if times is None:
        times = merged_times(traceP, tracePi)
    n = traceP.workload.n
    if n == 0:
        return OrderingReport(True, None, len(times))
    for chunk in _chunks(times, n):
        xiP, gammaP = state_at_times(traceP, chunk)
        xiPi, _ = state_at_times(tracePi, chunk)
        lhs = reduce(gammaP if use_gamma else xiP)
        rhs = reduce(xiPi)
        bad = lhs > rhs
        if bad.any():
            r, c = np.argwhere(bad)[0]
            return OrderingReport(False, {"t": float(chunk[r]), label_name: labels(int(c)),
                                          "lhs": int(lhs[r, c]), "rhs": int(rhs[r, c])}, len(times))
    return OrderingReport(True, None, len(times))


def check_fewest_prefix(traceP: Trace, tracePi: Trace, use_gamma_for_P: bool = True,
                        times: np.ndarray | None = None) -> OrderingReport:
    """Sum of the n-j+1 smallest components of P's gamma (or xi) never exceeds
    the same tail sum of pi's xi, for every j and every event time."""
    n = traceP.workload.n

    def reduce(s):
        return np.cumsum(np.sort(s, axis=1), axis=1)

    # column c sums the c+1 smallest, i.e. ranks j = n - c .. n
    return _prefix_check(traceP, tracePi, use_gamma_for_P, reduce, lambda c: n - c, "j", times)


def _threshold_reduce(keys: np.ndarray):
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    thresholds = np.unique(sorted_keys)
    # last position of each distinct key value in sorted order
    last = np.searchsorted(sorted_keys, thresholds, side="right") - 1

    def reduce(s):
        return np.cumsum(s[:, order], axis=1)[:, last]

    return reduce, thresholds


def check_due_prefix(traceP: Trace, tracePi: Trace, use_gamma_for_P: bool = True,
                     times: np.ndarray | None = None) -> OrderingReport:
    """For every due-time threshold tau, the unassigned (or remaining) tasks of
    P's jobs due by tau never exceed pi's remaining tasks of those jobs."""
    reduce, thr = _threshold_reduce(traceP.workload.dues)
    return _prefix_check(traceP, tracePi, use_gamma_for_P, reduce, lambda c: float(thr[c]), "tau", times)


def check_arrival_prefix(traceP: Trace, tracePi: Trace, use_gamma_for_P: bool = True,
                         times: np.ndarray | None = None) -> OrderingReport:
    """As ``check_due_prefix`` with arrival times as thresholds."""
    reduce, thr = _threshold_reduce(traceP.workload.arrivals)
    return _prefix_check(traceP, tracePi, use_gamma_for_P, reduce, lambda c: float(thr[c]), "tau", times)


def queue_length_path(trace: Trace) -> tuple[np.ndarray, np.ndarray]:
    """(event times, total unassigned tasks after each event time)."""
    w = trace.workload
    arr = trace.arrays
    t = np.concatenate([w.arrivals, arr["start"]])
    delta = np.concatenate([w.sizes, -np.ones(len(arr["start"]), dtype=np.int64)])
    times = trace.event_times
    q = np.zeros(len(times), dtype=np.int64)
    np.add.at(q, np.searchsorted(times, t), delta)
    return times, np.cumsum(q)


def _active_tasks(traceP: Trace, tracePi: Trace) -> np.ndarray:
    """Indices of pi-records whose whole service interval sees P's queue nonempty."""
    times, q = queue_length_path(traceP)
    arr = tracePi.arrays
    if len(times) == 0:
        return np.zeros(0, dtype=np.int64)
    zeros = np.concatenate([[0], np.cumsum(q == 0)])
    lo = np.searchsorted(times, arr["start"], side="right") - 1
    hi = np.searchsorted(times, arr["finish"], side="right") - 1
    # before P's first event the queue is empty
    ok = lo >= 0
    lo_c = np.maximum(lo, 0)
    nzero = zeros[hi + 1] - zeros[lo_c]
    return np.nonzero(ok & (nzero == 0))[0]


def check_weak_work_efficiency(traceP: Trace, tracePi: Trace) -> OrderingReport:
    """Every pi-task served over [tau, nu] while P's queue stays nonempty is
    matched to a distinct P-task that starts within [tau, nu]."""
    _same_workload(traceP, tracePi)
    active = _active_tasks(traceP, tracePi)
    pi_arr, p_arr = tracePi.arrays, traceP.arrays
    details = {"active_pi_tasks": int(len(active)), "pi_tasks": int(len(pi_arr["start"]))}
    if len(active) == 0:
        return OrderingReport(True, None, 0, details)
    p_order = np.argsort(p_arr["start"], kind="stable")
    p_starts = p_arr["start"][p_order]
    lo = np.searchsorted(p_starts, pi_arr["start"][active], side="left")
    hi = np.searchsorted(p_starts, pi_arr["finish"][active], side="right")
    counts = hi - lo
    indptr = np.concatenate([[0], np.cumsum(counts)])
    indices = np.concatenate([np.arange(a, b) for a, b in zip(lo, hi)]) if indptr[-1] else np.zeros(0, dtype=np.int64)
    graph = csr_matrix((np.ones(len(indices), dtype=np.int8), indices, indptr),
                       shape=(len(active), len(p_starts)))
    match = maximum_bipartite_matching(graph, perm_type="column")
    unmatched = np.nonzero(match < 0)[0]
    details["matched"] = int(len(active) - len(unmatched))
    if len(unmatched) == 0:
        return OrderingReport(True, None, int(len(active)), details)
    rows, cols = _hall_set(graph, match, int(unmatched[0]))
    r0 = active[unmatched[0]]
    violation = {
        "t": float(pi_arr["start"][r0]),
        "pi_task": [int(pi_arr["job"][r0]), int(pi_arr["task_index"][r0])],
        "interval": [float(pi_arr["start"][r0]), float(pi_arr["finish"][r0])],
        "hall_set_size": len(rows),
        "neighbourhood_size": len(cols),
        "hall_set": [[int(pi_arr["job"][active[r]]), int(pi_arr["task_index"][active[r]])] for r in rows],
    }
    return OrderingReport(False, violation, int(len(active)), details)


def _hall_set(graph: csr_matrix, match: np.ndarray, root: int) -> tuple[list[int], list[int]]:
    """Rows reachable from an unmatched row by alternating paths, and their
    neighbourhood; with a maximum matching |neighbourhood| = |rows| - 1."""
    col_owner = {int(c): r for r, c in enumerate(match) if c >= 0}
    rows, cols = {root}, set()
    frontier = [root]
    while frontier:
        r = frontier.pop()
        for c in graph.indices[graph.indptr[r]:graph.indptr[r + 1]]:
            c = int(c)
            if c in cols:
                continue
            cols.add(c)
            owner = col_owner.get(c)
            if owner is not None and owner not in rows:
                rows.add(owner)
                frontier.append(owner)
    return sorted(rows), sorted(cols)


def empirical_st_dominance(samplesA, samplesB, epsilon: float = 0.0) -> bool:
    """A <=_st B on the empirical laws: survival of A never exceeds that of B
    by more than ``epsilon`` at any pooled sample point."""
    a = np.sort(np.asarray(samplesA, dtype=float))
    b = np.sort(np.asarray(samplesB, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be nonempty")
    pts = np.concatenate([a, b])
    surv_a = 1.0 - np.searchsorted(a, pts, side="right") / len(a)
    surv_b = 1.0 - np.searchsorted(b, pts, side="right") / len(b)
    return bool(np.all(surv_a <= surv_b + epsilon))


def robin_hood(y: np.ndarray, rng: np.random.Generator, transfers: int = 3) -> np.ndarray:
    """A vector majorized by ``y``: repeated transfers of mass from a larger to
    a smaller coordinate, never overshooting their midpoint."""
    x = np.array(y, dtype=float)
    if len(x) < 2:
        return x
    for _ in range(transfers):
        i, j = rng.choice(len(x), size=2, replace=False)
        if x[i] < x[j]:
            i, j = j, i
        delta = rng.uniform(0.0, 0.5) * (x[i] - x[j])
        x[i] -= delta
        x[j] += delta
    return x


def schur_check_counterexample_search(metric: Callable[[np.ndarray], float], trials: int,
                                      rng: np.random.Generator, dim: int = 5,
                                      tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray] | None:
    """Look for x majorized by y with metric(x) > metric(y)."""
    for _ in range(trials):
        y = rng.uniform(0.0, 10.0, size=int(rng.integers(2, dim + 1)))
        x = robin_hood(y, rng, transfers=int(rng.integers(1, 4)))
        if metric(x) > metric(y) + tol:
            return x, y
    return None


def policy_conformance(trace: Trace, policy, tie_break: Sequence[str] | None = None) -> list[tuple]:
    """Service starts whose job differs from what ``select_job`` picks on the
    replayed state; an empty list means the trace follows the policy."""
    from .engine import Policy, select_job

    if isinstance(policy, str):
        policy = Policy.parse(policy)
    w = trace.workload
    ranks = trace.meta.get("ranks") or None
    # stable on start: keeps the engine's within-timestamp start order
    recs = sorted(trace.records, key=lambda r: r.start)
    gamma = {j.id: 0 for j in w.jobs}
    arrived = 0
    bad = []
    for r in recs:
        while arrived < w.n and w.jobs[arrived].arrival <= r.start:
            gamma[w.jobs[arrived].id] = w.jobs[arrived].size
            arrived += 1
        chosen = select_job(gamma, gamma.keys(), w, policy, tie_break, ranks)
        if chosen != r.job:
            bad.append((r.start, r.server, r.job, chosen))
        gamma[r.job] -= 1
    return bad
