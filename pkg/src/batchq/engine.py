"""Event-driven simulator for non-preemptive batch scheduling on m servers.

Same-timestamp events are applied as: completions (by server id, then job
id), arrivals (by job id), then new service starts. A policy only decides
which job the next idle server takes a task from; the server itself is picked
by ``EngineConfig.server_select``.
"""
from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .distributions import ServiceDistribution
from .model import Trace, TaskRecord, Workload
from .rng import RANDOM_ORDER, SERVICE, UniformStream


class ServerSelect(enum.Enum):
    FASTEST_RATE = "fastest_rate"
    LOWEST_ID = "lowest_id"


@dataclass(frozen=True)
class Policy:
    """Job-priority rule. Build with the module helpers or ``Policy.parse``."""

    name: str
    order: tuple[int, ...] | None = None
    seed: int | None = None

    KINDS = ("FUT", "EDD", "FCFS", "LIFO", "RANDOM", "PRIORITY")

    def __post_init__(self):
        if self.name not in self.KINDS:
            raise ValueError(f"unknown policy {self.name!r}")
        if self.name == "PRIORITY" and not self.order:
            raise ValueError("PRIORITY policy needs an order")

    @classmethod
    def parse(cls, text: str) -> "Policy":
        """``FUT``, ``EDD``, ``FCFS``, ``LIFO``, ``RANDOM[:seed]`` or ``PRIORITY:3,1,2``."""
        name, _, arg = text.strip().partition(":")
        name = name.upper()
        if name in ("RANDOMORDER", "RANDOM_ORDER"):
            name = "RANDOM"
        if name == "PRIORITY":
            return cls(name, order=tuple(int(x) for x in arg.split(",") if x))
        if name == "RANDOM":
            return cls(name, seed=int(arg) if arg else None)
        if arg:
            raise ValueError(f"policy {name} takes no argument")
        return cls(name)

    def __str__(self):
        if self.name == "PRIORITY":
            return "PRIORITY:" + ",".join(map(str, self.order))
        if self.name == "RANDOM" and self.seed is not None:
            return f"RANDOM:{self.seed}"
        return self.name


FUT = Policy("FUT")
EDD = Policy("EDD")
FCFS = Policy("FCFS")
LIFO = Policy("LIFO")
RANDOM = Policy("RANDOM")


def priority_list(order: Sequence[int]) -> Policy:
    return Policy("PRIORITY", order=tuple(order))


def random_order(seed: int | None = None) -> Policy:
    return Policy("RANDOM", seed=seed)


# secondary keys applied after the policy's own key
DEFAULT_TIE_BREAK = {
    "FUT": ("due", "arrival", "id"),
    "EDD": ("arrival", "gamma", "id"),
    "FCFS": ("id",),
    "LIFO": ("-id",),
    "RANDOM": ("id",),
    "PRIORITY": ("id",),
}
_TIE_FIELDS = ("due", "arrival", "gamma", "id", "-id")


@dataclass(frozen=True)
class EngineConfig:
    server_select: ServerSelect = ServerSelect.FASTEST_RATE
    tie_break: tuple[str, ...] | None = None
    seed: int = 0
    # server id -> disjoint [start, end) windows in which the server may not start a task
    idle_injection: Mapping[int, Sequence[tuple[float, float]]] = field(default_factory=dict)

    def __post_init__(self):
        if self.tie_break is not None:
            bad = [f for f in self.tie_break if f not in _TIE_FIELDS]
            if bad:
                raise ValueError(f"unknown tie-break fields {bad}")
        for server, windows in self.idle_injection.items():
            ws = sorted(windows)
            for b, e in ws:
                if not e > b:
                    raise ValueError(f"server {server}: idle window ({b}, {e}) is empty")
            for (_, e1), (b2, _) in zip(ws, ws[1:]):
                if b2 < e1:
                    raise ValueError(f"server {server}: idle windows overlap")


def job_key(policy: Policy, tie_break: Sequence[str] | None, i: int, gamma_i: int,
            arrival: float, due: float, rank: float = 0.0) -> tuple:
    """Sort key of job ``i``; smaller is served first.

    ``rank`` carries the position for PRIORITY and the drawn key for RANDOM.
    """
    name = policy.name
    if name == "FUT":
        head = gamma_i
    elif name == "EDD":
        head = due
    elif name == "FCFS":
        head = arrival
    elif name == "LIFO":
        head = -arrival
    else:
        head = rank
    fields = {"due": due, "arrival": arrival, "gamma": gamma_i, "id": i, "-id": -i}
    tail = tie_break if tie_break is not None else DEFAULT_TIE_BREAK[name]
    return (head,) + tuple(fields[f] for f in tail) + (i,)


def select_job(gamma: Mapping[int, int] | Sequence[int], queue, workload: Workload,
               policy: Policy, tie_break: Sequence[str] | None = None,
               ranks: Mapping[int, float] | None = None) -> int:
    """Job in ``queue`` with unassigned tasks that the policy serves next.

    ``gamma`` is indexed by job id (a sequence is read as 1-based).
    """
    def g(i):
        return gamma[i] if isinstance(gamma, Mapping) else gamma[i - 1]

    cands = [i for i in queue if g(i) > 0]
    if not cands:
        raise ValueError("no job in the queue has unassigned tasks")
    ranks = ranks or _static_ranks(policy, workload)
    jobs = workload.jobs
    return min(cands, key=lambda i: job_key(policy, tie_break, i, g(i), jobs[i - 1].arrival,
                                             jobs[i - 1].due, ranks.get(i, 0.0)))


def select_server(idle: Sequence[int], rates: Sequence[float], rule: ServerSelect) -> int:
    """Idle server to use next. ``rates`` is indexed by server id - 1."""
    if not idle:
        raise ValueError("no idle server")
    if rule is ServerSelect.LOWEST_ID:
        return min(idle)
    return min(idle, key=lambda l: (-rates[l - 1], l))


def _static_ranks(policy: Policy, workload: Workload) -> dict[int, float]:
    if policy.name == "PRIORITY":
        if sorted(policy.order) != list(range(1, workload.n + 1)):
            raise ValueError("PRIORITY order must be a permutation of the job ids")
        return {j: float(pos) for pos, j in enumerate(policy.order)}
    return {}


class IndependentService:
    """Service times from per-server substreams: the j-th service on server l
    uses the j-th uniform of substream (seed, SERVICE, l)."""

    def __init__(self, servers: Sequence[ServiceDistribution], seed: int, log: bool = False):
        self.servers = list(servers)
        self.streams = [UniformStream(seed, SERVICE, l) for l in range(1, len(servers) + 1)]
        self.log: list[tuple[int, float, float, float]] | None = [] if log else None

    def start(self, server: int, t: float) -> float:
        u = self.streams[server - 1].next()
        finish = t + self.servers[server - 1].quantile(u)
        if self.log is not None:
            self.log.append((server, t, finish, u))
        return finish


def simulate(workload: Workload, servers: Sequence[ServiceDistribution], policy: Policy,
             config: EngineConfig | None = None, service=None) -> Trace:
    """Run ``policy`` until every task of ``workload`` has completed.

    ``service`` supplies finish times (``start(server, t) -> finish``); by
    default an ``IndependentService`` seeded from ``config.seed``.
    """
    cfg = config or EngineConfig()
    m = len(servers)
    if m < 1:
        raise ValueError("need at least one server")
    if service is None:
        service = IndependentService(servers, cfg.seed)
    n = workload.n
    jobs = workload.jobs
    arrival = [0.0] + [j.arrival for j in jobs]
    due = [0.0] + [j.due for j in jobs]
    size = [0] + [j.size for j in jobs]
    gamma = [0] * (n + 1)
    version = [0] * (n + 1)

    ranks = _static_ranks(policy, workload)
    rank_stream = None
    if policy.name == "RANDOM":
        rank_stream = UniformStream(cfg.seed if policy.seed is None else policy.seed, RANDOM_ORDER)
    tie = cfg.tie_break
    dynamic = _key_uses_gamma(policy, tie)

    rates = [s.service_rate for s in servers]
    if cfg.server_select is ServerSelect.FASTEST_RATE:
        server_order = sorted(range(1, m + 1), key=lambda l: (-rates[l - 1], l))
    else:
        server_order = list(range(1, m + 1))
    busy = [False] * (m + 1)

    windows = {int(l): sorted(ws) for l, ws in cfg.idle_injection.items() if ws}
    wakeups = sorted({e for ws in windows.values() for _, e in ws})

    def blocked(l: int, t: float) -> bool:
        for b, e in windows.get(l, ()):
            if b <= t < e:
                return True
            if b > t:
                break
        return False

    heap: list = []
    completions: list = []
    records: list[TaskRecord] = []
    unassigned = 0
    next_arrival = 0
    next_wake = 0
    inf = float("inf")

    while True:
        t = completions[0][0] if completions else inf
        if next_arrival < n and jobs[next_arrival].arrival < t:
            t = jobs[next_arrival].arrival
        if next_wake < len(wakeups) and wakeups[next_wake] < t:
            t = wakeups[next_wake]
        if t == inf:
            break
        while completions and completions[0][0] == t:
            _, l, j = heapq.heappop(completions)
            busy[l] = False
        while next_arrival < n and jobs[next_arrival].arrival == t:
            next_arrival += 1
            i = next_arrival
            gamma[i] = size[i]
            unassigned += size[i]
            rank = ranks.get(i, 0.0) if rank_stream is None else rank_stream.next()
            if rank_stream is not None:
                ranks[i] = rank
            heapq.heappush(heap, (job_key(policy, tie, i, gamma[i], arrival[i], due[i], rank), 0, i))
        while next_wake < len(wakeups) and wakeups[next_wake] == t:
            next_wake += 1
        if unassigned == 0:
            continue
        for l in server_order:
            if busy[l] or (windows and blocked(l, t)):
                continue
            while True:
                _, ver, j = heap[0]
                if ver == version[j] and gamma[j] > 0:
                    break
                heapq.heappop(heap)
            gamma[j] -= 1
            unassigned -= 1
            finish = service.start(l, t)
            records.append(TaskRecord(j, size[j] - gamma[j], l, t, finish))
            busy[l] = True
            heapq.heappush(completions, (finish, l, j))
            if gamma[j] == 0:
                heapq.heappop(heap)
            elif dynamic:
                version[j] += 1
                heapq.heapreplace(heap, (job_key(policy, tie, j, gamma[j], arrival[j], due[j],
                                                 ranks.get(j, 0.0)), version[j], j))
            if unassigned == 0:
                break

    trace = Trace(workload, m, str(policy), tuple(records), cfg.seed)
    trace.meta["ranks"] = dict(ranks)
    return trace


def _key_uses_gamma(policy: Policy, tie: Sequence[str] | None) -> bool:
    if policy.name == "FUT":
        return True
    tail = tie if tie is not None else DEFAULT_TIE_BREAK[policy.name]
    return "gamma" in tail
