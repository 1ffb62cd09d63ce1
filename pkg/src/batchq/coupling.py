"""Coupled sample paths of a work-conserving policy P and an arbitrary policy pi.

pi is simulated first with ordinary per-server uniforms. P is then simulated
on the same workload. Each P-service draws a tentative duration from its own
fresh substream; if that service is still running when pi next starts a task
on the same server (at tau, after elapsed time chi), the tentative draw is
discarded and P's completion is committed to tau + residual_quantile(chi, u),
with u the uniform pi used for that task. For NBU servers the residual is
pointwise at most pi's duration, which is what makes P weakly more
work-efficient than pi on every path.

Because pi never looks at P, this two-pass run gives the same P-path as
advancing both systems together in time order. Read that way, u is unseen by
either system before tau, so each P-service keeps its marginal law; the
``marginal_fidelity_test`` checks this empirically.
"""
from __future__ import annotations

import csv
import io
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distributions import ServiceDistribution
from .engine import EngineConfig, IndependentService, LIFO, Policy, simulate
from .metrics import SCH1, SCH2, SYM, extract_vectors, get_metric
from .model import Trace, Workload
from .orderings import empirical_st_dominance
from .rng import COUPLING_FRESH, UniformStream

TOL = 1e-9
AUDIT_COLUMNS = ("server", "pi_task", "uniform", "chi", "residual", "pi_duration")


class HypothesisError(ValueError):
    """The coupling's preconditions (NBU servers, work-conserving P) fail."""


@dataclass(frozen=True)
class AuditRecord:
    server: int
    pi_task: tuple[int, int]
    uniform: float
    chi: float
    residual: float
    pi_duration: float


@dataclass(frozen=True)
class CoupledPair:
    traceP: Trace
    tracePi: Trace
    shared_seed: int
    audit: tuple[AuditRecord, ...] = ()
    policyP: str = ""
    policyPi: str = ""

    def audit_ok(self, tol: float = TOL) -> bool:
        """Every committed residual is at most the pi duration sharing its uniform."""
        return all(r.residual <= r.pi_duration + tol for r in self.audit)

    def audit_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(AUDIT_COLUMNS)
        for r in self.audit:
            w.writerow([r.server, f"{r.pi_task[0]}:{r.pi_task[1]}", repr(r.uniform),
                        repr(r.chi), repr(r.residual), repr(r.pi_duration)])
        return buf.getvalue()


class CoupledService:
    """Service source for P that borrows pi's uniforms as described above."""

    def __init__(self, servers: Sequence[ServiceDistribution], seed: int, pi_log, pi_tasks):
        self.servers = list(servers)
        m = len(servers)
        self.fresh = [UniformStream(seed, COUPLING_FRESH, l) for l in range(1, m + 1)]
        # per server: pi starts (sorted), finishes, uniforms, task ids
        self.starts: list[list[float]] = [[] for _ in range(m)]
        self.rest: list[list[tuple]] = [[] for _ in range(m)]
        for (server, t, finish, u), task in zip(pi_log, pi_tasks):
            self.starts[server - 1].append(t)
            self.rest[server - 1].append((finish, u, task))
        self.audit: list[AuditRecord] = []

    def start(self, server: int, s: float) -> float:
        dist = self.servers[server - 1]
        x = dist.quantile(self.fresh[server - 1].next())
        starts = self.starts[server - 1]
        k = bisect_left(starts, s)
        if k == len(starts) or not s + x > starts[k]:
            return s + x
        tau = starts[k]
        nu, u, task = self.rest[server - 1][k]
        chi = tau - s
        residual = dist.residual_quantile(chi, u)
        self.audit.append(AuditRecord(server, task, u, chi, residual, nu - tau))
        return tau + residual


def check_hypotheses(servers: Sequence[ServiceDistribution], config: EngineConfig | None):
    bad = [l for l, s in enumerate(servers, 1) if not s.classify().is_nbu]
    if bad:
        raise HypothesisError(f"servers {bad} are not NBU; the coupling needs NBU service")
    if config is not None and any(config.idle_injection.values()):
        raise HypothesisError("policy P must be work-conserving (no idle injection)")


def coupled_simulate(workload: Workload, servers: Sequence[ServiceDistribution], policyP: Policy,
                     policyPi: Policy, seed: int, config: EngineConfig | None = None,
                     config_pi: EngineConfig | None = None) -> CoupledPair:
    """Run pi, then P coupled to it. ``config_pi`` may inject idling into pi."""
    check_hypotheses(servers, config)
    cfgP = config or EngineConfig()
    cfgP = EngineConfig(cfgP.server_select, cfgP.tie_break, seed, cfgP.idle_injection)
    base_pi = config_pi or cfgP
    cfgPi = EngineConfig(base_pi.server_select, base_pi.tie_break, seed, base_pi.idle_injection)

    pi_service = IndependentService(servers, seed, log=True)
    tracePi = simulate(workload, servers, policyPi, cfgPi, service=pi_service)
    tasks = [(r.job, r.task_index) for r in tracePi.records]
    service = CoupledService(servers, seed, pi_service.log, tasks)
    traceP = simulate(workload, servers, policyP, cfgP, service=service)
    return CoupledPair(traceP, tracePi, seed, tuple(service.audit), str(policyP), str(policyPi))


# which -> (required P policy, metric classes accepted)
_MATCHED = {
    "FUT_AVG": ("FUT", None),
    "EDD_LMAX": ("EDD", None),
    "FCFS_DMAX": ("FCFS", None),
    "SYM": ("FUT", SYM),
    "SCH1": ("EDD", SCH1),
    "SCH2": ("FCFS", SCH2),
}
_NAMED = {"FUT_AVG": "d_avg", "EDD_LMAX": "l_max", "FCFS_DMAX": "d_max"}


def verify_near_optimality(pair: CoupledPair, metric, which: str) -> bool:
    """metric(V(P)) <= metric(C(pi)) + 1e-9 on this path.

    ``which`` names the matched pairing; a P policy or metric that does not
    fit it raises ``ValueError``.
    """
    if which not in _MATCHED:
        raise ValueError(f"unknown pairing {which!r}; choose from {sorted(_MATCHED)}")
    need_policy, need_class = _MATCHED[which]
    met = get_metric(metric)
    p_name = Policy.parse(pair.policyP).name if pair.policyP else need_policy
    if p_name != need_policy:
        raise ValueError(f"{which} needs P={need_policy}, got {p_name}")
    if need_class is None and met.name != _NAMED[which]:
        raise ValueError(f"{which} is stated for {_NAMED[which]}, not {met.name}")
    if need_class is not None and need_class not in met.classes:
        raise ValueError(f"metric {met.name} is not in class {need_class}")
    if which == "SCH1":
        w = pair.traceP.workload
        if not (np.all(w.sizes == 1) or (np.all(np.diff(w.sizes) >= 0) and np.all(np.diff(w.dues) >= 0))):
            raise ValueError("SCH1 pairing needs unit jobs, or sizes and due times both nondecreasing")
    if which == "SCH2" and not np.all(np.diff(pair.traceP.workload.sizes) >= 0):
        raise ValueError("SCH2 pairing needs nondecreasing job sizes")
    vp = extract_vectors(pair.traceP)
    vpi = extract_vectors(pair.tracePi)
    return bool(met.of(vp, "V") <= met.of(vpi, "C") + TOL)


@dataclass(frozen=True)
class FidelityReport:
    passed: bool
    n_seeds: int
    mean_coupled: float
    mean_independent: float
    pooled_se: float
    z: float
    max_survival_gap: float
    epsilon: float
    samples: dict = field(default_factory=dict, compare=False, repr=False)


def marginal_fidelity_test(workload, servers: Sequence[ServiceDistribution], policy: Policy,
                           n_seeds: int = 200, partner: Policy = LIFO, base_seed: int = 0,
                           config: EngineConfig | None = None) -> FidelityReport:
    """Compare D_avg(C) of coupled P-paths with independent runs of P.

    ``workload`` is a fixed ``Workload`` or a ``WorkloadSpec`` (drawn afresh
    per seed, identically for both sides). Independent runs use service seeds
    disjoint from the coupled ones. Passing means a mean difference within 3
    pooled standard errors and neither sample dominating the other at slack
    2/sqrt(n_seeds).
    """
    from .workloads import WorkloadSpec, generate

    if n_seeds < 100:
        raise ValueError("n_seeds must be >= 100")
    cfg = config or EngineConfig()
    coupled, indep = np.empty(n_seeds), np.empty(n_seeds)
    for i in range(n_seeds):
        seed = base_seed + i
        w = generate(workload.with_seed(seed)) if isinstance(workload, WorkloadSpec) else workload
        pair = coupled_simulate(w, servers, policy, partner, seed, cfg)
        coupled[i] = _davg(pair.traceP)
        other = EngineConfig(cfg.server_select, cfg.tie_break, base_seed + n_seeds + i, cfg.idle_injection)
        indep[i] = _davg(simulate(w, servers, policy, other))
    se = math.sqrt(coupled.var(ddof=1) / n_seeds + indep.var(ddof=1) / n_seeds)
    diff = float(coupled.mean() - indep.mean())
    z = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
    eps = 2.0 / math.sqrt(n_seeds)
    both_ways = empirical_st_dominance(coupled, indep, eps) and empirical_st_dominance(indep, coupled, eps)
    passed = abs(z) <= 3.0 and both_ways
    return FidelityReport(passed, n_seeds, float(coupled.mean()), float(indep.mean()), se, z,
                          _survival_gap(coupled, indep), eps, {"coupled": coupled, "independent": indep})


def _survival_gap(a, b) -> float:
    a, b = np.sort(a), np.sort(b)
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / len(a)
    fb = np.searchsorted(b, pts, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def _davg(trace: Trace) -> float:
    v = extract_vectors(trace)
    return float(np.mean(v.C - v.a))
