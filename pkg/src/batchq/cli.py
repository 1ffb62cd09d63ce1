"""Command-line entry point (``batchq``).

Scenario config (JSON)::

    {
      "servers":  [{"kind": "exponential", "rate": 1.4}, ...],
      "workload": {"n": 3000,
                   "arrivals": {"kind": "paired_exponential", "rho": 0.8},
                   "sizes": {"values": [1, 10], "probs": [0.5, 0.5]},
                   "dues":  {"offsets": [0, 50], "probs": [0.5, 0.5]}},
      "policies": ["FUT", "FCFS"],
      "metrics":  ["d_avg", "l_max", "d_max"],
      "seeds":    {"count": 5, "base": 0},
      "sweep":    {"rho": [0.2, 0.5, 0.8]},
      "server_select": "fastest_rate",
      "tie_break": null
    }

``workload`` may instead be ``{"file": "jobs.json"}`` (a fixed job list, the
same for every seed; relative paths resolve against the config's folder).
Exit codes: 0 ok, 1 an ordering or inequality failed, 2 bad config or input,
3 the coupling preconditions (NBU servers, work-conserving P) fail.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import distributions
from .bounds import fut_gap_bound
from .coupling import HypothesisError, coupled_simulate, verify_near_optimality
from .engine import EngineConfig, Policy, ServerSelect, simulate
from .io import ParseError, read_trace, read_workload, write_trace
from .metrics import METRICS, SCH1, SCH2, SYM, extract_vectors, get_metric
from .model import Workload, validate_trace
from .orderings import (check_arrival_prefix, check_due_prefix, check_fewest_prefix,
                        check_weak_work_efficiency)
from .workloads import WorkloadSpec, generate, mean_gap_for_rho, rho_for_mean_gap, spec_from_json

EXIT_OK, EXIT_VIOLATED, EXIT_CONFIG, EXIT_REFUSED = 0, 1, 2, 3

SUMMARY_COLUMNS = ("policy", "seed", "rho", "d_avg_c", "d_avg_v", "l_max_c", "l_max_v",
                   "d_max_c", "d_max_v", "p2_norm", "rms_tardiness", "gap_bound_exact",
                   "gap_bound_coarse")
VALUE_COLUMNS = SUMMARY_COLUMNS[3:]

PREFIX_CHECKS = {"fewest": check_fewest_prefix, "due": check_due_prefix, "arrival": check_arrival_prefix}
PREFIX_FOR = {"FUT": "fewest", "EDD": "due", "FCFS": "arrival"}
# P policy -> (named metric, pairing, metric class for further metrics)
NEAR_OPT = {"FUT": ("d_avg", "FUT_AVG", SYM), "EDD": ("l_max", "EDD_LMAX", SCH1),
            "FCFS": ("d_max", "FCFS_DMAX", SCH2)}
CLASS_PAIRING = {SYM: "SYM", SCH1: "SCH1", SCH2: "SCH2"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    servers: tuple
    policies: tuple
    metrics: tuple
    seeds: int
    base_seed: int
    spec: WorkloadSpec | None
    fixed: Workload | None
    rhos: tuple
    config: EngineConfig

    def workload(self, rho, seed: int) -> Workload:
        if self.fixed is not None:
            return self.fixed
        spec = self.spec
        if rho is not None:
            mus = [s.service_rate for s in self.servers]
            gap = mean_gap_for_rho(rho, spec.sizes.mean, mus)
            law = spec.arrivals
            law = replace(law, mean_gap=gap) if law.kind == "paired_exponential" else replace(law, rate=2.0 / gap)
            spec = replace(spec, arrivals=law)
        return generate(spec.with_seed(seed))

    def points(self):
        return [(rho, s) for rho in self.rhos for s in range(self.base_seed, self.base_seed + self.seeds)]


def _rho_of(spec: WorkloadSpec, mus) -> float:
    law = spec.arrivals
    if law.kind == "paired_exponential":
        return rho_for_mean_gap(law.mean_gap, spec.sizes.mean, mus)
    if law.kind == "poisson":
        return rho_for_mean_gap(2.0 / law.rate, spec.sizes.mean, mus)
    return math.nan


def load_scenario(path, args) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    try:
        return _scenario(data, path.parent, args)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, ParseError) as exc:
        raise ConfigError(f"invalid config: {exc!s}") from None


def _scenario(data: dict, root: Path, args) -> Scenario:
    servers = tuple(distributions.from_json(s) for s in data.get("servers", []))
    if not servers:
        raise ConfigError("config needs at least one server")
    policies = tuple(Policy.parse(p) for p in data.get("policies", []))
    if not policies:
        raise ConfigError("config needs at least one policy")
    metrics = tuple(data.get("metrics", list(METRICS)))
    if not metrics:
        raise ConfigError("config needs at least one metric")
    for m in metrics:
        get_metric(m)
    seeds_cfg = data.get("seeds", {})
    seeds = args.seeds if getattr(args, "seeds", None) is not None else int(seeds_cfg.get("count", 1))
    base = args.base_seed if getattr(args, "base_seed", None) is not None else int(seeds_cfg.get("base", 0))
    if seeds < 1 or base < 0:
        raise ConfigError("need seeds >= 1 and base seed >= 0")
    mus = [s.service_rate for s in servers]
    wl = data.get("workload")
    if wl is None:
        raise ConfigError("config needs a workload")
    spec = fixed = None
    if "file" in wl:
        fixed = read_workload(root / wl["file"])
    else:
        spec = spec_from_json(wl, mus)
    sweep = data.get("sweep", {}).get("rho")
    if sweep is not None:
        if fixed is not None or spec.arrivals.kind == "explicit":
            raise ConfigError("a rho sweep needs random arrivals")
        rhos = tuple(float(r) for r in sweep)
        if not rhos or any(not r > 0 for r in rhos):
            raise ConfigError("sweep rho values must be > 0")
    else:
        rhos = (None,)
    select = ServerSelect(data.get("server_select", "fastest_rate"))
    tie = data.get("tie_break")
    config = EngineConfig(select, tuple(tie) if tie else None)
    return Scenario(servers, policies, metrics, seeds, base, spec, fixed, rhos, config)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "" if math.isnan(x) else repr(x)
    return str(x)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _workers(args) -> int:
    env = os.environ.get("BATCHQ_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("BATCHQ_THREADS must be an integer") from None
    return max(1, getattr(args, "jobs", 1) or 1)


def _fan_out(fn, items, workers: int):
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output folder {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output folder {out} is not writable")
    return out


# ---- simulate / sweep ----

@dataclass(frozen=True)
class _SimTask:
    scenario: Scenario
    rho: float | None
    seed: int
    trace_dir: str | None


def _simulate_point(task: _SimTask) -> list[tuple]:
    sc = task.scenario
    w = sc.workload(task.rho, task.seed)
    mus = [s.service_rate for s in sc.servers]
    rho = task.rho if task.rho is not None else (_rho_of(sc.spec, mus) if sc.spec else math.nan)
    gap = fut_gap_bound(w, sc.servers)
    cfg = replace(sc.config, seed=task.seed)
    rows = []
    for policy in sc.policies:
        trace = simulate(w, sc.servers, policy, cfg)
        v = extract_vectors(trace)
        if task.trace_dir:
            tag = str(policy).replace(":", "-").replace(",", "_")
            rtag = "" if task.rho is None else f"_rho{task.rho!r}"
            write_trace(trace, Path(task.trace_dir) / f"trace_{tag}{rtag}_seed{task.seed}.csv")
        rows.append((str(policy), task.seed, float(rho),
                     METRICS["d_avg"].of(v, "C"), METRICS["d_avg"].of(v, "V"),
                     METRICS["l_max"].of(v, "C"), METRICS["l_max"].of(v, "V"),
                     METRICS["d_max"].of(v, "C"), METRICS["d_max"].of(v, "V"),
                     METRICS["p2_norm"].of(v, "C"), METRICS["rms_tardiness"].of(v, "C"),
                     gap.average, gap.coarse))
    return rows


def aggregate(rows) -> list[tuple]:
    """Mean and standard error of each value column per (policy, rho)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r[0], _fmt(r[2])), []).append(r[3:])
    out = []
    for (policy, rho), vals in groups.items():
        a = np.array(vals, dtype=float)
        n = len(a)
        se = a.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(a.shape[1], math.nan)
        row = [policy, rho, n]
        for mean, s in zip(a.mean(axis=0), se):
            row += [float(mean), float(s)]
        out.append(tuple(row))
    return out


def aggregate_header() -> tuple:
    cols = ["policy", "rho", "n_seeds"]
    for c in VALUE_COLUMNS:
        cols += [f"{c}_mean", f"{c}_se"]
    return tuple(cols)


def cmd_simulate(args, require_sweep: bool = False) -> int:
    sc = load_scenario(args.config, args)
    if require_sweep and sc.rhos == (None,):
        raise ConfigError("sweep needs a 'sweep': {'rho': [...]} entry in the config")
    out = _out_dir(args)
    trace_dir = None
    if args.emit_traces:
        trace_dir = out / "traces"
        trace_dir.mkdir(exist_ok=True)
    tasks = [_SimTask(sc, rho, seed, str(trace_dir) if trace_dir else None) for rho, seed in sc.points()]
    rows = [r for chunk in _fan_out(_simulate_point, tasks, _workers(args)) for r in chunk]
    (out / "summary.csv").write_text(_csv(rows, SUMMARY_COLUMNS), encoding="utf-8", newline="")
    (out / "aggregate.csv").write_text(_csv(aggregate(rows), aggregate_header()), encoding="utf-8", newline="")
    print(f"wrote {len(rows)} summary rows to {out / 'summary.csv'}")
    return EXIT_OK


# ---- couple ----

def _near_opt_columns(sc: Scenario) -> list[tuple[str, str]]:
    """(metric, pairing) checked for the scenario's P policy."""
    p = sc.policies[0].name
    if p not in NEAR_OPT:
        return []
    named, pairing, cls = NEAR_OPT[p]
    cols = [(named, pairing)]
    for m in sc.metrics:
        if m != named and cls in get_metric(m).classes:
            cols.append((m, CLASS_PAIRING[cls]))
    return cols


def _couple_point(task: _SimTask) -> tuple:
    sc = task.scenario
    w = sc.workload(task.rho, task.seed)
    P, pi = sc.policies
    pair = coupled_simulate(w, sc.servers, P, pi, task.seed, sc.config)
    if task.trace_dir:
        rtag = "" if task.rho is None else f"_rho{task.rho!r}"
        write_trace(pair.traceP, Path(task.trace_dir) / f"coupled_P{rtag}_seed{task.seed}.csv")
        write_trace(pair.tracePi, Path(task.trace_dir) / f"coupled_pi{rtag}_seed{task.seed}.csv")
    wwe = check_weak_work_efficiency(pair.traceP, pair.tracePi).holds
    which = PREFIX_FOR.get(P.name)
    prefix = PREFIX_CHECKS[which](pair.traceP, pair.tracePi).holds if which else None
    near = []
    for metric, pairing in _near_opt_columns(sc):
        try:
            near.append(verify_near_optimality(pair, metric, pairing))
        except ValueError:
            near.append(None)  # hypothesis of this pairing not met on this workload
    rho = task.rho if task.rho is not None else math.nan
    return (task.seed, float(rho), str(P), str(pi), wwe, prefix, pair.audit_ok(), *near)


def cmd_couple(args) -> int:
    sc = load_scenario(args.config, args)
    if len(sc.policies) != 2:
        raise ConfigError("couple needs exactly two policies: P then pi")
    try:
        from .coupling import check_hypotheses
        check_hypotheses(sc.servers, sc.config)
    except HypothesisError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    out = _out_dir(args)
    trace_dir = None
    if args.emit_traces:
        trace_dir = out / "traces"
        trace_dir.mkdir(exist_ok=True)
    tasks = [_SimTask(sc, rho, seed, str(trace_dir) if trace_dir else None) for rho, seed in sc.points()]
    rows = _fan_out(_couple_point, tasks, _workers(args))
    header = ("seed", "rho", "policy_p", "policy_pi", "holds_wwe", "holds_prefix", "holds_audit",
              *[f"holds_near_opt_{m}" for m, _ in _near_opt_columns(sc)])
    text = _csv([tuple("na" if v is None else v for v in r) for r in rows], header)
    (out / "couple.csv").write_text(text, encoding="utf-8", newline="")
    failed = sum(1 for r in rows if any(v is False for v in r[4:]))
    print(f"{len(rows)} coupled paths, {failed} with a failed check")
    return EXIT_VIOLATED if failed else EXIT_OK


# ---- check ----

def cmd_check(args) -> int:
    try:
        w = read_workload(args.workload)
        tp = read_trace(args.traceP, w)
        tpi = read_trace(args.tracePi, w)
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    for path, trace in ((args.traceP, tp), (args.tracePi, tpi)):
        problems = validate_trace(trace)
        if problems:
            v = problems[0]
            raise ParseError(f"invalid trace ({v.kind} at t={v.time!r}, {v.entities})", None, str(path))
    if args.ordering == "wwe":
        report = check_weak_work_efficiency(tp, tpi)
    else:
        report = PREFIX_CHECKS[args.ordering](tp, tpi, use_gamma_for_P=not args.xi)
    doc = {"ordering": args.ordering, "state_P": "xi" if args.xi else "gamma", **report.to_json()}
    print(json.dumps(doc, indent=1, sort_keys=True))
    return EXIT_OK if report.holds else EXIT_VIOLATED


# ---- bounds ----

def cmd_bounds(args) -> int:
    sc = load_scenario(args.config, args)
    rows = []
    for rho, seed in sc.points():
        w = sc.workload(rho, seed)
        gb = fut_gap_bound(w, sc.servers)
        rows.append({"seed": seed, "rho": rho, "gap_bound_exact": gb.average,
                     "gap_bound_coarse": gb.coarse, "warning": gb.warning})
    print(json.dumps(rows, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="batchq", description="Batch-job scheduling simulator and checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    def scenario_flags(p, out=True):
        p.add_argument("--config", required=True, help="scenario JSON")
        p.add_argument("--seeds", type=int, help="override seed count")
        p.add_argument("--base-seed", type=int, help="override first seed")
        if out:
            p.add_argument("--out", default="out", help="output folder")
            p.add_argument("--emit-traces", action="store_true", help="also write trace CSVs")
            p.add_argument("--jobs", type=int, default=1, help="worker processes")

    scenario_flags(sub.add_parser("simulate", help="run each policy per seed"))
    scenario_flags(sub.add_parser("sweep", help="simulate over the config's rho grid"))
    scenario_flags(sub.add_parser("couple", help="coupled P vs pi verification"))
    scenario_flags(sub.add_parser("bounds", help="print FUT gap bounds"), out=False)
    pc = sub.add_parser("check", help="check an ordering between two stored traces")
    pc.add_argument("traceP")
    pc.add_argument("tracePi")
    pc.add_argument("--ordering", required=True, choices=["fewest", "due", "arrival", "wwe"])
    pc.add_argument("--workload", required=True, help="workload JSON shared by both traces")
    pc.add_argument("--xi", action="store_true", help="use remaining (not unassigned) tasks for P")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    handlers = {"simulate": cmd_simulate, "sweep": lambda a: cmd_simulate(a, require_sweep=True),
                "couple": cmd_couple, "check": cmd_check, "bounds": cmd_bounds}
    try:
        return handlers[args.command](args)
    except HypothesisError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
