"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or ``python tests/test_acceptance.py``.
"""
import math
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from batchq.bounds import fut_gap_bound  # noqa: E402
from batchq.coupling import coupled_simulate, marginal_fidelity_test, verify_near_optimality  # noqa: E402
from batchq.distributions import (Deterministic, Exponential, ParetoLomax, ShiftedExponential,  # noqa: E402
                                  classify_numeric)
from batchq.engine import EDD, FCFS, FUT, LIFO, EngineConfig, random_order, simulate  # noqa: E402
from batchq.metrics import METRICS, d_avg, extract_vectors  # noqa: E402
from batchq.model import Workload  # noqa: E402
from batchq.orderings import (check_arrival_prefix, check_due_prefix, check_fewest_prefix,  # noqa: E402
                              check_weak_work_efficiency, majorize, robin_hood,
                              schur_check_counterexample_search, weak_majorize_above,
                              weak_majorize_below)
from batchq.workloads import DueLaw, SizeLaw, generate, paired_spec  # noqa: E402

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

MUS = (1.4, 1.0, 0.6)
SIZES = SizeLaw((1, 10), (0.5, 0.5))
DUES = DueLaw((0, 50), (0.5, 0.5))
EXP = [Exponential(m) for m in (0.6, 1.0, 1.4)]
DET = [Deterministic(1 / m) for m in (0.6, 1.0, 1.4)]
SEXP = [ShiftedExponential.with_mean_rate(m) for m in MUS]


def report(num, ok, detail):
    line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def paired_se(diffs):
    diffs = np.asarray(diffs, dtype=float)
    return float(diffs.std(ddof=1) / math.sqrt(len(diffs)))


# ---------------------------------------------------------------- 1

def test_criterion_1_hand_instances():
    t0 = time.perf_counter()
    one = [Deterministic(1.0)]
    w = Workload.from_arrays([0.0, 0.0], [2, 1], [10.0, 10.0])
    fut = extract_vectors(simulate(w, one, FUT))
    fcfs = extract_vectors(simulate(w, one, FCFS))
    edd = extract_vectors(simulate(Workload.from_arrays([0.0, 0.0], [2, 1], [5.0, 1.0]), one, EDD))
    elapsed = time.perf_counter() - t0
    got = {"C_FUT": fut.C.tolist(), "V_FUT": fut.V.tolist(), "C_FCFS": fcfs.C.tolist(), "C_EDD": edd.C.tolist()}
    want = {"C_FUT": [3.0, 1.0], "V_FUT": [2.0, 0.0], "C_FCFS": [2.0, 3.0], "C_EDD": [3.0, 1.0]}
    ok = got == want and elapsed < 1.0
    report(1, ok, " ".join(f"{k}={v}" for k, v in got.items()) + f" in {elapsed:.3f}s")


# ---------------------------------------------------------------- 2 and 6 share runs

@lru_cache(maxsize=None)
def big_runs(bank_name, seeds=200):
    """Per-seed metrics on the n=3000, rho=0.8 scenario for several policies."""
    bank = {"exp": EXP, "det": DET}[bank_name]
    spec = paired_spec(3000, 0.8, SIZES, MUS, DUES)
    out = {p: {"d_avg_c": [], "d_avg_v": [], "d_max": [], "p2": []} for p in ("FUT", "EDD", "FCFS", "LIFO", "RANDOM")}
    bounds = []
    for seed in range(seeds):
        w = generate(spec.with_seed(seed))
        if bank_name == "exp":
            bounds.append(fut_gap_bound(w, MUS))
        for policy in (FUT, EDD, FCFS, LIFO, random_order()):
            v = extract_vectors(simulate(w, bank, policy, EngineConfig(seed=seed)))
            rec = out[policy.name]
            rec["d_avg_c"].append(METRICS["d_avg"].of(v, "C"))
            rec["d_avg_v"].append(METRICS["d_avg"].of(v, "V"))
            rec["d_max"].append(METRICS["d_max"].of(v, "C"))
            rec["p2"].append(METRICS["p2_norm"].of(v, "C"))
    return {p: {k: np.array(x) for k, x in rec.items()} for p, rec in out.items()}, bounds


def test_criterion_2_gap_bound():
    t0 = time.perf_counter()
    runs, bounds = big_runs("exp")
    gap = runs["FUT"]["d_avg_c"] - runs["FUT"]["d_avg_v"]
    est = gap.mean() + 2 * paired_se(gap)
    exact = float(np.mean([b.average for b in bounds]))
    coarse = bounds[0].coarse
    ok = est <= exact and est <= coarse and abs(coarse - (math.log(3) + 1) / 0.6) < 1e-12
    report(2, ok, f"gap estimate + 2SE = {est:.4f} <= exact bound {exact:.4f} <= coarse {coarse:.4f} "
                  f"(200 seeds, n=3000, {time.perf_counter() - t0:.0f}s)")


def test_criterion_6_factor_two():
    lines, ok = [], True
    for bank in ("exp", "det"):
        runs, _ = big_runs(bank)
        for metric in ("d_max", "p2"):
            fc = runs["FCFS"][metric]
            for pi in ("FUT", "EDD", "LIFO", "RANDOM"):
                diff = 2 * runs[pi][metric] - fc
                margin = diff.mean() - 2 * paired_se(diff)
                ok &= margin >= 0
                lines.append(f"{bank}/{metric}/{pi}:{margin:.1f}")
    report(6, ok, "margins 2*mean(pi) - mean(FCFS) - 2SE: " + " ".join(lines))


# ---------------------------------------------------------------- 3, 4, 5 share coupled pairs

TRIPLES = [(FUT, LIFO, "d_avg", "FUT_AVG"), (FUT, random_order(), "d_avg", "FUT_AVG"),
           (FUT, FCFS, "d_avg", "FUT_AVG"), (EDD, LIFO, "l_max", "EDD_LMAX"),
           (EDD, FCFS, "l_max", "EDD_LMAX"), (FCFS, LIFO, "d_max", "FCFS_DMAX"),
           (FCFS, random_order(), "d_max", "FCFS_DMAX")]
PREFIX = {"FUT": check_fewest_prefix, "EDD": check_due_prefix, "FCFS": check_arrival_prefix}


@lru_cache(maxsize=None)
def coupled_results(seeds=100, n=300):
    res = {"near": [], "wwe": [], "prefix": [], "times": 0, "pairs": 0}
    for bank_name, bank in (("sexp", SEXP), ("det", DET)):
        spec = paired_spec(n, 0.8, SIZES, MUS, DUES)
        for seed in range(seeds):
            w = generate(spec.with_seed(seed))
            for P, pi, metric, which in TRIPLES:
                pair = coupled_simulate(w, bank, P, pi, seed)
                tag = (bank_name, seed, str(P), str(pi))
                res["pairs"] += 1
                if not verify_near_optimality(pair, metric, which):
                    res["near"].append(tag)
                if not check_weak_work_efficiency(pair.traceP, pair.tracePi).holds or not pair.audit_ok():
                    res["wwe"].append(tag)
                rep = PREFIX[P.name](pair.traceP, pair.tracePi)
                res["times"] += rep.checked_times
                if not rep.holds:
                    res["prefix"].append(tag + (rep.first_violation,))
    return res


def test_criterion_3_per_path_near_optimality():
    r = coupled_results()
    report(3, not r["near"], f"{r['pairs']} coupled paths (7 triples x 100 seeds x shifted-exp/deterministic), "
                             f"{len(r['near'])} violations {r['near'][:3]}")


def test_criterion_4_weak_work_efficiency():
    r = coupled_results()
    report(4, not r["wwe"], f"{r['pairs']} coupled paths, {len(r['wwe'])} without an injective matching "
                            f"or with a residual above its pi duration {r['wwe'][:3]}")


def test_criterion_5_prefix_orderings():
    r = coupled_results()
    report(5, not r["prefix"], f"{r['times']} merged event times checked, {len(r['prefix'])} paths "
                               f"with a violation {r['prefix'][:2]}")


# ---------------------------------------------------------------- 7

def test_criterion_7_marginal_fidelity():
    spec = paired_spec(100, 0.8, SIZES, MUS, DUES)
    parts, ok = [], True
    for name, bank in (("exp", EXP), ("det", DET), ("sexp", SEXP)):
        rep = marginal_fidelity_test(spec, bank, FUT, n_seeds=200)
        ok &= rep.passed
        parts.append(f"{name}: z={rep.z:+.2f} sup|F_c-F_i|={rep.max_survival_gap:.3f}")
    report(7, ok, f"200 seeds, slack 2/sqrt(200)={2 / math.sqrt(200):.3f}; " + "; ".join(parts))


# ---------------------------------------------------------------- 8

def test_criterion_8_oracles():
    rng = np.random.default_rng(8)
    mismatches = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 7))
        x, y = rng.integers(0, 6, n), rng.integers(0, 6, n)
        xd, yd = sorted(x, reverse=True), sorted(y, reverse=True)
        xa, ya = sorted(x), sorted(y)
        below = all(sum(xd[:j]) <= sum(yd[:j]) for j in range(1, n + 1))
        above = all(sum(xa[:j]) >= sum(ya[:j]) for j in range(1, n + 1))
        full = all(sum(xd[:j]) <= sum(yd[:j]) for j in range(1, n)) and sum(x) == sum(y)
        mismatches += (majorize(x, y) != full) + (weak_majorize_below(x, y) != below) \
            + (weak_majorize_above(x, y) != above)
    schur = schur_check_counterexample_search(np.max, 1000, rng)
    perm_ok = mono_ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 8))
        a = rng.uniform(0, 20, n)
        vec = a + rng.exponential(3, n)
        d = a + rng.choice([0.0, 50.0], n)
        perm = rng.permutation(n)
        c = np.full(n, 2.0)
        perm_ok &= bool(np.isclose(d_avg(vec + 2, c), d_avg((vec + 2)[perm], c)))
        i = int(rng.integers(n))
        up = vec.copy()
        up[i] += rng.uniform(0, 5)
        for m in METRICS.values():
            mono_ok &= m(up, a, d) >= m(vec, a, d) - 1e-12
    ok = mismatches == 0 and schur is None and perm_ok and mono_ok
    report(8, ok, f"oracle mismatches={mismatches} on 1e4 vectors; max Schur counterexample={schur}; "
                  f"d_avg permutation-invariant={perm_ok}; metrics monotone={mono_ok}")


# ---------------------------------------------------------------- 9

def test_criterion_9_distributions():
    rng = np.random.default_rng(9)
    dists = [Exponential(1.4), ShiftedExponential.with_mean_rate(0.6), ParetoLomax(14 / 3, 5.0), Deterministic(2.0)]
    parts, ok = [], True
    for dist in dists:
        x = dist.quantiles(rng.random(1_000_000))
        se = x.std(ddof=1) / 1000.0
        good = abs(x.mean() - dist.mean()) <= 3 * se if se > 0 else x.mean() == dist.mean()
        ok &= bool(good)
        parts.append(f"{dist.kind}:{(x.mean() - dist.mean()) / se if se else 0:+.2f}SE")
    resid_bad = 0
    for dist in dists:
        if not dist.classify().is_nbu:
            continue
        for _ in range(10_000):
            u = float(rng.random())
            chi = float(rng.uniform(0, 3 * dist.mean()))
            if dist.survival(chi) <= 0:
                continue
            resid_bad += dist.residual_quantile(chi, u) > dist.quantile(u) + 1e-12
    grid_ok = True
    for dist in dists:
        pts = np.linspace(0, 3 * dist.mean(), 50)
        grid = [(float(a), float(b)) for a in pts for b in pts]
        grid_ok &= classify_numeric(dist, grid) is dist.classify()
    ok = ok and resid_bad == 0 and grid_ok
    report(9, ok, f"means {' '.join(parts)}; residual violations={resid_bad}; classify matches 50x50 grid={grid_ok}")


# ---------------------------------------------------------------- 10

def test_criterion_10_figure_shapes(seeds=100):
    policies = (FUT, EDD, FCFS, LIFO, random_order())
    parts, ok = [], True
    for rho in (0.2, 0.5, 0.8):
        spec = paired_spec(3000, rho, SIZES, MUS, DUES)
        c = {p.name: [] for p in policies}
        lower = []
        for seed in range(seeds):
            w = generate(spec.with_seed(seed))
            for p in policies:
                v = extract_vectors(simulate(w, SEXP, p, EngineConfig(seed=seed)))
                c[p.name].append(METRICS["d_avg"].of(v, "C"))
                if p.name == "FUT":
                    lower.append(METRICS["d_avg"].of(v, "V"))
        lower = np.array(lower)
        worst = min((np.mean(np.array(c[name]) - lower) - 2 * paired_se(np.array(c[name]) - lower), name)
                    for name in c)
        ok &= worst[0] > 0
        parts.append(f"rho={rho}: min margin over policies of D_avg(C)-D_avg(V(FUT))-2SE={worst[0]:.3f} ({worst[1]})")
        if rho == 0.8:
            diff = np.array(c["FCFS"]) - np.array(c["FUT"])
            m = diff.mean() - 2 * paired_se(diff)
            ok &= m >= 0
            parts.append(f"FCFS-FUT at rho=0.8 minus 2SE={m:.3f}")
    report(10, ok, "; ".join(parts))


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
