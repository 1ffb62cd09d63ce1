import math

import numpy as np
import pytest

from batchq.bounds import fut_gap_bound, harmonic_log_bound, two_approx_margin
from batchq.distributions import Exponential, ParetoLomax
from batchq.model import Workload


def test_gap_single_job_two_tasks():
    gb = fut_gap_bound(Workload.from_arrays([0.0], [2]), [1.0, 1.0, 1.0])
    assert gb.per_job[0] == pytest.approx(1.5)


def test_gap_unit_jobs():
    w = Workload.from_arrays([0.0, 1.0, 2.0], [1, 1, 1])
    assert fut_gap_bound(w, [1.4, 0.6, 1.0]).average == pytest.approx(1 / 0.6)


def test_gap_coarse_value():
    w = Workload.from_arrays([0.0, 0.0], [10, 1])
    gb = fut_gap_bound(w, [1.4, 1.0, 0.6])
    assert gb.coarse == pytest.approx((math.log(3) + 1) / 0.6)
    assert gb.coarse == pytest.approx(3.498, abs=1e-3)
    assert gb.average <= gb.coarse


def test_gap_rejects_bad_input():
    with pytest.raises(ValueError):
        fut_gap_bound(Workload(), [1.0])
    with pytest.raises(ValueError):
        fut_gap_bound(Workload.from_arrays([0.0], [1]), [])
    with pytest.raises(ValueError):
        fut_gap_bound(Workload.from_arrays([0.0], [1]), [1.0, 0.0])


def test_gap_warning_for_nwu_servers():
    w = Workload.from_arrays([0.0], [2])
    assert fut_gap_bound(w, [Exponential(1.0)]).warning is None
    assert fut_gap_bound(w, [ParetoLomax(14 / 3, 3.0)]).warning


def test_two_approx_margin():
    assert two_approx_margin(4, 2) == 0
    assert two_approx_margin(3, 2) == 1
    assert two_approx_margin(5, 2) == -1


def test_harmonic_log_bound():
    assert harmonic_log_bound(1) == 1
    assert harmonic_log_bound(3) == pytest.approx(2.0986, abs=1e-4)
    assert harmonic_log_bound(10) == pytest.approx(3.3026, abs=1e-4)
    for k in range(1, 200):
        assert sum(1 / l for l in range(1, k + 1)) <= harmonic_log_bound(k) + 1e-12
    with pytest.raises(ValueError):
        harmonic_log_bound(0)


def random_instance(rng):
    n = int(rng.integers(1, 8))
    w = Workload.from_arrays(np.zeros(n), rng.integers(1, 12, n))
    return w, rng.uniform(0.1, 3.0, int(rng.integers(1, 6)))


def test_exact_below_coarse_on_random_instances(rng):
    for _ in range(1000):
        w, mus = random_instance(rng)
        gb = fut_gap_bound(w, mus)
        assert gb.average <= gb.coarse + 1e-12 and np.all(gb.per_job > 0)


def test_monotone_in_sizes_and_rates(rng):
    for _ in range(300):
        w, mus = random_instance(rng)
        base = fut_gap_bound(w, mus).average
        i = int(rng.integers(w.n))
        sizes = w.sizes.copy()
        sizes[i] += 1
        assert fut_gap_bound(Workload.from_arrays(w.arrivals, sizes), mus).average >= base - 1e-12
        faster = mus.copy()
        faster[int(rng.integers(len(mus)))] *= 1.5
        assert fut_gap_bound(w, faster).average <= base + 1e-12
