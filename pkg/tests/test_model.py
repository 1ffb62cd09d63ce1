import json

import numpy as np
import pytest

from batchq.model import (IncompleteTraceError, JobSpec, Workload, departure_times,
                          reconstruct_state, state_path, validate_trace)

from conftest import make_trace


def one_job(k=2):
    return Workload.from_arrays([0.0], [k])


def test_jobspec_rejects_bad_values():
    with pytest.raises(ValueError):
        JobSpec(1, 0.0, 0, 0.0)
    with pytest.raises(ValueError):
        JobSpec(1, -1.0, 1, 0.0)
    with pytest.raises(ValueError):
        JobSpec(1, float("inf"), 1, 0.0)


def test_workload_invariants():
    with pytest.raises(ValueError):
        Workload.from_arrays([1.0, 2.0], [1, 1])  # a_1 must be 0
    with pytest.raises(ValueError):
        Workload.from_arrays([0.0, 2.0, 1.0], [1, 1, 1])
    w = Workload.from_arrays([0.0, 0.0, 3.0], [2, 5, 1], [1.0, 2.0, 3.0])
    assert w.n == 3 and w.k_max == 5 and w.total_tasks == 8
    assert Workload.from_json(json.loads(json.dumps(w.to_json()))) == w


def test_reconstruct_empty_trace():
    s = reconstruct_state(make_trace(Workload(), []), 0.0)
    assert s.xi == () and s.gamma == ()


def test_reconstruct_one_task_started():
    tr = make_trace(one_job(), [(1, 1, 1, 0.0, 1.0)])
    s = reconstruct_state(tr, 0.0)
    assert s.xi == (2,) and s.gamma == (1,)


def test_reconstruct_at_completion_before_next_start():
    # the first task is done at t=1 and nothing else has started yet
    tr = make_trace(one_job(), [(1, 1, 1, 0.0, 1.0)])
    s = reconstruct_state(tr, 1.0)
    assert s.xi == (1,) and s.gamma == (1,)


def test_reconstruct_same_time_completion_and_start():
    tr = make_trace(one_job(), [(1, 1, 1, 0.0, 1.0), (1, 2, 1, 1.0, 2.0)])
    s = reconstruct_state(tr, 1.0)
    assert s.xi == (1,) and s.gamma == (0,)
    assert reconstruct_state(tr, 2.0).xi == (0,)


def test_reconstruct_is_piecewise_constant():
    tr = make_trace(one_job(), [(1, 1, 1, 0.0, 1.0), (1, 2, 1, 1.0, 2.0)])
    assert reconstruct_state(tr, 0.5) == reconstruct_state(tr, 0.0).__class__(0.5, (2,), (1,))
    with pytest.raises(ValueError):
        reconstruct_state(tr, -0.1)


def test_validate_well_formed():
    tr = make_trace(one_job(), [(1, 1, 1, 0.0, 1.0), (1, 2, 1, 1.0, 2.0)])
    assert validate_trace(tr) == []


def test_validate_server_overlap():
    tr = make_trace(one_job(), [(1, 1, 1, 0.0, 1.0), (1, 2, 1, 0.5, 2.0)])
    kinds = [v.kind for v in validate_trace(tr)]
    assert kinds.count("server-overlap") == 1


def test_validate_start_before_arrival():
    w = Workload.from_arrays([0.0, 2.0], [1, 1])
    tr = make_trace(w, [(1, 1, 1, 0.0, 1.0), (2, 1, 1, 1.5, 2.5)])
    v = validate_trace(tr)
    assert [x.kind for x in v] == ["starts-before-arrival"]
    assert v[0].time == 1.5 and 2 in v[0].entities


def test_departure_times():
    tr = make_trace(one_job(1), [(1, 1, 1, 0.0, 1.0)])
    assert departure_times(tr) == {1: 1.0}
    tr = make_trace(one_job(2), [(1, 1, 1, 0.0, 2.0), (1, 2, 2, 0.0, 3.0)], m=2)
    assert departure_times(tr) == {1: 3.0}
    with pytest.raises(IncompleteTraceError):
        departure_times(make_trace(one_job(2), [(1, 1, 1, 0.0, 2.0)]))


def test_state_path_bounds():
    tr = make_trace(one_job(2), [(1, 1, 1, 0.0, 2.0), (1, 2, 2, 0.0, 3.0)], m=2)
    p = state_path(tr)
    assert np.all(p.gamma <= p.xi) and np.all(p.xi <= 2)
    assert np.all(np.diff(p.xi[:, 0]) <= 0)
