import numpy as np
import pytest
from hypothesis import settings

from batchq.distributions import Deterministic, Exponential, ShiftedExponential
from batchq.model import TaskRecord, Trace, Workload

settings.register_profile("batchq", deadline=None, max_examples=60)
settings.load_profile("batchq")

MUS = (1.4, 1.0, 0.6)


def exp_bank():
    return [Exponential(m) for m in MUS]


def det_bank():
    return [Deterministic(1.0 / m) for m in MUS]


def sexp_bank():
    return [ShiftedExponential.with_mean_rate(m) for m in MUS]


def hand_workload(dues=(10.0, 10.0)):
    # two jobs at time 0: job 1 has two tasks, job 2 has one
    return Workload.from_arrays([0.0, 0.0], [2, 1], list(dues))


def make_trace(workload, records, m=1, policy="hand"):
    return Trace(workload, m, policy, tuple(TaskRecord(*r) for r in records), None)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
