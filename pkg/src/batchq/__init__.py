"""Simulation and sample-path verification for batch-job scheduling on
heterogeneous parallel servers."""
from .distributions import Deterministic, Exponential, ParetoLomax, ShiftedExponential
from .engine import EDD, FCFS, FUT, LIFO, RANDOM, EngineConfig, Policy, ServerSelect, simulate
from .model import JobSpec, Trace, Workload

__all__ = ["Deterministic", "Exponential", "ParetoLomax", "ShiftedExponential", "EDD", "FCFS",
           "FUT", "LIFO", "RANDOM", "EngineConfig", "Policy", "ServerSelect", "simulate",
           "JobSpec", "Trace", "Workload"]
__version__ = "0.1.0"
