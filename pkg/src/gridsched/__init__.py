"""Electricity-price-aware metascheduling of HPC jobs across a grid of batch systems."""

from .batchsim import BatchSystem, QueueSnapshot
from .grid import GridConfig, SystemConfig, compatible, job_power, scale_runtime
from .mcmf import build_network, extract_assignments, solve_mcmf
from .metascheduler import CycleDecision, Metascheduler
from .workload import Job, Workload

__all__ = [
    "BatchSystem", "QueueSnapshot", "GridConfig", "SystemConfig", "compatible", "job_power",
    "scale_runtime", "build_network", "extract_assignments", "solve_mcmf", "CycleDecision",
    "Metascheduler", "Job", "Workload",
]
