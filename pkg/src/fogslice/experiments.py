"""Experiment runners behind the CLI: single solves, comparisons and sweeps.

Every function here returns plain rows; writing files is the CLI's job.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import Executor
from dataclasses import dataclass

import numpy as np

from .admm import AdmmConfig, IterationTrace, run_admm
from .baselines import bandwidth_only, centralized_solve, compute_only
from .errors import Infeasible, NotConverged
from .latency import cell_data, cell_delays
from .local_solver import SolverSettings
from .model import Allocation, Scenario

ALGORITHMS = ("joint", "bandwidth", "compute", "centralized")
ARCHITECTURES = ("joint", "bandwidth", "compute")
SWEEP_PARAMS = ("beta", "gamma", "theta")
DOMINANCE_TOL = 1e-6

RESULT_HEADER = ["s", "n", "bandwidth_hz", "service_rate", "comm_delay_s", "queue_delay_s", "response_time_s"]
COMPARE_HEADER = ["arch", "objective", "avg_latency", "reduction_vs_best_single"]
SWEEP_HEADER = ["param", "value", "arch", "status", "objective", "avg_latency"]


@dataclass
class Solution:
    algorithm: str
    allocation: Allocation
    objective: float
    converged: bool
    trace: IterationTrace

    @property
    def avg_latency(self) -> float:
        return self.objective / self.allocation.b.size


def solve(scenario: Scenario, algorithm: str, config: AdmmConfig = AdmmConfig(),
          settings: SolverSettings = SolverSettings(), executor: Executor | None = None) -> Solution:
    """Run one architecture. Raises Infeasible; never raises NotConverged."""
    if algorithm == "joint":
        r = run_admm(scenario, config, settings, executor=executor)
        return Solution(algorithm, r.allocation, r.objective, r.converged, r.trace)
    if algorithm == "bandwidth":
        r = bandwidth_only(scenario, settings)
        return Solution(algorithm, r.allocation, r.objective, True, IterationTrace())
    if algorithm == "compute":
        r = compute_only(scenario, settings, config)
        return Solution(algorithm, r.allocation, r.objective, bool(r.stats["converged"]), r.stats["trace"])
    if algorithm == "centralized":
        r = centralized_solve(scenario, settings)
        return Solution(algorithm, r.allocation, r.objective, bool(r.stats["converged"]), IterationTrace())
    raise ValueError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")


def result_rows(solution: Solution, scenario: Scenario) -> list[list]:
    cells = cell_data(scenario)
    a = solution.allocation
    p, q = cell_delays(a.b, a.mu, cells)
    S, N = cells.shape
    return [
        [s, n, repr(float(a.b[s, n])), repr(float(a.mu[s, n])), repr(float(p[s, n])), repr(float(q[s, n])),
         repr(float(p[s, n] + q[s, n]))]
        for s in range(S)
        for n in range(N)
    ]


@dataclass(frozen=True)
class Comparison:
    solutions: dict  # arch -> Solution

    @property
    def best_single(self) -> float:
        return min(self.solutions["bandwidth"].objective, self.solutions["compute"].objective)

    def reduction(self, arch: str) -> float:
        """Relative latency reduction of ``arch`` against the better single-resource baseline."""
        best = self.best_single
        return (best - self.solutions[arch].objective) / best

    @property
    def dominance_ok(self) -> bool:
        return self.solutions["joint"].objective <= self.best_single + DOMINANCE_TOL

    @property
    def converged(self) -> bool:
        return all(s.converged for s in self.solutions.values())

    def rows(self) -> list[list]:
        return [
            [arch, repr(sol.objective), repr(sol.avg_latency), repr(self.reduction(arch))]
            for arch, sol in self.solutions.items()
        ]


def compare(scenario: Scenario, config: AdmmConfig = AdmmConfig(), settings: SolverSettings = SolverSettings(),
            executor: Executor | None = None) -> Comparison:
    return Comparison({arch: solve(scenario, arch, config, settings, executor) for arch in ARCHITECTURES})


# --------------------------------------------------------------------------
# Sweeps


def parse_range(text: str) -> np.ndarray:
    """``"lo:hi:steps"`` -> ``steps`` evenly spaced values from lo to hi inclusive."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"sweep range must look like lo:hi:steps, got {text!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ValueError(f"sweep range must look like lo:hi:steps, got {text!r}") from exc
    if not (math.isfinite(lo) and math.isfinite(hi) and lo > 0 and hi > 0):
        raise ValueError("sweep range bounds must be positive and finite")
    if steps < 2:
        raise ValueError("sweep needs at least 2 steps")
    return np.linspace(lo, hi, steps)


def with_parameter(scenario: Scenario, param: str, value: float) -> Scenario:
    """Copy of ``scenario`` with one knob replaced.

    ``beta`` sets every BS bandwidth budget (Hz); ``gamma`` sets the compute
    budget and rescales the fog capacities to sum to it; ``theta`` sets the
    provisioning confidence.
    """
    value = float(value)
    if param == "beta":
        stations = tuple(dataclasses.replace(bs, total_bandwidth_hz=value) for bs in scenario.base_stations)
        return dataclasses.replace(scenario, base_stations=stations)
    if param == "gamma":
        pool = sum(f.capacity for f in scenario.fog_nodes)
        fogs = tuple(dataclasses.replace(f, capacity=f.capacity * value / pool) for f in scenario.fog_nodes)
        return dataclasses.replace(scenario, fog_nodes=fogs, gamma=value)
    if param == "theta":
        return dataclasses.replace(scenario, confidence=value)
    raise ValueError(f"unknown sweep parameter {param!r}; choose from {', '.join(SWEEP_PARAMS)}")


@dataclass(frozen=True)
class SweepPoint:
    param: str
    value: float
    arch: str
    status: str  # ok | not_converged | infeasible | invalid
    objective: float
    avg_latency: float

    def as_list(self) -> list:
        return [self.param, repr(self.value), self.arch, self.status, repr(self.objective), repr(self.avg_latency)]


def _sweep_point(base: Scenario, param: str, value: float, arch: str, config, settings) -> SweepPoint:
    try:
        sc = with_parameter(base, param, value)
        sol = solve(sc, arch, config, settings)
    except Infeasible:
        return SweepPoint(param, value, arch, "infeasible", math.nan, math.nan)
    except (ValueError, NotConverged):
        return SweepPoint(param, value, arch, "invalid", math.nan, math.nan)
    status = "ok" if sol.converged else "not_converged"
    return SweepPoint(param, value, arch, status, sol.objective, sol.avg_latency)


def sweep(scenario: Scenario, param: str, values, archs=ARCHITECTURES, config: AdmmConfig = AdmmConfig(),
          settings: SolverSettings = SolverSettings(), executor: Executor | None = None) -> list[SweepPoint]:
    """Solve every (value, architecture) pair; rows sorted by value then architecture order."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    jobs = [(float(v), a) for v in values for a in archs]

    def one(job):
        return _sweep_point(scenario, param, job[0], job[1], config, settings)

    points = list(executor.map(one, jobs)) if executor is not None else [one(j) for j in jobs]
    order = {a: i for i, a in enumerate(archs)}
    return sorted(points, key=lambda p: (p.value, order[p.arch]))
