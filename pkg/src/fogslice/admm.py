"""Distributed ADMM driver with partial variable splitting.

Round k: every BS solves its proximal subproblem against (z_s, lam_s) and
reports x_s; the orchestrator projects the service-rate block onto the
compute budget, updates the scaled duals, tests the residual stopping rule
and sends each BS its slice back. Only the service rates are coupled, so
the bandwidth duals stay exactly zero and z_b == x_b after every round.

Conditioning: b is in Hz (~1e5..1e7) and mu in units/s (~1e1..1e2), so a
single Euclidean rho cannot suit both. By default the prox and residual
norms use a diagonal metric equal to the objective's curvature at a
reference allocation (equal per-unit bandwidth shares, compute headroom
split evenly). All mu entries share one weight, so the z-update stays the
plain halfspace projection. ``metric="identity"`` restores the Euclidean
form.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import Executor
from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible
from .latency import CellData, FeasibilityReport, cell_data, check_feasible, total_objective
from .local_solver import BsData, ProxInput, SolverSettings, bs_data, phase1_point, solve_pinned, solve_subproblem
from .model import EPS, Allocation, Scenario, validate_scenario
from .orchestrator import (
    BsReport,
    ConsensusState,
    RegionalOrchestrator,
    Residuals,
    RoFeedback,
    project_halfspace,
    z_update,
)

TRACE_HEADER = ["iter", "objective_x", "objective_z", "primal_res", "dual_res", "wall_ms"]


@dataclass(frozen=True)
class AdmmConfig:
    rho: float = 1.0
    max_iters: int = 500
    eps_abs: float = 1e-6
    eps_rel: float = 1e-4
    adaptive_rho: str = "off"  # or "residual_balancing"
    balance_factor: float = 10.0
    balance_scale: float = 2.0
    metric: str = "curvature"  # or "identity"

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.adaptive_rho not in ("off", "residual_balancing"):
            raise ValueError(f"unknown adaptive_rho mode {self.adaptive_rho!r}")
        if self.metric not in ("curvature", "identity"):
            raise ValueError(f"unknown metric {self.metric!r}")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    objective_x: float
    objective_z: float
    primal_res: float
    dual_res: float
    wall_ms: float
    rho: float


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def write_csv(self, path, timing: bool = False) -> None:
        """Export with the fixed header; ``wall_ms`` is 0 unless ``timing``."""
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(TRACE_HEADER)
            for r in self.records:
                out.writerow(
                    [r.k, repr(r.objective_x), repr(r.objective_z), repr(r.primal_res), repr(r.dual_res),
                     repr(round(r.wall_ms, 3)) if timing else "0"]
                )


@dataclass
class AdmmState:
    k: int
    x: np.ndarray  # S x 2N, last reported iterates
    z: np.ndarray
    lam: np.ndarray
    rho: float
    stop: bool = False


@dataclass
class AdmmResult:
    allocation: Allocation
    trace: IterationTrace
    converged: bool
    state: AdmmState
    objective: float
    feasibility: FeasibilityReport
    iterates: list[AdmmState] = field(default_factory=list)


@dataclass
class BaseStationAgent:
    """BS side of a round: private data plus the local solve."""

    s: int
    data: BsData
    settings: SolverSettings
    w: np.ndarray
    fixed_b: np.ndarray | None = None

    def initial_point(self) -> np.ndarray:
        return phase1_point(self.data, fixed_b=self.fixed_b)

    def update(self, fb: RoFeedback) -> BsReport:
        target = fb.z - fb.lam
        if self.fixed_b is None:
            res = solve_subproblem(ProxInput(self.data, fb.z, fb.lam, fb.rho, self.w), self.settings)
        else:
            res = solve_pinned(self.data, self.settings, fixed_b=self.fixed_b, rho=fb.rho, w=self.w, v=target)
        return BsReport(s=self.s, k=fb.k + 1, x=res.x)


def curvature_metric(cells: CellData, fixed_b: np.ndarray | None = None) -> np.ndarray:
    """Diagonal of the objective Hessian at a reference allocation, S x 2N."""
    S, N = cells.shape
    headroom = (cells.gamma - cells.lam.sum()) / (S * N)
    if headroom <= 0:
        raise Infeasible("compute budget does not exceed the total arrival rate")
    if fixed_b is None:
        b_ref = (cells.beta / cells.theta.sum(axis=1))[:, None] * np.ones((1, N))
    else:
        b_ref = fixed_b
    w_b = 2.0 * cells.d / (b_ref**3 * cells.c)
    w_mu = np.full((S, N), 2.0 / headroom**3)
    return np.hstack([w_b, w_mu])


def _bounded_halfspace(v: np.ndarray, lo: np.ndarray, gamma: float) -> np.ndarray:
    """Euclidean projection onto ``{u >= lo, sum(u) <= gamma}`` (requires ``sum(lo) <= gamma``)."""
    if v.sum() <= gamma:
        return v.copy()
    lo_t, hi_t = 0.0, float(np.max(v - lo))
    for _ in range(200):
        mid = 0.5 * (lo_t + hi_t)
        if np.maximum(v - mid, lo).sum() > gamma:
            lo_t = mid
        else:
            hi_t = mid
    return np.maximum(v - hi_t, lo)


def polish(x: np.ndarray, gamma: float, cells: CellData | None = None) -> Allocation:
    """Bandwidths from ``x``; service rates projected onto the compute budget.

    With ``cells`` the projection also keeps every service rate at or above
    the least rate that meets its latency bound at the given bandwidth, so a
    locally feasible ``x`` stays locally feasible. Without it (or when those
    floors alone exceed the budget) it is the plain halfspace projection.
    """
    S, n2 = x.shape
    N = n2 // 2
    b, v = x[:, :N], x[:, N:]
    mu = None
    if cells is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            room = cells.tcap[None, :] - cells.d[None, :] / (b * cells.c)
            floor = np.where(room > 0, cells.lam + 1.0 / room, np.inf)
        floor = np.minimum(np.maximum(floor, cells.lam + EPS), v)
        if floor.sum() <= gamma:
            mu = _bounded_halfspace(v.ravel(), floor.ravel(), gamma).reshape(S, N)
    if mu is None:
        mu = project_halfspace(v.ravel(), gamma).reshape(S, N)
    return Allocation(b=b.copy(), mu=np.maximum(mu, 0.0))


def objective_or_inf(alloc_b, alloc_mu, scenario, cells) -> float:
    if np.any(alloc_mu <= cells.lam) or np.any(alloc_b <= 0):
        return math.inf
    return total_objective(Allocation(alloc_b, alloc_mu), scenario, cells)


def z_feasible_objective(x: np.ndarray, scenario: Scenario, cells: CellData) -> float:
    """Objective after projecting the service rates of ``x`` onto the budget."""
    N = x.shape[1] // 2
    mu = project_halfspace(x[:, N:].ravel(), cells.gamma).reshape(x.shape[0], N)
    return objective_or_inf(x[:, :N], mu, scenario, cells)


def _check_preconditions(scenario: Scenario) -> None:
    report = validate_scenario(scenario)
    if not report.valid:
        raise ValueError("invalid scenario: " + "; ".join(report.errors))
    if report.provisioning_tight:
        raise Infeasible("; ".join(report.tight_reasons))


def make_agents(scenario: Scenario, config: AdmmConfig, settings: SolverSettings, fixed_b=None):
    cells = cell_data(scenario)
    S, N = cells.shape
    if fixed_b is not None:
        fixed_b = np.asarray(fixed_b, dtype=float)
    w = curvature_metric(cells, fixed_b) if config.metric == "curvature" else np.ones((S, 2 * N))
    agents = [
        BaseStationAgent(s, bs_data(cells, s), settings, w[s].copy(), None if fixed_b is None else fixed_b[s])
        for s in range(S)
    ]
    return cells, w, agents


def initial_state(agents, cells: CellData, config: AdmmConfig) -> AdmmState:
    x0 = np.vstack([a.initial_point() for a in agents])
    N = cells.shape[1]
    if x0[:, N:].sum() >= cells.gamma:
        raise Infeasible(
            f"minimal service rates meeting the latency bounds sum to {x0[:, N:].sum():.6g} "
            f">= compute budget {cells.gamma:.6g}"
        )
    lam0 = np.zeros_like(x0)
    z0 = z_update(x0, ConsensusState(z=x0, lam=lam0), cells.gamma)
    return AdmmState(k=0, x=x0, z=z0, lam=lam0, rho=config.rho)


def run_round(state: AdmmState, agents, gamma: float, config: AdmmConfig, w=None,
              executor: Executor | None = None, objective_fn=None) -> tuple[AdmmState, Residuals]:
    """One bulk-synchronous round: S local solves, then the orchestrator step."""
    feedback = [
        RoFeedback(s=a.s, k=state.k, z=state.z[a.s].copy(), lam=state.lam[a.s].copy(), stop=False, rho=state.rho)
        for a in agents
    ]
    if executor is None:
        reports = [a.update(fb) for a, fb in zip(agents, feedback)]
    else:
        reports = list(executor.map(lambda pair: pair[0].update(pair[1]), zip(agents, feedback)))
    x = np.vstack([r.x for r in sorted(reports, key=lambda r: r.s)])
    objective = objective_fn(x) if objective_fn is not None else float("nan")
    ro = RegionalOrchestrator(
        state=ConsensusState(z=state.z, lam=state.lam, k=state.k),
        gamma=gamma, rho=state.rho, w=w, eps_abs=config.eps_abs, eps_rel=config.eps_rel,
    )
    answers = ro.step(reports, objective)
    res = ro.last
    if config.adaptive_rho == "residual_balancing" and not answers[0].stop:
        if res.primal > config.balance_factor * res.dual:
            ro.rescale_rho(config.balance_scale)
        elif res.dual > config.balance_factor * res.primal:
            ro.rescale_rho(1.0 / config.balance_scale)
    new = AdmmState(k=ro.state.k, x=x, z=ro.state.z, lam=ro.state.lam, rho=ro.rho, stop=answers[0].stop)
    return new, res


def run_admm(scenario: Scenario, config: AdmmConfig = AdmmConfig(), settings: SolverSettings = SolverSettings(),
             *, fixed_b=None, executor: Executor | None = None, record_iterates: bool = False) -> AdmmResult:
    """Solve the joint slicing problem by distributed ADMM.

    ``fixed_b`` (S x N) pins every bandwidth and optimises service rates
    only. Raises Infeasible if no strictly feasible start exists. When
    ``max_iters`` is hit the last iterate is returned with
    ``converged=False``.
    """
    _check_preconditions(scenario)
    cells, w, agents = make_agents(scenario, config, settings, fixed_b)
    state = initial_state(agents, cells, config)
    trace = IterationTrace()
    iterates = []

    def objective_x(x):
        N = cells.shape[1]
        return total_objective(Allocation(x[:, :N], x[:, N:]), scenario, cells)

    for _ in range(config.max_iters):
        t0 = time.perf_counter()
        state, res = run_round(state, agents, cells.gamma, config, w, executor, objective_x)
        trace.records.append(
            IterationRecord(
                k=state.k,
                objective_x=res.objective,
                objective_z=z_feasible_objective(state.x, scenario, cells),
                primal_res=res.primal,
                dual_res=res.dual,
                wall_ms=(time.perf_counter() - t0) * 1e3,
                rho=state.rho,
            )
        )
        if record_iterates:
            iterates.append(AdmmState(state.k, state.x.copy(), state.z.copy(), state.lam.copy(), state.rho, state.stop))
        if state.stop:
            break

    alloc = polish(state.x, cells.gamma, cells)
    feas = check_feasible(alloc, scenario, tol=1e-5)
    return AdmmResult(
        allocation=alloc,
        trace=trace,
        converged=state.stop,
        state=state,
        objective=objective_or_inf(alloc.b, alloc.mu, scenario, cells),
        feasibility=feas,
        iterates=iterates,
    )
