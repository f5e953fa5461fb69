"""Comparison architectures and the centralized reference solver.

* ``bandwidth_only``: service rates fixed in proportion to arrival rates,
  each BS optimises its own bandwidth split.
* ``compute_only``: bandwidth fixed in proportion to expected bits per BS,
  service rates optimised across the region (distributed ADMM, b frozen).
* ``centralized_solve``: barrier Newton on the whole problem at once; the
  ground truth for every oracle comparison.
* ``projected_gradient``: first-order counterpart of the centralized solver,
  used only to compare iteration counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .admm import AdmmConfig, curvature_metric, run_admm
from .barrier import CellProblem, barrier_solve
from .errors import Infeasible
from .latency import CellData, DelayBreakdown, cell_data, cell_delays, check_feasible, total_objective
from .local_solver import SolverSettings, bs_data, phase1_point, solve_pinned
from .model import EPS, Allocation, Scenario, validate_scenario


@dataclass
class BaselineResult:
    name: str
    allocation: Allocation
    objective: float
    comm: np.ndarray
    queue: np.ndarray
    stats: dict = field(default_factory=dict)

    def breakdown(self, s: int, n: int) -> DelayBreakdown:
        return DelayBreakdown(float(self.comm[s, n]), float(self.queue[s, n]))

    @property
    def avg_latency(self) -> float:
        return self.objective / self.comm.size


def _result(name, alloc, scenario, cells, **stats) -> BaselineResult:
    p, q = cell_delays(alloc.b, alloc.mu, cells)
    return BaselineResult(name, alloc, float(np.sum(p + q)), p, q, stats)


def _require_solvable(scenario: Scenario) -> CellData:
    report = validate_scenario(scenario)
    if not report.valid:
        raise ValueError("invalid scenario: " + "; ".join(report.errors))
    if report.provisioning_tight:
        raise Infeasible("; ".join(report.tight_reasons))
    return cell_data(scenario)


def proportional_service_rates(cells: CellData) -> np.ndarray:
    """mu_sn = gamma * lam_sn / sum(lam)."""
    return cells.gamma * cells.lam / cells.lam.sum()


def load_proportional_bandwidth(cells: CellData) -> np.ndarray:
    """Per-unit bandwidth giving service n the share d_n*theta_sn / sum_m d_m*theta_sm of beta_s.

    The theta-weighted sum of each row equals beta_s exactly.
    """
    load = cells.d[None, :] * cells.theta
    return cells.beta[:, None] * cells.d[None, :] / load.sum(axis=1, keepdims=True)


def bandwidth_only(scenario: Scenario, settings: SolverSettings = SolverSettings(), mu=None) -> BaselineResult:
    cells = _require_solvable(scenario)
    mu = proportional_service_rates(cells) if mu is None else np.asarray(mu, dtype=float)
    if np.any(mu < cells.lam + EPS):
        raise Infeasible("fixed service rates do not exceed arrival rates in every cell")
    S, N = cells.shape
    b = np.empty((S, N))
    steps = 0
    for s in range(S):
        res = solve_pinned(bs_data(cells, s), settings, fixed_mu=mu[s])
        b[s] = res.x[:N]
        steps += res.newton_steps
    return _result("bandwidth", Allocation(b, mu), scenario, cells, newton_steps=steps)


def compute_only(scenario: Scenario, settings: SolverSettings = SolverSettings(),
                 config: AdmmConfig = AdmmConfig(), b=None) -> BaselineResult:
    cells = _require_solvable(scenario)
    b = load_proportional_bandwidth(cells) if b is None else np.asarray(b, dtype=float)
    if np.any(b < cells.b0[:, None] + EPS):
        raise Infeasible("fixed bandwidth split falls below the minimum grant in some cell")
    res = run_admm(scenario, config, settings, fixed_b=b)
    alloc = Allocation(b.copy(), res.allocation.mu)
    return _result("compute", alloc, scenario, cells, iterations=len(res.trace), converged=res.converged,
                   trace=res.trace)


def _region_problem(cells: CellData) -> CellProblem:
    S, N = cells.shape
    return CellProblem(
        dc=(cells.d[None, :] / cells.c).ravel(),
        lam=cells.lam.ravel(),
        tcap=np.tile(cells.tcap, S),
        lo_b=np.repeat(cells.b0, N) + EPS,
        lo_mu=cells.lam.ravel() + EPS,
        theta=cells.theta.ravel(),
        group=np.repeat(np.arange(S), N),
        budget=cells.beta.copy(),
        gamma=cells.gamma,
    )


def centralized_start(cells: CellData) -> np.ndarray:
    """Strictly feasible point of the whole problem, flattened ``[b..., mu...]``."""
    S, N = cells.shape
    pts = np.vstack([phase1_point(bs_data(cells, s)) for s in range(S)])
    b, mu = pts[:, :N], pts[:, N:]
    spare = cells.gamma - mu.sum()
    if spare <= 0:
        raise Infeasible(
            f"minimal service rates meeting the latency bounds sum to {mu.sum():.6g} "
            f">= compute budget {cells.gamma:.6g}"
        )
    mu = mu + 0.5 * spare / mu.size
    return np.concatenate([b.ravel(), mu.ravel()])


def _compute_price(alloc: Allocation, cells: CellData, fallback: float) -> float:
    """Multiplier of the compute budget, read off stationarity.

    In a cell whose latency bound is slack the service rate balances the
    marginal queueing gain against the price: 1/(mu - lam)^2 = price.
    When every latency bound is active the barrier estimate is returned.
    """
    p, q = cell_delays(alloc.b, alloc.mu, cells)
    free = cells.tcap[None, :] - (p + q) > 1e-6 * cells.tcap[None, :]
    if not np.any(free):
        return float(fallback)
    return float(np.max((q * q)[free]))


def centralized_solve(scenario: Scenario, settings: SolverSettings = SolverSettings()) -> BaselineResult:
    """Barrier Newton over all 2*S*N variables including the compute budget.

    ``stats["compute_price"]`` is the multiplier of the compute budget.
    """
    cells = _require_solvable(scenario)
    S, N = cells.shape
    problem = _region_problem(cells)
    res = barrier_solve(problem, centralized_start(cells), **settings.kwargs())
    K = S * N
    alloc = Allocation(res.x[:K].reshape(S, N), res.x[K:].reshape(S, N))
    price = _compute_price(alloc, cells, res.barrier_weight / (cells.gamma - res.x[K:].sum()))
    return _result("centralized", alloc, scenario, cells, newton_steps=res.newton_steps,
                   converged=res.converged, compute_price=price)


# --------------------------------------------------------------------------
# First-order variant


def _project_weighted_budget(v, lo, theta, budget, w):
    """argmin sum w (y - v)^2  s.t.  y >= lo, theta . y <= budget (bisection on the multiplier)."""
    y = np.maximum(v, lo)
    if np.dot(theta, y) <= budget:
        return y
    hi = 1.0
    while np.dot(theta, np.maximum(v - hi * theta / w, lo)) > budget:
        hi *= 2.0
    lo_t = 0.0
    for _ in range(200):
        mid = 0.5 * (lo_t + hi)
        if np.dot(theta, np.maximum(v - mid * theta / w, lo)) > budget:
            lo_t = mid
        else:
            hi = mid
    return np.maximum(v - hi * theta / w, lo)


def project_polyhedron(x: np.ndarray, cells: CellData, w: np.ndarray) -> np.ndarray:
    """W-metric projection onto bounds, per-BS bandwidth budgets and the compute budget.

    ``x`` and ``w`` are S x 2N; mu weights must be equal across cells.
    """
    S, N = cells.shape
    out = np.empty_like(x)
    for s in range(S):
        out[s, :N] = _project_weighted_budget(x[s, :N], cells.b0[s] + EPS, cells.theta[s], cells.beta[s], w[s, :N])
    mu = _project_weighted_budget(
        x[:, N:].ravel(), (cells.lam + EPS).ravel(), np.ones(S * N), cells.gamma, w[:, N:].ravel()
    )
    out[:, N:] = mu.reshape(S, N)
    return out


def projected_gradient(scenario: Scenario, max_iters: int = 500, target: float | None = None,
                       tol: float = 0.05, x0: np.ndarray | None = None):
    """Projected gradient with Armijo backtracking on the whole problem.

    Works in the same curvature metric as the ADMM driver. Latency bounds
    are not enforced by the projection. Returns ``(allocation, objectives)``
    where ``objectives[k-1]`` is the objective after iteration k; stops
    early once within ``tol`` (relative) of ``target`` when one is given.
    """
    cells = _require_solvable(scenario)
    S, N = cells.shape
    w = curvature_metric(cells)
    if x0 is None:
        x0 = np.vstack([phase1_point(bs_data(cells, s)) for s in range(S)])
    x = project_polyhedron(np.asarray(x0, dtype=float), cells, w)

    def f(y):
        if np.any(y[:, N:] <= cells.lam) or np.any(y[:, :N] <= 0):
            return math.inf
        return total_objective(Allocation(y[:, :N], y[:, N:]), scenario, cells)

    def grad(y):
        p = cells.d / (y[:, :N] * cells.c)
        q = 1.0 / (y[:, N:] - cells.lam)
        return np.hstack([-p / y[:, :N], -q * q])

    history = []
    fx = f(x)
    for _ in range(max_iters):
        g = grad(x)
        t = 1.0
        while True:
            y = project_polyhedron(x - t * g / w, cells, w)
            fy = f(y)
            if fy <= fx + np.sum(g * (y - x)) + 0.5 / t * np.sum(w * (y - x) ** 2):
                break
            t *= 0.5
            if t < 1e-12:
                break
        x, fx = y, fy
        history.append(fx)
        if target is not None and abs(fx - target) <= tol * abs(target):
            break
    return Allocation(x[:, :N], x[:, N:]), history


def verify_feasible(result: BaselineResult, scenario: Scenario, tol: float = 1e-6):
    return check_feasible(result.allocation, scenario, tol=tol)
