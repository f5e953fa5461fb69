"""Per-base-station proximal subproblem.

Each BS s holds only its own data and solves

    minimize  f_s(x_s) + rho/2 * || x_s - z_s + u_s ||_W^2   over x_s in G_s

where ``x_s = [b_s1..b_sN, mu_s1..mu_sN]``, f_s is the summed response time
of its cells, ``u_s`` the scaled dual and G_s its local constraint set.
W is a diagonal metric (identity unless the driver supplies weights).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .barrier import CellProblem, barrier_solve
from .errors import DomainError, Infeasible
from .latency import CellData
from .model import EPS

PHASE1_DELTA = 1e-3


@dataclass(frozen=True)
class BsData:
    """Private data of one base station: its N cells and bandwidth budget."""

    d: np.ndarray
    c: np.ndarray
    lam: np.ndarray
    tcap: np.ndarray
    theta: np.ndarray
    beta: float
    b0: float

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def lo_b(self) -> np.ndarray:
        return np.full(self.n, self.b0 + EPS)

    @property
    def lo_mu(self) -> np.ndarray:
        return self.lam + EPS

    def problem(self, **kwargs) -> CellProblem:
        return CellProblem(
            dc=self.d / self.c,
            lam=self.lam,
            tcap=self.tcap,
            lo_b=self.lo_b,
            lo_mu=self.lo_mu,
            theta=self.theta,
            group=np.zeros(self.n, dtype=np.int64),
            budget=np.array([self.beta]),
            **kwargs,
        )


def bs_data(cells: CellData, s: int) -> BsData:
    return BsData(
        d=cells.d.copy(),
        c=cells.c[s].copy(),
        lam=cells.lam[s].copy(),
        tcap=cells.tcap.copy(),
        theta=cells.theta[s].copy(),
        beta=float(cells.beta[s]),
        b0=float(cells.b0[s]),
    )


@dataclass(frozen=True)
class SolverSettings:
    kkt_tol: float = 1e-8
    max_newton_iters: int = 200
    barrier_mu0: float = 10.0
    barrier_shrink: float = 0.2
    ls_alpha: float = 0.25
    ls_beta: float = 0.5

    def __post_init__(self):
        if not (self.kkt_tol > 0 and self.max_newton_iters > 0 and self.barrier_mu0 > 0):
            raise ValueError("solver settings must be positive")
        if not 0 < self.barrier_shrink < 1:
            raise ValueError("barrier_shrink must lie in (0, 1)")
        if not (0 < self.ls_alpha < 0.5 and 0 < self.ls_beta < 1):
            raise ValueError("line search needs 0 < alpha < 0.5 and 0 < beta < 1")

    def kwargs(self) -> dict:
        return dict(
            mu0=self.barrier_mu0,
            shrink=self.barrier_shrink,
            kkt_tol=self.kkt_tol,
            max_newton=self.max_newton_iters,
            ls_alpha=self.ls_alpha,
            ls_beta=self.ls_beta,
        )


@dataclass(frozen=True)
class ProxInput:
    bs: BsData
    z: np.ndarray
    dual: np.ndarray
    rho: float
    weights: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        size = 2 * self.bs.n
        for name in ("z", "dual"):
            if np.shape(getattr(self, name)) != (size,):
                raise ValueError(f"{name} must have length {size}")
        if self.weights is not None and (np.shape(self.weights) != (size,) or np.any(self.weights <= 0)):
            raise ValueError(f"weights must be {size} positive entries")

    @property
    def target(self) -> np.ndarray:
        return np.asarray(self.z, dtype=float) - np.asarray(self.dual, dtype=float)

    @property
    def w(self) -> np.ndarray:
        return np.ones(2 * self.bs.n) if self.weights is None else np.asarray(self.weights, dtype=float)


@dataclass(frozen=True)
class ProxResult:
    x: np.ndarray
    converged: bool
    newton_steps: int


def local_objective_grad_hess(x, prox: ProxInput):
    """Value, gradient and Hessian diagonal of the proximal objective at ``x``.

    The Hessian of the smooth part is diagonal: ``2 d/(b^3 c)`` on bandwidths
    and ``2/(mu - lam)^3`` on service rates, plus ``rho * w`` from the
    proximal term.
    """
    bs = prox.bs
    x = np.asarray(x, dtype=float)
    n = bs.n
    b, mu = x[:n], x[n:]
    if not in_local_set(x, bs, strict=True):
        raise DomainError("point is not strictly inside the local feasible set")
    head = mu - bs.lam
    p = bs.d / (b * bs.c)
    q = 1.0 / head
    r = x - prox.target
    w = prox.w
    value = float(np.sum(p + q) + 0.5 * prox.rho * np.sum(w * r * r))
    grad = np.concatenate([-p / b, -q * q]) + prox.rho * w * r
    hess = np.concatenate([2.0 * p / (b * b), 2.0 * q**3]) + prox.rho * w
    return value, grad, hess


def in_local_set(x, bs: BsData, strict: bool = False, margin: float = 0.0) -> bool:
    """Membership of ``x`` in G_s; ``strict`` requires every slack > ``margin``."""
    x = np.asarray(x, dtype=float)
    n = bs.n
    b, mu = x[:n], x[n:]
    head = mu - bs.lam
    if np.any(b <= 0) or np.any(head <= 0):
        return False
    t = bs.d / (b * bs.c) + 1.0 / head
    slacks = np.concatenate([b - bs.lo_b, mu - bs.lo_mu, bs.tcap - t, [bs.beta - np.dot(bs.theta, b)]])
    return bool(np.all(slacks > margin)) if strict else bool(np.all(slacks >= -margin))


def phase1_point(bs: BsData, fixed_b=None, fixed_mu=None, delta: float = PHASE1_DELTA) -> np.ndarray:
    """A strictly interior point of G_s, optionally with one block pinned.

    Bandwidth: every service gets the least bandwidth that keeps its
    communication delay comfortably under its latency bound (and above the
    minimum grant), and the rest of ``(1 - delta) * beta`` is spread as an
    equal per-unit top-up. Service rates: the smallest headroom that caps the
    response time at ``(1 - delta)`` of its bound.

    Raises Infeasible when the latency bounds cannot all be met.
    """
    n = bs.n
    cap = (1.0 - delta) * bs.tcap
    dc = bs.d / bs.c
    if fixed_b is not None:
        b = np.asarray(fixed_b, dtype=float).copy()
        if np.any(b <= 0):
            raise Infeasible("pinned bandwidth must be positive")
        p = dc / b
    else:
        if fixed_mu is not None:
            budget_p = cap - 1.0 / _headroom(bs, fixed_mu)
        else:
            budget_p = (1.0 - delta) * cap
        if np.any(budget_p <= 0):
            raise Infeasible("queueing delay alone exceeds the latency bound")
        lower = np.maximum(bs.lo_b + EPS, dc / budget_p)
        spend = (1.0 - delta) * bs.beta
        need = float(np.dot(bs.theta, lower))
        if need >= spend:
            raise Infeasible(
                f"bandwidth budget {bs.beta} Hz cannot meet every latency bound (needs {need / (1 - delta):.6g} Hz)"
            )
        units = float(np.sum(bs.theta))
        b = lower + (spend - need) / units
        p = dc / b
    if fixed_mu is not None:
        mu = np.asarray(fixed_mu, dtype=float).copy()
        if np.any(p + 1.0 / _headroom(bs, mu) >= bs.tcap):
            raise Infeasible("pinned service rates violate a latency bound")
    else:
        slack = cap - p
        if np.any(slack <= 0):
            raise Infeasible("communication delay alone exceeds the latency bound")
        mu = bs.lam + np.maximum(2 * EPS, 1.0 / slack)
    return np.concatenate([b, mu])


def _headroom(bs: BsData, mu) -> np.ndarray:
    head = np.asarray(mu, dtype=float) - bs.lam
    if np.any(head <= 0):
        raise Infeasible("pinned service rate does not exceed the arrival rate")
    return head


def solve_subproblem(prox: ProxInput, settings: SolverSettings = SolverSettings()) -> ProxResult:
    """Minimise the proximal objective over G_s by barrier Newton.

    Pure function of its inputs: the start point is always the phase-1
    point, so identical inputs give bit-identical outputs.
    """
    x0 = phase1_point(prox.bs)
    problem = prox.bs.problem(rho=prox.rho, w=prox.w, v=prox.target)
    res = barrier_solve(problem, x0, **settings.kwargs())
    return ProxResult(x=res.x, converged=res.converged, newton_steps=res.newton_steps)


def solve_pinned(bs: BsData, settings: SolverSettings, fixed_b=None, fixed_mu=None, rho=0.0, w=None, v=None):
    """Barrier solve with one block frozen; used by the single-resource paths."""
    x0 = phase1_point(bs, fixed_b=fixed_b, fixed_mu=fixed_mu)
    problem = bs.problem(free_b=fixed_b is None, free_mu=fixed_mu is None, rho=rho, w=w, v=v)
    res = barrier_solve(problem, x0, **settings.kwargs())
    return ProxResult(x=res.x, converged=res.converged, newton_steps=res.newton_steps)
