"""Closed-form delay model, provisioning quantiles, objective and feasibility."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import UnstableQueue, ZeroRate
from .model import EPS, Allocation, LinkParams, Scenario


def spectral_efficiency(link: LinkParams) -> float:
    """Bits/s/Hz of a link, ``log2(1 + h*w/sigma)``.

    The log base is isolated here; it is base 2 (Shannon capacity).
    """
    return math.log2(1.0 + link.channel_gain * link.tx_power / link.noise)


def comm_delay(d_bits: float, b_hz: float, c: float) -> float:
    """Seconds to push one task unit of ``d_bits`` over ``b_hz`` at efficiency ``c``."""
    rate = b_hz * c
    if not rate > 0:
        raise ZeroRate(f"zero link rate (b={b_hz}, c={c})")
    return d_bits / rate


def queue_delay(mu: float, lam: float) -> float:
    """Mean M/M/1 sojourn time ``1/(mu - lam)``."""
    if not mu > lam:
        raise UnstableQueue(f"service rate {mu} does not exceed arrival rate {lam}")
    return 1.0 / (mu - lam)


@dataclass(frozen=True)
class DelayBreakdown:
    comm_s: float
    queue_s: float

    @property
    def total_s(self) -> float:
        return self.comm_s + self.queue_s


def poisson_quantile(theta: float, lam: float) -> int:
    """Smallest k with P(Poisson(lam) <= k) >= theta."""
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie strictly inside (0, 1), got {theta}")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if lam == 0:
        return 0
    k = int(stats.poisson.ppf(theta, lam))
    # ppf may land one off near CDF ties; settle on the exact definition.
    while k > 0 and stats.poisson.cdf(k - 1, lam) >= theta:
        k -= 1
    while stats.poisson.cdf(k, lam) < theta:
        k += 1
    return k


@dataclass(frozen=True)
class CellData:
    """Per-cell arrays derived from a scenario; cell (s, n) is BS s, service n."""

    d: np.ndarray  # (N,) bits per task unit
    tcap: np.ndarray  # (N,) latency bound
    lam: np.ndarray  # (S, N)
    c: np.ndarray  # (S, N) spectral efficiency
    theta: np.ndarray  # (S, N) provisioning quantile, float-typed integers
    beta: np.ndarray  # (S,)
    b0: np.ndarray  # (S,)
    gamma: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.lam.shape


def cell_data(scenario: Scenario) -> CellData:
    services = scenario.services
    c = np.empty((scenario.n_stations, scenario.n_services))
    for s, bs in enumerate(scenario.base_stations):
        for n, sv in enumerate(services):
            c[s, n] = spectral_efficiency(bs.load_for(sv.id).link)
    lam = scenario.arrival_rates()
    theta = np.array([[poisson_quantile(scenario.confidence, x) for x in row] for row in lam], dtype=float)
    return CellData(
        d=np.array([sv.data_size_bits for sv in services], dtype=float),
        tcap=np.array([sv.max_latency_s for sv in services], dtype=float),
        lam=lam,
        c=c,
        theta=theta,
        beta=np.array([bs.total_bandwidth_hz for bs in scenario.base_stations], dtype=float),
        b0=np.array([bs.min_bandwidth_hz for bs in scenario.base_stations], dtype=float),
        gamma=float(scenario.gamma),
    )


def cell_delays(b: np.ndarray, mu: np.ndarray, cells: CellData) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (comm, queue) delays; raises if any cell is out of domain."""
    rate = b * cells.c
    if np.any(rate <= 0):
        raise ZeroRate("zero link rate in at least one cell")
    head = mu - cells.lam
    if np.any(head <= 0):
        raise UnstableQueue("service rate does not exceed arrival rate in at least one cell")
    return cells.d / rate, 1.0 / head


def response_time(s: int, n: int, alloc: Allocation, scenario: Scenario) -> DelayBreakdown:
    bs = scenario.base_stations[s]
    sv = scenario.services[n]
    load = bs.load_for(sv.id)
    p = comm_delay(sv.data_size_bits, alloc.b[s, n], spectral_efficiency(load.link))
    q = queue_delay(alloc.mu[s, n], load.mean_arrival_rate)
    return DelayBreakdown(p, q)


def total_objective(alloc: Allocation, scenario: Scenario, cells: CellData | None = None) -> float:
    """Sum of response times over all (BS, service) cells, in seconds."""
    cells = cells if cells is not None else cell_data(scenario)
    p, q = cell_delays(alloc.b, alloc.mu, cells)
    return float(np.sum(p + q))


def average_latency(alloc: Allocation, scenario: Scenario, cells: CellData | None = None) -> float:
    return total_objective(alloc, scenario, cells) / (scenario.n_stations * scenario.n_services)


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    passed: bool
    worst_violation: float


@dataclass
class FeasibilityReport:
    checks: list[ConstraintCheck] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> ConstraintCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def check_feasible(alloc: Allocation, scenario: Scenario, eps: float = EPS, tol: float = 0.0) -> FeasibilityReport:
    """Evaluate every constraint class; a class passes if its worst violation <= ``tol``.

    Classes: ``min_bandwidth`` (b >= b0 + eps), ``queue_stability``
    (mu >= lambda + eps), ``latency`` (t <= bound), ``bandwidth_budget``
    (per BS), ``compute_budget`` (global).
    """
    cells = cell_data(scenario)
    b, mu = alloc.b, alloc.mu
    report = FeasibilityReport()

    def add(name, violation):
        worst = float(max(0.0, np.max(violation))) if np.size(violation) else 0.0
        report.checks.append(ConstraintCheck(name, worst <= tol, worst))

    add("min_bandwidth", cells.b0[:, None] + eps - b)
    add("queue_stability", cells.lam + eps - mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = b * cells.c
        p = np.where(rate > 0, cells.d / np.where(rate > 0, rate, 1.0), np.inf)
        head = mu - cells.lam
        q = np.where(head > 0, 1.0 / np.where(head > 0, head, 1.0), np.inf)
    add("latency", p + q - cells.tcap)
    add("bandwidth_budget", np.sum(cells.theta * b, axis=1) - cells.beta)
    add("compute_budget", np.array([np.sum(mu) - cells.gamma]))
    return report
