"""Stochastic validation: Poisson task counts and FIFO M/M/1 simulation.

Random numbers come from numpy's PCG64 bit generator (``default_rng``).
Per-cell streams are keyed by the tuple ``(seed, s, n)`` through numpy's
SeedSequence, so cells are independent and any cell can be re-simulated
in isolation.

The queue is simulated customer by customer with the exact FIFO
single-server recursion ``D_i = max(A_i, D_{i-1}) + S_i`` (departure =
service start + service time). The recursion is evaluated in vectorised
chunks via ``D_i = C_i + max(D_prev, max_{j<=i}(A_j - C_{j-1}))`` with
``C`` the running sum of service times inside the chunk, which is
algebraically identical to stepping through the arrival and departure
events one at a time.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import UnstableQueue
from .latency import DelayBreakdown, cell_data, comm_delay, queue_delay
from .model import Allocation, Scenario

DEFAULT_ARRIVALS = 1_000_000
WARMUP_FRACTION = 0.05
N_BATCHES = 20
_CHUNK = 1 << 20


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def gen_poisson_counts(lam: float, n_periods: int, seed=0) -> np.ndarray:
    """I.i.d. Poisson(lam) task counts for ``n_periods`` unit periods."""
    if not (math.isfinite(lam) and lam >= 0):
        raise ValueError(f"arrival rate must be finite and >= 0, got {lam}")
    if n_periods < 0:
        raise ValueError("n_periods must be >= 0")
    return _rng(seed).poisson(lam, size=int(n_periods))


@dataclass(frozen=True)
class ArrivalStream:
    """Poisson arrival process of a given rate over ``[0, horizon_s)``."""

    rate: float
    seed: int | tuple = 0
    horizon_s: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise ValueError(f"rate must be finite and >= 0, got {self.rate}")
        if not self.horizon_s > 0:
            raise ValueError("horizon_s must be > 0")

    def arrival_times(self) -> np.ndarray:
        """Sorted arrival epochs (conditional-uniform construction)."""
        rng = _rng(self.seed)
        k = rng.poisson(self.rate * self.horizon_s)
        return np.sort(rng.uniform(0.0, self.horizon_s, size=k))


@dataclass(frozen=True)
class QueueSimResult:
    mean_sojourn_s: float
    mean_wait_s: float
    samples: int  # customers kept after the warm-up discard
    utilization: float
    ci95: float  # half-width of the 95% batch-means interval on the mean sojourn
    mean_in_system: float  # time-average number of customers over the measured window
    arrival_rate_hat: float  # kept arrivals per unit time over the same window
    arrival_rate: float  # nominal lambda

    @property
    def little_gap(self) -> float:
        """Relative mismatch between L and nominal lambda * W (Little's law)."""
        lw = self.arrival_rate * self.mean_sojourn_s
        return abs(self.mean_in_system - lw) / lw


def simulate_mm1(lam: float, mu: float, n_arrivals: int = DEFAULT_ARRIVALS, seed=0,
                 warmup: float = WARMUP_FRACTION, n_batches: int = N_BATCHES,
                 chunk: int = _CHUNK) -> QueueSimResult:
    """Simulate a FIFO M/M/1 queue for ``n_arrivals`` customers.

    The first ``warmup`` fraction of customers is discarded; statistics are
    averages over the remaining customers.
    """
    if not (lam > 0 and math.isfinite(lam) and math.isfinite(mu)):
        raise ValueError(f"need finite lam > 0, got lam={lam}, mu={mu}")
    if mu <= lam:
        raise UnstableQueue(f"service rate {mu} must exceed arrival rate {lam}")
    n = int(n_arrivals)
    skip = int(math.floor(warmup * n))
    kept = n - skip
    if kept < n_batches or n_batches < 2:
        raise ValueError("too few arrivals for the requested batches")
    batch_size = kept // n_batches

    rng = _rng(seed)
    t_prev_arrival = 0.0  # absolute time of the previous arrival
    d_prev = 0.0  # absolute departure time of the previous customer
    batch_sum = np.zeros(n_batches)
    batch_cnt = np.zeros(n_batches)
    wait_sum = 0.0
    area = 0.0  # integral of number-in-system over [t_start, last departure]
    t_start = None
    done = 0
    while done < n:
        m = min(chunk, n - done)
        inter = rng.exponential(1.0 / lam, size=m)
        serv = rng.exponential(1.0 / mu, size=m)
        # times relative to the chunk origin keep the cumulative sums small
        origin = t_prev_arrival
        a = np.cumsum(inter)
        c = np.cumsum(serv)
        c_before = c - serv
        start_bound = np.maximum.accumulate(a - c_before)
        dep = c + np.maximum(d_prev - origin, start_bound)
        soj = dep - a

        idx = np.arange(done, done + m)
        keep = idx >= skip
        if t_start is None and keep.any():
            t_start = origin + a[np.argmax(keep)]
        if t_start is not None:
            rel_start = t_start - origin
            overlap = dep - np.maximum(a, rel_start)
            area += float(np.sum(overlap[overlap > 0]))
        if keep.any():
            b = np.minimum((idx[keep] - skip) // batch_size, n_batches - 1)
            batch_sum += np.bincount(b, weights=soj[keep], minlength=n_batches)
            batch_cnt += np.bincount(b, minlength=n_batches)
            wait_sum += float(np.sum(soj[keep] - serv[keep]))

        t_prev_arrival = origin + a[-1]
        d_prev = origin + dep[-1]
        done += m

    mean_soj = float(batch_sum.sum() / kept)
    means = batch_sum / batch_cnt
    half = float(stats.t.ppf(0.975, n_batches - 1) * means.std(ddof=1) / math.sqrt(n_batches))
    window = d_prev - t_start
    return QueueSimResult(
        mean_sojourn_s=mean_soj,
        mean_wait_s=max(wait_sum / kept, 0.0),
        samples=kept,
        utilization=lam / mu,
        ci95=half,
        mean_in_system=float(area / window),
        arrival_rate_hat=float(kept / window),
        arrival_rate=float(lam),
    )


# --------------------------------------------------------------------------
# Cells of an allocation


def cell_seed(seed: int, s: int, n: int) -> tuple[int, int, int]:
    """Stream key for cell (s, n)."""
    return (int(seed), int(s), int(n))


def _simulate(s, n, alloc: Allocation, scenario: Scenario, seed, n_arrivals, cells=None):
    cells = cell_data(scenario) if cells is None else cells
    p = comm_delay(cells.d[n], float(alloc.b[s, n]), cells.c[s, n])
    q = simulate_mm1(cells.lam[s, n], float(alloc.mu[s, n]), n_arrivals, seed=cell_seed(seed, s, n))
    return p, q


def simulate_cell(s: int, n: int, alloc: Allocation, scenario: Scenario, seed: int = 0,
                  n_arrivals: int = DEFAULT_ARRIVALS) -> DelayBreakdown:
    """Empirical delay of cell (s, n): deterministic transmission + simulated sojourn."""
    p, q = _simulate(s, n, alloc, scenario, seed, n_arrivals)
    return DelayBreakdown(comm_s=p, queue_s=q.mean_sojourn_s)


VALIDATION_HEADER = ["s", "n", "analytic_p", "analytic_q", "empirical_mean", "ci95"]


@dataclass(frozen=True)
class ValidationRow:
    s: int
    n: int
    analytic_p: float
    analytic_q: float
    empirical_mean: float
    ci95: float

    @property
    def rel_error(self) -> float:
        analytic = self.analytic_p + self.analytic_q
        return abs(self.empirical_mean - analytic) / analytic

    def as_list(self) -> list:
        return [self.s, self.n, repr(self.analytic_p), repr(self.analytic_q), repr(self.empirical_mean),
                repr(self.ci95)]


def validate_allocation(alloc: Allocation, scenario: Scenario, seed: int = 0,
                        n_arrivals: int = DEFAULT_ARRIVALS, executor: Executor | None = None) -> list[ValidationRow]:
    """Simulate every cell of ``alloc``; rows ordered by (s, n)."""
    cells = cell_data(scenario)
    S, N = cells.shape
    keys = [(s, n) for s in range(S) for n in range(N)]

    def one(key):
        s, n = key
        p, q = _simulate(s, n, alloc, scenario, seed, n_arrivals, cells)
        analytic_q = queue_delay(float(alloc.mu[s, n]), cells.lam[s, n])
        return ValidationRow(s, n, p, analytic_q, p + q.mean_sojourn_s, q.ci95)

    return list(executor.map(one, keys)) if executor is not None else [one(k) for k in keys]


DEFAULT_GRID_RATES = (10.0, 50.0, 80.0)
DEFAULT_GRID_UTILIZATIONS = (0.25, 0.5, 0.75, 0.9)


def validate_grid(rates=DEFAULT_GRID_RATES, utilizations=DEFAULT_GRID_UTILIZATIONS, seed: int = 0,
                  n_arrivals: int = DEFAULT_ARRIVALS, executor: Executor | None = None) -> list[ValidationRow]:
    """Pure-queue check over a (lambda, utilization) grid.

    Row (s, n) is arrival rate ``rates[s]`` at utilization
    ``utilizations[n]``; the communication delay column is 0.
    """
    for u in utilizations:
        if not 0 < u < 1:
            raise ValueError(f"utilization must lie in (0, 1), got {u}")
    keys = [(s, n) for s in range(len(rates)) for n in range(len(utilizations))]

    def one(key):
        s, n = key
        lam = float(rates[s])
        mu = lam / float(utilizations[n])
        q = simulate_mm1(lam, mu, n_arrivals, seed=cell_seed(seed, s, n))
        return ValidationRow(s, n, 0.0, queue_delay(mu, lam), q.mean_sojourn_s, q.ci95)

    return list(executor.map(one, keys)) if executor is not None else [one(k) for k in keys]
