import math

import numpy as np
import pytest

from conftest import single_cell
from fogslice.errors import UnstableQueue
from fogslice.latency import poisson_quantile
from fogslice.model import Allocation
from fogslice.simcore import (
    ArrivalStream,
    gen_poisson_counts,
    simulate_cell,
    simulate_mm1,
    validate_allocation,
    validate_grid,
)


def test_zero_rate_counts():
    assert not gen_poisson_counts(0.0, 1000, seed=1).any()


def test_poisson_counts_moments():
    x = gen_poisson_counts(10.0, 1_000_000, seed=7)
    assert abs(x.mean() - 10.0) <= 0.05
    assert abs(x.var() - 10.0) <= 0.2


def test_poisson_counts_quantile_coverage():
    x = gen_poisson_counts(10.0, 1_000_000, seed=11)
    k = poisson_quantile(0.9, 10.0)
    # pmf-sum oracle: P(X <= 14) for Poisson(10)
    cdf = math.fsum(math.exp(-10.0) * 10.0**j / math.factorial(j) for j in range(k + 1))
    assert 0.9 <= cdf <= 0.93
    assert 0.90 <= np.mean(x <= k) <= 0.93


def test_counts_reproducible():
    assert np.array_equal(gen_poisson_counts(3.0, 100, seed=5), gen_poisson_counts(3.0, 100, seed=5))
    with pytest.raises(ValueError):
        gen_poisson_counts(-1.0, 10)


def test_arrival_stream():
    t = ArrivalStream(rate=50.0, seed=2, horizon_s=2000.0).arrival_times()
    assert np.all(np.diff(t) >= 0) and t[-1] < 2000.0
    assert abs(t.size - 1e5) < 5 * math.sqrt(1e5)


def naive_fifo(lam, mu, n, seed, chunk, warmup=0.05):
    """Customer-by-customer FIFO single server using the same random draws."""
    rng = np.random.default_rng(seed)
    inter, serv = [], []
    done = 0
    while done < n:
        m = min(chunk, n - done)
        inter.extend(rng.exponential(1.0 / lam, m))
        serv.extend(rng.exponential(1.0 / mu, m))
        done += m
    t = 0.0
    free_at = 0.0
    soj = []
    for a, s in zip(inter, serv):
        t += a
        start = max(t, free_at)
        free_at = start + s
        soj.append(free_at - t)
    skip = int(math.floor(warmup * n))
    return math.fsum(soj[skip:]) / (n - skip)


@pytest.mark.parametrize("chunk", [10_000, 997])
def test_vectorised_recursion_matches_event_loop(chunk):
    sim = simulate_mm1(8.0, 10.0, 10_000, seed=3, chunk=chunk)
    assert sim.mean_sojourn_s == pytest.approx(naive_fifo(8.0, 10.0, 10_000, 3, chunk), rel=1e-9)


def test_reference_queue():
    sim = simulate_mm1(80.0, 180.0, 1_000_000, seed=0)
    assert sim.mean_sojourn_s == pytest.approx(0.01, rel=0.05)
    assert sim.mean_sojourn_s >= sim.mean_wait_s >= 0
    assert sim.utilization == pytest.approx(80 / 180)
    assert sim.samples == 950_000
    assert sim.ci95 > 0


def test_littles_law():
    for lam, mu in [(80.0, 180.0), (9.0, 10.0), (5.0, 20.0)]:
        sim = simulate_mm1(lam, mu, 1_000_000, seed=4)
        assert sim.little_gap <= 0.03


def test_unstable_queue_rejected():
    with pytest.raises(UnstableQueue):
        simulate_mm1(10.0, 10.0)
    with pytest.raises(ValueError):
        simulate_mm1(0.0, 10.0)


def test_simulation_reproducible():
    a = simulate_mm1(5.0, 7.0, 50_000, seed=(1, 2, 3))
    b = simulate_mm1(5.0, 7.0, 50_000, seed=(1, 2, 3))
    assert a == b
    assert a != simulate_mm1(5.0, 7.0, 50_000, seed=(1, 2, 4))


@pytest.mark.slow
def test_near_critical_queue():
    sim = simulate_mm1(100.0, 101.0, 100_000_000, seed=0)
    assert sim.mean_sojourn_s == pytest.approx(1.0, rel=0.10)


def test_cell_limits():
    sc = single_cell(lam=80.0, gamma=1e9, d=1e6, snr=3.0)
    # huge bandwidth -> queue only
    t = simulate_cell(0, 0, Allocation([[1e15]], [[180.0]]), sc, seed=1)
    assert t.comm_s < 1e-8 and t.queue_s == pytest.approx(0.01, rel=0.05)
    # huge service rate -> transmission plus one service time
    t = simulate_cell(0, 0, Allocation([[1e6]], [[1e6]]), sc, seed=1)
    assert t.total_s == pytest.approx(0.5 + 1e-6, rel=1e-3)
    # reference cell: 0.5 s transmission + 0.01 s sojourn
    t = simulate_cell(0, 0, Allocation([[1e6]], [[180.0]]), sc, seed=1)
    assert t.total_s == pytest.approx(0.51, rel=0.05)


def test_validation_rows_ordered_and_close(demo3):
    from fogslice.admm import run_admm

    alloc = run_admm(demo3).allocation
    rows = validate_allocation(alloc, demo3, seed=0, n_arrivals=200_000)
    assert [(r.s, r.n) for r in rows] == [(s, n) for s in range(3) for n in range(3)]
    assert max(r.rel_error for r in rows) <= 0.05


def test_grid_rejects_unstable_utilization():
    with pytest.raises(ValueError):
        validate_grid(utilizations=(0.5, 1.0))
