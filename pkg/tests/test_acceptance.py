"""Acceptance suite: one test per release criterion.

Each test records a single ``PASS``/``FAIL`` line in ``RESULTS``; the
conftest hook prints them in the terminal summary so that ``pytest -v``
shows one verdict line per criterion.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from fogslice import cli
from fogslice import experiments as ex
from fogslice.admm import AdmmConfig, objective_or_inf, run_admm
from fogslice.baselines import bandwidth_only, centralized_solve, compute_only, projected_gradient
from fogslice.errors import Infeasible
from fogslice.latency import cell_data, poisson_quantile
from fogslice.local_solver import (ProxInput, SolverSettings, bs_data, in_local_set, local_objective_grad_hess,
                                   phase1_point)
from fogslice.orchestrator import project_halfspace
from fogslice.scenarios import demo_scenario, random_scenario, starved_scenario
from fogslice.simcore import validate_grid

RESULTS: dict[int, str] = {}

N_RANDOM = 50
RANDOM_SEED = 12345
# The centralized barrier solver stops at a Newton decrement of kkt_tol, so
# its objective is only trusted to about twice that.
ORACLE_FLOOR = 2.0 * SolverSettings().kkt_tol


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} [{title}]: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[number] = line
    print(line)


@pytest.fixture(scope="module")
def random_set():
    """The first 50 feasible random instances (S in 1..3, N in 1..2) with their centralized optima."""
    rng = np.random.default_rng(RANDOM_SEED)
    out = []
    while len(out) < N_RANDOM:
        S, N = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        sc = random_scenario(rng, S, N)
        try:
            oracle = centralized_solve(sc)
        except (Infeasible, ValueError):
            continue
        out.append((sc, oracle))
    return out


@pytest.fixture(scope="module")
def demo20():
    return demo_scenario(20, seed=0)


# --------------------------------------------------------------------------


def test_criterion_1_oracle_agreement(random_set):
    t0 = time.perf_counter()
    objectives = [run_admm(sc).objective for sc, _ in random_set]
    elapsed = time.perf_counter() - t0
    failures, worst = [], 0.0
    for i, ((_, oracle), f) in enumerate(zip(random_set, objectives)):
        err = abs(f - oracle.objective)
        worst = max(worst, err / abs(oracle.objective))
        if not err <= max(1e-3 * abs(oracle.objective), 1e-6):
            failures.append(i)
    ok = not failures and elapsed < 60.0
    record(1, "ADMM matches centralized optimum", ok,
           f"{len(random_set)} scenarios, worst relative error {worst:.2e} (tol 1e-3), "
           f"failing {failures or 'none'}, {elapsed:.1f} s (limit 60 s)")
    assert ok


def _ergodic_gaps(sc, oracle_obj):
    """|f(z_bar_k) - f*| for the running average of the z-feasible iterates, k = 1..500."""
    cells = cell_data(sc)
    N = cells.shape[1]
    res = run_admm(sc, AdmmConfig(eps_abs=0.0, eps_rel=0.0, max_iters=500), record_iterates=True)
    avg, gaps = None, []
    for k, st in enumerate(res.iterates, 1):
        avg = st.z.copy() if avg is None else avg + (st.z - avg) / k
        gaps.append(abs(objective_or_inf(avg[:, :N], avg[:, N:], sc, cells) - oracle_obj))
    return np.asarray(gaps)


def test_criterion_2_ergodic_rate(random_set):
    failures, worst_ratio = [], 0.0
    for i, (sc, oracle) in enumerate(random_set):
        gaps = _ergodic_gaps(sc, oracle.objective)
        k = np.arange(1, gaps.size + 1)
        C = float(np.max(k[4:50] * gaps[4:50]))  # fitted on k = 5..50
        tail_k, tail_gap = k[50:], np.maximum(gaps[50:] - ORACLE_FLOOR, 0.0)
        bound = C / tail_k
        ratio = float(np.max(tail_gap / bound)) if C > 0 else (np.inf if np.any(tail_gap > 0) else 0.0)
        worst_ratio = max(worst_ratio, ratio)
        if ratio > 1.0:
            failures.append((i, round(ratio, 4)))
    ok = not failures
    record(2, "ergodic gap within C/k", ok,
           f"{len(random_set)} scenarios, worst gap/(C/k) over k>50 = {worst_ratio:.4f}, "
           f"violations (scenario, ratio): {failures or 'none'}")
    assert ok


def test_criterion_3_iterations_vs_first_order(demo20):
    oracle = centralized_solve(demo20).objective
    res = run_admm(demo20)
    objz = res.trace.column("objective_z")
    within = np.flatnonzero(np.abs(objz - oracle) <= 0.05 * oracle)
    k_admm = int(within[0]) + 1 if within.size else None
    _, history = projected_gradient(demo20, max_iters=500, target=oracle, tol=0.05)
    hit = [i for i, f in enumerate(history, 1) if abs(f - oracle) <= 0.05 * oracle]
    k_pg = hit[0] if hit else None
    ok = k_admm is not None and k_admm <= 20 and (k_pg is None or k_admm < k_pg)
    record(3, "20-BS demo within 5% in <= 20 iterations", ok,
           f"ADMM reaches 5% at iteration {k_admm}, projected gradient at {k_pg or '> 500'}")
    assert ok


def _dominance_gap(sc):
    joint = run_admm(sc).objective
    singles = []
    for fn in (bandwidth_only, compute_only):
        try:
            singles.append(fn(sc).objective)
        except Infeasible:
            pass
    return (joint - min(singles), joint, min(singles)) if singles else None


def test_criterion_4_dominance(random_set, demo20):
    violations, checked = [], 0
    for i, (sc, _) in enumerate(random_set):
        g = _dominance_gap(sc)
        if g is None:
            continue
        checked += 1
        if g[0] > ex.DOMINANCE_TOL:
            violations.append((i, g[0]))
    cmp = ex.compare(demo20)
    reduction = cmp.reduction("joint")
    ok = not violations and cmp.dominance_ok and reduction > 0
    record(4, "joint never worse than single-resource", ok,
           f"{checked} random scenarios with a feasible baseline, violations {violations or 'none'}; "
           f"20-BS demo reduction vs best single {100 * reduction:.2f}%")
    assert ok


def _latencies(points):
    return np.array([p.avg_latency for p in points]), [p.status for p in points]


def test_criterion_5_sweep_trends():
    demo = demo_scenario(3, seed=0)
    problems = []
    specs = [("beta", "15e6:60e6:6", -1), ("gamma", "300:1000:6", -1), ("theta", "0.5:0.95:6", +1)]
    for param, rng_text, sign in specs:
        pts = ex.sweep(demo, param, ex.parse_range(rng_text), archs=("joint",))
        lat, status = _latencies(pts)
        if any(s != "ok" for s in status):
            problems.append(f"{param}: statuses {status}")
            continue
        steps = sign * np.diff(lat)
        if np.any(steps < -1e-9):
            problems.append(f"{param}: non-monotone steps {np.round(np.diff(lat), 9).tolist()}")
    crossover = {}
    for kind, better, worse in (("bandwidth", "bandwidth", "compute"), ("compute", "compute", "bandwidth")):
        cmp = ex.compare(starved_scenario(kind))
        o = {a: s.objective for a, s in cmp.solutions.items()}
        crossover[kind] = o[better] < o[worse] and o["joint"] <= min(o[better], o[worse]) + ex.DOMINANCE_TOL
        if not crossover[kind]:
            problems.append(f"{kind}-starved ordering {o}")
    ok = not problems
    record(5, "sweep trends and starved crossovers", ok,
           "latency falls with beta and gamma, rises with theta; bandwidth-only wins when bandwidth-starved, "
           "compute-only when compute-starved" if ok else "; ".join(problems))
    assert ok


def test_criterion_6_queue_simulation():
    t0 = time.perf_counter()
    rows = validate_grid(n_arrivals=1_000_000, seed=0)
    elapsed = time.perf_counter() - t0
    worst = max(rows, key=lambda r: r.rel_error)
    ok = worst.rel_error <= 0.05 and elapsed < 120.0
    record(6, "M/M/1 simulation matches analytic sojourn", ok,
           f"{len(rows)} cells at 1e6 arrivals, worst relative error {100 * worst.rel_error:.2f}% "
           f"(tol 5%) at (s={worst.s}, n={worst.n}), {elapsed:.1f} s (limit 120 s)")
    assert ok


def _projection_kkt_ok(v, gamma, p):
    """Halfspace projection optimality: feasible, and the residual is a nonnegative multiple of the normal."""
    r = v - p
    if p.sum() > gamma + 1e-9 * max(1.0, abs(gamma)):
        return False
    if v.sum() <= gamma:
        return np.allclose(p, v, rtol=0, atol=1e-12)
    t = r.mean()
    return t >= 0 and np.allclose(r, t, rtol=0, atol=1e-9 * max(1.0, np.abs(v).max()))


def _fd_gradient_ok(rng, n_points=100):
    """Count points where the analytic proximal gradient disagrees with central differences.

    Proximal weights scale like 1/x^2, as the solver's own metric does, so that
    no term swamps the others in double precision.
    """
    cells = cell_data(demo_scenario(2, seed=3))
    bad = 0
    for i in range(n_points):
        bs = bs_data(cells, i % 2)
        x0 = phase1_point(bs)
        x = x0 * rng.uniform(0.9, 1.1, size=x0.size)
        while not in_local_set(x, bs, strict=True):
            x = x0 * rng.uniform(0.9, 1.1, size=x0.size)
        w = rng.uniform(0.5, 2.0, size=x.size) / np.maximum(np.abs(x), 1.0) ** 2
        prox = ProxInput(bs=bs, z=x * rng.uniform(0.8, 1.2, size=x.size), dual=x * rng.uniform(-0.05, 0.05, x.size),
                         rho=float(rng.uniform(0.1, 5.0)), weights=w)
        _, g, _ = local_objective_grad_hess(x, prox)
        for j in range(x.size):
            step = 1e-6 * abs(x[j])
            xp, xm = x.copy(), x.copy()
            xp[j] += step
            xm[j] -= step
            fd = (local_objective_grad_hess(xp, prox)[0] - local_objective_grad_hess(xm, prox)[0]) / (2 * step)
            if abs(fd - g[j]) > 1e-5 * max(abs(g[j]), abs(fd)) + 1e-12:
                bad += 1
                break
    return bad


def _poisson_oracle(theta, lam):
    pmf_sum, k = 0.0, 0
    while True:
        pmf_sum += stats.poisson.pmf(k, lam)
        if pmf_sum >= theta:
            return k
        k += 1


def test_criterion_7_numerical_kernels():
    rng = np.random.default_rng(7)
    proj_bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        v = rng.normal(size=n) * 10 ** rng.uniform(-2, 3)
        gamma = float(rng.normal() * 10 ** rng.uniform(-2, 3))
        if not _projection_kkt_ok(v, gamma, project_halfspace(v, gamma)):
            proj_bad += 1

    grad_bad = _fd_gradient_ok(rng)

    split_bad = 0
    for sc in (demo_scenario(3, seed=1), starved_scenario("compute"), starved_scenario("bandwidth")):
        res = run_admm(sc, record_iterates=True)
        N = cell_data(sc).shape[1]
        for st in res.iterates:
            if np.any(st.lam[:, :N] != 0.0) or np.any(st.z[:, :N] != st.x[:, :N]):
                split_bad += 1

    q = poisson_quantile(0.9, 10.0)
    q_ok = q == 14 and q == _poisson_oracle(0.9, 10.0)

    ok = proj_bad == 0 and grad_bad == 0 and split_bad == 0 and q_ok
    record(7, "numerical kernels", ok,
           f"projection KKT failures {proj_bad}/1000, gradient FD mismatches {grad_bad}/100, "
           f"bandwidth split violations {split_bad}, Poisson quantile(0.9, 10) = {q} (oracle {_poisson_oracle(0.9, 10.0)})")
    assert ok


def _cli_outputs(root: Path, tag: str, workers: int) -> dict[str, bytes]:
    common = ["--generate-demo", "3", "--seed", "5", "--workers", str(workers)]
    invocations = {
        "run": (["run", *common], ["result.csv", "trace.csv"]),
        "compare": (["compare", *common], ["compare.csv"]),
        "sweep": (["sweep", *common, "--sweep-param", "gamma", "--sweep-range", "300:600:3"], ["sweep.csv"]),
        "validate-queue": (["validate-queue", "--seed", "5", "--arrivals", "20000", "--workers", str(workers)],
                           ["queue_validation.csv"]),
    }
    out = {}
    for name, (argv, files) in invocations.items():
        d = root / f"{tag}-{name}"
        code = cli.main([*argv, "--out", str(d)])
        out[f"{name}:exit"] = str(code).encode()
        for f in files:
            out[f"{name}:{f}"] = (d / f).read_bytes()
    return out


def test_criterion_8_determinism(tmp_path):
    first = _cli_outputs(tmp_path, "serial-a", 1)
    second = _cli_outputs(tmp_path, "serial-b", 1)
    parallel = _cli_outputs(tmp_path, "parallel", 4)
    diff = sorted({k for k in first if first[k] != second[k] or first[k] != parallel[k]})
    ok = not diff
    record(8, "bit-identical outputs", ok,
           f"{len(first)} outputs compared across two serial runs and a 4-worker run, differing: {diff or 'none'}")
    assert ok
