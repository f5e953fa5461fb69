"""Primal log-barrier Newton solver for the slicing cell problem.

One kernel serves the per-BS proximal subproblem, the single-resource
baselines and the centralized reference. The problem over K cells with
variables ``x = [b_1..b_K, mu_1..mu_K]`` is

    minimize   sum_k dc_k / b_k + 1 / (mu_k - lam_k) + rho/2 * sum_i w_i (x_i - v_i)^2
    subject to b_k >= lo_b_k,  mu_k >= lo_mu_k,  dc_k / b_k + 1 / (mu_k - lam_k) <= tcap_k,
               sum_{k in g} theta_k b_k <= budget_g   for each group g,
               sum_k mu_k <= gamma                    (optional)

where ``dc = d / c``. Either variable block may be frozen at its start
value; constraints touching only frozen variables are then dropped.

The barrier path starts at weight ``mu0`` and shrinks by ``shrink`` until
``m * weight <= kkt_tol`` (m = number of barrier terms), which bounds the
suboptimality of the returned point by ``kkt_tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

OK = 0
MAX_ITERS = 1


@numba.njit(cache=True, nogil=True)
def _value(x, mb, dc, lam, tcap, lo_b, lo_mu, theta, group, budget, n_groups, gamma, has_global,
           free_b, free_mu, rho, w, v):
    K = dc.shape[0]
    f = 0.0
    phi = 0.0
    for k in range(K):
        b = x[k]
        m = x[K + k]
        head = m - lam[k]
        if b <= 0.0 or head <= 0.0:
            return np.inf
        p = dc[k] / b
        q = 1.0 / head
        f += p + q
        s = tcap[k] - p - q
        if s <= 0.0:
            return np.inf
        phi -= math.log(s)
        if free_b:
            s = b - lo_b[k]
            if s <= 0.0:
                return np.inf
            phi -= math.log(s)
        if free_mu:
            s = m - lo_mu[k]
            if s <= 0.0:
                return np.inf
            phi -= math.log(s)
    if free_b:
        used = np.zeros(n_groups)
        for k in range(K):
            used[group[k]] += theta[k] * x[k]
        for g in range(n_groups):
            s = budget[g] - used[g]
            if s <= 0.0:
                return np.inf
            phi -= math.log(s)
    if free_mu and has_global:
        tot = 0.0
        for k in range(K):
            tot += x[K + k]
        s = gamma - tot
        if s <= 0.0:
            return np.inf
        phi -= math.log(s)
    if rho > 0.0:
        for i in range(2 * K):
            if (i < K and free_b) or (i >= K and free_mu):
                r = x[i] - v[i]
                f += 0.5 * rho * w[i] * r * r
    return f + mb * phi


@numba.njit(cache=True, nogil=True)
def _grad_hess(x, mb, dc, lam, tcap, lo_b, lo_mu, theta, group, budget, n_groups, gamma, has_global,
               free_b, free_mu, rho, w, v):
    K = dc.shape[0]
    g = np.zeros(2 * K)
    H = np.zeros((2 * K, 2 * K))
    for k in range(K):
        b = x[k]
        m = x[K + k]
        q = 1.0 / (m - lam[k])
        p = dc[k] / b
        gb = -p / b
        gm = -q * q
        hb = 2.0 * p / (b * b)
        hm = 2.0 * q * q * q
        s = tcap[k] - p - q
        # objective plus latency-cap barrier: grad t * (1 + mb/s)
        scale = 1.0 + mb / s
        g[k] += gb * scale
        g[K + k] += gm * scale
        H[k, k] += hb * scale + mb * gb * gb / (s * s)
        H[K + k, K + k] += hm * scale + mb * gm * gm / (s * s)
        cross = mb * gb * gm / (s * s)
        H[k, K + k] += cross
        H[K + k, k] += cross
        if free_b:
            s = b - lo_b[k]
            g[k] -= mb / s
            H[k, k] += mb / (s * s)
        if free_mu:
            s = m - lo_mu[k]
            g[K + k] -= mb / s
            H[K + k, K + k] += mb / (s * s)
    if free_b:
        used = np.zeros(n_groups)
        for k in range(K):
            used[group[k]] += theta[k] * x[k]
        for i in range(K):
            si = budget[group[i]] - used[group[i]]
            g[i] += mb * theta[i] / si
            for j in range(K):
                if group[j] == group[i]:
                    H[i, j] += mb * theta[i] * theta[j] / (si * si)
    if free_mu and has_global:
        tot = 0.0
        for k in range(K):
            tot += x[K + k]
        s = gamma - tot
        for i in range(K):
            g[K + i] += mb / s
            for j in range(K):
                H[K + i, K + j] += mb / (s * s)
    if rho > 0.0:
        for i in range(2 * K):
            g[i] += rho * w[i] * (x[i] - v[i])
            H[i, i] += rho * w[i]
    return g, H


@numba.njit(cache=True, nogil=True)
def _solve(x0, dc, lam, tcap, lo_b, lo_mu, theta, group, budget, n_groups, gamma, has_global,
           free_b, free_mu, rho, w, v, mu0, shrink, kkt_tol, max_newton, ls_alpha, ls_beta):
    K = dc.shape[0]
    n_free = 0
    for i in range(2 * K):
        if (i < K and free_b) or (i >= K and free_mu):
            n_free += 1
    idx = np.empty(n_free, dtype=np.int64)
    j = 0
    for i in range(2 * K):
        if (i < K and free_b) or (i >= K and free_mu):
            idx[j] = i
            j += 1
    m = K
    if free_b:
        m += K + n_groups
    if free_mu:
        m += K
        if has_global:
            m += 1

    x = x0.copy()
    mb = mu0
    steps = 0
    status = OK
    while True:
        converged = False
        for _ in range(max_newton):
            g, H = _grad_hess(x, mb, dc, lam, tcap, lo_b, lo_mu, theta, group, budget, n_groups, gamma,
                              has_global, free_b, free_mu, rho, w, v)
            gf = np.empty(n_free)
            Hf = np.empty((n_free, n_free))
            for a in range(n_free):
                gf[a] = g[idx[a]]
                for c in range(n_free):
                    Hf[a, c] = H[idx[a], idx[c]]
            # Jacobi equilibration: b and mu differ by orders of magnitude.
            dsq = np.sqrt(np.diag(Hf))
            for a in range(n_free):
                for c in range(n_free):
                    Hf[a, c] /= dsq[a] * dsq[c]
            y = np.linalg.solve(Hf, -gf / dsq)
            step = y / dsq
            dec2 = -np.dot(gf, step)
            if dec2 * 0.5 <= kkt_tol:
                converged = True
                break
            f0 = _value(x, mb, dc, lam, tcap, lo_b, lo_mu, theta, group, budget, n_groups, gamma, has_global,
                        free_b, free_mu, rho, w, v)
            t = 1.0
            xn = x.copy()
            while True:
                for a in range(n_free):
                    xn[idx[a]] = x[idx[a]] + t * step[a]
                fn = _value(xn, mb, dc, lam, tcap, lo_b, lo_mu, theta, group, budget, n_groups, gamma,
                            has_global, free_b, free_mu, rho, w, v)
                if fn <= f0 - ls_alpha * t * dec2:
                    break
                t *= ls_beta
                if t < 1e-16:
                    break
            steps += 1
            if t < 1e-16:
                # no representable progress left at this barrier weight
                converged = True
                break
            x[:] = xn
        if not converged:
            status = MAX_ITERS
        if m * mb <= kkt_tol:
            break
        mb *= shrink
    return x, status, steps, mb


@dataclass(frozen=True)
class CellProblem:
    """Arrays describing one barrier problem (see module docstring)."""

    dc: np.ndarray
    lam: np.ndarray
    tcap: np.ndarray
    lo_b: np.ndarray
    lo_mu: np.ndarray
    theta: np.ndarray
    group: np.ndarray
    budget: np.ndarray
    gamma: float = math.inf
    free_b: bool = True
    free_mu: bool = True
    rho: float = 0.0
    w: np.ndarray | None = None
    v: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.dc.shape[0]

    def _args(self):
        K = self.size
        w = np.ones(2 * K) if self.w is None else np.ascontiguousarray(self.w, dtype=float)
        v = np.zeros(2 * K) if self.v is None else np.ascontiguousarray(self.v, dtype=float)
        has_global = math.isfinite(self.gamma)
        return (
            np.ascontiguousarray(self.dc, dtype=float),
            np.ascontiguousarray(self.lam, dtype=float),
            np.ascontiguousarray(self.tcap, dtype=float),
            np.ascontiguousarray(self.lo_b, dtype=float),
            np.ascontiguousarray(self.lo_mu, dtype=float),
            np.ascontiguousarray(self.theta, dtype=float),
            np.ascontiguousarray(self.group, dtype=np.int64),
            np.ascontiguousarray(self.budget, dtype=float),
            int(self.budget.shape[0]),
            float(self.gamma) if has_global else 0.0,
            has_global,
            bool(self.free_b),
            bool(self.free_mu),
            float(self.rho),
            w,
            v,
        )

    def value(self, x, barrier_weight=0.0) -> float:
        """Objective plus ``barrier_weight`` times the log barrier (inf outside)."""
        return float(_value(np.ascontiguousarray(x, dtype=float), float(barrier_weight), *self._args()))

    def grad_hess(self, x, barrier_weight=0.0):
        return _grad_hess(np.ascontiguousarray(x, dtype=float), float(barrier_weight), *self._args())

    def slacks(self, x) -> np.ndarray:
        """All barrier slacks at ``x`` in kernel order (caps, bounds, budgets, global)."""
        K = self.size
        b, mu = x[:K], x[K:]
        out = [self.tcap - self.dc / b - 1.0 / (mu - self.lam)]
        if self.free_b:
            out.append(b - self.lo_b)
            used = np.bincount(self.group, weights=self.theta * b, minlength=self.budget.shape[0])
            out.append(self.budget - used)
        if self.free_mu:
            out.append(mu - self.lo_mu)
            if math.isfinite(self.gamma):
                out.append(np.array([self.gamma - mu.sum()]))
        return np.concatenate(out)


@dataclass(frozen=True)
class BarrierResult:
    x: np.ndarray
    converged: bool
    newton_steps: int
    barrier_weight: float


def barrier_solve(problem: CellProblem, x0, mu0=10.0, shrink=0.2, kkt_tol=1e-8, max_newton=200,
                  ls_alpha=0.25, ls_beta=0.5) -> BarrierResult:
    """Follow the central path from strictly feasible ``x0``."""
    x0 = np.ascontiguousarray(x0, dtype=float)
    if not math.isfinite(problem.value(x0, 1.0)):
        raise ValueError("barrier_solve needs a strictly feasible start")
    x, status, steps, mb = _solve(x0, *problem._args(), float(mu0), float(shrink), float(kkt_tol),
                                  int(max_newton), float(ls_alpha), float(ls_beta))
    return BarrierResult(x=x, converged=status == OK, newton_steps=int(steps), barrier_weight=float(mb))
