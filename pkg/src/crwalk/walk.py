"""Simple symmetric random walk primitives.

Exact lattice DPs for path-sum expectations, Laplace transforms of hitting
times, the confinement exponent of a finite interval, and the excursion
counting toolkit (rate function, tilted reflected chain).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._numerics import LOG2, logaddexp_pairs, power_iteration
from .env import CoverageError, Environment


@dataclass
class LatticeDP:
    """Log-domain masses of the walk after `time` steps.

    Only sites of the parity of start + time can carry mass, so the array
    holds the sites lo, lo + 2, ..., hi.
    """
    log_weights: np.ndarray
    time: int
    lo: int

    @property
    def hi(self) -> int:
        return self.lo + 2 * (self.log_weights.size - 1)

    @property
    def sites(self) -> np.ndarray:
        return self.lo + 2 * np.arange(self.log_weights.size)

    @property
    def support(self) -> tuple[int, int]:
        return self.lo, self.hi

    @classmethod
    def start(cls, site: int) -> "LatticeDP":
        return cls(np.zeros(1), 0, site)

    def step(self, site_log_factor: np.ndarray | None = None) -> "LatticeDP":
        """One step of the kernel 1/2 to each neighbour, after multiplying the
        current masses by exp(site_log_factor)."""
        g = self.log_weights if site_log_factor is None else self.log_weights + site_log_factor
        new = np.empty(g.size + 1)
        new[0] = g[0]
        new[-1] = g[-1]
        if g.size > 1:
            new[1:-1] = logaddexp_pairs(g[:-1], g[1:])
        new -= LOG2
        return LatticeDP(new, self.time + 1, self.lo - 1)

    def log_total(self, theta: float = 0.0) -> float:
        """log of sum over sites of mass * e^{theta x}."""
        return float(_logsumexp(self.log_weights + theta * self.sites))


def _logsumexp(a: np.ndarray) -> float:
    m = np.max(a)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(a - m))))


def _check_cone(env: Environment, start: int, n: int):
    if not env.covers(start - n, start + n):
        raise CoverageError(f"window-too-small: environment does not cover "
                            f"[{start - n}, {start + n}]")


def path_sum_sequence(env: Environment, beta: float, theta: float, horizons, start: int = 0):
    """log E_start[exp(beta sum_{i<k} V(X_i) + theta X_k)] for each k in
    `horizons`, from a single forward pass."""
    horizons = sorted(set(int(k) for k in horizons))
    if not horizons or horizons[0] < 0:
        raise ValueError("horizons must be nonnegative")
    n = horizons[-1]
    _check_cone(env, start, n)
    pot = beta * env.segment(start - n, start + n)    # pot[x - (start - n)]
    dp = LatticeDP.start(start)
    out = {}
    for k in range(n + 1):
        if k in horizons:
            out[k] = dp.log_total(theta)
        if k == n:
            break
        idx = dp.sites - (start - n)
        dp = dp.step(pot[idx])
    return [out[k] for k in horizons]


def path_sum_log_expectation(env: Environment, beta: float, theta: float, n: int,
                             start: int = 0) -> float:
    """log E_start[exp(beta sum_{i<n} V(X_i) + theta X_n)] by exact DP."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return path_sum_sequence(env, beta, theta, [n], start)[0]


def path_sum_bruteforce(env: Environment, beta: float, theta: float, n: int,
                        start: int = 0) -> float:
    """Same quantity by enumerating all 2^n paths (oracle for small n)."""
    steps = ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1) * 2 - 1
    pos = start + np.concatenate([np.zeros((steps.shape[0], 1), dtype=int),
                                  np.cumsum(steps, axis=1)], axis=1)
    expo = beta * env(pos[:, :n]).sum(axis=1) + theta * pos[:, n]
    return _logsumexp(expo) - n * LOG2


# ---------------------------------------------------------------- hitting times


def hitting_laplace_tau1(lam: float) -> float:
    """E_0[exp(-lam tau_1)] = e^lam - sqrt(e^{2 lam} - 1)."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    # 1 / (e^lam + sqrt(e^{2lam} - 1)) avoids the cancellation
    return 1.0 / (math.exp(lam) + math.sqrt(math.expm1(2 * lam)))


def hitting_laplace_excursion(lam: float) -> float:
    """E_0[exp(-lam tau_{-1,0})] where tau_{-1,0} is the first step from -1 to 0."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    s = math.sqrt(-math.expm1(-2 * lam))
    return (1.0 - s) / (1.0 + s)


def _series_horizon(rate: float, tail: float = 1e-12) -> int:
    # sum_{k > N} e^{-rate k} <= e^{-rate N} / (1 - e^{-rate})
    if rate <= 0:
        raise ValueError("truncated series needs a strictly positive decay rate")
    return int(math.ceil((math.log(1.0 / tail) - math.log(-math.expm1(-rate))) / rate)) + 1


def first_passage_series(lam: float, env: Environment | None = None, beta: float = 0.0,
                         start: int = 0, horizon: int | None = None) -> float:
    """E_start[exp(beta sum_{i<tau} V(X_i) - lam tau)], tau = first visit to
    start + 1, summed by a killed forward DP up to `horizon` steps.

    The neglected tail is at most sum_{k>N} e^{(beta - lam) k}; by default N
    is chosen to make it below 1e-12.
    """
    N = horizon or _series_horizon(lam - beta)
    lo = start - N
    sites = np.arange(lo, start + 1)
    pot = beta * env(sites) if env is not None else np.zeros(sites.size)
    w = np.zeros(sites.size)          # linear masses, walk killed at start + 1
    w[start - lo] = 1.0
    total = 0.0
    scale = 0.0                       # log of the factored-out normalization
    for k in range(1, N + 1):
        g = w * np.exp(pot - lam)
        total += 0.5 * g[-1] * math.exp(scale)
        new = np.zeros_like(g)
        new[:-1] += 0.5 * g[1:]
        new[1:] += 0.5 * g[:-1]
        m = new.max()
        if m == 0.0:
            break
        scale += math.log(m)
        w = new / m
    return total


def excursion_laplace_series(lam: float, horizon: int | None = None) -> float:
    """E_0[exp(-lam tau_{-1,0})] by a forward DP killed at the first -1 -> 0 step."""
    N = horizon or _series_horizon(lam)
    lo = -N - 1
    w = np.zeros(2 * N + 3)
    w[-lo] = 1.0
    total, scale = 0.0, 0.0
    i_m1, i_0 = -1 - lo, -lo
    for k in range(1, N + 1):
        g = w * math.exp(-lam)
        total += 0.5 * g[i_m1] * math.exp(scale)
        new = np.zeros_like(g)
        new[:-1] += 0.5 * g[1:]
        new[1:] += 0.5 * g[:-1]
        new[i_0] -= 0.5 * g[i_m1]     # that mass completed the excursion
        m = new.max()
        scale += math.log(m)
        w = new / m
    return total


# ------------------------------------------------------------------ confinement


def confinement_exponent(ell: int) -> float:
    """log cos(pi / (2 ell + 1)): growth rate of the probability of staying in
    an interval of 2 ell sites."""
    if ell < 1:
        raise ValueError("ell must be at least 1")
    return math.log(math.cos(math.pi / (2 * ell + 1)))


def _half_adjacency(v: np.ndarray) -> np.ndarray:
    w = np.zeros_like(v)
    w[:-1] += 0.5 * v[1:]
    w[1:] += 0.5 * v[:-1]
    return w


def confinement_spectral(ell: int, tol: float = 1e-13) -> float:
    """log of the top eigenvalue of the 1/2-adjacency operator on 2 ell sites
    with absorbing boundary, by power iteration.

    The path graph is bipartite, so the iteration runs on (A + I) to keep a
    strict spectral gap in modulus.
    """
    lam, _ = power_iteration(_half_adjacency, 2 * ell, tol=tol, shift=1.0)
    return math.log(lam)


def confinement_survival(ell: int, n: int) -> float:
    """(1/n) log P_0(X_i in [-ell, ell - 1] for all i <= n)."""
    v = np.zeros(2 * ell)
    v[ell] = 1.0
    log_mass = 0.0
    for _ in range(n):
        v = _half_adjacency(v)
        s = v.sum()
        log_mass += math.log(s)
        v /= s
    return log_mass / n


# ------------------------------------------------------------------- excursions


def excursion_rate(xi: float) -> float:
    """Rate function of the excursion count per step; +inf outside [0, 1/2]."""
    if xi < 0 or xi > 0.5:
        return math.inf

    def xlogx(t):
        return 0.0 if t == 0 else t * math.log(t)
    return 0.5 * xlogx(1 - 2 * xi) + 0.5 * xlogx(1 + 2 * xi)


def excursion_J(c: float) -> float:
    return math.log(math.cosh(c))


def reflected_transfer_matrix(c: float, ell: int) -> np.ndarray:
    """Tilted transfer matrix of the reflected walk on [-ell, ell - 1].

    Rows and columns are ordered by site; interior sites move to each
    neighbour with probability 1/2, the end sites hold with probability 1/2.
    The transition -1 -> 0 carries the extra weight e^{2c}.
    """
    if ell < 1:
        raise ValueError("ell must be at least 1")
    m = 2 * ell
    K = np.zeros((m, m))
    for i in range(m):
        K[i, max(i - 1, 0)] += 0.5
        K[i, min(i + 1, m - 1)] += 0.5
    K[ell - 1, ell] *= math.exp(2 * c)     # site -1 has index ell - 1
    return K


def excursion_J_ell(c: float, ell: int, tol: float = 1e-13, max_iter: int = 100_000) -> float:
    """Growth rate of E_0[e^{2c L}] for the reflected walk on [-ell, ell - 1],
    where L counts the steps from -1 to 0.

    The top eigenvector concentrates around the tilted edge, away from the
    holding sites, so -rho is an eigenvalue up to a tiny boundary correction.
    Iterating K + I separates the two.
    """
    K = reflected_transfer_matrix(c, ell)
    lam, _ = power_iteration(lambda v: K @ v, K.shape[0], tol=tol, max_iter=max_iter,
                             shift=1.0)
    return math.log(lam)


def excursion_count_mgf(n: int, c: float, ell: int | None = None) -> float:
    """(1/n) log E_0[exp(2c L_n)], L_n = number of steps -1 -> 0 up to time n.

    With `ell`, the walk is the reflected chain on [-ell, ell - 1].  The
    count only changes across the edge (-1, 0), so the DP carries that factor
    on the transition rather than on a site.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if ell is not None:
        K = reflected_transfer_matrix(c, ell)
        v = np.zeros(2 * ell)
        v[ell] = 1.0
        log_mass = 0.0
        for _ in range(n):
            v = v @ K
            s = v.sum()
            log_mass += math.log(s)
            v /= s
        return log_mass / n
    lo = -n
    u = np.full(2 * n + 1, -np.inf)     # log masses on [-n, n]
    u[-lo] = 0.0
    i_m1 = -1 - lo
    for _ in range(n):
        right = u.copy()                 # mass leaving x to the right
        right[i_m1] += 2 * c
        new = np.full_like(u, -np.inf)
        new[1:] = right[:-1]
        new[:-1] = logaddexp_pairs(new[:-1], u[1:])
        u = new - LOG2
    return _logsumexp(u) / n


def excursion_count_bruteforce(n: int, c: float) -> float:
    """Same as excursion_count_mgf without confinement, by path enumeration."""
    steps = ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1) * 2 - 1
    pos = np.concatenate([np.zeros((steps.shape[0], 1), dtype=int),
                          np.cumsum(steps, axis=1)], axis=1)
    count = ((pos[:, :-1] == -1) & (pos[:, 1:] == 0)).sum(axis=1)
    return (_logsumexp(2 * c * count) - n * LOG2) / n
