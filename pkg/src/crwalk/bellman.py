"""Finite-horizon control of a walk with drift bounded by delta.

The controller picks at each (time, site) the probability q of a right step
in [(1 - delta)/2, (1 + delta)/2] and wants to minimize

    u(n, x) = min_pi log E_x^pi[exp(beta sum_{i<n} V(X_i) + theta X_n)].

The Bellman recursion runs over the remaining horizon k = 0..n:

    u(0, x) = theta x
    u(k, x) = beta V(x) + min_q log(q e^{u(k-1, x+1)} + (1 - q) e^{u(k-1, x-1)})

and the minimum sits at an endpoint of the q-interval.  The step decided at
remaining horizon k is the one taken at time n - k.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .effham import c_of_delta
from .env import CoverageError, Environment, nearest_feature


@dataclass
class ControlProblem:
    env: Environment
    delta: float
    beta: float
    theta: float
    n: int
    start: int = 0

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if self.n < 1:
            raise ValueError("horizon must be at least 1")

    @property
    def q_low(self) -> float:
        return 0.5 * (1.0 - self.delta)

    @property
    def q_high(self) -> float:
        return 0.5 * (1.0 + self.delta)

    @property
    def c(self) -> float:
        return c_of_delta(self.delta)


@dataclass
class ValueTable:
    """Slices u(k, .) of the value, keyed by remaining horizon k.

    slices[k] = (lo, values): values[i] is u(k, lo + i).  `right[k]` marks the
    sites where the optimal step at remaining horizon k drifts right
    (q = (1 + delta)/2) and `tie[k]` where both endpoints give the same value.
    """
    problem: ControlProblem
    slices: dict = field(default_factory=dict)
    right: dict = field(default_factory=dict)
    tie: dict = field(default_factory=dict)

    def u(self, k: int, x: int) -> float:
        lo, vals = self.slices[k]
        return float(vals[x - lo])

    @property
    def value(self) -> float:
        p = self.problem
        return self.u(p.n, p.start)

    def dump(self, path, k: int | None = None):
        """Write slice k as little-endian: int64 header (n, lo, hi), then doubles."""
        k = self.problem.n if k is None else k
        lo, vals = self.slices[k]
        with open(path, "wb") as fh:
            fh.write(struct.pack("<qqq", k, lo, lo + vals.size - 1))
            fh.write(np.asarray(vals, dtype="<f8").tobytes())

    @staticmethod
    def load_slice(path):
        with open(path, "rb") as fh:
            k, lo, hi = struct.unpack("<qqq", fh.read(24))
            vals = np.frombuffer(fh.read(), dtype="<f8")
        return k, lo, hi, vals


def _keep_set(keep, n):
    if keep == "all":
        return set(range(n + 1))
    if keep in (None, "final"):
        return {n}
    return set(int(k) for k in keep) | {n}


def _region(problem, x_range):
    a, b = (problem.start, problem.start) if x_range is None else (int(x_range[0]), int(x_range[1]))
    n = problem.n
    if not problem.env.covers(a - n, b + n):
        raise CoverageError(f"window-too-small: environment does not cover [{a - n}, {b + n}]")
    return a, b


def solve(problem: ControlProblem, keep="final", x_range=None) -> ValueTable:
    """Optimal values by the Bellman recursion on the trapezoid of sites
    [a - (n - k), b + (n - k)] at remaining horizon k (a = b = start by default).

    `keep` is "final", "all" or an iterable of horizons to retain.
    """
    p = problem
    n = p.n
    a, b = _region(p, x_range)
    base = a - n
    pot = p.beta * p.env.segment(base, b + n)
    keep = _keep_set(keep, n)
    table = ValueTable(p)
    u = p.theta * np.arange(base, b + n + 1, dtype=float)
    if 0 in keep:
        table.slices[0] = (base, u.copy())
    ql = p.q_low
    for k in range(1, n + 1):
        up, down = u[2:], u[:-2]
        lo = base + k
        big = np.maximum(up, down)
        if ql > 0:
            # the small weight goes on the larger neighbour
            d = np.abs(up - down)
            val = big + np.log(ql + (1 - ql) * np.exp(-d))
        else:
            val = np.minimum(up, down)
        u = pot[k:pot.size - k] + val
        if k in keep:
            table.slices[k] = (lo, u)
            table.right[k] = up < down
            table.tie[k] = (up == down) | (p.delta == 0)
    return table


# -------------------------------------------------------------------- policies


@dataclass
class PolicySpec:
    """kind: march-left | march-right | valley | const | table | optimal.

    valley takes center (x_*), or h and ell to locate the nearest valley to
    the start; const takes q; table takes q as an array indexed
    [time, site - (start - n)]; optimal takes a full ValueTable.
    """
    kind: str
    params: dict = field(default_factory=dict)


def parse_policy(text: str) -> PolicySpec:
    kind, _, rest = text.strip().partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        params[key.strip()] = float(val) if key.strip() in ("h", "q") else int(val)
    if kind not in ("march-left", "march-right", "valley", "const"):
        raise ValueError(f"unknown policy {text!r}")
    return PolicySpec(kind, params)


def _policy_q(problem: ControlProblem, policy: PolicySpec):
    """Return q(time, sites) for the policy."""
    p = problem
    kind = policy.kind
    if kind == "march-left":
        return lambda j, y: np.full(y.size, p.q_low)
    if kind == "march-right":
        return lambda j, y: np.full(y.size, p.q_high)
    if kind == "const":
        q = float(policy.params["q"])
        return lambda j, y: np.full(y.size, q)
    if kind == "valley":
        xs = policy.params.get("center")
        if xs is None:
            feat = nearest_feature(p.env, float(policy.params["h"]), int(policy.params["ell"]),
                                   p.start, "valley")
            xs = feat.center
        xs = int(xs)
        return lambda j, y: np.where(y < xs, p.q_high, p.q_low)
    if kind == "table":
        tab = np.asarray(policy.params["q"], dtype=float)
        base = p.start - p.n
        return lambda j, y: tab[j, y - base]
    if kind == "optimal":
        vt: ValueTable = policy.params["table"]

        def q_opt(j, y):
            k = p.n - j
            lo, vals = vt.slices[k]
            return np.where(vt.right[k][y - lo], p.q_high, p.q_low)
        return q_opt
    raise ValueError(f"unknown policy kind {kind!r}")


def evaluate_policy(problem: ControlProblem, policy: PolicySpec, keep="final") -> ValueTable:
    """Exact log-cost of a fixed Markov policy, same recursion without the min."""
    p = problem
    n = p.n
    qfun = _policy_q(p, policy)
    a, b = _region(p, None)
    base = a - n
    pot = p.beta * p.env.segment(base, b + n)
    keep = _keep_set(keep, n)
    table = ValueTable(p)
    u = p.theta * np.arange(base, b + n + 1, dtype=float)
    if 0 in keep:
        table.slices[0] = (base, u.copy())
    eps = 1e-15
    for k in range(1, n + 1):
        lo = base + k
        sites = np.arange(lo, lo + u.size - 2)
        q = np.asarray(qfun(n - k, sites), dtype=float)
        if np.any(q < p.q_low - eps) or np.any(q > p.q_high + eps):
            raise ValueError("inadmissible-policy: q outside [(1-delta)/2, (1+delta)/2]")
        up, down = u[2:], u[:-2]
        m = np.maximum(up, down)
        with np.errstate(divide="ignore"):
            val = m + np.log(q * np.exp(up - m) + (1 - q) * np.exp(down - m))
        val = np.where(q == 0.0, down, np.where(q == 1.0, up, val))
        u = pot[k:pot.size - k] + val
        if k in keep:
            table.slices[k] = (lo, u)
    return table


def tilt_formulation_value(problem: ControlProblem, alpha) -> float:
    """log E_x[exp sum_i (beta V(X_i) + (theta + alpha_i) Z_{i+1})] + theta x - n log cosh c
    under the symmetric walk, for alpha(time, site) in {-c, +c}.

    `alpha` is a callable (time, sites) -> array, or an array indexed
    [time, site - (start - n)].
    """
    p = problem
    if not 0 < p.delta < 1:
        raise ValueError("tilt formulation needs 0 < delta < 1")
    n = p.n
    c = p.c
    if not callable(alpha):
        tab = np.asarray(alpha, dtype=float)
        alpha = (lambda t: (lambda j, y: t[j, y - (p.start - n)]))(tab)
    base = p.start - n
    pot = p.beta * p.env.segment(base, p.start + n)
    w = np.zeros(2 * n + 1)
    for k in range(1, n + 1):
        lo = base + k
        sites = np.arange(lo, lo + w.size - 2)
        a = np.asarray(alpha(n - k, sites), dtype=float)
        if np.any(np.abs(np.abs(a) - c) > 1e-12):
            raise ValueError("alpha values must be -c or +c")
        s = p.theta + a
        w = pot[k:pot.size - k] + np.logaddexp(s + w[2:], -s + w[:-2]) - math.log(2)
    return float(w[0]) + p.theta * p.start - n * math.log(math.cosh(c))


def alpha_to_policy(problem: ControlProblem, alpha_table) -> PolicySpec:
    """The bang-bang policy with q = e^alpha / (e^c + e^-c)."""
    c = problem.c
    q = np.exp(np.asarray(alpha_table, dtype=float)) / (math.exp(c) + math.exp(-c))
    return PolicySpec("table", {"q": q})


# ---------------------------------------------------------------- brute force


def _step_matrix(n):
    return ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1) * 2 - 1


def exhaustive_markov_min(problem: ControlProblem) -> float:
    """min over every bang-bang table q(time, site) on the reachable cells, by
    literal enumeration.  Feasible for n <= 5 (2^15 tables)."""
    p = problem
    n = p.n
    if n > 5:
        raise ValueError("literal table enumeration limited to n <= 5")
    steps = _step_matrix(n)                                  # paths x n
    pos = p.start + np.concatenate([np.zeros((steps.shape[0], 1), dtype=int),
                                    np.cumsum(steps, axis=1)], axis=1)
    cost = p.beta * p.env(pos[:, :n]).sum(axis=1) + p.theta * pos[:, n]
    cells = {}
    for j in range(n):
        for y in range(-j, j + 1, 2):
            cells[(j, p.start + y)] = len(cells)
    ncell = len(cells)
    # mismatch count m(T, path) = sum_j [bit(T, cell_j) != right_j]
    A = np.zeros((ncell, steps.shape[0]))
    const = np.zeros(steps.shape[0])
    for j in range(n):
        idx = np.array([cells[(j, int(x))] for x in pos[:, j]])
        dirs = (steps[:, j] > 0).astype(float)
        np.add.at(A, (idx, np.arange(steps.shape[0])), 1 - 2 * dirs)
        const += dirs
    bits = ((np.arange(2 ** ncell)[:, None] >> np.arange(ncell)) & 1).astype(float)
    mism = bits @ A + const[None, :]
    qh, ql = p.q_high, p.q_low
    log_ql = math.log(ql) if ql > 0 else -np.inf
    with np.errstate(invalid="ignore"):
        logp = (n - mism) * math.log(qh) + np.where(mism > 0, mism * log_ql, 0.0)
    expo = logp + cost[None, :]
    mx = expo.max(axis=1, keepdims=True)
    vals = mx[:, 0] + np.log(np.exp(expo - mx).sum(axis=1))
    return float(vals.min())


def exhaustive_history_min(problem: ControlProblem) -> float:
    """min over policies that may depend on the whole past, by backward
    induction on the tree of all 2^n histories (no merging of lattice states)."""
    p = problem
    n = p.n
    steps = _step_matrix(n)
    # order histories so that leaves 2i, 2i+1 share the prefix i (last step -1, +1)
    steps = steps[:, ::-1]
    pos = p.start + np.concatenate([np.zeros((steps.shape[0], 1), dtype=int),
                                    np.cumsum(steps, axis=1)], axis=1)
    vals = p.theta * pos[:, n].astype(float)
    with np.errstate(divide="ignore"):
        lq = [math.log(p.q_low) if p.q_low > 0 else -math.inf, math.log(p.q_high)]
    for j in range(n - 1, -1, -1):
        left, right = vals[0::2], vals[1::2]
        here = pos[0::2, j][: left.size]
        opt_low = np.logaddexp(lq[0] + right, lq[1] + left)
        opt_high = np.logaddexp(lq[1] + right, lq[0] + left)
        vals = p.beta * p.env(here) + np.minimum(opt_low, opt_high)
        pos = pos[0::2]
    return float(vals[0])


# ------------------------------------------------------------------ diagnostics


def lipschitz_check(table: ValueTable) -> dict:
    """Largest one-step differences of the stored table against the constants
    beta + |theta| (time) and beta + |theta| - log((1 - delta)/2) (space)."""
    p = table.problem
    lt = p.beta + abs(p.theta)
    lx = lt - math.log(p.q_low) if p.q_low > 0 else math.inf
    dx, dt = 0.0, 0.0
    ks = sorted(table.slices)
    for k in ks:
        lo, vals = table.slices[k]
        if vals.size > 1:
            dx = max(dx, float(np.max(np.abs(np.diff(vals)))))
        if k - 1 in table.slices:
            lo0, v0 = table.slices[k - 1]
            dt = max(dt, float(np.max(np.abs(vals - v0[lo - lo0: lo - lo0 + vals.size]))))
    return {"space": dx, "time": dt, "space_bound": lx, "time_bound": lt,
            "pass": dx <= lx + 1e-9 and dt <= lt + 1e-9}


def homogenization_diagnostics(env: Environment, delta: float, beta: float, theta: float,
                               eps_list, hbar: float, t_grid=(0.25, 0.5, 0.75, 1.0),
                               x_grid=(-0.5, -0.25, 0.0, 0.25, 0.5)) -> dict:
    """sup over the (t, x) grid of |eps u([t/eps], [x/eps]) - (t hbar + theta x)|
    for each eps, plus the discrete Lipschitz check on each table."""
    errors, lips = [], []
    for eps in eps_list:
        N = int(math.floor(max(t_grid) / eps))
        xs = [int(math.floor(x / eps)) for x in x_grid]
        ks = sorted({int(math.floor(t / eps)) for t in t_grid})
        keep = set(ks) | {k - 1 for k in ks if k > 0}
        prob = ControlProblem(env, delta, beta, theta, N, 0)
        tab = solve(prob, keep=keep, x_range=(min(xs), max(xs)))
        # the slice at remaining horizon k is the value of a k-step problem
        err = 0.0
        for t in t_grid:
            k = int(math.floor(t / eps))
            for x, xi in zip(x_grid, xs):
                ue = eps * tab.u(k, xi)
                err = max(err, abs(ue - (t * hbar + theta * x)))
        errors.append(err)
        lips.append(lipschitz_check(tab) if delta < 1 else None)
    decreasing = all(b <= 1.1 * a + 1e-12 for a, b in zip(errors, errors[1:]))
    return {"eps": list(eps_list), "sup_error": errors, "decreasing": decreasing,
            "lipschitz": lips}


def optimal_policy_structure(table: ValueTable, valley: tuple[int, int] | None = None,
                             reach: int | None = None) -> dict:
    """Summaries of the argmin field of a fully stored table.

    left_fraction: share of non-tied cells choosing q = (1 - delta)/2;
    tie_fraction: share of tied cells; with valley = (lo, hi), toward_fraction
    is the share of non-tied cells outside [lo, hi], and within `reach` of it,
    drifting toward it.
    """
    n_cells = ties = left = toward = outside = 0
    for k in sorted(table.right):
        lo, vals = table.slices[k]
        r, t = table.right[k], table.tie[k]
        inner = slice(1, r.size - 1) if r.size > 2 else slice(0, r.size)
        r, t = r[inner], t[inner]
        sites = lo + np.arange(vals.size)[inner]
        n_cells += r.size
        ties += int(t.sum())
        left += int((~r & ~t).sum())
        if valley is not None:
            lv, hv = valley
            mask = ~t & ((sites < lv) | (sites > hv))
            if reach is not None:
                mask &= (sites >= lv - reach) & (sites <= hv + reach)
            outside += int(mask.sum())
            toward += int((mask & (((sites < lv) & r) | ((sites > hv) & ~r))).sum())
    nt = max(n_cells - ties, 1)
    out = {"cells": n_cells, "tie_fraction": ties / max(n_cells, 1), "left_fraction": left / nt}
    if valley is not None:
        out["toward_fraction"] = toward / max(outside, 1)
    return out
