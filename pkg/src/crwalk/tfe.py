"""Tilted free energy Lambda_beta(theta).

    Lambda_beta(theta) = lim (1/n) log E_0[exp(beta sum_{i<n} V(X_i) + theta X_n)]

Two independent routes:

* direct: exact forward DP at a finite horizon (``solve_lambda_direct``);
* implicit: the first-passage transform a(x) = E_x[exp(beta sum V - lam tau_{x+1})]
  gives the corrector F(x, 1) = -log a(x) - theta, and Lambda is the unique lam
  at which F(., 1) has spatial mean zero (``solve_lambda_implicit``).  When
  no such lam exists above the floor, Lambda equals the floor (flat region).

The floor is the smallest lam at which the first-passage transform is
finite.  For sampled environments (windows of a law with arbitrarily long
hills at its top value) this is beta * sup V.  A periodic environment has
no long hills, and its floor is computed exactly from the period.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from ._numerics import first_passage_cycle
from .env import Environment
from .walk import hitting_laplace_tau1, path_sum_sequence

PROBE = 1e-8            # lam = floor + PROBE decides whether a root exists
BOUNDARY_BAND = 1e-7    # |mean F| at the probe below this flags a boundary point
ROOT_XTOL = 1e-14


class DivergenceError(ArithmeticError):
    """The first-passage transform is infinite at this lam (lam below the floor)."""


@dataclass
class FreeEnergyResult:
    lam: float
    flat: bool | None
    method: str
    beta: float
    theta: float
    residual: float = 0.0
    dp_sequence: list = field(default_factory=list)
    corrector: np.ndarray | None = None
    boundary: bool = False
    floor: float | None = None
    window: int | None = None
    ergodic_halves: tuple | None = None

    def to_dict(self) -> dict:
        d = {"lambda": self.lam, "flat": self.flat, "method": self.method,
             "residual": self.residual,
             "dp_sequence": [[int(n), float(v)] for n, v in self.dp_sequence],
             "corrector": None if self.corrector is None else [float(v) for v in self.corrector],
             "boundary": self.boundary, "floor": self.floor, "beta": self.beta,
             "theta": self.theta}
        if self.window is not None:
            d["window"] = self.window
            d["ergodic_halves"] = list(self.ergodic_halves) if self.ergodic_halves else None
        return d


# ------------------------------------------------------------ first passage


def first_passage_profile(env: Environment, beta: float, lam: float,
                          direction: int = 1) -> np.ndarray:
    """a(x) = E_x[exp(beta sum_{i<tau} V(X_i) - lam tau)] over one period (or
    the window, closed cyclically), with tau the hitting time of x + direction.

    Solves a(x) = b(x) / (1 - b(x) a(x - direction)), b = exp(beta V - lam) / 2.
    """
    b = 0.5 * np.exp(beta * env.cell() - lam)
    if direction < 0:
        b = b[::-1].copy()
    out = np.empty_like(b)
    status = first_passage_cycle(b, out)
    if status < 0 or not np.all(np.isfinite(out)):
        raise DivergenceError(f"first-passage transform diverges at lambda={lam!r}")
    if status >= 1e-12:
        raise DivergenceError(f"fixed point not reached (last update {status:.3g})")
    return out if direction > 0 else out[::-1].copy()


def corrector_F_lambda(env: Environment, beta: float, theta: float, lam: float) -> np.ndarray:
    """F(x, 1) = -log a(x) - theta on the sites of one period / the window.

    For theta < 0 the corrector is built from the leftward transform,
    F(x, -1) = -log a_left(x) + theta, and returned through the cocycle
    relation F(x, 1) = -F(x + 1, -1).
    """
    if theta >= 0:
        return -np.log(first_passage_profile(env, beta, lam, 1)) - theta
    minus = -np.log(first_passage_profile(env, beta, lam, -1)) + theta
    return -np.roll(minus, -1)


def _mean_F(env, beta, theta, lam):
    return float(corrector_F_lambda(env, beta, abs(theta), lam).mean())


def _valid(env, beta, lam) -> bool:
    try:
        first_passage_profile(env, beta, lam)
        return True
    except DivergenceError:
        return False


def lambda_floor(env: Environment, beta: float) -> float:
    """Smallest lam at which the first-passage transform converges.

    Sampled kinds: beta * sup V of the generating law.  Periodic kinds: found
    by bisection between beta * min V and beta * max V on the existence of the
    attracting fixed point of the one-period map.
    """
    if not env.periodic:
        return beta * env.sup
    lo = beta * float(env.values.min())
    hi = beta * float(env.values.max())
    if _valid(env, beta, lo):
        return lo
    while not _valid(env, beta, hi):      # rounding at a parabolic fixed point
        hi += 1e-13 * max(1.0, abs(hi))
    while hi - lo > 4e-16 * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _valid(env, beta, mid):
            hi = mid
        else:
            lo = mid
    return hi


# ----------------------------------------------------------------- solvers


def solve_lambda_implicit(env: Environment, beta: float, theta: float,
                          xtol: float = ROOT_XTOL, probe: float = PROBE,
                          band: float = BOUNDARY_BAND) -> FreeEnergyResult:
    """Lambda_beta(theta) as the zero of lam -> mean F^lam(., 1).

    The mean is continuous and strictly increasing in lam.  At
    lam = floor + probe it decides flatness; otherwise the root is bracketed
    in (floor + probe, beta * max V + log cosh theta] and found by bisection.
    The solve uses |theta|; the returned corrector is the one for theta.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    th = abs(theta)
    floor = lambda_floor(env, beta)
    low = floor + probe
    m_low = _mean_F(env, beta, th, low)
    boundary = abs(m_low) < band
    window = None if env.periodic else env.values.size
    if m_low >= 0 or th == 0:
        return FreeEnergyResult(floor, True, "implicit", beta, theta, residual=max(m_low, 0.0),
                                boundary=boundary, floor=floor, window=window)
    high = beta * float(env.values.max()) + math.log(math.cosh(th))
    m_high = _mean_F(env, beta, th, high)
    if m_high <= 0:
        if m_high > -1e-12:
            lam = high
        else:
            raise ArithmeticError(f"bracket-failure: mean F = {m_high} at upper end {high}")
    else:
        lam = bisect(lambda l: _mean_F(env, beta, th, l), low, high, xtol=xtol,
                     rtol=4 * np.finfo(float).eps, maxiter=400)
    F = corrector_F_lambda(env, beta, theta, lam)
    res = FreeEnergyResult(lam, False, "implicit", beta, theta, residual=abs(float(F.mean())),
                           corrector=F, boundary=boundary, floor=floor, window=window)
    if window is not None:
        half = F.size // 2
        res.ergodic_halves = (float(F[:half].mean()), float(F[half:].mean()))
    return res


def solve_lambda_direct(env: Environment, beta: float, theta: float, n: int = 10_000,
                        start: int = 0) -> FreeEnergyResult:
    """(1/n) log E_start[...] at horizon n; estimates at n/4, n/2 and n are
    kept in dp_sequence.  No extrapolation is applied."""
    horizons = sorted({max(1, n // 4), max(1, n // 2), n})
    logs = path_sum_sequence(env, beta, theta, horizons, start)
    seq = [(k, (v - theta * start) / k) for k, v in zip(horizons, logs)]
    return FreeEnergyResult(seq[-1][1], None, "direct-dp", beta, theta, dp_sequence=seq)


def solve_lambda(env: Environment, beta: float, theta: float, method: str = "auto",
                 n: int = 10_000, **kw) -> FreeEnergyResult:
    if method in ("implicit", "auto"):
        return solve_lambda_implicit(env, beta, theta, **kw)
    if method == "direct-dp":
        return solve_lambda_direct(env, beta, theta, n)
    raise ValueError(f"unknown method {method!r}")


def free_energy(env: Environment, beta: float):
    """theta -> Lambda_beta(theta) by the implicit route, memoized."""
    cache: dict[float, float] = {}

    def lam(theta: float) -> float:
        key = abs(float(theta))
        if key not in cache:
            cache[key] = solve_lambda_implicit(env, beta, key).lam
        return cache[key]
    return lam


# ----------------------------------------------------------------- checks


def identity_residual(env: Environment, beta: float, theta: float, lam: float,
                      F_plus: np.ndarray) -> float:
    """max over sites of |e^lam - e^{beta V + theta + F(x,1)}/2 - e^{beta V - theta + F(x,-1)}/2|."""
    V = env.cell()
    F_minus = -np.roll(F_plus, 1)
    rhs = 0.5 * np.exp(beta * V + theta + F_plus) + 0.5 * np.exp(beta * V - theta + F_minus)
    return float(np.max(np.abs(math.exp(lam) - rhs)))


def corrector_bounds_margin(env: Environment, beta: float, theta: float, lam: float,
                            F_plus: np.ndarray) -> float:
    """Smallest slack in 0 < lam - beta < |theta| + F(x, sgn theta) <= -log E_0[e^{-lam tau_1}].

    Only meaningful for lam > beta (potentials in [0, 1]); negative means violated.
    """
    F_sgn = F_plus if theta >= 0 else -np.roll(F_plus, 1)
    mid = abs(theta) + F_sgn
    upper = -math.log(hitting_laplace_tau1(lam))
    return float(min(lam - beta, np.min(mid - (lam - beta)), np.min(upper - mid) + 1e-15))


def flat_threshold(env: Environment, beta: float, probe: float = PROBE) -> float:
    """The theta at which the probe's verdict switches from flat to curved:
    mean(-log a) at lam = floor + probe (the mean of F is this minus theta)."""
    floor = lambda_floor(env, beta)
    return float(-np.log(first_passage_profile(env, beta, floor + probe)).mean())


def free_energy_property_suite(env: Environment, beta: float, theta_grid, beta2: float | None = None,
                               tol: float = 1e-8) -> dict:
    """Check the structural properties of theta -> Lambda_beta(theta) on a grid
    symmetric about 0.

    Keys: even, convex, increasing_in_beta, lower_bound, flat, tail_trend,
    one_sided_continuity.  Each maps to {pass, value, applicable}.  The lower
    bound by beta and the flat interval need arbitrarily long hills of the top
    value, so they are reported as not applicable for periodic environments
    whose floor is below beta.
    """
    grid = np.asarray(sorted(theta_grid), dtype=float)
    lam = free_energy(env, beta)
    vals = np.array([lam(t) for t in grid])
    mean_v = env.mean()
    floor = lambda_floor(env, beta)
    long_hills = abs(floor - beta) < 1e-12
    report = {}

    mirrored = np.array([lam(-t) for t in grid])
    report["even"] = _check(np.max(np.abs(vals - mirrored)) < tol, np.max(np.abs(vals - mirrored)))
    if grid.size >= 3:
        d2 = vals[2:] - 2 * vals[1:-1] + vals[:-2]
        report["convex"] = _check(d2.min() >= -tol, d2.min())
    b2 = beta2 or 1.25 * beta
    lam2 = free_energy(env, b2)
    inc = np.array([lam2(t) for t in grid]) - vals
    report["increasing_in_beta"] = _check(inc.min() >= -tol, inc.min())

    lb = np.maximum(beta if long_hills else -np.inf, beta * mean_v + np.log(np.cosh(grid)))
    report["lower_bound"] = _check((vals - lb).min() >= -tol, (vals - lb).min())
    inside = np.abs(grid) <= beta * (1 - mean_v)
    flat_err = float(np.max(np.abs(vals[inside] - beta))) if inside.any() else 0.0
    report["flat"] = _check(flat_err < tol, flat_err, applicable=long_hills)

    tail = vals - np.log(np.cosh(grid)) - beta * mean_v
    far, mid = np.argmax(np.abs(grid)), np.argmin(np.abs(np.abs(grid) - 0.5 * np.abs(grid).max()))
    report["tail_trend"] = _check(tail[far] <= tail[mid] + tol and tail[far] >= -tol,
                                  float(tail[far]))

    # one-sided difference quotients: their gap should shrink with the step
    theta_b = flat_threshold(env, beta) if long_hills else 0.0
    cands = [t for t in grid if t > theta_b + 0.2 and t < grid.max()]
    h = 0.02
    worst = 0.0
    ok = True
    for t in cands[:: max(1, len(cands) // 3)][:3]:
        gaps = []
        for step in (h, h / 2):
            right = (lam(t + step) - lam(t)) / step
            left = (lam(t) - lam(t - step)) / step
            gaps.append(abs(right - left))
        ok &= gaps[1] <= 0.75 * gaps[0] + 1e-9
        worst = max(worst, gaps[1])
    report["one_sided_continuity"] = _check(ok, worst, applicable=bool(cands))
    return report


def _check(ok, value, applicable=True):
    return {"pass": bool(ok) if applicable else True, "value": float(value),
            "applicable": bool(applicable)}
