"""Cocycles built from correctors, and the checks that rest on them.

A cocycle on the lattice is stored through its value on right steps,
plus[x] = F(x, +1); the left steps follow from F(x, -1) = -F(x - 1, +1), so
path sums telescope: sum_i F(x_i, x_{i+1} - x_i) = f(x_n) - f(x_0) with f the
prefix sum of plus.

Also here: the random walk in random environment (RWRE) induced by the
optimal corrector (jump probabilities q, ratios r, the series S, the
invariant density phi and the velocity), the two variational identities for
Lambda, the g-inequalities behind the control lower bounds, and the
nondifferentiability of Lambda at the edge of its flat interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from ._numerics import affine_cycle_backward
from .env import CoverageError, Environment
from .tfe import (FreeEnergyResult, flat_threshold, free_energy, lambda_floor,
                  solve_lambda_implicit)


@dataclass
class Cocycle:
    """plus[i] is F(site, +1) at site = lo + i, repeated with period plus.size.

    Cocycles built on a sampled window carry `window`; reading outside it is
    an error rather than a silent periodic extension.
    """
    plus: np.ndarray
    lo: int = 0
    window: tuple[int, int] | None = None

    def minus(self) -> np.ndarray:
        return -np.roll(self.plus, 1)

    def mean(self) -> float:
        return float(self.plus.mean())

    def centered(self, tol: float = 1e-8) -> bool:
        return abs(self.mean()) < tol

    def plus_at(self, sites) -> np.ndarray:
        sites = np.asarray(sites)
        if self.window is not None and sites.size and (
                sites.min() < self.window[0] or sites.max() > self.window[1]):
            raise CoverageError("window-too-small: cocycle not defined on requested sites")
        return self.plus[np.mod(sites - self.lo, self.plus.size)]

    def prefix(self, lo: int, hi: int) -> np.ndarray:
        """f(y) for y = lo..hi, normalized by f(0) = 0 (0 must lie in [lo, hi])."""
        steps = self.plus_at(np.arange(lo, hi))           # F(y, +1) for y in [lo, hi)
        f = np.concatenate([[0.0], np.cumsum(steps)])
        return f - f[-lo]

    def path_sum(self, x0: int, steps) -> float:
        steps = np.asarray(steps)
        pos = x0 + np.concatenate([[0], np.cumsum(steps)[:-1]])
        right = steps > 0
        vals = np.where(right, self.plus_at(pos), -self.plus_at(pos - 1))
        return float(vals.sum())


def cocycle_from_result(env: Environment, res: FreeEnergyResult) -> Cocycle:
    if res.corrector is None:
        raise ValueError("flat-region input: corrector undefined where Lambda equals its floor")
    return Cocycle(np.asarray(res.corrector), env.lo, None if env.periodic else (env.lo, env.hi))


def full_control_cocycle(env: Environment, beta: float) -> Cocycle:
    """G(x, -1) = -beta V(x) + beta E[V], i.e. G(x, +1) = beta V(x + 1) - beta E[V]."""
    V = env.cell()
    return Cocycle(beta * (np.roll(V, -1) - V.mean()), env.lo,
                   None if env.periodic else (env.lo, env.hi))


def sublinearity_profile(cocycle: Cocycle, ns, B: float = 1.0, tol: float = 1e-8):
    """max over x0 = [n x], |x| <= B, and nearest-neighbour paths of length n
    of |path sum| / n, for each n in `ns`.

    Path sums telescope, so this is the max of |f(y) - f(x0)| over endpoints y
    reachable from x0 in n steps (|y - x0| <= n, same parity as x0 + n).
    """
    if not cocycle.centered(tol):
        raise ValueError(f"not-centered: cocycle mean {cocycle.mean():.3g}")
    scalar = np.isscalar(ns)
    out = []
    for n in np.atleast_1d(ns):
        n = int(n)
        R = int(math.floor(n * B))
        M = R + n
        f = cocycle.prefix(-M, M)                    # f[y + M]
        best = 0.0
        for par in (0, 1):
            g = f[par::2]                            # sites -M + par + 2k
            hi_max = maximum_filter1d(g, n + 1, mode="nearest")
            lo_min = minimum_filter1d(g, n + 1, mode="nearest")
            shift = (n + 1) // 2
            x0 = np.arange(-R, R + 1)
            x0 = x0[np.mod(x0 - n + M - par, 2) == 0]   # endpoints x0 - n lie in this class
            j = (x0 - n + M - par) // 2                  # class index of x0 - n
            top = hi_max[j + shift]
            bot = lo_min[j + shift]
            fx = f[x0 + M]
            best = max(best, float(np.max(np.maximum(top - fx, fx - bot))))
        out.append(best / n)
    return out[0] if scalar else out


# ---------------------------------------------------------------- inequalities


def _report(check, instance, residuals, margins, ok, **extra):
    d = {"check": check, "instance": instance, "residuals": residuals,
         "margins": margins, "pass": bool(ok)}
    d.update(extra)
    return d


def g_inequality_check(env: Environment, beta: float, theta: float, variant: str = "full",
                       c: float | None = None, p_grid=None, tol: float = 1e-10) -> dict:
    """Pointwise inequalities used for the control lower bounds.

    full:    g(x, p) = p e^{beta V + theta + G(x,1)} + (1-p) e^{beta V - theta + G(x,-1)}
             >= g(x, 0) = e^{beta E[V] - theta}, for theta >= beta E[V].
    partial: g(x, xi) = e^{beta V + xi + F(x,1)}/2 + e^{beta V - xi + F(x,-1)}/2 with F the
             corrector at tilt theta - c; g(x, theta - c) = e^{Lambda(theta - c)} and
             g(x, theta + c) >= g(x, theta - c) iff theta + F(x,1) >= -theta + F(x,-1).
    """
    V = env.cell()
    inst = {"beta": beta, "theta": theta, "variant": variant, "c": c, "env": env.kind}
    if variant == "full":
        mean_v = V.mean()
        if theta < beta * mean_v:
            raise ValueError(f"precondition-violation: theta={theta} < beta*E[V]={beta * mean_v}")
        G = full_control_cocycle(env, beta)
        Gp, Gm = G.plus, G.minus()
        p = np.linspace(0, 1, 21) if p_grid is None else np.asarray(p_grid)
        g = (p[:, None] * np.exp(beta * V + theta + Gp)
             + (1 - p[:, None]) * np.exp(beta * V - theta + Gm))
        base = math.exp(beta * mean_v - theta)
        margins = g - base
        res0 = float(np.max(np.abs(g[np.argmin(p)] - base))) if p.min() == 0 else 0.0
        ok = margins.min() >= -tol
        return _report("g_inequality_full", inst, {"p0_equality": res0},
                       {"min": float(margins.min())}, ok)

    if variant != "partial" or c is None or c <= 0:
        raise ValueError("partial variant needs c > 0")
    res = solve_lambda_implicit(env, beta, theta - c)
    lam = res.lam
    failed = []
    if not lam > beta:
        failed.append("Lambda(theta - c) > beta")
    if not (theta > c or (0 < theta < c and beta < lam <= math.log(math.cosh(c)))):
        failed.append("theta > c, or 0 < theta < c with beta < Lambda(theta - c) <= log cosh c")
    if failed:
        raise ValueError("precondition-violation: " + "; ".join(failed))
    cocycle = cocycle_from_result(env, res)
    Fp, Fm = cocycle.plus, cocycle.minus()

    def g(xi):
        return 0.5 * np.exp(beta * V + xi + Fp) + 0.5 * np.exp(beta * V - xi + Fm)
    eq_res = float(np.max(np.abs(g(theta - c) - math.exp(lam))))
    diff = g(theta + c) - g(theta - c)
    sign_lhs = diff >= 0
    sign_rhs = theta + Fp >= -theta + Fm
    agree = bool(np.all(sign_lhs == sign_rhs))
    ok = eq_res < 1e-9 and agree and diff.min() >= -tol
    return _report("g_inequality_partial", inst, {"equality": eq_res},
                   {"min": float(diff.min())}, ok, sign_agreement=agree, lam=lam)


# ------------------------------------------------------------------------ RWRE


@dataclass
class RwreProfile:
    q: np.ndarray
    r: np.ndarray
    S: np.ndarray
    phi: np.ndarray
    velocity: float
    lam: float
    theta: float


def rwre_profile(env: Environment, beta: float, theta: float,
                 res: FreeEnergyResult | None = None) -> RwreProfile:
    """q(x) = e^{beta V + theta + F(x,1) - Lambda}/2 and the derived RWRE data.

    r(x) = (1 - q)/q = e^{-2 theta - F(x-1,1) - F(x,1)}; S(x) = 1 + r(x+1) S(x+1)
    closed around the period; phi solves the stationarity equations with
    sum 1 over the period; velocity = 1 / mean((1 + r) S).
    """
    if theta <= 0:
        raise ValueError("rwre_profile needs theta > 0")
    res = res or solve_lambda_implicit(env, beta, theta)
    if res.flat:
        raise ValueError("flat-region input: corrector undefined where Lambda equals its floor")
    V = env.cell()
    Fp = np.asarray(res.corrector)
    r = np.exp(-2 * theta - np.roll(Fp, 1) - Fp)
    q = 1.0 / (1.0 + r)
    S = np.empty_like(r)
    affine_cycle_backward(np.roll(r, -1), np.ones_like(r), S)
    velocity = 1.0 / float(np.mean((1 + r) * S))
    # constant flux J = phi(x) q(x) - phi(x+1) (1 - q(x+1)); solve with J = 1
    phi = np.empty_like(r)
    affine_cycle_backward(np.roll(1 - q, -1) / q, 1.0 / q, phi)
    phi /= phi.sum()
    return RwreProfile(q, r, S, phi, velocity, res.lam, theta)


def stationarity_residual(prof: RwreProfile) -> float:
    q, phi = prof.q, prof.phi
    lhs = np.roll(q * phi, 1) + np.roll((1 - q) * phi, -1)
    return float(np.max(np.abs(lhs - phi)) / phi.max())


def bernoulli_kl(q, p):
    """I(q | p) = q log(q/p) + (1-q) log((1-q)/(1-p))."""
    q = np.asarray(q, dtype=float)
    return q * np.log(q / p) + (1 - q) * np.log((1 - q) / (1 - p))


def variational_check(env: Environment, beta: float, theta: float) -> dict:
    """Evaluate both variational formulas for Lambda at the optimal corrector.

    sup form: beta V + log(e^{theta + F(x,1)}/2 + e^{-theta + F(x,-1)}/2) is constant = Lambda.
    entropy form: sum_x phi(x) [beta V(x) - I(q(x) | p(theta))] + log cosh theta = Lambda,
    with p(theta) = e^theta / (e^theta + e^-theta).
    """
    res = solve_lambda_implicit(env, beta, theta)
    prof = rwre_profile(env, beta, theta, res)
    V = env.cell()
    Fp = np.asarray(res.corrector)
    Fm = -np.roll(Fp, 1)
    inner = beta * V + np.logaddexp(theta + Fp, -theta + Fm) - math.log(2)
    sup_res = float(np.max(np.abs(inner - res.lam)))
    p = 1.0 / (1.0 + math.exp(-2 * theta))
    ent = float(np.sum(prof.phi * (beta * V - bernoulli_kl(prof.q, p)))) + math.log(math.cosh(theta))
    ent_res = abs(ent - res.lam)
    ok = sup_res < 1e-9 and ent_res < 1e-8
    return _report("variational", {"beta": beta, "theta": theta, "env": env.kind},
                   {"sup_form": sup_res, "entropy_form": ent_res}, {}, ok,
                   lam=res.lam, entropy_value=ent)


# ---------------------------------------------------------- nondifferentiability


def locate_theta_b(env: Environment, beta: float, resolution: float = 1e-6):
    """sup{theta : Lambda(theta) = beta} by bisection on the solver's flat flag."""
    lo = beta * (1 - env.mean())
    if not solve_lambda_implicit(env, beta, lo).flat:
        raise ValueError("flat interval not detected at beta (1 - E[V])")
    hi = lo + 0.25
    while solve_lambda_implicit(env, beta, hi).flat:
        lo, hi = hi, hi + 2 * (hi - lo)
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if solve_lambda_implicit(env, beta, mid).flat:
            lo = mid
        else:
            hi = mid
    return lo, hi


def nondifferentiability_check(env: Environment, beta: float, h_left: float = 1e-3) -> dict:
    """Locate theta_b and compare the one-sided slopes of Lambda there with
    the lower bound (1 - E rbar) / (1 + E rbar), rbar = (e^{beta (V-1)} + 1)/2."""
    if abs(lambda_floor(env, beta) - beta) > 1e-12:
        raise ValueError("precondition-violation: no flat interval at level beta "
                         "(environment lacks long hills of the top value)")
    lo, hi = locate_theta_b(env, beta)
    theta_b = 0.5 * (lo + hi)
    rbar = 0.5 * (np.exp(beta * (env.cell() - 1)) + 1)
    Er = float(rbar.mean())
    bound = (1 - Er) / (1 + Er)
    lam = free_energy(env, beta)
    left = (lam(theta_b - 0.05) - lam(theta_b - 0.05 - h_left)) / h_left
    right = (lam(theta_b + 0.01) - lam(theta_b)) / 0.01
    v_right = rwre_profile(env, beta, theta_b + 0.01).velocity
    ok = abs(left) < 1e-8 and right >= bound - 1e-4
    note = "iid hypothesis" if env.kind == "iid" else "hypothesis sampled, not proved"
    return _report("nondifferentiability", {"beta": beta, "env": env.kind},
                   {"left_derivative": abs(left)},
                   {"right_minus_bound": right - bound}, ok,
                   theta_b=theta_b, theta_b_band=(lo, hi),
                   theta_b_probe=flat_threshold(env, beta), mean_rbar=Er, bound=bound,
                   right_quotient=right, velocity_above=v_right, verdict=note)
