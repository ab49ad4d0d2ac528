"""Self-checks runnable from the command line, one suite per module.

Each check yields (name, error, tolerance) and passes when error <= tol *
tol_scale.  Results depend only on the seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bellman, corrector, effham, env as envmod, tfe, walk


@dataclass
class CheckResult:
    suite: str
    name: str
    error: float
    tol: float
    passed: bool

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.suite:<9} {self.name:<44} err={self.error:.3e} tol={self.tol:.1e}"


def _env_checks(seed):
    e = envmod.make_environment("iid", {"p": 0.5, "half_width": 20000}, seed=seed)
    emp, exact = envmod.feature_probability(e, 0.5, 3, "valley")
    yield "iid valley frequency vs 2^-6", abs(emp - exact), 5 * math.sqrt(exact / e.values.size)
    p = envmod.make_environment("periodic", {"values": [0, 1]})
    yield "periodic wraps", abs(p(7) - 1.0) + abs(p(-4)), 1e-15
    m = envmod.make_environment("markov", {"flip": 0.1, "half_width": 20000}, seed=seed)
    flips = float(np.mean(m.values[1:] != m.values[:-1]))
    yield "markov flip rate", abs(flips - 0.1), 0.01


def _walk_checks(seed):
    yield "J_20(2) vs log cosh 1", abs(walk.excursion_J_ell(1.0, 20) - math.log(math.cosh(1))), 1e-3
    for ell in (1, 3, 10):
        yield (f"confinement ell={ell}",
               abs(walk.confinement_spectral(ell) - walk.confinement_exponent(ell)), 1e-10)
    for lam in (0.1, 0.5, math.log(math.cosh(1))):
        yield (f"tau_1 transform lam={lam:.4g}",
               abs(walk.first_passage_series(lam) - walk.hitting_laplace_tau1(lam)), 1e-8)
        yield (f"excursion transform lam={lam:.4g}",
               abs(walk.excursion_laplace_series(lam) - walk.hitting_laplace_excursion(lam)), 1e-8)
    yield "rate at 1/2 equals log 2", abs(walk.excursion_rate(0.5) - math.log(2)), 1e-15
    e = envmod.make_environment("iid", {"p": 0.5, "half_width": 50}, seed=seed)
    yield ("path-sum DP vs enumeration",
           abs(walk.path_sum_log_expectation(e, 0.7, 0.3, 10) - walk.path_sum_bruteforce(e, 0.7, 0.3, 10)),
           1e-12)


def _tfe_checks(seed):
    for v in (0.3, 0.7):
        e = envmod.make_environment("periodic", {"values": [v]})
        res = tfe.solve_lambda_implicit(e, 1.0, 0.5)
        yield f"constant V={v} implicit", abs(res.lam - (v + math.log(math.cosh(0.5)))), 1e-8
    p = envmod.make_environment("periodic", {"values": [0, 1]})
    res = tfe.solve_lambda_implicit(p, 1.0, 1.5)
    yield "2-periodic parity formula", abs(res.lam - (0.5 + math.log(math.cosh(1.5)))), 1e-10
    yield "corrector identity residual", tfe.identity_residual(p, 1.0, 1.5, res.lam, res.corrector), 1e-9
    e = envmod.make_environment("iid", {"p": 0.5, "half_width": 5000}, seed=seed)
    res = tfe.solve_lambda_implicit(e, 1.0, 0.3)
    yield "iid flat at beta", abs(res.lam - 1.0) + (0.0 if res.flat else 1.0), 1e-12


def _corrector_checks(seed):
    p = envmod.make_environment("periodic", {"values": [0, 1]})
    prof = corrector.rwre_profile(p, 1.0, 1.5)
    lam = tfe.free_energy(p, 1.0)
    h = 1e-5
    fd = (lam(1.5 + h) - lam(1.5 - h)) / (2 * h)
    yield "velocity vs derivative of Lambda", abs(prof.velocity - fd), 1e-4
    yield "invariant density stationarity", corrector.stationarity_residual(prof), 1e-12
    var = corrector.variational_check(p, 1.0, 1.5)
    yield "sup variational form", var["residuals"]["sup_form"], 1e-9
    yield "entropy variational form", var["residuals"]["entropy_form"], 1e-8
    e = envmod.make_environment("iid", {"p": 0.5, "half_width": 20000}, seed=seed)
    G = corrector.full_control_cocycle(e, 1.0)
    prof_s = corrector.sublinearity_profile(G, [100, 1000])
    yield "sublinearity decreasing (G)", max(prof_s[1] - prof_s[0], 0.0), 1e-15


def _bellman_checks(seed):
    rng = np.random.default_rng(seed)
    e = envmod.make_environment("iid", {"p": 0.5, "half_width": 40}, seed=seed)
    worst = 0.0
    for _ in range(5):
        n = int(rng.integers(1, 7))
        pr = bellman.ControlProblem(e, float(rng.choice([0.0, 0.4, 1.0])), float(rng.uniform(0, 2)),
                                    float(rng.uniform(-2, 2)), n, int(rng.integers(-3, 4)))
        worst = max(worst, abs(bellman.solve(pr).value - bellman.exhaustive_history_min(pr)))
    yield "solve vs exhaustive history tree", worst, 1e-10
    pr = bellman.ControlProblem(e, 0.5, 1.0, 0.7, 6, 0)
    alpha = np.where(rng.random((6, 13)) < 0.5, -pr.c, pr.c)
    dual = bellman.tilt_formulation_value(pr, alpha)
    direct = bellman.evaluate_policy(pr, bellman.alpha_to_policy(pr, alpha)).value
    yield "tilt formulation equivalence", abs(dual - direct), 1e-12
    opt = bellman.solve(pr).value
    gap = min(bellman.evaluate_policy(pr, bellman.parse_policy(s)).value - opt
              for s in ("march-left", "march-right", "const:q=0.5"))
    yield "fixed policies dominate optimum", max(-gap, 0.0), 1e-12


def _effham_checks(seed):
    yield "c(tanh 1) = 1", abs(effham.c_of_delta(math.tanh(1.0)) - 1.0), 1e-12
    lam = effham.constant_lambda(1.0, 0.5)
    yield ("full control plateau",
           abs(effham.effective_hamiltonian(1.0, 1.0, 0.5, lam, 0.2)), 1e-15)
    yield ("full control slope",
           abs(effham.effective_hamiltonian(1.0, 1.0, 0.5, lam, 2.0) + 1.5), 1e-12)
    beta, v, d = 0.05, 0.5, 0.99
    c = effham.c_of_delta(d)
    lam = effham.constant_lambda(beta, v)
    closed = c - math.acosh(math.cosh(c) * math.exp(-beta * v))
    yield "theta_bar vs closed form", abs(effham.theta_bar(beta, c, lam) - closed), 1e-8
    chk = effham.convexity_check(d, beta, v, lam, np.linspace(-4, 4, 161))
    yield "nonconvex verdict agrees", 0.0 if chk["agree"] else 1.0, 0.5


SUITES = {
    "env": _env_checks,
    "walk": _walk_checks,
    "tfe": _tfe_checks,
    "corrector": _corrector_checks,
    "bellman": _bellman_checks,
    "effham": _effham_checks,
}


def run_suite(name: str = "all", seed: int = 0, tol_scale: float = 1.0) -> list[CheckResult]:
    names = list(SUITES) if name == "all" else [name]
    out = []
    for s in names:
        if s not in SUITES:
            raise KeyError(f"unknown suite {s!r}")
        for check, err, tol in SUITES[s](seed):
            err = float(err)
            out.append(CheckResult(s, check, err, tol, bool(err <= tol * tol_scale)))
    return out
