"""Effective Hamiltonians of the controlled walk in closed form.

Everything here takes the tilted free energy as an injected callable
lambda_fn(theta), so the formulas can be driven either by an exact oracle
(constant potential) or by the numerical solver in `tfe`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

THETA_BAR_EPS = 1e-10


def c_of_delta(delta: float) -> float:
    """c = (1/2) log((1 + delta) / (1 - delta)); +inf at delta = 1."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    if delta == 1.0:
        return math.inf
    return math.atanh(delta)


def _log_cosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2 * x)) - math.log(2)


def K_delta(theta, delta: float):
    """Separable Hamiltonian of the control problem with zero potential."""
    th = np.asarray(theta, dtype=float)
    if delta == 0:
        out = _log_cosh(th)
    elif delta == 1:
        out = -np.abs(th)
    else:
        c = c_of_delta(delta)
        out = _log_cosh(np.abs(th) - c) - _log_cosh(c)
    return float(out) if out.ndim == 0 else out


def regime_of(delta: float, beta: float) -> str:
    if delta == 0:
        return "none"
    if delta == 1:
        return "full"
    return "weak" if _log_cosh(c_of_delta(delta)) <= beta else "strong"


def threshold_delta(beta: float) -> float:
    """Largest delta for which the effective Hamiltonian is convex."""
    return math.sqrt(-math.expm1(-2 * beta))


def theta_bar(beta: float, c: float, lambda_fn, tol: float = 1e-12) -> float:
    """Root in (0, c) of lambda_fn(theta - c) = log cosh c, strong regime only."""
    target = float(_log_cosh(c))
    if not math.isfinite(c) or target <= beta:
        raise ValueError("not-strong-regime: need beta < log cosh c")

    def g(t):
        v = lambda_fn(t - c)
        if not math.isfinite(v):
            raise ArithmeticError("lambda_fn returned a non-finite value")
        return v - target

    a, b = THETA_BAR_EPS, c - THETA_BAR_EPS
    ga, gb = g(a), g(b)
    if ga < 0 or gb > 0:
        raise ValueError("not-strong-regime: no sign change of lambda(theta - c) - log cosh c on (0, c)")
    return brentq(g, a, b, xtol=tol)


def effective_hamiltonian(delta: float, beta: float, mean_V: float, lambda_fn, theta: float,
                          tbar: float | None = None) -> float:
    """H_bar(theta) for the four control regimes.  `tbar` may be passed to
    skip re-solving for the strong-regime threshold."""
    t = abs(float(theta))
    if delta == 0:
        out = lambda_fn(theta)
    elif delta == 1:
        bm = beta * mean_V
        out = 0.0 if t < bm else bm - t
    else:
        c = c_of_delta(delta)
        lc = float(_log_cosh(c))
        if lc <= beta:
            out = beta - lc if t < c else lambda_fn(t - c) - lc
        else:
            tb = theta_bar(beta, c, lambda_fn) if tbar is None else tbar
            out = 0.0 if t < tb else lambda_fn(t - c) - lc
    if not math.isfinite(out):
        raise ArithmeticError("regime-resolution failure: non-finite free energy")
    return float(out)


def hbar_grid(delta, beta, mean_V, lambda_fn, thetas) -> np.ndarray:
    tb = None
    if regime_of(delta, beta) == "strong":
        tb = theta_bar(beta, c_of_delta(delta), lambda_fn)
    return np.array([effective_hamiltonian(delta, beta, mean_V, lambda_fn, t, tbar=tb)
                     for t in thetas])


@dataclass
class RegimeReport:
    delta: float
    beta: float
    c: float
    mean_V: float
    regime: str
    theta_bar: float | None
    threshold_delta: float
    convex: bool

    def to_dict(self):
        d = asdict(self)
        if math.isinf(d["c"]):
            d["c"] = "inf"
        return d


def regime_report(delta: float, beta: float, mean_V: float, lambda_fn=None) -> RegimeReport:
    c = c_of_delta(delta)
    regime = regime_of(delta, beta)
    tb = theta_bar(beta, c, lambda_fn) if regime == "strong" and lambda_fn is not None else None
    convex = regime != "strong"
    return RegimeReport(delta, beta, c, mean_V, regime, tb, threshold_delta(beta), convex)


def convexity_check(delta, beta, mean_V, lambda_fn, theta_grid, tol: float = 1e-8) -> dict:
    """Second differences of H_bar on an evenly spaced grid against the closed
    predicate log cosh c <= beta."""
    thetas = np.asarray(theta_grid, dtype=float)
    h = hbar_grid(delta, beta, mean_V, lambda_fn, thetas)
    d2 = h[:-2] - 2 * h[1:-1] + h[2:]
    i = int(np.argmin(d2))
    numeric = bool(d2[i] >= -tol)
    predicate = regime_of(delta, beta) != "strong"
    return {"min_second_difference": float(d2[i]), "at_theta": float(thetas[i + 1]),
            "convex_numeric": numeric, "convex_predicate": predicate,
            "agree": numeric == predicate}


def flat_width(thetas, values, tol: float = 1e-9) -> float:
    """Length of the grid region around 0 where values equal the value at 0."""
    thetas = np.asarray(thetas, dtype=float)
    values = np.asarray(values, dtype=float)
    centre = values[np.argmin(np.abs(thetas))]
    flat = thetas[np.abs(values - centre) <= tol]
    return float(flat.max() - flat.min()) if flat.size else 0.0


def constant_lambda(beta: float, v: float):
    """Exact free energy for the constant potential V = v."""
    return lambda th: beta * v + float(_log_cosh(th))


def effham_rows(delta, beta, mean_V, lambda_fn, thetas):
    regime = regime_of(delta, beta)
    hb = hbar_grid(delta, beta, mean_V, lambda_fn, thetas)
    K = np.atleast_1d(K_delta(np.asarray(thetas, dtype=float), delta))
    return [{"theta": float(t), "K_delta": float(k), "H_bar": float(v), "regime": regime}
            for t, k, v in zip(thetas, K, hb)]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
