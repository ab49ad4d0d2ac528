"""Potential environments on the integer lattice.

An environment is a bounded potential V : Z -> [0, 1].  Periodic
environments are stored as one period and extend by index modulo the
period.  Sampled environments (iid, Markov, glued pairs) are realized on
a finite window [-L, L]; reading a site outside the window raises
``CoverageError`` instead of silently extending the sequence.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

KINDS = ("periodic", "iid", "markov", "glued")
DEFAULT_HALF_WIDTH = 10_000


class CoverageError(IndexError):
    """A sampled environment was read outside of its window."""


@dataclass(frozen=True)
class IntervalFeature:
    """A run of sites [lo, hi] on which V stays low (valley) or high (hill).

    ``center`` is the site x such that the interval is [x - ell, x + ell - 1].
    """
    lo: int
    hi: int
    kind: str
    level: float
    center: int


@dataclass(frozen=True, eq=False)
class Environment:
    kind: str
    values: np.ndarray
    lo: int = 0
    seed: int | None = None
    params: dict = field(default_factory=dict)
    # largest value the generating law can produce; sampled windows only
    sup: float = 1.0

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("invalid-parameter: need a nonempty 1-d value sequence")
        if not np.all(np.isfinite(vals)) or vals.min() < 0.0 or vals.max() > 1.0:
            raise ValueError("invalid-parameter: potential values must lie in [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def periodic(self) -> bool:
        return self.kind == "periodic"

    @property
    def period_or_window(self) -> int:
        return self.values.size

    @property
    def hi(self) -> int:
        return self.lo + self.values.size - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=np.int64)
        idx = x - self.lo
        if self.periodic:
            out = self.values[np.mod(idx, self.values.size)]
        else:
            if idx.size and (idx.min() < 0 or idx.max() >= self.values.size):
                raise CoverageError(
                    f"window-too-small: sites outside [{self.lo}, {self.hi}] requested")
            out = self.values[idx]
        return out if out.ndim else float(out)

    def segment(self, lo: int, hi: int) -> np.ndarray:
        """Values on the sites lo, lo+1, ..., hi."""
        return self(np.arange(lo, hi + 1))

    def covers(self, lo: int, hi: int) -> bool:
        return self.periodic or (lo >= self.lo and hi <= self.hi)

    def mean(self) -> float:
        """Mean potential over one period (periodic) or over the window."""
        return float(self.values.mean())

    def cell(self) -> np.ndarray:
        """The block of values that the cyclic solvers treat as one period."""
        return self.values

    def flipped(self) -> "Environment":
        """The environment 1 - V."""
        return Environment(self.kind, 1.0 - self.values, self.lo, self.seed,
                           dict(self.params), sup=1.0)

    def to_dict(self, include_values: bool = True) -> dict:
        d = {"kind": self.kind, "params": dict(self.params), "seed": self.seed}
        if include_values or self.periodic:
            d["values"] = [float(v) for v in self.values]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw), sort_keys=True)


def _as_prob(p) -> float:
    p = float(Fraction(str(p))) if isinstance(p, str) else float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"invalid-parameter: probability {p} outside [0, 1]")
    return p


def _as_values(seq) -> np.ndarray:
    vals = np.array([float(Fraction(str(v))) if isinstance(v, str) else float(v)
                     for v in seq], dtype=float)
    if vals.size < 1:
        raise ValueError("invalid-parameter: period must be at least 1")
    if vals.min() < 0.0 or vals.max() > 1.0:
        raise ValueError("invalid-parameter: alphabet value outside [0, 1]")
    return vals


def make_environment(kind: str, params: dict | None = None, seed: int | None = 0) -> Environment:
    """Build a seeded environment.

    Parameters by kind::

        periodic  values=[v0, v1, ...]
        iid       p=P(V=1) on {0,1}, or alphabet=[...] with probs=[...],
                  or dist="uniform"; half_width=L
        markov    flip=probability of switching state; half_width=L
        glued     p=P(alpha_k=1); half_width=L

    Values may be given as exact rationals ("1/3"); they are converted to
    doubles once here.
    """
    params = dict(params or {})
    if kind == "glued-pairs":
        kind = "glued"
    if kind not in KINDS:
        raise ValueError(f"invalid-parameter: unknown environment kind {kind!r}")

    if kind == "periodic":
        vals = _as_values(params.get("values", ()))
        params["values"] = [float(v) for v in vals]
        return Environment("periodic", vals, 0, seed, params)

    L = int(params.get("half_width", DEFAULT_HALF_WIDTH))
    if L < 0:
        raise ValueError("invalid-parameter: half_width must be nonnegative")
    params["half_width"] = L
    size = 2 * L + 1
    rng = np.random.default_rng(seed)

    if kind == "iid":
        if params.get("dist") == "uniform":
            vals = rng.random(size)
            sup = 1.0
        elif "alphabet" in params:
            alphabet = _as_values(params["alphabet"])
            probs = np.array([_as_prob(q) for q in params.get("probs", [])]
                             or np.full(alphabet.size, 1.0 / alphabet.size))
            if probs.size != alphabet.size or abs(probs.sum() - 1.0) > 1e-12:
                raise ValueError("invalid-parameter: probs must match alphabet and sum to 1")
            vals = alphabet[rng.choice(alphabet.size, size=size, p=probs)]
            sup = float(alphabet[probs > 0].max())
        else:
            p = params["p"] = _as_prob(params.get("p", 0.5))
            vals = (rng.random(size) < p).astype(float)
            sup = 1.0 if p > 0 else 0.0
    elif kind == "markov":
        flip = params["flip"] = _as_prob(params.get("flip", 0.5))
        state = int(rng.random() < 0.5)     # stationary law of the symmetric chain
        flips = rng.random(size - 1) < flip
        vals = np.empty(size)
        vals[0] = state
        vals[1:] = np.mod(state + np.cumsum(flips), 2)
        sup = 1.0
    else:
        p = params["p"] = _as_prob(params.get("p", 0.5))
        s = int(rng.integers(0, 2))
        params["phase"] = s
        sites = np.arange(-L, L + 1)
        k = np.floor_divide(sites - s + 1, 2)
        alpha = (rng.random(k.max() - k.min() + 1) < p).astype(float)
        vals = alpha[k - k.min()]
        sup = 1.0 if p > 0 else 0.0
    return Environment(kind, vals, -L, seed, params, sup=sup)


def parse_env_spec(text: str, seed: int | None = 0, half_width: int | None = None) -> Environment:
    """Parse ``periodic:0,1``, ``iid:p=0.5``, ``markov:flip=0.3``, ``glued:p=0.5``.

    Extra ``key=value`` pairs (e.g. ``half_width=20000``) are passed to the
    generator.  A JSON object {kind, params, seed, values?} is also accepted.
    """
    text = text.strip()
    if text.startswith("{"):
        d = json.loads(text)
        params = dict(d.get("params", {}))
        if "values" in d:
            params["values"] = d["values"]
        return make_environment(d["kind"], params, d.get("seed", seed))
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    params: dict = {}
    if kind == "periodic":
        params["values"] = [v for v in rest.split(",") if v.strip()]
    elif rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise ValueError(f"invalid-parameter: expected key=value, got {item!r}")
            params[key.strip()] = val.strip()
    if "half_width" in params:
        params["half_width"] = int(params["half_width"])
    elif half_width is not None and kind != "periodic":
        params["half_width"] = int(half_width)
    return make_environment(kind, params, seed)


def scan_features(env: Environment, h: float, ell: int, window: tuple[int, int],
                  kind: str = "valley") -> list[IntervalFeature]:
    """All placements [x - ell, x + ell - 1] inside `window` on which V <= h
    (valley) or V >= h (hill), sorted by x.

    Hills take the level as the lower bound itself, so hills of V at level
    1 - h are exactly the valleys of 1 - V at level h.
    """
    if not 0.0 < h < 1.0 or ell < 1 or window[1] < window[0]:
        raise ValueError("invalid-parameter: need 0 < h < 1, ell >= 1 and a nonempty window")
    lo, hi = int(window[0]), int(window[1])
    width = 2 * ell
    if hi - lo + 1 < width:
        return []
    seg = env.segment(lo, hi)
    blocks = sliding_window_view(seg, width)
    if kind == "valley":
        ok = blocks.max(axis=1) <= h
    elif kind == "hill":
        ok = blocks.min(axis=1) >= h
    else:
        raise ValueError(f"invalid-parameter: unknown feature kind {kind!r}")
    starts = lo + np.flatnonzero(ok)
    return [IntervalFeature(int(s), int(s) + width - 1, kind, h, int(s) + ell) for s in starts]


def nearest_feature(env: Environment, h: float, ell: int, around: int, kind: str = "valley",
                    max_radius: int = 100_000) -> IntervalFeature:
    """The feature whose center is closest to `around` (ties go to the smaller
    site).  Raises LookupError when none exists within `max_radius`."""
    radius = 64
    while True:
        radius = min(radius, max_radius)
        lo, hi = around - radius - ell, around + radius + ell - 1
        if not env.periodic:
            lo, hi = max(lo, env.lo), min(hi, env.hi)
        found = [f for f in scan_features(env, h, ell, (lo, hi), kind)
                 if abs(f.center - around) <= radius]
        if found:
            return min(found, key=lambda f: (abs(f.center - around), f.center))
        window_exhausted = not env.periodic and lo == env.lo and hi == env.hi
        if radius >= max_radius or window_exhausted:
            raise LookupError(f"not-found: no {h}-{kind} with ell={ell} within radius {radius}")
        radius *= 4


def feature_probability(env: Environment, h: float, ell: int, kind: str = "valley"):
    """Empirical frequency of placements that are features, over the whole
    window (or one period), plus the exact value for iid laws when known."""
    if env.periodic:
        p = env.values.size
        window = (0, p - 1 + 2 * ell)
        count = len(scan_features(env, h, ell, window, kind))
        total = p
    else:
        feats = scan_features(env, h, ell, (env.lo, env.hi), kind)
        count = len(feats)
        total = env.values.size - 2 * ell + 1
    return count / total, exact_feature_probability(env, h, ell, kind)


def exact_feature_probability(env: Environment, h: float, ell: int, kind: str = "valley"):
    """P([0, 2 ell - 1] is a feature) for iid generators, by enumerating the
    one-site law; None for other kinds."""
    if env.kind != "iid":
        return None
    if env.params.get("dist") == "uniform":
        return (h if kind == "valley" else 1.0 - h) ** (2 * ell)
    if "alphabet" in env.params:
        alphabet = _as_values(env.params["alphabet"])
        probs = np.array([_as_prob(q) for q in env.params.get("probs", [])]
                         or np.full(alphabet.size, 1.0 / alphabet.size))
    else:
        p = _as_prob(env.params["p"])
        alphabet, probs = np.array([0.0, 1.0]), np.array([1.0 - p, p])
    good = alphabet <= h if kind == "valley" else alphabet >= h
    return float(probs[good].sum()) ** (2 * ell)
