"""Small numerical kernels shared by the solvers."""
from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

LOG2 = math.log(2.0)


def power_iteration(apply, size: int, tol: float = 1e-13, max_iter: int = 100_000,
                    shift: float = 0.0):
    """Top eigenvalue of a nonnegative operator by power iteration.

    Starts from the uniform vector and stops when successive Rayleigh
    quotients differ by less than `tol`.  `shift` adds shift*I before
    iterating (the returned eigenvalue has the shift removed), which keeps
    the iteration from oscillating on bipartite operators.

    Returns (eigenvalue, eigenvector normalized to unit max).
    """
    v = np.full(size, 1.0 / math.sqrt(size))
    prev = np.nan
    for _ in range(max_iter):
        w = apply(v) + shift * v
        rq = float(v @ w)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            raise RuntimeError("power iteration collapsed to the zero vector")
        v = w / norm
        if abs(rq - prev) < tol:
            return rq - shift, v / v.max()
        prev = rq
    raise RuntimeError(f"power-iteration-nonconverged after {max_iter} iterations")


@njit(cache=True)
def first_passage_cycle(b, out):
    """Cyclic solution of a[x] = b[x] / (1 - b[x] a[x-1]) on Z / pZ.

    Each step is the Moebius map z -> b / (1 - b z).  The composed map over
    one period is built with projective normalization, its attracting fixed
    point gives a[p-1], and one sweep fills the rest.  Further sweeps polish
    the result until the largest update drops below 1e-14.

    Returns the last update size, or -1.0 if no positive attracting fixed
    point exists (the transform diverges).
    """
    p = b.size
    A, B, C, D = 1.0, 0.0, 0.0, 1.0
    for x in range(p):
        bx = b[x]
        A, B, C, D = bx * C, bx * D, C - bx * A, D - bx * B
        s = abs(A) + abs(B) + abs(C) + abs(D)
        A /= s
        B /= s
        C /= s
        D /= s
    # fixed points of z -> (A z + B) / (C z + D):  C z^2 + (D - A) z - B = 0
    disc = (D - A) * (D - A) + 4.0 * B * C
    if disc < 0.0 or C == 0.0:
        if C == 0.0 and D != A:
            z = B / (D - A)
        else:
            return -1.0
    else:
        sq = math.sqrt(disc)
        q = -0.5 * ((D - A) + (sq if D - A >= 0.0 else -sq))
        z1 = q / C
        z2 = -B / q if q != 0.0 else z1
        # attracting root: larger |C z + D|
        if abs(C * z1 + D) >= abs(C * z2 + D):
            z = z1
        else:
            z = z2
    if not (z > 0.0):
        return -1.0
    prev = z
    for x in range(p):
        den = 1.0 - b[x] * prev
        if den <= 0.0:
            return -1.0
        prev = b[x] / den
        out[x] = prev
    delta = 1.0
    for _ in range(200):
        delta = 0.0
        prev = out[p - 1]
        for x in range(p):
            den = 1.0 - b[x] * prev
            if den <= 0.0:
                return -1.0
            new = b[x] / den
            d = abs(new - out[x])
            if d > delta:
                delta = d
            out[x] = new
            prev = new
        if delta < 1e-14:
            break
    return delta


@njit(cache=True)
def affine_cycle_backward(mult, add, out):
    """Cyclic solution of y[x] = add[x] + mult[x] * y[x+1] on Z / pZ, for
    nonnegative coefficients whose product over a period is below 1."""
    p = mult.size
    A, B = 0.0, 1.0
    for x in range(p - 1, -1, -1):
        A = add[x] + mult[x] * A
        B = mult[x] * B
    y = A / (1.0 - B)
    out[0] = y
    nxt = y
    for x in range(p - 1, 0, -1):
        nxt = add[x] + mult[x] * nxt
        out[x] = nxt
    return B


def logaddexp_pairs(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """log(e^left + e^right) elementwise, with both -inf giving -inf."""
    with np.errstate(invalid="ignore"):
        out = np.logaddexp(left, right)
    both = np.isneginf(left) & np.isneginf(right)
    if both.any():
        out[both] = -np.inf
    return out
