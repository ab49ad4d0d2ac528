import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crwalk.effham import (K_delta, c_of_delta, constant_lambda, convexity_check,
                           effective_hamiltonian, effham_rows, flat_width, hbar_grid,
                           regime_of, regime_report, rows_to_csv, theta_bar, threshold_delta)
from crwalk.tfe import free_energy


@pytest.fixture(scope="module")
def iid_lambda(iid_small):
    return free_energy(iid_small, 1.0)


def test_c_of_delta():
    assert c_of_delta(0.0) == 0.0
    assert c_of_delta(math.tanh(1.0)) == pytest.approx(1.0, abs=1e-14)
    assert c_of_delta(1.0) == math.inf
    with pytest.raises(ValueError):
        c_of_delta(1.5)


def test_K_delta_branches():
    th = np.linspace(-3, 3, 13)
    assert np.allclose(K_delta(th, 0.0), np.log(np.cosh(th)))
    assert np.allclose(K_delta(th, 1.0), -np.abs(th))
    c = c_of_delta(0.6)
    assert K_delta(c, 0.6) == pytest.approx(-math.log(math.cosh(c)), abs=1e-14)
    assert K_delta(-c, 0.6) == K_delta(c, 0.6)


def test_regimes_and_threshold():
    assert threshold_delta(1.0) == pytest.approx(math.sqrt(1 - math.exp(-2)))
    assert threshold_delta(1.0) == pytest.approx(0.93, abs=1e-3)
    assert regime_of(0, 1) == "none" and regime_of(1, 1) == "full"
    assert regime_of(0.5, 1) == "weak"
    assert regime_of(0.99, 0.05) == "strong"
    assert regime_of(0.9298, 1.0) == "weak" and regime_of(0.9299, 1.0) == "strong"
    rep = regime_report(0.5, 1.0, 0.5)
    assert rep.convex and rep.theta_bar is None


def test_full_control_values():
    lam = constant_lambda(1.0, 0.5)
    assert effective_hamiltonian(1.0, 1.0, 0.5, lam, 0.2) == 0.0
    assert effective_hamiltonian(1.0, 1.0, 0.5, lam, 2.0) == pytest.approx(-1.5)
    assert effective_hamiltonian(1.0, 1.0, 0.5, lam, -2.0) == pytest.approx(-1.5)


def test_theta_bar_closed_form():
    beta, v, delta = 0.05, 0.5, 0.99
    c = c_of_delta(delta)
    lam = constant_lambda(beta, v)
    closed = c - math.acosh(math.cosh(c) * math.exp(-beta * v))
    tb = theta_bar(beta, c, lam)
    assert tb == pytest.approx(closed, abs=1e-8)
    assert lam(tb - c) == pytest.approx(math.log(math.cosh(c)), abs=1e-8)


def test_theta_bar_outside_strong_regime():
    with pytest.raises(ValueError, match="not-strong-regime"):
        theta_bar(1.0, c_of_delta(0.5), constant_lambda(1.0, 0.5))


def test_no_control_is_free_energy(iid_lambda):
    for t in (0.0, 0.7, 2.5):
        assert effective_hamiltonian(0.0, 1.0, 0.5, iid_lambda, t) == iid_lambda(t)


def test_small_c_reproduces_free_energy(iid_lambda):
    for t in (1.5, 2.5):
        assert effective_hamiltonian(1e-6, 1.0, 0.5, iid_lambda, t) == pytest.approx(
            iid_lambda(t), abs=1e-5)


def test_large_c_approaches_full_control():
    lam = constant_lambda(1.0, 0.5)
    for t in (1.0, 2.0, 3.0):
        near = effective_hamiltonian(1 - 1e-10, 1.0, 0.5, lam, t)
        assert near == pytest.approx(effective_hamiltonian(1.0, 1.0, 0.5, lam, t), abs=1e-3)


def test_regime_boundary_continuity(iid_small):
    beta = 1.0
    d0 = threshold_delta(beta)
    lam = free_energy(iid_small, beta)
    grid = np.linspace(-3, 3, 31)
    below = hbar_grid(d0 - 1e-7, beta, iid_small.mean(), lam, grid)
    above = hbar_grid(d0 + 1e-7, beta, iid_small.mean(), lam, grid)
    assert np.max(np.abs(below - above)) < 1e-4


def test_lower_envelope_and_evenness(iid_small, iid_lambda):
    grid = np.linspace(-3, 3, 25)
    lam_vals = np.array([iid_lambda(t) for t in grid])
    for delta in (0.3, 0.7, 0.95, 1.0):
        h = hbar_grid(delta, 1.0, iid_small.mean(), iid_lambda, grid)
        assert np.all(h <= lam_vals + 1e-12)
        assert np.allclose(h, h[::-1], atol=1e-12)


def test_flat_widths():
    grid = np.round(np.linspace(-3, 3, 601), 10)
    lam = constant_lambda(1.0, 0.5)
    h_full = hbar_grid(1.0, 1.0, 0.5, lam, grid)
    assert flat_width(grid, h_full) == pytest.approx(2 * 0.5, abs=0.011)
    beta, delta = 0.05, 0.99
    lam = constant_lambda(beta, 0.5)
    tb = theta_bar(beta, c_of_delta(delta), lam)
    h_strong = hbar_grid(delta, beta, 0.5, lam, grid)
    assert flat_width(grid, h_strong) == pytest.approx(2 * tb, abs=0.011)


def test_convexity_verdicts(iid_small, iid_lambda):
    grid = np.linspace(-4, 4, 161)
    rep = convexity_check(0.5, 1.0, iid_small.mean(), iid_lambda, grid)
    assert rep["convex_numeric"] and rep["agree"]
    lam = constant_lambda(0.05, 0.5)
    rep = convexity_check(0.99, 0.05, 0.5, lam, grid)
    assert not rep["convex_numeric"] and rep["agree"]
    assert rep["min_second_difference"] < 0


def test_csv_rows():
    lam = constant_lambda(1.0, 0.5)
    rows = effham_rows(1.0, 1.0, 0.5, lam, [0.0, 2.0])
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == "theta,K_delta,H_bar,regime"
    assert text.splitlines()[2] == "2,-2,-1.5,full"


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 3.0), st.floats(0.05, 1.0), st.floats(-4, 4))
def test_hbar_even_and_below_free_energy_constant_oracle(delta, beta, v, theta):
    lam = constant_lambda(beta, v)
    a = effective_hamiltonian(delta, beta, v, lam, theta)
    b = effective_hamiltonian(delta, beta, v, lam, -theta)
    assert a == b
    if regime_of(delta, beta) == "strong":
        assert a <= lam(theta) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(-5, 5))
def test_K_delta_bounds(delta, theta):
    # control can only lower the zero-potential Hamiltonian, down to -|theta|
    k = K_delta(theta, delta)
    assert -abs(theta) - 1e-12 <= k <= math.log(math.cosh(theta)) + 1e-12
