import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noniid.distances import (bures_chi2, chi2_upper, classical_chi2, classical_divergences, fidelity,
                              hs_sq, min_eigenvalue, quantum_divergences, trace_distance)
from noniid.states import depolarize, maximally_mixed, pure_state, random_state, random_unitary
from noniid.verify import random_pair

seeds = st.integers(0, 2 ** 32)


def test_diagonal_qubits_closed_forms():
    a, b = 0.3, 0.6
    rho, sigma = np.diag([a, 1 - a]), np.diag([b, 1 - b])
    assert math.isclose(trace_distance(rho, sigma), 0.3)
    assert math.isclose(hs_sq(rho, sigma), 2 * 0.09)
    F = (math.sqrt(a * b) + math.sqrt((1 - a) * (1 - b))) ** 2
    assert math.isclose(fidelity(rho, sigma), F)
    chi = 0.09 / b + 0.09 / (1 - b)
    assert math.isclose(bures_chi2(rho, sigma), chi)
    assert math.isclose(chi2_upper(rho, sigma), chi)
    assert math.isclose(classical_chi2([a, 1 - a], [b, 1 - b]), chi)


def test_pure_states_zero_and_plus():
    zero, plus = pure_state([1, 0]), pure_state([1, 1])
    assert math.isclose(trace_distance(zero, plus), 1 / math.sqrt(2))
    assert math.isclose(fidelity(zero, plus), 0.5, rel_tol=1e-12)
    assert math.isclose(hs_sq(zero, plus), 1.0)


def test_bures_chi2_off_diagonal_term():
    # sigma = I/2, Delta = x X: chi2 = 2 * 2 * x^2 / (1/2 + 1/2)
    x = 0.2
    rho = np.array([[0.5, x], [x, 0.5]])
    assert math.isclose(bures_chi2(rho, maximally_mixed(2)), 4 * x * x)


def test_infinite_divergences_outside_support():
    rho, sigma = pure_state([1, 1]), pure_state([1, 0])
    assert math.isinf(bures_chi2(rho, sigma))
    assert math.isinf(chi2_upper(rho, sigma))
    assert math.isinf(classical_chi2([0.5, 0.5], [1, 0]))
    assert quantum_divergences(rho, sigma).to_dict()["bures_chi2"] is None
    # inside the support the kernel convention gives a finite value
    assert bures_chi2(pure_state([1, 0]), np.diag([1.0, 0.0])) == 0.0


def test_identical_states_give_zero_report(rng):
    rho = random_state(rng, 4)
    rep = quantum_divergences(rho, rho)
    assert rep.trace_distance < 1e-12 and rep.hs_sq < 1e-24 and rep.bures_chi2 < 1e-20
    assert abs(rep.fidelity - 1) < 1e-12 and rep.bures_sq < 1e-12
    c = classical_divergences([0.2, 0.8], [0.2, 0.8])
    assert c.tv == c.chi2 == c.hellinger_sq == 0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        trace_distance(np.eye(2) / 2, np.eye(3) / 3)


@given(seeds)
def test_hierarchy_on_random_pairs(seed):
    rng = np.random.default_rng(seed)
    rho, sigma = random_pair(rng)
    d = rho.shape[0]
    r = quantum_divergences(rho, sigma)
    tol = 1e-9
    assert r.hs_sq / 4 <= r.trace_distance ** 2 + tol
    assert r.trace_distance ** 2 <= d * r.hs_sq / 4 + tol
    assert r.bures_sq / 2 <= r.trace_distance + tol
    assert r.trace_distance ** 2 <= r.infidelity + tol
    assert r.infidelity <= r.bures_sq + tol
    assert r.bures_sq <= 2 * r.infidelity + tol
    assert r.bures_sq <= r.bures_chi2 * (1 + tol) + tol
    assert r.bures_chi2 <= chi2_upper(rho, sigma) * (1 + tol) + tol


def test_printed_fuchs_van_de_graaf_lower_bound_fails_near_identical_states():
    # 1/2 D_B^2 <= Dtr^2 breaks for p = (1, 0) against q = (1 - e, e): lhs ~ e/2, rhs = e^2
    e = 1e-3
    rho, sigma = np.diag([1.0, 0.0]), np.diag([1 - e, e])
    r = quantum_divergences(rho, sigma)
    assert r.bures_sq / 2 > r.trace_distance ** 2
    assert r.bures_sq / 2 <= r.trace_distance


@given(st.integers(2, 5), seeds)
def test_unitary_invariance(d, seed):
    rng = np.random.default_rng(seed)
    rho, sigma = random_state(rng, d), depolarize(random_state(rng, d), 0.3)
    U = random_unitary(rng, d)
    a = quantum_divergences(rho, sigma)
    b = quantum_divergences(U @ rho @ U.conj().T, U @ sigma @ U.conj().T)
    for name in ("trace_distance", "hs_sq", "fidelity", "bures_chi2"):
        assert math.isclose(getattr(a, name), getattr(b, name), rel_tol=1e-8, abs_tol=1e-10)


@given(st.integers(2, 8), seeds)
def test_classical_tv_chi2_relation(d, seed):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(d)), rng.dirichlet(np.ones(d))
    c = classical_divergences(p, q)
    assert 4 * c.tv ** 2 <= c.chi2 + 1e-12
    assert c.hellinger_sq <= 2 * c.tv + 1e-12


def test_min_eigenvalue():
    assert math.isclose(min_eigenvalue(np.diag([0.1, 0.9])), 0.1)
