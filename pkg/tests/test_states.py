import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noniid.distances import bures_chi2, classical_chi2, hs_sq, trace_distance
from noniid.states import (MODES, ProductEnsemble, StateError, check_density_matrix, depolarize,
                           distribution_at_chi2, ensemble_from_json, ensemble_to_json, load_ensemble,
                           maximally_mixed, perturb_ensemble, random_ensemble, random_state,
                           random_unitary, save_ensemble, split_distribution)

seeds = st.integers(0, 2 ** 32)


@given(st.integers(1, 6), st.sampled_from(MODES), seeds)
def test_random_states_are_density_matrices(d, mode, seed):
    rho = random_state(np.random.default_rng(seed), d, mode)
    check_density_matrix(rho)
    if mode == "haar_pure":
        assert np.isclose(np.trace(rho @ rho).real, 1)
    if mode == "classical_dirichlet":
        assert np.allclose(rho, np.diag(np.diag(rho)))


def test_random_ensemble_is_reproducible():
    a = random_ensemble(3, 5, "ginibre_mixed", 9)
    b = random_ensemble(3, 5, "ginibre_mixed", 9)
    assert np.array_equal(a.states, b.states)
    assert a.T == 5 and a.d == 3


def test_check_density_matrix_rejects():
    with pytest.raises(StateError):
        check_density_matrix(np.diag([1.5, -0.5]))
    with pytest.raises(StateError):
        check_density_matrix(np.array([[0.5, 0.3], [0.1, 0.5]]))
    with pytest.raises(StateError):
        check_density_matrix(np.eye(2))


@given(st.integers(1, 5), seeds)
def test_random_unitary_is_unitary(d, seed):
    U = random_unitary(np.random.default_rng(seed), d)
    assert np.allclose(U @ U.conj().T, np.eye(d))


def test_depolarize_endpoints(rng):
    rho = random_state(rng, 3)
    assert np.allclose(depolarize(rho, 0), rho)
    assert np.allclose(depolarize(rho, 1), maximally_mixed(3))
    with pytest.raises(ValueError):
        depolarize(rho, 1.5)


@given(st.integers(2, 4), st.integers(1, 9), st.sampled_from(["coherent", "pure_mix"]),
       st.sampled_from(["trace", "hs", "bures_chi2"]), seeds)
def test_perturb_ensemble_hits_target(d, T, style, measure, seed):
    sigma = depolarize(random_state(np.random.default_rng(seed), d), 0.5)
    size = {"trace": trace_distance, "hs": hs_sq, "bures_chi2": bures_chi2}[measure]
    target = 0.02
    ens = perturb_ensemble(sigma, target, T, style, seed, measure=measure)
    assert ens.T == T
    assert np.isclose(size(ens.average(), sigma), target, rtol=1e-8)


def test_perturb_ensemble_zero_target_keeps_average_but_spreads():
    sigma = maximally_mixed(2)
    ens = perturb_ensemble(sigma, 0.0, 6, "coherent", 3)
    assert np.allclose(ens.average(), sigma)
    assert max(trace_distance(r, sigma) for r in ens) > 0.1


def test_perturb_ensemble_unattainable():
    with pytest.raises(ValueError):
        perturb_ensemble(maximally_mixed(2), 0.75, 4, "pure_mix", 0, measure="hs")


def test_json_round_trip(tmp_path, rng):
    ens = ProductEnsemble(np.stack([random_state(rng, 3) for _ in range(4)]))
    path = tmp_path / "ens.json"
    save_ensemble(ens, path)
    assert np.array_equal(load_ensemble(path).states, ens.states)
    obj = json.loads(path.read_text())
    assert obj["dim"] == 3 and len(obj["states"]) == 4


@pytest.mark.parametrize("obj, where", [
    ([], "top level"),
    ({"dim": 2}, "top level"),
    ({"dim": 0, "states": []}, "dim"),
    ({"dim": 2, "states": [[[1, 0], [0, 0], [0, 0]]]}, "states[0]"),
    ({"dim": 2, "states": [[[1, 0], [0, 0], [0, 0], ["x", 0]]]}, "states[0][3]"),
    ({"dim": 2, "states": [[[1, 0], [0, 0], [0, 0], [1, 0]]]}, "states[0]"),
])
def test_json_diagnostics_name_the_field(obj, where):
    with pytest.raises(StateError, match=__import__("re").escape(where)):
        ensemble_from_json(obj)


def test_load_ensemble_reports_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"dim": 2,\n "states": [}')
    with pytest.raises(StateError, match="line 2"):
        load_ensemble(path)


def test_ensemble_from_distributions_and_diagonals():
    p = np.array([[0.2, 0.8], [0.5, 0.5]])
    ens = ProductEnsemble.from_distributions(p)
    assert ens.is_diagonal()
    assert np.allclose(ens.diagonals(), p)
    assert ensemble_to_json(ens)["dim"] == 2


@given(st.integers(2, 30), st.integers(1, 12), seeds)
def test_split_distribution_averages_exactly(d, T, seed):
    q = np.random.default_rng(seed).dirichlet(np.ones(d))
    P = split_distribution(q, T, seed)
    assert P.shape == (T, d)
    assert np.all(P >= 0)
    assert np.allclose(P.sum(axis=1), 1)
    assert np.allclose(P.mean(axis=0), q, atol=1e-12)


@given(st.integers(3, 50), st.floats(0.01, 1.0), seeds)
def test_distribution_at_chi2(d, target, seed):
    q = np.full(d, 1 / d)
    p = distribution_at_chi2(q, target, seed)
    assert np.isclose(classical_chi2(p, q), target, rtol=1e-9)
