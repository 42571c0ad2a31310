import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noniid.observables import CLASSICAL_M, KINDS, KNOWN_M, MM_A, UNKNOWN_Z, ObservableKind
from noniid.states import ProductEnsemble, maximally_mixed
from noniid.testers import (CLOSE, FAR, ChebyshevRule, ClassicalSampleBatch, ClassicalSampler,
                            classical_statistic, decide, epsilon_to_theta, load_calibration,
                            prepare_trial, required_T, run_trial, sample_formula)


def _brute_statistic(pairs, q):
    T = len(pairs)
    total = sum(1 / q[pairs[s][0]] for s in range(T) for t in range(T) if pairs[s][0] == pairs[t][1])
    return total / T ** 2 - 1


def test_statistic_hand_example():
    batch = ClassicalSampleBatch(np.array([[0, 0], [1, 0]]), 2)
    assert classical_statistic(batch, [0.5, 0.5]) == pytest.approx(0.0)


@given(st.integers(2, 6), st.integers(1, 12), st.integers(0, 2 ** 32))
def test_statistic_matches_double_sum(d, T, seed):
    rng = np.random.default_rng(seed)
    q = rng.dirichlet(np.ones(d)) * 0.5 + 0.5 / d
    pairs = rng.integers(0, d, size=(T, 2))
    got = classical_statistic(ClassicalSampleBatch(pairs, d), q)
    assert got == pytest.approx(_brute_statistic(pairs.tolist(), q), rel=1e-12, abs=1e-12)


def test_batch_validation():
    with pytest.raises(ValueError):
        ClassicalSampleBatch(np.array([[0, 2]]), 2)
    with pytest.raises(ValueError):
        ClassicalSampleBatch(np.array([0, 1]), 2)
    with pytest.raises(ValueError):
        ClassicalSampleBatch(np.array([[0.0, 1.0]]), 2)
    with pytest.raises(ValueError):
        classical_statistic(ClassicalSampleBatch(np.array([[0, 1]]), 2), [1.0, 0.0, 0.0])


def test_sampler_frequencies():
    probs = np.array([[0.1, 0.9], [0.7, 0.3]])
    sampler = ClassicalSampler(probs)
    draws = np.stack([sampler.draw(s).pairs for s in range(4000)])
    assert abs((draws[:, 0, :] == 1).mean() - 0.9) < 0.02
    assert abs((draws[:, 1, :] == 0).mean() - 0.7) < 0.02
    assert np.array_equal(sampler.draw(5).pairs, sampler.draw(5).pairs)


def test_decide_ties_go_far():
    rule = ChebyshevRule(0.2)
    assert rule.threshold == pytest.approx(0.199)
    assert decide(rule.threshold, rule).verdict == FAR
    assert decide(np.nextafter(rule.threshold, 0), rule).verdict == CLOSE
    assert decide(1.0, rule, MM_A, 10).to_dict() == {
        "statistic": 1.0, "threshold": rule.threshold, "verdict": FAR, "kind": MM_A, "T_used": 10}


def test_rule_validation():
    for kw in ({"theta": -1}, {"theta": 1, "c": 0.5}, {"theta": 1, "k": 0}):
        with pytest.raises(ValueError):
            ChebyshevRule(**kw)


def test_calibration_file_has_all_constants():
    cal = load_calibration()
    for tag in KINDS:
        assert cal["sample_constants"][tag] > 0
        assert cal["variance_constants"][tag] > 0


def test_required_T_is_ceil_of_constant_times_formula():
    cal = {"sample_constants": {MM_A: 20.0, KNOWN_M: 3.0, UNKNOWN_Z: 7.0, CLASSICAL_M: 2.0}}
    assert required_T(MM_A, 0.25, 2, calibration=cal) == 80
    assert required_T(UNKNOWN_Z, 0.3, 2, calibration=cal) == math.ceil(7 / 0.3)
    # KNOWN_M takes the larger of d/theta and sqrt(d/(theta gamma))
    assert required_T(KNOWN_M, 0.5, 4, 0.01, cal) == math.ceil(3 * math.sqrt(4 / 0.005))
    assert required_T(CLASSICAL_M, 0.5, 200, 1 / 400, cal) == math.ceil(2 * math.sqrt(200) / 0.5)
    kind = ObservableKind(CLASSICAL_M, np.full(4, 0.25))
    assert required_T(kind, 0.5, 4, calibration=cal) == math.ceil(2 * max(4, 1 / math.sqrt(0.125)))


def test_required_T_from_file(tmp_path):
    path = tmp_path / "cal.json"
    path.write_text(json.dumps({"sample_constants": {k: 1.0 for k in KINDS}}))
    assert required_T(MM_A, 0.5, 2, calibration=str(path)) == 2
    path.write_text(json.dumps({"sample_constants": {MM_A: 1.0}}))
    with pytest.raises(ValueError):
        required_T(MM_A, 0.5, 2, calibration=str(path))


@given(st.sampled_from(KINDS), st.floats(0.01, 1), st.floats(1.01, 4))
def test_required_T_nonincreasing_in_theta(tag, theta, factor):
    gamma = 0.05
    assert required_T(tag, theta * factor, 3, gamma) <= required_T(tag, theta, 3, gamma)


def test_sample_formula_needs_gamma():
    with pytest.raises(ValueError):
        sample_formula(KNOWN_M, 0.1, 2)
    with pytest.raises(ValueError):
        required_T("NOPE", 0.1, 2)


def test_epsilon_to_theta():
    assert epsilon_to_theta(MM_A, 0.5, 2) == pytest.approx(0.5)
    assert epsilon_to_theta(UNKNOWN_Z, 0.5, 4) == pytest.approx(0.25)
    assert epsilon_to_theta(KNOWN_M, 0.1, 3) == pytest.approx(0.01 / 1.01)
    assert epsilon_to_theta(CLASSICAL_M, 0.1, 3) == pytest.approx(0.01 / 1.01)
    with pytest.raises(ValueError):
        epsilon_to_theta(MM_A, 0, 2)


@given(st.integers(2, 20), st.floats(0.01, 0.9), st.integers(0, 2 ** 32))
def test_classical_epsilon_route_certifies_tv(d, eps, seed):
    # any p with TV > eps has squared Hellinger above 1.01 theta
    from noniid.distances import classical_divergences
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(d)), rng.dirichlet(np.ones(d))
    c = classical_divergences(p, q)
    if c.tv > eps:
        assert c.hellinger_sq >= 1.01 * epsilon_to_theta(CLASSICAL_M, eps, d) - 1e-12


def test_run_trial_deterministic_and_classical_route():
    ens = ProductEnsemble.iid(maximally_mixed(2), 6)
    rule = ChebyshevRule(0.25)
    a = run_trial(ObservableKind(MM_A), ens, rule, 17)
    assert a == run_trial(ObservableKind(MM_A), ens, rule, 17)
    assert a.T_used == 6 and a.kind == MM_A
    q = np.full(3, 1 / 3)
    dec = run_trial(ObservableKind(CLASSICAL_M, q), np.repeat(q[None], 5, axis=0), rule, 2)
    assert dec.verdict in (CLOSE, FAR) and dec.T_used == 5
    with pytest.raises(ValueError):
        prepare_trial(ObservableKind(UNKNOWN_Z), ens, rule)
