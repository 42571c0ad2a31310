"""Acceptance criteria 1-9, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

import math
import time

import numpy as np
import pytest
from click.testing import CliRunner

from noniid import calibration as cb
from noniid.cli import main
from noniid.observables import (CLASSICAL_M, KINDS, KNOWN_M, MM_A, UNKNOWN_Z, ObservableKind, dense_moments,
                                exact_moments)
from noniid.seeding import rng_for
from noniid.simulate import estimate_success
from noniid.states import (ProductEnsemble, depolarize, distribution_at_chi2, maximally_mixed,
                           perturb_ensemble, random_state, split_distribution)
from noniid.testers import ChebyshevRule, load_calibration, required_T
from noniid.verify import distances_suite, efron_stein_suite

ACCEPTANCE_SEED = 8128


def report(capsys, number: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")


def _failures(result):
    return {r["check"]: r["violations"] for r in result.rows() if r["violations"]}


# 1 -------------------------------------------------------------------------

def test_criterion_1_efron_stein_suite(capsys):
    start = time.perf_counter()
    res = efron_stein_suite(count=500, seed=ACCEPTANCE_SEED)
    elapsed = time.perf_counter() - start
    qes = res.checks["qes"]
    ok = res.passed and res.instances >= 500 and elapsed < 120
    report(capsys, 1, ok, f"{res.instances} instances, failures {_failures(res)}, "
                          f"worst QES excess {qes.worst_excess:.2e}, {elapsed:.1f}s")
    assert ok


# 2 -------------------------------------------------------------------------

DENSE_LIMIT = 4096


def _dense_instance(tag: str, rng):
    """Random instance with dense dimension <= 4096, spread over the feasible (d, T)."""
    d = int(rng.integers(2, 5))
    n_max = int(math.floor(math.log(DENSE_LIMIT) / math.log(d) + 1e-9))
    per_source = 2 if tag in (UNKNOWN_Z, CLASSICAL_M) else 1
    T = int(rng.integers(1, n_max // per_source + 1))
    modes = ["ginibre_mixed", "haar_pure"]
    if tag == CLASSICAL_M:
        q = rng.dirichlet(np.ones(d)) * 0.8 + 0.2 / d
        return ObservableKind(CLASSICAL_M, q / q.sum()), rng.dirichlet(np.ones(d), size=T)
    ens = ProductEnsemble(np.stack([random_state(rng, d, modes[int(rng.integers(2))]) for _ in range(T)]))
    if tag == MM_A:
        return ObservableKind(MM_A), ens
    if tag == KNOWN_M:
        return ObservableKind(KNOWN_M, depolarize(random_state(rng, d), rng.uniform(0.05, 1))), ens
    second = ProductEnsemble(np.stack([random_state(rng, d) for _ in range(T)]))
    return ObservableKind(UNKNOWN_Z), ens, second


def _rel(a: float, b: float) -> float:
    # variances that vanish exactly are compared at the round-off scale
    return abs(a - b) / max(abs(b), 1e-6)


def test_criterion_2_formula_matches_dense(capsys):
    worst = {}
    counts = {}
    for tag in KINDS:
        errs = []
        for i in range(200):
            inst = _dense_instance(tag, rng_for(ACCEPTANCE_SEED + 2, i * 4 + KINDS.index(tag)))
            rep = exact_moments(inst[0], *inst[1:])
            m1, var = dense_moments(inst[0], *inst[1:])
            errs.append(max(_rel(rep.mean_exact, m1), _rel(rep.var_exact, var)))
        worst[tag] = max(errs)
        counts[tag] = len(errs)
    ok = all(v <= 1e-9 for v in worst.values()) and all(c >= 200 for c in counts.values())
    report(capsys, 2, ok, "worst relative error " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


# 3 -------------------------------------------------------------------------

BIAS_COUNT = 10_000


def test_criterion_3_bias_bounds(capsys):
    violations = {}
    for tag in KINDS:
        bad = 0
        for i in range(BIAS_COUNT):
            inst = cb.random_instance(tag, i, master=ACCEPTANCE_SEED + 3)
            rep = exact_moments(inst[0], *inst[1:])
            if abs(rep.bias) > rep.paper_bias_bound + 1e-9:
                bad += 1
        violations[tag] = bad
    ok = not any(violations.values())
    report(capsys, 3, ok, f"{BIAS_COUNT} instances per kind, violations {violations}")
    assert ok


# 4 -------------------------------------------------------------------------

def test_criterion_4_variance_constants_on_heldout_suite(capsys):
    cal = load_calibration()
    count = cal["variance_sweep"]["count"]
    violations, worst = {}, {}
    for tag in KINDS:
        K = cal["variance_constants"][tag]
        bad, ratio = 0, 0.0
        for inst in cb.instances(tag, count, heldout=True):
            rep = exact_moments(inst[0], *inst[1:])
            ratio = max(ratio, cb.variance_ratio(rep))
            if rep.var_exact > rep.var_bound(K) * (1 + 1e-9) + 1e-15:
                bad += 1
        violations[tag], worst[tag] = bad, ratio / K
    ok = not any(violations.values())
    report(capsys, 4, ok, f"{count} held-out instances per kind, violations {violations}, "
                          "largest Var/bound " + ", ".join(f"{k} {v:.2f}" for k, v in worst.items()))
    assert ok


# 5 -------------------------------------------------------------------------

def test_criterion_5_divergence_hierarchy(capsys):
    res = distances_suite(count=10_000, seed=ACCEPTANCE_SEED + 5, max_dim=6)
    ok = res.passed and res.instances >= 10_000
    report(capsys, 5, ok, f"{res.instances} pairs, d <= 6, failures {_failures(res)}")
    assert ok


# 6 -------------------------------------------------------------------------

def _alternating(T: int) -> ProductEnsemble:
    zero, one = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    states = [zero if t % 2 == 0 else one for t in range(T - T % 2)]
    if T % 2:
        states.append(maximally_mixed(2))
    return ProductEnsemble(np.stack(states))


def test_criterion_6_quantum_power(capsys):
    start = time.perf_counter()
    theta, trials = 0.25, 400
    kind = ObservableKind(MM_A)
    T = required_T(kind, theta, 2)
    rule = ChebyshevRule(theta)
    base = maximally_mixed(2)
    nulls = {
        "iid I/2": ProductEnsemble.iid(base, T),
        "alternating |0>,|1>": _alternating(T),
        "heterogeneous coherent": perturb_ensemble(base, 0.0, T, "coherent", ACCEPTANCE_SEED),
        "heterogeneous pure_mix": perturb_ensemble(base, 0.0, T, "pure_mix", ACCEPTANCE_SEED + 1),
    }
    fars = {}
    for f in cb.FAR_FACTORS:
        mu = f * theta
        x = math.sqrt(mu / 2)
        fars[f"iid mu={mu}"] = ProductEnsemble.iid(np.diag([0.5 + x, 0.5 - x]), T)
        if mu < 0.5:
            fars[f"heterogeneous mu={mu}"] = perturb_ensemble(base, mu, T, "coherent", ACCEPTANCE_SEED + 2,
                                                              measure="hs")
    null_rates, far_rates = {}, {}
    for (nname, null), (fname, far) in zip(nulls.items(), list(fars.items()) * 2):
        a, b = estimate_success(kind, null, far, rule, trials, ACCEPTANCE_SEED + 6)
        null_rates[nname] = (a.far_rate, a.wilson_high)
        far_rates[fname] = (b.far_rate, b.wilson_low)
    elapsed = time.perf_counter() - start
    ok = (all(r <= 0.02 for r, _ in null_rates.values()) and all(r >= 0.95 for r, _ in far_rates.values())
          and elapsed < 600)
    fmt = lambda d: ", ".join(f"{k} {r:.3f} (CI {c:.3f})" for k, (r, c) in d.items())
    report(capsys, 6, ok, f"T={T}, {trials} trials each; null rejection {fmt(null_rates)}; "
                          f"far rejection {fmt(far_rates)}; {elapsed:.1f}s")
    assert ok


# 7 -------------------------------------------------------------------------

def test_criterion_7_classical_power(capsys):
    start = time.perf_counter()
    d, theta, trials = 200, 0.5, 1000
    q = cb._gamma_q(d)
    kind = ObservableKind(CLASSICAL_M, q)
    assert kind.gamma == pytest.approx(1 / (2 * d))
    T = required_T(kind, theta, d)
    rule = ChebyshevRule(theta)
    nulls = {"iid q": np.repeat(q[None], T, axis=0), "split q": split_distribution(q, T, ACCEPTANCE_SEED)}
    fars = {}
    for f in cb.FAR_FACTORS:
        p = distribution_at_chi2(q, f * theta, ACCEPTANCE_SEED + 1)
        fars[f"iid mu={f * theta}"] = np.repeat(p[None], T, axis=0)
        fars[f"split mu={f * theta}"] = split_distribution(p, T, ACCEPTANCE_SEED + 2)
    null_rates, far_rates = {}, {}
    far_items = list(fars.items())
    for i, (nname, null) in enumerate(nulls.items()):
        for fname, far in far_items[2 * i: 2 * i + 2]:
            a, b = estimate_success(kind, null, far, rule, trials, ACCEPTANCE_SEED + 7 + i)
            null_rates[nname] = (a.far_rate, a.wilson_high)
            far_rates[fname] = (b.far_rate, b.wilson_low)
    elapsed = time.perf_counter() - start
    ok = (all(r <= 0.02 for r, _ in null_rates.values()) and all(r >= 0.95 for r, _ in far_rates.values())
          and elapsed < 300)
    fmt = lambda d: ", ".join(f"{k} {r:.3f} (CI {c:.3f})" for k, (r, c) in d.items())
    report(capsys, 7, ok, f"T={T}, {trials} trials each; null rejection {fmt(null_rates)}; "
                          f"far rejection {fmt(far_rates)}; {elapsed:.1f}s")
    assert ok


# 8 -------------------------------------------------------------------------

def test_criterion_8_variance_scaling(capsys):
    # fixtures far from the null, so mu/T dominates the 1/T^2 terms
    rng = rng_for(ACCEPTANCE_SEED, 8)
    rho = np.diag([0.9, 0.1]).astype(complex)
    ratios = {}
    ens = lambda T: ProductEnsemble.iid(rho, T)
    var = lambda T: exact_moments(ObservableKind(MM_A), ens(T)).var_exact
    ratios["A iid"] = var(200) / var(400)
    het = lambda T: perturb_ensemble(maximally_mixed(2), 0.3, T, "coherent", 5, measure="hs")
    var = lambda T: exact_moments(ObservableKind(MM_A), het(T)).var_exact
    ratios["A heterogeneous"] = var(200) / var(400)
    r1, r2 = random_state(rng, 2, "haar_pure"), depolarize(random_state(rng, 2, "haar_pure"), 0.2)
    var = lambda T: exact_moments(ObservableKind(UNKNOWN_Z), ProductEnsemble.iid(r1, T),
                                  ProductEnsemble.iid(r2, T)).var_exact
    ratios["Z iid"] = var(200) / var(400)
    ok = all(1.7 <= r <= 2.3 for r in ratios.values())
    report(capsys, 8, ok, "Var(T=200)/Var(T=400): " + ", ".join(f"{k} {v:.3f}" for k, v in ratios.items()))
    assert ok


# 9 -------------------------------------------------------------------------

def test_criterion_9_verify_gate(capsys):
    runner = CliRunner()
    clean = runner.invoke(main, ["verify"])
    mutated = {name: runner.invoke(main, ["verify", "--mutate", name]).exit_code
               for name in ("qes", "fg-lower", "misc-delta-cubed")}
    ok = clean.exit_code == 0 and all(code != 0 for code in mutated.values())
    report(capsys, 9, ok, f"clean exit {clean.exit_code}, mutated exits {mutated}")
    assert ok
