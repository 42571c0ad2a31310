"""Calibration of the constants the asymptotic statements leave open.

Two kinds of constant are fitted once and frozen in ``data/calibration.json``:

* sample constants C_kind in T = ceil(C_kind f(theta, d, gamma)), found by
  bisection so that the worst error probability over a fixed adversarial
  fixture family is at most ``TARGET_ERROR``;
* variance constants K_kind in Var <= K (sum of bound terms), set to
  ``K_SAFETY`` times the largest ratio seen on a calibration sweep of random
  instances.  A disjoint seed range is kept for held-out checks.

Error probabilities are evaluated per kind: exactly from the total-spin
distribution for the qubit A statistic, by Monte Carlo (Wilson upper limit)
for the classical statistic, and by the one-sided Chebyshev (Cantelli) bound
from exact moments for M and Z, whose dense outcome distributions are out of
reach at the required T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from . import __version__
from .observables import (CLASSICAL_M, KNOWN_M, MM_A, UNKNOWN_Z, ObservableKind, exact_moments)
from .seeding import rng_for
from .simulate import build_model, count_far, trial_seeds, wilson_interval
from .states import (ProductEnsemble, depolarize, distribution_at_chi2, maximally_mixed,
                     perturb_ensemble, pure_state, random_state, split_distribution)
from .testers import ChebyshevRule, prepare_trial, sample_formula

TARGET_ERROR = 0.01
K_SAFETY = 2.0
FAR_FACTORS = (1.5, 2.0)
CALIBRATION_SEED = 20240601
HELDOUT_OFFSET = 1 << 32


@dataclass
class Fixture:
    """One test instance, rebuilt for each T; ``far`` says which verdict is correct."""

    name: str
    kind: ObservableKind
    theta: float
    far: bool
    build: Callable[[int], tuple]


def _gamma_q(d: int) -> np.ndarray:
    """Half the symbols at 1/(2d), half at 3/(2d): gamma = 1/(2d)."""
    q = np.full(d, 3 / (2 * d))
    q[: d // 2] = 1 / (2 * d)
    return q / q.sum()


def _qubit_state(mu: float) -> np.ndarray:
    """Diagonal qubit state at squared HS distance mu from I/2."""
    x = math.sqrt(mu / 2)
    return np.diag([0.5 + x, 0.5 - x]).astype(complex)


def _alternating(T: int) -> ProductEnsemble:
    """|0><0|, |1><1|, ... averaging to I/2 (odd T ends with I/2)."""
    states = [pure_state([1, 0]) if t % 2 == 0 else pure_state([0, 1]) for t in range(T - T % 2)]
    if T % 2:
        states.append(maximally_mixed(2))
    return ProductEnsemble(np.stack(states))


def mm_fixtures(thetas=(0.25,)) -> list[Fixture]:
    kind = ObservableKind(MM_A)
    out = []
    for theta in thetas:
        out.append(Fixture(f"A iid I/2 theta={theta}", kind, theta, False,
                           lambda T: (ProductEnsemble.iid(maximally_mixed(2), T),)))
        out.append(Fixture(f"A alternating |0>,|1> theta={theta}", kind, theta, False,
                           lambda T: (_alternating(T),)))
        out.append(Fixture(f"A heterogeneous null theta={theta}", kind, theta, False,
                           lambda T: (perturb_ensemble(maximally_mixed(2), 0.0, T, "coherent", 11),)))
        for f in FAR_FACTORS:
            mu = f * theta
            if mu > 0.5:
                continue
            out.append(Fixture(f"A iid far mu={mu} theta={theta}", kind, theta, True,
                               lambda T, mu=mu: (ProductEnsemble.iid(_qubit_state(mu), T),)))
            if mu < 0.5:
                out.append(Fixture(f"A heterogeneous far mu={mu} theta={theta}", kind, theta, True,
                                   lambda T, mu=mu: (perturb_ensemble(maximally_mixed(2), mu, T, "coherent",
                                                                      12, measure="hs"),)))
    return out


def m_fixtures(thetas=(0.25, 0.5)) -> list[Fixture]:
    out = []
    sigmas = {
        "uniform d=2": maximally_mixed(2),
        "skewed d=2": np.diag([0.1, 0.9]).astype(complex),
        "skewed d=3": np.diag([0.1, 0.3, 0.6]).astype(complex),
    }
    for theta in thetas:
        for label, sigma in sigmas.items():
            kind = ObservableKind(KNOWN_M, sigma)
            out.append(Fixture(f"M iid null {label} theta={theta}", kind, theta, False,
                               lambda T, s=sigma: (ProductEnsemble.iid(s, T),)))
            out.append(Fixture(f"M heterogeneous null {label} theta={theta}", kind, theta, False,
                               lambda T, s=sigma: (perturb_ensemble(s, 0.0, T, "coherent", 21),)))
            for f in FAR_FACTORS:
                mu = f * theta
                for style in ("coherent", "pure_mix"):
                    out.append(Fixture(f"M far {style} mu={mu} {label} theta={theta}", kind, theta, True,
                                       lambda T, s=sigma, mu=mu, st=style: (
                                           perturb_ensemble(s, mu, T, st, 22, measure="bures_chi2"),)))
    return out


def _reachable(sigma: np.ndarray, mu: float) -> bool:
    """Whether a pure_mix ensemble around sigma can sit at HS distance mu."""
    try:
        perturb_ensemble(sigma, mu, 4, "pure_mix", 0, measure="hs")
    except ValueError:
        return False
    return True


def z_fixtures(thetas=(0.25, 0.5)) -> list[Fixture]:
    kind = ObservableKind(UNKNOWN_Z)
    out = []
    rng = rng_for(CALIBRATION_SEED, 3)
    bases = {"I/2": maximally_mixed(2), "random d=3": depolarize(random_state(rng, 3), 0.3)}
    for theta in thetas:
        for label, sigma in bases.items():
            out.append(Fixture(f"Z iid null {label} theta={theta}", kind, theta, False,
                               lambda T, s=sigma: (ProductEnsemble.iid(s, T), ProductEnsemble.iid(s, T))))
            out.append(Fixture(f"Z heterogeneous null {label} theta={theta}", kind, theta, False,
                               lambda T, s=sigma: (perturb_ensemble(s, 0.0, T, "coherent", 31),
                                                   perturb_ensemble(s, 0.0, T, "pure_mix", 32))))
            for f in FAR_FACTORS:
                mu = f * theta
                if not _reachable(sigma, mu):
                    continue
                out.append(Fixture(f"Z far mu={mu} {label} theta={theta}", kind, theta, True,
                                   lambda T, s=sigma, mu=mu: (
                                       perturb_ensemble(s, 0.0, T, "coherent", 33),
                                       perturb_ensemble(s, mu, T, "pure_mix", 34, measure="hs"))))
    return out


def classical_fixtures(d: int = 200, thetas=(0.5,)) -> list[Fixture]:
    q = _gamma_q(d)
    kind = ObservableKind(CLASSICAL_M, q)
    out = []
    for theta in thetas:
        out.append(Fixture(f"classical iid null d={d} theta={theta}", kind, theta, False,
                           lambda T: (np.repeat(q[None], T, axis=0),)))
        out.append(Fixture(f"classical heterogeneous null d={d} theta={theta}", kind, theta, False,
                           lambda T: (split_distribution(q, T, 41),)))
        for f in FAR_FACTORS:
            mu = f * theta
            p = distribution_at_chi2(q, mu, 42)
            out.append(Fixture(f"classical iid far mu={mu} d={d} theta={theta}", kind, theta, True,
                               lambda T, p=p: (np.repeat(p[None], T, axis=0),)))
            out.append(Fixture(f"classical heterogeneous far mu={mu} d={d} theta={theta}", kind, theta, True,
                               lambda T, p=p: (split_distribution(p, T, 43),)))
    return out


FIXTURES = {MM_A: mm_fixtures, KNOWN_M: m_fixtures, UNKNOWN_Z: z_fixtures, CLASSICAL_M: classical_fixtures}


def _cantelli(mean: float, var: float, threshold: float, far: bool) -> float:
    gap = mean - threshold if far else threshold - mean
    if gap <= 0:
        return 1.0
    return var / (var + gap * gap)


def fixture_error(fx: Fixture, T: int, rule: ChebyshevRule, trials: int = 4000,
                  seed: int = CALIBRATION_SEED) -> float:
    """Probability of the wrong verdict on ``fx`` at sample size T (or an upper bound on it)."""
    inst = fx.build(T)
    thr = rule.threshold
    tag = fx.kind.tag
    if tag == MM_A:
        model = build_model(fx.kind, inst[0])
        tail = model.tail_at_least(thr)
        return 1 - tail if fx.far else tail
    if tag == CLASSICAL_M:
        far = count_far(prepare_trial(fx.kind, inst[0], rule), trial_seeds(seed, trials))
        wrong = trials - far if fx.far else far
        return wilson_interval(wrong, trials)[1]
    rep = exact_moments(fx.kind, *inst)
    return _cantelli(rep.mean_exact, rep.var_exact, thr, fx.far)


def _formula(fx: Fixture) -> float:
    d = fx.kind.d or 2
    return sample_formula(fx.kind.tag, fx.theta, d, fx.kind.gamma)


def worst_error(fixtures: list[Fixture], C: float, **kw) -> tuple[float, str]:
    """Worst error over the fixtures at T = T(C) and T(C) + 1.

    Checking two consecutive sizes keeps parity effects of the discrete
    outcome distributions from passing a constant by luck.
    """
    worst, name = -1.0, ""
    for fx in fixtures:
        T0 = max(1, math.ceil(C * _formula(fx) - 1e-9))
        for T in (T0, T0 + 1):
            err = fixture_error(fx, T, ChebyshevRule(fx.theta), **kw)
            if err > worst:
                worst, name = err, f"{fx.name}, T={T}"
    return worst, name


def calibrate_sample_constant(fixtures: list[Fixture], start: float = 1.0, rel_tol: float = 0.01,
                              log: Callable[[str], None] | None = None, **kw) -> float:
    """Smallest C (to rel_tol) with worst fixture error <= TARGET_ERROR.

    C is doubled from ``start`` until the target is met, then bisected in log C.
    """
    def ok(C: float) -> bool:
        err, name = worst_error(fixtures, C, **kw)
        if log:
            log(f"C = {C:.4g}: worst error {err:.4g} ({name})")
        return err <= TARGET_ERROR

    lo, hi = 0.0, start
    while not ok(hi):
        lo, hi = hi, 2 * hi
    if lo == 0.0:
        lo = hi / 2
        while ok(lo):
            lo, hi = lo / 2, lo
    while hi / lo > 1 + rel_tol:
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# --- variance constants ----------------------------------------------------

def _log_uniform_int(rng, lo: int, hi: int) -> int:
    return int(round(math.exp(rng.uniform(math.log(lo), math.log(hi)))))


def _random_quantum_ensemble(rng, d: int, T: int, centre: np.ndarray, seed: int) -> ProductEnsemble:
    style = rng.choice(["iid", "independent", "heterogeneous", "pure_mix"])
    if style == "iid":
        return ProductEnsemble.iid(centre, T)
    if style == "independent":
        mode = rng.choice(["haar_pure", "ginibre_mixed"])
        return ProductEnsemble(np.stack([random_state(rng, d, mode) for _ in range(T)]))
    target = rng.uniform(0, 0.5) * rng.choice([0.0, 1.0])
    try:
        return perturb_ensemble(centre, target, T, "coherent" if style == "heterogeneous" else "pure_mix",
                                seed, spread=rng.uniform(0.1, 1.0))
    except ValueError:
        return ProductEnsemble.iid(centre, T)


def random_instance(tag: str, index: int, master: int = CALIBRATION_SEED, max_T: int = 80):
    """An adversarially varied instance (kind, ensemble[, second]) for sweeps of the exact moments."""
    rng = rng_for(master, index)
    T = _log_uniform_int(rng, 1, max_T)
    if tag == CLASSICAL_M:
        d = _log_uniform_int(rng, 2, 60)
        q = rng.dirichlet(np.full(d, rng.choice([0.3, 1.0, 10.0])))
        q = (1 - (lam := 10 ** rng.uniform(-3, 0))) * q + lam / d
        q /= q.sum()
        style = rng.choice(["iid q", "iid p", "independent", "split"])
        if style == "iid q":
            probs = np.repeat(q[None], T, axis=0)
        elif style == "iid p":
            probs = np.repeat(rng.dirichlet(np.ones(d))[None], T, axis=0)
        elif style == "independent":
            probs = rng.dirichlet(np.full(d, rng.choice([0.1, 1.0])), size=T)
        else:
            centre = (1 - (s := rng.uniform())) * q + s * rng.dirichlet(np.ones(d))
            probs = split_distribution(centre / centre.sum(), T, int(rng.integers(1 << 31)))
        return ObservableKind(CLASSICAL_M, q), probs
    d = int(rng.integers(2, 6))
    centre = depolarize(random_state(rng, d, rng.choice(["haar_pure", "ginibre_mixed"])), rng.uniform(0, 1))
    sub = int(rng.integers(1 << 31))
    if tag == MM_A:
        if rng.uniform() < 0.3:
            centre = maximally_mixed(d)
        return ObservableKind(MM_A), _random_quantum_ensemble(rng, d, T, centre, sub)
    if tag == KNOWN_M:
        sigma = depolarize(random_state(rng, d, "ginibre_mixed"), 10 ** rng.uniform(-3, 0))
        if rng.uniform() < 0.3:
            centre = sigma
        return ObservableKind(KNOWN_M, sigma), _random_quantum_ensemble(rng, d, T, centre, sub)
    other = centre if rng.uniform() < 0.4 else depolarize(random_state(rng, d, "haar_pure"), rng.uniform(0, 1))
    return (ObservableKind(UNKNOWN_Z), _random_quantum_ensemble(rng, d, T, centre, sub),
            _random_quantum_ensemble(rng, d, T, other, sub + 1))


def instances(tag: str, count: int, heldout: bool = False, **kw) -> Iterator[tuple]:
    offset = HELDOUT_OFFSET if heldout else 0
    for i in range(count):
        yield random_instance(tag, offset + i, **kw)


def variance_ratio(report) -> float:
    return report.var_exact / sum(report.paper_var_bound_terms.values())


def calibrate_variance_constant(tag: str, count: int = 2000) -> tuple[float, float]:
    """(K, largest observed ratio) with K = K_SAFETY times the largest ratio, 2 significant digits up."""
    worst = max(variance_ratio(exact_moments(inst[0], *inst[1:])) for inst in instances(tag, count))
    K = K_SAFETY * worst
    digits = 1 - int(math.floor(math.log10(K)))
    return math.ceil(K * 10 ** digits) / 10 ** digits, worst


def calibration_record(sample: dict, variance: dict, observed: dict, variance_count: int) -> dict:
    """The frozen calibration file's contents."""
    return {
        "version": __version__,
        "target_error": TARGET_ERROR,
        "far_factors": list(FAR_FACTORS),
        "sample_constants": sample,
        "variance_constants": variance,
        "variance_ratio_observed": observed,
        "variance_safety": K_SAFETY,
        "variance_sweep": {"count": variance_count, "master_seed": CALIBRATION_SEED,
                           "heldout_offset": HELDOUT_OFFSET},
    }


def run_calibration(variance_count: int = 2000, log: Callable[[str], None] | None = None) -> dict:
    log = log or (lambda msg: None)
    sample = {}
    for tag, make in FIXTURES.items():
        log(f"sample constant for {tag}")
        sample[tag] = round(calibrate_sample_constant(make(), log=log), 4)
    variance, observed = {}, {}
    for tag in FIXTURES:
        variance[tag], observed[tag] = calibrate_variance_constant(tag, variance_count)
        log(f"variance constant for {tag}: {variance[tag]} (largest ratio {observed[tag]:.4g})")
    return calibration_record(sample, variance, observed, variance_count)
