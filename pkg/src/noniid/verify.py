"""Randomized invariant suites behind the `verify` command.

Each suite draws random instances from a master seed, evaluates named
checks of the form lhs <= rhs (equalities enter as |a - b| <= 0) and tallies
violations.  ``mutate`` names one check whose right-hand side is
deliberately tightened, so the suites can be shown to catch a broken
inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distances import chi2_upper, quantum_divergences
from .efronstein import ESContext, acts_only_on, es_decompose, local_variance, marginalize, mask_to_set
from .matcore import TensorSpace
from .observables import (CLASSICAL_M, KINDS, KNOWN_M, MM_A, UNKNOWN_Z, InequalityCheck,
                          ObservableKind, concavity_deficit_check, dense_moments, exact_moments,
                          misc_inequalities_check)
from .seeding import rng_for
from .states import ProductEnsemble, depolarize, random_hermitian, random_state, random_unitary

SUITES = ("efron-stein", "distances", "observables")
MOMENT_RTOL = 1e-9


def _mutated(check: InequalityCheck) -> InequalityCheck:
    return InequalityCheck(check.name, check.lhs, 0.5 * check.rhs - 1e-6)


@dataclass
class Tally:
    count: int = 0
    violations: int = 0
    worst_excess: float = -math.inf
    example: str = ""


@dataclass
class SuiteResult:
    suite: str
    instances: int = 0
    checks: dict[str, Tally] = field(default_factory=dict)
    mutate: str | None = None

    def add(self, check: InequalityCheck, where: str = "") -> None:
        if self.mutate == check.name:
            check = _mutated(check)
        t = self.checks.setdefault(check.name, Tally())
        t.count += 1
        excess = check.lhs - check.rhs
        if excess > t.worst_excess:
            t.worst_excess = excess
        if not check.holds:
            t.violations += 1
            if not t.example:
                t.example = where

    @property
    def passed(self) -> bool:
        return all(t.violations == 0 for t in self.checks.values())

    def rows(self) -> list[dict]:
        return [{"suite": self.suite, "check": name, "count": t.count, "violations": t.violations,
                 "worst_excess": t.worst_excess, "example": t.example}
                for name, t in self.checks.items()]


def _eq(name: str, a, b) -> InequalityCheck:
    """|a - b| <= 0 up to the check tolerance, with matrices compared entry-wise relative to scale."""
    a, b = np.asarray(a), np.asarray(b)
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))
    return InequalityCheck(name, float(np.max(np.abs(a - b), initial=0.0)) / scale, 0.0)


# --- Efron-Stein ------------------------------------------------------------

def random_es_instance(rng, max_factors: int = 4, max_dim: int = 3):
    n = int(rng.integers(1, max_factors + 1))
    dims = tuple(int(x) for x in rng.integers(1, max_dim + 1, size=n))
    if max(dims) == 1:
        dims = (2,) + dims[1:]
    modes = ["ginibre_mixed", "haar_pure"]
    states = [random_state(rng, d, modes[int(rng.integers(2))]) if d > 1 else np.ones((1, 1), complex)
              for d in dims]
    ctx = ESContext(TensorSpace(dims), tuple(states))
    X = random_hermitian(rng, ctx.space.total_dim)
    return ctx, X


def efron_stein_checks(ctx: ESContext, X: np.ndarray):
    """All decomposition and inequality checks for one (product state, observable) instance."""
    dec = es_decompose(X, ctx)
    full = ctx.full_mask
    comps = dec.components
    yield _eq("es-reconstruct", dec.reconstruct(), X)
    rho = ctx.product_state()
    left = {J: rho @ C.conj().T for J, C in comps.items()}
    norms = {J: float(np.einsum("ij,ji->", left[J], C).real) for J, C in comps.items()}
    scale = max(1.0, float(np.einsum("ij,ji->", rho @ X, X).real))
    worst = 0.0
    for I in comps:
        for J in comps:
            if I < J:
                worst = max(worst, abs(np.einsum("ij,ji->", left[I], comps[J])))
    yield InequalityCheck("es-orthogonal", worst / scale, 0.0)
    for J, C in comps.items():
        members = mask_to_set(J, ctx.n)
        yield InequalityCheck("es-locality", 0.0 if acts_only_on(C, ctx.space, members) else 1.0, 0.0)
        for j in members:
            yield _eq("es-annihilate", marginalize(C, ctx, [j]), np.zeros_like(C))
        partial = sum(comps[I] for I in comps if I & ~J == 0)
        yield _eq("es-partial-sum", partial, marginalize(X, ctx, full & ~J))
    second = float(np.einsum("ij,ji->", rho @ X, X).real)
    mean = float(np.trace(rho @ X).real)
    yield _eq("es-parseval", sum(norms.values()), second)
    yield _eq("es-variance", sum(v for J, v in norms.items() if J), second - mean ** 2)
    total_local = 0.0
    for i in range(ctx.n):
        lv = local_variance(X, ctx, i)
        total_local += lv
        yield _eq("es-local-variance", lv, sum(v for J, v in norms.items() if J >> i & 1))
    yield InequalityCheck("qes", second - mean ** 2, total_local)


def efron_stein_suite(count: int = 100, seed: int = 0, mutate: str | None = None) -> SuiteResult:
    res = SuiteResult("efron-stein", mutate=mutate)
    for k in range(count):
        ctx, X = random_es_instance(rng_for(seed, k))
        for check in efron_stein_checks(ctx, X):
            res.add(check, f"instance {k}")
        res.instances += 1
    return res


# --- distances --------------------------------------------------------------

def random_pair(rng, max_dim: int = 6):
    d = int(rng.integers(2, max_dim + 1))
    modes = ["ginibre_mixed", "haar_pure", "classical_dirichlet"]
    rho = random_state(rng, d, modes[int(rng.integers(3))])
    sigma = random_state(rng, d, modes[int(rng.integers(3))])
    if rng.uniform() < 0.5:
        sigma = depolarize(sigma, 10 ** rng.uniform(-4, 0))
    if rng.uniform() < 0.2:
        rho = depolarize(sigma, rng.uniform()) if rng.uniform() < 0.5 else sigma.copy()
    return rho, sigma


def distance_checks(rho, sigma, rng):
    d = rho.shape[0]
    rep = quantum_divergences(rho, sigma)
    dtr, hs, F = rep.trace_distance, rep.hs_sq, rep.fidelity
    yield InequalityCheck("cs-lower", hs / 4, dtr ** 2)
    yield InequalityCheck("cs-upper", dtr ** 2, d * hs / 4)
    yield InequalityCheck("fg-lower", rep.bures_sq / 2, dtr)
    yield InequalityCheck("fg-upper", dtr ** 2, rep.infidelity)
    yield InequalityCheck("infid-bures-lower", rep.infidelity, rep.bures_sq)
    yield InequalityCheck("infid-bures-upper", rep.bures_sq, 2 * rep.infidelity)
    yield InequalityCheck("bures-chi2", rep.bures_sq, rep.bures_chi2)
    yield InequalityCheck("chi2-upper", rep.bures_chi2, chi2_upper(rho, sigma))
    yield InequalityCheck("fidelity-range", abs(F - min(max(F, 0.0), 1.0)), 0.0)
    U = random_unitary(rng, d)
    rot = quantum_divergences(U @ rho @ U.conj().T, U @ sigma @ U.conj().T)
    for name in ("trace_distance", "hs_sq", "fidelity", "bures_chi2"):
        a, b = getattr(rep, name), getattr(rot, name)
        if math.isinf(a) or math.isinf(b):
            yield InequalityCheck("unitary-invariance", 0.0 if a == b else 1.0, 0.0)
        else:
            yield InequalityCheck("unitary-invariance", abs(a - b) / max(1.0, abs(a)), 0.0)
    gamma = float(np.linalg.eigvalsh(sigma)[0])
    if gamma > 1e-12:
        T = int(rng.integers(1, 6))
        ens = ProductEnsemble(np.stack([rho] + [random_state(rng, d) for _ in range(T - 1)]))
        lhs, rhs = concavity_deficit_check(ens, sigma, strict=False)
        yield InequalityCheck("concavity", lhs, rhs)


def distances_suite(count: int = 1000, seed: int = 0, mutate: str | None = None,
                    max_dim: int = 6) -> SuiteResult:
    res = SuiteResult("distances", mutate=mutate)
    for k in range(count):
        rng = rng_for(seed, k)
        rho, sigma = random_pair(rng, max_dim)
        for check in distance_checks(rho, sigma, rng):
            res.add(check, f"pair {k}")
        res.instances += 1
    return res


# --- observables ------------------------------------------------------------

def _small_instance(tag: str, rng):
    """Random instance whose dense observable stays at dimension <= 256."""
    d = int(rng.integers(2, 4))
    n_max = {2: 8, 3: 5}[d]
    if tag == UNKNOWN_Z:
        n_max //= 2
    T = int(rng.integers(1, n_max + 1))
    if tag == CLASSICAL_M:
        T = min(T, n_max // 2) or 1
        q = rng.dirichlet(np.ones(d)) * 0.9 + 0.1 / d
        return ObservableKind(CLASSICAL_M, q), rng.dirichlet(np.ones(d), size=T)
    ens = ProductEnsemble(np.stack([random_state(rng, d) for _ in range(T)]))
    if tag == MM_A:
        return ObservableKind(MM_A), ens
    if tag == KNOWN_M:
        return ObservableKind(KNOWN_M, depolarize(random_state(rng, d), rng.uniform(0.05, 1))), ens
    return ObservableKind(UNKNOWN_Z), ens, ProductEnsemble(np.stack([random_state(rng, d) for _ in range(T)]))


def _rel(a: float, b: float) -> float:
    """Relative difference, absolute below 1e-6 where a relative measure means nothing."""
    return abs(a - b) / max(abs(b), 1e-6)


def moment_checks(inst):
    kind = inst[0]
    rep = exact_moments(kind, *inst[1:])
    m1, var = dense_moments(kind, *inst[1:])
    yield InequalityCheck(f"moments-mean-{kind.tag}", _rel(rep.mean_exact, m1), 0.0)
    yield InequalityCheck(f"moments-var-{kind.tag}", _rel(rep.var_exact, var), 0.0)
    yield InequalityCheck(f"bias-{kind.tag}", abs(rep.bias), rep.paper_bias_bound)


def observables_suite(count: int = 200, seed: int = 0, mutate: str | None = None) -> SuiteResult:
    res = SuiteResult("observables", mutate=mutate)
    for k in range(count):
        rng = rng_for(seed, k)
        rho, sigma = random_pair(rng, 4)
        sigma = depolarize(sigma, rng.uniform(0.01, 1))
        S = random_hermitian(rng, rho.shape[0])
        for check in misc_inequalities_check(rho, sigma, S, strict=False):
            res.add(check, f"pair {k}")
        for tag in KINDS:
            for check in moment_checks(_small_instance(tag, rng)):
                res.add(check, f"instance {k}")
        res.instances += 1
    return res


def run_suites(names, count: int | None = None, seed: int = 0, mutate: str | None = None) -> list[SuiteResult]:
    runners = {"efron-stein": efron_stein_suite, "distances": distances_suite,
               "observables": observables_suite}
    out = []
    for name in names:
        if name not in runners:
            raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
        kw = {"seed": seed, "mutate": mutate}
        if count is not None:
            kw["count"] = count
        out.append(runners[name](**kw))
    return out


def check_names() -> set[str]:
    """Names of every check the suites can report, for validating ``mutate``."""
    names = set()
    for res in run_suites(SUITES, count=3, seed=1):
        names.update(res.checks)
    return names
