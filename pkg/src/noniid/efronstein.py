"""Quantum Efron-Stein machinery for product states.

For a product state rho_0 (x) ... (x) rho_{n-1} the marginalization map
``E_I`` replaces the factors in ``I`` by their expectation,

    E_I X = Tr_I[(rho_I (x) Id) X] (x) Id_I,

and ``D_i = Id - E_i``.  Components of the orthogonal decomposition are built
by inclusion-exclusion over these maps.  Subsets of factors are bitmasks;
bit ``k`` set means factor ``k`` is in the subset.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .matcore import TensorSpace, embed, partial_trace

MAX_FACTORS = 12
MAX_DOUBLED_DIM = 1 << 24
CHECK_TOL = 1e-9


class NumericalViolation(AssertionError):
    """An identity or inequality failed beyond its tolerance."""


@dataclass(frozen=True)
class ESContext:
    space: TensorSpace
    factor_states: tuple[np.ndarray, ...]

    def __post_init__(self):
        states = tuple(np.asarray(r, dtype=complex) for r in self.factor_states)
        if len(states) != self.space.n:
            raise ValueError(f"{len(states)} factor states for {self.space.n} factors")
        for k, (r, d) in enumerate(zip(states, self.space.dims)):
            if r.shape != (d, d):
                raise ValueError(f"factor state {k} has shape {r.shape}, expected ({d}, {d})")
        object.__setattr__(self, "factor_states", states)

    @classmethod
    def from_states(cls, states: Sequence[np.ndarray]) -> "ESContext":
        return cls(TensorSpace(tuple(np.shape(r)[0] for r in states)), tuple(states))

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    def product_state(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for r in self.factor_states:
            out = np.kron(out, r)
        return out

    def expect(self, X: np.ndarray) -> complex:
        return np.trace(self.product_state() @ X)

    def inner(self, Y: np.ndarray, Z: np.ndarray) -> complex:
        """<Y, Z>_rho = E_rho[Y^dagger Z]."""
        return np.trace(self.product_state() @ Y.conj().T @ Z)


@dataclass
class ESDecomposition:
    components: dict[int, np.ndarray] = field(default_factory=dict)
    n: int = 0

    def subset(self, mask: int) -> tuple[int, ...]:
        return mask_to_set(mask, self.n)

    def reconstruct(self) -> np.ndarray:
        return sum(self.components.values())


def mask_to_set(mask: int, n: int) -> tuple[int, ...]:
    return tuple(k for k in range(n) if mask >> k & 1)


def set_to_mask(indices: Iterable[int]) -> int:
    mask = 0
    for k in indices:
        mask |= 1 << int(k)
    return mask


def _as_mask(I, n: int) -> int:
    if isinstance(I, (int, np.integer)):
        mask = int(I)
    else:
        idx = list(I)
        for k in idx:
            if not 0 <= int(k) < n:
                raise IndexError(f"factor index {k} out of range for {n} factors")
        mask = set_to_mask(idx)
    if mask < 0 or mask >> n:
        raise IndexError(f"subset mask {mask} out of range for {n} factors")
    return mask


def marginalize(X: np.ndarray, ctx: ESContext, I) -> np.ndarray:
    """E_I X as a single partial trace over I, re-embedded on the full space."""
    n = ctx.n
    ctx.space.check_operator(X)
    mask = _as_mask(I, n)
    traced = mask_to_set(mask, n)
    if not traced:
        return X.copy()
    weight = np.ones((1, 1), dtype=complex)
    for k in traced:
        weight = np.kron(weight, ctx.factor_states[k])
    kept = [k for k in range(n) if k not in traced]
    Y = embed(weight, ctx.space, list(traced)) @ X
    reduced = partial_trace(Y, ctx.space, traced)
    if not kept:
        return reduced[0, 0] * np.eye(ctx.space.total_dim, dtype=complex)
    return embed(reduced, ctx.space, kept)


def marginalize_iterated(X: np.ndarray, ctx: ESContext, I) -> np.ndarray:
    """Same map as `marginalize`, applied one factor at a time."""
    for k in mask_to_set(_as_mask(I, ctx.n), ctx.n):
        X = marginalize(X, ctx, [k])
    return X


def _all_marginals(X: np.ndarray, ctx: ESContext) -> dict[int, np.ndarray]:
    return {mask: marginalize(X, ctx, mask) for mask in range(1 << ctx.n)}


def _component(marginals: Mapping[int, np.ndarray], J: int, full: int) -> np.ndarray:
    out = np.zeros_like(next(iter(marginals.values())))
    sub = J
    size_J = bin(J).count("1")
    while True:
        sign = -1 if (size_J - bin(sub).count("1")) % 2 else 1
        out += sign * marginals[full & ~sub]
        if sub == 0:
            break
        sub = (sub - 1) & J
    return out


def es_component(X: np.ndarray, ctx: ESContext, J) -> np.ndarray:
    """X^{=J} = sum over I subset of J of (-1)^{|J|-|I|} E_{complement of I} X."""
    mask = _as_mask(J, ctx.n)
    full = ctx.full_mask
    marginals = {}
    sub = mask
    while True:
        marginals[full & ~sub] = marginalize(X, ctx, full & ~sub)
        if sub == 0:
            break
        sub = (sub - 1) & mask
    return _component(marginals, mask, full)


def es_decompose(X: np.ndarray, ctx: ESContext) -> ESDecomposition:
    if ctx.n > MAX_FACTORS:
        raise ValueError(f"{ctx.n} factors exceeds the decomposition cap of {MAX_FACTORS}")
    ctx.space.check_operator(X)
    marginals = _all_marginals(X, ctx)
    full = ctx.full_mask
    comps = {J: _component(marginals, J, full) for J in range(1 << ctx.n)}
    return ESDecomposition(components=comps, n=ctx.n)


def _doubled_swap_term(X: np.ndarray, ctx: ESContext, i: int) -> complex:
    """E_{rho (x) rho}[(X (x) Id) F_i (X (x) Id) F_i], contracted without the doubled matrix."""
    n = ctx.n
    letters = iter(string.ascii_letters)
    r = [next(letters) for _ in range(n)]
    c = [next(letters) for _ in range(n)]
    m = [next(letters) for _ in range(n)]
    a, b = next(letters), next(letters)
    m[i] = c[i]
    dims = ctx.space.dims
    Xt = X.reshape(dims + dims)
    x2_rows = [m[k] if k != i else a for k in range(n)]
    x2_cols = [c[k] if k != i else b for k in range(n)]
    terms = [f"{c[k]}{r[k]}" for k in range(n)]
    terms += ["".join(r + m), "".join(x2_rows + x2_cols), f"{b}{a}"]
    ops = list(ctx.factor_states) + [Xt, Xt, ctx.factor_states[i]]
    return complex(np.einsum(",".join(terms) + "->", *ops, optimize=True))


def local_variance(X: np.ndarray, ctx: ESContext, i: int, tol: float = CHECK_TOL) -> float:
    """E_rho[(D_i X)^2], computed directly and through the doubled-space swap form."""
    if not 0 <= i < ctx.n:
        raise IndexError(f"factor index {i} out of range")
    if ctx.space.total_dim ** 2 > MAX_DOUBLED_DIM:
        raise ValueError("doubled space too large")
    D = X - marginalize(X, ctx, [i])
    direct = ctx.expect(D @ D).real
    doubled = ctx.expect(X @ X).real - _doubled_swap_term(X, ctx, i).real
    if abs(direct - doubled) > tol * max(1.0, abs(direct)):
        raise NumericalViolation(
            f"local variance routes disagree on factor {i}: {direct!r} vs {doubled!r}")
    return float(direct)


def variance(X: np.ndarray, ctx: ESContext) -> float:
    mu = ctx.expect(X).real
    return float(ctx.expect(X @ X).real - mu * mu)


def qes_check(X: np.ndarray, ctx: ESContext, tol: float = CHECK_TOL) -> tuple[float, float, float]:
    """(Var[X], sum of local variances, slack); raises if slack < -tol."""
    var = variance(X, ctx)
    total = sum(local_variance(X, ctx, i) for i in range(ctx.n))
    slack = total - var
    if slack < -tol:
        raise NumericalViolation(f"Efron-Stein slack {slack:.3e} < -{tol}")
    return var, total, slack


def acts_only_on(X: np.ndarray, space: TensorSpace, J: Sequence[int], tol: float = 1e-10) -> bool:
    """True iff X = Y (x) Id on the factors outside J."""
    J = sorted(set(int(j) for j in J))
    out = [k for k in range(space.n) if k not in J]
    if not out:
        return True
    d_out = int(np.prod([space.dims[k] for k in out]))
    Y = partial_trace(X, space, out) / d_out
    return float(np.max(np.abs(embed(Y, space, J) - X), initial=0.0)) <= tol * max(1.0, np.max(np.abs(X)))


def two_local_bound(terms: Mapping, ctx: ESContext, tol: float = CHECK_TOL) -> tuple[float, float]:
    """Variance of X = sum_{i != j} X_ij against 4 sum_i E[(D_i X_i)^2].

    ``terms`` maps unordered pairs (i, j) to full-space matrices; each pair is
    counted for both orderings, matching X_ij = X_ji.
    """
    D = ctx.space.total_dim
    per_site = [np.zeros((D, D), dtype=complex) for _ in range(ctx.n)]
    for key, Xij in terms.items():
        i, j = sorted(key)
        if i == j:
            raise ValueError("two-local terms need distinct factors")
        if not acts_only_on(Xij, ctx.space, [i, j]):
            raise ValueError(f"term {key} acts outside factors {i}, {j}")
        per_site[i] = per_site[i] + Xij
        per_site[j] = per_site[j] + Xij
    X = sum(per_site)
    var = variance(X, ctx)
    bound = 4 * sum(local_variance(Xi, ctx, i) for i, Xi in enumerate(per_site))
    if var > bound + tol:
        raise NumericalViolation(f"two-local bound violated: {var!r} > {bound!r}")
    return var, bound


def pair_terms(n: int, build) -> dict[tuple[int, int], np.ndarray]:
    return {(i, j): build(i, j) for i, j in combinations(range(n), 2)}
