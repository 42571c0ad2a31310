"""Testing observables and their exact first two moments.

Every statistic here is a weighted sum of two-body kernels over a list of
independent factors,

    X = sum_{a<b} w_ab K_ab + const,

so its variance only involves pairs of terms that share a factor.  The
closed forms in `exact_moments` use that structure and never touch the
d^T-dimensional space; `dense_moments` builds the observable explicitly and
is the brute-force reference for them.

Quantum kernels are ``K = C`` with ``<ji|C|ij> = 1/Q_ij`` in a fixed basis;
the swap is the case ``Q = 1``.  The classical kernel is
``K(x, y) = 1[x = y] / q(x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distances import bures_chi2, classical_chi2, hs_sq
from .matcore import apply_product, hadamard_div
from .states import ProductEnsemble, check_density_matrix, check_distribution

MM_A = "MM_A"
KNOWN_M = "KNOWN_M"
UNKNOWN_Z = "UNKNOWN_Z"
CLASSICAL_M = "CLASSICAL_M"
KINDS = (MM_A, KNOWN_M, UNKNOWN_Z, CLASSICAL_M)

DENSE_CAP = 1 << 16
GAMMA_TOL = 1e-12
CHECK_TOL = 1e-9


class DenseCapError(ValueError):
    """The dense observable would exceed the dimension cap."""


@dataclass(frozen=True, eq=False)
class ObservableKind:
    tag: str
    hypothesis: np.ndarray | None = None

    def __post_init__(self):
        if self.tag not in KINDS:
            raise ValueError(f"unknown kind {self.tag!r}; expected one of {KINDS}")
        needs = self.tag in (KNOWN_M, CLASSICAL_M)
        if needs and self.hypothesis is None:
            raise ValueError(f"{self.tag} needs a hypothesis")
        if not needs and self.hypothesis is not None:
            raise ValueError(f"{self.tag} takes no hypothesis")
        if self.tag == KNOWN_M:
            sigma = check_density_matrix(self.hypothesis, "sigma")
            if np.linalg.eigvalsh(sigma)[0] <= GAMMA_TOL:
                raise ValueError("sigma must be full rank")
            object.__setattr__(self, "hypothesis", sigma)
        elif self.tag == CLASSICAL_M:
            q = check_distribution(self.hypothesis, "q")
            if q.min() <= 0:
                raise ValueError("q must be fully supported")
            object.__setattr__(self, "hypothesis", q)

    @property
    def gamma(self) -> float | None:
        if self.tag == KNOWN_M:
            return float(np.linalg.eigvalsh(self.hypothesis)[0])
        if self.tag == CLASSICAL_M:
            return float(self.hypothesis.min())
        return None

    @property
    def d(self) -> int | None:
        return None if self.hypothesis is None else self.hypothesis.shape[0]

    def to_dict(self) -> dict:
        out = {"tag": self.tag}
        if self.tag == CLASSICAL_M:
            out["q"] = self.hypothesis.tolist()
        elif self.tag == KNOWN_M:
            out["sigma"] = [[[z.real, z.imag] for z in row] for row in self.hypothesis]
        return out


@dataclass
class MomentReport:
    kind: str
    T: int
    d: int
    mu: float
    mean_exact: float
    var_exact: float
    bias: float
    paper_bias_bound: float
    paper_var_bound_terms: dict[str, float] = field(default_factory=dict)

    def var_bound(self, K: float) -> float:
        return K * sum(self.paper_var_bound_terms.values())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "T": self.T, "d": self.d, "mu": self.mu,
            "mean_exact": self.mean_exact, "var_exact": self.var_exact,
            "bias": self.bias, "paper_bias_bound": self.paper_bias_bound,
            "paper_var_bound_terms": dict(self.paper_var_bound_terms),
        }


# --- kernels and bases ---------------------------------------------------

def sigma_basis(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues q and eigenvectors U of sigma (ascending)."""
    q, U = np.linalg.eigh((sigma + sigma.conj().T) / 2)
    return q, U


def q_matrix(q: np.ndarray) -> np.ndarray:
    """Q_ij = (q_i + q_j) / 2."""
    return (q[:, None] + q[None, :]) / 2


def c_operator(q: np.ndarray) -> np.ndarray:
    """C on C^d (x) C^d in the eigenbasis of sigma: <ji|C|ij> = 1/q(i,j)."""
    d = len(q)
    Q = q_matrix(q)
    C = np.zeros((d * d, d * d))
    i, j = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    C[(j * d + i).ravel(), (i * d + j).ravel()] = 1 / Q.ravel()
    return C


def _rotate(states: np.ndarray, U: np.ndarray) -> np.ndarray:
    return np.einsum("ji,tjk,kl->til", U.conj(), states, U)


def _as_probs(ens) -> np.ndarray:
    if isinstance(ens, ProductEnsemble):
        if not ens.is_diagonal():
            raise ValueError("classical statistic needs diagonal (classical) states")
        return ens.diagonals()
    probs = np.atleast_2d(np.asarray(ens, dtype=float))
    for t, p in enumerate(probs):
        check_distribution(p, name=f"distributions[{t}]")
    return probs


# --- the pair-sum engine -------------------------------------------------

def pair_sum_moments(tau: np.ndarray, B: np.ndarray, h: np.ndarray, w: np.ndarray,
                     const: float = 0.0) -> tuple[float, float]:
    """Mean and variance of sum_{a<b} w_ab K_ab + const on a product state.

    The kernel enters only through
      g_ab = E[K_ab] = Tr[tau_a B_b],
      h_ab = E[K_ab^2],
      E[K_ab K_ac] = Re Tr[tau_a B_b B_c]  (b != c, both != a),
    which holds for C-type kernels (B_b = tau_b / Q) and for the classical
    collision kernel (B_b = diag(p_b / q)).  ``w`` is symmetric with zero
    diagonal.  Pairs of terms with disjoint factors are uncorrelated, so the
    variance is the same-pair part plus the shared-one-factor part.
    """
    w = np.asarray(w, dtype=float)
    if np.any(np.diag(w) != 0) or not np.allclose(w, w.T, rtol=0, atol=0):
        raise ValueError("weights must be symmetric with zero diagonal")
    g = np.einsum("aij,bji->ab", tau, B).real
    mean = 0.5 * float((w * g).sum()) + const

    same_pair = 0.5 * float((w ** 2 * (h - g ** 2)).sum())

    R = np.einsum("ab,bij->aij", w, B)
    B2 = B @ B
    S = np.einsum("ab,bij->aij", w ** 2, B2)
    star = float(np.einsum("aij,aji->", tau, R @ R - S).real)
    wg = (w * g).sum(axis=1)
    star -= float((wg ** 2 - (w ** 2 * g ** 2).sum(axis=1)).sum())
    return mean, same_pair + star


def pair_sum_moments_lowrank(tau: np.ndarray, B: np.ndarray, H: np.ndarray, M: np.ndarray,
                             U: np.ndarray, lam: np.ndarray, const: float = 0.0) -> tuple[float, float]:
    """`pair_sum_moments` for w = U diag(lam) U^T off the diagonal and h_ab = H_a M H_b^T.

    Every sum over pairs collapses onto the r columns of U, so the cost is
    O(N r^2 d^4) with no N x N array.
    """
    tau = np.asarray(tau, dtype=complex)
    B = np.asarray(B, dtype=complex)
    U = np.asarray(U, dtype=float).reshape(tau.shape[0], -1)
    lam = np.asarray(lam, dtype=float).ravel()
    N = tau.shape[0]
    if N < 2:
        return float(const), 0.0
    ell = (U ** 2) @ lam
    t = tau.reshape(N, -1)
    bt = np.swapaxes(B, 1, 2).reshape(N, -1)
    g_diag = np.einsum("ax,ax->a", t, bt).real
    h_diag = np.einsum("ax,xy,ay->a", H, M, H)
    Bu = np.einsum("ak,aij->kij", U, B)
    taug = np.einsum("aij,kji->ak", tau, Bu).real

    mean = 0.5 * float((U * taug).sum(axis=0) @ lam - ell @ g_diag) + const

    B2 = B @ B
    r = len(lam)
    pairs_total = 0.0
    tr_S = 0.0
    w2g2 = -ell ** 2 * g_diag ** 2
    for k in range(r):
        for l in range(r):
            c = lam[k] * lam[l]
            v = U[:, k] * U[:, l]
            Hv = v @ H
            Gt = (t * v[:, None]).T @ t
            Gb = (bt * v[:, None]).T @ bt
            pairs_total += c * (float(Hv @ M @ Hv) - float(np.sum(Gt * Gb).real))
            B2v = np.einsum("a,aij->ij", v, B2)
            tr_S += c * float((v * np.einsum("aij,ji->a", tau, B2v).real).sum())
            w2g2 += c * v * np.einsum("ax,xy,ay->a", t, Gb, t).real
    same_pair = 0.5 * (pairs_total - float((ell ** 2 * (h_diag - g_diag ** 2)).sum()))

    R = np.einsum("ak,k,kij->aij", U, lam, Bu) - ell[:, None, None] * B
    tr_R2 = float(np.einsum("aij,ajk,aki->", tau, R, R).real)
    tr_S -= float((ell ** 2 * np.einsum("aij,aji->a", tau, B2).real).sum())
    wg = (U * lam[None, :] * taug).sum(axis=1) - ell * g_diag
    star = tr_R2 - tr_S - float((wg ** 2 - w2g2).sum())
    return float(mean), float(same_pair + star)


def _swap_h(N: int):
    """h = 1 for the swap, as features H = 1 and M = 1."""
    return np.ones((N, 1)), np.ones((1, 1))


def pair_sum_moments_diag(p: np.ndarray, b: np.ndarray, h: np.ndarray, w: np.ndarray,
                          const: float = 0.0) -> tuple[float, float]:
    """`pair_sum_moments` when every tau_a and B_a is diagonal; rows of p and b are diagonals."""
    g = p @ b.T
    mean = 0.5 * float((w * g).sum()) + const
    same_pair = 0.5 * float((w ** 2 * (h - g ** 2)).sum())
    R = w @ b
    S = (w ** 2) @ (b ** 2)
    star = float((p * (R ** 2 - S)).sum())
    wg = (w * g).sum(axis=1)
    star -= float((wg ** 2 - (w ** 2 * g ** 2).sum(axis=1)).sum())
    return mean, same_pair + star


def _classical_inputs(probs: np.ndarray, q: np.ndarray):
    """Factors interleave the two samples per source: 2s first, 2s+1 second."""
    T = probs.shape[0]
    p2 = np.repeat(probs, 2, axis=0)
    b = p2 / q
    h = (p2 / q ** 2) @ p2.T
    w = np.zeros((2 * T, 2 * T))
    w[0::2, 1::2] = 1 / T ** 2
    w[1::2, 0::2] = 1 / T ** 2
    return p2, b, h, w


def _uniform_weights(N: int, value: float) -> np.ndarray:
    w = np.full((N, N), value)
    np.fill_diagonal(w, 0.0)
    return w


def _z_weights(T: int) -> np.ndarray:
    w = np.full((2 * T, 2 * T), 2 / T ** 2)
    w[:T, T:] = -2 / T ** 2
    w[T:, :T] = -2 / T ** 2
    np.fill_diagonal(w, 0.0)
    return w


# --- exact moments -------------------------------------------------------

def _bound_terms(tag: str, mu: float, T: int, d: int, gamma: float | None):
    if tag == MM_A:
        return 1 / T, {"mu/T": mu / T, "1/T^2": 1 / T ** 2}
    if tag == UNKNOWN_Z:
        return 2 / T, {"16mu/T": 16 * mu / T, "1/T^2": 1 / T ** 2}
    if tag == KNOWN_M:
        r = math.sqrt(d / gamma)
        bias = math.sqrt(d / (gamma * T)) * math.sqrt(mu) + (d - 1) / T
        return bias, {
            "mu/T": mu / T,
            "sqrt(d/gamma)mu^1.5/T": r * mu ** 1.5 / T,
            "d^2/T^2": d ** 2 / T ** 2,
            "d mu/(gamma T^2)": d * mu / (gamma * T ** 2),
        }
    # the classical statistic is unbiased
    return 0.0, {
        "4mu/(T^2 gamma)": 4 * mu / (T ** 2 * gamma),
        "4d/T^2": 4 * d / T ** 2,
        "2mu^1.5/(T sqrt(gamma))": 2 * mu ** 1.5 / (T * math.sqrt(gamma)),
        "mu/T": mu / T,
    }


def _check_second(kind: ObservableKind, ens, second):
    if kind.tag == UNKNOWN_Z:
        if second is None:
            raise ValueError("UNKNOWN_Z needs a second ensemble")
        if second.T != ens.T or second.d != ens.d:
            raise ValueError("both ensembles must have the same T and d")
    elif second is not None:
        raise ValueError(f"{kind.tag} takes a single ensemble")
    if kind.d is not None:
        d = ens.d if isinstance(ens, ProductEnsemble) else np.atleast_2d(ens).shape[1]
        if d != kind.d:
            raise ValueError(f"ensemble dimension {d} does not match hypothesis dimension {kind.d}")


def exact_moments(kind: ObservableKind, ens, second: ProductEnsemble | None = None) -> MomentReport:
    """Mean and variance of the kind's statistic from d x d traces only.

    For CLASSICAL_M ``ens`` may be a (T, d) array of distributions.
    """
    _check_second(kind, ens, second)
    tag = kind.tag
    if tag == CLASSICAL_M:
        q = kind.hypothesis
        probs = _as_probs(ens)
        T, d = probs.shape
        p2, b, h, w = _classical_inputs(probs, q)
        mean, var = pair_sum_moments_diag(p2, b, h, w, const=-1.0)
        mu = classical_chi2(probs.mean(axis=0), q)
    else:
        T, d = ens.T, ens.d
        states = np.asarray(ens.states)
        if tag == MM_A:
            mean, var = pair_sum_moments_lowrank(states, states, *_swap_h(T), np.ones(T), [2 / T ** 2], -1 / d)
            mu = hs_sq(ens.average(), np.eye(d) / d)
        elif tag == KNOWN_M:
            q, U = sigma_basis(kind.hypothesis)
            tau = _rotate(states, U)
            Q = q_matrix(q)
            mean, var = pair_sum_moments_lowrank(tau, tau / Q[None], np.einsum("tii->ti", tau).real, 1 / Q ** 2,
                                                 np.ones(T), [2 / T ** 2], -(T - 1) / T)
            mu = bures_chi2(ens.average(), kind.hypothesis)
        else:
            both = np.concatenate([states, np.asarray(second.states)])
            signs = np.r_[np.ones(T), -np.ones(T)]
            mean, var = pair_sum_moments_lowrank(both, both, *_swap_h(2 * T), signs, [2 / T ** 2])
            mu = hs_sq(ens.average(), second.average())
    bias_bound, terms = _bound_terms(tag, mu, T, d, kind.gamma)
    return MomentReport(kind=tag, T=T, d=d, mu=float(mu), mean_exact=float(mean),
                        var_exact=float(max(var, 0.0)), bias=float(mean - mu),
                        paper_bias_bound=float(bias_bound), paper_var_bound_terms=terms)


# --- dense construction --------------------------------------------------

def _digits(d: int, n: int) -> np.ndarray:
    """(n, d^n) array of basis-index digits, factor 0 most significant."""
    return np.array(np.unravel_index(np.arange(d ** n), (d,) * n))


def _add_pair(X: np.ndarray, digits: np.ndarray, d: int, a: int, b: int, weight) -> None:
    """X += weight-scaled C_ab, where ``weight`` is a scalar (swap) or a d x d table."""
    D = X.shape[0]
    cols = np.arange(D)
    stride = d ** (digits.shape[0] - 1 - np.arange(digits.shape[0]))
    ia, ib = digits[a], digits[b]
    rows = cols + (ib - ia) * stride[a] + (ia - ib) * stride[b]
    vals = weight if np.isscalar(weight) else weight[ia, ib]
    X[rows, cols] += vals


def _check_cap(d: int, n: int) -> None:
    if d ** n > DENSE_CAP:
        raise DenseCapError(f"dense dimension {d}^{n} exceeds the cap {DENSE_CAP}")


def dense_swap_sum(d: int, n: int, w: np.ndarray, const: float = 0.0) -> np.ndarray:
    """sum_{a<b} w_ab S_ab + const Id as a dense real matrix on (C^d)^n."""
    _check_cap(d, n)
    digits = _digits(d, n)
    X = const * np.eye(d ** n)
    for a in range(n):
        for b in range(a + 1, n):
            if w[a, b]:
                _add_pair(X, digits, d, a, b, w[a, b])
    return X


def _conjugate_product(X: np.ndarray, U: np.ndarray, n: int) -> np.ndarray:
    """U^{(x)n} X U^{(x)n, dagger}."""
    Us = [U] * n
    Y = apply_product(Us, X.astype(complex))
    return apply_product(Us, Y.conj().T).conj().T


def build_observable(kind: ObservableKind, d: int, T: int) -> np.ndarray:
    """The dense statistic: A, M on (C^d)^T, Z on (C^d)^2T, classical M as a diagonal on 2T factors."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if kind.d is not None and kind.d != d:
        raise ValueError(f"hypothesis dimension {kind.d} does not match d = {d}")
    tag = kind.tag
    if tag == MM_A:
        return dense_swap_sum(d, T, _uniform_weights(T, 2 / T ** 2), -1 / d)
    if tag == UNKNOWN_Z:
        return dense_swap_sum(d, 2 * T, _z_weights(T))
    if tag == KNOWN_M:
        _check_cap(d, T)
        q, U = sigma_basis(kind.hypothesis)
        table = 1 / q_matrix(q)
        digits = _digits(d, T)
        X = -(T - 1) / T * np.eye(d ** T)
        for a in range(T):
            for b in range(a + 1, T):
                _add_pair(X, digits, d, a, b, 2 / T ** 2 * table)
        return _conjugate_product(X, U, T)
    return np.diag(classical_values(kind.hypothesis, T))


def classical_values(q: np.ndarray, T: int) -> np.ndarray:
    """Statistic value on every joint outcome of the 2T samples, interleaved per source."""
    d = len(q)
    _check_cap(d, 2 * T)
    digits = _digits(d, 2 * T)
    total = np.zeros(d ** (2 * T))
    for s in range(T):
        for t in range(T):
            hit = digits[2 * s] == digits[2 * t + 1]
            total[hit] += 1 / q[digits[2 * s][hit]]
    return total / T ** 2 - 1


def _dense_factors(kind: ObservableKind, ens, second):
    if kind.tag == CLASSICAL_M:
        probs = _as_probs(ens)
        return [np.diag(p).astype(complex) for p in np.repeat(probs, 2, axis=0)], probs.shape
    states = list(np.asarray(ens.states))
    if kind.tag == UNKNOWN_Z:
        states += list(np.asarray(second.states))
    return states, (ens.T, ens.d)


def dense_moments(kind: ObservableKind, ens, second: ProductEnsemble | None = None) -> tuple[float, float]:
    """(E[X], Var[X]) by building X densely and contracting against the product state."""
    _check_second(kind, ens, second)
    factors, (T, d) = _dense_factors(kind, ens, second)
    if kind.tag == CLASSICAL_M:
        x = classical_values(kind.hypothesis, T)
        prob = np.ones(1)
        for f in factors:
            prob = np.kron(prob, np.diag(f).real)
        m1 = float(prob @ x)
        return m1, float(prob @ x ** 2) - m1 ** 2
    X = build_observable(kind, d, T)
    Y = apply_product(factors, X.astype(complex))
    m1 = float(np.trace(Y).real)
    m2 = float(np.einsum("ij,ji->", Y, X).real)
    return m1, m2 - m1 ** 2


# --- inequality checks ---------------------------------------------------

@dataclass
class InequalityCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + CHECK_TOL * max(1.0, abs(self.rhs))

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


class InequalityViolation(AssertionError):
    pass


def _assert_all(checks: list[InequalityCheck]) -> list[InequalityCheck]:
    bad = [c for c in checks if not c.holds]
    if bad:
        raise InequalityViolation(
            "; ".join(f"{c.name}: {c.lhs!r} > {c.rhs!r}" for c in bad))
    return checks


def concavity_deficit_check(ens: ProductEnsemble, sigma: np.ndarray,
                            strict: bool = True) -> tuple[float, float]:
    """avg_t {1 + chi2(rho_t||sigma)} against sqrt(d/gamma) chi2(rho_avg||sigma)^(1/2) + d."""
    sigma = check_density_matrix(sigma, "sigma")
    gamma = float(np.linalg.eigvalsh(sigma)[0])
    if gamma <= GAMMA_TOL:
        raise ValueError("sigma must be full rank")
    d = sigma.shape[0]
    lhs = float(np.mean([1 + bures_chi2(r, sigma) for r in ens]))
    rhs = math.sqrt(d / gamma) * math.sqrt(bures_chi2(ens.average(), sigma)) + d
    if strict:
        _assert_all([InequalityCheck("concavity", lhs, rhs)])
    return lhs, rhs


def three_piece(R: np.ndarray, S: np.ndarray, Tm: np.ndarray, Q: np.ndarray) -> complex:
    """Tr[(R (x) S (x) T) C12 C13] = Tr[R (S/Q)(T/Q)]."""
    return complex(np.trace(R @ hadamard_div(S, Q) @ hadamard_div(Tm, Q)))


def misc_inequalities_check(rho: np.ndarray, sigma: np.ndarray, S: np.ndarray | None = None,
                            strict: bool = True) -> list[InequalityCheck]:
    """Trace inequalities behind the variance bound of M.

    With rho = sigma + Delta and chi2 = chi2_Bures(rho||sigma), evaluated in
    sigma's eigenbasis through Tr[(R x S x T) C12 C13] = Tr[R (S/Q)(T/Q)]:
      Tr[(sigma x Delta x Delta) C12 C13] <= 2 chi2
      Tr[(Delta x Delta x Delta) C12 C13] <= sqrt(d/gamma) chi2^1.5
      Tr[(rho x rho) C^2]                 <= 2 d^2 + (2d/gamma) chi2
      Tr[(rho x rho x rho) C12 C13]       <= 1 + 4 chi2 + sqrt(d/gamma) chi2^1.5
    the exact values Tr[(sigma x sigma x sigma) C12 C13] = 1,
    Tr[(Delta x sigma x sigma) C12 C13] = 0, Tr[(Delta x Delta x sigma) C12 C13] = chi2,
    and, for Hermitian S, Tr[rho (S/Q)(S/Q)] >= 0.  Equalities are reported as
    checks |lhs - value| <= 0.  Check names, in the order above: misc-sigma-delta-delta,
    misc-delta-cubed, misc-c-squared, misc-rho-cubed, misc-sigma-cubed,
    misc-delta-sigma-sigma, misc-delta-delta-sigma, threepiece-positive.
    """
    rho = check_density_matrix(rho, "rho")
    sigma = check_density_matrix(sigma, "sigma")
    q, U = sigma_basis(sigma)
    gamma = float(q[0])
    if gamma <= GAMMA_TOL:
        raise ValueError("sigma must be full rank")
    d = len(q)
    Q = q_matrix(q)
    r = U.conj().T @ rho @ U
    s = np.diag(q).astype(complex)
    delta = r - s
    chi = bures_chi2(rho, sigma)
    root = math.sqrt(d / gamma)
    p = np.diag(r).real
    c2 = float(np.einsum("i,j,ij->", p, p, 1 / Q ** 2))
    checks = [
        InequalityCheck("misc-sigma-delta-delta",
                        three_piece(s, delta, delta, Q).real, 2 * chi),
        InequalityCheck("misc-delta-cubed",
                        three_piece(delta, delta, delta, Q).real, root * chi ** 1.5),
        InequalityCheck("misc-c-squared", c2, 2 * d ** 2 + 2 * d / gamma * chi),
        InequalityCheck("misc-rho-cubed",
                        three_piece(r, r, r, Q).real, 1 + 4 * chi + root * chi ** 1.5),
        InequalityCheck("misc-sigma-cubed",
                        abs(three_piece(s, s, s, Q) - 1), 0.0),
        InequalityCheck("misc-delta-sigma-sigma",
                        abs(three_piece(delta, s, s, Q)), 0.0),
        InequalityCheck("misc-delta-delta-sigma",
                        abs(three_piece(delta, delta, s, Q) - chi), 0.0),
    ]
    if S is not None:
        S_eig = U.conj().T @ S @ U
        checks.append(InequalityCheck("threepiece-positive", -three_piece(r, S_eig, S_eig, Q).real, 0.0))
    if strict:
        _assert_all(checks)
    return checks
