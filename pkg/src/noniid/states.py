"""Density matrices, product ensembles, classical distributions, and the
generators used to build null and far fixtures for experiments."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .matcore import is_hermitian
from .seeding import rng_for

TRACE_TOL = 1e-12
EIG_FLOOR = -1e-10
MODES = ("haar_pure", "ginibre_mixed", "classical_dirichlet")
STYLES = ("coherent", "diagonal", "pure_mix")


class StateError(ValueError):
    """A matrix or distribution violates the state invariants."""


def check_density_matrix(rho: np.ndarray, name: str = "state") -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise StateError(f"{name}: expected a square matrix, got shape {rho.shape}")
    if not is_hermitian(rho):
        raise StateError(f"{name}: not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1) > TRACE_TOL * max(1, rho.shape[0]):
        raise StateError(f"{name}: trace {tr!r} != 1")
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < EIG_FLOOR:
        raise StateError(f"{name}: min eigenvalue {lo:.3e} < {EIG_FLOOR}")
    return rho


def clean_state(rho: np.ndarray) -> np.ndarray:
    """Symmetrize, clip round-off negative eigenvalues, renormalize."""
    rho = (rho + rho.conj().T) / 2
    w, V = np.linalg.eigh(rho)
    if w[0] < EIG_FLOOR:
        raise StateError(f"min eigenvalue {w[0]:.3e} below the round-off floor")
    if w[0] < 0:
        w = np.clip(w, 0, None)
        rho = (V * w) @ V.conj().T
    return rho / np.trace(rho).real


def check_distribution(p: Sequence[float], name: str = "distribution") -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise StateError(f"{name}: expected a nonempty vector")
    if np.any(p < 0):
        raise StateError(f"{name}: negative entry")
    if abs(p.sum() - 1) > TRACE_TOL * max(1, p.size):
        raise StateError(f"{name}: sums to {p.sum()!r}")
    return p


def maximally_mixed(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex) / d


def pure_state(psi: Sequence[complex]) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class ProductEnsemble:
    """T states of common dimension d, stored as a (T, d, d) array."""

    states: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.states, dtype=complex)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2] or arr.shape[0] < 1:
            raise StateError(f"ensemble must have shape (T, d, d) with T >= 1, got {arr.shape}")
        for t, rho in enumerate(arr):
            check_density_matrix(rho, name=f"states[{t}]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "states", arr)

    @property
    def T(self) -> int:
        return self.states.shape[0]

    @property
    def d(self) -> int:
        return self.states.shape[1]

    def __len__(self):
        return self.T

    def __iter__(self):
        return iter(self.states)

    def average(self) -> np.ndarray:
        return average_state(self)

    def diagonals(self) -> np.ndarray:
        """(T, d) array of diagonals; the classical view of the ensemble."""
        return np.einsum("tii->ti", self.states).real.copy()

    def is_diagonal(self, atol: float = 1e-12) -> bool:
        off = self.states - np.einsum("ti,ij->tij", self.diagonals(), np.eye(self.d))
        return bool(np.max(np.abs(off), initial=0.0) <= atol)

    @classmethod
    def from_distributions(cls, probs) -> "ProductEnsemble":
        probs = np.atleast_2d(np.asarray(probs, dtype=float))
        for t, p in enumerate(probs):
            check_distribution(p, name=f"distributions[{t}]")
        return cls(np.einsum("ti,ij->tij", probs, np.eye(probs.shape[1])))

    @classmethod
    def iid(cls, rho: np.ndarray, T: int) -> "ProductEnsemble":
        return cls(np.repeat(np.asarray(rho, dtype=complex)[None], T, axis=0))


def average_state(ens: ProductEnsemble) -> np.ndarray:
    return ens.states.mean(axis=0)


def _ginibre(rng: np.random.Generator, d: int) -> np.ndarray:
    return (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)


def random_state(rng: np.random.Generator, d: int, mode: str = "ginibre_mixed") -> np.ndarray:
    if mode == "haar_pure":
        psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        return pure_state(psi)
    if mode == "ginibre_mixed":
        G = _ginibre(rng, d)
        W = G @ G.conj().T
        return (W + W.conj().T) / (2 * np.trace(W).real)
    if mode == "classical_dirichlet":
        return np.diag(rng.dirichlet(np.ones(d))).astype(complex)
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def random_ensemble(d: int, T: int, mode: str, seed: int) -> ProductEnsemble:
    if d < 2 or T < 1:
        raise ValueError("need d >= 2 and T >= 1")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    return ProductEnsemble(np.stack([random_state(rng_for(seed, t), d, mode) for t in range(T)]))


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    Q, R = np.linalg.qr(_ginibre(rng, d))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    G = _ginibre(rng, d)
    return (G + G.conj().T) / 2


def depolarize(rho: np.ndarray, lam: float) -> np.ndarray:
    if not 0 <= lam <= 1:
        raise ValueError(f"depolarizing parameter {lam} outside [0, 1]")
    d = rho.shape[0]
    return (1 - lam) * np.asarray(rho, dtype=complex) + lam * np.eye(d) / d


def depolarize_ensemble(ens: ProductEnsemble, lam: float) -> ProductEnsemble:
    return ProductEnsemble(np.stack([depolarize(r, lam) for r in ens]))


def _trace_norm_half(X: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh((X + X.conj().T) / 2)).sum())


def _max_step(rho: np.ndarray, E: np.ndarray) -> float:
    """Largest s >= 0 with rho + s E >= 0 (inf if E >= 0)."""
    w, V = np.linalg.eigh(rho)
    if w[0] <= 0:
        # restrict to the support of rho; E must not leave it
        keep = w > 1e-12
        if not np.all(keep):
            Vk = V[:, ~keep]
            if np.max(np.abs(Vk.conj().T @ E), initial=0.0) > 1e-12:
                return 0.0
        V, w = V[:, keep], w[keep]
    inv_sqrt = V / np.sqrt(w)
    m = np.linalg.eigvalsh(inv_sqrt.conj().T @ E @ inv_sqrt)[0]
    return np.inf if m >= 0 else -1.0 / m


def _traceless_direction(rng, d, diagonal: bool) -> np.ndarray:
    if diagonal:
        x = rng.standard_normal(d)
        E = np.diag(x - x.mean()).astype(complex)
    else:
        E = random_hermitian(rng, d)
        E -= np.trace(E) / d * np.eye(d)
    return E / _trace_norm_half(E)


def _heterogeneous_pairs(rng, avg: np.ndarray, T: int, diagonal: bool, spread: float) -> np.ndarray:
    """Split `avg` into T states averaging to it exactly via +/- paired moves."""
    d = avg.shape[0]
    out = np.repeat(avg[None], T, axis=0)
    for t in range(0, T - 1, 2):
        E = _traceless_direction(rng, d, diagonal)
        step = min(_max_step(avg, E), _max_step(avg, -E))
        s = spread * step if np.isfinite(step) else spread
        out[t] = avg + s * E
        out[t + 1] = avg - s * E
    return out


MEASURES = ("trace", "hs", "bures_chi2")


def _deviation_size(sigma: np.ndarray, delta: np.ndarray, measure: str) -> tuple[float, int]:
    """Size of the deviation delta from sigma and its degree of homogeneity."""
    from .distances import bures_chi2, hs_sq

    if measure == "trace":
        return _trace_norm_half(delta), 1
    if measure == "hs":
        return hs_sq(sigma + delta, sigma), 2
    if measure == "bures_chi2":
        return bures_chi2(sigma + delta, sigma), 2
    raise ValueError(f"unknown measure {measure!r}; expected one of {MEASURES}")


def perturb_ensemble(sigma: np.ndarray, target: float, T: int, style: str, seed: int,
                     spread: float = 0.9, measure: str = "trace") -> ProductEnsemble:
    """Heterogeneous ensemble whose average sits at distance `target` from sigma.

    ``measure`` is the trace distance, the squared Hilbert-Schmidt distance or
    the Bures chi^2 divergence.  Individual states are spread around the
    average by +/- pairs (scaled to `spread` of the largest PSD-preserving
    step), so the average is exact.
    """
    if style not in STYLES:
        raise ValueError(f"unknown style {style!r}; expected one of {STYLES}")
    sigma = check_density_matrix(sigma, "sigma")
    if target < 0:
        raise ValueError("target must be >= 0")
    d = sigma.shape[0]
    rng = rng_for(seed, 0)
    diagonal = style == "diagonal"
    if diagonal and np.max(np.abs(sigma - np.diag(np.diag(sigma)))) > 1e-12:
        raise ValueError("diagonal style requires a diagonal sigma")

    avg = None
    if target == 0:
        avg = sigma.copy()
    elif style == "pure_mix":
        for _ in range(64):
            psi = pure_state(rng.standard_normal(d) + 1j * rng.standard_normal(d))
            size, deg = _deviation_size(sigma, psi - sigma, measure)
            s = (target / size) ** (1 / deg) if size > 0 else np.inf
            if s <= 1:
                avg = (1 - s) * sigma + s * psi
                break
    else:
        for _ in range(64):
            E = _traceless_direction(rng, d, diagonal)
            size, deg = _deviation_size(sigma, E, measure)
            s = (target / size) ** (1 / deg)
            if _max_step(sigma, E) >= s:
                avg = sigma + s * E
                break
    if avg is None:
        raise ValueError(f"target {measure} distance {target} unattainable for style {style!r}")
    avg = (avg + avg.conj().T) / 2
    states = _heterogeneous_pairs(rng, avg, T, diagonal, spread)
    return ProductEnsemble(np.stack([clean_state(r) for r in states]))


# --- JSON ensemble format -------------------------------------------------

def ensemble_to_json(ens: ProductEnsemble) -> dict:
    return {
        "dim": ens.d,
        "states": [[[float(z.real), float(z.imag)] for z in rho.ravel()] for rho in ens],
    }


def ensemble_from_json(obj) -> ProductEnsemble:
    """Parse the {"dim": d, "states": [[[re, im], ...], ...]} format.

    Diagnostics name the offending field, e.g. ``states[1][3]``.
    """
    if not isinstance(obj, dict):
        raise StateError("top level: expected an object with 'dim' and 'states'")
    if "dim" not in obj or "states" not in obj:
        raise StateError("top level: missing 'dim' or 'states'")
    d = obj["dim"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise StateError(f"dim: expected a positive integer, got {d!r}")
    states = obj["states"]
    if not isinstance(states, list) or not states:
        raise StateError("states: expected a nonempty list")
    mats = []
    for t, entries in enumerate(states):
        if not isinstance(entries, list) or len(entries) != d * d:
            raise StateError(f"states[{t}]: expected {d * d} [re, im] entries")
        vals = []
        for k, pair in enumerate(entries):
            if (not isinstance(pair, list) or len(pair) != 2
                    or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)):
                raise StateError(f"states[{t}][{k}]: expected a [re, im] pair of numbers")
            vals.append(complex(pair[0], pair[1]))
        rho = np.array(vals, dtype=complex).reshape(d, d)
        try:
            check_density_matrix(rho, name=f"states[{t}]")
        except StateError as exc:
            raise StateError(str(exc)) from None
        mats.append(rho)
    return ProductEnsemble(np.stack(mats))


def load_ensemble(path) -> ProductEnsemble:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise StateError(f"{path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return ensemble_from_json(obj)
    except StateError as exc:
        raise StateError(f"{path}: {exc}") from None


def save_ensemble(ens: ProductEnsemble, path) -> None:
    Path(path).write_text(json.dumps(ensemble_to_json(ens)))


# --- classical sources ----------------------------------------------------

def split_distribution(avg: Sequence[float], T: int, seed: int, spread: float = 0.9) -> np.ndarray:
    """T distributions averaging exactly to `avg`, built from +/- paired moves."""
    avg = check_distribution(avg, "avg")
    rng = rng_for(seed, 1)
    out = np.repeat(avg[None], T, axis=0)
    for t in range(0, T - 1, 2):
        x = rng.standard_normal(len(avg)) * (avg > 0)
        e = x - avg * x.sum() / avg.sum()
        neg = np.abs(e) > 0
        if not np.any(neg):
            continue
        step = float(np.min(avg[neg] / np.abs(e[neg])))
        out[t] = np.clip(avg + spread * step * e, 0, None)
        out[t + 1] = np.clip(avg - spread * step * e, 0, None)
    return out / out.sum(axis=1, keepdims=True)


def distribution_at_chi2(q: Sequence[float], target: float, seed: int, concentration: float = 0.1) -> np.ndarray:
    """p = (1 - s) q + s u with u random and s chosen so that chi^2(p || q) = target."""
    from .distances import classical_chi2

    q = check_distribution(q, "q")
    rng = rng_for(seed, 2)
    for _ in range(64):
        u = rng.dirichlet(np.full(len(q), concentration))
        size = classical_chi2(u, q)
        if size >= target:
            s = np.sqrt(target / size)
            return (1 - s) * q + s * u
    raise ValueError(f"chi^2 target {target} unattainable")
