"""Projective-measurement sampling and Monte Carlo power estimates."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import schur
from .matcore import apply_product
from .observables import (CLASSICAL_M, MM_A, UNKNOWN_Z, DenseCapError, ObservableKind,
                          build_observable)
from .seeding import hash64

# eigendecomposition of a dense D x D observable is only attempted up to this D
EIG_CAP = 4096
PROB_DRIFT = 1e-6
GROUP_TOL = 1e-9


@dataclass(frozen=True)
class MeasurementModel:
    """Distinct outcome values of an observable and their probabilities on a product state."""

    values: np.ndarray
    probs: np.ndarray
    route: str = "dense"
    cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if values.shape != probs.shape or values.ndim != 1:
            raise ValueError("values and probs must be 1-d arrays of equal length")
        total = probs.sum()
        if abs(total - 1) > PROB_DRIFT:
            raise ArithmeticError(f"outcome probabilities sum to {total!r}")
        probs = np.clip(probs, 0.0, None) / probs.clip(0.0, None).sum()
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "cdf", np.cumsum(probs))

    @property
    def mean(self) -> float:
        return float(self.values @ self.probs)

    @property
    def variance(self) -> float:
        return float((self.values - self.mean) ** 2 @ self.probs)

    def tail_at_least(self, threshold: float) -> float:
        return float(self.probs[self.values >= threshold].sum())


def _group(w: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge numerically equal eigenvalues (w ascending) and sum their probabilities."""
    scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
    cuts = np.flatnonzero(np.diff(w) > GROUP_TOL * scale) + 1
    starts = np.concatenate([[0], cuts])
    values = np.array([w[s:e].mean() for s, e in zip(starts, np.append(cuts, len(w)))])
    return values, np.add.reduceat(p, starts)


def dense_model(X: np.ndarray, factors) -> MeasurementModel:
    """Eigenbasis measurement of X on the product of ``factors``, never forming the state."""
    D = X.shape[0]
    if D > EIG_CAP:
        raise DenseCapError(f"dense dimension {D} exceeds the eigendecomposition cap {EIG_CAP}")
    w, V = np.linalg.eigh((X + X.conj().T) / 2)
    V = V.astype(complex)
    p = np.einsum("ij,ij->j", V.conj(), apply_product(list(factors), V)).real
    values, probs = _group(w, p)
    return MeasurementModel(values, probs, route="dense")


def build_model(kind: ObservableKind, ens, second=None) -> MeasurementModel:
    """Outcome distribution of the kind's observable on the given product state.

    The qubit A statistic beyond the eigendecomposition cap uses the exact
    total-spin route; every other case diagonalizes the dense observable.
    """
    if kind.tag == CLASSICAL_M:
        raise ValueError("the classical statistic is sampled directly, not measured")
    T, d = ens.T, ens.d
    n = 2 * T if kind.tag == UNKNOWN_Z else T
    if kind.tag == MM_A and d == 2 and 2 ** T > 256:
        values, probs = schur.a_distribution(ens.states)
        return MeasurementModel(values, probs, route="spin")
    if d ** n > EIG_CAP:
        raise DenseCapError(f"dense dimension {d}^{n} exceeds the eigendecomposition cap {EIG_CAP}")
    factors = list(ens.states) + (list(second.states) if kind.tag == UNKNOWN_Z else [])
    return dense_model(build_observable(kind, d, T), factors)


def measure_observable(model: MeasurementModel, seed: int) -> float:
    """One projective measurement: an eigenvalue drawn with its Born probability."""
    u = np.random.Generator(np.random.PCG64(seed)).random()
    idx = min(int(np.searchsorted(model.cdf, u, side="right")), len(model.values) - 1)
    return float(model.values[idx])


# --- power reports --------------------------------------------------------

def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    z = norm.ppf(0.5 + level / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, min(centre - half, phat)), min(1.0, max(centre + half, phat))


@dataclass
class PowerReport:
    trials: int
    far_count: int
    far_rate: float
    wilson_low: float
    wilson_high: float
    config: dict = field(default_factory=dict)

    @classmethod
    def from_counts(cls, far_count: int, trials: int, config: dict | None = None) -> "PowerReport":
        lo, hi = wilson_interval(far_count, trials)
        return cls(trials, far_count, far_count / trials, lo, hi, dict(config or {}))

    def to_dict(self) -> dict:
        return {"trials": self.trials, "far_count": self.far_count, "far_rate": self.far_rate,
                "wilson_low": self.wilson_low, "wilson_high": self.wilson_high, "config": self.config}


def trial_seeds(master_seed: int, trials: int) -> list[int]:
    return [hash64(master_seed, i) for i in range(trials)]


def count_far(trial, seeds, workers: int = 1) -> int:
    """Number of FAR verdicts of ``trial(seed)`` over the seeds; order-independent."""
    if workers <= 1:
        return sum(trial(s).is_far for s in seeds)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(dec.is_far for dec in pool.map(trial, seeds))


def estimate_success(kind: ObservableKind, null_ens, far_ens, rule, trials: int, master_seed: int,
                     null_second=None, far_second=None, workers: int = 1,
                     config: dict | None = None) -> tuple[PowerReport, PowerReport]:
    """FAR rates on a null and a far instance with per-trial seeds hash64(master_seed, i).

    Both instances see the same trial seeds.  The outcome model of each
    quantum instance is built once and shared by all its trials.
    """
    from .testers import prepare_trial

    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = trial_seeds(master_seed, trials)
    reports = []
    for ens, second in ((null_ens, null_second), (far_ens, far_second)):
        trial = prepare_trial(kind, ens, rule, second)
        far = count_far(trial, seeds, workers)
        reports.append(PowerReport.from_counts(far, trials, config))
    return reports[0], reports[1]
