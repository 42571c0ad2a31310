"""Chebyshev decision rule, sample-size requirements and single test runs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .observables import CLASSICAL_M, KINDS, KNOWN_M, MM_A, UNKNOWN_Z, ObservableKind, _as_probs
from .simulate import build_model, measure_observable

CLOSE = "CLOSE"
FAR = "FAR"


@dataclass(frozen=True)
class ChebyshevRule:
    theta: float
    c: float = 0.005
    k: float = 10.0

    def __post_init__(self):
        if not self.theta >= 0:
            raise ValueError("theta must be >= 0")
        if not 0 < self.c < 0.5:
            raise ValueError("c must lie in (0, 1/2)")
        if not self.k > 0:
            raise ValueError("k must be positive")

    @property
    def threshold(self) -> float:
        return (1 - self.c) * self.theta


@dataclass(frozen=True)
class TestDecision:
    __test__ = False

    statistic: float
    threshold: float
    verdict: str
    kind: str | None = None
    T_used: int | None = None

    @property
    def is_far(self) -> bool:
        return self.verdict == FAR

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "threshold": self.threshold, "verdict": self.verdict,
                "kind": self.kind, "T_used": self.T_used}


def decide(statistic: float, rule: ChebyshevRule, kind: str | None = None,
           T_used: int | None = None) -> TestDecision:
    """FAR iff statistic >= (1 - c) theta; ties go FAR."""
    thr = rule.threshold
    return TestDecision(float(statistic), thr, FAR if statistic >= thr else CLOSE, kind, T_used)


# --- sample sizes ---------------------------------------------------------

DEFAULT_CALIBRATION = "calibration.json"


def load_calibration(path=None) -> dict:
    if path is None:
        text = resources.files("noniid.data").joinpath(DEFAULT_CALIBRATION).read_text()
    else:
        text = Path(path).read_text()
    cal = json.loads(text)
    missing = [k for k in KINDS if k not in cal.get("sample_constants", {})]
    if missing:
        raise ValueError(f"calibration file lacks sample constants for {missing}")
    return cal


def sample_formula(tag: str, theta: float, d: int, gamma: float | None = None) -> float:
    """The T >> f requirement of each tester, without its constant."""
    if tag in (MM_A, UNKNOWN_Z):
        return 1 / theta
    if gamma is None or gamma <= 0:
        raise ValueError(f"{tag} needs gamma > 0")
    if tag == KNOWN_M:
        return max(d / theta, math.sqrt(d) / math.sqrt(theta * gamma))
    return max(math.sqrt(d) / theta, 1 / math.sqrt(theta * gamma))


def required_T(kind, theta: float, d: int, gamma: float | None = None, calibration=None) -> int:
    """ceil(C_kind * f), with C_kind from the frozen calibration constants."""
    tag = kind.tag if isinstance(kind, ObservableKind) else str(kind)
    if tag not in KINDS:
        raise ValueError(f"unknown kind {tag!r}")
    if not theta > 0:
        raise ValueError("theta must be > 0")
    if gamma is None and isinstance(kind, ObservableKind):
        gamma = kind.gamma
    if calibration is None or isinstance(calibration, (str, Path)):
        calibration = load_calibration(calibration)
    C = float(calibration["sample_constants"][tag])
    return max(1, math.ceil(C * sample_formula(tag, theta, d, gamma) - 1e-9))


def epsilon_to_theta(kind, eps: float, d: int) -> float:
    """Threshold theta that certifies distance eps in the kind's natural metric.

    MM_A, UNKNOWN_Z: trace distance via Cauchy-Schwarz, theta = 4 eps^2 / d.
    KNOWN_M: Bures distance, theta = eps^2 / 1.01.
    CLASSICAL_M: total variation via squared Hellinger sum (sqrt p - sqrt q)^2 >= TV^2,
    theta = eps^2 / 1.01, the classical image of the Bures route.
    """
    tag = kind.tag if isinstance(kind, ObservableKind) else str(kind)
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if tag in (MM_A, UNKNOWN_Z):
        return 4 * eps ** 2 / d
    if tag in (KNOWN_M, CLASSICAL_M):
        return eps ** 2 / 1.01
    raise ValueError(f"unknown kind {tag!r}")


# --- the classical tester -------------------------------------------------

@dataclass(frozen=True)
class ClassicalSampleBatch:
    """Two samples from each of T sources, as a (T, 2) integer array."""

    pairs: np.ndarray
    d: int

    def __post_init__(self):
        pairs = np.asarray(self.pairs)
        if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] < 1:
            raise ValueError(f"expected a (T, 2) array of symbols, got shape {pairs.shape}")
        if not np.issubdtype(pairs.dtype, np.integer):
            raise ValueError("symbols must be integers")
        if pairs.min() < 0 or pairs.max() >= self.d:
            raise ValueError(f"symbols must lie in [0, {self.d})")
        object.__setattr__(self, "pairs", pairs.astype(np.int64))

    @property
    def T(self) -> int:
        return self.pairs.shape[0]


def classical_statistic(batch: ClassicalSampleBatch, q) -> float:
    """M = avg over ordered (s, t), s = t included, of 1[J1_s = J2_t]/q(J1_s), minus 1."""
    q = np.asarray(q, dtype=float)
    if len(q) != batch.d:
        raise ValueError(f"q has {len(q)} entries for a batch over {batch.d} symbols")
    if np.any(q[np.unique(batch.pairs)] <= 0):
        raise ValueError("sample outside the support of q")
    first = np.bincount(batch.pairs[:, 0], minlength=batch.d)
    second = np.bincount(batch.pairs[:, 1], minlength=batch.d)
    hit = (first > 0) & (second > 0)
    return float((first[hit] * second[hit] / q[hit]).sum() / batch.T ** 2 - 1)


class ClassicalSampler:
    def __init__(self, probs):
        self.probs = _as_probs(probs)
        self.cdf = np.cumsum(self.probs, axis=1)
        self.cdf[:, -1] = 1.0

    @property
    def T(self) -> int:
        return self.probs.shape[0]

    @property
    def d(self) -> int:
        return self.probs.shape[1]

    def draw(self, seed: int) -> ClassicalSampleBatch:
        u = np.random.Generator(np.random.PCG64(seed)).random((self.T, 2))
        idx = np.empty((self.T, 2), dtype=np.int64)
        for j in range(2):
            idx[:, j] = (self.cdf < u[:, j, None]).sum(axis=1)
        return ClassicalSampleBatch(np.minimum(idx, self.d - 1), self.d)


# --- single trials --------------------------------------------------------

def prepare_trial(kind: ObservableKind, ens, rule: ChebyshevRule, second=None):
    """A function seed -> TestDecision with all per-instance work done once."""
    if kind.tag == CLASSICAL_M:
        sampler = ClassicalSampler(ens)
        q = kind.hypothesis

        def trial(seed: int) -> TestDecision:
            return decide(classical_statistic(sampler.draw(seed), q), rule, kind.tag, sampler.T)
        return trial

    if (kind.tag == UNKNOWN_Z) != (second is not None):
        raise ValueError("UNKNOWN_Z takes a second ensemble; other kinds do not")
    model = build_model(kind, ens, second)

    def trial(seed: int) -> TestDecision:
        return decide(measure_observable(model, seed), rule, kind.tag, ens.T)
    return trial


def run_trial(kind: ObservableKind, ens, rule: ChebyshevRule, seed: int, second=None) -> TestDecision:
    """One end-to-end test: one measurement (or 2 samples per source), then the Chebyshev rule."""
    return prepare_trial(kind, ens, rule, second)(seed)
