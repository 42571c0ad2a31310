"""Classical and quantum divergences.

Infinite divergences are returned as ``math.inf``; callers test with
``math.isinf`` rather than relying on overflow.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .matcore import sqrtm_psd

KERNEL_TOL = 1e-12


@dataclass(frozen=True)
class QuantumDivergenceReport:
    trace_distance: float
    hs_sq: float
    fidelity: float
    infidelity: float
    bures_sq: float
    bures_chi2: float

    def to_dict(self) -> dict:
        return {k: (None if math.isinf(v) else v) for k, v in asdict(self).items()}


@dataclass(frozen=True)
class ClassicalDivergenceReport:
    tv: float
    chi2: float
    hellinger_sq: float

    def to_dict(self) -> dict:
        return {k: (None if math.isinf(v) else v) for k, v in asdict(self).items()}


def _check_pair(rho, sigma):
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    return rho, sigma


def trace_distance(rho, sigma) -> float:
    rho, sigma = _check_pair(rho, sigma)
    delta = rho - sigma
    return 0.5 * float(np.abs(np.linalg.eigvalsh((delta + delta.conj().T) / 2)).sum())


def hs_sq(rho, sigma) -> float:
    rho, sigma = _check_pair(rho, sigma)
    delta = rho - sigma
    return float(np.vdot(delta, delta).real)


def fidelity(rho, sigma) -> float:
    """||sqrt(rho) sqrt(sigma)||_1 squared."""
    rho, sigma = _check_pair(rho, sigma)
    s = np.linalg.svd(sqrtm_psd(rho) @ sqrtm_psd(sigma), compute_uv=False)
    return float(min(1.0, s.sum() ** 2))


def bures_chi2(rho, sigma) -> float:
    """Sum over sigma's eigenbasis of 2|Delta_ij|^2 / (q_i + q_j)."""
    rho, sigma = _check_pair(rho, sigma)
    q, U = np.linalg.eigh((sigma + sigma.conj().T) / 2)
    q = np.clip(q, 0.0, None)
    delta = U.conj().T @ (rho - sigma) @ U
    denom = q[:, None] + q[None, :]
    sq = np.abs(delta) ** 2
    kernel = denom <= KERNEL_TOL
    if np.any(sq[kernel] > KERNEL_TOL):
        return math.inf
    return float((2 * sq[~kernel] / denom[~kernel]).sum())


def chi2_upper(rho, sigma) -> float:
    """Tr[sigma^{-1} rho^2] - 1, the largest of the quantum chi^2 variants."""
    rho, sigma = _check_pair(rho, sigma)
    q, U = np.linalg.eigh((sigma + sigma.conj().T) / 2)
    if q[0] <= KERNEL_TOL:
        return math.inf
    r = U.conj().T @ rho @ U
    return float(np.einsum("ij,ji,i->", r, r, 1 / q).real - 1)


def quantum_divergences(rho, sigma) -> QuantumDivergenceReport:
    F = fidelity(rho, sigma)
    return QuantumDivergenceReport(
        trace_distance=trace_distance(rho, sigma),
        hs_sq=hs_sq(rho, sigma),
        fidelity=F,
        infidelity=1 - F,
        bures_sq=2 * (1 - math.sqrt(F)),
        bures_chi2=bures_chi2(rho, sigma),
    )


def classical_chi2(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    zero = q == 0
    if np.any(p[zero] > 0):
        return math.inf
    return float(((p[~zero] - q[~zero]) ** 2 / q[~zero]).sum())


def classical_divergences(p, q) -> ClassicalDivergenceReport:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return ClassicalDivergenceReport(
        tv=0.5 * float(np.abs(p - q).sum()),
        chi2=classical_chi2(p, q),
        hellinger_sq=float(((np.sqrt(p) - np.sqrt(q)) ** 2).sum()),
    )


def min_eigenvalue(sigma) -> float:
    return float(np.linalg.eigvalsh(sigma)[0])
