"""Exact outcome distribution of the qubit A statistic on product states.

On (C^2)^{(x)T} the operator sum_{i<j} S_ij acts as a scalar on each
total-spin sector J,

    sum_{i<j} S_ij = C(T,2)/2 + J(J+1) - 3T/4,

so measuring A only reveals J.  Adding one qubit at a time, the state
restricted to sector j with its multiplicity space traced out is a
(2j+1) x (2j+1) block tau_j, and the blocks evolve on their own:

    tau'_{j+1/2} and tau'_{j-1/2}  from  W^dagger (tau_j (x) rho) W

with W the Clebsch-Gordan isometry.  Blocks use the basis m = j - k,
k = 0..2j, and |0> is spin up.  Cost is O(T^4) at worst and needs no
2^T-dimensional object.
"""

from __future__ import annotations

import numpy as np

PROB_TOL = 1e-9


def _plus(tau: np.ndarray, rho: np.ndarray) -> np.ndarray:
    n = tau.shape[0]
    K = np.arange(n + 1)
    up = np.sqrt((n - K) / n)
    down = np.sqrt(K / n)
    pad = np.zeros((n + 2, n + 2), dtype=complex)
    pad[1:-1, 1:-1] = tau
    # up component sits at k = K, down at k = K - 1
    U, D = slice(1, n + 2), slice(0, n + 1)
    return (np.outer(up, up) * pad[U, U] * rho[0, 0] + np.outer(up, down) * pad[U, D] * rho[0, 1]
            + np.outer(down, up) * pad[D, U] * rho[1, 0] + np.outer(down, down) * pad[D, D] * rho[1, 1])


def _minus(tau: np.ndarray, rho: np.ndarray) -> np.ndarray:
    n = tau.shape[0]
    K = np.arange(n - 1)
    up = -np.sqrt((K + 1) / n)
    down = np.sqrt((n - 1 - K) / n)
    # up component sits at k = K + 1, down at k = K
    U, D = slice(1, n), slice(0, n - 1)
    return (np.outer(up, up) * tau[U, U] * rho[0, 0] + np.outer(up, down) * tau[U, D] * rho[0, 1]
            + np.outer(down, up) * tau[D, U] * rho[1, 0] + np.outer(down, down) * tau[D, D] * rho[1, 1])


def spin_distribution(states) -> dict[int, float]:
    """P(total spin J) for a product of qubit states, keyed by 2J."""
    states = np.asarray(states, dtype=complex)
    if states.ndim != 3 or states.shape[1:] != (2, 2):
        raise ValueError(f"expected a (T, 2, 2) array of qubit states, got {states.shape}")
    blocks = {1: states[0].copy()}
    for rho in states[1:]:
        nxt: dict[int, np.ndarray] = {}
        for two_j, tau in blocks.items():
            for key, block in ((two_j + 1, _plus(tau, rho)),
                               (two_j - 1, _minus(tau, rho) if two_j > 0 else None)):
                if block is None:
                    continue
                if key in nxt:
                    nxt[key] += block
                else:
                    nxt[key] = block
        blocks = nxt
    probs = {k: float(np.trace(b).real) for k, b in sorted(blocks.items())}
    total = sum(probs.values())
    if abs(total - 1) > PROB_TOL:
        raise ArithmeticError(f"spin-sector probabilities sum to {total!r}")
    return {k: max(p, 0.0) for k, p in probs.items()}


def a_value(two_J: int, T: int) -> float:
    """Eigenvalue of A = (1/T^2) sum_{i != j} S_ij - I/2 on the sector with total spin J."""
    J = two_J / 2
    pair_sum = T * (T - 1) / 4 + J * (J + 1) - 3 * T / 4
    return 2 * pair_sum / T ** 2 - 0.5


def a_distribution(states) -> tuple[np.ndarray, np.ndarray]:
    """(values, probabilities) of the outcome of measuring A, values ascending."""
    T = len(states)
    dist = spin_distribution(states)
    values = np.array([a_value(k, T) for k in dist])
    probs = np.array(list(dist.values()))
    order = np.argsort(values)
    probs = probs[order]
    return values[order], probs / probs.sum()
