"""Dense complex linear algebra on tensor-product spaces.

Matrices are plain ``numpy`` arrays (row-major, complex128).  Tensor factors
are indexed from 0; a space with factor dimensions ``(d0, d1, ...)`` orders
basis vectors as ``numpy.kron`` does, factor 0 being the most significant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_RTOL = 1e-12
SQRT_FLOOR = 1e-14


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible with a tensor space."""


@dataclass(frozen=True)
class TensorSpace:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"factor dimensions must be >= 1, got {self.dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def check_operator(self, X: np.ndarray) -> None:
        D = self.total_dim
        if X.shape != (D, D):
            raise DimensionError(f"operator of shape {X.shape} does not live on dims {self.dims}")

    def check_indices(self, indices: Iterable[int]) -> tuple[int, ...]:
        idx = tuple(sorted(set(int(i) for i in indices)))
        for i in idx:
            if not 0 <= i < self.n:
                raise IndexError(f"factor index {i} out of range for {self.n} factors")
        return idx


def as_space(space: TensorSpace | Sequence[int]) -> TensorSpace:
    return space if isinstance(space, TensorSpace) else TensorSpace(tuple(space))


def is_hermitian(X: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(X)))) if X.size else 1.0
    return float(np.max(np.abs(X - X.conj().T), initial=0.0)) <= rtol * scale


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more matrices, left to right."""
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def partial_trace(X: np.ndarray, space, traced: Iterable[int]) -> np.ndarray:
    """Trace out the factors listed in ``traced``; the rest keep their order."""
    space = as_space(space)
    space.check_operator(X)
    traced = space.check_indices(traced)
    n = space.n
    kept = [k for k in range(n) if k not in traced]
    t = X.reshape(space.dims + space.dims)
    # row axis k pairs with column axis n + k
    for offset, k in enumerate(traced):
        cur = n - offset
        axis = k - offset
        t = np.trace(t, axis1=axis, axis2=axis + cur)
    d_kept = int(np.prod([space.dims[k] for k in kept])) if kept else 1
    return t.reshape(d_kept, d_kept)


def embed(op: np.ndarray, space, targets: Sequence[int]) -> np.ndarray:
    """Place ``op`` (acting on ``targets`` in the given order) into the full space."""
    space = as_space(space)
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError("repeated target factor")
    space.check_indices(targets)
    dims = space.dims
    d_t = [dims[t] for t in targets]
    D_t = int(np.prod(d_t))
    if op.shape != (D_t, D_t):
        raise DimensionError(f"operator shape {op.shape} does not match targets {targets}")
    rest = [k for k in range(space.n) if k not in targets]
    d_r = [dims[k] for k in rest]
    D_r = int(np.prod(d_r)) if rest else 1
    full = np.kron(op, np.eye(D_r)).reshape(d_t + d_r + d_t + d_r)
    order = targets + rest
    k = len(order)
    # axis j of `full` holds factor order[j]; send it back to position order[j]
    inv = np.argsort(order)
    axes = list(inv) + [k + a for a in inv]
    return full.transpose(axes).reshape(space.total_dim, space.total_dim)


def permutation_operator(space, perm: Sequence[int]) -> np.ndarray:
    """0/1 unitary sending the content of factor k to factor ``perm[k]``.

    With this convention ``P(pi) @ P(tau) == P(pi o tau)``.
    """
    space = as_space(space)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(space.n)):
        raise ValueError(f"{perm} is not a permutation of {space.n} factors")
    for k, p in enumerate(perm):
        if space.dims[k] != space.dims[p]:
            raise DimensionError(f"cannot permute factors {k} and {p} of unequal dimension")
    D = space.total_dim
    src = np.unravel_index(np.arange(D), space.dims)
    dst = [None] * space.n
    for k, p in enumerate(perm):
        dst[p] = src[k]
    rows = np.ravel_multi_index(dst, space.dims)
    P = np.zeros((D, D), dtype=complex)
    P[rows, np.arange(D)] = 1.0
    return P


def swap_perm(n: int, i: int, j: int) -> list[int]:
    perm = list(range(n))
    perm[i], perm[j] = j, i
    return perm


def cycle_perm(n: int, cycle: Sequence[int]) -> list[int]:
    """Permutation sending cycle[0] -> cycle[1] -> ... -> cycle[0]."""
    perm = list(range(n))
    for a, b in zip(cycle, list(cycle[1:]) + [cycle[0]]):
        perm[a] = b
    return perm


def hadamard_div(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Entry-wise A / B with the convention 0/0 = 0; x/0 for x != 0 raises."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    zero = B == 0
    if np.any(zero & (A != 0)):
        raise ZeroDivisionError("hadamard_div: nonzero entry divided by zero")
    out = np.zeros(np.broadcast_shapes(A.shape, B.shape), dtype=np.result_type(A, B, float))
    np.divide(A, B, out=out, where=~zero)
    return out


def eig_hermitian(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and orthonormal eigenvector columns."""
    H = np.asarray(H)
    if not is_hermitian(H):
        raise ValueError("eig_hermitian: input is not Hermitian")
    w, V = np.linalg.eigh((H + H.conj().T) / 2)
    return w[::-1].copy(), V[:, ::-1].copy()


def apply_product(factors: Sequence[np.ndarray], X: np.ndarray) -> np.ndarray:
    """Return (f_0 (x) f_1 (x) ...) @ X without forming the Kronecker product."""
    dims = [f.shape[0] for f in factors]
    D = int(np.prod(dims))
    if X.shape[0] != D:
        raise DimensionError(f"left operand dims {dims} do not match {X.shape}")
    cols = X.shape[1]
    t = X.reshape(dims + [cols])
    for k, f in enumerate(factors):
        t = np.moveaxis(np.tensordot(f, t, axes=([1], [k])), 0, k)
    return t.reshape(D, cols)


def product_expectation(factors: Sequence[np.ndarray], X: np.ndarray) -> complex:
    """Tr[(f_0 (x) f_1 (x) ...) X]."""
    dims = [f.shape[0] for f in factors]
    t = X.reshape(dims + dims)
    for f in factors:
        # contract the current leading row axis and its column partner
        cur = t.ndim // 2
        t = np.tensordot(f, t, axes=([1, 0], [0, cur]))
    return complex(t)


def sqrtm_psd(rho: np.ndarray) -> np.ndarray:
    """PSD square root; eigenvalues at round-off level are set to 0 before the root."""
    w, V = np.linalg.eigh((rho + rho.conj().T) / 2)
    w = np.where(w > SQRT_FLOOR * max(1.0, float(w[-1])), w, 0.0)
    return (V * np.sqrt(w)) @ V.conj().T
