"""Doubly hyperdominant matrices and the pairwise (zero-excess) decomposition.

A symmetric DH matrix with zero row sums is a nonnegative combination of
``(e_i - e_j)(e_i - e_j)^T``. The weights come from a Birkhoff-von Neumann
split of the doubly stochastic matrix ``R = I - T2 / r``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

OFFDIAG_TOL = 1e-12
SUM_TOL = 1e-10
STOCHASTIC_TOL = 1e-9
SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class PairwiseTerm:
    lam: float
    i: int
    j: int

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("pairwise term needs i != j")
        if self.lam < 0:
            raise ValueError(f"negative weight {self.lam}")

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "i": self.i, "j": self.j}


@dataclass(frozen=True)
class BirkhoffTerm:
    """``alpha * P`` where ``P[i, perm[i]] = 1`` (0-based)."""

    alpha: float
    perm: tuple[int, ...]

    def matrix(self) -> np.ndarray:
        n = len(self.perm)
        P = np.zeros((n, n))
        P[np.arange(n), self.perm] = 1.0
        return P


def _square(Q, name: str = "matrix") -> np.ndarray:
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"{name} must be square, got shape {Q.shape}")
    return Q


def is_doubly_hyperdominant(Q) -> bool:
    """Off-diagonal entries nonpositive, row and column sums nonnegative."""
    Q = _square(Q)
    scale = float(np.max(np.abs(Q))) if Q.size else 0.0
    if scale == 0:
        return True
    off = Q - np.diag(np.diag(Q))
    if np.max(off) > OFFDIAG_TOL * scale:
        return False
    return bool(np.min(Q.sum(axis=1)) >= -SUM_TOL * scale and np.min(Q.sum(axis=0)) >= -SUM_TOL * scale)


def has_zero_excess(Q) -> bool:
    Q = _square(Q)
    scale = float(np.max(np.abs(Q))) if Q.size else 0.0
    return bool(np.all(np.abs(Q.sum(axis=1)) <= SUM_TOL * max(scale, 1e-300)))


def birkhoff(R) -> list[BirkhoffTerm]:
    """Greedy Birkhoff-von Neumann decomposition of a doubly stochastic matrix.

    Each round takes a perfect matching on the current support, removes the
    smallest matched entry's worth of that permutation, and repeats. Every
    round zeroes at least one entry, which bounds the count by ``n^2 - 2n + 2``.
    """
    R = _square(R, "R").copy()
    n = R.shape[0]
    if np.min(R) < -SUPPORT_TOL:
        raise ValueError("R has negative entries")
    if (np.max(np.abs(R.sum(axis=0) - 1)) > STOCHASTIC_TOL
            or np.max(np.abs(R.sum(axis=1) - 1)) > STOCHASTIC_TOL):
        raise ValueError("R is not doubly stochastic")
    R = np.maximum(R, 0.0)
    max_terms = n * n - 2 * n + 2
    terms: list[BirkhoffTerm] = []
    remaining = 1.0
    while remaining > SUPPORT_TOL:
        if len(terms) >= max_terms:
            raise RuntimeError(f"Birkhoff loop exceeded {max_terms} terms; support is numerically degenerate")
        graph = csr_matrix((R > SUPPORT_TOL).astype(np.int8))
        perm = maximum_bipartite_matching(graph, perm_type="column")
        if np.any(perm < 0):
            if remaining < 1e-9:
                break
            raise RuntimeError(f"no perfect matching on the support with {remaining:.3e} mass left")
        rows = np.arange(n)
        alpha = float(np.min(R[rows, perm]))
        R[rows, perm] -= alpha
        R[R < SUPPORT_TOL] = 0.0
        terms.append(BirkhoffTerm(alpha, tuple(int(p) for p in perm)))
        remaining -= alpha
    return terms


def decompose_zero_excess(T2) -> list[PairwiseTerm]:
    """Weights ``lambda_ij >= 0`` (i < j) with ``sum lambda_ij (e_i-e_j)(e_i-e_j)^T = T2``."""
    T2 = _square(T2, "T2")
    scale = float(np.max(np.abs(T2))) if T2.size else 0.0
    if np.max(np.abs(T2 - T2.T), initial=0.0) > OFFDIAG_TOL * max(scale, 1e-300):
        raise ValueError("T2 must be symmetric")
    if not is_doubly_hyperdominant(T2):
        raise ValueError("T2 is not doubly hyperdominant")
    if not has_zero_excess(T2):
        raise ValueError("T2 row sums are not zero")
    r = float(np.max(T2)) if T2.size else 0.0
    if r <= 1e-14:
        return []
    n = T2.shape[0]
    T2 = 0.5 * (T2 + T2.T)
    R = np.eye(n) - T2 / r
    R = np.maximum(R, 0.0)
    # Restore unit row sums lost to the clipping and to zero-excess round-off.
    R[np.diag_indices(n)] += 1.0 - R.sum(axis=1)
    lam: dict[tuple[int, int], float] = {}
    for term in birkhoff(R):
        beta = r * term.alpha / 2.0
        for i, j in enumerate(term.perm):
            if i != j:
                key = (min(i, j), max(i, j))
                lam[key] = lam.get(key, 0.0) + beta
    return [PairwiseTerm(v, i, j) for (i, j), v in sorted(lam.items())]


def reconstruct(terms, n: int) -> np.ndarray:
    out = np.zeros((n, n))
    for t in terms:
        if not (0 <= t.i < n and 0 <= t.j < n):
            raise IndexError(f"term index ({t.i}, {t.j}) outside dimension {n}")
        out[t.i, t.i] += t.lam
        out[t.j, t.j] += t.lam
        out[t.i, t.j] -= t.lam
        out[t.j, t.i] -= t.lam
    return out
