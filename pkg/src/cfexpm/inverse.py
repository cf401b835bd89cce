"""Exact inverse application backends for the preconditioned solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .operators import LinearOperator

__all__ = [
    "FactorizationError",
    "SparseLuFactors",
    "as_csr",
    "sparse_lu",
    "lu_apply_inverse",
    "as_inverse_operator",
    "custom_inverse_operator",
]

PIVOT_TOL = 1e-14


class FactorizationError(RuntimeError):
    pass


def as_csr(A) -> sp.csr_matrix:
    """Canonical CSR: sorted column indices, duplicates summed, no stored zeros."""
    A = sp.csr_matrix(A, dtype=float, copy=True)
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


@dataclass(frozen=True)
class SparseLuFactors:
    """P_r A P_c = L U with row permutation from partial pivoting and a
    minimum-degree column ordering on the pattern of A^T A."""

    n: int
    _lu: spla.SuperLU

    @property
    def L(self):
        return self._lu.L

    @property
    def U(self):
        return self._lu.U

    @property
    def perm_r(self):
        return self._lu.perm_r

    @property
    def perm_c(self):
        return self._lu.perm_c

    @property
    def fill_in(self) -> int:
        return int(self._lu.L.nnz + self._lu.U.nnz)

    def permutation_matrices(self):
        n = self.n
        Pr = sp.csc_matrix((np.ones(n), (self.perm_r, np.arange(n))), shape=(n, n))
        Pc = sp.csc_matrix((np.ones(n), (np.arange(n), self.perm_c)), shape=(n, n))
        return Pr, Pc


def sparse_lu(A) -> SparseLuFactors:
    A = as_csr(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise FactorizationError(f"matrix must be square, got {A.shape}")
    amax = abs(A).max() if A.nnz else 0.0
    if amax == 0.0:
        raise FactorizationError("zero matrix is singular")
    try:
        lu = spla.splu(A.tocsc(), permc_spec="MMD_ATA", diag_pivot_thresh=1.0)
    except RuntimeError as exc:
        raise FactorizationError(f"sparse LU failed: {exc}") from exc
    pivots = np.abs(lu.U.diagonal())
    if pivots.min() < PIVOT_TOL * amax:
        raise FactorizationError(
            f"numerically singular: smallest pivot {pivots.min():.2e} vs max entry {amax:.2e}"
        )
    return SparseLuFactors(n=n, _lu=lu)


def lu_apply_inverse(F: SparseLuFactors, w):
    w = np.asarray(w, dtype=float)
    if w.shape[0] != F.n:
        raise ValueError(f"vector has length {w.shape[0]}, factors have dimension {F.n}")
    return F._lu.solve(w)


def as_inverse_operator(F: SparseLuFactors) -> LinearOperator:
    return LinearOperator(F.n, lambda w: lu_apply_inverse(F, w), name="lu-inverse")


def custom_inverse_operator(n: int, apply_inverse, name: str = "custom-inverse") -> LinearOperator:
    """Hook for user-supplied inverse application (e.g. an inner iterative solver)."""
    return LinearOperator(n, apply_inverse, name=name)
