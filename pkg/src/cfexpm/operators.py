"""Counting linear operators consumed by the Krylov process."""

from __future__ import annotations

import threading

import numpy as np
import scipy.sparse as sp

__all__ = ["LinearOperator", "aslinearoperator"]


class LinearOperator:
    """Real n x n operator given by a callable.

    ``func`` must accept either a length-n vector or an (n, q) block and
    return an array of the same shape. ``applies`` counts vector
    applications: a block of q columns counts q.
    """

    def __init__(self, n: int, func, name: str = "op"):
        self.n = int(n)
        self._func = func
        self.name = name
        self.applies = 0
        self._lock = threading.Lock()

    def __repr__(self):
        return f"LinearOperator({self.name!r}, n={self.n}, applies={self.applies})"

    def _count(self, q: int) -> None:
        with self._lock:
            self.applies += q

    def apply(self, v):
        v = np.asarray(v)
        if v.shape[0] != self.n or v.ndim > 2:
            raise ValueError(f"{self.name}: expected leading dimension {self.n}, got {v.shape}")
        if np.iscomplexobj(v):
            return self.apply(v.real) + 1j * self.apply(v.imag)
        self._count(1 if v.ndim == 1 else v.shape[1])
        return np.asarray(self._func(v))

    __call__ = apply
    matvec = apply

    def reset(self) -> None:
        self.applies = 0


def aslinearoperator(A, name: str = "A") -> LinearOperator:
    """Wrap a dense array, scipy sparse matrix or LinearOperator."""
    if isinstance(A, LinearOperator):
        return A
    if sp.issparse(A):
        A = sp.csr_matrix(A)
        return LinearOperator(A.shape[0], lambda v: A @ v, name)
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"operator must be square, got shape {A.shape}")
    return LinearOperator(A.shape[0], lambda v: A @ v, name)
