"""Test operators and the dense matrix-exponential oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .inverse import as_csr
from .toeplitz import ToeplitzOperator

__all__ = [
    "GrunwaldWeights",
    "poisson2d",
    "grunwald_weights",
    "grunwald_matrix",
    "fde_onesided",
    "fde_onesided_initial",
    "fde_twosided_toeplitz",
    "fde_twosided_csr",
    "sensitive_tridiag",
    "dense_expm",
    "GENERATORS",
]


def poisson2d(k: int) -> sp.csr_matrix:
    """5-point Laplacian on a k x k grid: 4 on the diagonal, -1 at neighbours."""
    if k < 2:
        raise ValueError("grid size must be at least 2")
    T = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(k, k))
    I = sp.identity(k)
    return as_csr(sp.kron(I, T) + sp.kron(T, I))


@dataclass(frozen=True)
class GrunwaldWeights:
    beta: float
    g: np.ndarray


def grunwald_weights(beta: float, n: int) -> GrunwaldWeights:
    """g_k = (-1)^k binom(beta, k), k = 0..n, by the product recurrence."""
    if not 1.0 < beta < 2.0:
        raise ValueError(f"beta must lie in (1, 2), got {beta}")
    g = np.empty(n + 1)
    g[0] = 1.0
    for k in range(1, n + 1):
        g[k] = (1.0 - (beta + 1.0) / k) * g[k - 1]
    return GrunwaldWeights(beta=beta, g=g)


def grunwald_matrix(n: int, beta: float) -> sp.csr_matrix:
    """Lower Hessenberg Toeplitz G with G[i, j] = g_{i-j+1} for i - j >= -1."""
    g = grunwald_weights(beta, n).g
    col = g[1 : n + 1]
    row = np.zeros(n)
    row[0], row[1] = g[1], g[0]
    return as_csr(np.tril(la.toeplitz(col, row), 1))


def _grid(n):
    h = 1.0 / (n + 1)
    return h, h * np.arange(1, n + 1)


def fde_onesided(n: int, beta: float) -> sp.csr_matrix:
    """h^{-beta} D G with d(x) = Gamma(4 - beta)/6 x^{1 + beta} on interior nodes."""
    if n < 4:
        raise ValueError("need n >= 4")
    h, x = _grid(n)
    d = math.gamma(4.0 - beta) / 6.0 * x ** (1.0 + beta)
    return as_csr(sp.diags(d) @ grunwald_matrix(n, beta) / h**beta)


def fde_onesided_initial(n: int, beta: float, A=None) -> np.ndarray:
    """Vector u0 + (A + I)^{-1} b~ whose exponential action gives the FDE solution.

    u0 = x^3; b~ is the time-independent part of the source plus the
    right boundary value u(1, t) = e^{-t} folded into the last row.
    """
    h, x = _grid(n)
    A = fde_onesided(n, beta) if A is None else A
    d_last = math.gamma(4.0 - beta) / 6.0 * x[-1] ** (1.0 + beta)
    b = -(1.0 + x) * x**3
    b[-1] += d_last / h**beta  # g_0 = 1 couples the last node to u(1)
    shifted = sp.csc_matrix(A + sp.identity(n))
    return x**3 + sp.linalg.spsolve(shifted, b)


def _twosided_columns(n, beta, d1, d2):
    h, _ = _grid(n)
    g = grunwald_weights(beta, n).g
    gcol = g[1 : n + 1]  # first column of G
    grow = np.zeros(n)
    grow[0], grow[1] = g[1], g[0]  # first row of G
    scale = 1.0 / h**beta
    return scale * (d1 * gcol + d2 * grow), scale * (d1 * grow + d2 * gcol)


def fde_twosided_toeplitz(n: int, beta: float, d1: float = 1.0, d2: float = 3.0) -> ToeplitzOperator:
    """h^{-beta} (d1 G + d2 G^T) for constant diffusion coefficients."""
    if n < 4:
        raise ValueError("need n >= 4")
    col, row = _twosided_columns(n, beta, d1, d2)
    return ToeplitzOperator(col, row)


def fde_twosided_csr(n: int, beta: float, d1: float = 1.0, d2: float = 3.0) -> sp.csr_matrix:
    h, _ = _grid(n)
    G = grunwald_matrix(n, beta)
    return as_csr((d1 * G + d2 * G.T) / h**beta)


def sensitive_tridiag(n: int) -> sp.csr_matrix:
    """Nonsymmetric tridiagonal with ill-conditioned eigenvalues.

    Diagonal -(2j + 3), superdiagonal j + 1, subdiagonal 1/(j + 1) for
    j = 1..n; real spectrum in the left half plane.
    """
    j = np.arange(1, n + 1, dtype=float)
    return as_csr(sp.diags([1.0 / (j[1:] + 0.0), -(2 * j + 3), j[:-1] + 1.0], [-1, 0, 1]))


# Pade(13) coefficients and the 1-norm bound below which no scaling is needed
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def dense_expm(A, t: float = 1.0) -> np.ndarray:
    """exp(t A) by scaling and squaring with the diagonal [13/13] Pade approximant."""
    A = np.asarray(A.toarray() if sp.issparse(A) else A, dtype=float) * t
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix must be square, got {A.shape}")
    norm1 = np.linalg.norm(A, 1) if n else 0.0
    if not np.isfinite(norm1):
        raise OverflowError("matrix has non-finite entries")
    s = max(0, math.ceil(math.log2(norm1 / _THETA13))) if norm1 > 0 else 0
    if s > 1000:
        raise OverflowError(f"||tA||_1 = {norm1:.3e} is beyond the scaling range")
    A = A / 2.0**s
    b = _PADE13
    I = np.eye(n)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I
    R = la.solve(V - U, V + U)
    triangular = not np.any(np.tril(A, -1))
    if triangular:
        _fix_triangular(R, A)
    for i in range(s):
        R = R @ R
        if triangular:
            _fix_triangular(R, A * 2.0 ** (i + 1))
    return R


def _fix_triangular(R, T):
    """Overwrite the diagonal and first superdiagonal of R = exp(T) by exact formulas."""
    d = np.diag(T)
    np.fill_diagonal(R, np.exp(d))
    if d.size < 2:
        return
    l1, l2 = d[:-1], d[1:]
    t12 = np.diag(T, 1)
    z = (l2 - l1) / 2.0
    with np.errstate(over="ignore", invalid="ignore"):
        sinch = np.where(z == 0.0, 1.0, np.sinh(z) / np.where(z == 0.0, 1.0, z))
        sup = t12 * np.exp((l1 + l2) / 2.0) * sinch
    far = ~np.isfinite(sup)
    if far.any():
        sup[far] = t12[far] * (np.exp(l2[far]) - np.exp(l1[far])) / (l2[far] - l1[far])
    idx = np.arange(d.size - 1)
    R[idx, idx + 1] = sup


GENERATORS = {
    "poisson2d": poisson2d,
    "fde_onesided": fde_onesided,
    "fde_twosided": fde_twosided_toeplitz,
    "sensitive_tridiag": sensitive_tridiag,
}
