"""Block Arnoldi (Ruhe's column-by-column variant) with deflated restarting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .operators import LinearOperator

__all__ = [
    "ArnoldiError",
    "ArnoldiBreakdown",
    "DeflationUnsupported",
    "RestartError",
    "ArnoldiState",
    "RitzSet",
    "qr_block",
    "initial_state",
    "arnoldi_extend",
    "compute_ritz",
    "deflated_restart",
]

BREAKDOWN_TOL = 1e-12
RANK_TOL = 1e-12


class ArnoldiError(RuntimeError):
    pass


class DeflationUnsupported(ArnoldiError):
    """A starting block is numerically rank deficient."""


class RestartError(ArnoldiError):
    pass


class ArnoldiBreakdown(ArnoldiError):
    """The candidate for basis column ``column`` vanished.

    ``state`` holds the basis up to (excluding) that column and the
    projection including the operator column that produced it, so a caller
    can test whether the current space is invariant.
    """

    def __init__(self, column: int, state: "ArnoldiState"):
        super().__init__(f"Arnoldi breakdown: basis column {column} is numerically zero")
        self.column = column
        self.state = state


@dataclass
class ArnoldiState:
    """Orthonormal basis V (n x (ncols + p)) and projection H ((ncols + p) x ncols).

    Satisfies Op(V[:, :ncols]) = V @ H. ``k_defl`` is the number of Ritz
    columns carried over by the last restart (0 on the first cycle), so the
    current residual block lives in V[:, k_defl:k_defl + p].
    """

    V: np.ndarray
    H: np.ndarray
    p: int
    k_defl: int = 0

    @property
    def ncols(self) -> int:
        return self.H.shape[1]

    @property
    def j(self) -> float:
        return self.ncols / self.p

    @property
    def Hm(self) -> np.ndarray:
        return self.H[: self.ncols]

    @property
    def H_last(self) -> np.ndarray:
        """Trailing p x p block H_{m+1,m}."""
        return self.H[self.ncols :, self.ncols - self.p :]

    @property
    def V_last(self) -> np.ndarray:
        return self.V[:, self.ncols : self.ncols + self.p]


@dataclass(frozen=True)
class RitzSet:
    values: np.ndarray
    vectors: np.ndarray  # columns
    residual_factors: np.ndarray | None  # H_{m+1,m} E_m^T y_j as columns


def qr_block(R0):
    """Thin QR with nonnegative diagonal in the triangular factor."""
    R0 = np.asarray(R0, dtype=float)
    s = la.svdvals(R0)
    if s.size == 0 or s[-1] <= RANK_TOL * s[0]:
        raise DeflationUnsupported(
            "starting block is numerically rank deficient "
            f"(singular values {s.min() if s.size else 0:.2e} / {s.max() if s.size else 0:.2e})"
        )
    Q, R = np.linalg.qr(R0)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def initial_state(R0) -> tuple[ArnoldiState, np.ndarray]:
    V1, Rcoef = qr_block(R0)
    p = V1.shape[1]
    return ArnoldiState(V=V1, H=np.zeros((p, 0)), p=p), Rcoef


def arnoldi_extend(op: LinearOperator, state: ArnoldiState, m: int) -> ArnoldiState:
    """Grow the basis to m*p columns, one operator application per new column.

    Classical Gram-Schmidt with one full reorthogonalization pass.
    """
    p, c0 = state.p, state.ncols
    target = m * p
    if c0 >= target:
        raise ArnoldiError(f"state already has {c0} columns, target is {target}")
    n = state.V.shape[0]
    V = np.zeros((n, target + p))
    H = np.zeros((target + p, target))
    V[:, : c0 + p] = state.V
    H[: c0 + p, :c0] = state.H

    for c in range(c0, target):
        w = op.apply(V[:, c])
        wnorm = np.linalg.norm(w)
        basis = V[:, : c + p]
        h = basis.T @ w
        w = w - basis @ h
        h2 = basis.T @ w
        w = w - basis @ h2
        h += h2
        H[: c + p, c] = h
        beta = np.linalg.norm(w)
        if beta <= BREAKDOWN_TOL * max(wnorm, np.finfo(float).tiny):
            partial = ArnoldiState(
                V=V[:, : c + p].copy(), H=H[: c + p, : c + 1].copy(), p=p, k_defl=state.k_defl
            )
            raise ArnoldiBreakdown(c + p, partial)
        H[c + p, c] = beta
        V[:, c + p] = w / beta
    return ArnoldiState(V=V, H=H, p=p, k_defl=state.k_defl)


def _normalise_vectors(Y):
    """Unit 2-norm, largest-magnitude entry real positive."""
    Y = Y / np.linalg.norm(Y, axis=0)
    idx = np.argmax(np.abs(Y), axis=0)
    lead = Y[idx, np.arange(Y.shape[1])]
    return Y * (np.abs(lead) / lead)


def compute_ritz(H, p: int | None = None, order: str = "largest") -> RitzSet:
    """Eigenpairs of the square part of H, sorted for deflation.

    ``order`` is "largest" or "smallest" by modulus. Conjugate pairs stay
    adjacent, the member with positive imaginary part first. If H has p
    extra rows, residual factors H_{m+1,m} E_m^T y_j are returned too.
    """
    H = np.asarray(H)
    mp = H.shape[1]
    Hm = H[:mp]
    try:
        mu, Y = la.eig(Hm, check_finite=True)
    except la.LinAlgError as exc:
        raise ArnoldiError(f"eigensolver failed: {exc}") from exc
    Y = _normalise_vectors(Y.astype(complex))
    sign = -1.0 if order == "largest" else 1.0
    if order not in ("largest", "smallest"):
        raise ValueError(f"unknown Ritz order {order!r}")
    perm = np.lexsort((-mu.imag, mu.real, sign * np.abs(mu)))
    mu, Y = mu[perm], Y[:, perm]
    factors = None
    if H.shape[0] > mp:
        p = p if p is not None else H.shape[0] - mp
        factors = H[mp:, mp - p :] @ Y[mp - p :]
    return RitzSet(values=mu, vectors=Y, residual_factors=factors)


def _selection(values, k, kmax):
    """Number of leading Ritz pairs to take so no conjugate pair is split."""
    if k == 0:
        return 0
    last = values[k - 1]
    if last.imag > 0 and k < len(values) and values[k] == np.conj(last):
        return k + 1 if k + 1 <= kmax else k - 1
    return k


def deflated_restart(state: ArnoldiState, ritz: RitzSet, k: int) -> ArnoldiState:
    """Compress the basis onto k Ritz vectors plus the last basis block.

    Complex Ritz vectors contribute their real and imaginary parts; k grows
    by one (or shrinks by one at the cap mp - p) to keep pairs whole.
    """
    p, mp = state.p, state.ncols
    if k < 0 or k >= mp:
        raise RestartError(f"deflation count k={k} must lie in [0, {mp})")
    k = _selection(ritz.values, k, mp - p)
    cols = []
    for mu, y in zip(ritz.values[:k], ritz.vectors[:, :k].T):
        if mu.imag == 0:
            cols.append(y.real)
        elif mu.imag > 0:
            cols += [y.real, y.imag]
    if k == 0:
        return ArnoldiState(V=state.V_last.copy(), H=np.zeros((p, 0)), p=p, k_defl=0)

    Yk = np.column_stack(cols)
    smin = la.svdvals(Yk)[-1]
    if smin < RANK_TOL:
        raise RestartError(f"selected Ritz vectors are rank deficient (sigma_min={smin:.2e})")
    Pk, _ = qr_block(Yk)
    P = np.zeros((mp + p, k + p))
    P[:mp, :k] = Pk
    P[mp:, k:] = np.eye(p)
    V_new = state.V @ P
    H_new = P.T @ state.H @ Pk
    return ArnoldiState(V=V_new, H=H_new, p=p, k_defl=k)
