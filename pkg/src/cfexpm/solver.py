"""Shifted block FOM with deflated restarting, plain and preconditioned.

All shifts share one real Krylov basis per cycle. In ``DIRECT`` mode the
basis is built on A and the projected systems are (H_m - tau I) Z = rhs.
In ``INVERT`` mode the basis is built on A^{-1} (right preconditioning by
A^{-1}) and the projected systems are (I - tau H_m) Z = rhs; the solutions
are recovered as X = A^{-1} Y at the end.
"""

from __future__ import annotations

import enum
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .arnoldi import (
    ArnoldiBreakdown,
    ArnoldiError,
    ArnoldiState,
    arnoldi_extend,
    compute_ritz,
    deflated_restart,
    initial_state,
)
from .operators import LinearOperator, aslinearoperator

__all__ = [
    "ShiftMode",
    "ShiftFamily",
    "RunStats",
    "CycleInfo",
    "ShiftFailure",
    "NonConvergence",
    "solve_projected",
    "residual_coefficients",
    "shifted_fom_dr",
    "run_sbfom_dr",
    "run_psbfom_dr",
]

COND_LIMIT = 1e14


class ShiftMode(enum.Enum):
    DIRECT = "direct"
    INVERT = "invert"


class ShiftFailure(ArnoldiError):
    def __init__(self, shift, cond):
        super().__init__(f"projected system for shift {shift} is singular (cond ~ {cond:.2e})")
        self.shift = shift


class NonConvergence(RuntimeError):
    def __init__(self, stats: "RunStats"):
        worst = max(stats.residual_history[-1]) if stats.residual_history else float("nan")
        super().__init__(
            f"not converged after {stats.cycles} cycles (largest residual {worst:.3e})"
        )
        self.stats = stats


@dataclass(frozen=True)
class ShiftFamily:
    mode: ShiftMode
    shifts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "shifts", np.atleast_1d(np.asarray(self.shifts, dtype=complex)))

    def __len__(self):
        return self.shifts.size

    def projected(self, Hm, i: int) -> np.ndarray:
        eye = np.eye(Hm.shape[0])
        tau = self.shifts[i]
        if self.mode is ShiftMode.DIRECT:
            return Hm - tau * eye
        return eye - tau * Hm

    @property
    def ritz_order(self) -> str:
        # DIRECT: eigenvalues of A nearest zero; INVERT: largest 1/lambda
        return "smallest" if self.mode is ShiftMode.DIRECT else "largest"


@dataclass
class RunStats:
    cycles: int = 0
    operator_applies: int = 0
    inverse_applies: int = 0
    fft_count: int = 0
    residual_history: list = field(default_factory=list)  # per cycle, per shift ||R_i||_F
    converged: list = field(default_factory=list)
    error: float | None = None
    wall_time: float = 0.0
    k_effective: int | None = None

    def to_dict(self) -> dict:
        return {
            "cycles": self.cycles,
            "operator_applies": self.operator_applies,
            "inverse_applies": self.inverse_applies,
            "fft_count": self.fft_count,
            "residual_history": [[float(x) for x in row] for row in self.residual_history],
            "converged": [bool(c) for c in self.converged],
            "error": self.error,
            "wall_time": self.wall_time,
            "k_effective": self.k_effective,
        }


@dataclass
class CycleInfo:
    """Snapshot handed to the per-cycle callback (read-only by convention)."""

    cycle: int
    state: ArnoldiState
    size: int  # number of basis columns used for the projected solves
    rhs_row: int
    active: np.ndarray  # shifts updated this cycle
    Z: dict  # shift index -> projected solution
    C: list  # residual coefficients, indexed by shift
    Y: list  # accumulated solutions, indexed by shift
    converged: np.ndarray


def solve_projected(Hm, family: ShiftFamily, rhs, which=None) -> list:
    """Dense LU solves of the projected shifted systems, one factorisation per shift."""
    Hm = np.asarray(Hm)
    rhs = np.asarray(rhs, dtype=complex)
    which = range(len(family)) if which is None else which
    out = []
    for i in which:
        M = family.projected(Hm, i)
        if M.size == 0:
            out.append(np.zeros_like(rhs))
            continue
        try:
            with warnings.catch_warnings():
                # exact singularity is reported below as a ShiftFailure
                warnings.simplefilter("ignore", la.LinAlgWarning)
                lu, piv = la.lu_factor(M, check_finite=True)
        except (la.LinAlgError, ValueError) as exc:
            raise ShiftFailure(family.shifts[i], np.inf) from exc
        rcond = _rcond_from_lu(M, lu)
        if rcond * COND_LIMIT < 1.0:
            raise ShiftFailure(family.shifts[i], 1.0 / max(rcond, 1e-300))
        out.append(la.lu_solve((lu, piv), rhs))
    return out


def _rcond_from_lu(M, lu) -> float:
    anorm = np.linalg.norm(M, 1)
    if anorm == 0.0:
        return 0.0
    if np.any(np.diag(lu) == 0):
        return 0.0
    gecon = la.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    return float(rcond) if info == 0 else 0.0


def residual_coefficients(family: ShiftFamily, Hbar, Z, which=None) -> list:
    """p x p coefficients C_i with residual_i = V_last C_i."""
    Hbar = np.asarray(Hbar)
    mp = Hbar.shape[1]
    p = Hbar.shape[0] - mp
    if p <= 0:
        raise ValueError("Hbar needs p extra rows")
    H_last = Hbar[mp:, mp - p :]
    which = range(len(family)) if which is None else which
    out = []
    for i, Zi in zip(which, Z):
        Zi = np.asarray(Zi)
        if Zi.shape[0] != mp:
            raise ValueError(f"projected solution has {Zi.shape[0]} rows, expected {mp}")
        tail = H_last @ Zi[mp - p :]
        if family.mode is ShiftMode.DIRECT:
            out.append(-tail)
        else:
            out.append(family.shifts[i] * tail)
    return out


def _invariant_truncation(exc: ArnoldiBreakdown, rhs_row: int):
    """Use the basis up to a breakdown if it spans an invariant subspace."""
    st = exc.state
    p = st.p
    size = exc.column - p + 1
    leak = st.H[size:, :size]
    scale = max(np.linalg.norm(st.H), 1.0)
    if leak.size and np.linalg.norm(leak) > 1e-12 * scale:
        raise exc
    if rhs_row + p > size:
        raise exc
    return st, size


def shifted_fom_dr(
    op,
    B,
    family: ShiftFamily,
    m: int = 30,
    k: int = 30,
    tol: float = 1e-8,
    max_cycles: int = 100,
    callback=None,
):
    """Core SBFOM-DR / PSBFOM-DR iteration.

    Returns the per-shift accumulated solutions (complex n x p blocks of the
    system solved in ``family.mode``) and RunStats. Shifts are frozen once
    ||R_i||_F <= tol ||B||_F.
    """
    op = aslinearoperator(op)
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    n, p = B.shape
    if n != op.n:
        raise ValueError(f"B has {n} rows, operator has dimension {op.n}")
    if k % p:
        raise ValueError(f"k={k} must be a multiple of the block size p={p}")
    if not 0 <= k < m * p:
        raise ValueError(f"need 0 <= k < m*p = {m * p}, got k={k}")
    if m * p > n:
        raise ValueError(f"search space m*p={m * p} exceeds dimension n={n}")

    t0 = time.perf_counter()
    applies0 = op.applies
    normB = np.linalg.norm(B)
    state, Rcoef = initial_state(B)
    nshift = len(family)
    Y = [np.zeros((n, p), dtype=complex) for _ in range(nshift)]
    C = [Rcoef.astype(complex) for _ in range(nshift)]
    converged = np.zeros(nshift, dtype=bool)
    stats = RunStats()
    rhs_row = 0

    for cycle in range(1, max_cycles + 1):
        lucky = False
        try:
            state = arnoldi_extend(op, state, m)
            size = state.ncols
        except ArnoldiBreakdown as exc:
            state, size = _invariant_truncation(exc, rhs_row)
            lucky = True

        stats.cycles = cycle
        stats.operator_applies = op.applies - applies0
        Hm = state.H[:size, :size]
        Vm = state.V[:, :size]
        active = np.flatnonzero(~converged)
        Zs = {}
        for i in active:
            rhs = np.zeros((size, p), dtype=complex)
            rhs[rhs_row : rhs_row + p] = C[i]
            (Z,) = solve_projected(Hm, family, rhs, which=[i])
            Zs[i] = Z
            Y[i] += Vm @ Z
            if lucky:
                C[i] = np.zeros((p, p), dtype=complex)
            else:
                (C[i],) = residual_coefficients(family, state.H, [Z], which=[i])
        norms = np.array([np.linalg.norm(c) for c in C])
        converged |= norms <= tol * normB
        stats.residual_history.append(norms.tolist())
        if callback is not None:
            callback(CycleInfo(cycle, state, size, rhs_row, active, Zs, C, Y, converged.copy()))
        if converged.all():
            break
        ritz = compute_ritz(state.H, p, order=family.ritz_order)
        state = deflated_restart(state, ritz, k)
        rhs_row = state.k_defl
    else:
        stats.converged = converged.tolist()
        stats.wall_time = time.perf_counter() - t0
        raise NonConvergence(stats)

    stats.converged = converged.tolist()
    stats.wall_time = time.perf_counter() - t0
    return Y, stats


def run_sbfom_dr(A, B, shifts, m=30, k=30, tol=1e-8, max_cycles=100, callback=None):
    """Solve (A - tau_i I) X_i = B for all shifts (unpreconditioned)."""
    family = ShiftFamily(ShiftMode.DIRECT, shifts)
    return shifted_fom_dr(A, B, family, m, k, tol, max_cycles, callback)


def run_psbfom_dr(invA, B, shifts, m=30, k=30, tol=1e-8, max_cycles=100, callback=None):
    """Solve (A - tau_i I) X_i = B via (I - tau_i A^{-1}) Y_i = B, X_i = A^{-1} Y_i.

    ``invA`` applies A^{-1}. The recovery applies it to the real and
    imaginary parts of every Y_i in one block.
    """
    invA = aslinearoperator(invA, name="invA")
    family = ShiftFamily(ShiftMode.INVERT, shifts)
    before = invA.applies
    Y, stats = shifted_fom_dr(invA, B, family, m, k, tol, max_cycles, callback)
    t0 = time.perf_counter()
    n, p = Y[0].shape
    stacked = np.hstack([np.hstack([y.real, y.imag]) for y in Y])
    W = invA.apply(stacked)
    X = []
    for i in range(len(Y)):
        blk = W[:, 2 * p * i : 2 * p * (i + 1)]
        X.append(blk[:, :p] + 1j * blk[:, p:])
    stats.inverse_applies = invA.applies - before
    stats.wall_time += time.perf_counter() - t0
    return X, stats
