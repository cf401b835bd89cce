"""End-to-end computation of exp(tA) B and the run configuration behind it."""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cf import CfRational, ReducedShifts, assemble_exponential, conjugate_reduce, get_cf
from .inverse import as_csr, as_inverse_operator, sparse_lu
from .mmio import read_matrix_market
from .operators import LinearOperator
from .problems import GENERATORS, dense_expm, fde_onesided_initial
from .solver import RunStats, run_psbfom_dr, run_sbfom_dr
from .toeplitz import ToeplitzOperator, gsf_generators

__all__ = [
    "ParameterError",
    "OracleRefused",
    "RunConfig",
    "ActionResult",
    "ORACLE_MAX_N",
    "STATS_SCHEMA",
    "STATS_VERSION",
    "dumps",
    "expm_action",
    "load_matrix",
    "load_rhs",
    "oracle_error",
    "run_expm_action",
    "stats_document",
]

ORACLE_MAX_N = 2000
STATS_SCHEMA = "cfexpm.run-stats"
STATS_VERSION = 1

MODES = ("sbfom", "psbfom")
BACKENDS = ("sparse-lu", "toeplitz-gsf")
RHS_GENERATORS = {"fde_onesided_initial"}


class ParameterError(ValueError):
    pass


class OracleRefused(ParameterError):
    pass


@dataclass
class RunConfig:
    """Fully resolved inputs of a single run.

    Exactly one of ``matrix`` and ``generator`` names the operator and
    exactly one of ``rhs``, ``rhs_random`` and ``rhs_generator`` names B.
    ``rhs_random`` is ``(p, seed)``.
    """

    matrix: str | None = None
    generator: str | None = None
    gen_args: dict = field(default_factory=dict)
    rhs: str | None = None
    rhs_random: tuple | None = None
    rhs_generator: str | None = None
    t: float = 1.0
    nu: int = 14
    m: int = 30
    k: int = 30
    tol: float = 1e-8
    max_cycles: int = 100
    mode: str = "psbfom"
    backend: str = "sparse-lu"
    oracle: bool = False

    def __post_init__(self):
        if self.rhs_random is not None:
            self.rhs_random = tuple(int(v) for v in self.rhs_random)

    def validate(self) -> None:
        if (self.matrix is None) == (self.generator is None):
            raise ParameterError("give exactly one of a matrix file and a generator")
        if self.generator is not None and self.generator not in GENERATORS:
            raise ParameterError(f"unknown generator {self.generator!r}; choose from {sorted(GENERATORS)}")
        sources = [self.rhs, self.rhs_random, self.rhs_generator]
        if sum(s is not None for s in sources) != 1:
            raise ParameterError("give exactly one right-hand side source")
        if self.rhs_random is not None and (len(self.rhs_random) != 2 or self.rhs_random[0] < 1):
            raise ParameterError("random right-hand side needs p >= 1 and a seed")
        if self.rhs_generator is not None and self.rhs_generator not in RHS_GENERATORS:
            raise ParameterError(f"unknown right-hand side generator {self.rhs_generator!r}")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}")
        if self.backend not in BACKENDS:
            raise ParameterError(f"backend must be one of {BACKENDS}")
        if not np.isfinite(self.t) or self.t == 0.0:
            raise ParameterError("t = 0 scales A to the zero matrix, which is singular")
        if self.m < 1 or self.k < 0 or self.max_cycles < 1:
            raise ParameterError("need m >= 1, k >= 0 and max_cycles >= 1")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")

    @property
    def seed(self):
        return None if self.rhs_random is None else self.rhs_random[1]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["rhs_random"] = None if self.rhs_random is None else list(self.rhs_random)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class ActionResult:
    Z: np.ndarray
    stats: RunStats
    rational: CfRational
    reduced: ReducedShifts
    solutions: list


def load_matrix(config: RunConfig):
    """CSR matrix or ToeplitzOperator, before scaling by t."""
    if config.matrix is not None:
        A = read_matrix_market(config.matrix)
        if not sp.issparse(A):
            A = as_csr(A)
        return A
    try:
        return GENERATORS[config.generator](**config.gen_args)
    except TypeError as exc:
        raise ParameterError(f"bad arguments for generator {config.generator!r}: {exc}") from exc


def load_rhs(config: RunConfig, A) -> np.ndarray:
    n = A.shape[0]
    if config.rhs is not None:
        B = read_matrix_market(config.rhs)
        B = B.toarray() if sp.issparse(B) else np.asarray(B)
    elif config.rhs_random is not None:
        p, seed = config.rhs_random
        B = np.random.default_rng(seed).standard_normal((n, p))
    else:
        if config.generator != "fde_onesided":
            raise ParameterError("fde_onesided_initial needs the fde_onesided generator")
        csr = A if sp.issparse(A) else as_csr(A.to_dense())
        B = fde_onesided_initial(n, config.gen_args["beta"], A=csr)[:, None]
    if B.ndim == 1:
        B = B[:, None]
    if B.shape[0] != n:
        raise ParameterError(f"right-hand side has {B.shape[0]} rows, matrix has dimension {n}")
    return B


def _scaled(A, t):
    if isinstance(A, ToeplitzOperator):
        return ToeplitzOperator(t * A.first_col, t * A.first_row)
    return as_csr(t * A)


def _is_zero(A) -> bool:
    if isinstance(A, ToeplitzOperator):
        return not (np.any(A.first_col) or np.any(A.first_row))
    return as_csr(A).nnz == 0


def expm_action(
    A,
    B,
    t: float = 1.0,
    nu: int = 14,
    mode: str = "psbfom",
    backend: str = "sparse-lu",
    m: int = 30,
    k: int = 30,
    tol: float = 1e-8,
    max_cycles: int = 100,
    rational: CfRational | None = None,
) -> ActionResult:
    """Approximate exp(tA) B with the degree-``nu`` CF rational function.

    Parameters
    ----------
    A : sparse matrix, ndarray or ToeplitzOperator
        Negative definite operator. A Toeplitz operator is required by the
        ``toeplitz-gsf`` backend and densified for ``sparse-lu``.
    B : ndarray, shape (n, p)
    mode : {"psbfom", "sbfom"}
        Preconditioned solver on A^{-1} or the plain solver on A.

    Returns
    -------
    ActionResult
        Real Z together with solver statistics.

    Raises
    ------
    ParameterError
        t = 0, a zero matrix, or an incompatible backend.
    NonConvergence
        Some shifted system missed the tolerance within ``max_cycles``.
    """
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}")
    if backend not in BACKENDS:
        raise ParameterError(f"backend must be one of {BACKENDS}")
    if t == 0.0 or not np.isfinite(t):
        raise ParameterError("t = 0 scales A to the zero matrix, which is singular")
    if _is_zero(A):
        raise ParameterError("A is the zero matrix, which is singular")
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]

    n, p = B.shape
    if m * p > n:
        raise ParameterError(f"search space m*p = {m * p} exceeds dimension n = {n}")
    if k >= m * p:
        # k = 30 with p = 1 leaves no room for new blocks; retain half the space
        k = (m * p // 2) // p * p

    r = rational if rational is not None else get_cf(nu)
    reduced = conjugate_reduce(r)
    tA = _scaled(A if isinstance(A, ToeplitzOperator) or sp.issparse(A) else as_csr(A), t)
    t0 = time.perf_counter()

    if backend == "toeplitz-gsf":
        if not isinstance(tA, ToeplitzOperator):
            raise ParameterError("the toeplitz-gsf backend needs a Toeplitz operator")
        if mode == "psbfom":
            gsf_generators(tA)
            X, stats = run_psbfom_dr(tA.as_inverse_operator(), B, reduced.shifts, m, k, tol, max_cycles)
        else:
            X, stats = run_sbfom_dr(tA.as_operator(), B, reduced.shifts, m, k, tol, max_cycles)
        stats.fft_count = tA.fft_count
    else:
        csr = as_csr(tA.to_dense()) if isinstance(tA, ToeplitzOperator) else tA
        if mode == "psbfom":
            inv = as_inverse_operator(sparse_lu(csr))
            X, stats = run_psbfom_dr(inv, B, reduced.shifts, m, k, tol, max_cycles)
        else:
            X, stats = run_sbfom_dr(LinearOperator(csr.shape[0], lambda v: csr @ v, "tA"),
                                    B, reduced.shifts, m, k, tol, max_cycles)

    Z = assemble_exponential(r, B, X, reduced)
    stats.k_effective = k
    stats.wall_time = time.perf_counter() - t0
    return ActionResult(Z=Z, stats=stats, rational=r, reduced=reduced, solutions=X)


def oracle_error(A, B, Z, t: float = 1.0) -> float:
    """Relative Frobenius error of Z against the dense exponential."""
    n = A.shape[0]
    if n > ORACLE_MAX_N:
        raise OracleRefused(f"dense oracle refused: n = {n} exceeds {ORACLE_MAX_N}")
    dense = A.to_dense() if isinstance(A, ToeplitzOperator) else A
    exact = dense_expm(dense, t) @ B
    return float(np.linalg.norm(Z - exact) / np.linalg.norm(exact))


def run_expm_action(config: RunConfig):
    """Execute a configuration; returns (Z, stats, error or None)."""
    config.validate()
    A = load_matrix(config)
    if config.oracle and A.shape[0] > ORACLE_MAX_N:
        raise OracleRefused(f"dense oracle refused: n = {A.shape[0]} exceeds {ORACLE_MAX_N}")
    B = load_rhs(config, A)
    res = expm_action(
        A, B, t=config.t, nu=config.nu, mode=config.mode, backend=config.backend,
        m=config.m, k=config.k, tol=config.tol, max_cycles=config.max_cycles,
    )
    error = oracle_error(A, B, res.Z, config.t) if config.oracle else None
    res.stats.error = error
    return res.Z, res.stats, error


def stats_document(config: RunConfig, stats: RunStats, status: str = "ok") -> dict:
    return {
        "schema": STATS_SCHEMA,
        "version": STATS_VERSION,
        "status": status,
        "seed": config.seed,
        "config": config.to_dict(),
        "stats": stats.to_dict(),
    }


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True)
