"""Action of the matrix exponential via Caratheodory-Fejer rational
approximation and a preconditioned shifted block FOM solver."""

from .action import ParameterError, RunConfig, expm_action, run_expm_action
from .arnoldi import ArnoldiBreakdown, ArnoldiError, ArnoldiState, arnoldi_extend, initial_state
from .cf import (
    CfRational,
    assemble_exponential,
    builtin_cf14,
    cf_poles_residues,
    conjugate_reduce,
    eval_cf,
    get_cf,
)
from .inverse import FactorizationError, as_inverse_operator, sparse_lu
from .mmio import read_matrix_market, write_matrix_market
from .operators import LinearOperator, aslinearoperator
from .problems import dense_expm, fde_onesided, fde_twosided_toeplitz, poisson2d
from .solver import NonConvergence, RunStats, ShiftMode, run_psbfom_dr, run_sbfom_dr
from .toeplitz import ToeplitzOperator, gsf_apply_inverse, gsf_generators

__version__ = "0.1.0"

__all__ = [
    "ArnoldiBreakdown",
    "ArnoldiError",
    "ArnoldiState",
    "CfRational",
    "FactorizationError",
    "LinearOperator",
    "NonConvergence",
    "ParameterError",
    "RunConfig",
    "RunStats",
    "ShiftMode",
    "ToeplitzOperator",
    "arnoldi_extend",
    "as_inverse_operator",
    "aslinearoperator",
    "assemble_exponential",
    "builtin_cf14",
    "cf_poles_residues",
    "conjugate_reduce",
    "dense_expm",
    "eval_cf",
    "expm_action",
    "fde_onesided",
    "fde_twosided_toeplitz",
    "get_cf",
    "gsf_apply_inverse",
    "gsf_generators",
    "initial_state",
    "poisson2d",
    "read_matrix_market",
    "run_expm_action",
    "run_psbfom_dr",
    "run_sbfom_dr",
    "sparse_lu",
]
