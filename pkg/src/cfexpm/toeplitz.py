"""Toeplitz operators: circulant-embedded products and Gohberg-Semencul inverses.

Everything runs on length-2n real FFTs. The operator keeps a counter of
runtime transforms (one per transformed column), so a matvec costs 2 and an
inverse application costs 6.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la

from .operators import LinearOperator

__all__ = [
    "ToeplitzError",
    "GsfInapplicable",
    "ToeplitzOperator",
    "toeplitz_matvec",
    "gsf_generators",
    "gsf_apply_inverse",
    "dense_lu_solver",
]


class ToeplitzError(RuntimeError):
    pass


class GsfInapplicable(ToeplitzError):
    pass


def _lower_embedding(a):
    """First column of the 2n circulant holding the lower triangular Toeplitz L(a)."""
    return np.concatenate([a, np.zeros_like(a)])


def _upper_embedding(r):
    """First column of the 2n circulant holding the upper triangular Toeplitz with first row r."""
    n = r.size
    c = np.zeros(2 * n)
    c[0] = r[0]
    c[n + 1 :] = r[:0:-1]
    return c


@dataclass(frozen=True)
class _Generators:
    x: np.ndarray
    y: np.ndarray
    x1: float
    # spectra of the four triangular factors
    lx: np.ndarray
    ujy: np.ndarray
    lzy: np.ndarray
    uzjx: np.ndarray


@dataclass
class ToeplitzOperator:
    first_col: np.ndarray
    first_row: np.ndarray
    fft_count: int = 0
    _spectrum: np.ndarray = field(init=False, repr=False)
    _gsf: _Generators | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.first_col = np.asarray(self.first_col, dtype=float).copy()
        self.first_row = np.asarray(self.first_row, dtype=float).copy()
        if self.first_col.shape != self.first_row.shape or self.first_col.ndim != 1:
            raise ToeplitzError("first column and first row must be vectors of equal length")
        if self.first_col[0] != self.first_row[0]:
            raise ToeplitzError("first_col[0] and first_row[0] disagree")
        c = np.concatenate([self.first_col, [0.0], self.first_row[:0:-1]])
        # precomputed once; not a runtime transform
        self._spectrum = np.fft.rfft(c)

    @property
    def n(self) -> int:
        return self.first_col.size

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def has_generators(self) -> bool:
        return self._gsf is not None

    def to_dense(self) -> np.ndarray:
        return la.toeplitz(self.first_col, self.first_row)

    def _rfft(self, v):
        self.fft_count += 1 if v.ndim == 1 else v.shape[1]
        return np.fft.rfft(v, n=2 * self.n, axis=0)

    def _irfft(self, f):
        self.fft_count += 1 if f.ndim == 1 else f.shape[1]
        return np.fft.irfft(f, n=2 * self.n, axis=0)[: self.n]

    def to_dict(self) -> dict:
        return {"first_col": self.first_col.tolist(), "first_row": self.first_row.tolist()}

    @classmethod
    def from_dict(cls, doc) -> "ToeplitzOperator":
        return cls(np.array(doc["first_col"]), np.array(doc["first_row"]))

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_json(cls, path) -> "ToeplitzOperator":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def as_operator(self) -> LinearOperator:
        return LinearOperator(self.n, lambda v: toeplitz_matvec(self, v), name="toeplitz")

    def as_inverse_operator(self) -> LinearOperator:
        if self._gsf is None:
            gsf_generators(self)
        return LinearOperator(self.n, lambda w: gsf_apply_inverse(self, w), name="gsf-inverse")


def _bcast(spec, v):
    return spec if v.ndim == 1 else spec[:, None]


def toeplitz_matvec(T: ToeplitzOperator, v):
    v = np.asarray(v, dtype=float)
    if v.shape[0] != T.n:
        raise ValueError(f"vector has length {v.shape[0]}, operator has dimension {T.n}")
    return T._irfft(_bcast(T._spectrum, v) * T._rfft(v))


def dense_lu_solver(T: ToeplitzOperator):
    lu = la.lu_factor(T.to_dense())
    return lambda rhs: la.lu_solve(lu, rhs)


def gsf_generators(T: ToeplitzOperator, solver=None):
    """Solve T x = e_1 and T y = e_n, cache the generator spectra on T.

    ``solver`` maps T to a callable solving T z = rhs; the default is a
    dense LU factorisation.
    """
    n = T.n
    solve = (solver or dense_lu_solver)(T)
    E = np.zeros((n, 2))
    E[0, 0] = 1.0
    E[-1, 1] = 1.0
    XY = np.asarray(solve(E))
    x, y = XY[:, 0].copy(), XY[:, 1].copy()
    if abs(x[0]) <= 1e-13 * max(np.abs(x).max(), 1e-300):
        raise GsfInapplicable(f"x_1 = {x[0]:.3e} vanishes; Gohberg-Semencul formula does not apply")
    jy = y[::-1]
    zy = np.concatenate([[0.0], y[:-1]])
    zjx = np.concatenate([[0.0], x[::-1][:-1]])
    spec = lambda c: np.fft.rfft(c)  # noqa: E731
    T._gsf = _Generators(
        x=x,
        y=y,
        x1=float(x[0]),
        lx=spec(_lower_embedding(x)),
        ujy=spec(_upper_embedding(jy)),
        lzy=spec(_lower_embedding(zy)),
        uzjx=spec(_upper_embedding(zjx)),
    )
    return x, y


def gsf_apply_inverse(T: ToeplitzOperator, w):
    """T^{-1} w = (L(x) L(Jy)^T - L(Zy) L(ZJx)^T) w / x_1 using six FFTs."""
    g = T._gsf
    if g is None:
        raise ToeplitzError("Gohberg-Semencul generators have not been computed")
    w = np.asarray(w, dtype=float)
    if w.shape[0] != T.n:
        raise ValueError(f"vector has length {w.shape[0]}, operator has dimension {T.n}")
    b = lambda s: _bcast(s, w)  # noqa: E731
    fw = T._rfft(w)
    u1 = T._irfft(b(g.ujy) * fw)
    u2 = T._irfft(b(g.uzjx) * fw)
    f = b(g.lx) * T._rfft(u1) - b(g.lzy) * T._rfft(u2)
    return T._irfft(f) / g.x1
