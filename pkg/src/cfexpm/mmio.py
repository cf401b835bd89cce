"""Matrix Market reader and writer for real matrices and dense blocks.

Only the ``real`` and ``integer`` fields are accepted. Coordinate files
become canonical CSR; array files become dense column-major ndarrays.
Values are written with 17 significant digits so a round trip is exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .inverse import as_csr

__all__ = ["MatrixMarketError", "read_matrix_market", "write_matrix_market"]

_SYMMETRIES = ("general", "symmetric", "skew-symmetric")


class MatrixMarketError(ValueError):
    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


def _data_lines(lines, start):
    for lineno, raw in enumerate(lines[start:], start=start + 1):
        s = raw.strip()
        if s and not s.startswith("%"):
            yield lineno, s


def read_matrix_market(path):
    """Read a real Matrix Market file.

    Returns
    -------
    scipy.sparse.csr_matrix or numpy.ndarray
        CSR for ``coordinate`` files (duplicates summed, symmetric storage
        expanded), a dense array for ``array`` files.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise MatrixMarketError(path, 1, "empty file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "%%MatrixMarket" or head[1].lower() != "matrix":
        raise MatrixMarketError(path, 1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'")
    fmt, fld, sym = (h.lower() for h in head[2:])
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(path, 1, f"unknown format {fmt!r}")
    if fld not in ("real", "integer", "double"):
        raise MatrixMarketError(path, 1, f"unsupported field {fld!r}; only real data is accepted")
    if sym not in _SYMMETRIES:
        raise MatrixMarketError(path, 1, f"unsupported symmetry {sym!r}")

    body = _data_lines(lines, 1)
    try:
        lineno, size_line = next(body)
    except StopIteration:
        raise MatrixMarketError(path, len(lines), "missing size line") from None
    try:
        dims = [int(tok) for tok in size_line.split()]
    except ValueError:
        raise MatrixMarketError(path, lineno, f"bad size line {size_line!r}") from None
    expected = 3 if fmt == "coordinate" else 2
    if len(dims) != expected or min(dims) < 0:
        raise MatrixMarketError(path, lineno, f"bad size line {size_line!r}")

    if fmt == "coordinate":
        return _read_coordinate(path, body, *dims, sym)
    return _read_array(path, body, *dims, sym)


def _read_coordinate(path, body, nrows, ncols, nnz, sym):
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    count = 0
    last = 1
    for lineno, s in body:
        last = lineno
        if count == nnz:
            raise MatrixMarketError(path, lineno, f"more than {nnz} entries")
        parts = s.split()
        if len(parts) != 3:
            raise MatrixMarketError(path, lineno, f"expected 'row col value', got {s!r}")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise MatrixMarketError(path, lineno, f"cannot parse entry {s!r}") from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixMarketError(path, lineno, f"index ({i}, {j}) outside {nrows}x{ncols}")
        if sym != "general" and i < j:
            raise MatrixMarketError(path, lineno, "symmetric storage must hold the lower triangle")
        rows[count], cols[count], vals[count] = i - 1, j - 1, v
        count += 1
    if count != nnz:
        raise MatrixMarketError(path, last, f"expected {nnz} entries, found {count}")
    if sym != "general":
        off = rows != cols
        sign = 1.0 if sym == "symmetric" else -1.0
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, sign * vals[off]]),
        )
    return as_csr(sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)))


def _read_array(path, body, nrows, ncols, sym):
    if sym != "general" and nrows != ncols:
        raise MatrixMarketError(path, 2, "symmetric array must be square")
    if sym == "general":
        slots = [(i, j) for j in range(ncols) for i in range(nrows)]
    else:
        first = 0 if sym == "symmetric" else 1
        slots = [(i, j) for j in range(ncols) for i in range(j + first, nrows)]
    out = np.zeros((nrows, ncols))
    count = 0
    last = 2
    for lineno, s in body:
        last = lineno
        if count == len(slots):
            raise MatrixMarketError(path, lineno, f"more than {len(slots)} values")
        try:
            v = float(s)
        except ValueError:
            raise MatrixMarketError(path, lineno, f"cannot parse value {s!r}") from None
        i, j = slots[count]
        out[i, j] = v
        if sym == "symmetric":
            out[j, i] = v
        elif sym == "skew-symmetric":
            out[j, i] = -v
        count += 1
    if count != len(slots):
        raise MatrixMarketError(path, last, f"expected {len(slots)} values, found {count}")
    return out


def write_matrix_market(path, M, comment: str | None = None) -> None:
    """Write a sparse matrix (coordinate, general) or a dense array (array, general)."""
    path = Path(path)
    out = []
    if sp.issparse(M):
        C = as_csr(M).tocoo()
        out.append("%%MatrixMarket matrix coordinate real general")
        if comment:
            out.extend("% " + ln for ln in comment.splitlines())
        out.append(f"{C.shape[0]} {C.shape[1]} {C.nnz}")
        out.extend(f"{i + 1} {j + 1} {v:.17g}" for i, j, v in zip(C.row, C.col, C.data))
    else:
        A = np.asarray(M, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        if A.ndim != 2:
            raise ValueError("dense input must be one- or two-dimensional")
        out.append("%%MatrixMarket matrix array real general")
        if comment:
            out.extend("% " + ln for ln in comment.splitlines())
        out.append(f"{A.shape[0]} {A.shape[1]}")
        out.extend(f"{v:.17g}" for v in A.ravel(order="F"))
    path.write_text("\n".join(out) + "\n")
