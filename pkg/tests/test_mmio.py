import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from cfexpm.mmio import MatrixMarketError, read_matrix_market, write_matrix_market


def _write(tmp_path, text, name="m.mtx"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_single_entry(tmp_path):
    A = read_matrix_market(_write(tmp_path, "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 5.0\n"))
    assert A.shape == (1, 1) and A[0, 0] == 5.0 and sp.isspmatrix_csr(A)


def test_duplicates_summed(tmp_path):
    text = "%%MatrixMarket matrix coordinate real general\n% note\n2 2 3\n1 2 1.5\n1 2 2.5\n2 1 -1\n"
    A = read_matrix_market(_write(tmp_path, text))
    assert A[0, 1] == 4.0 and A.nnz == 2 and A.has_sorted_indices


def test_symmetric_expanded(tmp_path):
    text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n1 1 2\n2 1 -1\n3 3 4\n"
    A = read_matrix_market(_write(tmp_path, text)).toarray()
    assert np.array_equal(A, [[2, -1, 0], [-1, 0, 0], [0, 0, 4]])


def test_array_format(tmp_path):
    text = "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n"
    A = read_matrix_market(_write(tmp_path, text))
    assert np.array_equal(A, [[1, 3], [2, 4]])


@pytest.mark.parametrize(
    "text, line",
    [
        ("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n", 1),
        ("%%MatrixMarket matrix coordinate real general\n2 2 x\n", 2),
        ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n3 1 2.0\n", 4),
        ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", 3),
        ("%%MatrixMarket matrix array real general\n2 1\n1.0\nabc\n", 4),
        ("not a header\n", 1),
    ],
)
def test_parse_errors_carry_line(tmp_path, text, line):
    with pytest.raises(MatrixMarketError) as exc:
        read_matrix_market(_write(tmp_path, text))
    assert exc.value.lineno == line
    assert f":{line}:" in str(exc.value)


def test_dense_round_trip(tmp_path, rng):
    B = rng.standard_normal((7, 3))
    p = tmp_path / "b.mtx"
    write_matrix_market(p, B, comment="block")
    assert np.array_equal(read_matrix_market(p), B)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.floats(0.01, 0.6), st.integers(0, 2**32 - 1))
def test_sparse_round_trip_bitwise(tmp_path_factory, n, density, seed):
    A = sp.random(n, n, density=density, random_state=seed, format="csr")
    A.data *= 10.0 ** np.random.default_rng(seed).uniform(-300, 300, A.nnz)
    p = tmp_path_factory.mktemp("mm") / "a.mtx"
    write_matrix_market(p, A)
    B = read_matrix_market(p)
    A.sort_indices()
    assert np.array_equal(A.indptr, B.indptr)
    assert np.array_equal(A.indices, B.indices)
    assert np.array_equal(A.data, B.data)
