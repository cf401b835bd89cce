import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cfexpm.arnoldi import (
    ArnoldiBreakdown,
    DeflationUnsupported,
    RestartError,
    arnoldi_extend,
    compute_ritz,
    deflated_restart,
    initial_state,
    qr_block,
)
from cfexpm.operators import LinearOperator, aslinearoperator
from cfexpm.problems import poisson2d


def _check_invariants(A, state):
    V, H = state.V, state.H
    c = state.ncols
    ortho = np.linalg.norm(V.T @ V - np.eye(V.shape[1]))
    assert ortho <= 1e-10 * V.shape[1]
    rel = np.linalg.norm(A @ V[:, :c] - V @ H)
    assert rel <= 1e-10 * np.linalg.norm(H)


def _banded(state):
    H, p, k = state.H, state.p, state.k_defl
    rows, cols = np.indices(H.shape)
    outside = (rows > cols + p) & ~((rows < k + p) & (cols < k))
    return not np.any(H[outside])


class TestQrBlock:
    def test_identity(self):
        V, R = qr_block(np.eye(4))
        assert np.allclose(V, np.eye(4)) and np.allclose(R, np.eye(4))

    def test_scaled_unit_vector(self):
        V, R = qr_block(2.0 * np.eye(3)[:, :1])
        assert np.allclose(V[:, 0], [1, 0, 0]) and R[0, 0] == pytest.approx(2.0)

    def test_reconstruction(self, rng):
        R0 = rng.standard_normal((50, 3))
        V, R = qr_block(R0)
        assert np.linalg.norm(V @ R - R0) <= 1e-12 * np.linalg.norm(R0)
        assert np.all(np.diag(R) >= 0)
        assert np.allclose(np.triu(R), R)

    def test_rank_deficient(self, rng):
        a = rng.standard_normal((10, 1))
        with pytest.raises(DeflationUnsupported):
            qr_block(np.hstack([a, 2 * a]))

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (12, 3), elements=st.floats(-10, 10)))
    def test_property_orthonormal(self, R0):
        s = la.svdvals(R0)
        if s[-1] <= 1e-6 * max(s[0], 1e-300):
            return
        V, R = qr_block(R0)
        assert np.linalg.norm(V.T @ V - np.eye(3)) <= 1e-12
        assert np.linalg.norm(V @ R - R0) <= 1e-12 * np.linalg.norm(R0)


class TestExtend:
    def test_identity_breaks_down(self):
        op = aslinearoperator(np.eye(5))
        state, _ = initial_state(np.eye(5)[:, :1])
        with pytest.raises(ArnoldiBreakdown) as exc:
            arnoldi_extend(op, state, 2)
        assert exc.value.column == 1
        assert exc.value.state.H[0, 0] == pytest.approx(1.0)

    def test_scaled_identity(self, rng):
        op = aslinearoperator(2.0 * np.eye(6))
        state, _ = initial_state(rng.standard_normal((6, 2)))
        with pytest.raises(ArnoldiBreakdown) as exc:
            arnoldi_extend(op, state, 2)
        H = exc.value.state.H
        assert H[0, 0] == pytest.approx(2.0)
        assert abs(H[1, 0]) <= 1e-14
        assert exc.value.column == 2

    def test_poisson_invariants_and_counter(self, rng):
        A = poisson2d(10)
        op = aslinearoperator(A)
        state, _ = initial_state(rng.standard_normal((100, 2)))
        state = arnoldi_extend(op, state, 3)
        assert op.applies == 6
        state = arnoldi_extend(op, state, 5)
        assert op.applies == 10
        _check_invariants(A, state)
        assert _banded(state)
        p = state.p
        for i in range(1, 5):
            sub = state.H[i * p : (i + 1) * p, (i - 1) * p : i * p]
            assert np.allclose(np.tril(sub, -1), 0)

    def test_shift_invariance(self, rng):
        A = poisson2d(8)
        state, _ = initial_state(rng.standard_normal((64, 2)))
        state = arnoldi_extend(aslinearoperator(A), state, 6)
        c = state.ncols
        Itil = np.eye(c + 2, c)
        for tau in (0.5, 3 + 2j, -7j):
            lhs = (A @ state.V[:, :c]) - tau * state.V[:, :c]
            rhs = state.V @ (state.H - tau * Itil)
            assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(state.H)

    def test_already_full(self, rng):
        op = aslinearoperator(poisson2d(4))
        state, _ = initial_state(rng.standard_normal((16, 1)))
        state = arnoldi_extend(op, state, 3)
        with pytest.raises(Exception):
            arnoldi_extend(op, state, 3)


class TestRitz:
    def test_diagonal(self):
        ritz = compute_ritz(np.diag([1.0, 2.0, 3.0]), order="smallest")
        assert np.allclose(ritz.values, [1, 2, 3])
        assert np.allclose(np.abs(ritz.vectors), np.eye(3))

    def test_rotation_pair(self):
        ritz = compute_ritz(np.array([[0.0, -1.0], [1.0, 0.0]]))
        assert np.allclose(sorted(ritz.values.imag), [-1, 1])
        assert ritz.values[0] == np.conj(ritz.values[1])

    def test_largest_first(self):
        ritz = compute_ritz(np.diag([1.0, -5.0, 3.0]))
        assert np.allclose(ritz.values, [-5, 3, 1])

    def test_random_hessenberg_residuals(self, rng):
        H = np.triu(rng.standard_normal((21, 20)), -1)
        ritz = compute_ritz(H, p=1)
        Hm = H[:20]
        res = Hm @ ritz.vectors - ritz.vectors * ritz.values
        assert np.max(np.linalg.norm(res, axis=0)) <= 1e-9 * np.linalg.norm(Hm)
        cplx = ritz.values[ritz.values.imag != 0]
        assert np.allclose(np.sort_complex(cplx), np.sort_complex(cplx.conj()))
        assert np.allclose(ritz.residual_factors, H[20:, 19:] @ ritz.vectors[19:])

    def test_unknown_order(self):
        with pytest.raises(ValueError):
            compute_ritz(np.eye(2), order="middle")


class TestRestart:
    def _built(self, A, rng, p, m):
        state, _ = initial_state(rng.standard_normal((A.shape[0], p)))
        return arnoldi_extend(aslinearoperator(A), state, m)

    def test_k_zero(self, rng):
        A = poisson2d(5).toarray()
        state = self._built(A, rng, 1, 5)
        new = deflated_restart(state, compute_ritz(state.H, 1), 0)
        assert new.H.shape == (1, 0)
        assert np.array_equal(new.V, state.V_last)

    def test_rayleigh_ritz(self, rng):
        A = poisson2d(6).toarray()
        state = self._built(A, rng, 1, 5)
        ritz = compute_ritz(state.H, 1, order="smallest")
        new = deflated_restart(state, ritz, 2)
        kept = np.sort(ritz.values[:2].real)
        assert np.allclose(np.sort(la.eigvals(new.H[:2, :2]).real), kept, atol=1e-10)
        _check_invariants(A, new)

    def test_relation_after_restart_and_extend(self, rng):
        A = -poisson2d(7).toarray() + 0.3 * np.triu(rng.standard_normal((49, 49)), 1) / 7
        state = self._built(A, rng, 2, 6)
        new = deflated_restart(state, compute_ritz(state.H, 2), 6)
        _check_invariants(A, new)
        op = aslinearoperator(A)
        again = arnoldi_extend(op, new, 6)
        assert op.applies == 12 - new.ncols
        _check_invariants(A, again)
        assert _banded(again)

    def test_conjugate_pair_not_split(self):
        theta = 0.3
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        A = la.block_diag(3.0 * rot, np.diag([1.0, 0.5, 0.25, 0.1]))
        state, _ = initial_state(np.ones((6, 1)))
        state = arnoldi_extend(aslinearoperator(A), state, 5)
        ritz = compute_ritz(state.H, 1)
        new = deflated_restart(state, ritz, 1)
        assert new.k_defl == 2
        _check_invariants(A, new)

    def test_bad_k(self, rng):
        A = poisson2d(4).toarray()
        state = self._built(A, rng, 1, 4)
        with pytest.raises(RestartError):
            deflated_restart(state, compute_ritz(state.H, 1), 4)


class TestOperator:
    def test_counter_once_per_vector(self):
        op = LinearOperator(3, lambda v: 2 * v)
        op(np.ones(3))
        op.apply(np.ones((3, 4)))
        assert op.applies == 5
        op.reset()
        assert op.applies == 0

    def test_complex_input_split(self):
        op = aslinearoperator(np.diag([1.0, 2.0]))
        out = op(np.array([1 + 1j, 1 - 2j]))
        assert np.allclose(out, [1 + 1j, 2 - 4j])

    def test_shape_check(self):
        with pytest.raises(ValueError):
            aslinearoperator(np.eye(3))(np.ones(4))

    def test_non_square(self):
        with pytest.raises(ValueError):
            aslinearoperator(np.ones((2, 3)))

    def test_thread_safe_counter(self):
        from concurrent.futures import ThreadPoolExecutor

        op = aslinearoperator(np.eye(4))
        with ThreadPoolExecutor(8) as ex:
            list(ex.map(lambda _: op(np.ones(4)), range(400)))
        assert op.applies == 400
