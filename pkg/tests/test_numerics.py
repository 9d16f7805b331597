import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barcsim.errors import ConvergenceError, SingularMatrixError, SingularUpdateError
from barcsim.numerics import (
    convolution_matrix,
    count_combinations,
    enumerate_combinations,
    hankel_expand,
    mil_rank1_update,
    regularized_inverse,
    smallest_eigvec,
)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_pd(rng, n):
    a = crandn(rng, n, n)
    return a @ a.conj().T + n * np.eye(n)


def explicit_interp(x, v):
    # V^H x with V[m, c] = v[m - c] for 0 <= m - c < I.
    m = x.size
    out = np.zeros(m, dtype=complex)
    for c in range(m):
        for t in range(v.size):
            if c + t < m:
                out[c] += np.conj(v[t]) * x[c + t]
    return out


class TestHankelExpand:
    def test_small_template(self):
        np.testing.assert_array_equal(hankel_expand([1, 2, 3], 2), [[1, 2], [2, 3], [3, 0]])

    def test_zero_vector(self):
        out = hankel_expand(np.zeros(5), 3)
        assert out.shape == (5, 3)
        assert not out.any()

    def test_matches_convolution(self):
        rng = np.random.default_rng(1)
        x, v = crandn(rng, 8), crandn(rng, 3)
        np.testing.assert_allclose(hankel_expand(x, 3) @ v.conj(), explicit_interp(x, v), atol=1e-12)

    def test_matches_banded_matrix(self):
        rng = np.random.default_rng(2)
        x, v = crandn(rng, 10), crandn(rng, 4)
        via_v = convolution_matrix(v, 10).conj().T @ x
        np.testing.assert_allclose(hankel_expand(x, 4) @ v.conj(), via_v, atol=1e-12)

    @pytest.mark.parametrize("width", [0, -2])
    def test_rejects_bad_width(self, width):
        with pytest.raises(ValueError):
            hankel_expand([1.0, 2.0], width)

    @settings(max_examples=60, deadline=None)
    @given(m=st.integers(1, 16), i=st.integers(1, 5), seed=st.integers(0, 2**31))
    def test_convolution_property(self, m, i, seed):
        rng = np.random.default_rng(seed)
        x, v = crandn(rng, m), crandn(rng, i)
        np.testing.assert_allclose(hankel_expand(x, i) @ v.conj(), explicit_interp(x, v), atol=1e-12)


class TestMilRank1Update:
    def test_zero_update(self):
        np.testing.assert_array_equal(mil_rank1_update(np.eye(2), 1.0, np.zeros(2), np.zeros(2)), np.eye(2))

    def test_sherman_morrison_identity(self):
        e1 = np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(mil_rank1_update(np.eye(3), 1.0, e1, e1), np.diag([0.5, 1, 1]), atol=1e-15)

    def test_against_direct_inverse(self):
        rng = np.random.default_rng(3)
        a = random_pd(rng, 4)
        g, h = crandn(rng, 4), crandn(rng, 4)
        got = mil_rank1_update(np.linalg.inv(a), 0.998, g, h)
        want = np.linalg.inv(0.998 * a + np.outer(g, h.conj()))
        assert np.linalg.norm(got - want) < 1e-8

    def test_singular_denominator(self):
        # 1 + h^H A^-1 g = 0 for g = e1, h = -e1, A = I.
        e1 = np.array([1.0, 0.0])
        with pytest.raises(SingularUpdateError):
            mil_rank1_update(np.eye(2), 1.0, e1, -e1)

    def test_bad_forgetting(self):
        with pytest.raises(ValueError):
            mil_rank1_update(np.eye(2), 0.0, np.ones(2), np.ones(2))

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_recursion_tracks_weighted_sum(self, n):
        rng = np.random.default_rng(10 + n)
        alpha, delta = 0.99, 0.5
        inv = delta * np.eye(n, dtype=complex)
        direct = np.eye(n) / delta
        for _ in range(200):
            x = crandn(rng, n)
            inv = mil_rank1_update(inv, alpha, x, x)
            direct = alpha * direct + np.outer(x, x.conj())
        assert np.linalg.norm(inv - np.linalg.inv(direct)) < 1e-6


class TestRegularizedInverse:
    def test_identity(self):
        np.testing.assert_allclose(regularized_inverse(np.eye(3)), np.eye(3), atol=1e-15)

    def test_zero_plus_delta(self):
        np.testing.assert_allclose(regularized_inverse(np.zeros((2, 2)), 0.5), 2 * np.eye(2), atol=1e-15)

    def test_residual(self):
        rng = np.random.default_rng(4)
        a = random_pd(rng, 5)
        assert np.max(np.abs(a @ regularized_inverse(a) - np.eye(5))) < 1e-10

    def test_singular(self):
        with pytest.raises(SingularMatrixError):
            regularized_inverse(np.ones((3, 3)))

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            regularized_inverse(np.ones((2, 3)))


class TestSmallestEigvec:
    def test_diagonal(self):
        x, lam = smallest_eigvec(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(x, [0, 1, 0], atol=1e-10)
        assert lam == pytest.approx(1.0)

    def test_degenerate_spectrum(self):
        x, lam = smallest_eigvec(np.eye(4))
        assert np.vdot(x, x).real == pytest.approx(1.0)
        assert lam == pytest.approx(1.0)

    def test_beats_random_probes(self):
        rng = np.random.default_rng(5)
        a = crandn(rng, 5, 5)
        a = a + a.conj().T
        x, lam = smallest_eigvec(a)
        probes = crandn(rng, 10_000, 5)
        probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        rq = np.einsum("qi,ij,qj->q", probes.conj(), a, probes).real
        assert lam <= rq.min() + 1e-12
        assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(a @ x - lam * x) < 1e-8

    def test_phase_convention(self):
        rng = np.random.default_rng(6)
        a = crandn(rng, 4, 4)
        a = a @ a.conj().T
        x, _ = smallest_eigvec(a)
        lead = x[np.flatnonzero(np.abs(x) > 1e-12)[0]]
        assert abs(lead.imag) < 1e-14 and lead.real >= 0

    def test_non_hermitian(self):
        with pytest.raises(ValueError):
            smallest_eigvec(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_convergence_error_reports(self):
        # Near-degenerate bottom pair makes inverse iteration slow.
        a = np.diag([1.0, 1.0 + 1e-9, 5.0])
        a[0, 1] = a[1, 0] = 1e-10
        with pytest.raises(ConvergenceError) as info:
            smallest_eigvec(a, x0=np.array([1.0, 1.0, 1.0]), tol=1e-300, max_iter=2)
        assert info.value.vector is not None
        assert np.isfinite(info.value.residual)

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(1, 7), seed=st.integers(0, 2**31))
    def test_residual_property(self, n, seed):
        rng = np.random.default_rng(seed)
        a = crandn(rng, n, n)
        a = a + a.conj().T
        x, lam = smallest_eigvec(a)
        assert abs(np.linalg.norm(x) - 1) < 1e-12
        assert np.linalg.norm(a @ x - lam * x) < 1e-8
        assert lam <= np.linalg.eigvalsh(a)[0] + 1e-8


def recursive_combinations(m, d, start=0):
    if d == 0:
        return [()]
    out = []
    for first in range(start, m - d + 1):
        out.extend((first,) + rest for rest in recursive_combinations(m, d - 1, first + 1))
    return out


class TestCombinations:
    def test_three_choose_two(self):
        assert enumerate_combinations(3, 2) == [(0, 1), (0, 2), (1, 2)]

    def test_count(self):
        assert len(enumerate_combinations(5, 2)) == 10
        assert count_combinations(5, 2) == 10

    def test_against_recursion(self):
        got = enumerate_combinations(8, 4)
        assert len(got) == 70
        assert got == recursive_combinations(8, 4)
        assert all(all(a < b for a, b in zip(c, c[1:])) for c in got)

    def test_d_above_m(self):
        with pytest.raises(ValueError):
            enumerate_combinations(3, 4)

    @settings(max_examples=30, deadline=None)
    @given(m=st.integers(1, 10), d=st.integers(1, 10))
    def test_size_property(self, m, d):
        if d > m:
            return
        combos = enumerate_combinations(m, d)
        assert len(combos) == math.comb(m, d)
        assert len(set(combos)) == len(combos)
        assert all(0 <= c[0] and c[-1] < m for c in combos)
        assert combos == sorted(combos)
        assert combos == list(itertools.combinations(range(m), d))
