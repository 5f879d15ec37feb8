import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mflab import symmetric


@pytest.mark.parametrize("n,d", [(0, 3), (1, 3), (3, 2), (4, 3), (5, 1)])
def test_sector_dim_counts_occupations(n, d):
    occ = symmetric.occupations(n, d)
    assert len(occ) == symmetric.sector_dim(n, d) == math.comb(n + d - 1, d - 1)
    assert all(sum(m) == n for m in occ)
    assert len(set(map(tuple, occ))) == len(occ)


def test_occupations_reverse_lex():
    assert [tuple(m) for m in symmetric.occupations(2, 2)] == [(2, 0), (1, 1), (0, 2)]


@pytest.mark.parametrize("n,d", [(2, 2), (3, 3), (4, 2)])
def test_isometry_orthonormal_and_symmetric(n, d):
    S = symmetric.symmetric_isometry(n, d)
    np.testing.assert_allclose(S.T @ S, np.eye(S.shape[1]), atol=1e-13)
    # every column is invariant under swapping the first two tensor factors
    T = S.reshape((d,) * n + (S.shape[1],))
    np.testing.assert_allclose(np.swapaxes(T, 0, 1), T, atol=1e-14)


@given(st.integers(0, 4), st.integers(1, 3), st.integers(0, 10_000))
def test_tensor_power_norm(n, d, seed):
    z = np.random.default_rng(seed).standard_normal(d) + 1j * np.random.default_rng(seed + 1).standard_normal(d)
    u = symmetric.tensor_power(z, n)
    assert np.linalg.norm(u) == pytest.approx(np.linalg.norm(z) ** n, rel=1e-12)


def test_tensor_power_matches_isometry(rng):
    d, n = 3, 3
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    full = z
    for _ in range(n - 1):
        full = np.kron(full, z)
    S = symmetric.symmetric_isometry(n, d)
    np.testing.assert_allclose(S.T @ full, symmetric.tensor_power(z, n), atol=1e-13)


def test_tensor_power_jacobian_finite_difference(rng):
    z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    J = symmetric.tensor_power_jacobian(z, 3)
    h = 1e-6
    for i in range(2):
        dz = np.zeros(2, dtype=complex)
        dz[i] = h
        fd = (symmetric.tensor_power(z + dz, 3) - symmetric.tensor_power(z - dz, 3)) / (2 * h)
        np.testing.assert_allclose(J[:, i], fd, atol=1e-8)


def test_sym_power_is_restriction_of_kron(rng):
    d = 2
    A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    S = symmetric.symmetric_isometry(2, d)
    np.testing.assert_allclose(symmetric.sym_power(A, 2), S.T @ np.kron(A, A) @ S, atol=1e-13)
    u = rng.standard_normal(d)
    np.testing.assert_allclose(symmetric.sym_power_diag(u, 2), np.diag(symmetric.sym_power(np.diag(u), 2)), atol=1e-13)


@pytest.mark.parametrize("n,p,d", [(3, 1, 2), (4, 2, 2), (3, 2, 3)])
def test_splits_cover_sector(n, p, d):
    parts = symmetric.splits(n, p, d)
    assert len(parts) == symmetric.sector_dim(n - p, d)
    for idx, coef in parts:
        assert len(idx) == symmetric.sector_dim(p, d)
        assert np.all(np.asarray(coef) > 0)
