import math
import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from mflab import fock

import oracles


def _rand(rng, d):
    return rng.standard_normal(d) + 1j * rng.standard_normal(d)


@pytest.mark.parametrize("d,n_max", [(1, 6), (2, 5), (3, 4)])
def test_dimensions_and_prefix(d, n_max):
    F = fock.FockSpace(d, n_max, 0.5)
    assert F.dim == sum(math.comb(n + d - 1, d - 1) for n in range(n_max + 1))
    big = F.extended(3)
    for n in range(n_max + 1):
        assert big.sector(n) == F.sector(n)
    assert F.index(F.occupations(n_max)[-1]) == F.dim - 1


@pytest.mark.parametrize("args", [(0, 3, 0.5), (2, 0, 0.5), (2, 3, 0.0), (2, 3, 1.5), (2, 2.5, 0.5)])
def test_bad_space(args):
    with pytest.raises(ValueError):
        fock.FockSpace(*args)


@pytest.mark.parametrize("d,n_max,eps", [(1, 8, 1.0), (2, 5, 0.25), (3, 4, 0.5)])
def test_annihilator_matches_dense_oracle(d, n_max, eps, rng):
    F = fock.FockSpace(d, n_max, eps)
    f = _rand(rng, d)
    dense = sum(np.conj(fi) * A for fi, A in zip(f, oracles.dense_annihilators(F)))
    np.testing.assert_allclose(fock.annihilate(f, F).toarray(), dense, atol=1e-14)
    np.testing.assert_allclose(fock.create(f, F).toarray(), dense.conj().T, atol=1e-14)


def test_annihilator_is_antilinear(rng):
    F = fock.FockSpace(2, 4, 0.5)
    f = _rand(rng, 2)
    c = 0.3 + 1.2j
    np.testing.assert_allclose(fock.annihilate(c * f, F).toarray(), np.conj(c) * fock.annihilate(f, F).toarray(),
                               atol=1e-14)


@pytest.mark.parametrize("eps", [1.0, 0.5, 0.125])
def test_ccr_below_cutoff(eps, rng):
    F = fock.FockSpace(3, 6, eps)
    f, g = _rand(rng, 3), _rand(rng, 3)
    a, ad = fock.annihilate(f, F), fock.create(g, F)
    comm = (a @ ad - ad @ a).toarray()
    s = F.sector_upto(F.n_max - 1)
    np.testing.assert_allclose(comm[s, s], eps * np.vdot(f, g) * np.eye(s.stop), atol=1e-12)
    a2 = fock.annihilate(g, F)
    assert np.max(np.abs((a @ a2 - a2 @ a).toarray())) < 1e-14


def test_dgamma_identity_is_number_operator_exactly():
    F = fock.FockSpace(3, 5, 0.25)
    assert (fock.dgamma(np.eye(3), F) != fock.number_op(F)).nnz == 0
    np.testing.assert_array_equal(fock.number_op(F).diagonal().real, 0.25 * F.particle_numbers)


def test_dgamma_is_lie_homomorphism(rng):
    F = fock.FockSpace(2, 5, 0.5)
    A = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    A, B = A + A.conj().T, np.diag([1.0, -2.0])
    lhs = (fock.dgamma(A, F) @ fock.dgamma(B, F) - fock.dgamma(B, F) @ fock.dgamma(A, F)).toarray()
    # [dG(A), dG(B)] = eps dG([A, B]); [A, B] is anti-Hermitian so use i[A, B]
    C = 1j * (A @ B - B @ A)
    np.testing.assert_allclose(1j * lhs, 0.5 * fock.dgamma(C, F).toarray(), atol=1e-12)
    with pytest.raises(ValueError):
        fock.dgamma(np.array([[0, 1], [0, 0]]), F)


def test_s_epsilon_positive():
    F = fock.FockSpace(2, 4, 0.5)
    S = fock.s_epsilon(F, 0.25).toarray()
    assert np.min(np.linalg.eigvalsh(S)[1:]) > 0
    with pytest.raises(ValueError):
        fock.s_epsilon(F, 0.0)


def test_s_epsilon_diagonal_formula(modes3):
    # plane-wave modes: sum_i eps m_i (1 + k_i^2) + eps n + lam (eps n)^3
    eps, lam = 0.25, 0.7
    F = fock.FockSpace(modes3, 5, eps)
    S = fock.s_epsilon(F, lam)
    assert np.max(np.abs((S - sp.diags(S.diagonal())).toarray())) == 0
    occ = F.occupation_table.astype(float)
    n = eps * occ.sum(axis=1)
    expected = eps * occ @ (1 + modes3.kinetic_diagonal) + n + lam * n ** 3
    np.testing.assert_allclose(S.diagonal().real, expected, atol=1e-13)


def test_vacuum_weyl_expectation():
    F = fock.FockSpace(1, 30, 1.0)
    W = fock.weyl(np.array([1.0]), F)
    assert W.matrix[0, 0] == pytest.approx(math.exp(-0.25), abs=1e-12)


@pytest.mark.parametrize("eps", [1.0, 0.25])
def test_weyl_matches_dense_expm(eps, rng):
    F = fock.FockSpace(2, 6, eps)
    f = 0.5 * _rand(rng, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", fock.LeakageWarning)
        W = fock.weyl(f, F)
    np.testing.assert_allclose(W.matrix, oracles.dense_weyl(f, F, extra=40), atol=1e-11)


def test_weyl_product_law_on_protected_sectors(rng):
    F = fock.FockSpace(2, 20, 0.25)
    f, g = 0.3 * _rand(rng, 2), 0.3 * _rand(rng, 2)
    Wf, Wg, Wfg = fock.weyl(f, F), fock.weyl(g, F), fock.weyl(f + g, F)
    n = min(fock.weyl_protected_cutoff(W, F, 1e-12) for W in (Wg, Wfg))
    assert n >= 4
    s = F.sector_upto(n)
    phase = np.exp(-0.5j * F.epsilon * np.vdot(f, g).imag)
    assert np.max(np.abs((Wf.matrix @ Wg.matrix)[:, s] - phase * Wfg.matrix[:, s])) < 1e-8


def test_weyl_leakage_warning():
    F = fock.FockSpace(1, 4, 1.0)
    with pytest.warns(fock.LeakageWarning):
        fock.weyl(np.array([2.0]), F)


def test_weyl_apply_consistent(rng):
    F = fock.FockSpace(2, 8, 0.5)
    f = 0.4 * _rand(rng, 2)
    psi = _rand(rng, F.dim)
    out, lost = fock.weyl_apply(f, F, psi)
    np.testing.assert_allclose(out, fock.weyl(f, F, warn_tol=1).matrix @ psi, atol=1e-12)
    assert lost >= -1e-12


def test_density_roundtrip_and_trace(tmp_path, rng):
    F = fock.FockSpace(2, 3, 0.5)
    V = np.linalg.qr(_rand(rng, F.dim * 3).reshape(F.dim, 3))[0]
    rho = fock.DensityOp(F, V, [0.5, 0.3, 0.2])
    assert rho.trace() == pytest.approx(1.0)
    path = tmp_path / "rho.csv"
    rho.to_csv(path)
    back = fock.DensityOp.from_csv(F, path)
    np.testing.assert_allclose(back.matrix(), rho.matrix(), atol=1e-14)
    assert fock.trace_norm_diff(rho, back) < 1e-12
    assert open(path).readline().strip() == "row_sector,col_sector,row,col,re,im"


def test_fock_vector_csv(tmp_path, rng):
    F = fock.FockSpace(2, 3, 0.5)
    v = fock.FockVector(F, _rand(rng, F.dim))
    v.to_csv(tmp_path / "v.csv")
    np.testing.assert_array_equal(fock.FockVector.from_csv(F, tmp_path / "v.csv").data, v.data)


def test_density_rejects_bad_input():
    F = fock.FockSpace(1, 2, 0.5)
    with pytest.raises(ValueError):
        fock.DensityOp.from_matrix(F, np.diag([1.0, -0.5, 0.5]))
    with pytest.raises(ValueError):
        fock.DensityOp.pure(F, np.zeros(F.dim))


@given(st.integers(0, 2 ** 31))
def test_expectation_of_number_is_real_and_bounded(seed):
    rng = np.random.default_rng(seed)
    F = fock.FockSpace(2, 4, 0.5)
    rho = fock.DensityOp.pure(F, rng.standard_normal(F.dim) + 1j * rng.standard_normal(F.dim))
    val = fock.expectation(rho, fock.number_op(F))
    assert abs(val.imag) < 1e-14
    assert -1e-14 <= val.real <= F.epsilon * F.n_max + 1e-14
