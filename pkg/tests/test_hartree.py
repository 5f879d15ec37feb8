import math

import numpy as np
import pytest

from mflab import hartree, phase_space

import oracles


def _bandlimited(grid, rng, width=10, scale=1.0):
    """Random field supported on the Fourier modes |k| <= width."""
    zh = np.zeros(grid.shape, dtype=complex)
    k = np.fft.fftfreq(grid.points_per_axis, 1 / grid.points_per_axis)
    keep = np.abs(k) <= width
    zh[keep] = rng.standard_normal(keep.sum()) + 1j * rng.standard_normal(keep.sum())
    z = np.fft.ifft(zh)
    return scale * z / math.sqrt(hartree.mass(z, grid))


@pytest.fixture(scope="module")
def grid64():
    return phase_space.Grid(2 * math.pi, 1, 64)


@pytest.mark.parametrize("kwargs", [dict(integrator="euler"), dict(dt=0.0), dict(record_every=0)])
def test_flow_config_validation(kwargs):
    with pytest.raises(ValueError):
        hartree.FlowConfig(**kwargs)


def test_rk4_conserves_mass_and_energy(grid64, rng):
    V = phase_space.PairPotential.soft_coulomb(grid64, 1.0, 0.1)
    z0 = _bandlimited(grid64, rng, width=4)
    traj = hartree.flow(z0, 0.0, 0.5, hartree.FlowConfig(dt=1e-3, record_every=50), V)
    assert traj.relative_drift("mass") < 1e-8
    assert traj.relative_drift("energy") < 1e-8
    assert traj.times[-1] == pytest.approx(0.5)


def test_splitstep_conserves_mass(grid64, rng):
    V = phase_space.PairPotential.soft_coulomb(grid64, 1.0, 0.1)
    z0 = _bandlimited(grid64, rng, width=4)
    traj = hartree.flow(z0, 0.0, 0.5, hartree.FlowConfig("splitstep", dt=1e-3, record_every=50), V)
    assert traj.relative_drift("mass") < 1e-12
    assert traj.relative_drift("energy") < 1e-5


@pytest.mark.parametrize("integrator", hartree.INTEGRATORS)
@pytest.mark.parametrize("dim", [1, 2])
def test_plane_wave_constant_potential(integrator, dim):
    grid = phase_space.Grid(2 * math.pi, dim, 16)
    V = phase_space.PairPotential.constant(grid, 0.7)
    amp, k, t = 0.3, 2, 0.8
    if dim == 1:
        z0 = oracles.plane_wave(grid, k, amp, 0.7, 0.0)
        exact = oracles.plane_wave(grid, k, amp, 0.7, t)
    else:
        x, y = grid.coords
        mass = amp ** 2 * grid.length ** 2
        z0 = amp * np.exp(1j * (k * x + y))
        exact = z0 * np.exp(-1j * (k ** 2 + 1 + 0.7 * mass) * t)
    traj = hartree.flow(z0, 0.0, t, hartree.FlowConfig(integrator, dt=1e-3, record_every=10 ** 6), V)
    assert np.max(np.abs(traj.final - exact)) < 1e-9


def test_velocity_bounds_random_states(grid64, rng):
    V = phase_space.PairPotential.soft_coulomb(grid64, 1.0, 0.1)
    c_v = phase_space.v_resolvent_norm(V)
    for _ in range(20):
        z = _bandlimited(grid64, rng, width=10, scale=rng.uniform(0.2, 3.0))
        rep = hartree.velocity_bounds(rng.uniform(0, 1), z, V, c_v)
        assert rep["L2"]["ok"] and rep["H1"]["ok"]


def test_velocity_vanishes_for_zero_potential(grid64, rng):
    V = phase_space.PairPotential.constant(grid64, 0.0)
    assert np.max(np.abs(hartree.velocity(0.3, _bandlimited(grid64, rng), V))) == 0.0


def test_semigroup_and_reversibility(grid64, rng):
    V = phase_space.PairPotential.soft_coulomb(grid64, 1.0, 0.1)
    z0 = _bandlimited(grid64, rng, width=3)
    cfg = hartree.FlowConfig(dt=1e-3, record_every=10 ** 6)
    direct = hartree.flow(z0, 0.0, 0.3, cfg, V).final
    mid = hartree.flow(z0, 0.0, 0.1, cfg, V).final
    two = hartree.flow(mid, 0.1, 0.3, cfg, V).final
    assert np.max(np.abs(direct - two)) < 1e-10
    back = hartree.flow(direct, 0.3, 0.0, cfg, V).final
    assert np.max(np.abs(back - z0)) < 1e-10


def test_shape_mismatch(grid64):
    V = phase_space.PairPotential.constant(grid64, 1.0)
    with pytest.raises(ValueError):
        hartree.flow(np.zeros(10), 0.0, 1.0, hartree.FlowConfig(), V)


def test_blowup_guard(grid64):
    V = phase_space.PairPotential.constant(grid64, 0.0)
    z0 = np.full(grid64.shape, 1e7, dtype=complex)
    with pytest.raises(hartree.FlowBlowup):
        hartree.flow(z0, 0.0, 0.01, hartree.FlowConfig(dt=1e-3), V)


def test_trajectory_csv(tmp_path, grid64, rng):
    V = phase_space.PairPotential.constant(grid64, 0.0)
    traj = hartree.flow(_bandlimited(grid64, rng), 0.0, 0.01, hartree.FlowConfig(dt=5e-3), V)
    traj.to_csv(tmp_path / "t.csv", max_columns=8)
    rows = open(tmp_path / "t.csv").read().splitlines()
    assert rows[0].startswith("t,mass,energy") and len(rows) == 4


# Galerkin side


def test_galerkin_single_mode_matches_grid(modes2, soft):
    # |e_k|^2 is constant, so a single plane wave stays one and both flows agree
    c = np.array([0.0, 0.8 + 0.1j])
    K = phase_space.pair_kernel(soft, modes2)
    gal = hartree.galerkin_flow(c, 0.0, 0.5, hartree.FlowConfig(dt=1e-3, record_every=10 ** 6), K).final
    grid = hartree.flow(modes2.synthesize(c), 0.0, 0.5, hartree.FlowConfig(dt=1e-3, record_every=10 ** 6), soft).final
    np.testing.assert_allclose(modes2.analyze(grid), gal, atol=1e-10)


def test_galerkin_constant_potential_matches_grid(modes3, grid1, rng):
    V = phase_space.PairPotential.constant(grid1, 0.5)
    K = phase_space.pair_kernel(V, modes3)
    c = 0.5 * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
    cfg = hartree.FlowConfig(dt=1e-3, record_every=10 ** 6)
    gal = hartree.galerkin_flow(c, 0.0, 0.4, cfg, K).final
    grid = hartree.flow(modes3.synthesize(c), 0.0, 0.4, cfg, V).final
    np.testing.assert_allclose(modes3.analyze(grid), gal, atol=1e-10)


def test_galerkin_conservation_batch(modes3, soft, rng):
    K = phase_space.pair_kernel(soft, modes3)
    z0 = 0.5 * (rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3)))
    traj = hartree.galerkin_flow(z0, 0.0, 1.0, hartree.FlowConfig(dt=1e-3, record_every=100), K)
    assert np.max(np.abs(traj.mass - traj.mass[0]) / traj.mass[0]) < 1e-10
    assert np.max(np.abs(traj.energy - traj.energy[0]) / np.abs(traj.energy[0])) < 1e-9
    # rows evolve independently
    single = hartree.galerkin_flow(z0[2], 0.0, 1.0, hartree.FlowConfig(dt=1e-3, record_every=10 ** 6), K).final
    np.testing.assert_allclose(traj.final[2], single, atol=1e-14)


def test_mode_vector_field_is_gradient(modes2, soft, rng):
    K = phase_space.pair_kernel(soft, modes2)
    z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    v = hartree.mode_vector_field(z, modes2.kinetic, K.matrix)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        dx = (hartree.mode_energy(z + e, modes2.kinetic, K.matrix) - hartree.mode_energy(z - e, modes2.kinetic, K.matrix)) / (2 * h)
        dy = (hartree.mode_energy(z + 1j * e, modes2.kinetic, K.matrix)
              - hartree.mode_energy(z - 1j * e, modes2.kinetic, K.matrix)) / (2 * h)
        assert v[i] == pytest.approx(0.5 * (dx + 1j * dy), abs=1e-6)
