"""The classical Hartree dynamics on the periodic grid and on the retained modes.

Grid fields solve i dz/dt = -Lap z + (V * |z|^2) z. Two integrators are
provided: Strang splitting and classical RK4 in the interaction picture
z~_t = e^{-it Lap} z_t, where the stiff kinetic rotation is exact. The
Galerkin flow is the Hamiltonian ODE i dz/dt = K z + d_zbar Q(z) on the d
retained modes, with Q the pair-kernel symbol.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import phase_space, symmetric
from .wick import WickSymbol, eval_symbol, grad_zbar

BLOWUP_THRESHOLD = 1e6
INTEGRATORS = ("splitstep", "rk4_interaction")


class FlowBlowup(RuntimeError):
    """The Z1 norm of a trajectory exceeded the blow-up guard."""


@dataclass(frozen=True)
class FlowConfig:
    integrator: str = "rk4_interaction"
    dt: float = 1e-3
    galerkin: int = None
    record_every: int = 1

    def __post_init__(self):
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.states[-1]

    def relative_drift(self, which="energy"):
        x = getattr(self, which)
        ref = abs(x[0]) if x[0] != 0 else 1.0
        return float(np.max(np.abs(x - x[0])) / ref)

    def to_csv(self, path, max_columns=64):
        flat = self.states.reshape(len(self.times), -1)
        stride = max(1, math.ceil(flat.shape[1] / max_columns))
        cols = range(0, flat.shape[1], stride)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "mass", "energy"] + [f"{p}{i}" for i in cols for p in ("re", "im")])
            for t, m, e, row in zip(self.times, self.mass, self.energy, flat):
                vals = []
                for i in cols:
                    vals += [repr(float(row[i].real)), repr(float(row[i].imag))]
                w.writerow([repr(float(t)), repr(float(m)), repr(float(e))] + vals)


# grid side


def _fft(z, grid):
    return np.fft.fftn(z, axes=tuple(range(-grid.dim, 0)))


def _ifft(z, grid):
    return np.fft.ifftn(z, axes=tuple(range(-grid.dim, 0)))


def mass(z, grid):
    """Grid L^2 norm squared."""
    return float(np.sum(np.abs(z) ** 2) * grid.cell_volume)


def kinetic_energy(z, grid):
    zh = _fft(z, grid)
    return float(np.sum(grid.ksq * np.abs(zh) ** 2) * grid.cell_volume / zh.size)


def energy(z, V):
    """h(z) = int |grad z|^2 + 1/2 int int V(x-y) |z(x)|^2 |z(y)|^2."""
    grid = V.grid
    rho = np.abs(z) ** 2
    inter = 0.5 * np.sum(rho * phase_space.convolve_density(V, rho)) * grid.cell_volume
    return kinetic_energy(z, grid) + float(inter)


def grid_norm(z, grid, sobolev=False):
    zh = _fft(z, grid)
    w = 1.0 + grid.ksq if sobolev else 1.0
    return float(np.sqrt(np.sum(w * np.abs(zh) ** 2) * grid.cell_volume / zh.size))


def free_propagator(grid, t):
    """Fourier multiplier of e^{it Lap}."""
    return np.exp(-1j * grid.ksq * t)


def nonlinearity(z, V):
    return phase_space.convolve_density(V, np.abs(z) ** 2) * z


def velocity(t, z, V):
    """v(t, z) = e^{-it Lap} ([V * |e^{it Lap} z|^2] e^{it Lap} z)."""
    grid = V.grid
    phase = free_propagator(grid, t)
    zt = _ifft(phase * _fft(z, grid), grid)
    return _ifft(_fft(nonlinearity(zt, V), grid) / phase, grid)


def velocity_bounds(t, z, V, c_v=None):
    """Both sides of the L^2 and H^1 velocity estimates."""
    grid = V.grid
    if c_v is None:
        c_v = phase_space.v_resolvent_norm(V)
    v = velocity(t, z, V)
    n0, n1 = grid_norm(z, grid), grid_norm(z, grid, sobolev=True)
    out = {
        "L2": {"lhs": grid_norm(v, grid), "bound": c_v * n0 ** 2 * n1},
        "H1": {"lhs": grid_norm(v, grid, sobolev=True), "bound": c_v * n1 ** 2 * n0},
    }
    for rep in out.values():
        rep["slack"] = rep["bound"] - rep["lhs"]
        rep["ok"] = rep["lhs"] <= rep["bound"] * (1 + 1e-12)
    return out


def _guard(z, grid):
    n1 = grid_norm(z, grid, sobolev=True)
    if not np.isfinite(n1) or n1 > BLOWUP_THRESHOLD:
        raise FlowBlowup(f"Z1 norm {n1:.3e} exceeds {BLOWUP_THRESHOLD:.0e}")


def _steps(t0, t1, dt):
    span = t1 - t0
    if span == 0:
        return []
    n = max(1, math.ceil(abs(span) / dt - 1e-9))
    h = math.copysign(dt, span)
    steps = [h] * (n - 1)
    steps.append(span - h * (n - 1))
    return steps


def _rk4(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def flow(z0, t0, t1, cfg, V):
    """Integrate the grid Hartree equation from t0 to t1, recording mass and energy."""
    grid = V.grid
    z = np.array(z0, dtype=complex)
    if z.shape != grid.shape:
        raise ValueError(f"initial field shape {z.shape} does not match grid {grid.shape}")
    times, states, masses, energies = [t0], [z.copy()], [mass(z, grid)], [energy(z, V)]
    t = t0
    steps = _steps(t0, t1, cfg.dt)
    if cfg.integrator == "splitstep":
        for i, h in enumerate(steps):
            half = free_propagator(grid, h / 2)
            z = _ifft(half * _fft(z, grid), grid)
            z = np.exp(-1j * h * phase_space.convolve_density(V, np.abs(z) ** 2)) * z
            z = _ifft(half * _fft(z, grid), grid)
            t += h
            _guard(z, grid)
            if (i + 1) % cfg.record_every == 0 or i == len(steps) - 1:
                times.append(t)
                states.append(z.copy())
                masses.append(mass(z, grid))
                energies.append(energy(z, V))
    else:
        # z~ = e^{-i t Lap} z, measured from t0 so the state at t0 is unchanged
        rhs = lambda s, y: -1j * velocity(s - t0, y, V)
        y = z
        for i, h in enumerate(steps):
            y = _rk4(rhs, t, y, h)
            t += h
            if (i + 1) % cfg.record_every == 0 or i == len(steps) - 1:
                z = _ifft(free_propagator(grid, t - t0) * _fft(y, grid), grid)
                _guard(z, grid)
                times.append(t)
                states.append(z.copy())
                masses.append(mass(z, grid))
                energies.append(energy(z, V))
    return Trajectory(np.array(times), np.array(states), np.array(masses), np.array(energies),
                      {"integrator": cfg.integrator, "dt": cfg.dt})


# mode side


def mode_energy(z, kinetic, kernel_matrix):
    """h_d(z) = <z, K z> + <z^{(x)2}, V~ z^{(x)2}> on mode coefficients (batched)."""
    z = np.asarray(z, dtype=complex)
    kin = np.einsum("...i,ij,...j->...", z.conj(), kinetic, z).real
    Q = WickSymbol(2, 2, kernel_matrix, z.shape[-1])
    return kin + eval_symbol(Q, z).real


def mode_vector_field(z, kinetic, kernel_matrix):
    """d_zbar h_d(z) = K z + d_zbar Q(z)."""
    Q = WickSymbol(2, 2, kernel_matrix, np.shape(z)[-1])
    return np.einsum("ij,...j->...i", kinetic, z) + grad_zbar(Q, z)


def galerkin_flow(z0, t0, t1, cfg, kernel, kinetic=None):
    """RK4 in the interaction picture for i dz/dt = K z + d_zbar Q(z).

    ``z0`` may be a batch (..., d); each row is an independent trajectory.
    """
    if kinetic is None:
        kinetic = kernel.space.kinetic
    K = np.asarray(kinetic, dtype=complex)
    Vk = kernel.matrix
    lam, U = np.linalg.eigh(K)
    Q = WickSymbol(2, 2, Vk, K.shape[0])

    def rot(y, s):
        # e^{-i s K} applied along the last axis
        return np.einsum("ij,...j->...i", (U * np.exp(-1j * s * lam)) @ U.conj().T, y)

    def rhs(s, y):
        z = rot(y, s - t0)
        return -1j * rot(grad_zbar(Q, z), -(s - t0))

    z = np.array(z0, dtype=complex)
    times, states = [t0], [z.copy()]
    masses = [np.sum(np.abs(z) ** 2, axis=-1)]
    energies = [mode_energy(z, K, Vk)]
    y, t = z, t0
    steps = _steps(t0, t1, cfg.dt)
    for i, h in enumerate(steps):
        y = _rk4(rhs, t, y, h)
        t += h
        if (i + 1) % cfg.record_every == 0 or i == len(steps) - 1:
            z = rot(y, t - t0)
            n1 = np.sqrt(np.einsum("...i,ij,...j->...", z.conj(), K + np.eye(K.shape[0]), z).real)
            if not np.all(np.isfinite(n1)) or np.max(n1) > BLOWUP_THRESHOLD:
                raise FlowBlowup(f"Z1 norm exceeds {BLOWUP_THRESHOLD:.0e}")
            times.append(t)
            states.append(z.copy())
            masses.append(np.sum(np.abs(z) ** 2, axis=-1))
            energies.append(mode_energy(z, K, Vk))
    return Trajectory(np.array(times), np.array(states), np.array(masses), np.array(energies),
                      {"integrator": "rk4_interaction", "dt": cfg.dt})


def galerkin_evaluator(kernel, dt=1e-3, kinetic=None):
    """Flow map (points, t) -> points at time t, for push-forwards."""
    cfg = FlowConfig(dt=dt, record_every=10 ** 9)

    def evaluate(points, t):
        if t == 0:
            return np.array(points, dtype=complex)
        return galerkin_flow(points, 0.0, t, cfg, kernel, kinetic).final

    return evaluate
