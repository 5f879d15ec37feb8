"""Periodic grids, retained Fourier modes and two-body interaction kernels.

The whole-space problem is periodised to the torus [0, L)^dim. A ModeSpace
keeps the d lowest Fourier modes e_k(x) = exp(2 pi i k.x / L) / L^{dim/2},
which are exactly orthonormal under grid quadrature.
"""

import csv
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np
from scipy.sparse.linalg import LinearOperator, svds

from . import symmetric


@dataclass(frozen=True)
class Grid:
    length: float
    dim: int = 1
    points_per_axis: int = 64

    def __post_init__(self):
        n = self.points_per_axis
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.length <= 0:
            raise ValueError("length must be positive")
        if n < 4 or n & (n - 1):
            raise ValueError("points_per_axis must be a power of two >= 4")

    @property
    def shape(self):
        return (self.points_per_axis,) * self.dim

    @property
    def dx(self):
        return self.length / self.points_per_axis

    @property
    def cell_volume(self):
        return self.dx ** self.dim

    @cached_property
    def coords(self):
        x = np.arange(self.points_per_axis) * self.dx
        return np.meshgrid(*([x] * self.dim), indexing="ij")

    @cached_property
    def displacements(self):
        """Minimal-image displacement of every grid point from the origin."""
        n = self.points_per_axis
        j = np.arange(n)
        r = np.where(j < n // 2, j, j - n) * self.dx
        return np.meshgrid(*([r] * self.dim), indexing="ij")

    @cached_property
    def radius(self):
        return np.sqrt(sum(r ** 2 for r in self.displacements))

    @cached_property
    def ksq(self):
        """|kappa|^2 on the FFT grid, the symbol of -Laplacian."""
        kappa = 2 * np.pi * np.fft.fftfreq(self.points_per_axis, d=self.dx)
        mesh = np.meshgrid(*([kappa] * self.dim), indexing="ij")
        return sum(k ** 2 for k in mesh)

    def integrate(self, f):
        return np.sum(f) * self.cell_volume

    def inner(self, f, g):
        return np.vdot(f, g) * self.cell_volume


@dataclass(frozen=True, eq=False)
class ModeSpace:
    """The span of the d retained Fourier modes, with its kinetic forms."""

    grid: Grid
    wavevectors: tuple
    modes: np.ndarray = field(repr=False)
    kinetic: np.ndarray = field(repr=False)

    @property
    def d(self):
        return len(self.wavevectors)

    @property
    def sobolev_weight(self):
        return self.kinetic + np.eye(self.d)

    @cached_property
    def kinetic_diagonal(self):
        return np.real(np.diag(self.kinetic)).copy()

    def gram(self):
        flat = self.modes.reshape(self.d, -1)
        return flat.conj() @ flat.T * self.grid.cell_volume

    def synthesize(self, coeffs):
        """Grid field sum_i c_i e_i; accepts batches (..., d)."""
        coeffs = np.asarray(coeffs, dtype=complex)
        return np.tensordot(coeffs, self.modes, axes=([-1], [0]))

    def analyze(self, field):
        """Mode coefficients <e_i, field> by grid quadrature."""
        flat = np.asarray(field).reshape(-1)
        return self.modes.reshape(self.d, -1).conj() @ flat * self.grid.cell_volume


def make_mode_space(grid, d):
    """The d lowest-frequency Fourier modes, ordered by |k| then lexicographically."""
    n = grid.points_per_axis
    if d < 1 or d > n ** grid.dim:
        raise ValueError(f"cannot retain {d} modes on a grid with {n ** grid.dim} points")
    half = range(-(n // 2), n // 2)
    ks = sorted(product(half, repeat=grid.dim), key=lambda k: (sum(c * c for c in k), k))[:d]
    coords = grid.coords
    norm = grid.length ** (-grid.dim / 2)
    modes = np.array([
        norm * np.exp(2j * np.pi * sum(kc * x for kc, x in zip(k, coords)) / grid.length)
        for k in ks
    ])
    kin = np.diag([(2 * np.pi / grid.length) ** 2 * sum(c * c for c in k) for k in ks]).astype(complex)
    space = ModeSpace(grid=grid, wavevectors=tuple(ks), modes=modes, kinetic=kin)
    gram_err = np.max(np.abs(space.gram() - np.eye(d)))
    if gram_err > 1e-12:
        raise RuntimeError(f"retained modes not orthonormal on the grid (error {gram_err:.2e})")
    return space


def l2_norm(z, space=None):
    return float(np.sqrt(np.sum(np.abs(np.asarray(z)) ** 2)))


def h1_norm(z, space):
    z = np.asarray(z, dtype=complex)
    return float(np.sqrt(np.real(np.vdot(z, space.sobolev_weight @ z))))


POTENTIAL_KINDS = ("constant", "gaussian", "soft_coulomb", "tabulated")


@dataclass(frozen=True, eq=False)
class PairPotential:
    """A real even pair potential sampled at the grid displacements."""

    kind: str
    params: dict
    grid: Grid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        s = np.asarray(self.samples)
        if s.shape != self.grid.shape or not np.all(np.isfinite(s)) or np.iscomplexobj(s):
            raise ValueError("potential samples must be finite real values on the grid")
        if evenness_defect(s) > 1e-12:
            raise ValueError("potential is not even, V(-x) != V(x)")

    @classmethod
    def constant(cls, grid, strength):
        return cls("constant", {"strength": strength}, grid, np.full(grid.shape, float(strength)))

    @classmethod
    def gaussian(cls, grid, strength=1.0, width=0.5):
        v = strength * np.exp(-grid.radius ** 2 / (2 * width ** 2))
        return cls("gaussian", {"strength": strength, "width": width}, grid, v)

    @classmethod
    def soft_coulomb(cls, grid, strength=1.0, softening=0.1):
        if softening <= 0:
            raise ValueError("softening must be positive")
        v = strength / np.sqrt(grid.radius ** 2 + softening ** 2)
        return cls("soft_coulomb", {"strength": strength, "softening": softening}, grid, v)

    @classmethod
    def tabulated(cls, grid, path):
        """Two-column CSV (displacement, value), interpolated in |x|."""
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        try:
            table = np.array([[float(a), float(b)] for a, b in rows])
        except ValueError:
            table = np.array([[float(a), float(b)] for a, b in rows[1:]])
        order = np.argsort(np.abs(table[:, 0]))
        r, v = np.abs(table[order, 0]), table[order, 1]
        return cls("tabulated", {"path": str(path)}, grid, np.interp(grid.radius, r, v))

    @classmethod
    def from_spec(cls, grid, spec):
        kind = spec.get("kind", "soft_coulomb")
        if kind == "constant":
            return cls.constant(grid, spec.get("strength", 0.0))
        if kind == "gaussian":
            return cls.gaussian(grid, spec.get("strength", 1.0), spec.get("width", 0.5))
        if kind == "soft_coulomb":
            return cls.soft_coulomb(grid, spec.get("strength", 1.0), spec.get("softening", 0.1))
        if kind == "tabulated":
            return cls.tabulated(grid, spec["path"])
        raise ValueError(f"unknown potential kind {kind!r}")

    @property
    def is_zero(self):
        return not np.any(self.samples)


def evenness_defect(samples):
    s = np.asarray(samples)
    flipped = s
    for ax in range(s.ndim):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    return float(np.max(np.abs(flipped - s)))


def convolve_density(V, density):
    """Periodic convolution (V * density)(x) = sum_y V(x - y) density(y) dy."""
    density = np.asarray(density)
    if density.shape != V.grid.shape:
        raise ValueError(f"density shape {density.shape} does not match grid {V.grid.shape}")
    out = np.fft.ifftn(np.fft.fftn(V.samples) * np.fft.fftn(density)) * V.grid.cell_volume
    return out.real if np.isrealobj(density) else out


@dataclass(frozen=True, eq=False)
class PairKernel:
    """Matrix of V/2 (x1 - x2) on the orthonormal basis of the symmetric two-particle space."""

    space: ModeSpace
    matrix: np.ndarray = field(repr=False)
    asymmetry: float = 0.0
    potential: PairPotential = None

    @property
    def d(self):
        return self.space.d

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "re", "im"])
            for (i, j), v in np.ndenumerate(self.matrix):
                w.writerow([i, j, repr(float(v.real)), repr(float(v.imag))])


def pair_tensor(V, space):
    """Four-index array T[i,j,k,l] = <e_i (x) e_j, V(x1-x2)/2 e_k (x) e_l>."""
    if V.grid != space.grid:
        raise ValueError("potential and mode space live on different grids")
    d = space.d
    dv = space.grid.cell_volume
    ax = tuple(range(space.grid.dim))
    vhat = np.fft.fftn(V.samples)
    g = space.modes.conj()[:, None] * space.modes[None, :]
    conv = np.fft.ifftn(vhat * np.fft.fftn(g, axes=tuple(a + 2 for a in ax)),
                        axes=tuple(a + 2 for a in ax)) * dv
    flat_g = g.reshape(d, d, -1)
    flat_c = conv.reshape(d, d, -1)
    # T[i,j,k,l] = 1/2 sum_x g_ik(x) (V*g_jl)(x) dv
    return 0.5 * np.einsum("ikx,jlx->ijkl", flat_g, flat_c) * dv


def pair_kernel(V, space, tol=1e-8):
    """Project V/2 onto the symmetric two-particle mode space.

    Hermiticity is enforced by symmetrisation; the pre-symmetrisation defect
    is stored and must stay below ``tol``.
    """
    d = space.d
    T = pair_tensor(V, space).reshape(d * d, d * d)
    iso = symmetric.symmetric_isometry(2, d)
    M = iso.T @ T @ iso
    asym = float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0
    if asym > tol:
        raise ValueError(f"pair kernel quadrature is inconsistent: Hermiticity defect {asym:.2e}")
    M = 0.5 * (M + M.conj().T)
    return PairKernel(space=space, matrix=M, asymmetry=asym, potential=V)


def v_resolvent_norm(V):
    """Operator norm of V (1 - Laplacian)^{-1/2} on the periodic grid."""
    grid = V.grid
    weight = 1.0 / np.sqrt(1.0 + grid.ksq)
    v = V.samples
    shape = grid.shape
    size = v.size

    def apply(x):
        x = x.reshape(shape)
        return (v * np.fft.ifftn(weight * np.fft.fftn(x))).reshape(-1)

    def apply_adj(y):
        y = y.reshape(shape)
        return np.fft.ifftn(weight * np.fft.fftn(v * y)).reshape(-1)

    if size <= 1024:
        eye = np.eye(size, dtype=complex)
        mat = np.column_stack([apply(eye[:, i]) for i in range(size)])
        return float(np.linalg.norm(mat, 2))
    op = LinearOperator((size, size), matvec=apply, rmatvec=apply_adj, dtype=complex)
    s = svds(op, k=1, return_singular_vectors=False, random_state=0)
    return float(s[0])
