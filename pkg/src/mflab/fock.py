"""Truncated symmetric Fock space with epsilon-scaled CCR.

States live in the flat space sum_{n <= n_max} Sym^n(C^d), ordered by
sector and then by the occupation order of ``symmetric.occupations``.
Operators are compressions P Op P to this space, stored as scipy sparse
matrices on the flat index. Annihilation acts as

    a(e_i) |m> = sqrt(eps m_i) |m - e_i>,   a(f) = sum_i conj(f_i) a(e_i),

so that [a(f), a*(g)] = eps <f, g> below the cutoff.
"""

import csv
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from . import symmetric


class LeakageWarning(UserWarning):
    """A truncated Weyl operator lost too much norm on its reported subspace."""


class FockSpace:
    """Sectors n = 0..n_max of the symmetric Fock space over d modes."""

    def __init__(self, modes, n_max, epsilon):
        if isinstance(modes, (int, np.integer)):
            self.mode_space, self.d = None, int(modes)
        else:
            self.mode_space, self.d = modes, modes.d
        if self.d < 1:
            raise ValueError("need at least one mode")
        if int(n_max) != n_max or n_max < 1:
            raise ValueError("n_max must be an integer >= 1")
        if not 0 < epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        self.n_max = int(n_max)
        self.epsilon = float(epsilon)
        self.dims = [symmetric.sector_dim(n, self.d) for n in range(self.n_max + 1)]
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)]).astype(int)
        self.dim = int(self.offsets[-1])

    def __repr__(self):
        return f"FockSpace(d={self.d}, n_max={self.n_max}, epsilon={self.epsilon})"

    def compatible(self, other):
        return self.d == other.d and self.n_max == other.n_max and self.epsilon == other.epsilon

    def sector(self, n):
        return slice(int(self.offsets[n]), int(self.offsets[n + 1]))

    def sector_upto(self, n):
        """Flat slice of sectors 0..n (a prefix of the flat index)."""
        n = min(n, self.n_max)
        return slice(0, int(self.offsets[n + 1])) if n >= 0 else slice(0, 0)

    def occupations(self, n):
        return symmetric.occupations(n, self.d)

    def index(self, m):
        m = tuple(int(k) for k in m)
        n = sum(m)
        return int(self.offsets[n]) + symmetric.index_map(n, self.d)[m]

    @cached_property
    def particle_numbers(self):
        """Sector label n of every flat basis index."""
        return np.repeat(np.arange(self.n_max + 1), self.dims)

    @cached_property
    def occupation_table(self):
        return np.vstack([symmetric.occupation_array(n, self.d) for n in range(self.n_max + 1)])

    def extended(self, extra):
        """Same modes and epsilon with a larger cutoff; the old space is a prefix."""
        return FockSpace(self.mode_space if self.mode_space is not None else self.d,
                         self.n_max + extra, self.epsilon)

    @cached_property
    def _mode_annihilators(self):
        eps = self.epsilon
        occ = self.occupation_table
        out = []
        for i in range(self.d):
            rows, cols, vals = [], [], []
            for col, m in enumerate(occ):
                if m[i] == 0:
                    continue
                lowered = m.copy()
                lowered[i] -= 1
                rows.append(self.index(lowered))
                cols.append(col)
                vals.append(math.sqrt(eps * int(m[i])))
            out.append(sp.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim), dtype=complex))
        return out

    def basis_vector(self, m):
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(m)] = 1.0
        return v

    def vacuum(self):
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v


def _as_modes(f, F):
    f = np.asarray(f, dtype=complex).reshape(-1)
    if f.shape != (F.d,):
        raise ValueError(f"mode vector has length {f.size}, expected {F.d}")
    return f


def annihilate(f, F):
    """a(f) = sum_i conj(f_i) a(e_i), antilinear in f."""
    f = _as_modes(f, F)
    out = sp.csr_matrix((F.dim, F.dim), dtype=complex)
    for fi, ai in zip(f, F._mode_annihilators):
        if fi != 0:
            out = out + np.conj(fi) * ai
    return out.tocsr()


def create(f, F):
    """a*(f), the exact conjugate transpose of ``annihilate(f)``."""
    return annihilate(f, F).conj().T.tocsr()


def number_op(F):
    return sp.diags(F.epsilon * F.particle_numbers.astype(float), format="csr").astype(complex)


def dgamma(A, F, tol=1e-12):
    """Second quantisation dGamma(A) of a Hermitian one-particle matrix.

    Built directly on the occupation basis so that dgamma(I) equals number_op
    bit for bit.
    """
    A = np.asarray(A, dtype=complex)
    if A.shape != (F.d, F.d):
        raise ValueError(f"one-particle matrix must be {F.d}x{F.d}")
    if np.max(np.abs(A - A.conj().T), initial=0.0) > tol:
        raise ValueError("dgamma requires a Hermitian matrix")
    eps = F.epsilon
    occ = F.occupation_table
    diag = eps * (occ.astype(float) @ np.real(np.diag(A)))
    rows, cols, vals = list(range(F.dim)), list(range(F.dim)), list(diag.astype(complex))
    off = [(i, j) for i in range(F.d) for j in range(F.d) if i != j and A[i, j] != 0]
    for col, m in enumerate(occ):
        for i, j in off:
            if m[j] == 0:
                continue
            target = m.copy()
            target[j] -= 1
            target[i] += 1
            rows.append(F.index(target))
            cols.append(col)
            vals.append(eps * A[i, j] * math.sqrt(int(m[j]) * (int(m[i]) + 1)))
    return sp.csr_matrix((vals, (rows, cols)), shape=(F.dim, F.dim), dtype=complex)


def s_epsilon(F, lam=1.0):
    """Reference operator dGamma(1 - Laplacian) + N + lam N^3 on the truncated space."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    weight = F.mode_space.sobolev_weight if F.mode_space is not None else np.eye(F.d)
    n = F.epsilon * F.particle_numbers.astype(float)
    return (dgamma(weight, F) + sp.diags((n + lam * n ** 3).astype(complex))).tocsr()


def field_generator(f, F):
    """i (a*(f) + a(f)) / sqrt(2), the anti-Hermitian generator of W(f)."""
    a = annihilate(f, F)
    return (1j / math.sqrt(2)) * (a + a.conj().T)


def weyl_margin(f, F, factor=4.0):
    return int(math.ceil(factor * np.linalg.norm(f) * math.sqrt(F.epsilon * F.n_max)))


def _extension(f, F, extra):
    if extra is None:
        extra = 12 + weyl_margin(f, F, factor=6.0)
    return F.extended(extra)


@dataclass
class WeylOperator:
    """Compression of W(f) to the truncated space plus its unitarity diagnostic."""

    matrix: np.ndarray
    leakage: float
    protected_n: int
    tail: np.ndarray = None

    def __matmul__(self, other):
        return self.matrix @ other


def weyl(f, F, extra=None, warn_tol=1e-6):
    """W(f) = exp(i (a*(f) + a(f)) / sqrt(2)) compressed to sectors <= n_max.

    The exponential is taken on a space with ``extra`` additional sectors so
    that the compression is accurate away from the cutoff. ``leakage`` is the
    deviation of W^dagger W from the identity on sectors
    n <= n_max - ceil(4 |f| sqrt(eps n_max)).
    """
    f = _as_modes(f, F)
    if not np.any(f):
        return WeylOperator(np.eye(F.dim, dtype=complex), 0.0, F.n_max, np.zeros(F.dim))
    big = _extension(f, F, extra)
    G = field_generator(f, big)
    cols = sp.eye(big.dim, F.dim, dtype=complex, format="csc")
    full = np.asarray(expm_multiply(G, cols.toarray()))
    W, tail = full[:F.dim, :], np.linalg.norm(full[F.dim:, :], axis=0)
    protected = F.n_max - weyl_margin(f, F)
    leak = unitarity_defect(W, F, protected)
    if leak > warn_tol:
        warnings.warn(f"Weyl leakage {leak:.2e} on sectors <= {protected}", LeakageWarning, stacklevel=2)
    return WeylOperator(W, leak, protected, tail)


def unitarity_defect(W, F, n):
    if n < 0:
        return float("inf")
    block = W[:, F.sector_upto(n)]
    return float(np.linalg.norm(block.conj().T @ block - np.eye(block.shape[1]), 2))


def weyl_protected_cutoff(W, F, tol):
    """Largest n such that W maps every basis vector of sectors <= n into the
    truncated space up to a norm ``tol`` escaping past the cutoff."""
    if isinstance(W, WeylOperator) and W.tail is not None:
        loss = W.tail
    else:
        W = W.matrix if isinstance(W, WeylOperator) else W
        loss = np.sqrt(np.clip(1.0 - np.sum(np.abs(W) ** 2, axis=0), 0.0, None))
    n_ok = -1
    for n in range(F.n_max + 1):
        if np.max(np.abs(loss[F.sector(n)])) > tol:
            break
        n_ok = n
    return n_ok


def weyl_apply(f, F, psi, extra=None):
    """P W(f) psi for a vector psi; returns (vector, norm lost to the cutoff)."""
    f = _as_modes(f, F)
    psi = np.asarray(psi, dtype=complex)
    if not np.any(f):
        return psi.copy(), 0.0
    big = _extension(f, F, extra)
    G = field_generator(f, big)
    ext = np.zeros((big.dim,) + psi.shape[1:], dtype=complex)
    ext[:F.dim] = psi
    out = np.asarray(expm_multiply(G, ext))[:F.dim]
    lost = float(np.sum(np.abs(psi) ** 2) - np.sum(np.abs(out) ** 2))
    return out, lost


class FockVector:
    """A vector of the truncated Fock space with per-sector access."""

    def __init__(self, F, data):
        data = np.asarray(data, dtype=complex).reshape(-1)
        if data.shape != (F.dim,):
            raise ValueError(f"vector length {data.size} does not match space dimension {F.dim}")
        if not np.all(np.isfinite(data)):
            raise ValueError("vector has non-finite entries")
        self.space, self.data = F, data

    def block(self, n):
        return self.data[self.space.sector(n)]

    @property
    def blocks(self):
        return [self.block(n) for n in range(self.space.n_max + 1)]

    def norm(self):
        return float(np.linalg.norm(self.data))

    def normalized(self):
        return FockVector(self.space, self.data / self.norm())

    def to_density(self):
        return DensityOp.pure(self.space, self.data)

    def to_csv(self, path):
        F = self.space
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sector", "index", "re", "im"])
            for n in range(F.n_max + 1):
                for i, v in enumerate(self.block(n)):
                    w.writerow([n, i, repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def from_csv(cls, F, path):
        data = np.zeros(F.dim, dtype=complex)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                n, i = int(row["sector"]), int(row["index"])
                data[F.offsets[n] + i] = float(row["re"]) + 1j * float(row["im"])
        return cls(F, data)


class DensityOp:
    """A normal state rho = sum_k w_k |v_k><v_k| on the truncated Fock space.

    Storing the mixture rather than the matrix keeps coherent and displaced
    states cheap and lets propagation act on vectors. ``matrix`` and
    ``blocks`` give the dense sector view.
    """

    def __init__(self, F, vectors, weights):
        vectors = np.asarray(vectors, dtype=complex)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if vectors.shape != (F.dim, weights.size):
            raise ValueError("mixture vectors and weights have inconsistent shapes")
        if np.any(weights < -1e-12):
            raise ValueError("mixture weights must be nonnegative")
        self.space, self.vectors, self.weights = F, vectors, weights

    @classmethod
    def pure(cls, F, psi, normalize=True):
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        if normalize:
            nrm = np.linalg.norm(psi)
            if nrm == 0:
                raise ValueError("cannot normalise the zero vector")
            psi = psi / nrm
        return cls(F, psi[:, None], [1.0])

    @classmethod
    def from_matrix(cls, F, rho, tol=1e-10):
        rho = np.asarray(rho, dtype=complex)
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > tol:
            raise ValueError("density matrix is not Hermitian")
        w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
        if w.size and w.min() < -tol:
            raise ValueError(f"density matrix has negative eigenvalue {w.min():.2e}")
        keep = w > tol * max(1.0, w.max(initial=0.0))
        return cls(F, v[:, keep], w[keep])

    @property
    def rank(self):
        return self.weights.size

    def trace(self):
        return float(np.sum(self.weights * np.sum(np.abs(self.vectors) ** 2, axis=0)))

    def normalized(self):
        return DensityOp(self.space, self.vectors, self.weights / self.trace())

    def matrix(self):
        v = self.vectors
        return (v * self.weights) @ v.conj().T

    def block(self, n, m=None):
        F = self.space
        m = n if m is None else m
        a, b = self.vectors[F.sector(n)], self.vectors[F.sector(m)]
        return (a * self.weights) @ b.conj().T

    @property
    def blocks(self):
        return [self.block(n) for n in range(self.space.n_max + 1)]

    def sector_weights(self):
        F = self.space
        mass = np.abs(self.vectors) ** 2 @ self.weights
        return np.array([mass[F.sector(n)].sum() for n in range(F.n_max + 1)])

    def apply_unitary(self, fn):
        """New state with every mixture vector mapped by ``fn``."""
        return DensityOp(self.space, fn(self.vectors), self.weights.copy())

    def check(self, tol=1e-10):
        """Trace, Hermiticity and positivity defects (Hermiticity holds by construction)."""
        return {"trace_defect": abs(self.trace() - 1.0), "min_weight": float(self.weights.min(initial=0.0))}

    def to_csv(self, path):
        F = self.space
        rho = self.matrix()
        nz = np.argwhere(np.abs(rho) > 0)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row_sector", "col_sector", "row", "col", "re", "im"])
            for i, j in nz:
                ni, nj = F.particle_numbers[i], F.particle_numbers[j]
                v = rho[i, j]
                w.writerow([ni, nj, i - F.offsets[ni], j - F.offsets[nj], repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def from_csv(cls, F, path):
        rho = np.zeros((F.dim, F.dim), dtype=complex)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                i = F.offsets[int(row["row_sector"])] + int(row["row"])
                j = F.offsets[int(row["col_sector"])] + int(row["col"])
                rho[i, j] = float(row["re"]) + 1j * float(row["im"])
        return cls.from_matrix(F, rho)


def expectation(rho, op):
    """Tr[rho op] for a sparse or dense operator on the flat space."""
    applied = op @ rho.vectors
    return complex(np.sum(rho.weights * np.sum(rho.vectors.conj() * applied, axis=0)))


def trace_norm_diff(rho1, rho2):
    """Trace norm ||rho1 - rho2||_1 via a Hermitian eigendecomposition."""
    if not rho1.space.compatible(rho2.space):
        raise ValueError("states live on different Fock spaces")
    return float(np.sum(np.abs(np.linalg.eigvalsh(rho1.matrix() - rho2.matrix()))))
