"""Many-body Hamiltonian on the truncated Fock space and its dynamics.

H = dGamma(kinetic) + Q^Wick with Q(z) = <z^{(x)2}, V~ z^{(x)2}> and V~ the
pair kernel (which already carries the factor 1/2). Every operator
conserves particle number, so dynamics is computed exactly sector by sector
from Hermitian eigendecompositions.
"""

import csv
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from . import fock, phase_space, symmetric
from .wick import PolySymbol, WickSymbol, translate, wick_block, wick_quantize


class ManyBodyHamiltonian:
    """H = free + interaction with per-sector dense blocks."""

    def __init__(self, F, kinetic, kernel_matrix=None):
        self.space = F
        self.epsilon = F.epsilon
        self.kinetic = np.asarray(kinetic, dtype=complex)
        self.kernel_matrix = None if kernel_matrix is None else np.asarray(kernel_matrix, dtype=complex)
        self.free = fock.dgamma(self.kinetic, F)
        if self.kernel_matrix is None:
            self.interaction = fock.sp.csr_matrix((F.dim, F.dim), dtype=complex)
        else:
            self.interaction = wick_quantize(self.interaction_symbol, F)
        self.total = (self.free + self.interaction).tocsr()

    @property
    def interaction_symbol(self):
        return WickSymbol(2, 2, self.kernel_matrix, self.space.d)

    def block(self, n):
        s = self.space.sector(n)
        return self.total[s, s].toarray()

    @property
    def blocks(self):
        return [self.block(n) for n in range(self.space.n_max + 1)]

    @cached_property
    def eig(self):
        """Per-sector (eigenvalues, eigenvectors)."""
        out = []
        for n in range(self.space.n_max + 1):
            B = self.block(n)
            out.append(np.linalg.eigh(0.5 * (B + B.conj().T)))
        return out

    def hermiticity_defect(self):
        return max(float(np.max(np.abs(B - B.conj().T))) for B in self.blocks)

    def number_leak(self):
        """Largest entry of H coupling different sectors (zero by construction)."""
        H = self.total.tocoo()
        pn = self.space.particle_numbers
        off = pn[H.row] != pn[H.col]
        return float(np.max(np.abs(H.data[off]), initial=0.0))

    def evolve(self, vectors, t):
        """Apply exp(-i t H / eps) to vectors (flat index along axis 0)."""
        out = np.array(vectors, dtype=complex, copy=True)
        if t == 0:
            return out
        for n, (lam, Q) in enumerate(self.eig):
            s = self.space.sector(n)
            phase = np.exp(-1j * t * lam / self.epsilon)
            out[s] = Q @ (phase[:, None] * (Q.conj().T @ out[s])) if out.ndim == 2 else Q @ (phase * (Q.conj().T @ out[s]))
        return out

    def unitary_block(self, n, t):
        lam, Q = self.eig[n]
        return (Q * np.exp(-1j * t * lam / self.epsilon)) @ Q.conj().T

    def spectrum_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "index", "value"])
            for n, (lam, _) in enumerate(self.eig):
                for i, v in enumerate(lam):
                    w.writerow([n, i, repr(float(v))])


def build(F, kernel=None, kinetic=None):
    """Assemble the Hamiltonian on ``F`` for a PairKernel (None means V = 0)."""
    if kinetic is None:
        if F.mode_space is None:
            raise ValueError("a kinetic matrix is needed when the Fock space has no mode space")
        kinetic = F.mode_space.kinetic
    if kernel is not None:
        if kernel.d != F.d:
            raise ValueError("pair kernel and Fock space have different numbers of modes")
        if F.mode_space is not None and kernel.space is not F.mode_space:
            if not np.array_equal(kernel.space.kinetic, F.mode_space.kinetic):
                raise ValueError("pair kernel lives on a different mode space")
        return ManyBodyHamiltonian(F, kinetic, kernel.matrix)
    return ManyBodyHamiltonian(F, kinetic, None)


def free_part(H):
    return ManyBodyHamiltonian(H.space, H.kinetic, None)


def first_quantized_block(n, kinetic, pair_tensor, eps):
    """Oracle: eps sum_i h_i + eps^2 sum_{i<j} V_ij on (C^d)^{(x) n}, compressed to Sym^n."""
    d = kinetic.shape[0]
    I = np.eye(d)
    full = np.zeros((d ** n, d ** n), dtype=complex)
    for i in range(n):
        ops = [I] * n
        ops[i] = kinetic
        term = ops[0]
        for o in ops[1:]:
            term = np.kron(term, o)
        full += eps * term
    # V(x_i - x_j) = 2 T on the pair (i, j); permute the pair to the front
    V2 = 2 * np.asarray(pair_tensor).reshape(d * d, d * d)
    for i in range(n):
        for j in range(i + 1, n):
            full += eps ** 2 * _pair_embed(V2, i, j, n, d)
    iso = symmetric.symmetric_isometry(n, d)
    return iso.T @ full @ iso


def _pair_embed(V2, i, j, n, d):
    rest = [k for k in range(n) if k not in (i, j)]
    op = np.kron(V2, np.eye(d ** (n - 2))) if n > 2 else V2
    order = [i, j] + rest
    perm = np.argsort(order)
    op = op.reshape([d] * (2 * n))
    op = op.transpose(list(perm) + [n + k for k in perm])
    return op.reshape(d ** n, d ** n)


def propagate_vec(psi, H, t):
    return H.evolve(psi, t)


def propagate(rho, H, t):
    """rho -> U rho U^dagger with U = exp(-i t H / eps)."""
    return rho.apply_unitary(lambda v: H.evolve(v, t))


def interaction_picture(rho, H, H0, t):
    """e^{itH0/eps} e^{-itH/eps} rho e^{itH/eps} e^{-itH0/eps}."""
    return rho.apply_unitary(lambda v: H0.evolve(H.evolve(v, t), -t))


def energy(rho, H):
    return fock.expectation(rho, H.total).real


def conjugated_kernel(kernel_matrix, kinetic, s):
    """V~_s = Gamma_2(e^{isK}) V~ Gamma_2(e^{-isK})."""
    kinetic = np.asarray(kinetic, dtype=complex)
    if np.count_nonzero(kinetic - np.diag(np.diag(kinetic))) == 0:
        D = symmetric.sym_power_diag(np.exp(1j * s * np.real(np.diag(kinetic))), 2)
        return D[:, None] * kernel_matrix * D.conj()[None, :]
    U2 = symmetric.sym_power(expm(1j * s * kinetic), 2)
    return U2 @ kernel_matrix @ U2.conj().T


def bj_symbols(s, xi, kernel, kinetic=None):
    """The four symbols b_1..b_4 with V_s(z + i eps xi / sqrt 2) - V_s(z) = sum_j eps^j b_j(z).

    Each b_j is a PolySymbol mixing P_{p,q} parts with p + q = 4 - j.
    """
    if kinetic is None:
        kinetic = kernel.space.kinetic
    Vs = WickSymbol(2, 2, conjugated_kernel(kernel.matrix, kinetic, s), kernel.d)
    parts = translate(Vs, 1j * np.asarray(xi, dtype=complex) / np.sqrt(2))
    return [parts.get(j, PolySymbol(kernel.d)) for j in range(1, 5)]


def relative_bound_report(F, kernel, lam, c_v=None):
    """Check ||V_eps Psi|| <= lam ||V (1-Lap)^{-1/2}|| ||S_eps(lam^{-2}) Psi|| sector by sector.

    Reports the largest ratio ||V_n S_n^{-1}|| over sectors n >= 1 against
    lam * C_V.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if c_v is None:
        c_v = phase_space.v_resolvent_norm(kernel.potential)
    V = WickSymbol(2, 2, kernel.matrix, kernel.d)
    S = fock.s_epsilon(F, lam ** -2)
    worst = 0.0
    for n in range(1, F.n_max + 1):
        sl = F.sector(n)
        Vn = wick_block(V, n, F.epsilon)
        Sn = S[sl, sl].toarray()
        ratio = float(np.linalg.norm(np.linalg.solve(Sn.T, Vn.T).T, 2))
        worst = max(worst, ratio)
    bound = lam * c_v
    return {"lambda": lam, "lhs": worst, "bound": bound, "slack": bound - worst, "ok": worst <= bound * (1 + 1e-12)}
