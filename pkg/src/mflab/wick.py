"""Wick symbols, their quantization and the finite-dimensional symbol calculus.

A symbol b in P_{p,q} is the polynomial b(z) = <u_q(z), K u_p(z)>, where
u_n(z) are the coordinates of z^{(x) n} in the occupation basis and K (the
kernel) is a dim_q x dim_p matrix. Equivalently

    b(z) = sum_{alpha, beta} c_{alpha beta} conj(z)^alpha z^beta,
    c_{alpha beta} = K_{alpha beta} sqrt(q! p! / (alpha! beta!)),

and the coefficient form is what the contraction and translation routines
work with. Wick quantization acts on sector n as

    sqrt(n! (n-p+q)!) / (n-p)! * eps^{(p+q)/2} * S_{n-p+q} (K (x) 1) : n -> n-p+q.
"""

import csv
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import comb, factorial

import numpy as np
import scipy.sparse as sp

from . import fock, symmetric


class WickSymbol:
    """Homogeneous polynomial in P_{p,q} carried by its symmetric-basis kernel."""

    def __init__(self, p, q, kernel, d=None):
        kernel = np.asarray(kernel, dtype=complex)
        if d is None:
            d = _infer_d(p, q, kernel.shape)
        shape = (symmetric.sector_dim(q, d), symmetric.sector_dim(p, d))
        if kernel.shape != shape:
            raise ValueError(f"kernel shape {kernel.shape} does not match P_{{{p},{q}}} over d={d}: {shape}")
        self.p, self.q, self.d = int(p), int(q), int(d)
        self.kernel = kernel
        self.kernel.setflags(write=False)

    def __repr__(self):
        return f"WickSymbol(p={self.p}, q={self.q}, d={self.d})"

    # constructors
    @classmethod
    def constant(cls, c, d):
        return cls(0, 0, [[c]], d)

    @classmethod
    def number(cls, d, power=1):
        """|z|^{2 power}."""
        return cls(power, power, np.eye(symmetric.sector_dim(power, d)), d)

    @classmethod
    def one_body(cls, A):
        """<z, A z>."""
        A = np.asarray(A, dtype=complex)
        return cls(1, 1, A, A.shape[0])

    @classmethod
    def linear(cls, f):
        """<f, z>, whose quantization is a(f)."""
        f = np.asarray(f, dtype=complex)
        return cls(1, 0, f.conj()[None, :], f.size)

    @classmethod
    def from_tensor(cls, p, q, T, d):
        """Compress an operator T on the full tensor spaces (d**q x d**p)."""
        return cls(p, q, symmetric.symmetric_isometry(q, d).T @ np.asarray(T) @ symmetric.symmetric_isometry(p, d), d)

    @classmethod
    def random(cls, p, q, d, rng, hermitian=False):
        shape = (symmetric.sector_dim(q, d), symmetric.sector_dim(p, d))
        K = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        if hermitian:
            if p != q:
                raise ValueError("Hermitian kernels need p == q")
            K = 0.5 * (K + K.conj().T)
        return cls(p, q, K, d)

    # algebra
    def __add__(self, other):
        self._check_same(other)
        return WickSymbol(self.p, self.q, self.kernel + other.kernel, self.d)

    def __sub__(self, other):
        return self + (-1) * other

    def __mul__(self, c):
        return WickSymbol(self.p, self.q, c * self.kernel, self.d)

    __rmul__ = __mul__

    def _check_same(self, other):
        if (self.p, self.q, self.d) != (other.p, other.q, other.d):
            raise ValueError("symbols live in different P_{p,q}")

    def adjoint(self):
        """The symbol conj(b(z)) in P_{q,p}."""
        return WickSymbol(self.q, self.p, self.kernel.conj().T, self.d)

    def norm(self):
        """|b|_{p,q}, the operator norm of the kernel."""
        return float(np.linalg.norm(self.kernel, 2)) if self.kernel.size else 0.0

    def is_zero(self):
        return not np.any(self.kernel)

    def full_kernel(self):
        """Kernel on the full tensor spaces, vanishing off the symmetric subspaces."""
        return symmetric.symmetric_isometry(self.q, self.d) @ self.kernel @ symmetric.symmetric_isometry(self.p, self.d).T

    def symmetry_defect(self):
        """max |S_q K S_p - K| for the full-space kernel."""
        K = self.full_kernel()
        Sq = symmetric.symmetric_isometry(self.q, self.d)
        Sp = symmetric.symmetric_isometry(self.p, self.d)
        return float(np.max(np.abs(Sq @ Sq.T @ K @ Sp @ Sp.T - K), initial=0.0))

    # evaluation
    def __call__(self, z):
        return eval_symbol(self, z)

    def coefficients(self):
        """Map (alpha, beta) -> c with b = sum c conj(z)^alpha z^beta."""
        cq = symmetric.power_constants(self.q, self.d)
        cp = symmetric.power_constants(self.p, self.d)
        C = self.kernel * cq[:, None] * cp[None, :]
        occ_q, occ_p = symmetric.occupations(self.q, self.d), symmetric.occupations(self.p, self.d)
        return {(occ_q[i], occ_p[j]): C[i, j] for i, j in zip(*np.nonzero(C))}

    @classmethod
    def from_coefficients(cls, p, q, d, coeffs):
        K = np.zeros((symmetric.sector_dim(q, d), symmetric.sector_dim(p, d)), dtype=complex)
        iq, ip = symmetric.index_map(q, d), symmetric.index_map(p, d)
        cq = symmetric.power_constants(q, d)
        cp = symmetric.power_constants(p, d)
        for (alpha, beta), c in coeffs.items():
            i, j = iq[alpha], ip[beta]
            K[i, j] += c / (cq[i] * cp[j])
        return cls(p, q, K, d)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "q", "d", "row", "col", "re", "im"])
            for (i, j), v in np.ndenumerate(self.kernel):
                w.writerow([self.p, self.q, self.d, i, j, repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        p, q, d = (int(rows[0][k]) for k in ("p", "q", "d"))
        K = np.zeros((symmetric.sector_dim(q, d), symmetric.sector_dim(p, d)), dtype=complex)
        for r in rows:
            K[int(r["row"]), int(r["col"])] = float(r["re"]) + 1j * float(r["im"])
        return cls(p, q, K, d)


def _infer_d(p, q, shape):
    n = max(p, q)
    if n == 0:
        raise ValueError("cannot infer d for a constant symbol; pass d")
    size = shape[1] if p >= q else shape[0]
    d = 1
    while symmetric.sector_dim(n, d) < size:
        d += 1
    return d


def eval_symbol(b, z):
    """b(z) = <u_q(z), K u_p(z)>; z may be a batch (..., d)."""
    z = np.asarray(z, dtype=complex)
    uq = symmetric.tensor_power(z, b.q)
    up = symmetric.tensor_power(z, b.p)
    return np.einsum("...a,ab,...b->...", uq.conj(), b.kernel, up)


def grad_zbar(b, z):
    """The vector d b / d conj(z_i); z may be a batch."""
    z = np.asarray(z, dtype=complex)
    Jq = symmetric.tensor_power_jacobian(z, b.q)
    up = symmetric.tensor_power(z, b.p)
    return np.einsum("...ai,ab,...b->...i", Jq.conj(), b.kernel, up)


def grad_z(b, z):
    """The vector d b / d z_i."""
    z = np.asarray(z, dtype=complex)
    uq = symmetric.tensor_power(z, b.q)
    Jp = symmetric.tensor_power_jacobian(z, b.p)
    return np.einsum("...a,ab,...bi->...i", uq.conj(), b.kernel, Jp)


class PolySymbol:
    """Finite sum of Wick symbols graded by (p, q, power of epsilon)."""

    def __init__(self, d, terms=None):
        self.d = d
        self.terms = {}
        for key, sym in (terms or {}).items():
            self.add(sym, key[2] if len(key) > 2 else 0)

    @classmethod
    def of(cls, *symbols):
        out = cls(symbols[0].d)
        for s in symbols:
            out.add(s)
        return out

    def add(self, sym, eps_power=0):
        if sym.d != self.d:
            raise ValueError("symbol lives over a different number of modes")
        if eps_power < 0:
            raise ValueError("epsilon powers must be nonnegative")
        key = (sym.p, sym.q, int(eps_power))
        if key in self.terms:
            sym = self.terms[key] + sym
        if sym.is_zero():
            self.terms.pop(key, None)
        else:
            self.terms[key] = sym
        return self

    def __add__(self, other):
        out = PolySymbol(self.d, dict(self.terms))
        for (p, q, k), s in other.terms.items():
            out.add(s, k)
        return out

    def __mul__(self, c):
        return PolySymbol(self.d, {k: c * s for k, s in self.terms.items()})

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1) * other

    def is_zero(self):
        return not self.terms

    def at_epsilon(self, eps):
        """Collapse the epsilon grading: a PolySymbol with every power folded in."""
        out = PolySymbol(self.d)
        for (p, q, k), s in self.terms.items():
            out.add(eps ** k * s)
        return out

    def __call__(self, z, eps):
        z = np.asarray(z, dtype=complex)
        total = np.zeros(z.shape[:-1], dtype=complex)
        for (p, q, k), s in self.terms.items():
            total = total + eps ** k * eval_symbol(s, z)
        return total

    def degree(self):
        """Largest p and q appearing."""
        if not self.terms:
            return 0, 0
        return max(k[0] for k in self.terms), max(k[1] for k in self.terms)


@lru_cache(maxsize=None)
def _wick_coefficient(n, p, q, eps):
    return math.sqrt(Fraction(factorial(n) * factorial(n - p + q), factorial(n - p) ** 2)) * eps ** ((p + q) / 2)


@lru_cache(maxsize=None)
def _stacked_splits(n, p, d):
    parts = symmetric.splits(n, p, d)
    idx = np.array([ix for ix, _ in parts], dtype=np.int64)
    coef = np.array([c for _, c in parts])
    return idx, coef


def wick_block(b, n, eps):
    """Dense block of b^Wick from sector n to sector n - p + q."""
    p, q, d = b.p, b.q, b.d
    out_n = n - p + q
    block = np.zeros((symmetric.sector_dim(out_n, d), symmetric.sector_dim(n, d)), dtype=complex)
    if n < p or out_n < 0:
        return block
    idx_in, c_in = _stacked_splits(n, p, d)
    idx_out, c_out = _stacked_splits(out_n, q, d)
    contrib = c_out[:, :, None] * b.kernel[None, :, :] * c_in[:, None, :]
    np.add.at(block, (idx_out[:, :, None], idx_in[:, None, :]), contrib)
    return _wick_coefficient(n, p, q, eps) * block


def wick_quantize(b, F):
    """b^Wick compressed to the truncated Fock space ``F`` as a sparse matrix.

    Accepts a WickSymbol or a PolySymbol (epsilon powers evaluated at F.epsilon).
    """
    if isinstance(b, PolySymbol):
        out = sp.csr_matrix((F.dim, F.dim), dtype=complex)
        for (p, q, k), s in b.terms.items():
            out = out + F.epsilon ** k * wick_quantize(s, F)
        return out.tocsr()
    if b.d != F.d:
        raise ValueError("symbol and Fock space have different numbers of modes")
    rows, cols, vals = [], [], []
    for n in range(b.p, F.n_max + 1):
        out_n = n - b.p + b.q
        if out_n > F.n_max:
            continue
        blk = wick_block(b, n, F.epsilon)
        r, c = np.nonzero(blk)
        rows.append(r + F.offsets[out_n])
        cols.append(c + F.offsets[n])
        vals.append(blk[r, c])
    if not rows:
        return sp.csr_matrix((F.dim, F.dim), dtype=complex)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(F.dim, F.dim), dtype=complex)


def _falling(m, k):
    """prod m_i! / (m_i - k_i)!, zero when k exceeds m somewhere."""
    out = 1
    for a, b in zip(m, k):
        if b > a:
            return 0
        out *= factorial(a) // factorial(a - b)
    return out


def contract(b1, b2, k):
    """The symbol d_z^k b1 . d_zbar^k b2 in P_{p1+p2-k, q1+q2-k}.

    Computed on coefficients as sum_{|g|=k} k!/g! d_z^g b1 * d_zbar^g b2.
    """
    if b1.d != b2.d:
        raise ValueError("symbols over different numbers of modes")
    if k < 0 or k > min(b1.p, b2.q):
        raise ValueError(f"contraction order {k} outside 0..min(p1, q2) = {min(b1.p, b2.q)}")
    d = b1.d
    p, q = b1.p + b2.p - k, b1.q + b2.q - k
    gammas = symmetric.occupations(k, d)
    gfact = [factorial(k) // symmetric.mfact(g) for g in gammas]
    c1, c2 = b1.coefficients(), b2.coefficients()
    out = {}
    for (a1, be1), v1 in c1.items():
        for (a2, be2), v2 in c2.items():
            for g, gf in zip(gammas, gfact):
                f1 = _falling(be1, g)
                if not f1:
                    continue
                f2 = _falling(a2, g)
                if not f2:
                    continue
                alpha = tuple(x + y - z for x, y, z in zip(a1, a2, g))
                beta = tuple(x - z + y for x, y, z in zip(be1, be2, g))
                key = (alpha, beta)
                out[key] = out.get(key, 0) + gf * f1 * f2 * v1 * v2
    return WickSymbol.from_coefficients(p, q, d, out)


def contraction_bound(b1, b2, k):
    return (factorial(b1.p) / factorial(b1.p - k)) * (factorial(b2.q) / factorial(b2.q - k)) * b1.norm() * b2.norm()


def compose(b1, b2):
    """Symbol of b1^Wick b2^Wick: sum_k eps^k / k! contract(b1, b2, k)."""
    out = PolySymbol(b1.d)
    for k in range(min(b1.p, b2.q) + 1):
        out.add((1.0 / factorial(k)) * contract(b1, b2, k), k)
    return out


def poisson_bracket(b1, b2, k=1):
    """Multiple Poisson bracket {b1, b2}^(k) as a PolySymbol."""
    out = PolySymbol(b1.d)
    if k <= min(b1.p, b2.q):
        out.add(contract(b1, b2, k))
    if k <= min(b2.p, b1.q):
        out.add(-1 * contract(b2, b1, k))
    return out


def commutator_symbol(b1, b2):
    """Symbol of [b1^Wick, b2^Wick]: sum_{k>=1} eps^k / k! {b1, b2}^(k)."""
    out = PolySymbol(b1.d)
    kmax = max(min(b1.p, b2.q), min(b2.p, b1.q))
    for k in range(1, kmax + 1):
        for (p, q, _), s in poisson_bracket(b1, b2, k).terms.items():
            out.add((1.0 / factorial(k)) * s, k)
    return out


def _binom_multi(m, k):
    out = 1
    for a, b in zip(m, k):
        out *= comb(a, b)
    return out


def _sub_multi(m):
    return product(*(range(a + 1) for a in m))


def translate(b, w):
    """Expand b(z + w) by homogeneous degree in w.

    Returns a dict j -> PolySymbol collecting the terms of total degree j in
    (w, conj(w)); summing b_j(z) over j gives b(z + w).
    """
    w = np.asarray(w, dtype=complex)
    d = b.d
    parts = {}
    for (alpha, beta), c in b.coefficients().items():
        for a in _sub_multi(alpha):
            wa = np.prod(np.conj(w) ** np.subtract(alpha, a))
            ca = _binom_multi(alpha, a)
            for be in _sub_multi(beta):
                wb = np.prod(w ** np.subtract(beta, be))
                val = c * ca * _binom_multi(beta, be) * wa * wb
                if val == 0:
                    continue
                j = (sum(alpha) - sum(a)) + (sum(beta) - sum(be))
                key = (j, sum(be), sum(a))
                coeffs = parts.setdefault(key, {})
                coeffs[(a, be)] = coeffs.get((a, be), 0) + val
    out = {}
    for (j, p, q), coeffs in parts.items():
        out.setdefault(j, PolySymbol(d)).add(WickSymbol.from_coefficients(p, q, d, coeffs))
    return out


def japanese_n(F):
    """Diagonal of <N> = (1 + N^2)^{1/2}."""
    n = F.epsilon * F.particle_numbers.astype(float)
    return np.sqrt(1.0 + n ** 2)


def number_estimate_check(b, F):
    """Compare ||<N>^{-q/2} b^Wick <N>^{-p/2}|| with |b|_{p,q}."""
    jn = japanese_n(F)
    W = wick_quantize(b, F)
    M = sp.diags(jn ** (-b.q / 2)) @ W @ sp.diags(jn ** (-b.p / 2))
    lhs = float(np.linalg.norm(M.toarray(), 2)) if M.nnz else 0.0
    rhs = b.norm()
    return {"lhs": lhs, "bound": rhs, "slack": rhs - lhs, "ok": lhs <= rhs * (1 + 1e-12) + 1e-14}


def _inv_sqrt_psd(A):
    w, v = np.linalg.eigh(A)
    return (v / np.sqrt(w)) @ v.conj().T


def _sector_function(F, values_by_sector):
    return np.concatenate([np.full(F.dims[n], values_by_sector[n]) for n in range(F.n_max + 1)])


def compest_check(b, F, A):
    """Sandwich bound for a kernel of type (p, q) = (2, 1) or (1, 2).

    With R = (dGamma(A) + sqrt(N) + 1)^{-1}, compares ||R b^Wick R|| with
    ||A^{-1/2} K (1 (x) A^{-1/2})|| (annihilating side) or its adjoint form.
    The kernel is extended to the full tensor space through the symmetric
    projection.
    """
    A = np.asarray(A, dtype=complex)
    if np.linalg.eigvalsh(A).min() < 1 - 1e-12:
        raise ValueError("A must satisfy A >= 1")
    d = F.d
    Ainv = _inv_sqrt_psd(A)
    I = np.eye(d)
    K = b.full_kernel()
    if (b.p, b.q) == (2, 1):
        rhs = np.linalg.norm(Ainv @ K @ np.kron(I, Ainv), 2)
    elif (b.p, b.q) == (1, 2):
        rhs = np.linalg.norm(np.kron(I, Ainv) @ K @ Ainv, 2)
    else:
        raise ValueError("sandwich bound needs a (2,1) or (1,2) kernel")
    R = np.linalg.inv((fock.dgamma(A, F) + sp.diags(np.sqrt(F.epsilon * F.particle_numbers) + 1.0)).toarray())
    lhs = np.linalg.norm(R @ wick_quantize(b, F).toarray() @ R, 2)
    return {"lhs": float(lhs), "bound": float(rhs), "ok": lhs <= rhs * (1 + 1e-10)}


def _herm_power(M, s):
    w, v = np.linalg.eigh(M)
    return (v * w ** s) @ v.conj().T


def boundedest_check(F, A, B, C=None):
    """The two dGamma sandwich bounds for B >= 0.

    (i)  ||(dGamma(B)+N+1)^{-1} dGamma(A) (dGamma(B)+N+1)^{-1}|| <= ||(1+B)^{-1} A (1+B)^{-1}||
    (ii) ||(dGamma(B)+N^2+1)^{-1} C^Wick (...)^{-1}|| <= ||(1+B_2)^{-1/2} C (1+B_2)^{-1/2}||
    with C a Hermitian (2,2) symbol. The resolvent enters with power -1 on
    each side; with power -1/2 the inequality fails once N > 1/2.
    """
    d = F.d
    N = F.epsilon * F.particle_numbers.astype(float)
    dB = fock.dgamma(B, F).toarray()
    one_plus_B = np.eye(d) + B
    R1 = np.linalg.inv(dB + np.diag(N + 1.0))
    lhs1 = np.linalg.norm(R1 @ fock.dgamma(A, F).toarray() @ R1, 2)
    inv = np.linalg.inv(one_plus_B)
    rhs1 = np.linalg.norm(inv @ A @ inv, 2)
    out = {"i": {"lhs": float(lhs1), "bound": float(rhs1), "ok": lhs1 <= rhs1 * (1 + 1e-10)}}
    if C is not None:
        iso = symmetric.symmetric_isometry(2, d)
        B2 = iso.T @ (np.kron(B, np.eye(d)) + np.kron(np.eye(d), B)) @ iso
        S2 = _herm_power(np.eye(B2.shape[0]) + B2, -0.5)
        rhs2 = np.linalg.norm(S2 @ C.kernel @ S2, 2)
        R2 = _herm_power(dB + np.diag(N ** 2 + 1.0), -1.0)
        lhs2 = np.linalg.norm(R2 @ wick_quantize(C, F).toarray() @ R2, 2)
        out["ii"] = {"lhs": float(lhs2), "bound": float(rhs2), "ok": lhs2 <= rhs2 * (1 + 1e-10)}
    return out


def square_symbol(A):
    """<z^{(x)2}, (A (x) A) z^{(x)2}>, the symbol of <z, A z>^2."""
    A = np.asarray(A, dtype=complex)
    return WickSymbol(2, 2, symmetric.sym_power(A, 2), A.shape[0])


# Cylindrical symbols and Weyl / anti-Wick quantization


class QuadratureWarning(UserWarning):
    """Successive Gauss-Hermite orders disagree by more than the tolerance."""


@dataclass
class CylindricalSymbol:
    """A function b(z) = g(P z) based on the span of the columns of ``base``.

    ``fourier`` maps complex base coordinates zeta (..., r) of xi = base @ zeta
    to F[b](xi); it should decay like exp(-|zeta|^2 / scale^2). ``atoms`` are
    point masses (weight, zeta) of the Fourier transform.
    """

    base: np.ndarray
    fourier: object = None
    atoms: tuple = ()
    scale: float = 1.0
    value: object = None

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=complex)
        if self.base.ndim != 2 or self.base.shape[1] > 2:
            raise ValueError("base must be a d x r matrix with r <= 2")
        if not np.allclose(self.base.conj().T @ self.base, np.eye(self.base.shape[1]), atol=1e-12):
            raise ValueError("base columns must be orthonormal")

    @property
    def rank(self):
        return self.base.shape[1]

    @classmethod
    def constant(cls, c, d):
        base = np.eye(d, 1)
        return cls(base, atoms=((c, np.zeros(1)),), value=lambda z: c + 0 * np.real(np.asarray(z)[..., 0]))

    @classmethod
    def fourier_mode(cls, xi0):
        """b(z) = exp(2 pi i Re<z, xi0>)."""
        xi0 = np.asarray(xi0, dtype=complex)
        nrm = np.linalg.norm(xi0)
        if nrm == 0:
            return cls.constant(1.0, xi0.size)
        base = (xi0 / nrm)[:, None]
        return cls(base, atoms=((1.0, np.array([nrm], dtype=complex)),),
                   value=lambda z: np.exp(2j * np.pi * np.real(np.asarray(z) @ xi0.conj())))

    @classmethod
    def gaussian(cls, base, s, amplitude=1.0):
        """b(z) = amplitude * exp(-|P z|^2 / s)."""
        base = np.asarray(base, dtype=complex)
        if base.ndim == 1:
            base = base[:, None]
        r = base.shape[1]

        def fourier(zeta):
            return amplitude * (np.pi * s) ** r * np.exp(-np.pi ** 2 * s * np.sum(np.abs(zeta) ** 2, axis=-1))

        def value(z):
            coords = np.asarray(z, dtype=complex) @ base.conj()
            return amplitude * np.exp(-np.sum(np.abs(coords) ** 2, axis=-1) / s)

        return cls(base, fourier=fourier, scale=1.0 / (np.pi * np.sqrt(s)), value=value)


def _weyl_dense(xi, F, extra=None):
    """W(xi) compressed to F through an eigendecomposition on an extended space."""
    xi = np.asarray(xi, dtype=complex)
    if not np.any(xi):
        return np.eye(F.dim, dtype=complex)
    if extra is None:
        extra = 12 + fock.weyl_margin(xi, F, factor=6.0)
    big = F.extended(extra)
    a = fock.annihilate(xi, big).toarray()
    phi = (a + a.conj().T) / math.sqrt(2)
    lam, V = np.linalg.eigh(phi)
    top = V[:F.dim]
    return (top * np.exp(1j * lam)) @ top.conj().T


def _quadrature(b, F, damping, order, extra):
    r = b.rank
    t, w = np.polynomial.hermite.hermgauss(order)
    sigma = b.scale
    total = np.zeros((F.dim, F.dim), dtype=complex)
    if b.fourier is not None:
        for idx in product(range(order), repeat=2 * r):
            x = sigma * t[list(idx)]
            zeta = x[0::2] + 1j * x[1::2]
            weight = np.prod(w[list(idx)]) * sigma ** (2 * r) * np.exp(np.sum(t[list(idx)] ** 2))
            val = b.fourier(zeta) * damping(zeta)
            if val == 0:
                continue
            total += weight * val * _weyl_dense(math.sqrt(2) * np.pi * (b.base @ zeta), F, extra)
    for amp, zeta in b.atoms:
        zeta = np.asarray(zeta, dtype=complex)
        total += amp * damping(zeta) * _weyl_dense(math.sqrt(2) * np.pi * (b.base @ zeta), F, extra)
    return total


@dataclass
class CylQuantization:
    matrix: np.ndarray
    order: int
    delta: float
    converged: bool


def _adaptive(b, F, damping, order, tol, max_order, extra):
    if b.fourier is None:
        return CylQuantization(_quadrature(b, F, damping, order, extra), order, 0.0, True)
    prev = _quadrature(b, F, damping, order, extra)
    while True:
        nxt_order = order * 2
        if nxt_order > max_order:
            warnings.warn(f"cylindrical quadrature not converged at order {order}", QuadratureWarning, stacklevel=3)
            return CylQuantization(prev, order, float("nan"), False)
        cur = _quadrature(b, F, damping, nxt_order, extra)
        delta = float(np.max(np.abs(cur - prev)))
        if delta <= tol:
            return CylQuantization(cur, nxt_order, delta, True)
        prev, order = cur, nxt_order


def weyl_quantize_cyl(b, F, order=24, tol=1e-10, max_order=96, extra=None):
    """b^Weyl = int F[b](xi) W(sqrt(2) pi xi) dL(xi) by tensor Gauss-Hermite quadrature."""
    return _adaptive(b, F, lambda zeta: 1.0, order, tol, max_order, extra)


def anti_wick(b, F, order=24, tol=1e-10, max_order=96, extra=None):
    """b^{A-Wick}: the Weyl integral damped by exp(-eps pi^2 |xi|^2 / 2)."""
    eps = F.epsilon
    return _adaptive(b, F, lambda zeta: np.exp(-eps * np.pi ** 2 * np.sum(np.abs(zeta) ** 2) / 2),
                     order, tol, max_order, extra)
