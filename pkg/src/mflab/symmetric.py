"""Occupation-number bases of symmetric tensor powers of C^d.

The n-th symmetric power is spanned by the orthonormal vectors |m>, one per
occupation tuple m = (m_1, ..., m_d) with sum(m) = n. Within a sector the
tuples are ordered reverse-lexicographically, so |n, 0, ..., 0> comes first.

All normalisation constants are built from exact integer arithmetic and only
converted to floats at the end.
"""

from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import comb, factorial, sqrt, prod

import numpy as np


def sector_dim(n, d):
    """Dimension C(n+d-1, d-1) of the n-th symmetric power of C^d."""
    if n < 0:
        return 0
    return comb(n + d - 1, d - 1)


def _compositions(n, d):
    if d == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, d - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def occupations(n, d):
    """Ordered tuple of occupation tuples of total n over d modes."""
    return tuple(_compositions(n, d))


@lru_cache(maxsize=None)
def index_map(n, d):
    return {m: i for i, m in enumerate(occupations(n, d))}


@lru_cache(maxsize=None)
def occupation_array(n, d):
    arr = np.array(occupations(n, d), dtype=np.int64).reshape(-1, d)
    arr.setflags(write=False)
    return arr


def mfact(m):
    """Multi-index factorial m! = prod m_i!."""
    return prod(factorial(k) for k in m)


@lru_cache(maxsize=None)
def power_constants(n, d):
    """sqrt(n!/m!) for every tuple m of sector n."""
    out = np.array([sqrt(Fraction(factorial(n), mfact(m))) for m in occupations(n, d)])
    out.setflags(write=False)
    return out


def tensor_power(z, n):
    """Coordinates of z^{(x) n} in the occupation basis.

    Works on batches: ``z`` has shape (..., d) and the result (..., dim).
    """
    z = np.asarray(z, dtype=complex)
    d = z.shape[-1]
    exps = occupation_array(n, d)
    monos = np.prod(z[..., None, :] ** exps, axis=-1)
    return power_constants(n, d) * monos


def tensor_power_jacobian(z, n):
    """Derivatives d u_m / d z_i of ``tensor_power``; shape (..., dim, d)."""
    z = np.asarray(z, dtype=complex)
    d = z.shape[-1]
    exps = occupation_array(n, d)
    consts = power_constants(n, d)
    out = np.zeros(z.shape[:-1] + (len(exps), d), dtype=complex)
    for i in range(d):
        lowered = exps.copy()
        lowered[:, i] -= 1
        has = lowered[:, i] >= 0
        safe = np.where(lowered < 0, 0, lowered)
        monos = np.prod(z[..., None, :] ** safe, axis=-1)
        out[..., :, i] = np.where(has, consts * exps[:, i] * monos, 0.0)
    return out


@lru_cache(maxsize=None)
def split_coefficient(m, mu, nu):
    """Overlap <|mu> (x) |nu>, |m>> for m = mu + nu.

    Equals sqrt(m! p! (n-p)! / (n! mu! nu!)) with p = |mu|, n = |m|.
    """
    n, p = sum(m), sum(mu)
    num = mfact(m) * factorial(p) * factorial(n - p)
    den = factorial(n) * mfact(mu) * mfact(nu)
    return sqrt(Fraction(num, den))


@lru_cache(maxsize=None)
def splits(n, p, d):
    """For each nu in sector n-p: the indices mu+nu in sector n and their split coefficients.

    Returns a list indexed by nu of (indices into sector n, coefficients), each
    ordered like ``occupations(p, d)``.
    """
    target = index_map(n, d)
    out = []
    for nu in occupations(n - p, d):
        idx, coef = [], []
        for mu in occupations(p, d):
            m = tuple(a + b for a, b in zip(mu, nu))
            idx.append(target[m])
            coef.append(split_coefficient(m, mu, nu))
        out.append((np.array(idx, dtype=np.int64), np.array(coef)))
    return out


@lru_cache(maxsize=None)
def symmetric_isometry(n, d):
    """Matrix (d**n, dim) embedding the occupation basis into (C^d)^{(x) n}.

    Columns are the normalised symmetric tensors |m>, rows are row-major
    multi-indices (i_1, ..., i_n).
    """
    dim = sector_dim(n, d)
    iso = np.zeros((d ** n, dim))
    imap = index_map(n, d)
    for flat, word in enumerate(product(range(d), repeat=n)):
        m = tuple(word.count(i) for i in range(d))
        iso[flat, imap[m]] = sqrt(Fraction(mfact(m), factorial(n)))
    iso.setflags(write=False)
    return iso


def sym_power_diag(u, n):
    """Diagonal of Gamma_n(diag(u)) on the occupation basis: prod u_i^{m_i}."""
    u = np.asarray(u)
    return np.prod(u[None, :] ** occupation_array(n, len(u)), axis=-1)


def sym_power(U, n):
    """Matrix of U^{(x) n} restricted to the n-th symmetric power."""
    U = np.asarray(U, dtype=complex)
    d = U.shape[0]
    if n == 0:
        return np.ones((1, 1), dtype=complex)
    iso = symmetric_isometry(n, d)
    full = U
    for _ in range(n - 1):
        full = np.kron(full, U)
    return iso.T @ full @ iso
