"""State families with known Wigner measures, and reduced density matrices."""

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy import integrate
from scipy.linalg import expm, schur

from . import fock, symmetric
from .measures import MeasureEnsemble
from .wick import WickSymbol, wick_quantize


def _unit(psi, name="psi"):
    psi = np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-12:
        raise ValueError(f"{name} must be normalised")
    return psi


def _sector_vector(F, n, coords):
    if n > F.n_max:
        raise ValueError(f"sector {n} exceeds the cutoff n_max={F.n_max}")
    v = np.zeros(F.dim, dtype=complex)
    v[F.sector(n)] = coords
    return v


def hermite_state(psi, n, F):
    """|psi^{(x)n}><psi^{(x)n}|, a pure state in sector n."""
    psi = _unit(psi)
    return fock.DensityOp.pure(F, _sector_vector(F, n, symmetric.tensor_power(psi, n)), normalize=False)


def coherent_vector(z0, F):
    """Truncated, renormalised sum_n z0^{(x)n} / sqrt(eps^n n!)."""
    z0 = np.asarray(z0, dtype=complex)
    eps = F.epsilon
    if eps * F.n_max < 4 * np.vdot(z0, z0).real:
        raise ValueError(f"cutoff too small for |z0|^2 = {np.vdot(z0, z0).real:.3g}: need eps n_max >= 4 |z0|^2")
    v = np.zeros(F.dim, dtype=complex)
    for n in range(F.n_max + 1):
        v[F.sector(n)] = symmetric.tensor_power(z0, n) / math.sqrt(eps ** n * math.factorial(n))
    return v / np.linalg.norm(v)


def coherent_state(z0, F):
    return fock.DensityOp.pure(F, coherent_vector(z0, F), normalize=False)


def torus_vector(psi1, n1, psi2, n2, F):
    """a*(psi1)^{n1} a*(psi2)^{n2} Omega / sqrt(eps^{n1+n2} n1! n2!)."""
    psi1, psi2 = _unit(psi1, "psi1"), _unit(psi2, "psi2")
    if abs(np.vdot(psi1, psi2)) > 1e-12:
        raise ValueError("psi1 and psi2 must be orthogonal")
    if n1 + n2 > F.n_max:
        raise ValueError("n1 + n2 exceeds the cutoff")
    v = F.vacuum()
    c1, c2 = fock.create(psi1, F), fock.create(psi2, F)
    for _ in range(n2):
        v = c2 @ v
    for _ in range(n1):
        v = c1 @ v
    return v / math.sqrt(F.epsilon ** (n1 + n2) * math.factorial(n1) * math.factorial(n2))


def torus_state(psi1, n1, psi2, n2, F):
    return fock.DensityOp.pure(F, torus_vector(psi1, n1, psi2, n2, F), normalize=False)


def gamma_unitary_blocks(U, F):
    """Per-sector matrices of Gamma(U) for a unitary U on the modes."""
    T, Z = schur(np.asarray(U, dtype=complex), output="complex")
    A = (Z * np.angle(np.diag(T))) @ Z.conj().T
    dG = fock.dgamma(0.5 * (A + A.conj().T), F) / F.epsilon
    return [expm(1j * dG[F.sector(n), F.sector(n)].toarray()) for n in range(F.n_max + 1)]


def quasifree_state(T, F, tol=1e-12):
    """Gamma(T) / Tr Gamma(T) compressed to sectors <= n_max, for 0 <= T < 1."""
    T = np.asarray(T, dtype=complex)
    if np.max(np.abs(T - T.conj().T)) > tol:
        raise ValueError("T must be Hermitian")
    lam, U = np.linalg.eigh(0.5 * (T + T.conj().T))
    if lam.min() < -tol or lam.max() >= 1:
        raise ValueError(f"spectrum of T must lie in [0, 1); got [{lam.min():.3g}, {lam.max():.3g}]")
    lam = np.clip(lam, 0.0, None)
    occ = F.occupation_table
    weights = np.prod(np.where(occ == 0, 1.0, lam[None, :] ** occ), axis=1)
    keep = weights > 0
    vectors = np.eye(F.dim, dtype=complex)
    if not np.allclose(U, np.eye(F.d)):
        blocks = gamma_unitary_blocks(U, F)
        for n, B in enumerate(blocks):
            s = F.sector(n)
            vectors[s, s] = B
    return fock.DensityOp(F, vectors[:, keep], weights[keep] / weights.sum())


def quasifree_two_point(T, f, g, eps):
    """eps <g, T (1 - T)^{-1} f> = Tr[rho a*(f) a(g)] for the untruncated state."""
    T = np.asarray(T, dtype=complex)
    return eps * np.vdot(g, T @ np.linalg.solve(np.eye(T.shape[0]) - T, f))


def quasifree_char(T, f, eps):
    """exp(-eps <f, (1 + T)(1 - T)^{-1} f> / 4) = Tr[rho W(f)] for the untruncated state."""
    T = np.asarray(T, dtype=complex)
    I = np.eye(T.shape[0])
    return np.exp(-eps * np.vdot(f, (I + T) @ np.linalg.solve(I - T, f)).real / 4)


# reduced density matrices


def rdm(rho, p):
    """p-particle reduced density matrix from Wick moments.

    gamma_{ba} = Tr[rho (|a><b|)^Wick] / Tr[rho (|z|^{2p})^Wick], expressed in
    the occupation basis of Sym^p. A vanishing denominator gives the zero
    matrix.
    """
    F = rho.space
    if p > F.n_max:
        raise ValueError("p exceeds the cutoff")
    dim = symmetric.sector_dim(p, F.d)
    denom = fock.expectation(rho, wick_quantize(WickSymbol.number(F.d, p), F)).real
    gamma = np.zeros((dim, dim), dtype=complex)
    if abs(denom) < 1e-300:
        return gamma
    for a in range(dim):
        for b in range(dim):
            E = np.zeros((dim, dim))
            E[a, b] = 1.0
            gamma[b, a] = fock.expectation(rho, wick_quantize(WickSymbol(p, p, E, F.d), F))
    return gamma / denom


def limit_rdm(mu, p):
    """int |z^{(x)p}><z^{(x)p}| dmu / int |z|^{2p} dmu."""
    u = symmetric.tensor_power(mu.points, p)
    denom = float(mu.weights @ np.sum(np.abs(u) ** 2, axis=1))
    if denom <= 0:
        raise ValueError("measure has vanishing p-th moment")
    return (u.T * mu.weights) @ u.conj() / denom


def number_moment(rho, alpha):
    """Tr[rho N^alpha]."""
    F = rho.space
    n = F.epsilon * F.particle_numbers.astype(float)
    return float(np.sum(rho.weights * ((n ** alpha) @ np.abs(rho.vectors) ** 2)))


def moment_gap(rho, mu, alpha):
    """Tr[rho N^alpha] - int |z|^{2 alpha} dmu."""
    return number_moment(rho, alpha) - mu.moment(alpha)


# families


FAMILY_KINDS = ("hermite", "coherent", "torus", "quasifree")


@dataclass
class StateFamily:
    """A state family eps -> rho_eps together with its Wigner measure mu_0."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown state family {self.kind!r}")
        p = self.params
        if self.kind in ("hermite",):
            _unit(p["psi"])
        if self.kind == "torus":
            _unit(p["psi1"], "psi1")
            _unit(p["psi2"], "psi2")
        if self.kind == "quasifree":
            lam = np.linalg.eigvalsh(np.asarray(p["T"], dtype=complex))
            if lam.min() < -1e-12 or lam.max() >= 1:
                raise ValueError("quasifree contraction must satisfy 0 <= T < 1")

    def particle_numbers(self, eps):
        if self.kind == "hermite":
            return (math.floor(self.params.get("mass", 1.0) / eps + 0.5),)
        if self.kind == "torus":
            n = math.floor(1 / (2 * eps) + 0.5)
            return (n, n)
        return ()

    def required_cutoff(self, eps):
        if self.kind == "coherent":
            z0 = np.asarray(self.params["z0"])
            return max(1, math.ceil(self.params.get("cutoff_factor", 4.0) * np.vdot(z0, z0).real / eps))
        if self.kind == "quasifree":
            return self.params.get("n_max", 24)
        return max(1, sum(self.particle_numbers(eps)))

    def build(self, F):
        p, eps = self.params, F.epsilon
        if self.kind == "hermite":
            return hermite_state(p["psi"], self.particle_numbers(eps)[0], F)
        if self.kind == "coherent":
            return coherent_state(p["z0"], F)
        if self.kind == "torus":
            n1, n2 = self.particle_numbers(eps)
            return torus_state(p["psi1"], n1, p["psi2"], n2, F)
        return quasifree_state(p["T"], F)

    def known_measure(self, n_angles=64):
        """Sampled mu_0; ``n_angles`` per circle (the torus uses it on both axes)."""
        p = self.params
        if self.kind == "hermite":
            return MeasureEnsemble.circle(p["psi"], n_angles, radius=math.sqrt(p.get("mass", 1.0)))
        if self.kind == "coherent":
            return MeasureEnsemble.dirac(p["z0"])
        if self.kind == "torus":
            r = math.sqrt(0.5)
            return MeasureEnsemble.torus(p["psi1"], r, p["psi2"], r, n_angles=n_angles)
        return MeasureEnsemble.dirac(np.zeros(np.asarray(p["T"]).shape[0]))


# Bose-Einstein condensate example


@dataclass
class BECFamily:
    """Quasi-free states with T_k = (1 - eps/nu_c) exp(-eps^{1/dim} |k|) on k in N^dim, |k| <= K."""

    nu_c: float = 1.0
    K: float = 8.0
    dim: int = 2

    @property
    def wavevectors(self):
        r = int(math.floor(self.K))
        ks = [k for k in product(range(r + 1), repeat=self.dim) if math.hypot(*k) <= self.K + 1e-12]
        return sorted(ks, key=lambda k: (sum(c * c for c in k), k))

    def eigenvalues(self, eps):
        norms = np.array([math.hypot(*k) for k in self.wavevectors])
        return (1 - eps / self.nu_c) * np.exp(-eps ** (1 / self.dim) * norms)

    def contraction(self, eps, modes=None):
        t = self.eigenvalues(eps)
        if modes is not None:
            t = t[list(modes)]
        return np.diag(t)

    def state(self, eps, modes, n_max):
        """The quasi-free state restricted to the selected modes, as a truncated DensityOp."""
        F = fock.FockSpace(len(modes), n_max, eps)
        return quasifree_state(self.contraction(eps, modes), F)

    def char(self, f, eps):
        """Tr[rho W(f)] in closed form; f is indexed like ``wavevectors``."""
        f = np.asarray(f, dtype=complex)
        t = self.eigenvalues(eps)
        return float(np.exp(-eps * np.sum(np.abs(f) ** 2 * (1 + t) / (1 - t)) / 4))

    def explicit(self, f, eps):
        """Tr[rho W(sqrt2 pi f)] written as the Gaussian factor times the thermal factor."""
        f = np.asarray(f, dtype=complex)
        t = self.eigenvalues(eps)
        a = np.abs(f) ** 2
        return float(np.exp(-eps * np.pi ** 2 * a.sum() / 2) * np.exp(-eps * np.pi ** 2 * np.sum(a * t / (1 - t))))

    def limit(self, f):
        """exp(-pi^2 nu_c |f_0|^2)."""
        return float(np.exp(-np.pi ** 2 * self.nu_c * abs(np.asarray(f)[0]) ** 2))

    def number(self, eps):
        """Tr[rho N] = sum_k eps t_k / (1 - t_k)."""
        t = self.eigenvalues(eps)
        return float(np.sum(eps * t / (1 - t)))

    def number_gap(self, eps):
        """Tr[rho N] - int |z|^2 dmu_0, where mu_0 carries nu_c on the k = 0 mode."""
        return self.number(eps) - self.nu_c


def nu_quadrature(dim=2):
    """|S^{dim-1}| int_0^inf e^{-t} / (1 - e^{-t}) t^{dim-1} dt."""
    if dim < 2:
        raise ValueError("the integral diverges for dim < 2")
    sphere = 2 * math.pi ** (dim / 2) / math.gamma(dim / 2)
    # e^{-t} / (1 - e^{-t}) written to stay finite for large t
    val, _ = integrate.quad(lambda t: t ** (dim - 1) * math.exp(-t) / -math.expm1(-t) if t > 0 else 0.0, 0, np.inf,
                            epsabs=1e-13, epsrel=1e-13, limit=200)
    return sphere * val
