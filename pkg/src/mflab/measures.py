"""Weighted point ensembles standing in for Wigner measures.

Measures are compared through characteristic functions: the classical one
int exp(i sqrt2 Re<xi, z>) dmu(z) and the quantum Tr[rho W(xi)], which
converges to it as eps -> 0.
"""

import csv
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from . import fock

MAX_EXACT_SUPPORT = 256


@dataclass(eq=False)
class MeasureEnsemble:
    """Probability measure sum_k w_k delta_{z_k} on C^d."""

    points: np.ndarray
    weights: np.ndarray
    seed: int = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=complex))
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.points.shape[0] != self.weights.size:
            raise ValueError("points and weights have different lengths")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {self.weights.sum():.15f}, not 1")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("ensemble points must be finite")

    @property
    def d(self):
        return self.points.shape[1]

    def __len__(self):
        return self.weights.size

    @classmethod
    def uniform(cls, points, seed=None):
        points = np.atleast_2d(np.asarray(points, dtype=complex))
        return cls(points, np.full(points.shape[0], 1.0 / points.shape[0]), seed)

    @classmethod
    def dirac(cls, z0):
        return cls(np.asarray(z0, dtype=complex)[None, :], [1.0])

    @classmethod
    def circle(cls, psi, n_angles=64, radius=1.0):
        """Uniform angles on {radius e^{i theta} psi}: the circle average of delta_psi."""
        theta = 2 * np.pi * np.arange(n_angles) / n_angles
        psi = np.asarray(psi, dtype=complex)
        return cls.uniform(radius * np.exp(1j * theta)[:, None] * psi[None, :])

    @classmethod
    def torus(cls, psi1, r1, psi2, r2, n_angles=24):
        """Product of two circle averages, r1 e^{i a} psi1 + r2 e^{i b} psi2."""
        theta = 2 * np.pi * np.arange(n_angles) / n_angles
        a, b = np.meshgrid(theta, theta, indexing="ij")
        pts = (r1 * np.exp(1j * a.reshape(-1))[:, None] * np.asarray(psi1)[None, :]
               + r2 * np.exp(1j * b.reshape(-1))[:, None] * np.asarray(psi2)[None, :])
        return cls.uniform(pts)

    @classmethod
    def random(cls, n, d, seed, scale=1.0):
        rng = np.random.default_rng(seed)
        pts = scale * (rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))) / np.sqrt(2)
        return cls.uniform(pts, seed=seed)

    def moment(self, power=1):
        """int |z|^{2 power} dmu."""
        return float(self.weights @ np.sum(np.abs(self.points) ** 2, axis=1) ** power)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["weight"] + [f"{p}{i}" for i in range(self.d) for p in ("re", "im")])
            for wt, z in zip(self.weights, self.points):
                row = [repr(float(wt))]
                for c in z:
                    row += [repr(float(c.real)), repr(float(c.imag))]
                w.writerow(row)

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        data = np.array([[float(x) for x in r] for r in rows])
        pts = data[:, 1::2] + 1j * data[:, 2::2]
        return cls(pts, data[:, 0])


@dataclass
class ObservablePanel:
    xis: np.ndarray
    times: tuple = (0.0,)
    bound: float = 2.0

    def __post_init__(self):
        self.xis = np.atleast_2d(np.asarray(self.xis, dtype=complex))
        if self.xis.shape[0] == 0 or len(self.times) == 0:
            raise ValueError("observable panel must be nonempty")
        if np.max(np.linalg.norm(self.xis, axis=1)) > self.bound:
            raise ValueError(f"panel vector exceeds |xi| <= {self.bound}")


def _re_inner(xi, z):
    """Re <xi, z> with the inner product antilinear in the first slot."""
    return np.real(np.asarray(z, dtype=complex) @ np.conj(np.asarray(xi, dtype=complex)))


def classical_char(mu, xi):
    """int exp(i sqrt2 Re<xi, z>) dmu(z)."""
    return complex(mu.weights @ np.exp(1j * np.sqrt(2) * _re_inner(xi, mu.points)))


def quantum_char(rho, xi, extra=None, return_leakage=False):
    """Tr[rho W(xi)] against the truncated Weyl operator.

    With ``return_leakage`` the mixture-weighted norm escaping the cutoff is
    returned as well.
    """
    F = rho.space
    Wv, lost = fock.weyl_apply(xi, F, rho.vectors, extra=extra)
    val = complex(np.sum(rho.weights * np.sum(rho.vectors.conj() * Wv, axis=0)))
    if return_leakage:
        lost_w = float(rho.weights @ (np.sum(np.abs(rho.vectors) ** 2, axis=0) - np.sum(np.abs(Wv) ** 2, axis=0)))
        return val, max(lost_w, 0.0)
    return val


def quantum_char_fourier(rho, xi, **kw):
    """Tr[rho W(sqrt2 pi xi)], whose limit is the inverse Fourier transform of mu."""
    return quantum_char(rho, np.sqrt(2) * np.pi * np.asarray(xi), **kw)


def pushforward(mu, evaluator, t):
    """Transport every support point by the flow; weights are unchanged."""
    if t == 0:
        return MeasureEnsemble(mu.points.copy(), mu.weights.copy(), mu.seed)
    return MeasureEnsemble(evaluator(mu.points, t), mu.weights.copy(), mu.seed)


def _cost_matrix(p1, p2, weight):
    diff = p1[:, None, :] - p2[None, :, :]
    if weight is None:
        return np.sum(np.abs(diff) ** 2, axis=-1)
    return np.einsum("abi,ij,abj->ab", diff.conj(), weight, diff).real


def wasserstein2(mu1, mu2, weight=None):
    """Exact W2 for finite ensembles with cost |z1 - z2|^2 in the metric ``weight``.

    ``weight`` is the Hermitian form of the norm (the Sobolev weight for the
    Z1 distance); None uses the plain Euclidean norm. Uniform ensembles of
    equal size reduce to an assignment problem, otherwise a transport linear
    program is solved.
    """
    n1, n2 = len(mu1), len(mu2)
    if max(n1, n2) > MAX_EXACT_SUPPORT:
        raise ValueError(f"exact transport limited to {MAX_EXACT_SUPPORT} support points; subsample the ensembles")
    if abs(mu1.weights.sum() - mu2.weights.sum()) > 1e-12:
        raise ValueError("ensembles carry different total weight")
    C = _cost_matrix(mu1.points, mu2.points, weight)
    uniform = (n1 == n2 and np.ptp(mu1.weights) < 1e-15 and np.ptp(mu2.weights) < 1e-15)
    if uniform:
        r, c = linear_sum_assignment(C)
        cost = C[r, c].sum() / n1
    else:
        A_eq = np.zeros((n1 + n2, n1 * n2))
        for i in range(n1):
            A_eq[i, i * n2:(i + 1) * n2] = 1.0
        for j in range(n2):
            A_eq[n1 + j, j::n2] = 1.0
        b_eq = np.concatenate([mu1.weights, mu2.weights])
        res = linprog(C.reshape(-1), A_eq=A_eq[:-1], b_eq=b_eq[:-1], bounds=(0, None), method="highs")
        if res.status != 0:
            raise RuntimeError(f"transport LP failed: {res.message}")
        cost = res.fun
    return float(np.sqrt(max(cost, 0.0)))


def wasserstein2_bruteforce(mu1, mu2, weight=None):
    """Minimum over all matchings of two uniform ensembles of equal size."""
    n = len(mu1)
    C = _cost_matrix(mu1.points, mu2.points, weight)
    best = min(sum(C[i, s[i]] for i in range(n)) for s in itertools.permutations(range(n)))
    return float(np.sqrt(best / n))


@dataclass
class FourierTest:
    """f(z) = exp(i sqrt2 Re<xi, z>) with its Wirtinger gradients."""

    xi: np.ndarray

    def __call__(self, z):
        return np.exp(1j * np.sqrt(2) * _re_inner(self.xi, z))

    def grad_z(self, z):
        return self(z)[..., None] * (1j * np.sqrt(2) / 2) * np.conj(self.xi)

    def grad_zbar(self, z):
        return self(z)[..., None] * (1j * np.sqrt(2) / 2) * np.asarray(self.xi)


def poisson_bracket(grad_z_h, grad_zbar_h, grad_z_f, grad_zbar_f):
    """{h, f} = d_z h . d_zbar f - d_z f . d_zbar h."""
    return np.sum(grad_z_h * grad_zbar_f - grad_z_f * grad_zbar_h, axis=-1)


def liouville_residual(times, trajectory, weights, f, vector_field):
    """max_t |d/dt int f dmu_t - i int {h, f} dmu_t| at interior sample times.

    ``trajectory`` has shape (T, N, d); ``vector_field(z)`` returns
    d_zbar h(z) for a real h, so d_z h is its conjugate. The time derivative
    is a centered difference on the sample grid.
    """
    times = np.asarray(times, dtype=float)
    trajectory = np.asarray(trajectory, dtype=complex)
    w = np.asarray(weights, dtype=float)
    integrals = np.array([w @ f(z) for z in trajectory])
    out = []
    for k in range(1, len(times) - 1):
        deriv = (integrals[k + 1] - integrals[k - 1]) / (times[k + 1] - times[k - 1])
        z = trajectory[k]
        gzb = vector_field(z)
        bracket = poisson_bracket(np.conj(gzb), gzb, f.grad_z(z), f.grad_zbar(z))
        out.append(abs(deriv - 1j * (w @ bracket)))
    return float(max(out))


def panel_rows(t, panel, quantum, classical):
    """CSV-ready rows (t, xi-index, re, im, source)."""
    rows = []
    for i, (q, c) in enumerate(zip(quantum, classical)):
        rows.append([t, i, q.real, q.imag, "quantum"])
        rows.append([t, i, c.real, c.imag, "classical"])
    return rows
