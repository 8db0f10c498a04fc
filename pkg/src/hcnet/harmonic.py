"""Decision procedures for networks with quadratic pinning and interaction.

In the harmonic case the dynamics is the linear SDE ``dZ = M Z dt + sigma dB``
with ``M = [[0, I], [-Gamma, -I_D]]``. Uniqueness of the invariant measure,
its support, and an explicit conserved quantity when uniqueness fails are all
read off from M, Gamma and the damped/boundary sets.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .matkernel import (
    STABILITY_MARGIN,
    krylov_span,
    lyapunov_rank,
    lyapunov_residual,
    solve_lyapunov,
    spectrum,
)
from .network import NetworkSpec, graph_matrices

__all__ = [
    "LinearSystem",
    "InvariantQuadratic",
    "AnalysisReport",
    "linear_system",
    "momentum_seeds",
    "analyze",
    "invariant_quadratics",
    "stationary_covariance",
    "tilted_covariance",
    "contraction_rate",
    "tilt_residual",
]

EIG_CLUSTER_TOL = 1e-8
QUADRATIC_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class LinearSystem:
    M: np.ndarray
    sigma: np.ndarray

    @property
    def noise_covariance(self) -> np.ndarray:
        return self.sigma @ self.sigma.T


@dataclass(frozen=True, eq=False)
class InvariantQuadratic:
    """``K(q, p) = alpha <z, q>^2 + <z, p>^2`` with ``Gamma z = alpha z`` and z = 0 on the damped set."""

    alpha: float
    z: np.ndarray

    def __call__(self, q, p):
        q = np.asarray(q)
        p = np.asarray(p)
        return self.alpha * (q @ self.z) ** 2 + (p @ self.z) ** 2

    def gradient(self, q, p):
        zq = float(np.asarray(q) @ self.z)
        zp = float(np.asarray(p) @ self.z)
        return 2 * self.alpha * zq * self.z, 2 * zp * self.z

    def to_dict(self) -> dict:
        return {"alpha": float(self.alpha), "z": [float(x) for x in self.z]}


@dataclass(eq=False)
class AnalysisReport:
    dim_damped: int
    dim_boundary: int
    asymmetric: bool
    abscissa: float
    invariants: list = field(default_factory=list)
    rank_q: int | None = None
    Q: np.ndarray | None = None

    @property
    def momentum_variances(self):
        """Stationary ``Var(p_i)``; lets users look for motionless particles."""
        if self.Q is None:
            return None
        n = self.Q.shape[0] // 2
        return np.diag(self.Q)[n:].copy()

    def to_dict(self) -> dict:
        mv = self.momentum_variances
        return {
            "dim_damped": self.dim_damped,
            "dim_boundary": self.dim_boundary,
            "asymmetric": self.asymmetric,
            "abscissa": self.abscissa,
            "rank_q": self.rank_q,
            "invariant_quadratics": [k.to_dict() for k in self.invariants],
            "momentum_variances": None if mv is None else [float(x) for x in mv],
        }


def _require_harmonic(spec: NetworkSpec):
    if not spec.is_harmonic:
        raise PreconditionError("operation requires harmonic potentials U = V = q^2/2")


def linear_system(spec: NetworkSpec) -> LinearSystem:
    """Drift M and noise matrix sigma = blockdiag(0, diag(sqrt(2 T_i) on the boundary))."""
    _require_harmonic(spec)
    N = spec.n
    gamma = graph_matrices(spec).gamma
    M = np.zeros((2 * N, 2 * N))
    M[:N, N:] = np.eye(N)
    M[N:, :N] = -gamma
    M[N:, N:] = -np.diag(spec.damped_mask().astype(float))
    sigma = np.zeros((2 * N, 2 * N))
    temps = spec.temperature_vector()
    for v in spec.boundary:
        sigma[N + v, N + v] = np.sqrt(2.0 * temps[v])
    return LinearSystem(M, sigma)


def momentum_seeds(N: int, vertices) -> list:
    seeds = []
    for v in sorted(vertices):
        e = np.zeros(2 * N)
        e[N + v] = 1.0
        seeds.append(e)
    return seeds


def invariant_quadratics(spec: NetworkSpec) -> list:
    """Conserved quadratics certifying non-uniqueness.

    For every eigenvalue cluster of Gamma, the part of the eigenspace that
    vanishes on the damped set is found as a null space; each orthonormal
    null vector gives one :class:`InvariantQuadratic`.
    """
    _require_harmonic(spec)
    gamma = graph_matrices(spec).gamma
    w, V = np.linalg.eigh(gamma)
    tol = EIG_CLUSTER_TOL * np.linalg.norm(gamma, 2)
    damped = sorted(spec.damped)
    out = []
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[stop] - w[stop - 1] <= tol:
            stop += 1
        basis = V[:, start:stop]
        alpha = float(np.mean(w[start:stop]))
        rows = basis[damped, :]
        _, s, vt = np.linalg.svd(rows, full_matrices=True)
        rank = int(np.sum(s > QUADRATIC_TOL))
        for c in vt[rank:]:
            z = basis @ c
            z /= np.linalg.norm(z)
            z[damped] = 0.0
            z /= np.linalg.norm(z)
            # fix the sign so the first significant entry is positive
            k = int(np.argmax(np.abs(z) > 1e-8))
            if z[k] < 0:
                z = -z
            out.append(InvariantQuadratic(alpha, z + 0.0))  # no negative zeros
        start = stop
    return out


def analyze(spec: NetworkSpec) -> AnalysisReport:
    """Controllability dimensions, stability, invariants and stationary covariance rank."""
    ls = linear_system(spec)
    N = spec.n
    dim_d = krylov_span(ls.M, momentum_seeds(N, spec.damped)).dim
    heated = spec.heated
    dim_b = krylov_span(ls.M, momentum_seeds(N, heated)).dim if heated else 0
    absc = spectrum(ls.M).abscissa
    report = AnalysisReport(
        dim_damped=dim_d,
        dim_boundary=dim_b,
        asymmetric=dim_d == 2 * N,
        abscissa=absc,
        invariants=invariant_quadratics(spec),
    )
    if report.asymmetric and absc < -STABILITY_MARGIN:
        Q = solve_lyapunov(ls.M, ls.noise_covariance)
        report.Q = Q
        # decided on the square-root factor: tiny genuine eigenvalues of Q survive there
        report.rank_q = lyapunov_rank(ls.M, ls.sigma)
    return report


def stationary_covariance(spec: NetworkSpec) -> np.ndarray:
    """Covariance of the unique invariant Gaussian measure (asymmetric networks only)."""
    ls = linear_system(spec)
    return solve_lyapunov(ls.M, ls.noise_covariance)


def tilted_covariance(spec: NetworkSpec, quad: InvariantQuadratic, gamma: float) -> np.ndarray:
    """Covariance of the Gibbs measure tilted by ``exp(-gamma K)``.

    Needs every damped particle heated at temperature 1 so the untilted Gibbs
    measure is invariant. Each ``gamma >= 0`` gives another stationary
    covariance, so the invariant measure is not unique.
    """
    _require_harmonic(spec)
    if spec.damped != spec.boundary:
        raise PreconditionError("tilted family needs every damped particle to be heated (D = boundary)")
    if any(abs(t - 1.0) > 1e-12 for t in spec.temperatures.values()):
        raise PreconditionError("tilted family needs all temperatures equal to 1")
    if gamma < 0:
        raise PreconditionError("gamma must be non-negative")
    g = graph_matrices(spec).gamma
    z = np.asarray(quad.z, dtype=float)
    if np.linalg.norm(g @ z - quad.alpha * z) > QUADRATIC_TOL * max(1.0, abs(quad.alpha)):
        raise PreconditionError("z is not an eigenvector of Gamma with eigenvalue alpha")
    if np.abs(z[sorted(spec.damped)]).max() > QUADRATIC_TOL:
        raise PreconditionError("z does not vanish on the damped set")
    N = spec.n
    zz = np.outer(z, z)
    precision = np.zeros((2 * N, 2 * N))
    precision[:N, :N] = g + 2 * gamma * quad.alpha * zz
    precision[N:, N:] = np.eye(N) + 2 * gamma * zz
    Q = np.linalg.inv(precision)
    return 0.5 * (Q + Q.T)


def tilt_residual(spec: NetworkSpec, Q: np.ndarray) -> float:
    ls = linear_system(spec)
    return lyapunov_residual(ls.M, Q, ls.noise_covariance)


def contraction_rate(spec: NetworkSpec) -> float:
    """Exponential decay rate ``-abscissa(M)`` of the noise-free flow (and of its linearisation)."""
    return -spectrum(linear_system(spec).M).abscissa
