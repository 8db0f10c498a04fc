"""Dense real linear algebra used by the harmonic analysis and the simulator.

Rank decisions everywhere go through :func:`numerical_rank`, whose relative
tolerance defaults to 1e-10 and can be overridden with the ``HCN_RANK_EPS``
environment variable.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError, PreconditionError, UnstableSystemError

__all__ = [
    "SubspaceBasis",
    "Spectrum",
    "rank_eps",
    "numerical_rank",
    "krylov_span",
    "spectrum",
    "solve_lyapunov",
    "lyapunov_residual",
    "lyapunov_factor",
    "lyapunov_rank",
    "propagate_covariance",
    "matrix_exp",
    "psd_sqrt",
]

DEFAULT_RANK_EPS = 1e-10
STABILITY_MARGIN = 1e-9


def rank_eps() -> float:
    raw = os.environ.get("HCN_RANK_EPS")
    if raw is None:
        return DEFAULT_RANK_EPS
    try:
        eps = float(raw)
    except ValueError:
        raise PreconditionError(f"HCN_RANK_EPS={raw!r} is not a number") from None
    if not eps > 0:
        raise PreconditionError("HCN_RANK_EPS must be positive")
    return eps


def numerical_rank(A, eps: float | None = None) -> int:
    """Number of singular values above ``eps * max(shape) * sigma_max``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    eps = rank_eps() if eps is None else eps
    return int(np.sum(s > eps * max(A.shape) * s[0]))


def _check_square(M, name="M"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise PreconditionError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise PreconditionError(f"{name} has non-finite entries")
    return M


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Orthonormal basis (as columns of ``vectors``) of a subspace of R^n."""

    n: int
    vectors: np.ndarray
    tol: float

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def projector(self) -> np.ndarray:
        return self.vectors @ self.vectors.T


def krylov_span(M, seeds, tol: float | None = None) -> SubspaceBasis:
    """Smallest M-invariant subspace containing the seed vectors.

    Block Arnoldi with two passes of Gram-Schmidt: each accepted direction is
    multiplied by M and orthogonalised against the basis so far. A candidate
    is discarded when its residual is below ``tol * (largest seed norm)``.
    The default ``tol`` is ``rank_eps() * n * max(1, ||M||_2)``.
    """
    M = _check_square(M)
    n = M.shape[0]
    seeds = [np.asarray(s, dtype=float).ravel() for s in seeds]
    for s in seeds:
        if s.shape != (n,):
            raise PreconditionError(f"seed of length {s.size} does not match dimension {n}")
    if not seeds:
        return SubspaceBasis(n, np.zeros((n, 0)), 0.0 if tol is None else tol)
    if tol is None:
        tol = rank_eps() * n * max(1.0, np.linalg.norm(M, 2))
    scale = max(np.linalg.norm(s) for s in seeds)
    if scale == 0.0:
        raise PreconditionError("all seeds are zero")
    thresh = tol

    basis = np.zeros((n, 0))

    def absorb(candidates):
        nonlocal basis
        fresh = []
        for v in candidates:
            w = v.copy()
            for _ in range(2):
                w -= basis @ (basis.T @ w)
            r = np.linalg.norm(w)
            if r > thresh and basis.shape[1] < n:
                basis = np.column_stack([basis, w / r])
                fresh.append(basis[:, -1])
        return fresh

    # dividing by the largest seed norm turns "residual < tol * scale" into "< tol"
    frontier = absorb([s / scale for s in seeds])
    while frontier and basis.shape[1] < n:
        frontier = absorb([M @ v for v in frontier])
    return SubspaceBasis(n, basis, tol)


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray

    @property
    def abscissa(self) -> float:
        return float(np.max(self.eigenvalues.real))


def spectrum(M) -> Spectrum:
    M = _check_square(M)
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration did not converge: {exc}") from None
    return Spectrum(ev)


def lyapunov_residual(M, Q, C) -> float:
    """Frobenius norm of ``M Q + Q M^T + C``."""
    return float(np.linalg.norm(M @ Q + Q @ M.T + C))


def solve_lyapunov(M, C, method: str = "auto") -> np.ndarray:
    """Solve ``M Q + Q M^T = -C`` for stable M and symmetric PSD C.

    ``method="kron"`` solves the n^2 vectorised system; ``"schur"`` uses a
    Bartels-Stewart solver. ``"auto"`` picks the Kronecker path up to n = 40.
    """
    M = _check_square(M)
    C = _check_square(C, "C")
    n = M.shape[0]
    if C.shape != M.shape:
        raise PreconditionError("M and C must have the same shape")
    if not np.allclose(C, C.T, atol=1e-12 * max(1.0, np.abs(C).max())):
        raise PreconditionError("C must be symmetric")
    absc = spectrum(M).abscissa
    if absc >= -STABILITY_MARGIN:
        raise UnstableSystemError(
            f"drift is not stable (spectral abscissa {absc:.3e}); the stationary covariance integral diverges"
        )
    if method == "auto":
        method = "kron" if n <= 40 else "schur"
    if method == "kron":
        eye = np.eye(n)
        # column-major vec: vec(MQ + QM^T) = (I kron M + M kron I) vec(Q)
        A = np.kron(eye, M) + np.kron(M, eye)
        try:
            lu = scipy.linalg.lu_factor(A, check_finite=False)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise NumericalError(f"singular Lyapunov system: {exc}") from None
        if np.any(np.abs(np.diag(lu[0])) == 0.0):
            raise NumericalError("singular Lyapunov system (eigenvalues on the imaginary axis)")
        q = scipy.linalg.lu_solve(lu, -C.reshape(-1, order="F"))
        Q = q.reshape((n, n), order="F")
    elif method == "schur":
        Q = scipy.linalg.solve_continuous_lyapunov(M, -C)
    else:
        raise PreconditionError(f"unknown method {method!r}")
    return 0.5 * (Q + Q.T)


def lyapunov_factor(M, B, max_doublings: int = 64) -> np.ndarray:
    """Square-root factor Z (n x n) with ``Z Z^T`` solving ``M Q + Q M^T = -B B^T``.

    The continuous equation is mapped by a Cayley transform with shift mu to
    the Stein equation ``Q = A Q A^T + Bd Bd^T`` and summed by squared Smith
    doubling, compressing the factor with an SVD after every step. Working
    on the factor resolves singular values of Q down to ~1e-30 relative,
    which the rank of Q itself cannot.
    """
    M = _check_square(M)
    B = np.asarray(B, dtype=float)
    n = M.shape[0]
    if B.ndim != 2 or B.shape[0] != n:
        raise PreconditionError("B must have as many rows as M")
    ev = spectrum(M).eigenvalues
    if ev.real.max() >= -STABILITY_MARGIN:
        raise UnstableSystemError(f"drift is not stable (spectral abscissa {ev.real.max():.3e})")
    mods = np.abs(ev)
    mu = float(np.sqrt(mods.min() * mods.max()))
    shifted = M - mu * np.eye(n)
    A = np.linalg.solve(shifted, M + mu * np.eye(n))
    Z = np.sqrt(2 * mu) * np.linalg.solve(shifted, B)

    def compress(F):
        U, s, _ = np.linalg.svd(F, full_matrices=False)
        return U[:, :n] * s[:n]

    Z = compress(Z) if Z.shape[1] > n else Z
    for _ in range(max_doublings):
        AZ = A @ Z
        zn = np.linalg.norm(Z)
        if zn == 0.0 or np.linalg.norm(AZ) <= 1e-17 * zn:
            return Z
        Z = compress(np.hstack([Z, AZ]))
        A = A @ A
    raise NumericalError("Smith iteration for the Lyapunov factor did not converge")


def lyapunov_rank(M, B, eps: float | None = None) -> int:
    """Rank of the Lyapunov solution for ``C = B B^T``, decided on its square-root factor."""
    return numerical_rank(lyapunov_factor(M, B), eps)


def _pade13(A):
    b = (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    )
    n = A.shape[0]
    ident = np.eye(n)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    return np.linalg.solve(V - U, V + U)


_THETA13 = 5.371920351148152


def matrix_exp(M, t: float = 1.0) -> np.ndarray:
    """``exp(M t)`` by scaling and squaring around a degree-13 Pade approximant."""
    A = _check_square(M) * float(t)
    if not np.all(np.isfinite(A)):
        raise NumericalError("M t has non-finite entries")
    norm = np.linalg.norm(A, 1)
    if norm == 0.0:
        return np.eye(A.shape[0])
    s = max(0, int(math.ceil(math.log2(norm / _THETA13)))) if norm > _THETA13 else 0
    if s > 1000:
        raise NumericalError(f"||M t||_1 = {norm:.3e} is too large to exponentiate")
    E = _pade13(A / 2.0**s)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            E = E @ E
    if not np.all(np.isfinite(E)):
        raise NumericalError(f"matrix exponential overflowed (||M t||_1 = {norm:.3e})")
    return E


def _cov_rhs(M, C, K):
    return C + M @ K + K @ M.T


def propagate_covariance(M, sigma, K0, t: float, dt: float = 1e-2, method: str = "rk4") -> np.ndarray:
    """Covariance of the linear SDE ``dZ = M Z dt + sigma dB`` at time ``t``.

    ``method="rk4"`` integrates ``K' = sigma sigma^T + M K + K M^T`` with the
    classical fourth-order scheme (last step shortened to land on ``t``);
    ``method="exact"`` uses the block-exponential formula
    ``e^{Mt} K0 e^{M^T t} + int_0^t e^{Ms} C e^{M^T s} ds``.
    """
    M = _check_square(M)
    sigma = np.asarray(sigma, dtype=float)
    K = _check_square(K0, "K0").copy()
    n = M.shape[0]
    if sigma.shape[0] != n or K.shape != M.shape:
        raise PreconditionError("dimension mismatch between M, sigma and K0")
    if t < 0:
        raise PreconditionError("t must be non-negative")
    C = sigma @ sigma.T
    if method == "exact":
        E, G = _van_loan(M, C, t)
        K = E @ K @ E.T + G
    elif method == "rk4":
        if not dt > 0:
            raise PreconditionError("dt must be positive")
        steps = int(math.floor(t / dt + 1e-12))
        h_list = [dt] * steps
        rem = t - steps * dt
        if rem > 1e-14 * max(1.0, t):
            h_list.append(rem)
        for h in h_list:
            k1 = _cov_rhs(M, C, K)
            k2 = _cov_rhs(M, C, K + 0.5 * h * k1)
            k3 = _cov_rhs(M, C, K + 0.5 * h * k2)
            k4 = _cov_rhs(M, C, K + h * k3)
            K = K + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    else:
        raise PreconditionError(f"unknown method {method!r}")
    return 0.5 * (K + K.T)


def _van_loan(M, C, t):
    """Return ``(e^{Mt}, int_0^t e^{Ms} C e^{M^T s} ds)`` from one block exponential."""
    n = M.shape[0]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = -M
    block[:n, n:] = C
    block[n:, n:] = M.T
    F = matrix_exp(block, t)
    E = F[n:, n:].T
    G = E @ F[:n, n:]
    return E, 0.5 * (G + G.T)


def psd_sqrt(K) -> np.ndarray:
    """Symmetric square root of a PSD matrix (tiny negative eigenvalues clipped)."""
    w, V = np.linalg.eigh(0.5 * (K + K.T))
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T
