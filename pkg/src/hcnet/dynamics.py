"""Hamiltonian dynamics of a network: energy, deterministic flows, SDE paths.

States are flat arrays ``z = (q_1..q_N, p_1..p_N)``; most internals also accept
a leading batch axis so several trajectories can be stepped together.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, PreconditionError
from .matkernel import matrix_exp, propagate_covariance, psd_sqrt
from .network import NetworkSpec, Polynomial

__all__ = [
    "PhaseState",
    "Trajectory",
    "SimConfig",
    "EnergyLedger",
    "SimResult",
    "EnergyBalance",
    "LimitSystem",
    "LasalleReport",
    "RigidityReport",
    "hamiltonian",
    "grad_hamiltonian",
    "find_equilibrium",
    "flow_damped",
    "lasalle_check",
    "path_rng",
    "simulate",
    "simulate_ensemble",
    "energy_balance",
    "limit_system",
    "rigidity_check",
    "write_trajectory_csv",
]

DIVERGENCE_THRESHOLD = 1e8


@dataclass(frozen=True, eq=False)
class PhaseState:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).ravel()
        p = np.asarray(self.p, dtype=float).ravel()
        if q.shape != p.shape:
            raise PreconditionError("q and p must have the same length")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise PreconditionError("phase state has non-finite entries")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, z) -> "PhaseState":
        z = np.asarray(z, dtype=float).ravel()
        if z.size % 2:
            raise PreconditionError("phase vector must have even length")
        n = z.size // 2
        return cls(z[:n], z[n:])


def _as_z(spec_n, state):
    z = state.z if isinstance(state, PhaseState) else np.asarray(state, dtype=float)
    if z.shape[-1] != 2 * spec_n:
        raise PreconditionError(f"state has length {z.shape[-1]}, expected {2 * spec_n}")
    return z


class _Potential:
    """Vectorised potential energy ``sum V(q_i) + sum_edges (U(d) + U(-d)) / 2`` and its gradient."""

    def __init__(self, n, edges, pinning: Polynomial, interaction: Polynomial, pinning_on=True):
        self.n = n
        self.pinning = pinning if pinning_on else None
        self.interaction = interaction
        self.I = np.array([i for i, _ in edges], dtype=int)
        self.J = np.array([j for _, j in edges], dtype=int)
        B = np.zeros((len(edges), n))
        B[np.arange(len(edges)), self.I] = 1.0
        B[np.arange(len(edges)), self.J] = -1.0
        self.incidence = B
        c = np.array(interaction.coeffs)
        # U(d) + U(-d) keeps only even powers
        sym = c.copy()
        sym[1::2] = 0.0
        self._u_sym = sym  # (U(d) + U(-d)) / 2
        self._du_sym = np.polynomial.polynomial.polyder(sym)
        self._d2u_sym = np.polynomial.polynomial.polyder(sym, 2)
        self._linear = None
        if pinning_on and pinning.degree == 2 and interaction.degree == 2:
            lap = B.T @ B
            self._linear = 2 * pinning.coeffs[2] * np.eye(n) + 2 * sym[2] * lap
            self._linear_shift = np.full(n, pinning.coeffs[1])

    def energy(self, q):
        pv = np.polynomial.polynomial
        d = q @ self.incidence.T
        e = pv.polyval(d, self._u_sym).sum(axis=-1)
        if self.pinning is not None:
            e = e + pv.polyval(q, self.pinning.coeffs).sum(axis=-1)
        return e

    def grad(self, q):
        if self._linear is not None:
            return q @ self._linear + self._linear_shift
        pv = np.polynomial.polynomial
        d = q @ self.incidence.T
        g = pv.polyval(d, self._du_sym) @ self.incidence
        if self.pinning is not None:
            g = g + pv.polyval(q, self.pinning.deriv().coeffs)
        return g

    def hessian(self, q):
        pv = np.polynomial.polynomial
        d = q @ self.incidence.T
        w = pv.polyval(d, self._d2u_sym)
        h = (self.incidence.T * w) @ self.incidence
        if self.pinning is not None:
            h = h + np.diag(pv.polyval(q, self.pinning.deriv(2).coeffs))
        return h


def _potential(spec: NetworkSpec) -> _Potential:
    return _Potential(spec.n, spec.edges, spec.pinning, spec.interaction)


def hamiltonian(spec: NetworkSpec, state) -> float:
    """``H = sum_i p_i^2/2 + V(q_i) + (1/2) sum_{j~i} U(q_i - q_j)``; accepts batches of states."""
    z = _as_z(spec.n, state)
    N = spec.n
    q, p = z[..., :N], z[..., N:]
    return 0.5 * np.sum(p * p, axis=-1) + _potential(spec).energy(q)


def grad_hamiltonian(spec: NetworkSpec, state):
    """Return ``(dH/dq, dH/dp)``."""
    z = _as_z(spec.n, state)
    N = spec.n
    return _potential(spec).grad(z[..., :N]), z[..., N:].copy()


def find_equilibrium(spec: NetworkSpec, max_iter: int = 200, gtol: float = 1e-12) -> PhaseState:
    """Minimiser ``c0 = (q*, 0)`` of H by damped Newton iteration on the potential energy.

    Raises NumericalError if the gradient does not reach ``gtol`` within
    ``max_iter`` iterations (degenerate convexity).
    """
    pot = _potential(spec)
    q = np.zeros(spec.n)
    e = pot.energy(q)
    for _ in range(max_iter):
        g = pot.grad(q)
        if np.linalg.norm(g) <= gtol:
            return PhaseState(q, np.zeros(spec.n))
        h = pot.hessian(q)
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(h, g, rcond=None)[0]
        if not np.all(np.isfinite(step)) or step @ g <= 0:
            step = g
        gnorm = np.linalg.norm(g)
        t = 1.0
        while t > 1e-12:
            q_new = q - t * step
            e_new = pot.energy(q_new)
            if e_new <= e + 1e-4 * t * (-(step @ g)) or e_new <= e:
                break
            # energy differences at rounding level: judge by the gradient instead
            if abs(e_new - e) <= 1e-13 * max(1.0, abs(e)) and np.linalg.norm(pot.grad(q_new)) < gnorm:
                break
            t *= 0.5
        if t <= 1e-12:
            break
        q, e = q_new, e_new
    g = pot.grad(q)
    if np.linalg.norm(g) <= gtol:
        return PhaseState(q, np.zeros(spec.n))
    raise NumericalError(f"equilibrium search did not converge (|grad| = {np.linalg.norm(g):.3e})")


@dataclass(eq=False)
class Trajectory:
    t: np.ndarray
    z: np.ndarray
    damped: tuple = ()

    @property
    def n(self) -> int:
        return self.z.shape[-1] // 2

    @property
    def q(self):
        return self.z[..., : self.n]

    @property
    def p(self):
        return self.z[..., self.n :]

    def dissipation(self) -> float:
        """Trapezoidal ``int sum_{i in D} p_i^2 ds`` along the stored samples."""
        if not self.damped:
            return 0.0
        rate = np.sum(self.p[:, list(self.damped)] ** 2, axis=-1)
        return _trapz(rate, self.t)


def _trapz(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def _rk4_step(rhs, z, h):
    k1 = rhs(z)
    k2 = rhs(z + 0.5 * h * k1)
    k3 = rhs(z + 0.5 * h * k2)
    k4 = rhs(z + h * k3)
    return z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _flow_rhs(pot: _Potential, n, damped_mask):
    d = damped_mask.astype(float)

    def rhs(z):
        q = z[..., :n]
        p = z[..., n:]
        return np.concatenate([p, -pot.grad(q) - p * d], axis=-1)

    return rhs


def _steps(T, dt):
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    if T < 0:
        raise PreconditionError("horizon must be non-negative")
    return int(round(T / dt)) if abs(T / dt - round(T / dt)) < 1e-9 else int(math.ceil(T / dt))


def flow_damped(
    spec: NetworkSpec,
    z0,
    T: float,
    dt: float,
    damped=None,
    energy_tol: float = 1e-6,
    thin: int = 1,
) -> Trajectory:
    """Noise-free dynamics ``q' = p, p' = -dH/dq - p 1_D`` by classical RK4.

    ``damped`` overrides the damped set (pass ``()`` for the conservative
    flow). A step that raises H by more than ``energy_tol * max(1, |H|)``
    aborts with NumericalError: dt is too large.
    """
    N = spec.n
    damped = tuple(sorted(spec.damped if damped is None else damped))
    mask = np.zeros(N, dtype=bool)
    mask[list(damped)] = True
    pot = _potential(spec)
    rhs = _flow_rhs(pot, N, mask)
    z = np.array(_as_z(N, z0), dtype=float)
    steps = _steps(T, dt)
    h = T / steps if steps else 0.0

    def energy(x):
        return 0.5 * x[N:] @ x[N:] + pot.energy(x[:N])

    ts = [0.0]
    zs = [z.copy()]
    e = energy(z)
    for k in range(1, steps + 1):
        z = _rk4_step(rhs, z, h)
        e_new = energy(z)
        if not np.isfinite(e_new):
            raise NumericalError("flow diverged")
        if e_new - e > energy_tol * max(1.0, abs(e)):
            raise NumericalError(f"energy increased by {e_new - e:.3e} at t={k * h:.6g}; reduce dt")
        e = e_new
        if k % thin == 0 or k == steps:
            ts.append(k * h)
            zs.append(z.copy())
    return Trajectory(np.array(ts), np.array(zs), damped)


@dataclass(eq=False)
class LasalleReport:
    verdict: str
    hitting_times: list
    max_hitting_time: float | None
    eta: float
    witness: dict | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "hitting_times": self.hitting_times,
            "max_hitting_time": self.max_hitting_time,
            "eta": self.eta,
            "witness": self.witness,
        }


def _uniform_ball(rng, count, dim, radius):
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / dim)
    return g * r[:, None]


def lasalle_check(
    spec: NetworkSpec,
    sample_count: int = 10,
    radius: float = 1.0,
    T: float = 200.0,
    dt: float = 0.05,
    eta: float = 1e-3,
    seed: int = 0,
    witness_tol: float = 1e-8,
    witness_windows: int = 3,
) -> LasalleReport:
    """Probe the stability condition by running the damped flow from random starts.

    Starts are uniform in the ball of radius ``radius`` around c0. Each
    sample's hitting time of ``{H - H(c0) < eta}`` is recorded. If every
    sample hits: "stability plausible". Otherwise the flow is continued from
    a non-hitting endpoint over windows of length T; a window whose
    dissipation ``int sum_D p^2`` is below ``witness_tol * window * H`` is a
    witness of a non-trivial solution with vanishing damped momenta, and the
    verdict is "stability refuted". Anything else is "inconclusive".
    """
    if sample_count < 1 or radius <= 0 or T <= 0 or dt <= 0 or eta <= 0:
        raise PreconditionError("lasalle_check parameters must be positive")
    N = spec.n
    c0 = find_equilibrium(spec).z
    pot = _potential(spec)
    mask = spec.damped_mask()
    rhs = _flow_rhs(pot, N, mask)
    rng = np.random.default_rng(seed)
    z = c0 + _uniform_ball(rng, sample_count, 2 * N, radius)
    h0 = 0.5 * c0[N:] @ c0[N:] + pot.energy(c0[:N])

    def energy(x):
        return 0.5 * np.sum(x[..., N:] ** 2, axis=-1) + pot.energy(x[..., :N]) - h0

    steps = _steps(T, dt)
    h = T / steps
    hit = np.full(sample_count, np.nan)
    e = energy(z)
    hit[e < eta] = 0.0
    for k in range(1, steps + 1):
        if not np.any(np.isnan(hit)):
            break
        z = _rk4_step(rhs, z, h)
        e_new = energy(z)
        if not np.all(np.isfinite(e_new)):
            raise NumericalError("damped flow diverged")
        if np.any(e_new - e > 1e-6 * np.maximum(1.0, np.abs(e))):
            raise NumericalError("energy increased along the damped flow; reduce dt")
        e = e_new
        newly = np.isnan(hit) & (e < eta)
        hit[newly] = k * h
    times = [None if np.isnan(x) else float(x) for x in hit]
    if not np.any(np.isnan(hit)):
        return LasalleReport("stability plausible", times, float(np.max(hit)), eta)

    damped = tuple(sorted(spec.damped))
    for idx in np.flatnonzero(np.isnan(hit)):
        x = z[idx]
        for _ in range(witness_windows):
            traj = flow_damped(spec, x, T, h)
            diss = _trapz(np.sum(traj.p[:, list(damped)] ** 2, axis=-1), traj.t)
            h_start = float(energy(x))
            x = traj.z[-1]
            if h_start >= eta and diss <= witness_tol * T * max(h_start, 1e-300):
                return LasalleReport(
                    "stability refuted",
                    times,
                    None,
                    eta,
                    witness={
                        "sample": int(idx),
                        "state": [float(v) for v in traj.z[0]],
                        "energy": h_start,
                        "window": float(T),
                        "dissipation": diss,
                    },
                )
    return LasalleReport("inconclusive", times, None, eta)


@dataclass(frozen=True)
class SimConfig:
    dt: float
    horizon: float
    seed: int = 0
    scheme: str = "euler-maruyama"
    thin: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise PreconditionError("dt must be positive")
        if not self.horizon >= 0:
            raise PreconditionError("horizon must be non-negative")
        if self.scheme not in ("exact-gaussian", "euler-maruyama"):
            raise PreconditionError(f"unknown scheme {self.scheme!r}")
        if int(self.thin) < 1:
            raise PreconditionError("thin must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise PreconditionError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class EnergyLedger:
    """Pathwise terms of ``H(Z_t) = H(z) + sum T_i t - int sum_D p^2 ds + martingale``."""

    H_start: float
    H_end: float
    bath_input: float
    dissipation: float
    time: float

    @property
    def martingale_residual(self) -> float:
        return self.H_end - self.H_start - self.bath_input + self.dissipation

    def to_dict(self) -> dict:
        return {
            "H_start": self.H_start,
            "H_end": self.H_end,
            "bath_input": self.bath_input,
            "dissipation": self.dissipation,
            "time": self.time,
            "martingale_residual": self.martingale_residual,
        }


@dataclass(eq=False)
class SimResult:
    t: np.ndarray
    z: np.ndarray
    ledger: EnergyLedger

    @property
    def n(self):
        return self.z.shape[1] // 2


def path_rng(seed: int, path_index: int = 0) -> np.random.Generator:
    """Counter-based Philox stream for ``(seed, path_index)``; independent of execution order."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(path_index),))
    return np.random.Generator(np.random.Philox(ss))


_CHUNK = 1 << 15


def simulate(spec: NetworkSpec, z0, cfg: SimConfig, path_index: int = 0) -> SimResult:
    """One sample path of the network SDE.

    ``euler-maruyama``: ``z += drift(z) dt + sigma sqrt(dt) xi`` with noise on
    the boundary momenta only. ``exact-gaussian`` (harmonic only):
    ``z <- e^{M dt} z + N(0, K_dt)``, exact in law at the grid times.
    """
    N = spec.n
    z = np.array(_as_z(N, z0), dtype=float)
    rng = path_rng(cfg.seed, path_index)
    return _simulate(spec, z, cfg, rng)


def _simulate(spec, z, cfg, rng):
    N = spec.n
    steps = _steps(cfg.horizon, cfg.dt)
    dt = cfg.horizon / steps if steps else cfg.dt
    thin = int(cfg.thin)
    pot = _potential(spec)
    damped = np.array(sorted(spec.damped), dtype=int)
    boundary = np.array(sorted(spec.boundary), dtype=int)
    temps = spec.temperature_vector()

    def energy(x):
        return 0.5 * x[N:] @ x[N:] + pot.energy(x[:N])

    h_start = float(energy(z))
    linear_step = None  # (A, noise map) for z <- A z + noise
    if cfg.scheme == "exact-gaussian":
        if not spec.is_harmonic:
            raise PreconditionError("exact-gaussian scheme requires a harmonic network")
        from .harmonic import linear_system

        ls = linear_system(spec)
        L = psd_sqrt(propagate_covariance(ls.M, ls.sigma, np.zeros_like(ls.M), dt, method="exact"))
        linear_step = (matrix_exp(ls.M, dt), L, 2 * N)
    else:
        amp = np.sqrt(2.0 * temps[boundary] * dt)
        L = np.zeros((2 * N, boundary.size))
        L[N + boundary, np.arange(boundary.size)] = amp
        dmask = spec.damped_mask().astype(float)
        if pot._linear is not None:
            A = np.eye(2 * N)
            A[:N, N:] += dt * np.eye(N)
            A[N:, :N] -= dt * pot._linear
            A[N:, N:] -= dt * np.diag(dmask)
            shift = np.concatenate([np.zeros(N), -dt * pot._linear_shift])
            linear_step = (A, L, boundary.size, shift)
        else:

            def drift_step(x):
                q, p = x[:N], x[N:]
                return np.concatenate([q + p * dt, p + (-pot.grad(q) - p * dmask) * dt])

    keep_t = [np.zeros(1)]
    keep_z = [z[None, :].copy()]
    rate_prev = float(np.sum(z[N + damped] ** 2))
    diss = 0.0
    done = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while done < steps:
            m = min(_CHUNK, steps - done)
            if linear_step is not None:
                A, Lm, dim = linear_step[:3]
                noise = rng.standard_normal((m, dim)) @ Lm.T
                if len(linear_step) == 4:
                    noise += linear_step[3]
            else:
                noise = rng.standard_normal((m, boundary.size)) @ L.T
            buf = np.empty((m, 2 * N))
            if linear_step is not None:
                for k in range(m):
                    z = A @ z + noise[k]
                    buf[k] = z
            else:
                for k in range(m):
                    z = drift_step(z) + noise[k]
                    buf[k] = z
            if not np.all(np.abs(buf) < DIVERGENCE_THRESHOLD):
                bad = int(np.argmax(~(np.abs(buf) < DIVERGENCE_THRESHOLD).all(axis=1)))
                raise NumericalError(
                    f"path diverged at t={(done + bad + 1) * dt:.6g} (|z| exceeded {DIVERGENCE_THRESHOLD:g})"
                )
            rate = np.sum(buf[:, N + damped] ** 2, axis=1)
            diss += 0.5 * dt * (rate_prev + 2.0 * rate[:-1].sum() + rate[-1]) if m > 1 else 0.5 * dt * (rate_prev + rate[0])
            rate_prev = float(rate[-1])
            idx = np.arange(done + 1, done + m + 1)
            sel = (idx % thin == 0) | (idx == steps)
            keep_t.append(idx[sel] * dt)
            keep_z.append(buf[sel])
            done += m
    t_end = steps * dt
    ledger = EnergyLedger(
        H_start=h_start,
        H_end=float(energy(z)),
        bath_input=float(np.sum(temps[boundary]) * t_end),
        dissipation=float(diss),
        time=t_end,
    )
    return SimResult(np.concatenate(keep_t), np.concatenate(keep_z), ledger)


def _ensemble_worker(args):
    spec, cfg, k, z0, start = args
    rng = path_rng(cfg.seed, k)
    if start == "stationary":
        from .harmonic import stationary_covariance

        Q = stationary_covariance(spec)
        z0 = psd_sqrt(Q) @ rng.standard_normal(2 * spec.n)
    return _simulate(spec, np.array(z0, dtype=float), cfg, rng)


def simulate_ensemble(
    spec: NetworkSpec,
    cfg: SimConfig,
    paths: int,
    z0=None,
    start: str = "fixed",
    workers: int = 1,
) -> list:
    """Independent paths ``k = 0..paths-1``, each on its own stream ``(cfg.seed, k)``.

    ``start="stationary"`` draws each initial state from the invariant
    Gaussian measure (asymmetric harmonic networks); otherwise every path
    starts from ``z0`` (default: the equilibrium c0).
    """
    if paths < 1:
        raise PreconditionError("paths must be >= 1")
    if start not in ("fixed", "stationary"):
        raise PreconditionError(f"unknown start {start!r}")
    if z0 is None:
        z0 = find_equilibrium(spec).z
    z0 = np.array(_as_z(spec.n, z0), dtype=float)
    jobs = [(spec, cfg, k, z0, start) for k in range(paths)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_ensemble_worker, jobs))
    return [_ensemble_worker(j) for j in jobs]


@dataclass(frozen=True)
class EnergyBalance:
    paths: int
    mean_residual: float
    se_residual: float
    mean_dissipation_rate: float
    se_dissipation_rate: float
    bath_rate: float
    beta: float
    log_lyapunov_ratio: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def energy_balance(spec: NetworkSpec, results, beta: float | None = None) -> EnergyBalance:
    """Ensemble statistics of the Ito energy identity.

    ``log_lyapunov_ratio`` estimates ``log E[W(Z_t) / W(Z_0)]`` for
    ``W = exp(beta H)``; beta must lie in ``(0, 1 / max T_i)``.
    """
    results = list(results)
    if not results:
        raise PreconditionError("empty ensemble")
    tmax = max(spec.temperatures.values())
    if beta is None:
        beta = 0.5 / tmax if tmax > 0 else 1.0
    if not beta > 0 or (tmax > 0 and beta >= 1.0 / tmax):
        raise PreconditionError("beta must satisfy 0 < beta < 1 / max T_i")
    res = np.array([r.ledger.martingale_residual for r in results])
    rate = np.array([r.ledger.dissipation / r.ledger.time if r.ledger.time > 0 else 0.0 for r in results])
    dh = np.array([r.ledger.H_end - r.ledger.H_start for r in results])
    m = len(results)
    se = (lambda x: float(np.std(x, ddof=1) / np.sqrt(m)) if m > 1 else float("nan"))
    a = beta * dh
    amax = a.max()
    log_ratio = float(amax + np.log(np.mean(np.exp(a - amax))))
    return EnergyBalance(
        paths=m,
        mean_residual=float(res.mean()),
        se_residual=se(res),
        mean_dissipation_rate=float(rate.mean()),
        se_dissipation_rate=se(rate),
        bath_rate=float(sum(spec.temperatures.values())),
        beta=float(beta),
        log_lyapunov_ratio=log_ratio,
    )


@dataclass(frozen=True, eq=False)
class LimitSystem:
    """Limit Hamiltonian of the high-energy rescaling.

    ``H_inf = sum_i p_i^2/2 + [u == v] a_v q_i^v + sum_edges a_u (q_i - q_j)^u``
    where ``a_u``, ``a_v`` are the leading coefficients of U and V.
    """

    spec: NetworkSpec
    u: int
    v: int
    interaction_coeff: float
    pinning_coeff: float

    @property
    def includes_pinning(self) -> bool:
        return self.u == self.v

    @property
    def description(self) -> str:
        def term(c, body):
            return body if c == 1 else f"{c:g} {body}"

        parts = ["sum_i p_i^2/2"]
        if self.includes_pinning:
            parts.append(term(self.pinning_coeff, f"sum_i q_i^{self.v}"))
        parts.append(term(self.interaction_coeff, f"sum_(i~j) (q_i - q_j)^{self.u}"))
        return "H_inf = " + " + ".join(parts)

    def _pot(self):
        interaction = Polynomial((0.0,) * self.u + (self.interaction_coeff,))
        pinning = Polynomial((0.0,) * self.v + (self.pinning_coeff,))
        return _Potential(self.spec.n, self.spec.edges, pinning, interaction, pinning_on=self.includes_pinning)

    def hamiltonian(self, z):
        z = np.asarray(z, dtype=float)
        N = self.spec.n
        return 0.5 * np.sum(z[..., N:] ** 2, axis=-1) + self._pot().energy(z[..., :N])

    def to_dict(self) -> dict:
        return {
            "u": self.u,
            "v": self.v,
            "includes_pinning": self.includes_pinning,
            "interaction_coeff": self.interaction_coeff,
            "pinning_coeff": self.pinning_coeff if self.includes_pinning else None,
            "description": self.description,
        }


def limit_system(spec: NetworkSpec) -> LimitSystem:
    u, v = spec.interaction.degree, spec.pinning.degree
    if u < v:
        raise PreconditionError(f"limit Hamiltonian needs interaction degree >= pinning degree (u={u}, v={v})")
    return LimitSystem(spec, u, v, spec.interaction.leading, spec.pinning.leading)


@dataclass(eq=False)
class RigidityReport:
    passed: bool
    dissipation: list
    threshold: float
    horizon: float
    unique_minimizer: bool
    witness: list | None = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "dissipation": self.dissipation,
            "min_dissipation": min(self.dissipation),
            "threshold": self.threshold,
            "horizon": self.horizon,
            "unique_minimizer": self.unique_minimizer,
            "witness": self.witness,
        }


def _shell_scale(H, z, tol=1e-10):
    """Scale s > 0 with ``H(s z) = 1`` by bisection; H is increasing along rays from 0."""
    lo, hi = 0.0, 1.0
    while H(hi * z) < 1.0:
        hi *= 2.0
        if hi > 1e12:
            raise NumericalError("could not bracket the unit energy shell")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = H(mid * z)
        if abs(val - 1.0) <= tol:
            return mid
        if val < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rigidity_check(
    limit: LimitSystem,
    sample_count: int = 10,
    T: float = 50.0,
    dt: float = 0.01,
    seed: int = 0,
    threshold: float | None = None,
) -> RigidityReport:
    """Check that the conservative ``H_inf`` flow from the unit shell moves the damped momenta.

    Every sample must satisfy ``int_0^T sum_D p_i^2 ds > threshold``
    (default ``1e-8 T``); a failing sample is returned as the witness.
    """
    if sample_count < 1 or T <= 0 or dt <= 0:
        raise PreconditionError("rigidity_check parameters must be positive")
    spec = limit.spec
    N = spec.n
    threshold = 1e-8 * T if threshold is None else threshold
    rng = np.random.default_rng(seed)
    H = limit.hamiltonian
    homogeneous = limit.u == 2 and limit.v == 2
    starts = []
    for _ in range(sample_count):
        while True:
            g = rng.standard_normal(2 * N)
            if H(g) > 0:
                break
        s = 1.0 / math.sqrt(H(g)) if homogeneous else _shell_scale(H, g)
        starts.append(s * g)
    z = np.array(starts)
    pot = limit._pot()
    rhs = _flow_rhs(pot, N, np.zeros(N, dtype=bool))
    damped = sorted(spec.damped)
    steps = _steps(T, dt)
    h = T / steps
    rate_prev = np.sum(z[:, [N + i for i in damped]] ** 2, axis=1)
    diss = np.zeros(sample_count)
    for _ in range(steps):
        z = _rk4_step(rhs, z, h)
        if not np.all(np.isfinite(z)):
            raise NumericalError("limit flow diverged; reduce dt")
        rate = np.sum(z[:, [N + i for i in damped]] ** 2, axis=1)
        diss += 0.5 * (rate + rate_prev) * h
        rate_prev = rate
    ok = diss > threshold
    witness = None
    if not np.all(ok):
        witness = [float(x) for x in starts[int(np.argmin(diss))]]
    return RigidityReport(
        passed=bool(np.all(ok)),
        dissipation=[float(x) for x in diss],
        threshold=threshold,
        horizon=T,
        unique_minimizer=limit.includes_pinning,
        witness=witness,
    )


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(fh, result, n: int | None = None):
    """CSV with header ``t,q1..qN,p1..pN`` and 17 significant digits."""
    t, z = result.t, result.z
    n = z.shape[1] // 2 if n is None else n
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t"] + [f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)])
    for ti, zi in zip(t, z):
        w.writerow([_fmt(ti)] + [_fmt(v) for v in zi])
