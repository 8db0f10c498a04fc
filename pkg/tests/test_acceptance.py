"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run ``pytest tests/test_acceptance.py -v`` and read the "acceptance criteria"
section of the summary.
"""
import time

import numpy as np
import pytest

from hcnet.dynamics import (
    SimConfig,
    flow_damped,
    lasalle_check,
    limit_system,
    rigidity_check,
    simulate,
    simulate_ensemble,
    energy_balance,
)
from hcnet.harmonic import (
    analyze,
    contraction_rate,
    invariant_quadratics,
    linear_system,
    stationary_covariance,
    tilt_residual,
    tilted_covariance,
)
from hcnet.lie import lie_basis
from hcnet.matkernel import numerical_rank
from hcnet.network import chain, graph_matrices, harmonic_corpus, load_builtin, random_network

SWEEP_SEED = 20261015
SWEEP_SIZE = 300


@pytest.fixture(scope="module")
def sweep():
    rng = np.random.default_rng(SWEEP_SEED)
    t0 = time.perf_counter()
    rows = []
    for _ in range(SWEEP_SIZE):
        spec = random_network(rng, n_max=8)
        rows.append((spec, analyze(spec)))
    return rows, time.perf_counter() - t0


@pytest.fixture(scope="module")
def corpus():
    return harmonic_corpus()


def test_c01_equivalence_sweep(sweep, criterion):
    rows, elapsed = sweep
    bad = [s.name or str(s) for s, r in rows if not (r.asymmetric == (r.abscissa < -1e-9) == (not r.invariants))]
    n_sym = sum(not r.asymmetric for _, r in rows)
    criterion(
        1,
        "asymmetric <=> abscissa < -1e-9 <=> no invariant quadratic",
        not bad and len(rows) >= 100 and elapsed < 60,
        f"{len(rows)} networks, {n_sym} symmetric, {len(bad)} counterexamples, {elapsed:.1f}s",
    )


def test_c02_support_identity(sweep, criterion):
    rows, _ = sweep
    asym = [(s, r) for s, r in rows if r.asymmetric]
    bad = [s for s, r in asym if r.rank_q != r.dim_boundary]
    deficient = sum(r.dim_boundary < 2 * s.n for s, r in asym)
    # the direct SVD of Q, for information: tiny genuine eigenvalues can fall below the policy
    direct = sum(numerical_rank(r.Q) == r.dim_boundary for s, r in asym)
    criterion(
        2,
        "rank Q = dim E_{M,boundary} on the asymmetric sweep",
        not bad and len(asym) > 0,
        f"{len(asym)} asymmetric ({deficient} with deficient support), {len(bad)} mismatches; "
        f"SVD of Q itself agrees on {direct}",
    )


def test_c03_diamond_certificate(criterion):
    spec = load_builtin("diamond")
    quads = invariant_quadratics(spec)
    k = quads[0]
    pair_ok = len(quads) == 1 and abs(k.alpha - 3.0) < 1e-10 and np.allclose(
        k.z, np.array([0, 1, 0, -1]) / np.sqrt(2), atol=1e-10
    )
    z0 = np.concatenate([[0.4, 0.8, -0.3, -0.5], [0.2, -0.1, 0.3, 0.6]])
    tr = flow_damped(spec, z0, 100.0, 1e-3, thin=10)
    K = k(tr.q, tr.p)
    drift = float(np.abs(K - K[0]).max() / K[0])
    residuals = [tilt_residual(spec, tilted_covariance(spec, k, g)) for g in (0.1, 1.0, 10.0)]
    criterion(
        3,
        "diamond: (3, (0,1,0,-1)), K conserved, tilted family stationary",
        pair_ok and drift <= 1e-8 and max(residuals) <= 1e-8,
        f"K drift {drift:.1e}, max tilt residual {max(residuals):.1e}",
    )


def test_c04_gibbs_covariance(criterion):
    spec = chain(4, range(4), range(4), temperature=0.7)
    g = graph_matrices(spec).gamma
    Q = stationary_covariance(spec)
    expected = np.zeros((8, 8))
    expected[:4, :4] = 0.7 * np.linalg.inv(g)
    expected[4:, 4:] = 0.7 * np.eye(4)
    rel = float(np.linalg.norm(Q - expected) / np.linalg.norm(expected))
    criterion(4, "Gibbs covariance of the fully heated chain", rel <= 1e-10, f"relative error {rel:.1e}")


def _batch_variances(x, batches):
    """Overall variance of each column and its batch-means standard error."""
    x = x - x.mean(axis=0)
    per = np.array([np.mean(b**2, axis=0) for b in np.array_split(x, batches)])
    return per.mean(axis=0), per.std(axis=0, ddof=1) / np.sqrt(batches)


def test_c05_monte_carlo_stationarity(criterion):
    spec = load_builtin("single")
    t0 = time.perf_counter()
    z0 = np.zeros(2)
    burn = 20.0
    ex = simulate(spec, z0, SimConfig(dt=0.01, horizon=1000.0 + burn, seed=5, scheme="exact-gaussian"))
    em = simulate(spec, z0, SimConfig(dt=1e-3, horizon=1000.0 + burn, seed=6, scheme="euler-maruyama", thin=10))
    elapsed = time.perf_counter() - t0
    v_ex, se_ex = _batch_variances(ex.z[ex.t >= burn], 20)
    v_em, se_em = _batch_variances(em.z[em.t >= burn], 20)
    exact_ok = np.all(np.abs(v_ex - 1.0) <= 3 * se_ex)
    joint = np.sqrt(se_ex**2 + se_em**2)
    em_ok = np.all(np.abs(v_ex - v_em) <= 4 * joint)
    criterion(
        5,
        "single particle: Var(q), Var(p) = 1 (exact scheme), Euler-Maruyama agrees",
        bool(exact_ok and em_ok and elapsed < 30),
        f"exact {np.round(v_ex, 3).tolist()} +- {np.round(se_ex, 3).tolist()}, "
        f"EM {np.round(v_em, 3).tolist()} +- {np.round(se_em, 3).tolist()}, {elapsed:.1f}s",
    )


def test_c06_energy_balance(criterion):
    spec = load_builtin("chain3_ends")
    assert spec.temperatures == {0: 1.0, 2: 2.0}
    fixed = simulate_ensemble(spec, SimConfig(dt=1e-3, horizon=10.0, seed=61), 200)
    eb = energy_balance(spec, fixed)
    residual_ok = abs(eb.mean_residual) <= 3 * eb.se_residual
    stat = simulate_ensemble(
        spec, SimConfig(dt=0.01, horizon=20.0, seed=62, scheme="exact-gaussian"), 200, start="stationary"
    )
    es = energy_balance(spec, stat)
    rate_ok = abs(es.mean_dissipation_rate - 3.0) <= 3 * es.se_dissipation_rate
    criterion(
        6,
        "energy balance on the two-bath chain",
        residual_ok and rate_ok,
        f"residual {eb.mean_residual:.3f} +- {eb.se_residual:.3f}, "
        f"dissipation rate {es.mean_dissipation_rate:.3f} +- {es.se_dissipation_rate:.3f} vs 3",
    )


def test_c07_lasalle_equivalence(corpus, criterion):
    mismatches = []
    verdicts = {}
    for spec in corpus:
        asym = analyze(spec).asymmetric
        rep = lasalle_check(spec, sample_count=10, T=2000.0, dt=0.05, seed=7)
        verdicts[rep.verdict] = verdicts.get(rep.verdict, 0) + 1
        expected = "stability plausible" if asym else "stability refuted"
        if rep.verdict != expected:
            mismatches.append(spec.name)
    criterion(
        7,
        "Lasalle verdict matches asymmetry on the corpus",
        len(corpus) == 20 and not mismatches,
        f"{verdicts}, mismatches {mismatches}",
    )


def test_c08_rigidity(criterion):
    spec = load_builtin("quartic_chain")
    assert spec.damped == frozenset({0, 1, 2})
    rep = rigidity_check(limit_system(spec), sample_count=10, T=50.0, dt=0.01, seed=8)
    criterion(
        8,
        "quartic chain rigidity",
        rep.passed and rep.threshold == pytest.approx(1e-8 * 50.0),
        f"min dissipation {min(rep.dissipation):.3g} > {rep.threshold:.1e}",
    )


def test_c09_hormander(corpus, criterion):
    rng = np.random.default_rng(9)
    bad = []
    for spec in corpus:
        target = analyze(spec).dim_boundary
        b = lie_basis(spec)
        for _ in range(10):
            if b.rank_at(rng.normal(size=spec.dim)) != target:
                bad.append(spec.name)
    star = load_builtin("star_quartic")
    b = lie_basis(star)
    generic = [b.rank_at(rng.normal(size=6)) for _ in range(5)]
    # states on q1 = q2 = q3 that are also fixed by swapping the two leaves
    sym = []
    for _ in range(5):
        c, p1, p2 = rng.normal(size=3)
        sym.append(b.rank_at([c, c, c, p1, p2, p2]))
    criterion(
        9,
        "Hormander rank = dim E_{M,boundary} on the corpus; star degenerates",
        not bad and generic == [6] * 5 and all(r < 6 for r in sym),
        f"corpus mismatches {len(bad)}, star generic {generic}, on the manifold {sym}",
    )


def test_c10_contraction(corpus, criterion):
    a0 = contraction_rate(load_builtin("single"))
    single_ok = abs(a0 - 0.5) <= 1e-10
    worst = 0.0
    checked = 0
    rng = np.random.default_rng(10)
    for spec in corpus:
        rate = contraction_rate(spec)
        if not analyze(spec).asymmetric:
            continue
        checked += 1
        M = linear_system(spec).M
        _, V = np.linalg.eig(M)
        C = np.linalg.cond(V) * (1 + 1e-6)
        x, y = rng.normal(size=(2, spec.dim))
        tx = flow_damped(spec, x, 20.0, 1e-3, thin=10)
        ty = flow_damped(spec, y, 20.0, 1e-3, thin=10)
        gap = np.linalg.norm(tx.z - ty.z, axis=1)
        bound = C * np.exp(-(rate - 1e-3) * tx.t) * np.linalg.norm(x - y)
        worst = max(worst, float(np.max(gap / bound)))
    criterion(
        10,
        "contraction at rate -abscissa on asymmetric corpus networks",
        single_ok and checked > 0 and worst <= 1.0,
        f"single alpha0 = {a0:.12f}, {checked} networks, max gap/bound {worst:.3f}",
    )
