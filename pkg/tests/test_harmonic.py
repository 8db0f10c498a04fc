import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hcnet.errors import PreconditionError
from hcnet.harmonic import (
    InvariantQuadratic,
    analyze,
    contraction_rate,
    invariant_quadratics,
    linear_system,
    stationary_covariance,
    tilt_residual,
    tilted_covariance,
)
from hcnet.matkernel import numerical_rank
from hcnet.network import NetworkSpec, Polynomial, chain, graph_matrices, load_builtin, random_network

seeds = st.integers(0, 2**32 - 1)


def brute_krylov_dim(M, vertices, N):
    """Rank of [B, MB, ..., M^(n-1) B] in exact rational arithmetic on the integer drift."""
    import sympy

    Ms = sympy.Matrix(M.round().astype(int))
    B = sympy.zeros(2 * N, len(vertices))
    for c, v in enumerate(vertices):
        B[N + v, c] = 1
    blocks = [B]
    for _ in range(2 * N - 1):
        blocks.append(Ms * blocks[-1])
    return sympy.Matrix.hstack(*blocks).rank()


class TestLinearSystem:
    def test_single(self):
        ls = linear_system(load_builtin("single"))
        assert np.array_equal(ls.M, [[0, 1], [-1, -1]])
        assert np.allclose(ls.sigma, np.diag([0, np.sqrt(2)]))

    def test_chain_damped_left(self):
        ls = linear_system(load_builtin("chain3"))
        g = graph_matrices(load_builtin("chain3")).gamma
        assert np.array_equal(ls.M[3:, :3], -g)
        assert np.array_equal(ls.M[3:, 3:], np.diag([-1, 0, 0]))
        assert np.count_nonzero(ls.sigma) == 1 and ls.sigma[3, 3] == pytest.approx(np.sqrt(2))

    def test_zero_temperature(self):
        ls = linear_system(chain(3, range(3), range(3), temperature=0.0))
        assert not ls.sigma.any()
        assert np.array_equal(ls.M[3:, 3:], -np.eye(3))

    def test_rejects_anharmonic(self):
        with pytest.raises(PreconditionError):
            linear_system(load_builtin("star_quartic"))


class TestAnalyze:
    def test_chain(self):
        r = analyze(load_builtin("chain3"))
        assert r.dim_damped == r.dim_boundary == 6
        assert r.asymmetric and r.abscissa < 0 and r.rank_q == 6
        assert r.dim_damped == brute_krylov_dim(linear_system(load_builtin("chain3")).M, [0], 3)

    def test_diamond(self):
        r = analyze(load_builtin("diamond"))
        assert not r.asymmetric
        assert r.rank_q is None
        (k,) = r.invariants
        assert k.alpha == pytest.approx(3.0)
        assert np.allclose(k.z, np.array([0, 1, 0, -1]) / np.sqrt(2), atol=1e-12)

    def test_single(self):
        r = analyze(load_builtin("single"))
        assert r.dim_damped == 2 and r.rank_q == 2

    def test_report_json_keys(self):
        d = analyze(load_builtin("diamond")).to_dict()
        assert {"dim_damped", "dim_boundary", "asymmetric", "abscissa", "rank_q", "invariant_quadratics"} <= set(d)
        assert d["invariant_quadratics"][0]["alpha"] == pytest.approx(3.0)

    def test_six_particle_support_deficit(self):
        r = analyze(load_builtin("six_particles"))
        assert (r.dim_damped, r.dim_boundary, r.rank_q) == (12, 10, 10)

    def test_five_atoms_asymmetric_with_one_damped_vertex(self):
        s = load_builtin("five_atoms")
        r = analyze(s)
        assert len(s.damped) == 1 and r.asymmetric

    def test_zero_temperature_boundary_gives_zero_dimension(self):
        r = analyze(chain(2, [0, 1], [0], temperature=0.0))
        assert r.dim_boundary == 0 and r.rank_q == 0

    def test_momentum_variances_positive_on_corpus(self):
        r = analyze(load_builtin("chain3_ends"))
        assert np.all(r.momentum_variances > 0)

    @pytest.mark.parametrize("name", ["chain3", "diamond", "star", "triangle", "five_atoms"])
    def test_dims_match_exact_rational_rank(self, name):
        s = load_builtin(name)
        M = linear_system(s).M
        r = analyze(s)
        assert r.dim_damped == brute_krylov_dim(M, sorted(s.damped), s.n)
        assert r.dim_boundary == brute_krylov_dim(M, list(s.heated), s.n)

    @settings(max_examples=150, deadline=None)
    @given(seeds)
    def test_equivalences(self, seed):
        s = random_network(np.random.default_rng(seed))
        r = analyze(s)
        assert r.asymmetric == (r.abscissa < -1e-9) == (not r.invariants)
        if r.asymmetric:
            assert r.rank_q == r.dim_boundary


class TestInvariantQuadratics:
    def test_chain_none(self):
        assert invariant_quadratics(load_builtin("chain3")) == []

    def test_fully_damped_none(self):
        assert invariant_quadratics(chain(4, range(4), [0])) == []

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_defining_residuals(self, seed):
        s = random_network(np.random.default_rng(seed))
        g = graph_matrices(s).gamma
        for k in invariant_quadratics(s):
            assert np.linalg.norm(g @ k.z - k.alpha * k.z) <= 1e-10 * max(1, k.alpha)
            assert np.abs(k.z[sorted(s.damped)]).max() <= 1e-10
            assert np.linalg.norm(k.z) == pytest.approx(1.0)

    @settings(max_examples=60, deadline=None)
    @given(seeds)
    def test_poisson_bracket_vanishes(self, seed):
        # {H, K} along the drift: dK/dt = grad_q K . p + grad_p K . (-Gamma q - I_D p)
        rng = np.random.default_rng(seed)
        s = random_network(rng)
        g = graph_matrices(s).gamma
        d = s.damped_mask().astype(float)
        for k in invariant_quadratics(s):
            q, p = rng.normal(size=(2, s.n))
            gq, gp = k.gradient(q, p)
            assert abs(gq @ p + gp @ (-g @ q - d * p)) <= 1e-9 * (1 + np.abs(gq).sum() + np.abs(gp).sum())
            assert np.abs(gp[sorted(s.damped)]).max() == 0.0

    def test_multiplicity(self):
        # path of 5 damped in the middle: eigenvectors antisymmetric about the centre
        ks = invariant_quadratics(load_builtin("chain5_middle"))
        assert len(ks) == 2
        for k in ks:
            assert np.allclose(k.z, -k.z[::-1], atol=1e-12)


class TestTilt:
    def setup_method(self):
        self.spec = load_builtin("diamond")
        (self.k,) = invariant_quadratics(self.spec)

    def test_gamma_zero_is_gibbs(self):
        g = graph_matrices(self.spec).gamma
        Q = tilted_covariance(self.spec, self.k, 0.0)
        assert np.allclose(Q[:4, :4], np.linalg.inv(g)) and np.allclose(Q[4:, 4:], np.eye(4))

    @pytest.mark.parametrize("gamma", [0.1, 1.0, 10.0])
    def test_residual(self, gamma):
        Q = tilted_covariance(self.spec, self.k, gamma)
        assert tilt_residual(self.spec, Q) <= 1e-8
        assert np.linalg.eigvalsh(Q).min() > 0

    def test_family_is_nontrivial(self):
        a = tilted_covariance(self.spec, self.k, 0.0)
        b = tilted_covariance(self.spec, self.k, 1.0)
        assert np.abs(a - b).max() > 0.1

    def test_rejects_bad_quadratic(self):
        with pytest.raises(PreconditionError):
            tilted_covariance(self.spec, InvariantQuadratic(3.0, np.array([1.0, 0, 0, 0])), 1.0)

    def test_rejects_negative_gamma(self):
        with pytest.raises(PreconditionError):
            tilted_covariance(self.spec, self.k, -1.0)

    def test_rejects_wrong_temperature(self):
        hot = self.spec.replace(temperatures={0: 2.0, 2: 1.0})
        with pytest.raises(PreconditionError, match="temperature"):
            tilted_covariance(hot, self.k, 1.0)


class TestStationary:
    def test_gibbs(self):
        s = chain(4, range(4), range(4), temperature=0.7)
        g = graph_matrices(s).gamma
        Q = stationary_covariance(s)
        assert np.allclose(Q[:4, :4], 0.7 * np.linalg.inv(g)) and np.allclose(Q[4:, 4:], 0.7 * np.eye(4))
        assert numerical_rank(Q) == 8

    def test_refuses_symmetric(self):
        with pytest.raises(PreconditionError):
            stationary_covariance(load_builtin("diamond"))


class TestContractionRate:
    def test_single(self):
        assert contraction_rate(load_builtin("single")) == pytest.approx(0.5, abs=1e-12)

    def test_diamond(self):
        assert abs(contraction_rate(load_builtin("diamond"))) < 1e-12

    def test_chain(self):
        assert contraction_rate(load_builtin("chain3")) > 0


def test_anharmonic_star_rejected_by_analyze():
    s = NetworkSpec(2, [(0, 1)], {0}, {0}, {0: 1.0}, interaction=Polynomial((0, 0, 0, 0, 1)))
    with pytest.raises(PreconditionError):
        analyze(s)
