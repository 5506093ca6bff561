"""Two-magnon engines: discrete layers, softened Hamiltonian, spectra."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chargefcs import coupled, magnon, sep
from chargefcs.core import ModelParams


def d_for(a: float) -> float:
    return (0.25 * (1.0 / a + 1.0)) ** 0.25


class TestMagnonVector:
    def test_validation(self):
        with pytest.raises(ValueError):
            magnon.MagnonVector2(np.zeros((3, 4)))
        with pytest.raises(ValueError):
            magnon.MagnonVector2(np.zeros(5))
        bad = np.zeros((4, 4))
        bad[1, 2] = np.inf
        with pytest.raises(ValueError):
            magnon.MagnonVector2(bad)
        assert magnon.MagnonVector2(np.zeros((6, 6))).L == 6

    def test_initial_vector_is_left_indicator_product(self):
        vec = magnon.initial_pair_vector(6)
        l = magnon.left_indicator(6)
        np.testing.assert_array_equal(l, [1, 1, 1, 0, 0, 0])
        np.testing.assert_array_equal(magnon.right_indicator(6),
                                      [0, 0, 0, 1, 1, 1])
        np.testing.assert_array_equal(vec.amplitudes, np.outer(l, l))


class TestLayers:
    def test_single_layer_averages_bonds(self):
        u = np.array([1.0, 0.0, 4.0, 2.0])
        out = magnon.layer_apply_single(u, 0)
        np.testing.assert_allclose(out, [0.5, 0.5, 3.0, 3.0])
        out = magnon.layer_apply_single(u, 1)
        np.testing.assert_allclose(out, [1.0, 2.0, 2.0, 2.0])

    def test_single_window_alignment_weights(self):
        # both magnons in one window, aligned: diagonal p, off-diagonal r
        a = 0.3
        vec = magnon.MagnonVector2(np.array([[1.0, 0.0], [0.0, 0.0]]))
        out = magnon.layer_apply_two_magnon(vec, 0, a).amplitudes
        p, r = (1 + a) / 4, (1 - a) / 4
        np.testing.assert_allclose(out, [[p, r], [r, p]], atol=1e-15)
        # anti-aligned input reverses the classes
        vec = magnon.MagnonVector2(np.array([[0.0, 1.0], [0.0, 0.0]]))
        out = magnon.layer_apply_two_magnon(vec, 0, a).amplitudes
        np.testing.assert_allclose(out, [[r, p], [p, r]], atol=1e-15)

    def test_uniform_vector_is_fixed_point(self):
        ones = magnon.MagnonVector2(np.ones((8, 8)))
        for parity in (0, 1):
            out = magnon.layer_apply_two_magnon(ones, parity, 0.4)
            np.testing.assert_allclose(out.amplitudes, 1.0, atol=1e-14)

    @given(seed=st.integers(0, 10_000), parity=st.sampled_from([0, 1]))
    @settings(max_examples=25, deadline=None)
    def test_zero_coupling_factorizes(self, seed, parity):
        rng = np.random.default_rng(seed)
        u = rng.normal(size=6)
        w = rng.normal(size=6)
        joint = magnon.MagnonVector2(np.outer(u, w))
        out = magnon.layer_apply_two_magnon(joint, parity, 0.0).amplitudes
        want = np.outer(magnon.layer_apply_single(u, parity),
                        magnon.layer_apply_single(w, parity))
        np.testing.assert_allclose(out, want, atol=1e-12)

    @given(seed=st.integers(0, 10_000), a=st.floats(0.0, 0.99),
           parity=st.sampled_from([0, 1]))
    @settings(max_examples=25, deadline=None)
    def test_layer_preserves_total_amplitude(self, seed, a, parity):
        # both K and P blocks have zero column-sum deviation from identity
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(8, 8))
        out = magnon.layer_apply_two_magnon(magnon.MagnonVector2(A),
                                            parity, a)
        assert out.amplitudes.sum() == pytest.approx(A.sum(), rel=1e-12)

    def test_layer_preserves_symmetry(self):
        rng = np.random.default_rng(7)
        A = rng.normal(size=(6, 6))
        A = A + A.T
        out = magnon.layer_apply_two_magnon(magnon.MagnonVector2(A), 0, 0.3)
        np.testing.assert_allclose(out.amplitudes, out.amplitudes.T,
                                   atol=1e-13)


class TestDiscreteDeficit:
    def test_zero_cases(self):
        assert magnon.m_of_t_discrete(8, 0, 0.3) == 0.0
        for t in (1, 2, 4):
            assert magnon.m_of_t_discrete(8, t, 0.0) \
                == pytest.approx(0.0, abs=1e-15)

    def test_first_step_quarter_coupling(self):
        for L in (2, 4, 8):
            for a in (0.1, 0.3):
                got = magnon.m_of_t_discrete(L, 1, a, boundary_guard=False)
                assert got == pytest.approx(a / 4, rel=1e-13)

    def test_frozen_oracle_value(self):
        # exact Fraction enumeration of the coupled chains gives the same
        # deficit: 1887/32000 at L=4, t=2, a=3/10, domain wall
        got = magnon.m_of_t_discrete(4, 2, 0.3, boundary_guard=False)
        assert got == pytest.approx(1887 / 32000, rel=1e-13)

    def test_series_matches_point_calls(self):
        series = magnon.m_of_t_discrete_series(10, 5, 0.2,
                                               boundary_guard=False)
        assert series.shape == (6,)
        assert series[0] == 0.0
        for t in (1, 3, 5):
            assert series[t] == pytest.approx(
                magnon.m_of_t_discrete(10, t, 0.2, boundary_guard=False),
                rel=1e-14)

    def test_boundary_guard(self):
        with pytest.raises(ValueError, match="boundary guard"):
            magnon.m_of_t_discrete(8, 5, 0.1)
        assert magnon.m_of_t_discrete(8, 5, 0.1, boundary_guard=False) > 0
        # guard allows diffusive-safe depths
        assert magnon.m_of_t_discrete(8, 4, 0.1) > 0
        with pytest.raises(ValueError):
            magnon.m_of_t_discrete(7, 2, 0.1, boundary_guard=False)

    def test_keystone_cross_engine_equality(self):
        # the coupled exact engine and the magnon overlap must agree far
        # below any sampling scale
        cases = [
            (8, 6, 0.1, math.inf),
            (6, 4, 0.3, 2.0),
            (6, 6, 0.05, 0.5),
            (8, 3, 0.3, math.inf),
        ]
        for L, t, a, mu in cases:
            pair = ModelParams(L=L, t=t, mu=mu, d=d_for(a), n_chains=2)
            lhs = magnon.variance_deficit_discrete(L, t, mu, a,
                                                   boundary_guard=False)
            rhs = coupled.variance_deficit_exact(pair)
            assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_deficit_nonnegative(self):
        for L, t, a in ((12, 8, 0.3), (16, 10, 0.05), (8, 4, 0.2)):
            series = magnon.m_of_t_discrete_series(L, t, a,
                                                   boundary_guard=False)
            assert np.all(series >= -1e-14)

    def test_finite_bias_scales_by_tanh_squared(self):
        m = magnon.m_of_t_discrete(8, 4, 0.2)
        got = magnon.variance_deficit_discrete(8, 4, 1.4, 0.2)
        assert got == pytest.approx(math.tanh(0.7) ** 2 * m, rel=1e-14)
        assert magnon.variance_deficit_discrete(8, 4, math.inf, 0.2) \
            == pytest.approx(m, rel=1e-14)

    def test_diffusive_decay_window(self):
        # t^{-1/2} law: slope within the accepted band, plateau monotone
        series = magnon.m_of_t_discrete_series(120, 100, 0.05)
        ts = np.arange(20, 101)
        slope = np.polyfit(np.log(ts), np.log(series[20:101]), 1)[0]
        assert -0.65 <= slope <= -0.35
        plateau = series[20:101] * np.sqrt(ts)
        assert np.all(np.diff(plateau) < 0)
        assert plateau[-1] > 0


class TestHamiltonian:
    def test_single_chain_matrix(self):
        h = magnon.single_chain_hamiltonian(4).toarray()
        want = np.array([
            [0.5, -0.5, 0.0, 0.0],
            [-0.5, 1.0, -0.5, 0.0],
            [0.0, -0.5, 1.0, -0.5],
            [0.0, 0.0, -0.5, 0.5],
        ])
        np.testing.assert_allclose(h, want, atol=1e-15)
        hp = magnon.single_chain_hamiltonian(4, periodic=True).toarray()
        assert hp[0, 0] == pytest.approx(1.0)
        assert hp[0, 3] == pytest.approx(-0.5)

    def test_h2_symmetric_and_decoupled_block(self):
        h2 = magnon.hamiltonian_h2(6, 0.4)
        dense = h2.toarray()
        np.testing.assert_allclose(dense, dense.T, atol=1e-14)
        h1 = magnon.single_chain_hamiltonian(6).toarray()
        free = np.kron(h1, np.eye(6)) + np.kron(np.eye(6), h1)
        np.testing.assert_allclose(magnon.hamiltonian_h2(6, 0.0).toarray(),
                                   free, atol=1e-14)

    def test_h2_positive_semidefinite(self):
        for a in (0.5, 1.0):
            dense = magnon.hamiltonian_h2(6, a).toarray()
            w = np.linalg.eigvalsh(dense)
            assert w.min() > -1e-12

    def test_deficit_zero_at_zero_coupling(self):
        assert magnon.m_of_t_hamiltonian(40, 10.0, 0.0) \
            == pytest.approx(0.0, abs=1e-12)

    def test_deficit_continuous_at_short_time(self):
        small = magnon.m_of_t_hamiltonian(20, 1e-3, 0.3)
        assert 0 < small < 1e-3
        # linear onset: the first-order weight is a/4, as in one layer
        assert small == pytest.approx(0.3 / 4 * 1e-3, rel=0.01)

    def test_late_time_asymptote(self):
        m = magnon.m_of_t_hamiltonian(120, 60.0, 0.05)
        ratio = m / magnon.hamiltonian_prediction(60.0, 0.05)
        assert 0.9 < ratio < 1.1

    def test_series_grid(self):
        times = np.array([20.0, 30.0, 40.0])
        series = magnon.m_of_t_hamiltonian_series(60, times, 0.1)
        assert series.shape == (3,)
        assert np.all(np.diff(series) < 0)
        single = magnon.m_of_t_hamiltonian(60, 30.0, 0.1)
        assert series[1] == pytest.approx(single, rel=1e-8)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            magnon.m_of_t_hamiltonian_series(20, np.array([1.0, 2.0, 4.0]),
                                             0.1)
        with pytest.raises(ValueError):
            magnon.m_of_t_hamiltonian_series(20, np.array([-1.0, 1.0]), 0.1)
        with pytest.raises(ValueError):
            magnon.m_of_t_hamiltonian_series(20, np.array([]), 0.1)


class TestSpectralChecks:
    @given(m1=st.integers(0, 11), m2=st.integers(0, 11),
           a=st.floats(0.0, 1.0))
    @settings(max_examples=30, deadline=None)
    def test_antisymmetric_pairs_are_eigenstates(self, m1, m2, a):
        if (m1 - m2) % 12 == 0:
            with pytest.raises(ValueError):
                magnon.antisymmetric_sector_check(12, a, m1, m2)
            return
        res = magnon.antisymmetric_sector_check(12, a, m1, m2)
        assert res < 1e-10

    def test_symmetric_pairs_feel_the_interaction(self):
        res0 = magnon.symmetric_sector_residual(12, 0.0, 2, 5)
        assert res0 < 1e-10
        res = magnon.symmetric_sector_residual(12, 0.5, 2, 5)
        assert 0.01 < res < 1.0
        # residual scales roughly linearly with a
        res2 = magnon.symmetric_sector_residual(12, 0.25, 2, 5)
        assert res2 == pytest.approx(res / 2, rel=0.1)
