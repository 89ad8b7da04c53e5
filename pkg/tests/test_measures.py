import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from nbprocess import distributions as D
from nbprocess.checks import check_poisson_multinomial, empirical_pmf, total_variation
from nbprocess.measures import (draw_beta_process, draw_data, draw_gamma_process, draw_nb_process,
                                draw_prior, simulate_corpus, theta_prior)
from nbprocess.model import VARIANTS, Hyperparams, ModelSpec
from nbprocess.rng import rng_stream


class TestGammaProcess:
    def test_total_mass_moments(self):
        rng = rng_stream(1)
        g0, c = 2.0, 3.0
        tot = np.array([draw_gamma_process(g0, c, 20, 0.5, 4, rng).total_mass for _ in range(10_000)])
        se_mean = tot.std() / math.sqrt(tot.size)
        assert abs(tot.mean() - g0 / c) < 3 * se_mean
        mu4 = np.mean((tot - tot.mean()) ** 4)
        se_var = math.sqrt((mu4 - tot.var() ** 2) / tot.size)
        assert abs(tot.var() - g0 / c**2) < 3 * se_var

    def test_single_atom(self):
        rng = rng_stream(2)
        w = np.array([draw_gamma_process(3.0, 2.0, 1, 0.5, 3, rng).weights[0] for _ in range(20_000)])
        assert stats.kstest(w, stats.gamma(3.0, scale=0.5).cdf).pvalue > 1e-3

    def test_atoms_on_simplex(self):
        m = draw_gamma_process(1.0, 1.0, 7, 0.05, 30, rng_stream(3))
        assert_allclose(m.atoms.sum(axis=0), 1.0, atol=1e-12)
        assert np.all(m.weights > 0)

    def test_domain(self):
        with pytest.raises(D.DomainError):
            draw_gamma_process(0.0, 1.0, 5, 0.1, 3, rng_stream(0))


class TestBetaProcess:
    def test_weights_in_unit_interval(self):
        m = draw_beta_process(2.0, 1.0, 50, 0.1, 10, rng_stream(4), marked=True)
        assert np.all((m.weights > 0) & (m.weights < 1))
        assert m.marks.shape == (50,) and np.all(m.marks > 0)

    def test_expected_total(self):
        rng = rng_stream(5)
        tot = np.array([draw_beta_process(3.0, 2.0, 40, 0.1, 3, rng).total_mass for _ in range(5000)])
        assert abs(tot.mean() - 3.0) < 4 * tot.std() / math.sqrt(tot.size)

    def test_mass_must_fit_truncation(self):
        with pytest.raises(D.DomainError):
            draw_beta_process(10.0, 1.0, 5, 0.1, 3, rng_stream(0))


class TestNbProcess:
    def test_vanishing_p(self):
        rng = rng_stream(6)
        assert all(draw_nb_process(3.0, 1e-12, 0.5, 2, rng) == [] for _ in range(200))

    def test_atom_count_and_total(self):
        rng = rng_stream(7)
        n = 100_000
        k_plus = np.empty(n, dtype=int)
        total = np.empty(n, dtype=int)
        for i in range(n):
            draw = draw_nb_process(3.0, 0.5, 0.5, 2, rng)
            k_plus[i] = len(draw)
            total[i] = sum(c for _, c in draw)
        pois = stats.poisson.pmf(np.arange(31), 3 * math.log(2))
        assert total_variation(empirical_pmf(k_plus, 30), pois) < 0.01
        nb = np.exp(D.nb_log_pmf(np.arange(61), 3.0, 0.5))
        assert total_variation(empirical_pmf(total, 60), nb) < 0.01


class TestSimulation:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_conservation(self, variant):
        hp = Hyperparams(a0=2, b0=2, e0=10, f0=1, K=6, eta=0.1)
        sc = simulate_corpus(ModelSpec(variant, hp), V=20, J=15, rng=rng_stream(8), doc_length=30)
        m = sc.counts
        assert np.issubdtype(m.counts.dtype, np.integer) and np.all(m.counts > 0)
        np.testing.assert_array_equal(m.doc_lengths(), sc.truth.n_jk.sum(axis=1))
        np.testing.assert_array_equal(sc.truth.n_vk.sum(axis=0), sc.truth.n_k)
        assert sc.truth_json()["variant"] == variant

    def test_poisson_multinomial(self):
        assert check_poisson_multinomial(rng_stream(9)).passed

    def test_draw_data_modes_agree(self):
        # per-atom marginals of the two count constructions, same theta
        rng = rng_stream(10)
        st = draw_prior(ModelSpec("gamma-nb", Hyperparams(a0=2, b0=2, e0=6, f0=1, K=3)), 1, 4, rng)
        st.theta = np.array([[0.7, 2.0, 4.5]])
        pois = np.array([draw_data(st, rng)[1].n_jk[0] for _ in range(20_000)])
        mult = np.array([draw_data(st, rng, count_mode="multinomial")[1].n_jk[0] for _ in range(20_000)])
        for k in range(3):
            assert total_variation(empirical_pmf(pois[:, k], 40), empirical_pmf(mult[:, k], 40)) < 0.03

    def test_gamma_nb_variance_to_mean(self):
        rng = rng_stream(11)
        st = draw_prior(ModelSpec("gamma-nb", Hyperparams(a0=2, b0=2, e0=6, f0=1, K=4)), 1, 5, rng)
        st.r_atom = np.array([0.5, 1.0, 2.0, 4.0])
        st.p_group = np.array([0.6])
        n = np.array([rng.poisson(theta_prior(st, rng, None)[0]) for _ in range(100_000)])
        vmr = n.var(axis=0) / n.mean(axis=0)
        assert_allclose(vmr, 1 / (1 - 0.6), rtol=0.05)

    def test_dir_pfa_needs_lengths(self):
        st = draw_prior(ModelSpec("dir-pfa", Hyperparams(K=3)), 2, 4, rng_stream(12))
        with pytest.raises(ValueError):
            draw_data(st, rng_stream(12))
        m, out = draw_data(st, rng_stream(12), doc_lengths=[5, 7])
        np.testing.assert_array_equal(m.doc_lengths(), [5, 7])

    def test_ftm_zero_inflated_theta(self):
        hp = Hyperparams(K=8, bp_mass=2, e0=5, f0=1)
        st = draw_prior(ModelSpec("nb-ftm", hp), 30, 6, rng_stream(13))
        assert np.all(st.theta[~st.b] == 0)
        assert np.all(st.theta[st.b] > 0)
