import math

import numpy as np
import pytest

from hicrp import DomainError
from hicrp.interaction import isomorphic
from hicrp.models import (HicrpParams, NuMeasure, phi_nu, sample_hicrp, sample_hollywood,
                          sample_icrp, sample_sicrp)


class TestNu:
    def test_phi(self):
        assert phi_nu(NuMeasure({2: 1}), 3) == pytest.approx(9)
        assert phi_nu(NuMeasure({1: 0.5, 3: 0.25}), 2) == pytest.approx(3)
        assert phi_nu(NuMeasure({2: 1}), 0) == 0

    def test_phi_negative(self):
        with pytest.raises(DomainError):
            phi_nu(NuMeasure({2: 1}), -1)

    def test_parse(self):
        assert NuMeasure.parse("1:500, 2:7000").weights == {1: 500.0, 2: 7000.0}

    @pytest.mark.parametrize("w", [{0: 1}, {1: -1}, {1: 0}, {}])
    def test_invalid(self, w):
        with pytest.raises(DomainError):
            NuMeasure(w)


class TestHollywood:
    def test_pairs_consecutive(self):
        g = sample_hollywood(0.5, 1.0, {2: 1.0}, 50, 0)
        assert len(g) == 50 and all(len(it) == 2 for it in g.interactions)

    def test_alpha_one_disjoint(self):
        g = sample_hollywood(1.0, 0.0, {3: 1.0}, 10, 0)
        assert g.n_labels == 30

    def test_single(self):
        g = sample_hollywood(0.5, 1.0, {1: 1.0}, 1, 0)
        assert g.interactions == ((0,),)

    def test_bad_pmf(self):
        with pytest.raises(DomainError):
            sample_hollywood(0.5, 1.0, {1: 0.5, 2: 0.4}, 3, 0)

    def test_icrp_hook(self):
        g = sample_icrp(0.5, 1.0, {2: 1.0}, lambda rng: 7, 0)
        assert len(g) == 7
        assert len(sample_icrp(0.5, 1.0, {2: 1.0}, lambda rng: 0, 0)) == 0


class TestSicrp:
    def test_theta_positive(self):
        with pytest.raises(DomainError):
            sample_sicrp(0.5, 0.0, NuMeasure({2: 1}), 0)

    def test_mean_count(self):
        rng = np.random.default_rng(0)
        theta = 2.0
        # N | t ~ Poisson(t^2) with t ~ Gamma(theta), so E[N] = theta (theta + 1)
        ns = np.array([sample_sicrp(0.5, theta, NuMeasure({2: 1}), rng).n
                       for _ in range(20_000)])
        se = ns.std() / math.sqrt(ns.size)
        assert abs(ns.mean() - theta * (theta + 1)) < 3 * se

    def test_lengths(self):
        d = sample_sicrp(0.5, 3.0, NuMeasure({2: 5}), 1)
        assert set(d.lengths.tolist()) <= {2}

    def test_scale_invariant_length_law(self):
        nu = NuMeasure({1: 2.0, 3: 1.0})
        t = 1.7
        a = np.exp(nu.log_terms(t) - np.logaddexp.reduce(nu.log_terms(t)))
        big = nu.scaled(10.0)
        b = np.exp(big.log_terms(t) - np.logaddexp.reduce(big.log_terms(t)))
        assert np.allclose(a, b)

    def test_empty_draw(self):
        d = sample_sicrp(0.5, 1.0, NuMeasure({2: 1e-9}), 0)
        assert d.n == 0 and len(d.iset) == 0

    def test_ewens_label_count(self):
        rng = np.random.default_rng(3)
        theta, m = 2.0, 30
        ks = [sample_hollywood(0.0, theta, {1: 1.0}, m, rng).n_labels for _ in range(4000)]
        expect = sum(theta / (theta + i) for i in range(m))
        assert abs(np.mean(ks) - expect) < 3 * np.std(ks) / math.sqrt(len(ks))

    def test_expected_counts_mode(self):
        rng = np.random.default_rng(4)
        ns = [sample_sicrp(0.5, 5.0, NuMeasure({1: 30, 2: 70}), rng, expected_counts=True).n
              for _ in range(2000)]
        assert abs(np.mean(ns) - 100) < 3 * math.sqrt(100 / 2000)


class TestHicrp:
    def test_invalid(self):
        nu = NuMeasure({2: 10})
        with pytest.raises(DomainError):
            HicrpParams((0.6, 0.2), 1.0, (0, 2), nu)
        with pytest.raises(DomainError):
            HicrpParams((0.2, 0.6), 1.0, (1, 2), nu)
        with pytest.raises(DomainError):
            HicrpParams((0.2, 0.6), -0.5, (0, 2), nu)

    def test_one_level(self):
        out = sample_hicrp(HicrpParams((0.5,), 2.0, (0,), NuMeasure({2: 20}), True), 0)
        assert len(out.levels) == 1 and out.parent_maps == []

    def test_identity_path(self):
        p = HicrpParams((0.5, 0.5), 2.0, (0, 0), NuMeasure({2: 30}), True)
        out = sample_hicrp(p, 1)
        assert isomorphic(out.levels[0], out.levels[1])

    def test_levels_share_interaction_count(self):
        p = HicrpParams((0.1, 0.3, 0.6), 2.0, (0, 1, 3), NuMeasure({2: 40, 3: 10}), True)
        out = sample_hicrp(p, 2)
        assert len({len(lv) for lv in out.levels}) == 1
        counts = [lv.n_labels for lv in out.levels]
        assert counts == sorted(counts)
        assert len(out.parent_maps) == 2

    def test_coarse_marginal_label_count(self):
        # coarse level of a two-level draw versus a direct SICRP(beta, theta) draw
        rng = np.random.default_rng(6)
        nu = NuMeasure({2: 40})
        p = HicrpParams((0.2, 0.6), 1.5, (0, 2), nu, True)
        a, b = [], []
        for _ in range(1500):
            out = sample_hicrp(p, rng)
            a.append(out.levels[0].n_labels / max(1, out.levels[0].n_slots) ** 0.2)
            d = sample_sicrp(0.2, 1.5, nu, rng, expected_counts=True)
            b.append(d.iset.n_labels / max(1, d.iset.n_slots) ** 0.2)
        from scipy.stats import ks_2samp
        assert ks_2samp(a, b).pvalue > 0.001
