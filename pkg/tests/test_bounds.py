import itertools
import math

import numpy as np
import pytest

from lpme.bounds import (
    BUMPS,
    BumpSumDensity,
    DensityPacking,
    PackingError,
    build_sign_packing,
    build_weighted_packing,
    bump_derivative,
    bump_eval,
    c_epsilon,
    covariance,
    fano_bound,
    info_bound_density,
    info_bound_multinomial,
    kl_pair_bound,
    lambda_max,
    lecam_bound,
    min_pairwise_l1,
    predict_rates,
    second_moment,
    sign_packing_target,
    slice_covariance,
)
from lpme.channels import rr_keep_probability
from lpme.core import RngStream, l2_distance_squared, simpson


def brute_min_l1(v):
    v = np.asarray(v, dtype=np.int64)
    return min(np.abs(v[i] - v[j]).sum() for i in range(len(v)) for j in range(i + 1, len(v)))


def fine_quad(f, a, b, pieces=64):
    edges = np.linspace(a, b, pieces + 1)
    return sum(simpson(f, lo, hi) for lo, hi in zip(edges[:-1], edges[1:]))


class TestBumps:
    @pytest.mark.parametrize("beta", [1, 2])
    def test_constants_by_quadrature(self, beta):
        bump = BUMPS[beta]
        assert fine_quad(lambda x: bump_eval(beta, x), 0, 0.5) == pytest.approx(bump.c_half, rel=1e-9)
        assert fine_quad(lambda x: bump_eval(beta, x) ** 2, 0, 1) == pytest.approx(bump.sq_norm, rel=1e-9)
        assert fine_quad(lambda x: bump_eval(beta, x), 0, 1) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("beta", [1, 2])
    def test_antisymmetric_and_vanishing(self, beta):
        x = np.linspace(0, 0.5, 101)
        np.testing.assert_allclose(bump_eval(beta, x + 0.5), -bump_eval(beta, x), atol=1e-15)
        assert bump_eval(beta, 0.0) == 0.0 and bump_eval(beta, 1.0) == 0.0

    def test_derivatives_match_finite_differences(self):
        # stay clear of the kink at 1/2 where g_2' jumps sign
        x = np.r_[np.linspace(0.01, 0.49, 49), np.linspace(0.51, 0.99, 49)]
        h = 1e-6
        fd1 = (bump_eval(2, x + h) - bump_eval(2, x - h)) / (2 * h)
        np.testing.assert_allclose(bump_derivative(2, x, 1), fd1, atol=1e-8)
        fd2 = (bump_eval(2, x + 1e-4) - 2 * bump_eval(2, x) + bump_eval(2, x - 1e-4)) / 1e-8
        np.testing.assert_allclose(bump_derivative(2, x, 2), fd2, atol=1e-5)
        assert np.max(np.abs(bump_derivative(2, np.linspace(0, 1, 1001), 2))) <= 1.0 + 1e-12
        assert np.max(np.abs(bump_derivative(1, x, 1))) == 1.0

    def test_rejects(self):
        with pytest.raises(ValueError):
            bump_eval(3, 0.2)
        with pytest.raises(ValueError):
            bump_eval(1, 1.5)


class TestBumpSumDensity:
    @pytest.mark.parametrize("beta, k", [(1, 4), (2, 8)])
    def test_is_density(self, beta, k):
        nu = RngStream(beta).signs(k)
        f = BumpSumDensity(nu, beta, k)
        assert fine_quad(f, 0, 1, 4 * k) == pytest.approx(1.0, abs=1e-13)
        assert f(np.linspace(0, 1, 10_001)).min() > 0
        assert fine_quad(lambda x: f(x) ** 2, 0, 1, 4 * k) == pytest.approx(f.sq_norm(), abs=1e-13)

    def test_coefficients(self):
        f = BumpSumDensity(np.array([1, -1, 1, 1]), 1, 4)
        c = f.coefficients(9)
        assert c[0] == pytest.approx(1.0, abs=1e-13)
        # Parseval: the first coefficients never exceed the total energy
        assert np.sum(c**2) <= f.sq_norm() + 1e-12

    def test_pair_distance_exact(self):
        k, beta = 16, 2
        dp = DensityPacking(beta, k, build_sign_packing(k, RngStream(0)))
        for a, b in [(0, 1), (0, 2), (3, 7)]:
            assert dp.pair_distance_sq(a, b) == pytest.approx(l2_distance_squared(dp.member(a), dp.member(b)), rel=1e-9)
        ham = min(np.sum(dp.packing.vectors[a] != dp.packing.vectors[b]) for a, b in itertools.combinations(range(len(dp.packing)), 2))
        assert dp.min_distance_sq() == pytest.approx(4 * ham * k ** (-5) * BUMPS[2].sq_norm)


class TestWeightedPacking:
    def test_d64_s8_reverified(self):
        p = build_weighted_packing(64, 8, RngStream(0))
        v = p.vectors
        assert np.all(v.sum(axis=1) == 8)
        assert len(np.unique(v, axis=0)) == len(v)
        sep = brute_min_l1(v[:400]) if len(v) > 400 else brute_min_l1(v)
        assert sep >= p.min_l1_separation >= 2
        assert p.min_l1_separation == min_pairwise_l1(v)
        assert lambda_max(covariance(v)) <= 4 * 8 / 64 + 1e-12

    @pytest.mark.parametrize("d, s", [(10, 1), (10, 2), (12, 3), (8, 4)])
    def test_full_slice_covariance_closed_form(self, d, s):
        p = build_weighted_packing(d, s, RngStream(0))
        assert len(p) == math.comb(d, s)
        np.testing.assert_allclose(covariance(p.vectors), slice_covariance(d, s), atol=1e-12)

    @pytest.mark.parametrize("d, s", [(24, 6), (24, 7), (20, 15), (16, 12)])
    def test_reductions_certify(self, d, s):
        p = build_weighted_packing(d, s, RngStream(1))
        assert np.all(p.vectors.sum(axis=1) == s)
        assert min_pairwise_l1(p.vectors) >= max(s // 4, 1)

    def test_slice_too_large(self):
        with pytest.raises(PackingError):
            build_weighted_packing(100, 4, RngStream(0), k_max=1000)

    def test_min_l1_blockwise_matches_brute(self):
        v = (np.random.default_rng(0).uniform(size=(60, 12)) < 0.3).astype(np.int8)
        v = np.unique(v, axis=0)
        assert min_pairwise_l1(v, chunk=7) == brute_min_l1(v)


class TestSignPacking:
    @pytest.mark.parametrize("k", [16, 32])
    def test_reverified(self, k):
        p = build_sign_packing(k, RngStream(k))
        v = p.vectors.astype(np.int64)
        assert len(p) == sign_packing_target(k)
        assert brute_min_l1(v) >= k / 2
        np.testing.assert_allclose(v.mean(axis=0), 0.0, atol=1e-12)
        assert lambda_max(second_moment(v)) <= 4.0

    def test_target(self):
        assert sign_packing_target(16) == 256
        assert sign_packing_target(256) == 2**12
        assert sign_packing_target(512) == 2**12

    def test_rejects_tiny(self):
        with pytest.raises(ValueError):
            build_sign_packing(1, RngStream(0))


class TestTestingBounds:
    def test_lecam(self):
        assert lecam_bound(2.0, 0.0) == 1.0
        assert lecam_bound(2.0, 1.0) == 0.0
        with pytest.raises(ValueError):
            lecam_bound(1.0, 1.5)

    def test_fano(self):
        assert fano_bound(1.0, 0.0, 2 * math.log(2)) == pytest.approx(0.5)
        assert fano_bound(1.0, 10.0, 2.0) == 0.0
        with pytest.raises(ValueError):
            fano_bound(1.0, 0.0, math.log(2))

    @pytest.mark.parametrize("eps", [0.1, 0.5, 1.0])
    def test_kl_bound_dominates_rr_exact(self, eps):
        # exact symmetrized KL between randomized-response marginals on d = 2
        q = rr_keep_probability(eps)
        outputs = list(itertools.product((0, 1), repeat=2))

        def channel(x, z):
            e = np.eye(2)[x]
            return np.prod(np.where(np.array(z) == e, q, 1 - q))

        for p1, p2 in [(0.5, 0.6), (0.1, 0.9), (0.3, 0.35)]:
            m1 = np.array([p1 * channel(0, z) + (1 - p1) * channel(1, z) for z in outputs])
            m2 = np.array([p2 * channel(0, z) + (1 - p2) * channel(1, z) for z in outputs])
            skl = np.sum((m1 - m2) * np.log(m1 / m2))
            assert skl <= kl_pair_bound(eps, [abs(p1 - p2)]) + 1e-15

    def test_c_epsilon(self):
        assert c_epsilon(0.0) == 4.0
        assert 0 < c_epsilon(0.25) < math.inf


class TestInfoBounds:
    def test_rejects_large_epsilon(self):
        p = build_sign_packing(8, RngStream(0))
        with pytest.raises(ValueError):
            info_bound_density(100, 0.3, 8, 1, p, BUMPS[1].c_half)
        w = build_weighted_packing(8, 2, RngStream(0))
        with pytest.raises(ValueError):
            info_bound_multinomial(100, 0.5, 0.1, 2, w)

    def test_multinomial_linear_in_n_and_closed_form(self):
        w = build_weighted_packing(8, 2, RngStream(0))
        a = info_bound_multinomial(100, 0.2, 0.1, 2, w)
        assert info_bound_multinomial(200, 0.2, 0.1, 2, w) == pytest.approx(2 * a)
        lam = lambda_max(slice_covariance(8, 2))
        expected = c_epsilon(0.2) * 100 * (0.1 / 2) ** 2 * lam * 8 * (2 * math.sinh(0.2)) ** 2 / 4
        assert a == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("beta", [1, 2])
    def test_density_decay_exponent(self, beta):
        # from k = 64 the packing's lambda_max sits on its plateau, leaving only the k power
        vals = {}
        for k in (64, 128, 256):
            p = build_sign_packing(k, RngStream(k))
            vals[k] = info_bound_density(1000, 0.2, k, beta, p, BUMPS[beta].c_half)
        for k in (64, 128):
            assert vals[2 * k] / vals[k] / 2 ** (-(2 * beta + 1)) == pytest.approx(1.0, rel=0.1)


class TestPredictRates:
    def test_multinomial(self):
        pred = predict_rates("multinomial", 1000, 1.0, d=10)
        assert pred.private_upper == pytest.approx(0.01)
        assert pred.private_lower == pytest.approx(0.01)
        assert pred.classical == pytest.approx(0.9 / 1000)
        assert predict_rates("multinomial", 1, 0.1, d=10).private_upper == 1.0

    def test_density(self):
        pred = predict_rates("density", 10_000, 1.0, beta=1)
        assert pred.private_lower == pytest.approx(0.01)
        assert pred.classical == pytest.approx(10_000 ** (-2 / 3))
        assert pred.naive == pytest.approx(10_000 ** (-0.4))
        assert pred.rates["private"].exponent == -0.5

    def test_rejects(self):
        with pytest.raises(ValueError):
            predict_rates("multinomial", 10, 1.0)
        with pytest.raises(ValueError):
            predict_rates("density", 10, 0.0, beta=1)
