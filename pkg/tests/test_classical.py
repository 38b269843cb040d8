import math
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from goldrotor.classical import (
    GOLDEN_PARAMS,
    TWO_PI,
    ClassicalState,
    ModelParams,
    diffusion_measure_exact,
    diffusion_measure_montecarlo,
    h_n_exact,
    h_tilde_prime_distribution,
    h_tilde_prime_n,
    h_tilde_prime_steps,
    hqn_max_slope,
    iterate,
    recipe_indices,
    search_diffusion_step,
    step,
    sup_abs_hqn,
    tent,
    tent_slope,
    trinomial_central_masses,
    trinomial_masses,
)
from goldrotor.goldenmean import fibonacci_q, golden_fraction

FRAC_R = 0.6180339887498949
P = GOLDEN_PARAMS


class TestModelParams:
    def test_golden_lambda(self):
        assert P.golden
        assert P.lam == pytest.approx(TWO_PI * FRAC_R, abs=1e-15)

    def test_rational(self):
        p = ModelParams.rational(1, 3)
        assert not p.golden
        assert p.lam == pytest.approx(TWO_PI / 3)
        assert np.allclose(p.turn_fractions(4), [0, 1 / 3, 2 / 3, 0])
        assert p.describe() == "rational:1/3"

    @pytest.mark.parametrize("kw", [dict(K=0.0), dict(hbar=0.0), dict(hbar=-1.0), dict(K=math.inf)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)


class TestTent:
    @pytest.mark.parametrize("theta, value", [(math.pi / 2, 0.0), (0.0, -math.pi / 2), (1.5 * math.pi, 0.0), (math.pi, math.pi / 2)])
    def test_values(self, theta, value):
        assert tent(theta) == pytest.approx(value, abs=1e-15)

    @pytest.mark.parametrize("theta, slope", [(math.pi / 2, 1), (1.5 * math.pi, -1), (math.pi, 1), (0.0, 1)])
    def test_slopes(self, theta, slope):
        assert tent_slope(theta) == slope

    def test_mean_zero_and_continuous(self):
        x = (np.arange(100000) + 0.5) / 100000 * TWO_PI
        assert abs(tent(x).mean()) < 1e-12
        assert tent(TWO_PI - 1e-12) == pytest.approx(tent(0.0), abs=1e-11)


class TestStep:
    def test_golden_step(self):
        s = step(ClassicalState(math.pi / 2, 0.0), P)
        assert s.theta == pytest.approx(5.4541, abs=1e-4)
        assert s.theta == pytest.approx(math.pi / 2 + TWO_PI * FRAC_R, abs=1e-12)
        assert s.P == -1.0

    def test_pure_kick_lower_half(self):
        s = step(ClassicalState(1.5 * math.pi, 2.0), ModelParams.rational(0, 1))
        assert s.theta == pytest.approx(1.5 * math.pi)
        assert s.P == 3.0

    def test_negative_kick(self):
        s = step(ClassicalState(math.pi / 2, 0.0), ModelParams.golden_mean(K=-1.0))
        assert s.theta == pytest.approx(5.4541, abs=1e-4)
        assert s.P == 1.0

    def test_theta_normalised(self):
        s = ClassicalState(-1.0, 0.0)
        assert 0 <= s.theta < TWO_PI


class TestHTildePrime:
    def test_single_term(self):
        assert h_tilde_prime_n(math.pi / 2, 1, P) == 1

    def test_two_terms(self):
        assert h_tilde_prime_n(math.pi / 2, 2, P) == 0

    def test_iterate_matches_steps(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            theta, n = rng.random() * TWO_PI, int(rng.integers(1, 501))
            s = ClassicalState(theta, 0.0)
            for _ in range(n):
                s = step(s, P)
            closed = iterate(ClassicalState(theta, 0.0), n, P)
            assert s.P == closed.P == -h_tilde_prime_n(theta, n, P)
            d = abs(s.theta - closed.theta)
            assert min(d, TWO_PI - d) < 1e-9

    def test_iterate_consistency_ensemble(self):
        # 10^4 random (theta, n <= 500), composed in lock-step as arrays
        rng = np.random.default_rng(11)
        thetas = rng.random(10_000) * TWO_PI
        ns = rng.integers(1, 501, size=10_000)
        th = thetas.copy()
        mom = np.zeros_like(th)
        final_P = np.empty_like(th)
        final_th = np.empty_like(th)
        for k in range(1, 501):
            mom = mom - P.K * tent_slope(th)
            th = np.mod(th + P.lam, TWO_PI)
            hit = ns == k
            final_P[hit], final_th[hit] = mom[hit], th[hit]
        for i in range(0, 10_000, 1):
            n = int(ns[i])
            assert final_P[i] == -h_tilde_prime_n(thetas[i], n, P)
        closed_th = np.mod(thetas + TWO_PI * np.array([golden_fraction(int(n)) for n in ns]), TWO_PI)
        d = np.abs(final_th - closed_th)
        assert np.all(np.minimum(d, TWO_PI - d) < 1e-9)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, TWO_PI, exclude_max=True), st.integers(1, 3000))
    def test_parity_and_range(self, theta, n):
        v = h_tilde_prime_n(theta, n, P)
        assert (v - n) % 2 == 0
        assert -n <= v <= n

    def test_step_function_matches_pointwise(self):
        rng = np.random.default_rng(4)
        for n in (1, 2, 7, 100, 1597):
            sf = h_tilde_prime_steps(n, P)
            assert len(sf) <= 2 * n
            th = rng.random(300) * TWO_PI
            assert np.array_equal(sf(th).astype(int), h_tilde_prime_n(th, n, P))

    def test_array_input(self):
        th = np.array([math.pi / 2, 1.5 * math.pi])
        assert list(h_tilde_prime_n(th, 1, P)) == [1, -1]


def brute_Hn(theta, n, params):
    return sum(tent(theta - k * params.lam) for k in range(1, n + 1))


class TestHnExact:
    def test_n1_shifted_tent(self):
        pl = h_n_exact(1, P)
        lam = P.lam
        assert sorted(pl.breakpoints) == pytest.approx(sorted([lam % TWO_PI, (lam + math.pi) % TWO_PI]))
        assert sorted(pl.slopes.tolist()) == [-1, 1]

    @pytest.mark.parametrize("n", [1, 2, 5, 13, 100, 987])
    def test_matches_brute_force(self, n):
        pl = h_n_exact(n, P)
        th = np.random.default_rng(n).random(200) * TWO_PI
        assert np.max(np.abs(pl(th) - brute_Hn(th, n, P))) < 1e-10
        assert len(pl) <= 2 * n
        assert np.all(np.abs(pl.slopes) <= n)

    @pytest.mark.parametrize("n", [1, 2, 3, 13, 144, 1000, 2000])
    def test_mean_zero(self, n):
        assert abs(h_n_exact(n, P).integral()) < 1e-10

    def test_continuity_across_wrap(self):
        pl = h_n_exact(21, P)
        assert pl(TWO_PI - 1e-13) == pytest.approx(pl(0.0), abs=1e-10)

    def test_rational_cancellation(self):
        # lambda = pi: H(theta - pi) + H(theta - 2 pi) = 0 identically
        pl = h_n_exact(2, ModelParams.rational(1, 2))
        assert pl.sup_abs() == 0.0
        pl3 = h_n_exact(3, ModelParams.rational(1, 3))
        th = np.linspace(0, TWO_PI, 50, endpoint=False)
        assert np.allclose(pl3(th), brute_Hn(th, 3, ModelParams.rational(1, 3)), atol=1e-12)

    def test_sup_q1_exact(self):
        # two tents shifted by lambda and 2 lambda; brute force maximum on a fine grid
        th = np.linspace(0, TWO_PI, 2_000_001)
        dense = np.max(np.abs(brute_Hn(th, 2, P)))
        assert sup_abs_hqn(1) == pytest.approx(dense, abs=1e-5)
        assert sup_abs_hqn(1) >= dense - 1e-12

    def test_slope_bound(self):
        for n in range(1, 15):
            assert hqn_max_slope(n) <= 3

    def test_decay(self):
        sups = [sup_abs_hqn(n) for n in range(1, 18)]
        ratios = [b / a for a, b in zip(sups, sups[1:])]
        assert all(r < 0.9 for r in ratios[3:])
        C = lambda upto: max(s * 1.5**n / n for n, s in enumerate(sups[:upto], start=1))
        assert C(16) <= 1.2 * C(14)


class TestDiffusionMeasure:
    def test_trivial_cases(self):
        assert diffusion_measure_exact(1, 2, P) == pytest.approx(TWO_PI)
        assert diffusion_measure_exact(1, 1, P) == 0.0

    def test_fine_grid_oracle(self):
        G = 400_000
        th = (np.arange(G) + 0.5) / G * TWO_PI
        for n in (2, 5, 13, 40):
            v = np.zeros(G)
            for k in range(n):
                v += tent_slope(th + k * P.lam)
            for N in (1, 2, 3):
                grid_measure = TWO_PI * np.mean(np.abs(v) < N)
                # each breakpoint can misclassify at most one grid cell
                assert diffusion_measure_exact(n, N, P) == pytest.approx(grid_measure, abs=2 * n * TWO_PI / G + 1e-12)

    def test_montecarlo_agreement(self):
        rng = np.random.default_rng(2024)
        for i in range(20):
            n = int(rng.integers(1, 2001))
            N = float(rng.integers(1, 11))
            exact = diffusion_measure_exact(n, N, P)
            mc, se = diffusion_measure_montecarlo(n, N, P, samples=10**6, seed=i)
            if se == 0:
                assert mc == pytest.approx(exact, abs=1e-12)
            else:
                assert abs(mc - exact) <= 3 * se

    def test_distribution_sums_to_one(self):
        for n in (1, 10, 1000):
            dist = h_tilde_prime_distribution(n, P)
            assert math.fsum(dist.values()) == pytest.approx(1.0, abs=1e-12)
            assert all((v - n) % 2 == 0 for v in dist)

    def test_invalid_N(self):
        with pytest.raises(ValueError):
            diffusion_measure_exact(3, 0, P)


class TestSearch:
    def test_recipe_indices(self):
        assert recipe_indices(100_000) == [1, 7, 13, 19]
        for k in recipe_indices(100_000):
            assert fibonacci_q(k) % 2 == 0

    def test_finds_first_subset_sum(self):
        indices = [1, 4, 7]
        eps = 4.0
        res = search_diffusion_step(1.0, eps, P, indices=indices, n_max=1000)
        sums = sorted({2, 8, 34, 10, 36, 42, 44})
        first = next((n for n in sums if diffusion_measure_exact(n, 1.0, P) < eps), None)
        assert res.found == first
        assert [n for n, _ in res.tried] == sums[: len(res.tried)]

    def test_reports_best_when_unreached(self):
        res = search_diffusion_step(5.0, 1e-9, P, indices=[1, 4], n_max=100)
        assert res.found is None
        assert res.best_measure == min(m for _, m in res.tried)


def trinomial_oracle(n, delta, k):
    # coefficient sum over i - j = k of the trinomial expansion, exact
    d = Fraction(delta)
    total = Fraction(0)
    for i in range(n + 1):
        j = i - k
        if 0 <= j and i + j <= n:
            total += comb(n, i) * comb(n - i, j) * d ** (i + j) * (1 - 2 * d) ** (n - i - j)
    return total


class TestTrinomial:
    def test_one_step(self):
        t = trinomial_masses(1, 0.25)
        assert t.as_dict() == {-1: 0.25, 0: 0.5, 1: 0.25}

    def test_two_steps_center(self):
        assert trinomial_masses(2, 0.25)[0] == pytest.approx(0.375, abs=1e-15)

    @pytest.mark.parametrize("n", [0, 1, 3, 8, 12])
    @pytest.mark.parametrize("delta", [0.1, 0.25, 0.4])
    def test_against_expansion(self, n, delta):
        t = trinomial_masses(n, delta)
        for k in range(-n - 1, n + 2):
            assert t[k] == pytest.approx(float(trinomial_oracle(n, delta, k)), abs=1e-14)

    def test_sum_and_symmetry_to_5000(self):
        t = trinomial_masses(5000, 0.25)
        assert abs(math.fsum(t.masses) - 1.0) < 1e-12
        assert np.allclose(t.masses, t.masses[::-1], atol=1e-15)

    def test_central_mass_decays(self):
        c = trinomial_central_masses(1000, 0.25)
        assert np.all(np.diff(c[2:]) < 0)
        assert c[1000] < 0.05
        assert c[1000] == pytest.approx(trinomial_masses(1000, 0.25)[0], rel=1e-12)

    @pytest.mark.parametrize("delta", [0.0, 0.5, -0.1, 0.7])
    def test_invalid_delta(self, delta):
        with pytest.raises(ValueError):
            trinomial_masses(3, delta)
