import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracsphere.sphere import (HarmonicCoeffs, SphericalGrid, SphericalPoint,
                               analyze, discrete_laplace_beltrami, eval_at_points,
                               eval_ylm, heat_angle_pdf, legendre_q, mu_ell,
                               sample_sphere_bm, synthesize)


class TestSphericalPoint:
    def test_ranges_enforced(self):
        with pytest.raises(ValueError):
            SphericalPoint(-0.1, 0.0)
        with pytest.raises(ValueError):
            SphericalPoint(1.0, 7.0)

    def test_vector_round_trip(self):
        p = SphericalPoint(1.1, 2.2)
        q = SphericalPoint.from_vector(p.vector())
        assert q.theta == pytest.approx(p.theta, abs=1e-12)
        assert q.phi == pytest.approx(p.phi, abs=1e-12)


class TestGrid:
    def test_weights_sum_to_sphere_area(self):
        for lmax in (4, 16, 64):
            g = SphericalGrid.for_lmax(lmax)
            assert g.total_weight == pytest.approx(4.0 * math.pi, abs=1e-12)

    def test_exactness_condition(self):
        g = SphericalGrid(10, 21)
        assert g.supports_lmax(9)
        assert not g.supports_lmax(10)


class TestLegendre:
    def test_low_degrees(self):
        assert legendre_q(0, 0, 0.3) == 1.0
        assert legendre_q(1, 0, 0.42) == pytest.approx(0.42, rel=1e-15)

    def test_rodrigues_oracle(self):
        # symbolic differentiation of the Rodrigues formula at (2, 1, 0.5)
        assert legendre_q(2, 1, 0.5) == pytest.approx(-1.299038105676658,
                                                      abs=1e-12)

    def test_negative_order_ratio(self):
        l, m, x = 7, 3, 0.31
        ratio = math.factorial(l - m) / math.factorial(l + m)
        want = (-1.0) ** m * ratio * legendre_q(l, m, x)
        assert legendre_q(l, -m, x) == pytest.approx(want, rel=1e-12)

    def test_scipy_cross_check(self):
        from scipy.special import lpmv
        for (l, m, x) in [(5, 2, -0.4), (10, 7, 0.9), (3, 0, 0.1)]:
            assert legendre_q(l, m, x) == pytest.approx(float(lpmv(m, l, x)),
                                                        rel=1e-10)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            legendre_q(2, 3, 0.5)
        with pytest.raises(ValueError):
            legendre_q(2, 1, 1.5)


class TestYlm:
    def test_constant_mode(self):
        p = SphericalPoint(0.77, 3.21)
        assert eval_ylm(0, 0, p) == pytest.approx(1.0 / math.sqrt(4 * math.pi))

    def test_north_pole_values(self):
        pole = SphericalPoint(0.0, 0.0)
        for l in (1, 3, 6):
            assert eval_ylm(l, 0, pole).real == pytest.approx(
                math.sqrt((2 * l + 1) / (4 * math.pi)), rel=1e-13)
            for m in (1, -2):
                if abs(m) <= l:
                    assert abs(eval_ylm(l, m, pole)) < 1e-15

    def test_conjugation_symmetry(self):
        p = SphericalPoint(1.0, 2.0)
        for (l, m) in [(3, 1), (5, 4)]:
            lhs = eval_ylm(l, -m, p)
            rhs = (-1.0) ** m * np.conj(eval_ylm(l, m, p))
            assert lhs == pytest.approx(rhs, rel=1e-12)


class TestAnalysisSynthesis:
    def test_orthonormality_round_trip(self):
        lmax = 20
        grid = SphericalGrid.for_lmax(lmax)
        worst = 0.0
        for (l0, m0) in [(0, 0), (1, 1), (7, -3), (20, 0), (20, 20), (13, -13)]:
            c = HarmonicCoeffs(lmax)
            c.set(l0, m0, 1.0)
            back = analyze(synthesize(c, grid), lmax, grid)
            delta = back.a.copy()
            delta[l0, lmax + m0] -= 1.0
            worst = max(worst, float(np.abs(delta).max()))
        assert worst < 1e-10

    def test_constant_field(self):
        lmax = 6
        grid = SphericalGrid.for_lmax(lmax)
        values = np.full((grid.n_theta, grid.n_phi), 2.5)
        c = analyze(values, lmax, grid)
        assert c.get(0, 0) == pytest.approx(2.5 * math.sqrt(4 * math.pi),
                                            rel=1e-13)
        rest = c.a.copy()
        rest[0, lmax] = 0.0
        assert np.abs(rest).max() < 1e-10

    def test_zero_and_constant_synthesis(self):
        lmax = 5
        grid = SphericalGrid.for_lmax(lmax)
        zero = synthesize(HarmonicCoeffs(lmax, real_field=True), grid)
        assert np.abs(zero).max() == 0.0
        c = HarmonicCoeffs(lmax, real_field=True)
        c.set(0, 0, math.sqrt(4.0 * math.pi))
        ones = synthesize(c, grid)
        assert np.allclose(ones, 1.0, atol=1e-13)

    def test_cos_theta_round_trip(self):
        lmax = 8
        grid = SphericalGrid.for_lmax(lmax)
        values = np.broadcast_to(grid.x[:, None],
                                 (grid.n_theta, grid.n_phi)).copy()
        back = synthesize(analyze(values, lmax, grid), grid)
        assert np.abs(back - values).max() < 1e-10

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 10 ** 6))
    def test_random_band_limited_round_trip(self, seed):
        lmax = 12
        grid = SphericalGrid.for_lmax(lmax)
        rng = np.random.default_rng(seed)
        c = HarmonicCoeffs(lmax)
        for l in range(lmax + 1):
            for m in range(-l, l + 1):
                c.set(l, m, complex(rng.standard_normal(), rng.standard_normal()))
        back = analyze(synthesize(c, grid), lmax, grid)
        assert np.abs(back.a - c.a).max() < 1e-10

    def test_undersized_grid_rejected(self):
        grid = SphericalGrid(6, 11)
        values = np.zeros((6, 11))
        with pytest.raises(ValueError):
            analyze(values, 8, grid)

    def test_reality_gives_real_output(self):
        from fracsphere.fields import IsotropicSpectrum, sample_gaussian_field
        c = sample_gaussian_field(IsotropicSpectrum.power_law(1.0, 3.0), 8, 0)
        grid = SphericalGrid.for_lmax(8)
        f = synthesize(c, grid)
        assert f.dtype == np.float64

    def test_eval_at_points_matches_grid(self):
        lmax = 9
        grid = SphericalGrid.for_lmax(lmax)
        rng = np.random.default_rng(1)
        c = HarmonicCoeffs(lmax)
        for l in range(lmax + 1):
            for m in range(-l, l + 1):
                c.set(l, m, complex(rng.standard_normal(), rng.standard_normal()))
        f = synthesize(c, grid)
        th = grid.thetas[[2, 5]]
        ph = grid.phis[[3, 9]]
        vals = eval_at_points(c, th, ph)
        assert vals[0] == pytest.approx(f[2, 3], rel=1e-12)
        assert vals[1] == pytest.approx(f[5, 9], rel=1e-12)


class TestCoeffs:
    def test_reality_violation_detects(self):
        c = HarmonicCoeffs(3)
        c.set(2, 1, 1.0 + 1.0j)
        assert c.reality_violation() > 0.5
        c.set(2, -1, -(1.0 - 1.0j))
        assert c.reality_violation() < 1e-15

    def test_sobolev_diagnostic_finite(self):
        c = HarmonicCoeffs(5)
        c.set(5, 0, 2.0)
        want = (2 * 5 + 1) ** 3 * 4.0
        assert c.sobolev_diagnostic(1.5) == pytest.approx(want)

    def test_out_of_range(self):
        c = HarmonicCoeffs(3)
        with pytest.raises(ValueError):
            c.get(4, 0)
        with pytest.raises(ValueError):
            c.set(2, 3, 1.0)


class TestBrownianMotion:
    def test_heat_kernel_mass(self):
        # integrate the angle marginal exactly in x = cos(gamma)
        for t in (0.05, 0.4, 3.0):
            nodes, w = np.polynomial.legendre.leggauss(400)
            gam = np.arccos(nodes)
            mass = float(np.sum(heat_angle_pdf(gam, t) / np.sin(gam) * w))
            assert mass == pytest.approx(1.0, abs=1e-8)

    def test_mode_damping(self):
        # E[Y_lm(x + B_t)] = exp(-t mu_l) Y_lm(x)
        rng = np.random.default_rng(3)
        x = SphericalPoint(0.9, 2.0)
        t = 0.25
        n = 30_000
        from fracsphere.sphere import bm_displacements
        th, ph = bm_displacements(x, np.full(n, t), rng)
        for (l, m) in [(1, 0), (2, 1)]:
            c = HarmonicCoeffs(l)
            c.set(l, m, 1.0)
            vals = eval_at_points(c, th, ph)
            want = math.exp(-t * float(mu_ell(l))) * eval_ylm(l, m, x)
            for comp, wc in ((vals.real, want.real), (vals.imag, want.imag)):
                se = comp.std() / math.sqrt(n)
                assert abs(comp.mean() - wc) <= 3.0 * se + 1e-12

    def test_long_time_uniformizes(self):
        rng = np.random.default_rng(4)
        x = SphericalPoint(0.3, 0.1)
        from fracsphere.sphere import bm_displacements
        th, ph = bm_displacements(x, np.full(20_000, 10.0), rng)
        c = HarmonicCoeffs(1)
        c.set(1, 0, 1.0)
        vals = eval_at_points(c, th, ph).real
        se = vals.std() / math.sqrt(vals.size)
        assert abs(vals.mean()) < 3.0 * se

    def test_markov_composition(self):
        # running t then s from the endpoints matches t + s in law
        rng = np.random.default_rng(8)
        x = SphericalPoint(1.2, 0.7)
        n = 20_000
        t, s = 0.2, 0.35
        from fracsphere.sphere import _sample_angles, bm_displacements
        th1, ph1 = bm_displacements(x, np.full(n, t), rng)
        # second displacement from every endpoint, vectorized frames
        gam = _sample_angles(np.full(n, s), rng.random(n))
        psi = 2.0 * math.pi * rng.random(n)
        ct, st_, cp, sp_ = np.cos(th1), np.sin(th1), np.cos(ph1), np.sin(ph1)
        v = np.stack([st_ * cp, st_ * sp_, ct], axis=1)
        e1 = np.stack([ct * cp, ct * sp_, -st_], axis=1)
        e2 = np.stack([-sp_, cp, np.zeros(n)], axis=1)
        dirs = np.cos(psi)[:, None] * e1 + np.sin(psi)[:, None] * e2
        pts = np.cos(gam)[:, None] * v + np.sin(gam)[:, None] * dirs
        th2 = np.arccos(np.clip(pts[:, 2], -1.0, 1.0))
        ph2 = np.arctan2(pts[:, 1], pts[:, 0]) % (2.0 * math.pi)
        c = HarmonicCoeffs(1)
        c.set(1, 0, 1.0)
        vals = eval_at_points(c, th2, ph2).real
        want = math.exp(-(t + s) * 2.0) * eval_ylm(1, 0, x).real
        se = vals.std() / math.sqrt(n)
        assert abs(vals.mean() - want) < 3.0 * se

    def test_single_sample_api(self):
        p = sample_sphere_bm(SphericalPoint(0.5, 0.5), 0.2, 0)
        assert isinstance(p, SphericalPoint)

    def test_euler_cross_check(self):
        # tangent-plane Euler stepping agrees with the exact series sampler
        from fracsphere.sphere import sample_sphere_bm_euler
        x = SphericalPoint(1.0, 0.5)
        t, n = 0.3, 8000
        th, ph = sample_sphere_bm_euler(x, t, 32, 6, n_samples=n)
        c = HarmonicCoeffs(1)
        c.set(1, 0, 1.0)
        vals = eval_at_points(c, th, ph).real
        want = math.exp(-2.0 * t) * eval_ylm(1, 0, x).real
        se = vals.std() / math.sqrt(n)
        # allow the O(t/n_substeps) Euler bias on top of Monte Carlo noise
        assert abs(vals.mean() - want) < 3.0 * se + 0.02 * abs(want)

    def test_step_too_small(self):
        with pytest.raises(ValueError):
            sample_sphere_bm(SphericalPoint(0.5, 0.5), 1e-9, 0)


class TestDiscreteLaplacian:
    def test_eigenrelation_high_resolution(self):
        grid = SphericalGrid(512, 1024)
        c = HarmonicCoeffs(8, real_field=True)
        c.set(5, 3, 0.5)
        c.set(5, -3, 0.5 * (-1) ** 3)
        f = synthesize(c, grid)
        lap = discrete_laplace_beltrami(f, grid)
        mu = float(mu_ell(5))
        rel = np.abs(lap + mu * f).max() / (mu * np.abs(f).max())
        assert rel < 1e-3
