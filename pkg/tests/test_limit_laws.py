"""Tests for the analytic constants and limit-law samplers."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from cusplab.errors import DomainError
from cusplab.limit_laws import (
    FbmPath,
    WindowConfig,
    cusp_log_moment,
    default_xi_window,
    default_zeta_window,
    fbm_covariance,
    fisher_info_kappa,
    gamma_squared,
    rescale_fbm,
    sample_fbm,
    sample_kappa_limit,
    sample_xi,
    sample_xi_batch,
    sample_zeta,
    sample_zeta_batch,
    xi_from_fbm,
    zeta_from_fbm,
    zeta_scale,
)
from cusplab.path_sim import replication_rng

# Independently computed reference values for the default cusp problem
# (a=1, kappa=1/4, rho=1/2, T=1), frozen to guard against regressions.
GAMMA_SQ_REF = 0.511988584660
FISHER_REF = 1.081184249478


class TestGammaSquared:
    def test_reference_value(self):
        assert gamma_squared(1.0, 0.25) == pytest.approx(GAMMA_SQ_REF, rel=1e-9)

    def test_amplitude_scales_quadratically(self):
        assert gamma_squared(2.0, 0.3) == pytest.approx(
            4.0 * gamma_squared(1.0, 0.3), rel=1e-12
        )

    def test_window_stability(self):
        # truncation plus tail correction must be insensitive to the cut
        v50 = gamma_squared(1.0, 0.25, window=50.0)
        v200 = gamma_squared(1.0, 0.25, window=200.0)
        assert abs(v50 - v200) / v200 < 1e-6

    @pytest.mark.parametrize("kappa", [0.05, 0.15, 0.35, 0.45])
    def test_window_stability_across_exponents(self, kappa):
        v50 = gamma_squared(1.0, kappa, window=50.0)
        v150 = gamma_squared(1.0, kappa, window=150.0)
        assert abs(v50 - v150) / v150 < 1e-6

    def test_rejects_bad_arguments(self):
        with pytest.raises(DomainError):
            gamma_squared(-1.0, 0.25)
        with pytest.raises(DomainError):
            gamma_squared(1.0, 0.5)
        with pytest.raises(DomainError):
            gamma_squared(1.0, 0.25, window=10.0)


class TestCuspLogMoment:
    def test_unit_interval_closed_form(self):
        # integral of s^{2k} ln^2 s over (0,1) equals 2/(2k+1)^3
        for kappa in (0.1, 0.25, 0.4):
            c = 2.0 * kappa + 1.0
            assert cusp_log_moment(1.0, kappa) == pytest.approx(
                2.0 / c**3, rel=1e-12
            )

    @pytest.mark.parametrize("x", [0.3, 0.5, 1.7])
    def test_matches_quadrature(self, x):
        kappa = 0.25
        ref, _ = quad(
            lambda s: s ** (2.0 * kappa) * math.log(s) ** 2, 0.0, x,
            epsabs=1e-13, epsrel=1e-13,
        )
        assert cusp_log_moment(x, kappa) == pytest.approx(ref, rel=1e-10)

    def test_zero_limit(self):
        assert cusp_log_moment(0.0, 0.25) == 0.0


class TestFisherInfoKappa:
    def test_reference_value(self):
        assert fisher_info_kappa(1.0, 0.5, 1.0, 0.25) == pytest.approx(
            FISHER_REF, rel=1e-10
        )

    def test_symmetric_in_location(self):
        assert fisher_info_kappa(1.0, 0.3, 1.0, 0.25) == pytest.approx(
            fisher_info_kappa(1.0, 0.7, 1.0, 0.25), rel=1e-12
        )

    def test_amplitude_scales_quadratically(self):
        assert fisher_info_kappa(3.0, 0.5, 1.0, 0.25) == pytest.approx(
            9.0 * FISHER_REF, rel=1e-9
        )

    def test_matches_quadrature(self):
        a, rho, T, kappa = 1.0, 0.4, 1.0, 0.3

        def integrand(t):
            d = abs(t - rho)
            return d ** (2.0 * kappa) * math.log(d) ** 2

        ref, _ = quad(integrand, 0.0, T, points=[rho], epsabs=1e-13, limit=200)
        assert fisher_info_kappa(a, rho, T, kappa) == pytest.approx(ref, rel=1e-9)

    def test_rejects_location_outside_horizon(self):
        with pytest.raises(DomainError):
            fisher_info_kappa(1.0, 1.5, 1.0, 0.25)


class TestFbmCovariance:
    def test_wiener_special_case_closed_form(self):
        # H = 1/2 double-sided fBm is a two-sided Wiener process:
        # cov = min(|u|,|v|) for same-sign arguments and 0 otherwise
        grid = np.linspace(-2.0, 2.0, 65)
        u, v = np.meshgrid(grid, grid)
        got = fbm_covariance(u, v, 0.5)
        same_sign = (u * v) > 0
        expected = np.where(same_sign, np.minimum(np.abs(u), np.abs(v)), 0.0)
        np.testing.assert_allclose(got, expected, atol=1e-15)

    def test_variance_on_diagonal(self):
        u = np.array([-1.5, 0.5, 2.0])
        np.testing.assert_allclose(
            fbm_covariance(u, u, 0.75), np.abs(u) ** 1.5, rtol=1e-12
        )

    def test_zero_at_origin(self):
        assert fbm_covariance(0.0, 1.0, 0.75) == 0.0

    @pytest.mark.parametrize("hurst", [0.0, 1.0, 1.2])
    def test_rejects_bad_hurst(self, hurst):
        with pytest.raises(DomainError):
            fbm_covariance(0.5, 0.5, hurst)

    @given(
        u=st.floats(-3.0, 3.0),
        v=st.floats(-3.0, 3.0),
        hurst=st.floats(0.51, 0.99),
    )
    @settings(max_examples=80, deadline=None)
    def test_cauchy_schwarz(self, u, v, hurst):
        cov = float(fbm_covariance(u, v, hurst))
        bound = math.sqrt(
            float(fbm_covariance(u, u, hurst)) * float(fbm_covariance(v, v, hurst))
        )
        assert cov <= bound + 1e-12


class TestWindowConfig:
    def test_nodes_symmetric_with_zero_center(self):
        w = WindowConfig(U=2.0, du=0.5)
        nodes = w.nodes()
        assert w.node_count == 9
        assert nodes[w.half_count] == 0.0
        np.testing.assert_allclose(nodes, -nodes[::-1])

    @pytest.mark.parametrize("U,du", [(0.0, 0.1), (1.0, 0.0), (1.0, 2.0)])
    def test_rejects_bad_geometry(self, U, du):
        with pytest.raises(DomainError):
            WindowConfig(U=U, du=du)

    def test_default_xi_window_scaling(self):
        # doubling Gamma shrinks the window by 2^{-1/H}
        h = 0.75
        w1 = default_xi_window(1.0, h)
        w2 = default_xi_window(4.0, h)
        assert w2.U / w1.U == pytest.approx(2.0 ** (-1.0 / h), rel=1e-12)
        assert w1.du == pytest.approx(w1.U / 2000.0, rel=1e-12)

    def test_default_zeta_window_scaling(self):
        h = 0.75
        w1 = default_zeta_window(1.0, 1.0, h)
        w2 = default_zeta_window(2.0, 1.0, h)
        r = zeta_scale(2.0, 1.0, h) / zeta_scale(1.0, 1.0, h)
        assert w2.U / w1.U == pytest.approx(r, rel=1e-12)


class TestZetaScale:
    def test_formula(self):
        noise, curv, h = 0.7, 1.9, 0.75
        assert zeta_scale(noise, curv, h) == pytest.approx(
            (2.0 * noise / curv) ** (1.0 / (2.0 - h)), rel=1e-12
        )

    def test_rejects_bad_arguments(self):
        with pytest.raises(DomainError):
            zeta_scale(-1.0, 1.0, 0.75)
        with pytest.raises(DomainError):
            zeta_scale(1.0, 0.0, 0.75)


class TestSampleFbm:
    def test_origin_pinned_to_zero(self):
        path = sample_fbm(0.75, 2.0, 0.25, rng=replication_rng(0, 0))
        zero_idx = np.where(path.u_grid == 0.0)[0]
        assert zero_idx.size == 1
        assert path.values[zero_idx[0]] == 0.0

    def test_reproducible(self):
        p1 = sample_fbm(0.75, 1.0, 0.25, rng=replication_rng(3, 1))
        p2 = sample_fbm(0.75, 1.0, 0.25, rng=replication_rng(3, 1))
        np.testing.assert_array_equal(p1.values, p2.values)

    def test_rejects_hurst_outside_range(self):
        with pytest.raises(DomainError):
            sample_fbm(0.4, 1.0, 0.25)
        with pytest.raises(DomainError):
            sample_fbm(1.0, 1.0, 0.25)

    def test_empirical_variance_matches_theory(self):
        rng = replication_rng(0, 42)
        hurst, U, du = 0.75, 2.0, 0.5
        draws = np.array(
            [sample_fbm(hurst, U, du, rng=rng).values for _ in range(600)]
        )
        grid = WindowConfig(U=U, du=du).nodes()
        theory = np.abs(grid) ** (2.0 * hurst)
        observed = draws.var(axis=0, ddof=1)
        # variance of a sample variance of N gaussians is 2 sigma^4 / (N-1)
        se = theory * np.sqrt(2.0 / 599.0)
        mask = grid != 0.0
        assert np.all(np.abs(observed[mask] - theory[mask]) < 5.0 * se[mask])

    def test_wiener_case_has_independent_increments(self):
        rng = replication_rng(0, 43)
        draws = np.array(
            [sample_fbm(0.5, 2.0, 0.5, rng=rng).values for _ in range(800)]
        )
        grid = WindowConfig(U=2.0, du=0.5).nodes()
        i1 = np.where(grid == 0.5)[0][0]
        i2 = np.where(grid == 1.0)[0][0]
        i3 = np.where(grid == 2.0)[0][0]
        inc_a = draws[:, i2] - draws[:, i1]
        inc_b = draws[:, i3] - draws[:, i2]
        corr = np.corrcoef(inc_a, inc_b)[0, 1]
        assert abs(corr) < 5.0 / math.sqrt(800)


class TestRescaleFbm:
    def test_exact_scaling(self):
        path = sample_fbm(0.75, 1.0, 0.25, rng=replication_rng(1, 0))
        c = 3.0
        scaled = rescale_fbm(path, c)
        np.testing.assert_array_equal(scaled.u_grid, c * path.u_grid)
        np.testing.assert_array_equal(scaled.values, c**0.75 * path.values)
        assert scaled.hurst == path.hurst

    def test_rejects_nonpositive_factor(self):
        path = sample_fbm(0.75, 1.0, 0.25, rng=replication_rng(1, 1))
        with pytest.raises(DomainError):
            rescale_fbm(path, 0.0)


def _flat_path(hurst=0.75, U=2.0, du=0.125):
    grid = WindowConfig(U=U, du=du).nodes()
    return FbmPath(hurst=hurst, u_grid=grid, values=np.zeros_like(grid))


class TestXiFromFbm:
    def test_flat_path_gives_zero(self):
        # with W identically 0 the field is -Gamma^2/2*|u|^{2H}, peaked at 0
        sample = xi_from_fbm(_flat_path(), gamma_sq=0.5)
        assert sample.xi_hat == 0.0
        assert sample.xi_tilde == pytest.approx(0.0, abs=1e-12)
        assert not sample.edge_flag

    def test_argmax_tie_breaks_toward_smaller_u(self):
        grid = WindowConfig(U=1.0, du=0.5).nodes()
        hurst = 0.75
        # craft values so the field is exactly equal at u = -0.5 and +0.5
        comp = 0.5 * np.abs(grid) ** (2.0 * hurst)
        values = np.where(np.abs(grid) == 0.5, comp + 1.0, comp)
        path = FbmPath(hurst=hurst, u_grid=grid, values=values)
        sample = xi_from_fbm(path, gamma_sq=1.0)
        assert sample.xi_hat == -0.5

    def test_edge_flag_set_for_boundary_argmax(self):
        grid = WindowConfig(U=2.0, du=0.125).nodes()
        ramp = np.linspace(0.0, 100.0, grid.size)
        path = FbmPath(hurst=0.75, u_grid=grid, values=ramp)
        sample = xi_from_fbm(path, gamma_sq=1e-6)
        assert sample.xi_hat == grid[-1]
        assert sample.edge_flag

    def test_rejects_nonpositive_gamma_sq(self):
        with pytest.raises(DomainError):
            xi_from_fbm(_flat_path(), gamma_sq=0.0)


class TestZetaFromFbm:
    def test_flat_path_gives_zero(self):
        sample = zeta_from_fbm(_flat_path(), noise_scale=0.7, curvature=2.0)
        assert sample.xi_hat == 0.0
        assert sample.xi_tilde is None

    def test_rejects_bad_constants(self):
        with pytest.raises(DomainError):
            zeta_from_fbm(_flat_path(), noise_scale=0.0, curvature=1.0)
        with pytest.raises(DomainError):
            zeta_from_fbm(_flat_path(), noise_scale=1.0, curvature=-1.0)


class TestSamplers:
    WINDOW = WindowConfig(U=10.0, du=0.05)

    def test_sample_xi_reproducible_via_seed(self):
        s1 = sample_xi(0.5, 0.75, window=self.WINDOW, seed=11)
        s2 = sample_xi(0.5, 0.75, window=self.WINDOW, seed=11)
        assert s1.xi_hat == s2.xi_hat
        assert s1.xi_tilde == s2.xi_tilde
        assert s1.seed == 11

    def test_sample_xi_batch_deterministic(self):
        a1 = sample_xi_batch(0.5, 0.75, 32, replication_rng(5, 0), window=self.WINDOW)
        a2 = sample_xi_batch(0.5, 0.75, 32, replication_rng(5, 0), window=self.WINDOW)
        np.testing.assert_array_equal(a1[0], a2[0])
        np.testing.assert_array_equal(a1[1], a2[1])
        np.testing.assert_array_equal(a1[2], a2[2])

    def test_sample_xi_batch_shapes_and_support(self):
        xi_hat, xi_tilde, flags = sample_xi_batch(
            0.5, 0.75, 64, replication_rng(5, 1), window=self.WINDOW
        )
        assert xi_hat.shape == xi_tilde.shape == flags.shape == (64,)
        assert flags.dtype == bool
        assert np.all(np.abs(xi_hat) <= self.WINDOW.U)
        assert np.all(np.abs(xi_tilde) <= self.WINDOW.U)

    def test_sample_zeta_batch_support(self):
        zeta, flags = sample_zeta_batch(
            0.7, 2.0, 0.75, 64, replication_rng(5, 2), window=self.WINDOW
        )
        assert zeta.shape == flags.shape == (64,)
        assert np.all(np.abs(zeta) <= self.WINDOW.U)

    def test_sample_zeta_reproducible_via_seed(self):
        s1 = sample_zeta(0.7, 2.0, 0.75, window=self.WINDOW, seed=4)
        s2 = sample_zeta(0.7, 2.0, 0.75, window=self.WINDOW, seed=4)
        assert s1.xi_hat == s2.xi_hat

    def test_sample_kappa_limit_variance(self):
        fisher = FISHER_REF
        rng = replication_rng(9, 0)
        draws = np.array([sample_kappa_limit(fisher, rng=rng) for _ in range(20_000)])
        assert draws.var(ddof=1) == pytest.approx(1.0 / fisher, rel=0.05)
        assert abs(draws.mean()) < 4.0 / math.sqrt(20_000 * fisher)

    def test_sample_kappa_limit_rejects_bad_fisher(self):
        with pytest.raises(DomainError):
            sample_kappa_limit(0.0)
