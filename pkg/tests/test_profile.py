import numpy as np
import pytest

import oracles
from shrinker import geometry as G
from shrinker import profile as P


@pytest.fixture(scope="module")
def cap0():
    return P.cap_for_theta(0.0)


class TestIntegrateProfile:
    def test_constant_solution(self):
        prof = P.integrate_profile(2.0)
        assert np.abs(prof.rho - 2.0).max() < 1e-10
        assert np.abs(prof.rho_prime).max() < 1e-10

    def test_linearization_matches_w1(self):
        errs = []
        for eps in (1e-3, 1e-4):
            prof = P.integrate_profile(2.0 + eps)
            diff = (prof.rho - 2.0) / eps
            errs.append(np.abs(diff - P.legendre_w1(prof.phi_grid)).max())
        assert errs[0] < 5e-4 and errs[1] < 5e-5
        # error O(eps)
        assert errs[0] / errs[1] > 5

    def test_endpoint_signs(self):
        prof = P.integrate_profile(2.0 + 1e-4)
        assert (prof.rho[-1] - 2.0) / 1e-4 < 0  # w1(pi/2) < 0
        assert prof.rho_prime[-1] / 1e-4 < 0    # w1'(pi/2) < 0

    def test_monotone_endpoint_maps(self):
        hs = np.linspace(1.8, 2.2, 21)
        profs = [P.integrate_profile(h, n_samples=5) for h in hs]
        ends = np.array([p.rho[-1] for p in profs])
        slopes = np.array([p.rho_prime[-1] for p in profs])
        assert np.all(np.diff(ends) < 0) or np.all(np.diff(ends) > 0)
        assert np.all(np.diff(slopes) < 0) or np.all(np.diff(slopes) > 0)

    def test_blowup_reported(self):
        with pytest.raises(P.ShootingFailure) as err:
            P.integrate_profile(60.0)
        assert err.value.last_phi is not None

    def test_invalid_h(self):
        with pytest.raises(ValueError):
            P.integrate_profile(-1.0)


class TestLegendreW1:
    def test_value_at_zero(self):
        assert P.legendre_w1(0.0) == 1.0
        assert P.legendre_w1(0.0, derivative=True) == 0.0

    def test_equator_regression(self):
        val = P.legendre_w1(np.pi / 2)
        assert val < 0
        assert abs(val - oracles.P_L_AT_ZERO) < 1e-8
        assert P.legendre_w1(np.pi / 2, derivative=True) < 0

    def test_against_hypergeometric(self):
        phis = np.linspace(0.0, np.pi / 2, 101)
        assert np.abs(P.legendre_w1(phis)
                      - oracles.legendre_pl_series(phis)).max() < 1e-8


class TestCapForTheta:
    def test_hemisphere(self, cap0):
        assert cap0.h == 2.0
        assert abs(cap0.r_theta - 2.0) < 1e-12
        r, y = cap0.curve(np.linspace(0.1, np.pi / 2, 20))
        assert np.abs(np.hypot(r, y) - 2.0).max() < 1e-10

    def test_first_order_symmetry(self):
        rp = P.cap_for_theta(+1e-3).r_theta - 2.0
        rm = P.cap_for_theta(-1e-3).r_theta - 2.0
        assert rp * rm < 0
        assert abs(rp + rm) < 0.01 * abs(rp)

    def test_tan_theta_matches_slope(self):
        cap = P.cap_for_theta(0.05)
        assert abs(cap.profile.rho_prime[-1] - np.tan(0.05)) < 1e-10

    def test_out_of_bracket(self):
        with pytest.raises(ValueError):
            P.cap_for_theta(1.2)

    def test_smooth_residual(self):
        for theta in (0.0, 0.05, -0.08):
            prof = P.cap_for_theta(theta).profile
            assert np.abs(P.revolution_residual(prof)[1:]).max() < 1e-6

    def test_mesh_residual(self):
        cap = P.cap_for_theta(0.03)
        m = P.mesh_cap(cap, n_phi=100, n_angle=200)
        m.validate()
        f = G.shrinker_residual(m, 1.0)
        assert np.abs(f[~m.boundary_vertex]).max() < 5e-5

    def test_boundary_in_plane(self):
        cap = P.cap_for_theta(0.05)
        m = P.mesh_cap(cap)
        rim = m.vertices[m.boundary_vertex]
        assert np.abs(rim[:, 1]).max() < 1e-12
        assert np.abs(np.linalg.norm(rim[:, [0, 2]], axis=1)
                      - cap.r_theta).max() < 1e-12


class TestConformalParam:
    def test_conformal_and_orthogonal(self, cap0):
        s = np.linspace(0.05, 2.5, 30)
        z = np.linspace(0.0, 2 * np.pi, 9)[:-1]
        ss, zz = np.meshgrid(s, z, indexing="ij")
        h = 1e-5
        dks = (cap0.kappa(ss + h, zz) - cap0.kappa(ss - h, zz)) / (2 * h)
        dkz = (cap0.kappa(ss, zz + h) - cap0.kappa(ss, zz - h)) / (2 * h)
        ns = np.linalg.norm(dks, axis=-1)
        nz = np.linalg.norm(dkz, axis=-1)
        assert np.abs(ns - nz).max() < 1e-8
        assert np.abs(np.einsum("...i,...i->...", dks, dkz)).max() < 1e-8

    def test_hemisphere_mercator(self, cap0):
        s = np.linspace(0.0, 3.0, 50)
        assert np.abs(cap0.phi_of_s(s)
                      - 2 * np.arctan(np.exp(-s))).max() < 1e-9

    def test_conformal_factor_is_x2_plus_z2(self):
        cap = P.cap_for_theta(0.06)
        cp = P.conformal_param(cap)
        pts = cp["points"]
        r2 = pts[..., 0] ** 2 + pts[..., 2] ** 2
        assert np.abs(cp["conformal_factor"][:, None] - r2).max() < 1e-6

    def test_s_zero_on_boundary(self, cap0):
        assert abs(cap0.phi_of_s(0.0) - np.pi / 2) < 1e-12
