import numpy as np
import pytest

from shrinker import spectra as SPC


@pytest.fixture(scope="module")
def report():
    return SPC.spectra()


class TestSphereSpectrum:
    def test_eigenvalues_match_k_series(self, report):
        for k in range(6):
            target = -k * (k + 1.0)
            err = np.abs(report.sphere_eigenvalues - target).min()
            assert err <= 1e-3

    def test_multiplicity_structure(self, report):
        # each -k(k+1) appears once per azimuthal mode m <= k
        for k in range(1, 5):
            target = -k * (k + 1.0)
            hits = np.sum(np.abs(report.sphere_eigenvalues - target) < 1e-3)
            assert hits == k + 1

    def test_zonal_mode_alone(self):
        vals = SPC.sphere_laplacian_eigs(m=0, n=2000, k=8)
        for kdeg in range(6):
            assert np.abs(vals + kdeg * (kdeg + 1.0)).min() <= 1e-3


class TestHemisphere:
    def test_no_eigenvalue_near_zero(self, report):
        ev = report.hemisphere_eigenvalues
        assert not np.any((ev > -0.5) & (ev < 0.5))
        assert report.hemisphere_margin >= 0.5

    def test_dirichlet_drops_even_modes(self):
        # zonal Dirichlet hemisphere keeps only the odd-degree series
        vals = SPC.sphere_laplacian_eigs(m=0, n=2000, k=6, hemisphere=True)
        for k in (1, 3, 5):
            assert np.abs(vals + k * (k + 1.0)).min() <= 1e-3
        assert np.abs(vals + 2 * 3.0).min() > 0.5  # -6 absent


class TestDiskOscillator:
    def test_invertibility_margins(self, report):
        for radius, margin in report.disk_margins.items():
            assert margin > 0.1

    def test_margin_values_stable(self):
        # refinement does not move the smallest-magnitude eigenvalues
        for radius in (np.sqrt(2.0), 2.0):
            a = SPC.disk_oscillator_eigs(radius, m=0, n=1000)
            b = SPC.disk_oscillator_eigs(radius, m=0, n=2000)
            assert abs(np.abs(a).min() - np.abs(b).min()) <= 1e-5

    def test_oscillator_shifts_dirichlet_disk(self):
        # the r^2/16 well only shifts the pure Dirichlet Laplacian values
        radius = 2.0
        vals = SPC.disk_oscillator_eigs(radius, m=0, n=2000)
        from scipy.special import jn_zeros
        lam_laplace = -(jn_zeros(0, 1)[0] / radius) ** 2 + 1.0
        near = vals[np.abs(vals - lam_laplace).argmin()]
        assert abs(near - lam_laplace) < 0.2
