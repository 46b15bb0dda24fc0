import warnings

import numpy as np
import pytest

from shrinker import spheresolve as SP


@pytest.fixture(scope="module")
def grid():
    return SP.sphere_grid()


def grid_xyz(grid):
    theta, phi, _ = grid
    st = np.sin(theta)[:, None]
    return (st * np.cos(phi)[None, :], st * np.sin(phi)[None, :],
            np.cos(theta)[:, None] * np.ones_like(phi)[None, :])


class TestGridAndProjection:
    def test_quadrature_weights(self, grid):
        theta, phi, w = grid
        assert abs(w.sum() - 4 * np.pi) < 1e-12
        x, y, z = grid_xyz(grid)
        assert abs(np.sum(w * x**2) - 4 * np.pi / 3) < 1e-12

    def test_pairing_constant(self, grid):
        theta, phi, w = grid
        x = grid_xyz(grid)[0]
        assert abs(np.sum(w * SP.pairing_field(theta, phi) * x)
                   - 8 * np.pi) < 1e-11

    def test_projection_idempotent(self, grid):
        theta, phi, _ = grid
        rng = np.random.default_rng(0)
        f = rng.normal(size=(len(theta), len(phi)))
        p = SP.symmetry_project(f, len(theta), len(phi))
        assert np.abs(SP.symmetry_project(p, len(theta), len(phi))
                      - p).max() < 1e-14

    def test_projection_fixes_class(self, grid):
        # x-odd, z-even functions are fixed points of the projection
        x, y, z = grid_xyz(grid)
        f = x * (1 + y**2) + x**3 * z**2
        p = SP.symmetry_project(f, f.shape[0], f.shape[1])
        assert np.abs(p - f).max() < 1e-14


class TestSphereSolve:
    def test_cokernel_field(self):
        # E = w: b = 1 and the corrected solution vanishes
        sol = SP.sphere_solve(lambda x, y, z: 6.0 * x)
        assert abs(sol.b - 1.0) < 1e-14
        assert np.abs(sol.v).max() < 1e-12
        assert sol.residual_l2 < 1e-12

    def test_degree_two_harmonic(self, grid):
        # (Delta + 2)(xy) = -4 xy, so v = -xy/4 and b = 0
        sol = SP.sphere_solve(lambda x, y, z: x * y)
        x, y, _ = grid_xyz(grid)
        assert abs(sol.b) < 1e-14
        assert np.abs(sol.v + x * y / 4).max() < 1e-12

    def test_random_symmetric_residual(self, grid):
        theta, phi, w = grid
        x, y, z = grid_xyz(grid)
        E = x * (1 + 0.5 * y**2 + 0.3 * z**2) + 0.2 * x**3 - 0.4 * x * z**2
        sol = SP.sphere_solve(E)
        eig = 2.0 - sol.degrees * (sol.degrees + 1.0)
        Y, _ = SP._harmonic_matrix(theta, phi, int(sol.degrees.max()))
        lhs = np.einsum("ijk,k->ij", Y, eig * sol.coeff)
        rhs = E - sol.b * SP.pairing_field(theta, phi)
        assert np.sqrt(np.sum(w * (lhs - rhs) ** 2)) <= 1e-8
        assert sol.residual_l2 <= 1e-8
        # the kernel direction is gauged out
        assert abs(sol.evaluate(np.pi / 2, 0.0)[0, 0]) < 1e-12

    def test_b_linearity_exact(self, grid):
        x, y, z = grid_xyz(grid)
        E = x * (1 + y**2) + 0.3 * x**3
        b1 = SP.sphere_solve(E).b
        assert SP.sphere_solve(2.0 * E).b == 2.0 * b1
        assert SP.sphere_solve(-E).b == -b1

    def test_evaluate_matches_grid(self, grid):
        theta, phi, _ = grid
        x = grid_xyz(grid)[0]
        sol = SP.sphere_solve(x * (1 + x**2))
        assert np.abs(sol.evaluate(theta, phi) - sol.v).max() < 1e-12

    def test_projection_warning(self):
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            sol = SP.sphere_solve(lambda x, y, z: x + 0.01 * y)
        assert any(issubclass(r.category, SP.SymmetryProjectionWarning)
                   for r in rec)
        assert sol.class_violation > 1e-8
        # the solve proceeded on the projected input
        assert np.isfinite(sol.v).all()

    def test_validation(self):
        with pytest.raises(ValueError):
            SP.sphere_solve(np.zeros((10, 10)))
        with pytest.raises(ValueError):
            SP.sphere_grid(n_phi=30)
