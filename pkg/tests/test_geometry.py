import numpy as np
import pytest

import oracles
from shrinker import geometry as G
from shrinker import mesh as meshmod


def smooth_fields(mesh, rng, count):
    """Random low-order polynomial graph fields, sup-normalized."""
    x, y, z = mesh.vertices.T
    basis = np.stack([np.ones_like(x), x, y, z,
                      x * y, y * z, x * z, x * x - y * y, z * z])
    out = []
    for _ in range(count):
        u = rng.normal(size=len(basis)) @ basis
        out.append(u / np.abs(u).max())
    return out


class TestVertexFrames:
    def test_unit_sphere_h(self):
        sp = meshmod.icosphere(5, 1.0)  # 20480 faces
        fr = G.vertex_frames(sp)
        assert np.abs(fr.mean_curvature - 2.0).max() < 0.02 * 2.0
        assert np.abs(np.linalg.norm(fr.normal, axis=1) - 1).max() < 1e-12

    def test_plane_flat(self, plane):
        fr = G.vertex_frames(plane)
        interior = ~plane.boundary_vertex
        assert np.abs(fr.mean_curvature[interior]).max() < 1e-6
        assert np.abs(fr.second_form_norm_sq[interior]).max() < 1e-6

    def test_sphere_r2_a2(self, sphere_r2):
        fr = G.vertex_frames(sphere_r2)
        assert np.abs(fr.second_form_norm_sq - 0.5).max() < 0.02 * 0.5

    def test_cauchy_schwarz(self, sphere_r2, cylinder):
        for m in (sphere_r2, cylinder):
            fr = G.vertex_frames(m)
            gap = fr.second_form_norm_sq - fr.mean_curvature**2 / 2
            assert gap.min() >= -1e-9

    def test_boundary_flagged(self, plane):
        fr = G.vertex_frames(plane)
        assert np.array_equal(fr.low_accuracy, plane.boundary_vertex)

    def test_degenerate_face_error(self):
        v = np.array([[0.0, 0, 0], [1, 0, 0], [0.5, 1e-15, 0], [0.5, 1, 0]])
        m = meshmod.TriMesh(v, np.array([[0, 1, 2], [0, 2, 3]]), validate=False)
        with pytest.raises(G.DegenerateFaceError):
            G.vertex_frames(m)


class TestShrinkerResidual:
    def test_plane_exact_zero(self, plane):
        f = G.shrinker_residual(plane, 1.0)
        assert np.abs(f).max() == 0.0

    def test_sphere_r2(self, sphere_r2):
        f = G.shrinker_residual(sphere_r2, 1.0)
        assert np.abs(f).max() < 5e-3

    def test_cylinder(self, cylinder):
        f = G.shrinker_residual(cylinder, 1.0)
        assert np.abs(f[~cylinder.boundary_vertex]).max() < 5e-3

    def test_refinement_order(self, sphere_r2, cylinder):
        coarse = np.abs(G.shrinker_residual(sphere_r2, 1.0)).max()
        fine = np.abs(G.shrinker_residual(meshmod.icosphere(5, 2.0), 1.0)).max()
        assert coarse / fine >= 1.8
        cy_f = meshmod.cylinder_patch(np.sqrt(2.0), 1.0, 61, 128)
        c0 = np.abs(G.shrinker_residual(cylinder, 1.0)[~cylinder.boundary_vertex]).max()
        c1 = np.abs(G.shrinker_residual(cy_f, 1.0)[~cy_f.boundary_vertex]).max()
        # uniform cylinder grids are exact to roundoff at both resolutions
        assert c1 <= max(c0, 1e-12)

    def test_orientation_flip_negates(self, sphere_r2):
        f = G.shrinker_residual(sphere_r2, 1.0)
        ff = G.shrinker_residual(sphere_r2.flipped(), 1.0)
        assert np.abs(f + ff).max() < 1e-12
        h = G.vertex_frames(sphere_r2).mean_curvature
        hf = G.vertex_frames(sphere_r2.flipped()).mean_curvature
        assert np.abs(h + hf).max() < 1e-12

    def test_tau_validation(self, sphere_r2):
        with pytest.raises(ValueError):
            G.shrinker_residual(sphere_r2, 0.0)


class TestNormalGraph:
    def test_identity(self, sphere_r2):
        g = G.normal_graph(sphere_r2, np.zeros(len(sphere_r2.vertices)))
        assert np.array_equal(g.vertices, sphere_r2.vertices)

    def test_unit_sphere_to_r2(self):
        sp = meshmod.icosphere(4, 1.0)
        g = G.normal_graph(sp, np.ones(len(sp.vertices)), safety=20.0)
        r = np.linalg.norm(g.vertices, axis=1)
        assert np.abs(r - 2.0).max() < 1e-3

    def test_too_large(self, sphere_r2):
        with pytest.raises(G.GraphTooLargeError):
            G.normal_graph(sphere_r2, np.ones(len(sphere_r2.vertices)))


class TestLinearized:
    def test_plane_coordinate_kernel(self, plane):
        u = plane.vertices[:, 0]
        lu = G.linearized_apply(plane, 1.0, u)
        assert np.abs(lu[~plane.boundary_vertex]).max() < 1e-10

    def test_sphere_constant(self, sphere_r2):
        u = np.ones(len(sphere_r2.vertices))
        lu = G.linearized_apply(sphere_r2, 1.0, u)
        assert np.abs(lu - 1.0).max() < 0.02
        lu_asm = G.linearized_apply(sphere_r2, 1.0, u, method="assembled")
        assert np.abs(lu_asm - 1.0).max() < 0.02

    def test_matrix_matches_apply(self, sphere_r2, rng):
        lmat = G.linearized_matrix(sphere_r2, 1.0)
        u = smooth_fields(sphere_r2, rng, 1)[0]
        assert np.abs(lmat @ u - G.linearized_apply(sphere_r2, 1.0, u)).max() < 1e-10

    def test_assembled_close_to_exact(self, sphere_r2, rng):
        u = smooth_fields(sphere_r2, rng, 1)[0]
        exact = G.linearized_apply(sphere_r2, 1.0, u)
        asm = G.linearized_apply(sphere_r2, 1.0, u, method="assembled")
        scale = np.abs(exact).max()
        assert np.abs(exact - asm).max() < 0.05 * scale

    @staticmethod
    def _generic_cylinder(rng):
        # jitter the grid on-surface: the exact grid has only right
        # triangles, which sit on the branch point of the mixed-area rule,
        # so the discrete residual is kinked there
        m = meshmod.cylinder_patch(np.sqrt(2.0), 1.0, 31, 64)
        th = np.arctan2(m.vertices[:, 1], m.vertices[:, 0])
        z = m.vertices[:, 2]
        keep = m.boundary_vertex
        th = th + np.where(keep, 0, rng.uniform(-0.3, 0.3, len(z))) * (2 * np.pi / 64)
        z = z + np.where(keep, 0, rng.uniform(-0.3, 0.3, len(z))) * (2.0 / 30)
        v = np.stack([np.sqrt(2.0) * np.cos(th), np.sqrt(2.0) * np.sin(th), z], 1)
        return meshmod.TriMesh(v, m.faces)

    @staticmethod
    def _generic_plane(rng):
        m = meshmod.plane_patch(2.0, 41)
        v = m.vertices.copy()
        keep = m.boundary_vertex
        v[:, :2] += np.where(keep[:, None], 0,
                             rng.uniform(-0.3, 0.3, (len(v), 2))) * (4.0 / 40)
        return meshmod.TriMesh(v, m.faces)

    @pytest.mark.parametrize("fixture", ["sphere", "cylinder", "plane"])
    def test_fd_consistency(self, fixture, rng):
        mesh = {"sphere": meshmod.icosphere(3, 2.0),
                "cylinder": self._generic_cylinder(rng),
                "plane": self._generic_plane(rng)}[fixture]
        interior = ~mesh.boundary_vertex
        f0 = G.shrinker_residual(mesh, 1.0)
        for u in smooth_fields(mesh, rng, 10):
            lu = G.linearized_apply(mesh, 1.0, u)
            errs, errs_c = [], []
            for t in (1e-3, 1e-4):
                fp = G.shrinker_residual(G.normal_graph(mesh, t * u), 1.0)
                fm = G.shrinker_residual(G.normal_graph(mesh, -t * u), 1.0)
                errs.append(np.abs(((fp - f0) / t + lu)[interior]).max())
                errs_c.append(np.abs(((fp - fm) / (2 * t) + lu)[interior]).max())
            slope = np.log10(errs[0] / max(errs[1], 1e-300))
            order_c = np.log10(errs_c[0] / max(errs_c[1], 1e-300))
            assert slope >= 0.9
            assert order_c >= 1.9


class TestGaussianDiagnostics:
    def test_ric_zero_at_radius_4(self):
        d = G.gaussian_metric_diagnostics([4.0, 0, 0], [0, 0, 1.0])
        assert abs(d["ric_nn"]) < 1e-14

    def test_plane_k_at_origin(self):
        d = G.gaussian_metric_diagnostics([0.0, 0, 0], [0, 0, 1.0])
        assert d["gauss_plane"] == 0.5

    def test_ric_at_radius_2(self):
        d = G.gaussian_metric_diagnostics([0, 2.0, 0], [0, 0, 1.0])
        assert abs(d["ric_nn"] - np.e * 0.75) < 1e-12

    def test_against_fd_oracle(self, rng):
        for _ in range(20):
            x = rng.normal(size=3)
            x *= rng.uniform(0.3, 3.0) / np.linalg.norm(x)
            nu = rng.normal(size=3)
            nu /= np.linalg.norm(nu)
            d = G.gaussian_metric_diagnostics(x, nu)
            assert abs(d["ric_nn"] - oracles.ricci_fd(x, nu)) < 1e-6
            nup = nu - (nu @ x) * x / (x @ x)
            nup /= np.linalg.norm(nup)
            dp = G.gaussian_metric_diagnostics(x, nup)
            assert abs(dp["gauss_plane"] - oracles.plane_gauss_fd(x, nup)) < 1e-6


class TestKernelBackends:
    def test_fallback_matches_compiled(self, sphere_r2):
        from shrinker import _kernels_py, kernels
        fr = G.vertex_frames(sphere_r2)
        t1, t2 = G.tangent_frames(fr.normal)
        indptr, indices = G.two_ring(sphere_r2)
        ref = _kernels_py.quadric_fit(sphere_r2.vertices, fr.normal, t1, t2,
                                      indptr, indices)
        cur = kernels.quadric_fit(sphere_r2.vertices, fr.normal, t1, t2,
                                  indptr, indices)
        assert np.abs(ref - cur).max() < 1e-10
