import numpy as np
import pytest
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.special import sph_harm_y

import oracles
from shrinker import geometry as G
from shrinker import scherk as S


@pytest.fixture(scope="module")
def patch():
    return S.scherk_patch()


@pytest.fixture(scope="module")
def frames(patch):
    return G.vertex_frames(patch.mesh)


@pytest.fixture(scope="module")
def period():
    return S.mesh_scherk()


@pytest.fixture(scope="module")
def w0(patch):
    return S.w0_field(patch)


def boundary_loop_count(mesh):
    edges = np.sort(mesh.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    eu, cnt = np.unique(edges, axis=0, return_counts=True)
    bed = eu[cnt == 1]
    n = len(mesh.vertices)
    g = coo_matrix((np.ones(len(bed)), (bed[:, 0], bed[:, 1])), shape=(n, n))
    ncomp, label = connected_components(g, directed=False)
    return len(np.unique(label[np.unique(bed)]))


def set_distance(moved, vertices):
    return cKDTree(vertices).query(moved)[0].max()


class TestGraphF:
    def test_pinned_value(self):
        # frozen from the bisection oracle on sinh(1) sinh(f) = 1
        assert abs(S.graph_f(1.0, np.pi / 2)
                   - oracles.GRAPH_HEIGHT_1_HALFPI) < 1e-13

    def test_against_bisection(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            s = rng.uniform(0.2, 6.0)
            z = rng.uniform(-np.pi, np.pi)
            assert abs(S.graph_f(s, z)
                       - oracles.graph_height_bisect(s, z)) < 1e-12

    def test_zero_at_z0(self):
        s = np.linspace(0.5, 10.0, 40)
        assert np.abs(S.graph_f(s, 0.0)).max() == 0.0

    def test_end_asymptotics(self):
        assert abs(np.exp(8.0) * S.graph_f(8.0, np.pi / 2) - 2.0) < 1e-6
        assert abs(np.exp(12.0) * S.graph_f(12.0, np.pi / 2) - 2.0) < 1e-9

    def test_domain_error(self):
        with pytest.raises(ValueError):
            S.graph_f(0.0, 1.0)

    def test_seam_sigma(self):
        z = np.linspace(-np.pi, np.pi, 101)
        sg = S.seam_sigma(z)
        assert np.abs(np.sinh(sg) ** 2 - np.abs(np.sin(z))).max() < 1e-14


class TestScherkChart:
    def test_implicit_consistency(self):
        for side in ("x", "y"):
            ch = S.scherk_chart(1.0, 8.0, 60, 64, side=side)
            res = (np.sinh(ch.s[:, None]) * np.sinh(ch.f)
                   - np.sin(ch.z[None, :]))
            assert np.abs(res).max() < 1e-12

    def test_decay_constant(self):
        ch = S.scherk_chart(1.0, 12.0, 200, 64)
        tail = np.abs(ch.f) * np.exp(ch.s[:, None])
        assert tail.max() <= 2.5
        # monotone decreasing tail of the per-row sup
        assert np.all(np.diff(tail.max(axis=1)) <= 1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            S.scherk_chart(1.0, 8.0, 10, 16, side="w")
        with pytest.raises(ValueError):
            S.scherk_chart(3.0, 2.0, 10, 16)


class TestMeshScherk:
    def test_euler_characteristic(self, period):
        nv, nf = len(period.vertices), len(period.faces)
        edges = np.sort(period.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), 1)
        ne = len(np.unique(edges, axis=0))
        assert nv - ne + nf == -2
        assert boundary_loop_count(period) == 4

    def test_implicit_consistency(self, period, patch):
        assert np.abs(S.implicit_value(period.vertices)).max() <= 1e-9
        assert np.abs(S.implicit_value(patch.mesh.vertices)).max() <= 1e-9

    def test_symmetry_invariance(self, period):
        v = period.vertices
        assert set_distance(S.omega0(v), v) <= 1e-9
        assert set_distance(S.xi0(v), v) <= 1e-9

    def test_s_function(self, period):
        expect = np.maximum(np.abs(period.vertices[:, 0]),
                            np.abs(period.vertices[:, 1]))
        assert np.array_equal(period.s, expect)

    def test_region_tags(self, period):
        from shrinker.mesh import REGIONS
        on_seam = (np.abs(period.vertices[:, 0])
                   == np.abs(period.vertices[:, 1]))
        assert np.array_equal(period.region == REGIONS["core"], on_seam)
        for tag in ("end_x_plus", "end_x_minus", "end_y_plus", "end_y_minus"):
            assert np.any(period.region == REGIONS[tag])

    def test_minimality(self, patch, frames):
        w = patch.interior_weight()
        assert np.abs(frames.mean_curvature[w]).max() <= 3e-3

    def test_minimality_refinement_order(self, patch, frames):
        coarse = S.scherk_patch(n_s=24, n_z=160)
        hc = np.abs(G.vertex_frames(coarse.mesh).mean_curvature
                    [coarse.interior_weight()]).max()
        hf = np.abs(frames.mean_curvature[patch.interior_weight()]).max()
        order = np.log2(hc / hf)
        assert order >= 1.7
        # off-seam stencils are clean second order; the welded seam rows
        # limit the asymptotic rate (see the refinement notes)
        sm = patch.mesh
        off = patch.interior_weight() & (np.abs(np.abs(sm.vertices[:, 0])
                                                - np.abs(sm.vertices[:, 1]))
                                         > 1e-9)
        coff = coarse.interior_weight() & (
            np.abs(np.abs(coarse.mesh.vertices[:, 0])
                   - np.abs(coarse.mesh.vertices[:, 1])) > 1e-9)
        hc_i = np.abs(G.vertex_frames(coarse.mesh).mean_curvature[coff]).max()
        hf_i = np.abs(frames.mean_curvature[off]).max()
        assert np.log2(hc_i / hf_i) >= 1.7

    def test_resolution_validation(self):
        with pytest.raises(ValueError):
            S.mesh_scherk(s_max=1.0)
        with pytest.raises(ValueError):
            S.mesh_scherk(n_z=15)
        with pytest.raises(ValueError):
            S.mesh_scherk(n_s=2)
        with pytest.raises(ValueError):
            S.scherk_patch(ghost=1)
        with pytest.raises(ValueError):
            S.scherk_patch(n_z=16, ghost=5)

    def test_patch_principal_count(self, patch):
        # principal vertices tile exactly one period
        assert patch.principal.sum() == len(S.mesh_scherk().vertices)


class TestGaussTransfer:
    def test_coordinate_function(self, patch, frames):
        # a Gauss-map-composed function transfers to itself on the sphere
        u = S.gauss_pullback(patch, lambda nu: nu[:, 0], frames=frames)
        gf = S.gauss_transfer(patch, u, frames=frames)
        assert np.abs(gf.values - gf.points[:, 0]).max() < 1e-12

    def test_round_trip(self, patch, frames):
        v = patch.mesh.vertices
        u = np.sin(v[:, 0]) * np.cos(v[:, 2]) + 0.3 * v[:, 1]
        gf = S.gauss_transfer(patch, u, frames=frames)
        back = S.gauss_pullback(patch, gf, frames=frames)
        assert np.abs(back[gf.source_index] - u[gf.source_index]).max() < 1e-6

    def test_excluded_samples(self, patch, frames):
        gf = S.gauss_transfer(patch, np.ones(len(patch.mesh.vertices)),
                              frames=frames, s_cut=4.0)
        assert np.all(patch.mesh.s[gf.source_index] <= 4.0)
        outside = patch.interior_weight() & (patch.mesh.s > 4.0)
        assert outside.any()
        assert not np.isin(np.nonzero(outside)[0], gf.source_index).any()

    def test_area_identity(self, patch, frames):
        total = S.curvature_area(patch, frames)
        assert abs(total - 4 * np.pi) < 0.01 * 4 * np.pi

    def test_conformality(self, patch):
        mesh = patch.mesh
        F = mesh.faces
        keep = ((mesh.s[F] <= 4).all(axis=1)
                & (~mesh.boundary_vertex[F]).all(axis=1)
                & patch.principal[F].all(axis=1))
        tri = mesh.vertices[F[keep]]
        img = S.implicit_normal(mesh.vertices)[F[keep]]

        def tri_angles(t):
            a, b, c = t[:, 1] - t[:, 0], t[:, 2] - t[:, 0], t[:, 2] - t[:, 1]

            def ang(u, v):
                cs = (np.einsum("ij,ij->i", u, v)
                      / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)))
                return np.degrees(np.arccos(np.clip(cs, -1, 1)))

            return np.stack([ang(a, b), ang(-a, c), ang(-b, -c)], axis=1)

        distortion = np.abs(tri_angles(tri) - tri_angles(img)).max()
        assert distortion <= 2.0

    def test_kernel_spectral(self):
        # the coordinate function x spans the relevant sphere kernel:
        # (Delta_S2 + 2) x = 0, checked on its spherical-harmonic expansion
        nth, nph = 32, 64
        xg, wg = np.polynomial.legendre.leggauss(nth)
        theta = np.arccos(xg)
        phi = np.arange(nph) * (2 * np.pi / nph)
        T, P = np.meshgrid(theta, phi, indexing="ij")
        f = np.sin(T) * np.cos(P)
        cmax, res = 0.0, 0.0
        for ell in range(8):
            for m in range(-ell, ell + 1):
                Y = sph_harm_y(ell, m, T, P)
                c = np.sum(np.conj(Y) * f * wg[:, None]) * (2 * np.pi / nph)
                cmax = max(cmax, abs(c))
                res = max(res, abs((2.0 - ell * (ell + 1)) * c))
        assert res <= 1e-10 * cmax


class TestW0:
    def test_r_theta_derivative(self):
        assert abs(S.r_theta_derivative() - 0.574) < 2e-3

    def test_pairing_8pi(self, patch, w0):
        assert abs(S.pairing(patch, w0) - 8 * np.pi) < 0.02 * 8 * np.pi

    def test_support(self, patch, w0):
        w = patch.interior_weight()
        far = w & (patch.mesh.s >= 4.0)
        assert np.abs(w0[far]).max() <= 1e-3 * np.abs(w0[w]).max()

    def test_equivariance_pairings(self, patch, w0):
        for e in ((0.0, 1.0, 0.0), (0.0, 0.0, 1.0)):
            assert abs(S.pairing(patch, w0, e)) <= 1e-3 * 8 * np.pi

    def test_step_drift_error(self):
        coarse = S.scherk_patch(n_s=24, n_z=160)
        with pytest.raises(RuntimeError):
            S.w0_field(coarse, steps=(0.5, 1e-4))
