"""Indexed triangle meshes and the test-surface primitives.

A :class:`TriMesh` carries vertex positions, faces, a per-vertex region tag,
boundary flags and an optional symmetry-orbit id.  Meshes are treated as
immutable after construction: all editing operations return new meshes.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

# region tag codes (uint8); names are stable across serialization
REGIONS = {
    "core": 0,
    "end_x_plus": 1,
    "end_x_minus": 2,
    "end_y_plus": 3,
    "end_y_minus": 4,
    "transition": 5,
}
REGION_NAMES = {v: k for k, v in REGIONS.items()}


class MeshError(ValueError):
    pass


class TriMesh:
    """Oriented manifold triangle mesh with per-vertex metadata.

    Parameters
    ----------
    vertices : (n, 3) float array
    faces : (m, 3) int array
        Counterclockwise triples of vertex indices.
    region : (n,) uint8 array, optional
        Region tag per vertex (codes in ``REGIONS``); defaults to core.
    orbit : (n,) int array, optional
        Symmetry-orbit id per vertex, -1 when unassigned.
    s : (n,) float array, optional
        The per-vertex chart coordinate s where meaningful (Scherk/core).
    """

    def __init__(self, vertices, faces, region=None, orbit=None, s=None,
                 validate=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        n = len(self.vertices)
        if region is None:
            region = np.zeros(n, dtype=np.uint8)
        self.region = np.asarray(region, dtype=np.uint8)
        if orbit is None:
            orbit = np.full(n, -1, dtype=np.int64)
        self.orbit = np.asarray(orbit, dtype=np.int64)
        self.s = None if s is None else np.asarray(s, dtype=np.float64)
        self._cache = {}
        if validate:
            self.validate()

    # -- structural checks -------------------------------------------------

    def validate(self):
        n = len(self.vertices)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must be (n, 3)")
        if not np.all(np.isfinite(self.vertices)):
            raise MeshError("non-finite vertex position")
        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= n):
            raise MeshError("face references invalid vertex index")
        if len(self.region) != n or len(self.orbit) != n:
            raise MeshError("per-vertex arrays must match vertex count")
        # each undirected interior edge must appear once in each direction
        he = self.halfedges()
        order = np.lexsort((he[:, 1], he[:, 0]))
        he_sorted = he[order]
        dup = np.all(he_sorted[1:] == he_sorted[:-1], axis=1)
        if np.any(dup):
            i = np.nonzero(dup)[0][0]
            raise MeshError(
                f"non-manifold or inconsistently oriented edge {tuple(he_sorted[i])}")
        # boundary loops closed: boundary half-edges chain with out-degree 1
        b = self.boundary_halfedges()
        if len(b):
            starts = np.bincount(b[:, 0], minlength=n)
            ends = np.bincount(b[:, 1], minlength=n)
            if np.any(starts > 1) or np.any((starts > 0) != (ends > 0)):
                raise MeshError("boundary is not a union of closed loops")

    # -- derived connectivity (cached) -------------------------------------

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def halfedges(self):
        """All directed edges (3m, 2), one per face corner."""
        def build():
            f = self.faces
            return np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        return self._cached("halfedges", build)

    def boundary_halfedges(self):
        """Directed boundary edges (oriented with their face)."""
        def build():
            he = self.halfedges()
            n = len(self.vertices)
            key = he[:, 0] * n + he[:, 1]
            rkey = he[:, 1] * n + he[:, 0]
            has_twin = np.isin(key, rkey)
            return he[~has_twin]
        return self._cached("boundary_halfedges", build)

    @property
    def boundary_vertex(self):
        """Boolean mask of vertices on the boundary."""
        def build():
            mask = np.zeros(len(self.vertices), dtype=bool)
            b = self.boundary_halfedges()
            if len(b):
                mask[b.ravel()] = True
            return mask
        return self._cached("boundary_vertex", build)

    def adjacency(self):
        """Symmetric vertex adjacency as a boolean CSR matrix."""
        def build():
            he = self.halfedges()
            n = len(self.vertices)
            a = sparse.coo_matrix(
                (np.ones(len(he), dtype=bool), (he[:, 0], he[:, 1])),
                shape=(n, n)).tocsr()
            a = (a + a.T).astype(bool)
            return a
        return self._cached("adjacency", build)

    # -- topology -----------------------------------------------------------

    def euler_characteristic(self):
        he = self.halfedges()
        n_edges = (len(he) + len(self.boundary_halfedges())) // 2
        return len(self.vertices) - n_edges + len(self.faces)

    def boundary_loops(self):
        """List of vertex-index loops, one per boundary component."""
        b = self.boundary_halfedges()
        nxt = dict(map(tuple, b))
        loops = []
        seen = set()
        for start in nxt:
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            v = nxt[start]
            while v != start:
                loop.append(v)
                seen.add(v)
                v = nxt[v]
            loops.append(loop)
        return loops

    def genus(self):
        """Genus from χ = 2 − 2g − #boundary loops (connected mesh)."""
        chi = self.euler_characteristic()
        return (2 - chi - len(self.boundary_loops())) // 2

    # -- editing (returns new meshes) ---------------------------------------

    def with_vertices(self, vertices):
        return TriMesh(vertices, self.faces, self.region, self.orbit, self.s,
                       validate=False)

    def flipped(self):
        """Reverse orientation of every face."""
        return TriMesh(self.vertices, self.faces[:, ::-1], self.region,
                       self.orbit, self.s, validate=False)

    def subdivided(self):
        """Midpoint (1-to-4) subdivision; region tags propagate by endpoint max."""
        n = len(self.vertices)
        he = self.halfedges()
        und = np.sort(he, axis=1)
        edges, inverse = np.unique(und, axis=0, return_inverse=True)
        mid = 0.5 * (self.vertices[edges[:, 0]] + self.vertices[edges[:, 1]])
        verts = np.vstack([self.vertices, mid])
        m = len(self.faces)
        # edge-midpoint index per face corner, corner order (01, 12, 20)
        e01 = n + inverse[0 * m:1 * m]
        e12 = n + inverse[1 * m:2 * m]
        e20 = n + inverse[2 * m:3 * m]
        f = self.faces
        faces = np.concatenate([
            np.stack([f[:, 0], e01, e20], axis=1),
            np.stack([f[:, 1], e12, e01], axis=1),
            np.stack([f[:, 2], e20, e12], axis=1),
            np.stack([e01, e12, e20], axis=1),
        ])
        region = np.concatenate([
            self.region, np.maximum(self.region[edges[:, 0]],
                                    self.region[edges[:, 1]])])
        s = None
        if self.s is not None:
            s = np.concatenate([self.s,
                                0.5 * (self.s[edges[:, 0]] + self.s[edges[:, 1]])])
        return TriMesh(verts, faces, region, s=s, validate=False)


def _grid_faces(ni, nj, wrap_j=False):
    """Faces for a structured (ni, nj) vertex grid, row-major indexing."""
    i = np.arange(ni - 1)[:, None]
    j = np.arange(nj if wrap_j else nj - 1)[None, :]
    jn = (j + 1) % nj if wrap_j else j + 1
    v00 = (i * nj + j).ravel()
    v01 = (i * nj + jn).ravel()
    v10 = ((i + 1) * nj + j).ravel()
    v11 = ((i + 1) * nj + jn).ravel()
    return np.concatenate([
        np.stack([v00, v10, v11], axis=1),
        np.stack([v00, v11, v01], axis=1),
    ])


# -- test primitives ---------------------------------------------------------

_ICOSA_T = (1.0 + np.sqrt(5.0)) / 2.0
_ICOSA_VERTS = np.array([
    [-1, _ICOSA_T, 0], [1, _ICOSA_T, 0], [-1, -_ICOSA_T, 0], [1, -_ICOSA_T, 0],
    [0, -1, _ICOSA_T], [0, 1, _ICOSA_T], [0, -1, -_ICOSA_T], [0, 1, -_ICOSA_T],
    [_ICOSA_T, 0, -1], [_ICOSA_T, 0, 1], [-_ICOSA_T, 0, -1], [-_ICOSA_T, 0, 1],
], dtype=float)
_ICOSA_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
])


def icosphere(subdivisions=4, radius=1.0):
    """Geodesic sphere with outward orientation; 20·4^subdivisions faces."""
    mesh = TriMesh(_ICOSA_VERTS / np.linalg.norm(_ICOSA_VERTS[0]),
                   _ICOSA_FACES, validate=False)
    for _ in range(subdivisions):
        mesh = mesh.subdivided()
        v = mesh.vertices
        mesh = mesh.with_vertices(v / np.linalg.norm(v, axis=1)[:, None])
    return mesh.with_vertices(mesh.vertices * radius)


def plane_patch(halfwidth=1.0, n=41, z=0.0):
    """Square patch of the plane {z = const}, centered on the z-axis."""
    t = np.linspace(-halfwidth, halfwidth, n)
    xx, yy = np.meshgrid(t, t, indexing="ij")
    verts = np.stack([xx.ravel(), yy.ravel(), np.full(xx.size, z)], axis=1)
    return TriMesh(verts, _grid_faces(n, n), validate=False)


def cylinder_patch(radius=np.sqrt(2.0), half_height=1.0, n_axial=31, n_angle=64):
    """Closed-in-angle cylinder about the z-axis, boundary at the two rims."""
    zs = np.linspace(-half_height, half_height, n_axial)
    th = np.arange(n_angle) * (2 * np.pi / n_angle)
    zz, tt = np.meshgrid(zs, th, indexing="ij")
    verts = np.stack([radius * np.cos(tt).ravel(),
                      radius * np.sin(tt).ravel(), zz.ravel()], axis=1)
    return TriMesh(verts, _grid_faces(n_axial, n_angle, wrap_j=True),
                   validate=False)


def disk_patch(radius=1.0, n_radial=20, n_angle=64, z=0.0):
    """Flat disk in {z = const} with a central fan, boundary at the rim."""
    rs = radius * np.arange(1, n_radial + 1) / n_radial
    th = np.arange(n_angle) * (2 * np.pi / n_angle)
    rr, tt = np.meshgrid(rs, th, indexing="ij")
    ring = np.stack([rr.ravel() * np.cos(tt.ravel()),
                     rr.ravel() * np.sin(tt.ravel()),
                     np.full(rr.size, z)], axis=1)
    verts = np.vstack([[[0.0, 0.0, z]], ring])
    faces = [_grid_faces(n_radial, n_angle, wrap_j=True) + 1]
    j = np.arange(n_angle)
    fan = np.stack([np.zeros(n_angle, dtype=int), 1 + j, 1 + (j + 1) % n_angle],
                   axis=1)
    faces.append(fan)
    return TriMesh(verts, np.concatenate(faces), validate=False)
