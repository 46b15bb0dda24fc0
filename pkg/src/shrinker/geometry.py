"""Discrete surface geometry: frames, shrinker residual, normal graphs and
the linearized (stability) operator.

Sign conventions are pinned by the exact shrinkers: outward-oriented unit
sphere has H = 2, so the radius-2 sphere, the plane through the origin and
the radius sqrt(2) cylinder all satisfy F = H - 1/2 tau^2 <X, nu> = 0 at
tau = 1.

All position-level computations below accept complex vertex arrays so the
exact discrete Jacobian can be obtained by complex-step differentiation;
norms use the analytic sqrt(sum v*v), never the Hermitian norm, and metric
branch decisions (obtuse-triangle tests) look at real parts only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import kernels
from .mesh import MeshError, TriMesh


class DegenerateFaceError(MeshError):
    pass


class GraphTooLargeError(ValueError):
    pass


def _anorm(v):
    """Analytic vector norm along the last axis (complex-step safe)."""
    return np.sqrt(np.einsum("...i,...i->...", v, v))


def _face_data(X, faces):
    """Corner cotangents, mixed Voronoi corner areas, face area vectors.

    Returns (cots (m,3), corner_areas (m,3), face_normal_vec (m,3)) where
    cots[:, c] is the cotangent at corner c and face_normal_vec has length
    equal to the face area.
    """
    p = X[faces]  # (m, 3, 3)
    e0 = p[:, 2] - p[:, 1]  # edge opposite corner 0
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    nvec = 0.5 * np.cross(e2, -e1)
    area = _anorm(nvec)
    if np.any(area.real < 1e-14):
        bad = int(np.argmin(area.real))
        raise DegenerateFaceError(f"degenerate face {bad} (area {area.real[bad]:.3e})")
    twoa = 2.0 * area
    # cot at corner c = dot of the two emanating edges / (2 area)
    c0 = np.einsum("ij,ij->i", -e1, e2) / twoa
    c1 = np.einsum("ij,ij->i", -e2, e0) / twoa
    c2 = np.einsum("ij,ij->i", -e0, e1) / twoa
    cots = np.stack([c0, c1, c2], axis=1)
    l2 = np.stack([np.einsum("ij,ij->i", e0, e0),
                   np.einsum("ij,ij->i", e1, e1),
                   np.einsum("ij,ij->i", e2, e2)], axis=1)
    # mixed Voronoi corner areas: circumcentric split on non-obtuse faces,
    # (1/2, 1/4, 1/4) split on obtuse ones so every contribution stays
    # positive; the branch is decided on real parts only, so complex-step
    # differentiation stays on one branch
    voronoi = (l2[:, [1, 2, 0]] * cots[:, [1, 2, 0]]
               + l2[:, [2, 0, 1]] * cots[:, [2, 0, 1]]) / 8.0
    obtuse_corner = cots.real < 0.0
    face_obtuse = obtuse_corner.any(axis=1)
    clamped = np.where(obtuse_corner, 0.5, 0.25) * area[:, None]
    corner_areas = np.where(face_obtuse[:, None], clamped, voronoi)
    return cots, corner_areas, nvec


def _vertex_areas_normals(X, faces, n):
    _, corner_areas, nvec = _face_data(X, faces)
    areas = np.zeros(n, dtype=X.dtype)
    np.add.at(areas, faces.ravel(), corner_areas.ravel())
    if np.any(areas.real <= 0):
        bad = int(np.argmin(areas.real))
        raise MeshError(f"non-positive Voronoi area at vertex {bad}; "
                        "mesh quality too low (many obtuse triangles)")
    normals = np.zeros((n, 3), dtype=X.dtype)
    np.add.at(normals, faces.ravel(),
              np.repeat(nvec, 3, axis=0).reshape(len(faces), 3, 3).reshape(-1, 3))
    normals = normals / _anorm(normals)[:, None]
    return areas, normals


def _cot_laplace_sum(X, faces, values):
    """Sum_j w_ij (values_j - values_i) with cotangent weights, unscaled."""
    cots, _, _ = _face_data(X, faces)
    n = len(X)
    out = np.zeros((n,) + values.shape[1:], dtype=np.result_type(X, values))
    for c, (a, b) in enumerate([(1, 2), (2, 0), (0, 1)]):
        ia, ib = faces[:, a], faces[:, b]
        w = 0.5 * cots[:, c]
        diff = values[ib] - values[ia]
        np.add.at(out, ia, w[:, None] * diff if diff.ndim == 2 else w * diff)
        np.add.at(out, ib, -(w[:, None] * diff) if diff.ndim == 2 else -(w * diff))
    return out


def residual_from_positions(X, faces, tau):
    """Shrinker residual F = H - 1/2 tau^2 <X, nu> from raw positions.

    Complex-step safe; this is the function every Jacobian is a derivative of.
    """
    n = len(X)
    areas, normals = _vertex_areas_normals(X, faces, n)
    lap_x = _cot_laplace_sum(X, faces, X) / areas[:, None]
    h = -np.einsum("ij,ij->i", lap_x, normals)
    return h - 0.5 * tau**2 * np.einsum("ij,ij->i", X, normals)


@dataclass
class VertexFrames:
    """Per-vertex frames as parallel arrays.

    ``low_accuracy`` flags boundary vertices whose one-sided stencils are not
    trusted in residual norms.
    """

    normal: np.ndarray
    mean_curvature: np.ndarray
    second_form_norm_sq: np.ndarray
    voronoi_area: np.ndarray
    low_accuracy: np.ndarray

    def __len__(self):
        return len(self.mean_curvature)


def tangent_frames(normals):
    """An orthonormal tangent pair (t1, t2) for each unit normal."""
    ref = np.zeros_like(normals)
    use_y = np.abs(normals[:, 0]) > 0.9
    ref[:, 0] = ~use_y
    ref[:, 1] = use_y
    t1 = ref - np.einsum("ij,ij->i", ref, normals)[:, None] * normals
    t1 = t1 / np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(normals, t1)
    return t1, t2


def two_ring(mesh: TriMesh):
    """CSR (indptr, indices) of the 2-ring neighbourhood, self excluded."""
    a = mesh.adjacency()
    a2 = ((a + a @ a) > 0).tolil()
    a2.setdiag(False)
    a2 = a2.tocsr()
    return a2.indptr.astype(np.int64), a2.indices.astype(np.int64)


def vertex_frames(mesh: TriMesh) -> VertexFrames:
    """Normals, cotangent mean curvature, quadric |A|^2, Voronoi areas.

    The quadric shape operator's trace is corrected to the cotangent mean
    curvature so that |A|^2 >= H^2/2 holds exactly (the two estimators are
    otherwise independent and would violate Cauchy-Schwarz at discretization
    level on umbilic surfaces).
    """
    X = mesh.vertices
    n = len(X)
    areas, normals = _vertex_areas_normals(X, faces=mesh.faces, n=n)
    lap_x = _cot_laplace_sum(X, mesh.faces, X) / areas[:, None]
    h = -np.einsum("ij,ij->i", lap_x, normals)
    t1, t2 = tangent_frames(normals)
    indptr, indices = two_ring(mesh)
    co = kernels.quadric_fit(X, normals, t1, t2, indptr, indices)
    a, b, c, d, e = co.T
    # graph height is measured along nu while H = -Delta X . nu curves the
    # other way; flip so tr W matches the cotangent H sign convention
    a, b, c = -a, -b, -c
    # shape operator of the graph zeta over the tangent plane at the origin,
    # first-order terms kept for stencil-asymmetry robustness
    denom = np.sqrt(1.0 + d * d + e * e)
    g11 = 1.0 + d * d
    g12 = d * e
    g22 = 1.0 + e * e
    det = g11 * g22 - g12 * g12
    # W = g^{-1} Hess / sqrt(1+|grad|^2)
    w11 = (g22 * a - g12 * b) / (det * denom)
    w12 = (g22 * b - g12 * c) / (det * denom)
    w21 = (-g12 * a + g11 * b) / (det * denom)
    w22 = (-g12 * b + g11 * c) / (det * denom)
    tr_w = w11 + w22
    a2 = w11 * w11 + 2.0 * w12 * w21 + w22 * w22
    delta = 0.5 * (h - tr_w)
    a2 = a2 + 2.0 * delta * tr_w + 2.0 * delta * delta
    return VertexFrames(normal=normals, mean_curvature=h,
                        second_form_norm_sq=a2, voronoi_area=areas.real,
                        low_accuracy=mesh.boundary_vertex.copy())


def shrinker_residual(mesh: TriMesh, tau: float) -> np.ndarray:
    """F = H - 1/2 tau^2 <X, nu> per vertex (boundary values low-accuracy)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return residual_from_positions(mesh.vertices, mesh.faces, tau)


def normal_graph(mesh: TriMesh, u, safety: float = 0.3) -> TriMesh:
    """Move vertices to X + u nu along the current discrete normals."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (len(mesh.vertices),):
        raise ValueError("graph field must have one value per vertex")
    he = mesh.halfedges()
    edge_len = np.linalg.norm(mesh.vertices[he[:, 1]] - mesh.vertices[he[:, 0]],
                              axis=1)
    min_edge = np.full(len(mesh.vertices), np.inf)
    np.minimum.at(min_edge, he[:, 0], edge_len)
    np.minimum.at(min_edge, he[:, 1], edge_len)
    bad = np.abs(u) > safety * min_edge
    if np.any(bad):
        i = int(np.argmax(np.abs(u) - safety * min_edge))
        raise GraphTooLargeError(
            f"graph height {u[i]:.3e} at vertex {i} exceeds "
            f"{safety:.2f} x min edge {min_edge[i]:.3e}")
    _, normals = _vertex_areas_normals(mesh.vertices, mesh.faces,
                                       len(mesh.vertices))
    return mesh.with_vertices(mesh.vertices + u[:, None] * normals.real)


def linearized_apply(mesh: TriMesh, tau: float, u, method: str = "exact"):
    """L u where L = -d/dt F(S_{tu}), the stability operator.

    method="exact" differentiates the discrete residual itself (complex
    step, machine precision); method="assembled" applies the smooth-operator
    discretization Delta u + |A|^2 u - 1/2 tau^2 (X . grad u - u).
    """
    u = np.asarray(u, dtype=np.float64)
    if method == "assembled":
        return linearized_matrix(mesh, tau, method="assembled") @ u
    _, normals = _vertex_areas_normals(mesh.vertices, mesh.faces,
                                       len(mesh.vertices))
    hstep = 1e-80
    xc = mesh.vertices + (1j * hstep) * u[:, None] * normals.real
    f = residual_from_positions(xc, mesh.faces, tau)
    return -f.imag / hstep


def _color_columns(mesh: TriMesh):
    """Greedy distance-2 coloring so same-color Jacobian columns never share
    a row; returns an int color per vertex."""
    a = mesh.adjacency().astype(np.int8)
    n = a.shape[0]
    a = a + sparse.eye(n, dtype=np.int8, format="csr")
    conflict = (a @ a).tocsr()
    colors = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        nbrs = conflict.indices[conflict.indptr[i]:conflict.indptr[i + 1]]
        used = set(colors[nbrs[nbrs < i]].tolist() if i else [])
        c = 0
        while c in used:
            c += 1
        colors[i] = c
    return colors


def linearized_matrix(mesh: TriMesh, tau: float, method: str = "exact"):
    """Sparse matrix of the stability operator L (n x n, CSR).

    "exact" is the negative Jacobian of the discrete residual with respect to
    normal-graph heights, column-compressed through a distance-2 coloring
    with one complex-step residual evaluation per color.  "assembled" is the
    cotangent-Laplacian + |A|^2 + drift discretization (cheaper, ~2%
    consistent, used for preconditioning and diagnostics).
    """
    n = len(mesh.vertices)
    if method == "assembled":
        frames = vertex_frames(mesh)
        lap = cot_laplacian(mesh)
        drift = gradient_dot(mesh, mesh.vertices)
        ident = sparse.eye(n, format="csr")
        pot = sparse.diags(frames.second_form_norm_sq)
        return (lap + pot - 0.5 * tau**2 * (drift - ident)).tocsr()
    if method != "exact":
        raise ValueError(f"unknown linearization method {method!r}")
    _, normals = _vertex_areas_normals(mesh.vertices, mesh.faces, n)
    normals = normals.real
    colors = _color_columns(mesh)
    a = mesh.adjacency().tocsc()
    hstep = 1e-80
    rows, cols, vals = [], [], []
    for c in range(colors.max() + 1):
        sel = colors == c
        xc = mesh.vertices + (1j * hstep) * (sel[:, None] * normals)
        df = residual_from_positions(xc, mesh.faces, tau).imag / hstep
        for j in np.nonzero(sel)[0]:
            r = a.indices[a.indptr[j]:a.indptr[j + 1]]
            r = np.append(r, j)
            rows.append(r)
            cols.append(np.full(len(r), j))
            vals.append(df[r])
    jac = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()
    return (-jac).tocsr()


def cot_laplacian(mesh: TriMesh):
    """Pointwise cotangent Laplace-Beltrami (mixed-Voronoi mass lumping)."""
    cots, corner_areas, _ = _face_data(mesh.vertices, mesh.faces)
    n = len(mesh.vertices)
    areas = np.zeros(n)
    np.add.at(areas, mesh.faces.ravel(), corner_areas.real.ravel())
    rows, cols, vals = [], [], []
    for c, (a, b) in enumerate([(1, 2), (2, 0), (0, 1)]):
        ia, ib = mesh.faces[:, a], mesh.faces[:, b]
        w = 0.5 * cots[:, c].real
        rows += [ia, ib, ia, ib]
        cols += [ib, ia, ia, ib]
        vals += [w, w, -w, -w]
    lap = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()
    return sparse.diags(1.0 / areas) @ lap


def gradient_dot(mesh: TriMesh, field):
    """Sparse operator u -> X . grad u (or v . grad u for a vector field v)
    built from per-face gradients averaged with mixed-area corner weights."""
    X = mesh.vertices
    faces = mesh.faces
    _, corner_areas, nvec = _face_data(X, faces)
    area = _anorm(nvec).real
    nhat = nvec.real / area[:, None]
    n = len(X)
    vert_w = np.zeros(n)
    np.add.at(vert_w, faces.ravel(), corner_areas.real.ravel())
    p = X[faces]
    v = np.asarray(field)[faces]  # per-corner drift vectors
    rows, cols, vals = [], [], []
    for c in range(3):
        # gradient of the hat function of corner c: rotate opposite edge
        opp = p[:, (c + 2) % 3] - p[:, (c + 1) % 3]
        grad_hat = np.cross(nhat, opp) / (2.0 * area[:, None])
        for corner in range(3):
            i = faces[:, corner]
            w = corner_areas[:, corner].real / vert_w[i]
            rows.append(i)
            cols.append(faces[:, c])
            vals.append(w * np.einsum("ij,ij->i", v[:, corner], grad_hat))
    return sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()


def gaussian_metric_diagnostics(x, nu):
    """Curvatures of the Gaussian metric e^{-|x|^2/4} delta at a point.

    ric_nn is Ric(nu, nu) for a g-unit normal nu (reduces to the textbook
    e^{|x|^2/4}(1 - |x|^2/16) when x . nu = 0, i.e. for planes through the
    origin); gauss_plane is the intrinsic curvature of such a plane.
    """
    x = np.asarray(x, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    r2 = float(x @ x)
    xn = float(x @ nu)
    scale = np.exp(r2 / 4.0)
    return {
        "ric_nn": scale * ((1.0 - r2 / 16.0) + xn * xn / 16.0),
        "gauss_plane": 0.5 * scale,
    }
