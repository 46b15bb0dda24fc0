"""Pure-numpy fallback for the per-vertex quadric-fit kernel.

Same contract as the compiled ``shrinker._kernels`` extension: least-squares
fit of the local height over the tangent plane by

    zeta = 1/2 a xi^2 + b xi eta + 1/2 c eta^2 + d xi + e eta

over the 2-ring neighbours of each vertex, returning the (n, 5) coefficient
array [a, b, c, d, e].  Vectorized over vertices with a padded gather.
"""

import numpy as np


def quadric_fit(vertices, normals, t1, t2, indptr, indices):
    n = len(vertices)
    counts = np.diff(indptr)
    kmax = int(counts.max()) if n else 0
    # padded neighbour index table; padding repeats the vertex itself and is
    # masked out of the normal equations
    pad = np.repeat(np.arange(n), kmax).reshape(n, kmax)
    cols = np.arange(kmax)[None, :]
    mask = cols < counts[:, None]
    pad[mask] = indices
    rel = vertices[pad] - vertices[:, None, :]
    xi = np.einsum("nkj,nj->nk", rel, t1)
    eta = np.einsum("nkj,nj->nk", rel, t2)
    zeta = np.einsum("nkj,nj->nk", rel, normals)
    w = mask.astype(np.float64)
    cols = np.stack([0.5 * xi * xi, xi * eta, 0.5 * eta * eta, xi, eta], axis=2)
    cols *= w[:, :, None]
    g = np.einsum("nki,nkj->nij", cols, cols)
    rhs = np.einsum("nki,nk->ni", cols, zeta * w)
    # relative Tikhonov floor keeps valence-poor stencils solvable without
    # perturbing well-posed fits
    tr = np.trace(g, axis1=1, axis2=2)
    g += (1e-14 * tr[:, None, None] + 1e-300) * np.eye(5)
    return np.linalg.solve(g, rhs[:, :, None])[:, :, 0]
