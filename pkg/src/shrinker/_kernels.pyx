# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-vertex quadric-fit kernel.

Fits zeta = 1/2 a xi^2 + b xi eta + 1/2 c eta^2 + d xi + e eta over the
2-ring of each vertex in its tangent frame and returns [a, b, c, d, e].
Mirrors shrinker._kernels_py.quadric_fit exactly.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef int _solve5(double g[5][5], double rhs[5], double out[5]) noexcept nogil:
    # Gaussian elimination with partial pivoting on the 5x5 normal equations
    cdef int i, j, k, piv
    cdef double best, factor, tmp
    for k in range(5):
        piv = k
        best = g[k][k] if g[k][k] >= 0 else -g[k][k]
        for i in range(k + 1, 5):
            tmp = g[i][k] if g[i][k] >= 0 else -g[i][k]
            if tmp > best:
                best = tmp
                piv = i
        if best == 0.0:
            return 1
        if piv != k:
            for j in range(5):
                tmp = g[k][j]; g[k][j] = g[piv][j]; g[piv][j] = tmp
            tmp = rhs[k]; rhs[k] = rhs[piv]; rhs[piv] = tmp
        for i in range(k + 1, 5):
            factor = g[i][k] / g[k][k]
            for j in range(k, 5):
                g[i][j] -= factor * g[k][j]
            rhs[i] -= factor * rhs[k]
    for k in range(4, -1, -1):
        tmp = rhs[k]
        for j in range(k + 1, 5):
            tmp -= g[k][j] * out[j]
        out[k] = tmp / g[k][k]
    return 0


def quadric_fit(double[:, ::1] vertices, double[:, ::1] normals,
                double[:, ::1] t1, double[:, ::1] t2,
                long long[::1] indptr, long long[::1] indices):
    cdef Py_ssize_t n = vertices.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] coeffs = np.zeros((n, 5))
    cdef double[:, ::1] out = coeffs
    cdef Py_ssize_t i, p, j, a, b
    cdef double rel0, rel1, rel2, xi, eta, zeta, tr
    cdef double row[5]
    cdef double g[5][5]
    cdef double rhs[5]
    cdef double sol[5]
    with nogil:
        for i in range(n):
            for a in range(5):
                rhs[a] = 0.0
                for b in range(5):
                    g[a][b] = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                rel0 = vertices[j, 0] - vertices[i, 0]
                rel1 = vertices[j, 1] - vertices[i, 1]
                rel2 = vertices[j, 2] - vertices[i, 2]
                xi = rel0 * t1[i, 0] + rel1 * t1[i, 1] + rel2 * t1[i, 2]
                eta = rel0 * t2[i, 0] + rel1 * t2[i, 1] + rel2 * t2[i, 2]
                zeta = (rel0 * normals[i, 0] + rel1 * normals[i, 1]
                        + rel2 * normals[i, 2])
                row[0] = 0.5 * xi * xi
                row[1] = xi * eta
                row[2] = 0.5 * eta * eta
                row[3] = xi
                row[4] = eta
                for a in range(5):
                    rhs[a] += row[a] * zeta
                    for b in range(5):
                        g[a][b] += row[a] * row[b]
            tr = g[0][0] + g[1][1] + g[2][2] + g[3][3] + g[4][4]
            for a in range(5):
                g[a][a] += 1e-14 * tr + 1e-300
            if _solve5(g, rhs, sol) == 0:
                for a in range(5):
                    out[i, a] = sol[a]
    return coeffs
