"""Numeric spectra of the stability operators on the model pieces.

Three separated 1D eigenproblems, discretized with P1 finite elements and
solved by shift-invert Lanczos:

  * the Laplacian on the round unit sphere (azimuthal modes m),
  * the Dirichlet Laplacian plus 4 on the unit hemisphere,
  * the planar oscillator Delta - |x|^2/16 + 1 on centered disks,
    Dirichlet on the rim.

The report records the eigenvalues nearest zero, i.e. the invertibility
margins used by the global solve.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import eigsh

__all__ = [
    "sturm_liouville_eigs",
    "sphere_laplacian_eigs",
    "hemisphere_operator_eigs",
    "disk_oscillator_eigs",
    "SpectraReport",
    "spectra",
]

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)


def sturm_liouville_eigs(grid, p, q, w, dirichlet=(True, True), k=12,
                         sigma=0.0):
    """Eigenvalues of (p u')'/w - (q/w) u = lambda u on the grid.

    p, q, w are callables of the grid variable; q may be integrably
    singular at the endpoints (sampled only at interior Gauss points).
    Returns the k eigenvalues closest to sigma, ascending."""
    x = np.asarray(grid, dtype=float)
    n = len(x)
    h = np.diff(x)
    # element Gauss points and weights
    xm = 0.5 * (x[:-1] + x[1:])
    gx = xm[:, None] + 0.5 * h[:, None] * _GAUSS_X[None, :]
    gw = 0.5 * h[:, None] * _GAUSS_W[None, :]
    pv, qv, wv = p(gx), q(gx), w(gx)
    # P1 basis on each element: left node (1-t)/..., right node
    tl = (x[1:, None] - gx) / h[:, None]
    tr = (gx - x[:-1, None]) / h[:, None]
    k_e = np.sum(pv * gw, axis=1) / h**2  # stiffness element integral
    q_ll = np.sum(qv * tl * tl * gw, axis=1)
    q_lr = np.sum(qv * tl * tr * gw, axis=1)
    q_rr = np.sum(qv * tr * tr * gw, axis=1)
    m_ll = np.sum(wv * tl * tl * gw, axis=1)
    m_lr = np.sum(wv * tl * tr * gw, axis=1)
    m_rr = np.sum(wv * tr * tr * gw, axis=1)

    def assemble(dll, dlr, drr):
        diag = np.zeros(n)
        np.add.at(diag, np.arange(n - 1), dll)
        np.add.at(diag, np.arange(1, n), drr)
        rows = np.concatenate([np.arange(n), np.arange(n - 1),
                               np.arange(1, n)])
        cols = np.concatenate([np.arange(n), np.arange(1, n),
                               np.arange(n - 1)])
        vals = np.concatenate([diag, dlr, dlr])
        return rows, cols, vals

    rA = assemble(-(k_e + q_ll), k_e - q_lr, -(k_e + q_rr))
    rM = assemble(m_ll, m_lr, m_rr)
    keep = np.ones(n, dtype=bool)
    if dirichlet[0]:
        keep[0] = False
    if dirichlet[1]:
        keep[-1] = False
    idx = -np.ones(n, dtype=int)
    idx[keep] = np.arange(keep.sum())

    def reduce(rows, cols, vals):
        ok = keep[rows] & keep[cols]
        return csc_matrix((vals[ok], (idx[rows[ok]], idx[cols[ok]])),
                          shape=(keep.sum(), keep.sum()))

    A = reduce(*rA)
    M = reduce(*rM)
    k = min(k, A.shape[0] - 2)
    vals = eigsh(A, k=k, M=M, sigma=sigma, which="LM",
                 return_eigenvectors=False)
    return np.sort(vals)


def sphere_laplacian_eigs(m: int = 0, n: int = 3000, k: int = 12,
                          hemisphere: bool = False):
    """Eigenvalues of Delta_{S^2} in azimuthal mode m (full sphere) or of
    the Dirichlet problem on the upper hemisphere."""
    top = np.pi / 2 if hemisphere else np.pi
    theta = np.linspace(0.0, top, n + 1)
    return sturm_liouville_eigs(
        theta, p=np.sin,
        q=(lambda t: m**2 / np.sin(t)) if m else (lambda t: 0.0 * t),
        w=np.sin,
        dirichlet=(m > 0, True if hemisphere else m > 0),
        k=k, sigma=0.5)


def hemisphere_operator_eigs(n: int = 3000, m_max: int = 4, k: int = 8):
    """Eigenvalues of Delta + 4 on the Dirichlet hemisphere, nearest 0."""
    vals = np.concatenate([
        sphere_laplacian_eigs(m, n=n, k=k, hemisphere=True) + 4.0
        for m in range(m_max + 1)])
    return np.sort(vals)


def disk_oscillator_eigs(radius: float, m: int = 0, n: int = 2000,
                         k: int = 8):
    """Eigenvalues of Delta - |x|^2/16 + 1 in azimuthal mode m on the
    Dirichlet disk of the given radius."""
    r = np.linspace(0.0, radius, n + 1)
    return sturm_liouville_eigs(
        r, p=lambda t: t,
        q=lambda t: (m**2 / t if m else 0.0 * t) + t**3 / 16.0 - t,
        w=lambda t: t,
        dirichlet=(m > 0, True),
        k=k, sigma=0.01)


@dataclass
class SpectraReport:
    """Eigenvalue tables and the invertibility margins derived from them."""

    sphere_eigenvalues: np.ndarray
    hemisphere_eigenvalues: np.ndarray
    disk_eigenvalues: dict
    sphere_targets: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.sphere_targets is None:
            kk = np.arange(6)
            self.sphere_targets = -kk * (kk + 1.0)

    @property
    def hemisphere_margin(self):
        return float(np.abs(self.hemisphere_eigenvalues).min())

    @property
    def disk_margins(self):
        return {rad: float(np.abs(v).min())
                for rad, v in self.disk_eigenvalues.items()}


def spectra(n: int = 3000, m_max: int = 5) -> SpectraReport:
    """Compute the three eigenvalue tables at the default resolutions."""
    sphere = np.sort(np.concatenate([
        sphere_laplacian_eigs(m, n=n) for m in range(m_max + 1)]))
    hemi = hemisphere_operator_eigs(n=n, m_max=m_max)
    disks = {}
    for radius in (np.sqrt(2.0), 2.0):
        disks[radius] = np.sort(np.concatenate([
            disk_oscillator_eigs(radius, m, n=max(n // 2, 1000))
            for m in range(m_max + 1)]))
    return SpectraReport(sphere, hemi, disks)
