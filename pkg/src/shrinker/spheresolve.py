"""Helmholtz solve (Delta_{S^2} + 2) v = E - b w on the unit sphere.

The operator has a one-dimensional kernel in the admissible symmetry class
(functions even under z -> -z and odd under (x, z) -> (-x, -z)), spanned by
the ambient coordinate x.  The cokernel is crossed by the fixed field
w = 6x with <w, x> = 8 pi, so a unique constant b makes E - b w solvable;
the remaining degree-1 freedom is removed by subtracting v(1,0,0) x.

Fields are sampled on a Gauss-Legendre x uniform-longitude grid and the
solve is spectral in spherical harmonics.
"""

import warnings

import numpy as np
from scipy.special import sph_harm_y

__all__ = [
    "SymmetryProjectionWarning",
    "SphereSolution",
    "sphere_grid",
    "pairing_field",
    "symmetry_project",
    "sphere_solve",
]

PAIRING_CONSTANT = 8.0 * np.pi


class SymmetryProjectionWarning(UserWarning):
    """Input left the admissible symmetry class and was projected."""


def sphere_grid(n_theta: int = 64, n_phi: int = 128):
    """Quadrature grid: Gauss-Legendre in cos(theta), uniform phi.

    Returns (theta, phi, weights) with weights scaled so that
    sum(weights * f) integrates f over the sphere."""
    if n_phi % 4 != 0:
        raise ValueError("n_phi must be divisible by 4 for the symmetry maps")
    xg, wg = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(xg)
    phi = np.arange(n_phi) * (2.0 * np.pi / n_phi)
    weights = wg[:, None] * (2.0 * np.pi / n_phi) * np.ones((1, n_phi))
    return theta, phi, weights


def _points(theta, phi):
    st = np.sin(theta)[:, None]
    x = st * np.cos(phi)[None, :]
    y = st * np.sin(phi)[None, :]
    z = (np.cos(theta)[:, None] * np.ones_like(phi)[None, :])
    return x, y, z


def pairing_field(theta, phi):
    """The cokernel-crossing field w = 6x sampled on the grid."""
    return 6.0 * _points(theta, phi)[0]


def symmetry_project(values, n_theta, n_phi):
    """Project onto the class even in z -> -z, odd in (x,z) -> (-x,-z).

    On the grid: z -> -z is theta-index reversal; (x,z) -> (-x,-z) is
    theta reversal composed with phi -> pi - phi."""
    xi = values[::-1, :]
    j = (n_phi // 2 - np.arange(n_phi)) % n_phi
    om = values[::-1, :][:, j]
    om_xi = values[:, j]
    return 0.25 * (values + xi - om - om_xi)


_Y_CACHE = {}


def _harmonic_matrix(theta, phi, l_max):
    key = (len(theta), len(phi), l_max, theta.tobytes())
    if key not in _Y_CACHE:
        T = theta[:, None] * np.ones_like(phi)[None, :]
        P = np.ones_like(theta)[:, None] * phi[None, :]
        cols, degs = [], []
        for ell in range(l_max + 1):
            Y0 = sph_harm_y(ell, 0, T, P).real
            cols.append(Y0)
            degs.append(ell)
            for m in range(1, ell + 1):
                Ym = sph_harm_y(ell, m, T, P)
                cols.append(np.sqrt(2.0) * Ym.real)
                cols.append(np.sqrt(2.0) * Ym.imag)
                degs.extend([ell, ell])
        if len(_Y_CACHE) > 4:
            _Y_CACHE.clear()
        _Y_CACHE[key] = (np.stack(cols, axis=-1), np.array(degs))
    return _Y_CACHE[key]


class SphereSolution:
    """Spectral solution: grid values, the constant b, and diagnostics."""

    def __init__(self, theta, phi, weights, v, b, coeff, degrees, residual_l2,
                 class_violation):
        self.theta = theta
        self.phi = phi
        self.weights = weights
        self.v = v
        self.b = float(b)
        self.coeff = coeff
        self.degrees = degrees
        self.residual_l2 = float(residual_l2)
        self.class_violation = float(class_violation)

    def evaluate(self, theta, phi):
        """Evaluate v from its harmonic coefficients at arbitrary points."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        Y, _ = _harmonic_matrix(theta, phi, int(self.degrees.max()))
        return np.einsum("ijk,k->ij", Y, self.coeff)


def sphere_solve(E, n_theta: int = 64, n_phi: int = 128, l_max: int = 24,
                 class_tol: float = 1e-8) -> SphereSolution:
    """Solve (Delta_{S^2} + 2) v = E - b w in the admissible class.

    E is either a callable E(x, y, z) on unit-sphere coordinates or grid
    values of shape (n_theta, n_phi).  b = <E, x> / (8 pi) kills the
    cokernel; the kernel direction is fixed by the v - v(1,0,0) x
    correction.  Inputs off the symmetry class by more than class_tol are
    projected with a SymmetryProjectionWarning."""
    theta, phi, weights = sphere_grid(n_theta, n_phi)
    x, y, z = _points(theta, phi)
    if callable(E):
        values = np.asarray(E(x, y, z), dtype=float)
    else:
        values = np.asarray(E, dtype=float)
    if values.shape != (n_theta, n_phi):
        raise ValueError("grid values must have shape (n_theta, n_phi)")

    projected = symmetry_project(values, n_theta, n_phi)
    scale = max(np.abs(values).max(), 1e-300)
    violation = np.abs(values - projected).max() / scale
    if violation > class_tol:
        warnings.warn(
            f"input off the symmetry class by {violation:.3g}; projected",
            SymmetryProjectionWarning)
    values = projected

    b = float(np.sum(weights * values * x) / PAIRING_CONSTANT)
    rhs = values - b * pairing_field(theta, phi)

    Y, degs = _harmonic_matrix(theta, phi, l_max)
    coeff = np.einsum("ijk,ij->k", Y, rhs * weights)
    eig = 2.0 - degs * (degs + 1.0)
    vcoeff = np.where(degs == 1, 0.0, coeff / np.where(eig == 0.0, 1.0, eig))

    # residual: the degree-1 energy left in the rhs plus the band-limit tail
    deg1 = float(np.sum(coeff[degs == 1] ** 2))
    total = float(np.sum(weights * rhs**2))
    tail = max(total - float(np.sum(coeff**2)), 0.0)
    if tail < 1e-13 * max(total, 1e-300):
        tail = 0.0  # Parseval cancellation noise, not band-limit error
    residual = np.sqrt(deg1 + tail)

    v = np.einsum("ijk,k->ij", Y, vcoeff)
    # remove the kernel component: v(1,0,0) is the value at theta=pi/2, phi=0
    Yp, _ = _harmonic_matrix(np.array([np.pi / 2]), np.array([0.0]), l_max)
    v_at_pole = float(Yp[0, 0] @ vcoeff)
    v = v - v_at_pole * x
    # x = sqrt(4 pi / 3) * real Y_{1,1} column; fold the correction into
    # the coefficients so evaluate() matches the grid values
    xcol = np.zeros_like(vcoeff)
    idx = np.nonzero(degs == 1)[0]
    xc = np.einsum("ijk,ij->k", Y[..., idx], x * weights)
    xcol[idx] = xc
    vcoeff = vcoeff - v_at_pole * xcol

    return SphereSolution(theta, phi, weights, v, b, vcoeff, degs, residual,
                          violation)
