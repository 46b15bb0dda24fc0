"""Rotationally symmetric self-shrinking caps by ODE shooting.

The profile rho(phi) of a cap (polar angle phi from the pole, radius rho from
the origin) satisfies

    rho'' = (1/rho) { rho^2 + 2 rho'^2
                      + [1 - rho^2/2 - rho'/(rho tan phi)] (rho^2 + rho'^2) }

with rho(0) = h, rho'(0) = 0.  h = 2 gives the constant solution rho = 2
(the radius-2 hemisphere); nearby h give caps meeting the plane {y = 0} at a
small contact angle theta with tan theta = rho_h'(pi/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .mesh import TriMesh, _grid_faces

EPS_START = 1e-4  # series-start offset; 2-term expansion error O(eps^4)


class ShootingFailure(RuntimeError):
    def __init__(self, msg, last_phi=None):
        super().__init__(msg)
        self.last_phi = last_phi


def rho_second(phi, rho, rho_prime):
    """Right-hand side of the profile ODE (regularized at phi = 0)."""
    q2 = rho * rho + rho_prime * rho_prime
    tan_phi = np.tan(np.where(phi > 0, phi, 1.0))
    slope_term = np.where(phi > 0, rho_prime / (rho * tan_phi), 0.0)
    return (rho * rho + 2 * rho_prime * rho_prime
            + (1 - rho * rho / 2 - slope_term) * q2) / rho


def _rho_pp0(h):
    # regularized limit: rho'/(rho tan phi) -> rho''(0)/rho(0); solving the
    # resulting linear relation gives rho''(0) = h - h^3/4
    return h - h**3 / 4


@dataclass
class ProfileCurve:
    phi_grid: np.ndarray
    rho: np.ndarray
    rho_prime: np.ndarray
    h: float

    def rho_pp(self):
        """rho'' on the grid, from the ODE itself (exact on solutions)."""
        out = rho_second(self.phi_grid, self.rho, self.rho_prime)
        if self.phi_grid[0] == 0.0:
            out[0] = _rho_pp0(self.h)
        return out


def integrate_profile(h: float, n_samples: int = 2001) -> ProfileCurve:
    """Shoot the profile ODE from the pole to the equator phi = pi/2."""
    if not np.isfinite(h) or h <= 0:
        raise ValueError("shooting parameter h must be positive")
    q = _rho_pp0(h)
    eps = EPS_START
    y0 = [h + 0.5 * q * eps * eps, q * eps]

    def rhs(phi, y):
        return [y[1], rho_second(phi, y[0], y[1])]

    def blow_low(phi, y):
        return y[0] - 1e-2

    def blow_high(phi, y):
        return 50.0 - y[0]

    blow_low.terminal = blow_high.terminal = True
    sol = solve_ivp(rhs, (eps, np.pi / 2), y0, method="DOP853",
                    rtol=1e-12, atol=1e-12, dense_output=True,
                    events=[blow_low, blow_high])
    if sol.status != 0 or sol.t[-1] < np.pi / 2:
        raise ShootingFailure(
            f"profile blew up before pi/2 for h={h}", last_phi=sol.t[-1])
    phi = np.linspace(0.0, np.pi / 2, n_samples)
    inner = phi[phi <= eps]
    vals = sol.sol(np.clip(phi, eps, np.pi / 2))
    rho, rho_p = vals
    rho[phi <= eps] = h + 0.5 * q * inner * inner
    rho_p[phi <= eps] = q * inner
    return ProfileCurve(phi, rho, rho_p, h)


# -- linearized profile (Legendre) -------------------------------------------

_L_DEGREE = (np.sqrt(17.0) - 1.0) / 2.0  # positive root of l(l+1) = 4
_w1_cache = {}


def _w1_solution():
    if "sol" not in _w1_cache:
        eps = EPS_START

        def rhs(phi, y):
            return [y[1], -y[1] / np.tan(phi) - 4.0 * y[0]]

        sol = solve_ivp(rhs, (eps, np.pi / 2), [1.0 - eps * eps, -2.0 * eps],
                        method="DOP853", rtol=1e-12, atol=1e-13,
                        dense_output=True)
        _w1_cache["sol"] = sol.sol
    return _w1_cache["sol"]


def legendre_w1(phi, derivative: bool = False):
    """w1(phi) solving w'' + w'/tan(phi) + 4w = 0, w(0)=1, w'(0)=0.

    This is the Legendre function P_l(cos phi) with l(l+1) = 4; the
    hypergeometric series evaluation lives in the test oracles.
    """
    phi_arr = np.atleast_1d(np.asarray(phi, dtype=float))
    sol = _w1_solution()
    vals = sol(np.clip(phi_arr, EPS_START, np.pi / 2))
    row = 1 if derivative else 0
    out = vals[row].copy()
    small = phi_arr < EPS_START
    out[small] = -2.0 * phi_arr[small] if derivative else 1.0 - phi_arr[small]**2
    return out if np.ndim(phi) else float(out[0])


# -- caps ---------------------------------------------------------------------

class _PhiOfS:
    """Dense ODE solution phi(s), clipped to its integration interval."""

    def __init__(self, sol, s_end):
        self._sol = sol
        self.x = np.array([0.0, s_end])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = self._sol(np.clip(s.ravel(), 0.0, self.x[-1]))[0]
        return out.reshape(s.shape) if s.ndim else float(out[0])


@dataclass
class CapSurface:
    """One self-shrinking cap, revolved about the y-axis.

    The boundary circle lies in {y = 0} with radius ``r_theta``; ``kappa``
    maps the conformal (s, z) half-cylinder onto the cap with s = 0 on the
    boundary and s increasing toward the pole.
    """

    theta: float
    h: float
    r_theta: float
    profile: ProfileCurve
    _phi_of_s: object = field(repr=False, default=None)
    _s_of_phi_vals: np.ndarray = field(repr=False, default=None)

    def _spline(self, key, x, y):
        cache = self.__dict__.setdefault("_splines", {})
        if key not in cache:
            cache[key] = CubicSpline(x, y)
        return cache[key]

    def s_of_phi(self, phi):
        return self._spline("s", self.profile.phi_grid, self._s_of_phi_vals)(phi)

    def phi_of_s(self, s):
        return self._phi_of_s(s)

    @property
    def s_max(self):
        return float(self._phi_of_s.x[-1])

    def curve(self, phi):
        """(distance to axis, height) = (rho sin phi, rho cos phi)."""
        rho = self._spline("rho", self.profile.phi_grid, self.profile.rho)(phi)
        return rho * np.sin(phi), rho * np.cos(phi)

    def kappa(self, s, z):
        """Conformal parametrization into 3-space (axis of revolution = y)."""
        s = np.asarray(s, dtype=float)
        z = np.asarray(z, dtype=float)
        phi = self.phi_of_s(s)
        r, y = self.curve(phi)
        return np.stack([r * np.cos(z), y, r * np.sin(z)], axis=-1)


def shoot_slope(h: float) -> float:
    """Endpoint slope rho_h'(pi/2) of the shot profile."""
    return float(integrate_profile(h, n_samples=9).rho_prime[-1])


def cap_for_theta(theta: float, bracket=(1.5, 2.5)) -> CapSurface:
    """Cap with contact angle theta: root-find h so tan(theta) = rho_h'(pi/2)."""
    target = np.tan(theta)
    if theta == 0.0:
        h = 2.0
    else:
        lo, hi = bracket
        try:
            h = brentq(lambda hh: shoot_slope(hh) - target, lo, hi,
                       xtol=1e-14, rtol=8.9e-16)
        except ValueError as exc:
            raise ValueError(
                f"theta={theta} outside admissible bracket {bracket}") from exc
    prof = integrate_profile(h)
    cap = CapSurface(theta=theta, h=h, r_theta=float(prof.rho[-1]),
                     profile=prof)
    _attach_conformal(cap)
    resid = np.abs(revolution_residual(prof))
    if resid[1:].max() > 1e-6:
        raise ShootingFailure(
            f"cap residual {resid[1:].max():.2e} exceeds 1e-6 for theta={theta}")
    return cap


def _attach_conformal(cap: CapSurface):
    prof = cap.profile
    phi = prof.phi_grid
    # ds/dphi = -sqrt(rho^2 + rho'^2) / (rho sin phi), s(pi/2) = 0
    integrand = np.sqrt(prof.rho**2 + prof.rho_prime**2) / (prof.rho * np.sin(np.clip(phi, 1e-12, None)))
    integrand[0] = integrand[1]  # value at phi=0 unused (s -> infinity there)
    s_rev = cumulative_simpson(integrand[::-1], x=-phi[::-1], initial=0.0)
    s_vals = s_rev[::-1]  # s decreasing in phi, 0 at pi/2
    cap._s_of_phi_vals = s_vals
    # inverse map phi(s) by integrating dphi/ds = -rho sin(phi)/w directly:
    # smooth to integrator tolerance, unlike spline inversion of s(phi)
    rho_spl = cap._spline("rho", phi, prof.rho)

    def rhs(_, y):
        ph = y[0]
        rho = rho_spl(ph)
        rp = rho_spl(ph, 1)
        return [-rho * np.sin(ph) / np.sqrt(rho * rho + rp * rp)]

    s_end = float(s_vals[1])
    sol = solve_ivp(rhs, (0.0, s_end), [np.pi / 2], method="DOP853",
                    rtol=1e-12, atol=1e-12, dense_output=True)
    cap._phi_of_s = _PhiOfS(sol.sol, s_end)


def conformal_param(cap: CapSurface, s_grid=None, n_z: int = 128):
    """Sampled kappa(s, z) on a grid, with the conformal-factor samples."""
    if s_grid is None:
        s_grid = np.linspace(0.0, min(3.0, 0.9 * cap.s_max), 61)
    z_grid = np.arange(n_z) * (2 * np.pi / n_z)
    ss, zz = np.meshgrid(s_grid, z_grid, indexing="ij")
    pts = cap.kappa(ss, zz)
    phi = cap.phi_of_s(s_grid)
    r, _ = cap.curve(phi)
    return {"s": s_grid, "z": z_grid, "points": pts,
            "conformal_factor": r**2}


def revolution_residual(prof: ProfileCurve) -> np.ndarray:
    """Smooth shrinker residual of the revolved profile at the grid points.

    Uses closed-form surface-of-revolution curvatures with rho'' taken from
    the ODE, so this is an independent check of the shot solution, exact up
    to integrator error.
    """
    phi = prof.phi_grid
    rho, rp = prof.rho, prof.rho_prime
    rpp = prof.rho_pp()
    sin, cos = np.sin(phi), np.cos(phi)
    # generating curve c(phi) = (r, y) = (rho sin, rho cos), outward normal m
    r_t = rp * sin + rho * cos
    y_t = rp * cos - rho * sin
    r_tt = rpp * sin + 2 * rp * cos - rho * sin
    y_tt = rpp * cos - 2 * rp * sin - rho * cos
    w2 = r_t * r_t + y_t * y_t
    w = np.sqrt(w2)
    m_r = -y_t / w
    m_y = r_t / w
    r = rho * sin
    # H = -(normal part of curvature vectors): profile + rotation circle
    k_prof = (r_tt * m_r + y_tt * m_y) / w2
    with np.errstate(divide="ignore", invalid="ignore"):
        k_rot = np.where(r > 0, -m_r / r, k_prof)
    h_mean = -(k_prof + k_rot)
    x_dot_nu = r * m_r + rho * cos * m_y
    return h_mean - 0.5 * x_dot_nu


def mesh_cap(cap: CapSurface, n_phi: int = 100, n_angle: int = 200,
             phi_max: float = None, angles=None) -> TriMesh:
    """Triangulated cap (revolution about the y-axis) with a pole fan.

    ``phi_max`` defaults to the equator pi/2; pass the chart-edge angle to
    mesh only the outer cap component.  ``angles`` overrides the angular grid
    so boundary circles can share discretizations across regions.
    """
    if phi_max is None:
        phi_max = np.pi / 2
    if angles is None:
        angles = np.arange(n_angle) * (2 * np.pi / n_angle)
    angles = np.asarray(angles, dtype=float)
    nz = len(angles)
    phis = np.linspace(phi_max / n_phi, phi_max, n_phi)
    r, y = cap.curve(phis)
    # stagger alternate rings by half an angular step: the square-quad grid
    # would split into right triangles, which sit on the branch point of the
    # mixed-area rule and cost a factor 2 in curvature accuracy; staggering
    # makes the triangles acute.  The outer ring keeps the shared angles so
    # boundary circles still match across regions.
    mid = angles + 0.5 * (np.roll(angles, -1) - angles
                          + 2 * np.pi * (np.arange(nz) == nz - 1))
    tt = np.where(((n_phi - 1 - np.arange(n_phi)) % 2 == 1)[:, None],
                  mid[None, :], angles[None, :])
    rr = np.broadcast_to(r[:, None], (n_phi, nz))
    yy = np.repeat(y, nz)
    verts = np.stack([(rr * np.cos(tt)).ravel(), yy,
                      (rr * np.sin(tt)).ravel()], axis=1)
    pole = np.array([[0.0, cap.h, 0.0]])
    verts = np.vstack([pole, verts])
    quads = _grid_faces(n_phi, nz, wrap_j=True) + 1
    half = len(quads) // 2
    v00, v10, v11 = quads[:half].T
    v01 = quads[half:, 2]
    # split each quad along its shorter diagonal (on the staggered grid the
    # fixed-diagonal split would leave obtuse slivers)
    use = (np.linalg.norm(verts[v00] - verts[v11], axis=1)
           <= np.linalg.norm(verts[v10] - verts[v01], axis=1))
    faces = [np.where(use[:, None], np.stack([v00, v10, v11], 1),
                      np.stack([v00, v10, v01], 1)),
             np.where(use[:, None], np.stack([v00, v11, v01], 1),
                      np.stack([v10, v11, v01], 1))]
    j = np.arange(nz)
    fan = np.stack([np.zeros(nz, dtype=int), 1 + j, 1 + (j + 1) % nz], axis=1)
    faces.append(fan)
    faces = np.concatenate(faces)
    # grid construction orients the cap inward; flip for outward normals
    return TriMesh(verts, faces[:, ::-1], validate=False)
