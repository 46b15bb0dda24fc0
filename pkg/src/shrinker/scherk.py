"""Scherk's singly periodic minimal surface sinh(x) sinh(y) = sin(z).

One period is meshed as four congruent wings, each parametrized exactly by a
conformal chart t = e^(-rho + i psi) of its asymptotic half-plane; the wing
rows are level sets of the distance-like coordinate rho and the first row
lies exactly on the two seam curves {|x| = |y|}, where the wings are welded
vertex-by-vertex.  The module also carries the Gauss-map transfer to the
sphere and the cokernel field w0 (the mean curvature response to tilting the
cap family), whose pairing against e_x . nu equals 8 pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry, profile
from .cutoffs import cutoff_psi
from .mesh import REGIONS, TriMesh


def graph_f(s, z):
    """Graph height of the wing {x > |y|}: f = asinh(sin z / sinh s)."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise ValueError("graph_f requires s > 0")
    return np.arcsinh(np.sin(z) / np.sinh(s_arr))


def seam_sigma(z):
    """Seam coordinate: on {|x| = |y| = sigma}, sinh^2 sigma = |sin z|."""
    return np.arcsinh(np.sqrt(np.abs(np.sin(np.asarray(z, dtype=float)))))


def implicit_value(points):
    """sinh(x) sinh(y) - sin(z); zero on the surface."""
    x, y, z = np.asarray(points).T
    return np.sinh(x) * np.sinh(y) - np.sin(z)


@dataclass
class ScherkChart:
    """Graph chart of one asymptotic wing over the half-plane coordinates.

    ``f[i, j] = graph_f(s[i], z[j])`` is the height of the wing over its
    asymptotic plane; ``side`` records which plane ("x" for the wings
    asymptotic to {y = 0}, "y" for {x = 0}), where the height is the
    other horizontal coordinate.
    """

    side: str
    s: np.ndarray
    z: np.ndarray
    f: np.ndarray


def scherk_chart(s_min: float, s_max: float, n_s: int, n_z: int,
                 side: str = "x") -> ScherkChart:
    """Sample one wing graph on a uniform (s, z) grid, z over [0, 2 pi)."""
    if side not in ("x", "y"):
        raise ValueError("side must be 'x' or 'y'")
    if not 0 < s_min < s_max:
        raise ValueError("need 0 < s_min < s_max")
    s = np.linspace(s_min, s_max, n_s)
    z = np.arange(n_z) * (2 * np.pi / n_z)
    return ScherkChart(side, s, z, graph_f(s[:, None], z[None, :]))


def implicit_normal(points):
    """Gradient of the defining function (global orientation reference)."""
    x, y, z = np.asarray(points).T
    n = np.stack([np.cosh(x) * np.sinh(y), np.sinh(x) * np.cosh(y),
                  -np.cos(z)], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


# Row clustering rate away from the seam: rows concentrate where the surface
# curves and coarsen into the exponentially flat ends.
_ROW_RATE = 2.5

# The four wing copies: chart coordinates (x, y) mapped by the horizontal
# isometries of the surface, with the reflected copies needing a face flip.
_WING_COPIES = (
    ("end_y_minus", lambda x, y: (x, y), False),
    ("end_y_plus", lambda x, y: (-x, -y), False),
    ("end_x_plus", lambda x, y: (-y, -x), True),
    ("end_x_minus", lambda x, y: (y, x), True),
)


def _wing_chart(rho, psi):
    """Exact conformal chart of the wing asymptotic to the half-plane y < 0.

    t = e^(-rho + i psi) is the stereographic Gauss map composed with a
    Moebius rotation; in closed form x = -2 Im atan(t), y = -rho,
    z = psi - arg(1 + t^2), which satisfies sinh x sinh y = sin z
    identically.  rho = asinh|sin psi| is exactly the seam {|x| = |y|},
    and rho is the vertical coordinate: s = max(|x|, |y|) = rho on the wing.
    """
    t = np.exp(-rho + 1j * psi)
    x = -2.0 * np.imag(np.arctan(t))
    z = psi - np.angle(1.0 + t * t)
    return x, -rho, z


def _build(s_max, n_s, n_z, cols, wrap):
    """Mesh builder: four wing charts welded along their seam rows.

    Each wing is a product grid in (rho, psi): columns at the angular nodes
    psi_j = -pi + 2 pi j / n_z, rows graded geometrically from the seam
    curve rho = asinh|sin psi| out to rho = s_max.  Row 0 lies exactly on
    the seams, so the four copies share those vertices bitwise and
    np.unique welds them; the two columns with sin psi = 0 contain the
    z-axis points where four seams cross.

    ``cols`` are integer column indices; with ``wrap`` the last column is
    stitched back to the first, closing the period combinatorially.
    Returns (vertices, faces, region, s, column index per vertex).
    """
    cols = np.asarray(cols)
    ncol = len(cols)
    psi = -np.pi + cols * (2 * np.pi / n_z)
    # the z-axis points sit on the integer grid; detect them there so the
    # seam distance is exactly zero despite sin(-pi) != 0 in floats
    corner = np.mod(cols, n_z // 2) == 0
    seam_rho = np.arcsinh(np.abs(np.sin(psi)))
    seam_rho[corner] = 0.0

    frac = np.expm1(_ROW_RATE * np.arange(n_s + 1) / n_s) / np.expm1(_ROW_RATE)
    rho = seam_rho[None, :] + (s_max - seam_rho[None, :]) * frac[:, None]
    x, y, z = _wing_chart(rho, np.broadcast_to(psi, rho.shape))
    # pin row 0 onto the seam relation |x| = |y| bitwise (the chart lands
    # there analytically; this removes the last-ulp noise so the wing
    # copies weld exactly), and the corner columns onto the z-axis
    x[0] = np.sign(np.sin(psi)) * y[0]
    x[0, corner] = 0.0
    y[0, corner] = 0.0
    z[0, corner] = psi[corner]

    npts = (n_s + 1) * ncol
    grid = np.arange(npts).reshape(n_s + 1, ncol)
    vcol = np.broadcast_to(cols, rho.shape).ravel()
    pos_k = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)

    jc = np.arange(ncol if wrap else ncol - 1)
    jn = (jc + 1) % ncol
    blocks = []
    for i in range(n_s):
        a, b = grid[i][jc], grid[i + 1][jc]
        c, d = grid[i + 1][jn], grid[i][jn]
        use_ac = (np.linalg.norm(pos_k[a] - pos_k[c], axis=1)
                  <= np.linalg.norm(pos_k[b] - pos_k[d], axis=1))
        blocks.append(np.where(use_ac[:, None], np.stack([a, b, c], 1),
                               np.stack([a, b, d], 1)))
        blocks.append(np.where(use_ac[:, None], np.stack([a, c, d], 1),
                               np.stack([b, c, d], 1)))
    faces_k = np.concatenate(blocks)

    region_k = np.empty((n_s + 1, ncol), dtype=np.uint8)
    svals = np.maximum(np.abs(x), np.abs(y)).ravel()

    all_verts, all_faces, all_region, all_s, all_col = [], [], [], [], []
    for k, (tag, move, reflect) in enumerate(_WING_COPIES):
        wx, wy = move(x, y)
        pos = np.stack([wx.ravel(), wy.ravel(), z.ravel()], axis=1)
        block = faces_k[:, ::-1] if reflect else faces_k
        # orientation sanity vote against the implicit gradient, skipping
        # period-stitching faces (those straddle the z-wrap in the flat
        # model)
        tri = pos[block]
        fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        vote = np.einsum("ij,ij->i", fn, implicit_normal(tri.mean(axis=1)))
        local = np.ptp(tri[:, :, 2], axis=1) < np.pi
        if vote[local].sum() < 0:
            block = block[:, ::-1]
        region_k[:] = REGIONS[tag]
        region_k[0] = REGIONS["core"]   # shared seam vertices
        all_verts.append(pos)
        all_faces.append(block + k * npts)
        all_region.append(region_k.ravel().copy())
        all_s.append(svals)
        all_col.append(vcol)
    verts = np.concatenate(all_verts) + 0.0  # normalizes -0.0 for welding
    faces = np.concatenate(all_faces)
    if wrap:
        verts[:, 2] = np.mod(verts[:, 2], 2 * np.pi)  # z as an angle
    uniq, first, inverse = np.unique(verts, axis=0, return_index=True,
                                     return_inverse=True)
    return (uniq, inverse[faces], np.concatenate(all_region)[first],
            np.concatenate(all_s)[first], np.concatenate(all_col)[first])


def _check_resolution(s_max, n_s, n_z):
    if s_max < 2:
        raise ValueError("s_max must be at least 2")
    if n_z % 2 or n_z < 8 or n_s < 4:
        raise ValueError("resolution too coarse to stitch the seams")


def mesh_scherk(s_max: float = 8.0, n_s: int = 48, n_z: int = 320) -> TriMesh:
    """One-period Scherk mesh: 4 wings sharing the seam vertices.

    Vertices carry s = max(|x|, |y|) and a wing region tag (seam vertices
    are tagged core).  n_z must be even so the half-period translation maps
    the angular grid to itself exactly and the z-axis points land on grid
    columns.

    The period is stitched combinatorially (column n_z - 1 back to 0), which
    is the right adjacency for welding the model into an assembled surface,
    where z becomes an angle.  In the flat model those stitching faces span
    the whole period, so curvature diagnostics must use :func:`scherk_patch`
    instead of this mesh.
    """
    _check_resolution(s_max, n_s, n_z)
    verts, faces, region, svals, _ = _build(s_max, n_s, n_z,
                                            np.arange(n_z), wrap=True)
    return TriMesh(verts, faces, region=region, s=svals)


@dataclass
class ScherkPatch:
    """Open flat-model patch: one period plus ghost columns on both sides.

    ``principal`` marks the vertices of the fundamental period; integrals
    over one period sum those, while the ghost columns give every principal
    vertex a full two-ring for curvature evaluation.
    """

    mesh: TriMesh
    principal: np.ndarray

    def interior_weight(self):
        return self.principal & ~self.mesh.boundary_vertex


def scherk_patch(s_max: float = 8.0, n_s: int = 48, n_z: int = 320,
                 ghost: int = 3) -> ScherkPatch:
    """Flat one-period patch for geometry: columns -ghost .. n_z + ghost."""
    _check_resolution(s_max, n_s, n_z)
    if not 2 <= ghost < n_z // 4:
        raise ValueError("ghost column count out of range")
    cols = np.arange(-ghost, n_z + ghost + 1)
    verts, faces, region, svals, vcol = _build(s_max, n_s, n_z, cols,
                                               wrap=False)
    mesh = TriMesh(verts, faces, region=region, s=svals)
    return ScherkPatch(mesh, (vcol >= 0) & (vcol < n_z))


# -- symmetries of one period -------------------------------------------------

def omega0(points):
    """Half-period screw symmetry: (x, y, z) -> (x, -y, z + pi)."""
    p = np.asarray(points, dtype=float).copy()
    p[..., 1] *= -1
    p[..., 2] = np.mod(p[..., 2] + np.pi, 2 * np.pi)
    return p


def xi0(points):
    """Reflection symmetry z -> pi - z."""
    p = np.asarray(points, dtype=float).copy()
    p[..., 2] = np.mod(np.pi - p[..., 2], 2 * np.pi)
    return p


# -- Gauss-map transfer --------------------------------------------------------

@dataclass
class GaussField:
    """Field pushed to the sphere: sample points nu_i and values, with the
    source-vertex indices retained so the pullback is exact."""

    points: np.ndarray
    values: np.ndarray
    source_index: np.ndarray
    weights: np.ndarray  # 1/2 |A|^2 at the source vertices


def _as_patch(obj) -> ScherkPatch:
    if isinstance(obj, ScherkPatch):
        return obj
    return ScherkPatch(obj, np.ones(len(obj.vertices), dtype=bool))


def gauss_transfer(patch, u, s_cut: float = 6.0, frames=None) -> GaussField:
    """Pushforward E -> E / (1/2 |A|^2) at the Gauss-image points.

    Restricted to s <= s_cut where |A|^2 is bounded below; the excluded
    samples are reported through the mask of retained source indices.
    """
    patch = _as_patch(patch)
    mesh = patch.mesh
    if frames is None:
        frames = geometry.vertex_frames(mesh)
    u = np.asarray(u, dtype=float)
    keep = (mesh.s <= s_cut) & patch.interior_weight()
    dens = 0.5 * frames.second_form_norm_sq[keep]
    return GaussField(points=frames.normal[keep], values=u[keep] / dens,
                      source_index=np.nonzero(keep)[0], weights=dens)


def gauss_pullback(patch, field, frames=None) -> np.ndarray:
    """Inverse transfer.  ``field`` is a GaussField from the same mesh or a
    callable on unit vectors; values outside the transferred region are 0."""
    patch = _as_patch(patch)
    mesh = patch.mesh
    if frames is None:
        frames = geometry.vertex_frames(mesh)
    out = np.zeros(len(mesh.vertices))
    if isinstance(field, GaussField):
        out[field.source_index] = field.values * field.weights
        return out
    keep = patch.interior_weight()
    dens = 0.5 * frames.second_form_norm_sq[keep]
    out[keep] = field(frames.normal[keep]) * dens
    return out


def curvature_area(patch, frames=None) -> float:
    """Gauss-map area integral (1/2) int |A|^2 dmu over one period; 4 pi."""
    patch = _as_patch(patch)
    if frames is None:
        frames = geometry.vertex_frames(patch.mesh)
    w = patch.interior_weight()
    return float(0.5 * (frames.second_form_norm_sq[w]
                        * frames.voronoi_area[w]).sum())


# -- the cokernel field w0 -----------------------------------------------------

def r_theta_derivative(step: float = 1e-3) -> float:
    """d r[theta] / d theta at 0 by central differences of the cap family."""
    rp = profile.cap_for_theta(step).r_theta
    rm = profile.cap_for_theta(-step).r_theta
    return (rp - rm) / (2 * step)


def bending_velocity(points, r_dot=None):
    """Initial velocity of the theta-family on the Scherk scale.

    Dilation by r_dot everywhere plus the cutoff rotation of the wing toward
    the cap, extended equivariantly to y < 0 (the two branches differ by a
    Killing translation, so the curvature response is unaffected).
    """
    if r_dot is None:
        r_dot = r_theta_derivative()
    p = np.asarray(points, dtype=float)
    x, y, z = p.T
    rot = np.stack([-y, x, np.zeros_like(x)], axis=1)
    amp = cutoff_psi(0.5, 1.0, y) - cutoff_psi(0.5, 1.0, -y)
    return r_dot * p + 2.0 * amp[:, None] * rot


def _h_of_positions(X, faces):
    n = len(X)
    areas, normals = geometry._vertex_areas_normals(X, faces, n)
    lap = geometry._cot_laplace_sum(X, faces, X) / areas[:, None]
    return -np.einsum("ij,ij->i", lap, normals)


def w0_field(patch, r_dot=None, steps=(1e-3, 1e-4), drift_tol: float = 0.01):
    """w0 = d/dt of the discrete mean curvature under the theta-family.

    Central differences at the two steps, Richardson-combined; raises if the
    pairing drifts more than ``drift_tol`` between the steps.
    """
    patch = _as_patch(patch)
    mesh = patch.mesh
    v = bending_velocity(mesh.vertices, r_dot)
    estimates = []
    for t in steps:
        hp = _h_of_positions(mesh.vertices + t * v, mesh.faces)
        hm = _h_of_positions(mesh.vertices - t * v, mesh.faces)
        estimates.append((hp - hm) / (2 * t))
    frames = geometry.vertex_frames(mesh)
    w = patch.interior_weight()
    ex_nu = np.where(w, frames.normal[:, 0] * frames.voronoi_area, 0.0)
    pairings = [float(e @ ex_nu) for e in estimates]
    if abs(pairings[0] - pairings[1]) > drift_tol * abs(pairings[1]):
        raise RuntimeError(
            f"w0 step-size drift {pairings[0]:.6g} vs {pairings[1]:.6g}; "
            "theta-step too large")
    r = steps[0] / steps[1]
    w0 = (r**2 * estimates[1] - estimates[0]) / (r**2 - 1.0)
    return w0


def pairing(patch, w0=None, direction=(1.0, 0.0, 0.0)) -> float:
    """int w0 (e . nu) dmu over one period (8 pi for e = e_x)."""
    patch = _as_patch(patch)
    if w0 is None:
        w0 = w0_field(patch)
    frames = geometry.vertex_frames(patch.mesh)
    comp = frames.normal @ np.asarray(direction, dtype=float)
    w = patch.interior_weight()
    return float((w0[w] * comp[w] * frames.voronoi_area[w]).sum())
