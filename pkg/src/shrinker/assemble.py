"""Assembly of the initial surfaces: a sphere-plane configuration
desingularized along the intersection circle by a bent chain of handles.

Pipeline: genus g fixes tau = 1/(g+1) and k = g+1 periods of the flat
model (the singly periodic minimal surface of :mod:`.scherk`).  The flat
strip is flattened onto its two asymptotic planes away from the handles
(:func:`flatten_map`), bent around the intersection circle of the cap and
the plane {y = 0} (:func:`bending_map`), scaled by tau, and welded to four
outer components: the outer plane annulus, the inner plane disk, and the
top and bottom caps.  All four weld circles are generated from the angular
values of the actual core boundary loops, so the seams close to roundoff
and a tolerance weld plus orbit averaging makes the dihedral symmetry of
the result exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import scherk
from .cutoffs import cutoff_psi
from .geometry import residual_from_positions
from .mesh import REGIONS, MeshError, TriMesh, _grid_faces
from .profile import CapSurface, cap_for_theta, mesh_cap
from .symmetry import SymmetryGroup, omega_matrix

__all__ = [
    "AssemblyError",
    "SelfIntersectionError",
    "BuildConfig",
    "InitialSurface",
    "nearest_plane_projection",
    "flatten_map",
    "bending_map",
    "build_core",
    "build_initial_surface",
    "core_residual_norm",
    "distance_to_sphere_plane",
]


class AssemblyError(RuntimeError):
    pass


class SelfIntersectionError(AssemblyError):
    pass


@dataclass(frozen=True)
class BuildConfig:
    """Parameters of one assembled surface.

    ``genus`` fixes tau = 1/(genus+1); ``theta`` the cap contact angle;
    ``delta_s`` the transition scale (the core reaches s = 5 delta_s / tau,
    flattening onto the planes over [3, 4] delta_s / tau).  Resolutions:
    ``n_s`` rows per wing, ``n_z`` angular columns per period (multiple of
    4 so the symmetry maps act on the column grid), and row counts for the
    cap / plane / disk components.  ``handles=False`` skips the
    desingularization and samples the bare sphere-plane configuration.
    """

    genus: int
    theta: float = 0.0
    delta_s: float = 0.25
    delta_theta: float = 0.1
    n_s: int = 20
    n_z: int = 96
    n_phi_cap: int = 40
    n_r_plane: int = 40
    n_r_disk: int = 10
    r_max: float = 40.0
    handles: bool = True
    weld_tol: float = 1e-9

    def __post_init__(self):
        if self.genus < 2:
            raise ValueError("genus must be at least 2")
        if abs(self.theta) > self.delta_theta:
            raise ValueError(
                f"|theta| = {abs(self.theta)} exceeds delta_theta = "
                f"{self.delta_theta}")
        if self.n_z % 4:
            raise ValueError("n_z must be a multiple of 4")

    @property
    def tau(self) -> float:
        return 1.0 / (self.genus + 1)

    @property
    def s_outer(self) -> float:
        """Chart edge of the core, s = 5 delta_s / tau."""
        return 5.0 * self.delta_s / self.tau


_CAP_CACHE = {}


def _cap(theta):
    if theta not in _CAP_CACHE:
        if len(_CAP_CACHE) > 16:
            _CAP_CACHE.clear()
        _CAP_CACHE[theta] = cap_for_theta(theta)
    return _CAP_CACHE[theta]


# -- pointwise maps -----------------------------------------------------------

def nearest_plane_projection(points):
    """Project flat-model points onto the nearer asymptotic plane.

    Wings with |x| >= |y| go to {y = 0}, the others to {x = 0}; z is kept."""
    pts = np.array(points, dtype=float)
    to_xz = np.abs(pts[..., 0]) >= np.abs(pts[..., 1])
    pts[..., 1] = np.where(to_xz, 0.0, pts[..., 1])
    pts[..., 0] = np.where(to_xz, pts[..., 0], 0.0)
    return pts


def flatten_map(points, tau, delta_s=0.25):
    """Blend the identity into the plane projection over the wing ends.

    Identity for s <= 3 delta_s/tau, nearest-plane projection for
    s >= 4 delta_s/tau, with s = max(|x|, |y|) the flat-model coordinate."""
    pts = np.asarray(points, dtype=float)
    s = np.maximum(np.abs(pts[..., 0]), np.abs(pts[..., 1]))
    w = cutoff_psi(3.0 * delta_s / tau, 4.0 * delta_s / tau, s)[..., None]
    return (1.0 - w) * pts + w * nearest_plane_projection(pts)


def _cap_normal_components(cap: CapSurface, phi):
    """Outward unit normal of the revolved profile: (radial, axial) parts."""
    spl = cap._spline("rho", cap.profile.phi_grid, cap.profile.rho)
    rho, rp = spl(phi), spl(phi, 1)
    r_t = rp * np.sin(phi) + rho * np.cos(phi)
    y_t = rp * np.cos(phi) - rho * np.sin(phi)
    w = np.hypot(r_t, y_t)
    return -y_t / w, r_t / w


def _bend_exponential(pts, tau, r):
    """The exponential-cylindrical map: x exponentiates into the radius,
    z becomes the angle tau*z about the y-axis, y scales by r."""
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    rad = (r / tau) * np.exp(tau * x)
    return np.stack([rad * np.cos(tau * z), r * y, rad * np.sin(tau * z)],
                    axis=-1)


def _bend_upper(pts, tau, cap):
    """Blended bending map on {y >= -1/2}: pure exponential map for
    y <= 1/2, the rescaled cap graph for y >= 1."""
    out = _bend_exponential(pts, tau, cap.r_theta)
    w = cutoff_psi(0.5, 1.0, pts[:, 1])
    need = w > 0.0
    if np.any(need):
        x, y, z = pts[need].T
        phi = cap.phi_of_s(tau * y)
        rad, height = cap.curve(phi)
        m_r, m_y = _cap_normal_components(cap, phi)
        ca, sa = np.cos(tau * z), np.sin(tau * z)
        kap = np.stack([rad * ca, height, rad * sa], axis=-1) / tau
        nu = np.stack([m_r * ca, m_y, m_r * sa], axis=-1)
        graph = kap + cap.r_theta * x[:, None] * nu
        wn = w[need, None]
        out[need] = wn * graph + (1.0 - wn) * out[need]
    return out


def bending_map(points, tau, theta=0.0, cap=None, blend=True):
    """Bend flat-model coordinates around the intersection circle.

    ``blend=False`` evaluates the globally defined exponential-cylindrical
    map; ``blend=True`` interpolates it into the cap graph for y >= 1/2
    and extends across y < 0 equivariantly through the half-period screw
    map, so the two branches agree on the overlap |y| <= 1/2.
    """
    if cap is None:
        cap = _cap(theta)
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 3)
    if not blend:
        return _bend_exponential(pts, tau, cap.r_theta)
    out = np.empty_like(flat)
    neg = flat[:, 1] < 0.0
    if np.any(~neg):
        out[~neg] = _bend_upper(flat[~neg], tau, cap)
    if np.any(neg):
        q = flat[neg].copy()
        q[:, 1] *= -1.0
        q[:, 2] -= np.pi
        out[neg] = _bend_upper(q, tau, cap) @ omega_matrix(tau).T
    return out.reshape(pts.shape)


# -- mesh pieces --------------------------------------------------------------

def _split_quads(verts, quads):
    """Split structured quads along their shorter diagonals."""
    half = len(quads) // 2
    v00, v10, v11 = quads[:half].T
    v01 = quads[half:, 2]
    use = (np.linalg.norm(verts[v00] - verts[v11], axis=1)
           <= np.linalg.norm(verts[v10] - verts[v01], axis=1))
    return np.concatenate([
        np.where(use[:, None], np.stack([v00, v10, v11], 1),
                 np.stack([v00, v10, v01], 1)),
        np.where(use[:, None], np.stack([v00, v11, v01], 1),
                 np.stack([v10, v11, v01], 1))])


def _lathe(radii, heights, angles, fan_height=None):
    """Revolve a polyline about the y-axis on a shared angular grid.

    Interior rows are staggered by half an angular step for triangle
    quality; the first and last rows stay on ``angles`` so boundary
    circles weld exactly across components.  ``fan_height`` appends an
    axis vertex fanned to row 0.  Returns (verts, faces).
    """
    radii = np.asarray(radii, dtype=float)
    heights = np.broadcast_to(np.asarray(heights, dtype=float), radii.shape)
    angles = np.asarray(angles, dtype=float)
    nr, nz = len(radii), len(angles)
    mid = angles + 0.5 * (np.roll(angles, -1) - angles
                          + 2.0 * np.pi * (np.arange(nz) == nz - 1))
    stag = np.zeros(nr, dtype=bool)
    stag[1:-1:2] = True
    tt = np.where(stag[:, None], mid[None, :], angles[None, :])
    rr = radii[:, None]
    verts = np.stack([(rr * np.cos(tt)).ravel(), np.repeat(heights, nz),
                      (rr * np.sin(tt)).ravel()], axis=1)
    faces = _split_quads(verts, _grid_faces(nr, nz, wrap_j=True))
    if fan_height is not None:
        verts = np.vstack([verts, [[0.0, fan_height, 0.0]]])
        j = np.arange(nz)
        fan = np.stack([np.full(nz, nr * nz), j, (j + 1) % nz], axis=1)
        faces = np.vstack([faces, fan])
    return verts, faces


def _orient_faces(verts, faces):
    """Flip faces so every interior edge is traversed once each way.

    Breadth-first parity propagation over the face adjacency graph; raises
    :class:`MeshError` when the surface is not orientable.  The global sign
    of each connected component is fixed so that the face at its topmost
    vertex has a normal with a nonnegative y component.
    """
    m = len(faces)
    he = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    face_of = np.tile(np.arange(m), 3)
    fwd = he[:, 0] < he[:, 1]
    key = np.minimum(he[:, 0], he[:, 1]) * len(verts) + np.maximum(he[:, 0],
                                                                   he[:, 1])
    order = np.argsort(key, kind="stable")
    eq = key[order][1:] == key[order][:-1]
    if np.any(eq[1:] & eq[:-1]):
        raise MeshError("non-manifold edge (three faces share an edge)")
    i1, i2 = order[:-1][eq], order[1:][eq]
    f1, f2 = face_of[i1], face_of[i2]
    # same traversal direction on a shared edge means opposite orientation
    par = (fwd[i1] == fwd[i2]).astype(np.int8)
    rows = np.concatenate([f1, f2])
    cols = np.concatenate([f2, f1])
    pars = np.concatenate([par, par])
    srt = np.argsort(rows, kind="stable")
    cols, pars = cols[srt], pars[srt]
    indptr = np.zeros(m + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)

    flip = np.full(m, -1, dtype=np.int8)
    top_of = {}  # component id -> face at the component's topmost vertex
    comp = np.full(m, -1, dtype=np.int64)
    ncomp = 0
    while True:
        todo = np.nonzero(flip < 0)[0]
        if not len(todo):
            break
        seed = todo[0]
        flip[seed] = 0
        frontier = np.array([seed])
        while len(frontier):
            counts = indptr[frontier + 1] - indptr[frontier]
            starts = np.repeat(indptr[frontier], counts)
            offs = np.arange(counts.sum()) - np.repeat(
                np.cumsum(counts) - counts, counts)
            take = starts + offs
            nb, pb = cols[take], pars[take]
            cand = (np.repeat(flip[frontier], counts) + pb) % 2
            known = flip[nb] >= 0
            if np.any(flip[nb[known]] != cand[known]):
                raise MeshError("mesh is not orientable")
            new = ~known
            flip[nb[new]] = cand[new]
            frontier = np.unique(nb[new])
        members = np.nonzero((flip >= 0) & (comp < 0))[0]
        comp[members] = ncomp
        top_v = verts[faces[members].ravel(), 1].argmax()
        top_of[ncomp] = members[top_v // 3]
        ncomp += 1
    # conflicts can hide behind duplicate frontier writes; verify globally
    if np.any((flip[f1] + par) % 2 != flip[f2]):
        raise MeshError("mesh is not orientable")

    out = np.where(flip[:, None] == 1, faces[:, ::-1], faces)
    for c, f_top in top_of.items():
        tri = verts[out[f_top]]
        ny = np.cross(tri[1] - tri[0], tri[2] - tri[0])[1]
        if ny < 0:
            sel = comp == c
            out[sel] = out[sel][:, ::-1]
    return out


def _weld_duplicates(verts, faces, extras, tol):
    """Merge vertices closer than ``tol``; first occurrence wins.

    ``extras`` is a list of per-vertex arrays carried through the weld."""
    n = len(verts)
    pairs = cKDTree(verts).query_pairs(tol, output_type="ndarray")
    parent = np.arange(n)
    for a, b in np.sort(pairs, axis=1):
        ra, rb = parent[a], parent[b]
        while ra != parent[ra]:
            ra = parent[ra]
        while rb != parent[rb]:
            rb = parent[rb]
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    while True:
        flat = parent[parent]
        if np.array_equal(flat, parent):
            break
        parent = flat
    keep = np.nonzero(parent == np.arange(n))[0]
    newid = np.empty(n, dtype=np.int64)
    newid[keep] = np.arange(len(keep))
    fmap = newid[parent]
    return (verts[keep], fmap[faces], [e[keep] for e in extras])


def _check_embedded(mesh: TriMesh, factor: float = 0.4):
    """Reject near-contacts between non-adjacent vertices (curl overlap)."""
    n = len(mesh.vertices)
    dist, idx = cKDTree(mesh.vertices).query(mesh.vertices, k=2)
    nearest_d, nearest = dist[:, 1], idx[:, 1]
    he = mesh.halfedges()
    elen = np.linalg.norm(mesh.vertices[he[:, 1]] - mesh.vertices[he[:, 0]],
                          axis=1)
    min_edge = np.full(n, np.inf)
    np.minimum.at(min_edge, he[:, 0], elen)
    adj = mesh.adjacency()
    connected = np.asarray(adj[np.arange(n), nearest]).ravel()
    bad = ~connected & (nearest_d < factor * min_edge)
    if np.any(bad):
        raise SelfIntersectionError(
            f"{int(bad.sum())} vertex pairs closer than {factor:.2f} x local "
            f"edge length (min gap {nearest_d[bad].min():.3e}); increase the "
            "resolution or reduce |theta| / delta_s")


# -- core ---------------------------------------------------------------------

def build_core(config: BuildConfig) -> TriMesh:
    """The unscaled desingularized core: k periods of the flat model,
    flattened onto the planes at the wing ends and bent around the circle.

    The result carries the pushed-forward coordinate s, wing region tags,
    and the transition tag on the band s in [4, 5] delta_s / tau."""
    cfg = config
    tau, k = cfg.tau, cfg.genus + 1
    cap = _cap(cfg.theta)
    if 5.0 * cfg.delta_s >= 0.99 * cap.s_max:
        raise AssemblyError(
            f"5 delta_s = {5 * cfg.delta_s} leaves the cap chart "
            f"(s_max = {cap.s_max:.3f})")
    cols = np.arange(k * cfg.n_z + 1)
    verts, faces, region, svals, _ = scherk._build(
        cfg.s_outer, cfg.n_s, cfg.n_z, cols, wrap=False)
    mapped = bending_map(flatten_map(verts, tau, cfg.delta_s), tau,
                         cfg.theta, cap)
    band = svals >= 4.0 * cfg.delta_s / tau - 1e-12
    region = np.where(band, REGIONS["transition"], region).astype(np.uint8)
    # close the k-period strip: the two edge columns land on the same bent
    # positions up to the roundoff of the angle reduction
    verts2, faces2, (region2, s2) = _weld_duplicates(
        mapped, faces, [region, svals], cfg.weld_tol)
    mesh = TriMesh(verts2, faces2, region=region2, s=s2)
    if len(mesh.boundary_loops()) != 4:
        raise AssemblyError(
            f"core has {len(mesh.boundary_loops())} boundary loops after the "
            "period weld, expected the 4 wing-end circles")
    # canonical sign: outward normal at the top of the cap region
    f_top = int(verts2[faces2.ravel(), 1].argmax()) // 3
    tri = verts2[faces2[f_top]]
    if np.cross(tri[1] - tri[0], tri[2] - tri[0])[1] < 0:
        mesh = mesh.flipped()
    _check_embedded(mesh)
    return mesh


def core_residual_norm(core: TriMesh, tau: float, gamma: float = 0.75):
    """Weighted sup of H - tau^2/2 <X, nu> over the interior of the core."""
    resid = residual_from_positions(core.vertices, core.faces, tau)
    keep = ~core.boundary_vertex
    return float(np.abs(resid[keep] * np.exp(-gamma * core.s[keep])).max())


# -- full initial surface -----------------------------------------------------

@dataclass
class InitialSurface:
    """An assembled surface with its exact symmetry action.

    ``mesh`` is the welded surface (core scaled by tau plus the four outer
    components, one outer boundary circle); ``core`` the unscaled core it
    was built from (empty mesh when handles are disabled).  ``a_bar`` is
    the end-region extent min(8 |log tau|, 5 delta_s / tau)."""

    mesh: TriMesh
    core: TriMesh
    config: BuildConfig
    group: SymmetryGroup
    cap: CapSurface
    permutations: np.ndarray = field(repr=False)

    @property
    def tau(self) -> float:
        return self.config.tau

    @property
    def theta(self) -> float:
        return self.config.theta

    @property
    def a_bar(self) -> float:
        return min(8.0 * abs(np.log(self.tau)), self.config.s_outer)

    def project(self, values):
        """Equivariant projection of a scalar field on the mesh vertices."""
        return self.group.equivariant_project(values, self.permutations)


def _cap_piece(cap, cfg, angles):
    """Outer cap component beyond the core chart edge, on shared angles."""
    phi_edge = float(cap.phi_of_s(cfg.tau * cfg.s_outer))
    piece = mesh_cap(cap, n_phi=cfg.n_phi_cap, phi_max=phi_edge,
                     angles=angles)
    phi = np.arctan2(np.hypot(piece.vertices[:, 0], piece.vertices[:, 2]),
                     piece.vertices[:, 1])
    s = np.asarray(cap.s_of_phi(phi)) / cfg.tau
    return piece.vertices, piece.faces, np.clip(s, 0.0, 2.0 * cfg.s_outer)


def build_initial_surface(config: BuildConfig) -> InitialSurface:
    """Assemble, weld, orient, and symmetrize the full initial surface."""
    cfg = config
    tau, k = cfg.tau, cfg.genus + 1
    cap = _cap(cfg.theta)
    r = cap.r_theta
    group = SymmetryGroup.dihedral(cfg.genus)
    s5 = cfg.s_outer
    s_cap = 2.0 * s5  # clip value for the coordinate on the outer pieces

    pieces = []  # (verts, faces, region_code_or_array, s_values)
    if cfg.handles:
        core = build_core(cfg)
        pieces.append((tau * core.vertices, core.faces, core.region, core.s))
        # all four weld circles share the angular values of the actual core
        # boundary columns (the chart's z is not on the uniform grid)
        psi = -np.pi + np.arange(k * cfg.n_z) * (2.0 * np.pi / cfg.n_z)
        t = np.exp(-s5 + 1j * psi)
        z_b = psi - np.angle(1.0 + t * t)
        ang = tau * z_b
        r_plane = r * np.exp(tau * s5)
        r_disk = r * np.exp(-tau * s5)
        phi_top = None
    else:
        core = TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int),
                       region=np.zeros(0, dtype=np.uint8), s=np.zeros(0),
                       validate=False)
        ang = -np.pi + np.arange(k * cfg.n_z) * (2.0 * np.pi / cfg.n_z)
        z_b = ang.copy()
        r_plane = None

    if cfg.handles:
        radii = r_plane * (cfg.r_max / r_plane) ** (
            np.arange(cfg.n_r_plane + 1) / cfg.n_r_plane)
        pv, pf = _lathe(radii, 0.0, ang)
        ps = np.repeat(np.log(radii / r) / tau, len(ang))
        pieces.append((pv, pf, REGIONS["end_x_plus"], ps))

        dradii = np.linspace(r_disk, r_disk / (cfg.n_r_disk + 1),
                             cfg.n_r_disk + 1)
        dv, df = _lathe(dradii, 0.0, ang, fan_height=0.0)
        ds = np.log(r / dradii) / tau
        ds = np.append(np.repeat(ds, len(ang)), s_cap)
        pieces.append((dv, df, REGIONS["end_x_minus"],
                       np.clip(ds, 0.0, s_cap)))

        tv, tf, ts = _cap_piece(cap, cfg, ang)
        pieces.append((tv, tf, REGIONS["end_y_plus"], ts))
        bv, bf, bs = _cap_piece(cap, cfg, tau * (z_b - np.pi))
        pieces.append((bv @ omega_matrix(tau), bf, REGIONS["end_y_minus"], bs))
    else:
        # bare configuration: the full cap, its mirror image, and the plane
        top = mesh_cap(cap, angles=ang)
        ts = np.full(len(top.vertices), 0.0)
        pieces.append((top.vertices, top.faces, REGIONS["end_y_plus"], ts))
        bv = top.vertices * np.array([1.0, -1.0, 1.0])
        pieces.append((bv, top.faces, REGIONS["end_y_minus"], ts))
        radii = np.linspace(cfg.r_max, cfg.r_max / (cfg.n_r_plane + 1),
                            cfg.n_r_plane + 1)
        pv, pf = _lathe(radii, 0.0, ang, fan_height=0.0)
        ps = np.zeros(len(pv))
        pieces.append((pv, pf, REGIONS["end_x_plus"], ps))

    verts = np.concatenate([p[0] for p in pieces])
    offs = np.cumsum([0] + [len(p[0]) for p in pieces[:-1]])
    faces = np.concatenate([p[1] + o for p, o in zip(pieces, offs)])
    region = np.concatenate([
        np.broadcast_to(np.asarray(p[2], dtype=np.uint8), (len(p[0]),))
        for p in pieces])
    svals = np.concatenate([p[3] for p in pieces])

    verts, faces, (region, svals) = _weld_duplicates(
        verts, faces, [region, svals], cfg.weld_tol)
    faces = _orient_faces(verts, faces)
    perms = group.vertex_permutations(verts, tol=max(cfg.weld_tol, 1e-12))
    verts = group.symmetrize_vertices(verts, perms)
    mesh = TriMesh(verts, faces, region=region,
                   orbit=group.orbit_ids(perms), s=svals)

    loops = mesh.boundary_loops()
    rim = [lp for lp in loops
           if np.hypot(verts[lp, 0], verts[lp, 2]).min() > 0.9 * cfg.r_max]
    if len(loops) != len(rim) or (cfg.handles and len(rim) != 1):
        stray = np.concatenate([lp for lp in loops if lp not in rim])
        gaps = cKDTree(verts[stray]).query(verts[stray], k=2)[0][:, 1]
        raise AssemblyError(
            f"{len(loops) - len(rim)} interior boundary loops survived the "
            f"weld; stray gap stats: max {gaps.max():.3e}, "
            f"median {np.median(gaps):.3e}")
    if cfg.handles and mesh.genus() != cfg.genus:
        raise AssemblyError(
            f"assembled genus {mesh.genus()} != requested {cfg.genus}")

    return InitialSurface(mesh=mesh, core=core, config=cfg, group=group,
                          cap=cap, permutations=perms)


# -- diagnostics --------------------------------------------------------------

def distance_to_sphere_plane(points, radius: float = 2.0):
    """Pointwise distance to the union of the radius-2 sphere and {y = 0}."""
    pts = np.asarray(points, dtype=float)
    to_sphere = np.abs(np.linalg.norm(pts, axis=-1) - radius)
    return np.minimum(to_sphere, np.abs(pts[..., 1]))
